use serde::{Deserialize, Serialize};

use super::density::{helfrich_density, poly_density, reference_offset_inverse};
use super::{EnergySpec, EnergyVariant};
use crate::admissibility::{check_admissible, BoundaryConditions, ShellConfig};
use crate::error::{Result, ShellError};
use crate::geometry::{dot, local_node_geometry, NodeGeom, SurfaceConfiguration, Sym2, Vec3};
use crate::grid::ParamGrid;
use crate::scalar::{Dual, Real};

/// Force density `f` paired with `psi` and couple density `m` paired with `a3(psi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadSpec {
    pub f: Vec<Vec3>,
    pub m: Vec<Vec3>,
}

impl LoadSpec {
    pub fn zero(n: usize) -> Self {
        Self { f: vec![[0.0; 3]; n], m: vec![[0.0; 3]; n] }
    }

    pub fn uniform(n: usize, f: Vec3, m: Vec3) -> Self {
        Self { f: vec![f; n], m: vec![m; n] }
    }

    pub fn validate(&self, grid: &ParamGrid) -> Result<()> {
        grid.check_len(self.f.len())?;
        grid.check_len(self.m.len())?;
        if !self.f.iter().chain(&self.m).flatten().all(|v| v.is_finite()) {
            return Err(ShellError::validation("loads", "entries must be finite"));
        }
        Ok(())
    }

    fn is_zero(&self) -> bool {
        self.f.iter().chain(&self.m).flatten().all(|&v| v == 0.0)
    }
}

/// `int f . psi + m . a3(psi)` by the grid quadrature.
pub fn load_form(psi: &SurfaceConfiguration, loads: &LoadSpec) -> Result<f64> {
    loads.validate(&psi.grid)?;
    Ok((0..psi.len()).map(|n| psi.grid.weight(n) * (dot(&loads.f[n], &psi.psi[n]) + dot(&loads.m[n], &psi.a3[n]))).sum())
}

/// One CSV row of the per-node density dump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityRow {
    pub node_i: usize,
    pub node_j: usize,
    #[serde(rename = "W")]
    pub w: f64,
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub sqrt_a: f64,
    pub m_plus: f64,
    pub m_minus: f64,
}

/// Value split of the augmented objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveParts {
    /// `I(psi)`
    pub energy: f64,
    pub barrier: f64,
    pub penalty: f64,
    /// Sum of absolute nodal contributions; sets the rounding scale of the total.
    pub magnitude: f64,
}

impl ObjectiveParts {
    pub fn total(&self) -> f64 {
        self.energy + self.barrier + self.penalty
    }
}

/// The discrete functional `I(psi)` together with the optional barrier and
/// normal-boundary penalty used by the minimizer.
#[derive(Debug, Clone)]
pub struct Functional<'a> {
    pub spec: &'a EnergySpec,
    pub loads: &'a LoadSpec,
    pub shell: &'a ShellConfig,
    pub barrier_mu: f64,
    bc: Option<&'a BoundaryConditions>,
    bc_slot: Vec<Option<usize>>,
    /// `[node][term] -> (offset inverse at v_i, at w_i)`
    ginv: Vec<Vec<(Sym2, Sym2)>>,
    /// `influence[j]`: nodes whose local geometry reads `psi_j`.
    influence: Vec<Vec<usize>>,
    load_free: bool,
}

impl<'a> Functional<'a> {
    pub fn new(spec: &'a EnergySpec, loads: &'a LoadSpec, shell: &'a ShellConfig) -> Result<Self> {
        spec.validate()?;
        if (spec.epsilon - shell.epsilon).abs() > 1e-15 * shell.epsilon {
            return Err(ShellError::validation(
                "epsilon",
                format!("energy uses eps = {} but the shell has eps = {}", spec.epsilon, shell.epsilon),
            ));
        }
        let grid = shell.grid();
        loads.validate(grid)?;
        let r = &shell.reference;
        let ginv = match &spec.variant {
            EnergyVariant::Helfrich(_) => vec![Vec::new(); grid.len()],
            EnergyVariant::PolyFamily(fam) => (0..grid.len())
                .map(|n| {
                    fam.terms
                        .iter()
                        .map(|t| {
                            let at = |v: f64| {
                                reference_offset_inverse(&r.grad_psi[n], &r.grad_a3[n], v)
                                    .map(|x| x.0)
                                    .ok_or(ShellError::ReferenceDegenerate { node: n, offset: v })
                            };
                            Ok((at(t.v)?, at(t.w)?))
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?,
        };
        Ok(Self {
            spec,
            loads,
            shell,
            barrier_mu: 0.0,
            bc: None,
            bc_slot: vec![None; grid.len()],
            ginv,
            influence: influence_lists(grid),
            load_free: loads.is_zero(),
        })
    }

    /// Attach the normal boundary penalty `weight * sum_{gamma0} |a3 - target|^2`.
    pub fn with_bc(mut self, bc: &'a BoundaryConditions) -> Result<Self> {
        let grid = self.shell.grid();
        if bc.target_psi.len() != bc.gamma0.len() || bc.target_a3.len() != bc.gamma0.len() {
            return Err(ShellError::Shape("boundary targets do not match gamma0".into()));
        }
        let mut slot = vec![None; grid.len()];
        for (k, &n) in bc.gamma0.iter().enumerate() {
            if n >= grid.len() {
                return Err(ShellError::Shape(format!("gamma0 node {n} outside grid")));
            }
            slot[n] = Some(k);
        }
        self.bc = Some(bc);
        self.bc_slot = slot;
        Ok(self)
    }

    pub fn grid(&self) -> &ParamGrid {
        self.shell.grid()
    }

    pub fn boundary(&self) -> Option<&'a BoundaryConditions> {
        self.bc
    }

    /// Stored energy density at one node.
    pub fn density<T: Real>(&self, n: usize, g: &NodeGeom<T>) -> Result<T> {
        match &self.spec.variant {
            EnergyVariant::Helfrich(p) => Ok(helfrich_density(g.h, g.k, g.sqrt_a, p)),
            EnergyVariant::PolyFamily(fam) => {
                let (gv, gw): (Vec<Sym2>, Vec<Sym2>) = self.ginv[n].iter().copied().unzip();
                poly_density(g, fam, self.spec.epsilon, &gv, &gw)
            }
        }
    }

    /// Barrier in normalized margins: `-mu w ln[(1 - 2 eps H + eps^2 K)(1 + 2 eps H + eps^2 K)]`.
    fn barrier<T: Real>(&self, n: usize, g: &NodeGeom<T>) -> Result<T> {
        let eps = self.spec.epsilon;
        let base = g.k * (eps * eps) + 1.0;
        let lin = g.h * (2.0 * eps);
        let (qp, qm) = (base + lin, base - lin);
        if !(qp.re() > 0.0 && qm.re() > 0.0) {
            return Err(ShellError::NumericDomain(format!("barrier undefined at node {n}: margin not positive")));
        }
        Ok((qp * qm).ln() * (-self.barrier_mu * self.grid().weight(n)))
    }

    fn penalty<T: Real>(&self, n: usize, g: &NodeGeom<T>) -> T {
        match (self.bc, self.bc_slot[n]) {
            (Some(bc), Some(k)) if bc.normal_penalty_weight > 0.0 => {
                let t = bc.target_a3[k];
                let mut s = T::zero();
                for c in 0..3 {
                    let d = g.a3[c] - t[c];
                    s += d * d;
                }
                s * bc.normal_penalty_weight
            }
            _ => T::zero(),
        }
    }

    fn node_parts<T: Real>(&self, n: usize, g: &NodeGeom<T>, augmented: bool) -> Result<[T; 3]> {
        let w = self.grid().weight(n);
        let mut e = self.density(n, g)?;
        if !self.load_free {
            let (f, m) = (self.loads.f[n], self.loads.m[n]);
            for c in 0..3 {
                e -= g.psi[c] * f[c] + g.a3[c] * m[c];
            }
        }
        e = e * w;
        if !augmented {
            return Ok([e, T::zero(), T::zero()]);
        }
        let b = if self.barrier_mu > 0.0 { self.barrier(n, g)? } else { T::zero() };
        Ok([e, b, self.penalty(n, g)])
    }

    /// Objective parts at a configuration on this functional's grid.
    pub fn evaluate(&self, psi: &SurfaceConfiguration) -> Result<ObjectiveParts> {
        if psi.grid != *self.grid() {
            return Err(ShellError::Shape("configuration and functional live on different grids".into()));
        }
        // compensated sums keep the rounding of the total near that of a single node
        let mut acc = [(0.0, 0.0); 3];
        let mut magnitude = 0.0;
        for n in 0..psi.len() {
            let parts = self.node_parts(n, &psi.node(n), true)?;
            for (a, v) in acc.iter_mut().zip(parts) {
                let y = v - a.1;
                let t = a.0 + y;
                a.1 = (t - a.0) - y;
                a.0 = t;
                magnitude += v.abs();
            }
        }
        Ok(ObjectiveParts { energy: acc[0].0, barrier: acc[1].0, penalty: acc[2].0, magnitude })
    }

    /// Gradient with respect to nodal positions by forward-mode differentiation
    /// of the local nodal chain. With `augmented`, barrier and penalty are included.
    pub fn gradient(&self, psi: &[Vec3], augmented: bool) -> Result<Vec<Vec3>> {
        let grid = self.grid();
        grid.check_len(psi.len())?;
        let mut grad = vec![[0.0; 3]; psi.len()];
        for (j, gj) in grad.iter_mut().enumerate() {
            let access = |k: usize| -> Vec3<Dual<3>> {
                let p = psi[k];
                if k == j {
                    [Dual::var(p[0], 0), Dual::var(p[1], 1), Dual::var(p[2], 2)]
                } else {
                    p.map(Dual::constant)
                }
            };
            for &n in &self.influence[j] {
                let g = local_node_geometry(grid, n, &access)?;
                for part in self.node_parts(n, &g, augmented)? {
                    for c in 0..3 {
                        gj[c] += part.eps[c];
                    }
                }
            }
        }
        if grad.iter().flatten().any(|v| !v.is_finite()) {
            return Err(ShellError::NumericDomain("non-finite gradient component".into()));
        }
        Ok(grad)
    }

    pub fn density_rows(&self, psi: &SurfaceConfiguration) -> Result<Vec<DensityRow>> {
        (0..psi.len())
            .map(|n| {
                let g = psi.node(n);
                let (m_plus, m_minus) = g.margins(self.spec.epsilon);
                let (i, j) = psi.grid.ij(n);
                Ok(DensityRow { node_i: i, node_j: j, w: self.density(n, &g)?, h: g.h, k: g.k, sqrt_a: g.sqrt_a, m_plus, m_minus })
            })
            .collect()
    }
}

fn influence_lists(grid: &ParamGrid) -> Vec<Vec<usize>> {
    let supports: Vec<Vec<usize>> = (0..grid.len()).map(|n| grid.support(n)).collect();
    let mut inf: Vec<Vec<usize>> = vec![Vec::new(); grid.len()];
    for n in 0..grid.len() {
        let mut dep = vec![n];
        for &m in &supports[n] {
            dep.push(m);
            dep.extend_from_slice(&supports[m]);
        }
        dep.sort_unstable();
        dep.dedup();
        for k in dep {
            inf[k].push(n);
        }
    }
    inf
}

/// `I(psi) = int W - L(psi, a3(psi))` for an admissible configuration.
pub fn total_energy(psi: &SurfaceConfiguration, spec: &EnergySpec, loads: &LoadSpec, shell: &ShellConfig) -> Result<f64> {
    let report = check_admissible(psi, shell, None)?;
    if !report.ok {
        return Err(ShellError::Inadmissible(Box::new(report)));
    }
    Ok(Functional::new(spec, loads, shell)?.evaluate(psi)?.energy)
}

pub fn energy_gradient(psi: &SurfaceConfiguration, spec: &EnergySpec, loads: &LoadSpec, shell: &ShellConfig) -> Result<Vec<Vec3>> {
    if psi.grid != *shell.grid() {
        return Err(ShellError::Shape("configuration and reference live on different grids".into()));
    }
    Functional::new(spec, loads, shell)?.gradient(&psi.psi, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{HelfrichParams, PolyFamily, PolyTerm};
    use crate::surfaces::SurfacePreset;

    fn plate_shell(n: usize, eps: f64) -> ShellConfig {
        let p = SurfacePreset::Plate;
        ShellConfig::new(eps, p.discrete_config(&p.grid(n, n).unwrap()).unwrap()).unwrap()
    }

    #[test]
    fn load_form_examples() {
        let shell = plate_shell(5, 0.1);
        let r = &shell.reference;
        let n = r.len();
        assert_eq!(load_form(r, &LoadSpec::uniform(n, [0.0, 0.0, -1.0], [0.0; 3])).unwrap(), 0.0);
        let lifted: Vec<Vec3> = r.psi.iter().map(|p| [p[0], p[1], 2.0]).collect();
        let cfg = SurfaceConfiguration::from_psi(&r.grid, lifted).unwrap();
        assert!((load_form(&cfg, &LoadSpec::uniform(n, [0.0, 0.0, 1.0], [0.0; 3])).unwrap() - 2.0).abs() < 1e-14);
        assert!((load_form(r, &LoadSpec::uniform(n, [0.0; 3], [0.0, 0.0, 1.0])).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn lambda_plate_energy_is_area() {
        let shell = plate_shell(7, 0.1);
        let spec = EnergySpec::helfrich(HelfrichParams { lambda: 1.0, ..Default::default() }, 0.1).unwrap();
        let loads = LoadSpec::zero(49);
        let e = total_energy(&shell.reference, &spec, &loads, &shell).unwrap();
        assert!((e - 1.0).abs() < 1e-12);
    }

    #[test]
    fn local_geometry_matches_global() {
        let shell = plate_shell(6, 0.1);
        let mut psi = shell.reference.psi.clone();
        for (k, p) in psi.iter_mut().enumerate() {
            p[2] = 0.05 * ((k * 7 % 11) as f64 / 11.0 - 0.5);
        }
        let cfg = SurfaceConfiguration::from_psi(shell.grid(), psi.clone()).unwrap();
        for n in 0..cfg.len() {
            let l = local_node_geometry(shell.grid(), n, &|k| psi[k]).unwrap();
            let g = cfg.node(n);
            assert_eq!((l.h, l.k, l.sqrt_a), (g.h, g.k, g.sqrt_a));
        }
    }

    #[test]
    fn poly_identity_density() {
        let shell = plate_shell(5, 0.1);
        let fam = PolyFamily { terms: vec![PolyTerm { a: 1.0, b: 1.0, gamma: 2.0, u: 0.0, v: 0.0, w: 0.0 }], gamma: vec![] };
        let spec = EnergySpec::poly(fam, 0.1).unwrap();
        let loads = LoadSpec::zero(25);
        let f = Functional::new(&spec, &loads, &shell).unwrap();
        for n in 0..25 {
            assert!((f.density(n, &shell.reference.node(n)).unwrap() - 4.0).abs() < 1e-14);
        }
    }

    #[test]
    fn influence_covers_self_and_neighbours() {
        let g = SurfacePreset::Plate.grid(6, 6).unwrap();
        let inf = influence_lists(&g);
        let c = g.index(3, 3);
        assert!(inf[c].contains(&c) && inf[c].contains(&g.index(3, 5)) && inf[c].contains(&g.index(4, 4)));
    }
}

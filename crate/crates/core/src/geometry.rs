//! Discrete differential geometry of parametric midsurfaces.
//!
//! Sign conventions follow the parametrization: the unit normal is
//! `a3 = (d1 psi ^ d2 psi) / |d1 psi ^ d2 psi|` with no re-orientation, and
//! `b_ab = -d_a psi . d_b a3`. A sphere whose parametrization yields the
//! outward normal therefore has `H = -1/R`.

use crate::error::{Result, ShellError};
use crate::grid::ParamGrid;
use crate::scalar::Real;

pub type Vec3<T = f64> = [T; 3];
/// 3x2 matrix stored by columns: `[d1 f, d2 f]`.
pub type Grad3<T = f64> = [[T; 3]; 2];
pub type Sym2<T = f64> = [[T; 2]; 2];

/// `|d1 psi ^ d2 psi|` at or below this value is treated as degenerate.
pub const EPS_DEGENERATE: f64 = 1e-14;

#[inline]
pub fn dot<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> Vec3<T> {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
pub fn norm<T: Real>(a: &Vec3<T>) -> T {
    dot(a, a).sqrt()
}

#[inline]
pub fn det2<T: Real>(m: &Sym2<T>) -> T {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

#[inline]
pub fn inv2<T: Real>(m: &Sym2<T>) -> Sym2<T> {
    let d = det2(m);
    [[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]]
}

/// Unit normal and area element from the tangent pair; `None` when degenerate.
#[inline]
pub fn frame_node<T: Real>(g: &Grad3<T>) -> Option<(Vec3<T>, T)> {
    let n = cross(&g[0], &g[1]);
    let s = norm(&n);
    if !(s.re() > EPS_DEGENERATE) {
        return None;
    }
    Some(([n[0] / s, n[1] / s, n[2] / s], s))
}

/// First, second and third fundamental forms at one node.
#[derive(Debug, Clone, Copy)]
pub struct NodeForms<T = f64> {
    pub a: Sym2<T>,
    pub b: Sym2<T>,
    pub c: Sym2<T>,
    pub a_inv: Sym2<T>,
}

pub fn forms_node<T: Real>(gp: &Grad3<T>, ga3: &Grad3<T>) -> NodeForms<T> {
    let mut a = [[T::zero(); 2]; 2];
    let mut b = [[T::zero(); 2]; 2];
    let mut c = [[T::zero(); 2]; 2];
    for al in 0..2 {
        for be in 0..2 {
            a[al][be] = dot(&gp[al], &gp[be]);
            b[al][be] = -(dot(&gp[al], &ga3[be]) + dot(&gp[be], &ga3[al])) * 0.5;
            c[al][be] = dot(&ga3[al], &ga3[be]);
        }
    }
    NodeForms { a, b, c, a_inv: inv2(&a) }
}

/// Mean and Gaussian curvature from the mixed tensor `b_a^b = b_ar a^rb`.
pub fn mean_gauss<T: Real>(f: &NodeForms<T>) -> (T, T) {
    let mut mixed = [[T::zero(); 2]; 2];
    for al in 0..2 {
        for be in 0..2 {
            mixed[al][be] = f.b[al][0] * f.a_inv[0][be] + f.b[al][1] * f.a_inv[1][be];
        }
    }
    ((mixed[0][0] + mixed[1][1]) * 0.5, det2(&mixed))
}

/// Principal curvatures, sorted `kappa1 >= kappa2`.
pub fn principal(h: f64, k: f64) -> (f64, f64) {
    let d = (h * h - k).max(0.0).sqrt();
    (h + d, h - d)
}

/// `det(a - 2z b + z^2 c)` at one node.
pub fn offset_metric_det(f: &NodeForms<f64>, z: f64) -> f64 {
    let mut m = [[0.0; 2]; 2];
    for al in 0..2 {
        for be in 0..2 {
            m[al][be] = f.a[al][be] - 2.0 * z * f.b[al][be] + z * z * f.c[al][be];
        }
    }
    det2(&m)
}

/// Volume element of the offset map at height `z`: `(1 - z k1)(1 - z k2) sqrt_a`.
pub fn shell_jacobian(kappa1: f64, kappa2: f64, sqrt_a: f64, z: f64) -> f64 {
    (1.0 - z * kappa1) * (1.0 - z * kappa2) * sqrt_a
}

/// Per-node unit normal and area element; errors with the degenerate nodes.
pub fn frame(grad_psi: &[Grad3]) -> Result<(Vec<Vec3>, Vec<f64>)> {
    let mut a3 = Vec::with_capacity(grad_psi.len());
    let mut sqrt_a = Vec::with_capacity(grad_psi.len());
    let mut bad = Vec::new();
    for (n, g) in grad_psi.iter().enumerate() {
        match frame_node(g) {
            Some((v, s)) => {
                a3.push(v);
                sqrt_a.push(s);
            }
            None => {
                bad.push(n);
                a3.push([0.0; 3]);
                sqrt_a.push(0.0);
            }
        }
    }
    if bad.is_empty() {
        Ok((a3, sqrt_a))
    } else {
        Err(ShellError::DegenerateSurface { nodes: bad })
    }
}

/// Symmetric vector-product bracket `1/2 (d1 f1 ^ d2 f2 + d1 f2 ^ d2 f1)`.
pub fn bracket(grad1: &[Grad3], grad2: &[Grad3]) -> Result<Vec<Vec3>> {
    if grad1.len() != grad2.len() {
        return Err(ShellError::Shape(format!("bracket operands have {} and {} nodes", grad1.len(), grad2.len())));
    }
    Ok(grad1
        .iter()
        .zip(grad2)
        .map(|(g1, g2)| {
            let p = cross(&g1[0], &g2[1]);
            let q = cross(&g2[0], &g1[1]);
            [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1]), 0.5 * (p[2] + q[2])]
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct SurfaceConfiguration {
    pub grid: ParamGrid,
    pub psi: Vec<Vec3>,
    pub grad_psi: Vec<Grad3>,
    pub a3: Vec<Vec3>,
    pub grad_a3: Vec<Grad3>,
    pub sqrt_a: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FundamentalForms {
    pub a_ab: Vec<Sym2>,
    pub b_ab: Vec<Sym2>,
    pub c_ab: Vec<Sym2>,
    pub a_inv: Vec<Sym2>,
}

impl FundamentalForms {
    pub fn node(&self, n: usize) -> NodeForms {
        NodeForms { a: self.a_ab[n], b: self.b_ab[n], c: self.c_ab[n], a_inv: self.a_inv[n] }
    }

    pub fn len(&self) -> usize {
        self.a_ab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a_ab.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct CurvatureData {
    pub h: Vec<f64>,
    pub k: Vec<f64>,
    pub kappa1: Vec<f64>,
    pub kappa2: Vec<f64>,
}

impl SurfaceConfiguration {
    /// Discrete configuration from nodal positions: difference stencils for
    /// `grad psi`, nodal normals, then the same stencils on `a3`.
    pub fn from_psi(grid: &ParamGrid, psi: Vec<Vec3>) -> Result<Self> {
        let grad_psi = crate::grid::differentiate(&psi, grid)?;
        let (a3, sqrt_a) = frame(&grad_psi)?;
        let grad_a3 = crate::grid::differentiate(&a3, grid)?;
        Ok(Self { grid: grid.clone(), psi, grad_psi, a3, grad_a3, sqrt_a })
    }

    /// Configuration from exactly known fields (analytic sampling).
    pub fn from_fields(grid: &ParamGrid, psi: Vec<Vec3>, grad_psi: Vec<Grad3>, grad_a3: Vec<Grad3>) -> Result<Self> {
        grid.check_len(psi.len())?;
        grid.check_len(grad_psi.len())?;
        grid.check_len(grad_a3.len())?;
        let (a3, sqrt_a) = frame(&grad_psi)?;
        Ok(Self { grid: grid.clone(), psi, grad_psi, a3, grad_a3, sqrt_a })
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }

    /// Largest `|a3 . d_a psi|` over nodes and both directions.
    pub fn max_orthogonality_defect(&self) -> f64 {
        self.a3.iter().zip(&self.grad_psi).flat_map(|(n, g)| [dot(n, &g[0]).abs(), dot(n, &g[1]).abs()]).fold(0.0, f64::max)
    }

    /// Check the stored-field invariants: unit normals, orthogonality within
    /// `tol_orth`, positive area elements.
    pub fn validate(&self, tol_orth: f64) -> Result<()> {
        for (n, v) in self.a3.iter().enumerate() {
            if (norm(v) - 1.0).abs() > 1e-12 {
                return Err(ShellError::NumericDomain(format!("|a3| != 1 at node {n}")));
            }
        }
        let defect = self.max_orthogonality_defect();
        if defect > tol_orth {
            return Err(ShellError::NumericDomain(format!("normal not orthogonal to tangents: defect {defect:e} > {tol_orth:e}")));
        }
        let bad: Vec<usize> = (0..self.len()).filter(|&n| !(self.sqrt_a[n] > 0.0)).collect();
        if !bad.is_empty() {
            return Err(ShellError::DegenerateSurface { nodes: bad });
        }
        Ok(())
    }

    pub fn forms_at(&self, n: usize) -> NodeForms {
        forms_node(&self.grad_psi[n], &self.grad_a3[n])
    }
}

pub fn fundamental_forms(config: &SurfaceConfiguration) -> Result<FundamentalForms> {
    let n = config.len();
    let mut out = FundamentalForms {
        a_ab: Vec::with_capacity(n),
        b_ab: Vec::with_capacity(n),
        c_ab: Vec::with_capacity(n),
        a_inv: Vec::with_capacity(n),
    };
    let mut bad = Vec::new();
    for node in 0..n {
        let f = config.forms_at(node);
        if !(det2(&f.a) > 0.0) {
            bad.push(node);
        }
        out.a_ab.push(f.a);
        out.b_ab.push(f.b);
        out.c_ab.push(f.c);
        out.a_inv.push(f.a_inv);
    }
    if bad.is_empty() {
        Ok(out)
    } else {
        Err(ShellError::DegenerateMetric { nodes: bad })
    }
}

pub fn curvatures(forms: &FundamentalForms) -> CurvatureData {
    let n = forms.len();
    let mut out =
        CurvatureData { h: Vec::with_capacity(n), k: Vec::with_capacity(n), kappa1: Vec::with_capacity(n), kappa2: Vec::with_capacity(n) };
    for node in 0..n {
        let (h, k) = mean_gauss(&forms.node(node));
        let (k1, k2) = principal(h, k);
        out.h.push(h);
        out.k.push(k);
        out.kappa1.push(k1);
        out.kappa2.push(k2);
    }
    out
}

/// Geometry needed by the energy densities at one node, generic over the
/// scalar so the same formulas serve values and forward-mode tangents.
#[derive(Debug, Clone, Copy)]
pub struct NodeGeom<T = f64> {
    pub psi: Vec3<T>,
    pub grad_psi: Grad3<T>,
    pub a3: Vec3<T>,
    pub grad_a3: Grad3<T>,
    pub sqrt_a: T,
    pub forms: NodeForms<T>,
    pub h: T,
    pub k: T,
}

impl<T: Real> NodeGeom<T> {
    pub fn assemble(psi: Vec3<T>, grad_psi: Grad3<T>, a3: Vec3<T>, sqrt_a: T, grad_a3: Grad3<T>) -> Self {
        let forms = forms_node(&grad_psi, &grad_a3);
        let (h, k) = mean_gauss(&forms);
        Self { psi, grad_psi, a3, grad_a3, sqrt_a, forms, h, k }
    }

    /// Orientation margins `(m_plus, m_minus) = (1 +- 2 eps H + eps^2 K) sqrt_a`.
    pub fn margins(&self, epsilon: f64) -> (T, T) {
        let base = self.k * (epsilon * epsilon) + 1.0;
        let lin = self.h * (2.0 * epsilon);
        ((base + lin) * self.sqrt_a, (base - lin) * self.sqrt_a)
    }
}

impl SurfaceConfiguration {
    pub fn node(&self, n: usize) -> NodeGeom<f64> {
        NodeGeom::assemble(self.psi[n], self.grad_psi[n], self.a3[n], self.sqrt_a[n], self.grad_a3[n])
    }
}

/// Recompute the geometry at `node` from a nodal position accessor.
///
/// Uses exactly the arithmetic of [`SurfaceConfiguration::from_psi`], so the
/// `f64` instance reproduces the stored fields bit for bit.
pub fn local_node_geometry<T: Real, F: Fn(usize) -> Vec3<T>>(grid: &ParamGrid, node: usize, psi: &F) -> Result<NodeGeom<T>> {
    let tangent = |n: usize| -> Grad3<T> { [grid.derivative_at(n, 0, psi), grid.derivative_at(n, 1, psi)] };
    let normal = |n: usize| -> Result<(Vec3<T>, T)> { frame_node(&tangent(n)).ok_or(ShellError::DegenerateSurface { nodes: vec![n] }) };
    let gp = tangent(node);
    let (a3, sqrt_a) = frame_node(&gp).ok_or(ShellError::DegenerateSurface { nodes: vec![node] })?;
    let mut ga3 = [[T::zero(); 3]; 2];
    for (dir, col) in ga3.iter_mut().enumerate() {
        let s = grid.stencil(node, dir);
        for (n, w) in s.taps() {
            let v = if n == node { a3 } else { normal(n)?.0 };
            for c in 0..3 {
                col[c] += v[c] * w;
            }
        }
    }
    Ok(NodeGeom::assemble(psi(node), gp, a3, sqrt_a, ga3))
}

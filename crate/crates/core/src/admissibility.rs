//! Membership tests for the admissible deformation set and the
//! polyconvexity domain, plus the orientation margins.

use serde::{Deserialize, Serialize};

use crate::error::{Result, ShellError};
use crate::geometry::{curvatures, fundamental_forms, norm, CurvatureData, FundamentalForms, Grad3, SurfaceConfiguration, Vec3};
use crate::grid::ParamGrid;

/// Default tolerance on boundary-condition residuals.
pub const BC_TOL: f64 = 1e-9;

/// `(a, b, c)` lies in the cone `a - |b| > 0, a - 2|b| + c > 0`.
#[inline]
pub fn m_membership(a: f64, b: f64, c: f64) -> bool {
    a - b.abs() > 0.0 && a - 2.0 * b.abs() + c > 0.0
}

/// `(m_plus, m_minus) = ((1 + 2 eps H + eps^2 K) sqrt_a, (1 - 2 eps H + eps^2 K) sqrt_a)`.
#[inline]
pub fn orientation_margins(h: f64, k: f64, sqrt_a: f64, epsilon: f64) -> (f64, f64) {
    let base = 1.0 + epsilon * epsilon * k;
    let lin = 2.0 * epsilon * h;
    ((base + lin) * sqrt_a, (base - lin) * sqrt_a)
}

/// A point of the polyconvexity domain: two 3x2 matrices and three scalars.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MPoint {
    #[serde(rename = "A")]
    pub a_mat: Grad3,
    #[serde(rename = "B")]
    pub b_mat: Grad3,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl MPoint {
    pub fn in_m(&self) -> bool {
        m_membership(self.a, self.b, self.c)
    }

    /// `t * self + (1 - t) * other`.
    pub fn lerp(&self, other: &MPoint, t: f64) -> MPoint {
        let s = 1.0 - t;
        let mut a_mat = [[0.0; 3]; 2];
        let mut b_mat = [[0.0; 3]; 2];
        for al in 0..2 {
            for i in 0..3 {
                a_mat[al][i] = t * self.a_mat[al][i] + s * other.a_mat[al][i];
                b_mat[al][i] = t * self.b_mat[al][i] + s * other.b_mat[al][i];
            }
        }
        MPoint { a_mat, b_mat, a: t * self.a + s * other.a, b: t * self.b + s * other.b, c: t * self.c + s * other.c }
    }
}

/// Reference shell: half-thickness and reference midsurface with its geometry.
#[derive(Debug, Clone)]
pub struct ShellConfig {
    pub epsilon: f64,
    pub reference: SurfaceConfiguration,
    pub forms: FundamentalForms,
    pub curvature: CurvatureData,
}

impl ShellConfig {
    pub fn new(epsilon: f64, reference: SurfaceConfiguration) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(ShellError::validation("epsilon", format!("half-thickness must be positive (got {epsilon})")));
        }
        let forms = fundamental_forms(&reference)?;
        let curvature = curvatures(&forms);
        let shell = Self { epsilon, reference, forms, curvature };
        let m = shell.max_eps_kappa();
        if !(m < 1.0) {
            return Err(ShellError::validation("epsilon", format!("reference midsurface violates max |eps * kappa| < 1 (got {m})")));
        }
        Ok(shell)
    }

    pub fn grid(&self) -> &ParamGrid {
        &self.reference.grid
    }

    pub fn max_eps_kappa(&self) -> f64 {
        self.curvature
            .kappa1
            .iter()
            .zip(&self.curvature.kappa2)
            .map(|(k1, k2)| (self.epsilon * k1).abs().max((self.epsilon * k2).abs()))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    /// `x2` minimal (`j = 0`).
    South,
    /// `x2` maximal.
    North,
    /// `x1` minimal (`i = 0`).
    West,
    /// `x1` maximal.
    East,
}

/// Clamped part of the boundary: named edges or explicit `[i, j]` nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum Gamma0Spec {
    Edges(Vec<Edge>),
    Nodes(Vec<[usize; 2]>),
}

impl Gamma0Spec {
    /// Resolve to sorted node indices, checking they are boundary nodes and
    /// that at least two of them are adjacent.
    pub fn resolve(&self, grid: &ParamGrid) -> Result<Vec<usize>> {
        let mut nodes = Vec::new();
        match self {
            Gamma0Spec::Edges(edges) => {
                for e in edges {
                    let (periodic, line): (bool, Vec<usize>) = match e {
                        Edge::South => (grid.periodic2, (0..grid.nx).map(|i| grid.index(i, 0)).collect()),
                        Edge::North => (grid.periodic2, (0..grid.nx).map(|i| grid.index(i, grid.ny - 1)).collect()),
                        Edge::West => (grid.periodic1, (0..grid.ny).map(|j| grid.index(0, j)).collect()),
                        Edge::East => (grid.periodic1, (0..grid.ny).map(|j| grid.index(grid.nx - 1, j)).collect()),
                    };
                    if periodic {
                        return Err(ShellError::validation("bc.gamma0", format!("edge {e:?} does not exist in a periodic direction")));
                    }
                    nodes.extend(line);
                }
            }
            Gamma0Spec::Nodes(list) => {
                for &[i, j] in list {
                    if i >= grid.nx || j >= grid.ny {
                        return Err(ShellError::validation("bc.gamma0", format!("node [{i}, {j}] outside the grid")));
                    }
                    nodes.push(grid.index(i, j));
                }
            }
        }
        nodes.sort_unstable();
        nodes.dedup();
        if let Some(&n) = nodes.iter().find(|&&n| !grid.boundary_mask[n]) {
            let (i, j) = grid.ij(n);
            return Err(ShellError::validation("bc.gamma0", format!("node [{i}, {j}] is not a boundary node")));
        }
        let adjacent = nodes.iter().any(|&n| {
            let (i, j) = grid.ij(n);
            let right = if i + 1 < grid.nx { Some(grid.index(i + 1, j)) } else { None };
            let up = if j + 1 < grid.ny { Some(grid.index(i, j + 1)) } else { None };
            [right, up].into_iter().flatten().any(|m| nodes.binary_search(&m).is_ok())
        });
        if nodes.len() < 2 || !adjacent {
            return Err(ShellError::validation("bc.gamma0", "needs at least two contiguous boundary nodes"));
        }
        Ok(nodes)
    }
}

/// Position and normal prescribed on the clamped boundary part.
#[derive(Debug, Clone)]
pub struct BoundaryConditions {
    pub gamma0: Vec<usize>,
    pub target_psi: Vec<Vec3>,
    pub target_a3: Vec<Vec3>,
    pub normal_penalty_weight: f64,
}

impl BoundaryConditions {
    /// Clamp `gamma0` to the reference midsurface: `psi = phi`, `a3(psi) = a3(phi)`.
    pub fn clamped(spec: &Gamma0Spec, reference: &SurfaceConfiguration, normal_penalty_weight: f64) -> Result<Self> {
        if !(normal_penalty_weight >= 0.0) {
            return Err(ShellError::validation("bc.normal_penalty_weight", "must be >= 0"));
        }
        let gamma0 = spec.resolve(&reference.grid)?;
        Ok(Self {
            target_psi: gamma0.iter().map(|&n| reference.psi[n]).collect(),
            target_a3: gamma0.iter().map(|&n| reference.a3[n]).collect(),
            gamma0,
            normal_penalty_weight,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    DegenerateArea,
    MarginPlus,
    MarginMinus,
    CurvatureRadius,
    PositionBc,
    NormalBc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub node: usize,
    pub kind: ViolationKind,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BcResiduals {
    pub psi: f64,
    pub a3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub ok: bool,
    pub min_sqrt_a: f64,
    pub min_margin_plus: f64,
    pub min_margin_minus: f64,
    pub max_eps_kappa: f64,
    pub violations: Vec<Violation>,
    pub violating_nodes: Vec<usize>,
    pub bc_residuals: BcResiduals,
    pub bc_tolerance: BcResiduals,
}

pub fn check_admissible(psi: &SurfaceConfiguration, shell: &ShellConfig, bc: Option<&BoundaryConditions>) -> Result<AdmissibilityReport> {
    check_admissible_with(psi, shell, bc, BcResiduals { psi: BC_TOL, a3: BC_TOL })
}

/// Nodewise evaluation of every admissibility condition with explicit
/// boundary tolerances.
pub fn check_admissible_with(
    psi: &SurfaceConfiguration,
    shell: &ShellConfig,
    bc: Option<&BoundaryConditions>,
    tol: BcResiduals,
) -> Result<AdmissibilityReport> {
    if psi.grid != *shell.grid() {
        return Err(ShellError::Shape("configuration and reference live on different grids".into()));
    }
    let eps = shell.epsilon;
    let forms = fundamental_forms(psi)?;
    let curv = curvatures(&forms);
    let mut violations = Vec::new();
    let (mut min_sqrt_a, mut min_p, mut min_m, mut max_ek) = (f64::INFINITY, f64::INFINITY, f64::INFINITY, 0.0f64);
    for n in 0..psi.len() {
        let s = psi.sqrt_a[n];
        let (mp, mm) = orientation_margins(curv.h[n], curv.k[n], s, eps);
        let ek = (eps * curv.kappa1[n]).abs().max((eps * curv.kappa2[n]).abs());
        min_sqrt_a = min_sqrt_a.min(s);
        min_p = min_p.min(mp);
        min_m = min_m.min(mm);
        max_ek = max_ek.max(ek);
        let mut flag = |kind, value| violations.push(Violation { node: n, kind, value });
        if !(s > 0.0) {
            flag(ViolationKind::DegenerateArea, s);
        }
        if !(mp > 0.0) {
            flag(ViolationKind::MarginPlus, mp);
        }
        if !(mm > 0.0) {
            flag(ViolationKind::MarginMinus, mm);
        }
        if !(ek < 1.0) {
            flag(ViolationKind::CurvatureRadius, ek);
        }
    }
    let mut res = BcResiduals { psi: 0.0, a3: 0.0 };
    if let Some(bc) = bc {
        for (k, &n) in bc.gamma0.iter().enumerate() {
            let dp = sub(&psi.psi[n], &bc.target_psi[k]);
            let dn = sub(&psi.a3[n], &bc.target_a3[k]);
            let (rp, rn) = (norm(&dp), norm(&dn));
            res.psi = res.psi.max(rp);
            res.a3 = res.a3.max(rn);
            if rp > tol.psi {
                violations.push(Violation { node: n, kind: ViolationKind::PositionBc, value: rp });
            }
            if rn > tol.a3 {
                violations.push(Violation { node: n, kind: ViolationKind::NormalBc, value: rn });
            }
        }
    }
    let mut violating_nodes: Vec<usize> = violations.iter().map(|v| v.node).collect();
    violating_nodes.sort_unstable();
    violating_nodes.dedup();
    Ok(AdmissibilityReport {
        ok: violations.is_empty(),
        min_sqrt_a,
        min_margin_plus: min_p,
        min_margin_minus: min_m,
        max_eps_kappa: max_ek,
        violations,
        violating_nodes,
        bc_residuals: res,
        bc_tolerance: tol,
    })
}

fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

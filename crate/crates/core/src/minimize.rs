//! Barrier-continuation descent for the clamped shell problem.
//!
//! Each stage minimizes `I + mu * barrier + normal penalty` by limited-memory
//! BFGS preconditioned with a fixed Sobolev metric, with Armijo backtracking. The metric
//! combines first- and second-difference stiffness matrices built from the
//! grid stencils, weighted per component by Rayleigh quotients of the
//! objective at the initial iterate.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::admissibility::{check_admissible_with, AdmissibilityReport, BcResiduals, BoundaryConditions, ShellConfig, BC_TOL};
use crate::energy::{EnergySpec, Functional, LoadSpec};
use crate::error::{Result, ShellError};
use crate::geometry::{frame_node, SurfaceConfiguration, Vec3, EPS_DEGENERATE};
use crate::grid::ParamGrid;
use crate::scalar::Dual;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuSchedule {
    pub initial: f64,
    pub decay: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRule {
    pub initial: f64,
    pub shrink: f64,
    pub armijo: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_outer: usize,
    pub max_inner: usize,
    pub mu_schedule: MuSchedule,
    pub step_rule: StepRule,
    pub grad_tol: f64,
    pub margin_floor: f64,
    /// Tolerance on `|a3(psi) - target|` at gamma0 for the final report.
    pub normal_bc_tol: f64,
    pub p: f64,
    pub q: f64,
    /// Number of L-BFGS correction pairs; 0 gives plain metric descent.
    pub memory: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_outer: 4,
            max_inner: 500,
            mu_schedule: MuSchedule { initial: 1e-4, decay: 0.1 },
            step_rule: StepRule { initial: 1.0, shrink: 0.5, armijo: 1e-4 },
            grad_tol: 1e-8,
            margin_floor: 1e-10,
            normal_bc_tol: 1e-4,
            p: 2.0,
            q: 2.0,
            memory: 8,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let v = |f: &str, m: &str| Err(ShellError::validation(format!("solver.{f}"), m));
        if self.max_outer == 0 || self.max_inner == 0 {
            return v("max_outer", "iteration limits must be >= 1");
        }
        if !(self.mu_schedule.initial >= 0.0 && self.mu_schedule.initial.is_finite()) {
            return v("mu_schedule.initial", "must be >= 0");
        }
        if !(self.mu_schedule.decay > 0.0 && self.mu_schedule.decay < 1.0) {
            return v("mu_schedule.decay", "decay factor must lie in (0, 1)");
        }
        if !(self.step_rule.initial > 0.0) {
            return v("step_rule.initial", "must be > 0");
        }
        if !(self.step_rule.shrink > 0.0 && self.step_rule.shrink < 1.0) {
            return v("step_rule.shrink", "must lie in (0, 1)");
        }
        if !(self.step_rule.armijo > 0.0 && self.step_rule.armijo <= 0.5) {
            return v("step_rule.armijo", "Armijo constant must lie in (0, 0.5]");
        }
        for (f, x) in [("grad_tol", self.grad_tol), ("margin_floor", self.margin_floor), ("normal_bc_tol", self.normal_bc_tol)] {
            if !(x > 0.0) {
                return v(f, "tolerances must be > 0");
            }
        }
        if !(self.p >= 2.0) {
            return v("p", "norm exponent p must be >= 2");
        }
        if !(self.q > 1.0) {
            return v("q", "norm exponent q must be > 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryNorms {
    pub psi_1p: f64,
    pub a3_1p: f64,
    pub sqrt_a_q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Iterations {
    pub outer: usize,
    pub inner_total: usize,
    pub accepted_steps: usize,
    pub rejected_trials: usize,
}

/// Per-stage summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub mu: f64,
    /// Index into the histories where the stage starts.
    pub start: usize,
    pub iterations: usize,
    pub objective: f64,
    pub grad_norm: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub psi_final: SurfaceConfiguration,
    /// `I(psi)` at the start and after every accepted step.
    pub energy_history: Vec<f64>,
    /// Objective actually descended (`I` + barrier + penalty), same indexing.
    pub objective_history: Vec<f64>,
    /// Projected gradient norm of the objective, same indexing.
    pub grad_norm_history: Vec<f64>,
    pub stages: Vec<StageRecord>,
    /// Norms at the initial iterate and after every stage.
    pub norm_history: Vec<TrajectoryNorms>,
    pub admissibility: AdmissibilityReport,
    pub converged: bool,
    pub iterations: Iterations,
    pub stall: Option<String>,
}

/// Replace gamma0 values by their targets.
pub fn apply_dirichlet(psi: &[Vec3], bc: &BoundaryConditions) -> Result<Vec<Vec3>> {
    let mut out = psi.to_vec();
    for (k, &n) in bc.gamma0.iter().enumerate() {
        let slot = out.get_mut(n).ok_or_else(|| ShellError::Shape(format!("gamma0 node {n} outside field of {} nodes", psi.len())))?;
        *slot = bc.target_psi[k];
    }
    Ok(out)
}

/// Discrete `W^{1,p}` norms of `psi` and `a3(psi)` and the `L^q` norm of `sqrt_a`.
pub fn trajectory_norms(psi: &SurfaceConfiguration, p: f64, q: f64) -> TrajectoryNorms {
    let grid = &psi.grid;
    let len = |v: &Vec3| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let mut s = [0.0; 3];
    for n in 0..psi.len() {
        let w = grid.weight(n);
        s[0] += w * (len(&psi.psi[n]).powf(p) + len(&psi.grad_psi[n][0]).powf(p) + len(&psi.grad_psi[n][1]).powf(p));
        s[1] += w * (len(&psi.a3[n]).powf(p) + len(&psi.grad_a3[n][0]).powf(p) + len(&psi.grad_a3[n][1]).powf(p));
        s[2] += w * psi.sqrt_a[n].powf(q);
    }
    TrajectoryNorms { psi_1p: s[0].powf(1.0 / p), a3_1p: s[1].powf(1.0 / p), sqrt_a_q: s[2].powf(1.0 / q) }
}

/// Sobolev metric on the free nodes, one factorization per component.
struct Metric {
    free: Vec<usize>,
    chol: Vec<Cholesky<f64, Dyn>>,
}

impl Metric {
    fn build(f: &Functional, psi: &[Vec3], free: Vec<usize>) -> Result<Self> {
        let grid = f.grid();
        let (lap, bih, mass) = stiffness(grid, &free);
        let nf = free.len();
        let probes = probe_modes(grid, &free);
        let scale = psi.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
        // curvature of energy and barrier is fitted; the penalty enters through its Gauss-Newton block
        let mut fe = Functional::new(f.spec, f.loads, f.shell)?;
        fe.barrier_mu = f.barrier_mu;
        let pen = match f.boundary() {
            Some(bc) if bc.normal_penalty_weight > 0.0 => penalty_blocks(grid, psi, bc, &free)?,
            _ => vec![DMatrix::zeros(nf, nf); 3],
        };
        let mut chol = Vec::with_capacity(3);
        for (c, pen_c) in pen.into_iter().enumerate() {
            let mut rows = Vec::with_capacity(2);
            for v in &probes {
                let hv = hessian_quadratic(&fe, psi, &free, v, c, scale)?;
                rows.push([quad(&lap, v), quad(&bih, v), hv]);
            }
            let (am, ab) = fit_weights(&rows);
            let mut p = &lap * am + &bih * ab + pen_c;
            let dmax = (0..nf).map(|i| p[(i, i)]).fold(0.0f64, f64::max);
            let reg = if dmax > 0.0 { 1e-10 * dmax } else { 1.0 };
            for i in 0..nf {
                p[(i, i)] += reg * mass[i] / mass.iter().cloned().fold(0.0, f64::max);
            }
            chol.push(Cholesky::new(p).ok_or_else(|| ShellError::NumericDomain("descent metric is not positive definite".into()))?);
        }
        Ok(Self { free, chol })
    }

    fn direction(&self, g: &[Vec3]) -> Vec<Vec3> {
        let mut d = vec![[0.0; 3]; g.len()];
        for c in 0..3 {
            let rhs = DVector::from_iterator(self.free.len(), self.free.iter().map(|&n| g[n][c]));
            let x = self.chol[c].solve(&rhs);
            for (k, &n) in self.free.iter().enumerate() {
                d[n][c] = -x[k];
            }
        }
        d
    }
}

/// Per-component diagonal blocks of `weight * J^T J`, `J = d a3 / d psi` on gamma0.
fn penalty_blocks(grid: &ParamGrid, psi: &[Vec3], bc: &BoundaryConditions, free: &[usize]) -> Result<Vec<DMatrix<f64>>> {
    let mut slot = vec![usize::MAX; grid.len()];
    for (k, &i) in free.iter().enumerate() {
        slot[i] = k;
    }
    let nf = free.len();
    let mut out = vec![DMatrix::zeros(nf, nf); 3];
    for &n in &bc.gamma0 {
        let sup: Vec<usize> = grid.support(n).into_iter().filter(|&m| slot[m] != usize::MAX).collect();
        // jac[k][i][c] = d a3_i / d psi_{sup[k], c}
        let mut jac = Vec::with_capacity(sup.len());
        for &m in &sup {
            let access = |k: usize| -> Vec3<Dual<3>> {
                let p = psi[k];
                if k == m {
                    [Dual::var(p[0], 0), Dual::var(p[1], 1), Dual::var(p[2], 2)]
                } else {
                    p.map(Dual::constant)
                }
            };
            let t = [grid.derivative_at(n, 0, &access), grid.derivative_at(n, 1, &access)];
            let (a3, _) = frame_node(&t).ok_or(ShellError::DegenerateSurface { nodes: vec![n] })?;
            jac.push(a3.map(|d| d.eps));
        }
        for (c, block) in out.iter_mut().enumerate() {
            for (k, &m) in sup.iter().enumerate() {
                for (l, &mm) in sup.iter().enumerate() {
                    let v: f64 = (0..3).map(|i| jac[k][i][c] * jac[l][i][c]).sum();
                    block[(slot[m], slot[mm])] += 2.0 * bc.normal_penalty_weight * v;
                }
            }
        }
    }
    Ok(out)
}

fn quad(m: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    v.dot(&(m * v))
}

/// `v^T H v` for the component-`c` embedding of `v`, by central differences of the gradient.
fn hessian_quadratic(f: &Functional, psi: &[Vec3], free: &[usize], v: &DVector<f64>, c: usize, scale: f64) -> Result<f64> {
    let vmax = v.amax();
    let mut h = 1e-5 * scale / vmax;
    for _ in 0..30 {
        let shifted = |sgn: f64| {
            let mut x = psi.to_vec();
            for (k, &n) in free.iter().enumerate() {
                x[n][c] += sgn * h * v[k];
            }
            x
        };
        let (xp, xm) = (shifted(1.0), shifted(-1.0));
        let ok = |x: &Vec<Vec3>| SurfaceConfiguration::from_psi(f.grid(), x.clone()).ok().and_then(|cfg| f.evaluate(&cfg).ok()).is_some();
        if ok(&xp) && ok(&xm) {
            let gp = f.gradient(&xp, true)?;
            let gm = f.gradient(&xm, true)?;
            return Ok(free.iter().enumerate().map(|(k, &n)| v[k] * (gp[n][c] - gm[n][c]) / (2.0 * h)).sum());
        }
        h *= 0.25;
    }
    Err(ShellError::NumericDomain("no feasible probe for the descent metric".into()))
}

/// Nonnegative weights `(a_m, a_b)` with `a_m * l + a_b * b ~ h` on the probe rows.
fn fit_weights(rows: &[[f64; 3]]) -> (f64, f64) {
    let [l0, b0, h0] = rows[0];
    let [l1, b1, h1] = rows[1];
    let det = l0 * b1 - l1 * b0;
    if det.abs() > 1e-14 * (l0 * b1).abs() {
        let am = (h0 * b1 - h1 * b0) / det;
        let ab = (l0 * h1 - l1 * h0) / det;
        if am >= 0.0 && ab >= 0.0 && am + ab > 0.0 {
            return (am, ab);
        }
    }
    // single-term fits; keep the one with smaller relative misfit
    let fit = |x0: f64, x1: f64| {
        let a = ((h0 / x0).max(0.0) + (h1 / x1).max(0.0)) * 0.5;
        let err = ((a * x0 - h0) / h0.abs().max(1e-300)).abs() + ((a * x1 - h1) / h1.abs().max(1e-300)).abs();
        (a, err)
    };
    let (am, em) = fit(l0, l1);
    let (ab, eb) = fit(b0, b1);
    match (am > 0.0, ab > 0.0) {
        (true, true) if em <= eb => (am, 0.0),
        (_, true) => (0.0, ab),
        (true, false) => (am, 0.0),
        (false, false) => (1.0, 1.0),
    }
}

/// Smooth and oscillating probe vectors on the free nodes.
fn probe_modes(grid: &ParamGrid, free: &[usize]) -> [DVector<f64>; 2] {
    let r = grid.rect();
    let mode = |k: f64| {
        DVector::from_iterator(
            free.len(),
            free.iter().map(|&n| {
                let x = grid.coords(n);
                let s = [(x[0] - r.origin[0]) / r.lengths[0], (x[1] - r.origin[1]) / r.lengths[1]];
                (k * std::f64::consts::PI * s[0]).sin() * (k * std::f64::consts::PI * s[1]).sin() + 1e-3
            }),
        )
    };
    let kh = ((grid.nx.min(grid.ny) as f64) / 4.0).max(2.0).floor();
    [mode(1.0), mode(kh)]
}

/// First-difference, second-difference and mass matrices on the free nodes:
/// `sum_n w_n |D_a v|^2`, `sum_n w_n |(D_1 D_1 + D_2 D_2) v|^2`, `w`.
fn stiffness(grid: &ParamGrid, free: &[usize]) -> (DMatrix<f64>, DMatrix<f64>, Vec<f64>) {
    let n = grid.len();
    let mut slot = vec![usize::MAX; n];
    for (k, &i) in free.iter().enumerate() {
        slot[i] = k;
    }
    let nf = free.len();
    let mut lap = DMatrix::zeros(nf, nf);
    let mut bih = DMatrix::zeros(nf, nf);
    let add_row = |m: &mut DMatrix<f64>, row: &[(usize, f64)], w: f64| {
        for &(i, a) in row {
            if slot[i] == usize::MAX {
                continue;
            }
            for &(j, b) in row {
                if slot[j] != usize::MAX {
                    m[(slot[i], slot[j])] += w * a * b;
                }
            }
        }
    };
    for node in 0..n {
        let w = grid.weight(node);
        let mut second: Vec<(usize, f64)> = Vec::new();
        for dir in 0..2 {
            let s = grid.stencil(node, dir);
            let row: Vec<(usize, f64)> = s.taps().collect();
            add_row(&mut lap, &row, w);
            for (m, a) in s.taps() {
                for (k, b) in grid.stencil(m, dir).taps() {
                    match second.iter_mut().find(|e| e.0 == k) {
                        Some(e) => e.1 += a * b,
                        None => second.push((k, a * b)),
                    }
                }
            }
        }
        add_row(&mut bih, &second, w);
    }
    let mass = free.iter().map(|&i| grid.weight(i)).collect();
    (lap, bih, mass)
}

fn dot(a: &[Vec3], b: &[Vec3], free: &[usize]) -> f64 {
    free.iter().map(|&n| a[n][0] * b[n][0] + a[n][1] * b[n][1] + a[n][2] * b[n][2]).sum()
}

fn axpy(y: &mut [Vec3], a: f64, x: &[Vec3], free: &[usize]) {
    for &n in free {
        for c in 0..3 {
            y[n][c] += a * x[n][c];
        }
    }
}

/// Correction pairs `(s, y, 1 / s.y)`.
type Pairs = std::collections::VecDeque<(Vec<Vec3>, Vec<Vec3>, f64)>;

/// Two-loop recursion with the metric inverse as the initial Hessian.
fn lbfgs_direction(metric: &Metric, g: &[Vec3], pairs: &Pairs) -> Vec<Vec3> {
    let free = &metric.free;
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q, free);
        axpy(&mut q, -a, y, free);
        alphas.push(a);
    }
    let mut r = metric.direction(&q);
    for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &r, free);
        axpy(&mut r, -(a + b), s, free);
    }
    r
}

fn norm2(g: &[Vec3], free: &[usize]) -> f64 {
    free.iter().map(|&n| g[n].iter().map(|v| v * v).sum::<f64>()).sum::<f64>().sqrt()
}

fn project(g: &mut [Vec3], bc: &BoundaryConditions) {
    for &n in &bc.gamma0 {
        g[n] = [0.0; 3];
    }
}

fn min_margin(cfg: &SurfaceConfiguration, eps: f64) -> f64 {
    (0..cfg.len())
        .map(|n| {
            let (p, m) = cfg.node(n).margins(eps);
            p.min(m)
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn minimize(
    initial: &SurfaceConfiguration,
    spec: &EnergySpec,
    loads: &LoadSpec,
    shell: &ShellConfig,
    bc: &BoundaryConditions,
    cfg: &SolverConfig,
) -> Result<MinimizeResult> {
    minimize_observed(initial, spec, loads, shell, bc, cfg, |_| {})
}

/// [`minimize`], calling `on_accept` with every accepted iterate.
pub fn minimize_observed<F: FnMut(&SurfaceConfiguration)>(
    initial: &SurfaceConfiguration,
    spec: &EnergySpec,
    loads: &LoadSpec,
    shell: &ShellConfig,
    bc: &BoundaryConditions,
    cfg: &SolverConfig,
    mut on_accept: F,
) -> Result<MinimizeResult> {
    cfg.validate()?;
    if bc.gamma0.is_empty() {
        return Err(ShellError::validation("bc.gamma0", "must contain at least one node"));
    }
    let tol = BcResiduals { psi: BC_TOL, a3: cfg.normal_bc_tol };
    let report = check_admissible_with(initial, shell, Some(bc), tol)?;
    if !report.ok || min_margin(initial, shell.epsilon) < cfg.margin_floor {
        return Err(ShellError::Inadmissible(Box::new(report)));
    }
    let grid = shell.grid().clone();
    let mut f = Functional::new(spec, loads, shell)?.with_bc(bc)?;
    let mut psi = apply_dirichlet(&initial.psi, bc)?;
    let mut current = SurfaceConfiguration::from_psi(&grid, psi.clone())?;
    let mut fixed = vec![false; grid.len()];
    for &n in &bc.gamma0 {
        fixed[n] = true;
    }
    let free: Vec<usize> = (0..grid.len()).filter(|&n| !fixed[n]).collect();

    let mut metric: Option<Metric> = None;
    let mut energy_history = Vec::new();
    let mut objective_history = Vec::new();
    let mut grad_norm_history = Vec::new();
    let mut stages = Vec::new();
    let mut norm_history = vec![trajectory_norms(&current, cfg.p, cfg.q)];
    let mut its = Iterations::default();
    let mut stall = None;
    let mut converged = false;

    let mut mu = cfg.mu_schedule.initial;
    let n_stages = if mu > 0.0 { cfg.max_outer } else { 1 };
    let mut alpha0 = cfg.step_rule.initial;
    for _ in 0..n_stages {
        f.barrier_mu = mu;
        its.outer += 1;
        let start = objective_history.len();
        let mut parts = f.evaluate(&current)?;
        let mut g = f.gradient(&psi, true)?;
        project(&mut g, bc);
        let mut gnorm = norm2(&g, &free);
        energy_history.push(parts.energy);
        objective_history.push(parts.total());
        grad_norm_history.push(gnorm);
        let mut stage_ok = gnorm <= cfg.grad_tol;
        let mut inner = 0;
        let mut pairs = Pairs::new();
        while !stage_ok && inner < cfg.max_inner {
            inner += 1;
            its.inner_total += 1;
            if metric.is_none() {
                metric = Some(Metric::build(&f, &psi, free.clone())?);
            }
            let m = metric.as_ref().unwrap();
            let mut d = lbfgs_direction(m, &g, &pairs);
            let mut slope = dot(&g, &d, &free);
            if !(slope < 0.0) && !pairs.is_empty() {
                pairs.clear();
                d = m.direction(&g);
                slope = dot(&g, &d, &free);
            }
            let d = if slope < 0.0 {
                d
            } else {
                // metric lost positivity along g; fall back to steepest descent
                let mut sd = g.clone();
                sd.iter_mut().flatten().for_each(|v| *v = -*v);
                slope = -gnorm * gnorm;
                sd
            };
            let f0 = parts.total();
            let mut alpha = if pairs.is_empty() { alpha0 } else { cfg.step_rule.initial };
            let accepted = loop {
                if alpha < 1e-16 * cfg.step_rule.initial {
                    break None;
                }
                let trial: Vec<Vec3> =
                    psi.iter().zip(&d).map(|(p, s)| [p[0] + alpha * s[0], p[1] + alpha * s[1], p[2] + alpha * s[2]]).collect();
                let feasible = SurfaceConfiguration::from_psi(&grid, trial.clone())
                    .ok()
                    .filter(|c| c.sqrt_a.iter().all(|&s| s > EPS_DEGENERATE) && min_margin(c, shell.epsilon) >= cfg.margin_floor)
                    .filter(|c| check_admissible_with(c, shell, Some(bc), tol).is_ok_and(|r| r.ok));
                if let Some(c) = feasible {
                    if let Ok(p) = f.evaluate(&c) {
                        let delta = p.total() - f0;
                        if delta <= cfg.step_rule.armijo * alpha * slope {
                            break Some((trial, c, p, None));
                        }
                        // Below the rounding level of the objective the value test is blind;
                        // fall back to the derivative form of the Armijo condition.
                        let noise = 64.0 * f64::EPSILON * (parts.magnitude + p.magnitude);
                        if delta <= noise {
                            let mut gt = f.gradient(&trial, true)?;
                            project(&mut gt, bc);
                            let dphi = dot(&gt, &d, &free);
                            if dphi <= (1.0 - 2.0 * cfg.step_rule.armijo) * slope.abs() {
                                break Some((trial, c, p, Some(gt)));
                            }
                        }
                    }
                }
                its.rejected_trials += 1;
                alpha *= cfg.step_rule.shrink;
            };
            let Some((trial, c, p, gt)) = accepted else {
                stall = Some(format!("line search underflow at stage mu = {mu:e}, gradient norm {gnorm:e}"));
                break;
            };
            its.accepted_steps += 1;
            alpha0 = (alpha / cfg.step_rule.shrink).min(cfg.step_rule.initial.max(alpha));
            on_accept(&c);
            let g_new = match gt {
                Some(gt) => gt,
                None => {
                    let mut g = f.gradient(&trial, true)?;
                    project(&mut g, bc);
                    g
                }
            };
            if cfg.memory > 0 {
                let mut s = trial.clone();
                axpy(&mut s, -1.0, &psi, &free);
                let mut y = g_new.clone();
                axpy(&mut y, -1.0, &g, &free);
                let sy = dot(&s, &y, &free);
                if sy > 1e-12 * (dot(&s, &s, &free) * dot(&y, &y, &free)).sqrt() {
                    if pairs.len() == cfg.memory {
                        pairs.pop_front();
                    }
                    pairs.push_back((s, y, 1.0 / sy));
                }
            }
            psi = trial;
            current = c;
            parts = p;
            g = g_new;
            gnorm = norm2(&g, &free);
            energy_history.push(parts.energy);
            objective_history.push(parts.total());
            grad_norm_history.push(gnorm);
            stage_ok = gnorm <= cfg.grad_tol;
        }
        stages.push(StageRecord { mu, start, iterations: inner, objective: parts.total(), grad_norm: gnorm, converged: stage_ok });
        norm_history.push(trajectory_norms(&current, cfg.p, cfg.q));
        converged = stage_ok;
        if stall.is_some() {
            converged = false;
            break;
        }
        mu *= cfg.mu_schedule.decay;
    }
    let admissibility = check_admissible_with(&current, shell, Some(bc), tol)?;
    Ok(MinimizeResult {
        converged: converged && admissibility.ok,
        psi_final: current,
        energy_history,
        objective_history,
        grad_norm_history,
        stages,
        norm_history,
        admissibility,
        iterations: its,
        stall,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::admissibility::{Edge, Gamma0Spec};
    use crate::surfaces::SurfacePreset;

    #[test]
    fn dirichlet_is_idempotent_projection() {
        let p = SurfacePreset::Plate;
        let g = p.grid(5, 5).unwrap();
        let r = p.discrete_config(&g).unwrap();
        let bc = BoundaryConditions::clamped(&Gamma0Spec::Edges(vec![Edge::West]), &r, 1e3).unwrap();
        let mut psi = r.psi.clone();
        psi[g.index(0, 2)][2] = 0.3;
        psi[g.index(2, 2)][2] = 0.1;
        let once = apply_dirichlet(&psi, &bc).unwrap();
        assert_eq!(once[g.index(0, 2)], r.psi[g.index(0, 2)]);
        assert_eq!(once[g.index(2, 2)][2], 0.1);
        assert_eq!(apply_dirichlet(&once, &bc).unwrap(), once);
    }

    #[test]
    fn plate_norms() {
        let p = SurfacePreset::Plate;
        let r = p.discrete_config(&p.grid(5, 5).unwrap()).unwrap();
        let t = trajectory_norms(&r, 2.0, 3.0);
        assert!((t.a3_1p - 1.0).abs() < 1e-14);
        assert!((t.sqrt_a_q - 1.0).abs() < 1e-14);
    }

    #[test]
    fn config_validation() {
        let mut c = SolverConfig::default();
        assert!(c.validate().is_ok());
        c.step_rule.armijo = 0.7;
        assert!(c.validate().is_err());
    }
}

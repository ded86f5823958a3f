//! Randomized certification of the hypotheses on a stored energy:
//! polyconvexity, coercivity and blow-up at vanishing orientation margins,
//! plus the curvature identities of the bracket operator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::admissibility::{m_membership, MPoint, ShellConfig};
use crate::energy::{gamma_term, reference_offset_inverse, trace_power_2x2, EnergySpec, EnergyVariant, PolyFamily, Side};
use crate::error::{Result, ShellError};
use crate::geometry::{
    bracket, cross, det2, dot, forms_node, mean_gauss, norm, offset_metric_det, principal, Grad3, NodeGeom, SurfaceConfiguration, Sym2,
    Vec3,
};

/// Relative tolerance on the convexity gap.
pub const TOL_CONVEX: f64 = 1e-10;
/// Growth factor over the value at margin 0.5 that counts as divergence.
pub const BLOWUP_FACTOR: f64 = 1e6;
/// Smallest margin reached on blow-up paths.
pub const BLOWUP_MARGIN_FLOOR: f64 = 1e-12;

const SEGMENT_RETRIES: usize = 1000;
const FLAT: Grad3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
const ZERO: Grad3 = [[0.0; 3]; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityViolation {
    #[serde(rename = "P")]
    pub p: MPoint,
    #[serde(rename = "Q")]
    pub q: MPoint,
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub samples_tested: usize,
    pub violations: Vec<ConvexityViolation>,
    /// Largest relative gap `(lhs - rhs) / (|t W(P)| + |(1-t) W(Q)|)`, floored at 0.
    pub max_violation: f64,
    pub tol_convex: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoercivityReport {
    pub samples_tested: usize,
    pub empirical_c: f64,
    #[serde(rename = "C2_shift")]
    pub c2_shift: f64,
    pub p: f64,
    pub q: f64,
    /// Index of the term with the largest exponent.
    pub dominant_term: usize,
    /// Ratio at the undeformed reference state (first sample).
    pub identity_ratio: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupPath {
    pub side: Side,
    pub margin_values: Vec<f64>,
    #[serde(rename = "W_values")]
    pub w_values: Vec<f64>,
    /// `W` at margins `1e-9 .. 1e-12`, one value per decade.
    pub tail_values: Vec<f64>,
    pub diverges: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    pub paths: Vec<BlowupPath>,
    pub diverges_plus: bool,
    pub diverges_minus: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    /// `max |[psi, psi] - n| / sqrt_a`, with `n = d1 psi ^ d2 psi`.
    pub psi_psi: f64,
    /// `max |[psi, a3] + H n| / sqrt_a`
    pub psi_a3: f64,
    /// `max |[a3, a3] - K n| / sqrt_a`
    pub a3_a3: f64,
    /// `max |det(a - 2z b + z^2 c) - ((1 - z k1)(1 - z k2))^2 a|`, relative.
    pub offset_det: f64,
}

impl IdentityReport {
    pub fn max_bracket(&self) -> f64 {
        self.psi_psi.max(self.psi_a3).max(self.a3_a3)
    }
}

fn gaussian_mat(rng: &mut ChaCha8Rng) -> Grad3 {
    let mut m = [[0.0; 3]; 2];
    for v in m.iter_mut().flatten() {
        *v = StandardNormal.sample(rng);
    }
    m
}

/// Draw one point of the polyconvexity domain.
pub fn sample_m_point(rng: &mut ChaCha8Rng) -> MPoint {
    let a = 10f64.powf(rng.random_range(-2.0..2.0));
    let b = rng.random_range(-a..a);
    let lo = 2.0 * b.abs() - a;
    let c = rng.random_range(lo + 1e-9 * a..lo + 10.0 * a);
    MPoint { a_mat: gaussian_mat(rng), b_mat: gaussian_mat(rng), a, b, c }
}

fn segment_in_m(p: &MPoint, q: &MPoint) -> bool {
    p.in_m() && q.in_m() && (1..=9).all(|k| p.lerp(q, k as f64 / 10.0).in_m())
}

/// Segment test of `w` on `n` seeded pairs. Exposed so callers can probe
/// arbitrary candidate functions, including deliberately non-convex ones.
pub fn probe_convexity<F: Fn(&MPoint) -> Result<f64>>(w: F, n: usize, seed: u64) -> Result<ConvexityReport> {
    if n == 0 {
        return Err(ShellError::validation("verify.polyconvexity", "sample count must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = Vec::new();
    let mut max_violation = 0.0f64;
    for _ in 0..n {
        let mut pair = None;
        for _ in 0..SEGMENT_RETRIES {
            let (p, q) = (sample_m_point(&mut rng), sample_m_point(&mut rng));
            if segment_in_m(&p, &q) {
                pair = Some((p, q));
                break;
            }
        }
        let (p, q) = pair.ok_or_else(|| ShellError::Sampling(format!("no segment inside M after {SEGMENT_RETRIES} draws")))?;
        let t: f64 = rng.random_range(0.0..1.0);
        let v = check_segment(&w, &p, &q, t)?;
        let scale = v.scale.max(f64::MIN_POSITIVE);
        let rel = v.gap / scale;
        max_violation = max_violation.max(rel);
        if rel > TOL_CONVEX {
            violations.push(ConvexityViolation { p, q, t, lhs: v.lhs, rhs: v.rhs, gap: v.gap });
        }
    }
    Ok(ConvexityReport { samples_tested: n, passed: violations.is_empty(), violations, max_violation, tol_convex: TOL_CONVEX })
}

struct SegmentValues {
    lhs: f64,
    rhs: f64,
    gap: f64,
    scale: f64,
}

fn check_segment<F: Fn(&MPoint) -> Result<f64>>(w: &F, p: &MPoint, q: &MPoint, t: f64) -> Result<SegmentValues> {
    let (wp, wq) = (w(p)?, w(q)?);
    let lhs = w(&p.lerp(q, t))?;
    let rhs = t * wp + (1.0 - t) * wq;
    Ok(SegmentValues { lhs, rhs, gap: lhs - rhs, scale: (t * wp).abs() + ((1.0 - t) * wq).abs() })
}

/// Re-evaluate a stored violation; true when it is still a violation.
pub fn recheck_violation<F: Fn(&MPoint) -> Result<f64>>(w: F, v: &ConvexityViolation) -> Result<bool> {
    let s = check_segment(&w, &v.p, &v.q, v.t)?;
    Ok(s.gap / s.scale.max(f64::MIN_POSITIVE) > TOL_CONVEX)
}

/// `tr({D^T (A + uB)^T (A + uB) D}^{gamma/2})` with `D D^T = ginv`.
pub fn f_trace(a: &Grad3, b: &Grad3, u: f64, ginv: &Sym2, gamma: f64) -> f64 {
    let m: Grad3 = [0, 1].map(|al| [0, 1, 2].map(|i| a[al][i] + u * b[al][i]));
    let s = [[dot(&m[0], &m[0]), dot(&m[0], &m[1])], [dot(&m[1], &m[0]), dot(&m[1], &m[1])]];
    let t = s[0][0] * ginv[0][0] + 2.0 * s[0][1] * ginv[0][1] + s[1][1] * ginv[1][1];
    trace_power_2x2(t, det2(&s) * det2(ginv), 0.5 * gamma)
}

/// Offset-metric inverses `(at v_i, at w_i)` per term for one reference node.
fn term_inverses(fam: &PolyFamily, ref_grad_psi: &Grad3, ref_grad_a3: &Grad3, node: usize) -> Result<Vec<(Sym2, Sym2)>> {
    fam.terms
        .iter()
        .map(|t| {
            let at = |v: f64| {
                reference_offset_inverse(ref_grad_psi, ref_grad_a3, v)
                    .map(|x| x.0)
                    .ok_or(ShellError::ReferenceDegenerate { node, offset: v })
            };
            Ok((at(t.v)?, at(t.w)?))
        })
        .collect()
}

fn trace_sum(fam: &PolyFamily, inv: &[(Sym2, Sym2)], a: &Grad3, b: &Grad3) -> f64 {
    fam.terms.iter().zip(inv).map(|(t, (gv, gw))| t.a * f_trace(a, b, t.u, gv, t.gamma) + t.b * f_trace(a, b, -t.u, gw, t.gamma)).sum()
}

/// The energy as a function on `M` over a flat reference.
pub fn polyconvex_energy(spec: &EnergySpec) -> Result<impl Fn(&MPoint) -> Result<f64> + '_> {
    spec.validate()?;
    let inv = match &spec.variant {
        EnergyVariant::PolyFamily(f) => term_inverses(f, &FLAT, &ZERO, 0)?,
        EnergyVariant::Helfrich(_) => Vec::new(),
    };
    Ok(move |x: &MPoint| -> Result<f64> {
        match &spec.variant {
            EnergyVariant::Helfrich(_) => spec.abc_part(x.a, x.b, x.c),
            EnergyVariant::PolyFamily(f) => Ok(trace_sum(f, &inv, &x.a_mat, &x.b_mat) + gamma_term(x.a, x.b, x.c, &f.gamma)?),
        }
    })
}

pub fn polyconvexity_probe(spec: &EnergySpec, n: usize, seed: u64) -> Result<ConvexityReport> {
    probe_convexity(polyconvex_energy(spec)?, n, seed)
}

/// Gradient pair of a random quadratic surface patch at its base point.
fn random_state(rng: &mut ChaCha8Rng) -> Option<(Grad3, Grad3)> {
    let scale = 10f64.powf(rng.random_range(-1.0..1.0));
    let mut a = gaussian_mat(rng);
    for v in a.iter_mut().flatten() {
        *v *= scale;
    }
    let curv = 10f64.powf(rng.random_range(-2.0..1.0)) * scale;
    let mut second = [[[0.0; 3]; 2]; 2];
    for al in 0..2 {
        for be in al..2 {
            for i in 0..3 {
                let s: f64 = StandardNormal.sample(rng);
                second[al][be][i] = curv * s;
                second[be][al][i] = curv * s;
            }
        }
    }
    let n = cross(&a[0], &a[1]);
    let s = norm(&n);
    if !(s > 1e-8 * scale * scale) {
        return None;
    }
    let a3 = n.map(|v| v / s);
    let mut b = [[0.0; 3]; 2];
    for be in 0..2 {
        let l = cross(&second[0][be], &a[1]);
        let r = cross(&a[0], &second[1][be]);
        let dn = [l[0] + r[0], l[1] + r[1], l[2] + r[2]];
        let along = dot(&a3, &dn);
        for i in 0..3 {
            b[be][i] = (dn[i] - along * a3[i]) / s;
        }
    }
    Some((a, b))
}

/// Sampled infimum of `trace-sum / (|A|^g + |u|^g |B|^g)` over admissible nodal
/// states, with `g` the largest exponent. The first sample is the reference state.
pub fn coercivity_probe(spec: &EnergySpec, shell: &ShellConfig, n: usize, seed: u64) -> Result<CoercivityReport> {
    let fam = match &spec.variant {
        EnergyVariant::PolyFamily(f) => f,
        EnergyVariant::Helfrich(_) => {
            return Err(ShellError::UnsupportedSpec(
                "Helfrich densities depend on psi only through H, K and sqrt_a and admit no lower bound by |grad psi|^p".into(),
            ))
        }
    };
    spec.validate()?;
    if n == 0 {
        return Err(ShellError::validation("verify.coercivity", "sample count must be >= 1"));
    }
    let eps = spec.epsilon;
    let (i0, g0) = fam.dominant_term();
    let u0 = fam.terms[i0].u.abs();
    let r = &shell.reference;
    let inverses = (0..r.len()).map(|k| term_inverses(fam, &r.grad_psi[k], &r.grad_a3[k], k)).collect::<Result<Vec<_>>>()?;
    let ratio = |a: &Grad3, b: &Grad3, node: usize| {
        let na = a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
        let nb = b.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
        trace_sum(fam, &inverses[node], a, b) / (na.powf(g0) + u0.powf(g0) * nb.powf(g0))
    };
    let identity_ratio = ratio(&r.grad_psi[0], &r.grad_a3[0], 0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min = identity_ratio;
    let mut tested = 1;
    let mut draws = 0usize;
    while tested < n {
        draws += 1;
        if draws > 100 * n + SEGMENT_RETRIES {
            return Err(ShellError::Sampling("too few admissible nodal states".into()));
        }
        let Some((a, b)) = random_state(&mut rng) else { continue };
        let f = forms_node(&a, &b);
        let (h, k) = mean_gauss(&f);
        let (k1, k2) = principal(h, k);
        if !((eps * k1).abs() < 1.0 && (eps * k2).abs() < 1.0) {
            continue;
        }
        let node = tested % r.len();
        min = min.min(ratio(&a, &b, node));
        tested += 1;
    }
    Ok(CoercivityReport {
        samples_tested: tested,
        empirical_c: min,
        c2_shift: 0.0,
        p: g0,
        q: g0,
        dominant_term: i0,
        identity_ratio,
        passed: min > 0.0 && min.is_finite(),
    })
}

fn path_point(side: Side, tau: f64) -> (f64, f64, f64) {
    // a = 1, c = 0; the chosen margin equals tau, the other stays near 2.
    let b = 0.5 * (1.0 - tau);
    match side {
        Side::Minus => (1.0, b, 0.0),
        Side::Plus => (1.0, -b, 0.0),
    }
}

/// Divergence along a path: either growth past `BLOWUP_FACTOR` times the
/// starting value, or sustained non-shrinking growth per decade of margin
/// over the last decades (logarithmic blow-up).
fn diverges(w_start: f64, w_last: f64, tail: &[f64]) -> bool {
    if w_last > BLOWUP_FACTOR * w_start.abs() {
        return true;
    }
    let floor = 64.0 * f64::EPSILON * tail.iter().fold(w_start.abs(), |m, v| m.max(v.abs()));
    let d: Vec<f64> = tail.windows(2).map(|w| w[1] - w[0]).collect();
    d.iter().all(|&x| x > floor) && d.windows(2).all(|w| w[1] >= 0.5 * w[0])
}

pub fn blowup_probe(spec: &EnergySpec, steps: usize) -> Result<BlowupReport> {
    spec.validate()?;
    if steps < 4 {
        return Err(ShellError::validation("verify.blowup", "need at least 4 steps"));
    }
    let eval = |side: Side, tau: f64| -> Result<f64> {
        let (a, b, c) = path_point(side, tau);
        if !m_membership(a, b, c) {
            return Err(ShellError::Path(format!("margin {tau:e} on the {side:?} side")));
        }
        spec.abc_part(a, b, c)
    };
    let (lo, hi) = (BLOWUP_MARGIN_FLOOR.log10(), 0.5f64.log10());
    let mut paths = Vec::with_capacity(2);
    for side in [Side::Plus, Side::Minus] {
        let margin_values: Vec<f64> = (0..steps).map(|k| 10f64.powf(hi + (lo - hi) * k as f64 / (steps - 1) as f64)).collect();
        let w_values = margin_values.iter().map(|&t| eval(side, t)).collect::<Result<Vec<_>>>()?;
        let tail_values = (9..=12).map(|e| eval(side, 10f64.powi(-e))).collect::<Result<Vec<_>>>()?;
        let d = diverges(w_values[0], *w_values.last().unwrap(), &tail_values);
        paths.push(BlowupPath { side, margin_values, w_values, tail_values, diverges: d });
    }
    let (dp, dm) = (paths[0].diverges, paths[1].diverges);
    Ok(BlowupReport { paths, diverges_plus: dp, diverges_minus: dm, passed: dp && dm })
}

/// Verdict combining the convexity and blow-up probes.
pub fn classify(convexity: &ConvexityReport, blowup: &BlowupReport) -> &'static str {
    match (convexity.passed, blowup.passed) {
        (true, true) => "polyconvex and orientation-preserving",
        (true, false) => "polyconvex but not orientation-preserving",
        (false, true) => "orientation-preserving but not polyconvex",
        (false, false) => "neither polyconvex nor orientation-preserving",
    }
}

/// Residuals of the bracket curvature identities and of the offset-metric
/// determinant factorization at `z = +-0.5 / max|kappa|`.
pub fn identity_checks(psi: &SurfaceConfiguration) -> Result<IdentityReport> {
    identity_checks_with(psi, |_, g| (g.h, g.k))
}

/// As [`identity_checks`], but the bracket identities are tested against
/// exact `(H, K)` values supplied per node.
pub fn identity_checks_against<F: Fn(usize) -> (f64, f64)>(psi: &SurfaceConfiguration, exact: F) -> Result<IdentityReport> {
    identity_checks_with(psi, |n, _| exact(n))
}

fn identity_checks_with<F: Fn(usize, &NodeGeom) -> (f64, f64)>(psi: &SurfaceConfiguration, hk: F) -> Result<IdentityReport> {
    let pp = bracket(&psi.grad_psi, &psi.grad_psi)?;
    let pa = bracket(&psi.grad_psi, &psi.grad_a3)?;
    let aa = bracket(&psi.grad_a3, &psi.grad_a3)?;
    let mut out = IdentityReport { psi_psi: 0.0, psi_a3: 0.0, a3_a3: 0.0, offset_det: 0.0 };
    let mut kmax = 0.0f64;
    let geo: Vec<_> = (0..psi.len()).map(|n| psi.node(n)).collect();
    for g in &geo {
        let (k1, k2) = principal(g.h, g.k);
        kmax = kmax.max(k1.abs()).max(k2.abs());
    }
    let z = if kmax > 0.0 { 0.5 / kmax } else { 0.5 };
    for (n, g) in geo.iter().enumerate() {
        let nrm = cross(&g.grad_psi[0], &g.grad_psi[1]);
        let res = |v: &Vec3, f: f64| {
            let d = [v[0] - f * nrm[0], v[1] - f * nrm[1], v[2] - f * nrm[2]];
            norm(&d) / g.sqrt_a
        };
        out.psi_psi = out.psi_psi.max(res(&pp[n], 1.0));
        let (h, k) = hk(n, g);
        out.psi_a3 = out.psi_a3.max(res(&pa[n], -h));
        out.a3_a3 = out.a3_a3.max(res(&aa[n], k));
        let (k1, k2) = principal(g.h, g.k);
        for zz in [-z, z] {
            let want = ((1.0 - zz * k1) * (1.0 - zz * k2)).powi(2) * g.sqrt_a * g.sqrt_a;
            let got = offset_metric_det(&g.forms, zz);
            out.offset_det = out.offset_det.max((got - want).abs() / want.abs().max(f64::MIN_POSITIVE));
        }
    }
    Ok(out)
}

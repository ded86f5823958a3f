use nalgebra::{Matrix3, SymmetricEigen};

use super::{GammaPrimitive, HelfrichParams, PolyFamily, Side};
use crate::admissibility::m_membership;
use crate::error::{Result, ShellError};
use crate::geometry::{det2, dot, inv2, Grad3, NodeForms, NodeGeom, Sym2, Vec3};
use crate::scalar::Real;

/// `(k_c/2 (2H + c0)^2 + k_bar K + lambda) sqrt_a`.
pub fn helfrich_density<T: Real>(h: T, k: T, sqrt_a: T, p: &HelfrichParams) -> T {
    let q = h * 2.0 + p.c0;
    (q * q * (0.5 * p.k_c) + k * p.k_bar + p.lambda) * sqrt_a
}

/// Sum of the convex primitives at `(a, b, c)`; the point must lie in the cone.
pub fn gamma_term<T: Real>(a: T, b: T, c: T, spec: &[GammaPrimitive]) -> Result<T> {
    if spec.is_empty() {
        return Ok(T::zero());
    }
    if !m_membership(a.re(), b.re(), c.re()) {
        return Err(ShellError::NumericDomain(format!(
            "({}, {}, {}) lies outside the cone a - |b| > 0, a - 2|b| + c > 0",
            a.re(),
            b.re(),
            c.re()
        )));
    }
    let mut acc = T::zero();
    for g in spec {
        acc += match *g {
            GammaPrimitive::Affine { constant, a_coef, b_coef, c_coef } => a * a_coef + b * b_coef + c * c_coef + constant,
            GammaPrimitive::MarginPower { side, exponent, weight } => {
                let m = match side {
                    Side::Plus => a + b * 2.0 + c,
                    Side::Minus => a - b * 2.0 + c,
                };
                m.powf(exponent) * weight
            }
            GammaPrimitive::QuadOverLin { weight } => b * b / a * weight,
            GammaPrimitive::LogBarrier { mu } => {
                if mu == 0.0 {
                    T::zero()
                } else {
                    -((a - b * 2.0 + c).ln() + (a + b * 2.0 + c).ln()) * mu
                }
            }
        };
    }
    Ok(acc)
}

/// Generalized binomial coefficient `C(p, k)`.
fn binom(p: f64, k: usize) -> f64 {
    let mut c = 1.0;
    for j in 0..k {
        c *= (p - j as f64) / (j + 1) as f64;
    }
    c
}

/// `lambda1^p + lambda2^p` for a 2x2 matrix with real nonnegative spectrum
/// given by its trace `t` and determinant `d`.
///
/// Near a double eigenvalue the closed form goes through `sqrt(t^2 - 4d)`,
/// whose derivative is singular; there the even expansion in the
/// discriminant is used instead, so tangents stay finite.
pub fn trace_power_2x2<T: Real>(t: T, d: T, p: f64) -> T {
    if p == 1.0 {
        return t;
    }
    if p == 2.0 {
        return t * t - d * 2.0;
    }
    if !(t.re() > 0.0) {
        return T::zero();
    }
    let m = t * 0.5;
    let disc = t * t - d * 4.0;
    let r = disc / (m * m * 4.0);
    if r.re().abs() < 1e-3 {
        // 2 m^p sum_j C(p, 2j) r^j
        let mut sum = T::zero();
        let mut rj = T::cst(1.0);
        for j in 0..6 {
            sum += rj * binom(p, 2 * j);
            rj *= r;
        }
        return m.powf(p) * sum * 2.0;
    }
    let half = if disc.re() > 0.0 { disc.sqrt() * 0.5 } else { T::zero() };
    let l1 = m + half;
    let l2 = m - half;
    let l2p = if l2.re() > 0.0 { l2.powf(p) } else { T::zero() };
    l1.powf(p) + l2p
}

/// Tensor `G = sum m_ab(u) g^a (x) g^b` in factored form.
#[derive(Debug, Clone, Copy)]
pub struct GMatrix {
    /// `m_ab(u) = a_ab - 2u b_ab + u^2 c_ab`
    pub s: Sym2,
    /// `g^a . g^b`, the inverse of the reference offset metric.
    pub ginv: Sym2,
    /// Contravariant reference vectors `g^1, g^2`.
    pub g_up: [Vec3; 2],
}

impl GMatrix {
    pub fn to_matrix3(&self) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for al in 0..2 {
            for be in 0..2 {
                for i in 0..3 {
                    for j in 0..3 {
                        out[i][j] += self.s[al][be] * self.g_up[al][i] * self.g_up[be][j];
                    }
                }
            }
        }
        out
    }

    /// `tr(G^{gamma/2})` through the 2x2 reduction: the nonzero spectrum of
    /// `G` is that of `S (g^a . g^b)`, which has the invariants used here.
    pub fn trace_power(&self, gamma: f64) -> f64 {
        let (t, d) = product_invariants(&self.s, &self.ginv);
        trace_power_2x2(t, d, 0.5 * gamma)
    }
}

#[inline]
fn product_invariants<T: Real>(s: &Sym2<T>, ginv: &Sym2) -> (T, T) {
    let t = s[0][0] * ginv[0][0] + s[0][1] * ginv[1][0] + s[1][0] * ginv[0][1] + s[1][1] * ginv[1][1];
    (t, det2(s) * det2(ginv))
}

/// Offset tangents `g_a = a_a + v d_a a3` of the reference and the inverse of
/// their metric, or `None` when that metric is singular.
pub fn reference_offset_inverse(ref_grad_psi: &Grad3, ref_grad_a3: &Grad3, v: f64) -> Option<(Sym2, [Vec3; 2])> {
    let g: [Vec3; 2] = [0, 1].map(|al| [0, 1, 2].map(|i| ref_grad_psi[al][i] + v * ref_grad_a3[al][i]));
    let gm = [[dot(&g[0], &g[0]), dot(&g[0], &g[1])], [dot(&g[1], &g[0]), dot(&g[1], &g[1])]];
    let det = det2(&gm);
    let scale = gm[0][0] * gm[1][1];
    if !(det > 1e-14 * scale) {
        return None;
    }
    let ginv = inv2(&gm);
    let up = [0, 1].map(|al| [0, 1, 2].map(|i| ginv[al][0] * g[0][i] + ginv[al][1] * g[1][i]));
    Some((ginv, up))
}

/// Build `G(x, psi, u, v)` at one node.
pub fn g_matrix(forms: &NodeForms, u: f64, v: f64, ref_grad_psi: &Grad3, ref_grad_a3: &Grad3, node: usize) -> Result<GMatrix> {
    let (ginv, g_up) = reference_offset_inverse(ref_grad_psi, ref_grad_a3, v).ok_or(ShellError::ReferenceDegenerate { node, offset: v })?;
    Ok(GMatrix { s: offset_form(forms, u), ginv, g_up })
}

#[inline]
pub(crate) fn offset_form<T: Real>(f: &NodeForms<T>, u: f64) -> Sym2<T> {
    let mut s = [[T::zero(); 2]; 2];
    for al in 0..2 {
        for be in 0..2 {
            s[al][be] = f.a[al][be] - f.b[al][be] * (2.0 * u) + f.c[al][be] * (u * u);
        }
    }
    s
}

/// `tr(G^{gamma/2})` of a symmetric positive semidefinite 3x3 matrix.
pub fn trace_power(g: &[[f64; 3]; 3], gamma: f64) -> Result<f64> {
    let scale = g.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    for i in 0..3 {
        for j in 0..i {
            if (g[i][j] - g[j][i]).abs() > 1e-12 * scale {
                return Err(ShellError::NumericDomain(format!("G is not symmetric at ({i}, {j})")));
            }
        }
    }
    let m = Matrix3::from_fn(|i, j| 0.5 * (g[i][j] + g[j][i]));
    let tr = m.trace();
    let eig = SymmetricEigen::new(m).eigenvalues;
    let mut acc = 0.0;
    for &l in eig.iter() {
        if l < -1e-12 * tr.abs().max(f64::MIN_POSITIVE) {
            return Err(ShellError::NumericDomain(format!("G has eigenvalue {l} below the clamp threshold")));
        }
        acc += l.max(0.0).powf(0.5 * gamma);
    }
    Ok(acc)
}

/// Family density at one node. `ginv_v[i]` / `ginv_w[i]` are the reference
/// offset-metric inverses for term `i` at offsets `v_i` / `w_i`.
pub fn poly_density<T: Real>(geom: &NodeGeom<T>, family: &PolyFamily, epsilon: f64, ginv_v: &[Sym2], ginv_w: &[Sym2]) -> Result<T> {
    let mut acc = T::zero();
    for (i, term) in family.terms.iter().enumerate() {
        let p = 0.5 * term.gamma;
        let (t, d) = product_invariants(&offset_form(&geom.forms, term.u), &ginv_v[i]);
        acc += trace_power_2x2(t, d, p) * term.a;
        let (t, d) = product_invariants(&offset_form(&geom.forms, -term.u), &ginv_w[i]);
        acc += trace_power_2x2(t, d, p) * term.b;
    }
    let s = geom.sqrt_a;
    let gamma = gamma_term(s, geom.h * s * epsilon, geom.k * s * (epsilon * epsilon), &family.gamma)?;
    Ok(acc + gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::forms_node;
    use crate::scalar::Dual;

    const FLAT: Grad3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
    const ZERO: Grad3 = [[0.0; 3]; 2];

    #[test]
    fn helfrich_examples() {
        let p = HelfrichParams { k_c: 1.0, c0: 2.0, k_bar: 0.0, lambda: 0.0 };
        assert_eq!(helfrich_density(-1.0, 1.0, 1.0, &p), 0.0);
        let p = HelfrichParams { k_c: 1.0, c0: 0.0, k_bar: 0.0, lambda: 3.0 };
        assert_eq!(helfrich_density(0.0, 0.0, 1.0, &p), 3.0);
        let p = HelfrichParams { k_c: 1.0, c0: 0.0, k_bar: 2.0, lambda: 0.0 };
        assert_eq!(helfrich_density(-1.0, 1.0, 1.0, &p), 4.0);
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma_term(1.0, 0.0, 0.0, &[GammaPrimitive::affine_a(3.0)]).unwrap(), 3.0);
        assert_eq!(gamma_term(1.0, 0.5, 0.5, &[GammaPrimitive::QuadOverLin { weight: 2.0 }]).unwrap(), 0.5);
        assert_eq!(gamma_term(1.0, 0.0, 0.0, &[GammaPrimitive::LogBarrier { mu: 1.0 }]).unwrap(), 0.0);
        assert!(gamma_term(1.0, 0.6, 0.1, &[GammaPrimitive::LogBarrier { mu: 1.0 }]).is_err());
    }

    #[test]
    fn trace_power_examples() {
        let proj = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]];
        assert!((trace_power(&proj, 2.0).unwrap() - 2.0).abs() < 1e-14);
        let d41 = [[4.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]];
        assert!((trace_power(&d41, 4.0).unwrap() - 17.0).abs() < 1e-12);
        assert!((trace_power(&d41, 3.0).unwrap() - 9.0).abs() < 1e-12);
        let asym = [[1.0, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(trace_power(&asym, 2.0).is_err());
        let neg = [[1.0, 0.0, 0.0], [0.0, -0.5, 0.0], [0.0, 0.0, 0.0]];
        assert!(trace_power(&neg, 2.0).is_err());
    }

    #[test]
    fn reduced_trace_power_matches_closed_form() {
        // eigenvalues {4, 1}
        for (gamma, want) in [(2.0, 5.0), (3.0, 9.0), (4.0, 17.0), (5.0, 33.0)] {
            assert!((trace_power_2x2(5.0, 4.0, 0.5 * gamma) - want).abs() < 1e-12);
        }
        // double eigenvalue: series branch
        for gamma in [2.0, 2.5, 3.0, 7.0] {
            assert!((trace_power_2x2(2.0, 1.0, 0.5 * gamma) - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn series_branch_derivative_is_finite_and_continuous() {
        let f = |t: Dual<1>, d: Dual<1>| trace_power_2x2(t, d, 1.5);
        let at = |d0: f64| f(Dual::constant(2.0), Dual::var(d0, 0)).eps[0];
        let (inside, outside) = (at(1.0 - 1e-6), at(1.0 - 1e-2));
        assert!(inside.is_finite() && outside.is_finite());
        // closed form: d/dd (l1^p + l2^p) at the double root is -p(p-1)/2 m^{p-2} ... check vs FD
        let fd = (trace_power_2x2(2.0, 1.0 - 1e-6 + 1e-8, 1.5) - trace_power_2x2(2.0, 1.0 - 1e-6 - 1e-8, 1.5)) / 2e-8;
        assert!((inside - fd).abs() < 1e-6, "{inside} vs {fd}");
    }

    #[test]
    fn g_matrix_identity_is_tangent_projection() {
        let forms = forms_node(&FLAT, &ZERO);
        let g = g_matrix(&forms, 0.3, 0.3, &FLAT, &ZERO, 0).unwrap();
        let m = g.to_matrix3();
        let want = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]];
        assert_eq!(m, want);
        assert!((g.trace_power(2.0) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn g_matrix_stretched_eigenvalues() {
        let stretched: Grad3 = [[2.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let forms = forms_node(&stretched, &ZERO);
        let g = g_matrix(&forms, 0.0, 0.0, &FLAT, &ZERO, 0).unwrap();
        let eig = SymmetricEigen::new(Matrix3::from_fn(|i, j| g.to_matrix3()[i][j])).eigenvalues;
        let mut e: Vec<f64> = eig.iter().copied().collect();
        e.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!((e[0] - 4.0).abs() < 1e-12 && (e[1] - 1.0).abs() < 1e-12 && e[2].abs() < 1e-12);
        // u has no effect without curvature
        let g2 = g_matrix(&forms, 0.7, 0.0, &FLAT, &ZERO, 0).unwrap();
        assert_eq!(g.to_matrix3(), g2.to_matrix3());
    }
}

//! Stored energy densities, the load form and the total functional.

mod density;
mod functional;

use serde::{Deserialize, Serialize};

use crate::error::{Result, ShellError};

pub use density::{g_matrix, gamma_term, helfrich_density, poly_density, reference_offset_inverse, trace_power, trace_power_2x2, GMatrix};
pub use functional::{energy_gradient, load_form, total_energy, DensityRow, Functional, LoadSpec, ObjectiveParts};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HelfrichParams {
    #[serde(default = "one")]
    pub k_c: f64,
    #[serde(default)]
    pub c0: f64,
    #[serde(default)]
    pub k_bar: f64,
    #[serde(default)]
    pub lambda: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for HelfrichParams {
    fn default() -> Self {
        Self { k_c: 1.0, c0: 0.0, k_bar: 0.0, lambda: 0.0 }
    }
}

/// One term `a tr(G(u, v)^{gamma/2}) + b tr(G(-u, w)^{gamma/2})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyTerm {
    pub a: f64,
    pub b: f64,
    pub gamma: f64,
    #[serde(default)]
    pub u: f64,
    #[serde(default)]
    pub v: f64,
    #[serde(default)]
    pub w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `a + 2b + c`
    Plus,
    /// `a - 2b + c`
    Minus,
}

/// Convex building blocks on the cone `a - |b| > 0, a - 2|b| + c > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum GammaPrimitive {
    /// `constant + a_coef * a + b_coef * b + c_coef * c`
    Affine {
        #[serde(default)]
        constant: f64,
        #[serde(default, rename = "a")]
        a_coef: f64,
        #[serde(default, rename = "b")]
        b_coef: f64,
        #[serde(default, rename = "c")]
        c_coef: f64,
    },
    /// `weight * (a -+ 2b + c)^exponent`
    MarginPower { side: Side, exponent: f64, weight: f64 },
    /// `weight * b^2 / a`
    QuadOverLin { weight: f64 },
    /// `-mu [ln(a - 2b + c) + ln(a + 2b + c)]`
    LogBarrier { mu: f64 },
}

impl GammaPrimitive {
    pub fn affine_a(coef: f64) -> Self {
        GammaPrimitive::Affine { constant: 0.0, a_coef: coef, b_coef: 0.0, c_coef: 0.0 }
    }

    fn validate(&self, field: &str) -> Result<()> {
        match *self {
            GammaPrimitive::Affine { constant, a_coef, b_coef, c_coef } => {
                if ![constant, a_coef, b_coef, c_coef].iter().all(|v| v.is_finite()) {
                    return Err(ShellError::validation(field, "affine coefficients must be finite"));
                }
            }
            GammaPrimitive::MarginPower { exponent, weight, .. } => {
                if !(exponent >= 1.0 && exponent.is_finite()) {
                    return Err(ShellError::validation(
                        field,
                        format!("margin power needs exponent r >= 1 for convexity (got {exponent})"),
                    ));
                }
                if !(weight >= 0.0 && weight.is_finite()) {
                    return Err(ShellError::validation(field, "margin power weight must be >= 0"));
                }
            }
            GammaPrimitive::QuadOverLin { weight } => {
                if !(weight >= 0.0 && weight.is_finite()) {
                    return Err(ShellError::validation(field, "quad-over-lin weight must be >= 0"));
                }
            }
            GammaPrimitive::LogBarrier { mu } => {
                if !(mu >= 0.0 && mu.is_finite()) {
                    return Err(ShellError::validation(field, "log barrier mu must be >= 0"));
                }
            }
        }
        Ok(())
    }
}

pub type GammaSpec = Vec<GammaPrimitive>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyFamily {
    pub terms: Vec<PolyTerm>,
    #[serde(default)]
    pub gamma: GammaSpec,
}

impl PolyFamily {
    /// Largest exponent and the index of the first term attaining it.
    pub fn dominant_term(&self) -> (usize, f64) {
        self.terms.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, t)| if t.gamma > acc.1 { (i, t.gamma) } else { acc })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EnergyVariant {
    Helfrich(HelfrichParams),
    PolyFamily(PolyFamily),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergySpec {
    pub variant: EnergyVariant,
    /// Half-thickness entering `(sqrt a, eps H sqrt a, eps^2 K sqrt a)`.
    pub epsilon: f64,
}

impl EnergySpec {
    pub fn helfrich(params: HelfrichParams, epsilon: f64) -> Result<Self> {
        let s = Self { variant: EnergyVariant::Helfrich(params), epsilon };
        s.validate()?;
        Ok(s)
    }

    pub fn poly(family: PolyFamily, epsilon: f64) -> Result<Self> {
        let s = Self { variant: EnergyVariant::PolyFamily(family), epsilon };
        s.validate()?;
        Ok(s)
    }

    /// Coefficient constraints; error messages name the offending field.
    pub fn validate(&self) -> Result<()> {
        let eps = self.epsilon;
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(ShellError::validation("epsilon", "half-thickness must be positive"));
        }
        match &self.variant {
            EnergyVariant::Helfrich(p) => {
                if !(p.k_c > 0.0) {
                    return Err(ShellError::validation("energy.helfrich.k_c", "bending rigidity k_c must be > 0"));
                }
                if ![p.c0, p.k_bar, p.lambda].iter().all(|v| v.is_finite()) {
                    return Err(ShellError::validation("energy.helfrich", "parameters must be finite"));
                }
            }
            EnergyVariant::PolyFamily(f) => {
                if f.terms.is_empty() {
                    return Err(ShellError::validation("energy.poly_family.terms", "at least one term is required"));
                }
                for (i, t) in f.terms.iter().enumerate() {
                    let field = |name: &str| format!("energy.poly_family.terms[{i}].{name}");
                    if !(t.a > 0.0) {
                        return Err(ShellError::validation(field("a"), format!("must satisfy a_i > 0 (got {})", t.a)));
                    }
                    if !(t.b > 0.0) {
                        return Err(ShellError::validation(field("b"), format!("must satisfy b_i > 0 (got {})", t.b)));
                    }
                    if !(t.gamma >= 2.0 && t.gamma.is_finite()) {
                        return Err(ShellError::validation(field("gamma"), format!("must satisfy γ_i ≥ 2 (got {})", t.gamma)));
                    }
                    if !t.u.is_finite() {
                        return Err(ShellError::validation(field("u"), "must be finite"));
                    }
                    for (name, val) in [("v", t.v), ("w", t.w)] {
                        if !(val.abs() <= eps) {
                            return Err(ShellError::validation(
                                field(name),
                                format!("must satisfy (v_i, w_i) ∈ [−ε, ε]² with ε = {eps} (got {val})"),
                            ));
                        }
                    }
                }
                for (k, g) in f.gamma.iter().enumerate() {
                    g.validate(&format!("energy.poly_family.gamma[{k}]"))?;
                }
            }
        }
        Ok(())
    }

    /// The part of the density that depends only on
    /// `(a, b, c) = (sqrt a, eps H sqrt a, eps^2 K sqrt a)`: the whole Helfrich
    /// density rewritten in those variables, or the convex term of the family.
    pub fn abc_part(&self, a: f64, b: f64, c: f64) -> Result<f64> {
        match &self.variant {
            EnergyVariant::Helfrich(p) => Ok(helfrich_abc(p, self.epsilon, a, b, c)),
            EnergyVariant::PolyFamily(f) => gamma_term(a, b, c, &f.gamma),
        }
    }

    pub fn is_helfrich(&self) -> bool {
        matches!(self.variant, EnergyVariant::Helfrich(_))
    }
}

/// Helfrich density as a function of `(sqrt a, eps H sqrt a, eps^2 K sqrt a)`:
/// `k_c/2 (2b/eps + c0 a)^2 / a + k_bar c / eps^2 + lambda a`.
pub fn helfrich_abc(p: &HelfrichParams, eps: f64, a: f64, b: f64, c: f64) -> f64 {
    let lin = 2.0 * b / eps + p.c0 * a;
    0.5 * p.k_c * lin * lin / a + p.k_bar * c / (eps * eps) + p.lambda * a
}

//! Built-in analytic midsurfaces with closed-form curvature oracles.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, ShellError};
use crate::geometry::{Grad3, SurfaceConfiguration, Vec3};
use crate::grid::{build_grid, ParamGrid, Rect};

/// Named parametric surface. Parameter conventions:
///
/// * `plate`: `(x1, x2, 0)` over the grid rectangle.
/// * `cylinder-patch`: `(R cos x1, R sin x1, x2)`, `x1` in `x1_range`, `x2` in `[0, height]`.
/// * `sphere-cap`: `x1` colatitude in `colatitude_range`, `x2` azimuth in `[0, 2 pi)`.
/// * `torus`: `x1` azimuth, `x2` tube angle, both periodic.
///
/// All of them produce the outward normal under `a3 = d1 psi ^ d2 psi / |.|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SurfacePreset {
    Plate,
    #[serde(alias = "cylinder", alias = "cylinder_patch")]
    CylinderPatch {
        #[serde(rename = "R")]
        radius: f64,
        x1_range: [f64; 2],
        #[serde(default = "default_height")]
        height: f64,
    },
    #[serde(alias = "sphere_cap")]
    SphereCap {
        #[serde(rename = "R")]
        radius: f64,
        colatitude_range: [f64; 2],
    },
    Torus {
        #[serde(rename = "R")]
        major: f64,
        #[serde(rename = "r")]
        minor: f64,
    },
}

fn default_height() -> f64 {
    1.0
}

fn is_full_turn(range: [f64; 2]) -> bool {
    ((range[1] - range[0]) - 2.0 * PI).abs() < 1e-12
}

impl SurfacePreset {
    pub fn name(&self) -> &'static str {
        match self {
            SurfacePreset::Plate => "plate",
            SurfacePreset::CylinderPatch { .. } => "cylinder-patch",
            SurfacePreset::SphereCap { .. } => "sphere-cap",
            SurfacePreset::Torus { .. } => "torus",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |f: &str, m: &str| Err(ShellError::validation(format!("reference_surface.{f}"), m.to_string()));
        match *self {
            SurfacePreset::Plate => Ok(()),
            SurfacePreset::CylinderPatch { radius, x1_range, height } => {
                if !(radius > 0.0) {
                    return bad("R", "radius must be positive");
                }
                if !(x1_range[1] > x1_range[0]) || x1_range[1] - x1_range[0] > 2.0 * PI + 1e-12 {
                    return bad("x1_range", "need x1_range[0] < x1_range[1] within one turn");
                }
                if !(height > 0.0) {
                    return bad("height", "height must be positive");
                }
                Ok(())
            }
            SurfacePreset::SphereCap { radius, colatitude_range: [t1, t2] } => {
                if !(radius > 0.0) {
                    return bad("R", "radius must be positive");
                }
                if !(t1 > 0.0 && t2 < PI && t1 < t2) {
                    return bad("colatitude_range", "need 0 < theta1 < theta2 < pi (poles are excluded)");
                }
                Ok(())
            }
            SurfacePreset::Torus { major, minor } => {
                if !(minor > 0.0 && major > minor) {
                    return bad("r", "need 0 < r < R");
                }
                Ok(())
            }
        }
    }

    /// Natural parameter rectangle; `None` for the plate, which takes the grid's.
    pub fn default_rect(&self) -> Option<Rect> {
        match *self {
            SurfacePreset::Plate => None,
            SurfacePreset::CylinderPatch { x1_range, height, .. } => {
                Some(Rect::new([x1_range[0], 0.0], [x1_range[1] - x1_range[0], height]))
            }
            SurfacePreset::SphereCap { colatitude_range: [t1, t2], .. } => Some(Rect::new([t1, 0.0], [t2 - t1, 2.0 * PI])),
            SurfacePreset::Torus { .. } => Some(Rect::new([0.0, 0.0], [2.0 * PI, 2.0 * PI])),
        }
    }

    pub fn default_periodic(&self) -> [bool; 2] {
        match *self {
            SurfacePreset::Plate => [false, false],
            SurfacePreset::CylinderPatch { x1_range, .. } => [is_full_turn(x1_range), false],
            SurfacePreset::SphereCap { .. } => [false, true],
            SurfacePreset::Torus { .. } => [true, true],
        }
    }

    /// Grid with the preset's natural rectangle and periodicity.
    pub fn grid(&self, nx: usize, ny: usize) -> Result<ParamGrid> {
        self.validate()?;
        build_grid(self.default_rect().unwrap_or_else(Rect::unit), nx, ny, self.default_periodic())
    }

    pub fn position(&self, x: [f64; 2]) -> Vec3 {
        let [x1, x2] = x;
        match *self {
            SurfacePreset::Plate => [x1, x2, 0.0],
            SurfacePreset::CylinderPatch { radius, .. } => [radius * x1.cos(), radius * x1.sin(), x2],
            SurfacePreset::SphereCap { radius, .. } => [radius * x1.sin() * x2.cos(), radius * x1.sin() * x2.sin(), radius * x1.cos()],
            SurfacePreset::Torus { major, minor } => {
                let rho = major + minor * x2.cos();
                [rho * x1.cos(), rho * x1.sin(), minor * x2.sin()]
            }
        }
    }

    pub fn tangents(&self, x: [f64; 2]) -> Grad3 {
        let [x1, x2] = x;
        match *self {
            SurfacePreset::Plate => [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            SurfacePreset::CylinderPatch { radius, .. } => [[-radius * x1.sin(), radius * x1.cos(), 0.0], [0.0, 0.0, 1.0]],
            SurfacePreset::SphereCap { radius, .. } => [
                [radius * x1.cos() * x2.cos(), radius * x1.cos() * x2.sin(), -radius * x1.sin()],
                [-radius * x1.sin() * x2.sin(), radius * x1.sin() * x2.cos(), 0.0],
            ],
            SurfacePreset::Torus { major, minor } => {
                let rho = major + minor * x2.cos();
                [[-rho * x1.sin(), rho * x1.cos(), 0.0], [-minor * x2.sin() * x1.cos(), -minor * x2.sin() * x1.sin(), minor * x2.cos()]]
            }
        }
    }

    pub fn normal(&self, x: [f64; 2]) -> Vec3 {
        let [x1, x2] = x;
        match *self {
            SurfacePreset::Plate => [0.0, 0.0, 1.0],
            SurfacePreset::CylinderPatch { .. } => [x1.cos(), x1.sin(), 0.0],
            SurfacePreset::SphereCap { .. } => [x1.sin() * x2.cos(), x1.sin() * x2.sin(), x1.cos()],
            SurfacePreset::Torus { .. } => [x2.cos() * x1.cos(), x2.cos() * x1.sin(), x2.sin()],
        }
    }

    /// Exact `[d1 a3, d2 a3]`.
    pub fn normal_derivatives(&self, x: [f64; 2]) -> Grad3 {
        let [x1, x2] = x;
        match *self {
            SurfacePreset::Plate => [[0.0; 3]; 2],
            SurfacePreset::CylinderPatch { .. } => [[-x1.sin(), x1.cos(), 0.0], [0.0; 3]],
            SurfacePreset::SphereCap { radius, .. } => {
                let t = self.tangents(x);
                [t[0].map(|v| v / radius), t[1].map(|v| v / radius)]
            }
            SurfacePreset::Torus { .. } => {
                [[-x2.cos() * x1.sin(), x2.cos() * x1.cos(), 0.0], [-x2.sin() * x1.cos(), -x2.sin() * x1.sin(), x2.cos()]]
            }
        }
    }

    /// Exact `(H, K)`.
    pub fn curvature(&self, x: [f64; 2]) -> (f64, f64) {
        match *self {
            SurfacePreset::Plate => (0.0, 0.0),
            SurfacePreset::CylinderPatch { radius, .. } => (-0.5 / radius, 0.0),
            SurfacePreset::SphereCap { radius, .. } => (-1.0 / radius, 1.0 / (radius * radius)),
            SurfacePreset::Torus { major, minor } => {
                let c = x[1].cos();
                let rho = major + minor * c;
                (-0.5 * (1.0 / minor + c / rho), c / (minor * rho))
            }
        }
    }

    /// Exact principal curvatures, `kappa1 >= kappa2`.
    pub fn principal_curvatures(&self, x: [f64; 2]) -> (f64, f64) {
        match *self {
            SurfacePreset::Plate => (0.0, 0.0),
            SurfacePreset::CylinderPatch { radius, .. } => (0.0, -1.0 / radius),
            SurfacePreset::SphereCap { radius, .. } => (-1.0 / radius, -1.0 / radius),
            SurfacePreset::Torus { major, minor } => {
                let a = -1.0 / minor;
                let b = -x[1].cos() / (major + minor * x[1].cos());
                (a.max(b), a.min(b))
            }
        }
    }

    pub fn sample(&self, grid: &ParamGrid) -> Vec<Vec3> {
        (0..grid.len()).map(|n| self.position(grid.coords(n))).collect()
    }

    /// Configuration built from finite differences of the sampled positions.
    pub fn discrete_config(&self, grid: &ParamGrid) -> Result<SurfaceConfiguration> {
        SurfaceConfiguration::from_psi(grid, self.sample(grid))
    }

    /// Configuration with exact tangents and normal derivatives.
    pub fn analytic_config(&self, grid: &ParamGrid) -> Result<SurfaceConfiguration> {
        let xs: Vec<[f64; 2]> = (0..grid.len()).map(|n| grid.coords(n)).collect();
        SurfaceConfiguration::from_fields(
            grid,
            xs.iter().map(|&x| self.position(x)).collect(),
            xs.iter().map(|&x| self.tangents(x)).collect(),
            xs.iter().map(|&x| self.normal_derivatives(x)).collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{curvatures, fundamental_forms, norm};

    const CYL: SurfacePreset = SurfacePreset::CylinderPatch { radius: 1.0, x1_range: [0.2, 1.4], height: 1.0 };

    #[test]
    fn analytic_normals_agree_with_frame() {
        let presets = [
            SurfacePreset::Plate,
            CYL,
            SurfacePreset::SphereCap { radius: 2.0, colatitude_range: [0.4, 2.5] },
            SurfacePreset::Torus { major: 2.0, minor: 0.5 },
        ];
        for p in presets {
            let g = p.grid(9, 11).unwrap();
            let cfg = p.analytic_config(&g).unwrap();
            cfg.validate(1e-8).unwrap();
            for n in 0..g.len() {
                let ex = p.normal(g.coords(n));
                let d = [cfg.a3[n][0] - ex[0], cfg.a3[n][1] - ex[1], cfg.a3[n][2] - ex[2]];
                assert!(norm(&d) < 1e-12, "{} node {n}", p.name());
            }
        }
    }

    #[test]
    fn cylinder_forms() {
        let g = CYL.grid(5, 5).unwrap();
        let cfg = CYL.analytic_config(&g).unwrap();
        let f = fundamental_forms(&cfg).unwrap();
        for n in 0..g.len() {
            let (a, b, c) = (f.a_ab[n], f.b_ab[n], f.c_ab[n]);
            assert!((a[0][0] - 1.0).abs() < 1e-14 && (a[1][1] - 1.0).abs() < 1e-14 && a[0][1].abs() < 1e-14);
            assert!((b[0][0] + 1.0).abs() < 1e-14 && b[1][1].abs() < 1e-14 && b[0][1].abs() < 1e-14);
            assert!((c[0][0] - 1.0).abs() < 1e-14 && c[1][1].abs() < 1e-14);
        }
        let cd = curvatures(&f);
        assert!((cd.h[3] + 0.5).abs() < 1e-14 && cd.k[3].abs() < 1e-14);
        assert!(cd.kappa1[3].abs() < 1e-14 && (cd.kappa2[3] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn sphere_forms_proportional() {
        let r = 2.0;
        let p = SurfacePreset::SphereCap { radius: r, colatitude_range: [0.3, 2.6] };
        let g = p.grid(8, 8).unwrap();
        let f = fundamental_forms(&p.analytic_config(&g).unwrap()).unwrap();
        for n in 0..g.len() {
            for al in 0..2 {
                for be in 0..2 {
                    assert!((f.b_ab[n][al][be] + f.a_ab[n][al][be] / r).abs() < 1e-13);
                    assert!((f.c_ab[n][al][be] - f.a_ab[n][al][be] / (r * r)).abs() < 1e-13);
                }
            }
        }
        let cd = curvatures(&f);
        for n in 0..g.len() {
            assert!((cd.h[n] + 0.5).abs() < 1e-13);
            assert!((cd.k[n] - 0.25).abs() < 1e-13);
            assert!((cd.kappa1[n] + 0.5).abs() < 1e-6 && (cd.kappa2[n] + 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn torus_oracle_matches_analytic_forms() {
        let p = SurfacePreset::Torus { major: 2.0, minor: 0.5 };
        let g = p.grid(12, 10).unwrap();
        let cd = curvatures(&fundamental_forms(&p.analytic_config(&g).unwrap()).unwrap());
        for n in 0..g.len() {
            let (h, k) = p.curvature(g.coords(n));
            assert!((cd.h[n] - h).abs() < 1e-12 && (cd.k[n] - k).abs() < 1e-12);
        }
    }

    #[test]
    fn presets_reject_bad_parameters() {
        assert!(SurfacePreset::SphereCap { radius: 1.0, colatitude_range: [0.0, 1.0] }.validate().is_err());
        assert!(SurfacePreset::Torus { major: 0.5, minor: 0.5 }.validate().is_err());
    }
}

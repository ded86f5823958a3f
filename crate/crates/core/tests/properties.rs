use std::f64::consts::PI;

use proptest::prelude::*;
use shellvar::admissibility::{m_membership, orientation_margins};
use shellvar::energy::{g_matrix, trace_power, Functional};
use shellvar::geometry::{shell_jacobian, Vec3};
use shellvar::*;

type Mat3 = [[f64; 3]; 3];

fn rotation(axis: Vec3, angle: f64) -> Mat3 {
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let [x, y, z] = [axis[0] / n, axis[1] / n, axis[2] / n];
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    [
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ]
}

fn rigid(psi: &[Vec3], r: &Mat3, shift: Vec3) -> Vec<Vec3> {
    psi.iter().map(|p| [0, 1, 2].map(|i| r[i][0] * p[0] + r[i][1] * p[1] + r[i][2] * p[2] + shift[i])).collect()
}

fn axis() -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-1.0..1.0f64).prop_filter("nonzero", |a| a.iter().map(|v| v * v).sum::<f64>() > 1e-2)
}

fn cap() -> SurfacePreset {
    SurfacePreset::SphereCap { radius: 1.3, colatitude_range: [0.6, 2.3] }
}

/// Cap with a smooth bump, still admissible for eps = 0.1.
fn bumped(amp: f64) -> SurfaceConfiguration {
    let p = cap();
    let g = p.grid(12, 12).unwrap();
    let psi = (0..g.len())
        .map(|k| {
            let x = g.coords(k);
            let q = p.position(x);
            let w = 1.0 + amp * (2.0 * x[1]).cos() * (3.0 * x[0]).sin();
            [q[0] * w, q[1] * w, q[2] * w]
        })
        .collect();
    SurfaceConfiguration::from_psi(&g, psi).unwrap()
}

fn family() -> EnergySpec {
    EnergySpec::poly(
        PolyFamily {
            terms: vec![
                PolyTerm { a: 1.0, b: 0.5, gamma: 2.5, u: 0.05, v: 0.03, w: -0.02 },
                PolyTerm { a: 0.4, b: 1.2, gamma: 4.0, u: -0.1, v: 0.0, w: 0.1 },
            ],
            gamma: vec![GammaPrimitive::QuadOverLin { weight: 1.0 }, GammaPrimitive::LogBarrier { mu: 0.5 }],
        },
        0.1,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn helfrich_energy_is_rigid_motion_invariant(ax in axis(), angle in -PI..PI, shift in prop::array::uniform3(-5.0..5.0f64), amp in 0.0..0.05f64) {
        let c = bumped(amp);
        let spec = EnergySpec::helfrich(HelfrichParams { k_c: 1.0, c0: 0.4, k_bar: -0.3, lambda: 0.8 }, 0.1).unwrap();
        let shell = ShellConfig::new(0.1, cap().discrete_config(&c.grid).unwrap()).unwrap();
        let loads = LoadSpec::zero(c.len());
        let f = Functional::new(&spec, &loads, &shell).unwrap();
        let moved = SurfaceConfiguration::from_psi(&c.grid, rigid(&c.psi, &rotation(ax, angle), shift)).unwrap();
        let (e0, e1) = (f.evaluate(&c).unwrap().energy, f.evaluate(&moved).unwrap().energy);
        prop_assert!((e0 - e1).abs() <= 1e-10 * e0.abs());
        for n in [0, 17, 77] {
            let (d0, d1) = (f.density(n, &c.node(n)).unwrap(), f.density(n, &moved.node(n)).unwrap());
            prop_assert!((d0 - d1).abs() <= 1e-10 * d0.abs().max(1.0));
        }
    }

    #[test]
    fn family_energy_invariant_when_reference_moves_too(ax in axis(), angle in -PI..PI, shift in prop::array::uniform3(-5.0..5.0f64), amp in 0.0..0.05f64) {
        let c = bumped(amp);
        let spec = family();
        let loads = LoadSpec::zero(c.len());
        let reference = cap().discrete_config(&c.grid).unwrap();
        let r = rotation(ax, angle);
        let shell = ShellConfig::new(0.1, reference.clone()).unwrap();
        let moved_ref = SurfaceConfiguration::from_psi(&c.grid, rigid(&reference.psi, &r, shift)).unwrap();
        let moved_shell = ShellConfig::new(0.1, moved_ref).unwrap();
        let moved = SurfaceConfiguration::from_psi(&c.grid, rigid(&c.psi, &r, shift)).unwrap();
        let e0 = Functional::new(&spec, &loads, &shell).unwrap().evaluate(&c).unwrap().energy;
        let e1 = Functional::new(&spec, &loads, &moved_shell).unwrap().evaluate(&moved).unwrap().energy;
        prop_assert!((e0 - e1).abs() <= 1e-10 * e0.abs());
    }

    #[test]
    fn identity_trace_terms_equal_two(gamma in 2.0..8.0f64, u in -0.1..0.1f64, node in 0usize..144) {
        let c = cap().discrete_config(&cap().grid(12, 12).unwrap()).unwrap();
        let f = shellvar::geometry::forms_node(&c.grad_psi[node], &c.grad_a3[node]);
        let g = g_matrix(&f, u, u, &c.grad_psi[node], &c.grad_a3[node], node).unwrap();
        prop_assert!((g.trace_power(gamma) - 2.0).abs() < 1e-10);
        prop_assert!((trace_power(&g.to_matrix3(), gamma).unwrap() - 2.0).abs() < 1e-10);
    }

    #[test]
    fn trace_power_nondecreasing_in_gamma(l in prop::array::uniform3(1.0..10.0f64), ax in axis(), angle in -PI..PI, g1 in 2.0..6.0f64, dg in 0.0..3.0f64) {
        let r = rotation(ax, angle);
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 { for j in 0..3 { for k in 0..3 { m[i][j] += r[i][k] * l[k] * r[j][k]; } } }
        let a = trace_power(&m, g1).unwrap();
        let b = trace_power(&m, g1 + dg).unwrap();
        prop_assert!(b >= a * (1.0 - 1e-12));
    }

    #[test]
    fn margins_factor_through_offset_jacobian(k1 in -20.0..20.0f64, k2 in -20.0..20.0f64, s in 0.01..10.0f64, eps in 0.001..1.0f64) {
        let (h, k) = (0.5 * (k1 + k2), k1 * k2);
        let (mp, mm) = orientation_margins(h, k, s, eps);
        prop_assert!((mm - shell_jacobian(k1, k2, s, eps)).abs() <= 1e-12 * (1.0 + mm.abs()));
        prop_assert!((mp - shell_jacobian(k1, k2, s, -eps)).abs() <= 1e-12 * (1.0 + mp.abs()));
    }

    #[test]
    fn margin_positivity_iff_thin_relative_to_radii(k1 in -20.0..20.0f64, k2 in -20.0..20.0f64, eps in 0.001..1.0f64) {
        let (mp, mm) = orientation_margins(0.5 * (k1 + k2), k1 * k2, 1.0, eps);
        let thin = (eps * k1).abs() < 1.0 && (eps * k2).abs() < 1.0;
        let boundary = ((eps * k1).abs() - 1.0).abs() < 1e-9 || ((eps * k2).abs() - 1.0).abs() < 1e-9;
        // both margins positive also when both |eps k| exceed 1 with matching signs
        let both_thick = (eps * k1).abs() > 1.0 && (eps * k2).abs() > 1.0;
        prop_assume!(!boundary && !both_thick);
        prop_assert_eq!(mp > 0.0 && mm > 0.0, thin);
    }

    #[test]
    fn cone_membership_matches_margins(h in -10.0..10.0f64, k in -100.0..100.0f64, s in 0.01..10.0f64, eps in 0.001..1.0f64) {
        let (mp, mm) = orientation_margins(h, k, s, eps);
        let (a, b, c) = (s, eps * h * s, eps * eps * k * s);
        prop_assume!(mp.abs() > 1e-9 * s && mm.abs() > 1e-9 * s && (a - b.abs()).abs() > 1e-9 * s);
        prop_assert_eq!(m_membership(a, b, c), a - b.abs() > 0.0 && mp > 0.0 && mm > 0.0);
    }

    #[test]
    fn constant_density_integrates_to_area(lx in 0.1..5.0f64, ly in 0.1..5.0f64, nx in 3usize..20, ny in 3usize..20, lambda in 0.1..10.0f64) {
        let g = build_grid(Rect::new([0.3, -1.0], [lx, ly]), nx, ny, [false, false]).unwrap();
        let c = SurfacePreset::Plate.discrete_config(&g).unwrap();
        let shell = ShellConfig::new(0.1, c.clone()).unwrap();
        let spec = EnergySpec::helfrich(HelfrichParams { lambda, ..HelfrichParams::default() }, 0.1).unwrap();
        let e = energy::total_energy(&c, &spec, &LoadSpec::zero(g.len()), &shell).unwrap();
        prop_assert!((e - lambda * lx * ly).abs() <= 1e-12 * lambda * lx * ly);
    }
}

use shellvar::admissibility::{check_admissible_with, BcResiduals, BC_TOL};
use shellvar::minimize::*;
use shellvar::*;

fn setup(n: usize) -> (ShellConfig, BoundaryConditions) {
    let p = SurfacePreset::Plate;
    let r = p.discrete_config(&p.grid(n, n).unwrap()).unwrap();
    let shell = ShellConfig::new(0.1, r).unwrap();
    let bc = BoundaryConditions::clamped(&Gamma0Spec::Edges(vec![Edge::West, Edge::East]), &shell.reference, 1e3).unwrap();
    (shell, bc)
}

fn stationary(gamma: f64, u: f64) -> EnergySpec {
    let fam = PolyFamily {
        terms: vec![PolyTerm { a: 1.0, b: 1.0, gamma, u, v: u.clamp(-0.1, 0.1), w: u.clamp(-0.1, 0.1) }],
        gamma: vec![GammaPrimitive::affine_a(-2.0 * gamma)],
    };
    EnergySpec::poly(fam, 0.1).unwrap()
}

#[test]
fn identity_is_a_fixed_point() {
    let (shell, bc) = setup(9);
    for (g, u) in [(2.0, 0.0), (3.0, 0.05), (4.0, 0.1)] {
        let cfg = SolverConfig { max_outer: 1, ..SolverConfig::default() };
        let r = minimize(&shell.reference, &stationary(g, u), &LoadSpec::zero(81), &shell, &bc, &cfg).unwrap();
        assert!(r.converged && r.iterations.accepted_steps == 0);
        let moved = r
            .psi_final
            .psi
            .iter()
            .zip(&shell.reference.psi)
            .flat_map(|(a, b)| (0..3).map(move |i| (a[i] - b[i]).abs()))
            .fold(0.0, f64::max);
        assert!(moved <= 1e-10);
    }
}

#[test]
fn accepted_iterates_feasible_and_clamped() {
    let (shell, bc) = setup(11);
    let cfg = SolverConfig { grad_tol: 1e-6, ..SolverConfig::default() };
    let loads = LoadSpec::uniform(121, [0.0, 0.0, 0.5], [0.0; 3]);
    let tol = BcResiduals { psi: BC_TOL, a3: cfg.normal_bc_tol };
    let mut count = 0;
    let r = minimize_observed(&shell.reference, &stationary(4.0, 0.05), &loads, &shell, &bc, &cfg, |c| {
        count += 1;
        for (k, &n) in bc.gamma0.iter().enumerate() {
            assert_eq!(c.psi[n], bc.target_psi[k]);
        }
        let rep = check_admissible_with(c, &shell, Some(&bc), tol).unwrap();
        assert!(rep.ok && rep.min_margin_plus.min(rep.min_margin_minus) >= cfg.margin_floor);
    })
    .unwrap();
    assert!(r.converged, "{:?}", r.stall);
    assert_eq!(count, r.iterations.accepted_steps);
    let mid = r.psi_final.psi[shell.grid().index(5, 5)][2];
    assert!(mid > 0.0);
}

#[test]
fn stage_objectives_nonincreasing_and_norms_finite() {
    let (shell, bc) = setup(11);
    let cfg = SolverConfig::default();
    let loads = LoadSpec::uniform(121, [0.0, 0.0, -0.3], [0.0; 3]);
    let r = minimize(&shell.reference, &stationary(3.0, 0.0), &loads, &shell, &bc, &cfg).unwrap();
    assert_eq!(r.stages.len(), cfg.max_outer);
    for w in r.stages.windows(2) {
        assert!(w[1].objective <= w[0].objective + 1e-12 * w[0].objective.abs());
    }
    for s in &r.stages {
        let end = r.stages.iter().find(|t| t.start > s.start).map_or(r.objective_history.len(), |t| t.start);
        let hist = &r.objective_history[s.start..end];
        let bad: Vec<_> = hist.windows(2).filter(|w| w[1] > w[0] + 64.0 * f64::EPSILON * w[0].abs()).map(|w| (w[0], w[1] - w[0])).collect();
        assert!(bad.is_empty(), "{bad:?}");
    }
    assert_eq!(r.norm_history.len(), r.stages.len() + 1);
    assert!(r.norm_history.iter().all(|n| n.psi_1p.is_finite() && n.a3_1p.is_finite() && n.sqrt_a_q.is_finite()));
}

#[test]
fn inadmissible_start_rejected() {
    let (shell, bc) = setup(9);
    let mut psi = shell.reference.psi.clone();
    psi[9] = [0.0, 0.125, 0.05];
    let bad = SurfaceConfiguration::from_psi(shell.grid(), psi).unwrap();
    let err = minimize(&bad, &stationary(2.0, 0.0), &LoadSpec::zero(81), &shell, &bc, &SolverConfig::default()).unwrap_err();
    assert!(matches!(err, ShellError::Inadmissible(_)));
}

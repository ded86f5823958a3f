use shellvar::energy::Side;
use shellvar::verify::*;
use shellvar::*;

fn one_term(gamma: Vec<GammaPrimitive>) -> EnergySpec {
    let fam = PolyFamily { terms: vec![PolyTerm { a: 1.0, b: 1.0, gamma: 2.0, u: 0.1, v: 0.0, w: 0.0 }], gamma };
    EnergySpec::poly(fam, 0.1).unwrap()
}

fn primitives() -> Vec<GammaPrimitive> {
    vec![
        GammaPrimitive::Affine { constant: -2.0, a_coef: 1.0, b_coef: 4.0, c_coef: -1.0 },
        GammaPrimitive::MarginPower { side: Side::Plus, exponent: 1.0, weight: 3.0 },
        GammaPrimitive::MarginPower { side: Side::Minus, exponent: 5.0, weight: 0.1 },
        GammaPrimitive::QuadOverLin { weight: 0.5 },
        GammaPrimitive::LogBarrier { mu: 2.0 },
    ]
}

#[test]
fn every_primitive_passes_alone() {
    for p in primitives() {
        let r = polyconvexity_probe(&one_term(vec![p]), 2000, 11).unwrap();
        assert!(r.passed && r.violations.is_empty(), "{p:?}: {}", r.max_violation);
    }
}

#[test]
fn reports_are_deterministic() {
    let s = one_term(primitives());
    assert_eq!(polyconvexity_probe(&s, 500, 4).unwrap(), polyconvexity_probe(&s, 500, 4).unwrap());
    let shell = ShellConfig::new(0.1, SurfacePreset::Plate.discrete_config(&SurfacePreset::Plate.grid(4, 4).unwrap()).unwrap()).unwrap();
    assert_eq!(coercivity_probe(&s, &shell, 500, 4).unwrap(), coercivity_probe(&s, &shell, 500, 4).unwrap());
    let concave = |p: &MPoint| Ok(-p.a * p.a);
    assert_ne!(probe_convexity(concave, 50, 4).unwrap(), probe_convexity(concave, 50, 5).unwrap());
}

#[test]
fn stored_violations_recheck() {
    let concave = |p: &MPoint| Ok(-p.a * p.a + (p.b * p.b / p.a));
    let r = probe_convexity(concave, 300, 2).unwrap();
    assert!(!r.passed);
    for v in &r.violations {
        assert!(recheck_violation(concave, v).unwrap());
    }
}

#[test]
fn helfrich_coercivity_unsupported() {
    let h = EnergySpec::helfrich(HelfrichParams::default(), 0.1).unwrap();
    let shell = ShellConfig::new(0.1, SurfacePreset::Plate.discrete_config(&SurfacePreset::Plate.grid(4, 4).unwrap()).unwrap()).unwrap();
    assert!(matches!(coercivity_probe(&h, &shell, 10, 1), Err(ShellError::UnsupportedSpec(_))));
}

#[test]
fn blowup_paths_are_strictly_decreasing() {
    let r = blowup_probe(&one_term(vec![GammaPrimitive::LogBarrier { mu: 0.01 }]), 16).unwrap();
    assert!(r.passed && r.diverges_plus && r.diverges_minus);
    for p in &r.paths {
        assert!(p.margin_values.windows(2).all(|w| w[1] < w[0]));
        assert!(*p.margin_values.last().unwrap() <= 1e-12 * (1.0 + 1e-9));
    }
    assert!(blowup_probe(&one_term(vec![]), 3).is_err());
}

#[test]
fn classification_covers_all_outcomes() {
    let barrier = one_term(vec![GammaPrimitive::LogBarrier { mu: 1.0 }]);
    let c = polyconvexity_probe(&barrier, 200, 1).unwrap();
    let b = blowup_probe(&barrier, 10).unwrap();
    assert_eq!(classify(&c, &b), "polyconvex and orientation-preserving");
    let plain = blowup_probe(&one_term(vec![]), 10).unwrap();
    assert_eq!(classify(&c, &plain), "polyconvex but not orientation-preserving");
}

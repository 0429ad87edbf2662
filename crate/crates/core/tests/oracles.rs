mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ultramorse::critical::{newton_solve, NewtonOutcome};
use ultramorse::galerkin::w_distance;
use ultramorse::morse::morse_polynomial_from_indices;
use ultramorse::nonarch::{extend_function, Exponent, SmoothFunction, DEFAULT_ORDER};
use ultramorse::{
    build_level, chafee_infante, deflated_search, run_ladder, LadderConfig, LeviCivitaNumber, QuadratureSpec,
    SolverConfig,
};

use common::*;

#[test]
fn nonarch_sampled_properties() {
    let tally = nonarch_suite(1000, 2024);
    assert!(tally.passed(), "{}", tally.report());
}

#[test]
fn exp_lift_matches_factorials() {
    let exp = (0..10).fold(SmoothFunction::new(f64::exp), |f, _| f.with_derivative(f64::exp));
    let lifted = extend_function(&exp, &LeviCivitaNumber::epsilon()).unwrap();
    let mut factorial = 1u64;
    for k in 0..=10u64 {
        if k > 0 {
            factorial *= k;
        }
        let c = lifted.coefficient(Exponent::from_int(k as i32));
        assert!((c - 1.0 / factorial as f64).abs() <= 1e-15 / factorial as f64 + f64::EPSILON * c, "k = {k}: {c}");
    }
    assert_eq!(lifted.terms().len(), 11);
    assert_eq!(lifted.order(), DEFAULT_ORDER);
}

#[test]
fn morse_relation_round_trip() {
    let tally = morse_round_trip(500, 99);
    assert!(tally.passed(), "{}", tally.report());
}

#[test]
fn derivatives_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for mu in [0.5, 2.5, 5.0] {
        let p = chafee_infante(mu).unwrap();
        for n in [4, 12] {
            let level = build_level(&p.spec, n, QuadratureSpec::default_for(n)).unwrap();
            for _ in 0..5 {
                let v = random_coeffs(&mut rng, n);
                let g = gradient_rel_error(&level, &v);
                let h = hessian_rel_error(&level, &v);
                assert!(g < 1e-6, "mu = {mu}, n = {n}: gradient rel error {g:e}");
                assert!(h < 1e-5, "mu = {mu}, n = {n}: hessian rel error {h:e}");
            }
        }
    }
}

#[test]
fn shooting_oracle_reproduces_known_amplitude() {
    // one-hump profile at mu = 2.5, first sine coefficient from the Galerkin
    // solve at n = 32 agrees with the projection of the shooting profile
    let profile = shooting_profile(2.5, 1);
    let h = std::f64::consts::PI / (profile.len() - 1) as f64;
    let c1: f64 = profile
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let x = i as f64 * h;
            let w = if i == 0 || i == profile.len() - 1 { 0.5 * h } else { h };
            w * u * (2.0 / std::f64::consts::PI).sqrt() * x.sin()
        })
        .sum();
    assert!((c1.abs() - 1.817734).abs() < 1e-5, "c1 = {c1}");
}

#[test]
fn level_points_match_shooting_profiles() {
    let p = chafee_infante(5.0).unwrap();
    let level = build_level(&p.spec, 16, QuadratureSpec::default_for(16)).unwrap();
    let points = deflated_search(&level, &SolverConfig::default()).unwrap();
    assert_eq!(points.len(), 5);
    let one_hump = shooting_profile(5.0, 1);
    let two_hump = shooting_profile(5.0, 2);
    for pt in points.iter().filter(|pt| pt.morse_index < 2) {
        let profile = if pt.morse_index == 0 { &one_hump } else { &two_hump };
        let d = profile_distance(pt.coeffs.as_slice(), profile);
        assert!(d < 1e-4, "index {} point: L2 distance {d:e}", pt.morse_index);
    }
}

#[test]
fn ladder_invariants_on_presets() {
    for mu in [0.5, 2.5, 5.0] {
        let p = chafee_infante(mu).unwrap();
        let cfg = LadderConfig { levels: vec![4, 8, 16], ..LadderConfig::default() };
        let trace = run_ladder(&p.spec, &cfg).unwrap();
        let facts = p.known_facts.as_ref().unwrap();
        let mut live = 0;
        for level in &trace.per_level {
            let m = morse_polynomial_from_indices(level.points.iter().map(|q| q.morse_index));
            assert_eq!(level.morse.as_ref(), Some(&m), "mu = {mu}, level {}", level.level);
            assert!(level.relation.as_ref().unwrap().holds(), "mu = {mu}, level {}", level.level);
            assert_eq!(level.points.len(), facts.count);
            let families_here = trace.families.iter().filter(|f| f.members.iter().any(|m| m.level == level.level));
            let count = families_here.count();
            assert!(count >= live, "family count dropped at level {}: {trace:#?}", level.level);
            live = count;
        }
        let from = trace.stable_from.unwrap();
        for f in &trace.families {
            let tail: Vec<usize> =
                f.members.iter().zip(&f.index_history).filter(|(m, _)| m.level >= from).map(|(_, &i)| i).collect();
            assert!(tail.windows(2).all(|w| w[0] == w[1]), "mu = {mu}: index history {:?}", f.index_history);
        }
    }
}

#[test]
fn finest_member_is_close_to_refined_reference() {
    let p = chafee_infante(2.5).unwrap();
    let trace = run_ladder(&p.spec, &LadderConfig::default()).unwrap();
    let cfg = SolverConfig::default();
    let fine = build_level(&p.spec, 64, QuadratureSpec::default_for(64)).unwrap();
    for f in trace.families.iter().filter(|f| f.index_history[0] == 0) {
        let pt = trace.family_point(f, 32).unwrap();
        let start = ultramorse::galerkin::embed(&pt.coeffs, 64).unwrap();
        let NewtonOutcome::Converged { point, .. } = newton_solve(&fine, &start, &cfg, &[]).unwrap() else {
            panic!("no reference point at n = 64");
        };
        let d = w_distance(&pt.coeffs, &point.coeffs, p.spec.length());
        assert!(d < 1e-4, "W distance to n = 64 reference {d:e}");
        assert!(point.coeffs.as_slice()[32..].iter().all(|c| c.abs() < 1e-8));
    }
}

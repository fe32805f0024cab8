use num_complex::Complex64 as C64;
use weakval::catalog;
use weakval::evolution::{evolve_exact, post_select, PostSelectionResult};
use weakval::harness::{run_experiment, run_scenario, sweep_scenario, RunOptions};
use weakval::weak::{
    correlator_decomposition, extract_joint_fock, extract_joint_spin, pointer_shift_check,
    scenario_weak_value, strong_position_estimate,
};
use weakval::{Scenario, WeakError};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn conditioned(s: &Scenario) -> PostSelectionResult {
    post_select(&evolve_exact(s).unwrap(), s).unwrap()
}

fn scenario(name: &str) -> Scenario {
    catalog::resolve(name).unwrap()
}

#[test]
fn bundled_closed_forms_match_the_oracle() {
    for name in catalog::names() {
        if let Some(expected) = catalog::expected_weak_value(name) {
            let got = scenario_weak_value(&scenario(name)).unwrap();
            assert!(
                (got - expected).norm() <= 1e-12 * (1.0 + expected.norm()),
                "{name}: {got} vs {expected}"
            );
        }
    }
}

#[test]
fn zero_coupling_cannot_be_inverted() {
    let mut s = scenario("joint_pair");
    s.couplings[1].gt = 0.0;
    let r = conditioned(&s);
    assert!(matches!(
        extract_joint_fock(&r, &s),
        Err(WeakError::ZeroCoupling { pointer: 1 })
    ));
    assert!(matches!(
        correlator_decomposition(&r, &s),
        Err(WeakError::ZeroCoupling { pointer: 1 })
    ));
}

#[test]
fn route_preconditions() {
    let pair = scenario("joint_pair");
    let r = conditioned(&pair);
    assert!(matches!(
        pointer_shift_check(&r, &pair),
        Err(WeakError::Unsupported(_))
    ));
    assert!(matches!(
        extract_joint_spin(&r, &pair),
        Err(WeakError::Unsupported(_))
    ));

    let spin = scenario("aav_qubit_spinptr");
    let rs = conditioned(&spin);
    assert!(matches!(
        extract_joint_fock(&rs, &spin),
        Err(WeakError::Unsupported(_))
    ));

    let nc = scenario("joint_noncommuting");
    assert!(matches!(
        strong_position_estimate(&nc),
        Err(WeakError::Precondition(_))
    ));
}

#[test]
fn single_pointer_correlator_table() {
    let s = scenario("aav_qubit");
    let r = conditioned(&s);
    let (t, w) = correlator_decomposition(&r, &s).unwrap();
    assert_eq!(t.entries.len(), 2);
    let (x, p) = pointer_shift_check(&r, &s).unwrap();
    assert_eq!(t.by_signature("X"), Some(x));
    assert_eq!(t.by_signature("P"), Some(p));
    let gt = s.couplings[0].gt;
    let recombined = c(x / 2.0, p) * (2.0 / gt);
    assert!((recombined - w).norm() < 1e-14);
}

#[test]
fn two_pointer_real_and_imaginary_parts() {
    let s = scenario("joint_pair");
    let r = conditioned(&s);
    let (t, w) = correlator_decomposition(&r, &s).unwrap();
    let gt = s.couplings[0].gt;
    let sigma: f64 = 1.0;
    let g2 = 1.0 / (gt * gt);
    let re =
        g2 * (t.by_signature("XX").unwrap() - 4.0 * sigma.powi(4) * t.by_signature("PP").unwrap());
    let im =
        2.0 * sigma * sigma * g2 * (t.by_signature("XP").unwrap() + t.by_signature("PX").unwrap());
    assert!((w - c(re, im)).norm() < 1e-12, "{w} vs {re} + {im}i");
    assert!(t.max_imag < 1e-12);
}

#[test]
fn pointer_shifts_follow_the_weak_value() {
    let s = scenario("aav_qubit");
    let r = conditioned(&s);
    let (x, p) = pointer_shift_check(&r, &s).unwrap();
    let lambda = s.lambda_max();
    assert!((x - 0.02 * (1.0 - 2f64.sqrt())).abs() <= 3.0 * lambda * lambda * 0.02 * 1.5);
    assert!(p.abs() < 1e-12, "real weak value moves no momentum: {p}");

    let s = scenario("aav_imaginary");
    let r = conditioned(&s);
    let (x, p) = pointer_shift_check(&r, &s).unwrap();
    assert!(x.abs() < 1e-12);
    let gt = s.couplings[0].gt;
    assert!((p - (-gt / 2.0)).abs() <= 3.0 * lambda * lambda * gt);
}

#[test]
fn spin_pair_recovers_minus_one() {
    let s = scenario("joint_pair_spinptr");
    let r = conditioned(&s);
    let w = extract_joint_spin(&r, &s).unwrap();
    let gt = s.couplings[0].gt;
    assert!((w - c(-1.0, 0.0)).norm() <= gt * gt, "{w}");
}

#[test]
fn spin_route_converges_quadratically() {
    let s = scenario("aav_qubit_spinptr");
    let sw = sweep_scenario(&s, &[0.16, 0.08, 0.04, 0.02], &RunOptions::default()).unwrap();
    assert!(sw.slope_ok(), "slope {}", sw.fitted_slope);
}

#[test]
fn imaginary_weak_value_converges_quadratically() {
    let s = scenario("aav_imaginary");
    let sw = sweep_scenario(&s, &[0.16, 0.08, 0.04, 0.02], &RunOptions::default()).unwrap();
    assert!(sw.slope_ok(), "slope {}", sw.fitted_slope);
    assert!(sw.lambda_grid.windows(2).all(|w| w[0] > w[1]));
    assert!(sw.errors.iter().all(|&e| e > 0.0));
}

#[test]
fn strong_estimates_match_expectations() {
    for (name, expect) in [
        ("strong_eigen", 1.0),
        ("strong_product", 1.0),
        ("strong_entangled", -1.0),
    ] {
        let est = strong_position_estimate(&scenario(name)).unwrap();
        assert!((est - c(expect, 0.0)).norm() <= 1e-8, "{name}: {est}");
    }
}

#[test]
fn post_equal_to_pre_gives_the_ordinary_expectation() {
    let mut s = scenario("joint_pair");
    s.post = s.pre.clone();
    let pre = s.pre_state().unwrap();
    let ops = s.system_observables().unwrap();
    let prod = ops[0].mul(&ops[1]).unwrap();
    let mean = pre.inner(&prod.apply(&pre).unwrap()).unwrap();
    assert!((scenario_weak_value(&s).unwrap() - mean).norm() < 1e-14);

    let mut last = f64::INFINITY;
    for lambda in [0.1, 0.03, 0.01, 0.003] {
        let r = run_scenario(&s.with_lambda(lambda), &RunOptions::default()).unwrap();
        assert!(r.abs_error < last, "error must shrink as lambda falls");
        assert!(r.pass, "lambda {lambda}: {r:?}");
        last = r.abs_error;
    }
}

/// Overlap of the conditioned pointer with the ground state displaced by `alpha`.
fn coherent_fidelity(r: &PostSelectionResult, alpha: f64) -> f64 {
    let amps = r.conditioned.amps();
    let mut term = (-alpha * alpha / 2.0).exp();
    let mut overlap = C64::new(0.0, 0.0);
    let mut norm = 0.0;
    for (n, a) in amps.iter().enumerate() {
        if n > 0 {
            term *= alpha / (n as f64).sqrt();
        }
        overlap += a * term;
        norm += term * term;
    }
    overlap.norm_sqr() / norm
}

#[test]
fn conditioned_pointer_is_a_shifted_ground_state() {
    let base = scenario("aav_qubit");
    for lambda in [0.005, 0.01, 0.02, 0.05] {
        let s = base.with_lambda(lambda);
        let aw = scenario_weak_value(&s).unwrap().re;
        let f = coherent_fidelity(&conditioned(&s), lambda * aw);
        assert!(
            f > 1.0 - 10.0 * lambda * lambda,
            "lambda {lambda}: fidelity {f}"
        );
    }
}

#[test]
fn reports_are_deterministic_and_round_trip() {
    let a = run_experiment("joint_triple").unwrap();
    let b = run_experiment("joint_triple").unwrap();
    let ja = serde_json::to_string(&a).unwrap();
    assert_eq!(ja, serde_json::to_string(&b).unwrap());
    let back: weakval::WeakValueReport = serde_json::from_str(&ja).unwrap();
    assert_eq!(back, a);
}

/// Invariant of the report type: in the weak regime every catalog scenario
/// meets `3 lambda^2 (1 + |A_W|)`.
#[test]
fn catalog_meets_the_report_invariant_in_the_weak_regime() {
    let mut violators = Vec::new();
    for name in catalog::names() {
        let r = run_experiment(name).unwrap();
        if r.lambda_max > 0.05 {
            continue;
        }
        let limit = 3.0 * r.lambda_max * r.lambda_max * (1.0 + r.analytic.norm());
        if r.abs_error > limit {
            violators.push(format!("{name}: error {:.3e} > {limit:.3e}", r.abs_error));
        }
    }
    assert!(violators.is_empty(), "{}", violators.join("; "));
}

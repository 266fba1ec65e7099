use liouville_lab::criterion::{
    check_g_far, check_g_near, classify_integral, drift_example, heisenberg_example, liouville_check, IntegralVerdict,
    Overall, QHat, SamplingPlan, SurfaceLaw,
};
use liouville_lab::geometry::{dyadic_samples, shell_samples, ScalarExpr};

fn law(exponent: f64) -> SurfaceLaw {
    SurfaceLaw { coeff: 1.0, exponent }
}

#[test]
fn fast_path_agrees_with_numeric_ladder() {
    for d in [3.0, 4.0, 6.0] {
        for alpha in [1.0, 1.5, 2.0, 2.5, 3.0] {
            let (_, mut cfg) = heisenberg_example(1, alpha);
            cfg.q_hat = QHat::power(alpha);
            let r = classify_integral(law(d - 1.0), &cfg).unwrap();
            let want = if alpha <= 2.0 {
                IntegralVerdict::Divergent
            } else {
                IntegralVerdict::Convergent
            };
            assert_eq!(r.fast_path, Some(want), "D = {d}, alpha = {alpha}");
            assert_eq!(r.numeric, want, "D = {d}, alpha = {alpha}");
            assert_eq!(r.verdict, want);
        }
    }
}

#[test]
fn expression_weights_use_the_numeric_path() {
    let (_, mut cfg) = heisenberg_example(1, 1.5);
    cfg.q_hat = QHat::Expr(ScalarExpr::var(0).powf(-1.5));
    let r = classify_integral(law(3.0), &cfg).unwrap();
    assert_eq!(r.fast_path, None);
    assert_eq!(r.verdict, IntegralVerdict::Divergent);
    cfg.q_hat = QHat::Expr(ScalarExpr::var(0).powf(-3.0));
    assert_eq!(
        classify_integral(law(3.0), &cfg).unwrap().verdict,
        IntegralVerdict::Convergent
    );
}

#[test]
fn partial_integrals_grow_with_lambda() {
    for alpha in [1.5, 2.0, 2.5, 3.0] {
        let mut prev: Option<(Vec<f64>, IntegralVerdict)> = None;
        for lambda in [0.25, 0.5, 1.0, 2.0, 4.0] {
            let (_, mut cfg) = heisenberg_example(1, alpha);
            cfg.q_hat = QHat::Expr(ScalarExpr::var(0).powf(-alpha));
            cfg.lambda = lambda;
            let r = classify_integral(law(3.0), &cfg).unwrap();
            if let Some((p, v)) = &prev {
                for (a, b) in p.iter().zip(&r.log_partial_integrals) {
                    assert!(b >= a, "alpha = {alpha}, lambda = {lambda}");
                }
                if *v == IntegralVerdict::Divergent {
                    assert_eq!(r.numeric, IntegralVerdict::Divergent);
                }
            }
            prev = Some((r.log_partial_integrals.clone(), r.numeric));
        }
    }
}

#[test]
fn larger_kappa_never_breaks_g() {
    let (spec, cfg) = drift_example(1, 1.5, 1.0);
    let far = dyadic_samples(&cfg.norm, cfg.rho0, cfg.r_max(), 100, 1);
    let near = shell_samples(&cfg.norm, 0.0, cfg.rho0, 300, 0, 1e-6);
    let est_far = check_g_far(&spec, &cfg, &far).unwrap().kappa_estimate;
    let est_near = check_g_near(&spec, &cfg, &near).unwrap().kappa_estimate;
    assert!(est_far.is_finite() && est_near.is_finite());
    let mut last = (false, false);
    for k in [0.25, 0.5, 1.01, 2.0, 8.0] {
        let mut c = cfg.clone();
        c.kappa = Some(k * est_far.max(est_near));
        let now = (
            check_g_far(&spec, &c, &far).unwrap().passes,
            check_g_near(&spec, &c, &near).unwrap().passes,
        );
        assert!(!last.0 || now.0, "far check lost at kappa factor {k}");
        assert!(!last.1 || now.1, "near check lost at kappa factor {k}");
        last = now;
    }
    assert_eq!(last, (true, true));
}

#[test]
fn scaling_q_up_preserves_the_verdict() {
    let plan = SamplingPlan {
        near: 300,
        middle: 100,
        per_octave: 60,
        skip: 0,
    };
    let (mut spec, cfg) = drift_example(1, 1.5, 1.0);
    let base = liouville_check(&spec, &cfg, &plan).unwrap();
    assert_eq!(base.overall, Overall::LiouvilleHolds);
    spec.potential = 3.0 * spec.potential.clone();
    let scaled = liouville_check(&spec, &cfg, &plan).unwrap();
    assert_eq!(scaled.overall, Overall::LiouvilleHolds);
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
    assert!(rel(scaled.g_near.kappa_estimate * 3.0, base.g_near.kappa_estimate) < 1e-9);
    assert!(scaled.g_far.q_lower_worst.value >= base.g_far.q_lower_worst.value);
}

#[test]
fn convergent_regime_is_inconclusive() {
    let plan = SamplingPlan {
        near: 300,
        middle: 100,
        per_octave: 60,
        skip: 0,
    };
    let (spec, cfg) = heisenberg_example(1, 3.0);
    let r = liouville_check(&spec, &cfg, &plan).unwrap();
    assert_eq!(r.integral.verdict, IntegralVerdict::Convergent);
    assert_eq!(r.overall, Overall::Inconclusive);
    assert!(r.s.passes && r.g_far.passes && r.g_near.passes);
}

mod common;

use liouville_lab::criterion::{heisenberg_spec, heisenberg_with_drift, OperatorSpec, DRIFT_WINDOW};
use liouville_lab::geometry::ScalarExpr;
use liouville_lab::hoermander::{grushin, heisenberg};
use liouville_lab::pde::{
    assemble, invading_run, limit_estimate, solve_dirichlet, wmp_test, BoxDomain, InvadingConfig, Method,
    PotentialFamily, SchemeConfig, SolverConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tight() -> SolverConfig {
    SolverConfig {
        tol: 1e-12,
        ..SolverConfig::default()
    }
}

fn max_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

#[test]
fn presets_and_random_operators_are_m_matrices() {
    let schemes = [
        SchemeConfig::default(),
        SchemeConfig {
            dir_step_factor: 1.0,
            dir_step_power: 0.5,
        },
    ];
    let mut specs = vec![
        heisenberg_spec(1, 3.0),
        heisenberg_with_drift(1, 1.5, 1.0, DRIFT_WINDOW),
        OperatorSpec::without_drift(grushin(), ScalarExpr::constant(0.0)),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    specs.extend((0..6).map(|_| common::random_h1_operator(&mut rng)));
    for (k, spec) in specs.iter().enumerate() {
        for s in &schemes {
            let dom = BoxDomain::cube(spec.frame.n(), 2.0, 0.25).unwrap();
            let r = assemble(spec, &dom, s).unwrap().m_matrix_report();
            assert!(r.ok, "operator {k}, scheme {s:?}: {r:?}");
        }
    }
}

#[test]
fn comparison_principle_holds() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..4 {
        let spec = common::random_h1_operator(&mut rng);
        let dom = BoxDomain::cube(3, 1.0, 0.125).unwrap();
        let op = assemble(&spec, &dom, &SchemeConfig::default()).unwrap();
        let (n, nd) = (op.num_unknowns(), op.num_dirichlet());
        let g2: Vec<f64> = (0..nd).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g1: Vec<f64> = g2.iter().map(|g| g - rng.gen_range(0.0..0.5)).collect();
        let f2: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f1: Vec<f64> = f2.iter().map(|f| f + rng.gen_range(0.0..0.5)).collect();
        let (u1, _) = solve_dirichlet(&op, &g1, &f1, &tight(), None).unwrap();
        let (u2, _) = solve_dirichlet(&op, &g2, &f2, &tight(), None).unwrap();
        for (a, b) in u1.iter().zip(&u2) {
            assert!(a - b <= 1e-9, "{a} > {b}");
        }
    }
}

#[test]
fn random_operators_obey_the_maximum_principle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for k in 0..3 {
        let spec = common::random_h1_operator(&mut rng);
        let op = assemble(
            &spec,
            &BoxDomain::cube(3, 1.0, 0.125).unwrap(),
            &SchemeConfig::default(),
        )
        .unwrap();
        let r = wmp_test(&op, 6, k, &SolverConfig::default());
        assert!(r.passes, "{r:?}");
    }
}

#[test]
fn solvers_agree() {
    let spec = heisenberg_with_drift(1, 1.5, 1.0, DRIFT_WINDOW);
    let op = assemble(&spec, &BoxDomain::cube(3, 1.0, 0.25).unwrap(), &SchemeConfig::default()).unwrap();
    let g = op.dirichlet_values(|x| x[0] - x[2]);
    let f = op.interior_values(|x| 1.0 + x[1] * x[1]);
    let sols: Vec<Vec<f64>> = [Method::Direct, Method::BiCgStab, Method::GaussSeidel]
        .into_iter()
        .map(|method| {
            let cfg = SolverConfig { method, ..tight() };
            let (u, rep) = solve_dirichlet(&op, &g, &f, &cfg, None).unwrap();
            assert!(rep.residual <= rep.target);
            u
        })
        .collect();
    assert!(max_err(&sols[0], &sols[1]) < 1e-9);
    assert!(max_err(&sols[0], &sols[2]) < 1e-9);
}

#[test]
fn grushin_polynomial_reproduction_and_rate() {
    let spec = OperatorSpec::without_drift(grushin(), ScalarExpr::constant(0.0));
    let solve = |h: f64, u: fn(&[f64]) -> f64, f: fn(&[f64]) -> f64| {
        let op = assemble(&spec, &BoxDomain::cube(2, 1.0, h).unwrap(), &SchemeConfig::default()).unwrap();
        let (sol, _) = solve_dirichlet(&op, &op.dirichlet_values(u), &op.interior_values(f), &tight(), None).unwrap();
        max_err(&sol, &op.interior_values(u))
    };
    for h in [0.125, 0.0625] {
        assert!(solve(h, |x| x[0] * x[0], |_| 2.0) < 1e-10);
    }
    let u: fn(&[f64]) -> f64 = |x| x[0].powi(4) + x[0] * x[0] * x[1];
    let f: fn(&[f64]) -> f64 = |x| 12.0 * x[0] * x[0] + 2.0 * x[1];
    let errs: Vec<f64> = [0.125, 0.0625, 0.03125].iter().map(|&h| solve(h, u, f)).collect();
    for w in errs.windows(2) {
        assert!((w[0] / w[1]).log2() >= 1.9, "{errs:?}");
    }
}

#[test]
fn heisenberg_quadratic_is_reproduced() {
    // Σ Xᵢ²(x² + y²) = 4; with h_d = h the horizontal steps stay on grid lines in x, y.
    let spec = OperatorSpec::without_drift(heisenberg(1), ScalarExpr::constant(0.0));
    let op = assemble(
        &spec,
        &BoxDomain::cube(3, 1.0, 0.125).unwrap(),
        &SchemeConfig::default(),
    )
    .unwrap();
    let u = |x: &[f64]| x[0] * x[0] + x[1] * x[1];
    let (sol, _) = solve_dirichlet(
        &op,
        &op.dirichlet_values(u),
        &op.interior_values(|_| 4.0),
        &tight(),
        None,
    )
    .unwrap();
    assert!(max_err(&sol, &op.interior_values(u)) < 1e-9);
}

#[test]
fn constants_map_to_minus_q() {
    for spec in [
        heisenberg_spec(1, 3.0),
        heisenberg_with_drift(1, 1.5, 1.0, DRIFT_WINDOW),
    ] {
        let op = assemble(&spec, &BoxDomain::cube(3, 3.0, 0.25).unwrap(), &SchemeConfig::default()).unwrap();
        for gamma in [0.5, 1.0, 2.0] {
            let lu = op.apply_to_function(|_| gamma);
            for (v, q) in lu.iter().zip(op.potential()) {
                assert!(
                    (v + gamma * q).abs() <= 1e-12 * (1.0 + gamma * q),
                    "{v} vs {}",
                    -gamma * q
                );
            }
        }
    }
}

#[test]
fn invading_ladder_is_monotone_and_bounded() {
    for (preset, potential) in [
        ("grushin", PotentialFamily::Gradient),
        ("heisenberg:1", PotentialFamily::Radial),
    ] {
        let cfg = InvadingConfig {
            preset: preset.into(),
            potential,
            alpha: 1.5,
            ladder: vec![1.0, 2.0],
            h: 0.25,
            ..InvadingConfig::default()
        };
        let run = invading_run(&cfg).unwrap();
        assert!(run.decreasing, "{preset}");
        assert!(run.max_monotonicity_defect <= 1e-6, "{preset}");
        assert!(run.max_bound_defect <= 1e-8, "{preset}");
        for s in &run.solutions {
            assert!(s.min() >= -1e-8 && s.max() <= cfg.gamma + 1e-8);
        }
    }
}

#[test]
fn aitken_recovers_geometric_limits() {
    let c: Vec<f64> = (0..3).map(|k| 0.7 + 0.2 * 0.5f64.powi(k)).collect();
    assert!((limit_estimate(&c).unwrap() - 0.7).abs() < 1e-12);
}

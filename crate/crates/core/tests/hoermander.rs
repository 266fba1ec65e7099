use liouville_lab::fields::{DilationWeights, PolyVectorField};
use liouville_lab::hoermander::{
    check_hoermander, check_ntd, generate_brackets, grushin, heisenberg, heisenberg_group_law, principal_matrix,
    rank_at, Frame,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_points(n: usize, count: usize, half: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..n).map(|_| rng.gen_range(-half..half)).collect())
        .collect()
}

fn presets() -> Vec<(&'static str, Frame)> {
    vec![("grushin", grushin()), ("H1", heisenberg(1)), ("H2", heisenberg(2))]
}

#[test]
fn presets_have_step_two_on_random_points() {
    for (name, f) in presets() {
        let pts = random_points(f.n(), 50, 10.0, 11);
        let r = check_hoermander(&f, &pts, None);
        assert!(r.satisfied, "{name}");
        assert_eq!(r.step, Some(2), "{name}");
        assert_eq!(r.points_checked, 51);
    }
}

#[test]
fn grushin_is_degenerate_on_the_axis() {
    let g = grushin();
    assert_eq!(rank_at(g.fields(), &[0.0, 3.0]), 1);
    assert_eq!(rank_at(g.fields(), &[0.5, 3.0]), 2);
    let b = generate_brackets(&g, 2);
    assert_eq!(rank_at(&b.fields_up_to(2), &[0.0, 3.0]), 2);
    assert!(check_ntd(g.fields(), &[vec![0.0, 0.0], vec![1.0, -1.0]]));
}

#[test]
fn rank_deficient_frame_is_rejected() {
    let fields = vec![
        PolyVectorField::parse(&["1", "0", "0"]).unwrap(),
        PolyVectorField::parse(&["0", "x1", "0"]).unwrap(),
    ];
    let f = Frame::new(fields, DilationWeights::new(vec![1, 2, 2]).unwrap()).unwrap();
    let r = check_hoermander(&f, &random_points(3, 10, 2.0, 1), None);
    assert!(!r.satisfied);
    assert_eq!(r.worst_rank, 2);
}

#[test]
fn principal_matrix_is_psd() {
    for (name, f) in presets() {
        for x in random_points(f.n(), 200, 10.0, 5) {
            let a = principal_matrix(&f, &x);
            assert!(a.min_eigenvalue() >= -1e-10, "{name} at {x:?}");
            assert!((&a.a - a.a.transpose()).abs().max() == 0.0);
        }
    }
}

#[test]
fn jacobian_basis_matches_heisenberg_frame() {
    for m in 1..=2 {
        let law = heisenberg_group_law(m);
        let basis = law.jacobian_basis();
        let frame = heisenberg(m);
        let n = 2 * m + 1;
        assert_eq!(&basis[..2 * m], frame.fields());
        assert_eq!(basis[n - 1], PolyVectorField::partial(n, n - 1));
    }
}

#[test]
fn degree_one_jacobian_fields_generate() {
    let law = heisenberg_group_law(2);
    let basis = law.jacobian_basis();
    let f = Frame::new(basis[..4].to_vec(), DilationWeights::new(vec![1, 1, 1, 1, 2]).unwrap()).unwrap();
    let r = check_hoermander(&f, &random_points(5, 30, 5.0, 2), None);
    assert_eq!(r.step, Some(2));
}

proptest! {
    #[test]
    fn jacobian_basis_is_left_invariant(
        a in prop::collection::vec(-10.0f64..10.0, 3),
        x in prop::collection::vec(-10.0f64..10.0, 3),
    ) {
        let law = heisenberg_group_law(1);
        let ax = law.multiply(&a, &x);
        let d = law.right_jacobian(&a, &x);
        for j in law.jacobian_basis() {
            let jx = j.evaluate(&x);
            let pushed: Vec<f64> = d.iter().map(|row| row.iter().zip(&jx).map(|(p, q)| p * q).sum()).collect();
            let target = j.evaluate(&ax);
            for (p, q) in pushed.iter().zip(&target) {
                prop_assert!((p - q).abs() <= 1e-10 * (1.0 + q.abs()));
            }
        }
    }

    #[test]
    fn group_law_is_associative_with_inverse(
        a in prop::collection::vec(-5.0f64..5.0, 3),
        b in prop::collection::vec(-5.0f64..5.0, 3),
        c in prop::collection::vec(-5.0f64..5.0, 3),
    ) {
        let law = heisenberg_group_law(1);
        let l = law.multiply(&law.multiply(&a, &b), &c);
        let r = law.multiply(&a, &law.multiply(&b, &c));
        for (p, q) in l.iter().zip(&r) {
            prop_assert!((p - q).abs() <= 1e-10);
        }
        let inv: Vec<f64> = a.iter().map(|v| -v).collect();
        for v in law.multiply(&a, &inv) {
            prop_assert!(v.abs() <= 1e-12);
        }
    }
}

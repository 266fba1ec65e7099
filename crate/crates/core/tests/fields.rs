use liouville_lab::fields::{rat, DilationWeights, FieldDegree, PolyVectorField, Polynomial};
use liouville_lab::hoermander::{grushin, heisenberg};
use proptest::prelude::*;

const N: usize = 3;

fn poly_from_terms(n: usize, terms: &[(Vec<u32>, i64, i64)]) -> Polynomial {
    terms.iter().fold(Polynomial::zero(n), |acc, (e, num, den)| {
        acc.try_add(&Polynomial::monomial(n, e.clone(), rat(*num, *den)))
            .unwrap()
    })
}

fn arb_poly() -> impl Strategy<Value = Polynomial> {
    prop::collection::vec((prop::collection::vec(0u32..3, N), -4i64..=4, 1i64..=3), 0..4)
        .prop_map(|t| poly_from_terms(N, &t))
}

fn arb_field() -> impl Strategy<Value = PolyVectorField> {
    prop::collection::vec(arb_poly(), N).prop_map(|c| PolyVectorField::new(c).unwrap())
}

fn monomials_of_weight(sigma: &[u32], w: u32, max_exp: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut e = vec![0u32; sigma.len()];
    fn rec(k: usize, left: u32, sigma: &[u32], max_exp: u32, e: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if k == sigma.len() {
            if left == 0 {
                out.push(e.clone());
            }
            return;
        }
        for p in 0..=max_exp {
            if p * sigma[k] > left {
                break;
            }
            e[k] = p;
            rec(k + 1, left - p * sigma[k], sigma, max_exp, e, out);
        }
        e[k] = 0;
    }
    rec(0, w, sigma, max_exp, &mut e, &mut out);
    out
}

/// A field homogeneous of degree `d`: slot `j` gets monomials of weight `σⱼ − d`.
fn homogeneous_field(sigma: &[u32], d: i64, picks: &[(usize, i64)]) -> PolyVectorField {
    let n = sigma.len();
    let coeffs = (0..n)
        .map(|j| {
            let w = sigma[j] as i64 - d;
            if w < 0 {
                return Polynomial::zero(n);
            }
            let pool = monomials_of_weight(sigma, w as u32, 3);
            let mut p = Polynomial::zero(n);
            for (k, &(sel, c)) in picks.iter().enumerate() {
                if (k % n) != j || pool.is_empty() || c == 0 {
                    continue;
                }
                let e = pool[sel % pool.len()].clone();
                p = p.try_add(&Polynomial::monomial(n, e, rat(c, 1))).unwrap();
            }
            p
        })
        .collect();
    PolyVectorField::new(coeffs).unwrap()
}

fn arb_weights() -> impl Strategy<Value = Vec<u32>> {
    prop::sample::select(vec![
        vec![1, 1, 1],
        vec![1, 1, 2],
        vec![1, 2, 3],
        vec![1, 2, 2],
        vec![1, 1, 3],
    ])
}

fn arb_picks() -> impl Strategy<Value = Vec<(usize, i64)>> {
    prop::collection::vec((0usize..50, -3i64..=3), 0..9)
}

fn assert_zero(f: &PolyVectorField) {
    assert!(f.is_zero(), "expected zero field, got {:?}", f.to_strings());
}

proptest! {
    #[test]
    fn bracket_is_antisymmetric(x in arb_field(), y in arb_field()) {
        let xy = x.lie_bracket(&y).unwrap();
        let yx = y.lie_bracket(&x).unwrap();
        assert_zero(&xy.try_add(&yx).unwrap());
        assert_zero(&x.lie_bracket(&x).unwrap());
    }

    #[test]
    fn jacobi_identity_is_exact(x in arb_field(), y in arb_field(), z in arb_field()) {
        let a = x.lie_bracket(&y.lie_bracket(&z).unwrap()).unwrap();
        let b = y.lie_bracket(&z.lie_bracket(&x).unwrap()).unwrap();
        let c = z.lie_bracket(&x.lie_bracket(&y).unwrap()).unwrap();
        assert_zero(&a.try_add(&b).unwrap().try_add(&c).unwrap());
    }

    #[test]
    fn apply_obeys_leibniz(x in arb_field(), p in arb_poly(), q in arb_poly()) {
        let lhs = x.apply(&p.try_mul(&q).unwrap()).unwrap();
        let rhs = x.apply(&p).unwrap().try_mul(&q).unwrap()
            .try_add(&p.try_mul(&x.apply(&q).unwrap()).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn bracket_acts_as_commutator(x in arb_field(), y in arb_field(), p in arb_poly()) {
        let br = x.lie_bracket(&y).unwrap().apply(&p).unwrap();
        let comm = x.apply(&y.apply(&p).unwrap()).unwrap()
            .try_sub(&y.apply(&x.apply(&p).unwrap()).unwrap()).unwrap();
        prop_assert_eq!(br, comm);
    }

    #[test]
    fn degrees_add_under_brackets(
        sigma in arb_weights(),
        d1 in -1i64..=2,
        d2 in -1i64..=2,
        p1 in arb_picks(),
        p2 in arb_picks(),
    ) {
        let w = DilationWeights::new(sigma.clone()).unwrap();
        let x = homogeneous_field(&sigma, d1, &p1);
        let y = homogeneous_field(&sigma, d2, &p2);
        let dx = x.homogeneity_degree(&w).unwrap().unwrap();
        let dy = y.homogeneity_degree(&w).unwrap().unwrap();
        prop_assert!(matches!(dx, FieldDegree::Any) || dx == FieldDegree::Degree(d1));
        prop_assert!(matches!(dy, FieldDegree::Any) || dy == FieldDegree::Degree(d2));
        let b = x.lie_bracket(&y).unwrap();
        let db = b.homogeneity_degree(&w).unwrap().unwrap();
        prop_assert!(db == FieldDegree::Any || db == FieldDegree::Degree(d1 + d2), "{db:?}");
    }

    #[test]
    fn degree_one_fields_are_divergence_free(sigma in arb_weights(), picks in arb_picks()) {
        let x = homogeneous_field(&sigma, 1, &picks);
        prop_assert!(x.divergence().is_zero());
    }

    #[test]
    fn exact_and_float_evaluation_agree(p in arb_poly(), a in -5i64..=5, b in -5i64..=5, c in 1i64..=4) {
        let xr = [rat(a, c), rat(b, c), rat(a + b, 2 * c)];
        let xf = [a as f64 / c as f64, b as f64 / c as f64, (a + b) as f64 / (2 * c) as f64];
        let exact = p.eval_exact(&xr);
        let approx = p.eval_f64(&xf);
        let e: f64 = num_traits::ToPrimitive::to_f64(&exact).unwrap();
        prop_assert!((e - approx).abs() <= 1e-12 * (1.0 + e.abs()));
    }
}

#[test]
fn preset_generators_are_divergence_free_and_degree_one() {
    for f in [grushin(), heisenberg(1), heisenberg(2), heisenberg(3)] {
        for x in f.fields() {
            assert!(x.divergence().is_zero());
            assert_eq!(x.homogeneity_degree(f.weights()).unwrap(), Some(FieldDegree::Degree(1)));
        }
    }
}

#[test]
fn heisenberg_bracket_is_minus_dt() {
    let h = heisenberg(1);
    let b = h.fields()[0].lie_bracket(&h.fields()[1]).unwrap();
    assert_eq!(b, PolyVectorField::partial(3, 2).negated());
    let g = grushin();
    let b = g.fields()[0].lie_bracket(&g.fields()[1]).unwrap();
    assert_eq!(b, PolyVectorField::partial(2, 1));
}

#[test]
fn mixed_degree_field_is_reported() {
    let w = DilationWeights::new(vec![1, 2]).unwrap();
    let x = PolyVectorField::parse(&["1", "x1 + 1"]).unwrap();
    assert_eq!(x.homogeneity_degree(&w).unwrap(), None);
    assert_eq!(
        PolyVectorField::zero(2).homogeneity_degree(&w).unwrap(),
        Some(FieldDegree::Any)
    );
}

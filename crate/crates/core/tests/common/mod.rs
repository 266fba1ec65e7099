#![allow(dead_code)]

use liouville_lab::criterion::OperatorSpec;
use liouville_lab::geometry::ScalarExpr;
use liouville_lab::hoermander::heisenberg;
use rand::Rng;

/// `L` on `H¹` with a random nonnegative `Q` and a random polynomial drift.
pub fn random_h1_operator(rng: &mut impl Rng) -> OperatorSpec {
    let v = ScalarExpr::var;
    let c = |rng: &mut dyn rand::RngCore, lo: f64, hi: f64| rng.gen_range(lo..hi);
    let (a0, a1, a2) = (c(rng, 0.0, 1.0), c(rng, 0.0, 2.0), c(rng, 0.0, 2.0));
    let (s1, s2, s3) = (c(rng, -1.0, 1.0), c(rng, -1.0, 1.0), c(rng, -0.5, 0.5));
    let bump = (-(v(0).powf(2.0) + v(1).powf(2.0) + v(2).powf(2.0))).exp();
    let q = a0 + a1 * (v(0) - s1).powf(2.0) * bump + a2 * (v(1) * v(2) - s2).powf(2.0) / (1.0 + v(2).powf(2.0));
    let drift = vec![
        c(rng, -1.0, 1.0) + c(rng, -1.0, 1.0) * v(2) + s3 * v(1),
        c(rng, -1.0, 1.0) * v(0) + c(rng, -1.0, 1.0),
    ];
    OperatorSpec::new(heisenberg(1), drift, q).expect("valid operator")
}

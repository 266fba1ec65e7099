//! Exact algebra of polynomial vector fields: application, Lie brackets,
//! divergence and homogeneity under anisotropic dilations.

mod polynomial;
mod vector_field;

pub use polynomial::{rat, CompiledPoly, Monomial, Polynomial, Rational, WeightedDegree};
pub use vector_field::{CompiledField, FieldDegree, PolyVectorField};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexer::ParseError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid dilation weights {0:?}: need sigma[0] = 1 and non-decreasing positive entries")]
    InvalidWeights(Vec<u32>),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// Exponents of `δ_λ(x) = (λ^{σ₁}x₁, …, λ^{σₙ}xₙ)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct DilationWeights {
    sigma: Vec<u32>,
}

impl DilationWeights {
    pub fn new(sigma: Vec<u32>) -> Result<Self, FieldError> {
        let ok = sigma.first() == Some(&1) && sigma.windows(2).all(|w| w[0] <= w[1]);
        if !ok {
            return Err(FieldError::InvalidWeights(sigma));
        }
        Ok(Self { sigma })
    }

    pub fn isotropic(n: usize) -> Self {
        Self { sigma: vec![1; n] }
    }

    pub fn dim(&self) -> usize {
        self.sigma.len()
    }

    pub fn sigma(&self) -> &[u32] {
        &self.sigma
    }

    /// Homogeneous dimension `Σσᵢ`.
    pub fn homogeneous_dimension(&self) -> u32 {
        self.sigma.iter().sum()
    }

    pub fn dilate(&self, lambda: f64, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.sigma)
            .map(|(xi, &s)| xi * lambda.powi(s as i32))
            .collect()
    }
}

impl TryFrom<Vec<u32>> for DilationWeights {
    type Error = FieldError;
    fn try_from(v: Vec<u32>) -> Result<Self, FieldError> {
        Self::new(v)
    }
}

impl From<DilationWeights> for Vec<u32> {
    fn from(w: DilationWeights) -> Vec<u32> {
        w.sigma
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(c: &[&str]) -> PolyVectorField {
        PolyVectorField::parse(c).unwrap()
    }

    fn poly(s: &str, n: usize) -> Polynomial {
        Polynomial::parse(s, n).unwrap()
    }

    fn h1() -> (PolyVectorField, PolyVectorField) {
        (field(&["1", "0", "x2/2"]), field(&["0", "1", "-x1/2"]))
    }

    #[test]
    fn apply_examples() {
        let x2 = field(&["0", "x1"]);
        assert_eq!(x2.apply(&poly("x2", 2)).unwrap(), poly("x1", 2));
        assert!(x2.apply(&Polynomial::one(2)).unwrap().is_zero());
        let d1 = PolyVectorField::partial(1, 0);
        assert_eq!(d1.apply(&poly("x1^2", 1)).unwrap(), poly("2*x1", 1));
        assert!(matches!(
            d1.apply(&poly("x1", 2)),
            Err(FieldError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn bracket_examples() {
        let d1 = PolyVectorField::partial(2, 0);
        let x2 = field(&["0", "x1"]);
        assert_eq!(d1.lie_bracket(&x2).unwrap(), PolyVectorField::partial(2, 1));
        assert!(x2.lie_bracket(&x2).unwrap().is_zero());
        let (x, y) = h1();
        assert_eq!(x.lie_bracket(&y).unwrap(), field(&["0", "0", "-1"]));
    }

    #[test]
    fn divergence_examples() {
        assert!(field(&["0", "x1"]).divergence().is_zero());
        assert_eq!(field(&["x1"]).divergence(), Polynomial::one(1));
        assert!(h1().0.divergence().is_zero());
    }

    #[test]
    fn homogeneity_examples() {
        let w = DilationWeights::new(vec![1, 2]).unwrap();
        let deg = |f: &PolyVectorField| f.homogeneity_degree(&w).unwrap();
        assert_eq!(deg(&field(&["0", "x1"])), Some(FieldDegree::Degree(1)));
        assert_eq!(deg(&field(&["1", "0"])), Some(FieldDegree::Degree(1)));
        // the Euler field commutes with dilations
        assert_eq!(deg(&field(&["x1", "x2"])), Some(FieldDegree::Degree(0)));
        assert_eq!(deg(&field(&["x1", "x1"])), None);
        assert_eq!(deg(&PolyVectorField::zero(2)), Some(FieldDegree::Any));
    }

    #[test]
    fn homogeneity_matches_dilation_identity() {
        // X(f∘δ_λ) = λ^d (Xf)∘δ_λ checked numerically for a Grushin field
        let w = DilationWeights::new(vec![1, 2]).unwrap();
        let x2 = field(&["0", "x1"]);
        let f = poly("x2^2 + 3*x1^3*x2", 2);
        let lambda: f64 = 1.7;
        let p = [0.4, -1.3];
        // f∘δ_λ is again a polynomial: substitute scaled variables monomialwise
        let mut fl = Polynomial::zero(2);
        for (m, c) in f.terms() {
            let s = lambda.powi(m.weighted_degree(w.sigma()) as i32);
            let c = c.clone() * Rational::from_float(s).unwrap();
            fl = &fl + &Polynomial::monomial(2, m.0.clone(), c);
        }
        let lhs = x2.apply(&fl).unwrap().eval_f64(&p);
        let rhs = lambda * x2.apply(&f).unwrap().eval_f64(&w.dilate(lambda, &p));
        assert!((lhs - rhs).abs() < 1e-9 * rhs.abs().max(1.0));
    }

    #[test]
    fn evaluate_examples() {
        let x2 = field(&["0", "x1"]);
        assert_eq!(x2.evaluate(&[0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(x2.evaluate(&[3.0, 5.0]), vec![0.0, 3.0]);
        assert_eq!(
            PolyVectorField::partial(3, 0).evaluate(&[4.0, 5.0, 6.0]),
            vec![1.0, 0.0, 0.0]
        );
    }

    #[test]
    fn weights_validation() {
        assert!(DilationWeights::new(vec![1, 1, 2]).is_ok());
        assert!(DilationWeights::new(vec![2, 2]).is_err());
        assert!(DilationWeights::new(vec![1, 3, 2]).is_err());
        assert!(DilationWeights::new(vec![]).is_err());
        let w: DilationWeights = serde_json::from_str("[1,2]").unwrap();
        assert_eq!(w.homogeneous_dimension(), 3);
        assert!(serde_json::from_str::<DilationWeights>("[0,1]").is_err());
    }
}

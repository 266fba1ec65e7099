use std::fmt;

use num_traits::Zero;

use super::polynomial::{CompiledPoly, Polynomial};
use super::{DilationWeights, FieldError};
use crate::lexer::{default_var_names, ParseError};

/// Homogeneity degree of a vector field under a dilation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldDegree {
    /// The zero field, homogeneous of every degree.
    Any,
    Degree(i64),
}

/// `X = Σⱼ aⱼ(x) ∂ⱼ` with polynomial coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PolyVectorField {
    n: usize,
    coeffs: Vec<Polynomial>,
}

impl PolyVectorField {
    pub fn new(coeffs: Vec<Polynomial>) -> Result<Self, FieldError> {
        let n = coeffs.len();
        if let Some(bad) = coeffs.iter().find(|p| p.nvars() != n) {
            return Err(FieldError::DimensionMismatch {
                expected: n,
                found: bad.nvars(),
            });
        }
        Ok(Self { n, coeffs })
    }

    pub fn zero(n: usize) -> Self {
        Self {
            n,
            coeffs: vec![Polynomial::zero(n); n],
        }
    }

    /// The coordinate field `∂ᵢ` (zero-based).
    pub fn partial(n: usize, i: usize) -> Self {
        let mut f = Self::zero(n);
        f.coeffs[i] = Polynomial::one(n);
        f
    }

    /// Parses one coefficient string per coordinate, e.g. `["1", "0", "x2/2"]`.
    pub fn parse<S: AsRef<str>>(coeffs: &[S]) -> Result<Self, FieldError> {
        let n = coeffs.len();
        let polys = coeffs
            .iter()
            .map(|s| Polynomial::parse(s.as_ref(), n))
            .collect::<Result<Vec<_>, ParseError>>()?;
        Self::new(polys)
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.coeffs.iter().map(|p| p.to_string()).collect()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &[Polynomial] {
        &self.coeffs
    }

    pub fn coeff(&self, j: usize) -> &Polynomial {
        &self.coeffs[j]
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Polynomial::is_zero)
    }

    fn check_dim(&self, n: usize) -> Result<(), FieldError> {
        if self.n != n {
            return Err(FieldError::DimensionMismatch {
                expected: self.n,
                found: n,
            });
        }
        Ok(())
    }

    /// `Xp = Σⱼ aⱼ ∂ⱼp`.
    pub fn apply(&self, p: &Polynomial) -> Result<Polynomial, FieldError> {
        self.check_dim(p.nvars())?;
        let mut acc = Polynomial::zero(self.n);
        for (j, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            let d = p.derivative(j);
            if !d.is_zero() {
                acc = &acc + &(a * &d);
            }
        }
        Ok(acc)
    }

    /// `[X, Y] = XY − YX`, whose `j`-th coefficient is `X bⱼ − Y aⱼ`.
    pub fn lie_bracket(&self, other: &PolyVectorField) -> Result<PolyVectorField, FieldError> {
        self.check_dim(other.n)?;
        let coeffs = (0..self.n)
            .map(|j| Ok(&self.apply(&other.coeffs[j])? - &other.apply(&self.coeffs[j])?))
            .collect::<Result<Vec<_>, FieldError>>()?;
        Ok(PolyVectorField { n: self.n, coeffs })
    }

    pub fn divergence(&self) -> Polynomial {
        let mut acc = Polynomial::zero(self.n);
        for (j, a) in self.coeffs.iter().enumerate() {
            acc = &acc + &a.derivative(j);
        }
        acc
    }

    /// Degree `d` with `X(f∘δ_λ) = λ^d (Xf)∘δ_λ`.
    ///
    /// `∂ⱼ` lowers weighted degree by `σⱼ`, so a monomial coefficient of weight `w`
    /// in slot `j` contributes `d = σⱼ − w`.
    /// Returns `None` for mixed degrees.
    pub fn homogeneity_degree(&self, w: &DilationWeights) -> Result<Option<FieldDegree>, FieldError> {
        self.check_dim(w.dim())?;
        let sigma = w.sigma();
        let mut found: Option<i64> = None;
        for (j, a) in self.coeffs.iter().enumerate() {
            for (m, _) in a.terms() {
                let d = sigma[j] as i64 - m.weighted_degree(sigma) as i64;
                match found {
                    None => found = Some(d),
                    Some(prev) if prev != d => return Ok(None),
                    _ => {}
                }
            }
        }
        Ok(Some(match found {
            None => FieldDegree::Any,
            Some(d) => FieldDegree::Degree(d),
        }))
    }

    pub fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "point dimension mismatch");
        self.coeffs.iter().map(|a| a.eval_f64(x)).collect()
    }

    pub fn compile(&self) -> CompiledField {
        CompiledField {
            coeffs: self.coeffs.iter().map(Polynomial::compile).collect(),
        }
    }

    pub fn scale(&self, c: &super::Rational) -> PolyVectorField {
        PolyVectorField {
            n: self.n,
            coeffs: self.coeffs.iter().map(|p| p.scale(c)).collect(),
        }
    }

    pub fn try_add(&self, other: &PolyVectorField) -> Result<PolyVectorField, FieldError> {
        self.check_dim(other.n)?;
        Ok(PolyVectorField {
            n: self.n,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
        })
    }

    /// `-X`.
    pub fn negated(&self) -> PolyVectorField {
        PolyVectorField {
            n: self.n,
            coeffs: self.coeffs.iter().map(|p| -p).collect(),
        }
    }

    pub fn is_negation_of(&self, other: &PolyVectorField) -> bool {
        self.n == other.n && self.coeffs.iter().zip(&other.coeffs).all(|(a, b)| (a + b).is_zero())
    }
}

impl fmt::Display for PolyVectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = default_var_names(self.n);
        let parts: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, a)| !a.is_zero())
            .map(|(j, a)| match a.as_constant() {
                Some(c) if c == super::Rational::from_integer(1.into()) => format!("d{}", j + 1),
                Some(c) if !c.is_zero() => format!("{c}*d{}", j + 1),
                _ => format!("({})*d{}", a.to_string_with(&names), j + 1),
            })
            .collect();
        if parts.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", parts.join(" + "))
        }
    }
}

/// Floating-point coefficient evaluator for hot loops.
#[derive(Debug, Clone)]
pub struct CompiledField {
    coeffs: Vec<CompiledPoly>,
}

impl CompiledField {
    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    #[inline]
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, a) in out.iter_mut().zip(&self.coeffs) {
            *o = a.eval(x);
        }
    }

    pub fn coeff(&self, j: usize) -> &CompiledPoly {
        &self.coeffs[j]
    }
}

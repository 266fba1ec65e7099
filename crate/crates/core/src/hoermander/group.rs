use serde::{Deserialize, Serialize};

use super::FrameError;
use crate::fields::{PolyVectorField, Polynomial};

/// Polynomial group law on `ℝⁿ` with neutral element at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupLaw {
    n: usize,
    /// Components of `x*y` as polynomials in `(x₁…xₙ, y₁…yₙ)`.
    product: Vec<Polynomial>,
}

/// JSON form: components of `x*y` over variables `x1..xn, y1..yn`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupLawSpec {
    pub product: Vec<String>,
}

impl GroupLaw {
    pub fn new(product: Vec<Polynomial>) -> Result<Self, FrameError> {
        let n = product.len();
        for (j, p) in product.iter().enumerate() {
            if p.nvars() != 2 * n {
                return Err(FrameError::GroupLaw(format!(
                    "component {j} has {} variables, expected {}",
                    p.nvars(),
                    2 * n
                )));
            }
            let coord = Polynomial::var(n, j);
            if p.truncate_vars_at_zero(n) != coord {
                return Err(FrameError::GroupLaw(format!("x*0 != x in component {j}")));
            }
            if p.drop_leading_at_zero(n) != coord {
                return Err(FrameError::GroupLaw(format!("0*y != y in component {j}")));
            }
        }
        Ok(Self { n, product })
    }

    pub fn from_spec(spec: &GroupLawSpec) -> Result<Self, FrameError> {
        let n = spec.product.len();
        let names = variable_names(n);
        let product = spec
            .product
            .iter()
            .map(|s| Polynomial::parse_with_names(s, &names).map_err(crate::fields::FieldError::from))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(product)
    }

    pub fn to_spec(&self) -> GroupLawSpec {
        let names = variable_names(self.n);
        GroupLawSpec {
            product: self.product.iter().map(|p| p.to_string_with(&names)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn product(&self) -> &[Polynomial] {
        &self.product
    }

    pub fn multiply(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let xy: Vec<f64> = x.iter().chain(y).copied().collect();
        self.product.iter().map(|p| p.eval_f64(&xy)).collect()
    }

    /// Jacobian of `y ↦ x*y` at `y`, as an `n×n` row-major matrix.
    pub fn right_jacobian(&self, x: &[f64], y: &[f64]) -> Vec<Vec<f64>> {
        let xy: Vec<f64> = x.iter().chain(y).copied().collect();
        self.product
            .iter()
            .map(|p| (0..self.n).map(|i| p.derivative(self.n + i).eval_f64(&xy)).collect())
            .collect()
    }

    /// `Jᵢ` with coefficients `∂_{yᵢ}(x*y)ⱼ` at `y = 0`.
    pub fn jacobian_basis(&self) -> Vec<PolyVectorField> {
        (0..self.n)
            .map(|i| {
                let coeffs = self
                    .product
                    .iter()
                    .map(|p| p.derivative(self.n + i).truncate_vars_at_zero(self.n))
                    .collect();
                PolyVectorField::new(coeffs).expect("components share dimension")
            })
            .collect()
    }
}

fn variable_names(n: usize) -> Vec<String> {
    (1..=n)
        .map(|i| format!("x{i}"))
        .chain((1..=n).map(|i| format!("y{i}")))
        .collect()
}

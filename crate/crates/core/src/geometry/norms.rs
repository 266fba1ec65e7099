use serde::{Deserialize, Serialize};

use super::{GeometryError, ScalarExpr, Tape};
use crate::fields::DilationWeights;
use crate::lexer::default_var_names;

/// Where `∇N` may vanish or `N` may fail to be smooth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SingularSet {
    None,
    Origin,
}

impl SingularSet {
    pub fn contains(self, x: &[f64], radius: f64) -> bool {
        match self {
            SingularSet::None => false,
            SingularSet::Origin => x.iter().map(|v| v * v).sum::<f64>().sqrt() < radius,
        }
    }
}

/// A `δ_λ`-homogeneous exhaustion function `N` of degree 1.
#[derive(Debug, Clone)]
pub struct ExhaustionNorm {
    expr: ScalarExpr,
    tape: Tape,
    weights: DilationWeights,
    singular: SingularSet,
    /// Half-widths of the smallest box containing `{N ≤ 1}`.
    unit_box: Vec<f64>,
}

/// JSON form of a norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormSpec {
    pub expr: String,
    pub weights: Vec<u32>,
    pub singular: SingularSet,
    pub unit_box: Vec<f64>,
}

impl ExhaustionNorm {
    pub fn new(
        expr: ScalarExpr,
        weights: DilationWeights,
        singular: SingularSet,
        unit_box: Vec<f64>,
    ) -> Result<Self, GeometryError> {
        let n = weights.dim();
        if unit_box.len() != n || unit_box.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(GeometryError::Norm(format!(
                "unit box needs {n} positive half-widths, got {unit_box:?}"
            )));
        }
        let tape = Tape::compile(&expr, n)?;
        Ok(Self {
            expr,
            tape,
            weights,
            singular,
            unit_box,
        })
    }

    pub fn from_spec(spec: &NormSpec) -> Result<Self, GeometryError> {
        let weights = DilationWeights::new(spec.weights.clone()).map_err(|e| GeometryError::Norm(e.to_string()))?;
        let expr = ScalarExpr::parse(&spec.expr, &default_var_names(weights.dim()))?;
        Self::new(expr, weights, spec.singular, spec.unit_box.clone())
    }

    pub fn to_spec(&self) -> NormSpec {
        NormSpec {
            expr: self.expr.to_string_with(&default_var_names(self.dim())),
            weights: self.weights.sigma().to_vec(),
            singular: self.singular,
            unit_box: self.unit_box.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.dim()
    }

    pub fn expr(&self) -> &ScalarExpr {
        &self.expr
    }

    pub fn tape(&self) -> &Tape {
        &self.tape
    }

    pub fn weights(&self) -> &DilationWeights {
        &self.weights
    }

    pub fn singular(&self) -> SingularSet {
        self.singular
    }

    pub fn unit_box(&self) -> &[f64] {
        &self.unit_box
    }

    /// Half-widths of the box containing `{N ≤ r} = δ_r{N ≤ 1}`.
    pub fn bounding_box(&self, r: f64) -> Vec<f64> {
        self.unit_box
            .iter()
            .zip(self.weights.sigma())
            .map(|(w, &s)| w * r.powi(s as i32))
            .collect()
    }

    pub fn value(&self, x: &[f64]) -> Result<f64, GeometryError> {
        Ok(self.tape.value(x)?)
    }
}

/// `N(x, y, t) = c((|x|² + |y|²)² + 16t²)^{1/4}` on `Hᵐ`.
pub fn kaplan_norm(m: usize, c: f64) -> ExhaustionNorm {
    assert!(m >= 1 && c > 0.0);
    let n = 2 * m + 1;
    let mut rho2 = ScalarExpr::var(0).powf(2.0);
    for i in 1..2 * m {
        rho2 = rho2 + ScalarExpr::var(i).powf(2.0);
    }
    let t = ScalarExpr::var(n - 1);
    let inner = rho2.powf(2.0) + 16.0 * t.powf(2.0);
    let expr = if c == 1.0 {
        inner.powf(0.25)
    } else {
        c * inner.powf(0.25)
    };
    let mut sigma = vec![1; n];
    sigma[n - 1] = 2;
    let mut unit_box = vec![1.0 / c; n];
    unit_box[n - 1] = 1.0 / (4.0 * c * c);
    ExhaustionNorm::new(
        expr,
        DilationWeights::new(sigma).unwrap(),
        SingularSet::Origin,
        unit_box,
    )
    .unwrap()
}

/// `N(x) = (x₁⁴ + x₂²)^{1/4}`.
pub fn grushin_norm() -> ExhaustionNorm {
    let expr = (ScalarExpr::var(0).powf(4.0) + ScalarExpr::var(1).powf(2.0)).powf(0.25);
    ExhaustionNorm::new(
        expr,
        DilationWeights::new(vec![1, 2]).unwrap(),
        SingularSet::Origin,
        vec![1.0, 1.0],
    )
    .unwrap()
}

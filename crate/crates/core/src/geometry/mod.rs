//! Scalar expressions with automatic differentiation, horizontal calculus along
//! a frame, homogeneous norms, and the geometric factor `S(r)`.

mod expr;
mod norms;
mod sampling;
mod surface;
mod tape;

pub use expr::{Func, Node, ScalarExpr};
pub use norms::{grushin_norm, kaplan_norm, ExhaustionNorm, NormSpec, SingularSet};
pub use sampling::{dyadic_samples, halton, shell_samples, HaltonSequence};
pub use surface::{
    homogeneous_dimension, power_law_fit, surface_factor, surface_factor_curve, volume_functional, Estimate,
    PowerLawFit, SurfaceConfig, SurfaceFactorEstimate,
};
pub use tape::{smooth_step, Tape, TapeBuf};

use thiserror::Error;

use crate::fields::{CompiledField, PolyVectorField};
use crate::hoermander::Frame;
use crate::lexer::ParseError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("{op} undefined at {arg}")]
    Domain { op: &'static str, arg: f64 },
    #[error("{op} not differentiable at {arg}")]
    NonDifferentiable { op: &'static str, arg: f64 },
    #[error("non-finite result")]
    NonFinite,
    #[error("expected {expected} variables, found {found}")]
    Arity { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("evaluation at a declared singular point {0:?}")]
    SingularPoint(Vec<f64>),
    #[error("at least 1000 samples are required, got {0}")]
    TooFewSamples(usize),
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("Monte Carlo relative error {rel:.3} exceeds {limit} at r = {r}")]
    MonteCarloError { r: f64, rel: f64, limit: f64 },
    #[error("power-law fit: {0}")]
    Fit(String),
    #[error("norm: {0}")]
    Norm(String),
}

/// Compiled frame coefficients `aᵢ(x)` and corrections `Xᵢaᵢ` used by `Xᵢ²u = aᵢᵀ(D²u)aᵢ + (Xᵢaᵢ)·∇u`.
#[derive(Debug, Clone)]
pub struct HorizontalOps {
    n: usize,
    fields: Vec<CompiledField>,
    corrections: Vec<CompiledField>,
}

impl HorizontalOps {
    pub fn new(frame: &Frame) -> Self {
        let corrections = frame
            .fields()
            .iter()
            .map(|f| {
                let c = f.coeffs().iter().map(|a| f.apply(a).unwrap()).collect();
                PolyVectorField::new(c).unwrap().compile()
            })
            .collect();
        Self {
            n: frame.n(),
            fields: frame.fields().iter().map(PolyVectorField::compile).collect(),
            corrections,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.fields.len()
    }

    /// Row-major `m×n` matrix of coefficients; row `i` is `Xᵢ` at `x`.
    pub fn coefficients_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, f) in self.fields.iter().enumerate() {
            f.eval_into(x, &mut out[i * self.n..(i + 1) * self.n]);
        }
    }

    pub fn corrections_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, f) in self.corrections.iter().enumerate() {
            f.eval_into(x, &mut out[i * self.n..(i + 1) * self.n]);
        }
    }

    /// `(X₁u, …, X_mu)` given the Euclidean gradient of `u`.
    pub fn project_gradient(&self, x: &[f64], grad: &[f64], out: &mut [f64]) {
        let mut a = vec![0.0; self.n];
        for (i, f) in self.fields.iter().enumerate() {
            f.eval_into(x, &mut a);
            out[i] = dot(&a, grad);
        }
    }

    /// `|∇_X u|²` for a compiled `u`; `Ok(None)` where `u` is not differentiable.
    pub fn grad_sq(&self, tape: &Tape, x: &[f64], buf: &mut TapeBuf) -> Result<Option<f64>, EvalError> {
        let n = self.n;
        assert!(n <= MAX_DIM);
        let mut g = [0.0; MAX_DIM];
        match tape.gradient_with(x, buf, &mut g[..n]) {
            Ok(_) => {}
            Err(EvalError::NonDifferentiable { .. }) => return Ok(None),
            Err(e) => return Err(e),
        }
        let mut a = [0.0; MAX_DIM];
        let mut acc = 0.0;
        for f in &self.fields {
            f.eval_into(x, &mut a[..n]);
            let xi = dot(&a[..n], &g[..n]);
            acc += xi * xi;
        }
        Ok(Some(acc))
    }

    /// `Σᵢ Xᵢ²u` at `x`.
    pub fn sub_laplacian(&self, tape: &Tape, x: &[f64], buf: &mut TapeBuf) -> Result<f64, EvalError> {
        let n = self.n;
        let mut g = vec![0.0; n];
        let mut h = vec![0.0; n * n];
        tape.hessian_with(x, buf, &mut g, &mut h)?;
        let mut a = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut acc = 0.0;
        for (f, corr) in self.fields.iter().zip(&self.corrections) {
            f.eval_into(x, &mut a);
            corr.eval_into(x, &mut c);
            let mut quad = 0.0;
            for p in 0..n {
                for q in 0..n {
                    quad += a[p] * h[p * n + q] * a[q];
                }
            }
            acc += quad + dot(&c, &g);
        }
        Ok(acc)
    }
}

/// Largest ambient dimension handled by the stack-allocated hot paths.
pub const MAX_DIM: usize = 16;

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// `∇_X u = (X₁u, …, X_mu)` at `x`.
pub fn horizontal_gradient(frame: &Frame, u: &ScalarExpr, x: &[f64]) -> Result<Vec<f64>, GeometryError> {
    let tape = Tape::compile(u, frame.n())?;
    let (_, g) = match tape.gradient(x) {
        Err(EvalError::NonDifferentiable { .. }) => return Err(GeometryError::SingularPoint(x.to_vec())),
        r => r?,
    };
    let ops = HorizontalOps::new(frame);
    let mut out = vec![0.0; frame.m()];
    ops.project_gradient(x, &g, &mut out);
    Ok(out)
}

/// `div_X F = Σᵢ XᵢFᵢ` at `x`.
pub fn horizontal_divergence(frame: &Frame, f: &[ScalarExpr], x: &[f64]) -> Result<f64, GeometryError> {
    assert_eq!(f.len(), frame.m(), "one component per frame field");
    let mut acc = 0.0;
    for (xi, fi) in frame.fields().iter().zip(f) {
        let tape = Tape::compile(fi, frame.n())?;
        let (_, g) = match tape.gradient(x) {
            Err(EvalError::NonDifferentiable { .. }) => return Err(GeometryError::SingularPoint(x.to_vec())),
            r => r?,
        };
        acc += dot(&xi.evaluate(x), &g);
    }
    Ok(acc)
}

/// `Σᵢ Xᵢ²u` at `x`.
pub fn sub_laplacian(frame: &Frame, u: &ScalarExpr, x: &[f64]) -> Result<f64, GeometryError> {
    let tape = Tape::compile(u, frame.n())?;
    match HorizontalOps::new(frame).sub_laplacian(&tape, x, &mut TapeBuf::default()) {
        Err(EvalError::NonDifferentiable { .. }) => Err(GeometryError::SingularPoint(x.to_vec())),
        r => Ok(r?),
    }
}

/// Symbolic `Xu` for an expression `u`: `Σⱼ aⱼ ∂ⱼu` built from the polynomial coefficients.
pub fn apply_field_symbolic(field: &PolyVectorField, du: &[ScalarExpr]) -> ScalarExpr {
    let mut acc: Option<ScalarExpr> = None;
    for (a, d) in field.coeffs().iter().zip(du) {
        if a.is_zero() {
            continue;
        }
        let term = polynomial_expr(a) * d.clone();
        acc = Some(match acc {
            None => term,
            Some(s) => s + term,
        });
    }
    acc.unwrap_or_else(|| ScalarExpr::constant(0.0))
}

/// A polynomial as an expression tree.
pub fn polynomial_expr(p: &crate::fields::Polynomial) -> ScalarExpr {
    use num_traits::ToPrimitive;
    let mut acc: Option<ScalarExpr> = None;
    for (m, c) in p.terms() {
        let mut t = ScalarExpr::constant(c.to_f64().unwrap_or(f64::NAN));
        for (i, &e) in m.0.iter().enumerate() {
            if e > 0 {
                t = t * ScalarExpr::var(i).powf(e as f64);
            }
        }
        acc = Some(match acc {
            None => t,
            Some(s) => s + t,
        });
    }
    acc.unwrap_or_else(|| ScalarExpr::constant(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hoermander::{grushin, heisenberg};
    use crate::lexer::default_var_names;

    fn parse(s: &str, n: usize) -> ScalarExpr {
        ScalarExpr::parse(s, &default_var_names(n)).unwrap()
    }

    #[test]
    fn grushin_norm_gradient_matches_closed_form() {
        let g = grushin();
        let n = grushin_norm();
        for x in [[0.7, -0.3], [1.5, 2.5], [-0.2, 0.01]] {
            let xn = horizontal_gradient(&g, n.expr(), &x).unwrap();
            let got: f64 = xn.iter().map(|v| v * v).sum();
            let (a, b) = (x[0], x[1]);
            let s = a.powi(4) + b * b;
            let want = a * a * (4.0 * a.powi(4) + b * b) / (4.0 * s.powf(1.5));
            assert!((got - want).abs() < 1e-12 * want.max(1.0));
        }
    }

    #[test]
    fn kaplan_gradient_at_unit_point() {
        let xn = horizontal_gradient(&heisenberg(1), kaplan_norm(1, 1.0).expr(), &[1.0, 0.0, 0.0]).unwrap();
        let s: f64 = xn.iter().map(|v| v * v).sum();
        assert!((s - 1.0).abs() < 1e-14);
    }

    #[test]
    fn constant_has_zero_horizontal_gradient() {
        let g = horizontal_gradient(&heisenberg(1), &ScalarExpr::constant(3.0), &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn singular_point_is_reported() {
        let r = horizontal_gradient(&grushin(), grushin_norm().expr(), &[0.0, 0.0]);
        assert!(matches!(r, Err(GeometryError::SingularPoint(_))));
    }

    #[test]
    fn divergence_of_gradient_is_sub_laplacian() {
        let g = grushin();
        let u = parse("x1^2", 2);
        // ∇_X u = (2x1, 0)
        let f = [parse("2*x1", 2), ScalarExpr::constant(0.0)];
        assert!((horizontal_divergence(&g, &f, &[0.4, 1.0]).unwrap() - 2.0).abs() < 1e-15);
        assert!((sub_laplacian(&g, &u, &[0.4, 1.0]).unwrap() - 2.0).abs() < 1e-15);
        let c = [ScalarExpr::constant(1.0), ScalarExpr::constant(-2.0)];
        assert_eq!(horizontal_divergence(&g, &c, &[0.4, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn h1_sub_laplacian_of_rho_squared() {
        let h = heisenberg(1);
        let u = parse("x1^2 + x2^2 + x3", 3);
        for x in [[0.3, -0.8, 2.0], [1.0, 1.0, -1.0]] {
            assert!((sub_laplacian(&h, &u, &x).unwrap() - 4.0).abs() < 1e-13);
        }
    }

    #[test]
    fn kaplan_norm_is_harmonic_power() {
        // Δ_H N^{2−D} = 0 away from the origin on H¹ (D = 4)
        let h = heisenberg(1);
        let u = kaplan_norm(1, 1.0).expr().powf(-2.0);
        for x in [[0.3, -0.8, 0.5], [1.2, 0.1, -0.7]] {
            let v = sub_laplacian(&h, &u, &x).unwrap();
            assert!(v.abs() < 1e-11, "{v}");
        }
    }

    #[test]
    fn symbolic_field_application_matches_numeric() {
        let h = heisenberg(1);
        let names = default_var_names(3);
        let u = ScalarExpr::parse("x1^2*x3 + x2", &names).unwrap();
        let du = [parse("2*x1*x3", 3), ScalarExpr::constant(1.0), parse("x1^2", 3)];
        let xu = apply_field_symbolic(&h.fields()[0], &du);
        let x = [0.5, -1.0, 2.0];
        let want = horizontal_gradient(&h, &u, &x).unwrap()[0];
        assert!((xu.eval(&x).unwrap() - want).abs() < 1e-14);
    }
}

use serde::{Deserialize, Serialize};

use crate::geometry::{ExhaustionNorm, ScalarExpr, SurfaceConfig, Tape, TapeBuf};

use super::quadrature::adaptive_simpson;
use super::CriterionError;

/// The weight `q̂(t)` on `(ρ₀, ∞)`.
#[derive(Debug, Clone, PartialEq)]
pub enum QHat {
    /// `coeff · t^{−alpha}`.
    Power { coeff: f64, alpha: f64 },
    /// An expression in the single variable `t`.
    Expr(ScalarExpr),
}

impl QHat {
    pub fn power(alpha: f64) -> Self {
        QHat::Power { coeff: 1.0, alpha }
    }

    pub fn eval(&self, t: f64) -> Result<f64, CriterionError> {
        match self {
            QHat::Power { coeff, alpha } => Ok(coeff * t.powf(-alpha)),
            QHat::Expr(e) => e.eval(&[t]).map_err(|e| CriterionError::Eval(e.to_string())),
        }
    }

    /// `∫_a^b √q̂` in closed form, when available.
    fn sqrt_integral_exact(&self, a: f64, b: f64) -> Option<f64> {
        match *self {
            QHat::Power { coeff, alpha } => {
                let c = coeff.sqrt();
                let p = 1.0 - alpha / 2.0;
                Some(if p.abs() < 1e-14 {
                    c * (b / a).ln()
                } else {
                    c * (b.powf(p) - a.powf(p)) / p
                })
            }
            QHat::Expr(_) => None,
        }
    }
}

/// `F(r) = ∫_{ρ₀}^r √q̂`: closed form for power laws, otherwise tabulated on a
/// log-spaced grid by adaptive quadrature and interpolated linearly (so monotone).
#[derive(Debug, Clone)]
pub struct SqrtIntegral {
    q: QHat,
    rho0: f64,
    grid: Vec<f64>,
    values: Vec<f64>,
}

const CELLS_PER_OCTAVE: usize = 64;
const QUAD_TOL: f64 = 1e-10;

impl SqrtIntegral {
    pub fn new(q: &QHat, rho0: f64, r_max: f64) -> Result<Self, CriterionError> {
        let mut s = Self {
            q: q.clone(),
            rho0,
            grid: vec![],
            values: vec![],
        };
        if let QHat::Expr(e) = q {
            let tape = Tape::compile(e, 1).map_err(|e| CriterionError::Eval(e.to_string()))?;
            let octaves = (r_max / rho0).log2().ceil().max(1.0) as usize;
            let cells = octaves * CELLS_PER_OCTAVE;
            let step = (r_max / rho0).ln() / cells as f64;
            let mut grid = vec![rho0];
            let mut values = vec![0.0];
            let mut buf = TapeBuf::default();
            for k in 1..=cells {
                let (a, b) = (grid[k - 1], rho0 * (step * k as f64).exp());
                let f = |t: f64| {
                    tape.value_with(&[t], &mut buf)
                        .map(|v| v.max(0.0).sqrt())
                        .unwrap_or(f64::NAN)
                };
                let inc = adaptive_simpson(f, a, b, QUAD_TOL * (1.0 + values[k - 1]), 30)
                    .ok_or(CriterionError::Quadrature { a, b })?;
                grid.push(b);
                values.push(values[k - 1] + inc);
            }
            s.grid = grid;
            s.values = values;
        }
        Ok(s)
    }

    pub fn rho0(&self) -> f64 {
        self.rho0
    }

    pub fn eval(&self, r: f64) -> Result<f64, CriterionError> {
        if r <= self.rho0 {
            return Ok(0.0);
        }
        if let Some(v) = self.q.sqrt_integral_exact(self.rho0, r) {
            return Ok(v);
        }
        let last = *self.grid.last().unwrap();
        if r > last * (1.0 + 1e-12) {
            return Err(CriterionError::Config(format!("r = {r} beyond tabulated range {last}")));
        }
        let k = self.grid.partition_point(|&g| g < r).clamp(1, self.grid.len() - 1);
        let (a, b) = (self.grid[k - 1], self.grid[k]);
        let w = ((r - a) / (b - a)).clamp(0.0, 1.0);
        Ok(self.values[k - 1] * (1.0 - w) + self.values[k] * w)
    }
}

/// Model for the geometric factor `S(r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SurfaceModel {
    /// `S(r) = coeff · r^{exponent}`.
    PowerLaw { coeff: f64, exponent: f64 },
    /// Monte Carlo estimates at `radii`, extended by their power-law fit.
    Sampled {
        radii: Vec<f64>,
        #[serde(default)]
        config: SurfaceConfig,
    },
}

#[derive(Debug, Clone)]
pub struct CriterionConfig {
    pub norm: ExhaustionNorm,
    pub rho0: f64,
    pub q_hat: QHat,
    /// Fixed `κ`; when absent the smallest working value is estimated.
    pub kappa: Option<f64>,
    pub lambda: f64,
    pub surface: SurfaceModel,
    /// Outer radius of the sampled annulus; defaults to `2¹⁰ ρ₀`.
    pub r_max: Option<f64>,
}

impl CriterionConfig {
    pub fn r_max(&self) -> f64 {
        self.r_max.unwrap_or(1024.0 * self.rho0)
    }

    pub fn validate(&self) -> Result<(), CriterionError> {
        if !(self.rho0 > 0.0) {
            return Err(CriterionError::Config("rho0 must be positive".into()));
        }
        if !(self.lambda > 0.0) {
            return Err(CriterionError::Config("lambda must be positive".into()));
        }
        if let Some(k) = self.kappa {
            if !(k > 0.0) {
                return Err(CriterionError::Config("kappa must be positive".into()));
            }
        }
        if !(self.r_max() > self.rho0) {
            return Err(CriterionError::Config("r_max must exceed rho0".into()));
        }
        let mut any_positive = false;
        for k in 0..=256 {
            let t = self.rho0 * (self.r_max() / self.rho0).powf(k as f64 / 256.0) * (1.0 + 1e-9);
            let v = self.q_hat.eval(t)?;
            if v < 0.0 {
                return Err(CriterionError::Config(format!("q_hat({t}) = {v} is negative")));
            }
            any_positive |= v > 0.0;
        }
        if !any_positive {
            return Err(CriterionError::Config("q_hat vanishes on all samples".into()));
        }
        Ok(())
    }
}

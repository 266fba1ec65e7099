use serde::{Deserialize, Serialize};

use crate::geometry::{power_law_fit, SurfaceFactorEstimate};

use super::config::{CriterionConfig, QHat, SqrtIntegral};
use super::quadrature::GAUSS8;
use super::CriterionError;

/// Ladder `R_k = ρ₀ 2^k`, `k = 1..=LADDER`.
pub const LADDER: usize = 40;
const TAIL: usize = 5;
const FLAT_TAIL: usize = 10;
const SUBCELLS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegralVerdict {
    Divergent,
    Convergent,
    Undetermined,
}

/// `S(r) = coeff · r^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceLaw {
    pub coeff: f64,
    pub exponent: f64,
}

impl SurfaceLaw {
    /// Power law fitted to sampled estimates.
    pub fn from_estimate(e: &SurfaceFactorEstimate) -> Result<Self, CriterionError> {
        let fit = match &e.fit {
            Some(f) => *f,
            None => power_law_fit(e).map_err(|err| CriterionError::Surface(err.to_string()))?,
        };
        Ok(Self {
            coeff: fit.log_constant.exp(),
            exponent: fit.exponent,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegralReport {
    pub verdict: IntegralVerdict,
    /// Verdict of the closed-form rule, when it applies.
    pub fast_path: Option<IntegralVerdict>,
    pub numeric: IntegralVerdict,
    pub surface: SurfaceLaw,
    pub lambda: f64,
    /// `ln ∫_{R_{k−1}}^{R_k}` of the integrand, `k = 1..=40`.
    pub log_increments: Vec<f64>,
    /// `ln I(R_k)`.
    pub log_partial_integrals: Vec<f64>,
    /// Decay exponent `ε` verified for `integrand ≤ C r^{−1−ε}` when convergent.
    pub tail_epsilon: Option<f64>,
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `∫_{ρ₀}^∞ S(r)^{−1} exp{Λ F(r)²} dr` with `F(r) = ∫_{ρ₀}^r √q̂`.
///
/// For `q̂ = c t^{−α}` and `S = c' r^p` with `p > 1` the integral diverges iff `α ≤ 2`.
/// Otherwise the per-octave increments on `R_k = ρ₀ 2^k` decide: eventually
/// non-decreasing increments (or a flat `r·integrand`) give divergence; geometric
/// decay with a verified `r^{−1−ε}` tail bound gives convergence.
pub fn classify_integral(surface: SurfaceLaw, cfg: &CriterionConfig) -> Result<IntegralReport, CriterionError> {
    if !(cfg.rho0 > 0.0 && cfg.lambda > 0.0) {
        return Err(CriterionError::Config("rho0 and lambda must be positive".into()));
    }
    if !(surface.coeff > 0.0 && surface.coeff.is_finite() && surface.exponent.is_finite()) {
        return Err(CriterionError::Config(format!("invalid surface law {surface:?}")));
    }
    let fast_path = match (&cfg.q_hat, surface.exponent > 1.0) {
        (QHat::Power { coeff, alpha }, true) if *coeff > 0.0 => Some(if *alpha <= 2.0 {
            IntegralVerdict::Divergent
        } else {
            IntegralVerdict::Convergent
        }),
        _ => None,
    };

    let rho0 = cfg.rho0;
    let top = rho0 * 2f64.powi(LADDER as i32);
    let f = SqrtIntegral::new(&cfg.q_hat, rho0, top * (1.0 + 1e-9))?;
    let log_integrand = |r: f64| -> Result<f64, CriterionError> {
        let fv = f.eval(r)?;
        Ok(cfg.lambda * fv * fv - surface.coeff.ln() - surface.exponent * r.ln())
    };

    let mut log_increments = Vec::with_capacity(LADDER);
    let mut log_partial = Vec::with_capacity(LADDER);
    let mut log_r_integrand = Vec::with_capacity(LADDER);
    let mut acc = f64::NEG_INFINITY;
    for k in 1..=LADDER {
        let (a, b) = ((rho0 * 2f64.powi(k as i32 - 1)).ln(), (rho0 * 2f64.powi(k as i32)).ln());
        let w = (b - a) / SUBCELLS as f64;
        let mut inc = f64::NEG_INFINITY;
        for c in 0..SUBCELLS {
            let mid = a + (c as f64 + 0.5) * w;
            for &(x, gw) in &GAUSS8 {
                let s = mid + 0.5 * w * x;
                // dr = r d(ln r)
                let term = log_integrand(s.exp())? + s + (0.5 * w * gw).ln();
                inc = log_sum_exp(inc, term);
            }
        }
        if !inc.is_finite() && inc != f64::NEG_INFINITY {
            return Err(CriterionError::Quadrature { a: a.exp(), b: b.exp() });
        }
        acc = log_sum_exp(acc, inc);
        log_increments.push(inc);
        log_partial.push(acc);
        log_r_integrand.push(log_integrand(b.exp())? + b);
    }

    let (numeric, tail_epsilon) = ladder_verdict(&log_increments, &log_r_integrand, rho0);
    Ok(IntegralReport {
        verdict: fast_path.unwrap_or(numeric),
        fast_path,
        numeric,
        surface,
        lambda: cfg.lambda,
        log_increments,
        log_partial_integrals: log_partial,
        tail_epsilon,
    })
}

fn ladder_verdict(log_inc: &[f64], log_r_integrand: &[f64], rho0: f64) -> (IntegralVerdict, Option<f64>) {
    let k = log_inc.len();
    let tail = &log_inc[k - TAIL..];
    let non_decreasing = tail.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    let flat = &log_r_integrand[k - FLAT_TAIL..];
    let lo = flat.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = flat.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bounded_below = lo.is_finite() && (flat.windows(2).all(|w| w[1] >= w[0] - 1e-12) || hi - lo <= 2f64.ln());
    if non_decreasing || bounded_below {
        return (IntegralVerdict::Divergent, None);
    }
    // Decay per octave of the increments, as a power of 2.
    let worst_step = tail.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let decay = -worst_step / 2f64.ln();
    if decay > 0.0 {
        // integrand ≤ C r^{−1−ε}: r^{1+ε}·integrand must not grow on the tail.
        let eps = 0.5 * decay;
        let ok = (k - TAIL..k).collect::<Vec<_>>().windows(2).all(|w| {
            let r = |j: usize| rho0 * 2f64.powi(j as i32 + 1);
            let g = |j: usize| log_r_integrand[j] + eps * r(j).ln();
            g(w[1]) <= g(w[0]) + 1e-12
        });
        if ok {
            return (IntegralVerdict::Convergent, Some(eps));
        }
    }
    (IntegralVerdict::Undetermined, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::kaplan_norm;

    fn cfg(q: QHat, lambda: f64) -> CriterionConfig {
        CriterionConfig {
            norm: kaplan_norm(1, 1.0),
            rho0: 1.0,
            q_hat: q,
            kappa: None,
            lambda,
            surface: super::super::SurfaceModel::PowerLaw {
                coeff: 1.0,
                exponent: 3.0,
            },
            r_max: None,
        }
    }

    #[test]
    fn fast_path_and_ladder_agree_in_dimension_four() {
        let s = SurfaceLaw {
            coeff: 1.0,
            exponent: 3.0,
        };
        for (alpha, v) in [(2.0, IntegralVerdict::Divergent), (3.0, IntegralVerdict::Convergent)] {
            let r = classify_integral(s, &cfg(QHat::power(alpha), 1.0)).unwrap();
            assert_eq!(r.fast_path, Some(v));
            assert_eq!(r.numeric, v, "alpha = {alpha}");
        }
    }

    #[test]
    fn constant_weight_diverges() {
        let s = SurfaceLaw {
            coeff: 1.0,
            exponent: 3.0,
        };
        let q = QHat::Expr(crate::geometry::ScalarExpr::constant(1.0));
        let r = classify_integral(s, &cfg(q, 1.0)).unwrap();
        assert_eq!(r.fast_path, None);
        assert_eq!(r.verdict, IntegralVerdict::Divergent);
    }

    #[test]
    fn logarithmic_borderline_is_divergent() {
        // S = r: integrand exactly 1/r for q̂ with tiny Λ-weight.
        let s = SurfaceLaw {
            coeff: 1.0,
            exponent: 1.0,
        };
        let r = classify_integral(s, &cfg(QHat::power(4.0), 1e-9)).unwrap();
        assert_eq!(r.fast_path, None);
        assert_eq!(r.numeric, IntegralVerdict::Divergent);
    }
}

use serde::{Deserialize, Serialize};

use crate::geometry::{dyadic_samples, grushin_norm, kaplan_norm, shell_samples, surface_factor_curve};

use super::checks::{check_g_far, check_g_near, check_s, GFarCheck, GNearCheck, SCheck};
use super::config::{CriterionConfig, QHat, SurfaceModel};
use super::integral::{classify_integral, IntegralReport, IntegralVerdict, SurfaceLaw};
use super::spec::{
    grushin_qhat_coeff, grushin_spec, heisenberg_gradient_qhat_coeff, heisenberg_spec, heisenberg_with_drift,
    OperatorSpec, DRIFT_WINDOW,
};
use super::CriterionError;

/// Radius of the ball excluded around declared singular points of `|∇_X N|`.
pub const SINGULAR_EXCLUSION: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingPlan {
    /// Points in `{N ≤ ρ₀}`.
    pub near: usize,
    /// Points in `{ρ₀ < N ≤ 2ρ₀}` used by the (S) check besides the near set.
    pub middle: usize,
    /// Points in each dyadic shell of `{ρ₀ < N ≤ R_max}`.
    pub per_octave: usize,
    /// Offset into the Halton sequence.
    pub skip: u64,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        Self {
            near: 2000,
            middle: 1000,
            per_octave: 400,
            skip: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Overall {
    LiouvilleHolds,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub s: SCheck,
    pub g_far: GFarCheck,
    pub g_near: GNearCheck,
    pub integral: IntegralReport,
    pub overall: Overall,
    pub rho0: f64,
    pub lambda: f64,
    pub r_max: f64,
    pub notes: Vec<String>,
}

/// Applies the criterion: the Liouville property holds when (S), (G) and the
/// divergence of the integral all check out; anything else is inconclusive.
pub fn liouville_check(
    spec: &OperatorSpec,
    cfg: &CriterionConfig,
    plan: &SamplingPlan,
) -> Result<CriterionReport, CriterionError> {
    cfg.validate()?;
    let norm = &cfg.norm;
    let r_max = cfg.r_max();
    let near_pts = shell_samples(norm, 0.0, cfg.rho0, plan.near, plan.skip, SINGULAR_EXCLUSION);
    let far_pts = dyadic_samples(norm, cfg.rho0, r_max, plan.per_octave, plan.skip + 1);
    if near_pts.is_empty() || far_pts.is_empty() {
        return Err(CriterionError::Config("sampling produced no points".into()));
    }
    let mut s_pts = near_pts.clone();
    s_pts.extend(shell_samples(
        norm,
        cfg.rho0,
        2.0 * cfg.rho0,
        plan.middle,
        plan.skip + 2,
        0.0,
    ));
    s_pts.extend(far_pts.iter().cloned());

    let s = check_s(spec, &s_pts)?;
    let g_far = check_g_far(spec, cfg, &far_pts)?;
    let g_near = check_g_near(spec, cfg, &near_pts)?;
    let law = match &cfg.surface {
        SurfaceModel::PowerLaw { coeff, exponent } => SurfaceLaw {
            coeff: *coeff,
            exponent: *exponent,
        },
        SurfaceModel::Sampled { radii, config } => {
            let est = surface_factor_curve(&spec.frame, norm, radii, config)
                .map_err(|e| CriterionError::Surface(e.to_string()))?;
            SurfaceLaw::from_estimate(&est)?
        }
    };
    let integral = classify_integral(law, cfg)?;
    let holds = s.passes && g_far.passes && g_near.passes && integral.verdict == IntegralVerdict::Divergent;
    let notes = vec![format!(
        "(G) sampled on rho0 < N <= {r_max}; behaviour beyond R_max is not checked"
    )];
    Ok(CriterionReport {
        s,
        g_far,
        g_near,
        integral,
        overall: if holds {
            Overall::LiouvilleHolds
        } else {
            Overall::Inconclusive
        },
        rho0: cfg.rho0,
        lambda: cfg.lambda,
        r_max,
        notes,
    })
}

/// `H^m` without drift, `Q ~ |∇_X N|² N^{−α}`, `q̂ = c t^{−α}`, `ρ₀ = 1`, `Λ = 1`, `S ∝ r^{2m+1}`.
pub fn heisenberg_example(m: usize, alpha: f64) -> (OperatorSpec, CriterionConfig) {
    let rho0 = 1.0;
    let cfg = CriterionConfig {
        norm: kaplan_norm(m, 1.0),
        rho0,
        q_hat: QHat::Power {
            coeff: heisenberg_gradient_qhat_coeff(alpha, rho0),
            alpha,
        },
        kappa: None,
        lambda: 1.0,
        surface: SurfaceModel::PowerLaw {
            coeff: 1.0,
            exponent: (2 * m + 1) as f64,
        },
        r_max: None,
    };
    (heisenberg_spec(m, alpha), cfg)
}

/// `H^m` with the drift `b = N^{−β}∇_X N` outside `{N ≤ 2}`, `ρ₀ = 2`, `q̂ = t^{−α}`.
pub fn drift_example(m: usize, alpha: f64, beta: f64) -> (OperatorSpec, CriterionConfig) {
    let cfg = CriterionConfig {
        norm: kaplan_norm(m, 1.0),
        rho0: DRIFT_WINDOW.0,
        q_hat: QHat::power(alpha),
        kappa: None,
        lambda: 1.0,
        surface: SurfaceModel::PowerLaw {
            coeff: 1.0,
            exponent: (2 * m + 1) as f64,
        },
        r_max: None,
    };
    (heisenberg_with_drift(m, alpha, beta, DRIFT_WINDOW), cfg)
}

/// Grushin plane, `Q ~ |∇_X N|² N^{−α}`, `ρ₀ = 1`, `S` sampled at `r ∈ {1, 2, 4, 8}`.
pub fn grushin_example(alpha: f64) -> (OperatorSpec, CriterionConfig) {
    let rho0 = 1.0;
    let cfg = CriterionConfig {
        norm: grushin_norm(),
        rho0,
        q_hat: QHat::Power {
            coeff: grushin_qhat_coeff(alpha, rho0),
            alpha,
        },
        kappa: None,
        lambda: 1.0,
        surface: SurfaceModel::Sampled {
            radii: vec![1.0, 2.0, 4.0, 8.0],
            config: Default::default(),
        },
        r_max: None,
    };
    (grushin_spec(alpha), cfg)
}

//! Sampled verification of the Liouville criterion's hypotheses and
//! classification of its divergence integral.

mod checks;
mod config;
mod integral;
mod quadrature;
mod report;
mod spec;

pub use checks::{check_g_far, check_g_near, check_s, GFarCheck, GNearCheck, OctaveSup, SCheck, Witness};
pub use config::{CriterionConfig, QHat, SqrtIntegral, SurfaceModel};
pub use integral::{classify_integral, IntegralReport, IntegralVerdict, SurfaceLaw, LADDER};
pub use quadrature::adaptive_simpson;
pub use report::{
    drift_example, grushin_example, heisenberg_example, liouville_check, CriterionReport, Overall, SamplingPlan,
    SINGULAR_EXCLUSION,
};
pub use spec::*;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CriterionError {
    #[error("config: {0}")]
    Config(String),
    #[error("evaluation: {0}")]
    Eval(String),
    #[error("quadrature did not converge on [{a}, {b}]")]
    Quadrature { a: f64, b: f64 },
    #[error("surface factor: {0}")]
    Surface(String),
}

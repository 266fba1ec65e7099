//! Monotone finite differences for `L` on boxes, Dirichlet solves, discrete
//! maximum-principle checks, invading domains and barrier certificates.

mod assemble;
mod barrier;
mod dichotomy;
mod grid;
mod ibp;
mod invading;
mod solve;
mod sparse;
mod wmp;

pub use assemble::{assemble, DiscreteOperator, MMatrixReport, SchemeConfig};
pub use barrier::{
    barrier_check, barrier_samples, step2_certificate, BarrierReport, BarrierSpec, BarrierVariant, Step2Report,
    Step2Rung, BARRIER_TOL,
};
pub use dichotomy::{
    dichotomy, AlphaResult, DichotomyConfig, DichotomyReport, DistinctPair, GammaRun, Verdict, DECAY_RATIO,
    FAR_FIELD_TOL, LIMIT_FLOOR, MONOTONICITY_TOL, STEP2_TOL,
};
pub use grid::{BoxDomain, GridField};
pub use ibp::{discrete_ibp_test, ibp_defect, IbpReport, IbpTrial, IBP_RATIO};
pub use invading::{
    invading_run, limit_estimate, InvadingConfig, InvadingRun, PotentialFamily, RingValue, RungDiagnostics,
};
pub use solve::{solve_dirichlet, Method, SolveReport, SolverConfig};
pub use sparse::CsrMatrix;
pub use wmp::{wmp_test, WmpReport};

use thiserror::Error;

use crate::geometry::EvalError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PdeError {
    #[error("domain: {0}")]
    Domain(String),
    #[error("directional step reaches {reach:.3} cells along axis {axis}, box has {cells}")]
    StepExceedsBox { axis: usize, reach: f64, cells: usize },
    #[error("evaluation failed at {x:?}: {source}")]
    Eval { x: Vec<f64>, source: EvalError },
    #[error("potential is negative ({value:e}) at {x:?}")]
    NegativePotential { x: Vec<f64>, value: f64 },
    #[error("solver stopped after {iterations} iterations with residual {residual:e} (target {target:e})")]
    Solver {
        iterations: usize,
        residual: f64,
        target: f64,
    },
    #[error("expected length {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("config: {0}")]
    Config(String),
}

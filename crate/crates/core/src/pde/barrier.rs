use serde::{Deserialize, Serialize};

use crate::criterion::{OperatorSpec, Witness};
use crate::geometry::{dyadic_samples, kaplan_norm, HorizontalOps, ScalarExpr, Tape, TapeBuf};
use crate::hoermander::heisenberg;

use super::invading::InvadingRun;
use super::PdeError;

/// Slack allowed in `ΔV + Q ≤ 0`.
pub const BARRIER_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierVariant {
    /// `V = A ρ^{−β}` with `ρ = |(x, y)|`, cut off on `{ρ < R₀}`.
    Cylindrical,
    /// `V = A N^{−β}` with the Kaplan norm, cut off on `{N < R₀}`.
    Radial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierSpec {
    pub variant: BarrierVariant,
    pub amplitude: f64,
    pub beta: f64,
    pub r0: f64,
}

impl BarrierSpec {
    /// Admissible `β` interval on `Hᵐ` for potentials with decay `α`.
    pub fn window(&self, m: usize, alpha: f64) -> (f64, f64) {
        let hi = match self.variant {
            BarrierVariant::Cylindrical => (2.0 * m as f64 - 2.0).min(alpha - 2.0),
            BarrierVariant::Radial => (alpha - 2.0).min(2.0),
        };
        (0.0, hi)
    }

    fn applicability(&self, m: usize, alpha: f64) -> Result<(), String> {
        let (lo, hi) = self.window(m, alpha);
        if hi <= lo {
            return Err(format!("empty beta window for m = {m}, alpha = {alpha}"));
        }
        if !(self.beta > lo && self.beta < hi) {
            return Err(format!("beta = {} outside ({lo}, {hi})", self.beta));
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), PdeError> {
        if !(self.amplitude > 0.0 && self.r0 > 0.0 && self.beta.is_finite()) {
            return Err(PdeError::Config(
                "barrier needs amplitude > 0, r0 > 0 and finite beta".into(),
            ));
        }
        Ok(())
    }

    /// Radial variable the barrier is a power of.
    fn radius(&self, m: usize, x: &[f64]) -> f64 {
        match self.variant {
            BarrierVariant::Cylindrical => x[..2 * m].iter().map(|a| a * a).sum::<f64>().sqrt(),
            BarrierVariant::Radial => {
                let r2: f64 = x[..2 * m].iter().map(|a| a * a).sum();
                let t = x[2 * m];
                (r2 * r2 + 16.0 * t * t).powf(0.25)
            }
        }
    }

    pub fn value(&self, m: usize, x: &[f64]) -> f64 {
        self.amplitude * self.radius(m, x).powf(-self.beta)
    }

    pub fn outside_cutoff(&self, m: usize, x: &[f64]) -> bool {
        self.radius(m, x) >= self.r0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierReport {
    pub passes: bool,
    pub spec: BarrierSpec,
    pub m: usize,
    pub alpha: f64,
    pub window: (f64, f64),
    pub applicable: bool,
    pub reason: Option<String>,
    pub samples: usize,
    /// `max (ΔV + Q)` over the samples.
    pub max_excess: f64,
    pub excess_witness: Option<Witness>,
    /// `sup Q / (−ΔV₁)` for the unit-amplitude barrier: the smallest admissible `A`.
    pub a_min: f64,
}

fn heisenberg_dim(spec: &OperatorSpec) -> Result<usize, PdeError> {
    let n = spec.frame.n();
    if n < 3 || n.is_multiple_of(2) || spec.frame != heisenberg((n - 1) / 2) {
        return Err(PdeError::Config("barriers are defined on the Heisenberg frame".into()));
    }
    if spec.has_drift() {
        return Err(PdeError::Config(
            "barrier check requires an operator without drift".into(),
        ));
    }
    Ok((n - 1) / 2)
}

/// Sample points for [`barrier_check`]: dyadic Kaplan shells in `R₀ ≤ N ≤ r_max`,
/// restricted to the complement of the cutoff.
pub fn barrier_samples(b: &BarrierSpec, m: usize, r_max: f64, per_shell: usize, skip: u64) -> Vec<Vec<f64>> {
    dyadic_samples(&kaplan_norm(m, 1.0), b.r0, r_max, per_shell, skip)
        .into_iter()
        .filter(|x| b.outside_cutoff(m, x))
        .collect()
}

/// Checks `ΔV + Q ≤ 0` outside the cutoff, the superharmonicity the second step of
/// the nonuniqueness argument needs. Specs outside the `β` window are still
/// evaluated but never pass.
pub fn barrier_check(
    spec: &OperatorSpec,
    b: &BarrierSpec,
    alpha: f64,
    points: &[Vec<f64>],
) -> Result<BarrierReport, PdeError> {
    b.validate()?;
    let m = heisenberg_dim(spec)?;
    let window = b.window(m, alpha);
    let mut report = BarrierReport {
        passes: false,
        spec: *b,
        m,
        alpha,
        window,
        applicable: true,
        reason: None,
        samples: points.len(),
        max_excess: f64::NEG_INFINITY,
        excess_witness: None,
        a_min: 0.0,
    };
    if let Err(reason) = b.applicability(m, alpha) {
        report.applicable = false;
        report.reason = Some(reason);
    }
    if points.is_empty() {
        return Err(PdeError::Config("no barrier samples".into()));
    }
    let n = 2 * m + 1;
    let ops = HorizontalOps::new(&spec.frame);
    let q = Tape::compile(&spec.potential, n).map_err(|source| PdeError::Eval { x: vec![], source })?;
    let unit = Tape::compile(&radial_unit(m, b.beta), n).map_err(|source| PdeError::Eval { x: vec![], source })?;
    let mut buf = TapeBuf::default();
    for x in points {
        if !b.outside_cutoff(m, x) {
            return Err(PdeError::Config(format!("barrier sample {x:?} lies inside the cutoff")));
        }
        let eval_err = |source| PdeError::Eval { x: x.clone(), source };
        let qv = q.value_with(x, &mut buf).map_err(eval_err)?;
        let lap1 = match b.variant {
            BarrierVariant::Cylindrical => {
                let rho = b.radius(m, x);
                b.beta * (b.beta + 2.0 - 2.0 * m as f64) * rho.powf(-b.beta - 2.0)
            }
            BarrierVariant::Radial => ops.sub_laplacian(&unit, x, &mut buf).map_err(eval_err)?,
        };
        let excess = b.amplitude * lap1 + qv;
        if excess > report.max_excess {
            report.max_excess = excess;
            report.excess_witness = Some(Witness {
                point: x.clone(),
                value: excess,
            });
        }
        let need = if qv <= 0.0 {
            0.0
        } else if lap1 >= 0.0 {
            f64::INFINITY
        } else {
            qv / -lap1
        };
        report.a_min = report.a_min.max(need);
    }
    report.passes = report.applicable && report.max_excess <= BARRIER_TOL;
    Ok(report)
}

/// `N^{−β}` for the Kaplan norm.
fn radial_unit(m: usize, beta: f64) -> ScalarExpr {
    kaplan_norm(m, 1.0).expr().powf(-beta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step2Rung {
    pub j: f64,
    pub nodes: usize,
    pub min_w: f64,
    pub witness: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step2Report {
    pub passes: bool,
    pub applicable: bool,
    pub reason: Option<String>,
    pub gamma: f64,
    pub delta: f64,
    /// `V(R₀) = A R₀^{−β}`.
    pub v_r0: f64,
    /// `δ ≥ γ` and `δ V(R₀) ≥ γ`.
    pub preconditions_ok: bool,
    pub tol: f64,
    pub rungs: Vec<Step2Rung>,
    /// `min (u − γ + δV)` over every rung, outside the cutoff.
    pub min_w: f64,
}

/// Verifies `u_j ≥ γ − δV` outside the cutoff on every rung of an invading run, the
/// comparison that keeps the limit away from zero.
pub fn step2_certificate(run: &InvadingRun, b: &BarrierSpec, delta: f64, tol: f64) -> Result<Step2Report, PdeError> {
    b.validate()?;
    let spec = run.config.operator()?;
    let gamma = run.config.gamma;
    let v_r0 = b.amplitude * b.r0.powf(-b.beta);
    let mut report = Step2Report {
        passes: false,
        applicable: true,
        reason: None,
        gamma,
        delta,
        v_r0,
        preconditions_ok: delta >= gamma && delta * v_r0 >= gamma,
        tol,
        rungs: Vec::new(),
        min_w: f64::INFINITY,
    };
    let m = match heisenberg_dim(&spec) {
        Ok(m) => m,
        Err(e) => {
            report.applicable = false;
            report.reason = Some(e.to_string());
            return Ok(report);
        }
    };
    let alpha = run.config.alpha;
    if alpha <= 2.0 {
        report.applicable = false;
        report.reason = Some(format!("alpha = {alpha} <= 2: no barrier exists"));
        return Ok(report);
    }
    if let Err(reason) = b.applicability(m, alpha) {
        report.applicable = false;
        report.reason = Some(reason);
        return Ok(report);
    }
    if !report.preconditions_ok {
        report.reason = Some(format!(
            "need delta >= gamma = {gamma} and delta >= gamma / V(R0) = {}",
            gamma / v_r0
        ));
        return Ok(report);
    }
    for (field, rung) in run.solutions.iter().zip(&run.rungs) {
        let d = &field.domain;
        let n = d.dim();
        let h = d.spacing();
        let mut idx = vec![0i64; n];
        let mut x = vec![0.0; n];
        let mut r = Step2Rung {
            j: rung.j,
            nodes: 0,
            min_w: f64::INFINITY,
            witness: None,
        };
        for (lin, &u) in field.values.iter().enumerate() {
            d.unravel(lin, &mut idx);
            d.coord(&idx, &h, &mut x);
            if !b.outside_cutoff(m, &x) {
                continue;
            }
            r.nodes += 1;
            let w = u - gamma + delta * b.value(m, &x);
            if w < r.min_w {
                r.min_w = w;
                r.witness = Some(x.clone());
            }
        }
        report.min_w = report.min_w.min(r.min_w);
        report.rungs.push(r);
    }
    if run.solutions.is_empty() {
        return Err(PdeError::Config("invading run carries no solutions".into()));
    }
    report.passes = report.min_w >= -tol;
    Ok(report)
}

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{dot, HorizontalOps, Tape, TapeBuf, MAX_DIM};

use super::config::{CriterionConfig, SqrtIntegral};
use super::spec::OperatorSpec;
use super::CriterionError;

/// Octaves inspected by the divergence rule for the per-octave κ estimates.
const TREND_OCTAVES: usize = 4;
const TREND_GROWTH: f64 = 1.5;
const POSITIVITY_TOL: f64 = 1e-12;

/// A point together with the value that made it the worst sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub point: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SCheck {
    pub passes: bool,
    pub points: usize,
    pub nonnegative: bool,
    pub not_identically_zero: bool,
    pub min: Witness,
    pub max: Witness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OctaveSup {
    pub r_lo: f64,
    pub r_hi: f64,
    pub points: usize,
    pub sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GFarCheck {
    pub passes: bool,
    pub points: usize,
    /// `Q ≥ |∇_X N|² q̂(N)` at every sample.
    pub q_lower_ok: bool,
    /// Smallest `Q / (|∇_X N|² q̂(N))`.
    pub q_lower_worst: Witness,
    /// `sup (|b|² + (div_X b)₋) / (|∇_X N|² F(N)² q̂(N))`.
    pub kappa_estimate: f64,
    pub kappa_witness: Option<Witness>,
    /// The `κ` the verdict refers to: the configured one, or the estimate (1 if it is 0).
    pub kappa: f64,
    pub octaves: Vec<OctaveSup>,
    /// The per-octave sups grow along the last octaves.
    pub diverging: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GNearCheck {
    pub passes: bool,
    pub points: usize,
    /// `sup (|b|² + (div_X b)₋) / Q`.
    pub kappa_estimate: f64,
    pub kappa_witness: Option<Witness>,
    pub kappa: f64,
}

/// Pointwise quantities entering (S) and (G).
#[derive(Debug, Clone, Copy)]
struct Sample {
    norm: f64,
    grad_sq: f64,
    q: f64,
    /// `|b|² + (div_X b)₋`.
    drift: f64,
}

struct Evaluator {
    n: usize,
    ops: HorizontalOps,
    norm: Tape,
    q: Tape,
    drift: Vec<Tape>,
    has_drift: bool,
}

impl Evaluator {
    fn new(spec: &OperatorSpec, cfg: Option<&CriterionConfig>) -> Result<Self, CriterionError> {
        let n = spec.frame.n();
        let compile =
            |e: &crate::geometry::ScalarExpr| Tape::compile(e, n).map_err(|e| CriterionError::Eval(e.to_string()));
        let norm = match cfg {
            Some(c) => {
                if c.norm.dim() != n {
                    return Err(CriterionError::Config(format!(
                        "norm acts on R^{}, frame on R^{n}",
                        c.norm.dim()
                    )));
                }
                c.norm.tape().clone()
            }
            None => compile(&crate::geometry::ScalarExpr::constant(0.0))?,
        };
        Ok(Self {
            n,
            ops: HorizontalOps::new(&spec.frame),
            norm,
            q: compile(&spec.potential)?,
            drift: spec.drift.iter().map(compile).collect::<Result<_, _>>()?,
            has_drift: spec.has_drift(),
        })
    }

    fn sample(&self, x: &[f64], buf: &mut TapeBuf, with_norm: bool) -> Result<Sample, CriterionError> {
        let err = |e: crate::geometry::EvalError| CriterionError::Eval(format!("{e} at {x:?}"));
        let n = self.n;
        let q = self.q.value_with(x, buf).map_err(err)?;
        let (norm, grad_sq) = if with_norm {
            let v = self.norm.value_with(x, buf).map_err(err)?;
            let g = self.ops.grad_sq(&self.norm, x, buf).map_err(err)?;
            (
                v,
                g.ok_or_else(|| CriterionError::Eval(format!("norm not differentiable at {x:?}")))?,
            )
        } else {
            (0.0, 0.0)
        };
        let mut drift = 0.0;
        if self.has_drift {
            let mut a = [0.0; MAX_DIM];
            let mut g = [0.0; MAX_DIM];
            let mut coef = vec![0.0; self.ops.m() * n];
            self.ops.coefficients_into(x, &mut coef);
            let mut b_sq = 0.0;
            let mut div = 0.0;
            for (i, tape) in self.drift.iter().enumerate() {
                let bi = tape.gradient_with(x, buf, &mut g[..n]).map_err(err)?;
                a[..n].copy_from_slice(&coef[i * n..(i + 1) * n]);
                b_sq += bi * bi;
                div += dot(&a[..n], &g[..n]);
            }
            drift = b_sq + (-div).max(0.0);
        }
        Ok(Sample {
            norm,
            grad_sq,
            q,
            drift,
        })
    }

    fn samples(&self, points: &[Vec<f64>], with_norm: bool) -> Result<Vec<Sample>, CriterionError> {
        points
            .par_iter()
            .map_init(TapeBuf::default, |buf, x| self.sample(x, buf, with_norm))
            .collect()
    }
}

/// `Q ≥ 0` and `Q ≢ 0` on the samples.
pub fn check_s(spec: &OperatorSpec, points: &[Vec<f64>]) -> Result<SCheck, CriterionError> {
    if points.is_empty() {
        return Err(CriterionError::Config("no sample points".into()));
    }
    let ev = Evaluator::new(spec, None)?;
    let qs: Vec<f64> = points
        .par_iter()
        .map_init(TapeBuf::default, |buf, x| {
            ev.q.value_with(x, buf)
                .map_err(|e| CriterionError::Eval(format!("{e} at {x:?}")))
        })
        .collect::<Result<_, _>>()?;
    let (imin, imax) = argminmax(&qs);
    let nonnegative = qs[imin] >= -POSITIVITY_TOL;
    let not_identically_zero = qs[imax] > POSITIVITY_TOL;
    Ok(SCheck {
        passes: nonnegative && not_identically_zero,
        points: points.len(),
        nonnegative,
        not_identically_zero,
        min: Witness {
            point: points[imin].clone(),
            value: qs[imin],
        },
        max: Witness {
            point: points[imax].clone(),
            value: qs[imax],
        },
    })
}

fn argminmax(v: &[f64]) -> (usize, usize) {
    let mut lo = 0;
    let mut hi = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[lo] {
            lo = i;
        }
        if x > v[hi] {
            hi = i;
        }
    }
    (lo, hi)
}

fn ratio(num: f64, den: f64) -> f64 {
    if num <= 0.0 {
        0.0
    } else if den <= 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

fn resolve_kappa(estimate: f64, configured: Option<f64>) -> (f64, bool) {
    match configured {
        Some(k) => (k, estimate <= k),
        None if estimate == 0.0 => (1.0, true),
        None => (estimate, estimate.is_finite()),
    }
}

/// (G) on `{N > ρ₀}`: `Q ≥ |∇_X N|² q̂(N)` and
/// `|b|² + (div_X b)₋ ≤ κ |∇_X N|² F(N)² q̂(N)` with `F(r) = ∫_{ρ₀}^r √q̂`.
pub fn check_g_far(
    spec: &OperatorSpec,
    cfg: &CriterionConfig,
    points: &[Vec<f64>],
) -> Result<GFarCheck, CriterionError> {
    cfg.validate()?;
    if points.is_empty() {
        return Err(CriterionError::Config("no sample points".into()));
    }
    let ev = Evaluator::new(spec, Some(cfg))?;
    let samples = ev.samples(points, true)?;
    let r_top = samples.iter().map(|s| s.norm).fold(cfg.rho0, f64::max);
    let f = SqrtIntegral::new(&cfg.q_hat, cfg.rho0, r_top * (1.0 + 1e-9))?;

    let mut q_worst = (f64::INFINITY, 0usize);
    let mut k_worst = (0.0f64, None::<usize>);
    let n_oct = (r_top / cfg.rho0).log2().ceil().max(1.0) as usize;
    let mut octaves: Vec<OctaveSup> = (0..n_oct)
        .map(|k| OctaveSup {
            r_lo: cfg.rho0 * 2f64.powi(k as i32),
            r_hi: cfg.rho0 * 2f64.powi(k as i32 + 1),
            points: 0,
            sup: 0.0,
        })
        .collect();
    for (i, s) in samples.iter().enumerate() {
        if !(s.norm > cfg.rho0) {
            return Err(CriterionError::Config(format!(
                "far-field sample {:?} has N = {} ≤ rho0",
                points[i], s.norm
            )));
        }
        let qh = cfg.q_hat.eval(s.norm)?;
        let lower = s.grad_sq * qh;
        let qr = if lower > 0.0 { s.q / lower } else { f64::INFINITY };
        if qr < q_worst.0 {
            q_worst = (qr, i);
        }
        let fv = f.eval(s.norm)?;
        let r = ratio(s.drift, s.grad_sq * fv * fv * qh);
        if r > k_worst.0 {
            k_worst = (r, Some(i));
        }
        let k = ((s.norm / cfg.rho0).log2().floor() as usize).min(n_oct - 1);
        octaves[k].points += 1;
        octaves[k].sup = octaves[k].sup.max(r);
    }
    let q_lower_ok = q_worst.0 >= 1.0 - POSITIVITY_TOL;
    let populated: Vec<&OctaveSup> = octaves.iter().filter(|o| o.points > 0).collect();
    let diverging = populated.len() >= TREND_OCTAVES && {
        let tail = &populated[populated.len() - TREND_OCTAVES..];
        tail.windows(2).all(|w| w[1].sup > w[0].sup) && tail[TREND_OCTAVES - 1].sup >= TREND_GROWTH * tail[0].sup
    };
    let (kappa, kappa_ok) = resolve_kappa(k_worst.0, cfg.kappa);
    Ok(GFarCheck {
        passes: q_lower_ok && kappa_ok && !diverging,
        points: points.len(),
        q_lower_ok,
        q_lower_worst: Witness {
            point: points[q_worst.1].clone(),
            value: q_worst.0,
        },
        kappa_estimate: k_worst.0,
        kappa_witness: k_worst.1.map(|i| Witness {
            point: points[i].clone(),
            value: k_worst.0,
        }),
        kappa,
        octaves,
        diverging,
    })
}

/// (G) on `{N ≤ ρ₀}`: `|b|² + (div_X b)₋ ≤ κ Q`.
pub fn check_g_near(
    spec: &OperatorSpec,
    cfg: &CriterionConfig,
    points: &[Vec<f64>],
) -> Result<GNearCheck, CriterionError> {
    cfg.validate()?;
    if points.is_empty() {
        return Err(CriterionError::Config("no sample points".into()));
    }
    let ev = Evaluator::new(spec, None)?;
    let samples = ev.samples(points, false)?;
    let mut worst = (0.0f64, None::<usize>);
    for (i, s) in samples.iter().enumerate() {
        let r = ratio(s.drift, s.q);
        if r > worst.0 {
            worst = (r, Some(i));
        }
    }
    let (kappa, passes) = resolve_kappa(worst.0, cfg.kappa);
    Ok(GNearCheck {
        passes,
        points: points.len(),
        kappa_estimate: worst.0,
        kappa_witness: worst.1.map(|i| Witness {
            point: points[i].clone(),
            value: worst.0,
        }),
        kappa,
    })
}

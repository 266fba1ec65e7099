use serde::{Deserialize, Serialize};

use super::assemble::SchemeConfig;
use super::barrier::{
    barrier_check, barrier_samples, step2_certificate, BarrierReport, BarrierSpec, BarrierVariant, Step2Report,
};
use super::invading::{invading_run, InvadingConfig, InvadingRun, PotentialFamily};
use super::solve::SolverConfig;
use super::PdeError;

/// Slack in `u_j ≥ γ − δV`.
pub const STEP2_TOL: f64 = 1e-8;
/// Largest tolerated `u_{j+1} − u_j` on overlaps.
pub const MONOTONICITY_TOL: f64 = 1e-6;
/// Limit estimates below `LIMIT_FLOOR·γ` count as vanishing.
pub const LIMIT_FLOOR: f64 = 0.05;
/// The outermost ring must come within `FAR_FIELD_TOL·γ` of `γ`.
pub const FAR_FIELD_TOL: f64 = 0.15;
/// `u_last(0) ≤ DECAY_RATIO · u_first(0)` in the Liouville regime.
pub const DECAY_RATIO: f64 = 0.5;

const BARRIER_R_MAX: f64 = 1024.0;
const BARRIER_PER_SHELL: usize = 400;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DichotomyConfig {
    pub preset: String,
    pub alphas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub ladder: Vec<f64>,
    pub h: f64,
    /// Potential family; by default `radial` for `α ≤ 2` on Heisenberg presets and
    /// `gradient` otherwise.
    pub potential: Option<PotentialFamily>,
    /// Barrier for `α > 2`; by default radial with `β` at the middle of its window,
    /// `R₀ = 1` and the smallest amplitude in `{1, 1.25·A_min}` that works.
    pub barrier: Option<BarrierSpec>,
    /// Step II constant; by default `max(γ, γ/V(R₀))`.
    pub delta: Option<f64>,
    pub scheme: SchemeConfig,
    pub solver: SolverConfig,
}

impl Default for DichotomyConfig {
    fn default() -> Self {
        Self {
            preset: "heisenberg:1".into(),
            alphas: vec![1.5, 3.0],
            gammas: vec![1.0],
            ladder: vec![2.0, 4.0, 8.0],
            h: 0.125,
            potential: None,
            barrier: None,
            delta: None,
            scheme: SchemeConfig {
                dir_step_factor: 1.0,
                dir_step_power: 0.5,
            },
            solver: SolverConfig::default(),
        }
    }
}

impl DichotomyConfig {
    pub fn validate(&self) -> Result<(), PdeError> {
        if self.alphas.is_empty() {
            return Err(PdeError::Config("alphas is empty".into()));
        }
        if self.gammas.is_empty() {
            return Err(PdeError::Config("gammas is empty".into()));
        }
        if self
            .alphas
            .iter()
            .chain(&self.gammas)
            .any(|v| !(v.is_finite() && *v > 0.0))
        {
            return Err(PdeError::Config("alphas and gammas must be positive".into()));
        }
        Ok(())
    }

    pub fn family(&self, alpha: f64) -> PotentialFamily {
        self.potential.unwrap_or(if alpha <= 2.0 && self.preset != "grushin" {
            PotentialFamily::Radial
        } else {
            PotentialFamily::Gradient
        })
    }

    pub fn invading(&self, alpha: f64, gamma: f64) -> InvadingConfig {
        InvadingConfig {
            preset: self.preset.clone(),
            potential: self.family(alpha),
            alpha,
            gamma,
            ladder: self.ladder.clone(),
            h: self.h,
            scheme: self.scheme,
            solver: self.solver,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    LiouvilleConsistent,
    NonuniquenessWitnessed,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaRun {
    pub gamma: f64,
    pub run: InvadingRun,
    pub step2: Option<Step2Report>,
    /// Smallest value on the outermost far-field ring.
    pub outer_ring: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaResult {
    pub alpha: f64,
    pub potential: PotentialFamily,
    pub runs: Vec<GammaRun>,
    pub barrier: Option<BarrierReport>,
    pub verdict: Verdict,
    pub reasons: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistinctPair {
    pub alpha: f64,
    pub gammas: (f64, f64),
    pub outer_rings: (f64, f64),
    pub difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DichotomyReport {
    pub config: DichotomyConfig,
    pub results: Vec<AlphaResult>,
    pub distinct: Vec<DistinctPair>,
}

fn default_barrier(spec: &crate::criterion::OperatorSpec, m: usize, alpha: f64) -> Result<BarrierReport, PdeError> {
    let mut b = BarrierSpec {
        variant: BarrierVariant::Radial,
        amplitude: 1.0,
        beta: 1.0,
        r0: 1.0,
    };
    b.beta = 0.5 * b.window(m, alpha).1;
    let pts = barrier_samples(&b, m, BARRIER_R_MAX, BARRIER_PER_SHELL, 0);
    let first = barrier_check(spec, &b, alpha, &pts)?;
    if first.passes || !first.a_min.is_finite() {
        return Ok(first);
    }
    b.amplitude = 1.25 * first.a_min;
    barrier_check(spec, &b, alpha, &pts)
}

/// Invading-domain runs for every `(α, γ)` and, for `α > 2`, a barrier and the
/// Step II comparison; one verdict per `α`.
pub fn dichotomy(cfg: &DichotomyConfig) -> Result<DichotomyReport, PdeError> {
    cfg.validate()?;
    let mut results = Vec::with_capacity(cfg.alphas.len());
    for &alpha in &cfg.alphas {
        let base = cfg.invading(alpha, cfg.gammas[0]);
        let spec = base.operator()?;
        let n = spec.frame.n();
        let heis = cfg.preset.starts_with("heisenberg:");
        let barrier = if alpha > 2.0 && heis {
            let m = (n - 1) / 2;
            Some(match &cfg.barrier {
                Some(b) => barrier_check(
                    &spec,
                    b,
                    alpha,
                    &barrier_samples(b, m, BARRIER_R_MAX, BARRIER_PER_SHELL, 0),
                )?,
                None => default_barrier(&spec, m, alpha)?,
            })
        } else {
            None
        };
        let mut runs = Vec::with_capacity(cfg.gammas.len());
        for &gamma in &cfg.gammas {
            let run = invading_run(&cfg.invading(alpha, gamma))?;
            let step2 = match &barrier {
                Some(br) => {
                    let v_r0 = br.spec.amplitude * br.spec.r0.powf(-br.spec.beta);
                    let delta = cfg.delta.unwrap_or(gamma.max(gamma / v_r0));
                    Some(step2_certificate(&run, &br.spec, delta, STEP2_TOL)?)
                }
                None => None,
            };
            let outer_ring = run.far_field.last().map_or(f64::NAN, |r| r.min);
            runs.push(GammaRun {
                gamma,
                run,
                step2,
                outer_ring,
            });
        }
        let (verdict, reasons) = judge(alpha, &runs, barrier.as_ref());
        results.push(AlphaResult {
            alpha,
            potential: cfg.family(alpha),
            runs,
            barrier,
            verdict,
            reasons,
        });
    }
    let mut distinct = Vec::new();
    for r in &results {
        for (i, a) in r.runs.iter().enumerate() {
            for b in &r.runs[i + 1..] {
                distinct.push(DistinctPair {
                    alpha: r.alpha,
                    gammas: (a.gamma, b.gamma),
                    outer_rings: (a.outer_ring, b.outer_ring),
                    difference: (a.outer_ring - b.outer_ring).abs(),
                });
            }
        }
    }
    Ok(DichotomyReport {
        config: cfg.clone(),
        results,
        distinct,
    })
}

fn judge(alpha: f64, runs: &[GammaRun], barrier: Option<&BarrierReport>) -> (Verdict, Vec<String>) {
    let mut why = Vec::new();
    for g in runs {
        let r = &g.run;
        if !r.decreasing {
            why.push(format!("gamma = {}: center values not decreasing", g.gamma));
        }
        if r.max_monotonicity_defect > MONOTONICITY_TOL {
            why.push(format!(
                "gamma = {}: monotonicity defect {:e}",
                g.gamma, r.max_monotonicity_defect
            ));
        }
    }
    let structural = why.is_empty();
    if alpha > 2.0 {
        match barrier {
            Some(b) if b.passes => {}
            Some(_) => why.push("barrier check failed".into()),
            None => why.push("no barrier for this preset".into()),
        }
        for g in runs {
            let tag = format!("gamma = {}", g.gamma);
            match &g.step2 {
                Some(s) if s.passes => {}
                _ => why.push(format!("{tag}: step II certificate failed")),
            }
            match g.run.limit_estimate {
                Some(l) if l >= LIMIT_FLOOR * g.gamma => {}
                l => why.push(format!("{tag}: limit estimate {l:?} below {}", LIMIT_FLOOR * g.gamma)),
            }
            if !(g.gamma - g.outer_ring <= FAR_FIELD_TOL * g.gamma) {
                why.push(format!(
                    "{tag}: outer ring {} not within {} of gamma",
                    g.outer_ring,
                    FAR_FIELD_TOL * g.gamma
                ));
            }
        }
        let v = if why.is_empty() {
            Verdict::NonuniquenessWitnessed
        } else {
            Verdict::Undetermined
        };
        return (v, why);
    }
    for g in runs {
        let c = &g.run.center_values;
        let (first, last) = (c[0], c[c.len() - 1]);
        if c.len() < 2 || last > DECAY_RATIO * first {
            why.push(format!("gamma = {}: u(0) fell from {first} to {last} only", g.gamma));
        }
    }
    let v = if structural && why.is_empty() {
        Verdict::LiouvilleConsistent
    } else {
        Verdict::Undetermined
    };
    (v, why)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_lists_are_rejected() {
        let cfg = DichotomyConfig {
            alphas: vec![],
            ..DichotomyConfig::default()
        };
        assert!(matches!(dichotomy(&cfg), Err(PdeError::Config(_))));
    }

    #[test]
    fn default_family_follows_regime() {
        let cfg = DichotomyConfig::default();
        assert_eq!(cfg.family(1.5), PotentialFamily::Radial);
        assert_eq!(cfg.family(3.0), PotentialFamily::Gradient);
    }

    #[test]
    fn coarse_grushin_liouville_leg() {
        let cfg = DichotomyConfig {
            preset: "grushin".into(),
            alphas: vec![1.5],
            ladder: vec![1.0, 2.0, 4.0],
            h: 0.25,
            ..DichotomyConfig::default()
        };
        let r = dichotomy(&cfg).unwrap();
        assert!(r.results[0].barrier.is_none());
        assert!(r.results[0].runs[0].run.decreasing);
    }
}

//! Monte Carlo evaluation of `F(r) = ∫_{N<r} |∇_X N|² dx` and its derivative `S(r)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ExhaustionNorm, GeometryError, HorizontalOps, TapeBuf};
use crate::fields::DilationWeights;
use crate::hoermander::Frame;

pub const MIN_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurfaceConfig {
    pub samples: usize,
    pub seed: u64,
    /// Number of equal-width strata along the first axis; one RNG stream each.
    pub strata: usize,
    /// Shell half-width `δ = delta_frac · r`.
    pub delta_frac: f64,
    /// Largest accepted `stderr / S`.
    pub max_rel_error: f64,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        Self {
            samples: 200_000,
            seed: 0x5eed,
            strata: 64,
            delta_frac: 0.02,
            max_rel_error: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn rel_error(&self) -> f64 {
        if self.value == 0.0 {
            f64::INFINITY
        } else {
            self.stderr / self.value.abs()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceFactorEstimate {
    pub r: Vec<f64>,
    pub s: Vec<f64>,
    pub stderr: Vec<f64>,
    pub fit: Option<PowerLawFit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub log_constant: f64,
    /// Root-mean-square residual of `log S`.
    pub rms_residual: f64,
}

/// Stratified estimate of `∫_box g(N(x), |∇_X N|²(x)) dx`.
///
/// `g` receives `N` first and may return `None` to skip the gradient; a point
/// where `N` is not differentiable contributes 0.
fn integrate<G>(
    frame: &Frame,
    norm: &ExhaustionNorm,
    half: &[f64],
    samples: usize,
    seed: u64,
    strata: usize,
    g: G,
) -> Result<Estimate, GeometryError>
where
    G: Fn(f64) -> Option<Box<dyn Fn(f64) -> f64>> + Sync,
{
    let n = norm.dim();
    let ops = HorizontalOps::new(frame);
    let strata = strata.clamp(1, samples);
    let width0 = 2.0 * half[0] / strata as f64;
    let vol_stratum: f64 = width0 * half[1..].iter().map(|h| 2.0 * h).product::<f64>();
    let results: Vec<Result<(f64, f64), GeometryError>> = (0..strata)
        .into_par_iter()
        .map(|k| {
            let count = samples / strata + usize::from(k < samples % strata);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let mut buf = TapeBuf::default();
            let mut x = vec![0.0; n];
            let (mut sum, mut sum2) = (0.0, 0.0);
            let lo0 = -half[0] + k as f64 * width0;
            for _ in 0..count {
                x[0] = lo0 + width0 * rng.gen::<f64>();
                for i in 1..n {
                    x[i] = half[i] * (2.0 * rng.gen::<f64>() - 1.0);
                }
                let nv = norm.tape().value_with(&x, &mut buf)?;
                let v = match g(nv) {
                    None => 0.0,
                    Some(h) => match ops.grad_sq(norm.tape(), &x, &mut buf)? {
                        Some(gs) => h(gs),
                        None => 0.0,
                    },
                };
                sum += v;
                sum2 += v * v;
            }
            let c = count as f64;
            let mean = sum / c;
            let var = if count > 1 {
                (sum2 - c * mean * mean).max(0.0) / (c - 1.0)
            } else {
                0.0
            };
            Ok((vol_stratum * mean, vol_stratum * vol_stratum * var / c))
        })
        .collect();
    let (mut value, mut var) = (0.0, 0.0);
    for r in results {
        let (m, v) = r?;
        value += m;
        var += v;
    }
    Ok(Estimate {
        value,
        stderr: var.sqrt(),
    })
}

/// `F(r) = ∫_{N<r} |∇_X N|² dx` over the bounding box of `{N < r}`.
pub fn volume_functional(
    frame: &Frame,
    norm: &ExhaustionNorm,
    r: f64,
    samples: usize,
    seed: u64,
) -> Result<Estimate, GeometryError> {
    if samples < MIN_SAMPLES {
        return Err(GeometryError::TooFewSamples(samples));
    }
    if !(r > 0.0) {
        return Err(GeometryError::NonPositiveRadius(r));
    }
    let half = norm.bounding_box(r);
    let strata = SurfaceConfig::default().strata;
    integrate(frame, norm, &half, samples, seed, strata, |nv| {
        (nv < r).then(|| Box::new(|gs| gs) as Box<dyn Fn(f64) -> f64>)
    })
}

/// `S(r) ≈ (F(r+δ) − F(r−δ)) / 2δ`, estimated from one sample set as the shell
/// integral of `|∇_X N|² / 2δ` over `r−δ < N < r+δ`.
pub fn surface_factor(
    frame: &Frame,
    norm: &ExhaustionNorm,
    r: f64,
    cfg: &SurfaceConfig,
) -> Result<Estimate, GeometryError> {
    if cfg.samples < MIN_SAMPLES {
        return Err(GeometryError::TooFewSamples(cfg.samples));
    }
    if !(r > 0.0) {
        return Err(GeometryError::NonPositiveRadius(r));
    }
    let delta = cfg.delta_frac * r;
    let half = norm.bounding_box(r + delta);
    let inv = 1.0 / (2.0 * delta);
    let est = integrate(frame, norm, &half, cfg.samples, cfg.seed, cfg.strata, |nv| {
        (nv > r - delta && nv < r + delta).then(|| Box::new(move |gs| gs * inv) as Box<dyn Fn(f64) -> f64>)
    })?;
    let rel = est.rel_error();
    if rel > cfg.max_rel_error {
        return Err(GeometryError::MonteCarloError {
            r,
            rel,
            limit: cfg.max_rel_error,
        });
    }
    Ok(est)
}

/// `S(r)` on each radius (each with its own seed offset) plus the power-law fit when possible.
pub fn surface_factor_curve(
    frame: &Frame,
    norm: &ExhaustionNorm,
    radii: &[f64],
    cfg: &SurfaceConfig,
) -> Result<SurfaceFactorEstimate, GeometryError> {
    let mut est = SurfaceFactorEstimate {
        r: Vec::new(),
        s: Vec::new(),
        stderr: Vec::new(),
        fit: None,
    };
    for (k, &r) in radii.iter().enumerate() {
        let c = SurfaceConfig {
            seed: cfg.seed.wrapping_add(k as u64),
            ..*cfg
        };
        let e = surface_factor(frame, norm, r, &c)?;
        est.r.push(r);
        est.s.push(e.value);
        est.stderr.push(e.stderr);
    }
    est.fit = power_law_fit(&est).ok();
    Ok(est)
}

/// Least-squares fit `log S = log C + p log r`.
pub fn power_law_fit(e: &SurfaceFactorEstimate) -> Result<PowerLawFit, GeometryError> {
    if e.r.len() < 4 || e.r.len() != e.s.len() {
        return Err(GeometryError::Fit(format!("need at least 4 radii, got {}", e.r.len())));
    }
    if e.r.windows(2).any(|w| w[1] <= w[0]) {
        return Err(GeometryError::Fit("radii must be strictly increasing".into()));
    }
    if e.r[e.r.len() - 1] < 2.0 * e.r[0] {
        return Err(GeometryError::Fit("radii must span at least one octave".into()));
    }
    if let Some(bad) = e.s.iter().find(|&&s| !(s > 0.0)) {
        return Err(GeometryError::Fit(format!("non-positive S value {bad}")));
    }
    let xs: Vec<f64> = e.r.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = e.s.iter().map(|s| s.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let exponent = sxy / sxx;
    let log_constant = my - exponent * mx;
    let rms = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - log_constant - exponent * x).powi(2))
        .sum::<f64>()
        / k)
        .sqrt();
    Ok(PowerLawFit {
        exponent,
        log_constant,
        rms_residual: rms,
    })
}

pub fn homogeneous_dimension(w: &DilationWeights) -> u32 {
    w.homogeneous_dimension()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{grushin_norm, kaplan_norm};
    use crate::hoermander::{grushin, heisenberg};

    fn exact(r: &[f64], f: impl Fn(f64) -> f64) -> SurfaceFactorEstimate {
        SurfaceFactorEstimate {
            r: r.to_vec(),
            s: r.iter().map(|&x| f(x)).collect(),
            stderr: vec![0.0; r.len()],
            fit: None,
        }
    }

    #[test]
    fn fit_recovers_exact_power_law() {
        let fit = power_law_fit(&exact(&[1.0, 2.0, 4.0, 8.0], |r| 7.0 * r.powi(3))).unwrap();
        assert!((fit.exponent - 3.0).abs() < 1e-12);
        assert!((fit.log_constant - 7f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn fit_preconditions() {
        assert!(power_law_fit(&exact(&[1.0, 2.0, 4.0], |r| r)).is_err());
        assert!(power_law_fit(&exact(&[1.0, 1.1, 1.2, 1.3], |r| r)).is_err());
        assert!(power_law_fit(&exact(&[1.0, 2.0, 4.0, 8.0], |r| r - 2.0)).is_err());
    }

    #[test]
    fn sample_floor_and_radius() {
        let (h, n) = (heisenberg(1), kaplan_norm(1, 1.0));
        assert!(matches!(
            volume_functional(&h, &n, 1.0, 999, 1),
            Err(GeometryError::TooFewSamples(999))
        ));
        assert!(volume_functional(&h, &n, 0.0, 1000, 1).is_err());
        let tiny = volume_functional(&h, &n, 1e-3, 5000, 1).unwrap();
        assert!(tiny.value < 1e-10);
    }

    #[test]
    fn volume_scales_with_homogeneous_dimension() {
        let (h, n) = (heisenberg(1), kaplan_norm(1, 1.0));
        let f1 = volume_functional(&h, &n, 1.0, 100_000, 3).unwrap();
        let f2 = volume_functional(&h, &n, 2.0, 100_000, 4).unwrap();
        let ratio = f2.value / f1.value;
        let err = ratio * (f1.rel_error() + f2.rel_error());
        assert!((ratio - 16.0).abs() < 4.0 * err, "ratio {ratio} ± {err}");
    }

    #[test]
    fn grushin_surface_ratio() {
        let cfg = SurfaceConfig {
            samples: 100_000,
            ..Default::default()
        };
        let (g, n) = (grushin(), grushin_norm());
        let s1 = surface_factor(&g, &n, 1.0, &cfg).unwrap();
        let s2 = surface_factor(&g, &n, 2.0, &SurfaceConfig { seed: 9, ..cfg }).unwrap();
        let ratio = s2.value / s1.value;
        let err = ratio * (s1.rel_error() + s2.rel_error());
        assert!((ratio - 4.0).abs() < 4.0 * err, "ratio {ratio} ± {err}");
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = SurfaceConfig {
            samples: 20_000,
            ..Default::default()
        };
        let (g, n) = (grushin(), grushin_norm());
        let a = surface_factor(&g, &n, 1.0, &cfg).unwrap();
        let b = surface_factor(&g, &n, 1.0, &cfg).unwrap();
        assert_eq!(a, b);
    }
}

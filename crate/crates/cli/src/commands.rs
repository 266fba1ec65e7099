use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use liouville_lab::criterion::{
    drift_example, grushin_example, heisenberg_example, liouville_check, CriterionError, Overall, SamplingPlan,
};
use liouville_lab::fields::{DilationWeights, FieldDegree, PolyVectorField};
use liouville_lab::geometry::{
    grushin_norm, homogeneous_dimension, kaplan_norm, surface_factor_curve, ExhaustionNorm, GeometryError, NormSpec,
    SurfaceConfig,
};
use liouville_lab::hoermander::{check_hoermander, check_ntd, frame_from_preset, Frame, FrameError, FrameSpec};
use liouville_lab::pde::{
    assemble, barrier_check, barrier_samples, dichotomy, invading_run, wmp_test, BarrierSpec, BarrierVariant,
    DichotomyConfig, GridField, InvadingConfig, PdeError, PotentialFamily, SchemeConfig, SolverConfig, Verdict,
};

use crate::output::{to_value, CliError, Outcome};

pub fn dispatch(name: &str, raw: &str, seed: Option<u64>) -> Result<Outcome, CliError> {
    match name {
        "check-frame" => check_frame(parse(raw)?, seed),
        "surface-factor" => surface(parse(raw)?, seed),
        "criterion" => criterion(parse(raw)?, seed),
        "solve" => solve(parse(raw)?, seed),
        "dichotomy" => run_dichotomy(parse(raw)?),
        "barrier" => barrier(parse(raw)?, seed),
        other => Err(CliError::Usage(format!("unknown command {other}"))),
    }
}

fn parse<T: DeserializeOwned>(raw: &str) -> Result<T, CliError> {
    serde_json::from_str(raw).map_err(|e| CliError::Usage(format!("config: {e}")))
}

fn pde_err(e: PdeError) -> CliError {
    match e {
        PdeError::Config(_) | PdeError::Domain(_) | PdeError::Dimension { .. } | PdeError::StepExceedsBox { .. } => {
            CliError::Usage(e.to_string())
        }
        _ => CliError::Failed(e.to_string()),
    }
}

fn criterion_err(e: CriterionError) -> CliError {
    match e {
        CriterionError::Config(_) => CliError::Usage(e.to_string()),
        _ => CliError::Failed(e.to_string()),
    }
}

fn geometry_err(e: GeometryError) -> CliError {
    match e {
        GeometryError::Parse(_)
        | GeometryError::Norm(_)
        | GeometryError::TooFewSamples(_)
        | GeometryError::NonPositiveRadius(_) => CliError::Usage(e.to_string()),
        _ => CliError::Failed(e.to_string()),
    }
}

/// Preset name or literal frame, never both; the `heisenberg:1` preset by default.
fn resolve_frame(preset: &mut Option<String>, frame: &Option<FrameSpec>) -> Result<(), CliError> {
    match (&preset, frame) {
        (Some(_), Some(_)) => Err(CliError::Usage("give either preset or frame, not both".into())),
        (None, None) => {
            *preset = Some("heisenberg:1".into());
            Ok(())
        }
        _ => Ok(()),
    }
}

fn preset_norm(name: &str) -> Result<ExhaustionNorm, CliError> {
    if name == "grushin" {
        return Ok(grushin_norm());
    }
    let m = frame_from_preset(name).map_err(|e| CliError::Usage(e.to_string()))?.n() / 2;
    Ok(kaplan_norm(m, 1.0))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CheckFrameConfig {
    preset: Option<String>,
    frame: Option<FrameSpec>,
    /// Random points besides the origin.
    points: usize,
    /// Points are drawn from `[−half_width, half_width]ⁿ`.
    half_width: f64,
    max_step: Option<usize>,
    seed: u64,
}

impl Default for CheckFrameConfig {
    fn default() -> Self {
        Self {
            preset: None,
            frame: None,
            points: 50,
            half_width: 2.0,
            max_step: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Serialize)]
struct FieldCheck {
    index: usize,
    coefficients: Vec<String>,
    /// `null` for mixed degrees; the zero field reports `"any"`.
    degree: Option<String>,
    divergence_free: bool,
}

fn check_frame(mut cfg: CheckFrameConfig, seed: Option<u64>) -> Result<Outcome, CliError> {
    if let Some(s) = seed {
        cfg.seed = s;
    }
    resolve_frame(&mut cfg.preset, &cfg.frame)?;
    let spec = match (&cfg.preset, &cfg.frame) {
        (Some(p), _) => frame_from_preset(p)
            .map_err(|e| CliError::Usage(e.to_string()))?
            .to_spec(),
        (None, Some(f)) => f.clone(),
        _ => unreachable!(),
    };
    let usage = |e: &dyn std::fmt::Display| CliError::Usage(format!("frame: {e}"));
    let weights = DilationWeights::new(spec.weights.clone()).map_err(|e| usage(&e))?;
    let n = weights.dim();
    let mut fields = Vec::new();
    let mut checks = Vec::new();
    for (index, c) in spec.fields.iter().enumerate() {
        let f = PolyVectorField::parse(c).map_err(|e| usage(&e))?;
        if f.dim() != n {
            return Err(usage(&format!(
                "field {index} has {} coefficients, weights have {n}",
                f.dim()
            )));
        }
        let degree = f.homogeneity_degree(&weights).map_err(|e| usage(&e))?.map(|d| match d {
            FieldDegree::Any => "any".to_string(),
            FieldDegree::Degree(k) => k.to_string(),
        });
        checks.push(FieldCheck {
            index,
            coefficients: c.clone(),
            degree,
            divergence_free: f.divergence().is_zero(),
        });
        fields.push(f);
    }
    let homogeneous = checks.iter().all(|c| c.degree.as_deref() == Some("1"));
    let divergence_free = checks.iter().all(|c| c.divergence_free);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut points = vec![vec![0.0; n]];
    points.extend((0..cfg.points).map(|_| (0..n).map(|_| cfg.half_width * rng.gen_range(-1.0..1.0)).collect()));
    let ntd = check_ntd(&fields, &points);
    let hoermander = match Frame::new(fields, weights) {
        Ok(frame) => Some(check_hoermander(&frame, &points[1..], cfg.max_step)),
        Err(FrameError::TooFewFields(k)) => return Err(usage(&format!("need at least two fields, got {k}"))),
        Err(_) => None,
    };
    let rank_ok = hoermander.as_ref().is_some_and(|h| h.satisfied);
    let passed = homogeneous && divergence_free && rank_ok && ntd;
    let report = json!({
        "n": n,
        "m": checks.len(),
        "homogeneous_dimension": spec.weights.iter().sum::<u32>(),
        "fields": checks,
        "homogeneous": homogeneous,
        "divergence_free": divergence_free,
        "hoermander": hoermander,
        "ntd": ntd,
        "points": points.len(),
    });
    Ok(Outcome {
        command: "check-frame",
        config: to_value(&cfg)?,
        passed,
        report,
        csv: vec![],
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SurfaceFactorCommand {
    preset: Option<String>,
    frame: Option<FrameSpec>,
    /// Required with a literal frame.
    norm: Option<NormSpec>,
    radii: Vec<f64>,
    surface: SurfaceConfig,
}

impl Default for SurfaceFactorCommand {
    fn default() -> Self {
        Self {
            preset: None,
            frame: None,
            norm: None,
            radii: vec![1.0, 2.0, 4.0, 8.0],
            surface: SurfaceConfig::default(),
        }
    }
}

fn surface(mut cfg: SurfaceFactorCommand, seed: Option<u64>) -> Result<Outcome, CliError> {
    if let Some(s) = seed {
        cfg.surface.seed = s;
    }
    resolve_frame(&mut cfg.preset, &cfg.frame)?;
    let (frame, default_norm) = match (&cfg.preset, &cfg.frame) {
        (Some(p), _) => (
            frame_from_preset(p).map_err(|e| CliError::Usage(e.to_string()))?,
            Some(preset_norm(p)?),
        ),
        (None, Some(f)) => (Frame::from_spec(f).map_err(|e| CliError::Usage(e.to_string()))?, None),
        _ => unreachable!(),
    };
    let norm = match (&cfg.norm, default_norm) {
        (Some(spec), _) => ExhaustionNorm::from_spec(spec).map_err(geometry_err)?,
        (None, Some(n)) => n,
        (None, None) => return Err(CliError::Usage("a literal frame needs a norm".into())),
    };
    if norm.dim() != frame.n() {
        return Err(CliError::Usage("norm and frame dimensions differ".into()));
    }
    let est = surface_factor_curve(&frame, &norm, &cfg.radii, &cfg.surface).map_err(geometry_err)?;
    let expected = homogeneous_dimension(frame.weights()) as f64 - 1.0;
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Failed(e.to_string());
    w.write_record(["r", "S", "stderr"]).map_err(csv_err)?;
    for k in 0..est.r.len() {
        w.serialize((est.r[k], est.s[k], est.stderr[k])).map_err(csv_err)?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| CliError::Failed(e.to_string()))?).unwrap();
    let report = json!({ "estimate": est, "expected_exponent": expected });
    Ok(Outcome {
        command: "surface-factor",
        config: to_value(&cfg)?,
        passed: est.fit.is_some(),
        report,
        csv: vec![("surface_factor.csv".into(), body)],
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CriterionCommand {
    /// `heisenberg:<m>` or `grushin`.
    preset: String,
    alpha: f64,
    /// Drift exponent; Heisenberg presets only.
    beta: Option<f64>,
    kappa: Option<f64>,
    lambda: Option<f64>,
    r_max: Option<f64>,
    plan: SamplingPlan,
}

impl Default for CriterionCommand {
    fn default() -> Self {
        Self {
            preset: "heisenberg:1".into(),
            alpha: 1.5,
            beta: None,
            kappa: None,
            lambda: None,
            r_max: None,
            plan: SamplingPlan::default(),
        }
    }
}

fn criterion(mut cfg: CriterionCommand, seed: Option<u64>) -> Result<Outcome, CliError> {
    if let Some(s) = seed {
        cfg.plan.skip = s;
    }
    let (spec, mut c) = if cfg.preset == "grushin" {
        if cfg.beta.is_some() {
            return Err(CliError::Usage("drift is available on Heisenberg presets only".into()));
        }
        grushin_example(cfg.alpha)
    } else {
        let m = frame_from_preset(&cfg.preset)
            .map_err(|e| CliError::Usage(e.to_string()))?
            .n()
            / 2;
        match cfg.beta {
            Some(beta) => drift_example(m, cfg.alpha, beta),
            None => heisenberg_example(m, cfg.alpha),
        }
    };
    c.kappa = cfg.kappa;
    if let Some(l) = cfg.lambda {
        c.lambda = l;
    }
    if cfg.r_max.is_some() {
        c.r_max = cfg.r_max;
    }
    let report = liouville_check(&spec, &c, &cfg.plan).map_err(criterion_err)?;
    Ok(Outcome {
        command: "criterion",
        config: to_value(&cfg)?,
        passed: report.overall == Overall::LiouvilleHolds,
        report: to_value(&report)?,
        csv: vec![],
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SolveCommand {
    preset: String,
    potential: PotentialFamily,
    alpha: f64,
    /// Boundary value.
    gamma: f64,
    /// Box `(−j, j)ⁿ`.
    j: f64,
    h: f64,
    scheme: SchemeConfig,
    solver: SolverConfig,
    /// Random discrete maximum-principle trials on the same operator.
    wmp_trials: usize,
    seed: u64,
}

impl Default for SolveCommand {
    fn default() -> Self {
        Self {
            preset: "heisenberg:1".into(),
            potential: PotentialFamily::Gradient,
            alpha: 3.0,
            gamma: 1.0,
            j: 2.0,
            h: 0.125,
            scheme: SchemeConfig::default(),
            solver: SolverConfig::default(),
            wmp_trials: 0,
            seed: 0,
        }
    }
}

const BOUND_TOL: f64 = 1e-8;

fn solve(mut cfg: SolveCommand, seed: Option<u64>) -> Result<Outcome, CliError> {
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let inv = InvadingConfig {
        preset: cfg.preset.clone(),
        potential: cfg.potential,
        alpha: cfg.alpha,
        gamma: cfg.gamma,
        ladder: vec![cfg.j],
        h: cfg.h,
        scheme: cfg.scheme,
        solver: cfg.solver,
    };
    let run = invading_run(&inv).map_err(pde_err)?;
    let rung = &run.rungs[0];
    let spec = inv.operator().map_err(pde_err)?;
    let op = assemble(&spec, &run.solutions[0].domain, &cfg.scheme).map_err(pde_err)?;
    let m_matrix = op.m_matrix_report();
    let wmp = (cfg.wmp_trials > 0).then(|| wmp_test(&op, cfg.wmp_trials, cfg.seed, &cfg.solver));
    let bounds_ok = rung.bound_defect <= BOUND_TOL;
    let passed = bounds_ok && m_matrix.ok && wmp.as_ref().is_none_or(|w| w.passes);
    let report = json!({
        "rung": rung,
        "bounds_ok": bounds_ok,
        "m_matrix": m_matrix,
        "wmp": wmp,
        "far_field": run.far_field,
    });
    Ok(Outcome {
        command: "solve",
        config: to_value(&cfg)?,
        passed,
        report,
        csv: vec![("solution.csv".into(), run.solutions[0].to_csv())],
    })
}

/// Nodes of `field` on the hyperplane `x_n = 0`.
fn slice_csv(field: &GridField) -> String {
    let d = &field.domain;
    let n = d.dim();
    let h = d.spacing();
    let mut idx = vec![0i64; n];
    let mut x = vec![0.0; n];
    let mut s = String::new();
    for k in 1..n {
        s.push_str(&format!("x{k},"));
    }
    s.push_str("value\n");
    for (lin, v) in field.values.iter().enumerate() {
        d.unravel(lin, &mut idx);
        d.coord(&idx, &h, &mut x);
        if x[n - 1].abs() > 1e-12 {
            continue;
        }
        for xi in &x[..n - 1] {
            s.push_str(&format!("{xi},"));
        }
        s.push_str(&format!("{v}\n"));
    }
    s
}

fn run_dichotomy(cfg: DichotomyConfig) -> Result<Outcome, CliError> {
    let report = dichotomy(&cfg).map_err(pde_err)?;
    let mut csv = Vec::new();
    for r in &report.results {
        for g in &r.runs {
            if let Some(last) = g.run.solutions.last() {
                csv.push((format!("slice_alpha{}_gamma{}.csv", r.alpha, g.gamma), slice_csv(last)));
            }
        }
    }
    let passed = report.results.iter().all(|r| r.verdict != Verdict::Undetermined);
    Ok(Outcome {
        command: "dichotomy",
        config: to_value(&cfg)?,
        passed,
        report: to_value(&report)?,
        csv,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct BarrierCommand {
    preset: String,
    potential: PotentialFamily,
    alpha: f64,
    barrier: BarrierSpec,
    /// Samples fill dyadic Kaplan shells from `R₀` to `r_max`.
    r_max: f64,
    per_shell: usize,
    seed: u64,
}

impl Default for BarrierCommand {
    fn default() -> Self {
        Self {
            preset: "heisenberg:1".into(),
            potential: PotentialFamily::Gradient,
            alpha: 3.0,
            barrier: BarrierSpec {
                variant: BarrierVariant::Radial,
                amplitude: 1.0,
                beta: 0.5,
                r0: 1.0,
            },
            r_max: 1024.0,
            per_shell: 400,
            seed: 0,
        }
    }
}

fn barrier(mut cfg: BarrierCommand, seed: Option<u64>) -> Result<Outcome, CliError> {
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let inv = InvadingConfig {
        preset: cfg.preset.clone(),
        potential: cfg.potential,
        alpha: cfg.alpha,
        ..InvadingConfig::default()
    };
    let spec = inv.operator().map_err(pde_err)?;
    let m = spec.frame.n() / 2;
    let pts = barrier_samples(&cfg.barrier, m, cfg.r_max, cfg.per_shell, cfg.seed);
    let report = barrier_check(&spec, &cfg.barrier, cfg.alpha, &pts).map_err(pde_err)?;
    Ok(Outcome {
        command: "barrier",
        config: to_value(&cfg)?,
        passed: report.passes,
        report: to_value(&report)?,
        csv: vec![],
    })
}

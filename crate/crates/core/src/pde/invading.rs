use serde::{Deserialize, Serialize};

use crate::criterion::{grushin_potential, heisenberg_gradient_potential, heisenberg_radial_potential, OperatorSpec};
use crate::hoermander::{grushin, heisenberg};

use super::assemble::{assemble, SchemeConfig};
use super::grid::{BoxDomain, GridField};
use super::solve::{solve_dirichlet, SolveReport, SolverConfig};
use super::PdeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialFamily {
    /// `Q ~ |∇_X N|² N^{−α}` at infinity.
    Gradient,
    /// `Q ~ N^{−α}` at infinity.
    Radial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InvadingConfig {
    /// `"heisenberg:<m>"` or `"grushin"`.
    pub preset: String,
    pub potential: PotentialFamily,
    pub alpha: f64,
    pub gamma: f64,
    /// Half-widths `j` of the boxes `(−j, j)ⁿ`.
    pub ladder: Vec<f64>,
    /// Grid spacing, shared by every rung.
    pub h: f64,
    pub scheme: SchemeConfig,
    pub solver: SolverConfig,
}

impl Default for InvadingConfig {
    fn default() -> Self {
        Self {
            preset: "heisenberg:1".into(),
            potential: PotentialFamily::Gradient,
            alpha: 3.0,
            gamma: 1.0,
            ladder: vec![2.0, 4.0, 8.0],
            h: 0.125,
            scheme: SchemeConfig::default(),
            solver: SolverConfig::default(),
        }
    }
}

impl InvadingConfig {
    pub fn operator(&self) -> Result<OperatorSpec, PdeError> {
        let bad = || PdeError::Config(format!("unknown preset {:?}", self.preset));
        if self.preset == "grushin" {
            if self.potential != PotentialFamily::Gradient {
                return Err(PdeError::Config("grushin supports the gradient potential only".into()));
            }
            return Ok(OperatorSpec::without_drift(grushin(), grushin_potential(self.alpha)));
        }
        let m: usize = self
            .preset
            .strip_prefix("heisenberg:")
            .ok_or_else(bad)?
            .parse()
            .map_err(|_| bad())?;
        if m == 0 {
            return Err(bad());
        }
        let q = match self.potential {
            PotentialFamily::Gradient => heisenberg_gradient_potential(m, self.alpha),
            PotentialFamily::Radial => heisenberg_radial_potential(m, self.alpha),
        };
        Ok(OperatorSpec::without_drift(heisenberg(m), q))
    }

    fn validate(&self) -> Result<(), PdeError> {
        if !(self.gamma > 0.0) {
            return Err(PdeError::Config("gamma must be positive".into()));
        }
        if !(self.h > 0.0) {
            return Err(PdeError::Config("h must be positive".into()));
        }
        if self.ladder.is_empty() {
            return Err(PdeError::Config("ladder is empty".into()));
        }
        for w in self.ladder.windows(2) {
            if !(w[1] > w[0]) {
                return Err(PdeError::Config("ladder must be strictly increasing".into()));
            }
        }
        for &j in &self.ladder {
            let c = j / self.h;
            if !(j > 0.0) || (c - c.round()).abs() > 1e-9 {
                return Err(PdeError::Config(format!("j = {j} is not a positive multiple of h")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RungDiagnostics {
    pub j: f64,
    pub unknowns: usize,
    pub center: f64,
    pub min: f64,
    pub max: f64,
    /// `max(0, −min u, max u − γ)`.
    pub bound_defect: f64,
    /// `max (u_j − u_prev)₊` over the previous rung's nodes; 0 on the first rung.
    pub monotonicity_defect: f64,
    pub solve: SolveReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingValue {
    pub radius: f64,
    pub nodes: usize,
    pub min: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvadingRun {
    pub config: InvadingConfig,
    pub rungs: Vec<RungDiagnostics>,
    pub center_values: Vec<f64>,
    pub decreasing: bool,
    pub max_monotonicity_defect: f64,
    pub max_bound_defect: f64,
    /// Aitken extrapolation of the last three center values, when geometric.
    pub limit_estimate: Option<f64>,
    /// Rings `|x'| = R` in the slice `x_n = 0` of the largest box.
    pub far_field: Vec<RingValue>,
    #[serde(skip)]
    pub solutions: Vec<GridField>,
}

/// Dirichlet problems `L u = 0` in `(−j, j)ⁿ`, `u = γ` outside, along the ladder.
pub fn invading_run(cfg: &InvadingConfig) -> Result<InvadingRun, PdeError> {
    cfg.validate()?;
    let spec = cfg.operator()?;
    let n = spec.frame.n();
    let mut rungs: Vec<RungDiagnostics> = Vec::new();
    let mut solutions: Vec<GridField> = Vec::new();
    for &j in &cfg.ladder {
        let dom = BoxDomain::cube(n, j, cfg.h)?;
        let op = assemble(&spec, &dom, &cfg.scheme)?;
        let g = vec![cfg.gamma; op.num_dirichlet()];
        let f = vec![0.0; op.num_unknowns()];
        let guess = solutions
            .last()
            .map(|prev| op.interior_values(|x| prev.at(x).unwrap_or(cfg.gamma).min(cfg.gamma)));
        let (u, solve) = solve_dirichlet(&op, &g, &f, &cfg.solver, guess.as_deref())?;
        let field = op.to_grid_field(&u, &g);
        let center = field.at(&vec![0.0; n]).expect("origin is a grid node");
        let (min, max) = (field.min(), field.max());
        let monotonicity_defect = solutions.last().map_or(0.0, |prev| monotonicity_defect(prev, &field));
        rungs.push(RungDiagnostics {
            j,
            unknowns: op.num_unknowns(),
            center,
            min,
            max,
            bound_defect: 0f64.max(-min).max(max - cfg.gamma),
            monotonicity_defect,
            solve,
        });
        solutions.push(field);
    }
    let center_values: Vec<f64> = rungs.iter().map(|r| r.center).collect();
    let far_field = far_field(solutions.last().unwrap(), *cfg.ladder.last().unwrap(), cfg.h);
    Ok(InvadingRun {
        config: cfg.clone(),
        decreasing: center_values.windows(2).all(|w| w[1] < w[0]),
        max_monotonicity_defect: rungs.iter().map(|r| r.monotonicity_defect).fold(0.0, f64::max),
        max_bound_defect: rungs.iter().map(|r| r.bound_defect).fold(0.0, f64::max),
        limit_estimate: limit_estimate(&center_values),
        center_values,
        rungs,
        far_field,
        solutions,
    })
}

/// `max (next − prev)₊` over the nodes of `prev`.
fn monotonicity_defect(prev: &GridField, next: &GridField) -> f64 {
    let n = prev.domain.dim();
    let h = prev.domain.spacing();
    let mut idx = vec![0i64; n];
    let mut x = vec![0.0; n];
    let mut worst = 0.0f64;
    for (lin, &p) in prev.values.iter().enumerate() {
        prev.domain.unravel(lin, &mut idx);
        prev.domain.coord(&idx, &h, &mut x);
        if let Some(q) = next.at(&x) {
            worst = worst.max(q - p);
        }
    }
    worst
}

/// Extrapolated limit of a sequence whose differences shrink geometrically.
pub fn limit_estimate(c: &[f64]) -> Option<f64> {
    match c.len() {
        0 => None,
        1 | 2 => c.last().copied(),
        k => {
            let (c0, c1, c2) = (c[k - 3], c[k - 2], c[k - 1]);
            let (d1, d2) = (c0 - c1, c1 - c2);
            if d1 == 0.0 {
                return Some(c2);
            }
            let r = d2 / d1;
            (0.0..1.0).contains(&r).then(|| c2 - d2 * r / (1.0 - r))
        }
    }
}

fn far_field(field: &GridField, j: f64, h: f64) -> Vec<RingValue> {
    let d = &field.domain;
    let n = d.dim();
    let hs = d.spacing();
    let radii: Vec<f64> = [0.125, 0.25, 0.375, 0.5].iter().map(|f| f * j).collect();
    let mut acc: Vec<(usize, f64, f64)> = vec![(0, f64::INFINITY, 0.0); radii.len()];
    let mut idx = vec![0i64; n];
    let mut x = vec![0.0; n];
    for (lin, &v) in field.values.iter().enumerate() {
        d.unravel(lin, &mut idx);
        d.coord(&idx, &hs, &mut x);
        if x[n - 1].abs() > 1e-12 {
            continue;
        }
        let rho = x[..n - 1].iter().map(|a| a * a).sum::<f64>().sqrt();
        for (k, &r) in radii.iter().enumerate() {
            if (rho - r).abs() <= 0.5 * h {
                acc[k].0 += 1;
                acc[k].1 = acc[k].1.min(v);
                acc[k].2 += v;
            }
        }
    }
    radii
        .iter()
        .zip(acc)
        .map(|(&radius, (nodes, min, sum))| RingValue {
            radius,
            nodes,
            min,
            mean: if nodes > 0 { sum / nodes as f64 } else { f64::NAN },
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aitken_on_geometric_sequence() {
        let c: Vec<f64> = (0..3).map(|k| 0.3 + 0.5 * 0.4f64.powi(k)).collect();
        assert!((limit_estimate(&c).unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(limit_estimate(&[1.0, 0.5, 0.5]), Some(0.5));
        assert_eq!(limit_estimate(&[1.0, 0.9, 0.7]), None);
    }

    #[test]
    fn small_grushin_ladder_is_monotone() {
        let cfg = InvadingConfig {
            preset: "grushin".into(),
            alpha: 3.0,
            ladder: vec![1.0, 2.0, 4.0],
            h: 0.25,
            ..InvadingConfig::default()
        };
        let run = invading_run(&cfg).unwrap();
        assert!(run.decreasing);
        assert!(run.max_monotonicity_defect <= 1e-6);
        assert!(run.max_bound_defect <= 1e-8);
        assert_eq!(run.solutions.len(), 3);
    }

    #[test]
    fn rejects_bad_ladders() {
        for ladder in [vec![], vec![2.0, 1.0], vec![1.1]] {
            let cfg = InvadingConfig {
                ladder,
                ..InvadingConfig::default()
            };
            assert!(matches!(invading_run(&cfg), Err(PdeError::Config(_))));
        }
    }
}

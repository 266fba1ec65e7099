use crate::geometry::{kaplan_norm, ScalarExpr};
use crate::hoermander::{grushin, heisenberg, Frame};

use super::CriterionError;

/// `L u = Σ Xᵢ²u + Σ bᵢXᵢu − Q u`.
#[derive(Debug, Clone)]
pub struct OperatorSpec {
    pub frame: Frame,
    pub drift: Vec<ScalarExpr>,
    pub potential: ScalarExpr,
}

impl OperatorSpec {
    pub fn new(frame: Frame, drift: Vec<ScalarExpr>, potential: ScalarExpr) -> Result<Self, CriterionError> {
        if drift.len() != frame.m() {
            return Err(CriterionError::Config(format!(
                "drift has {} components, frame has {} fields",
                drift.len(),
                frame.m()
            )));
        }
        let n = frame.n();
        if let Some(e) = drift.iter().chain([&potential]).find(|e| e.arity() > n) {
            return Err(CriterionError::Config(format!(
                "expression {e} uses more than {n} variables"
            )));
        }
        Ok(Self {
            frame,
            drift,
            potential,
        })
    }

    pub fn without_drift(frame: Frame, potential: ScalarExpr) -> Self {
        let drift = vec![ScalarExpr::constant(0.0); frame.m()];
        Self {
            frame,
            drift,
            potential,
        }
    }

    pub fn has_drift(&self) -> bool {
        self.drift.iter().any(|b| b.as_constant() != Some(0.0))
    }
}

fn rho_squared(m: usize) -> ScalarExpr {
    let mut r = ScalarExpr::var(0).powf(2.0);
    for i in 1..2 * m {
        r = r + ScalarExpr::var(i).powf(2.0);
    }
    r
}

/// `N⁴ = ρ⁴ + 16t²` for the Kaplan norm with `c = 1`; a polynomial.
fn kaplan_fourth(m: usize) -> ScalarExpr {
    rho_squared(m).powf(2.0) + 16.0 * ScalarExpr::var(2 * m).powf(2.0)
}

/// `Q = ρ²(1 + N⁴)^{−(α+2)/4}`, smooth and asymptotic to `|∇_X N|² N^{−α}` (`|∇_X N|² = ρ²/N²`).
pub fn heisenberg_gradient_potential(m: usize, alpha: f64) -> ScalarExpr {
    rho_squared(m) * (1.0 + kaplan_fourth(m)).powf(-(alpha + 2.0) / 4.0)
}

/// `Q = (1 + N⁴)^{−α/4}`.
pub fn heisenberg_radial_potential(m: usize, alpha: f64) -> ScalarExpr {
    (1.0 + kaplan_fourth(m)).powf(-alpha / 4.0)
}

/// Constant `c` with `Q ≥ |∇_X N|² · c·N^{−α}` on `{N > ρ₀}` for [`heisenberg_gradient_potential`].
pub fn heisenberg_gradient_qhat_coeff(alpha: f64, rho0: f64) -> f64 {
    (1.0 + rho0.powi(-4)).powf(-(alpha + 2.0) / 4.0)
}

/// `Q = x₁²(4x₁⁴ + x₂²)/4 · (1 + N⁴)^{−(α+6)/4}`, smooth and asymptotic to `|∇_X N|² N^{−α}`.
pub fn grushin_potential(alpha: f64) -> ScalarExpr {
    let x1 = ScalarExpr::var(0);
    let x2 = ScalarExpr::var(1);
    let n4 = x1.powf(4.0) + x2.powf(2.0);
    x1.powf(2.0) * (4.0 * x1.powf(4.0) + x2.powf(2.0)) / 4.0 * (1.0 + n4).powf(-(alpha + 6.0) / 4.0)
}

pub fn grushin_qhat_coeff(alpha: f64, rho0: f64) -> f64 {
    (1.0 + rho0.powi(-4)).powf(-(alpha + 6.0) / 4.0)
}

/// `(X₁N, …, X_mN, Y₁N, …, Y_mN)` for the Kaplan norm with `c = 1`:
/// `XᵢN = (ρ²xᵢ + 4yᵢt)/N³`, `YᵢN = (ρ²yᵢ − 4xᵢt)/N³`.
pub fn kaplan_horizontal_gradient(m: usize) -> Vec<ScalarExpr> {
    let n3 = kaplan_norm(m, 1.0).expr().powf(3.0);
    kaplan_numerators(m).into_iter().map(|g| g / n3.clone()).collect()
}

/// Polynomial numerators `N³ XᵢN`.
fn kaplan_numerators(m: usize) -> Vec<ScalarExpr> {
    let rho2 = rho_squared(m);
    let t = ScalarExpr::var(2 * m);
    let mut out = Vec::with_capacity(2 * m);
    for i in 0..m {
        let (x, y) = (ScalarExpr::var(i), ScalarExpr::var(m + i));
        out.push(&rho2 * &x + 4.0 * (y * t.clone()));
    }
    for i in 0..m {
        let (x, y) = (ScalarExpr::var(i), ScalarExpr::var(m + i));
        out.push(&rho2 * &y - 4.0 * (x * t.clone()));
    }
    out
}

/// Heisenberg operator with drift `b = ψ(N)·N^{−β}∇_X N` and
/// `Q = (1 + ρ²(1+N⁴)^{−1/2})(1 + N⁴)^{−α/4}`.
///
/// `ψ` rises smoothly from 0 at `N = window.0` to 1 at `N = window.1`, so `b ≡ 0`
/// on `{N ≤ window.0}` and `b = N^{−β}∇_X N` on `{N ≥ window.1}`.
pub fn heisenberg_with_drift(m: usize, alpha: f64, beta: f64, window: (f64, f64)) -> OperatorSpec {
    let (lo, hi) = window;
    assert!(lo >= 1.0 && hi > lo);
    let n = kaplan_norm(m, 1.0).expr().clone();
    let n4 = kaplan_fourth(m);
    let cutoff = ((n.clone() - lo) / (hi - lo)).step();
    // max(N, 1) agrees with N on the support of the cutoff and keeps the origin finite.
    let n_clamped = (n.clone() + 1.0 + (n - 1.0).abs()) / 2.0;
    let scale = cutoff * n_clamped.powf(-beta - 3.0);
    let drift = kaplan_numerators(m).into_iter().map(|g| &scale * &g).collect();
    let grad_sq = rho_squared(m) * (1.0 + n4.clone()).powf(-0.5);
    let q = (1.0 + grad_sq) * (1.0 + n4).powf(-alpha / 4.0);
    OperatorSpec::new(heisenberg(m), drift, q).expect("consistent drift preset")
}

/// Default transition window for [`heisenberg_with_drift`] with `ρ₀ = 2`.
pub const DRIFT_WINDOW: (f64, f64) = (2.0, 4.0);

pub fn heisenberg_spec(m: usize, alpha: f64) -> OperatorSpec {
    OperatorSpec::without_drift(heisenberg(m), heisenberg_gradient_potential(m, alpha))
}

pub fn grushin_spec(alpha: f64) -> OperatorSpec {
    OperatorSpec::without_drift(grushin(), grushin_potential(alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{grushin_norm, horizontal_gradient};

    #[test]
    fn explicit_gradient_matches_automatic() {
        for m in 1..=2 {
            let frame = heisenberg(m);
            let norm = kaplan_norm(m, 1.0);
            let exprs = kaplan_horizontal_gradient(m);
            let x: Vec<f64> = (0..2 * m + 1)
                .map(|i| 0.3 + 0.4 * i as f64 * if i % 2 == 0 { 1.0 } else { -1.0 })
                .collect();
            let auto = horizontal_gradient(&frame, norm.expr(), &x).unwrap();
            for (e, a) in exprs.iter().zip(auto) {
                assert!((e.eval(&x).unwrap() - a).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn potentials_dominate_weighted_tail() {
        let alpha = 1.5;
        let c = heisenberg_gradient_qhat_coeff(alpha, 1.0);
        let h = heisenberg(1);
        let norm = kaplan_norm(1, 1.0);
        let q = heisenberg_gradient_potential(1, alpha);
        for x in [[1.0, 0.5, 0.3], [3.0, -2.0, 7.0], [0.1, 0.0, 4.0]] {
            let nv = norm.value(&x).unwrap();
            if nv <= 1.0 {
                continue;
            }
            let g: f64 = horizontal_gradient(&h, norm.expr(), &x)
                .unwrap()
                .iter()
                .map(|v| v * v)
                .sum();
            assert!(q.eval(&x).unwrap() >= g * c * nv.powf(-alpha) * (1.0 - 1e-12));
        }
        let cg = grushin_qhat_coeff(alpha, 1.0);
        let qg = grushin_potential(alpha);
        let gn = grushin_norm();
        for x in [[1.2, 0.4], [0.3, 3.0], [-2.0, -5.0]] {
            let nv = gn.value(&x).unwrap();
            let g: f64 = horizontal_gradient(&grushin(), gn.expr(), &x)
                .unwrap()
                .iter()
                .map(|v| v * v)
                .sum();
            assert!(qg.eval(&x).unwrap() >= g * cg * nv.powf(-alpha) * (1.0 - 1e-12));
        }
    }

    #[test]
    fn drift_vanishes_inside_window() {
        let spec = heisenberg_with_drift(1, 1.5, 1.0, DRIFT_WINDOW);
        assert!(spec.has_drift());
        // N(1, 0, 0) = 1 < 2
        for x in [[1.0, 0.0, 0.0], [0.0, 0.0, 0.0]] {
            for b in &spec.drift {
                assert_eq!(b.eval(&x).unwrap(), 0.0);
            }
        }
        // N(5, 0, 0) = 5 > 4: b = N^{-β} ∇_X N = (1/5)(1, 0)
        let b0 = spec.drift[0].eval(&[5.0, 0.0, 0.0]).unwrap();
        assert!((b0 - 0.2).abs() < 1e-14);
    }

    #[test]
    fn drift_length_validated() {
        let e = OperatorSpec::new(heisenberg(1), vec![], ScalarExpr::constant(0.0));
        assert!(e.is_err());
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::assemble::{DiscreteOperator, MMatrixReport};
use super::solve::{solve_dirichlet, SolverConfig};

/// Largest admissible value of a solution with nonpositive data.
pub const WMP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WmpReport {
    pub passes: bool,
    pub trials: usize,
    pub m_matrix: MMatrixReport,
    /// Largest nodal value over all trials.
    pub max_value: f64,
    pub worst_trial: usize,
    pub solver_failures: usize,
}

/// Discrete weak maximum principle: `u ≤ 0` whenever `L_h u = f ≥ 0` and `u ≤ 0` on
/// the Dirichlet nodes.
///
/// Trials cycle through random Dirichlet data with `f = 0`, sparse random `f` with
/// random data, and a unit point source with zero data.
pub fn wmp_test(op: &DiscreteOperator, trials: usize, seed: u64, solver: &SolverConfig) -> WmpReport {
    let n = op.num_unknowns();
    let nd = op.num_dirichlet();
    let mut max_value = f64::NEG_INFINITY;
    let mut worst_trial = 0;
    let mut solver_failures = 0;
    for k in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let (g, f): (Vec<f64>, Vec<f64>) = match k % 3 {
            0 => ((0..nd).map(|_| -rng.gen::<f64>()).collect(), vec![0.0; n]),
            1 => (
                (0..nd)
                    .map(|_| if rng.gen_bool(0.5) { -rng.gen::<f64>() } else { 0.0 })
                    .collect(),
                (0..n)
                    .map(|_| if rng.gen_bool(0.1) { rng.gen::<f64>() } else { 0.0 })
                    .collect(),
            ),
            _ => {
                let mut f = vec![0.0; n];
                f[rng.gen_range(0..n)] = 1.0;
                (vec![0.0; nd], f)
            }
        };
        match solve_dirichlet(op, &g, &f, solver, None) {
            Ok((u, _)) => {
                let m = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if m > max_value {
                    max_value = m;
                    worst_trial = k;
                }
            }
            Err(_) => solver_failures += 1,
        }
    }
    let m_matrix = op.m_matrix_report();
    WmpReport {
        passes: m_matrix.ok && solver_failures == 0 && max_value <= WMP_TOL,
        trials,
        m_matrix,
        max_value,
        worst_trial,
        solver_failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criterion::OperatorSpec;
    use crate::fields::DilationWeights;
    use crate::geometry::ScalarExpr;
    use crate::hoermander::Frame;
    use crate::pde::{assemble, BoxDomain, SchemeConfig};

    fn planar_laplacian(q: f64) -> DiscreteOperator {
        let frame = Frame::new(
            vec![
                crate::fields::PolyVectorField::partial(2, 0),
                crate::fields::PolyVectorField::partial(2, 1),
            ],
            DilationWeights::isotropic(2),
        )
        .unwrap();
        let spec = OperatorSpec::without_drift(frame, ScalarExpr::constant(q));
        let dom = BoxDomain::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![32, 2]).unwrap();
        assemble(&spec, &dom, &SchemeConfig::default()).unwrap()
    }

    #[test]
    fn classical_toy_passes() {
        let r = wmp_test(&planar_laplacian(0.0), 6, 1, &SolverConfig::default());
        assert!(r.passes, "{r:?}");
    }

    #[test]
    fn flipped_row_fails() {
        let mut op = planar_laplacian(0.5);
        assert!(op.flip_off_diagonal(15));
        let r = wmp_test(&op, 6, 1, &SolverConfig::default());
        assert!(!r.passes);
        assert!(r.max_value > WMP_TOL || !r.m_matrix.ok);
    }
}

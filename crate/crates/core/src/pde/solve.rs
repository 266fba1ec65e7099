use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::assemble::DiscreteOperator;
use super::sparse::CsrMatrix;
use super::PdeError;

const CHUNK: usize = 8192;
const DIRECT_MAX: usize = 3000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Dense LU for small systems, otherwise BiCGSTAB with Gauss–Seidel fallback.
    Auto,
    BiCgStab,
    GaussSeidel,
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub method: Method,
    pub max_iterations: usize,
    /// Target `‖L_h u − f‖∞ ≤ tol · (1 + ‖f‖∞ + ‖g‖∞)`.
    pub tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::Auto,
            max_iterations: 100_000,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: Method,
    pub iterations: usize,
    pub residual: f64,
    pub target: f64,
}

/// Solves `L_h u = f` at the unknowns with Dirichlet values `g`.
pub fn solve_dirichlet(
    op: &DiscreteOperator,
    dirichlet: &[f64],
    rhs: &[f64],
    cfg: &SolverConfig,
    initial: Option<&[f64]>,
) -> Result<(Vec<f64>, SolveReport), PdeError> {
    let n = op.num_unknowns();
    check_len(n, rhs.len())?;
    check_len(op.num_dirichlet(), dirichlet.len())?;
    if let Some(x0) = initial {
        check_len(n, x0.len())?;
    }
    if !(cfg.tol > 0.0) {
        return Err(PdeError::Config("solver tolerance must be positive".into()));
    }
    let mut b = vec![0.0; n];
    op.coupling().mul_vec(dirichlet, &mut b);
    par_axpy(-1.0, rhs, &mut b);
    let target = cfg.tol * (1.0 + norm_inf(rhs) + norm_inf(dirichlet));
    let a = op.matrix();
    let mut x = initial.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);

    let method = match cfg.method {
        Method::Auto if n <= DIRECT_MAX => Method::Direct,
        Method::Auto => Method::BiCgStab,
        m => m,
    };
    let iterations = match method {
        Method::Direct => {
            x = direct(a, &b)?;
            1
        }
        Method::GaussSeidel => gauss_seidel(a, &b, &mut x, target, cfg.max_iterations)?,
        Method::BiCgStab | Method::Auto => match bicgstab(a, &b, &mut x, target, cfg.max_iterations) {
            Ok(it) => it,
            Err(_) if cfg.method == Method::Auto => gauss_seidel(a, &b, &mut x, target, cfg.max_iterations)?,
            Err(e) => return Err(e),
        },
    };
    let residual = residual_inf(a, &b, &x);
    if !(residual <= target) {
        return Err(PdeError::Solver {
            iterations,
            residual,
            target,
        });
    }
    Ok((
        x,
        SolveReport {
            method,
            iterations,
            residual,
            target,
        },
    ))
}

fn check_len(expected: usize, found: usize) -> Result<(), PdeError> {
    if expected != found {
        return Err(PdeError::Dimension { expected, found });
    }
    Ok(())
}

fn norm_inf(v: &[f64]) -> f64 {
    v.par_iter().map(|x| x.abs()).reduce(|| 0.0, f64::max)
}

/// Chunked dot product with a fixed summation order.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let parts: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(p, q)| p.iter().zip(q).map(|(x, y)| x * y).sum())
        .collect();
    parts.iter().sum()
}

fn par_axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.par_iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

fn residual_inf(a: &CsrMatrix, b: &[f64], x: &[f64]) -> f64 {
    let mut r = b.to_vec();
    a.mul_vec_add(-1.0, x, &mut r);
    if r.iter().any(|v| !v.is_finite()) {
        return f64::INFINITY;
    }
    norm_inf(&r)
}

fn direct(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>, PdeError> {
    let lu = a.to_dense().lu();
    let rhs = nalgebra::DVector::from_column_slice(b);
    lu.solve(&rhs).map(|v| v.as_slice().to_vec()).ok_or(PdeError::Solver {
        iterations: 0,
        residual: f64::INFINITY,
        target: 0.0,
    })
}

/// Symmetric Gauss–Seidel sweeps; each iteration is one forward and one backward sweep.
fn gauss_seidel(a: &CsrMatrix, b: &[f64], x: &mut [f64], target: f64, max_it: usize) -> Result<usize, PdeError> {
    let diag = a.diagonal();
    let relax = |i: usize, x: &mut [f64]| {
        let (cols, vals) = a.row(i);
        let mut s = b[i];
        for (&c, &v) in cols.iter().zip(vals) {
            if c as usize != i {
                s -= v * x[c as usize];
            }
        }
        x[i] = s / diag[i];
    };
    let mut residual = f64::INFINITY;
    for it in 1..=max_it {
        for i in 0..a.nrows {
            relax(i, x);
        }
        for i in (0..a.nrows).rev() {
            relax(i, x);
        }
        if it % 10 == 0 || it == max_it {
            residual = residual_inf(a, b, x);
            if residual <= target {
                return Ok(it);
            }
        }
    }
    Err(PdeError::Solver {
        iterations: max_it,
        residual,
        target,
    })
}

/// Jacobi-preconditioned BiCGSTAB, restarted when the recurrence drifts from the true residual.
fn bicgstab(a: &CsrMatrix, b: &[f64], x: &mut [f64], target: f64, max_it: usize) -> Result<usize, PdeError> {
    let n = a.nrows;
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|d| 1.0 / d).collect();
    let precond = |src: &[f64], dst: &mut [f64]| {
        dst.par_iter_mut()
            .zip(src.par_iter().zip(&inv_diag))
            .for_each(|(d, (s, m))| *d = s * m);
    };
    let mut r = vec![0.0; n];
    let mut r_hat = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut it = 0usize;
    let mut residual = f64::INFINITY;
    let mut restarts = 0;

    'outer: while it < max_it && restarts < 50 {
        r.copy_from_slice(b);
        a.mul_vec_add(-1.0, x, &mut r);
        residual = norm_inf(&r);
        if residual <= target {
            return Ok(it);
        }
        r_hat.copy_from_slice(&r);
        p.iter_mut().for_each(|e| *e = 0.0);
        v.iter_mut().for_each(|e| *e = 0.0);
        let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
        restarts += 1;
        while it < max_it {
            it += 1;
            let rho_new = dot(&r_hat, &r);
            if rho_new == 0.0 || !rho_new.is_finite() {
                continue 'outer;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            p.par_iter_mut()
                .zip(r.par_iter().zip(&v))
                .for_each(|(pi, (ri, vi))| *pi = ri + beta * (*pi - omega * vi));
            precond(&p, &mut y);
            a.mul_vec(&y, &mut v);
            let denom = dot(&r_hat, &v);
            if denom == 0.0 || !denom.is_finite() {
                continue 'outer;
            }
            alpha = rho / denom;
            s.par_iter_mut()
                .zip(r.par_iter().zip(&v))
                .for_each(|(si, (ri, vi))| *si = ri - alpha * vi);
            par_axpy(alpha, &y, x);
            if norm_inf(&s) <= 0.5 * target {
                let true_res = residual_inf(a, b, x);
                if true_res <= target {
                    return Ok(it);
                }
                continue 'outer;
            }
            precond(&s, &mut z);
            a.mul_vec(&z, &mut t);
            let tt = dot(&t, &t);
            if tt == 0.0 {
                continue 'outer;
            }
            omega = dot(&t, &s) / tt;
            par_axpy(omega, &z, x);
            r.par_iter_mut()
                .zip(s.par_iter().zip(&t))
                .for_each(|(ri, (si, ti))| *ri = si - omega * ti);
            residual = norm_inf(&r);
            if residual <= 0.5 * target {
                let true_res = residual_inf(a, b, x);
                if true_res <= target {
                    return Ok(it);
                }
                continue 'outer;
            }
            if omega == 0.0 || !residual.is_finite() {
                continue 'outer;
            }
        }
    }
    Err(PdeError::Solver {
        iterations: it,
        residual,
        target,
    })
}

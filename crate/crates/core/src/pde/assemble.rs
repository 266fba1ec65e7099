use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criterion::OperatorSpec;
use crate::geometry::{HorizontalOps, Tape, TapeBuf, MAX_DIM};

use super::grid::{BoxDomain, GridField};
use super::sparse::{CsrBuilder, CsrMatrix};
use super::PdeError;

const DIRICHLET: u32 = 1 << 31;
const ROWS_PER_TASK: usize = 4096;
const SNAP: f64 = 1e-12;

/// Directional step `h_d = factor · min(h)^power`; the default `h_d = min(h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeConfig {
    pub dir_step_factor: f64,
    pub dir_step_power: f64,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            dir_step_factor: 1.0,
            dir_step_power: 1.0,
        }
    }
}

impl SchemeConfig {
    pub fn dir_step(&self, h_min: f64) -> f64 {
        self.dir_step_factor * h_min.powf(self.dir_step_power)
    }

    fn validate(&self) -> Result<(), PdeError> {
        if !(self.dir_step_factor > 0.0 && self.dir_step_power > 0.0) {
            return Err(PdeError::Config(
                "directional step factor and power must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// `A u = B g − f` discretizes `L u = f` with Dirichlet data `g`.
///
/// Unknowns are the interior box nodes in row-major order. Dirichlet nodes are the
/// box faces plus a ghost halo outside the box wide enough for every directional
/// stencil; `g` is sampled there from the boundary function.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    domain: BoxDomain,
    halo: Vec<usize>,
    h_dir: f64,
    scheme: SchemeConfig,
    a: CsrMatrix,
    b: CsrMatrix,
    dirichlet: Vec<u32>,
    potential: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MMatrixReport {
    pub ok: bool,
    pub rows: usize,
    pub min_diagonal: f64,
    pub max_off_diagonal: f64,
    /// `min (diag − Σ|off|) / diag` over rows.
    pub min_relative_margin: f64,
    pub worst_row: usize,
}

struct Layout {
    ext_dims: Vec<usize>,
    ext_strides: Vec<usize>,
    halo: Vec<usize>,
    ext_id: Vec<u32>,
    dirichlet: Vec<u32>,
}

impl Layout {
    fn new(domain: &BoxDomain, halo: Vec<usize>) -> Self {
        let n = domain.dim();
        let ext_dims: Vec<usize> = (0..n).map(|k| domain.cells[k] + 1 + 2 * halo[k]).collect();
        let mut ext_strides = vec![1; n];
        for k in (0..n.saturating_sub(1)).rev() {
            ext_strides[k] = ext_strides[k + 1] * ext_dims[k + 1];
        }
        let total: usize = ext_dims.iter().product();
        let inner: Vec<usize> = domain.cells.iter().map(|c| c - 1).collect();
        let mut ext_id = vec![0u32; total];
        let mut dirichlet = Vec::new();
        let mut e = vec![0usize; n];
        for (lin, slot) in ext_id.iter_mut().enumerate() {
            let mut r = lin;
            for k in (0..n).rev() {
                e[k] = r % ext_dims[k];
                r /= ext_dims[k];
            }
            let interior = (0..n).all(|k| e[k] > halo[k] && e[k] < halo[k] + domain.cells[k]);
            if interior {
                let mut id = 0usize;
                for k in 0..n {
                    id = id * inner[k] + (e[k] - halo[k] - 1);
                }
                *slot = id as u32;
            } else {
                *slot = DIRICHLET | dirichlet.len() as u32;
                dirichlet.push(lin as u32);
            }
        }
        Self {
            ext_dims,
            ext_strides,
            halo,
            ext_id,
            dirichlet,
        }
    }
}

/// Box index of unknown `id`.
fn unknown_index(domain: &BoxDomain, mut id: usize, out: &mut [i64]) {
    for k in (0..domain.dim()).rev() {
        let w = domain.cells[k] - 1;
        out[k] = (id % w) as i64 + 1;
        id /= w;
    }
}

struct Compiled {
    ops: HorizontalOps,
    drift: Vec<Tape>,
    potential: Tape,
}

impl Compiled {
    fn new(spec: &OperatorSpec) -> Result<Self, PdeError> {
        let n = spec.frame.n();
        let compile = |e| Tape::compile(e, n).map_err(|source| PdeError::Eval { x: vec![], source });
        Ok(Self {
            ops: HorizontalOps::new(&spec.frame),
            drift: spec.drift.iter().map(compile).collect::<Result<_, _>>()?,
            potential: compile(&spec.potential)?,
        })
    }
}

fn max_shift(domain: &BoxDomain, ops: &HorizontalOps, h_dir: f64) -> Vec<f64> {
    let n = domain.dim();
    let m = ops.m();
    let h = domain.spacing();
    (0..domain.num_interior())
        .into_par_iter()
        .fold(
            || vec![0.0f64; n],
            |mut acc, id| {
                let mut idx = [0i64; MAX_DIM];
                let mut x = [0.0; MAX_DIM];
                let mut a = vec![0.0; m * n];
                unknown_index(domain, id, &mut idx[..n]);
                domain.coord(&idx[..n], &h, &mut x[..n]);
                ops.coefficients_into(&x[..n], &mut a);
                for i in 0..m {
                    for k in 0..n {
                        acc[k] = acc[k].max((h_dir * a[i * n + k] / h[k]).abs());
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0.0; n],
            |a, b| a.iter().zip(&b).map(|(p, q)| p.max(*q)).collect(),
        )
}

/// Monotone discretization of `L` on the box.
///
/// Each `Xᵢ²u` becomes a second difference along `vᵢ(x)` with step `h_d`, off-grid
/// values interpolated multilinearly, plus the upwinded correction `(Xᵢvᵢ)·∇u`.
/// The drift `Σ bᵢvᵢ·∇u` is upwinded as well.
pub fn assemble(spec: &OperatorSpec, domain: &BoxDomain, scheme: &SchemeConfig) -> Result<DiscreteOperator, PdeError> {
    scheme.validate()?;
    let n = domain.dim();
    if spec.frame.n() != n {
        return Err(PdeError::Dimension {
            expected: spec.frame.n(),
            found: n,
        });
    }
    if n > MAX_DIM {
        return Err(PdeError::Domain(format!("dimension {n} exceeds {MAX_DIM}")));
    }
    let h = domain.spacing();
    let h_dir = scheme.dir_step(h.iter().copied().fold(f64::INFINITY, f64::min));
    let compiled = Compiled::new(spec)?;

    let shifts = max_shift(domain, &compiled.ops, h_dir);
    let mut halo = Vec::with_capacity(n);
    for (k, &s) in shifts.iter().enumerate() {
        let g = ((s - SNAP).ceil() as i64 - 1).max(0) as usize;
        if g > domain.cells[k] {
            return Err(PdeError::StepExceedsBox {
                axis: k,
                reach: s,
                cells: domain.cells[k],
            });
        }
        halo.push(g);
    }
    let layout = Layout::new(domain, halo);

    let nint = domain.num_interior();
    let ndir = layout.dirichlet.len();
    let tasks: Vec<usize> = (0..nint.div_ceil(ROWS_PER_TASK)).collect();
    let parts = tasks
        .into_par_iter()
        .map(|t| {
            let lo = t * ROWS_PER_TASK;
            let hi = (lo + ROWS_PER_TASK).min(nint);
            assemble_rows(domain, &layout, &compiled, h_dir, lo..hi, ndir)
        })
        .collect::<Result<Vec<_>, PdeError>>()?;

    let mut a = CsrBuilder::new(nint);
    let mut b = CsrBuilder::new(ndir);
    let mut potential = Vec::with_capacity(nint);
    for (pa, pb, q) in parts {
        a.append(pa);
        b.append(pb);
        potential.extend(q);
    }
    Ok(DiscreteOperator {
        domain: domain.clone(),
        halo: layout.halo,
        h_dir,
        scheme: *scheme,
        a: a.finish(),
        b: b.finish(),
        dirichlet: layout.dirichlet,
        potential,
    })
}

fn assemble_rows(
    domain: &BoxDomain,
    layout: &Layout,
    c: &Compiled,
    h_dir: f64,
    rows: std::ops::Range<usize>,
    ndir: usize,
) -> Result<(CsrBuilder, CsrBuilder, Vec<f64>), PdeError> {
    let n = domain.dim();
    let m = c.ops.m();
    let h = domain.spacing();
    let inv_hd2 = 1.0 / (h_dir * h_dir);
    let mut pa = CsrBuilder::new(domain.num_interior());
    let mut pb = CsrBuilder::new(ndir);
    let mut qs = Vec::with_capacity(rows.len());

    let mut buf = TapeBuf::default();
    let mut idx = [0i64; MAX_DIM];
    let mut x = [0.0; MAX_DIM];
    let mut coef = vec![0.0; m * n];
    let mut corr = vec![0.0; m * n];
    let mut entries: Vec<(usize, f64)> = Vec::with_capacity(64);
    let mut row_a: Vec<(u32, f64)> = Vec::with_capacity(64);
    let mut row_b: Vec<(u32, f64)> = Vec::with_capacity(16);

    for id in rows {
        unknown_index(domain, id, &mut idx[..n]);
        domain.coord(&idx[..n], &h, &mut x[..n]);
        let xs = &x[..n];
        let eval_err = |source| PdeError::Eval { x: xs.to_vec(), source };
        c.ops.coefficients_into(xs, &mut coef);
        c.ops.corrections_into(xs, &mut corr);
        let q = c.potential.value_with(xs, &mut buf).map_err(eval_err)?;
        if q < -1e-12 {
            return Err(PdeError::NegativePotential {
                x: xs.to_vec(),
                value: q,
            });
        }
        let q = q.max(0.0);

        let mut e = [0usize; MAX_DIM];
        for k in 0..n {
            e[k] = (idx[k] as usize) + layout.halo[k];
        }
        let center: usize = (0..n).map(|k| e[k] * layout.ext_strides[k]).sum();
        entries.clear();
        let mut center_coef = -q;

        let mut drift = [0.0; MAX_DIM];
        for i in 0..m {
            let v = &coef[i * n..(i + 1) * n];
            let bi = c.drift[i].value_with(xs, &mut buf).map_err(eval_err)?;
            for k in 0..n {
                drift[k] += corr[i * n + k] + bi * v[k];
            }
            if v.iter().all(|&vk| vk == 0.0) {
                continue;
            }
            center_coef -= 2.0 * inv_hd2;
            for sign in [1.0, -1.0] {
                push_interpolated(layout, &e[..n], v, sign * h_dir, &h, inv_hd2, &mut entries);
            }
        }
        for k in 0..n {
            let d = drift[k] / h[k];
            if d == 0.0 {
                continue;
            }
            let nb = if d > 0.0 {
                center + layout.ext_strides[k]
            } else {
                center - layout.ext_strides[k]
            };
            entries.push((nb, d.abs()));
            center_coef -= d.abs();
        }

        row_a.clear();
        row_b.clear();
        for &(ext, w) in &entries {
            if ext == center {
                center_coef += w;
                continue;
            }
            let tag = layout.ext_id[ext];
            if tag & DIRICHLET != 0 {
                row_b.push((tag & !DIRICHLET, w));
            } else {
                row_a.push((tag, -w));
            }
        }
        row_a.push((id as u32, -center_coef));
        pa.push_row(&mut row_a);
        pb.push_row(&mut row_b);
        qs.push(q);
    }
    Ok((pa, pb, qs))
}

/// Adds `w/h_d²` times the multilinear interpolation weights of `e + step·v/h`.
fn push_interpolated(
    layout: &Layout,
    e: &[usize],
    v: &[f64],
    step: f64,
    h: &[f64],
    w: f64,
    out: &mut Vec<(usize, f64)>,
) {
    let n = e.len();
    let mut base = 0usize;
    let mut frac_axes = [0usize; MAX_DIM];
    let mut theta = [0.0; MAX_DIM];
    let mut nf = 0;
    for k in 0..n {
        let p = e[k] as f64 + step * v[k] / h[k];
        let mut b = p.floor();
        let mut t = p - b;
        if t < SNAP {
            t = 0.0;
        } else if t > 1.0 - SNAP {
            b += 1.0;
            t = 0.0;
        }
        debug_assert!(b >= 0.0 && (b as usize) < layout.ext_dims[k]);
        base += b as usize * layout.ext_strides[k];
        if t > 0.0 {
            frac_axes[nf] = k;
            theta[nf] = t;
            nf += 1;
        }
    }
    for mask in 0..(1usize << nf) {
        let mut weight = w;
        let mut lin = base;
        for j in 0..nf {
            if mask >> j & 1 == 1 {
                weight *= theta[j];
                lin += layout.ext_strides[frac_axes[j]];
            } else {
                weight *= 1.0 - theta[j];
            }
        }
        out.push((lin, weight));
    }
}

impl DiscreteOperator {
    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn halo(&self) -> &[usize] {
        &self.halo
    }

    pub fn dir_step(&self) -> f64 {
        self.h_dir
    }

    pub fn scheme(&self) -> &SchemeConfig {
        &self.scheme
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.a
    }

    pub fn coupling(&self) -> &CsrMatrix {
        &self.b
    }

    pub fn num_unknowns(&self) -> usize {
        self.a.nrows
    }

    pub fn num_dirichlet(&self) -> usize {
        self.dirichlet.len()
    }

    /// `Q` at each unknown.
    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn unknown_index(&self, id: usize, out: &mut [i64]) {
        unknown_index(&self.domain, id, out)
    }

    /// Unknown number of a box node, if interior.
    pub fn unknown_of(&self, idx: &[i64]) -> Option<usize> {
        if !self.domain.is_interior(idx) {
            return None;
        }
        let mut id = 0usize;
        for (k, &i) in idx.iter().enumerate() {
            id = id * (self.domain.cells[k] - 1) + (i as usize - 1);
        }
        Some(id)
    }

    pub fn unknown_coords(&self, id: usize, out: &mut [f64]) {
        let n = self.domain.dim();
        let mut idx = [0i64; MAX_DIM];
        unknown_index(&self.domain, id, &mut idx[..n]);
        self.domain.coord(&idx[..n], &self.domain.spacing(), out);
    }

    /// Box index (possibly outside `[0, cells]`) of Dirichlet node `d`.
    pub fn dirichlet_index(&self, d: usize, out: &mut [i64]) {
        let n = self.domain.dim();
        let mut r = self.dirichlet[d] as usize;
        for k in (0..n).rev() {
            let dim = self.domain.cells[k] + 1 + 2 * self.halo[k];
            out[k] = (r % dim) as i64 - self.halo[k] as i64;
            r /= dim;
        }
    }

    pub fn dirichlet_coords(&self, d: usize, out: &mut [f64]) {
        let n = self.domain.dim();
        let mut idx = [0i64; MAX_DIM];
        self.dirichlet_index(d, &mut idx[..n]);
        self.domain.coord(&idx[..n], &self.domain.spacing(), out);
    }

    pub fn interior_values(&self, f: impl Fn(&[f64]) -> f64 + Sync) -> Vec<f64> {
        let n = self.domain.dim();
        (0..self.num_unknowns())
            .into_par_iter()
            .map(|id| {
                let mut x = [0.0; MAX_DIM];
                self.unknown_coords(id, &mut x[..n]);
                f(&x[..n])
            })
            .collect()
    }

    pub fn dirichlet_values(&self, f: impl Fn(&[f64]) -> f64 + Sync) -> Vec<f64> {
        let n = self.domain.dim();
        (0..self.num_dirichlet())
            .into_par_iter()
            .map(|d| {
                let mut x = [0.0; MAX_DIM];
                self.dirichlet_coords(d, &mut x[..n]);
                f(&x[..n])
            })
            .collect()
    }

    /// `(L_h u)` at the unknowns: `B g − A u`.
    pub fn apply(&self, interior: &[f64], dirichlet: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_unknowns()];
        self.b.mul_vec(dirichlet, &mut out);
        self.a.mul_vec_add(-1.0, interior, &mut out);
        out
    }

    /// `L_h` applied to samples of `f` at all stencil nodes.
    pub fn apply_to_function(&self, f: impl Fn(&[f64]) -> f64 + Sync) -> Vec<f64> {
        self.apply(&self.interior_values(&f), &self.dirichlet_values(&f))
    }

    /// Assembles interior and Dirichlet values into a field over the box nodes.
    pub fn to_grid_field(&self, interior: &[f64], dirichlet: &[f64]) -> GridField {
        let n = self.domain.dim();
        let mut values = vec![0.0; self.domain.num_nodes()];
        let mut idx = [0i64; MAX_DIM];
        for (id, &u) in interior.iter().enumerate() {
            unknown_index(&self.domain, id, &mut idx[..n]);
            values[self.domain.ravel(&idx[..n])] = u;
        }
        for (d, &g) in dirichlet.iter().enumerate() {
            self.dirichlet_index(d, &mut idx[..n]);
            if (0..n).all(|k| idx[k] >= 0 && idx[k] <= self.domain.cells[k] as i64) {
                values[self.domain.ravel(&idx[..n])] = g;
            }
        }
        GridField {
            domain: self.domain.clone(),
            values,
        }
    }

    /// Sign pattern and weak diagonal dominance of `[A | −B]`.
    pub fn m_matrix_report(&self) -> MMatrixReport {
        let mut r = MMatrixReport {
            ok: true,
            rows: self.num_unknowns(),
            min_diagonal: f64::INFINITY,
            max_off_diagonal: f64::NEG_INFINITY,
            min_relative_margin: f64::INFINITY,
            worst_row: 0,
        };
        for i in 0..self.num_unknowns() {
            let (cols, vals) = self.a.row(i);
            let mut diag = 0.0;
            let mut off = 0.0;
            for (&c, &v) in cols.iter().zip(vals) {
                if c as usize == i {
                    diag += v;
                } else {
                    r.max_off_diagonal = r.max_off_diagonal.max(v);
                    off += v.abs();
                }
            }
            let (_, bv) = self.b.row(i);
            for &v in bv {
                r.max_off_diagonal = r.max_off_diagonal.max(-v);
                off += v.abs();
            }
            r.min_diagonal = r.min_diagonal.min(diag);
            let margin = (diag - off) / diag;
            if margin < r.min_relative_margin {
                r.min_relative_margin = margin;
                r.worst_row = i;
            }
        }
        r.ok = r.min_diagonal > 0.0 && r.max_off_diagonal <= 0.0 && r.min_relative_margin >= -1e-12;
        r
    }

    /// Reverses the sign of every off-diagonal coupling in `row`; a deliberately
    /// non-monotone operator for negative controls.
    pub fn flip_off_diagonal(&mut self, row: usize) -> bool {
        let mut flipped = false;
        for p in self.a.row_ptr[row]..self.a.row_ptr[row + 1] {
            if self.a.cols[p] as usize != row && self.a.vals[p] != 0.0 {
                self.a.vals[p] = -self.a.vals[p];
                flipped = true;
            }
        }
        for p in self.b.row_ptr[row]..self.b.row_ptr[row + 1] {
            self.b.vals[p] = -self.b.vals[p];
            flipped = true;
        }
        flipped
    }
}

use rayon::prelude::*;

const ROW_CHUNK: usize = 8192;

/// Compressed sparse rows with 32-bit column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<u32>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn empty(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        c.iter().zip(v).filter(|(&c, _)| c as usize == j).map(|(_, v)| v).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        y.par_chunks_mut(ROW_CHUNK).enumerate().for_each(|(c, ys)| {
            let base = c * ROW_CHUNK;
            for (k, yi) in ys.iter_mut().enumerate() {
                let (a, b) = (self.row_ptr[base + k], self.row_ptr[base + k + 1]);
                let mut s = 0.0;
                for p in a..b {
                    s += self.vals[p] * x[self.cols[p] as usize];
                }
                *yi = s;
            }
        });
    }

    /// `y += alpha · A x`.
    pub fn mul_vec_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        y.par_chunks_mut(ROW_CHUNK).enumerate().for_each(|(c, ys)| {
            let base = c * ROW_CHUNK;
            for (k, yi) in ys.iter_mut().enumerate() {
                let (a, b) = (self.row_ptr[base + k], self.row_ptr[base + k + 1]);
                let mut s = 0.0;
                for p in a..b {
                    s += self.vals[p] * x[self.cols[p] as usize];
                }
                *yi += alpha * s;
            }
        });
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                m[(i, j as usize)] += a;
            }
        }
        m
    }
}

/// Incremental row-by-row construction; duplicate columns within a row are merged.
#[derive(Debug, Default)]
pub(crate) struct CsrBuilder {
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl CsrBuilder {
    pub fn new(ncols: usize) -> Self {
        Self {
            ncols,
            row_ptr: vec![0],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    /// Appends a row from unsorted `(col, val)` pairs; `scratch` is consumed.
    pub fn push_row(&mut self, scratch: &mut Vec<(u32, f64)>) {
        scratch.sort_unstable_by_key(|e| e.0);
        let mut last: Option<u32> = None;
        for &(c, v) in scratch.iter() {
            if last == Some(c) {
                *self.vals.last_mut().unwrap() += v;
            } else {
                self.cols.push(c);
                self.vals.push(v);
                last = Some(c);
            }
        }
        scratch.clear();
        self.row_ptr.push(self.cols.len());
    }

    pub fn append(&mut self, other: CsrBuilder) {
        let off = *self.row_ptr.last().unwrap();
        self.row_ptr.extend(other.row_ptr[1..].iter().map(|p| p + off));
        self.cols.extend(other.cols);
        self.vals.extend(other.vals);
    }

    pub fn finish(self) -> CsrMatrix {
        CsrMatrix {
            nrows: self.row_ptr.len() - 1,
            ncols: self.ncols,
            row_ptr: self.row_ptr,
            cols: self.cols,
            vals: self.vals,
        }
    }
}

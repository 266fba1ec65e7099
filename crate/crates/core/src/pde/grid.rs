use serde::{Deserialize, Serialize};

use super::PdeError;

/// Axis-aligned box `∏ [lo_k, hi_k]` with a uniform tensor grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub cells: Vec<usize>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, cells: Vec<usize>) -> Result<Self, PdeError> {
        if lo.len() != hi.len() || lo.len() != cells.len() || lo.is_empty() {
            return Err(PdeError::Domain("lo, hi and cells must share a positive length".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(PdeError::Domain("need lo < hi componentwise".into()));
        }
        if cells.iter().any(|&c| c < 2) {
            return Err(PdeError::Domain("need at least 2 cells per axis".into()));
        }
        Ok(Self { lo, hi, cells })
    }

    /// `(−j, j)ⁿ` with spacing `h` (rounded so that `2j/h` is an integer).
    pub fn cube(n: usize, j: f64, h: f64) -> Result<Self, PdeError> {
        let c = (2.0 * j / h).round() as usize;
        Self::new(vec![-j; n], vec![j; n], vec![c; n])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn spacing(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|k| (self.hi[k] - self.lo[k]) / self.cells[k] as f64)
            .collect()
    }

    /// Nodes per axis, including both faces.
    pub fn nodes_per_axis(&self) -> Vec<usize> {
        self.cells.iter().map(|c| c + 1).collect()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes_per_axis().iter().product()
    }

    pub fn num_interior(&self) -> usize {
        self.cells.iter().map(|c| c - 1).product()
    }

    /// Row-major multi-index of node `lin` (last axis fastest).
    pub fn unravel(&self, mut lin: usize, out: &mut [i64]) {
        for k in (0..self.dim()).rev() {
            let np = self.cells[k] + 1;
            out[k] = (lin % np) as i64;
            lin /= np;
        }
    }

    pub fn ravel(&self, idx: &[i64]) -> usize {
        let mut lin = 0usize;
        for (c, &i) in self.cells.iter().zip(idx) {
            lin = lin * (c + 1) + i as usize;
        }
        lin
    }

    pub fn coord(&self, idx: &[i64], h: &[f64], out: &mut [f64]) {
        for k in 0..self.dim() {
            out[k] = self.lo[k] + idx[k] as f64 * h[k];
        }
    }

    pub fn is_interior(&self, idx: &[i64]) -> bool {
        idx.iter().zip(&self.cells).all(|(&i, &c)| i >= 1 && i < c as i64)
    }

    /// Node index of the point `x` if it lies exactly on the grid.
    pub fn node_at(&self, x: &[f64]) -> Option<Vec<i64>> {
        let h = self.spacing();
        let mut idx = Vec::with_capacity(self.dim());
        for k in 0..self.dim() {
            let f = (x[k] - self.lo[k]) / h[k];
            let r = f.round();
            if (f - r).abs() > 1e-9 || r < 0.0 || r > self.cells[k] as f64 {
                return None;
            }
            idx.push(r as i64);
        }
        Some(idx)
    }
}

/// `values[lin]` for every node of the box, boundary included.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub domain: BoxDomain,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn from_fn(domain: &BoxDomain, f: impl Fn(&[f64]) -> f64) -> Self {
        let n = domain.dim();
        let h = domain.spacing();
        let mut idx = vec![0i64; n];
        let mut x = vec![0.0; n];
        let values = (0..domain.num_nodes())
            .map(|lin| {
                domain.unravel(lin, &mut idx);
                domain.coord(&idx, &h, &mut x);
                f(&x)
            })
            .collect();
        Self {
            domain: domain.clone(),
            values,
        }
    }

    pub fn at_index(&self, idx: &[i64]) -> f64 {
        self.values[self.domain.ravel(idx)]
    }

    /// Value at a grid point given in coordinates.
    pub fn at(&self, x: &[f64]) -> Option<f64> {
        self.domain.node_at(x).map(|idx| self.at_index(&idx))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// CSV rows `x1,…,xn,value`.
    pub fn to_csv(&self) -> String {
        let n = self.domain.dim();
        let h = self.domain.spacing();
        let mut idx = vec![0i64; n];
        let mut x = vec![0.0; n];
        let mut s = String::new();
        for k in 1..=n {
            s.push_str(&format!("x{k},"));
        }
        s.push_str("value\n");
        for (lin, v) in self.values.iter().enumerate() {
            self.domain.unravel(lin, &mut idx);
            self.domain.coord(&idx, &h, &mut x);
            for xi in &x {
                s.push_str(&format!("{xi},"));
            }
            s.push_str(&format!("{v}\n"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ravel_round_trip_and_classification() {
        let d = BoxDomain::new(vec![0.0, -1.0], vec![1.0, 1.0], vec![4, 8]).unwrap();
        assert_eq!(d.num_nodes(), 45);
        assert_eq!(d.num_interior(), 21);
        let mut idx = [0i64; 2];
        let mut interior = 0;
        for lin in 0..d.num_nodes() {
            d.unravel(lin, &mut idx);
            assert_eq!(d.ravel(&idx), lin);
            interior += usize::from(d.is_interior(&idx));
        }
        assert_eq!(interior, d.num_interior());
    }

    #[test]
    fn invalid_boxes_rejected() {
        assert!(BoxDomain::new(vec![1.0], vec![0.0], vec![4]).is_err());
        assert!(BoxDomain::new(vec![0.0], vec![1.0], vec![1]).is_err());
        assert!(BoxDomain::new(vec![0.0], vec![1.0, 2.0], vec![4]).is_err());
    }

    #[test]
    fn cube_spacing_and_lookup() {
        let d = BoxDomain::cube(3, 2.0, 0.125).unwrap();
        assert_eq!(d.cells, vec![32, 32, 32]);
        assert_eq!(d.spacing(), vec![0.125; 3]);
        assert_eq!(d.node_at(&[0.0, 0.0, 0.0]), Some(vec![16, 16, 16]));
        assert_eq!(d.node_at(&[0.01, 0.0, 0.0]), None);
        let f = GridField::from_fn(&d, |x| x[0] + 2.0 * x[2]);
        assert_eq!(f.at(&[1.0, 0.5, -0.25]), Some(0.5));
    }
}

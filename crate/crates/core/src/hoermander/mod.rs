//! Structural hypotheses on the frame: homogeneity, the Hörmander rank
//! condition, the principal matrix `A = S Sᵀ`, and Jacobian bases of group laws.

mod group;
mod presets;

pub use group::{GroupLaw, GroupLawSpec};
pub use presets::{frame_from_preset, grushin, heisenberg, heisenberg_group_law};

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{DilationWeights, FieldDegree, FieldError, PolyVectorField};

/// Relative pivot tolerance for [`rank_at`].
pub const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FrameError {
    #[error("a frame needs at least two fields, got {0}")]
    TooFewFields(usize),
    #[error("field {index} has dimension {found}, expected {expected}")]
    Dimension {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("field {index} is not homogeneous of degree 1 (found {found})")]
    NotHomogeneous { index: usize, found: String },
    #[error("field {0} is not divergence free")]
    NotDivergenceFree(usize),
    #[error("group law: {0}")]
    GroupLaw(String),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Generators `X₁…X_m` on `ℝⁿ` that are `δ_λ`-homogeneous of degree 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    fields: Vec<PolyVectorField>,
    weights: DilationWeights,
}

impl Frame {
    pub fn new(fields: Vec<PolyVectorField>, weights: DilationWeights) -> Result<Self, FrameError> {
        if fields.len() < 2 {
            return Err(FrameError::TooFewFields(fields.len()));
        }
        let n = weights.dim();
        for (index, f) in fields.iter().enumerate() {
            if f.dim() != n {
                return Err(FrameError::Dimension {
                    index,
                    expected: n,
                    found: f.dim(),
                });
            }
            match f.homogeneity_degree(&weights)? {
                Some(FieldDegree::Degree(1)) => {}
                other => {
                    return Err(FrameError::NotHomogeneous {
                        index,
                        found: format!("{other:?}"),
                    })
                }
            }
            if !f.divergence().is_zero() {
                return Err(FrameError::NotDivergenceFree(index));
            }
        }
        Ok(Self { fields, weights })
    }

    pub fn from_spec(spec: &FrameSpec) -> Result<Self, FrameError> {
        let weights = DilationWeights::new(spec.weights.clone())?;
        let fields = spec
            .fields
            .iter()
            .map(|c| PolyVectorField::parse(c))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(fields, weights)
    }

    pub fn to_spec(&self) -> FrameSpec {
        FrameSpec {
            fields: self.fields.iter().map(PolyVectorField::to_strings).collect(),
            weights: self.weights.sigma().to_vec(),
        }
    }

    pub fn n(&self) -> usize {
        self.weights.dim()
    }

    pub fn m(&self) -> usize {
        self.fields.len()
    }

    pub fn fields(&self) -> &[PolyVectorField] {
        &self.fields
    }

    pub fn weights(&self) -> &DilationWeights {
        &self.weights
    }

    /// `S(x)`, the `n×m` matrix whose columns are the evaluated fields.
    pub fn coefficient_matrix(&self, x: &[f64]) -> DMatrix<f64> {
        let cols: Vec<_> = self.fields.iter().map(|f| f.evaluate(x)).collect();
        DMatrix::from_fn(self.n(), self.m(), |i, j| cols[j][i])
    }
}

/// JSON form of a frame: one array of coefficient strings per field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSpec {
    pub fields: Vec<Vec<String>>,
    pub weights: Vec<u32>,
}

/// An iterated bracket together with its word of generator indices.
#[derive(Debug, Clone, PartialEq)]
pub struct BracketElement {
    /// `[i₁, i₂, …, i_k]` stands for `[X_{i₁}, [X_{i₂}, … X_{i_k}]]`.
    pub word: Vec<usize>,
    pub field: PolyVectorField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LieBasisResult {
    pub elements: Vec<BracketElement>,
    pub step: usize,
}

impl LieBasisResult {
    pub fn fields_up_to(&self, step: usize) -> Vec<PolyVectorField> {
        self.elements
            .iter()
            .filter(|e| e.word.len() <= step)
            .map(|e| e.field.clone())
            .collect()
    }
}

/// All nested brackets `[X_{i₁}, [X_{i₂}, …]]` of length `≤ max_step`.
///
/// Zero results and exact duplicates (up to sign) are dropped; a duplicate only
/// produces duplicates further down, so the dropped words lose no span.
pub fn generate_brackets(frame: &Frame, max_step: usize) -> LieBasisResult {
    assert!(max_step >= 1, "max_step must be at least 1");
    let mut elements: Vec<BracketElement> = Vec::new();
    let mut frontier: Vec<BracketElement> = Vec::new();
    for (i, f) in frame.fields.iter().enumerate() {
        let e = BracketElement {
            word: vec![i],
            field: f.clone(),
        };
        if !is_redundant(&elements, &e.field) {
            elements.push(e.clone());
            frontier.push(e);
        }
    }
    for _ in 2..=max_step {
        let mut next = Vec::new();
        for (i, x) in frame.fields.iter().enumerate() {
            for z in &frontier {
                let field = x.lie_bracket(&z.field).expect("frame fields share dimension");
                if is_redundant(&elements, &field) {
                    continue;
                }
                let mut word = vec![i];
                word.extend_from_slice(&z.word);
                let e = BracketElement { word, field };
                elements.push(e.clone());
                next.push(e);
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    LieBasisResult {
        elements,
        step: max_step,
    }
}

fn is_redundant(existing: &[BracketElement], f: &PolyVectorField) -> bool {
    f.is_zero() || existing.iter().any(|e| e.field == *f || e.field.is_negation_of(f))
}

/// Dimension of `span{Z_x}` by Gaussian elimination with full pivoting.
pub fn rank_at(fields: &[PolyVectorField], x: &[f64]) -> usize {
    let rows: Vec<Vec<f64>> = fields.iter().map(|f| f.evaluate(x)).collect();
    numeric_rank(rows)
}

pub(crate) fn numeric_rank(mut rows: Vec<Vec<f64>>) -> usize {
    let Some(ncols) = rows.first().map(Vec::len) else {
        return 0;
    };
    let scale = rows.iter().flatten().fold(0.0_f64, |a, v| a.max(v.abs()));
    if scale == 0.0 {
        return 0;
    }
    let tol = RANK_TOL * scale;
    let mut rank = 0;
    let mut cols: Vec<usize> = (0..ncols).collect();
    while rank < rows.len() && !cols.is_empty() {
        let mut best = (0.0, rank, 0);
        for (r, row) in rows.iter().enumerate().skip(rank) {
            for (ci, &c) in cols.iter().enumerate() {
                if row[c].abs() > best.0 {
                    best = (row[c].abs(), r, ci);
                }
            }
        }
        if best.0 < tol {
            break;
        }
        rows.swap(rank, best.1);
        let pc = cols.swap_remove(best.2);
        let pivot_row = rows[rank].clone();
        for row in rows.iter_mut().skip(rank + 1) {
            let f = row[pc] / pivot_row[pc];
            if f != 0.0 {
                for &c in &cols {
                    row[c] -= f * pivot_row[c];
                }
                row[pc] = 0.0;
            }
        }
        rank += 1;
    }
    rank
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HoermanderReport {
    pub satisfied: bool,
    /// Minimal bracket length reaching full rank at every point.
    pub step: Option<usize>,
    pub max_step: usize,
    pub points_checked: usize,
    /// First point where the rank stayed deficient at `max_step`.
    pub worst_point: Option<Vec<f64>>,
    pub worst_rank: usize,
}

/// Checks the rank condition at the origin and at every supplied point.
/// `max_step` defaults to the ambient dimension.
pub fn check_hoermander(frame: &Frame, points: &[Vec<f64>], max_step: Option<usize>) -> HoermanderReport {
    let n = frame.n();
    let max_step = max_step.unwrap_or(n).max(1);
    let mut all = vec![vec![0.0; n]];
    all.extend(points.iter().cloned());
    let basis = generate_brackets(frame, max_step);
    let mut min_rank = n;
    let mut worst_point = None;
    for s in 1..=max_step {
        let fields = basis.fields_up_to(s);
        let ranks: Vec<usize> = all.par_iter().map(|x| rank_at(&fields, x)).collect();
        if ranks.iter().all(|&r| r == n) {
            return HoermanderReport {
                satisfied: true,
                step: Some(s),
                max_step,
                points_checked: all.len(),
                worst_point: None,
                worst_rank: n,
            };
        }
        if s == max_step {
            let (k, &r) = ranks.iter().enumerate().min_by_key(|(_, &r)| r).unwrap();
            min_rank = r;
            worst_point = Some(all[k].clone());
        }
    }
    HoermanderReport {
        satisfied: false,
        step: None,
        max_step,
        points_checked: all.len(),
        worst_point,
        worst_rank: min_rank,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalMatrixResult {
    pub point: Vec<f64>,
    pub s: DMatrix<f64>,
    pub a: DMatrix<f64>,
}

impl PrincipalMatrixResult {
    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.a.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn principal_matrix(frame: &Frame, x: &[f64]) -> PrincipalMatrixResult {
    principal_matrix_of(&frame.fields, x)
}

pub fn principal_matrix_of(fields: &[PolyVectorField], x: &[f64]) -> PrincipalMatrixResult {
    let n = x.len();
    let cols: Vec<_> = fields.iter().map(|f| f.evaluate(x)).collect();
    let s = DMatrix::from_fn(n, fields.len(), |i, j| cols[j][i]);
    let a = &s * s.transpose();
    PrincipalMatrixResult {
        point: x.to_vec(),
        s,
        a,
    }
}

/// Non-total degeneracy: `A(x) ≠ 0` at every point, i.e. some field is nonzero there.
pub fn check_ntd(fields: &[PolyVectorField], points: &[Vec<f64>]) -> bool {
    points
        .par_iter()
        .all(|x| fields.iter().any(|f| f.evaluate(x).iter().any(|&v| v != 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(c: &[&str]) -> PolyVectorField {
        PolyVectorField::parse(c).unwrap()
    }

    #[test]
    fn frame_validation() {
        let w = DilationWeights::new(vec![1, 2]).unwrap();
        assert!(Frame::new(vec![field(&["1", "0"])], w.clone()).is_err());
        let err = Frame::new(vec![field(&["1", "0"]), field(&["0", "1"])], w.clone()).unwrap_err();
        assert!(matches!(err, FrameError::NotHomogeneous { index: 1, .. }));
        assert!(Frame::new(vec![field(&["1", "0"]), field(&["0", "x1"])], w).is_ok());
    }

    #[test]
    fn grushin_brackets() {
        let g = grushin();
        let b = generate_brackets(&g, 2);
        assert_eq!(b.elements.len(), 3);
        assert_eq!(b.elements[2].field, PolyVectorField::partial(2, 1));
        assert_eq!(generate_brackets(&g, 1).elements.len(), 2);
    }

    #[test]
    fn h1_brackets_single_new_direction() {
        let b = generate_brackets(&heisenberg(1), 2);
        assert_eq!(b.elements.len(), 3);
        let t = &b.elements[2].field;
        assert!(t.is_negation_of(&PolyVectorField::partial(3, 2)) || *t == PolyVectorField::partial(3, 2));
    }

    #[test]
    fn rank_examples() {
        let g = grushin();
        let f = generate_brackets(&g, 2).fields_up_to(2);
        assert_eq!(rank_at(&f, &[0.0, 0.0]), 2);
        assert_eq!(rank_at(&[PolyVectorField::partial(3, 1)], &[1.0, 2.0, 3.0]), 1);
        let h = generate_brackets(&heisenberg(1), 2).fields_up_to(2);
        assert_eq!(rank_at(&h, &[0.3, -1.2, 7.0]), 3);
        assert_eq!(rank_at(&[], &[0.0]), 0);
    }

    #[test]
    fn hoermander_examples() {
        let r = check_hoermander(&grushin(), &[vec![1.0, 2.0], vec![-0.5, 3.0]], Some(3));
        assert!(r.satisfied);
        assert_eq!(r.step, Some(2));

        let iso = Frame::new(
            vec![PolyVectorField::partial(2, 0), PolyVectorField::partial(2, 1)],
            DilationWeights::isotropic(2),
        )
        .unwrap();
        assert_eq!(check_hoermander(&iso, &[], None).step, Some(1));

        let stuck = Frame::new(
            vec![field(&["1", "0", "0"]), field(&["0", "x1", "0"])],
            DilationWeights::new(vec![1, 2, 2]).unwrap(),
        )
        .unwrap();
        let r = check_hoermander(&stuck, &[vec![1.0, 1.0, 1.0]], None);
        assert!(!r.satisfied);
        assert_eq!(r.worst_rank, 2);
    }

    #[test]
    fn principal_matrix_grushin_and_h1() {
        let a = principal_matrix(&grushin(), &[3.0, -2.0]).a;
        assert_eq!(a, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 9.0]));
        let (x, y) = (0.7, -1.1);
        let a = principal_matrix(&heisenberg(1), &[x, y, 5.0]).a;
        let expect = DMatrix::from_row_slice(
            3,
            3,
            &[
                1.0,
                0.0,
                y / 2.0,
                0.0,
                1.0,
                -x / 2.0,
                y / 2.0,
                -x / 2.0,
                (x * x + y * y) / 4.0,
            ],
        );
        assert!((a - expect).abs().max() < 1e-15);
    }

    #[test]
    fn ntd_examples() {
        let pts = vec![vec![0.0, 0.0], vec![2.0, -1.0]];
        assert!(check_ntd(grushin().fields(), &pts));
        let degenerate = vec![field(&["x1"])];
        assert!(!check_ntd(&degenerate, &[vec![0.0]]));
        let r = principal_matrix_of(&degenerate, &[0.0]);
        assert_eq!(r.a.abs().max(), 0.0);
    }

    #[test]
    fn frame_spec_round_trip() {
        let h = heisenberg(2);
        let json = serde_json::to_string(&h.to_spec()).unwrap();
        let back = Frame::from_spec(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, h);
        assert!(serde_json::from_str::<FrameSpec>(r#"{"fields":[],"weights":[1],"x":1}"#).is_err());
    }

    #[test]
    fn numeric_rank_handles_scaled_rows() {
        let rows = vec![vec![1e6, 0.0], vec![0.0, 1e-6]];
        // second row sits below the relative tolerance
        assert_eq!(numeric_rank(rows), 1);
    }
}

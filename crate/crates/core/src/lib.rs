//! Numerical laboratory for Liouville-type theorems for degenerate-elliptic
//! operators `L = Σ Xᵢ² + Σ bᵢXᵢ − Q` built from homogeneous Hörmander vector fields.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod criterion;
pub mod fields;
pub mod geometry;
pub mod hoermander;
pub mod lexer;
pub mod pde;

//! Minimal dense numeric core: row-major `f64` matrices, a reverse-mode
//! differentiation tape over whole-matrix operations, and Adam.
//!
//! The tape is append-only, so node indices are already a topological
//! order and the backward pass is a single reverse sweep.

mod adam;
mod matrix;
mod tape;

pub use adam::{Adam, AdamConfig};
pub use matrix::Matrix;
pub use tape::{Gradients, OpKind, Tape, Var};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NdiffError {
    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Dimension { op: &'static str, lhs: (usize, usize), rhs: (usize, usize) },
    #[error("buffer of length {len} cannot hold a {rows}x{cols} matrix")]
    BadBuffer { rows: usize, cols: usize, len: usize },
    #[error("backward requires a 1x1 root, got {rows}x{cols}")]
    NonScalarRoot { rows: usize, cols: usize },
    #[error("slice {start}..{end} out of bounds for extent {extent}")]
    OutOfBounds { start: usize, end: usize, extent: usize },
    #[error("empty operand list for {0}")]
    Empty(&'static str),
}

pub type Result<T> = std::result::Result<T, NdiffError>;

//! Frugal generative causal models trained with energy-score losses.
//!
//! A model is a triple `(g, f, h)`: `g` generates the past `(Z, X)`, `f`
//! generates the interventional outcome `Y(x)` from standard normal noise,
//! and `h` generates the noise conditionally on `(Z, X)`, tying the margin
//! back to the observed joint law. The pieces are fitted separately and can
//! be swapped independently.

mod error;
pub mod identifiability;
pub mod io;
pub mod losses;
pub mod margin;
pub mod model;
pub mod nets;
pub mod rng;
pub mod schema;
pub mod seq;
pub mod stats;
mod train;

pub use error::{Error, Result};
pub use margin::ClosedFormMargin;
pub use model::{fit, AteEstimate, FitConfig, FrengressionModel, TrainingLog};
pub use nets::{GeneratorNet, Margin, MlpSpec, PreAnmMargin, Role};
pub use schema::{Column, ColumnKind, ColumnSchema};
pub use seq::{fit_seq, kaplan_meier, SeqKind, SeqModel, SeqSchema, SeqStep, TrajectoryBatch};
pub use train::TrainSettings;

pub use ndiff::Matrix;

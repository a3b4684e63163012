//! Ground-truth simulators built from the frugal parameterisation: a past
//! law, a closed-form causal margin and a Gaussian copula. Used as oracles
//! for fitted frengression models.

pub mod catalog;
pub mod continuous;
pub mod copula;
pub mod frugal;
pub mod longitudinal;

pub use catalog::{CatalogEntry, Dgp};
pub use continuous::{make_continuous, StructuralDgp};
pub use copula::CopulaLink;
pub use frugal::{
    make_rct, make_weak_overlap, simulate_frugal, simulate_frugal_interventional, true_margin_quantile, Dataset,
    FrugalSpec, PastSampler,
};
pub use longitudinal::{make_longitudinal, LongitudinalSpec};

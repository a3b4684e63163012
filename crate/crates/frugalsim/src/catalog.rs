//! Named experiment designs, addressable from a key/value configuration.

use std::collections::BTreeMap;
use std::fmt;

use frengression::{Error, Result};

use crate::continuous::StructuralDgp;
use crate::frugal::{make_rct, make_weak_overlap, true_margin_quantile, FrugalSpec};
use crate::longitudinal::{make_longitudinal, LongitudinalSpec};

pub const DEFAULT_CONTINUOUS_P: usize = 200;
pub const DEFAULT_CUBIC_RHO: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CatalogEntry {
    WeakOverlap { beta_i: f64 },
    RctDistributional,
    HiranoImbens { p: usize },
    Sun { p: usize },
    CubicPreAnm { rho: f64 },
    Setting { id: u8, horizon: Option<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Dgp {
    Frugal(FrugalSpec),
    Structural(StructuralDgp),
    Longitudinal(LongitudinalSpec),
}

fn param<T: std::str::FromStr>(params: &BTreeMap<String, String>, key: &str, default: T) -> Result<T> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v.trim().parse().map_err(|_| Error::Config(format!("parameter `{key}` has unparsable value `{v}`"))),
    }
}

impl CatalogEntry {
    /// Resolves a design name (case, `-` and `_` ignored) plus overrides
    /// `beta_i`, `p`, `rho` and `horizon`.
    pub fn parse(name: &str, params: &BTreeMap<String, String>) -> Result<Self> {
        let key = name.to_ascii_lowercase().replace(['-', '_', ' '], "");
        let entry = match key.as_str() {
            "weakoverlap" => CatalogEntry::WeakOverlap { beta_i: param(params, "beta_i", 0.0)? },
            "rct" | "rctdistributional" => CatalogEntry::RctDistributional,
            "hiranoimbens" => CatalogEntry::HiranoImbens { p: param(params, "p", DEFAULT_CONTINUOUS_P)? },
            "sun" => CatalogEntry::Sun { p: param(params, "p", DEFAULT_CONTINUOUS_P)? },
            "cubicpreanm" => CatalogEntry::CubicPreAnm { rho: param(params, "rho", DEFAULT_CUBIC_RHO)? },
            s if s.starts_with("setting") => {
                let id: u8 =
                    s["setting".len()..].parse().map_err(|_| Error::Config(format!("unknown design `{name}`")))?;
                let horizon = params.get("horizon").map(|_| param(params, "horizon", 0usize)).transpose()?;
                CatalogEntry::Setting { id, horizon }
            }
            _ => return Err(Error::Config(format!("unknown design `{name}`"))),
        };
        entry.build()?;
        Ok(entry)
    }

    pub fn build(&self) -> Result<Dgp> {
        let dgp = match *self {
            CatalogEntry::WeakOverlap { beta_i } => Dgp::Frugal(make_weak_overlap(beta_i)?),
            CatalogEntry::RctDistributional => Dgp::Frugal(make_rct()?),
            CatalogEntry::HiranoImbens { p } => Dgp::Structural(StructuralDgp::HiranoImbens { p }),
            CatalogEntry::Sun { p } => Dgp::Structural(StructuralDgp::Sun { p }),
            CatalogEntry::CubicPreAnm { rho } => Dgp::Structural(StructuralDgp::CubicPreAnm { rho }),
            CatalogEntry::Setting { id, horizon } => {
                let spec = make_longitudinal(id)?;
                Dgp::Longitudinal(match horizon {
                    Some(h) => spec.with_horizon(h)?,
                    None => spec,
                })
            }
        };
        if let Dgp::Structural(s) = &dgp {
            s.validate()?;
        }
        Ok(dgp)
    }
}

impl fmt::Display for CatalogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CatalogEntry::WeakOverlap { beta_i } => write!(f, "weak-overlap(beta_i={beta_i})"),
            CatalogEntry::RctDistributional => write!(f, "rct"),
            CatalogEntry::HiranoImbens { p } => write!(f, "hirano-imbens(p={p})"),
            CatalogEntry::Sun { p } => write!(f, "sun(p={p})"),
            CatalogEntry::CubicPreAnm { rho } => write!(f, "cubic-pre-anm(rho={rho})"),
            CatalogEntry::Setting { id, horizon: Some(h) } => write!(f, "setting{id}(horizon={h})"),
            CatalogEntry::Setting { id, horizon: None } => write!(f, "setting{id}"),
        }
    }
}

impl Dgp {
    pub fn true_margin_quantile(&self, x: f64, alpha: f64) -> Result<f64> {
        match self {
            Dgp::Frugal(spec) => true_margin_quantile(spec, x, alpha),
            _ => Err(Error::Unsupported("margin quantiles are closed form only for frugal specifications".into())),
        }
    }
}

//! Experiment configuration from `key = value` text, with later sources
//! (command-line flags) overriding earlier ones (a config file).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use frengression::FitConfig;
use frugalsim::CatalogEntry;

use crate::error::{io_err, BenchError, Result};

/// Design parameters forwarded to the catalog.
pub const DGP_PARAMS: [&str; 3] = ["beta_i", "p", "rho"];

const KEYS: [&str; 22] = [
    "dgp",
    "n",
    "reps",
    "epochs",
    "seed",
    "out",
    "estimand",
    "x_grid",
    "horizon",
    "holdout",
    "draws",
    "truth_draws",
    "lr",
    "lr_final_ratio",
    "width",
    "layers",
    "m",
    "batch_size",
    "pre_anm",
    "fit_past",
    "monotone_penalty",
    "regime",
];

#[derive(Debug, Clone, PartialEq)]
pub enum Estimand {
    /// `E Y(x1) - E Y(x0)`.
    Ate { x1: f64, x0: f64 },
    /// Mean curve with averaged 2.5% / 97.5% bands over `x_grid`.
    Adrf,
    /// `alpha`-quantile curve of `Y(x)` over `x_grid`.
    Quantile { alpha: f64 },
    /// `E Y_{T-1}(1) - E Y_{T-1}(0)` for trajectories.
    RiskDifference,
    /// Kaplan-Meier curves of model and ground truth under a constant regime.
    Km,
    /// Per-step interventional means under a constant regime, optionally at fixed `C`.
    TrajectoryMean { c: Option<f64> },
}

impl FromStr for Estimand {
    type Err = BenchError;

    /// `ate[:x1,x0]`, `adrf`, `quantile[:alpha]`, `risk-difference`, `km`,
    /// `trajectory-mean[:c]`.
    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let num = |v: &str| parse_f64("estimand", v);
        match (head.to_ascii_lowercase().as_str(), arg) {
            ("ate", None) => Ok(Estimand::Ate { x1: 1.0, x0: 0.0 }),
            ("ate", Some(a)) => {
                let (x1, x0) =
                    a.split_once(',').ok_or_else(|| BenchError::Config(format!("ate needs `x1,x0`, got `{a}`")))?;
                Ok(Estimand::Ate { x1: num(x1)?, x0: num(x0)? })
            }
            ("adrf", None) => Ok(Estimand::Adrf),
            ("quantile", a) => {
                let alpha = a.map(num).transpose()?.unwrap_or(0.5);
                if !(alpha > 0.0 && alpha < 1.0) {
                    return Err(BenchError::Config(format!("quantile level {alpha} outside (0, 1)")));
                }
                Ok(Estimand::Quantile { alpha })
            }
            ("risk-difference", None) => Ok(Estimand::RiskDifference),
            ("km", None) => Ok(Estimand::Km),
            ("trajectory-mean", a) => Ok(Estimand::TrajectoryMean { c: a.map(num).transpose()? }),
            _ => Err(BenchError::Config(format!("unknown estimand `{s}`"))),
        }
    }
}

impl std::fmt::Display for Estimand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Estimand::Ate { x1, x0 } => write!(f, "ate:{x1},{x0}"),
            Estimand::Adrf => write!(f, "adrf"),
            Estimand::Quantile { alpha } => write!(f, "quantile:{alpha}"),
            Estimand::RiskDifference => write!(f, "risk-difference"),
            Estimand::Km => write!(f, "km"),
            Estimand::TrajectoryMean { c: Some(c) } => write!(f, "trajectory-mean:{c}"),
            Estimand::TrajectoryMean { c: None } => write!(f, "trajectory-mean"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dgp: String,
    pub dgp_params: BTreeMap<String, String>,
    pub n: usize,
    pub reps: usize,
    pub fit: FitConfig,
    pub seed: u64,
    pub estimand: Estimand,
    pub x_grid: Vec<f64>,
    /// Training rows with treatment in `(lo, hi]` are withheld.
    pub holdout: Option<(f64, f64)>,
    /// Model draws per evaluation point.
    pub draws: usize,
    /// Ground-truth draws where no closed form exists.
    pub truth_draws: usize,
    /// Constant treatment of trajectory regimes.
    pub regime: f64,
    pub out: PathBuf,
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim().parse().map_err(|_| BenchError::Config(format!("`{key}` expects a number, got `{v}`")))
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| BenchError::Config(format!("`{key}` has unparsable value `{v}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(BenchError::Config(format!("`{key}` expects true or false, got `{v}`"))),
    }
}

/// `lo:hi:step` (inclusive, step > 0) or a comma-separated list.
pub fn parse_grid(v: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = v.split(':').collect();
    let grid = if parts.len() == 3 {
        let (lo, hi, step) =
            (parse_f64("x_grid", parts[0])?, parse_f64("x_grid", parts[1])?, parse_f64("x_grid", parts[2])?);
        if !(step > 0.0) || hi < lo {
            return Err(BenchError::Config(format!("bad grid range `{v}`")));
        }
        let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| lo + step * i as f64).collect()
    } else {
        v.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse_f64("x_grid", s)).collect::<Result<Vec<f64>>>()?
    };
    if grid.is_empty() {
        return Err(BenchError::Config("x_grid is empty".into()));
    }
    Ok(grid)
}

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| BenchError::Config(format!("line {}: expected `key = value`", no + 1)))?;
        map.insert(k.trim().replace('-', "_"), v.trim().to_string());
    }
    Ok(map)
}

pub fn read_kv(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_kv(&text)
}

impl ExperimentConfig {
    /// Builds a configuration from merged key/value pairs. `seed` is required.
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        if let Some(k) = map.keys().find(|k| !KEYS.contains(&k.as_str()) && !DGP_PARAMS.contains(&k.as_str())) {
            return Err(BenchError::Config(format!("unknown key `{k}`")));
        }
        let get = |k: &str| map.get(k).map(String::as_str);
        let dgp = get("dgp").ok_or_else(|| BenchError::Config("`dgp` is required".into()))?.to_string();
        let seed = get("seed")
            .ok_or_else(|| BenchError::Config("`seed` is required for experiments".into()))
            .and_then(|v| parse_num("seed", v))?;
        let mut fit = FitConfig::default();
        fit.fit_past = false;
        fit.hidden_width = 32;
        if let Some(v) = get("epochs") {
            fit.epochs = parse_num("epochs", v)?;
        }
        if let Some(v) = get("lr") {
            fit.lr = parse_f64("lr", v)?;
        }
        if let Some(v) = get("lr_final_ratio") {
            fit.lr_final_ratio = parse_f64("lr_final_ratio", v)?;
        }
        if let Some(v) = get("width") {
            fit.hidden_width = parse_num("width", v)?;
        }
        if let Some(v) = get("layers") {
            fit.hidden_layers = parse_num("layers", v)?;
        }
        if let Some(v) = get("m") {
            fit.m = parse_num("m", v)?;
        }
        if let Some(v) = get("batch_size") {
            fit.batch_size = parse_num("batch_size", v)?;
        }
        if let Some(v) = get("pre_anm") {
            fit.pre_anm = parse_bool("pre_anm", v)?;
        }
        if let Some(v) = get("fit_past") {
            fit.fit_past = parse_bool("fit_past", v)?;
        }
        if let Some(v) = get("monotone_penalty") {
            fit.monotone_penalty = parse_f64("monotone_penalty", v)?;
        }
        let mut dgp_params: BTreeMap<String, String> =
            DGP_PARAMS.iter().filter_map(|k| map.get(*k).map(|v| (k.to_string(), v.clone()))).collect();
        if let Some(h) = get("horizon") {
            dgp_params.insert("horizon".into(), h.to_string());
        }
        let holdout = get("holdout")
            .map(|v| {
                let (lo, hi) =
                    v.split_once(',').ok_or_else(|| BenchError::Config(format!("holdout needs `lo,hi`, got `{v}`")))?;
                Ok::<_, BenchError>((parse_f64("holdout", lo)?, parse_f64("holdout", hi)?))
            })
            .transpose()?;
        let cfg = Self {
            dgp,
            dgp_params,
            n: get("n").map(|v| parse_num("n", v)).transpose()?.unwrap_or(5000),
            reps: get("reps").map(|v| parse_num("reps", v)).transpose()?.unwrap_or(5),
            fit,
            seed,
            estimand: get("estimand").map(str::parse).transpose()?.unwrap_or(Estimand::Ate { x1: 1.0, x0: 0.0 }),
            x_grid: get("x_grid").map(parse_grid).transpose()?.unwrap_or_else(|| vec![0.0, 1.0]),
            holdout,
            draws: get("draws").map(|v| parse_num("draws", v)).transpose()?.unwrap_or(1000),
            truth_draws: get("truth_draws").map(|v| parse_num("truth_draws", v)).transpose()?.unwrap_or(200_000),
            regime: get("regime").map(|v| parse_f64("regime", v)).transpose()?.unwrap_or(1.0),
            out: PathBuf::from(get("out").unwrap_or("results")),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(BenchError::Config("reps must be at least 1".into()));
        }
        if self.n < 2 || self.draws < 2 || self.truth_draws < 2 {
            return Err(BenchError::Config("n, draws and truth_draws must be at least 2".into()));
        }
        if self.x_grid.is_empty() {
            return Err(BenchError::Config("x_grid is empty".into()));
        }
        if let Some((lo, hi)) = self.holdout {
            if !(lo < hi) {
                return Err(BenchError::Config(format!("holdout ({lo}, {hi}] is empty")));
            }
        }
        self.fit.validate()?;
        self.catalog_entry()?;
        Ok(())
    }

    pub fn catalog_entry(&self) -> Result<CatalogEntry> {
        Ok(CatalogEntry::parse(&self.dgp, &self.dgp_params)?)
    }

    /// Canonical `key = value` echo; parsing it back yields the same config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let f = &self.fit;
        let grid = self.x_grid.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let _ = writeln!(s, "dgp = {}", self.dgp);
        for (k, v) in &self.dgp_params {
            let _ = writeln!(s, "{k} = {v}");
        }
        let _ = writeln!(s, "n = {}", self.n);
        let _ = writeln!(s, "reps = {}", self.reps);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "estimand = {}", self.estimand);
        let _ = writeln!(s, "x_grid = {grid}");
        if let Some((lo, hi)) = self.holdout {
            let _ = writeln!(s, "holdout = {lo},{hi}");
        }
        let _ = writeln!(s, "draws = {}", self.draws);
        let _ = writeln!(s, "truth_draws = {}", self.truth_draws);
        let _ = writeln!(s, "regime = {}", self.regime);
        let _ = writeln!(s, "epochs = {}", f.epochs);
        let _ = writeln!(s, "lr = {}", f.lr);
        let _ = writeln!(s, "lr_final_ratio = {}", f.lr_final_ratio);
        let _ = writeln!(s, "width = {}", f.hidden_width);
        let _ = writeln!(s, "layers = {}", f.hidden_layers);
        let _ = writeln!(s, "m = {}", f.m);
        let _ = writeln!(s, "batch_size = {}", f.batch_size);
        let _ = writeln!(s, "pre_anm = {}", f.pre_anm);
        let _ = writeln!(s, "fit_past = {}", f.fit_past);
        let _ = writeln!(s, "monotone_penalty = {}", f.monotone_penalty);
        let _ = writeln!(s, "out = {}", self.out.display());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kv(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn grid_forms() {
        assert_eq!(parse_grid("0:1:0.5").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_grid("1, 2,3").unwrap(), vec![1.0, 2.0, 3.0]);
        assert!(parse_grid("").is_err());
        assert!(parse_grid("1:0:0.5").is_err());
    }

    #[test]
    fn seed_is_required() {
        assert!(ExperimentConfig::from_map(&kv(&[("dgp", "rct")])).is_err());
        assert!(ExperimentConfig::from_map(&kv(&[("dgp", "rct"), ("seed", "3")])).is_ok());
    }

    #[test]
    fn unknown_keys_and_designs_rejected() {
        assert!(ExperimentConfig::from_map(&kv(&[("dgp", "rct"), ("seed", "1"), ("colour", "red")])).is_err());
        assert!(ExperimentConfig::from_map(&kv(&[("dgp", "twins"), ("seed", "1")])).is_err());
        assert!(ExperimentConfig::from_map(&kv(&[("dgp", "rct"), ("seed", "1"), ("reps", "0")])).is_err());
    }

    #[test]
    fn echo_round_trips() {
        let cfg = ExperimentConfig::from_map(&kv(&[
            ("dgp", "weak-overlap"),
            ("beta_i", "1.5"),
            ("seed", "9"),
            ("estimand", "adrf"),
            ("x_grid", "0:2:0.5"),
            ("holdout", "3,6"),
        ]))
        .unwrap();
        let back = ExperimentConfig::from_map(&parse_kv(&cfg.to_text()).unwrap()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn estimand_forms() {
        assert_eq!("ate:2,1".parse::<Estimand>().unwrap(), Estimand::Ate { x1: 2.0, x0: 1.0 });
        assert_eq!("quantile".parse::<Estimand>().unwrap(), Estimand::Quantile { alpha: 0.5 });
        assert_eq!("trajectory-mean:0".parse::<Estimand>().unwrap(), Estimand::TrajectoryMean { c: Some(0.0) });
        assert!("quantile:1.5".parse::<Estimand>().is_err());
        assert!("bands".parse::<Estimand>().is_err());
    }
}

//! Result files and the hashed manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::{parse_kv, ExperimentConfig};
use crate::error::{io_err, BenchError, Result};
use crate::experiment::{MetricReport, ReplicationOutput};
use crate::metrics::metrics;

pub const CONFIG_FILE: &str = "config.txt";
pub const ESTIMATES_FILE: &str = "estimates.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const MAPE_FILE: &str = "mape.csv";
pub const CURVE_FILE: &str = "curve.csv";
pub const KM_FILE: &str = "km.csv";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const REPLICATION_DIR: &str = "replications";

pub(crate) fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir.join(REPLICATION_DIR)).map_err(io_err(dir))
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub(crate) fn write_replication(dir: &Path, targets: &[String], rep: &ReplicationOutput) -> Result<()> {
    let path = dir.join(REPLICATION_DIR).join(format!("rep_{}.csv", rep.rep));
    write_rows(
        &path,
        &["target", "value"],
        targets.iter().zip(&rep.values).map(|(t, v)| vec![t.clone(), v.to_string()]),
    )
}

/// Writes the config echo, estimates, metrics, curves and the manifest.
pub fn write_report(cfg: &ExperimentConfig, report: &MetricReport) -> Result<()> {
    let dir = &cfg.out;
    prepare_dir(dir)?;
    fs::write(dir.join(CONFIG_FILE), cfg.to_text()).map_err(io_err(dir.join(CONFIG_FILE)))?;

    let est_rows = report.replications.iter().flat_map(|r| {
        report.targets.iter().zip(&r.values).map(move |(t, v)| vec![r.rep.to_string(), t.clone(), v.to_string()])
    });
    write_rows(&dir.join(ESTIMATES_FILE), &["rep", "target", "value"], est_rows)?;

    let metric_rows = report.targets.iter().enumerate().map(|(j, t)| {
        let m = &report.metrics[j];
        let avg = report.estimates(j).iter().sum::<f64>() / report.replications.len() as f64;
        vec![
            t.clone(),
            report.truth[j].to_string(),
            avg.to_string(),
            m.bias.to_string(),
            m.mae.to_string(),
            m.rmse.to_string(),
        ]
    });
    write_rows(&dir.join(METRICS_FILE), &["target", "truth", "mean", "bias", "mae", "rmse"], metric_rows)?;

    if let Some(m) = &report.mape {
        write_rows(
            &dir.join(MAPE_FILE),
            &["mape", "used", "excluded"],
            [vec![m.value.to_string(), m.used.to_string(), m.excluded.to_string()]],
        )?;
    }
    if let Some(curve) = &report.curve {
        let rows = curve.iter().map(|p| [p.x, p.mean, p.q025, p.q975, p.truth].iter().map(f64::to_string).collect());
        write_rows(&dir.join(CURVE_FILE), &["x", "mean", "q025", "q975", "truth"], rows)?;
    }
    if report.replications.iter().any(|r| r.km.is_some()) {
        let rows = report.replications.iter().flat_map(|r| {
            let (sim, truth) = r.km.clone().unwrap_or_default();
            (0..sim.len())
                .map(move |t| vec![r.rep.to_string(), t.to_string(), sim[t].to_string(), truth[t].to_string()])
        });
        write_rows(&dir.join(KM_FILE), &["rep", "t", "s_sim", "s_true"], rows)?;
    }
    write_manifest(dir)
}

fn listed_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).map_err(io_err(&d))? {
            let path = entry.map_err(io_err(&d))?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n != MANIFEST_FILE) {
                files.push(path.strip_prefix(dir).expect("walk stays inside dir").to_path_buf());
            }
        }
    }
    files.sort();
    Ok(files)
}

fn digest(path: &Path) -> Result<(String, usize)> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok((format!("{:x}", Sha256::digest(&bytes)), bytes.len()))
}

/// One `sha256  bytes  path` line per file in the run directory.
pub fn write_manifest(dir: &Path) -> Result<()> {
    let path = dir.join(MANIFEST_FILE);
    let mut f = fs::File::create(&path).map_err(io_err(&path))?;
    for rel in listed_files(dir)? {
        let (hash, len) = digest(&dir.join(&rel))?;
        writeln!(f, "{hash}  {len}  {}", rel.display()).map_err(io_err(&path))?;
    }
    Ok(())
}

/// Checks every manifest entry against the file on disk.
pub fn verify_manifest(dir: &Path) -> Result<usize> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let mut count = 0;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let mut parts = line.splitn(3, "  ");
        let (Some(hash), Some(_), Some(rel)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(BenchError::Manifest(format!("malformed line `{line}`")));
        };
        let (actual, _) = digest(&dir.join(rel))?;
        if actual != hash {
            return Err(BenchError::Manifest(format!("{rel} does not match its recorded hash")));
        }
        count += 1;
    }
    Ok(count)
}

fn read_table(path: &Path) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.records().collect::<std::result::Result<Vec<_>, _>>()?)
}

fn field(rec: &csv::StringRecord, i: usize) -> Result<f64> {
    rec.get(i)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| BenchError::Config(format!("bad numeric field {i} in `{rec:?}`")))
}

/// Verifies a run directory and renders its metrics, recomputed from the raw
/// estimates.
pub fn summarize(dir: &Path) -> Result<String> {
    let files = verify_manifest(dir)?;
    let cfg = parse_kv(&fs::read_to_string(dir.join(CONFIG_FILE)).map_err(io_err(dir.join(CONFIG_FILE)))?)?;
    let estimates = read_table(&dir.join(ESTIMATES_FILE))?;
    let mut out = format!(
        "run {} ({} files verified)\ndgp {} estimand {} reps {}\n",
        dir.display(),
        files,
        cfg.get("dgp").map_or("?", String::as_str),
        cfg.get("estimand").map_or("?", String::as_str),
        cfg.get("reps").map_or("?", String::as_str),
    );
    out.push_str(&format!("{:<20} {:>10} {:>10} {:>10} {:>10}\n", "target", "truth", "bias", "mae", "rmse"));
    for rec in read_table(&dir.join(METRICS_FILE))? {
        let target = rec.get(0).unwrap_or_default();
        let truth = field(&rec, 1)?;
        let values =
            estimates.iter().filter(|e| e.get(1) == Some(target)).map(|e| field(e, 2)).collect::<Result<Vec<f64>>>()?;
        let m = metrics(&values, truth)?;
        out.push_str(&format!("{target:<20} {truth:>10.4} {:>10.4} {:>10.4} {:>10.4}\n", m.bias, m.mae, m.rmse));
    }
    if let Ok(rows) = read_table(&dir.join(MAPE_FILE)) {
        if let Some(r) = rows.first() {
            out.push_str(&format!("mape {:.4} ({} grid points excluded)\n", field(r, 0)?, field(r, 2)?));
        }
    }
    Ok(out)
}

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use bench::config::{read_kv, ExperimentConfig, DGP_PARAMS};
use bench::output::summarize;
use bench::run_experiment;
use clap::{Args, Parser, Subcommand};
use frengression::io::{
    load_model, read_dataset, read_schema, save_model, write_dataset, write_schema, write_trajectories,
};
use frengression::rng::{substream, Stream};
use frengression::{fit, FitConfig};
use frugalsim::{simulate_frugal, CatalogEntry, Dgp};

#[derive(Parser)]
#[command(name = "frengression-bench", version, about = "Simulate, fit, sample and benchmark frengression models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a dataset from a catalog design.
    Simulate(SimulateArgs),
    /// Fit a static model to a CSV dataset.
    Fit(FitArgs),
    /// Draw from a fitted static model.
    Sample(SampleArgs),
    /// Run replicated experiments and write metrics.
    Experiment(ExperimentArgs),
    /// Verify a run directory and print its metrics.
    Report(ReportArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    dgp: String,
    /// Design parameter overrides such as `beta_i=1.5`.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long, default_value_t = 5000)]
    n: usize,
    #[arg(long)]
    seed: u64,
    /// CSV output; static designs also get a `.schema` file beside it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    #[arg(long, default_value_t = 1000)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    lr: f64,
    /// Final learning rate as a fraction of `lr` (cosine decay); 1 keeps it constant.
    #[arg(long, default_value_t = 1.0)]
    lr_final_ratio: f64,
    #[arg(long, default_value_t = 100)]
    width: usize,
    #[arg(long, default_value_t = 3)]
    layers: usize,
    #[arg(long, default_value_t = 2)]
    m: usize,
    #[arg(long, default_value_t = 256)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use the monotone pre-ANM margin.
    #[arg(long)]
    pre_anm: bool,
    /// Skip the past generator (interventional sampling only).
    #[arg(long)]
    no_past: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long)]
    seed: u64,
    /// Treatment for interventional draws (comma separated); joint draws when absent.
    #[arg(long, value_delimiter = ',')]
    x: Option<Vec<f64>>,
    /// With `--x`, keep the observed past (single-world draws).
    #[arg(long, requires = "x")]
    swig: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// `key = value` file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dgp: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    estimand: Option<String>,
    #[arg(long = "x-grid")]
    x_grid: Option<String>,
    #[arg(long)]
    horizon: Option<usize>,
    /// Any other configuration key, e.g. `beta_i=1.0` or `width=64`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    out: PathBuf,
}

fn split_pair(s: &str) -> Result<(String, String)> {
    let (k, v) = s.split_once('=').with_context(|| format!("expected KEY=VALUE, got `{s}`"))?;
    Ok((k.trim().replace('-', "_"), v.trim().to_string()))
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mut params = a.params.iter().map(|p| split_pair(p)).collect::<Result<BTreeMap<_, _>>>()?;
    if let Some(k) = params.keys().find(|k| !DGP_PARAMS.contains(&k.as_str())) {
        bail!("unknown design parameter `{k}`");
    }
    if let Some(h) = a.horizon {
        params.insert("horizon".into(), h.to_string());
    }
    let mut rng = substream(a.seed, Stream::Data);
    match CatalogEntry::parse(&a.dgp, &params)?.build()? {
        Dgp::Longitudinal(spec) => {
            let batch = spec.simulate(a.n, &mut rng)?;
            let file = File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
            write_trajectories(BufWriter::new(file), &spec.schema(), &batch)?;
        }
        Dgp::Frugal(spec) => {
            let d = simulate_frugal(&spec, a.n, &mut rng)?;
            write_dataset(&a.out, &d.schema, &d.data)?;
            write_schema(a.out.with_extension("schema"), &d.schema)?;
        }
        Dgp::Structural(s) => {
            let d = s.simulate(a.n, &mut rng)?;
            write_dataset(&a.out, &d.schema, &d.data)?;
            write_schema(a.out.with_extension("schema"), &d.schema)?;
        }
    }
    Ok(())
}

fn fit_cmd(a: FitArgs) -> Result<()> {
    let schema = read_schema(&a.schema)?;
    let data = read_dataset(&a.data, &schema)?;
    let cfg = FitConfig {
        epochs: a.epochs,
        lr: a.lr,
        lr_final_ratio: a.lr_final_ratio,
        hidden_layers: a.layers,
        hidden_width: a.width,
        m: a.m,
        batch_size: a.batch_size,
        seed: a.seed,
        fit_past: !a.no_past,
        pre_anm: a.pre_anm,
        ..FitConfig::default()
    };
    let model = fit(&data, &schema, &cfg)?;
    save_model(&a.out, &model)?;
    Ok(())
}

fn sample(a: SampleArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let mut rng = substream(a.seed, Stream::Sampling);
    let schema = model.schema().clone();
    let data = match (&a.x, a.swig) {
        (Some(x), true) => model.sample_swig(x, a.n, &mut rng)?,
        (Some(x), false) => {
            let y = model.sample_interventional(x, a.n, &mut rng)?;
            let header: Vec<String> = schema.y.iter().map(|c| c.name.clone()).collect();
            let file = File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
            frengression::io::write_csv(BufWriter::new(file), &header, &y)?;
            return Ok(());
        }
        (None, _) => model.sample_joint(a.n, &mut rng)?,
    };
    write_dataset(&a.out, &schema, &data)?;
    Ok(())
}

fn experiment(a: ExperimentArgs) -> Result<()> {
    let mut map = match &a.config {
        Some(p) => read_kv(p)?,
        None => BTreeMap::new(),
    };
    let flags = [
        ("dgp", a.dgp.clone()),
        ("n", a.n.map(|v| v.to_string())),
        ("reps", a.reps.map(|v| v.to_string())),
        ("epochs", a.epochs.map(|v| v.to_string())),
        ("seed", a.seed.map(|v| v.to_string())),
        ("out", a.out.as_ref().map(|p| p.display().to_string())),
        ("estimand", a.estimand.clone()),
        ("x_grid", a.x_grid.clone()),
        ("horizon", a.horizon.map(|v| v.to_string())),
    ];
    for (k, v) in a.set.iter().map(|s| split_pair(s)).collect::<Result<Vec<_>>>()? {
        map.insert(k, v);
    }
    for (k, v) in flags {
        if let Some(v) = v {
            map.insert(k.to_string(), v);
        }
    }
    if !map.contains_key("seed") {
        bail!("`--seed` is required for experiments");
    }
    let cfg = ExperimentConfig::from_map(&map)?;
    let report = run_experiment(&cfg)?;
    for (j, t) in report.targets.iter().enumerate() {
        let m = report.metrics[j];
        println!("{t}: truth {:.4} bias {:.4} mae {:.4} rmse {:.4}", report.truth[j], m.bias, m.mae, m.rmse);
    }
    if let Some(m) = report.mape {
        println!("mape {:.4} ({} excluded)", m.value, m.excluded);
    }
    println!("results in {}", cfg.out.display());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit_cmd(a),
        Command::Sample(a) => sample(a),
        Command::Experiment(a) => experiment(a),
        Command::Report(a) => {
            print!("{}", summarize(&a.out)?);
            Ok(())
        }
    }
}

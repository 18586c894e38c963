//! Command-line harness: data generation, method execution, eta sweeps and
//! ingestion checks for the consensus-maximization toolkit.

mod generate;
mod ingest;
mod run;
mod schema;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use schema::{parse_method, sidecar_path, GenerateConfig};

#[derive(Parser)]
#[command(
    name = "maxcon",
    about = "Robust model fitting by deterministic consensus maximization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic instance file plus its ground-truth sidecar.
    Generate {
        /// JSON generator config (family, n, eta, seed, epsilon, out).
        #[arg(long)]
        config: PathBuf,
        /// Override the output path from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit one instance with a method and emit a run record.
    Fit {
        #[arg(long)]
        instance: PathBuf,
        /// ransac | ibco | ransac+ibco
        #[arg(long)]
        method: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Initial parameter vector for method=ibco, comma separated.
        #[arg(long)]
        x0: Option<String>,
        /// Override the instance's inlier threshold.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Conic subsolver tolerance.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// RANSAC iteration cap.
        #[arg(long, default_value_t = 100_000)]
        max_iters: usize,
        /// Also write the record to this path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an eta sweep and emit aggregate CSV plus raw records.
    Sweep {
        /// JSON experiment config.
        #[arg(long)]
        config: PathBuf,
    },
    /// Validate a correspondences CSV or a track JSON file.
    IngestCheck {
        /// 4-column CSV of u_x,u_y,v_x,v_y rows.
        #[arg(long, conflicts_with = "tracks")]
        corrs: Option<PathBuf>,
        /// Track JSON with cameras and 2-D observations.
        #[arg(long)]
        tracks: Option<PathBuf>,
    },
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .with_context(|| format!("creating directory {}", parent.display()))?;
        }
    }
    Ok(())
}

fn instance_len(instance: &schema::InstanceFile) -> usize {
    match &instance.data {
        schema::InstanceData::Regression { b, .. } => b.len(),
        schema::InstanceData::Correspondences(c) => c.len(),
        schema::InstanceData::Views(v) => v.len(),
    }
}

fn cmd_generate(config: &Path, out_override: Option<PathBuf>) -> Result<()> {
    let text = fs::read_to_string(config)
        .with_context(|| format!("reading config {}", config.display()))?;
    let mut cfg: GenerateConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing config {}", config.display()))?;
    if let Some(out) = out_override {
        cfg.out = out.to_string_lossy().into_owned();
    }
    if cfg.out.is_empty() {
        bail!("no output path: set \"out\" in the config or pass --out");
    }
    let (instance, gt) = generate::synthesize(&cfg)?;
    let out_path = PathBuf::from(&cfg.out);
    ensure_parent(&out_path)?;
    fs::write(&out_path, serde_json::to_string_pretty(&instance)?)
        .with_context(|| format!("writing {}", out_path.display()))?;
    let gt_path = sidecar_path(&out_path);
    fs::write(&gt_path, serde_json::to_string_pretty(&gt)?)
        .with_context(|| format!("writing {}", gt_path.display()))?;
    println!(
        "wrote {} ({} data) and {}",
        out_path.display(),
        instance_len(&instance),
        gt_path.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_fit(
    instance: &Path,
    method: &str,
    seed: u64,
    x0: Option<&str>,
    epsilon: Option<f64>,
    tol: f64,
    max_iters: usize,
    out: Option<PathBuf>,
) -> Result<()> {
    let method = parse_method(method)?;
    let file = schema::load_instance(instance)?;
    let problem = run::build_problem(&file, epsilon)?;
    let gt = {
        let path = sidecar_path(instance);
        if path.exists() {
            Some(schema::load_ground_truth(&path)?)
        } else {
            None
        }
    };
    let x0_values: Option<Vec<f64>> = match x0 {
        Some(text) => Some(
            text.split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .context("parsing --x0")?,
        ),
        None => None,
    };
    let record = run::run_method(
        &problem,
        method,
        seed,
        tol,
        max_iters,
        x0_values.as_deref(),
        gt.as_ref(),
    )?;
    if record.solver_failure {
        eprintln!("warning: a conic subsolve reported numerical failure; best iterate used");
    }
    let json = serde_json::to_string_pretty(&record)?;
    println!("{json}");
    if let Some(out) = out {
        ensure_parent(&out)?;
        fs::write(&out, json).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}

fn cmd_sweep(config: &Path) -> Result<()> {
    let text = fs::read_to_string(config)
        .with_context(|| format!("reading config {}", config.display()))?;
    let cfg: schema::ExperimentConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing config {}", config.display()))?;
    cfg.validate()?;
    let out_dir = PathBuf::from(&cfg.out_dir);
    fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;

    let (records, failures) = run::run_sweep(&cfg)?;
    for failure in &failures {
        eprintln!("warning: sweep cell failed: {failure}");
    }

    let jsonl: String = records
        .iter()
        .map(|r| serde_json::to_string(r).expect("record serializes"))
        .collect::<Vec<_>>()
        .join("\n");
    let runs_path = out_dir.join("runs.jsonl");
    fs::write(&runs_path, jsonl + "\n")?;

    let rows = run::aggregate(&cfg, &records);
    let csv_path = out_dir.join("sweep.csv");
    fs::write(&csv_path, run::rows_to_csv(&rows))?;
    println!(
        "wrote {} ({} rows) and {} ({} records)",
        csv_path.display(),
        rows.len(),
        runs_path.display(),
        records.len()
    );
    Ok(())
}

fn cmd_ingest_check(corrs: Option<&Path>, tracks: Option<&Path>) -> Result<()> {
    match (corrs, tracks) {
        (Some(path), None) => {
            let data = ingest::ingest_correspondences(path)?;
            println!("ok: {} correspondences from {}", data.len(), path.display());
            Ok(())
        }
        (None, Some(path)) => {
            let data = ingest::ingest_tracks(path)?;
            println!("ok: {} views from {}", data.len(), path.display());
            Ok(())
        }
        _ => bail!("pass exactly one of --corrs or --tracks"),
    }
}

fn main() {
    if let Ok(threads) = std::env::var("MAXCON_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate { config, out } => cmd_generate(&config, out),
        Command::Fit {
            instance,
            method,
            seed,
            x0,
            epsilon,
            tol,
            max_iters,
            out,
        } => cmd_fit(
            &instance,
            &method,
            seed,
            x0.as_deref(),
            epsilon,
            tol,
            max_iters,
            out,
        ),
        Command::Sweep { config } => cmd_sweep(&config),
        Command::IngestCheck { corrs, tracks } => {
            cmd_ingest_check(corrs.as_deref(), tracks.as_deref())
        }
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

//! Experiment runner CLI.
//!
//! Subcommands: `generate` (model + observations to JSON), `run` (one
//! pipeline run), `sweep` (sparsity grid), `report` (re-aggregate an
//! existing sweep CSV). Flags mirror the config fields; a TOML config file
//! may supply defaults that flags override. `TENSORCF_OUTPUT_DIR`
//! overrides the output directory. Exit code is 0 on success; failures
//! print a machine-readable error JSON and exit nonzero.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use tensorcf::error::{Error, Result};
use tensorcf::experiment::{
    parse_sweep_csv, run_single, run_sweep, summarize, summary_csv, sweep_csv, AutoOr,
    ExperimentConfig, SamplingMode,
};
use tensorcf::model::{sample_latent_model, sample_observations, Basis};
use tensorcf::rng;

#[derive(Parser)]
#[command(name = "tensorcf", version, about = "Sparse 3-order tensor estimation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// TOML config file supplying defaults for the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    /// Comma-separated eigenvalues, e.g. `1.0,0.6`.
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Direct sampling density (exclusive with --epsilon).
    #[arg(long)]
    p: Option<f64>,
    /// Exponent-form sparsity: p = n^(-3/2 + epsilon).
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    psi: Option<f64>,
    /// Neighbor threshold: a number or `auto`.
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    eta_scale: Option<f64>,
    /// Expansion radius: an integer or `auto`.
    #[arg(long)]
    t: Option<String>,
    #[arg(long)]
    split_prob: Option<f64>,
    /// `split` (one sample, halved) or `fresh` (two independent samples).
    #[arg(long)]
    sampling: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Record naive shared-pair baseline diagnostics.
    #[arg(long)]
    baseline: bool,
    /// Record oracle distance-concentration diagnostics.
    #[arg(long)]
    oracle: bool,
}

impl ConfigArgs {
    fn build(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::from_toml(&fs::read_to_string(path)?)?,
            None => ExperimentConfig::default(),
        };
        if let Some(n) = self.n {
            config.n = n;
        }
        if let Some(r) = self.r {
            config.r = r;
        }
        if let Some(l) = &self.lambdas {
            config.lambdas = l.clone();
        }
        if let Some(s) = self.sigma {
            config.sigma = s;
        }
        if let Some(p) = self.p {
            config.p = Some(p);
            config.epsilon = None;
        }
        if let Some(eps) = self.epsilon {
            config.epsilon = Some(eps);
            config.p = None;
        }
        if let Some(psi) = self.psi {
            config.psi = psi;
        }
        if let Some(eta) = &self.eta {
            config.eta = if eta == "auto" {
                AutoOr::default()
            } else {
                AutoOr::Value(
                    eta.parse().map_err(|e| Error::Config(format!("bad --eta {eta:?}: {e}")))?,
                )
            };
        }
        if let Some(c) = self.eta_scale {
            config.eta_scale = c;
        }
        if let Some(t) = &self.t {
            config.t = if t == "auto" {
                AutoOr::default()
            } else {
                AutoOr::Value(
                    t.parse().map_err(|e| Error::Config(format!("bad --t {t:?}: {e}")))?,
                )
            };
        }
        if let Some(s) = self.split_prob {
            config.split_prob = s;
        }
        if let Some(mode) = &self.sampling {
            config.sampling = match mode.as_str() {
                "split" => SamplingMode::Split,
                "fresh" => SamplingMode::Fresh,
                other => return Err(Error::Config(format!("bad --sampling {other:?}"))),
            };
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(trials) = self.trials {
            config.trials = trials;
        }
        if self.baseline {
            config.baseline = true;
        }
        if self.oracle {
            config.oracle = true;
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample a latent model and observation set, serialized as JSON.
    Generate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the full pipeline once per trial and write metrics JSON.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write the distance matrix as CSV.
        #[arg(long)]
        export_distances: bool,
        /// Also write the dense estimates as CSV.
        #[arg(long)]
        export_estimates: bool,
    },
    /// Run a grid of epsilon values, several trials each.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Comma-separated epsilon grid, e.g. `0.2,0.3,0.4`.
        #[arg(long, value_delimiter = ',', required = true)]
        epsilon_grid: Vec<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Re-aggregate an existing sweep CSV into a summary CSV.
    Report {
        /// Sweep CSV produced by the `sweep` subcommand.
        #[arg(long)]
        input: PathBuf,
        /// Summary destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn output_dir(requested: &Path) -> PathBuf {
    match std::env::var_os("TENSORCF_OUTPUT_DIR") {
        Some(dir) => PathBuf::from(dir),
        None => requested.to_path_buf(),
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

fn cmd_generate(args: &ConfigArgs, out: &Path) -> Result<Vec<PathBuf>> {
    let config = args.build()?;
    config.validate()?;
    let p = config.resolved_p()?;
    let model = sample_latent_model(
        config.n,
        config.r,
        &config.lambdas,
        Basis::Legendre,
        rng::subseed(config.seed, "model"),
    )?;
    let obs = sample_observations(&model, p, config.sigma, rng::subseed(config.seed, "obs"))?;
    let dir = output_dir(out);
    let model_path = dir.join("model.json");
    let obs_path = dir.join("observations.json");
    write(&model_path, &serde_json::to_string_pretty(&model)?)?;
    write(&obs_path, &serde_json::to_string_pretty(&obs)?)?;
    Ok(vec![model_path, obs_path])
}

fn cmd_run(
    args: &ConfigArgs,
    out: &Path,
    export_distances: bool,
    export_estimates: bool,
) -> Result<Vec<PathBuf>> {
    let config = args.build()?;
    let dir = output_dir(out);
    let mut written = Vec::new();
    for trial in 0..config.trials {
        let seed = if config.trials == 1 {
            config.seed
        } else {
            rng::subseed(config.seed, &format!("trial/{trial}"))
        };
        let output = run_single(&config, seed)?;
        let suffix = if config.trials == 1 { String::new() } else { format!("_{trial}") };
        let metrics_path = dir.join(format!("metrics{suffix}.json"));
        write(&metrics_path, &output.summary_json())?;
        written.push(metrics_path);
        if export_distances {
            let mut buf = Vec::new();
            output.distances.write_csv(&mut buf)?;
            let path = dir.join(format!("distances{suffix}.csv"));
            write(&path, std::str::from_utf8(&buf).expect("ascii csv"))?;
            written.push(path);
        }
        if export_estimates {
            let mut buf = Vec::new();
            output.estimates.write_csv(&mut buf)?;
            let path = dir.join(format!("estimates{suffix}.csv"));
            write(&path, std::str::from_utf8(&buf).expect("ascii csv"))?;
            written.push(path);
        }
    }
    Ok(written)
}

fn cmd_sweep(args: &ConfigArgs, grid: &[f64], out: &Path) -> Result<Vec<PathBuf>> {
    if grid.is_empty() {
        return Err(Error::Config("empty epsilon grid".into()));
    }
    let config = args.build()?;
    let rows = run_sweep(&config, grid, config.trials);
    let summary = summarize(&rows);
    let dir = output_dir(out);
    let sweep_path = dir.join("sweep.csv");
    let summary_path = dir.join("summary.csv");
    write(&sweep_path, &sweep_csv(&rows))?;
    write(&summary_path, &summary_csv(&summary))?;
    Ok(vec![sweep_path, summary_path])
}

fn cmd_report(input: &Path, out: Option<&Path>) -> Result<Vec<PathBuf>> {
    let rows = parse_sweep_csv(&fs::read_to_string(input)?)?;
    let text = summary_csv(&summarize(&rows));
    match out {
        Some(path) => {
            let path = output_dir(path.parent().unwrap_or(Path::new("."))).join(
                path.file_name().map(PathBuf::from).unwrap_or_else(|| PathBuf::from("summary.csv")),
            );
            write(&path, &text)?;
            Ok(vec![path])
        }
        None => {
            print!("{text}");
            Ok(vec![])
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate { config, out } => cmd_generate(config, out),
        Command::Run { config, out, export_distances, export_estimates } => {
            cmd_run(config, out, *export_distances, *export_estimates)
        }
        Command::Sweep { config, epsilon_grid, out } => cmd_sweep(config, epsilon_grid, out),
        Command::Report { input, out } => cmd_report(input, out.as_deref()),
    };
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let doc = json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            println!("{doc}");
            ExitCode::FAILURE
        }
    }
}

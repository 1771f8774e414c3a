//! Config-driven experiment runner: generate an instance, run the full
//! pipeline, sweep sparsity grids, aggregate results.
//!
//! All randomness flows from a single master seed through labeled
//! sub-streams, so a run is reproduced exactly by its config and seed, and
//! any grid cell can be re-run in isolation.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bfs::expansion_radius;
use crate::distance::{
    all_pairs_distances, clip_threshold, DistanceMatrix, DistanceParams, SharedPairIndex,
};
use crate::error::{Error, Result};
use crate::estimator::{default_eta, DenseEstimate, TensorEstimator};
use crate::graph::build_bipartite_graph;
use crate::metrics::{
    distance_concentration_report, error_metrics, ConcentrationReport, MetricsReport,
};
use crate::model::{sample_latent_model, sample_observations, Basis, LatentModel};
use crate::rng;
use crate::split::{
    fresh_observation_pair, lower_half_len, split_observations_with, SplitObservations,
};
use rand::Rng;

/// `auto` or an explicit value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AutoOr<T> {
    /// The literal string `"auto"`.
    Tag(AutoTag),
    Value(T),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

impl<T> Default for AutoOr<T> {
    fn default() -> Self {
        AutoOr::Tag(AutoTag::Auto)
    }
}

/// How the two observation halves are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    /// One draw at density `p`, Bernoulli-split into two halves.
    #[default]
    Split,
    /// Two independent draws, each at full density `p`.
    Fresh,
}

/// Full description of one experiment; every field has a default so a
/// config document only lists what it overrides.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub r: usize,
    pub lambdas: Vec<f64>,
    pub sigma: f64,
    /// Direct sparsity; exclusive with `epsilon`.
    pub p: Option<f64>,
    /// Exponent-form sparsity `p = n^(-3/2 + epsilon)`; required by the
    /// auto radius and auto threshold.
    pub epsilon: Option<f64>,
    /// Bias-variance exponent used by the auto neighbor threshold.
    pub psi: f64,
    /// When set, overrides `psi` with `psi_fraction * epsilon` (useful in
    /// sweeps where the exponent tracks the sparsity).
    pub psi_fraction: Option<f64>,
    /// Neighbor threshold, `"auto"` for `eta_scale * n^-(epsilon - psi)`.
    pub eta: AutoOr<f64>,
    /// Constant in front of the auto threshold.
    pub eta_scale: f64,
    /// Expansion radius, `"auto"` to derive it from the density.
    pub t: AutoOr<usize>,
    pub split_prob: f64,
    pub sampling: SamplingMode,
    pub seed: u64,
    pub trials: usize,
    /// Record naive shared-pair baseline diagnostics.
    pub baseline: bool,
    /// Record oracle distance-concentration diagnostics.
    pub oracle: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n: 100,
            r: 2,
            lambdas: vec![1.0, 0.6],
            sigma: 0.05,
            p: None,
            epsilon: Some(0.3),
            psi: 0.075,
            psi_fraction: None,
            eta: AutoOr::default(),
            eta_scale: 1.0,
            t: AutoOr::default(),
            split_prob: 0.5,
            sampling: SamplingMode::Split,
            seed: 0,
            trials: 1,
            baseline: false,
            oracle: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Density implied by the sparsity spec.
    pub fn resolved_p(&self) -> Result<f64> {
        match (self.p, self.epsilon) {
            (Some(_), Some(_)) => {
                Err(Error::Config("set either p or epsilon, not both".into()))
            }
            (Some(p), None) => {
                if p > 0.0 && p <= 1.0 {
                    Ok(p)
                } else {
                    Err(Error::Config(format!("p = {p} outside (0, 1]")))
                }
            }
            (None, Some(eps)) => {
                if eps <= 0.0 {
                    return Err(Error::Config(format!("epsilon = {eps} must be positive")));
                }
                let p = (self.n as f64).powf(-1.5 + eps);
                if p > 1.0 {
                    return Err(Error::Config(format!(
                        "epsilon = {eps} implies p = {p} > 1 at n = {}",
                        self.n
                    )));
                }
                Ok(p)
            }
            (None, None) => Err(Error::Config("missing sparsity: set p or epsilon".into())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.split_prob) {
            return Err(Error::Config(format!("split_prob = {} outside [0, 1]", self.split_prob)));
        }
        self.resolved_p()?;
        if matches!(self.eta, AutoOr::Tag(_)) && self.epsilon.is_none() {
            return Err(Error::Config("auto eta requires epsilon-form sparsity".into()));
        }
        if matches!(self.t, AutoOr::Tag(_)) && self.epsilon.is_none() {
            return Err(Error::Config("auto t requires epsilon-form sparsity".into()));
        }
        Ok(())
    }

    fn resolved_t(&self, p: f64) -> Result<usize> {
        match self.t {
            AutoOr::Value(t) => {
                if t == 0 {
                    Err(Error::Config("t must be >= 1".into()))
                } else {
                    Ok(t)
                }
            }
            AutoOr::Tag(_) => expansion_radius(self.n, p),
        }
    }

    fn resolved_eta(&self) -> Result<f64> {
        match self.eta {
            AutoOr::Value(v) => Ok(v),
            AutoOr::Tag(_) => {
                let eps = self.epsilon.expect("validated");
                let psi = self.psi_fraction.map(|f| f * eps).unwrap_or(self.psi);
                default_eta(self.n, eps, psi, self.eta_scale)
            }
        }
    }
}

/// Naive shared-pair baseline diagnostics over sampled coordinate pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineReport {
    pub sampled_pairs: usize,
    /// Fraction of sampled pairs with no shared observed pair at all.
    pub naive_invalid_fraction: f64,
    /// Fraction of the same sampled pairs with a valid pipeline distance.
    pub bfs_valid_fraction: f64,
}

/// Everything a single run produces.
#[derive(Debug)]
pub struct RunOutput {
    pub config: ExperimentConfig,
    pub report: MetricsReport,
    pub distances: DistanceMatrix,
    pub estimates: DenseEstimate,
    pub model: LatentModel,
    pub p: f64,
    pub t: usize,
    pub phi: Option<u32>,
    pub eta: f64,
    pub baseline: Option<BaselineReport>,
    pub concentration: Option<ConcentrationReport>,
}

/// Run the whole pipeline once under the given master seed.
pub fn run_single(config: &ExperimentConfig, seed: u64) -> Result<RunOutput> {
    config.validate()?;
    let p = config.resolved_p()?;
    // the whole method presumes the connectivity regime, whatever t is
    let growth = p * p * (config.n as f64).powi(3);
    if growth <= 1.0 {
        return Err(Error::BelowThreshold { n: config.n, p, value: growth });
    }
    let t = config.resolved_t(p)?;
    let eta = config.resolved_eta()?;
    // clipping is defined only in the sparse regime; otherwise disabled
    let phi = clip_threshold(config.n, p).ok();
    let model = sample_latent_model(
        config.n,
        config.r,
        &config.lambdas,
        Basis::Legendre,
        rng::subseed(seed, "model"),
    )?;
    let split: SplitObservations = match config.sampling {
        SamplingMode::Split => {
            let obs = sample_observations(&model, p, config.sigma, rng::subseed(seed, "obs"))?;
            split_observations_with(&obs, config.split_prob, rng::subseed(seed, "split"))?
        }
        SamplingMode::Fresh => {
            fresh_observation_pair(&model, p, config.sigma, rng::subseed(seed, "obs"))?
        }
    };
    let m = lower_half_len(config.n);
    let graph = build_bipartite_graph(&split.omega1, m, config.n);
    let params = DistanceParams { t, p_eff: split.omega1.p, phi };
    let distances = all_pairs_distances(&graph, &split.omega1, &params, rng::subseed(seed, "trees"));
    let estimator = TensorEstimator::new(&distances, &split.omega3, eta);
    let estimates = estimator.estimate_dense();
    let (mse, max_error) = error_metrics(&estimates, &model);
    let report = MetricsReport {
        mse,
        max_error,
        fallback_fraction: estimates.fallback_fraction,
        valid_pair_fraction: distances.valid_pair_fraction(),
        seed,
    };
    let baseline = if config.baseline {
        Some(baseline_report(&model, config, &distances, seed)?)
    } else {
        None
    };
    let concentration = if config.oracle {
        Some(distance_concentration_report(
            &distances,
            &model,
            t,
            500,
            eta,
            rng::subseed(seed, "concentration-sample"),
        ))
    } else {
        None
    };
    Ok(RunOutput {
        config: config.clone(),
        report,
        distances,
        estimates,
        model,
        p,
        t,
        phi,
        eta,
        baseline,
        concentration,
    })
}

/// Compare naive shared-pair validity against pipeline validity over
/// sampled coordinate pairs. The naive index sees the full (unsplit)
/// observation set, the most favorable reading for the baseline.
fn baseline_report(
    model: &LatentModel,
    config: &ExperimentConfig,
    distances: &DistanceMatrix,
    seed: u64,
) -> Result<BaselineReport> {
    let p = config.resolved_p()?;
    let obs = sample_observations(model, p, config.sigma, rng::subseed(seed, "obs"))?;
    let index = SharedPairIndex::build(&obs);
    let mut gen = rng::stream(seed, "baseline-sample");
    let n = config.n;
    let target = 1000.min(n * (n - 1) / 2);
    let mut sampled = 0usize;
    let mut naive_invalid = 0usize;
    let mut bfs_valid = 0usize;
    while sampled < target {
        let u = gen.random_range(0..n);
        let v = gen.random_range(0..n);
        if u == v {
            continue;
        }
        sampled += 1;
        let (_, count) = index.distance(u, v);
        if count == 0 {
            naive_invalid += 1;
        }
        if distances.is_valid(u, v) {
            bfs_valid += 1;
        }
    }
    Ok(BaselineReport {
        sampled_pairs: sampled,
        naive_invalid_fraction: naive_invalid as f64 / sampled as f64,
        bfs_valid_fraction: bfs_valid as f64 / sampled as f64,
    })
}

/// One sweep row; failures carry the error text and empty metrics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: Option<f64>,
    pub p: f64,
    pub trial: usize,
    pub seed: u64,
    pub mse: Option<f64>,
    pub max_error: Option<f64>,
    pub fallback_fraction: Option<f64>,
    pub valid_pair_fraction: Option<f64>,
    pub wall_time_s: f64,
    pub failed: bool,
    pub error: Option<String>,
}

/// Median-aggregated view of one grid cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryRow {
    pub epsilon: Option<f64>,
    pub p: f64,
    pub trials: usize,
    pub failures: usize,
    pub median_mse: Option<f64>,
    pub median_max_error: Option<f64>,
}

fn median(values: &mut Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = values.len();
    Some(if k % 2 == 1 { values[k / 2] } else { 0.5 * (values[k / 2 - 1] + values[k / 2]) })
}

/// Run `trials` seeds for every epsilon in the grid. A failed cell becomes
/// a failure row; it never aborts the sweep.
pub fn run_sweep(base: &ExperimentConfig, epsilons: &[f64], trials: usize) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    for (gi, &eps) in epsilons.iter().enumerate() {
        let mut config = base.clone();
        config.p = None;
        config.epsilon = Some(eps);
        for trial in 0..trials {
            let seed = rng::subseed(base.seed, &format!("cell/{gi}/{trial}"));
            let start = Instant::now();
            let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
                run_single(&config, seed)
            }));
            let wall = start.elapsed().as_secs_f64();
            let row = match outcome {
                Ok(Ok(out)) => SweepRow {
                    epsilon: Some(eps),
                    p: out.p,
                    trial,
                    seed,
                    mse: Some(out.report.mse),
                    max_error: Some(out.report.max_error),
                    fallback_fraction: Some(out.report.fallback_fraction),
                    valid_pair_fraction: Some(out.report.valid_pair_fraction),
                    wall_time_s: wall,
                    failed: false,
                    error: None,
                },
                Ok(Err(e)) => SweepRow {
                    epsilon: Some(eps),
                    p: config.resolved_p().unwrap_or(f64::NAN),
                    trial,
                    seed,
                    mse: None,
                    max_error: None,
                    fallback_fraction: None,
                    valid_pair_fraction: None,
                    wall_time_s: wall,
                    failed: true,
                    error: Some(e.to_string()),
                },
                Err(_) => SweepRow {
                    epsilon: Some(eps),
                    p: config.resolved_p().unwrap_or(f64::NAN),
                    trial,
                    seed,
                    mse: None,
                    max_error: None,
                    fallback_fraction: None,
                    valid_pair_fraction: None,
                    wall_time_s: wall,
                    failed: true,
                    error: Some("panic in grid cell".into()),
                },
            };
            rows.push(row);
        }
    }
    rows
}

/// Median aggregation per grid cell. Cells are keyed by bit pattern so
/// failure rows (NaN density) still group together.
pub fn summarize(rows: &[SweepRow]) -> Vec<SummaryRow> {
    let key = |e: Option<f64>, p: f64| (e.map(f64::to_bits), p.to_bits());
    let mut cells: Vec<(Option<f64>, f64)> = Vec::new();
    for row in rows {
        if !cells.iter().any(|&(e, p)| key(e, p) == key(row.epsilon, row.p)) {
            cells.push((row.epsilon, row.p));
        }
    }
    cells
        .into_iter()
        .map(|(eps, p)| {
            let cell: Vec<&SweepRow> =
                rows.iter().filter(|r| key(r.epsilon, r.p) == key(eps, p)).collect();
            let mut mses: Vec<f64> = cell.iter().filter_map(|r| r.mse).collect();
            let mut maxes: Vec<f64> = cell.iter().filter_map(|r| r.max_error).collect();
            SummaryRow {
                epsilon: eps,
                p,
                trials: cell.len(),
                failures: cell.iter().filter(|r| r.failed).count(),
                median_mse: median(&mut mses),
                median_max_error: median(&mut maxes),
            }
        })
        .collect()
}

const SWEEP_HEADER: &str =
    "epsilon,p,trial,seed,mse,max_error,fallback_fraction,valid_pair_fraction,wall_time_s,failed";

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v}")).unwrap_or_default()
}

/// Sweep rows as CSV with a versioned header comment.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("# tensorcf sweep v1\n");
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            fmt_opt(r.epsilon),
            r.p,
            r.trial,
            r.seed,
            fmt_opt(r.mse),
            fmt_opt(r.max_error),
            fmt_opt(r.fallback_fraction),
            fmt_opt(r.valid_pair_fraction),
            r.wall_time_s,
            r.failed
        )
        .unwrap();
    }
    out
}

/// Summary rows as CSV.
pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("# tensorcf sweep summary v1\n");
    out.push_str("epsilon,p,trials,failures,median_mse,median_max_error\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_opt(r.epsilon),
            r.p,
            r.trials,
            r.failures,
            fmt_opt(r.median_mse),
            fmt_opt(r.median_max_error)
        )
        .unwrap();
    }
    out
}

/// Parse a sweep CSV back into rows (for re-aggregation).
pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("epsilon,") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(Error::Config(format!(
                "sweep row has {} fields, expected 10: {line}",
                fields.len()
            )));
        }
        let opt = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse::<f64>()
                    .map(Some)
                    .map_err(|e| Error::Config(format!("bad number {s:?}: {e}")))
            }
        };
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|e| Error::Config(format!("bad number {s:?}: {e}")))
        };
        rows.push(SweepRow {
            epsilon: opt(fields[0])?,
            p: num(fields[1])?,
            trial: fields[2]
                .parse()
                .map_err(|e| Error::Config(format!("bad trial {:?}: {e}", fields[2])))?,
            seed: fields[3]
                .parse()
                .map_err(|e| Error::Config(format!("bad seed {:?}: {e}", fields[3])))?,
            mse: opt(fields[4])?,
            max_error: opt(fields[5])?,
            fallback_fraction: opt(fields[6])?,
            valid_pair_fraction: opt(fields[7])?,
            wall_time_s: num(fields[8])?,
            failed: fields[9] == "true",
            error: None,
        });
    }
    Ok(rows)
}

/// Metrics JSON written next to run artifacts; content is fully determined
/// by (config, seed).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummaryJson {
    pub config: ExperimentConfig,
    pub p: f64,
    pub t: usize,
    pub phi: Option<u32>,
    pub eta: f64,
    pub metrics: MetricsReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub concentration: Option<ConcentrationReport>,
}

impl RunOutput {
    pub fn summary_json(&self) -> String {
        let doc = RunSummaryJson {
            config: self.config.clone(),
            p: self.p,
            t: self.t,
            phi: self.phi,
            eta: self.eta,
            metrics: self.report.clone(),
            baseline: self.baseline.clone(),
            concentration: self.concentration.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("summary serializes")
    }
}

//! The simulation harness: sparsity-level scaling and signal-gap stability
//! sweeps over synthetic models, replicated over seeds, with deterministic
//! CSV output.
//!
//! Determinism contract: a `(config, seed)` pair fully determines the result
//! bytes. Grid points run in a work-stealing pool but each row draws from
//! its own RNG substream and rows are collected in grid order, so thread
//! count never changes the output.

use crate::error::{IhtError, Result};
use crate::linalg::{hard_threshold, DenseVector, SupportSet};
use crate::loss::{loss_value, Dataset, LossModel};
use crate::rng::RngStream;
use crate::solver::{iht_run, IhtConfig, StepSize};
use crate::stability::{iht_stability_trace, support_overlap};
use crate::stats::mean_and_stderr;
use crate::synth::{gen_dataset, GenerativeSpec};
use rayon::prelude::*;
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

mod label {
    pub const TRUTH: u64 = 0x21;
    pub const EVAL: u64 = 0x22;
    pub const REPLICATE: u64 = 0x23;
    pub const SOLVER: u64 = 0x24;
}

/// Which of the two simulation protocols to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    /// Excess risk as a function of the sparsity level k and sample size.
    SparsityScaling,
    /// Excess risk as a function of the signal gap of the target model.
    StabilitySweep,
}

impl Protocol {
    pub fn as_str(&self) -> &'static str {
        match self {
            Protocol::SparsityScaling => "scaling",
            Protocol::StabilitySweep => "stability",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "scaling" => Ok(Protocol::SparsityScaling),
            "stability" => Ok(Protocol::StabilitySweep),
            other => Err(IhtError::InvalidConfig(format!("unknown protocol {other:?}"))),
        }
    }
}

/// Full description of an experiment sweep.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub protocol: Protocol,
    pub p: usize,
    pub k_bar: usize,
    /// Sparsity levels k for the scaling protocol.
    pub sparsity_grid: Vec<usize>,
    /// Signal gaps for the stability sweep.
    pub gap_grid: Vec<f64>,
    /// Sample sizes n.
    pub sample_grid: Vec<usize>,
    pub replicates: usize,
    pub eta: StepSize,
    /// Evaluation-set size for Monte Carlo risk estimation (logistic).
    pub n_mc: usize,
    pub max_iters: usize,
    /// Linear-model noise standard deviation.
    pub sigma: f64,
    /// Standard deviation of the base Gaussian draw in the gap
    /// construction (stability sweep only). Sets how strongly the untouched
    /// entries compete with the injected gap.
    pub gap_base_scale: f64,
    /// Loss family for the scaling protocol (the sweep is linear).
    pub loss: LossModel,
    /// Magnitude of the nonzero entries of the ground truth.
    pub w_magnitude: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads (`None` uses the rayon default).
    pub threads: Option<usize>,
    pub emit_svg: bool,
}

impl ExperimentConfig {
    /// Desk-scale sparsity-level scaling: p = 200, k_bar = 10,
    /// k/k_bar in {1, 2, 3, 4}, n/p in {2, 5, 10}, logistic data.
    pub fn desk_scaling() -> Self {
        ExperimentConfig {
            protocol: Protocol::SparsityScaling,
            p: 200,
            k_bar: 10,
            sparsity_grid: vec![10, 20, 30, 40],
            gap_grid: vec![],
            sample_grid: vec![400, 1000, 2000],
            replicates: 10,
            eta: StepSize::Auto,
            n_mc: 100_000,
            max_iters: 300,
            sigma: 1.0,
            gap_base_scale: 0.15,
            loss: LossModel::Logistic,
            w_magnitude: 1.0,
            seed: 7,
            output_dir: PathBuf::from("results"),
            threads: None,
            emit_svg: false,
        }
    }

    /// Desk-scale stability sweep: p = 200, k_bar = 20, eta = 0.5,
    /// gap in {0.1, ..., 0.9}, n/p in {1, 5, 10}, linear data.
    pub fn desk_stability() -> Self {
        ExperimentConfig {
            protocol: Protocol::StabilitySweep,
            p: 200,
            k_bar: 20,
            sparsity_grid: vec![],
            gap_grid: (1..=9).map(|i| i as f64 / 10.0).collect(),
            sample_grid: vec![200, 1000, 2000],
            replicates: 10,
            eta: StepSize::Fixed(0.5),
            n_mc: 0,
            max_iters: 300,
            sigma: 0.6,
            gap_base_scale: 0.15,
            loss: LossModel::Squared,
            w_magnitude: 1.0,
            seed: 7,
            output_dir: PathBuf::from("results"),
            threads: None,
            emit_svg: false,
        }
    }

    /// The published experiment scale for the scaling protocol:
    /// p = 1000, k_bar = 50, k/k_bar in [1, 4], n/p in {2, 5, 10}.
    pub fn paper_6_1() -> Self {
        ExperimentConfig {
            p: 1000,
            k_bar: 50,
            sparsity_grid: vec![50, 100, 150, 200],
            sample_grid: vec![2000, 5000, 10_000],
            n_mc: 200_000,
            max_iters: 500,
            ..ExperimentConfig::desk_scaling()
        }
    }

    /// The published experiment scale for the stability sweep:
    /// p = 1000, k_bar = 100, eta = 0.5, n/p in {1, 5, 10}.
    pub fn paper_6_2() -> Self {
        ExperimentConfig {
            p: 1000,
            k_bar: 100,
            sample_grid: vec![1000, 5000, 10_000],
            max_iters: 500,
            ..ExperimentConfig::desk_stability()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 2 || self.k_bar == 0 || self.k_bar >= self.p {
            return Err(IhtError::InvalidConfig(
                "need p >= 2 and 1 <= k_bar < p".into(),
            ));
        }
        if self.replicates == 0 {
            return Err(IhtError::InvalidConfig("replicates must be >= 1".into()));
        }
        if self.sample_grid.is_empty() || self.sample_grid.contains(&0) {
            return Err(IhtError::InvalidConfig("sample grid must be nonempty and positive".into()));
        }
        if self.max_iters == 0 {
            return Err(IhtError::InvalidConfig("max_iters must be >= 1".into()));
        }
        if !(self.w_magnitude.is_finite() && self.w_magnitude > 0.0)
            || !(self.sigma.is_finite() && self.sigma >= 0.0)
        {
            return Err(IhtError::InvalidConfig(
                "w_magnitude must be > 0 and sigma >= 0".into(),
            ));
        }
        match self.protocol {
            Protocol::SparsityScaling => {
                if self.sparsity_grid.is_empty() || self.sparsity_grid.contains(&0) {
                    return Err(IhtError::InvalidConfig(
                        "scaling protocol needs a nonempty positive sparsity grid".into(),
                    ));
                }
                if self.loss == LossModel::Logistic && self.n_mc == 0 {
                    return Err(IhtError::InvalidConfig(
                        "logistic scaling needs n_mc >= 1 for risk evaluation".into(),
                    ));
                }
            }
            Protocol::StabilitySweep => {
                if self.gap_grid.is_empty()
                    || self.gap_grid.iter().any(|g| !(g.is_finite() && *g >= 0.0))
                {
                    return Err(IhtError::InvalidConfig(
                        "stability sweep needs a nonempty nonnegative gap grid".into(),
                    ));
                }
                if !(self.gap_base_scale.is_finite() && self.gap_base_scale > 0.0) {
                    return Err(IhtError::InvalidConfig(
                        "gap_base_scale must be > 0".into(),
                    ));
                }
                match self.eta {
                    StepSize::Fixed(e) if e > 0.0 && e < 1.0 => {}
                    _ => {
                        return Err(IhtError::InvalidConfig(
                            "stability sweep needs a fixed step size in (0, 1)".into(),
                        ))
                    }
                }
            }
        }
        Ok(())
    }
}

/// One grid-point x replicate outcome. Failed solves keep their row with
/// NaN metrics so every grid point appears exactly once.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub protocol: Protocol,
    /// k for the scaling protocol, the signal gap for the sweep.
    pub grid_value: f64,
    pub n: usize,
    pub replicate: usize,
    pub excess_risk: f64,
    pub stderr: f64,
    pub min_margin: f64,
    pub support_jaccard: f64,
    pub iterations_used: usize,
    /// Kept at 0 in the emitted artifact: per-row timing is logged instead,
    /// because the output bytes must not depend on machine speed.
    pub wall_time: f64,
}

impl ResultRow {
    pub fn failed(&self) -> bool {
        !self.excess_risk.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
}

impl ExperimentResult {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.failed()).count()
    }

    /// Replicate-averaged excess risk per (grid value, n), NaN rows skipped;
    /// sorted by (grid value, n).
    pub fn replicate_means(&self) -> Vec<GridMean> {
        let mut keys: Vec<(u64, usize)> = self
            .rows
            .iter()
            .map(|r| (r.grid_value.to_bits(), r.n))
            .collect();
        keys.sort_unstable();
        keys.dedup();
        keys.iter()
            .map(|&(gb, n)| {
                let grid_value = f64::from_bits(gb);
                let samples: Vec<f64> = self
                    .rows
                    .iter()
                    .filter(|r| r.grid_value.to_bits() == gb && r.n == n && !r.failed())
                    .map(|r| r.excess_risk)
                    .collect();
                let (mean, stderr) = if samples.is_empty() {
                    (f64::NAN, f64::NAN)
                } else {
                    mean_and_stderr(&samples)
                };
                GridMean {
                    grid_value,
                    n,
                    mean_excess: mean,
                    stderr,
                    replicates: samples.len(),
                }
            })
            .collect()
    }

    /// Replicate-averaged `ln(excess)` per (grid value, n): the trend
    /// statistic of the stability sweep. Rows with non-positive or NaN
    /// excess are skipped.
    pub fn replicate_log_means(&self) -> Vec<GridMean> {
        let mut keys: Vec<(u64, usize)> = self
            .rows
            .iter()
            .map(|r| (r.grid_value.to_bits(), r.n))
            .collect();
        keys.sort_unstable();
        keys.dedup();
        keys.iter()
            .map(|&(gb, n)| {
                let samples: Vec<f64> = self
                    .rows
                    .iter()
                    .filter(|r| {
                        r.grid_value.to_bits() == gb && r.n == n && r.excess_risk.is_finite()
                            && r.excess_risk > 0.0
                    })
                    .map(|r| r.excess_risk.ln())
                    .collect();
                let (mean, stderr) = if samples.is_empty() {
                    (f64::NAN, f64::NAN)
                } else {
                    mean_and_stderr(&samples)
                };
                GridMean {
                    grid_value: f64::from_bits(gb),
                    n,
                    mean_excess: mean,
                    stderr,
                    replicates: samples.len(),
                }
            })
            .collect()
    }
}

/// Replicate-averaged summary for one grid point.
#[derive(Debug, Clone, Copy)]
pub struct GridMean {
    pub grid_value: f64,
    pub n: usize,
    pub mean_excess: f64,
    pub stderr: f64,
    pub replicates: usize,
}

fn run_in_pool<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(job()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| IhtError::InvalidConfig(format!("thread pool: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

/// Run the configured protocol.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    match cfg.protocol {
        Protocol::SparsityScaling => run_sparsity_scaling(cfg),
        Protocol::StabilitySweep => run_stability_sweep(cfg),
    }
}

/// Sparsity-level scaling: for every (k, n, replicate) generate
/// well-specified data, run IHT with refit, and measure the excess risk of
/// the refit estimator against the optimal sparse risk `F(w_bar)`.
///
/// For logistic data the population values have no closed form; both
/// `F(estimate)` and `F(w_bar)` are evaluated on one shared held-out sample
/// of `n_mc` points and differenced pointwise, which cancels most of the
/// Monte Carlo noise out of every comparison the protocol cares about.
pub fn run_sparsity_scaling(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    if cfg.protocol != Protocol::SparsityScaling {
        return Err(IhtError::InvalidConfig("config is not a scaling protocol".into()));
    }
    let root = RngStream::root(cfg.seed);
    let truth_seed = root.child(label::TRUTH).value();
    let spec = match cfg.loss {
        LossModel::Logistic => {
            GenerativeSpec::sparse_logistic(cfg.p, cfg.k_bar, cfg.w_magnitude, truth_seed)?
        }
        LossModel::Squared => GenerativeSpec::sparse_linear(
            cfg.p,
            cfg.k_bar,
            cfg.w_magnitude,
            cfg.sigma,
            truth_seed,
        )?,
    };
    let model = spec.loss_model();

    // shared evaluation context (w_bar is fixed across replicates)
    let eval = match model {
        LossModel::Squared => None,
        LossModel::Logistic => {
            let eval_spec = spec.clone().with_seed(root.child(label::EVAL).value());
            let eval_ds = gen_dataset(&eval_spec, cfg.n_mc)?;
            let base: Result<Vec<f64>> = (0..eval_ds.n())
                .map(|i| {
                    let (x, y) = eval_ds.row(i);
                    loss_value(model, &spec.w_bar, x, y)
                })
                .collect();
            Some((eval_ds, base?))
        }
    };

    let mut jobs = Vec::new();
    for &k in &cfg.sparsity_grid {
        for &n in &cfg.sample_grid {
            for rep in 0..cfg.replicates {
                jobs.push((k, n, rep));
            }
        }
    }

    let rows = run_in_pool(cfg.threads, || {
        jobs.par_iter()
            .map(|&(k, n, rep)| scaling_row(cfg, &spec, eval.as_ref(), k, n, rep, &root))
            .collect::<Vec<ResultRow>>()
    })?;
    Ok(ExperimentResult { rows })
}

fn scaling_row(
    cfg: &ExperimentConfig,
    spec: &GenerativeSpec,
    eval: Option<&(Dataset, Vec<f64>)>,
    k: usize,
    n: usize,
    rep: usize,
    root: &RngStream,
) -> ResultRow {
    let start = Instant::now();
    let model = spec.loss_model();
    let stream = root.child(label::REPLICATE).child(rep as u64);
    let outcome = (|| -> Result<(f64, f64, f64, f64, usize)> {
        let data = gen_dataset(&spec.clone().with_seed(stream.value()), n)?;
        let iht_cfg = IhtConfig::new(k)
            .with_eta(cfg.eta)
            .with_max_iters(cfg.max_iters)
            .with_refit(true)
            .with_seed(stream.child(label::SOLVER).value());
        let trace = iht_run(&data, model, &iht_cfg)?;
        let estimator = trace.estimator();

        let (excess, stderr) = match eval {
            Some((eval_ds, base_losses)) => {
                let diffs: Result<Vec<f64>> = (0..eval_ds.n())
                    .map(|i| {
                        let (x, y) = eval_ds.row(i);
                        Ok(loss_value(model, estimator, x, y)? - base_losses[i])
                    })
                    .collect();
                mean_and_stderr(&diffs?)
            }
            None => {
                let e = crate::risk::excess_risk(estimator, spec, cfg.k_bar)?;
                (e.value, e.stderr)
            }
        };
        let margin = trace.min_margin().unwrap_or(f64::INFINITY);
        let (_, jaccard) = support_overlap(&estimator.support(), &spec.w_bar.support());
        Ok((excess, stderr, margin, jaccard, trace.iterations_used()))
    })();

    let row = match outcome {
        Ok((excess_risk, stderr, min_margin, support_jaccard, iterations_used)) => ResultRow {
            protocol: Protocol::SparsityScaling,
            grid_value: k as f64,
            n,
            replicate: rep,
            excess_risk,
            stderr,
            min_margin,
            support_jaccard,
            iterations_used,
            wall_time: 0.0,
        },
        Err(e) => {
            log::warn!("scaling row (k={k}, n={n}, rep={rep}) failed: {e}");
            ResultRow {
                protocol: Protocol::SparsityScaling,
                grid_value: k as f64,
                n,
                replicate: rep,
                excess_risk: f64::NAN,
                stderr: f64::NAN,
                min_margin: f64::NAN,
                support_jaccard: f64::NAN,
                iterations_used: 0,
                wall_time: 0.0,
            }
        }
    };
    log::debug!(
        "scaling row (k={k}, n={n}, rep={rep}) finished in {:?}",
        start.elapsed()
    );
    row
}

/// Signal-gap stability sweep: for every (gap, n, replicate) build the
/// gap-construction target, generate linear data, run IHT at sparsity
/// `k_bar`, and measure the exact closed-form excess risk against the best
/// `k_bar`-sparse population risk. Each row also carries the minimum
/// hard-thresholding margin of the *population* IHT trace for its gap.
pub fn run_stability_sweep(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    if cfg.protocol != Protocol::StabilitySweep {
        return Err(IhtError::InvalidConfig("config is not a stability sweep".into()));
    }
    let eta = match cfg.eta {
        StepSize::Fixed(e) => e,
        StepSize::Auto => unreachable!("validate() rejects Auto for the sweep"),
    };
    let root = RngStream::root(cfg.seed);

    // target models are rebuilt per (gap, replicate): each replicate draws
    // its own base vector, so grid summaries average over the construction
    // randomness as well as over the data; within a replicate the base draw
    // is shared across gaps and sample sizes
    struct GapContext {
        gap: f64,
        spec: GenerativeSpec,
        top_support: SupportSet,
        population_margin: f64,
    }
    const POPULATION_TRACE_LEN: usize = 50;
    let make_context = |gap: f64, rep: usize| -> Result<GapContext> {
        let truth_seed = root.child(label::TRUTH).child(rep as u64).value();
        let w_tilde =
            crate::synth::gen_gap_model_scaled(cfg.p, cfg.k_bar, gap, truth_seed, cfg.gap_base_scale)?;
        let (_, top_support) = hard_threshold(&w_tilde, cfg.k_bar);
        let pop_trace = iht_stability_trace(
            |w| w.sub(&w_tilde),
            cfg.k_bar,
            eta,
            POPULATION_TRACE_LEN.min(cfg.max_iters),
            &DenseVector::zeros(cfg.p),
        )?;
        let spec =
            GenerativeSpec::linear_with_target(w_tilde, cfg.k_bar, cfg.sigma, gap, truth_seed)?;
        Ok(GapContext {
            gap,
            spec,
            top_support,
            population_margin: pop_trace.min_margin(),
        })
    };

    let mut jobs = Vec::new();
    for &gap in &cfg.gap_grid {
        for &n in &cfg.sample_grid {
            for rep in 0..cfg.replicates {
                jobs.push((gap, n, rep));
            }
        }
    }

    let rows = run_in_pool(cfg.threads, || {
        jobs.par_iter()
            .map(|&(gap, n, rep)| match make_context(gap, rep) {
                Ok(ctx) => sweep_row(
                    cfg,
                    &ctx.spec,
                    ctx.gap,
                    ctx.population_margin,
                    &ctx.top_support,
                    n,
                    rep,
                    &root,
                ),
                Err(e) => {
                    log::warn!("sweep context (gap={gap}, rep={rep}) failed: {e}");
                    ResultRow {
                        protocol: Protocol::StabilitySweep,
                        grid_value: gap,
                        n,
                        replicate: rep,
                        excess_risk: f64::NAN,
                        stderr: f64::NAN,
                        min_margin: f64::NAN,
                        support_jaccard: f64::NAN,
                        iterations_used: 0,
                        wall_time: 0.0,
                    }
                }
            })
            .collect::<Vec<ResultRow>>()
    })?;
    Ok(ExperimentResult { rows })
}

#[allow(clippy::too_many_arguments)]
fn sweep_row(
    cfg: &ExperimentConfig,
    spec: &GenerativeSpec,
    gap: f64,
    population_margin: f64,
    top_support: &SupportSet,
    n: usize,
    rep: usize,
    root: &RngStream,
) -> ResultRow {
    let start = Instant::now();
    let stream = root.child(label::REPLICATE).child(rep as u64);
    let outcome = (|| -> Result<(f64, f64, usize)> {
        let data = gen_dataset(&spec.clone().with_seed(stream.value()), n)?;
        let iht_cfg = IhtConfig::new(cfg.k_bar)
            .with_eta(cfg.eta)
            .with_max_iters(cfg.max_iters)
            .with_refit(true)
            .with_seed(stream.child(label::SOLVER).value());
        let trace = iht_run(&data, spec.loss_model(), &iht_cfg)?;
        let estimator = trace.estimator();
        let excess = crate::risk::excess_risk(estimator, spec, cfg.k_bar)?;
        let (_, jaccard) = support_overlap(&estimator.support(), top_support);
        Ok((excess.value, jaccard, trace.iterations_used()))
    })();

    let row = match outcome {
        Ok((excess_risk, support_jaccard, iterations_used)) => ResultRow {
            protocol: Protocol::StabilitySweep,
            grid_value: gap,
            n,
            replicate: rep,
            excess_risk,
            stderr: 0.0,
            min_margin: population_margin,
            support_jaccard,
            iterations_used,
            wall_time: 0.0,
        },
        Err(e) => {
            log::warn!("sweep row (gap={gap}, n={n}, rep={rep}) failed: {e}");
            ResultRow {
                protocol: Protocol::StabilitySweep,
                grid_value: gap,
                n,
                replicate: rep,
                excess_risk: f64::NAN,
                stderr: f64::NAN,
                min_margin: population_margin,
                support_jaccard: f64::NAN,
                iterations_used: 0,
                wall_time: 0.0,
            }
        }
    };
    log::debug!(
        "sweep row (gap={gap}, n={n}, rep={rep}) finished in {:?}",
        start.elapsed()
    );
    row
}

pub const CSV_HEADER: &str =
    "protocol,grid_value,n,replicate,excess_risk,stderr,min_margin,support_jaccard,iterations_used,wall_time";

/// Write results as RFC-4180 CSV (CRLF line endings, fixed header,
/// 17-significant-digit decimals). Byte-identical across reruns with the
/// same config and seed.
pub fn emit_csv(result: &ExperimentResult, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| IhtError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut out = BufWriter::new(file);
    let io_err = |source| IhtError::Io {
        path: path.display().to_string(),
        source,
    };
    write!(out, "{CSV_HEADER}\r\n").map_err(io_err)?;
    for r in &result.rows {
        write!(
            out,
            "{},{:.16e},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{},{}\r\n",
            r.protocol.as_str(),
            r.grid_value,
            r.n,
            r.replicate,
            r.excess_risk,
            r.stderr,
            r.min_margin,
            r.support_jaccard,
            r.iterations_used,
            // timing is logged, not persisted; see ResultRow::wall_time
            0,
        )
        .map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Read back a CSV written by [`emit_csv`].
pub fn read_csv(path: &Path) -> Result<ExperimentResult> {
    let file = std::fs::File::open(path).map_err(|source| IhtError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let reader = std::io::BufReader::new(file);
    let mut rows = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| IhtError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let line = line.trim_end_matches('\r');
        if lineno == 0 {
            if line != CSV_HEADER {
                return Err(IhtError::Parse {
                    path: path.display().to_string(),
                    line: 1,
                    message: "unexpected header".into(),
                });
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(IhtError::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                message: format!("expected 10 fields, found {}", fields.len()),
            });
        }
        let parse_f = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|e| IhtError::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                message: format!("bad {what} {s:?}: {e}"),
            })
        };
        let parse_u = |s: &str, what: &str| -> Result<usize> {
            s.parse::<usize>().map_err(|e| IhtError::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                message: format!("bad {what} {s:?}: {e}"),
            })
        };
        rows.push(ResultRow {
            protocol: Protocol::parse(fields[0])?,
            grid_value: parse_f(fields[1], "grid value")?,
            n: parse_u(fields[2], "n")?,
            replicate: parse_u(fields[3], "replicate")?,
            excess_risk: parse_f(fields[4], "excess risk")?,
            stderr: parse_f(fields[5], "stderr")?,
            min_margin: parse_f(fields[6], "min margin")?,
            support_jaccard: parse_f(fields[7], "jaccard")?,
            iterations_used: parse_u(fields[8], "iterations")?,
            wall_time: parse_f(fields[9], "wall time")?,
        });
    }
    Ok(ExperimentResult { rows })
}

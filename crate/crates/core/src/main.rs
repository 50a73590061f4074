//! Command-line front end for the experiment harness.
//!
//! Exit codes: 0 on success, 1 on configuration errors, 2 when the sweep
//! finished but some rows recorded solver failures.

use clap::{Args, Parser, Subcommand};
use iht_lab::experiment::{
    emit_csv, run_experiment, ExperimentConfig, ExperimentResult, Protocol,
};
use iht_lab::loss::LossModel;
use iht_lab::plot::emit_plot;
use iht_lab::solver::StepSize;
use iht_lab::stats::spearman;
use iht_lab::{IhtError, Result};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "iht-lab",
    version,
    about = "Sparse excess-risk experiments for iterative hard thresholding"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sparsity-level scaling sweep (excess risk vs k and n)
    Scaling(RunArgs),
    /// Signal-gap stability sweep (excess risk vs gap and n)
    Stability(RunArgs),
    /// Small fast run of both protocols, printing trend summaries
    Demo(DemoArgs),
}

#[derive(Args)]
struct RunArgs {
    /// key=value config file applied on top of the preset
    #[arg(long, env = "IHTLAB_CONFIG")]
    config: Option<PathBuf>,

    /// Output directory for CSV/SVG artifacts
    #[arg(long, env = "IHTLAB_OUT", default_value = "results")]
    out: PathBuf,

    /// Root seed of the experiment RNG tree
    #[arg(long, env = "IHTLAB_SEED")]
    seed: Option<u64>,

    /// Parameter preset: desk, paper-6.1 or paper-6.2
    #[arg(long, env = "IHTLAB_PRESET", default_value = "desk")]
    preset: String,

    /// Worker thread count (defaults to one per core)
    #[arg(long, env = "IHTLAB_THREADS")]
    threads: Option<usize>,

    /// Output format: csv or csv+svg
    #[arg(long, env = "IHTLAB_FORMAT", default_value = "csv")]
    format: String,
}

#[derive(Args)]
struct DemoArgs {
    #[arg(long, env = "IHTLAB_SEED", default_value_t = 7)]
    seed: u64,

    #[arg(long, env = "IHTLAB_THREADS")]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are not errors; everything else is a config error
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match dispatch(cli) {
        Ok(failures) if failures > 0 => {
            eprintln!("{failures} row(s) recorded solver failures");
            ExitCode::from(2)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<usize> {
    match cli.command {
        Command::Scaling(args) => run_protocol(Protocol::SparsityScaling, args),
        Command::Stability(args) => run_protocol(Protocol::StabilitySweep, args),
        Command::Demo(args) => run_demo(args),
    }
}

fn run_protocol(protocol: Protocol, args: RunArgs) -> Result<usize> {
    let mut cfg = preset_config(protocol, &args.preset)?;
    if let Some(path) = &args.config {
        apply_config_file(&mut cfg, path)?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.threads = args.threads.or(cfg.threads);
    cfg.output_dir = args.out.clone();
    cfg.emit_svg = match args.format.as_str() {
        "csv" => false,
        "csv+svg" => true,
        other => {
            return Err(IhtError::InvalidConfig(format!(
                "unknown format {other:?} (expected csv or csv+svg)"
            )))
        }
    };
    cfg.validate()?;

    std::fs::create_dir_all(&cfg.output_dir).map_err(|source| IhtError::Io {
        path: cfg.output_dir.display().to_string(),
        source,
    })?;

    let started = std::time::Instant::now();
    let result = run_experiment(&cfg)?;
    let elapsed = started.elapsed();

    let stem = protocol.as_str();
    let csv_path = cfg.output_dir.join(format!("{stem}.csv"));
    emit_csv(&result, &csv_path)?;
    println!(
        "wrote {} ({} rows, {} failures, {:.1?})",
        csv_path.display(),
        result.rows.len(),
        result.failures(),
        elapsed
    );
    if cfg.emit_svg {
        let plottable = result.rows.iter().any(|r| !r.failed());
        if plottable {
            let svg_path = cfg.output_dir.join(format!("{stem}.svg"));
            emit_plot(&result, &svg_path)?;
            println!("wrote {}", svg_path.display());
        } else {
            log::warn!("every row failed; skipping the SVG chart");
        }
    }
    print_trends(protocol, &result);
    Ok(result.failures())
}

fn preset_config(protocol: Protocol, preset: &str) -> Result<ExperimentConfig> {
    match (protocol, preset) {
        (Protocol::SparsityScaling, "desk") => Ok(ExperimentConfig::desk_scaling()),
        (Protocol::SparsityScaling, "paper-6.1") => Ok(ExperimentConfig::paper_6_1()),
        (Protocol::StabilitySweep, "desk") => Ok(ExperimentConfig::desk_stability()),
        (Protocol::StabilitySweep, "paper-6.2") => Ok(ExperimentConfig::paper_6_2()),
        (_, other) => Err(IhtError::InvalidConfig(format!(
            "preset {other:?} is not valid for the {} protocol",
            protocol.as_str()
        ))),
    }
}

fn apply_config_file(cfg: &mut ExperimentConfig, path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path).map_err(|source| IhtError::Io {
        path: path.display().to_string(),
        source,
    })?;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: String| IhtError::Parse {
            path: path.display().to_string(),
            line: lineno + 1,
            message,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("expected key=value, found {line:?}")))?;
        let key = key.trim();
        let value = value.trim();
        let parse_usize = |v: &str| v.parse::<usize>().map_err(|e| bad(format!("{key}: {e}")));
        let parse_f64 = |v: &str| v.parse::<f64>().map_err(|e| bad(format!("{key}: {e}")));
        match key {
            "p" => cfg.p = parse_usize(value)?,
            "k_bar" => cfg.k_bar = parse_usize(value)?,
            "replicates" => cfg.replicates = parse_usize(value)?,
            "n_mc" => cfg.n_mc = parse_usize(value)?,
            "max_iters" => cfg.max_iters = parse_usize(value)?,
            "seed" => cfg.seed = value.parse::<u64>().map_err(|e| bad(format!("seed: {e}")))?,
            "sigma" => cfg.sigma = parse_f64(value)?,
            "w_magnitude" => cfg.w_magnitude = parse_f64(value)?,
            "eta" => {
                cfg.eta = if value == "auto" {
                    StepSize::Auto
                } else {
                    StepSize::Fixed(parse_f64(value)?)
                }
            }
            "loss" => {
                cfg.loss = match value {
                    "squared" => LossModel::Squared,
                    "logistic" => LossModel::Logistic,
                    other => return Err(bad(format!("unknown loss {other:?}"))),
                }
            }
            "k_grid" => {
                cfg.sparsity_grid = value
                    .split(',')
                    .map(|v| parse_usize(v.trim()))
                    .collect::<Result<_>>()?
            }
            "n_grid" => {
                cfg.sample_grid = value
                    .split(',')
                    .map(|v| parse_usize(v.trim()))
                    .collect::<Result<_>>()?
            }
            "gap_grid" => {
                cfg.gap_grid = value
                    .split(',')
                    .map(|v| parse_f64(v.trim()))
                    .collect::<Result<_>>()?
            }
            other => return Err(bad(format!("unknown config key {other:?}"))),
        }
    }
    Ok(())
}

fn print_trends(protocol: Protocol, result: &ExperimentResult) {
    // the sweep trend lives on the log scale: mean of per-replicate logs
    let means = match protocol {
        Protocol::SparsityScaling => result.replicate_means(),
        Protocol::StabilitySweep => result.replicate_log_means(),
    };
    let mut ns: Vec<usize> = means.iter().map(|m| m.n).collect();
    ns.sort_unstable();
    ns.dedup();
    for n in ns {
        let pts: Vec<(f64, f64)> = means
            .iter()
            .filter(|m| m.n == n && m.mean_excess.is_finite())
            .map(|m| (m.grid_value, m.mean_excess))
            .collect();
        if pts.len() < 2 {
            continue;
        }
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let rho = spearman(&xs, &ys);
        let label = match protocol {
            Protocol::SparsityScaling => "Spearman(k, mean excess)",
            Protocol::StabilitySweep => "Spearman(gap, log mean excess)",
        };
        println!("  n = {n}: {label} = {rho:+.3}");
    }
}

fn run_demo(args: DemoArgs) -> Result<usize> {
    println!("scaling demo (p = 40, logistic, well-specified)");
    let scaling = ExperimentConfig {
        p: 40,
        k_bar: 4,
        sparsity_grid: vec![4, 8, 12],
        sample_grid: vec![80, 400],
        replicates: 3,
        n_mc: 20_000,
        max_iters: 80,
        seed: args.seed,
        threads: args.threads,
        ..ExperimentConfig::desk_scaling()
    };
    let result = run_experiment(&scaling)?;
    print_mean_table(&result);
    print_trends(Protocol::SparsityScaling, &result);
    let mut failures = result.failures();

    println!("stability demo (p = 40, linear, gap construction)");
    let sweep = ExperimentConfig {
        p: 40,
        k_bar: 5,
        gap_grid: vec![0.1, 0.3, 0.5, 0.7, 0.9],
        sample_grid: vec![80, 240],
        replicates: 5,
        max_iters: 80,
        seed: args.seed,
        threads: args.threads,
        ..ExperimentConfig::desk_stability()
    };
    let result = run_experiment(&sweep)?;
    print_mean_table(&result);
    print_trends(Protocol::StabilitySweep, &result);
    failures += result.failures();
    Ok(failures)
}

fn print_mean_table(result: &ExperimentResult) {
    println!("  {:>10} {:>8} {:>14} {:>12}", "grid", "n", "mean excess", "stderr");
    for m in result.replicate_means() {
        println!(
            "  {:>10.3} {:>8} {:>14.6} {:>12.6}",
            m.grid_value, m.n, m.mean_excess, m.stderr
        );
    }
}

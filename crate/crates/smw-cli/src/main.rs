//! `smw` — command-line driver for the SMW stability library.
//!
//! Subcommands:
//!   * `verify <scope>`: run the library's invariant suites and report a
//!     pass/fail table.
//!   * `sweep`: run one experiment sweep from a key=value config file and/or
//!     flag overrides, writing a CSV per run.
//!   * `figure <1|2|3|4>`: run a two-panel figure preset at desk or paper
//!     scale, writing one CSV per panel.
//!
//! All machine-readable output (effective config as key=value lines, output
//! paths) goes to stdout; human-oriented tables go to stderr. Exit codes:
//! 0 success, 1 verification failure, 2 usage error, 3 numerical failure,
//! 4 I/O failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use smw_core::construct::sweep_offsets;
use smw_core::experiment::{
    csv_filename, default_alpha_grid, default_eps_grid, emit_csv_file, figure_preset,
    log_log_slope, run as run_sweep_family, ExperimentConfig, Family, Scale, SweepResult,
    DEFAULT_BASE_SEED,
};
use smw_core::verify::{run_scope, Scope, SuiteReport};
use smw_core::Error;

const EXIT_VERIFY_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(
    name = "smw",
    about = "Sherman-Morrison-Woodbury stability experiments",
    version
)]
struct Cli {
    /// Cap the worker thread count (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run invariant suites: all | identities | bounds | lemma1 | constructions.
    Verify {
        /// Which suite(s) to run.
        scope: String,
    },
    /// Run one experiment sweep and write its CSV.
    Sweep {
        /// Experiment family: forward-eps | backward-eps | forward-alpha | backward-beta.
        #[arg(long)]
        family: Option<String>,
        /// Flat key=value config file; flags override file values.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Problem dimension.
        #[arg(long)]
        n: Option<usize>,
        /// Update rank.
        #[arg(long)]
        k: Option<usize>,
        /// Trials averaged per grid point.
        #[arg(long)]
        trials: Option<usize>,
        /// Base seed; trial t uses base_seed + t.
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated sweep grid, strictly ascending.
        #[arg(long = "eps-grid")]
        eps_grid: Option<String>,
        /// Update magnitude rule, e.g. half-sigma-min or explicit:2.5e0.
        #[arg(long = "update-scale")]
        update_scale: Option<String>,
        /// Fixed perturbation size for the capacitance families.
        #[arg(long = "eps-fixed")]
        eps_fixed: Option<f64>,
        /// Output directory for the CSV (created if missing).
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run a figure preset (two panels, one CSV each).
    Figure {
        /// Figure number, 1 through 4.
        which: u8,
        /// Problem scale: desk (n=200) or paper (n=1000).
        #[arg(long, default_value = "desk")]
        scale: String,
        /// Output directory for the CSVs (created if missing).
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Io(_) => EXIT_IO,
        Error::InvalidParameter { .. } => EXIT_USAGE,
        _ => EXIT_NUMERICAL,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: failed to configure thread pool: {e}");
            return ExitCode::from(EXIT_NUMERICAL);
        }
    }
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn dispatch(command: Command) -> Result<u8, Error> {
    match command {
        Command::Verify { scope } => cmd_verify(&scope),
        Command::Sweep {
            family,
            config,
            n,
            k,
            trials,
            seed,
            eps_grid,
            update_scale,
            eps_fixed,
            out,
        } => cmd_sweep(SweepArgs {
            family,
            config,
            n,
            k,
            trials,
            seed,
            eps_grid,
            update_scale,
            eps_fixed,
            out,
        }),
        Command::Figure { which, scale, out } => cmd_figure(which, &scale, &out),
    }
}

// --- verify ---------------------------------------------------------------------

fn cmd_verify(scope: &str) -> Result<u8, Error> {
    let scope: Scope = scope.parse()?;
    let reports = run_scope(scope)?;
    let mut passed = 0usize;
    let mut failed = 0usize;
    for report in &reports {
        print_suite_table(report);
        for check in &report.checks {
            // machine-readable line per check
            println!(
                "{}.{}={} margin={:e} {}",
                report.scope,
                check.name,
                if check.passed { "PASS" } else { "FAIL" },
                check.worst_margin,
                check.detail
            );
            if check.passed {
                passed += 1;
            } else {
                failed += 1;
            }
        }
    }
    eprintln!("verify: {passed} passed, {failed} failed");
    println!("verify_passed={passed} verify_failed={failed}");
    Ok(if failed == 0 { 0 } else { EXIT_VERIFY_FAILURE })
}

fn print_suite_table(report: &SuiteReport) {
    eprintln!("suite: {}", report.scope);
    eprintln!("  {:<44} {:>6} {:>13}  detail", "check", "result", "worst margin");
    for check in &report.checks {
        eprintln!(
            "  {:<44} {:>6} {:>13.3e}  {}",
            check.name,
            if check.passed { "PASS" } else { "FAIL" },
            check.worst_margin,
            check.detail
        );
    }
}

// --- sweep ----------------------------------------------------------------------

struct SweepArgs {
    family: Option<String>,
    config: Option<PathBuf>,
    n: Option<usize>,
    k: Option<usize>,
    trials: Option<usize>,
    seed: Option<u64>,
    eps_grid: Option<String>,
    update_scale: Option<String>,
    eps_fixed: Option<f64>,
    out: PathBuf,
}

/// Parse a flat `key=value` config file: one pair per line, `#` comments and
/// blank lines ignored.
fn read_config_file(path: &Path) -> Result<Vec<(String, String)>, Error> {
    let text = std::fs::read_to_string(path)?;
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::InvalidParameter {
            context: format!(
                "{}:{}: expected 'key=value', got '{line}'",
                path.display(),
                lineno + 1
            ),
        })?;
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

/// Merge defaults, config file, and flag overrides into a resolved config.
fn resolve_config(args: &SweepArgs) -> Result<ExperimentConfig, Error> {
    let mut map: BTreeMap<String, String> = BTreeMap::new();
    map.insert("n".into(), "200".into());
    map.insert("k".into(), "10".into());
    map.insert("trials".into(), "20".into());
    map.insert("base_seed".into(), DEFAULT_BASE_SEED.to_string());
    map.insert("update_scale".into(), "half-sigma-min".into());

    if let Some(path) = &args.config {
        for (key, value) in read_config_file(path)? {
            map.insert(key, value);
        }
    }

    let overrides: [(&str, Option<String>); 8] = [
        ("family", args.family.clone()),
        ("n", args.n.map(|v| v.to_string())),
        ("k", args.k.map(|v| v.to_string())),
        ("trials", args.trials.map(|v| v.to_string())),
        ("base_seed", args.seed.map(|v| v.to_string())),
        ("sweep_grid", args.eps_grid.clone()),
        ("update_scale", args.update_scale.clone()),
        ("eps_fixed", args.eps_fixed.map(|v| format!("{v:e}"))),
    ];
    for (key, value) in overrides {
        if let Some(value) = value {
            map.insert(key.to_string(), value);
        }
    }

    // A missing grid falls back to the family's natural default, which for
    // backward-beta depends on n and k.
    if !map.contains_key("sweep_grid") {
        let family: Family = map
            .get("family")
            .ok_or_else(|| Error::InvalidParameter {
                context: "missing config key 'family' (set --family or the config file)".into(),
            })?
            .parse()?;
        let n: usize = map["n"].parse().map_err(|_| Error::InvalidParameter {
            context: format!("bad n value '{}'", map["n"]),
        })?;
        let k: usize = map["k"].parse().map_err(|_| Error::InvalidParameter {
            context: format!("bad k value '{}'", map["k"]),
        })?;
        let grid = match family {
            Family::ForwardEps | Family::BackwardEps => default_eps_grid(),
            Family::ForwardAlpha => default_alpha_grid(),
            Family::BackwardBeta => sweep_offsets(n, k).into_iter().map(|o| o as f64).collect(),
        };
        let joined = grid
            .iter()
            .map(|x| format!("{x:e}"))
            .collect::<Vec<_>>()
            .join(",");
        map.insert("sweep_grid".into(), joined);
    }

    ExperimentConfig::from_key_values(map.iter().map(|(k, v)| (k.as_str(), v.as_str())))
}

/// Regime tag used in the output filename for ad-hoc sweeps; the update
/// scale rule is the closest analogue of a figure panel's small/large tag.
fn regime_tag(cfg: &ExperimentConfig) -> String {
    cfg.update_scale.to_string().replace(':', "-")
}

fn cmd_sweep(args: SweepArgs) -> Result<u8, Error> {
    let cfg = resolve_config(&args)?;
    let out_path = prepare_output_path(&args.out, &cfg, &regime_tag(&cfg))?;
    echo_config(&cfg, &out_path);
    let result = run_sweep_family(&cfg)?;
    emit_csv_file(&result, &out_path)?;
    print_result_table(&cfg, &result);
    Ok(0)
}

fn prepare_output_path(
    out_dir: &Path,
    cfg: &ExperimentConfig,
    regime: &str,
) -> Result<PathBuf, Error> {
    std::fs::create_dir_all(out_dir)?;
    Ok(out_dir.join(csv_filename(cfg.family, regime, cfg.n, cfg.k)))
}

/// The echoed key=value block plus the seed is sufficient to reproduce the
/// output file bit-exactly.
fn echo_config(cfg: &ExperimentConfig, out_path: &Path) {
    for (key, value) in cfg.to_key_values() {
        println!("{key}={value}");
    }
    println!("output={}", out_path.display());
}

fn print_result_table(cfg: &ExperimentConfig, result: &SweepResult) {
    eprintln!(
        "sweep: {} n={} k={} trials={} points={}",
        cfg.family,
        cfg.n,
        cfg.k,
        cfg.trials,
        result.rows.len()
    );
    if !result.thresholds.is_empty() {
        eprintln!("  thresholds:");
        for (name, value) in &result.thresholds {
            eprintln!("    {name} = {value:.6e}");
        }
    }
    eprintln!(
        "  {:>13} {:>13} {:>13} {:>13} {:>8} {:>6}",
        "sweep_value", "mean_error", "bound_full", "simplified", "ok_frac", "failed"
    );
    for row in &result.rows {
        eprintln!(
            "  {:>13.4e} {:>13.4e} {:>13.4e} {:>13.4e} {:>8.2} {:>6}",
            row.sweep_value,
            row.mean_actual_error,
            row.bound_full,
            row.bound_simplified,
            row.assumptions_ok_fraction,
            row.failed_trials
        );
    }
    let points: Vec<(f64, f64)> = result
        .rows
        .iter()
        .filter(|r| r.sweep_value > 0.0 && r.mean_actual_error.is_finite() && r.mean_actual_error > 0.0)
        .map(|r| (r.sweep_value, r.mean_actual_error))
        .collect();
    match log_log_slope(&points) {
        Some(slope) => eprintln!("  log-log slope of mean error: {slope:.4}"),
        None => eprintln!("  log-log slope of mean error: undefined"),
    }
}

// --- figure ---------------------------------------------------------------------

fn cmd_figure(which: u8, scale: &str, out_dir: &Path) -> Result<u8, Error> {
    let scale: Scale = scale.parse()?;
    let panels = figure_preset(which, scale)?;
    for panel in &panels {
        let out_path = prepare_output_path(out_dir, &panel.config, panel.regime)?;
        println!("panel={}", panel.regime);
        echo_config(&panel.config, &out_path);
        let result = run_sweep_family(&panel.config)?;
        emit_csv_file(&result, &out_path)?;
        eprintln!("figure {which} panel '{}' ->", panel.regime);
        print_result_table(&panel.config, &result);
    }
    Ok(0)
}

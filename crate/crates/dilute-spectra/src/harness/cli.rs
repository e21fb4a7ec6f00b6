//! Command-line front end.
//!
//! Exit codes: 0 success, 1 validation error, 2 partial failure (some cell
//! or check failed and was recorded), 3 internal invariant violation.

use std::ffi::OsString;
use std::fs;

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use crate::ladder::build_schedule;

use super::config::{DistSpec, ExperimentConfig, Mode, ModelSpec, PSchedule, Sweep, Thresholds};
use super::runner::{run, RunResult, CSV_COLUMNS};

#[derive(Parser)]
#[command(
    name = "dilute-spectra",
    version,
    about = "Singular-value laboratory for dilute sparse rectangular random matrices",
    after_help = concat!(
        "CSV columns (fixed order): ", "mode,name,cell_index,n_rows,n_cols,p,np,cell_seed,",
        "trials,metric,value,hits,p_hat,ci_lower,ci_upper,threshold,pass,censored,detail\n",
        "Outputs: <out>.csv (records, byte-stable under reruns) and <out>.json (summary with timing).\n",
        "Env: DILUTE_SPECTRA_THREADS overrides the worker count (default: logical cores)."
    )
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw samples and report mask/entry statistics and pipeline constants
    Sample(RunArgs),
    /// Compute extreme singular values per cell (dense oracle or Lanczos)
    Spectrum(RunArgs),
    /// Print and record the sparsity-ladder schedule
    Ladder(RunArgs),
    /// Monte Carlo tail of {s1 >= K sqrt(Np)}
    TailS1(RunArgs),
    /// Monte Carlo tail of {s_n <= tau sqrt(Np)} (dense-oracle sizes)
    TailSn(RunArgs),
    /// Levy-concentration and small-ball verifications per cell
    Concentration(RunArgs),
    /// Every lemma check at the configured scale
    VerifyAll(RunArgs),
}

impl Command {
    fn mode(&self) -> Mode {
        match self {
            Command::Sample(_) => Mode::Sample,
            Command::Spectrum(_) => Mode::Spectrum,
            Command::Ladder(_) => Mode::Ladder,
            Command::TailS1(_) => Mode::TailS1,
            Command::TailSn(_) => Mode::TailSn,
            Command::Concentration(_) => Mode::Concentration,
            Command::VerifyAll(_) => Mode::VerifyAll,
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Sample(a)
            | Command::Spectrum(a)
            | Command::Ladder(a)
            | Command::TailS1(a)
            | Command::TailSn(a)
            | Command::Concentration(a)
            | Command::VerifyAll(a) => a,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config; inline flags override its fields
    #[arg(long)]
    config: Option<std::path::PathBuf>,
    /// Run name (defaults to the subcommand)
    #[arg(long)]
    name: Option<String>,
    /// Single-cell row count N (clears any sweep)
    #[arg(long = "N")]
    n_rows: Option<usize>,
    /// Dilution probability p in (0, 1]
    #[arg(long)]
    p: Option<f64>,
    /// Aspect ratio y = n/N in (0, 1)
    #[arg(long)]
    y: Option<f64>,
    /// Comma-separated N grid, e.g. 512,1024,2048
    #[arg(long)]
    grid: Option<String>,
    /// Np = B (ln N)^alpha schedule: B
    #[arg(long = "B")]
    b: Option<f64>,
    /// Np = B (ln N)^alpha schedule: alpha
    #[arg(long)]
    alpha: Option<f64>,
    /// Trials per cell
    #[arg(long)]
    trials: Option<usize>,
    /// Master seed (all cell/trial seeds derive from it)
    #[arg(long)]
    seed: Option<u64>,
    /// Output stem: writes <out>.csv and <out>.json
    #[arg(long)]
    out: Option<String>,
    /// Entry law: gaussian | rademacher | pareto:<tail_exponent> | twopoint:<prob>
    #[arg(long)]
    dist: Option<String>,
    /// Declared moment surplus delta (mu_{4+delta} finite)
    #[arg(long)]
    delta: Option<f64>,
    /// Truncation constant A
    #[arg(long)]
    trunc_a: Option<f64>,
    /// Threshold K for {s1 >= K sqrt(Np)}
    #[arg(long = "K")]
    k: Option<f64>,
    /// Threshold tau for {s_n <= tau sqrt(Np)}
    #[arg(long)]
    tau: Option<f64>,
    /// Compressibility radius rho
    #[arg(long)]
    rho: Option<f64>,
    /// Ladder constant delta0
    #[arg(long)]
    delta0: Option<f64>,
    /// Net resolution epsilon
    #[arg(long)]
    epsilon: Option<f64>,
}

fn parse_dist(text: &str, delta: f64) -> Result<DistSpec, Error> {
    let lower = text.to_ascii_lowercase();
    if lower == "gaussian" {
        return Ok(DistSpec::Gaussian { delta });
    }
    if lower == "rademacher" {
        return Ok(DistSpec::Rademacher { delta });
    }
    if let Some(rest) = lower.strip_prefix("pareto:") {
        let tail_exponent: f64 = rest.parse().map_err(|_| Error::InvalidParameter {
            field: "dist",
            message: format!("bad tail exponent in `{text}`"),
        })?;
        return Ok(DistSpec::SymmetricPareto { tail_exponent, delta });
    }
    if let Some(rest) = lower.strip_prefix("twopoint:") {
        let prob: f64 = rest.parse().map_err(|_| Error::InvalidParameter {
            field: "dist",
            message: format!("bad atom probability in `{text}`"),
        })?;
        return Ok(DistSpec::TwoPoint { prob, delta });
    }
    Err(Error::InvalidParameter {
        field: "dist",
        message: format!("unknown law `{text}`; use gaussian | rademacher | pareto:<a> | twopoint:<p>"),
    })
}

fn build_config(mode: Mode, args: &RunArgs) -> Result<ExperimentConfig, Error> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::from_json(&fs::read_to_string(path)?)?,
        None => ExperimentConfig {
            name: mode.as_str().to_string(),
            mode,
            model: ModelSpec::default(),
            sweep: None,
            trials: 200,
            master_seed: 0,
            thresholds: Thresholds::default(),
            output_path: format!("out/{}", mode.as_str()),
        },
    };
    config.mode = mode;

    if let Some(name) = &args.name {
        config.name = name.clone();
    }
    if let Some(n) = args.n_rows {
        config.model.n_rows = Some(n);
        config.sweep = None;
    }
    if let Some(p) = args.p {
        config.model.p = Some(p);
        if let Some(sweep) = config.sweep.as_mut() {
            sweep.p_rule = PSchedule::FixedP { p };
        }
    }
    if let Some(y) = args.y {
        config.model.y = y;
    }
    if let Some(grid_text) = &args.grid {
        let grid: Result<Vec<usize>, _> =
            grid_text.split(',').map(|t| t.trim().parse::<usize>()).collect();
        let grid = grid.map_err(|_| Error::InvalidParameter {
            field: "grid",
            message: format!("bad grid `{grid_text}`"),
        })?;
        let p_rule = config
            .sweep
            .take()
            .map(|s| s.p_rule)
            .or(args.p.map(|p| PSchedule::FixedP { p }))
            .unwrap_or(PSchedule::NpLogPower { b: 25.0, alpha: 2.0 });
        config.sweep = Some(Sweep { grid, p_rule });
        config.model.n_rows = None;
    }
    if args.b.is_some() || args.alpha.is_some() {
        let (mut b, mut alpha) = (25.0, 2.0);
        if let Some(Sweep { p_rule: PSchedule::NpLogPower { b: b0, alpha: a0 }, .. }) =
            &config.sweep
        {
            b = *b0;
            alpha = *a0;
        }
        if let Some(v) = args.b {
            b = v;
        }
        if let Some(v) = args.alpha {
            alpha = v;
        }
        match config.sweep.as_mut() {
            Some(sweep) => sweep.p_rule = PSchedule::NpLogPower { b, alpha },
            None => {
                return Err(Error::InvalidParameter {
                    field: "B/alpha",
                    message: "log-power schedule needs a grid (--grid or config sweep)".into(),
                })
            }
        }
    }
    if let Some(trials) = args.trials {
        config.trials = trials;
    }
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if let Some(out) = &args.out {
        config.output_path = out.clone();
    }
    if args.dist.is_some() || args.delta.is_some() {
        let delta = args.delta.unwrap_or(config.model.dist.delta());
        config.model.dist = match &args.dist {
            Some(text) => parse_dist(text, delta)?,
            None => {
                let mut d = config.model.dist.clone();
                match &mut d {
                    DistSpec::Gaussian { delta: dd }
                    | DistSpec::Rademacher { delta: dd }
                    | DistSpec::SymmetricPareto { delta: dd, .. }
                    | DistSpec::TwoPoint { delta: dd, .. } => *dd = delta,
                }
                d
            }
        };
    }
    if let Some(a) = args.trunc_a {
        config.model.trunc_a = a;
    }
    if let Some(k) = args.k {
        config.thresholds.k = k;
    }
    if let Some(tau) = args.tau {
        config.thresholds.tau = tau;
    }
    if let Some(rho) = args.rho {
        config.thresholds.rho = rho;
    }
    if let Some(delta0) = args.delta0 {
        config.thresholds.delta0 = delta0;
    }
    if let Some(epsilon) = args.epsilon {
        config.thresholds.epsilon = epsilon;
    }
    Ok(config)
}

fn print_ladder_tables(config: &ExperimentConfig) -> Result<(), Error> {
    let (cells, _) = config.cells()?;
    for cell in &cells {
        let schedule = build_schedule(cell.n_rows, cell.p, config.thresholds.delta0)?;
        println!(
            "N = {}, p = {:.6}, delta0 = {}: L = {}, gamma0 = {:.6}, gamma1 = {:.6}",
            cell.n_rows, cell.p, config.thresholds.delta0, schedule.levels, schedule.gamma0,
            schedule.gamma1
        );
        println!("{:>4} {:>14} {:>14} {:>14} {:>14}", "nu", "p_nu", "delta_nu", "p_hat_nu", "delta_hat_nu");
        for v in 1..=schedule.levels {
            println!(
                "{v:>4} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e}",
                schedule.p_seq[v], schedule.delta_seq[v], schedule.p_hat_seq[v],
                schedule.delta_hat_seq[v]
            );
        }
    }
    Ok(())
}

fn print_summary(result: &RunResult) {
    for record in &result.records {
        if let Some(pass) = record.pass {
            println!(
                "[{}] cell {} {}: value = {:.6}{}",
                if pass { "PASS" } else { "FAIL" },
                record.cell_index,
                record.metric,
                record.value,
                if record.detail.is_empty() { String::new() } else { format!(" ({})", record.detail) },
            );
        }
    }
    let checks = result.records.iter().filter(|r| r.pass.is_some()).count();
    let failed = result.failed_checks();
    println!(
        "{}: {} records, {} checks, {} failed{}",
        result.mode,
        result.records.len(),
        checks,
        failed,
        if result.partial { " [PARTIAL]" } else { "" }
    );
}

fn configure_threads() {
    if let Ok(text) = std::env::var("DILUTE_SPECTRA_THREADS") {
        if let Ok(threads) = text.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
        }
    }
}

/// Entry point used by the binary; returns the process exit code.
pub fn cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            // clap's default code for parse errors is 2; validation is 1 here
            let _ = err.print();
            return if err.use_stderr() { 1 } else { 0 };
        }
    };
    configure_threads();
    let mode = cli.command.mode();
    let config = match build_config(mode, cli.command.args()) {
        Ok(config) => config,
        Err(err) => {
            eprintln!("error: {err}");
            return err.exit_code().min(1);
        }
    };
    if mode == Mode::Ladder {
        if let Err(err) = print_ladder_tables(&config) {
            eprintln!("error: {err}");
            return err.exit_code();
        }
    }
    match run(&config) {
        Ok(result) => {
            for warning in &result.warnings {
                eprintln!("warning: {warning}");
            }
            print_summary(&result);
            println!(
                "wrote {}.csv and {}.json (digest {})",
                config.output_path, config.output_path, &result.config_digest[..12]
            );
            if result.partial {
                2
            } else {
                0
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

#[allow(dead_code)]
fn assert_csv_columns_documented() {
    // keep the documented column list in sync with the Record struct
    let _ = CSV_COLUMNS;
}

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use linucb_core::diagnostics::{phase_report, SnapshotSchedule};
use linucb_core::engine::{BetaSchedule, NoiseKind, TrialRecord};
use linucb_core::harness::{
    read_json, run_outcomes, run_trial_with, summarize, to_json_string, write_clt_file,
    write_timeseries_csv, FileConfig, ParsedConfig,
};

#[derive(Parser)]
#[command(
    name = "linucb-lab",
    version,
    about = "LinUCB simulation and inference lab"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trial and emit its diagnostic time series as CSV.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Index of the trial within the seed family.
        #[arg(long, default_value_t = 0)]
        trial_index: u64,
        /// Also store the full trial record as JSON (input for `diagnose`).
        #[arg(long)]
        record: Option<PathBuf>,
    },
    /// Run many trials and emit a JSON summary.
    Montecarlo {
        #[command(flatten)]
        common: CommonArgs,
        /// Write the pooled CLT samples as CSV.
        #[arg(long)]
        clt_out: Option<PathBuf>,
    },
    /// Phase report for a stored trial record.
    Diagnose {
        /// Trial record written by `simulate --record`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Confidence-set coverage only, without intermediate diagnostics.
    Coverage {
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BetaMode {
    Constant,
    Theory,
    Stability,
}

#[derive(Args)]
struct CommonArgs {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Parameter of the beta schedule: the value itself for `constant`, `c`
    /// for `stability`, `delta` for `theory`. Alone, sets a constant beta.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, value_enum)]
    beta_mode: Option<BetaMode>,
    #[arg(long)]
    ridge: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Confidence sets are built at level 1 − delta.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    noise: Option<NoiseKind>,
    /// Output path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Record diagnostics every `stride` rounds instead of geometrically.
    #[arg(long)]
    stride: Option<usize>,
    /// Include mean wall-clock seconds per trial in the summary.
    #[arg(long)]
    timing: bool,
}

impl CommonArgs {
    fn resolve(&self) -> Result<ParsedConfig> {
        let mut file = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                FileConfig::from_toml(&text)?
            }
            None => FileConfig::default(),
        };
        macro_rules! overlay {
            ($($flag:ident => $field:expr),* $(,)?) => {
                $(if let Some(v) = self.$flag { $field = Some(v); })*
            };
        }
        overlay!(
            d => file.d,
            horizon => file.horizon,
            sigma => file.sigma,
            ridge => file.ridge,
            seed => file.seed,
            noise => file.noise,
            trials => file.run.trials,
            delta => file.run.delta,
            workers => file.run.workers,
        );
        if let Some(every) = self.stride {
            file.run.schedule = Some(SnapshotSchedule::Stride { every });
        }
        if self.timing {
            file.run.timing = Some(true);
        }
        file.beta = beta_override(file.beta, self.beta_mode, self.beta)?;
        let parsed = file.resolve()?;
        for w in &parsed.warnings {
            eprintln!("warning: {w}");
        }
        Ok(parsed)
    }
}

fn beta_override(
    base: Option<BetaSchedule>,
    mode: Option<BetaMode>,
    value: Option<f64>,
) -> Result<Option<BetaSchedule>> {
    Ok(match (mode, value) {
        (None, None) => base,
        (None, Some(value)) => Some(BetaSchedule::Constant { value }),
        (Some(BetaMode::Constant), v) => {
            let value = match (v, base) {
                (Some(v), _) => v,
                (None, Some(BetaSchedule::Constant { value })) => value,
                _ => bail!("--beta-mode constant needs --beta"),
            };
            Some(BetaSchedule::Constant { value })
        }
        (Some(BetaMode::Stability), v) => {
            let c = match (v, base) {
                (Some(v), _) => v,
                (None, Some(BetaSchedule::Stability { c })) => c,
                _ => 1.0,
            };
            Some(BetaSchedule::Stability { c })
        }
        (Some(BetaMode::Theory), v) => {
            let (delta, l) = match base {
                Some(BetaSchedule::Theory { delta, l }) => (delta, l),
                _ => (0.05, 1.0),
            };
            Some(BetaSchedule::Theory {
                delta: v.unwrap_or(delta),
                l,
            })
        }
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            common,
            trial_index,
            record,
        } => {
            let parsed = common.resolve()?;
            let trial = run_trial_with(&parsed.bandit, trial_index, &parsed.options.schedule)?;
            let mut csv = Vec::new();
            write_timeseries_csv(&trial.diagnostics, &mut csv)?;
            emit(common.out.as_deref(), std::str::from_utf8(&csv)?)?;
            if let Some(path) = record {
                emit(Some(&path), &to_json_string(&trial)?)?;
            }
        }
        Command::Montecarlo { common, clt_out } => {
            let parsed = common.resolve()?;
            let (cfg, opts) = (&parsed.bandit, &parsed.options);
            let outcomes = run_outcomes(cfg, opts, 0..opts.trials as u64)?;
            let summary = summarize(cfg, opts, &outcomes)?;
            emit(common.out.as_deref(), &to_json_string(&summary)?)?;
            if let Some(path) = clt_out {
                write_clt_file(&outcomes, &path)?;
            }
        }
        Command::Diagnose { input, out } => {
            let trial: TrialRecord = read_json(&input)
                .with_context(|| format!("reading trial record {}", input.display()))?;
            let report = phase_report(
                &trial.diagnostics,
                trial.beta,
                trial.config.sigma,
                trial.config.d,
                trial.config.horizon,
                Default::default(),
            )?;
            emit(out.as_deref(), &to_json_string(&report)?)?;
        }
        Command::Coverage { common } => {
            let mut parsed = common.resolve()?;
            let horizon = parsed.bandit.horizon;
            parsed.options.schedule = SnapshotSchedule::Stride { every: horizon };
            let (cfg, opts) = (&parsed.bandit, &parsed.options);
            let outcomes = run_outcomes(cfg, opts, 0..opts.trials as u64)?;
            let summary = summarize(cfg, opts, &outcomes)?;
            let report = serde_json::json!({
                "n_trials": summary.n_trials,
                "delta": summary.delta,
                "coverage_spherical": summary.coverage_spherical,
                "coverage_ellipsoidal": summary.coverage_ellipsoidal,
            });
            emit(common.out.as_deref(), &to_json_string(&report)?)?;
        }
    }
    Ok(())
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    use linucb_core::Error as E;
    match err.downcast_ref::<E>() {
        Some(E::InvalidConfig(_) | E::Parse(_)) => "config",
        Some(E::Io(_)) => "io",
        Some(E::Json(_)) => "json",
        Some(_) => "numeric",
        None if err.downcast_ref::<std::io::Error>().is_some() => "io",
        None => "usage",
    }
}

fn fail(kind: &str, message: &str) -> ExitCode {
    let line = serde_json::json!({ "error": kind, "message": message });
    eprintln!("{line}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            return fail("usage", first.trim_start_matches("error: "));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(error_kind(&e), &format!("{e:#}")),
    }
}

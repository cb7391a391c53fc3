//! `trisplit run | tune | verify`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bench::{signal_csv, tv_signal, DEFAULT_SEED};
use crate::config::{Format, ParamSource, RunConfig, DEFAULT_SAFETY};
use crate::diagnostics::{diagnose, diagnose_trace};
use crate::error::{Error, Result};
use crate::solver::{run, RunOptions, SolverState};
use crate::trace::{records_from_csv, IterationTrace, RunStatus};
use crate::tuning::{derive_constants, select_parameters, validate, AdmissibilityReport, DerivedConstants, SolverParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_MAX_ITERATIONS: i32 = 2;
pub const EXIT_ASSUMPTION: i32 = 3;
pub const EXIT_DIVERGENCE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "trisplit", version, about = "Full-splitting proximal solver with certified diagnostics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the configured problem and write trace, constants and diagnostics.
    Run(RunArgs),
    /// Print tuned parameters, derived constants and the admissibility report.
    Tune(TuneArgs),
    /// Re-run diagnostics on a stored trace.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Config file; repeat to run several.
    #[arg(long = "config", required = true)]
    pub configs: Vec<PathBuf>,
    /// Output directory (default: config `output_dir`, then `$TRISPLIT_OUT`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, conflicts_with = "permissive")]
    pub strict: bool,
    #[arg(long)]
    pub permissive: bool,
    /// Worker threads for several configs.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Overrides the instance seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// `trace.json` or `trace.csv`.
    #[arg(long)]
    pub trace: PathBuf,
    /// `constants.json` written by `run`.
    #[arg(long)]
    pub constants: PathBuf,
}

/// Contents of `constants.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantsFile {
    pub params: SolverParams,
    pub constants: DerivedConstants,
    pub admissibility: AdmissibilityReport,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::AssumptionViolation(_) | Error::NotSurjective { .. } => EXIT_ASSUMPTION,
        Error::NumericalDivergence { .. } => EXIT_DIVERGENCE,
        _ => EXIT_CONFIG,
    }
}

/// Parses `args` (including the program name) and executes the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Run(a) => command_run(&a),
        Command::Tune(a) => command_tune(&a),
        Command::Verify(a) => command_verify(&a),
    }
}

pub fn command_run(args: &RunArgs) -> i32 {
    let strict = if args.permissive {
        Some(false)
    } else if args.strict {
        Some(true)
    } else {
        None
    };
    let many = args.configs.len() > 1;
    let job = |path: &PathBuf| -> (String, i32) {
        let mut log = String::new();
        let code = match run_one(path, args, strict, many, &mut log) {
            Ok(code) => code,
            Err(e) => {
                log += &format!("error: {e}\n");
                exit_code(&e)
            }
        };
        (log, code)
    };
    let results: Vec<(String, i32)> = if args.jobs > 1 && many {
        match rayon::ThreadPoolBuilder::new().num_threads(args.jobs).build() {
            Ok(pool) => pool.install(|| args.configs.par_iter().map(job).collect()),
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_CONFIG;
            }
        }
    } else {
        args.configs.iter().map(job).collect()
    };
    let mut worst = EXIT_OK;
    for (log, code) in results {
        eprint!("{log}");
        worst = worst.max(code);
    }
    worst
}

fn run_one(path: &Path, args: &RunArgs, strict: Option<bool>, many: bool, log: &mut String) -> Result<i32> {
    let cfg = RunConfig::from_path(path)?;
    let problem = cfg.build_problem(args.seed)?;
    let spectrum = problem.a.require_surjective()?;
    let params = match cfg.params {
        ParamSource::Explicit(p) => p,
        ParamSource::Tuned { safety } => select_parameters(spectrum, problem.h.lipschitz(), safety)?,
    };
    let (m, q, _) = problem.dims();
    let initial = SolverState::initial(
        &problem,
        cfg.initial_x.clone().unwrap_or_else(|| vec![0.0; m]),
        cfg.initial_y.clone().unwrap_or_else(|| vec![0.0; q]),
    )?;
    let options = RunOptions {
        strict_mode: strict.unwrap_or(cfg.strict_mode),
        record_iterates: cfg.record_iterates,
    };
    let outcome = run(&problem, &params, &cfg.stopping, initial, options)?;

    let mut out = cfg.resolve_output_dir(args.out.as_deref());
    if many {
        out = out.join(path.file_stem().unwrap_or_default());
    }
    std::fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
    let trace = &outcome.trace;
    if cfg.formats.contains(&Format::Csv) {
        write(&out.join("trace.csv"), &trace.to_csv())?;
    }
    if cfg.formats.contains(&Format::Json) {
        write(&out.join("trace.json"), &trace.to_json())?;
    }
    let constants = ConstantsFile {
        params,
        constants: outcome.constants.clone(),
        admissibility: outcome.admissibility.clone(),
    };
    write(&out.join("constants.json"), &to_json(&constants))?;
    let diag_json = match diagnose_trace(trace, &outcome.constants, &params) {
        Ok(report) => {
            *log += &format!("{}: {}\n{}", path.display(), problem.name, report.summary());
            report.to_json()
        }
        Err(e) => {
            *log += &format!("{}: diagnostics unavailable: {e}\n", path.display());
            to_json(&serde_json::json!({ "error": e.to_string() }))
        }
    };
    write(&out.join("diagnostics.json"), &diag_json)?;
    if problem.name == "tv_sparse_recovery" {
        let seed = args.seed.or(cfg.problem.seed).unwrap_or(DEFAULT_SEED);
        write(&out.join("signal.csv"), &signal_csv(&tv_signal(m, seed)))?;
    }
    if outcome.descent_violations > 0 {
        *log += &format!("warning: {} descent violations (permissive mode)\n", outcome.descent_violations);
    }
    for c in outcome.admissibility.failures() {
        *log += &format!("warning: {} failed: {}\n", c.name, c.detail);
    }
    Ok(match trace.status {
        RunStatus::Converged => EXIT_OK,
        RunStatus::MaxIterations => EXIT_MAX_ITERATIONS,
    })
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Invalid(format!("{}: {e}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Writes to stdout, ignoring a closed pipe.
fn print_stdout(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

/// Output of `tune`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuneOutput {
    pub safety: f64,
    pub params: SolverParams,
    pub constants: DerivedConstants,
    pub admissibility: AdmissibilityReport,
}

pub fn tune_config(cfg: &RunConfig, seed: Option<u64>) -> Result<TuneOutput> {
    let problem = cfg.build_problem(seed)?;
    let spectrum = problem.a.require_surjective()?;
    let safety = match cfg.params {
        ParamSource::Tuned { safety } => safety,
        ParamSource::Explicit(_) => DEFAULT_SAFETY,
    };
    let l = problem.h.lipschitz();
    let params = select_parameters(spectrum, l, safety)?;
    let constants = derive_constants(spectrum, l, &params).with_psi_lower_bound(problem.psi_lower_bound_hint());
    let admissibility = validate(&params, &constants, spectrum);
    Ok(TuneOutput {
        safety,
        params,
        constants,
        admissibility,
    })
}

pub fn command_tune(args: &TuneArgs) -> i32 {
    match RunConfig::from_path(&args.config).and_then(|c| tune_config(&c, args.seed)) {
        Ok(out) => {
            print_stdout(&to_json(&out));
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn load_trace(path: &Path) -> Result<(Vec<crate::trace::IterationRecord>, Option<IterationTrace>)> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    if path.extension().is_some_and(|e| e == "csv") {
        Ok((records_from_csv(&text)?, None))
    } else {
        let t = IterationTrace::from_json(&text)?;
        Ok((t.records.clone(), Some(t)))
    }
}

pub fn command_verify(args: &VerifyArgs) -> i32 {
    let result = (|| -> Result<crate::diagnostics::DiagnosticsReport> {
        let (records, trace) = load_trace(&args.trace)?;
        let text = std::fs::read_to_string(&args.constants).map_err(|e| io_err(&args.constants, e))?;
        let c: ConstantsFile =
            serde_json::from_str(&text).map_err(|e| Error::Invalid(format!("{}: {e}", args.constants.display())))?;
        diagnose(&records, trace.as_ref().map(|t| &t.final_point), &c.constants, Some(&c.params), None)
    })();
    match result {
        Ok(report) => {
            print_stdout(&(report.to_json() + "\n"));
            eprint!("{}", report.summary());
            if report.passed() {
                EXIT_OK
            } else {
                EXIT_MAX_ITERATIONS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}

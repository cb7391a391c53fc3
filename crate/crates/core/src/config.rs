//! Run configuration: a TOML file naming a problem, either explicit
//! parameters or a tuning request, stopping rule and output options.
//!
//! ```toml
//! strict_mode = true
//! output_dir = "out"
//! formats = ["csv", "json"]
//!
//! [problem]
//! name = "convex_sanity"
//! size = 2
//!
//! [tuning]
//! safety = 0.5
//!
//! [stopping]
//! max_iterations = 5000
//! step_tol = 1e-10
//! ```

use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use toml::Spanned;

use crate::bench::{make_named, DEFAULT_SEED};
use crate::error::{Error, Result};
use crate::functions::{ProxFunction, QuadraticCoupling, SmoothCoupling};
use crate::linop::DenseOperator;
use crate::problem::{AssumptionFlags, ProblemInstance};
use crate::solver::StoppingRule;
use crate::tuning::SolverParams;

pub const DEFAULT_SAFETY: f64 = 0.5;
pub const OUT_ENV: &str = "TRISPLIT_OUT";
pub const DEFAULT_OUT: &str = "trisplit-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticSpec {
    /// Rows of `K`.
    pub k: Vec<Vec<f64>>,
    /// Rows of `M`.
    pub m: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    #[serde(default = "one")]
    pub weight: f64,
    /// Declared constant; must not be below the computed one.
    #[serde(default)]
    pub lipschitz: Option<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub name: String,
    /// Size parameter of catalog instances.
    #[serde(default)]
    pub size: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Rows of `A` for `name = "custom"`.
    #[serde(default)]
    pub a: Option<Vec<Vec<f64>>>,
    /// CSV file with `A`, relative to the config file.
    #[serde(default)]
    pub a_csv: Option<PathBuf>,
    #[serde(default)]
    pub f: Option<ProxFunction>,
    #[serde(default)]
    pub g: Option<ProxFunction>,
    #[serde(default)]
    pub h: Option<QuadraticSpec>,
    #[serde(default)]
    pub flags: Option<AssumptionFlags>,
    #[serde(default)]
    pub inf_h: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningSpec {
    #[serde(default = "default_safety")]
    pub safety: f64,
}

fn default_safety() -> f64 {
    DEFAULT_SAFETY
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoppingSpec {
    pub max_iterations: Option<usize>,
    pub step_tol: Option<f64>,
    pub kkt_tol: Option<f64>,
    pub divergence_guard: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub x: Option<Vec<f64>>,
    pub y: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: Spanned<ProblemSpec>,
    #[serde(default)]
    params: Option<Spanned<SolverParams>>,
    #[serde(default)]
    tuning: Option<Spanned<TuningSpec>>,
    #[serde(default)]
    stopping: Option<Spanned<StoppingSpec>>,
    #[serde(default)]
    initial: Option<Spanned<InitialSpec>>,
    #[serde(default)]
    strict_mode: Option<bool>,
    #[serde(default)]
    record_iterates: Option<bool>,
    #[serde(default)]
    output_dir: Option<PathBuf>,
    #[serde(default)]
    formats: Option<Spanned<Vec<Format>>>,
}

/// How the solver parameters are obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamSource {
    Explicit(SolverParams),
    Tuned { safety: f64 },
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: PathBuf,
    pub problem: ProblemSpec,
    pub params: ParamSource,
    pub stopping: StoppingRule,
    pub initial_x: Option<Vec<f64>>,
    pub initial_y: Option<Vec<f64>>,
    pub strict_mode: bool,
    pub record_iterates: bool,
    pub output_dir: Option<PathBuf>,
    pub formats: Vec<Format>,
}

fn line_of(text: &str, span: Range<usize>) -> usize {
    text[..span.start.min(text.len())].matches('\n').count() + 1
}

fn at(path: &Path, line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Invalid(format!("{}:{line}: {msg}", path.display()))
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
        Self::from_str_at(&text, path)
    }

    /// Parses `text`; `path` is used in messages and to resolve `a_csv`.
    pub fn from_str_at(text: &str, path: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(1, |s| line_of(text, s));
            at(path, line, e.message())
        })?;
        let params = match (&raw.params, &raw.tuning) {
            (Some(p), Some(t)) => {
                let line = line_of(text, p.span()).max(line_of(text, t.span()));
                return Err(at(path, line, "give either [params] or [tuning], not both"));
            }
            (None, None) => {
                return Err(at(path, 1, "missing [params] or [tuning]"));
            }
            (Some(p), None) => {
                p.get_ref().check().map_err(|e| at(path, line_of(text, p.span()), e))?;
                ParamSource::Explicit(*p.get_ref())
            }
            (None, Some(t)) => {
                let safety = t.get_ref().safety;
                if !(safety > 0.0 && safety < 1.0) {
                    return Err(at(path, line_of(text, t.span()), format!("safety must lie in (0, 1), got {safety}")));
                }
                ParamSource::Tuned { safety }
            }
        };
        let mut stopping = StoppingRule::default();
        if let Some(s) = &raw.stopping {
            let spec = s.get_ref();
            if let Some(v) = spec.max_iterations {
                stopping.max_iterations = v;
            }
            if let Some(v) = spec.step_tol {
                stopping.step_tol = v;
            }
            stopping.kkt_tol = spec.kkt_tol;
            if let Some(v) = spec.divergence_guard {
                stopping.divergence_guard = v;
            }
            stopping.check().map_err(|e| at(path, line_of(text, s.span()), e))?;
        }
        let formats = match &raw.formats {
            Some(f) if f.get_ref().is_empty() => return Err(at(path, line_of(text, f.span()), "formats must not be empty")),
            Some(f) => f.get_ref().clone(),
            None => vec![Format::Csv, Format::Json],
        };
        let problem_line = line_of(text, raw.problem.span());
        let problem = raw.problem.into_inner();
        let (initial_x, initial_y) = raw.initial.map_or((None, None), |i| {
            let i = i.into_inner();
            (i.x, i.y)
        });
        let cfg = Self {
            source: path.to_path_buf(),
            problem,
            params,
            stopping,
            initial_x,
            initial_y,
            strict_mode: raw.strict_mode.unwrap_or(true),
            record_iterates: raw.record_iterates.unwrap_or(false),
            output_dir: raw.output_dir,
            formats,
        };
        // Surface problem errors at load time, anchored to the [problem] table.
        cfg.build_problem(None).map_err(|e| match e {
            Error::NotSurjective { .. } => e,
            other => at(path, problem_line, other),
        })?;
        Ok(cfg)
    }

    /// Instantiates the problem; `seed` overrides the configured seed.
    pub fn build_problem(&self, seed: Option<u64>) -> Result<ProblemInstance> {
        let spec = &self.problem;
        let seed = seed.or(spec.seed).unwrap_or(DEFAULT_SEED);
        if spec.name != "custom" {
            let size = spec.size.unwrap_or(if spec.name == "convex_sanity" { 2 } else { 8 });
            return make_named(&spec.name, size, seed);
        }
        let a = match (&spec.a, &spec.a_csv) {
            (Some(rows), None) => DenseOperator::from_rows(rows)?,
            (None, Some(p)) => {
                let base = self.source.parent().unwrap_or(Path::new("."));
                DenseOperator::from_csv_path(&base.join(p))?
            }
            _ => return Err(Error::Invalid("custom problem needs exactly one of `a` or `a_csv`".into())),
        };
        let h = spec
            .h
            .as_ref()
            .ok_or_else(|| Error::Invalid("custom problem needs an [problem.h] table".into()))?;
        let quad = QuadraticCoupling::from_rows(&h.k, &h.m, h.b.clone(), h.weight)?;
        let q = h.m.first().map_or(0, Vec::len);
        let mut coupling = SmoothCoupling::quadratic(quad);
        if let Some(l) = h.lipschitz {
            coupling = coupling.with_lipschitz(l)?;
        }
        let mut p = ProblemInstance::new(
            "custom",
            spec.f.unwrap_or(ProxFunction::Zero),
            spec.g.unwrap_or(ProxFunction::Zero),
            coupling,
            a,
            q,
        )?;
        p.flags = spec.flags.unwrap_or_default();
        p.inf_h = spec.inf_h.or(Some(0.0));
        p.seed = Some(seed);
        Ok(p)
    }

    /// `--out` if given, else the configured directory, else `$TRISPLIT_OUT`.
    pub fn resolve_output_dir(&self, cli_out: Option<&Path>) -> PathBuf {
        cli_out
            .map(Path::to_path_buf)
            .or_else(|| self.output_dir.clone())
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }
}

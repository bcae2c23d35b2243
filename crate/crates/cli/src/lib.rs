//! Subcommand implementations behind the `workbench` binary. Every command
//! returns a serializable report; the binary only parses arguments, writes the
//! report and maps errors to exit codes.

pub mod bell;
pub mod sg;

use std::fmt;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use workbench::scenario::ScenarioConfig;
use workbench::Error;

pub const EXIT_INVALID: i32 = 2;
pub const EXIT_UNRESOLVED: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Environment variable capping the worker pool size.
pub const THREADS_ENV: &str = "WORKBENCH_THREADS";

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn invalid(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidInput(_)
            | Error::InvalidModel(_)
            | Error::Unsupported(_)
            | Error::GridTooSmall { .. }
            | Error::InvalidPairing
            | Error::Json(_)
            | Error::Io(_) => EXIT_INVALID,
            Error::Unresolved { .. } | Error::RunFailure { .. } => EXIT_UNRESOLVED,
            Error::Internal(_) | Error::NodeEvaluation { .. } | Error::ScanDisagreement(_) => EXIT_INTERNAL,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Command-line overrides applied on top of the file (or the defaults).
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub theta_deg: Option<f64>,
}

/// Reads an optional TOML file, applies overrides and validates the result.
pub fn load_config(path: Option<&Path>, overrides: Overrides) -> CliResult<ScenarioConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::invalid(format!("{}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| CliError::invalid(format!("{}: {e}", p.display())))?
        }
        None => ScenarioConfig::default(),
    };
    if let Some(s) = overrides.seed {
        cfg.ensemble.seed = s;
    }
    if let Some(n) = overrides.samples {
        cfg.ensemble.n_samples = n;
    }
    if let Some(t) = overrides.theta_deg {
        cfg.spin.theta_deg = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Sizes the global pool from `WORKBENCH_THREADS` when it is set.
pub fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::invalid(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError {
            code: EXIT_INTERNAL,
            message: e.to_string(),
        })
}

/// Common envelope of every report.
#[derive(Debug, Clone, Serialize)]
pub struct Report<R> {
    pub command: String,
    pub version: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<ScenarioConfig>,
    /// Wall-clock seconds; present only when requested, so that plain reports
    /// stay byte-identical across runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
    pub result: R,
}

/// Runs `f`, wrapping its result in the envelope.
pub fn with_envelope<R, F>(
    command: &str,
    config: Option<&ScenarioConfig>,
    seed: Option<u64>,
    timing: bool,
    f: F,
) -> CliResult<Report<R>>
where
    F: FnOnce() -> CliResult<R>,
{
    let start = Instant::now();
    let result = f()?;
    Ok(Report {
        command: command.to_string(),
        version: VERSION,
        seed: seed.or(config.map(|c| c.ensemble.seed)),
        config: config.copied(),
        runtime_seconds: timing.then(|| start.elapsed().as_secs_f64()),
        result,
    })
}

/// Serializes with 17-significant-digit floats.
pub fn render<R: Serialize>(report: &R) -> CliResult<String> {
    Ok(workbench::export::to_json(report)?)
}

/// Writes `text` to `out`, or to stdout when `out` is `None`.
pub fn emit(text: &str, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError {
            code: EXIT_INVALID,
            message: format!("{}: {e}", p.display()),
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub(crate) fn write_plot(dir: &Path, name: &str, contents: &str) -> CliResult<()> {
    std::fs::create_dir_all(dir)
        .and_then(|_| std::fs::write(dir.join(name), contents))
        .map_err(|e| CliError::invalid(format!("{}: {e}", dir.join(name).display())))
}

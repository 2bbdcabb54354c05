//! File formats and the error type that decides the exit code.

use std::fs;
use std::io::Write;
use std::path::Path;

use mmflow_core::space::SpaceFile;
use mmflow_core::{Error, ProbMeasure, Space, Tolerances, VerificationReport};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Exit codes: 1 is reserved for failed checks.
pub enum CliError {
    Usage(String),
    Solver(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Solver(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Solver(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NonMonotoneQuotient { .. }
            | Error::SingularForm(_)
            | Error::Infeasible(_)
            | Error::DegenerateBasis(_)
            | Error::PathExplosion(_)
            | Error::SolverFailure(_) => CliError::Solver(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Pretty JSON with a trailing newline, to `path` or standard output.
pub fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Usage(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Usage(e.to_string())),
    }
}

pub fn read_space(path: &Path) -> CliResult<Space> {
    Ok(Space::from_file(read_json::<SpaceFile>(path)?)?)
}

/// Per-point values: a bare array, or an object with one of the keys
/// `values`, `density` or `masses`.
#[derive(Deserialize)]
#[serde(untagged)]
enum VectorFile {
    Bare(Vec<f64>),
    Values { values: Vec<f64> },
    Density { density: Vec<f64> },
    Masses { masses: Vec<f64> },
}

pub fn read_values(path: &Path) -> CliResult<Vec<f64>> {
    match read_json::<VectorFile>(path)? {
        VectorFile::Bare(v) | VectorFile::Values { values: v } | VectorFile::Density { density: v } => Ok(v),
        VectorFile::Masses { .. } => Err(CliError::Usage(format!("{}: expected values, found masses", path.display()))),
    }
}

/// A measure file holds a density (bare array or `density`) or `masses`.
pub fn read_measure(space: &Space, path: &Path) -> CliResult<ProbMeasure> {
    let m = match read_json::<VectorFile>(path)? {
        VectorFile::Bare(v) | VectorFile::Density { density: v } => ProbMeasure::from_density(space, v),
        VectorFile::Masses { masses } => ProbMeasure::from_masses(space, &masses),
        VectorFile::Values { .. } => {
            return Err(CliError::Usage(format!("{}: expected a density or masses", path.display())))
        }
    };
    Ok(m?)
}

pub fn read_tolerances(path: Option<&Path>) -> CliResult<Tolerances> {
    path.map_or_else(|| Ok(Tolerances::default()), read_json)
}

/// CSV writer over a file or standard output.
pub fn csv_writer(path: Option<&Path>) -> CliResult<csv::Writer<Box<dyn Write>>> {
    let sink: Box<dyn Write> = match path {
        Some(p) => Box::new(fs::File::create(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?),
        None => Box::new(std::io::stdout()),
    };
    Ok(csv::Writer::from_writer(sink))
}

pub fn csv_err(e: csv::Error) -> CliError {
    CliError::Usage(format!("csv: {e}"))
}

/// One line per failed check on standard error, then a count.
pub fn summarize(report: &VerificationReport) {
    for c in report.failures() {
        eprintln!("FAIL {}: {} <= {} + {} ({})", c.id, c.value, c.bound, c.tolerance, c.anchor);
    }
    let failed = report.failures().count();
    eprintln!("{}: {} checks, {} failed", report.suite, report.checks.len(), failed);
}

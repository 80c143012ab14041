//! Deterministic execution of subject programs, runtime checking of
//! specifications and coverage measurement.

mod check;
mod coverage;
mod interp;
mod value;

use std::path::Path;

pub use check::{
    check_equivalence, check_specs, check_specs_with_limit, measure_coverage, replay,
    Counterexample, EquivalenceError, SpecVerdict, Trace,
};
pub use coverage::{reachable_methods, BranchCount, CoverageReport};
pub use interp::{
    eval_on_snapshot, execute, Event, ExecResult, Outcome, RuntimeError, RuntimeErrorKind,
    SiteKind, StateSnapshot, TestCase, DEFAULT_STEP_LIMIT,
};
pub use value::Value;

#[derive(Debug, thiserror::Error)]
pub enum TestFileError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Json {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// Parse a JSON-lines test suite. Blank lines are ignored.
pub fn parse_tests(text: &str, path: &str) -> Result<Vec<TestCase>, TestFileError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|source| TestFileError::Json {
                path: path.to_string(),
                line: i + 1,
                source,
            })
        })
        .collect()
}

pub fn load_tests(path: &Path) -> Result<Vec<TestCase>, TestFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| TestFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_tests(&text, &path.display().to_string())
}

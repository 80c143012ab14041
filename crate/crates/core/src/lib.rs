//! Evaluation harness for code comprehension through formal program
//! specifications.
//!
//! The pipeline parses annotated subject programs, validates their
//! specifications by runtime checking, derives semantics-preserving
//! program variants, builds specification tasks, queries models and scores
//! the answers.

pub mod corpus;
pub mod grade;
pub mod lang;
pub mod metrics;
pub mod modelio;
pub mod perturb;
pub mod pipeline;
pub mod runtime;
pub mod seed;
pub mod taskgen;

use std::io::Write;
use std::path::Path;

/// Write a file by writing a sibling temporary and renaming it over the
/// target, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)
}

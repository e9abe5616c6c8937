//! Shared plumbing for the acceptance suite: criterion reporting and the
//! location of the external data some criteria need.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

/// Dataset CSV in the schema of [`latentcca::eval::DATASET_COLUMNS`].
pub const MOHLER_ENV: &str = "LATENTCCA_MOHLER";
/// Embedding file, optionally with a `{dim}` placeholder.
pub const EMBEDDINGS_ENV: &str = "LATENTCCA_EMBEDDINGS";

pub fn workspace_root() -> PathBuf {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    manifest
        .ancestors()
        .nth(2)
        .unwrap_or(manifest)
        .to_path_buf()
}

pub fn mohler_path() -> PathBuf {
    std::env::var_os(MOHLER_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| workspace_root().join("data/mohler.csv"))
}

pub fn embeddings_path() -> String {
    std::env::var(EMBEDDINGS_ENV).unwrap_or_else(|_| {
        workspace_root()
            .join("data/glove.6B.{dim}d.txt")
            .to_string_lossy()
            .into_owned()
    })
}

/// Checks that the embedding file for `dim` exists.
pub fn embeddings_available(path: &str, dim: usize) -> Result<(), String> {
    let resolved = path.replace("{dim}", &dim.to_string());
    if Path::new(&resolved).is_file() {
        Ok(())
    } else {
        Err(format!(
            "embeddings not found at {resolved} (set {EMBEDDINGS_ENV})"
        ))
    }
}

pub fn dataset_available() -> Result<PathBuf, String> {
    let p = mohler_path();
    if p.is_file() {
        Ok(p)
    } else {
        Err(format!(
            "dataset not found at {} (set {MOHLER_ENV})",
            p.display()
        ))
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {} {}: {} ({:.1}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

/// Runs one criterion. `Err` means the criterion could not be evaluated and
/// counts as a failure.
pub fn run_criterion(
    id: u32,
    name: &'static str,
    f: impl FnOnce() -> Result<(bool, String), String>,
) -> Outcome {
    let start = Instant::now();
    let (passed, detail) = match std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)) {
        Ok(Ok(r)) => r,
        Ok(Err(reason)) => (false, format!("not evaluated: {reason}")),
        Err(_) => (false, "panicked".to_owned()),
    };
    Outcome {
        id,
        name,
        passed,
        detail,
        elapsed: start.elapsed(),
    }
}

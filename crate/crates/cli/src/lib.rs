//! File formats, instance generators and commands behind the `quasilin`
//! binary.

use std::io::Write as _;
use std::path::Path;

pub mod commands;
pub mod instances;
pub mod mmio;
pub mod problem_file;

use quasilin_core::Error as SolverError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Malformed or inconsistent input; exit code 1.
    #[error("input error: {0}")]
    Input(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Solver(#[from] SolverError),
}

impl CliError {
    /// 1 for input errors, 2 when the solver found no (verified) solution.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) | CliError::Io(_) => 1,
            CliError::Solver(e) => match e {
                SolverError::DimensionMismatch(_)
                | SolverError::NonFinite { .. }
                | SolverError::NotSymmetric
                | SolverError::InvalidElasticity(_)
                | SolverError::Unsupported(_) => 1,
                _ => 2,
            },
        }
    }
}

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| CliError::Input(format!("bad output path {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })?;
    Ok(())
}

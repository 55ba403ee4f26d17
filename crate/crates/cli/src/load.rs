use std::path::Path;

use slim_core::io::{read_container, TensorMap};
use slim_core::{Matrix, SlimError};

use crate::error::{CliError, CliResult};

pub fn container(path: &Path) -> CliResult<TensorMap> {
    read_container(path).map_err(|e| match e {
        SlimError::Io(source) => CliError::io(format!("reading {}", path.display()), source),
        other => other.into(),
    })
}

/// Every 2-D f32 tensor, in name order. Other tensors are skipped.
pub fn matrices(path: &Path) -> CliResult<Vec<(String, Matrix)>> {
    let mut out = Vec::new();
    for (name, t) in container(path)? {
        if t.shape().len() == 2 && t.dtype() == "f32" {
            out.push((name, t.to_matrix()?));
        } else {
            log::info!("skipping tensor '{name}' ({} {:?})", t.dtype(), t.shape());
        }
    }
    if out.is_empty() {
        return Err(SlimError::SchemaViolation(format!(
            "{} holds no 2-D f32 tensors",
            path.display()
        ))
        .into());
    }
    Ok(out)
}

/// The single 2-D f32 tensor of a container.
pub fn single_matrix(path: &Path) -> CliResult<Matrix> {
    let mut all = matrices(path)?;
    if all.len() != 1 {
        return Err(SlimError::SchemaViolation(format!(
            "{} holds {} matrices, expected exactly one",
            path.display(),
            all.len()
        ))
        .into());
    }
    Ok(all.remove(0).1)
}

pub fn create_dir(path: &Path) -> CliResult {
    std::fs::create_dir_all(path)
        .map_err(|e| CliError::io(format!("creating {}", path.display()), e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult {
    std::fs::write(path, text).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}

/// Artifact file name for a tensor: path separators become `_`.
pub fn artifact_name(tensor: &str) -> String {
    format!("{}.slim", tensor.replace(['/', '\\'], "_"))
}

/// Creation time from `SOURCE_DATE_EPOCH`, so builds stay reproducible.
pub fn source_date_epoch() -> Option<u64> {
    std::env::var("SOURCE_DATE_EPOCH").ok()?.trim().parse().ok()
}

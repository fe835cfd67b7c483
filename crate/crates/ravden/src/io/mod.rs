//! On-disk formats: PNM images, RPF1 raw tensors, `.flo` flow fields and
//! `key = value` noise sidecars.

mod flo;
mod pnm;
mod rpf;
mod sidecar;

use std::fs;
use std::path::{Path, PathBuf};

pub use flo::{load_flow, read_flow, save_flow, write_flow, FLO_MAGIC};
pub use pnm::{load_image, read_image, save_image, write_image, BitDepth};
pub use rpf::{load_raw, load_tensor, read_tensor, save_raw, save_tensor, write_tensor, Tensor, RPF_MAGIC};
pub use sidecar::{load_sidecar, parse_sidecar, save_sidecar, Sidecar};

/// Errors from reading or writing a file.
#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

impl IoError {
    pub fn path(&self) -> &Path {
        match self {
            IoError::Io { path, .. } | IoError::Format { path, .. } => path,
        }
    }
}

/// Failure to decode an in-memory buffer.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct FormatError(pub String);

impl FormatError {
    pub(crate) fn new(msg: impl Into<String>) -> Self {
        Self(msg.into())
    }
}

impl From<ravden_core::Error> for FormatError {
    fn from(e: ravden_core::Error) -> Self {
        Self(e.to_string())
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>, IoError> {
    fs::read(path).map_err(|source| IoError::Io { path: path.to_owned(), source })
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    fs::write(path, bytes).map_err(|source| IoError::Io { path: path.to_owned(), source })
}

pub(crate) fn at(path: &Path) -> impl FnOnce(FormatError) -> IoError + '_ {
    move |e| IoError::Format { path: path.to_owned(), msg: e.0 }
}

/// Files in `dir` whose extension is one of `exts` (case-insensitive),
/// sorted lexicographically by file name.
pub fn list_frames(dir: &Path, exts: &[&str]) -> Result<Vec<PathBuf>, IoError> {
    let entries = fs::read_dir(dir).map_err(|source| IoError::Io { path: dir.to_owned(), source })?;
    let mut out = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| IoError::Io { path: dir.to_owned(), source })?;
        let path = entry.path();
        let matches =
            path.extension().and_then(|e| e.to_str()).is_some_and(|e| exts.iter().any(|x| x.eq_ignore_ascii_case(e)));
        if matches && path.is_file() {
            out.push(path);
        }
    }
    out.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(out)
}

//! On-disk cache of per-session, per-window feature rows plus a session
//! metadata store.
//!
//! Layout under the cache root:
//! `<schema_version>/<window>s/<session_id>.col` for feature files and
//! `sessions.log` for metadata.

mod columnar;
mod meta;

pub use columnar::{decode_window, encode_window, read_window, verify_all, write_window, VerifyReport, COL_MAGIC};
pub use meta::{MetaStore, SessionMeta};

use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("schema version {found:?} does not match {expected:?}")]
    SchemaVersionMismatch { expected: String, found: String },
    #[error("corrupt cache file {path}: {reason}")]
    CorruptFile { path: String, reason: String },
    #[error("session {0:?} already stored with different metadata")]
    DuplicateConflict(String),
    #[error("cache rows must come from exactly one session, got {0}")]
    NotSingleSession(usize),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CacheError + '_ {
    move |source| CacheError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CacheKey {
    pub session_id: String,
    pub window_s: f64,
    pub schema_version: String,
}

impl CacheKey {
    pub fn new(session_id: impl Into<String>, window_s: f64, schema_version: impl Into<String>) -> Self {
        Self {
            session_id: session_id.into(),
            window_s,
            schema_version: schema_version.into(),
        }
    }

    pub fn path(&self, root: &Path) -> PathBuf {
        root.join(&self.schema_version)
            .join(format!("{}s", self.window_s))
            .join(format!("{}.col", self.session_id))
    }
}

/// Writes `bytes` to a unique sibling temp file, syncs it and renames it over
/// `path`, so readers see either the old or the new file.
pub(crate) fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), CacheError> {
    use std::io::Write;
    use std::sync::atomic::{AtomicU64, Ordering};
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let n = COUNTER.fetch_add(1, Ordering::Relaxed);
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp.{}.{n}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result.map_err(io_err(path))
}

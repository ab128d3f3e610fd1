use super::{atomic_write, io_err, CacheError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub session_id: String,
    pub device_label: String,
    pub power_on_ts: f64,
    pub n_flows: usize,
    pub n_packets: usize,
    pub source: String,
    /// Seconds since the Unix epoch; not part of record identity.
    pub ingest_ts: u64,
}

impl SessionMeta {
    fn same_content(&self, other: &SessionMeta) -> bool {
        SessionMeta {
            ingest_ts: 0,
            ..self.clone()
        } == SessionMeta {
            ingest_ts: 0,
            ..other.clone()
        }
    }
}

/// Append-only JSON-lines log with an in-memory index rebuilt on open.
#[derive(Debug)]
pub struct MetaStore {
    path: PathBuf,
    index: BTreeMap<String, SessionMeta>,
    /// Length of the log prefix made of complete records.
    valid_len: u64,
}

impl MetaStore {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, CacheError> {
        let path = path.as_ref().to_path_buf();
        let text = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(io_err(&path)(e)),
        };
        let mut index = BTreeMap::new();
        let mut valid_len = 0u64;
        let mut start = 0usize;
        while start < text.len() {
            let Some(nl) = text[start..].iter().position(|&b| b == b'\n') else {
                // A torn final record from an interrupted append.
                log::warn!("{}: ignoring incomplete final record", path.display());
                break;
            };
            let line = &text[start..start + nl];
            if !line.is_empty() {
                let rec: SessionMeta = serde_json::from_slice(line).map_err(|e| CacheError::CorruptFile {
                    path: path.display().to_string(),
                    reason: format!("record at byte {start}: {e}"),
                })?;
                if let Some(prev) = index.get(&rec.session_id) {
                    if !rec.same_content(prev) {
                        return Err(CacheError::CorruptFile {
                            path: path.display().to_string(),
                            reason: format!("conflicting records for {}", rec.session_id),
                        });
                    }
                }
                index.entry(rec.session_id.clone()).or_insert(rec);
            }
            start += nl + 1;
            valid_len = start as u64;
        }
        Ok(Self { path, index, valid_len })
    }

    /// Returns `true` when a new record was appended, `false` when an
    /// identical record already existed.
    pub fn put(&mut self, meta: SessionMeta) -> Result<bool, CacheError> {
        if let Some(prev) = self.index.get(&meta.session_id) {
            if prev.same_content(&meta) {
                return Ok(false);
            }
            return Err(CacheError::DuplicateConflict(meta.session_id));
        }
        if let Some(dir) = self.path.parent() {
            std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        let mut line = serde_json::to_string(&meta).expect("session metadata serializes");
        line.push('\n');
        let mut f = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(io_err(&self.path))?;
        f.set_len(self.valid_len).map_err(io_err(&self.path))?;
        f.write_all(line.as_bytes()).map_err(io_err(&self.path))?;
        f.sync_data().map_err(io_err(&self.path))?;
        self.valid_len += line.len() as u64;
        self.index.insert(meta.session_id.clone(), meta);
        Ok(true)
    }

    pub fn get(&self, session_id: &str) -> Option<&SessionMeta> {
        self.index.get(session_id)
    }

    /// All records ordered by session id.
    pub fn list(&self) -> impl Iterator<Item = &SessionMeta> {
        self.index.values()
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Rewrites the log with one line per session, atomically.
    pub fn compact(&mut self) -> Result<(), CacheError> {
        let mut text = String::new();
        for m in self.index.values() {
            text.push_str(&serde_json::to_string(m).expect("session metadata serializes"));
            text.push('\n');
        }
        atomic_write(&self.path, text.as_bytes())?;
        self.valid_len = text.len() as u64;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(id: &str, label: &str) -> SessionMeta {
        SessionMeta {
            session_id: id.into(),
            device_label: label.into(),
            power_on_ts: 1.5,
            n_flows: 4,
            n_packets: 40,
            source: format!("{label}/{id}.pcap"),
            ingest_ts: 100,
        }
    }

    #[test]
    fn put_get_idempotent_and_conflict() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sessions.log");
        let mut s = MetaStore::open(&p).unwrap();
        assert!(s.put(meta("b", "cam")).unwrap());
        assert!(s.put(meta("a", "plug")).unwrap());
        assert_eq!(s.get("b"), Some(&meta("b", "cam")));
        let mut later = meta("b", "cam");
        later.ingest_ts = 999;
        assert!(!s.put(later).unwrap());
        assert!(matches!(s.put(meta("b", "bulb")), Err(CacheError::DuplicateConflict(_))));
        let reopened = MetaStore::open(&p).unwrap();
        let ids: Vec<&str> = reopened.list().map(|m| m.session_id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
        assert_eq!(std::fs::read_to_string(&p).unwrap().lines().count(), 2);
    }

    #[test]
    fn torn_tail_is_ignored_and_overwritten() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sessions.log");
        let mut s = MetaStore::open(&p).unwrap();
        s.put(meta("a", "cam")).unwrap();
        let mut f = std::fs::OpenOptions::new().append(true).open(&p).unwrap();
        f.write_all(b"{\"session_id\":\"b\",\"dev").unwrap();
        drop(f);
        let mut s = MetaStore::open(&p).unwrap();
        assert_eq!(s.len(), 1);
        s.put(meta("c", "cam")).unwrap();
        let s = MetaStore::open(&p).unwrap();
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn corrupt_middle_record_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sessions.log");
        std::fs::write(&p, "not json\n").unwrap();
        assert!(matches!(MetaStore::open(&p), Err(CacheError::CorruptFile { .. })));
    }

    #[test]
    fn compact_keeps_records() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sessions.log");
        let mut s = MetaStore::open(&p).unwrap();
        for i in 0..5 {
            s.put(meta(&format!("s{i}"), "x")).unwrap();
        }
        std::fs::write(&p, std::fs::read_to_string(&p).unwrap().repeat(2)).unwrap();
        let mut s = MetaStore::open(&p).unwrap();
        s.compact().unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap().lines().count(), 5);
        assert_eq!(MetaStore::open(&p).unwrap().len(), 5);
        s.put(meta("s9", "x")).unwrap();
        assert_eq!(MetaStore::open(&p).unwrap().len(), 6);
    }
}

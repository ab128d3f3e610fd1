use super::FlowError;
use std::path::{Path, PathBuf};

/// One line of a session manifest:
/// `session_id<TAB>device_label<TAB>power_on_ts<TAB>pcap_path`.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub session_id: String,
    pub device_label: String,
    pub power_on_ts: f64,
    pub pcap_path: PathBuf,
}

impl ManifestEntry {
    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}",
            self.session_id,
            self.device_label,
            self.power_on_ts,
            self.pcap_path.display()
        )
    }
}

/// Parses manifest text. Blank lines and `#` comments are ignored; relative
/// capture paths are resolved against `base`.
pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<ManifestEntry>, FlowError> {
    let mut out: Vec<ManifestEntry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        let err = |reason: String| FlowError::Manifest { line, reason };
        if fields.len() != 4 {
            return Err(err(format!("expected 4 tab-separated fields, got {}", fields.len())));
        }
        let power_on_ts: f64 = fields[2]
            .parse()
            .map_err(|_| err(format!("bad power_on_ts {:?}", fields[2])))?;
        if !power_on_ts.is_finite() || power_on_ts < 0.0 {
            return Err(err(format!("power_on_ts out of range: {power_on_ts}")));
        }
        if fields[0].is_empty() || fields[1].is_empty() {
            return Err(err("empty session id or device label".into()));
        }
        if out.iter().any(|e| e.session_id == fields[0]) {
            return Err(err(format!("duplicate session id {}", fields[0])));
        }
        let p = PathBuf::from(fields[3]);
        out.push(ManifestEntry {
            session_id: fields[0].to_string(),
            device_label: fields[1].to_string(),
            power_on_ts,
            pcap_path: if p.is_absolute() { p } else { base.join(p) },
        });
    }
    Ok(out)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, FlowError> {
    let text = std::fs::read_to_string(path).map_err(|source| FlowError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_manifest(&text, path.parent().unwrap_or(Path::new(".")))
}

use super::{atomic_write, io_err, CacheError, CacheKey};
use crate::codec::{DecodeError, Decoder, Encoder};
use crate::features::{FeatureMatrix, FeatureValue, FeatureVector, Provenance};
use crate::pruning::{decode_schema, encode_schema};
use crate::scalar::Scalar;
use std::path::{Path, PathBuf};

pub const COL_MAGIC: &[u8; 8] = b"IOTFCOL1";

const TAG_NUM: u8 = 0;
const TAG_MISSING: u8 = 1;
const TAG_CAT: u8 = 2;
const TAG_BIN: u8 = 3;

// Layout: magic | scalar width u8 | schema | session_id | label | window opt_f64
// | n_rows u64 | flow_index u32 × n | one block per column: kind u8, then per
// cell a tag byte and its payload | crc32 of all preceding bytes.
pub fn encode_window<T: Scalar>(m: &FeatureMatrix<T>) -> Result<Vec<u8>, CacheError> {
    let sessions = m.sessions();
    let labels = m.device_labels();
    if sessions.len() != 1 || labels.len() != 1 {
        return Err(CacheError::NotSingleSession(sessions.len().max(labels.len())));
    }
    let mut e = Encoder::new();
    e.bytes(COL_MAGIC);
    e.u8(T::WIDTH);
    encode_schema(&m.schema, &mut e);
    e.str(&m.session_ids[0]);
    e.str(&m.labels[0]);
    e.opt_f64(m.rows[0].provenance.window);
    e.u64(m.n_rows() as u64);
    for r in &m.rows {
        e.u32(r.provenance.flow_index);
    }
    for (c, col) in m.schema.columns.iter().enumerate() {
        e.u8(col.kind.code());
        for v in m.column(c) {
            match v {
                FeatureValue::Num(x) => {
                    e.u8(TAG_NUM);
                    e.scalar(x);
                }
                FeatureValue::Missing => e.u8(TAG_MISSING),
                FeatureValue::Cat(k) => {
                    e.u8(TAG_CAT);
                    e.u16(k);
                }
                FeatureValue::Bin(b) => {
                    e.u8(TAG_BIN);
                    e.u8(u8::from(b));
                }
            }
        }
    }
    let crc = crc32fast::hash(e.as_slice());
    e.u32(crc);
    Ok(e.finish())
}

pub fn decode_window<T: Scalar>(bytes: &[u8], path: &Path) -> Result<FeatureMatrix<T>, CacheError> {
    let corrupt = |reason: String| CacheError::CorruptFile {
        path: path.display().to_string(),
        reason,
    };
    if bytes.len() < COL_MAGIC.len() + 5 || &bytes[..COL_MAGIC.len()] != COL_MAGIC {
        return Err(corrupt("bad magic".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    if crc32fast::hash(body) != u32::from_le_bytes([tail[0], tail[1], tail[2], tail[3]]) {
        return Err(corrupt("checksum mismatch".into()));
    }
    let mut d = Decoder::new(&body[COL_MAGIC.len()..]);
    let width = d.u8().map_err(|e| corrupt(e.to_string()))?;
    if width != T::WIDTH {
        return Err(CacheError::SchemaVersionMismatch {
            expected: format!("{}-byte scalars", T::WIDTH),
            found: format!("{width}-byte scalars"),
        });
    }
    decode_body(&mut d).map_err(|e| corrupt(e.to_string()))
}

fn decode_body<T: Scalar>(d: &mut Decoder<'_>) -> Result<FeatureMatrix<T>, DecodeError> {
    let schema = decode_schema(d)?;
    let session_id = d.str()?;
    let label = d.str()?;
    let window = d.opt_f64()?;
    let n = d.u64()? as usize;
    if n.saturating_mul(4) > d.remaining() {
        return Err(d.invalid("row count exceeds file size"));
    }
    let flow_index: Vec<u32> = (0..n).map(|_| d.u32()).collect::<Result<_, _>>()?;
    let mut rows: Vec<Vec<FeatureValue<T>>> = vec![Vec::with_capacity(schema.len()); n];
    for col in &schema.columns {
        if d.u8()? != col.kind.code() {
            return Err(d.invalid(format!("column {} kind", col.name)));
        }
        for row in rows.iter_mut() {
            row.push(match d.u8()? {
                TAG_NUM => FeatureValue::Num(d.scalar()?),
                TAG_MISSING => FeatureValue::Missing,
                TAG_CAT => FeatureValue::Cat(d.u16()?),
                TAG_BIN => FeatureValue::Bin(d.u8()? != 0),
                _ => return Err(d.invalid("cell tag")),
            });
        }
    }
    if d.remaining() != 0 {
        return Err(d.invalid("trailing bytes"));
    }
    let mut m = FeatureMatrix::new(schema);
    for (values, idx) in rows.into_iter().zip(flow_index) {
        let v = FeatureVector {
            values,
            provenance: Provenance {
                session_id: session_id.clone(),
                flow_index: idx,
                window,
            },
        };
        m.push(v, label.clone()).map_err(|e| d.invalid(e.to_string()))?;
    }
    Ok(m)
}

/// Stores one session's rows for one window.
pub fn write_window<T: Scalar>(root: &Path, key: &CacheKey, m: &FeatureMatrix<T>) -> Result<PathBuf, CacheError> {
    if m.schema.version != key.schema_version {
        return Err(CacheError::SchemaVersionMismatch {
            expected: key.schema_version.clone(),
            found: m.schema.version.clone(),
        });
    }
    if m.sessions().iter().any(|s| *s != key.session_id) {
        return Err(CacheError::NotSingleSession(m.sessions().len()));
    }
    let path = key.path(root);
    atomic_write(&path, &encode_window(m)?)?;
    Ok(path)
}

/// `Ok(None)` when nothing is cached for `key`.
pub fn read_window<T: Scalar>(root: &Path, key: &CacheKey) -> Result<Option<FeatureMatrix<T>>, CacheError> {
    let path = key.path(root);
    let bytes = match std::fs::read(&path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(io_err(&path)(e)),
    };
    let m: FeatureMatrix<T> = decode_window(&bytes, &path)?;
    if m.schema.version != key.schema_version {
        return Err(CacheError::SchemaVersionMismatch {
            expected: key.schema_version.clone(),
            found: m.schema.version,
        });
    }
    if m.sessions().iter().any(|s| *s != key.session_id) {
        return Err(CacheError::CorruptFile {
            path: path.display().to_string(),
            reason: "session id differs from file name".into(),
        });
    }
    Ok(Some(m))
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct VerifyReport {
    pub ok: Vec<PathBuf>,
    pub corrupt: Vec<(PathBuf, String)>,
}

/// Checks the checksum and structure of every `.col` file under `root`.
pub fn verify_all(root: &Path) -> Result<VerifyReport, CacheError> {
    let mut files = Vec::new();
    collect(root, &mut files)?;
    files.sort();
    let mut report = VerifyReport::default();
    for path in files {
        let bytes = std::fs::read(&path).map_err(io_err(&path))?;
        let width = bytes.get(COL_MAGIC.len()).copied().unwrap_or(0);
        let r = if width == 4 {
            decode_window::<f32>(&bytes, &path).map(|_| ())
        } else {
            decode_window::<f64>(&bytes, &path).map(|_| ())
        };
        match r {
            Ok(()) => report.ok.push(path),
            Err(e) => report.corrupt.push((path, e.to_string())),
        }
    }
    Ok(report)
}

fn collect(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), CacheError> {
    let entries = match std::fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(io_err(dir)(e)),
    };
    for entry in entries {
        let path = entry.map_err(io_err(dir))?.path();
        if path.is_dir() {
            collect(&path, out)?;
        } else if path.extension().is_some_and(|x| x == "col") {
            out.push(path);
        }
    }
    Ok(())
}

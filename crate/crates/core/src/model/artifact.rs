use super::ovr::OvRModel;
use super::ModelError;
use crate::codec::{Decoder, Encoder};
use crate::scalar::Scalar;
use std::io::Write;
use std::path::Path;

pub const MAGIC: &[u8; 8] = b"IOTFPMDL";
pub const FORMAT_VERSION: u16 = 1;

// Layout: magic | version u16 | scalar width u8 | model body | crc32 of all preceding bytes.
impl<T: Scalar> OvRModel<T> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut e = Encoder::new();
        e.bytes(MAGIC);
        e.u16(FORMAT_VERSION);
        e.u8(T::WIDTH);
        self.encode(&mut e);
        let crc = crc32fast::hash(e.as_slice());
        e.u32(crc);
        e.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        let bad = |m: String| Err(ModelError::Artifact(m));
        if bytes.len() < MAGIC.len() + 7 || &bytes[..MAGIC.len()] != MAGIC {
            return bad("not a model file (bad magic)".into());
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let mut d = Decoder::new(body);
        d.take(MAGIC.len())?;
        let version = d.u16()?;
        if version != FORMAT_VERSION {
            return bad(format!("format version {version}, this build reads {FORMAT_VERSION}"));
        }
        let width = d.u8()?;
        if width != T::WIDTH {
            return bad(format!("scalar width {width} bytes, expected {}", T::WIDTH));
        }
        let stored = u32::from_le_bytes([tail[0], tail[1], tail[2], tail[3]]);
        if crc32fast::hash(body) != stored {
            return bad("checksum mismatch".into());
        }
        let model = OvRModel::decode(&mut d)?;
        if d.remaining() != 0 {
            return bad(format!("{} trailing bytes", d.remaining()));
        }
        Ok(model)
    }

    /// Writes to a sibling temp file, syncs, then renames over `path`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let path = path.as_ref();
        let io = |source| ModelError::Io {
            path: path.display().to_string(),
            source,
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        let tmp = path.with_extension("tmp");
        let mut f = std::fs::File::create(&tmp).map_err(io)?;
        f.write_all(&self.to_bytes()).map_err(io)?;
        f.sync_all().map_err(io)?;
        drop(f);
        std::fs::rename(&tmp, path).map_err(io)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureSchema;
    use crate::model::{train_ovr, HyperParams};
    use crate::preprocess::{Dataset, Scaler};
    use crate::pruning::PruneReport;

    fn model() -> (OvRModel<f64>, Dataset<f64>) {
        let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![(i % 3) as f64 * 4.0 + (i as f64 * 0.01), (i % 7) as f64]).collect();
        let labels = (0..60).map(|i| format!("d{}", i % 3)).collect();
        let sids = (0..60).map(|i| format!("s{}", i % 6)).collect();
        let ds = Dataset::from_rows(vec!["a".into(), "b".into()], &rows, labels, sids);
        let p = HyperParams { n_trees: 8, seed: 3, ..Default::default() };
        let m = train_ovr(&ds, &p, Scaler::new(), PruneReport::identity(&FeatureSchema::full()), Some(30.0)).unwrap();
        (m, ds)
    }

    #[test]
    fn save_load_predictions_bit_identical() {
        let (m, ds) = model();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.bin");
        m.save(&p).unwrap();
        let back = OvRModel::<f64>::load(&p).unwrap();
        for row in ds.rows() {
            let a = m.scores(row).unwrap();
            let b = back.scores(row).unwrap();
            for ((da, sa), (db, sb)) in a.iter().zip(&b) {
                assert_eq!(da, db);
                assert_eq!(sa.to_bits(), sb.to_bits());
            }
        }
        assert!(!p.with_extension("tmp").exists());
    }

    #[test]
    fn rejects_tampering_and_version_and_width() {
        let (m, _) = model();
        let bytes = m.to_bytes();
        let mut flipped = bytes.clone();
        let mid = flipped.len() / 2;
        flipped[mid] ^= 0xff;
        assert!(matches!(OvRModel::<f64>::from_bytes(&flipped), Err(ModelError::Artifact(_))));
        let mut v2 = bytes.clone();
        v2[8] = 2;
        let e = OvRModel::<f64>::from_bytes(&v2).unwrap_err();
        assert!(e.to_string().contains("version"));
        assert!(matches!(OvRModel::<f32>::from_bytes(&bytes), Err(ModelError::Artifact(_))));
        assert!(OvRModel::<f64>::from_bytes(b"garbage").is_err());
    }
}

//! Glue between the stages: loading sessions from a manifest, per-window
//! feature matrices (optionally through the cache), and the leakage-safe
//! fit/prepare sequence shared by the experiments and the CLI.

use crate::cache::{read_window, write_window, CacheKey, SessionMeta};
use crate::features::{extract_session, FeatureMatrix, FeatureSchema, SCHEMA_VERSION};
use crate::flow::{parse_capture, read_manifest, truncate_session, FlowError, ManifestEntry, Session};
use crate::model::{train_ovr, HyperParams, OvRModel};
use crate::preprocess::{drop_nulls, fit_scaler, Dataset, NullReport};
use crate::pruning::{validate_features, PruneConfig};
use crate::scalar::Scalar;
use crate::{Error, Result};
use rayon::prelude::*;
use std::path::{Path, PathBuf};

pub fn load_session(entry: &ManifestEntry) -> Result<Session> {
    let bytes = std::fs::read(&entry.pcap_path).map_err(|e| Error::io(&entry.pcap_path, e))?;
    let cap = parse_capture(&bytes)?;
    if cap.skipped_malformed > 0 || cap.truncated_records > 0 {
        log::warn!(
            "{}: skipped {} malformed and {} truncated records",
            entry.pcap_path.display(),
            cap.skipped_malformed,
            cap.truncated_records
        );
    }
    Ok(Session::from_packets(
        &entry.session_id,
        &entry.device_label,
        entry.power_on_ts,
        cap.packets,
    ))
}

/// Loads every session listed in the manifest, in manifest order.
pub fn load_sessions(manifest: &Path) -> Result<Vec<Session>> {
    let entries = read_manifest(manifest)?;
    entries.par_iter().map(load_session).collect()
}

pub fn session_meta(entry: &ManifestEntry, session: &Session, ingest_ts: u64) -> SessionMeta {
    SessionMeta {
        session_id: session.session_id.clone(),
        device_label: session.device_label.clone(),
        power_on_ts: session.power_on_ts,
        n_flows: session.flows.len(),
        n_packets: session.packet_count(),
        source: entry.pcap_path.display().to_string(),
        ingest_ts,
    }
}

/// Rows of one session, truncated to `window` seconds after power-on when
/// a window is given.
pub fn session_rows<T: Scalar>(session: &Session, window: Option<f64>) -> Result<FeatureMatrix<T>> {
    let truncated;
    let s = match window {
        Some(w) => {
            truncated = truncate_session(session, w)?;
            &truncated
        }
        None => session,
    };
    let mut m = FeatureMatrix::new(FeatureSchema::full());
    for row in extract_session::<T>(s, window)? {
        m.push(row, &session.device_label)?;
    }
    Ok(m)
}

/// Where per-session feature rows come from.
pub trait FeatureSource<T: Scalar>: Sync {
    fn rows(&self, session: &Session, window: Option<f64>) -> Result<FeatureMatrix<T>>;
}

/// Extracts features from the packets every time.
#[derive(Debug, Clone, Copy, Default)]
pub struct Direct;

impl<T: Scalar> FeatureSource<T> for Direct {
    fn rows(&self, session: &Session, window: Option<f64>) -> Result<FeatureMatrix<T>> {
        session_rows(session, window)
    }
}

/// Reads windowed rows from the cache, computing and storing them on a
/// miss. A corrupt cache file is an error, never recomputed over.
#[derive(Debug, Clone)]
pub struct Cached {
    pub root: PathBuf,
}

impl<T: Scalar> FeatureSource<T> for Cached {
    fn rows(&self, session: &Session, window: Option<f64>) -> Result<FeatureMatrix<T>> {
        let Some(w) = window else {
            return session_rows(session, None);
        };
        let key = CacheKey::new(&session.session_id, w, SCHEMA_VERSION);
        if let Some(m) = read_window(&self.root, &key)? {
            return Ok(m);
        }
        let m = session_rows(session, Some(w))?;
        if !m.is_empty() {
            write_window(&self.root, &key, &m)?;
        }
        Ok(m)
    }
}

/// Stacks the rows of all sessions in session order.
pub fn build_matrix<T: Scalar>(
    sessions: &[Session],
    window: Option<f64>,
    source: &dyn FeatureSource<T>,
) -> Result<FeatureMatrix<T>> {
    if let Some(w) = window {
        if !(w > 0.0) {
            return Err(FlowError::NonPositiveWindow(w).into());
        }
    }
    let parts: Vec<FeatureMatrix<T>> = sessions
        .par_iter()
        .map(|s| source.rows(s, window))
        .collect::<Result<_>>()?;
    let mut m = FeatureMatrix::new(FeatureSchema::full());
    for p in parts {
        m.append(p)?;
    }
    Ok(m)
}

/// Prune on training rows, drop nulls, fit the scaler, train the ensemble.
pub fn fit_model<T: Scalar>(
    train: &FeatureMatrix<T>,
    params: &HyperParams,
    prune: &PruneConfig,
    window: Option<f64>,
) -> Result<(OvRModel<T>, NullReport)> {
    let report = validate_features(train, prune)?;
    let pruned = report.apply(train)?;
    let (clean, nulls) = drop_nulls(&pruned)?;
    let scaler = fit_scaler(&clean);
    let ds = scaler.transform(&clean)?;
    let model = train_ovr(&ds, params, scaler, report, window)?;
    Ok((model, nulls))
}

/// Applies a fitted model's pruning, null policy and scaling to new rows.
pub fn prepare<T: Scalar>(model: &OvRModel<T>, m: &FeatureMatrix<T>) -> Result<Dataset<T>> {
    let pruned = model.prune.apply(m)?;
    let (clean, _) = drop_nulls(&pruned)?;
    Ok(model.scaler.transform(&clean)?)
}

/// Scaled training rows of a fitted model, reconstructed from raw rows.
pub fn training_dataset<T: Scalar>(model: &OvRModel<T>, train: &FeatureMatrix<T>) -> Result<Dataset<T>> {
    prepare(model, train)
}

use super::forest::{train_forest, RandomForest};
use super::tree::TrainSet;
use super::{HyperParams, ModelError};
use crate::codec::{DecodeError, Decoder, Encoder};
use crate::features::{FeatureMatrix, SCHEMA_VERSION};
use crate::preprocess::{balance_indices, Dataset, Scaler};
use crate::pruning::PruneReport;
use crate::scalar::Scalar;
use crate::seed;
use std::collections::BTreeMap;
use std::fmt;

/// Label reported when no device clears the fusion threshold.
pub const UNKNOWN: &str = "UNKNOWN";

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMeta {
    pub seed: u64,
    pub window_s: Option<f64>,
    /// FNV-1a over the training rows and labels.
    pub fingerprint: u64,
    pub train_sessions: Vec<String>,
    pub n_train_rows: usize,
}

impl TrainingMeta {
    pub fn for_dataset<T: Scalar>(ds: &Dataset<T>, seed: u64, window_s: Option<f64>) -> Self {
        let mut sessions: Vec<String> = ds.session_ids.clone();
        sessions.sort();
        sessions.dedup();
        Self {
            seed,
            window_s,
            fingerprint: fingerprint(ds),
            train_sessions: sessions,
            n_train_rows: ds.n_rows(),
        }
    }

    pub fn encode(&self, e: &mut Encoder) {
        e.u64(self.seed);
        e.opt_f64(self.window_s);
        e.u64(self.fingerprint);
        e.u64(self.n_train_rows as u64);
        e.len_prefix(self.train_sessions.len());
        self.train_sessions.iter().for_each(|s| e.str(s));
    }

    pub fn decode(d: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let seed = d.u64()?;
        let window_s = d.opt_f64()?;
        let fingerprint = d.u64()?;
        let n_train_rows = d.u64()? as usize;
        let n = d.len_prefix(4)?;
        let train_sessions = (0..n).map(|_| d.str()).collect::<Result<_, _>>()?;
        Ok(Self {
            seed,
            window_s,
            fingerprint,
            train_sessions,
            n_train_rows,
        })
    }
}

pub fn fingerprint<T: Scalar>(ds: &Dataset<T>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    };
    for c in &ds.columns {
        eat(c.as_bytes());
        eat(&[0]);
    }
    for (i, l) in ds.labels.iter().enumerate() {
        eat(l.as_bytes());
        eat(&[0]);
        for v in ds.row(i) {
            eat(&v.bit_key().to_le_bytes());
        }
    }
    h
}

/// Fused decision for one row; `device == None` means no forest reached θ.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T> {
    pub device: Option<String>,
    pub score: T,
}

impl<T> Prediction<T> {
    pub fn label(&self) -> &str {
        self.device.as_deref().unwrap_or(UNKNOWN)
    }
}

impl<T: fmt::Display> fmt::Display for Prediction<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}", self.label(), self.score)
    }
}

/// One binary forest per device, sharing a scaler and prune report.
#[derive(Debug, Clone, PartialEq)]
pub struct OvRModel<T> {
    pub forests: BTreeMap<String, RandomForest<T>>,
    pub params: HyperParams,
    pub scaler: Scaler<T>,
    pub prune: PruneReport,
    pub schema_version: String,
    pub meta: TrainingMeta,
}

/// Binary task "device vs rest", randomly oversampled to parity.
fn train_device<T: Scalar>(ds: &Dataset<T>, device: &str, params: &HyperParams) -> Result<RandomForest<T>, ModelError> {
    let positive: Vec<bool> = ds.labels.iter().map(|l| l == device).collect();
    if !positive.iter().any(|&p| p) {
        return Err(ModelError::UnknownDevice(device.to_string()));
    }
    if positive.iter().all(|&p| p) {
        return Err(ModelError::SingleClass(1));
    }
    let idx = balance_indices(&positive, &[false, true], seed::derive_str(params.seed, &format!("balance:{device}")))?;
    let w = ds.n_cols();
    let mut x = Vec::with_capacity(idx.len() * w);
    let mut y = Vec::with_capacity(idx.len());
    for &i in &idx {
        x.extend_from_slice(ds.row(i));
        y.push(u32::from(positive[i]));
    }
    let ts = TrainSet::new(&x, w, &y, 2)?;
    train_forest(&ts, &params.with_seed(seed::derive_str(params.seed, device)))
}

/// Trains one forest per distinct label in `train`.
pub fn train_ovr<T: Scalar>(
    train: &Dataset<T>,
    params: &HyperParams,
    scaler: Scaler<T>,
    prune: PruneReport,
    window_s: Option<f64>,
) -> Result<OvRModel<T>, ModelError> {
    params.validate()?;
    if train.is_empty() {
        return Err(ModelError::EmptyData);
    }
    let mut devices: Vec<&str> = train.labels.iter().map(String::as_str).collect();
    devices.sort_unstable();
    devices.dedup();
    if devices.len() < 2 {
        return Err(ModelError::SingleClass(devices.len()));
    }
    let mut forests = BTreeMap::new();
    for d in devices {
        log::debug!("training forest for {d}");
        forests.insert(d.to_string(), train_device(train, d, params)?);
    }
    Ok(OvRModel {
        forests,
        params: *params,
        scaler,
        prune,
        schema_version: SCHEMA_VERSION.to_string(),
        meta: TrainingMeta::for_dataset(train, params.seed, window_s),
    })
}

impl<T: Scalar> OvRModel<T> {
    pub fn devices(&self) -> impl Iterator<Item = &str> {
        self.forests.keys().map(String::as_str)
    }

    pub fn n_features(&self) -> usize {
        self.forests.values().next().map_or(0, |f| f.n_features)
    }

    /// Trains exactly one new forest; existing forests are untouched.
    pub fn add_device(&mut self, device: &str, data: &Dataset<T>) -> Result<(), ModelError> {
        if self.forests.contains_key(device) {
            return Err(ModelError::DuplicateDevice(device.to_string()));
        }
        self.check_width(data.n_cols())?;
        let f = train_device(data, device, &self.params)?;
        self.forests.insert(device.to_string(), f);
        Ok(())
    }

    pub fn retrain_device(&mut self, device: &str, data: &Dataset<T>) -> Result<(), ModelError> {
        if !self.forests.contains_key(device) {
            return Err(ModelError::UnknownDevice(device.to_string()));
        }
        self.check_width(data.n_cols())?;
        let f = train_device(data, device, &self.params)?;
        self.forests.insert(device.to_string(), f);
        Ok(())
    }

    fn check_width(&self, got: usize) -> Result<(), ModelError> {
        let expected = self.n_features();
        if got != expected {
            return Err(ModelError::SchemaMismatch { expected, got });
        }
        Ok(())
    }

    /// Positive-class probability of every forest, in label order.
    pub fn scores(&self, row: &[T]) -> Result<Vec<(&str, T)>, ModelError> {
        self.forests
            .iter()
            .map(|(d, f)| Ok((d.as_str(), f.positive_proba(row)?)))
            .collect()
    }

    /// Argmax over per-device probabilities; an equal score never displaces
    /// an earlier (lexicographically smaller) label.
    pub fn fuse(scores: &[(&str, T)], theta: Option<T>) -> Prediction<T> {
        let mut best: Option<(&str, T)> = None;
        for &(d, s) in scores {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((d, s));
            }
        }
        let (d, s) = best.unwrap_or((UNKNOWN, T::zero()));
        let known = !scores.is_empty() && theta.is_none_or(|t| s >= t);
        Prediction {
            device: known.then(|| d.to_string()),
            score: s,
        }
    }

    pub fn predict_device(&self, row: &[T], theta: Option<T>) -> Result<Prediction<T>, ModelError> {
        Ok(Self::fuse(&self.scores(row)?, theta))
    }

    /// Prunes and scales raw feature rows, then fuses per row.
    pub fn prepare(&self, m: &FeatureMatrix<T>) -> Result<Dataset<T>, ModelError> {
        Ok(self.scaler.transform(&self.prune.apply(m)?)?)
    }

    pub fn predict_matrix(&self, m: &FeatureMatrix<T>, theta: Option<T>) -> Result<Vec<Prediction<T>>, ModelError> {
        let ds = self.prepare(m)?;
        ds.rows().map(|r| self.predict_device(r, theta)).collect()
    }

    /// Averages each device's probability over all rows before fusing.
    pub fn predict_mean(&self, ds: &Dataset<T>, theta: Option<T>) -> Result<Prediction<T>, ModelError> {
        if ds.is_empty() {
            return Err(ModelError::EmptyData);
        }
        let n = T::from_count(ds.n_rows());
        let mut acc: Vec<(&str, T)> = self.devices().map(|d| (d, T::zero())).collect();
        for row in ds.rows() {
            for (a, (_, s)) in acc.iter_mut().zip(self.scores(row)?) {
                a.1 = a.1 + s;
            }
        }
        acc.iter_mut().for_each(|a| a.1 = a.1 / n);
        Ok(Self::fuse(&acc, theta))
    }

    pub fn encode(&self, e: &mut Encoder) {
        e.str(&self.schema_version);
        self.params.encode(e);
        self.meta.encode(e);
        self.prune.encode(e);
        self.scaler.encode(e);
        e.len_prefix(self.forests.len());
        for (d, f) in &self.forests {
            e.str(d);
            f.encode(e);
        }
    }

    pub fn decode(d: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let schema_version = d.str()?;
        let params = HyperParams::decode(d)?;
        let meta = TrainingMeta::decode(d)?;
        let prune = PruneReport::decode(d)?;
        let scaler = Scaler::decode(d)?;
        let n = d.len_prefix(8)?;
        let mut forests = BTreeMap::new();
        for _ in 0..n {
            let name = d.str()?;
            let f = RandomForest::decode(d)?;
            if forests.insert(name, f).is_some() {
                return Err(d.invalid("duplicate device label"));
            }
        }
        if forests.is_empty() {
            return Err(d.invalid("model has no devices"));
        }
        Ok(Self {
            forests,
            params,
            scaler,
            prune,
            schema_version,
            meta,
        })
    }
}

/// Mean over devices of the per-device binary accuracy (positive iff p > 0.5).
pub fn mean_binary_accuracy<T: Scalar>(model: &OvRModel<T>, ds: &Dataset<T>) -> Result<f64, ModelError> {
    if ds.is_empty() {
        return Err(ModelError::EmptyData);
    }
    let half = T::from_f64_lossy(0.5);
    let mut total = 0.0;
    for (d, f) in &model.forests {
        let mut hits = 0usize;
        for (i, row) in ds.rows().enumerate() {
            let pred = f.positive_proba(row)? > half;
            hits += usize::from(pred == (ds.labels[i] == *d));
        }
        total += hits as f64 / ds.n_rows() as f64;
    }
    Ok(total / model.forests.len() as f64)
}

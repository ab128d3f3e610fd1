use super::PreprocessError;
use crate::features::FeatureMatrix;
use crate::scalar::Scalar;
use crate::seed;
use rand::seq::SliceRandom;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Train,
    Test,
}

/// Session-level train/test assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitAssignment {
    pub train: BTreeSet<String>,
    pub test: BTreeSet<String>,
    pub seed: u64,
    pub train_fraction: f64,
}

/// Stratified split of `(session_id, device_label)` pairs. Each device's
/// sessions are shuffled by a generator derived from `seed` and the label,
/// and the first `ceil(fraction * n)` go to training (at least one session
/// always stays in test).
pub fn session_split(
    sessions: &[(String, String)],
    train_fraction: f64,
    seed: u64,
) -> Result<SplitAssignment, PreprocessError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(PreprocessError::InvalidFraction(train_fraction));
    }
    let mut by_label: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for (s, l) in sessions {
        by_label.entry(l.as_str()).or_default().insert(s.as_str());
    }
    let mut out = SplitAssignment {
        train: BTreeSet::new(),
        test: BTreeSet::new(),
        seed,
        train_fraction,
    };
    for (label, ids) in by_label {
        if ids.len() < 2 {
            return Err(PreprocessError::InsufficientSessions {
                label: label.to_string(),
                count: ids.len(),
            });
        }
        let mut ids: Vec<&str> = ids.into_iter().collect();
        ids.shuffle(&mut seed::rng(seed::derive_str(seed, label)));
        let n_train = ((train_fraction * ids.len() as f64).ceil() as usize).clamp(1, ids.len() - 1);
        for (i, id) in ids.into_iter().enumerate() {
            if i < n_train {
                out.train.insert(id.to_string());
            } else {
                out.test.insert(id.to_string());
            }
        }
    }
    Ok(out)
}

pub fn session_split_matrix<T: Scalar>(
    matrix: &FeatureMatrix<T>,
    train_fraction: f64,
    seed: u64,
) -> Result<SplitAssignment, PreprocessError> {
    session_split(&matrix.session_labels(), train_fraction, seed)
}

impl SplitAssignment {
    pub fn side_of(&self, session_id: &str) -> Option<Side> {
        if self.train.contains(session_id) {
            Some(Side::Train)
        } else if self.test.contains(session_id) {
            Some(Side::Test)
        } else {
            None
        }
    }

    pub fn is_disjoint(&self) -> bool {
        self.train.is_disjoint(&self.test)
    }

    /// One `session_id<TAB>train|test` line per session, after a header
    /// comment carrying the seed and fraction.
    pub fn to_text(&self) -> String {
        let mut s = format!("# seed={} train_fraction={}\n", self.seed, self.train_fraction);
        let mut all: Vec<(&String, &str)> = self
            .train
            .iter()
            .map(|x| (x, "train"))
            .chain(self.test.iter().map(|x| (x, "test")))
            .collect();
        all.sort();
        for (id, side) in all {
            let _ = writeln!(s, "{id}\t{side}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, PreprocessError> {
        let mut out = SplitAssignment {
            train: BTreeSet::new(),
            test: BTreeSet::new(),
            seed: 0,
            train_fraction: 0.0,
        };
        for (i, line) in text.lines().enumerate() {
            let err = |reason: &str| PreprocessError::SplitFormat {
                line: i + 1,
                reason: reason.to_string(),
            };
            if let Some(h) = line.strip_prefix('#') {
                for kv in h.split_whitespace() {
                    match kv.split_once('=') {
                        Some(("seed", v)) => out.seed = v.parse().map_err(|_| err("bad seed"))?,
                        Some(("train_fraction", v)) => {
                            out.train_fraction = v.parse().map_err(|_| err("bad fraction"))?
                        }
                        _ => {}
                    }
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            match line.split_once('\t') {
                Some((id, "train")) => {
                    out.train.insert(id.to_string());
                }
                Some((id, "test")) => {
                    out.test.insert(id.to_string());
                }
                _ => return Err(err("expected <session_id>\\t<train|test>")),
            }
        }
        if !out.is_disjoint() {
            return Err(PreprocessError::SplitFormat {
                line: 0,
                reason: "a session is listed on both sides".into(),
            });
        }
        Ok(out)
    }
}

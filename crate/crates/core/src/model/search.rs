use super::ovr::{mean_binary_accuracy, train_ovr};
use super::{HyperParams, MaxFeatures, ModelError};
use crate::features::FeatureSchema;
use crate::preprocess::{Dataset, Scaler};
use crate::pruning::PruneReport;
use crate::scalar::Scalar;
use crate::seed;
use rand::seq::SliceRandom;
use rand::Rng;
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};

#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub n_trees: Vec<usize>,
    pub max_depth: Vec<Option<usize>>,
    pub min_samples_split: Vec<usize>,
    pub min_samples_leaf: Vec<usize>,
    pub max_features: Vec<MaxFeatures>,
    pub n_iter: usize,
    pub k_folds: usize,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            n_trees: vec![50, 100, 200, 300],
            max_depth: vec![None, Some(10), Some(20), Some(30)],
            min_samples_split: vec![2, 5, 10],
            min_samples_leaf: vec![1, 2, 4],
            max_features: vec![MaxFeatures::Sqrt, MaxFeatures::Log2, MaxFeatures::Fraction(0.5)],
            n_iter: 25,
            k_folds: 5,
        }
    }
}

impl SearchSpace {
    pub fn singleton(p: &HyperParams) -> Self {
        Self {
            n_trees: vec![p.n_trees],
            max_depth: vec![p.max_depth],
            min_samples_split: vec![p.min_samples_split],
            min_samples_leaf: vec![p.min_samples_leaf],
            max_features: vec![p.max_features],
            n_iter: 1,
            k_folds: 5,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.n_trees.is_empty()
            || self.max_depth.is_empty()
            || self.min_samples_split.is_empty()
            || self.min_samples_leaf.is_empty()
            || self.max_features.is_empty()
            || self.n_iter == 0
    }

    /// Each dimension drawn independently and uniformly.
    pub fn sample(&self, seed: u64) -> Result<Vec<HyperParams>, ModelError> {
        if self.is_empty() {
            return Err(ModelError::EmptySpace);
        }
        let mut rng = seed::rng(seed::derive_str(seed, "search"));
        fn pick<V: Copy>(rng: &mut seed::Rng, xs: &[V]) -> V {
            xs[rng.random_range(0..xs.len())]
        }
        let out: Vec<HyperParams> = (0..self.n_iter)
            .map(|_| HyperParams {
                n_trees: pick(&mut rng, &self.n_trees),
                max_depth: pick(&mut rng, &self.max_depth),
                min_samples_split: pick(&mut rng, &self.min_samples_split),
                min_samples_leaf: pick(&mut rng, &self.min_samples_leaf),
                max_features: pick(&mut rng, &self.max_features),
                seed,
            })
            .collect();
        out.iter().try_for_each(HyperParams::validate)?;
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub params: HyperParams,
    pub fold_scores: Vec<f64>,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    /// In sampling order, repeats included.
    pub candidates: Vec<Candidate>,
    pub best: usize,
}

impl CvReport {
    pub fn best(&self) -> &Candidate {
        &self.candidates[self.best]
    }

    pub fn render_tsv(&self) -> String {
        let mut s = String::from("rank\tn_trees\tmax_depth\tmin_samples_split\tmin_samples_leaf\tmax_features\tmean_cv_acc\tfold_scores\n");
        for (i, c) in self.candidates.iter().enumerate() {
            let folds: Vec<String> = c.fold_scores.iter().map(|f| format!("{f:.6}")).collect();
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{:.6}\t{}\n",
                if i == self.best { "best" } else { "-" },
                c.params.n_trees,
                c.params.max_depth.map_or("none".into(), |d| d.to_string()),
                c.params.min_samples_split,
                c.params.min_samples_leaf,
                c.params.max_features,
                c.mean,
                folds.join(",")
            ));
        }
        s
    }
}

/// Session-level stratified folds: each label's sessions are shuffled and
/// dealt round-robin, continuing the deal across labels in label order.
pub fn session_folds(
    session_labels: &[(String, String)],
    k: usize,
    seed: u64,
) -> Result<BTreeMap<String, usize>, ModelError> {
    let mut by_label: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (sid, label) in session_labels {
        by_label.entry(label).or_default().push(sid);
    }
    let n: usize = by_label.values().map(|v| {
        let s: BTreeSet<_> = v.iter().collect();
        s.len()
    }).sum();
    if k < 2 || n < k {
        return Err(ModelError::InvalidFolds { k, sessions: n });
    }
    let mut out = BTreeMap::new();
    let mut offset = 0;
    for (label, mut sids) in by_label {
        sids.sort_unstable();
        sids.dedup();
        sids.shuffle(&mut seed::rng(seed::derive_str(seed, label)));
        for (i, s) in sids.iter().enumerate() {
            out.insert(s.to_string(), (offset + i) % k);
        }
        offset += sids.len();
    }
    Ok(out)
}

/// Cheaper model first: fewer trees, then shallower (unbounded is deepest).
fn cheaper(a: &HyperParams, b: &HyperParams) -> Ordering {
    a.n_trees
        .cmp(&b.n_trees)
        .then_with(|| a.max_depth.unwrap_or(usize::MAX).cmp(&b.max_depth.unwrap_or(usize::MAX)))
}

/// Scores sampled candidates by mean per-device binary accuracy over
/// session-level folds of `train`, which must already be scaled.
pub fn randomized_search_cv<T: Scalar>(
    train: &Dataset<T>,
    space: &SearchSpace,
    seed: u64,
) -> Result<(HyperParams, CvReport), ModelError> {
    let sampled = space.sample(seed)?;
    let pairs: Vec<(String, String)> = train
        .session_ids
        .iter()
        .cloned()
        .zip(train.labels.iter().cloned())
        .collect();
    let folds = session_folds(&pairs, space.k_folds, seed)?;
    let fold_of: Vec<usize> = train.session_ids.iter().map(|s| folds[s]).collect();
    let splits: Vec<(Dataset<T>, Dataset<T>)> = (0..space.k_folds)
        .map(|f| {
            (
                train.filter_rows(|i| fold_of[i] != f),
                train.filter_rows(|i| fold_of[i] == f),
            )
        })
        .collect();
    let identity = PruneReport::identity(&FeatureSchema::full());

    let mut memo: HashMap<String, Vec<f64>> = HashMap::new();
    let mut candidates = Vec::with_capacity(sampled.len());
    for p in sampled {
        let key = format!("{p}");
        let fold_scores = match memo.get(&key) {
            Some(s) => s.clone(),
            None => {
                let mut scores = Vec::with_capacity(splits.len());
                for (tr, te) in &splits {
                    let m = train_ovr(tr, &p, Scaler::new(), identity.clone(), None)?;
                    scores.push(mean_binary_accuracy(&m, te)?);
                }
                log::info!("cv {key}: {scores:?}");
                memo.insert(key, scores.clone());
                scores
            }
        };
        let mean = fold_scores.iter().sum::<f64>() / fold_scores.len() as f64;
        candidates.push(Candidate { params: p, fold_scores, mean });
    }
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate().skip(1) {
        let b = &candidates[best];
        if c.mean > b.mean || (c.mean == b.mean && cheaper(&c.params, &b.params) == Ordering::Less) {
            best = i;
        }
    }
    let report = CvReport { candidates, best };
    Ok((report.best().params, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noisy(seed: u64) -> Dataset<f64> {
        use rand_distr::{Distribution, Normal};
        let mut rng = seed::rng(seed);
        let n = Normal::new(0.0, 1.0).unwrap();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        let mut sids = Vec::new();
        for d in 0..3 {
            for i in 0..60 {
                rows.push(vec![d as f64 * 2.5 + n.sample(&mut rng), n.sample(&mut rng)]);
                labels.push(format!("d{d}"));
                sids.push(format!("d{d}-s{:03}", i % 6));
            }
        }
        Dataset::from_rows(vec!["x".into(), "y".into()], &rows, labels, sids)
    }

    fn small_space() -> SearchSpace {
        SearchSpace {
            n_trees: vec![5, 10],
            max_depth: vec![None, Some(3)],
            min_samples_split: vec![2],
            min_samples_leaf: vec![1, 4],
            max_features: vec![MaxFeatures::Sqrt],
            n_iter: 4,
            k_folds: 3,
        }
    }

    #[test]
    fn folds_are_session_level_and_cover_all() {
        let ds = noisy(1);
        let pairs: Vec<_> = ds.session_ids.iter().cloned().zip(ds.labels.iter().cloned()).collect();
        let f = session_folds(&pairs, 3, 5).unwrap();
        assert_eq!(f.len(), 18);
        for k in 0..3 {
            assert_eq!(f.values().filter(|&&v| v == k).count(), 6);
        }
        assert!(matches!(session_folds(&pairs, 1, 0), Err(ModelError::InvalidFolds { .. })));
        assert!(matches!(session_folds(&pairs, 19, 0), Err(ModelError::InvalidFolds { .. })));
    }

    #[test]
    fn singleton_space_returns_its_point() {
        let p = HyperParams { n_trees: 5, max_depth: Some(4), ..Default::default() };
        let mut space = SearchSpace::singleton(&p);
        space.k_folds = 3;
        let (best, rep) = randomized_search_cv(&noisy(2), &space, 7).unwrap();
        assert_eq!(best, p.with_seed(7));
        assert_eq!(rep.best().fold_scores.len(), 3);
    }

    #[test]
    fn deterministic_and_selection_rule_holds() {
        let ds = noisy(3);
        let (a, ra) = randomized_search_cv(&ds, &small_space(), 11).unwrap();
        let (b, rb) = randomized_search_cv(&ds, &small_space(), 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
        for c in &ra.candidates {
            assert!(ra.best().mean >= c.mean);
        }
    }

    #[test]
    fn empty_space_is_an_error() {
        let mut s = small_space();
        s.max_features.clear();
        assert!(matches!(randomized_search_cv(&noisy(1), &s, 0), Err(ModelError::EmptySpace)));
    }

    #[test]
    fn ties_prefer_cheaper_models() {
        let a = HyperParams { n_trees: 50, ..Default::default() };
        let b = HyperParams { n_trees: 50, max_depth: Some(10), ..Default::default() };
        assert_eq!(cheaper(&b, &a), Ordering::Less);
        let c = HyperParams { n_trees: 10, ..Default::default() };
        assert_eq!(cheaper(&c, &b), Ordering::Less);
    }
}

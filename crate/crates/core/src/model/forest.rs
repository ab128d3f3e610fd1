use super::tree::{grow, DecisionTree, TrainSet};
use super::{HyperParams, ModelError};
use crate::codec::{DecodeError, Decoder, Encoder};
use crate::preprocess::Dataset;
use crate::scalar::Scalar;
use crate::seed;
use rand::Rng;
use rayon::prelude::*;
use std::collections::HashMap;

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest<T> {
    pub trees: Vec<DecisionTree<T>>,
    pub params: HyperParams,
    pub n_features: usize,
    pub n_classes: usize,
}

/// Identical `(label, row)` pairs collapse into one group so bootstrap counts
/// become sample weights. Growing on weights is equivalent to growing on the
/// repeated rows.
struct Groups {
    representative: Vec<u32>,
    of_row: Vec<u32>,
}

fn group_rows<T: Scalar>(data: &TrainSet<'_, T>) -> Groups {
    let mut index: HashMap<(u32, Vec<u64>), u32> = HashMap::new();
    let mut representative = Vec::new();
    let mut of_row = Vec::with_capacity(data.n_rows());
    for i in 0..data.n_rows() {
        let key = (data.y[i], data.row(i).iter().map(|v| v.bit_key()).collect());
        let g = *index.entry(key).or_insert_with(|| {
            representative.push(i as u32);
            (representative.len() - 1) as u32
        });
        of_row.push(g);
    }
    Groups { representative, of_row }
}

/// Bootstrap of size n drawn with replacement, as `(row, multiplicity)`.
fn bootstrap(groups: &Groups, seed: u64) -> Vec<(u32, u32)> {
    let n = groups.of_row.len();
    let mut rng = seed::rng(seed);
    let mut counts = vec![0u32; groups.representative.len()];
    for _ in 0..n {
        counts[groups.of_row[rng.random_range(0..n)] as usize] += 1;
    }
    counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(g, &c)| (groups.representative[g], c))
        .collect()
}

/// Trains `params.n_trees` trees, tree `t` seeded by `derive(params.seed, t)`.
pub fn train_forest<T: Scalar>(data: &TrainSet<'_, T>, params: &HyperParams) -> Result<RandomForest<T>, ModelError> {
    params.validate()?;
    let groups = group_rows(data);
    let trees = (0..params.n_trees as u64)
        .into_par_iter()
        .map(|t| {
            let s = seed::derive(params.seed, t);
            grow(data, bootstrap(&groups, seed::derive(s, 0)), params, s)
        })
        .collect();
    Ok(RandomForest {
        trees,
        params: *params,
        n_features: data.n_features,
        n_classes: data.n_classes,
    })
}

/// Trains on the rows of `ds` with explicit class indices.
pub fn train_forest_on<T: Scalar>(
    ds: &Dataset<T>,
    y: &[u32],
    n_classes: usize,
    params: &HyperParams,
) -> Result<RandomForest<T>, ModelError> {
    let ts = TrainSet::new(&ds.data, ds.n_cols(), y, n_classes)?;
    train_forest(&ts, params)
}

impl<T: Scalar> RandomForest<T> {
    /// Mean of the leaf distributions across trees.
    pub fn predict_proba(&self, row: &[T]) -> Result<Vec<T>, ModelError> {
        let mut acc = vec![T::zero(); self.n_classes];
        for t in &self.trees {
            for (a, p) in acc.iter_mut().zip(t.predict_proba(row)?) {
                *a = *a + *p;
            }
        }
        let n = T::from_count(self.trees.len());
        Ok(acc.into_iter().map(|a| a / n).collect())
    }

    /// Probability of class 1 in a binary forest.
    pub fn positive_proba(&self, row: &[T]) -> Result<T, ModelError> {
        let p = self.predict_proba(row)?;
        Ok(p.get(1).copied().unwrap_or_else(T::zero))
    }

    pub fn predict_class(&self, row: &[T]) -> Result<usize, ModelError> {
        let p = self.predict_proba(row)?;
        let mut best = 0;
        for (c, v) in p.iter().enumerate() {
            if *v > p[best] {
                best = c;
            }
        }
        Ok(best)
    }

    pub fn encode(&self, e: &mut Encoder) {
        self.params.encode(e);
        e.u64(self.n_features as u64);
        e.u64(self.n_classes as u64);
        e.len_prefix(self.trees.len());
        self.trees.iter().for_each(|t| t.encode(e));
    }

    pub fn decode(d: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let params = HyperParams::decode(d)?;
        let n_features = d.u64()? as usize;
        let n_classes = d.u64()? as usize;
        let n = d.len_prefix(9)?;
        let trees = (0..n)
            .map(|_| DecisionTree::decode(d, n_features, n_classes))
            .collect::<Result<Vec<_>, _>>()?;
        if trees.len() != params.n_trees {
            return Err(d.invalid("tree count differs from n_trees"));
        }
        Ok(Self {
            trees,
            params,
            n_features,
            n_classes,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tree::train_tree;
    use rand_distr::{Distribution, Normal};

    fn gaussians(n: usize, sep: f64, seed: u64) -> (Vec<f64>, Vec<u32>) {
        let mut rng = crate::seed::rng(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let c = (i % 2) as u32;
            let mu = if c == 1 { sep / 2.0 } else { -sep / 2.0 };
            x.push(mu + noise.sample(&mut rng));
            x.push(noise.sample(&mut rng));
            y.push(c);
        }
        (x, y)
    }

    fn accuracy(f: &RandomForest<f64>, x: &[f64], y: &[u32]) -> f64 {
        let hits = y
            .iter()
            .enumerate()
            .filter(|(i, &c)| f.predict_class(&x[i * 2..i * 2 + 2]).unwrap() == c as usize)
            .count();
        hits as f64 / y.len() as f64
    }

    #[test]
    fn deterministic_under_fixed_seed() {
        let (x, y) = gaussians(200, 1.0, 1);
        let ts = TrainSet::new(&x, 2, &y, 2).unwrap();
        let p = HyperParams { n_trees: 10, seed: 5, ..Default::default() };
        let a = train_forest(&ts, &p).unwrap();
        let b = train_forest(&ts, &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn separable_gaussians_generalize() {
        let (x, y) = gaussians(500, 5.0, 2);
        let (tx, ty) = gaussians(500, 5.0, 3);
        let ts = TrainSet::new(&x, 2, &y, 2).unwrap();
        let f = train_forest(&ts, &HyperParams { seed: 1, ..Default::default() }).unwrap();
        assert!(accuracy(&f, &tx, &ty) >= 0.99);
        assert!(f.positive_proba(&[6.0, 0.0]).unwrap() >= 0.9);
        let p = f.predict_proba(&[0.1, 0.3]).unwrap();
        assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_tree_forest_matches_its_tree() {
        let (x, y) = gaussians(100, 1.0, 4);
        let ts = TrainSet::new(&x, 2, &y, 2).unwrap();
        let f = train_forest(&ts, &HyperParams { n_trees: 1, seed: 3, ..Default::default() }).unwrap();
        for r in 0..100 {
            let row = ts.row(r);
            assert_eq!(f.predict_proba(row).unwrap(), f.trees[0].predict_proba(row).unwrap());
        }
        // The forest's tree differs from a plain tree only by its bootstrap.
        let plain = train_tree(&ts, &HyperParams::default(), 3).unwrap();
        assert_eq!(plain.n_features, f.trees[0].n_features);
    }

    #[test]
    fn pure_forest_gives_exact_probabilities() {
        let x = vec![1.0, 2.0, 3.0];
        let y = vec![1u32; 3];
        let f = train_forest(&TrainSet::new(&x, 1, &y, 2).unwrap(), &HyperParams { n_trees: 5, ..Default::default() }).unwrap();
        assert_eq!(f.positive_proba(&[0.0]).unwrap(), 1.0);
    }

    #[test]
    fn bootstrap_unique_fraction_near_one_minus_inv_e() {
        let x: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let y = vec![0u32; 1000];
        let groups = group_rows(&TrainSet::new(&x, 1, &y, 1).unwrap());
        for s in 0..5 {
            let b = bootstrap(&groups, s);
            assert_eq!(b.iter().map(|&(_, c)| c as usize).sum::<usize>(), 1000);
            let frac = b.len() as f64 / 1000.0;
            assert!((frac - (1.0 - (-1.0f64).exp())).abs() < 0.05, "{frac}");
        }
    }

    #[test]
    fn duplicate_rows_share_a_group() {
        let x = vec![1.0, 1.0, 2.0, 1.0];
        let y = vec![0u32, 0, 0, 1];
        let g = group_rows(&TrainSet::new(&x, 1, &y, 2).unwrap());
        assert_eq!(g.of_row, vec![0, 0, 1, 2]);
    }

    #[test]
    fn unlimited_depth_fits_distinct_training_rows() {
        let (x, y) = gaussians(300, 0.5, 6);
        let ts = TrainSet::new(&x, 2, &y, 2).unwrap();
        let f = train_forest(&ts, &HyperParams { seed: 2, ..Default::default() }).unwrap();
        assert_eq!(accuracy(&f, &x, &y), 1.0);
    }

    #[test]
    fn codec_round_trip() {
        let (x, y) = gaussians(100, 2.0, 7);
        let ts = TrainSet::new(&x, 2, &y, 2).unwrap();
        let f = train_forest(&ts, &HyperParams { n_trees: 7, max_depth: Some(4), ..Default::default() }).unwrap();
        let mut e = Encoder::new();
        f.encode(&mut e);
        let bytes = e.finish();
        let g = RandomForest::<f64>::decode(&mut Decoder::new(&bytes)).unwrap();
        assert_eq!(f, g);
    }
}

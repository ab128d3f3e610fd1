use super::{HyperParams, ModelError};
use crate::codec::{DecodeError, Decoder, Encoder};
use crate::scalar::Scalar;
use crate::seed;
use rand::Rng;
use std::cmp::Ordering;

/// Borrowed training rows: row-major features plus class indices.
#[derive(Debug, Clone, Copy)]
pub struct TrainSet<'a, T> {
    pub x: &'a [T],
    pub n_features: usize,
    pub y: &'a [u32],
    pub n_classes: usize,
}

impl<'a, T: Scalar> TrainSet<'a, T> {
    pub fn new(x: &'a [T], n_features: usize, y: &'a [u32], n_classes: usize) -> Result<Self, ModelError> {
        if y.is_empty() {
            return Err(ModelError::EmptyData);
        }
        if n_features == 0 || x.len() != y.len() * n_features {
            return Err(ModelError::SchemaMismatch {
                expected: y.len() * n_features,
                got: x.len(),
            });
        }
        if let Some(&c) = y.iter().find(|&&c| c as usize >= n_classes) {
            return Err(ModelError::InvalidParams(format!("label {c} outside {n_classes} classes")));
        }
        Ok(Self {
            x,
            n_features,
            y,
            n_classes,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &'a [T] {
        &self.x[i * self.n_features..(i + 1) * self.n_features]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node<T> {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: u32,
        threshold: T,
        left: u32,
        right: u32,
    },
    Leaf { probs: Vec<T> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree<T> {
    pub nodes: Vec<Node<T>>,
    pub n_features: usize,
    pub n_classes: usize,
    pub seed: u64,
}

/// Gini impurity `1 - Σ p_c²` of a class-count vector.
pub fn gini(counts: &[f64]) -> f64 {
    let w: f64 = counts.iter().sum();
    if w <= 0.0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|c| (c / w).powi(2)).sum::<f64>()
}

/// Trains one tree on every row of `data` with unit weights.
pub fn train_tree<T: Scalar>(data: &TrainSet<'_, T>, params: &HyperParams, seed: u64) -> Result<DecisionTree<T>, ModelError> {
    params.validate()?;
    let samples: Vec<(u32, u32)> = (0..data.n_rows() as u32).map(|i| (i, 1)).collect();
    Ok(grow(data, samples, params, seed))
}

struct Work {
    node: usize,
    depth: usize,
    samples: Vec<(u32, u32)>,
}

struct SplitChoice<T> {
    feature: usize,
    threshold: T,
}

/// Grows a CART tree over weighted `(row, count)` samples.
pub(crate) fn grow<T: Scalar>(
    data: &TrainSet<'_, T>,
    samples: Vec<(u32, u32)>,
    params: &HyperParams,
    seed: u64,
) -> DecisionTree<T> {
    let mut rng = seed::rng(seed);
    let k = params.max_features.resolve(data.n_features);
    let mut features: Vec<usize> = (0..data.n_features).collect();
    let mut scratch: Vec<(T, u32, u32)> = Vec::with_capacity(samples.len());
    let mut nodes: Vec<Node<T>> = vec![Node::Leaf { probs: Vec::new() }];
    let mut stack = vec![Work {
        node: 0,
        depth: 0,
        samples,
    }];
    let min_leaf = params.min_samples_leaf as f64;

    while let Some(Work { node, depth, samples }) = stack.pop() {
        let mut counts = vec![0f64; data.n_classes];
        for &(i, w) in &samples {
            counts[data.y[i as usize] as usize] += f64::from(w);
        }
        let total: f64 = counts.iter().sum();
        let pure = counts.iter().filter(|&&c| c > 0.0).count() <= 1;
        let stop = pure
            || params.max_depth.is_some_and(|d| depth >= d)
            || total < params.min_samples_split as f64
            || total < 2.0 * min_leaf;
        let choice = if stop {
            None
        } else {
            best_split(data, &samples, &counts, total, &mut features, k, min_leaf, &mut rng, &mut scratch)
        };
        let Some(SplitChoice { feature, threshold }) = choice else {
            nodes[node] = Node::Leaf {
                probs: counts.iter().map(|c| T::from_f64_lossy(c / total)).collect(),
            };
            continue;
        };
        let (left, right): (Vec<_>, Vec<_>) = samples
            .into_iter()
            .partition(|&(i, _)| data.x[i as usize * data.n_features + feature] <= threshold);
        let l = nodes.len();
        nodes.push(Node::Leaf { probs: Vec::new() });
        nodes.push(Node::Leaf { probs: Vec::new() });
        nodes[node] = Node::Split {
            feature: feature as u32,
            threshold,
            left: l as u32,
            right: (l + 1) as u32,
        };
        stack.push(Work {
            node: l + 1,
            depth: depth + 1,
            samples: right,
        });
        stack.push(Work {
            node: l,
            depth: depth + 1,
            samples: left,
        });
    }
    DecisionTree {
        nodes,
        n_features: data.n_features,
        n_classes: data.n_classes,
        seed,
    }
}

/// Examines features in a random order; after `k` features it keeps going
/// only until some valid split has been found.
#[allow(clippy::too_many_arguments)]
fn best_split<T: Scalar>(
    data: &TrainSet<'_, T>,
    samples: &[(u32, u32)],
    counts: &[f64],
    total: f64,
    features: &mut [usize],
    k: usize,
    min_leaf: f64,
    rng: &mut seed::Rng,
    scratch: &mut Vec<(T, u32, u32)>,
) -> Option<SplitChoice<T>> {
    let nf = features.len();
    let mut best: Option<(f64, SplitChoice<T>)> = None;
    let mut left = vec![0f64; counts.len()];
    for visited in 0..nf {
        if visited >= k && best.is_some() {
            break;
        }
        let j = rng.random_range(visited..nf);
        features.swap(visited, j);
        let f = features[visited];

        scratch.clear();
        scratch.extend(
            samples
                .iter()
                .map(|&(i, w)| (data.x[i as usize * data.n_features + f], data.y[i as usize], w)),
        );
        scratch.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
        if scratch[0].0 == scratch[scratch.len() - 1].0 {
            continue;
        }
        left.iter_mut().for_each(|c| *c = 0.0);
        let mut wl = 0.0;
        for p in 0..scratch.len() - 1 {
            let (v, y, w) = scratch[p];
            left[y as usize] += f64::from(w);
            wl += f64::from(w);
            let next = scratch[p + 1].0;
            if v >= next {
                continue;
            }
            let wr = total - wl;
            if wl < min_leaf || wr < min_leaf {
                continue;
            }
            // Maximizing Σ c_l²/w_l + Σ c_r²/w_r minimizes weighted Gini.
            let score: f64 = left
                .iter()
                .zip(counts)
                .map(|(&cl, &c)| cl * cl / wl + (c - cl) * (c - cl) / wr)
                .sum();
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                let two = T::one() + T::one();
                let mut threshold = (v + next) / two;
                if threshold >= next {
                    threshold = v;
                }
                best = Some((score, SplitChoice { feature: f, threshold }));
            }
        }
    }
    best.map(|(_, c)| c)
}

impl<T: Scalar> DecisionTree<T> {
    pub fn leaf_index(&self, row: &[T]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[*feature as usize] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    /// Class distribution of the leaf reached by `row`.
    pub fn predict_proba(&self, row: &[T]) -> Result<&[T], ModelError> {
        if row.len() != self.n_features {
            return Err(ModelError::SchemaMismatch {
                expected: self.n_features,
                got: row.len(),
            });
        }
        match &self.nodes[self.leaf_index(row)] {
            Node::Leaf { probs } => Ok(probs),
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn depth(&self) -> usize {
        fn walk<T>(nodes: &[Node<T>], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize))
                }
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn encode(&self, e: &mut Encoder) {
        e.u64(self.seed);
        e.len_prefix(self.nodes.len());
        for n in &self.nodes {
            match n {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    e.u8(0);
                    e.u32(*feature);
                    e.scalar(*threshold);
                    e.u32(*left);
                    e.u32(*right);
                }
                Node::Leaf { probs } => {
                    e.u8(1);
                    probs.iter().for_each(|p| e.scalar(*p));
                }
            }
        }
    }

    pub fn decode(d: &mut Decoder<'_>, n_features: usize, n_classes: usize) -> Result<Self, DecodeError> {
        let seed = d.u64()?;
        let n = d.len_prefix(1)?;
        let mut nodes = Vec::with_capacity(n);
        for _ in 0..n {
            nodes.push(match d.u8()? {
                0 => {
                    let feature = d.u32()?;
                    let threshold = d.scalar()?;
                    let (left, right) = (d.u32()?, d.u32()?);
                    if feature as usize >= n_features || left as usize >= n || right as usize >= n {
                        return Err(d.invalid("split node index out of range"));
                    }
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    }
                }
                1 => Node::Leaf {
                    probs: (0..n_classes).map(|_| d.scalar()).collect::<Result<_, _>>()?,
                },
                _ => return Err(d.invalid("node tag")),
            });
        }
        Ok(Self {
            nodes,
            n_features,
            n_classes,
            seed,
        })
    }
}

use super::{Dataset, PreprocessError};
use crate::features::FeatureMatrix;
use crate::scalar::Scalar;
use crate::seed;
use rand::Rng;
use std::collections::BTreeMap;
use std::fmt::Debug;

/// Row indices realizing random oversampling: every original index once, in
/// order, followed by duplicates drawn with replacement from each smaller
/// class until all classes match the largest one.
pub fn balance_indices<K: Ord + Clone + Debug>(
    labels: &[K],
    classes: &[K],
    seed: u64,
) -> Result<Vec<usize>, PreprocessError> {
    let mut members: BTreeMap<&K, Vec<usize>> = classes.iter().map(|c| (c, Vec::new())).collect();
    for (i, l) in labels.iter().enumerate() {
        if let Some(v) = members.get_mut(l) {
            v.push(i);
        }
    }
    if let Some((c, _)) = members.iter().find(|(_, v)| v.is_empty()) {
        return Err(PreprocessError::EmptyClass(format!("{c:?}")));
    }
    let target = members.values().map(Vec::len).max().unwrap_or(0);
    let mut out: Vec<usize> = (0..labels.len()).collect();
    let mut rng = seed::rng(seed);
    for rows in members.values() {
        for _ in rows.len()..target {
            out.push(rows[rng.random_range(0..rows.len())]);
        }
    }
    Ok(out)
}

fn distinct<K: Ord + Clone>(labels: &[K]) -> Vec<K> {
    let mut c: Vec<K> = labels.to_vec();
    c.sort();
    c.dedup();
    c
}

pub fn oversample_balance<T: Scalar>(
    matrix: &FeatureMatrix<T>,
    seed: u64,
) -> Result<FeatureMatrix<T>, PreprocessError> {
    let idx = balance_indices(&matrix.labels, &distinct(&matrix.labels), seed)?;
    Ok(matrix.take_rows(&idx))
}

pub fn oversample_dataset<T: Scalar>(ds: &Dataset<T>, seed: u64) -> Result<Dataset<T>, PreprocessError> {
    let idx = balance_indices(&ds.labels, &distinct(&ds.labels), seed)?;
    Ok(ds.take_rows(&idx))
}

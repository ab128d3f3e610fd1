use super::PreprocessError;
use crate::features::{FeatureKind, FeatureMatrix};
use crate::scalar::Scalar;
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NullReport {
    pub input_rows: usize,
    pub dropped_rows: usize,
    /// Missing-cell count per numeric column, over the input rows.
    pub missing_per_column: BTreeMap<String, usize>,
}

/// Removes every row with a missing numeric cell.
pub fn drop_nulls<T: Scalar>(
    matrix: &FeatureMatrix<T>,
) -> Result<(FeatureMatrix<T>, NullReport), PreprocessError> {
    let numeric: Vec<usize> = (0..matrix.schema.len())
        .filter(|&i| matrix.schema.columns[i].kind == FeatureKind::Numeric)
        .collect();
    let mut report = NullReport {
        input_rows: matrix.n_rows(),
        ..Default::default()
    };
    for &c in &numeric {
        let n = matrix.column(c).filter(|v| v.is_missing()).count();
        if n > 0 {
            report
                .missing_per_column
                .insert(matrix.schema.columns[c].name.clone(), n);
        }
    }
    let out = matrix.filter_rows(|r| numeric.iter().all(|&c| !matrix.rows[r].values[c].is_missing()));
    report.dropped_rows = matrix.n_rows() - out.n_rows();
    if out.is_empty() && !matrix.is_empty() {
        return Err(PreprocessError::AllRowsDropped(matrix.n_rows()));
    }
    Ok((out, report))
}

use super::{FeatureError, FeatureSchema, FeatureValue, FeatureVector};
use crate::scalar::Scalar;
use std::collections::BTreeSet;

/// Feature rows with their device labels and session ids, aligned to one
/// schema.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    pub schema: FeatureSchema,
    pub rows: Vec<FeatureVector<T>>,
    pub labels: Vec<String>,
    pub session_ids: Vec<String>,
}

impl<T: Scalar> FeatureMatrix<T> {
    pub fn new(schema: FeatureSchema) -> Self {
        Self {
            schema,
            rows: Vec::new(),
            labels: Vec::new(),
            session_ids: Vec::new(),
        }
    }

    pub fn push(&mut self, row: FeatureVector<T>, label: impl Into<String>) -> Result<(), FeatureError> {
        if row.values.len() != self.schema.len() {
            return Err(FeatureError::SchemaMismatch {
                expected: self.schema.len(),
                got: row.values.len(),
            });
        }
        self.session_ids.push(row.provenance.session_id.clone());
        self.labels.push(label.into());
        self.rows.push(row);
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, idx: usize) -> impl Iterator<Item = FeatureValue<T>> + '_ {
        self.rows.iter().map(move |r| r.values[idx])
    }

    /// Numeric view of a column with `None` for missing cells.
    pub fn column_values(&self, idx: usize) -> Vec<Option<T>> {
        self.column(idx).map(|v| v.as_scalar()).collect()
    }

    pub fn column_by_name(&self, name: &str) -> Result<Vec<Option<T>>, FeatureError> {
        let idx = self
            .schema
            .index_of(name)
            .ok_or_else(|| FeatureError::UnknownColumn(name.to_string()))?;
        Ok(self.column_values(idx))
    }

    /// Projects onto the named columns in the given order.
    pub fn select(&self, names: &[&str]) -> Result<Self, FeatureError> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.schema
                    .index_of(n)
                    .ok_or_else(|| FeatureError::UnknownColumn((*n).to_string()))
            })
            .collect::<Result<_, _>>()?;
        let schema = FeatureSchema {
            version: self.schema.version.clone(),
            columns: idx.iter().map(|&i| self.schema.columns[i].clone()).collect(),
        };
        let rows = self
            .rows
            .iter()
            .map(|r| FeatureVector {
                values: idx.iter().map(|&i| r.values[i]).collect(),
                provenance: r.provenance.clone(),
            })
            .collect();
        Ok(Self {
            schema,
            rows,
            labels: self.labels.clone(),
            session_ids: self.session_ids.clone(),
        })
    }

    /// Drops the named columns, keeping the remaining order.
    pub fn without(&self, drop: &[&str]) -> Self {
        let keep: Vec<&str> = self.schema.names().filter(|n| !drop.contains(n)).collect();
        self.select(&keep).expect("names come from the schema")
    }

    pub fn filter_rows(&self, keep: impl Fn(usize) -> bool) -> Self {
        let mut out = Self::new(self.schema.clone());
        for i in (0..self.n_rows()).filter(|&i| keep(i)) {
            out.rows.push(self.rows[i].clone());
            out.labels.push(self.labels[i].clone());
            out.session_ids.push(self.session_ids[i].clone());
        }
        out
    }

    /// Rows whose session id is in `sessions`.
    pub fn rows_of_sessions(&self, sessions: &BTreeSet<String>) -> Self {
        self.filter_rows(|i| sessions.contains(&self.session_ids[i]))
    }

    pub fn take_rows(&self, indices: &[usize]) -> Self {
        let mut out = Self::new(self.schema.clone());
        for &i in indices {
            out.rows.push(self.rows[i].clone());
            out.labels.push(self.labels[i].clone());
            out.session_ids.push(self.session_ids[i].clone());
        }
        out
    }

    pub fn append(&mut self, other: FeatureMatrix<T>) -> Result<(), FeatureError> {
        if other.schema != self.schema {
            return Err(FeatureError::SchemaMismatch {
                expected: self.schema.len(),
                got: other.schema.len(),
            });
        }
        self.rows.extend(other.rows);
        self.labels.extend(other.labels);
        self.session_ids.extend(other.session_ids);
        Ok(())
    }

    pub fn sessions(&self) -> BTreeSet<&str> {
        self.session_ids.iter().map(String::as_str).collect()
    }

    pub fn device_labels(&self) -> BTreeSet<&str> {
        self.labels.iter().map(String::as_str).collect()
    }

    /// `(session_id, label)` pairs, one per distinct session.
    pub fn session_labels(&self) -> Vec<(String, String)> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for (s, l) in self.session_ids.iter().zip(&self.labels) {
            if seen.insert(s.as_str()) {
                out.push((s.clone(), l.clone()));
            }
        }
        out
    }
}

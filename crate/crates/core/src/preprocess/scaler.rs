use super::PreprocessError;
use crate::codec::{DecodeError, Decoder, Encoder};
use crate::features::{FeatureKind, FeatureMatrix, FeatureSchema, FeatureValue};
use crate::pruning::{decode_schema, encode_schema};
use crate::scalar::Scalar;

/// Dense, fully numeric rows ready for the learner (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub columns: Vec<String>,
    pub data: Vec<T>,
    pub labels: Vec<String>,
    pub session_ids: Vec<String>,
}

impl<T: Scalar> Dataset<T> {
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[T] {
        let w = self.n_cols();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        (0..self.n_rows()).map(|i| self.row(i))
    }

    pub fn from_rows(
        columns: Vec<String>,
        rows: &[Vec<T>],
        labels: Vec<String>,
        session_ids: Vec<String>,
    ) -> Self {
        assert_eq!(rows.len(), labels.len());
        assert_eq!(rows.len(), session_ids.len());
        let mut data = Vec::with_capacity(rows.len() * columns.len());
        for r in rows {
            assert_eq!(r.len(), columns.len());
            data.extend_from_slice(r);
        }
        Self {
            columns,
            data,
            labels,
            session_ids,
        }
    }

    pub fn take_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.n_cols());
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            columns: self.columns.clone(),
            data,
            labels: idx.iter().map(|&i| self.labels[i].clone()).collect(),
            session_ids: idx.iter().map(|&i| self.session_ids[i].clone()).collect(),
        }
    }

    pub fn filter_rows(&self, keep: impl Fn(usize) -> bool) -> Self {
        let idx: Vec<usize> = (0..self.n_rows()).filter(|&i| keep(i)).collect();
        self.take_rows(&idx)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnTransform<T> {
    /// `(x - mean) / std`, or 0 when `std == 0`; missing cells take `fill`.
    ZScore { mean: T, std: T, fill: T },
    /// One indicator per training category; unseen codes map to all zeros.
    OneHot { categories: Vec<u16> },
    PassThrough,
}

#[derive(Debug, Clone, PartialEq)]
struct Fitted<T> {
    schema: FeatureSchema,
    transforms: Vec<ColumnTransform<T>>,
}

/// Per-column standardization fitted on training rows only.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler<T> {
    fitted: Option<Fitted<T>>,
}

impl<T> Default for Scaler<T> {
    fn default() -> Self {
        Self { fitted: None }
    }
}

impl<T: Scalar> Scaler<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_fitted(&self) -> bool {
        self.fitted.is_some()
    }

    pub fn fit(&mut self, train: &FeatureMatrix<T>) {
        let transforms = train
            .schema
            .columns
            .iter()
            .enumerate()
            .map(|(c, col)| match col.kind {
                FeatureKind::Numeric => {
                    let xs: Vec<f64> = train.column(c).filter_map(|v| v.as_scalar()).map(Scalar::as_f64).collect();
                    let n = xs.len().max(1) as f64;
                    let mean = xs.iter().sum::<f64>() / n;
                    let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
                    let mean = T::from_f64_lossy(mean);
                    ColumnTransform::ZScore {
                        mean,
                        std: T::from_f64_lossy(std),
                        fill: mean,
                    }
                }
                FeatureKind::Categorical => {
                    let mut categories: Vec<u16> = train
                        .column(c)
                        .filter_map(|v| match v {
                            FeatureValue::Cat(k) => Some(k),
                            _ => None,
                        })
                        .collect();
                    categories.sort_unstable();
                    categories.dedup();
                    ColumnTransform::OneHot { categories }
                }
                FeatureKind::Binary => ColumnTransform::PassThrough,
            })
            .collect();
        self.fitted = Some(Fitted {
            schema: train.schema.clone(),
            transforms,
        });
    }

    /// Names of the output columns.
    pub fn output_columns(&self) -> Result<Vec<String>, PreprocessError> {
        let f = self.fitted.as_ref().ok_or(PreprocessError::NotFitted)?;
        let mut out = Vec::new();
        for (col, t) in f.schema.columns.iter().zip(&f.transforms) {
            match t {
                ColumnTransform::OneHot { categories } => {
                    out.extend(categories.iter().map(|k| format!("{}={k}", col.name)))
                }
                _ => out.push(col.name.clone()),
            }
        }
        Ok(out)
    }

    pub fn schema(&self) -> Option<&FeatureSchema> {
        self.fitted.as_ref().map(|f| &f.schema)
    }

    pub fn transforms(&self) -> Option<&[ColumnTransform<T>]> {
        self.fitted.as_ref().map(|f| f.transforms.as_slice())
    }

    /// Transforms one row of raw feature values.
    pub fn transform_values(&self, values: &[FeatureValue<T>], out: &mut Vec<T>) -> Result<(), PreprocessError> {
        let f = self.fitted.as_ref().ok_or(PreprocessError::NotFitted)?;
        if values.len() != f.transforms.len() {
            return Err(PreprocessError::SchemaMismatch(format!(
                "row has {} values, scaler expects {}",
                values.len(),
                f.transforms.len()
            )));
        }
        for (v, t) in values.iter().zip(&f.transforms) {
            match t {
                ColumnTransform::ZScore { mean, std, fill } => {
                    let x = v.as_scalar().unwrap_or(*fill);
                    out.push(if *std == T::zero() { T::zero() } else { (x - *mean) / *std });
                }
                ColumnTransform::OneHot { categories } => {
                    let code = match v {
                        FeatureValue::Cat(k) => Some(*k),
                        _ => None,
                    };
                    out.extend(
                        categories
                            .iter()
                            .map(|k| if Some(*k) == code { T::one() } else { T::zero() }),
                    );
                }
                ColumnTransform::PassThrough => out.push(v.as_scalar().unwrap_or_else(T::zero)),
            }
        }
        Ok(())
    }

    pub fn transform(&self, m: &FeatureMatrix<T>) -> Result<Dataset<T>, PreprocessError> {
        let f = self.fitted.as_ref().ok_or(PreprocessError::NotFitted)?;
        if f.schema.columns != m.schema.columns {
            return Err(PreprocessError::SchemaMismatch(
                "matrix columns differ from the fitted schema".into(),
            ));
        }
        let columns = self.output_columns()?;
        let mut data = Vec::with_capacity(m.n_rows() * columns.len());
        for r in &m.rows {
            self.transform_values(&r.values, &mut data)?;
        }
        Ok(Dataset {
            columns,
            data,
            labels: m.labels.clone(),
            session_ids: m.session_ids.clone(),
        })
    }

    pub fn encode(&self, e: &mut Encoder) {
        let Some(f) = &self.fitted else {
            e.u8(0);
            return;
        };
        e.u8(1);
        encode_schema(&f.schema, e);
        for t in &f.transforms {
            match t {
                ColumnTransform::ZScore { mean, std, fill } => {
                    e.u8(0);
                    e.scalar(*mean);
                    e.scalar(*std);
                    e.scalar(*fill);
                }
                ColumnTransform::OneHot { categories } => {
                    e.u8(1);
                    e.len_prefix(categories.len());
                    categories.iter().for_each(|k| e.u16(*k));
                }
                ColumnTransform::PassThrough => e.u8(2),
            }
        }
    }

    pub fn decode(d: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        if d.u8()? == 0 {
            return Ok(Self::default());
        }
        let schema = decode_schema(d)?;
        let mut transforms = Vec::with_capacity(schema.len());
        for _ in 0..schema.len() {
            transforms.push(match d.u8()? {
                0 => ColumnTransform::ZScore {
                    mean: d.scalar()?,
                    std: d.scalar()?,
                    fill: d.scalar()?,
                },
                1 => {
                    let n = d.len_prefix(2)?;
                    ColumnTransform::OneHot {
                        categories: (0..n).map(|_| d.u16()).collect::<Result<_, _>>()?,
                    }
                }
                2 => ColumnTransform::PassThrough,
                _ => return Err(d.invalid("column transform tag")),
            });
        }
        Ok(Self {
            fitted: Some(Fitted { schema, transforms }),
        })
    }
}

pub fn fit_scaler<T: Scalar>(train: &FeatureMatrix<T>) -> Scaler<T> {
    let mut s = Scaler::new();
    s.fit(train);
    s
}

pub fn apply_scaler<T: Scalar>(scaler: &Scaler<T>, m: &FeatureMatrix<T>) -> Result<Dataset<T>, PreprocessError> {
    scaler.transform(m)
}

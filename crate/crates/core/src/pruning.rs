//! Filter-style feature validation: linear-combination, correlation,
//! low-variance and derived-overlap removal, applied in that order.
//!
//! Validation is fit on training rows; the resulting [`PruneReport`] is then
//! replayed on any other matrix with [`PruneReport::apply`].

use crate::codec::{DecodeError, Decoder, Encoder};
use crate::features::{canonical_rank, FeatureError, FeatureKind, FeatureMatrix, FeatureSchema};
use crate::scalar::Scalar;
use std::fmt::{self, Write as _};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PruneError {
    #[error("{stage} stage needs at least {need} rows, got {got}")]
    TooFewRows {
        stage: &'static str,
        need: usize,
        got: usize,
    },
    #[error("{column} != sum of parents at row {row}")]
    SumMismatch { column: String, row: usize },
    #[error("sum rule for {target} references absent column {parent}")]
    MissingParent { target: String, parent: String },
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Reason {
    /// Linear combination of other features.
    LinearCombination,
    /// Pairwise correlation at or above the threshold.
    Correlated,
    /// Variance at or below epsilon.
    LowVariance,
    /// Overlapping derived feature.
    Derived,
}

impl Reason {
    pub fn letter(self) -> char {
        match self {
            Reason::LinearCombination => 'L',
            Reason::Correlated => 'C',
            Reason::LowVariance => 'V',
            Reason::Derived => 'D',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        match c {
            'L' => Some(Reason::LinearCombination),
            'C' => Some(Reason::Correlated),
            'V' => Some(Reason::LowVariance),
            'D' => Some(Reason::Derived),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Evidence {
    SumOf(Vec<String>),
    Correlation { partner: String, r: f64 },
    Variance(f64),
    DerivedFrom(String),
}

impl fmt::Display for Evidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Evidence::SumOf(p) => write!(f, "sum of {}", p.join(" + ")),
            Evidence::Correlation { partner, r } => write!(f, "r={r:.6} with {partner}"),
            Evidence::Variance(v) => write!(f, "variance={v:.3e}"),
            Evidence::DerivedFrom(s) => write!(f, "derivable from {s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Removal {
    pub feature: String,
    pub reason: Reason,
    pub evidence: Evidence,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SumRule {
    pub target: String,
    pub parents: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivedRule {
    pub target: String,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneConfig {
    pub corr_threshold: f64,
    pub variance_epsilon: f64,
    pub sum_rules: Vec<SumRule>,
    pub derived_rules: Vec<DerivedRule>,
}

impl Default for PruneConfig {
    fn default() -> Self {
        let sum = |t: &str, a: &str, b: &str| SumRule {
            target: t.into(),
            parents: vec![a.into(), b.into()],
        };
        Self {
            corr_threshold: 0.9,
            variance_epsilon: 1e-8,
            sum_rules: vec![
                sum("pkts_tot", "pkts_fwd", "pkts_bwd"),
                sum("bytes_tot", "bytes_fwd", "bytes_bwd"),
            ],
            derived_rules: vec![DerivedRule {
                target: "down_up_byte_ratio".into(),
                source: "down_up_pkt_ratio".into(),
            }],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneReport {
    pub removed: Vec<Removal>,
    pub kept: FeatureSchema,
}

fn need_rows<T: Scalar>(m: &FeatureMatrix<T>, stage: &'static str, need: usize) -> Result<(), PruneError> {
    if m.n_rows() < need {
        return Err(PruneError::TooFewRows {
            stage,
            need,
            got: m.n_rows(),
        });
    }
    Ok(())
}

/// Removes declared sum columns after checking `target == Σ parents` exactly
/// on every row.
pub fn prune_linear_combinations<T: Scalar>(
    matrix: &FeatureMatrix<T>,
    rules: &[SumRule],
) -> Result<Vec<Removal>, PruneError> {
    need_rows(matrix, "linear-combination", 2)?;
    let mut out = Vec::new();
    for rule in rules {
        let Some(ti) = matrix.schema.index_of(&rule.target) else {
            continue;
        };
        let parents: Vec<usize> = rule
            .parents
            .iter()
            .map(|p| {
                matrix.schema.index_of(p).ok_or_else(|| PruneError::MissingParent {
                    target: rule.target.clone(),
                    parent: p.clone(),
                })
            })
            .collect::<Result<_, _>>()?;
        for (row, r) in matrix.rows.iter().enumerate() {
            let target = r.values[ti].as_scalar();
            let sum = parents
                .iter()
                .map(|&pi| r.values[pi].as_scalar())
                .try_fold(T::zero(), |acc, v| v.map(|v| acc + v));
            if target.is_none() || sum.is_none() || target != sum {
                return Err(PruneError::SumMismatch {
                    column: rule.target.clone(),
                    row,
                });
            }
        }
        out.push(Removal {
            feature: rule.target.clone(),
            reason: Reason::LinearCombination,
            evidence: Evidence::SumOf(rule.parents.clone()),
        });
    }
    Ok(out)
}

/// Pearson correlation over rows where both cells are present. `None` when
/// fewer than two such rows exist or either side is constant.
pub fn pearson<T: Scalar>(x: &[Option<T>], y: &[Option<T>]) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter_map(|(a, b)| Some((a.as_ref()?.as_f64(), b.as_ref()?.as_f64())))
        .collect();
    if pairs.len() < 2 {
        return None;
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in &pairs {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Population variance of the present cells; `None` if the column is empty.
pub fn variance<T: Scalar>(x: &[Option<T>]) -> Option<f64> {
    let xs: Vec<f64> = x.iter().flatten().map(|v| v.as_f64()).collect();
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    Some(xs.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n)
}

/// Numeric column indices in canonical catalogue order; unknown names keep
/// their relative order after the catalogue columns.
fn scan_order(schema: &FeatureSchema) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..schema.len())
        .filter(|&i| schema.columns[i].kind == FeatureKind::Numeric)
        .collect();
    idx.sort_by_key(|&i| (canonical_rank(&schema.columns[i].name).unwrap_or(usize::MAX), i));
    idx
}

/// Greedy keep-first correlation filter: a column is dropped when
/// `|r| >= threshold` against any earlier kept column.
pub fn prune_correlated<T: Scalar>(
    matrix: &FeatureMatrix<T>,
    threshold: f64,
) -> Result<Vec<Removal>, PruneError> {
    need_rows(matrix, "correlation", 3)?;
    let order = scan_order(&matrix.schema);
    let cols: Vec<Vec<Option<T>>> = (0..matrix.schema.len()).map(|i| matrix.column_values(i)).collect();
    let mut kept: Vec<usize> = Vec::new();
    let mut out = Vec::new();
    for &c in &order {
        let hit = kept.iter().find_map(|&k| {
            pearson(&cols[k], &cols[c])
                .filter(|r| r.abs() >= threshold)
                .map(|r| (k, r))
        });
        match hit {
            Some((k, r)) => out.push(Removal {
                feature: matrix.schema.columns[c].name.clone(),
                reason: Reason::Correlated,
                evidence: Evidence::Correlation {
                    partner: matrix.schema.columns[k].name.clone(),
                    r,
                },
            }),
            None => kept.push(c),
        }
    }
    Ok(out)
}

/// Drops numeric columns whose raw variance is at most `epsilon`. A column
/// with no present values counts as zero variance.
pub fn prune_low_variance<T: Scalar>(
    matrix: &FeatureMatrix<T>,
    epsilon: f64,
) -> Result<Vec<Removal>, PruneError> {
    need_rows(matrix, "low-variance", 2)?;
    let mut out = Vec::new();
    for c in scan_order(&matrix.schema) {
        let v = variance(&matrix.column_values(c)).unwrap_or(0.0);
        if v <= epsilon {
            out.push(Removal {
                feature: matrix.schema.columns[c].name.clone(),
                reason: Reason::LowVariance,
                evidence: Evidence::Variance(v),
            });
        }
    }
    Ok(out)
}

/// Removes rule targets whose source column is still present.
pub fn prune_derived(schema: &FeatureSchema, rules: &[DerivedRule]) -> Vec<Removal> {
    rules
        .iter()
        .filter(|r| schema.contains(&r.target) && schema.contains(&r.source))
        .map(|r| Removal {
            feature: r.target.clone(),
            reason: Reason::Derived,
            evidence: Evidence::DerivedFrom(r.source.clone()),
        })
        .collect()
}

fn drop_removed<T: Scalar>(m: &FeatureMatrix<T>, removed: &[Removal]) -> FeatureMatrix<T> {
    let names: Vec<&str> = removed.iter().map(|r| r.feature.as_str()).collect();
    m.without(&names)
}

/// Runs the four stages in order, each on the survivors of the previous one.
pub fn validate_features<T: Scalar>(
    matrix: &FeatureMatrix<T>,
    config: &PruneConfig,
) -> Result<PruneReport, PruneError> {
    let mut removed = prune_linear_combinations(matrix, &config.sum_rules)?;
    let m = drop_removed(matrix, &removed);

    let c = prune_correlated(&m, config.corr_threshold)?;
    let m = drop_removed(&m, &c);
    removed.extend(c);

    let v = prune_low_variance(&m, config.variance_epsilon)?;
    let m = drop_removed(&m, &v);
    removed.extend(v);

    let d = prune_derived(&m.schema, &config.derived_rules);
    let m = drop_removed(&m, &d);
    removed.extend(d);

    Ok(PruneReport {
        removed,
        kept: m.schema,
    })
}

impl PruneReport {
    /// A report that removes nothing from `schema`.
    pub fn identity(schema: &FeatureSchema) -> Self {
        Self {
            removed: Vec::new(),
            kept: schema.clone(),
        }
    }

    /// Projects `matrix` onto the kept schema.
    pub fn apply<T: Scalar>(&self, matrix: &FeatureMatrix<T>) -> Result<FeatureMatrix<T>, PruneError> {
        let names: Vec<&str> = self.kept.names().collect();
        Ok(matrix.select(&names)?)
    }

    pub fn removed_names(&self) -> Vec<&str> {
        self.removed.iter().map(|r| r.feature.as_str()).collect()
    }

    pub fn reason_of(&self, name: &str) -> Option<Reason> {
        self.removed.iter().find(|r| r.feature == name).map(|r| r.reason)
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "schema: {}", self.kept.version);
        let _ = writeln!(
            s,
            "removed {} of {} features",
            self.removed.len(),
            self.removed.len() + self.kept.len()
        );
        let width = self.removed.iter().map(|r| r.feature.len()).max().unwrap_or(0);
        for r in &self.removed {
            let _ = writeln!(s, "  {:<width$}  {}  {}", r.feature, r.reason.letter(), r.evidence);
        }
        let _ = writeln!(s, "kept {}:", self.kept.len());
        for c in &self.kept.columns {
            let _ = writeln!(s, "  {} ({})", c.name, c.kind);
        }
        s
    }

    pub fn encode(&self, e: &mut Encoder) {
        encode_schema(&self.kept, e);
        e.len_prefix(self.removed.len());
        for r in &self.removed {
            e.str(&r.feature);
            e.u8(r.reason.letter() as u8);
            match &r.evidence {
                Evidence::SumOf(p) => {
                    e.u8(0);
                    e.len_prefix(p.len());
                    p.iter().for_each(|x| e.str(x));
                }
                Evidence::Correlation { partner, r } => {
                    e.u8(1);
                    e.str(partner);
                    e.f64(*r);
                }
                Evidence::Variance(v) => {
                    e.u8(2);
                    e.f64(*v);
                }
                Evidence::DerivedFrom(s) => {
                    e.u8(3);
                    e.str(s);
                }
            }
        }
    }

    pub fn decode(d: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let kept = decode_schema(d)?;
        let n = d.len_prefix(6)?;
        let mut removed = Vec::with_capacity(n);
        for _ in 0..n {
            let feature = d.str()?;
            let reason = Reason::from_letter(d.u8()? as char).ok_or_else(|| d.invalid("reason"))?;
            let evidence = match d.u8()? {
                0 => {
                    let k = d.len_prefix(4)?;
                    Evidence::SumOf((0..k).map(|_| d.str()).collect::<Result<_, _>>()?)
                }
                1 => Evidence::Correlation {
                    partner: d.str()?,
                    r: d.f64()?,
                },
                2 => Evidence::Variance(d.f64()?),
                3 => Evidence::DerivedFrom(d.str()?),
                _ => return Err(d.invalid("evidence tag")),
            };
            removed.push(Removal {
                feature,
                reason,
                evidence,
            });
        }
        Ok(Self { removed, kept })
    }
}

pub fn encode_schema(s: &FeatureSchema, e: &mut Encoder) {
    e.str(&s.version);
    e.len_prefix(s.columns.len());
    for c in &s.columns {
        e.str(&c.name);
        e.u8(c.kind.code());
        e.str(&c.units);
    }
}

pub fn decode_schema(d: &mut Decoder<'_>) -> Result<FeatureSchema, DecodeError> {
    let version = d.str()?;
    let n = d.len_prefix(9)?;
    let mut columns = Vec::with_capacity(n);
    for _ in 0..n {
        let name = d.str()?;
        let kind = FeatureKind::from_code(d.u8()?).ok_or_else(|| d.invalid("feature kind"))?;
        let units = d.str()?;
        columns.push(crate::features::Column { name, kind, units });
    }
    Ok(FeatureSchema { version, columns })
}

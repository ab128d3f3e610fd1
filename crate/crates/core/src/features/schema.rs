use serde::{Deserialize, Serialize};
use std::fmt;

pub const SCHEMA_VERSION: &str = "flowfeat-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureKind {
    Numeric,
    Categorical,
    Binary,
}

impl FeatureKind {
    pub fn code(self) -> u8 {
        match self {
            FeatureKind::Numeric => 0,
            FeatureKind::Categorical => 1,
            FeatureKind::Binary => 2,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(FeatureKind::Numeric),
            1 => Some(FeatureKind::Categorical),
            2 => Some(FeatureKind::Binary),
            _ => None,
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureKind::Numeric => "numeric",
            FeatureKind::Categorical => "categorical",
            FeatureKind::Binary => "binary",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: FeatureKind,
    pub units: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub version: String,
    pub columns: Vec<Column>,
}

use FeatureKind::{Binary as B, Categorical as C, Numeric as N};

/// The full flow catalogue in canonical order.
pub const CATALOGUE: [(&str, FeatureKind, &str); 47] = [
    ("dur", N, "s"),
    ("pkts_fwd", N, "count"),
    ("pkts_bwd", N, "count"),
    ("pkts_tot", N, "count"),
    ("bytes_fwd", N, "bytes"),
    ("bytes_bwd", N, "bytes"),
    ("bytes_tot", N, "bytes"),
    ("pktlen_fwd_mean", N, "bytes"),
    ("pktlen_fwd_std", N, "bytes"),
    ("pktlen_fwd_min", N, "bytes"),
    ("pktlen_fwd_max", N, "bytes"),
    ("pktlen_bwd_mean", N, "bytes"),
    ("pktlen_bwd_std", N, "bytes"),
    ("pktlen_bwd_min", N, "bytes"),
    ("pktlen_bwd_max", N, "bytes"),
    ("iat_fwd_mean", N, "s"),
    ("iat_fwd_std", N, "s"),
    ("iat_fwd_min", N, "s"),
    ("iat_fwd_max", N, "s"),
    ("iat_bwd_mean", N, "s"),
    ("iat_bwd_std", N, "s"),
    ("iat_bwd_min", N, "s"),
    ("iat_bwd_max", N, "s"),
    ("iat_tot_mean", N, "s"),
    ("iat_tot_std", N, "s"),
    ("pps", N, "pkt/s"),
    ("bps", N, "B/s"),
    ("down_up_pkt_ratio", N, "-"),
    ("down_up_byte_ratio", N, "-"),
    ("syn_cnt", N, "count"),
    ("ack_cnt", N, "count"),
    ("fin_cnt", N, "count"),
    ("rst_cnt", N, "count"),
    ("psh_cnt", N, "count"),
    ("urg_cnt", N, "count"),
    ("ece_cnt", N, "count"),
    ("cwr_cnt", N, "count"),
    ("payload_entropy_fwd", N, "bits/byte"),
    ("payload_entropy_bwd", N, "bits/byte"),
    ("payload_nonzero_frac_fwd", N, "[0,1]"),
    ("payload_nonzero_frac_bwd", N, "[0,1]"),
    ("has_fwd", B, "binary"),
    ("has_bwd", B, "binary"),
    ("proto", C, "categ."),
    ("sport_bucket", C, "categ."),
    ("dport_bucket", C, "categ."),
    ("internal_dst", B, "binary"),
];

/// Position of `name` in the canonical catalogue.
pub fn canonical_rank(name: &str) -> Option<usize> {
    CATALOGUE.iter().position(|(n, _, _)| *n == name)
}

impl FeatureSchema {
    pub fn full() -> Self {
        Self {
            version: SCHEMA_VERSION.to_string(),
            columns: CATALOGUE
                .iter()
                .map(|(n, k, u)| Column {
                    name: (*n).to_string(),
                    kind: *k,
                    units: (*u).to_string(),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index_of(name).is_some()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    /// Schema restricted to `keep`, preserving this schema's order.
    pub fn retain(&self, keep: impl Fn(&Column) -> bool) -> Self {
        Self {
            version: self.version.clone(),
            columns: self.columns.iter().filter(|c| keep(c)).cloned().collect(),
        }
    }

    pub fn has_unique_names(&self) -> bool {
        let mut names: Vec<&str> = self.names().collect();
        names.sort_unstable();
        names.windows(2).all(|w| w[0] != w[1])
    }
}

use crate::features::{FeatureKind, FeatureMatrix, FeatureSchema, FeatureValue, FeatureVector, Provenance};
use crate::pruning::Reason;
use crate::scalar::Scalar;
use crate::seed;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::collections::HashMap;

/// The columns the feature table marks as removed, with their reasons.
pub const TABLE1_REMOVED: [(&str, Reason); 19] = [
    ("pkts_tot", Reason::LinearCombination),
    ("bytes_tot", Reason::LinearCombination),
    ("pktlen_fwd_min", Reason::Correlated),
    ("pktlen_fwd_max", Reason::Correlated),
    ("pktlen_bwd_min", Reason::Correlated),
    ("pktlen_bwd_max", Reason::Correlated),
    ("iat_fwd_min", Reason::Correlated),
    ("iat_fwd_max", Reason::Correlated),
    ("iat_bwd_min", Reason::Correlated),
    ("iat_bwd_max", Reason::Correlated),
    ("syn_cnt", Reason::LowVariance),
    ("ack_cnt", Reason::LowVariance),
    ("fin_cnt", Reason::LowVariance),
    ("rst_cnt", Reason::LowVariance),
    ("psh_cnt", Reason::LowVariance),
    ("urg_cnt", Reason::LowVariance),
    ("ece_cnt", Reason::LowVariance),
    ("cwr_cnt", Reason::LowVariance),
    ("down_up_byte_ratio", Reason::Derived),
];

/// A full-schema matrix with the dependency structure the feature table
/// reports: totals are exact sums, min/max columns track their mean column
/// (r ≈ 0.995), flag counts are constant, the byte ratio is independent of
/// the packet ratio, and every other column is independent noise.
pub fn paper_shaped_matrix<T: Scalar>(n_rows: usize, seed: u64) -> FeatureMatrix<T> {
    let schema = FeatureSchema::full();
    let mut rng = seed::rng(seed);
    let mut m = FeatureMatrix::new(schema.clone());
    let tracks: HashMap<&str, (&str, f64)> = [
        ("pktlen_fwd_min", ("pktlen_fwd_mean", -1.0)),
        ("pktlen_fwd_max", ("pktlen_fwd_mean", 1.0)),
        ("pktlen_bwd_min", ("pktlen_bwd_mean", -1.0)),
        ("pktlen_bwd_max", ("pktlen_bwd_mean", 1.0)),
        ("iat_fwd_min", ("iat_fwd_mean", -1.0)),
        ("iat_fwd_max", ("iat_fwd_mean", 1.0)),
        ("iat_bwd_min", ("iat_bwd_mean", -1.0)),
        ("iat_bwd_max", ("iat_bwd_mean", 1.0)),
    ]
    .into_iter()
    .collect();
    for r in 0..n_rows {
        let mut vals: HashMap<&str, f64> = HashMap::new();
        let mut row = Vec::with_capacity(schema.len());
        for col in &schema.columns {
            let name = col.name.as_str();
            let z: f64 = StandardNormal.sample(&mut rng);
            let v = match col.kind {
                FeatureKind::Categorical => FeatureValue::Cat(rng.random_range(0..6)),
                FeatureKind::Binary => FeatureValue::Bin(rng.random()),
                FeatureKind::Numeric => {
                    let x = match name {
                        "pkts_fwd" | "pkts_bwd" => f64::from(rng.random_range(1u32..60)),
                        "bytes_fwd" | "bytes_bwd" => f64::from(rng.random_range(60u32..60_000)),
                        "pkts_tot" => vals["pkts_fwd"] + vals["pkts_bwd"],
                        "bytes_tot" => vals["bytes_fwd"] + vals["bytes_bwd"],
                        n if n.ends_with("_cnt") => 0.0,
                        n => match tracks.get(n) {
                            Some(&(mean_col, sign)) => vals[mean_col] + sign * (0.3 + 0.1 * z.abs()),
                            None => 10.0 + z,
                        },
                    };
                    vals.insert(name, x);
                    FeatureValue::Num(T::from_f64_lossy(x))
                }
            };
            row.push(v);
        }
        let sid = format!("shaped-s{:03}", r / 10);
        m.push(
            FeatureVector {
                values: row,
                provenance: Provenance {
                    session_id: sid,
                    flow_index: (r % 10) as u32,
                    window: None,
                },
            },
            format!("shaped{}", r % 4),
        )
        .expect("row matches the full schema");
    }
    m
}

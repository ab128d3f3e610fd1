use super::ModelError;
use crate::codec::{DecodeError, Decoder, Encoder};
use std::fmt;
use std::str::FromStr;

/// Number of candidate features examined at each split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaxFeatures {
    Sqrt,
    Log2,
    All,
    Fraction(f64),
}

impl MaxFeatures {
    pub fn resolve(self, n_features: usize) -> usize {
        let n = n_features as f64;
        let k = match self {
            MaxFeatures::Sqrt => n.sqrt().floor() as usize,
            MaxFeatures::Log2 => n.log2().floor() as usize,
            MaxFeatures::All => n_features,
            MaxFeatures::Fraction(f) => (f * n).floor() as usize,
        };
        k.clamp(1, n_features.max(1))
    }
}

impl fmt::Display for MaxFeatures {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaxFeatures::Sqrt => f.write_str("sqrt"),
            MaxFeatures::Log2 => f.write_str("log2"),
            MaxFeatures::All => f.write_str("all"),
            MaxFeatures::Fraction(x) => write!(f, "{x}"),
        }
    }
}

impl FromStr for MaxFeatures {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sqrt" => Ok(MaxFeatures::Sqrt),
            "log2" => Ok(MaxFeatures::Log2),
            "all" => Ok(MaxFeatures::All),
            x => match x.parse::<f64>() {
                Ok(f) if f > 0.0 && f <= 1.0 => Ok(MaxFeatures::Fraction(f)),
                _ => Err(format!("max_features must be sqrt, log2, all or a fraction in (0,1], got {x:?}")),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperParams {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or sample bounds stop it.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    pub seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: MaxFeatures::Sqrt,
            seed: 0,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidParams(m.to_string()));
        if self.n_trees < 1 {
            return bad("n_trees must be >= 1");
        }
        if self.min_samples_split < 2 {
            return bad("min_samples_split must be >= 2");
        }
        if self.min_samples_leaf < 1 {
            return bad("min_samples_leaf must be >= 1");
        }
        if self.max_depth == Some(0) {
            return bad("max_depth must be >= 1 when set");
        }
        if let MaxFeatures::Fraction(f) = self.max_features {
            if !(f > 0.0 && f <= 1.0) {
                return bad("max_features fraction must lie in (0, 1]");
            }
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn encode(&self, e: &mut Encoder) {
        e.u64(self.n_trees as u64);
        e.u64(self.max_depth.map_or(0, |d| d as u64 + 1));
        e.u64(self.min_samples_split as u64);
        e.u64(self.min_samples_leaf as u64);
        match self.max_features {
            MaxFeatures::Sqrt => e.u8(0),
            MaxFeatures::Log2 => e.u8(1),
            MaxFeatures::All => e.u8(2),
            MaxFeatures::Fraction(f) => {
                e.u8(3);
                e.f64(f);
            }
        }
        e.u64(self.seed);
    }

    pub fn decode(d: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let n_trees = d.u64()? as usize;
        let depth = d.u64()?;
        let min_samples_split = d.u64()? as usize;
        let min_samples_leaf = d.u64()? as usize;
        let max_features = match d.u8()? {
            0 => MaxFeatures::Sqrt,
            1 => MaxFeatures::Log2,
            2 => MaxFeatures::All,
            3 => MaxFeatures::Fraction(d.f64()?),
            _ => return Err(d.invalid("max_features tag")),
        };
        Ok(Self {
            n_trees,
            max_depth: (depth > 0).then(|| (depth - 1) as usize),
            min_samples_split,
            min_samples_leaf,
            max_features,
            seed: d.u64()?,
        })
    }
}

impl fmt::Display for HyperParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n_trees={} max_depth={} min_samples_split={} min_samples_leaf={} max_features={}",
            self.n_trees,
            self.max_depth.map_or("none".to_string(), |d| d.to_string()),
            self.min_samples_split,
            self.min_samples_leaf,
            self.max_features
        )
    }
}

use crate::scalar::Scalar;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("entropy of an empty byte sequence is undefined")]
pub struct EmptyInput;

fn histogram(bytes: &[u8]) -> [u32; 256] {
    let mut counts = [0u32; 256];
    for &b in bytes {
        counts[b as usize] += 1;
    }
    counts
}

/// Shannon entropy of the byte-value distribution, in bits per byte.
pub fn payload_entropy<T: Scalar>(bytes: &[u8]) -> Result<T, EmptyInput> {
    if bytes.is_empty() {
        return Err(EmptyInput);
    }
    let n = bytes.len() as f64;
    let h: f64 = histogram(bytes)
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = f64::from(c) / n;
            -p * p.log2()
        })
        .sum();
    // A single-symbol input sums to -0.0; rounding can exceed 8.
    let h = if h > 0.0 { h.min(8.0) } else { 0.0 };
    Ok(T::from_f64_lossy(h))
}

/// Fraction of bytes that are not 0x00.
pub fn nonzero_fraction<T: Scalar>(bytes: &[u8]) -> Result<T, EmptyInput> {
    if bytes.is_empty() {
        return Err(EmptyInput);
    }
    let nz = bytes.iter().filter(|&&b| b != 0).count();
    Ok(T::from_f64_lossy(nz as f64 / bytes.len() as f64))
}

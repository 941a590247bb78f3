//! Uniform symmetric integer quantization with a software scale.

use crate::error::{Error, Result};

pub(crate) fn int_range(bits: u32) -> (i64, i64) {
    (-(1i64 << (bits - 1)), (1i64 << (bits - 1)) - 1)
}

fn check_bits(bits: u32) -> Result<()> {
    if !(2..=32).contains(&bits) {
        return Err(Error::InvalidConfig(format!("integer width {bits} outside [2, 32]")));
    }
    Ok(())
}

#[inline]
pub(crate) fn round_to_int(y: f64, lo: i64, hi: i64) -> i64 {
    let r = y.round_ties_even();
    if r <= lo as f64 {
        lo
    } else if r >= hi as f64 {
        hi
    } else {
        r as i64
    }
}

/// `RoundToInt(x / s)` in `bits`-wide two's complement, ties to even,
/// saturating.
pub fn int_quantize(x: &[f64], bits: u32, s: f64) -> Result<Vec<i32>> {
    check_bits(bits)?;
    if !s.is_finite() || s <= 0.0 {
        return Err(Error::InvalidScale(s));
    }
    let (lo, hi) = int_range(bits);
    x.iter()
        .enumerate()
        .map(|(index, &v)| {
            if v.is_finite() {
                Ok(round_to_int(v / s, lo, hi) as i32)
            } else {
                Err(Error::NonFinite { index, value: v })
            }
        })
        .collect()
}

/// Descaling, `s * q`.
pub fn int_dequantize(q: &[i32], s: f64) -> Vec<f64> {
    q.iter().map(|&v| s * f64::from(v)).collect()
}

//! Per-vector scaled quantization: a coarse software scale over the whole
//! block and an integer sub-scale per group of `k2` elements.

use serde::{Deserialize, Serialize};

use super::int::{int_range, round_to_int};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VsqBlock {
    pub coarse_scale: f64,
    pub sub_scales: Vec<u32>,
    pub codes: Vec<i32>,
    pub k2: usize,
}

impl VsqBlock {
    pub fn dequantize(&self) -> Vec<f64> {
        self.codes
            .chunks(self.k2)
            .zip(&self.sub_scales)
            .flat_map(|(g, &ss)| {
                let step = self.coarse_scale * f64::from(ss);
                g.iter().map(move |&c| step * f64::from(c))
            })
            .collect()
    }
}

/// Largest integer sub-scale for `d2` bits; `d2 = 0` pins every sub-scale
/// to 1.
pub(crate) fn max_sub_scale(d2: u32) -> u32 {
    ((1u64 << d2) - 1).max(1) as u32
}

fn check(x: &[f64], bits: u32, d2: u32, k2: usize) -> Result<()> {
    if !(2..=16).contains(&bits) {
        return Err(Error::InvalidConfig(format!("VSQ element width {bits} outside [2, 16]")));
    }
    if d2 > 16 {
        return Err(Error::InvalidConfig(format!("VSQ sub-scale width {d2} exceeds 16")));
    }
    if k2 == 0 || x.is_empty() || !x.len().is_multiple_of(k2) {
        return Err(Error::Geometry(format!(
            "group size {k2} must divide block length {}",
            x.len()
        )));
    }
    if let Some(index) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index, value: x[index] });
    }
    Ok(())
}

/// Quantizes one block, deriving the coarse scale from the block maximum so
/// that the largest group uses the full sub-scale range.
pub fn vsq_quantize(x: &[f64], bits: u32, d2: u32, k2: usize) -> Result<VsqBlock> {
    check(x, bits, d2, k2)?;
    let amax = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    vsq_quantize_with_scale(x, bits, d2, k2, coarse_scale_for(amax, bits, d2))
}

/// Coarse scale aligning `amax` to `intmax * ss_max`.
pub(crate) fn coarse_scale_for(amax: f64, bits: u32, d2: u32) -> f64 {
    if amax > 0.0 {
        amax / (int_range(bits).1 as f64 * f64::from(max_sub_scale(d2)))
    } else {
        1.0
    }
}

/// Quantizes one block under a given coarse scale `s`.
///
/// Each group gets `ss = ceil(max|group| / (s * intmax))` clamped to
/// `[1, 2^d2 - 1]`, then codes `RoundToInt(x / (s * ss))`.
pub fn vsq_quantize_with_scale(
    x: &[f64],
    bits: u32,
    d2: u32,
    k2: usize,
    s: f64,
) -> Result<VsqBlock> {
    check(x, bits, d2, k2)?;
    if !s.is_finite() || s <= 0.0 {
        return Err(Error::InvalidScale(s));
    }
    let (lo, hi) = int_range(bits);
    let ss_max = max_sub_scale(d2);
    let mut sub_scales = Vec::with_capacity(x.len() / k2);
    let mut codes = Vec::with_capacity(x.len());
    for g in x.chunks(k2) {
        let gmax = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let ss = sub_scale(gmax, s, hi, ss_max);
        let step = s * f64::from(ss);
        codes.extend(g.iter().map(|&v| round_to_int(v / step, lo, hi) as i32));
        sub_scales.push(ss);
    }
    Ok(VsqBlock {
        coarse_scale: s,
        sub_scales,
        codes,
        k2,
    })
}

#[inline]
fn sub_scale(gmax: f64, s: f64, intmax: i64, ss_max: u32) -> u32 {
    let ideal = (gmax / (s * intmax as f64)).ceil();
    if ideal >= f64::from(ss_max) {
        ss_max
    } else if ideal <= 1.0 {
        1
    } else {
        ideal as u32
    }
}

/// Quantize-dequantize without materialising a [`VsqBlock`].
pub(crate) fn roundtrip_into(x: &[f64], bits: u32, d2: u32, k2: usize, s: f64, out: &mut [f64]) {
    let (lo, hi) = int_range(bits);
    let ss_max = max_sub_scale(d2);
    for (g, o) in x.chunks(k2).zip(out.chunks_mut(k2)) {
        let gmax = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let step = s * f64::from(sub_scale(gmax, s, hi, ss_max));
        for (&v, o) in g.iter().zip(o.iter_mut()) {
            *o = step * round_to_int(v / step, lo, hi) as f64;
        }
    }
}

//! Two-level block codec: shared exponent, sub-block shifts, and
//! sign-magnitude mantissas on a power-of-two grid.
//!
//! An element `x` of sub-block `i` is stored as a sign and an `m`-bit
//! magnitude code `M` with value `M * 2^(E - tau_i - (m - 1))`, i.e. the
//! fixed-point form `b0.b1…b(m-1) * 2^(E - tau_i)`. Rounding is
//! round-to-nearest, ties-to-even, saturating at `2^m - 1`.
//!
//! The shared exponent `E` is the private exponent of the largest magnitude
//! in the block, incremented by one when rounding that element onto the
//! `m`-bit grid would carry out of the top bit. With this adjustment the
//! anchor element never saturates and every element obeys
//! `|Q(x) - x| <= 2^(E - tau - m)`. Sub-block exponents use the same rule.

use serde::{Deserialize, Serialize};

use crate::config::BdrConfig;
use crate::error::{Error, Result};

/// `2^k` as an `f64`, exact for `k` in the normal range.
#[inline]
pub(crate) fn pow2(k: i32) -> f64 {
    debug_assert!((-1022..=1023).contains(&k));
    f64::from_bits(((k + 1023) as u64) << 52)
}

/// `x * 2^k` without intermediate overflow or underflow for any finite
/// result that fits in `f64`.
pub(crate) fn ldexp(mut x: f64, mut k: i32) -> f64 {
    while k > 1023 {
        x *= pow2(1023);
        k -= 1023;
    }
    while k < -1022 {
        x *= pow2(-1022);
        k += 1022;
        if x == 0.0 {
            return x;
        }
    }
    x * pow2(k)
}

/// `floor(log2(|x|))` for finite non-zero `x`, including subnormals.
#[inline]
pub(crate) fn exponent_of(x: f64) -> i32 {
    let bits = x.to_bits() & 0x7fff_ffff_ffff_ffff;
    let biased = (bits >> 52) as i32;
    if biased == 0 {
        // subnormal: value = frac * 2^-1074
        let frac = bits & 0x000f_ffff_ffff_ffff;
        63 - frac.leading_zeros() as i32 - 1074
    } else {
        biased - 1023
    }
}

/// Private exponent of a non-zero magnitude `a` on an `m`-bit grid, bumped
/// by one if round-to-nearest would carry past `2^m - 1`.
#[inline]
pub(crate) fn carried_exponent(a: f64, m: u32) -> i32 {
    let e = exponent_of(a);
    let code = ldexp(a, m as i32 - 1 - e).round_ties_even();
    if code >= (1u64 << m) as f64 {
        e + 1
    } else {
        e
    }
}

/// Result of the shared-exponent search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SharedExponent {
    pub exp: i32,
    /// The block is entirely zero; `exp` is the minimum encodable exponent.
    pub zero: bool,
}

fn check_finite(x: &[f64]) -> Result<()> {
    match x.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite {
            index,
            value: x[index],
        }),
        None => Ok(()),
    }
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

fn require_hardware(cfg: &BdrConfig) -> Result<()> {
    cfg.validate()?;
    if !cfg.is_hardware_scaled() {
        return Err(Error::InvalidConfig(format!(
            "{cfg} does not use power-of-two scales; use the format-specific codec"
        )));
    }
    Ok(())
}

/// Shared exponent of a block of at most `k1` values.
pub fn compute_shared_exponent(x: &[f64], cfg: &BdrConfig) -> Result<SharedExponent> {
    if x.is_empty() {
        return Err(Error::Empty);
    }
    check_finite(x)?;
    Ok(shared_exponent_unchecked(max_abs(x), cfg))
}

#[inline]
fn shared_exponent_unchecked(amax: f64, cfg: &BdrConfig) -> SharedExponent {
    if amax == 0.0 {
        SharedExponent {
            exp: cfg.min_exponent(),
            zero: true,
        }
    } else {
        SharedExponent {
            exp: carried_exponent(amax, cfg.m).clamp(cfg.min_exponent(), cfg.max_exponent()),
            zero: false,
        }
    }
}

#[inline]
fn shift_for(amax: f64, exp: i32, cfg: &BdrConfig) -> u32 {
    let beta = cfg.beta();
    if amax == 0.0 {
        return beta;
    }
    let sub = carried_exponent(amax, cfg.m).clamp(cfg.min_exponent(), exp);
    ((exp - sub) as u32).min(beta)
}

/// Per-sub-block right shifts `tau_i = min(E - E_i, beta)`.
///
/// `E_i` is the carry-adjusted exponent of the largest magnitude in
/// sub-block `i`; an all-zero sub-block gets `beta`.
pub fn compute_subblock_shifts(x: &[f64], exp: i32, cfg: &BdrConfig) -> Result<Vec<u8>> {
    cfg.validate()?;
    if x.len() != cfg.k1 {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: cfg.k1,
        });
    }
    check_finite(x)?;
    if cfg.d2 == 0 {
        return Ok(vec![0; cfg.subblocks()]);
    }
    Ok(x.chunks(cfg.k2)
        .map(|sub| shift_for(max_abs(sub), exp, cfg) as u8)
        .collect())
}

/// Sign and magnitude code of one element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ElementCode {
    pub negative: bool,
    pub magnitude: u32,
}

/// One encoded block of `k1` elements.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuantizedBlock {
    pub shared_exp: i32,
    pub shifts: Vec<u8>,
    pub codes: Vec<ElementCode>,
}

impl QuantizedBlock {
    pub fn is_zero(&self) -> bool {
        self.codes.iter().all(|c| c.magnitude == 0)
    }

    /// Exponent of the least significant mantissa bit of sub-block `i`.
    #[inline]
    pub fn lsb_exponent(&self, sub: usize, cfg: &BdrConfig) -> i32 {
        self.shared_exp - i32::from(self.shifts[sub]) - (cfg.m as i32 - 1)
    }

    pub fn dequantize(&self, cfg: &BdrConfig) -> Vec<f64> {
        dequantize_block(self, cfg)
    }
}

#[inline]
fn encode_magnitude(a: f64, lsb: i32, max_code: u32) -> u32 {
    let code = ldexp(a, -lsb).round_ties_even();
    if code >= f64::from(max_code) {
        max_code
    } else {
        code as u32
    }
}

/// Encodes exactly `k1` values (callers zero-pad tails).
pub fn quantize_block(x: &[f64], cfg: &BdrConfig) -> Result<QuantizedBlock> {
    require_hardware(cfg)?;
    if x.len() != cfg.k1 {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: cfg.k1,
        });
    }
    check_finite(x)?;
    let se = shared_exponent_unchecked(max_abs(x), cfg);
    let shifts = if se.zero {
        vec![cfg.beta() as u8; cfg.subblocks()]
    } else {
        compute_subblock_shifts(x, se.exp, cfg)?
    };
    let max_code = cfg.max_mantissa();
    let mut codes = Vec::with_capacity(cfg.k1);
    for (sub, chunk) in x.chunks(cfg.k2).enumerate() {
        let lsb = se.exp - i32::from(shifts[sub]) - (cfg.m as i32 - 1);
        for &v in chunk {
            let magnitude = encode_magnitude(v.abs(), lsb, max_code);
            codes.push(ElementCode {
                negative: v.is_sign_negative() && magnitude != 0,
                magnitude,
            });
        }
    }
    Ok(QuantizedBlock {
        shared_exp: se.exp,
        shifts,
        codes,
    })
}

/// Reconstructs `(-1)^sign * M * 2^(E - tau - (m - 1))` for each element.
pub fn dequantize_block(block: &QuantizedBlock, cfg: &BdrConfig) -> Vec<f64> {
    block
        .codes
        .chunks(cfg.k2)
        .enumerate()
        .flat_map(|(sub, chunk)| {
            let lsb = block.lsb_exponent(sub, cfg);
            chunk.iter().map(move |c| {
                let v = ldexp(f64::from(c.magnitude), lsb);
                if c.negative {
                    -v
                } else {
                    v
                }
            })
        })
        .collect()
}

/// Quantize-dequantize of up to `k1` values in one pass, without building a
/// [`QuantizedBlock`]. A short slice behaves as if zero-padded to `k1`.
///
/// Produces bitwise the same values as `dequantize_block(quantize_block(x))`.
pub fn fake_quantize_block(x: &[f64], out: &mut [f64], cfg: &BdrConfig) -> Result<()> {
    if x.len() > cfg.k1 || out.len() != x.len() {
        return Err(Error::Geometry(format!(
            "block of {} values (output {}) for k1={}",
            x.len(),
            out.len(),
            cfg.k1
        )));
    }
    let mut amax = 0.0f64;
    for (i, &v) in x.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { index: i, value: v });
        }
        amax = amax.max(v.abs());
    }
    fake_quantize_unchecked(x, out, amax, cfg);
    Ok(())
}

#[inline]
pub(crate) fn fake_quantize_unchecked(x: &[f64], out: &mut [f64], amax: f64, cfg: &BdrConfig) {
    let se = shared_exponent_unchecked(amax, cfg);
    if se.zero {
        out.iter_mut().for_each(|o| *o = 0.0);
        return;
    }
    let max_code = cfg.max_mantissa();
    for (chunk, out_chunk) in x.chunks(cfg.k2).zip(out.chunks_mut(cfg.k2)) {
        let tau = if cfg.d2 == 0 {
            0
        } else {
            shift_for(max_abs(chunk), se.exp, cfg)
        };
        let lsb = se.exp - tau as i32 - (cfg.m as i32 - 1);
        for (&v, o) in chunk.iter().zip(out_chunk.iter_mut()) {
            let q = ldexp(f64::from(encode_magnitude(v.abs(), lsb, max_code)), lsb);
            *o = if v.is_sign_negative() { -q } else { q };
            if *o == 0.0 {
                *o = 0.0;
            }
        }
    }
}

/// Quantize-dequantize a vector of any length in consecutive `k1` blocks.
pub fn fake_quantize(x: &[f64], cfg: &BdrConfig) -> Result<Vec<f64>> {
    require_hardware(cfg)?;
    let mut out = vec![0.0; x.len()];
    for (b, (chunk, out_chunk)) in x.chunks(cfg.k1).zip(out.chunks_mut(cfg.k1)).enumerate() {
        fake_quantize_block(chunk, out_chunk, cfg).map_err(|e| match e {
            Error::NonFinite { index, value } => Error::NonFinite {
                index: b * cfg.k1 + index,
                value,
            },
            e => e,
        })?;
    }
    Ok(out)
}

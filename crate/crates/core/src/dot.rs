//! Bit-exact model of a block dot-product datapath.
//!
//! For every `k1`-block pair the datapath multiplies integer mantissas,
//! reduces each sub-block of `k2` products, lines the sub-block sums up
//! according to their combined shifts, and sums them into a block partial
//! whose exponent is `E_A + E_B`. The partials of all `r / k1` blocks are then
//! aligned to the largest exponent and accumulated in an `f`-bit
//! two's-complement register. Bits shifted out during alignment are
//! discarded (truncation toward −∞); a sum that leaves the `f`-bit range
//! saturates and sets an overflow flag.
//!
//! The register's top bit sits just above the largest possible partial at
//! the largest exponent. Accumulator bits beyond the partial width are first
//! spent as carry guard bits, up to `ceil(log2(r / k1))` of them, and only
//! then extend precision below. With the default width, which equals the
//! partial width, there are no guard bits and a long reduction can
//! overflow.
//!
//! The same code covers three modes: MX-style two-level blocks, single-level
//! block floating point (`d2 = 0`), and scalar floating point
//! (`k1 = k2 = 1`).
//!
//! Sub-block sums are aligned by shifting the *less* shifted sums left
//! rather than the more shifted ones right. The block partial keeps `2β`
//! extra fraction bits, so this stage is exact and only the accumulator
//! alignment can lose information.

use serde::{Deserialize, Serialize};

use crate::codec::{ldexp, quantize_block, QuantizedBlock};
use crate::config::BdrConfig;
use crate::error::{Error, Result};

/// Accumulator width used for scalar (`k1 = 1`) mode: a single-precision
/// significand plus sign.
pub const SCALAR_ACC_BITS: u32 = 25;

/// Upper limit on the accumulator width, so that every intermediate fits an
/// `i128`.
pub const MAX_ACC_BITS: u32 = 126;

fn ceil_log2(n: usize) -> u32 {
    n.next_power_of_two().trailing_zeros()
}

/// Bits needed for the largest exact block partial, sign included:
/// `2m + ceil(log2 k1) + 2β + 1`.
pub fn partial_width(cfg: &BdrConfig) -> u32 {
    2 * cfg.m + ceil_log2(cfg.k1) + 2 * cfg.beta() + 1
}

/// The default accumulator width: the partial width capped at 25 bits, or
/// 25 bits in scalar mode.
pub fn default_acc_bits(cfg: &BdrConfig) -> u32 {
    if cfg.k1 == 1 {
        SCALAR_ACC_BITS
    } else {
        partial_width(cfg).min(SCALAR_ACC_BITS)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DotConfig {
    pub cfg: BdrConfig,
    /// Reduction length in elements.
    pub r: usize,
    /// Accumulator width in bits.
    pub f: u32,
}

impl DotConfig {
    pub fn new(cfg: BdrConfig, r: usize) -> Result<Self> {
        Self::with_acc_bits(cfg, r, default_acc_bits(&cfg))
    }

    pub fn with_acc_bits(cfg: BdrConfig, r: usize, f: u32) -> Result<Self> {
        cfg.validate()?;
        if !cfg.is_hardware_scaled() {
            return Err(Error::InvalidConfig(format!("{cfg} has no block datapath")));
        }
        if r == 0 || !r.is_multiple_of(cfg.k1) {
            return Err(Error::Geometry(format!("k1={} does not divide r={r}", cfg.k1)));
        }
        if !(2..=MAX_ACC_BITS).contains(&f) {
            return Err(Error::InvalidConfig(format!("accumulator width {f} outside [2, {MAX_ACC_BITS}]")));
        }
        if partial_width(&cfg) > MAX_ACC_BITS {
            return Err(Error::InvalidConfig(format!(
                "{cfg} needs {}-bit block partials, more than {MAX_ACC_BITS}",
                partial_width(&cfg)
            )));
        }
        Ok(DotConfig { cfg, r, f })
    }

    pub fn blocks(&self) -> usize {
        self.r / self.cfg.k1
    }

    /// Carry guard bits above the largest partial.
    pub fn guard_bits(&self) -> u32 {
        ceil_log2(self.blocks()).min(self.f.saturating_sub(partial_width(&self.cfg)))
    }

    /// Exponent of the partials' least significant bit relative to
    /// `E_A + E_B`.
    fn partial_lsb_offset(&self) -> i32 {
        -2 * (self.cfg.m as i32 - 1) - 2 * self.cfg.beta() as i32
    }
}

/// Two's-complement fixed-point register of `width` bits whose least
/// significant bit has weight `2^lsb_exp`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedPointAcc {
    pub value: i128,
    pub width: u32,
    pub lsb_exp: i32,
    pub overflow: bool,
}

impl FixedPointAcc {
    pub fn new(width: u32, lsb_exp: i32) -> Self {
        assert!((2..=MAX_ACC_BITS).contains(&width));
        FixedPointAcc {
            value: 0,
            width,
            lsb_exp,
            overflow: false,
        }
    }

    pub fn max_value(&self) -> i128 {
        (1i128 << (self.width - 1)) - 1
    }

    pub fn min_value(&self) -> i128 {
        -(1i128 << (self.width - 1))
    }

    /// Adds `x · 2^(x_lsb_exp)` after aligning it to the register's LSB,
    /// discarding any bits below it (floor). Saturates on overflow.
    pub fn add(&mut self, x: i128, x_lsb_exp: i32) {
        let shift = self.lsb_exp - x_lsb_exp;
        let aligned = if shift <= 0 {
            let up = (-shift) as u32;
            if x != 0 && (up >= 127 || x.unsigned_abs().leading_zeros() <= up + 1) {
                self.saturate(x < 0);
                return;
            }
            x << up
        } else if shift >= 127 {
            if x < 0 {
                -1
            } else {
                0
            }
        } else {
            x >> shift
        };
        if aligned > self.max_value() || aligned < self.min_value() {
            self.saturate(aligned < 0);
            return;
        }
        let sum = self.value + aligned;
        if sum > self.max_value() || sum < self.min_value() {
            self.saturate(sum < 0);
        } else {
            self.value = sum;
        }
    }

    fn saturate(&mut self, negative: bool) {
        self.overflow = true;
        self.value = if negative { self.min_value() } else { self.max_value() };
    }

    pub fn to_f64(&self) -> f64 {
        ldexp(self.value as f64, self.lsb_exp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DotResult {
    pub value: f64,
    pub overflow: bool,
}

/// Exact product sum of one block pair, in units of
/// `2^(E_A + E_B + partial_lsb_offset)`.
fn block_partial(a: &QuantizedBlock, b: &QuantizedBlock, cfg: &BdrConfig) -> i128 {
    let two_beta = 2 * cfg.beta();
    let mut partial = 0i128;
    for (sub, (ca, cb)) in a.codes.chunks(cfg.k2).zip(b.codes.chunks(cfg.k2)).enumerate() {
        let mut s = 0i128;
        for (x, y) in ca.iter().zip(cb) {
            let p = i128::from(x.magnitude) * i128::from(y.magnitude);
            s += if x.negative != y.negative { -p } else { p };
        }
        let combined = u32::from(a.shifts[sub]) + u32::from(b.shifts[sub]);
        partial += s << (two_beta - combined);
    }
    partial
}

fn check_row(row: &[QuantizedBlock], dc: &DotConfig) -> Result<()> {
    if row.len() != dc.blocks() {
        return Err(Error::LengthMismatch {
            left: row.len() * dc.cfg.k1,
            right: dc.r,
        });
    }
    let sub = dc.cfg.subblocks();
    for b in row {
        if b.codes.len() != dc.cfg.k1 || b.shifts.len() != sub {
            return Err(Error::Geometry(format!(
                "block with {} codes and {} shifts for {}",
                b.codes.len(),
                b.shifts.len(),
                dc.cfg
            )));
        }
        if b.shifts.iter().any(|&t| u32::from(t) > dc.cfg.beta())
            || b.codes.iter().any(|c| c.magnitude > dc.cfg.max_mantissa())
        {
            return Err(Error::Geometry(format!("block fields out of range for {}", dc.cfg)));
        }
    }
    Ok(())
}

/// Dot product of two encoded rows of `r` elements each.
pub fn mx_dot(a: &[QuantizedBlock], b: &[QuantizedBlock], dc: &DotConfig) -> Result<DotResult> {
    check_row(a, dc)?;
    check_row(b, dc)?;
    let exps: Vec<i32> = a.iter().zip(b).map(|(x, y)| x.shared_exp + y.shared_exp).collect();
    let x_max = *exps.iter().max().expect("r >= k1 > 0");
    let off = dc.partial_lsb_offset();
    let wp = (partial_width(&dc.cfg) + dc.guard_bits()) as i32;
    let mut acc = FixedPointAcc::new(dc.f, x_max + off + wp - dc.f as i32);
    for ((x, y), &e) in a.iter().zip(b).zip(&exps) {
        acc.add(block_partial(x, y, &dc.cfg), e + off);
    }
    Ok(DotResult {
        value: acc.to_f64(),
        overflow: acc.overflow,
    })
}

/// Encodes both vectors in `dc.cfg` (consecutive `k1` blocks) and runs
/// [`mx_dot`].
pub fn quantize_and_dot(a: &[f64], b: &[f64], dc: &DotConfig) -> Result<DotResult> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() != dc.r {
        return Err(Error::LengthMismatch { left: a.len(), right: dc.r });
    }
    let enc = |v: &[f64]| -> Result<Vec<QuantizedBlock>> {
        v.chunks(dc.cfg.k1).map(|c| quantize_block(c, &dc.cfg)).collect()
    };
    mx_dot(&enc(a)?, &enc(b)?, dc)
}

/// Correctly rounded `Σ a_i·b_i`.
///
/// Each product is split exactly into `p + e` with a fused multiply-add and
/// all terms are summed with Shewchuk's non-overlapping partials, so the
/// only rounding is the final one. Inputs must be finite and the products
/// must neither overflow nor underflow.
pub fn reference_dot(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let mut sum = ExactSum::default();
    for (&x, &y) in a.iter().zip(b) {
        let p = x * y;
        sum.add(p);
        sum.add(x.mul_add(y, -p));
    }
    Ok(sum.value())
}

#[derive(Default)]
struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    fn add(&mut self, mut x: f64) {
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    fn value(&self) -> f64 {
        let p = &self.partials;
        let Some(mut n) = p.len().checked_sub(1) else {
            return 0.0;
        };
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            n -= 1;
            let x = hi;
            let y = p[n];
            hi = x + y;
            lo = y - (hi - x);
            if lo != 0.0 {
                break;
            }
        }
        // The remaining partials can only matter when `lo` leaves `hi`
        // exactly halfway between two doubles.
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
        hi
    }
}

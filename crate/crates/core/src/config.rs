//! The five-parameter block format descriptor.

use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported explicit mantissa width. Keeps mantissa products exact
/// in both `f64` and the 128-bit accumulator of the dot-product model.
pub const MAX_MANTISSA_BITS: u32 = 26;

/// Largest supported second-level scale width (shifts up to 63).
pub const MAX_SUB_SCALE_BITS: u32 = 6;

/// How the first-level scale `s` of a block is represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleKind {
    /// Hardware-managed shared exponent, `s = 2^E`.
    PowerOfTwo,
    /// Software-maintained high-precision (FP32) scale.
    HighPrecisionSoftware,
    /// Integer scale.
    Integer,
}

/// How the second-level sub-scales `ss_i` are represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubScaleKind {
    /// No second level (conventional block floating point).
    None,
    /// Shared microexponent: a right shift of up to `2^d2 - 1`.
    PowerOfTwo,
    /// Integer sub-scale per group (VSQ-style).
    Integer,
    /// A private exponent per element (scalar floating point, `k2 = 1`).
    PerElementExponent,
}

/// A point in the two-level block design space.
///
/// `m` counts explicit magnitude bits in the form `b0.b1…b(m-1)` (no implicit
/// leading one); every element additionally carries a sign bit. `d1` bits
/// encode the first-level scale shared by `k1` elements and `d2` bits encode
/// each sub-scale shared by `k2` elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BdrConfig {
    pub m: u32,
    pub d1: u32,
    pub d2: u32,
    pub k1: usize,
    pub k2: usize,
    pub scale_kind: ScaleKind,
    pub sub_scale_kind: SubScaleKind,
}

impl BdrConfig {
    /// A hardware-scaled configuration: power-of-two scale, power-of-two
    /// sub-scales when `d2 > 0`. For `d2 = 0` the sub-block size is
    /// irrelevant and is normalised to `k1`.
    pub fn new(m: u32, d1: u32, d2: u32, k1: usize, k2: usize) -> Result<Self> {
        let cfg = BdrConfig {
            m,
            d1,
            d2,
            k1,
            k2: if d2 == 0 { k1 } else { k2 },
            scale_kind: ScaleKind::PowerOfTwo,
            sub_scale_kind: if d2 == 0 {
                SubScaleKind::None
            } else {
                SubScaleKind::PowerOfTwo
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Conventional single-level block floating point with an 8-bit shared
    /// exponent.
    pub fn bfp(m: u32, k1: usize) -> Result<Self> {
        Self::new(m, 8, 0, k1, k1)
    }

    pub fn mx9() -> Self {
        Self::mx(7)
    }

    pub fn mx6() -> Self {
        Self::mx(4)
    }

    pub fn mx4() -> Self {
        Self::mx(2)
    }

    fn mx(m: u32) -> Self {
        BdrConfig {
            m,
            d1: 8,
            d2: 1,
            k1: 16,
            k2: 2,
            scale_kind: ScaleKind::PowerOfTwo,
            sub_scale_kind: SubScaleKind::PowerOfTwo,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.k1 == 0 || self.k2 == 0 {
            return bad(format!("k1={} and k2={} must be at least 1", self.k1, self.k2));
        }
        if !self.k1.is_multiple_of(self.k2) {
            return bad(format!("k2={} does not divide k1={}", self.k2, self.k1));
        }
        if self.m == 0 || self.m > MAX_MANTISSA_BITS {
            return bad(format!("m={} outside [1, {MAX_MANTISSA_BITS}]", self.m));
        }
        if self.d1 > 8 {
            return bad(format!("d1={} outside [0, 8]", self.d1));
        }
        if self.d2 > MAX_SUB_SCALE_BITS {
            return bad(format!("d2={} outside [0, {MAX_SUB_SCALE_BITS}]", self.d2));
        }
        if self.d2 == 0 && self.sub_scale_kind != SubScaleKind::None {
            return bad("d2 = 0 requires sub-scale kind `none`".into());
        }
        if self.d2 > 0 && self.sub_scale_kind == SubScaleKind::None {
            return bad("d2 > 0 requires a sub-scale kind".into());
        }
        Ok(())
    }

    /// Whether the block codec in [`crate::codec`] can encode this
    /// configuration (hardware power-of-two scales at both levels).
    pub fn is_hardware_scaled(&self) -> bool {
        self.scale_kind == ScaleKind::PowerOfTwo
            && matches!(
                self.sub_scale_kind,
                SubScaleKind::None | SubScaleKind::PowerOfTwo
            )
    }

    /// Largest sub-block shift, `2^d2 - 1`.
    pub fn beta(&self) -> u32 {
        (1u32 << self.d2) - 1
    }

    pub fn subblocks(&self) -> usize {
        self.k1 / self.k2
    }

    /// `(m + 1) + d1/k1 + d2/k2`, exactly.
    pub fn bits_per_element(&self) -> Ratio<u64> {
        Ratio::from_integer(u64::from(self.m) + 1)
            + Ratio::new(u64::from(self.d1), self.k1 as u64)
            + Ratio::new(u64::from(self.d2), self.k2 as u64)
    }

    /// Smallest encodable shared exponent (`-127` for an 8-bit field).
    pub fn min_exponent(&self) -> i32 {
        if self.d1 == 0 {
            0
        } else {
            1 - (1i32 << (self.d1 - 1))
        }
    }

    /// Largest encodable shared exponent (`128` for an 8-bit field).
    pub fn max_exponent(&self) -> i32 {
        if self.d1 == 0 {
            0
        } else {
            1i32 << (self.d1 - 1)
        }
    }

    /// Largest mantissa code, `2^m - 1`.
    pub fn max_mantissa(&self) -> u32 {
        (1u32 << self.m) - 1
    }
}

impl fmt::Display for BdrConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "BDR(m={}, d1={}, d2={}, k1={}, k2={})",
            self.m, self.d1, self.d2, self.k1, self.k2
        )
    }
}

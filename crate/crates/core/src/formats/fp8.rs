//! Scalar 8-bit floating point, E4M3 and E5M2.
//!
//! E4M3: bias 7, no infinities, `S.1111.111` is NaN, max finite 448.
//! E5M2: bias 15, IEEE-style infinities and NaNs, max finite 57344.
//! Encoding rounds to nearest-even and saturates to the largest finite
//! value instead of overflowing to infinity.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::codec::{exponent_of, ldexp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Fp8Variant {
    E4M3,
    E5M2,
}

impl Fp8Variant {
    pub const fn exponent_bits(self) -> u32 {
        match self {
            Fp8Variant::E4M3 => 4,
            Fp8Variant::E5M2 => 5,
        }
    }

    pub const fn mantissa_bits(self) -> u32 {
        match self {
            Fp8Variant::E4M3 => 3,
            Fp8Variant::E5M2 => 2,
        }
    }

    pub const fn bias(self) -> i32 {
        match self {
            Fp8Variant::E4M3 => 7,
            Fp8Variant::E5M2 => 15,
        }
    }

    pub const fn max_finite(self) -> f64 {
        match self {
            Fp8Variant::E4M3 => 448.0,
            Fp8Variant::E5M2 => 57344.0,
        }
    }

    const fn max_finite_bits(self) -> u8 {
        match self {
            Fp8Variant::E4M3 => 0x7e,
            Fp8Variant::E5M2 => 0x7b,
        }
    }

    const fn nan_bits(self) -> u8 {
        match self {
            Fp8Variant::E4M3 => 0x7f,
            Fp8Variant::E5M2 => 0x7e,
        }
    }

    const fn min_normal_exponent(self) -> i32 {
        1 - self.bias()
    }
}

impl fmt::Display for Fp8Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fp8Variant::E4M3 => "E4M3",
            Fp8Variant::E5M2 => "E5M2",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fp8Code {
    pub byte: u8,
    pub variant: Fp8Variant,
}

impl Fp8Code {
    pub fn is_nan(self) -> bool {
        let exp_mask = ((1u8 << self.variant.exponent_bits()) - 1) << self.variant.mantissa_bits();
        let man_mask = (1u8 << self.variant.mantissa_bits()) - 1;
        let exp_all = self.byte & exp_mask == exp_mask;
        match self.variant {
            Fp8Variant::E4M3 => exp_all && self.byte & man_mask == man_mask,
            Fp8Variant::E5M2 => exp_all && self.byte & man_mask != 0,
        }
    }

    pub fn to_f64(self) -> f64 {
        fp8_decode(self)
    }
}

/// Encodes `x / s`.
pub fn fp8_encode(x: f64, variant: Fp8Variant, s: f64) -> Result<Fp8Code> {
    if !s.is_finite() || s <= 0.0 {
        return Err(Error::InvalidScale(s));
    }
    Ok(encode_scaled(x / s, variant))
}

pub(crate) fn encode_scaled(y: f64, variant: Fp8Variant) -> Fp8Code {
    let sign = if y.is_sign_negative() { 0x80u8 } else { 0 };
    let byte = if y.is_nan() {
        variant.nan_bits()
    } else {
        sign | encode_magnitude(y.abs(), variant)
    };
    Fp8Code { byte, variant }
}

fn encode_magnitude(a: f64, variant: Fp8Variant) -> u8 {
    if a == 0.0 {
        return 0;
    }
    if a >= variant.max_finite() {
        return variant.max_finite_bits();
    }
    let mbits = variant.mantissa_bits();
    let emin = variant.min_normal_exponent();
    let mut e = exponent_of(a).max(emin);
    let mut q = ldexp(a, mbits as i32 - e).round_ties_even() as u32;
    if q == 1 << (mbits + 1) {
        e += 1;
        q = 1 << mbits;
    }
    if ldexp(f64::from(q), e - mbits as i32) > variant.max_finite() {
        return variant.max_finite_bits();
    }
    if q < 1 << mbits {
        // subnormal, e == emin
        q as u8
    } else {
        (((e + variant.bias()) as u8) << mbits) | (q - (1 << mbits)) as u8
    }
}

pub fn fp8_decode(code: Fp8Code) -> f64 {
    let v = code.variant;
    if code.is_nan() {
        return f64::NAN;
    }
    let mbits = v.mantissa_bits();
    let negative = code.byte & 0x80 != 0;
    let exp_field = i32::from((code.byte & 0x7f) >> mbits);
    let man = u32::from(code.byte & ((1 << mbits) - 1));
    let magnitude = if v == Fp8Variant::E5M2 && exp_field == 31 {
        f64::INFINITY
    } else if exp_field == 0 {
        ldexp(f64::from(man), v.min_normal_exponent() - mbits as i32)
    } else {
        ldexp(f64::from(man + (1 << mbits)), exp_field - v.bias() - mbits as i32)
    };
    if negative {
        -magnitude
    } else {
        magnitude
    }
}

/// `decode(encode(x / s)) * s`.
pub(crate) fn roundtrip(x: f64, variant: Fp8Variant, s: f64) -> f64 {
    fp8_decode(encode_scaled(x / s, variant)) * s
}

//! Catalog of concrete formats: hardware-scaled block formats (MX, MSFP,
//! BFP), software-scaled INT and FP8, and VSQ.

pub mod fp8;
pub mod int;
pub mod vsq;

use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::codec;
use crate::config::BdrConfig;
use crate::error::{Error, Result};
use crate::scale::ScaleState;

pub use fp8::{fp8_decode, fp8_encode, Fp8Code, Fp8Variant};
pub use int::{int_dequantize, int_quantize};
pub use vsq::{vsq_quantize, vsq_quantize_with_scale, VsqBlock};

/// Window length used for delayed scaling unless overridden.
pub const DEFAULT_SCALE_WINDOW: usize = 16;

/// Coarse software block size for INT and VSQ.
pub const DEFAULT_SOFTWARE_BLOCK: usize = 1024;

/// Default integer sub-scale width for `VSQ(b)`.
pub const DEFAULT_VSQ_SUB_SCALE_BITS: u32 = 4;

/// VSQ group size.
pub const DEFAULT_VSQ_GROUP: usize = 16;

/// Bits of a software-maintained FP32 scale.
const SOFTWARE_SCALE_BITS: u64 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FormatKind {
    /// Power-of-two scales at both levels, set per block in hardware.
    Block(BdrConfig),
    /// Two's-complement integers of `bits` width.
    Int { bits: u32 },
    Fp8(Fp8Variant),
    Vsq { bits: u32, d2: u32, k2: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingPolicy {
    /// Scales derived per block by the hardware codec.
    PerBlockHw,
    /// One software scale per tensor from the max over a window of past
    /// tensors (delayed scaling).
    PerTensorSwDelayed { window: usize },
    /// One software scale per `k1` elements from their own maximum.
    PerCoarseBlockSw { k1: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FormatPreset {
    pub name: String,
    pub kind: FormatKind,
    pub policy: ScalingPolicy,
}

const KNOWN: &str = "MX9, MX6, MX4, MSFP12, MSFP16, BFP(k1,m), BDR(m,k1,k2,d2), INT<b>, \
                     FP8-E4M3, FP8-E5M2, VSQ(b), VSQ(b,d2)";

fn parse_args(s: &str, prefix: &str) -> Option<Vec<u64>> {
    let inner = s.strip_prefix(prefix)?.strip_prefix('(')?.strip_suffix(')')?;
    inner.split(',').map(|p| p.trim().parse().ok()).collect()
}

/// Looks up a preset by its stable identifier (case-insensitive).
pub fn preset(name: &str) -> Result<FormatPreset> {
    let upper = name.trim().to_ascii_uppercase();
    let unknown = || Error::UnknownPreset {
        name: name.to_string(),
        known: KNOWN.to_string(),
    };
    let block = |cfg: BdrConfig| FormatPreset::block(&upper, cfg);
    match upper.as_str() {
        "MX9" => return Ok(block(BdrConfig::mx9())),
        "MX6" => return Ok(block(BdrConfig::mx6())),
        "MX4" => return Ok(block(BdrConfig::mx4())),
        "MSFP16" => return Ok(block(BdrConfig::bfp(7, 16)?)),
        "MSFP12" => return Ok(block(BdrConfig::bfp(3, 16)?)),
        "FP8-E4M3" | "E4M3" => return Ok(FormatPreset::fp8(Fp8Variant::E4M3)),
        "FP8-E5M2" | "E5M2" => return Ok(FormatPreset::fp8(Fp8Variant::E5M2)),
        _ => {}
    }
    if let Some(args) = parse_args(&upper, "BFP") {
        let [k1, m] = args[..] else { return Err(unknown()) };
        return Ok(block(BdrConfig::bfp(m as u32, k1 as usize)?));
    }
    if let Some(args) = parse_args(&upper, "BDR") {
        let [m, k1, k2, d2] = args[..] else { return Err(unknown()) };
        let cfg = BdrConfig::new(m as u32, 8, d2 as u32, k1 as usize, k2 as usize)?;
        return Ok(FormatPreset::from_config(cfg));
    }
    if let Some(args) = parse_args(&upper, "VSQ") {
        let (bits, d2) = match args[..] {
            [b] => (b as u32, DEFAULT_VSQ_SUB_SCALE_BITS),
            [b, d2] => (b as u32, d2 as u32),
            _ => return Err(unknown()),
        };
        return FormatPreset::vsq(bits, d2);
    }
    if let Some(bits) = upper.strip_prefix("INT").and_then(|b| b.parse::<u32>().ok()) {
        return FormatPreset::int(bits);
    }
    Err(unknown())
}

impl FormatPreset {
    fn block(name: &str, cfg: BdrConfig) -> Self {
        FormatPreset {
            name: name.to_string(),
            kind: FormatKind::Block(cfg),
            policy: ScalingPolicy::PerBlockHw,
        }
    }

    /// A hardware-scaled preset named after its well-known alias when one
    /// exists, otherwise `BDR(m,k1,k2,d2)`.
    pub fn from_config(cfg: BdrConfig) -> Self {
        let alias = [
            ("MX9", BdrConfig::mx9()),
            ("MX6", BdrConfig::mx6()),
            ("MX4", BdrConfig::mx4()),
        ]
        .into_iter()
        .chain(BdrConfig::bfp(7, 16).ok().map(|c| ("MSFP16", c)))
        .chain(BdrConfig::bfp(3, 16).ok().map(|c| ("MSFP12", c)))
        .find(|(_, c)| *c == cfg)
        .map(|(n, _)| n.to_string());
        let name = alias.unwrap_or_else(|| format!("BDR({},{},{},{})", cfg.m, cfg.k1, cfg.k2, cfg.d2));
        Self::block(&name, cfg)
    }

    pub fn fp8(variant: Fp8Variant) -> Self {
        FormatPreset {
            name: format!("FP8-{variant}"),
            kind: FormatKind::Fp8(variant),
            policy: ScalingPolicy::PerTensorSwDelayed {
                window: DEFAULT_SCALE_WINDOW,
            },
        }
    }

    pub fn int(bits: u32) -> Result<Self> {
        if !(2..=16).contains(&bits) {
            return Err(Error::InvalidConfig(format!("INT width {bits} outside [2, 16]")));
        }
        Ok(FormatPreset {
            name: format!("INT{bits}"),
            kind: FormatKind::Int { bits },
            policy: ScalingPolicy::PerTensorSwDelayed {
                window: DEFAULT_SCALE_WINDOW,
            },
        })
    }

    pub fn vsq(bits: u32, d2: u32) -> Result<Self> {
        if !(2..=16).contains(&bits) || d2 > 16 {
            return Err(Error::InvalidConfig(format!("VSQ({bits},{d2}) out of range")));
        }
        Ok(FormatPreset {
            name: format!("VSQ({bits},{d2})"),
            kind: FormatKind::Vsq {
                bits,
                d2,
                k2: DEFAULT_VSQ_GROUP,
            },
            policy: ScalingPolicy::PerTensorSwDelayed {
                window: DEFAULT_SCALE_WINDOW,
            },
        })
    }

    /// Replaces the scaling policy of a software-scaled preset.
    pub fn with_policy(mut self, policy: ScalingPolicy) -> Result<Self> {
        let hw = matches!(self.kind, FormatKind::Block(_));
        let ok = match policy {
            ScalingPolicy::PerBlockHw => hw,
            ScalingPolicy::PerTensorSwDelayed { window } => !hw && window > 0,
            ScalingPolicy::PerCoarseBlockSw { k1 } => {
                !hw && k1 > 0 && self.group().is_none_or(|g| k1 % g == 0)
            }
        };
        if !ok {
            return Err(Error::InvalidConfig(format!(
                "policy {policy:?} not applicable to {}",
                self.name
            )));
        }
        self.policy = policy;
        Ok(self)
    }

    fn group(&self) -> Option<usize> {
        match self.kind {
            FormatKind::Vsq { k2, .. } => Some(k2),
            _ => None,
        }
    }

    pub fn block_config(&self) -> Option<&BdrConfig> {
        match &self.kind {
            FormatKind::Block(cfg) => Some(cfg),
            _ => None,
        }
    }

    /// Elements sharing the first-level scale, where that is bounded.
    pub fn first_level_block(&self) -> Option<usize> {
        match (&self.kind, self.policy) {
            (FormatKind::Block(cfg), _) => Some(cfg.k1),
            (_, ScalingPolicy::PerCoarseBlockSw { k1 }) => Some(k1),
            _ => None,
        }
    }

    /// Storage cost per element. Per-tensor software scales are amortised
    /// over the whole tensor and contribute nothing.
    pub fn bits_per_element(&self) -> Ratio<u64> {
        let elem = match self.kind {
            FormatKind::Block(cfg) => return cfg.bits_per_element(),
            FormatKind::Int { bits } => Ratio::from_integer(u64::from(bits)),
            FormatKind::Fp8(_) => Ratio::from_integer(8),
            FormatKind::Vsq { bits, d2, k2 } => {
                Ratio::from_integer(u64::from(bits)) + Ratio::new(u64::from(d2), k2 as u64)
            }
        };
        match self.policy {
            ScalingPolicy::PerCoarseBlockSw { k1 } => elem + Ratio::new(SOFTWARE_SCALE_BITS, k1 as u64),
            _ => elem,
        }
    }

    /// Largest magnitude representable at unit software scale; the delayed
    /// scale maps the observed maximum onto it.
    pub fn format_max(&self) -> f64 {
        match self.kind {
            FormatKind::Block(_) => 1.0,
            FormatKind::Int { bits } => int::int_range(bits).1 as f64,
            FormatKind::Fp8(v) => v.max_finite(),
            FormatKind::Vsq { bits, d2, .. } => {
                int::int_range(bits).1 as f64 * f64::from(vsq::max_sub_scale(d2))
            }
        }
    }

    /// Software scale aligning `amax` to [`Self::format_max`].
    pub fn scale_for_amax(&self, amax: f64) -> f64 {
        if amax > 0.0 {
            amax / self.format_max()
        } else {
            1.0
        }
    }

    /// Quantize-dequantize one tensor (flattened). `scale` is the
    /// per-tensor software scale and is ignored by the other policies.
    pub fn roundtrip_into(&self, x: &[f64], scale: f64, out: &mut [f64]) -> Result<()> {
        if x.len() != out.len() {
            return Err(Error::LengthMismatch {
                left: x.len(),
                right: out.len(),
            });
        }
        if let Some(index) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index, value: x[index] });
        }
        match self.policy {
            ScalingPolicy::PerBlockHw => {
                let FormatKind::Block(cfg) = &self.kind else { unreachable!() };
                for (c, o) in x.chunks(cfg.k1).zip(out.chunks_mut(cfg.k1)) {
                    let amax = c.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                    codec::fake_quantize_unchecked(c, o, amax, cfg);
                }
            }
            ScalingPolicy::PerTensorSwDelayed { .. } => {
                if !scale.is_finite() || scale <= 0.0 {
                    return Err(Error::InvalidScale(scale));
                }
                self.software_roundtrip(x, scale, out)?;
            }
            ScalingPolicy::PerCoarseBlockSw { k1 } => {
                for (c, o) in x.chunks(k1).zip(out.chunks_mut(k1)) {
                    let amax = c.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                    self.software_roundtrip(c, self.scale_for_amax(amax), o)?;
                }
            }
        }
        Ok(())
    }

    pub fn roundtrip(&self, x: &[f64], scale: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; x.len()];
        self.roundtrip_into(x, scale, &mut out)?;
        Ok(out)
    }

    fn software_roundtrip(&self, x: &[f64], s: f64, out: &mut [f64]) -> Result<()> {
        match self.kind {
            FormatKind::Block(_) => unreachable!("block formats are hardware scaled"),
            FormatKind::Int { bits } => {
                let (lo, hi) = int::int_range(bits);
                for (&v, o) in x.iter().zip(out.iter_mut()) {
                    *o = s * int::round_to_int(v / s, lo, hi) as f64;
                }
            }
            FormatKind::Fp8(variant) => {
                for (&v, o) in x.iter().zip(out.iter_mut()) {
                    *o = fp8::roundtrip(v, variant, s);
                }
            }
            FormatKind::Vsq { bits, d2, k2 } => {
                if !x.len().is_multiple_of(k2) {
                    let mut padded = x.to_vec();
                    padded.resize(x.len().div_ceil(k2) * k2, 0.0);
                    let mut tmp = vec![0.0; padded.len()];
                    vsq::roundtrip_into(&padded, bits, d2, k2, s, &mut tmp);
                    out.copy_from_slice(&tmp[..x.len()]);
                } else {
                    vsq::roundtrip_into(x, bits, d2, k2, s, out);
                }
            }
        }
        Ok(())
    }

    /// Delayed scales for a sequence of tensors with the given maxima; the
    /// scale for tensor `i` covers observations `i - window + 1 ..= i`.
    pub fn delayed_scales(&self, amaxes: &[f64]) -> Result<Vec<f64>> {
        let window = match self.policy {
            ScalingPolicy::PerTensorSwDelayed { window } => window,
            _ => 1,
        };
        let mut state = ScaleState::new(window)?;
        let fmax = self.format_max();
        amaxes
            .iter()
            .map(|&a| crate::scale::delayed_scale(&mut state, a, fmax))
            .collect()
    }
}

impl fmt::Display for FormatPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

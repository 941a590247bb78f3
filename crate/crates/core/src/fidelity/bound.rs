//! Analytical QSNR lower bound for two-level power-of-two block formats.
//!
//! Every element of a block is within half a step of its grid, and a step is
//! at most `2^(E-m)`, shrinking by `2^-τ` in a sub-block shifted by `τ`. The
//! largest element sets `E`, so the block has at least `2^(2E-2)` of signal
//! power; any sub-block shifted by the full `β` has every element below
//! `2^(E-β)`. Balancing the two gives
//!
//! ```text
//! QSNR ≥ 6.02·m + 10·log10( 2^(2β) / (min(N, k1) + (2^(2β) − 1)·k2) )
//! ```
//!
//! for any input distribution, with `N` the vector length.

use serde::{Deserialize, Serialize};

use crate::config::BdrConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundParams {
    /// Vector length.
    pub n: usize,
    pub m: u32,
    pub k1: usize,
    pub k2: usize,
    /// Largest sub-block shift, `2^d2 − 1`.
    pub beta: u32,
}

impl BoundParams {
    pub fn new(n: usize, m: u32, k1: usize, k2: usize, d2: u32) -> Result<Self> {
        let cfg = BdrConfig::new(m, 8, d2, k1, k2)?;
        Self::from_config(&cfg, n)
    }

    pub fn from_config(cfg: &BdrConfig, n: usize) -> Result<Self> {
        cfg.validate()?;
        if n == 0 {
            return Err(Error::Empty);
        }
        Ok(BoundParams {
            n,
            m: cfg.m,
            k1: cfg.k1,
            k2: cfg.k2,
            beta: cfg.beta(),
        })
    }
}

/// Evaluates the bound in decibels.
pub fn theorem1_bound(p: &BoundParams) -> f64 {
    let gain = 2f64.powi(2 * p.beta as i32);
    let denom = p.n.min(p.k1) as f64 + (gain - 1.0) * p.k2 as f64;
    6.02 * f64::from(p.m) + 10.0 * (gain / denom).log10()
}

//! Independent oracles shared by the integration suites. Nothing here calls
//! into the library's internals; each routine re-derives its answer from
//! the format definitions.

#![allow(dead_code)]

use bdr::{BdrConfig, QuantizedBlock};

pub fn pow2(k: i32) -> f64 {
    2f64.powi(k)
}

/// Shared exponent as the smallest `E` (at least `E_min`) for which the
/// block maximum rounds to a code that fits in `m` bits at LSB `E - m + 1`.
pub fn oracle_shared_exponent(x: &[f64], cfg: &BdrConfig) -> i32 {
    let amax = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if amax == 0.0 {
        return cfg.min_exponent();
    }
    let limit = f64::from(cfg.max_mantissa());
    let mut e = (amax.log2().floor() as i32 - 2).max(cfg.min_exponent());
    while e < cfg.max_exponent() && (amax * pow2(cfg.m as i32 - 1 - e)).round_ties_even() > limit {
        e += 1;
    }
    e
}

/// Nearest-even onto `{0, …, 2^m − 1} · 2^lsb`, clamped.
pub fn oracle_round(v: f64, lsb: i32, m: u32) -> f64 {
    let code = (v.abs() * pow2(-lsb)).round_ties_even().min(f64::from((1u32 << m) - 1));
    v.signum() * code * pow2(lsb)
}

/// Whether `v` fits the grid at `lsb` without clamping.
pub fn fits(v: f64, lsb: i32, m: u32) -> bool {
    (v.abs() * pow2(-lsb)).round_ties_even() <= f64::from((1u32 << m) - 1)
}

/// Single-level block floating point, written from the definition.
pub fn oracle_bfp(x: &[f64], m: u32, k1: usize) -> Vec<f64> {
    let cfg = BdrConfig::bfp(m, k1).unwrap();
    x.chunks(k1)
        .flat_map(|b| {
            let lsb = oracle_shared_exponent(b, &cfg) - (m as i32 - 1);
            b.iter().map(move |&v| oracle_round(v, lsb, m)).collect::<Vec<_>>()
        })
        .map(|v: f64| if v == 0.0 { 0.0 } else { v })
        .collect()
}

pub fn sq_err(x: &[f64], q: &[f64]) -> f64 {
    x.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Which links of the error-analysis inequality chain a block satisfies.
#[derive(Debug, Default, Clone, Copy)]
pub struct Chain {
    /// `|Q(x_i) − x_i| ≤ 2^(E−τ_i−m)` for every element.
    pub per_element: bool,
    /// Total squared error within the `r_τ`-weighted budget.
    pub noise_sum: bool,
    /// `‖x‖² ≥ Σ_{τ<β} r_τ·2^(2(E−τ))`.
    pub signal_floor: bool,
    /// The same floor scaled by `(1 − 2^(−m−1))²`.
    pub signal_floor_relaxed: bool,
    /// Noise-to-signal ratio within the `r_τ` form of the bound.
    pub nsr: bool,
    pub nsr_relaxed: bool,
    /// Noise-to-signal ratio within `(k1 + (2^(2β) − 1)·k2) / 2^(2β) · 2^(−2m)`.
    pub closed_form: bool,
    /// A sub-block maximum rounded up into the next binade.
    pub carried: bool,
}

/// Evaluates the chain for one non-zero block encoded as `q`.
pub fn error_chain(x: &[f64], block: &QuantizedBlock, deq: &[f64], cfg: &BdrConfig) -> Chain {
    let m = cfg.m as i32;
    let e = block.shared_exp;
    let beta = cfg.beta() as i32;
    let mut c = Chain {
        per_element: true,
        ..Chain::default()
    };
    for (sub, chunk) in x.chunks(cfg.k2).enumerate() {
        let tau = i32::from(block.shifts[sub]);
        for (i, &v) in chunk.iter().enumerate() {
            let idx = sub * cfg.k2 + i;
            if (deq[idx] - v).abs() > pow2(e - tau - m) {
                c.per_element = false;
            }
        }
        let amax = chunk.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if (tau < beta || beta == 0) && amax < pow2(e - tau) {
            c.carried = true;
        }
    }
    // r_τ for τ < β
    let mut r = vec![0usize; beta.max(1) as usize];
    for &t in &block.shifts {
        if i32::from(t) < beta {
            r[t as usize] += 1;
        }
    }
    let noise = sq_err(x, deq);
    let signal: f64 = x.iter().map(|v| v * v).sum();
    let g = pow2(2 * beta);
    let weighted: f64 = (0..beta).map(|t| r[t as usize] as f64 * (pow2(2 * (beta - t)) - 1.0)).sum::<f64>()
        * cfg.k2 as f64;
    let budget = (cfg.k1 as f64 + weighted) / g * pow2(2 * e - 2 * m);
    c.noise_sum = noise <= budget;
    let floor: f64 = (0..beta).map(|t| r[t as usize] as f64 * pow2(2 * (e - t))).sum();
    let relax = (1.0 - pow2(-m - 1)).powi(2);
    if beta == 0 {
        // single level: the anchor alone carries at least 2^(2E)
        let floor = pow2(2 * e);
        c.signal_floor = signal >= floor;
        c.signal_floor_relaxed = signal >= floor * relax;
        let bound = cfg.k1 as f64 * pow2(-2 * m);
        c.nsr = noise / signal <= bound;
        c.nsr_relaxed = noise / signal <= bound / relax;
    } else {
        c.signal_floor = signal >= floor;
        c.signal_floor_relaxed = signal >= floor * relax;
        let denom: f64 = (0..beta).map(|t| r[t as usize] as f64 * pow2(2 * (beta - t))).sum();
        let nsr_bound = (cfg.k1 as f64 + weighted) * pow2(-2 * m) / denom;
        c.nsr = noise / signal <= nsr_bound;
        c.nsr_relaxed = noise / signal <= nsr_bound / relax;
    }
    let closed = (cfg.k1 as f64 + (g - 1.0) * cfg.k2 as f64) / g * pow2(-2 * m);
    c.closed_form = noise / signal <= closed;
    c
}

/// Calls `f` with every length-`k` tuple over `values` (odometer order).
pub fn for_each_tuple(values: &[f64], k: usize, mut f: impl FnMut(&[f64])) {
    let mut idx = vec![0usize; k];
    let mut buf = vec![values[0]; k];
    loop {
        for (b, &i) in buf.iter_mut().zip(&idx) {
            *b = values[i];
        }
        f(&buf);
        let mut d = 0;
        loop {
            if d == k {
                return;
            }
            idx[d] += 1;
            if idx[d] < values.len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// Magnitudes with at most `m` significant bits whose exponents lie in
/// `lo..=hi`, plus zero. Such values never round up into a new binade.
pub fn coarse_grid(m: u32, lo: i32, hi: i32) -> Vec<f64> {
    let mut v = vec![0.0];
    for e in lo..=hi {
        for c in (1u32 << (m - 1))..(1u32 << m) {
            v.push(f64::from(c) * pow2(e - (m as i32 - 1)));
        }
    }
    v
}

/// Multiples of `2^-bits` in `[0, 2)`: enough precision to exercise
/// rounding and carries for `m ≤ bits`.
pub fn fine_grid(bits: u32) -> Vec<f64> {
    (0..(2u32 << bits)).map(|k| f64::from(k) * pow2(-(bits as i32))).collect()
}

/// The tiny geometries exercised exhaustively.
pub fn tiny_configs() -> Vec<BdrConfig> {
    let mut out = Vec::new();
    for m in 1..=3 {
        for (d2, k1, k2) in [(0, 2, 2), (0, 4, 4), (1, 2, 1), (1, 4, 1), (1, 4, 2), (2, 4, 1), (2, 4, 2), (2, 2, 1)] {
            out.push(BdrConfig::new(m, 8, d2, k1, k2).unwrap());
        }
    }
    out
}

//! Memory and silicon cost of formats, and Pareto extraction over
//! (QSNR, cost).
//!
//! Silicon area comes from a structural proxy: a gate-equivalent count of
//! the block dot-product datapath in [`crate::dot`], using textbook cell
//! weights (NAND2 = 1). It tracks how area scales with mantissa width,
//! block sizes and shift span; it is not a synthesis result. Real numbers
//! can replace it through an [`AreaTable`].

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::config::BdrConfig;
use crate::dot::{default_acc_bits, partial_width, SCALAR_ACC_BITS};
use crate::error::{Error, Result};
use crate::formats::{FormatKind, FormatPreset, ScalingPolicy};

/// Elements per tile when measuring packing.
pub const DEFAULT_TILE: usize = 256;
/// Memory interface width, 64 bytes.
pub const DEFAULT_LINE_BITS: usize = 512;
/// Reduction length used for area comparisons unless given.
pub const DEFAULT_REDUCTION: usize = 256;
/// Name of the normalization baseline in area tables and cost points.
pub const BASELINE_NAME: &str = "FP8";

mod gate {
    pub const AND2: f64 = 1.33;
    pub const XOR2: f64 = 2.33;
    pub const MUX2: f64 = 2.33;
    pub const HALF_ADDER: f64 = 3.0;
    pub const FULL_ADDER: f64 = 6.0;
}

fn ceil_log2(n: usize) -> u32 {
    n.next_power_of_two().trailing_zeros()
}

/// Fraction of the memory lines used by one tile. Blocks are packed as a
/// contiguous bit stream and may straddle line boundaries.
pub fn packing_efficiency(fmt: &FormatPreset, tile: usize, line_bits: usize) -> Result<f64> {
    if tile == 0 || line_bits == 0 {
        return Err(Error::Geometry("tile and line width must be positive".into()));
    }
    if let Some(k1) = fmt.first_level_block() {
        if !tile.is_multiple_of(k1) {
            return Err(Error::Geometry(format!("tile {tile} is not a multiple of k1={k1}")));
        }
    }
    let bits = fmt.bits_per_element() * num_rational::Ratio::from_integer(tile as u64);
    if !bits.is_integer() {
        return Err(Error::Geometry(format!("tile {tile} of {} is not a whole number of bits", fmt.name)));
    }
    let total = *bits.numer() as usize;
    let lines = total.div_ceil(line_bits);
    Ok(total as f64 / (lines * line_bits) as f64)
}

/// Inverse packing efficiency for the default 256-element tile and 64-byte
/// line.
pub fn memory_cost(fmt: &FormatPreset) -> Result<f64> {
    Ok(1.0 / packing_efficiency(fmt, DEFAULT_TILE, DEFAULT_LINE_BITS)?)
}

/// Cost of a ripple-carry adder tree reducing `n` operands of width `w`,
/// growing one bit per level.
fn adder_tree(n: usize, w: u32) -> f64 {
    let mut cost = 0.0;
    let mut count = n;
    let mut width = w;
    while count > 1 {
        let adders = count / 2;
        cost += adders as f64 * f64::from(width) * gate::FULL_ADDER;
        count -= adders;
        width += 1;
    }
    cost
}

/// Array multiplier for `a`×`b` magnitude bits.
fn multiplier(a: u32, b: u32) -> f64 {
    let (a, b) = (f64::from(a), f64::from(b));
    a * b * gate::AND2 + (a * b - a - b).max(0.0) * gate::FULL_ADDER + a.min(b) * gate::HALF_ADDER
}

/// Logarithmic shifter of `width` bits over shift amounts `0..=span`.
fn barrel_shifter(width: u32, span: u32) -> f64 {
    f64::from(width) * f64::from(32 - span.leading_zeros()) * gate::MUX2
}

/// Applying a sign to a `w`-bit magnitude: conditional invert and increment.
fn negate(w: u32) -> f64 {
    f64::from(w) * (gate::XOR2 + gate::HALF_ADDER)
}

fn adder(w: u32) -> f64 {
    f64::from(w) * gate::FULL_ADDER
}

/// Structure of one reduction unit, independent of the numeric format.
#[derive(Debug, Clone, Copy)]
struct Datapath {
    /// Multiplier operand width (magnitude bits).
    mult_bits: u32,
    /// Per-block exponent width; 0 when there is no alignment stage.
    exp_bits: u32,
    k1: usize,
    k2: usize,
    d2: u32,
    beta: u32,
    /// Accumulator width.
    f: u32,
    /// Width of the exact block partial.
    partial: u32,
    /// Width of an integer sub-scale multiplied into each sub-block sum
    /// (VSQ); 0 for shift-based sub-scales.
    sub_scale_mult: u32,
}

impl Datapath {
    fn from_block(cfg: &BdrConfig) -> Self {
        Datapath {
            mult_bits: cfg.m,
            exp_bits: cfg.d1,
            k1: cfg.k1,
            k2: cfg.k2,
            d2: cfg.d2,
            beta: cfg.beta(),
            f: default_acc_bits(cfg),
            partial: partial_width(cfg),
            sub_scale_mult: 0,
        }
    }

    /// The FP8 baseline: one unit able to run both E4M3 and E5M2, hence a
    /// 4-bit significand multiplier (implicit bit included) and 5-bit
    /// exponents, accumulating in 25 bits.
    fn fp8() -> Self {
        Datapath {
            mult_bits: 4,
            exp_bits: 5,
            k1: 1,
            k2: 1,
            d2: 0,
            beta: 0,
            f: SCALAR_ACC_BITS,
            partial: 2 * 4 + 1,
            sub_scale_mult: 0,
        }
    }

    fn area(&self, r: usize) -> f64 {
        let blocks = r / self.k1;
        let subs = self.k1 / self.k2;
        let prod = 2 * self.mult_bits;
        let sub_sum = prod + ceil_log2(self.k2) + 1;

        let mut per_block = self.k1 as f64 * (multiplier(self.mult_bits, self.mult_bits) + gate::XOR2 + negate(prod));
        per_block += subs as f64 * adder_tree(self.k2, prod + 1);
        if self.d2 > 0 && self.sub_scale_mult == 0 {
            // τ_A + τ_B, then a left shift of up to 2β into the block partial
            per_block += subs as f64 * (adder(self.d2 + 1) + barrel_shifter(sub_sum + 2 * self.beta, 2 * self.beta));
        }
        if self.sub_scale_mult > 0 {
            per_block += subs as f64
                * (multiplier(self.sub_scale_mult, self.sub_scale_mult)
                    + multiplier(sub_sum, 2 * self.sub_scale_mult));
        }
        per_block += adder_tree(subs, self.partial.saturating_sub(ceil_log2(subs)));

        let mut total = blocks as f64 * per_block;
        if self.exp_bits > 0 && blocks > 1 {
            let e = self.exp_bits + 1;
            total += blocks as f64 * adder(e); // E_A + E_B
            total += (blocks - 1) as f64 * (adder(e) + f64::from(e) * gate::MUX2); // max tree
            total += blocks as f64 * adder(e + 1); // X_max − X_b
            total += blocks as f64 * barrel_shifter(self.f, self.f);
            total += adder_tree(blocks, self.f);
        } else if blocks > 1 {
            total += adder_tree(blocks, self.partial);
        }
        total
    }
}

fn datapath(fmt: &FormatPreset, r: usize) -> Result<Datapath> {
    let coarse = match fmt.policy {
        ScalingPolicy::PerCoarseBlockSw { k1 } => Some(k1),
        _ => None,
    };
    // Software scales are applied outside the reduction, except that a
    // per-coarse-block scale turns every block partial into a value with
    // its own FP32 exponent that must be aligned like a hardware block.
    let (exp_bits, k1) = match coarse {
        Some(k1) => (8, k1),
        None => (0, r),
    };
    let int_path = |bits: u32, k2: usize, sub_scale_mult: u32| {
        let mag = bits - 1;
        let prod = 2 * mag;
        let partial = prod + ceil_log2(k1) + 2 * sub_scale_mult + 1;
        Datapath {
            mult_bits: mag,
            exp_bits,
            k1,
            k2,
            d2: 0,
            beta: 0,
            f: partial.min(SCALAR_ACC_BITS),
            partial,
            sub_scale_mult,
        }
    };
    let dp = match fmt.kind {
        FormatKind::Block(cfg) => Datapath::from_block(&cfg),
        FormatKind::Fp8(_) => Datapath::fp8(),
        FormatKind::Int { bits } => int_path(bits, k1, 0),
        FormatKind::Vsq { bits, d2, k2 } => {
            if k1 % k2 != 0 {
                return Err(Error::Geometry(format!("VSQ group {k2} does not divide {k1}")));
            }
            int_path(bits, k2, d2)
        }
    };
    if r == 0 || !r.is_multiple_of(dp.k1) {
        return Err(Error::Geometry(format!("reduction {r} is not a multiple of k1={}", dp.k1)));
    }
    Ok(dp)
}

/// Gate-equivalent area of a dot-product unit for `fmt` reducing `r`
/// elements per cycle.
pub fn area_proxy(fmt: &FormatPreset, r: usize) -> Result<f64> {
    Ok(datapath(fmt, r)?.area(r))
}

/// Area of the FP8 baseline at reduction length `r`.
pub fn baseline_area(r: usize) -> Result<f64> {
    if r == 0 {
        return Err(Error::Geometry("reduction length must be positive".into()));
    }
    Ok(Datapath::fp8().area(r))
}

/// [`area_proxy`] divided by the FP8 baseline at the same `r`.
pub fn normalized_area(fmt: &FormatPreset, r: usize) -> Result<f64> {
    Ok(area_proxy(fmt, r)? / baseline_area(r)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostPoint {
    pub name: String,
    pub qsnr_db: f64,
    /// Area relative to the FP8 baseline.
    pub area: f64,
    /// Inverse packing efficiency.
    pub mem_cost: f64,
    /// `area · mem_cost`.
    pub combined: f64,
}

impl CostPoint {
    pub fn new(name: impl Into<String>, qsnr_db: f64, area: f64, mem_cost: f64) -> Result<Self> {
        if !(area > 0.0 && area.is_finite() && mem_cost > 0.0 && mem_cost.is_finite()) {
            return Err(Error::InvalidConfig(format!("cost factors must be positive, got {area} and {mem_cost}")));
        }
        if qsnr_db.is_nan() {
            return Err(Error::InvalidConfig("QSNR is NaN".into()));
        }
        Ok(CostPoint {
            name: name.into(),
            qsnr_db,
            area,
            mem_cost,
            combined: area * mem_cost,
        })
    }

    /// Evaluates `fmt` with the structural proxy at reduction `r`.
    pub fn for_format(fmt: &FormatPreset, qsnr_db: f64, r: usize) -> Result<Self> {
        CostPoint::new(fmt.name.clone(), qsnr_db, normalized_area(fmt, r)?, memory_cost(fmt)?)
    }

    /// Whether `self` is at least as good on both axes and better on one.
    pub fn dominates(&self, other: &CostPoint) -> bool {
        self.qsnr_db >= other.qsnr_db
            && self.combined <= other.combined
            && (self.qsnr_db > other.qsnr_db || self.combined < other.combined)
    }
}

pub const COST_CSV_HEADER: [&str; 5] = ["name", "qsnr_db", "area", "mem_cost", "combined"];

pub fn write_cost_points_csv<W: Write>(out: W, points: &[CostPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COST_CSV_HEADER)?;
    for p in points {
        w.write_record([
            p.name.clone(),
            crate::fidelity::format_db(p.qsnr_db),
            p.area.to_string(),
            p.mem_cost.to_string(),
            p.combined.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_cost_points_csv<R: Read>(input: R) -> Result<Vec<CostPoint>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != COST_CSV_HEADER {
        return Err(Error::MalformedCsv(format!("expected header {}", COST_CSV_HEADER.join(","))));
    }
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec[i].trim().parse().map_err(|_| {
                Error::MalformedCsv(format!("row {}: bad number `{}` in column {}", line + 1, &rec[i], COST_CSV_HEADER[i]))
            })
        };
        let p = CostPoint::new(rec[0].to_string(), num(1)?, num(2)?, num(3)?)?;
        out.push(p);
    }
    Ok(out)
}

/// Points not dominated in (higher QSNR, lower combined cost), ordered by
/// combined cost, then by descending QSNR, then by input order. Exact
/// duplicates are all kept.
pub fn pareto_frontier(points: &[CostPoint]) -> Vec<CostPoint> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (&points[i], &points[j]);
        a.combined
            .total_cmp(&b.combined)
            .then(b.qsnr_db.total_cmp(&a.qsnr_db))
            .then(i.cmp(&j))
    });
    let mut front: Vec<CostPoint> = Vec::new();
    for i in order {
        let p = &points[i];
        let keep = match front.last() {
            None => true,
            Some(best) => {
                p.qsnr_db > best.qsnr_db || (p.qsnr_db == best.qsnr_db && p.combined == best.combined)
            }
        };
        if keep {
            front.push(p.clone());
        }
    }
    front
}

/// Externally measured areas keyed by format name and reduction length.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AreaTable {
    pub entries: BTreeMap<(String, usize), f64>,
    /// Where the numbers came from, e.g. the file they were loaded from.
    pub provenance: String,
}

impl AreaTable {
    pub const CSV_HEADER: [&'static str; 3] = ["format", "r", "area_units"];

    pub fn from_csv<R: Read>(input: R, provenance: impl Into<String>) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        if rdr.headers()?.iter().collect::<Vec<_>>() != Self::CSV_HEADER {
            return Err(Error::MalformedCsv(format!("expected header {}", Self::CSV_HEADER.join(","))));
        }
        let mut entries = BTreeMap::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| Error::MalformedCsv(format!("row {}: bad {what}", line + 1));
            let r: usize = rec[1].trim().parse().map_err(|_| bad("r"))?;
            let area: f64 = rec[2].trim().parse().map_err(|_| bad("area_units"))?;
            if !(area > 0.0 && area.is_finite()) {
                return Err(bad("area_units"));
            }
            if entries.insert((rec[0].trim().to_string(), r), area).is_some() {
                return Err(Error::MalformedCsv(format!("row {}: duplicate entry {}@{r}", line + 1, &rec[0])));
            }
        }
        Ok(AreaTable {
            entries,
            provenance: provenance.into(),
        })
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(file, path.display().to_string())
    }

    pub fn get(&self, format: &str, r: usize) -> Option<f64> {
        self.entries.get(&(format.to_string(), r)).copied()
    }

    /// Area of `format` relative to the table's FP8 entry at the same `r`.
    pub fn normalized(&self, format: &str, r: usize) -> Result<Option<f64>> {
        let base = self.get(BASELINE_NAME, r).ok_or_else(|| {
            Error::MalformedCsv(format!("{}: no {BASELINE_NAME} entry for r={r}", self.provenance))
        })?;
        Ok(self.get(format, r).map(|a| a / base))
    }

    /// Replaces proxy areas with table areas wherever the table has an
    /// entry. Returns the names that kept their proxy area.
    pub fn renormalize(&self, points: &mut [CostPoint], r: usize) -> Result<Vec<String>> {
        let mut missing = Vec::new();
        for p in points.iter_mut() {
            match self.normalized(&p.name, r)? {
                Some(area) => {
                    p.area = area;
                    p.combined = area * p.mem_cost;
                }
                None => missing.push(p.name.clone()),
            }
        }
        Ok(missing)
    }
}

//! Design-space sweeps over two-level block formats plus baselines.
//!
//! Rows are evaluated in a fixed enumeration order and appended to the
//! output CSV one at a time, so an interrupted sweep resumes where it
//! stopped and a finished one is byte-identical across runs. A sidecar
//! file `<out>.spec.json` records the spec a partial output belongs to;
//! resuming with a different spec is refused.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::BdrConfig;
use crate::cost::{read_cost_points_csv, write_cost_points_csv, CostPoint, COST_CSV_HEADER, DEFAULT_REDUCTION};
use crate::error::{Error, Result};
use crate::fidelity::{estimate_qsnr, DistributionSpec, DEFAULT_VECTOR_LEN};
use crate::formats::{FormatPreset, Fp8Variant, ScalingPolicy, DEFAULT_SCALE_WINDOW};

/// Vectors per configuration in the default sweep.
pub const DEFAULT_SWEEP_VECTORS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub ms: Vec<u32>,
    pub d2s: Vec<u32>,
    pub k1s: Vec<usize>,
    pub k2s: Vec<usize>,
    /// Shared-exponent width of every swept configuration.
    pub d1: u32,
    /// Add FP8, INT and VSQ rows after the swept block formats.
    pub baselines: bool,
    /// Scaling policies applied to every software-scaled baseline.
    pub software_policies: Vec<ScalingPolicy>,
    pub dist: DistributionSpec,
    pub n_vectors: usize,
    pub vec_len: usize,
    /// Reduction length for the area model.
    pub r: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            ms: (2..=8).collect(),
            d2s: (0..=4).collect(),
            k1s: vec![4, 8, 16, 32, 64, 128, 256],
            k2s: vec![1, 2, 4, 8, 16],
            d1: 8,
            baselines: true,
            software_policies: vec![ScalingPolicy::PerTensorSwDelayed {
                window: DEFAULT_SCALE_WINDOW,
            }],
            dist: DistributionSpec::gaussian_variable_variance(0),
            n_vectors: DEFAULT_SWEEP_VECTORS,
            vec_len: DEFAULT_VECTOR_LEN,
            r: DEFAULT_REDUCTION,
        }
    }
}

/// The concrete formats a spec expands to.
#[derive(Debug, Clone, Default)]
pub struct SweepPlan {
    pub formats: Vec<FormatPreset>,
    /// Grid points that fail validation, with the reason.
    pub invalid: Vec<(String, String)>,
    /// Grid points equivalent to an earlier one: `k2` is meaningless when
    /// `d2 = 0`, and a single sub-block (`k2 = k1`) never shifts.
    pub redundant: usize,
}

fn policy_suffix(p: ScalingPolicy) -> String {
    match p {
        ScalingPolicy::PerTensorSwDelayed { window } if window == DEFAULT_SCALE_WINDOW => String::new(),
        ScalingPolicy::PerTensorSwDelayed { window } => format!("@window{window}"),
        ScalingPolicy::PerCoarseBlockSw { k1 } => format!("@block{k1}"),
        ScalingPolicy::PerBlockHw => "@hw".into(),
    }
}

impl SweepSpec {
    pub fn plan(&self) -> SweepPlan {
        let mut plan = SweepPlan::default();
        for &m in &self.ms {
            for &d2 in &self.d2s {
                for &k1 in &self.k1s {
                    let mut k2s: Vec<usize> = if d2 == 0 { vec![k1] } else { self.k2s.clone() };
                    if d2 == 0 {
                        plan.redundant += self.k2s.len().saturating_sub(1);
                    }
                    k2s.dedup();
                    for k2 in k2s {
                        let label = format!("BDR({m},{k1},{k2},{d2})");
                        if d2 > 0 && k2 == k1 {
                            plan.redundant += 1;
                            continue;
                        }
                        match BdrConfig::new(m, self.d1, d2, k1, k2) {
                            Ok(cfg) => plan.formats.push(FormatPreset::from_config(cfg)),
                            Err(e) => plan.invalid.push((label, e.to_string())),
                        }
                    }
                }
            }
        }
        if self.baselines {
            let mut soft = vec![
                FormatPreset::fp8(Fp8Variant::E4M3),
                FormatPreset::fp8(Fp8Variant::E5M2),
            ];
            for bits in [8, 4] {
                soft.extend(FormatPreset::int(bits));
            }
            for bits in [4, 6, 8] {
                for d2 in [4, 6, 8, 10] {
                    soft.extend(FormatPreset::vsq(bits, d2));
                }
            }
            for p in &self.software_policies {
                for f in &soft {
                    match f.clone().with_policy(*p) {
                        Ok(mut g) => {
                            g.name.push_str(&policy_suffix(*p));
                            plan.formats.push(g);
                        }
                        Err(e) => plan.invalid.push((f.name.clone(), e.to_string())),
                    }
                }
            }
        }
        plan
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_vectors == 0 || self.vec_len == 0 || self.r == 0 {
            return Err(Error::InvalidConfig("n_vectors, vec_len and r must be positive".into()));
        }
        self.dist.validate()
    }
}

/// Measures and costs one format.
pub fn evaluate(fmt: &FormatPreset, spec: &SweepSpec) -> Result<CostPoint> {
    let report = estimate_qsnr(fmt, &spec.dist, spec.n_vectors, spec.vec_len)?;
    CostPoint::for_format(fmt, report.mean_db, spec.r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepProgress {
    pub done: usize,
    pub total: usize,
    /// Rows found in the output from an earlier run.
    pub resumed: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepSummary {
    pub rows: usize,
    pub resumed: usize,
    pub invalid: usize,
    pub redundant: usize,
}

/// Evaluates every planned format in memory.
pub fn sweep_points(spec: &SweepSpec) -> Result<Vec<CostPoint>> {
    spec.validate()?;
    spec.plan().formats.iter().map(|f| evaluate(f, spec)).collect()
}

fn sidecar(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".spec.json");
    PathBuf::from(s)
}

/// Rows already completed in `out`, truncating a trailing partial line.
fn completed_rows(out: &Path, spec_json: &str, names: &[String]) -> Result<usize> {
    let side = sidecar(out);
    let stored = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    if stored != spec_json {
        return Err(Error::InvalidConfig(format!(
            "{} belongs to a different sweep spec; remove it or choose another output",
            out.display()
        )));
    }
    let file = File::open(out).map_err(|e| Error::io(out, e))?;
    let mut reader = BufReader::new(file);
    let mut complete_bytes = 0u64;
    let mut lines = Vec::new();
    let mut buf = String::new();
    loop {
        buf.clear();
        let n = reader.read_line(&mut buf).map_err(|e| Error::io(out, e))?;
        if n == 0 || !buf.ends_with('\n') {
            break;
        }
        complete_bytes += n as u64;
        lines.push(buf.clone());
    }
    let text: String = lines.concat();
    let points = if text.is_empty() {
        Vec::new()
    } else {
        read_cost_points_csv(text.as_bytes())?
    };
    for (p, expect) in points.iter().zip(names) {
        if &p.name != expect {
            return Err(Error::MalformedCsv(format!(
                "{}: row `{}` where `{expect}` was expected",
                out.display(),
                p.name
            )));
        }
    }
    if points.len() > names.len() {
        return Err(Error::MalformedCsv(format!("{} has more rows than the plan", out.display())));
    }
    let file = OpenOptions::new().write(true).open(out).map_err(|e| Error::io(out, e))?;
    file.set_len(complete_bytes).map_err(|e| Error::io(out, e))?;
    Ok(points.len())
}

/// Runs the sweep, appending rows to the CSV at `out` and resuming from any
/// rows a previous run of the same spec already wrote.
pub fn run_sweep(
    spec: &SweepSpec,
    out: &Path,
    mut progress: impl FnMut(SweepProgress),
) -> Result<SweepSummary> {
    spec.validate()?;
    let plan = spec.plan();
    let names: Vec<String> = plan.formats.iter().map(|f| f.name.clone()).collect();
    let spec_json = serde_json::to_string_pretty(spec).expect("spec serializes");
    let resumed = if out.exists() && sidecar(out).exists() {
        completed_rows(out, &spec_json, &names)?
    } else {
        let side = sidecar(out);
        std::fs::write(&side, &spec_json).map_err(|e| Error::io(&side, e))?;
        let file = File::create(out).map_err(|e| Error::io(out, e))?;
        write_cost_points_csv(file, &[])?;
        0
    };
    let total = plan.formats.len();
    let mut file = OpenOptions::new().append(true).open(out).map_err(|e| Error::io(out, e))?;
    progress(SweepProgress { done: resumed, total, resumed });
    for (i, fmt) in plan.formats.iter().enumerate().skip(resumed) {
        let point = evaluate(fmt, spec)?;
        let mut row = Vec::new();
        write_cost_points_csv(&mut row, &[point])?;
        let header_len = COST_CSV_HEADER.join(",").len() + 1;
        file.write_all(&row[header_len..]).map_err(|e| Error::io(out, e))?;
        file.flush().map_err(|e| Error::io(out, e))?;
        progress(SweepProgress { done: i + 1, total, resumed });
    }
    file.sync_all().map_err(|e| Error::io(out, e))?;
    Ok(SweepSummary {
        rows: total,
        resumed,
        invalid: plan.invalid.len(),
        redundant: plan.redundant,
    })
}

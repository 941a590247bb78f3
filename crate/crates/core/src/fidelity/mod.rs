//! Quantization signal-to-noise ratio: measurement, sampling, and the
//! analytical lower bound.

pub mod bound;
pub mod dist;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{FormatPreset, ScalingPolicy};

pub use bound::{theorem1_bound, BoundParams};
pub use dist::{sample_vector, sample_vector_at, DistributionKind, DistributionSpec, SampleRng};

/// Vector length used when none is given.
pub const DEFAULT_VECTOR_LEN: usize = 1024;

/// `-10·log10(‖q − x‖² / ‖x‖²)`; `+∞` when `q == x`.
pub fn qsnr(x: &[f64], q: &[f64]) -> Result<f64> {
    let (noise, signal) = noise_and_signal(x, q)?;
    if signal == 0.0 {
        return Err(Error::ZeroSignal);
    }
    Ok(ratio_db(noise, signal))
}

fn ratio_db(noise: f64, signal: f64) -> f64 {
    if noise == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * (noise / signal).log10()
    }
}

fn noise_and_signal(x: &[f64], q: &[f64]) -> Result<(f64, f64)> {
    if x.len() != q.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: q.len(),
        });
    }
    let mut noise = 0.0;
    let mut signal = 0.0;
    for (&a, &b) in x.iter().zip(q) {
        let d = b - a;
        noise += d * d;
        signal += a * a;
    }
    Ok((noise, signal))
}

/// How per-vector measurements are combined into `mean_db`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Averaging {
    /// Mean of per-vector decibel values.
    #[default]
    Decibel,
    /// Total noise energy over total signal energy, then decibels.
    PooledEnergy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QsnrReport {
    pub format: String,
    pub distribution: String,
    pub n_vectors: usize,
    pub vec_len: usize,
    /// `+∞` only if every vector was reproduced exactly.
    pub mean_db: f64,
    pub std_db: f64,
    /// Standard error of `mean_db` across vectors.
    pub sem_db: f64,
    /// Vectors reproduced exactly; they are left out of the mean and
    /// standard deviation.
    pub exact_vectors: usize,
    pub seed: u64,
}

impl QsnrReport {
    pub const CSV_HEADER: [&'static str; 7] =
        ["format", "distribution", "n", "len", "mean_db", "std_db", "seed"];

    pub fn csv_record(&self) -> [String; 7] {
        [
            self.format.clone(),
            self.distribution.clone(),
            self.n_vectors.to_string(),
            self.vec_len.to_string(),
            format_db(self.mean_db),
            format_db(self.std_db),
            self.seed.to_string(),
        ]
    }
}

/// Shortest round-trip text, `inf` for the exact sentinel.
pub fn format_db(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else {
        format!("{v}")
    }
}

pub fn write_reports_csv<W: Write>(out: W, reports: &[QsnrReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(QsnrReport::CSV_HEADER)?;
    for r in reports {
        w.write_record(r.csv_record())?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Per-vector `(noise energy, signal energy)` for vectors `0..n_vectors` of
/// `dist`, each passed through `fmt` with its scaling policy. Delayed
/// scaling treats the vectors as successive tensors of one stream.
pub fn measure_vectors(
    fmt: &FormatPreset,
    dist: &DistributionSpec,
    n_vectors: usize,
    vec_len: usize,
) -> Result<Vec<(f64, f64)>> {
    if n_vectors == 0 || vec_len == 0 {
        return Err(Error::Empty);
    }
    dist.validate()?;
    let scales = match fmt.policy {
        ScalingPolicy::PerTensorSwDelayed { .. } => {
            let amaxes: Vec<f64> = (0..n_vectors)
                .into_par_iter()
                .map(|i| {
                    sample_vector_at(dist, i as u64, vec_len)
                        .iter()
                        .fold(0.0f64, |a, v| a.max(v.abs()))
                })
                .collect();
            fmt.delayed_scales(&amaxes)?
        }
        _ => vec![1.0; n_vectors],
    };
    (0..n_vectors)
        .into_par_iter()
        .map(|i| {
            let x = sample_vector_at(dist, i as u64, vec_len);
            let q = fmt.roundtrip(&x, scales[i])?;
            noise_and_signal(&x, &q)
        })
        .collect()
}

/// Per-vector QSNR in decibels.
pub fn per_vector_qsnr(
    fmt: &FormatPreset,
    dist: &DistributionSpec,
    n_vectors: usize,
    vec_len: usize,
) -> Result<Vec<f64>> {
    measure_vectors(fmt, dist, n_vectors, vec_len)?
        .into_iter()
        .map(|(noise, signal)| {
            if signal == 0.0 {
                Err(Error::ZeroSignal)
            } else {
                Ok(ratio_db(noise, signal))
            }
        })
        .collect()
}

/// Average QSNR of `fmt` over `n_vectors` independent vectors. Bitwise
/// reproducible for a given seed regardless of thread count.
pub fn estimate_qsnr(
    fmt: &FormatPreset,
    dist: &DistributionSpec,
    n_vectors: usize,
    vec_len: usize,
) -> Result<QsnrReport> {
    estimate_qsnr_with(fmt, dist, n_vectors, vec_len, Averaging::Decibel)
}

pub fn estimate_qsnr_with(
    fmt: &FormatPreset,
    dist: &DistributionSpec,
    n_vectors: usize,
    vec_len: usize,
    averaging: Averaging,
) -> Result<QsnrReport> {
    let energies = measure_vectors(fmt, dist, n_vectors, vec_len)?;
    if energies.iter().any(|&(_, s)| s == 0.0) {
        return Err(Error::ZeroSignal);
    }
    let finite: Vec<f64> = energies
        .iter()
        .map(|&(n, s)| ratio_db(n, s))
        .filter(|v| v.is_finite())
        .collect();
    let exact_vectors = n_vectors - finite.len();
    let (mean, std) = mean_std(&finite);
    let mean_db = match averaging {
        Averaging::Decibel => mean,
        Averaging::PooledEnergy => {
            let noise: f64 = energies.iter().map(|e| e.0).sum();
            let signal: f64 = energies.iter().map(|e| e.1).sum();
            ratio_db(noise, signal)
        }
    };
    Ok(QsnrReport {
        format: fmt.name.clone(),
        distribution: dist.to_string(),
        n_vectors,
        vec_len,
        mean_db,
        std_db: std,
        sem_db: if finite.is_empty() {
            0.0
        } else {
            std / (finite.len() as f64).sqrt()
        },
        exact_vectors,
        seed: dist.seed,
    })
}

/// Mean and sample standard deviation; `(+∞, 0)` for no values.
fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::INFINITY, 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() == 1 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

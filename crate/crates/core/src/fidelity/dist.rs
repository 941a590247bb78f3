//! Seeded data generators.
//!
//! Streams come from xoshiro256++ whose state is filled by SplitMix64, so any
//! reimplementation with the same two generators, the same uniform mapping
//! (`(u >> 11) * 2^-53`) and the same Box–Muller transform reproduces every
//! sample bit for bit. Vector `i` of a run gets its own generator, derived
//! from the run seed and the counter `i`, which makes each vector independent
//! of how the run is scheduled.

use std::f64::consts::TAU;
use std::fmt;

use rand_core::{Rng, SeedableRng};
use rand_xoshiro::{SplitMix64, Xoshiro256PlusPlus};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DistributionKind {
    /// `N(0, σ²)` with `σ = |N(0, 1)|` redrawn for every vector.
    GaussianVariableVariance,
    GaussianFixed { sigma: f64 },
    /// Uniform on `[-half_width, half_width]`.
    Uniform { half_width: f64 },
    /// `±exp(N(mu, sigma²))` with a fair random sign.
    Lognormal { mu: f64, sigma: f64 },
    /// A fraction `ratio` of elements have magnitude `big`, the rest `small`,
    /// interleaved as evenly as possible, with random signs. Designed to make
    /// the shared exponent as unhelpful as possible for the small elements.
    TwoMagnitude { big: f64, small: f64, ratio: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub kind: DistributionKind,
    pub seed: u64,
}

impl DistributionSpec {
    pub fn new(kind: DistributionKind, seed: u64) -> Result<Self> {
        let spec = DistributionSpec { kind, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn gaussian_variable_variance(seed: u64) -> Self {
        DistributionSpec {
            kind: DistributionKind::GaussianVariableVariance,
            seed,
        }
    }

    /// One instance of every kind with representative parameters.
    pub fn all_kinds(seed: u64) -> Vec<DistributionSpec> {
        [
            DistributionKind::GaussianVariableVariance,
            DistributionKind::GaussianFixed { sigma: 1.0 },
            DistributionKind::Uniform { half_width: 1.0 },
            DistributionKind::Lognormal { mu: 0.0, sigma: 2.0 },
            DistributionKind::TwoMagnitude {
                big: 1.0,
                small: 2f64.powi(-20),
                ratio: 0.125,
            },
        ]
        .into_iter()
        .map(|kind| DistributionSpec { kind, seed })
        .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        let ok = match self.kind {
            DistributionKind::GaussianVariableVariance => true,
            DistributionKind::GaussianFixed { sigma } => pos(sigma),
            DistributionKind::Uniform { half_width } => pos(half_width),
            DistributionKind::Lognormal { mu, sigma } => mu.is_finite() && pos(sigma),
            DistributionKind::TwoMagnitude { big, small, ratio } => {
                pos(big) && pos(small) && ratio > 0.0 && ratio <= 1.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid distribution parameters: {self}")))
        }
    }

    /// Parses `name` or `name:p1,p2,...`, e.g. `gaussian-fixed:2.0` or
    /// `two-magnitude:1,1e-6,0.5`.
    pub fn parse(text: &str, seed: u64) -> Result<Self> {
        let (name, args) = text.split_once(':').unwrap_or((text, ""));
        let params: Vec<f64> = if args.is_empty() {
            Vec::new()
        } else {
            args.split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidConfig(format!("distribution parameter: {e}")))?
        };
        let bad = || Error::InvalidConfig(format!("unknown distribution `{text}`"));
        let kind = match (name.trim(), params.as_slice()) {
            ("gaussian-variable-variance" | "gvv", []) => DistributionKind::GaussianVariableVariance,
            ("gaussian-fixed" | "gaussian", []) => DistributionKind::GaussianFixed { sigma: 1.0 },
            ("gaussian-fixed" | "gaussian", &[sigma]) => DistributionKind::GaussianFixed { sigma },
            ("uniform", []) => DistributionKind::Uniform { half_width: 1.0 },
            ("uniform", &[half_width]) => DistributionKind::Uniform { half_width },
            ("lognormal", []) => DistributionKind::Lognormal { mu: 0.0, sigma: 1.0 },
            ("lognormal", &[mu, sigma]) => DistributionKind::Lognormal { mu, sigma },
            ("two-magnitude", []) => DistributionKind::TwoMagnitude {
                big: 1.0,
                small: 2f64.powi(-20),
                ratio: 0.5,
            },
            ("two-magnitude", &[big, small, ratio]) => DistributionKind::TwoMagnitude { big, small, ratio },
            _ => return Err(bad()),
        };
        DistributionSpec::new(kind, seed)
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            DistributionKind::GaussianVariableVariance => write!(f, "gaussian-variable-variance"),
            DistributionKind::GaussianFixed { sigma } => write!(f, "gaussian-fixed:{sigma}"),
            DistributionKind::Uniform { half_width } => write!(f, "uniform:{half_width}"),
            DistributionKind::Lognormal { mu, sigma } => write!(f, "lognormal:{mu},{sigma}"),
            DistributionKind::TwoMagnitude { big, small, ratio } => {
                write!(f, "two-magnitude:{big},{small},{ratio}")
            }
        }
    }
}

/// The generator for vector `index` of a run seeded with `seed`.
pub fn vector_rng(seed: u64, index: u64) -> SampleRng {
    let salt = SplitMix64::seed_from_u64(index).next_u64();
    let derived = SplitMix64::seed_from_u64(seed ^ salt).next_u64();
    SampleRng::new(derived)
}

/// Uniform and Gaussian draws on top of xoshiro256++.
#[derive(Debug, Clone)]
pub struct SampleRng {
    inner: Xoshiro256PlusPlus,
    spare: Option<f64>,
}

impl SampleRng {
    pub fn new(seed: u64) -> Self {
        SampleRng {
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
            spare: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * f64::EPSILON / 2.0
    }

    /// Standard normal via Box–Muller; the second value of each pair is
    /// returned by the next call.
    pub fn gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform(); // (0, 1]
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (TAU * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }

    pub fn sign(&mut self) -> f64 {
        if self.next_u64() >> 63 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Draws vector `index` of the run described by `dist`.
pub fn sample_vector_at(dist: &DistributionSpec, index: u64, len: usize) -> Vec<f64> {
    let mut rng = vector_rng(dist.seed, index);
    match dist.kind {
        DistributionKind::GaussianVariableVariance => {
            let sigma = rng.gaussian().abs();
            (0..len).map(|_| sigma * rng.gaussian()).collect()
        }
        DistributionKind::GaussianFixed { sigma } => (0..len).map(|_| sigma * rng.gaussian()).collect(),
        DistributionKind::Uniform { half_width } => {
            (0..len).map(|_| half_width * (2.0 * rng.uniform() - 1.0)).collect()
        }
        DistributionKind::Lognormal { mu, sigma } => (0..len)
            .map(|_| rng.sign() * (mu + sigma * rng.gaussian()).exp())
            .collect(),
        DistributionKind::TwoMagnitude { big, small, ratio } => (0..len)
            .map(|i| {
                let is_big = ((i + 1) as f64 * ratio).floor() > (i as f64 * ratio).floor();
                rng.sign() * if is_big { big } else { small }
            })
            .collect(),
    }
}

/// The first vector of the run, `sample_vector_at(dist, 0, len)`.
pub fn sample_vector(dist: &DistributionSpec, len: usize) -> Vec<f64> {
    sample_vector_at(dist, 0, len)
}

use bdr::fidelity::{estimate_qsnr, per_vector_qsnr, qsnr, sample_vector_at, theorem1_bound, BoundParams, DistributionSpec};
use bdr::formats::{preset, FormatPreset};
use bdr::{fake_quantize, BdrConfig};
use statrs::distribution::{ContinuousCDF, Normal};

/// Kolmogorov–Smirnov statistic of `sample` against `cdf`.
fn ks_statistic(mut sample: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((((i + 1) as f64) / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn variable_variance_sigmas_are_half_normal() {
    let dist = DistributionSpec::gaussian_variable_variance(11);
    let n = 10_000;
    let len = 4096;
    let sigmas: Vec<f64> = (0..n)
        .map(|i| {
            let v = sample_vector_at(&dist, i as u64, len);
            (v.iter().map(|x| x * x).sum::<f64>() / len as f64).sqrt()
        })
        .collect();
    let normal = Normal::new(0.0, 1.0).unwrap();
    let d = ks_statistic(sigmas, |x| 2.0 * normal.cdf(x) - 1.0);
    // 1% critical value 1.63/sqrt(n)
    assert!(d < 1.63 / (n as f64).sqrt(), "KS statistic {d}");
}

#[test]
fn fixed_gaussian_is_standard_normal() {
    let dist = DistributionSpec::parse("gaussian-fixed:1", 5).unwrap();
    let sample: Vec<f64> = (0..20).flat_map(|i| sample_vector_at(&dist, i, 500)).collect();
    let normal = Normal::new(0.0, 1.0).unwrap();
    let d = ks_statistic(sample, |x| normal.cdf(x));
    assert!(d < 1.63 / 100.0, "KS statistic {d}");
}

/// Small deterministic generator for picking configurations.
fn configs(count: usize, seed: u64) -> Vec<BdrConfig> {
    let mut rng = bdr::fidelity::SampleRng::new(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let m = 1 + (rng.next_u64() % 10) as u32;
        let d2 = (rng.next_u64() % 4) as u32;
        let k1 = 1usize << (rng.next_u64() % 8);
        let k2 = if d2 == 0 { k1 } else { 1usize << (rng.next_u64() % 5) };
        if let Ok(cfg) = BdrConfig::new(m, 8, d2, k1, k2) {
            out.push(cfg);
        }
    }
    out
}

#[test]
fn bound_dominates_sampled_configs() {
    for cfg in configs(40, 1) {
        let fmt = FormatPreset::from_config(cfg);
        for dist in DistributionSpec::all_kinds(3) {
            let len = 256;
            let bound = theorem1_bound(&BoundParams::from_config(&cfg, len).unwrap());
            for q in per_vector_qsnr(&fmt, &dist, 20, len).unwrap() {
                assert!(q >= bound, "{cfg} {dist}: {q} < {bound}");
            }
        }
    }
}

#[test]
fn qsnr_grows_six_db_per_mantissa_bit() {
    let dist = DistributionSpec::gaussian_variable_variance(2);
    let points: Vec<(f64, f64)> = (2..=8)
        .map(|m| {
            let fmt = FormatPreset::from_config(BdrConfig::new(m, 8, 1, 16, 2).unwrap());
            (f64::from(m), estimate_qsnr(&fmt, &dist, 500, 1024).unwrap().mean_db)
        })
        .collect();
    let slope = least_squares_slope(&points);
    assert!((slope - 6.02).abs() <= 0.5, "slope {slope}");
}

pub fn least_squares_slope(p: &[(f64, f64)]) -> f64 {
    let n = p.len() as f64;
    let mx = p.iter().map(|q| q.0).sum::<f64>() / n;
    let my = p.iter().map(|q| q.1).sum::<f64>() / n;
    let sxy: f64 = p.iter().map(|q| (q.0 - mx) * (q.1 - my)).sum();
    let sxx: f64 = p.iter().map(|q| (q.0 - mx) * (q.0 - mx)).sum();
    sxy / sxx
}

#[test]
fn qsnr_does_not_improve_with_larger_blocks() {
    let dist = DistributionSpec::gaussian_variable_variance(4);
    let measure = |cfg: BdrConfig| estimate_qsnr(&FormatPreset::from_config(cfg), &dist, 400, 1024).unwrap();
    for m in [3, 5, 7] {
        let by_k1: Vec<_> = [4, 8, 16, 32, 64, 128, 256]
            .iter()
            .map(|&k1| measure(BdrConfig::new(m, 8, 1, k1, 2).unwrap()))
            .collect();
        for w in by_k1.windows(2) {
            assert!(w[1].mean_db <= w[0].mean_db + w[0].sem_db, "m={m} k1: {w:?}");
        }
        let by_k2: Vec<_> = [1, 2, 4, 8, 16]
            .iter()
            .map(|&k2| measure(BdrConfig::new(m, 8, 1, 32, k2).unwrap()))
            .collect();
        for w in by_k2.windows(2) {
            assert!(w[1].mean_db <= w[0].mean_db + w[0].sem_db, "m={m} k2: {w:?}");
        }
    }
}

#[test]
fn power_of_two_scaling_leaves_qsnr_unchanged() {
    for name in ["MX9", "MX6", "MX4", "MSFP12", "BFP(32,5)"] {
        let cfg = *preset(name).unwrap().block_config().unwrap();
        for dist in DistributionSpec::all_kinds(8) {
            for i in 0..10 {
                let x = sample_vector_at(&dist, i, 256);
                let base = qsnr(&x, &fake_quantize(&x, &cfg).unwrap()).unwrap();
                for j in [-40, -3, 5, 60] {
                    let y: Vec<f64> = x.iter().map(|v| v * 2f64.powi(j)).collect();
                    assert_eq!(qsnr(&y, &fake_quantize(&y, &cfg).unwrap()).unwrap(), base, "{name} {dist} 2^{j}");
                }
            }
        }
    }
}

#[test]
fn result_does_not_depend_on_thread_count() {
    let dist = DistributionSpec::gaussian_variable_variance(6);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                ["MX6", "FP8-E4M3", "VSQ(4)"]
                    .map(|n| estimate_qsnr(&preset(n).unwrap(), &dist, 300, 512).unwrap())
            })
    };
    assert_eq!(run(1), run(4));
}

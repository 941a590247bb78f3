mod common;

use bdr::formats::{preset, vsq_quantize};
use bdr::{
    dequantize_block, fake_quantize, fake_quantize_block, quantize_block, quantize_tensor_along_axis,
    BdrConfig, Tensor,
};
use common::*;
use proptest::prelude::*;

fn config() -> impl Strategy<Value = BdrConfig> {
    (1u32..=10, 0u32..=3, 0usize..=4, 0usize..=4).prop_filter_map("k2 must divide k1", |(m, d2, a, b)| {
        let k1 = 1usize << a;
        let k2 = if d2 == 0 { k1 } else { 1usize << b.min(a) };
        BdrConfig::new(m, 8, d2, k1, k2).ok()
    })
}

/// Finite values spanning many binades, with exact zeros mixed in.
fn value() -> impl Strategy<Value = f64> {
    prop_oneof![
        1 => Just(0.0),
        8 => (-1.0f64..1.0, -30i32..30).prop_map(|(v, e)| v * pow2(e)),
    ]
}

fn block_for(cfg: BdrConfig) -> impl Strategy<Value = (BdrConfig, Vec<f64>)> {
    proptest::collection::vec(value(), cfg.k1).prop_map(move |x| (cfg, x))
}

fn case() -> impl Strategy<Value = (BdrConfig, Vec<f64>)> {
    config().prop_flat_map(block_for)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn requantizing_is_identity((cfg, x) in case()) {
        let once = fake_quantize(&x, &cfg).unwrap();
        let twice = fake_quantize(&once, &cfg).unwrap();
        prop_assert_eq!(
            once.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            twice.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn power_of_two_scaling_commutes((cfg, x) in case(), j in -20i32..20) {
        let s = pow2(j);
        let scaled: Vec<f64> = x.iter().map(|v| v * s).collect();
        let a: Vec<f64> = fake_quantize(&x, &cfg).unwrap().iter().map(|v| v * s).collect();
        let b = fake_quantize(&scaled, &cfg).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn fake_path_matches_encode_decode((cfg, x) in case()) {
        let q = quantize_block(&x, &cfg).unwrap();
        let full = dequantize_block(&q, &cfg);
        let mut fast = vec![0.0; x.len()];
        fake_quantize_block(&x, &mut fast, &cfg).unwrap();
        prop_assert_eq!(
            full.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            fast.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn zero_padding_is_neutral((cfg, x) in case(), keep in 1usize..16) {
        let keep = keep.min(cfg.k1);
        let mut padded = x.clone();
        padded[keep..].iter_mut().for_each(|v| *v = 0.0);
        let full = fake_quantize(&padded, &cfg).unwrap();
        let short = fake_quantize(&x[..keep], &cfg).unwrap();
        prop_assert_eq!(&full[..keep], &short[..]);
        prop_assert!(full[keep..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn per_element_error_within_half_step((cfg, x) in case()) {
        let q = quantize_block(&x, &cfg).unwrap();
        let d = dequantize_block(&q, &cfg);
        let m = cfg.m as i32;
        for (i, (a, b)) in x.iter().zip(&d).enumerate() {
            let tau = i32::from(q.shifts[i / cfg.k2]);
            let saturated = q.codes[i].magnitude == cfg.max_mantissa();
            let step = pow2(q.shared_exp - tau - m);
            let limit = if saturated { 2.0 * step } else { step };
            // below the smallest exponent the grid is fixed and the bound is
            // relative to it
            prop_assert!((a - b).abs() <= limit, "{} {:?} i={}", cfg, x, i);
        }
    }

    #[test]
    fn single_level_matches_reference_bfp(m in 1u32..=12, a in 0usize..=5, x in proptest::collection::vec(value(), 1..100)) {
        let k1 = 1usize << a;
        let cfg = BdrConfig::bfp(m, k1).unwrap();
        prop_assert_eq!(fake_quantize(&x, &cfg).unwrap(), oracle_bfp(&x, m, k1));
    }

    #[test]
    fn shared_exponent_matches_oracle((cfg, x) in case()) {
        let q = quantize_block(&x, &cfg).unwrap();
        prop_assert_eq!(q.shared_exp, oracle_shared_exponent(&x, &cfg));
    }

    #[test]
    fn shifts_are_largest_unclamped((cfg, x) in case()) {
        let q = quantize_block(&x, &cfg).unwrap();
        if x.iter().all(|&v| v == 0.0) {
            return Ok(());
        }
        for (sub, chunk) in x.chunks(cfg.k2).enumerate() {
            let tau = i32::from(q.shifts[sub]);
            let lsb = |t: i32| q.shared_exp - t - (cfg.m as i32 - 1);
            prop_assert!(chunk.iter().all(|&v| fits(v, lsb(tau), cfg.m)));
            if tau < cfg.beta() as i32 {
                prop_assert!(!chunk.iter().all(|&v| fits(v, lsb(tau + 1), cfg.m)) || chunk.iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn software_presets_are_idempotent(name in prop_oneof![Just("INT8"), Just("INT4"), Just("FP8-E4M3"), Just("FP8-E5M2")],
                                       x in proptest::collection::vec(-100.0f64..100.0, 64), s in 0.01f64..4.0) {
        let p = preset(name).unwrap();
        let once = p.roundtrip(&x, s).unwrap();
        prop_assert_eq!(p.roundtrip(&once, s).unwrap(), once);
    }

    /// Rounding sub-scales up keeps every group inside the integer range, so
    /// no element is clipped and each is within half a step.
    #[test]
    fn vsq_error_within_half_group_step(bits in 2u32..=8, d2 in 0u32..=10, a in 0usize..=4, groups in 1usize..8,
                                        x in proptest::collection::vec(value(), 128)) {
        let k2 = 1usize << a;
        let x = &x[..(k2 * groups).min(128) / k2 * k2];
        let b = vsq_quantize(x, bits, d2, k2).unwrap();
        let d = b.dequantize();
        for (i, (u, v)) in x.iter().zip(&d).enumerate() {
            let step = b.coarse_scale * f64::from(b.sub_scales[i / k2]);
            prop_assert!((u - v).abs() <= step * 0.5 * (1.0 + 1e-12), "i={} {} vs {}", i, u, v);
        }
    }
}

#[test]
fn spec_examples() {
    let cfg = BdrConfig::new(3, 8, 1, 2, 1).unwrap();
    let q = quantize_block(&[1.984375, 0.5], &cfg).unwrap();
    assert_eq!(q.shared_exp, 1);
    let cfg = BdrConfig::mx9();
    let x: Vec<f64> = (0..16).map(|i| ((i * 7919 % 200) as f64 / 100.0) - 1.0).collect();
    let q = quantize_block(&x, &cfg).unwrap();
    let d = dequantize_block(&q, &cfg);
    for (i, (a, b)) in x.iter().zip(&d).enumerate() {
        let tau = i32::from(q.shifts[i / 2]);
        assert!((a - b).abs() <= pow2(q.shared_exp - tau - 7));
    }
}

#[test]
fn directional_quantization_does_not_commute_with_transpose() {
    let n = 16;
    let data: Vec<f64> = (0..n * n).map(|i| ((i * 37 % 101) as f64 - 50.0) * if i % 17 == 0 { 64.0 } else { 1.0 }).collect();
    let t = Tensor::new(vec![n, n], data).unwrap();
    let cfg = BdrConfig::mx6();
    let rows = quantize_tensor_along_axis(&t, 1, &cfg).unwrap().dequantize();
    let cols = quantize_tensor_along_axis(&t, 0, &cfg).unwrap().dequantize();
    assert_ne!(rows, cols);
    let via_t = quantize_tensor_along_axis(&t.swap_axes(0, 1).unwrap(), 1, &cfg)
        .unwrap()
        .dequantize()
        .swap_axes(0, 1)
        .unwrap();
    assert_eq!(cols, via_t);
}

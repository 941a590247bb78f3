use std::fs::File;
use std::io::Write;
use std::path::Path;

use bdr::cost::{read_cost_points_csv, write_cost_points_csv};
use bdr::dot::quantize_and_dot;
use bdr::fidelity::{estimate_qsnr_with, per_vector_qsnr, write_reports_csv, Averaging, SampleRng};
use bdr::fidelity::dist::sample_vector_at;
use bdr::io::{load_tensor, save_tensor};
use bdr::sweep::run_sweep;
use bdr::{
    dequantize_block, pareto_frontier, preset, quantize_block, quantize_tensor_along_axis,
    reference_dot, theorem1_bound, AreaTable, BdrConfig, BoundParams, DistributionSpec, DotConfig,
    Error, FormatPreset, ScalingPolicy, SweepSpec, Tensor,
};
use serde_json::{json, Value};

use crate::{BoundArgs, DotArgs, Failure, ParetoArgs, QsnrArgs, QuantizeArgs, SweepArgs, VerifyArgs};

type CmdResult = Result<(), Failure>;

fn create(path: &Path) -> Result<File, Failure> {
    File::create(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn db_json(v: f64) -> Value {
    if v.is_infinite() {
        json!("inf")
    } else {
        json!(v)
    }
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json serializes"));
}

fn resolve_axis(axis: i64, rank: usize) -> Result<usize, Failure> {
    let resolved = if axis < 0 { rank as i64 + axis } else { axis };
    if (0..rank as i64).contains(&resolved) {
        Ok(resolved as usize)
    } else {
        Err(Failure::Usage(format!("axis {axis} out of range for rank {rank}")))
    }
}

/// Quantize-dequantize `t` with blocks running along `axis`. Software
/// formats see the tensor as a single member of its delayed-scaling stream.
fn cast(t: &Tensor, axis: usize, fmt: &FormatPreset) -> bdr::Result<Tensor> {
    if let (Some(cfg), ScalingPolicy::PerBlockHw) = (fmt.block_config(), fmt.policy) {
        return Ok(quantize_tensor_along_axis(t, axis, cfg)?.dequantize());
    }
    let last = t.shape.len() - 1;
    let moved = if axis == last { t.clone() } else { t.swap_axes(axis, last)? };
    let row = moved.shape[last];
    let amax = moved.data.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let scale = fmt.delayed_scales(&[amax])?[0];
    let mut data = vec![0.0; moved.len()];
    for (x, o) in moved.data.chunks(row).zip(data.chunks_mut(row)) {
        fmt.roundtrip_into(x, scale, o)?;
    }
    let out = Tensor::new(moved.shape, data)?;
    if axis == last {
        Ok(out)
    } else {
        out.swap_axes(axis, last)
    }
}

pub fn quantize(a: QuantizeArgs) -> CmdResult {
    let fmt = preset(&a.preset)?;
    let input = load_tensor(&a.input)?;
    let axis = resolve_axis(a.axis, input.shape.len())?;
    let out = cast(&input, axis, &fmt)?;
    save_tensor(&a.output, &out)?;
    let qsnr_db = match bdr::qsnr(&input.data, &out.data) {
        Ok(v) => db_json(v),
        Err(Error::ZeroSignal) => Value::Null,
        Err(e) => return Err(e.into()),
    };
    let max_abs_err = input
        .data
        .iter()
        .zip(&out.data)
        .fold(0.0f64, |m, (x, q)| m.max((x - q).abs()));
    let report = json!({
        "preset": fmt.name,
        "axis": axis,
        "qsnr_db": qsnr_db,
        "max_abs_err": max_abs_err,
    });
    if let Some(path) = &a.report {
        let mut f = create(path)?;
        serde_json::to_writer_pretty(&mut f, &report).map_err(|e| Failure::Data(e.to_string()))?;
        writeln!(f).map_err(|e| Failure::Data(e.to_string()))?;
    }
    print_json(&report);
    Ok(())
}

pub fn qsnr(a: QsnrArgs) -> CmdResult {
    let dist = DistributionSpec::parse(&a.dist, a.seed)?;
    let averaging = if a.pooled { Averaging::PooledEnergy } else { Averaging::Decibel };
    let reports = a
        .presets
        .iter()
        .map(|name| {
            let fmt = preset(name)?;
            estimate_qsnr_with(&fmt, &dist, a.n_vectors, a.vec_len, averaging)
        })
        .collect::<bdr::Result<Vec<_>>>()?;
    match &a.out {
        Some(path) => write_reports_csv(create(path)?, &reports)?,
        None => write_reports_csv(std::io::stdout().lock(), &reports)?,
    }
    Ok(())
}

pub fn bound(a: BoundArgs) -> CmdResult {
    let params = match &a.preset {
        Some(name) => {
            let fmt = preset(name)?;
            let cfg = fmt
                .block_config()
                .ok_or_else(|| Failure::Data(format!("{fmt} is not a block format; the bound does not apply")))?;
            BoundParams::from_config(cfg, a.n)?
        }
        None => {
            let (m, k1) = (a.m.expect("required by clap"), a.k1.expect("required by clap"));
            BoundParams::new(a.n, m, k1, a.k2.unwrap_or(k1), a.d2)?
        }
    };
    println!("{:.4}", theorem1_bound(&params));
    Ok(())
}

pub fn dot(a: DotArgs) -> CmdResult {
    let fmt = preset(&a.preset)?;
    let cfg = *fmt
        .block_config()
        .ok_or_else(|| Failure::Data(format!("{fmt} has no block dot-product datapath")))?;
    let (x, y) = match (&a.a, &a.b) {
        (Some(pa), Some(pb)) => (load_tensor(pa)?.data, load_tensor(pb)?.data),
        _ => {
            let dist = DistributionSpec::parse(&a.dist, a.seed)?;
            (sample_vector_at(&dist, 0, a.vec_len), sample_vector_at(&dist, 1, a.vec_len))
        }
    };
    let dc = match a.acc_bits {
        Some(f) => DotConfig::with_acc_bits(cfg, x.len(), f)?,
        None => DotConfig::new(cfg, x.len())?,
    };
    let got = quantize_and_dot(&x, &y, &dc)?;
    let deq = |v: &[f64]| -> bdr::Result<Vec<f64>> {
        let mut out = Vec::with_capacity(v.len());
        for c in v.chunks(cfg.k1) {
            out.extend(dequantize_block(&quantize_block(c, &cfg)?, &cfg));
        }
        Ok(out)
    };
    let on_grid = reference_dot(&deq(&x)?, &deq(&y)?)?;
    let unquantized = reference_dot(&x, &y)?;
    print_json(&json!({
        "preset": fmt.name,
        "r": dc.r,
        "acc_bits": dc.f,
        "guard_bits": dc.guard_bits(),
        "value": got.value,
        "overflow": got.overflow,
        "reference": on_grid,
        "accumulation_error": got.value - on_grid,
        "unquantized": unquantized,
    }));
    Ok(())
}

pub fn sweep(a: SweepArgs) -> CmdResult {
    let defaults = SweepSpec::default();
    let spec = SweepSpec {
        ms: a.m.unwrap_or(defaults.ms),
        d2s: a.d2.unwrap_or(defaults.d2s),
        k1s: a.k1.unwrap_or(defaults.k1s),
        k2s: a.k2.unwrap_or(defaults.k2s),
        d1: a.d1.unwrap_or(defaults.d1),
        baselines: !a.no_baselines,
        software_policies: defaults.software_policies,
        dist: DistributionSpec::parse(&a.dist, a.seed)?,
        n_vectors: a.n_vectors.unwrap_or(defaults.n_vectors),
        vec_len: a.vec_len.unwrap_or(defaults.vec_len),
        r: a.r.unwrap_or(defaults.r),
    };
    spec.validate()?;
    let plan = spec.plan();
    for (name, reason) in &plan.invalid {
        eprintln!("warning: skipping {name}: {reason}");
    }
    eprintln!(
        "sweep: {} configurations ({} invalid skipped, {} redundant)",
        plan.formats.len(),
        plan.invalid.len(),
        plan.redundant
    );
    if a.dry_run {
        for f in &plan.formats {
            println!("{f}");
        }
        return Ok(());
    }
    let step = (plan.formats.len() / 20).max(1);
    let summary = run_sweep(&spec, &a.out, |p| {
        if p.done == p.resumed && p.resumed > 0 {
            eprintln!("sweep: resuming after {} completed rows", p.resumed);
        } else if p.done > p.resumed && (p.done % step == 0 || p.done == p.total) {
            eprintln!("sweep: {}/{}", p.done, p.total);
        }
    })?;
    eprintln!(
        "sweep: wrote {} rows to {} ({} resumed, {} invalid, {} redundant)",
        summary.rows,
        a.out.display(),
        summary.resumed,
        summary.invalid,
        summary.redundant
    );
    Ok(())
}

pub fn pareto(a: ParetoArgs) -> CmdResult {
    let file = File::open(&a.input).map_err(|e| Failure::Data(format!("{}: {e}", a.input.display())))?;
    let mut points = read_cost_points_csv(file)?;
    if let Some(path) = &a.area_table {
        let table = AreaTable::load(path)?;
        let proxied = table.renormalize(&mut points, a.r)?;
        if !proxied.is_empty() {
            eprintln!(
                "warning: {} of {} rows have no synthesized area and keep the proxy",
                proxied.len(),
                points.len()
            );
        }
    }
    let front = pareto_frontier(&points);
    eprintln!("pareto: {} of {} points on the frontier", front.len(), points.len());
    match &a.out {
        Some(path) => write_cost_points_csv(create(path)?, &front)?,
        None => write_cost_points_csv(std::io::stdout().lock(), &front)?,
    }
    Ok(())
}

fn random_configs(count: usize, seed: u64) -> Vec<BdrConfig> {
    let mut rng = SampleRng::new(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let m = 1 + (rng.next_u64() % 12) as u32;
        let d2 = (rng.next_u64() % 5) as u32;
        let k1 = 1usize << (rng.next_u64() % 9);
        let k2 = if d2 == 0 { k1 } else { 1usize << (rng.next_u64() % 6) };
        if let Ok(cfg) = BdrConfig::new(m, 8, d2, k1, k2) {
            out.push(cfg);
        }
    }
    out
}

pub fn verify(a: VerifyArgs) -> CmdResult {
    let configs = random_configs(a.configs, a.seed);
    let dists = DistributionSpec::all_kinds(a.seed);
    let mut measured = 0usize;
    let mut violations = 0usize;
    for cfg in &configs {
        let bound = theorem1_bound(&BoundParams::from_config(cfg, a.vec_len)?);
        let fmt = FormatPreset::from_config(*cfg);
        for dist in &dists {
            let values = per_vector_qsnr(&fmt, dist, a.n_vectors, a.vec_len)?;
            measured += values.len();
            let worst = values.iter().copied().fold(f64::INFINITY, f64::min);
            let below = values.iter().filter(|&&q| q < bound).count();
            if below > 0 {
                eprintln!("violation: {cfg} on {dist}: {below} vectors below {bound:.3} dB (worst {worst:.3})");
            }
            violations += below;
        }
    }
    println!(
        "verify: {} configs x {} distributions, {measured} vectors, {violations} below the bound",
        configs.len(),
        dists.len()
    );
    if violations == 0 {
        Ok(())
    } else {
        Err(Failure::Data(format!("{violations} measurements fell below the bound")))
    }
}

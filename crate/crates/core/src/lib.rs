#![doc = include_str!("../README.md")]

pub mod codec;
pub mod config;
pub mod cost;
pub mod dot;
pub mod error;
pub mod fidelity;
pub mod formats;
pub mod io;
pub mod scale;
pub mod sweep;
pub mod tensor;

pub use codec::{
    compute_shared_exponent, compute_subblock_shifts, dequantize_block, fake_quantize,
    fake_quantize_block, quantize_block, ElementCode, QuantizedBlock, SharedExponent,
};
pub use config::{BdrConfig, ScaleKind, SubScaleKind};
pub use error::{Error, Result};
pub use formats::{preset, FormatKind, FormatPreset, ScalingPolicy};
pub use scale::{delayed_scale, max_scale, ScaleState};
pub use tensor::{quantize_tensor_along_axis, QuantizedTensor, Tensor};
pub use fidelity::{
    estimate_qsnr, qsnr, sample_vector, theorem1_bound, BoundParams, DistributionKind,
    DistributionSpec, QsnrReport,
};
pub use dot::{mx_dot, reference_dot, DotConfig, DotResult, FixedPointAcc};
pub use cost::{area_proxy, packing_efficiency, pareto_frontier, AreaTable, CostPoint};
pub use sweep::{run_sweep, SweepSpec};

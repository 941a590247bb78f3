//! Directional quantization of N-dimensional tensors.
//!
//! Blocks run along one axis, normally the reduction dimension of the
//! consuming dot product. Quantizing the same tensor along a different axis
//! groups different elements into blocks, so block quantization does not
//! commute with transposition.

use serde::{Deserialize, Serialize};

use crate::codec::{dequantize_block, quantize_block, QuantizedBlock};
use crate::config::BdrConfig;
use crate::error::{Error, Result};

/// A dense row-major tensor of `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Geometry(format!(
                "shape {shape:?} holds {n} elements, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Swaps two axes, materialising the permuted data.
    pub fn swap_axes(&self, a: usize, b: usize) -> Result<Tensor> {
        let rank = self.shape.len();
        if a >= rank || b >= rank {
            return Err(Error::Geometry(format!("axes {a},{b} out of range for rank {rank}")));
        }
        let mut shape = self.shape.clone();
        shape.swap(a, b);
        let src_strides = strides(&self.shape);
        let mut perm_strides = src_strides.clone();
        perm_strides.swap(a, b);
        let mut data = Vec::with_capacity(self.data.len());
        let mut index = vec![0usize; rank];
        for _ in 0..self.data.len() {
            let off: usize = index.iter().zip(&perm_strides).map(|(i, s)| i * s).sum();
            data.push(self.data[off]);
            for d in (0..rank).rev() {
                index[d] += 1;
                if index[d] < shape[d] {
                    break;
                }
                index[d] = 0;
            }
        }
        Ok(Tensor { shape, data })
    }
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for d in (0..shape.len().saturating_sub(1)).rev() {
        s[d] = s[d + 1] * shape[d + 1];
    }
    s
}

/// Geometry of the one-dimensional fibers along `axis`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Fibers {
    pub count: usize,
    pub len: usize,
    pub stride: usize,
    inner: usize,
}

impl Fibers {
    pub fn new(shape: &[usize], axis: usize) -> Self {
        let len = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let outer: usize = shape[..axis].iter().product();
        Fibers {
            count: outer * inner,
            len,
            stride: inner,
            inner,
        }
    }

    /// Flat offset of element 0 of fiber `f`.
    pub fn base(&self, f: usize) -> usize {
        let (o, i) = (f / self.inner, f % self.inner);
        o * self.len * self.inner + i
    }

    pub fn gather(&self, data: &[f64], f: usize, out: &mut Vec<f64>) {
        out.clear();
        let base = self.base(f);
        out.extend((0..self.len).map(|j| data[base + j * self.stride]));
    }

    pub fn scatter(&self, values: &[f64], f: usize, data: &mut [f64]) {
        let base = self.base(f);
        for (j, v) in values.iter().take(self.len).enumerate() {
            data[base + j * self.stride] = *v;
        }
    }
}

/// A tensor encoded block-wise along one axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedTensor {
    pub shape: Vec<usize>,
    pub axis: usize,
    pub cfg: BdrConfig,
    /// Fiber-major: all blocks of fiber 0, then fiber 1, ...
    pub blocks: Vec<QuantizedBlock>,
    /// Zero-padded lanes in the final block of every fiber.
    pub tail_len: usize,
}

impl QuantizedTensor {
    pub fn blocks_per_fiber(&self) -> usize {
        self.shape[self.axis].div_ceil(self.cfg.k1)
    }

    pub fn fiber_count(&self) -> usize {
        self.blocks.len() / self.blocks_per_fiber()
    }

    /// Blocks of one fiber, in order along the axis.
    pub fn fiber(&self, f: usize) -> &[QuantizedBlock] {
        let n = self.blocks_per_fiber();
        &self.blocks[f * n..(f + 1) * n]
    }

    pub fn dequantize(&self) -> Tensor {
        let fibers = Fibers::new(&self.shape, self.axis);
        let mut data = vec![0.0; self.shape.iter().product()];
        let mut values = Vec::with_capacity(fibers.len + self.cfg.k1);
        for f in 0..fibers.count {
            values.clear();
            for b in self.fiber(f) {
                values.extend(dequantize_block(b, &self.cfg));
            }
            fibers.scatter(&values, f, &mut data);
        }
        Tensor {
            shape: self.shape.clone(),
            data,
        }
    }
}

/// Splits every fiber along `axis` into `ceil(len / k1)` blocks, zero-padding
/// the last one.
pub fn quantize_tensor_along_axis(
    t: &Tensor,
    axis: usize,
    cfg: &BdrConfig,
) -> Result<QuantizedTensor> {
    if t.is_empty() {
        return Err(Error::Empty);
    }
    if axis >= t.shape.len() {
        return Err(Error::Geometry(format!(
            "axis {axis} out of range for rank {}",
            t.shape.len()
        )));
    }
    let fibers = Fibers::new(&t.shape, axis);
    let per_fiber = fibers.len.div_ceil(cfg.k1);
    let tail_len = per_fiber * cfg.k1 - fibers.len;
    let mut blocks = Vec::with_capacity(fibers.count * per_fiber);
    let mut fiber = Vec::with_capacity(per_fiber * cfg.k1);
    for f in 0..fibers.count {
        fibers.gather(&t.data, f, &mut fiber);
        fiber.resize(per_fiber * cfg.k1, 0.0);
        for (b, chunk) in fiber.chunks(cfg.k1).enumerate() {
            let block = quantize_block(chunk, cfg).map_err(|e| match e {
                Error::NonFinite { value, index } => Error::NonFinite {
                    index: fibers.base(f) + (b * cfg.k1 + index) * fibers.stride,
                    value,
                },
                e => e,
            })?;
            blocks.push(block);
        }
    }
    Ok(QuantizedTensor {
        shape: t.shape.clone(),
        axis,
        cfg: *cfg,
        blocks,
        tail_len,
    })
}

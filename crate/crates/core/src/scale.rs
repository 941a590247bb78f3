//! Software-maintained first-level scales.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Sliding window of recent absolute-maximum observations used for delayed
/// scaling. Single writer.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleState {
    window: VecDeque<f64>,
    capacity: usize,
}

impl ScaleState {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidConfig("scale window capacity must be >= 1".into()));
        }
        Ok(ScaleState {
            window: VecDeque::with_capacity(capacity),
            capacity,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }

    pub fn push(&mut self, amax: f64) {
        debug_assert!(amax >= 0.0);
        if self.window.len() == self.capacity {
            self.window.pop_front();
        }
        self.window.push_back(amax);
    }

    pub fn window_max(&self) -> f64 {
        self.window.iter().fold(0.0, |a, &b| a.max(b))
    }

    /// `max(window) / format_max`, or 1 when the window holds no signal.
    pub fn scale(&self, format_max: f64) -> f64 {
        let w = self.window_max();
        if w > 0.0 {
            w / format_max
        } else {
            1.0
        }
    }
}

/// Records `new_amax` and returns the delayed scale over the updated window.
pub fn delayed_scale(state: &mut ScaleState, new_amax: f64, format_max: f64) -> Result<f64> {
    if !new_amax.is_finite() || new_amax < 0.0 {
        return Err(Error::InvalidConfig(format!("observed amax {new_amax} must be finite and >= 0")));
    }
    if format_max.is_nan() || format_max <= 0.0 {
        return Err(Error::InvalidScale(format_max));
    }
    state.push(new_amax);
    Ok(state.scale(format_max))
}

/// Max-alignment scale `max|x| / (2^(bits-1) - 1)`; 1 for an all-zero input.
pub fn max_scale(x: &[f64], bits: u32) -> Result<f64> {
    if !(2..=32).contains(&bits) {
        return Err(Error::InvalidConfig(format!("integer width {bits} outside [2, 32]")));
    }
    let mut amax = 0.0f64;
    for (index, &v) in x.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { index, value: v });
        }
        amax = amax.max(v.abs());
    }
    Ok(if amax == 0.0 {
        1.0
    } else {
        amax / ((1u64 << (bits - 1)) - 1) as f64
    })
}

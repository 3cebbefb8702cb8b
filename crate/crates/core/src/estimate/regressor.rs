//! A small fully connected quaternion regressor.
//!
//! Each image is downsampled, flattened and embedded by a shared dense
//! layer; the two embeddings are concatenated and pass through two hidden
//! layers (leaky ReLU, inverted dropout) to a 4-vector, which is normalized
//! and then flipped to `q_r ≥ 0`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use rand::Rng;

use super::{Diagnostics, EstimatorError, Observation, RotationEstimate, RotationEstimator};
use crate::render::{DepthImage, MAX_DEPTH_CODE};
use crate::rotation::UnitQuaternion;

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.02;
pub const DEFAULT_DROPOUT: f64 = 0.4;

const ZERO_OUTPUT_EPS: f64 = 1e-12;

/// Layer widths. The per-image input is `input_side²` pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegressorShape {
    pub input_side: usize,
    pub embed: usize,
    pub hidden: [usize; 2],
}

impl Default for RegressorShape {
    fn default() -> Self {
        RegressorShape {
            input_side: 32,
            embed: 64,
            hidden: [128, 128],
        }
    }
}

impl RegressorShape {
    pub fn input_len(&self) -> usize {
        self.input_side * self.input_side
    }

    /// `(rows, cols)` of each dense layer: encoder, hidden 1, hidden 2, head.
    pub fn layer_dims(&self) -> [(usize, usize); 4] {
        [
            (self.embed, self.input_len()),
            (self.hidden[0], 2 * self.embed),
            (self.hidden[1], self.hidden[0]),
            (4, self.hidden[1]),
        ]
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|(r, c)| r * c + r).sum()
    }
}

/// Offsets of one dense layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy)]
struct Dense {
    rows: usize,
    cols: usize,
    weights: usize,
    bias: usize,
}

fn layout(shape: &RegressorShape) -> [Dense; 4] {
    let dims = shape.layer_dims();
    let mut offset = 0;
    let mut out = [Dense {
        rows: 0,
        cols: 0,
        weights: 0,
        bias: 0,
    }; 4];
    for (slot, (rows, cols)) in out.iter_mut().zip(dims) {
        *slot = Dense {
            rows,
            cols,
            weights: offset,
            bias: offset + rows * cols,
        };
        offset += rows * cols + rows;
    }
    out
}

impl Dense {
    fn forward(&self, params: &[f64], x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        let w = &params[self.weights..self.weights + self.rows * self.cols];
        let b = &params[self.bias..self.bias + self.rows];
        for r in 0..self.rows {
            let row = &w[r * self.cols..(r + 1) * self.cols];
            let mut acc = b[r];
            for (wi, xi) in row.iter().zip(x) {
                acc += wi * xi;
            }
            out.push(acc);
        }
    }

    /// Accumulates `scale · dy ⊗ x` into the weight gradient, `scale · dy`
    /// into the bias gradient, and returns `Wᵀ dy` when `want_input` is set.
    fn backward(
        &self,
        params: &[f64],
        x: &[f64],
        dy: &[f64],
        grads: &mut [f64],
        scale: f64,
        want_input: bool,
    ) -> Vec<f64> {
        let mut dx = if want_input {
            vec![0.0; self.cols]
        } else {
            Vec::new()
        };
        for r in 0..self.rows {
            let g = dy[r];
            if g == 0.0 {
                continue;
            }
            let gs = g * scale;
            let base = self.weights + r * self.cols;
            for (c, xi) in x.iter().enumerate() {
                grads[base + c] += gs * xi;
            }
            grads[self.bias + r] += gs;
            if want_input {
                let row = &params[base..base + self.cols];
                for (d, wi) in dx.iter_mut().zip(row) {
                    *d += g * wi;
                }
            }
        }
        dx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressorModel {
    shape: RegressorShape,
    params: Vec<f64>,
    pub leaky_slope: f64,
    pub dropout: f64,
}

/// Intermediates of one forward pass, consumed by [`RegressorModel::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    start: Vec<f64>,
    goal: Vec<f64>,
    enc_start_pre: Vec<f64>,
    enc_goal_pre: Vec<f64>,
    concat: Vec<f64>,
    h1_pre: Vec<f64>,
    h1_mask: Vec<f64>,
    h1: Vec<f64>,
    h2_pre: Vec<f64>,
    h2_mask: Vec<f64>,
    h2: Vec<f64>,
    raw: [f64; 4],
    raw_norm: f64,
    sign: f64,
    fallback: bool,
}

impl ForwardCache {
    pub fn raw_output(&self) -> [f64; 4] {
        self.raw
    }
}

fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

fn leaky_grad(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        slope
    }
}

impl RegressorModel {
    /// Weights and biases drawn from `U(−1/√fan_in, 1/√fan_in)`.
    pub fn init<R: Rng + ?Sized>(shape: RegressorShape, rng: &mut R) -> Self {
        let mut params = Vec::with_capacity(shape.param_count());
        for (rows, cols) in shape.layer_dims() {
            let bound = 1.0 / (cols as f64).sqrt();
            for _ in 0..rows * cols + rows {
                params.push(rng.random_range(-bound..bound));
            }
        }
        Self::from_params(shape, params).expect("sized by construction")
    }

    pub fn zeros(shape: RegressorShape) -> Self {
        Self::from_params(shape, vec![0.0; shape.param_count()]).expect("sized by construction")
    }

    pub fn from_params(shape: RegressorShape, params: Vec<f64>) -> Result<Self, EstimatorError> {
        if params.len() != shape.param_count() {
            return Err(EstimatorError::ShapeMismatch(format!(
                "expected {} parameters, got {}",
                shape.param_count(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(EstimatorError::ShapeMismatch("non-finite parameter".into()));
        }
        Ok(RegressorModel {
            shape,
            params,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
            dropout: DEFAULT_DROPOUT,
        })
    }

    pub fn shape(&self) -> &RegressorShape {
        &self.shape
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn dropout_mask<R: Rng + ?Sized>(&self, n: usize, mode: Mode, rng: &mut R) -> Vec<f64> {
        if mode == Mode::Eval || self.dropout <= 0.0 {
            return vec![1.0; n];
        }
        let keep = 1.0 - self.dropout;
        (0..n)
            .map(|_| {
                if rng.random_bool(keep) {
                    1.0 / keep
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Runs the network on prepared inputs (see [`prepare_input`]).
    pub fn forward<R: Rng + ?Sized>(
        &self,
        start: &[f64],
        goal: &[f64],
        mode: Mode,
        rng: &mut R,
    ) -> Result<(RotationEstimate, ForwardCache), EstimatorError> {
        let n = self.shape.input_len();
        if start.len() != n || goal.len() != n {
            return Err(EstimatorError::ShapeMismatch(format!(
                "inputs have {} and {} values, model expects {n}",
                start.len(),
                goal.len()
            )));
        }
        let [enc, l1, l2, head] = layout(&self.shape);
        let slope = self.leaky_slope;
        let p = &self.params;

        let mut enc_start_pre = Vec::new();
        let mut enc_goal_pre = Vec::new();
        enc.forward(p, start, &mut enc_start_pre);
        enc.forward(p, goal, &mut enc_goal_pre);
        let concat: Vec<f64> = enc_start_pre
            .iter()
            .chain(enc_goal_pre.iter())
            .map(|&v| leaky(v, slope))
            .collect();

        let mut h1_pre = Vec::new();
        l1.forward(p, &concat, &mut h1_pre);
        let h1_mask = self.dropout_mask(h1_pre.len(), mode, rng);
        let h1: Vec<f64> = h1_pre
            .iter()
            .zip(&h1_mask)
            .map(|(&v, &m)| leaky(v, slope) * m)
            .collect();

        let mut h2_pre = Vec::new();
        l2.forward(p, &h1, &mut h2_pre);
        let h2_mask = self.dropout_mask(h2_pre.len(), mode, rng);
        let h2: Vec<f64> = h2_pre
            .iter()
            .zip(&h2_mask)
            .map(|(&v, &m)| leaky(v, slope) * m)
            .collect();

        let mut out = Vec::new();
        head.forward(p, &h2, &mut out);
        let raw = [out[0], out[1], out[2], out[3]];
        let raw_norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();

        let (q_hat, sign, fallback) = if raw_norm < ZERO_OUTPUT_EPS || !raw_norm.is_finite() {
            (UnitQuaternion::IDENTITY, 1.0, true)
        } else {
            let sign = if raw[0] < 0.0 { -1.0 } else { 1.0 };
            let q = UnitQuaternion::new_unchecked(
                sign * raw[0] / raw_norm,
                sign * raw[1] / raw_norm,
                sign * raw[2] / raw_norm,
                sign * raw[3] / raw_norm,
            );
            (q, sign, false)
        };

        let estimate = RotationEstimate {
            q_hat,
            diagnostics: Diagnostics {
                iterations: 0,
                residual: raw_norm,
                fallback,
            },
        };
        let cache = ForwardCache {
            start: start.to_vec(),
            goal: goal.to_vec(),
            enc_start_pre,
            enc_goal_pre,
            concat,
            h1_pre,
            h1_mask,
            h1,
            h2_pre,
            h2_mask,
            h2,
            raw,
            raw_norm,
            sign,
            fallback,
        };
        Ok((estimate, cache))
    }

    /// Gradient of the loss with respect to every parameter, given
    /// `∂loss/∂q̂` for the canonical output. Includes the `2λw` penalty term.
    pub fn backward(&self, cache: &ForwardCache, loss_grad: [f64; 4], l2: f64) -> Vec<f64> {
        let mut grads = vec![0.0; self.params.len()];
        self.accumulate_backward(cache, loss_grad, 1.0, &mut grads);
        add_l2(&self.params, &mut grads, l2);
        grads
    }

    /// Adds `scale · ∂loss/∂θ` into `grads`, without the penalty term.
    pub fn accumulate_backward(
        &self,
        cache: &ForwardCache,
        loss_grad: [f64; 4],
        scale: f64,
        grads: &mut [f64],
    ) {
        if cache.fallback {
            return;
        }
        let [enc, l1, l2, head] = layout(&self.shape);
        let slope = self.leaky_slope;
        let p = &self.params;

        let d_raw = normalization_backward(cache.raw, cache.raw_norm, cache.sign, loss_grad);

        let mut d_h2 = head.backward(p, &cache.h2, &d_raw, grads, scale, true);
        for ((d, &pre), &m) in d_h2.iter_mut().zip(&cache.h2_pre).zip(&cache.h2_mask) {
            *d *= m * leaky_grad(pre, slope);
        }
        let mut d_h1 = l2.backward(p, &cache.h1, &d_h2, grads, scale, true);
        for ((d, &pre), &m) in d_h1.iter_mut().zip(&cache.h1_pre).zip(&cache.h1_mask) {
            *d *= m * leaky_grad(pre, slope);
        }
        let mut d_concat = l1.backward(p, &cache.concat, &d_h1, grads, scale, true);
        let e = self.shape.embed;
        for (d, &pre) in d_concat
            .iter_mut()
            .zip(cache.enc_start_pre.iter().chain(cache.enc_goal_pre.iter()))
        {
            *d *= leaky_grad(pre, slope);
        }
        enc.backward(p, &cache.start, &d_concat[..e], grads, scale, false);
        enc.backward(p, &cache.goal, &d_concat[e..], grads, scale, false);
    }
}

/// Chains `∂loss/∂q̂` through `q̂ = s·raw/‖raw‖`: the normalization Jacobian
/// `(I − uuᵀ)/‖raw‖` with `u = raw/‖raw‖`, times the canonical sign `s`.
pub fn normalization_backward(raw: [f64; 4], norm: f64, sign: f64, grad: [f64; 4]) -> [f64; 4] {
    let u = raw.map(|v| v / norm);
    let g = grad.map(|v| v * sign);
    let ug: f64 = u.iter().zip(&g).map(|(a, b)| a * b).sum();
    let mut out = [0.0; 4];
    for c in 0..4 {
        out[c] = (g[c] - u[c] * ug) / norm;
    }
    out
}

pub fn add_l2(params: &[f64], grads: &mut [f64], l2: f64) {
    if l2 == 0.0 {
        return;
    }
    for (g, w) in grads.iter_mut().zip(params) {
        *g += 2.0 * l2 * w;
    }
}

/// Block-averages a depth image down to `side × side` and scales codes into
/// `[0, 1]`. The image dimensions must be integer multiples of `side`.
pub fn prepare_input(img: &DepthImage, side: usize) -> Result<Vec<f64>, EstimatorError> {
    let (w, h) = (img.width(), img.height());
    if side == 0 || w % side != 0 || h % side != 0 {
        return Err(EstimatorError::ShapeMismatch(format!(
            "{w}x{h} image cannot be downsampled to {side}x{side}"
        )));
    }
    let (fx, fy) = (w / side, h / side);
    let norm = (fx * fy) as f64 * MAX_DEPTH_CODE as f64;
    let mut out = Vec::with_capacity(side * side);
    for by in 0..side {
        for bx in 0..side {
            let mut acc = 0u64;
            for row in by * fy..(by + 1) * fy {
                for col in bx * fx..(bx + 1) * fx {
                    acc += img.get(col, row) as u64;
                }
            }
            out.push(acc as f64 / norm);
        }
    }
    Ok(out)
}

/// Adapter running a model in eval mode on observations.
#[derive(Debug, Clone)]
pub struct RegressorEstimator {
    pub model: RegressorModel,
}

impl RotationEstimator for RegressorEstimator {
    fn estimate(&mut self, obs: &Observation<'_>) -> Result<RotationEstimate, EstimatorError> {
        let side = self.model.shape().input_side;
        let start = prepare_input(obs.current, side)?;
        let goal = prepare_input(obs.goal, side)?;
        // eval mode draws nothing from the rng
        let mut unused = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let (est, _) = self.model.forward(&start, &goal, Mode::Eval, &mut unused)?;
        Ok(est)
    }
}

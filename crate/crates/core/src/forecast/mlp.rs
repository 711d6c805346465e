//! Single-hidden-layer perceptron on lags 1..7 of the standardized series.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{mix_seed, FitConfig, ForecastError};
use crate::stats;

pub const LAGS: usize = 7;
const INIT_SPREAD: f64 = 0.5;
const INITIAL_RATE: f64 = 1e-3;

/// Weight layout: hidden×LAGS input weights (row per unit), hidden biases,
/// hidden output weights, output bias.
pub fn n_weights(hidden: usize) -> usize {
    hidden * (LAGS + 2) + 1
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn forward(w: &[f64], hidden: usize, x: &[f64; LAGS]) -> f64 {
    let (w1, rest) = w.split_at(hidden * LAGS);
    let (b1, rest) = rest.split_at(hidden);
    let (w2, b2) = rest.split_at(hidden);
    let mut out = b2[0];
    for j in 0..hidden {
        let a: f64 = b1[j] + w1[j * LAGS..(j + 1) * LAGS].iter().zip(x).map(|(u, v)| u * v).sum::<f64>();
        out += w2[j] * sigmoid(a);
    }
    out
}

/// Training SSE and its gradient by backpropagation.
pub fn sse_and_gradient(w: &[f64], hidden: usize, inputs: &[[f64; LAGS]], targets: &[f64]) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; w.len()];
    let mut sse = 0.0;
    let (w1, rest) = w.split_at(hidden * LAGS);
    let (b1, rest) = rest.split_at(hidden);
    let (w2, b2) = rest.split_at(hidden);
    let (o_b1, o_w2, o_b2) = (hidden * LAGS, hidden * (LAGS + 1), hidden * (LAGS + 2));
    let mut act = vec![0.0; hidden];
    for (x, &target) in inputs.iter().zip(targets) {
        let mut out = b2[0];
        for j in 0..hidden {
            let a: f64 = b1[j] + w1[j * LAGS..(j + 1) * LAGS].iter().zip(x).map(|(u, v)| u * v).sum::<f64>();
            act[j] = sigmoid(a);
            out += w2[j] * act[j];
        }
        let r = out - target;
        sse += r * r;
        let d_out = 2.0 * r;
        grad[o_b2] += d_out;
        for j in 0..hidden {
            grad[o_w2 + j] += d_out * act[j];
            let d_a = d_out * w2[j] * act[j] * (1.0 - act[j]);
            grad[o_b1 + j] += d_a;
            for (k, xk) in x.iter().enumerate() {
                grad[j * LAGS + k] += d_a * xk;
            }
        }
    }
    (sse, grad)
}

/// Inputs `[zₜ₋₁, …, zₜ₋₇]` and targets `zₜ` for every `t ≥ LAGS`.
pub fn training_pairs(z: &[f64]) -> (Vec<[f64; LAGS]>, Vec<f64>) {
    (LAGS..z.len())
        .map(|t| {
            let mut x = [0.0; LAGS];
            for (k, v) in x.iter_mut().enumerate() {
                *v = z[t - 1 - k];
            }
            (x, z[t])
        })
        .unzip()
}

/// Plain gradient descent at a fixed rate; returns the SSE before each step.
pub fn descent_history(w0: &[f64], hidden: usize, inputs: &[[f64; LAGS]], targets: &[f64], rate: f64, steps: usize) -> Vec<f64> {
    let mut w = w0.to_vec();
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let (sse, g) = sse_and_gradient(&w, hidden, inputs, targets);
        out.push(sse);
        for (wi, gi) in w.iter_mut().zip(&g) {
            *wi -= rate * gi;
        }
    }
    out
}

/// Full-batch gradient descent with an adaptive ("bold driver") rate:
/// grow after an improving step, halve and retry after a worsening one.
/// Returns the weights, their SSE and the number of epochs used.
pub fn train(w0: &[f64], hidden: usize, inputs: &[[f64; LAGS]], targets: &[f64], max_epochs: usize, tol: f64) -> (Vec<f64>, f64, usize) {
    let mut w = w0.to_vec();
    let (mut sse, mut g) = sse_and_gradient(&w, hidden, inputs, targets);
    let mut rate = INITIAL_RATE;
    let mut trial = vec![0.0; w.len()];
    for epoch in 1..=max_epochs {
        for ((t, wi), gi) in trial.iter_mut().zip(&w).zip(&g) {
            *t = wi - rate * gi;
        }
        let (s, gt) = sse_and_gradient(&trial, hidden, inputs, targets);
        if s.is_finite() && s <= sse {
            let gain = sse - s;
            std::mem::swap(&mut w, &mut trial);
            sse = s;
            g = gt;
            rate *= 1.1;
            if gain <= tol * (sse + tol) {
                return (w, sse, epoch);
            }
        } else {
            rate *= 0.5;
            if rate < 1e-14 {
                return (w, sse, epoch);
            }
        }
    }
    (w, sse, max_epochs)
}

pub fn initial_weights(hidden: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_weights(hidden)).map(|_| rng.random_range(-INIT_SPREAD..INIT_SPREAD)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpFit {
    pub hidden: usize,
    pub weights: Vec<f64>,
    pub mean: f64,
    pub scale: f64,
    pub sse: f64,
    pub restart: usize,
    pub epochs: usize,
    /// Standardized training series, the source of lagged inputs.
    pub history: Vec<f64>,
}

impl MlpFit {
    /// Recursive multi-step forecasts.
    pub fn predict(&self, h: usize) -> Vec<f64> {
        let mut z = self.history.clone();
        for _ in 0..h {
            let t = z.len();
            let mut x = [0.0; LAGS];
            for (k, v) in x.iter_mut().enumerate() {
                *v = z[t - 1 - k];
            }
            z.push(forward(&self.weights, self.hidden, &x));
        }
        z[self.history.len()..].iter().map(|v| self.mean + self.scale * v).collect()
    }
}

pub fn fit(y: &[f64], config: &FitConfig) -> Result<MlpFit, ForecastError> {
    if y.iter().any(|v| !v.is_finite()) {
        return Err(ForecastError::NonFinite("mlp"));
    }
    if y.len() <= LAGS {
        return Err(ForecastError::TooShort {
            method: "mlp",
            len: y.len(),
            need: LAGS + 1,
        });
    }
    let mean = stats::mean(y);
    let sd = stats::sample_sd(y);
    let scale = if sd.is_finite() && sd > 1e-12 { sd } else { 1.0 };
    let z: Vec<f64> = y.iter().map(|v| (v - mean) / scale).collect();
    let (inputs, targets) = training_pairs(&z);
    let hidden = config.mlp_hidden;
    let mut best: Option<MlpFit> = None;
    for restart in 0..config.mlp_restarts.max(1) {
        let w0 = initial_weights(hidden, mix_seed(config.seed, restart as u64));
        let (weights, sse, epochs) = train(&w0, hidden, &inputs, &targets, config.mlp_max_epochs, config.tolerance);
        if best.as_ref().is_none_or(|b| sse < b.sse) {
            best = Some(MlpFit {
                hidden,
                weights,
                mean,
                scale,
                sse,
                restart,
                epochs,
                history: z.clone(),
            });
        }
    }
    Ok(best.expect("at least one restart"))
}

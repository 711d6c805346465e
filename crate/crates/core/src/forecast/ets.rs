//! Exponential smoothing state-space models with additive errors.
//!
//! For fixed smoothing parameters the one-step errors are affine in the
//! initial state, so the initial state is profiled out by least squares and
//! only (α, β, γ, φ) are searched by Nelder-Mead.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use super::optim::nelder_mead;
use super::{FitConfig, ForecastError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Trend {
    None,
    Additive,
    Damped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EtsSpec {
    pub trend: Trend,
    pub seasonal: bool,
}

impl EtsSpec {
    pub const ANN: Self = Self { trend: Trend::None, seasonal: false };
    pub const AAN: Self = Self { trend: Trend::Additive, seasonal: false };
    pub const AADN: Self = Self { trend: Trend::Damped, seasonal: false };
    pub const ANA: Self = Self { trend: Trend::None, seasonal: true };
    pub const AAA: Self = Self { trend: Trend::Additive, seasonal: true };
    pub const AADA: Self = Self { trend: Trend::Damped, seasonal: true };

    fn has_trend(&self) -> bool {
        self.trend != Trend::None
    }

    /// Number of smoothing parameters searched.
    pub fn n_smoothing(&self) -> usize {
        1 + usize::from(self.has_trend()) + usize::from(self.seasonal) + usize::from(self.trend == Trend::Damped)
    }

    /// Length of the state vector `[ℓ, b?, s_{t-1}, …, s_{t-m}]`.
    pub fn n_states(&self, period: usize) -> usize {
        1 + usize::from(self.has_trend()) + if self.seasonal { period } else { 0 }
    }

    /// Free initial states (the seasonal states sum to zero).
    pub fn n_initial(&self, period: usize) -> usize {
        self.n_states(period) - usize::from(self.seasonal)
    }
}

impl fmt::Display for EtsSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = match self.trend {
            Trend::None => "N",
            Trend::Additive => "A",
            Trend::Damped => "Ad",
        };
        write!(f, "ETS(A,{t},{})", if self.seasonal { "A" } else { "N" })
    }
}

pub const SEASONAL_CANDIDATES: [EtsSpec; 5] = [EtsSpec::ANN, EtsSpec::AAN, EtsSpec::ANA, EtsSpec::AAA, EtsSpec::AADA];
pub const NONSEASONAL_CANDIDATES: [EtsSpec; 3] = [EtsSpec::ANN, EtsSpec::AAN, EtsSpec::AADN];

/// Smoothing parameters. Unused entries are 0 (φ is 1 without damping).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Smoothing {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub phi: f64,
}

impl Smoothing {
    fn from_vec(spec: EtsSpec, v: &[f64]) -> Self {
        let mut it = v.iter().copied();
        let alpha = it.next().unwrap_or(0.0);
        let beta = if spec.has_trend() { it.next().unwrap_or(0.0) } else { 0.0 };
        let gamma = if spec.seasonal { it.next().unwrap_or(0.0) } else { 0.0 };
        let phi = if spec.trend == Trend::Damped { it.next().unwrap_or(1.0) } else { 1.0 };
        Self { alpha, beta, gamma, phi }
    }

    fn admissible(&self, spec: EtsSpec) -> bool {
        let Self { alpha, beta, gamma, phi } = *self;
        if !(alpha > 0.0 && alpha < 1.0) {
            return false;
        }
        if spec.has_trend() && !(beta > 0.0 && beta < alpha) {
            return false;
        }
        if spec.seasonal && !(gamma > 0.0 && gamma < 1.0 - alpha) {
            return false;
        }
        spec.trend != Trend::Damped || (0.8..=0.98).contains(&phi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtsFit {
    pub spec: EtsSpec,
    pub period: usize,
    pub smoothing: Smoothing,
    pub initial_state: Vec<f64>,
    pub final_state: Vec<f64>,
    pub residuals: Vec<f64>,
    pub loglik: f64,
    /// Parameter count used in the information criterion, σ² included.
    pub n_params: usize,
    pub aicc: f64,
    pub converged: bool,
}

impl EtsFit {
    pub fn sse(&self) -> f64 {
        self.residuals.iter().map(|e| e * e).sum()
    }

    pub fn predict(&self, h: usize) -> Vec<f64> {
        let has_b = self.spec.has_trend();
        let l = self.final_state[0];
        let b = if has_b { self.final_state[1] } else { 0.0 };
        let off = 1 + usize::from(has_b);
        let m = self.period;
        let mut damp = 0.0;
        let mut pow = 1.0;
        (1..=h)
            .map(|i| {
                pow *= self.smoothing.phi;
                damp += pow;
                let s = if self.spec.seasonal {
                    self.final_state[off + m - 1 - (i - 1) % m]
                } else {
                    0.0
                };
                l + damp * b + s
            })
            .collect()
    }
}

/// Runs the error-correction recursions, returning one-step errors; `state`
/// ends as the final state.
pub fn filter(spec: EtsSpec, period: usize, sm: &Smoothing, state: &mut [f64], y: &[f64]) -> Vec<f64> {
    let has_b = spec.has_trend();
    let off = 1 + usize::from(has_b);
    y.iter()
        .map(|&obs| {
            let b = if has_b { state[1] } else { 0.0 };
            let s = if spec.seasonal { state[off + period - 1] } else { 0.0 };
            let phi_b = sm.phi * b;
            let e = obs - (state[0] + phi_b + s);
            state[0] += phi_b + sm.alpha * e;
            if has_b {
                state[1] = phi_b + sm.beta * e;
            }
            if spec.seasonal {
                state[off..off + period].rotate_right(1);
                state[off] = s + sm.gamma * e;
            }
            e
        })
        .collect()
}

fn expand_initial(spec: EtsSpec, period: usize, z: &[f64]) -> Vec<f64> {
    let mut x = z.to_vec();
    if spec.seasonal {
        let off = 1 + usize::from(spec.has_trend());
        let last = -z[off..].iter().sum::<f64>();
        x.push(last);
        debug_assert_eq!(x.len(), off + period);
    }
    x
}

/// Least-squares initial state for given smoothing parameters.
fn best_initial(spec: EtsSpec, period: usize, sm: &Smoothing, y: &[f64]) -> Vec<f64> {
    let ns = spec.n_states(period);
    let nz = spec.n_initial(period);
    let n = y.len();
    let base = filter(spec, period, sm, &mut vec![0.0; ns], y);
    let zeros = vec![0.0; n];
    let mut full = DMatrix::<f64>::zeros(n, ns);
    for j in 0..ns {
        let mut x0 = vec![0.0; ns];
        x0[j] = 1.0;
        let col = filter(spec, period, sm, &mut x0, &zeros);
        full.set_column(j, &DVector::from_vec(col));
    }
    let design = if spec.seasonal {
        let last = full.column(ns - 1).clone_owned();
        let off = 1 + usize::from(spec.has_trend());
        let mut d = full.columns(0, nz).clone_owned();
        for j in off..nz {
            let c = d.column(j) - &last;
            d.set_column(j, &c);
        }
        d
    } else {
        full
    };
    let rhs = -DVector::from_vec(base);
    let svd = design.svd(true, true);
    let eps = 1e-10 * svd.singular_values.max().max(f64::MIN_POSITIVE);
    let z = svd.solve(&rhs, eps).map(|v| v.iter().copied().collect()).unwrap_or_else(|_| vec![0.0; nz]);
    expand_initial(spec, period, &z)
}

/// Lower bound on the SSE so exact fits keep a finite likelihood.
pub fn sse_floor(y: &[f64]) -> f64 {
    let scale = 1.0 + y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    y.len() as f64 * (1e-8 * scale).powi(2)
}

/// Concentrated Gaussian log-likelihood for `n` errors with sum of squares `sse`.
pub fn gaussian_loglik(sse: f64, n: usize) -> f64 {
    let n = n as f64;
    -0.5 * n * ((2.0 * std::f64::consts::PI * sse / n).ln() + 1.0)
}

/// Small-sample corrected AIC; infinite when `n ≤ k + 1`.
pub fn aicc(loglik: f64, k: usize, n: usize) -> f64 {
    if n <= k + 1 {
        return f64::INFINITY;
    }
    let (k, n) = (k as f64, n as f64);
    -2.0 * loglik + 2.0 * k + 2.0 * k * (k + 1.0) / (n - k - 1.0)
}

fn start_values(spec: EtsSpec) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.2];
    let mut step = vec![0.1];
    if spec.has_trend() {
        x.push(0.02);
        step.push(0.01);
    }
    if spec.seasonal {
        x.push(0.05);
        step.push(0.05);
    }
    if spec.trend == Trend::Damped {
        x.push(0.9);
        step.push(0.04);
    }
    (x, step)
}

pub fn fit_spec(spec: EtsSpec, y: &[f64], period: usize, config: &FitConfig) -> EtsFit {
    let floor = sse_floor(y);
    let n = y.len();
    let objective = |v: &[f64]| {
        let sm = Smoothing::from_vec(spec, v);
        if !sm.admissible(spec) {
            return f64::INFINITY;
        }
        let mut x0 = best_initial(spec, period, &sm, y);
        let sse: f64 = filter(spec, period, &sm, &mut x0, y).iter().map(|e| e * e).sum();
        n as f64 * sse.max(floor).ln()
    };
    let (x0, step) = start_values(spec);
    let best = nelder_mead(objective, &x0, &step, config.tolerance, config.max_iterations);

    let smoothing = Smoothing::from_vec(spec, &best.x);
    let initial_state = best_initial(spec, period, &smoothing, y);
    let mut final_state = initial_state.clone();
    let residuals = filter(spec, period, &smoothing, &mut final_state, y);
    let sse: f64 = residuals.iter().map(|e| e * e).sum();
    let loglik = gaussian_loglik(sse.max(floor), n);
    let n_params = spec.n_smoothing() + spec.n_initial(period) + 1;
    EtsFit {
        spec,
        period,
        smoothing,
        initial_state,
        final_state,
        residuals,
        loglik,
        n_params,
        aicc: aicc(loglik, n_params, n),
        converged: best.converged,
    }
}

/// Fits every candidate and keeps the lowest AICc (earlier candidates win ties).
pub fn fit_candidates(candidates: &[EtsSpec], y: &[f64], period: usize, config: &FitConfig) -> Result<EtsFit, ForecastError> {
    if y.iter().any(|v| !v.is_finite()) {
        return Err(ForecastError::NonFinite("ets"));
    }
    let mut best: Option<EtsFit> = None;
    for &spec in candidates {
        if spec.seasonal && y.len() < 2 * period {
            continue;
        }
        let fit = fit_spec(spec, y, period, config);
        if !fit.aicc.is_finite() {
            continue;
        }
        if best.as_ref().is_none_or(|b| fit.aicc < b.aicc) {
            best = Some(fit);
        }
    }
    best.ok_or(ForecastError::TooShort {
        method: "ets",
        len: y.len(),
        need: 2 * period,
    })
}

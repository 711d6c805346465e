//! Poisson log-linear autoregression on raw counts:
//! `log λₜ = β₀ + α₁·log(yₜ₋₁ + 1) + αₘ·log(yₜ₋ₘ + 1)`.

use nalgebra::{Matrix3, Vector3};
use statrs::function::gamma::ln_gamma;

use super::{FitConfig, ForecastError};

/// Cap on the linear predictor so intensities stay finite.
pub const MAX_LINEAR_PREDICTOR: f64 = 50.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TsglmFit {
    pub period: usize,
    /// `[β₀, α₁, αₘ]`; `None` when every training count is zero.
    pub coefficients: Option<[f64; 3]>,
    pub loglik: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
}

fn covariates(y: &[f64], t: usize, period: usize) -> Vector3<f64> {
    Vector3::new(1.0, (y[t - 1] + 1.0).ln(), (y[t - period] + 1.0).ln())
}

fn eta(beta: &Vector3<f64>, x: &Vector3<f64>) -> f64 {
    beta.dot(x).min(MAX_LINEAR_PREDICTOR)
}

/// Conditional log-likelihood over `t = period..n`.
pub fn loglik(y: &[f64], period: usize, beta: [f64; 3]) -> f64 {
    let b = Vector3::from(beta);
    (period..y.len())
        .map(|t| {
            let e = eta(&b, &covariates(y, t, period));
            y[t] * e - e.exp() - ln_gamma(y[t] + 1.0)
        })
        .sum()
}

impl TsglmFit {
    pub fn predict(&self, h: usize) -> Vec<f64> {
        let Some(beta) = self.coefficients else {
            return vec![0.0; h];
        };
        let b = Vector3::from(beta);
        let mut y = self.history.clone();
        for _ in 0..h {
            let t = y.len();
            let mu = eta(&b, &covariates(&y, t, self.period)).exp();
            y.push(mu);
        }
        y.split_off(self.history.len())
    }
}

/// Newton-Raphson with step halving; the Hessian is pseudo-inverted so
/// collinear covariates (e.g. a constant series) are handled.
pub fn fit(y: &[f64], period: usize, config: &FitConfig) -> Result<TsglmFit, ForecastError> {
    if let Some(&bad) = y.iter().find(|v| !(**v >= 0.0 && v.fract() == 0.0 && v.is_finite())) {
        return Err(ForecastError::Domain(bad));
    }
    if period < 1 || y.len() < period + 2 {
        return Err(ForecastError::TooShort {
            method: "tsglm",
            len: y.len(),
            need: period + 2,
        });
    }
    let targets = &y[period..];
    let total: f64 = targets.iter().sum();
    if total == 0.0 {
        return Ok(TsglmFit {
            period,
            coefficients: None,
            loglik: 0.0,
            iterations: 0,
            history: y.to_vec(),
        });
    }
    let mut beta = [(total / targets.len() as f64).ln(), 0.0, 0.0];
    let mut ll = loglik(y, period, beta);
    for iteration in 1..=config.max_iterations {
        let b = Vector3::from(beta);
        let mut grad = Vector3::zeros();
        let mut info = Matrix3::zeros();
        for t in period..y.len() {
            let x = covariates(y, t, period);
            let mu = eta(&b, &x).exp();
            grad += x * (y[t] - mu);
            info += x * x.transpose() * mu;
        }
        let step = info
            .pseudo_inverse(1e-10 * info.norm().max(f64::MIN_POSITIVE))
            .map(|p| p * grad)
            .unwrap_or(grad);
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let cand = [beta[0] + scale * step[0], beta[1] + scale * step[1], beta[2] + scale * step[2]];
            let l = loglik(y, period, cand);
            if l.is_finite() && l >= ll {
                accepted = Some((cand, l));
                break;
            }
            scale *= 0.5;
        }
        let Some((cand, l)) = accepted else {
            return Ok(done(beta, ll, iteration, y, period));
        };
        let gain = l - ll;
        beta = cand;
        ll = l;
        if gain <= config.tolerance * (ll.abs() + config.tolerance) {
            return Ok(done(beta, ll, iteration, y, period));
        }
    }
    Err(ForecastError::NotConverged {
        method: super::Method::Tsglm,
        iterations: config.max_iterations,
        best: Box::new(super::ForecastModel::from_fitted(
            super::Method::Tsglm,
            period,
            y,
            super::Fitted::Tsglm(done(beta, ll, config.max_iterations, y, period)),
            false,
        )),
    })
}

fn done(beta: [f64; 3], ll: f64, iterations: usize, y: &[f64], period: usize) -> TsglmFit {
    TsglmFit {
        period,
        coefficients: Some(beta),
        loglik: ll,
        iterations,
        history: y.to_vec(),
    }
}

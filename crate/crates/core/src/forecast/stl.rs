//! STL decomposition (inner loop only, no robustness weights) and the STLF
//! forecaster built on it.

use super::ets::{self, EtsFit};
use super::{FitConfig, ForecastError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StlParams {
    pub period: usize,
    pub seasonal_window: usize,
    pub seasonal_degree: usize,
    pub inner_iterations: usize,
}

impl StlParams {
    pub fn new(period: usize, seasonal_window: usize, seasonal_degree: usize) -> Self {
        Self {
            period,
            seasonal_window,
            seasonal_degree,
            inner_iterations: 2,
        }
    }

    /// Low-pass window: the smallest odd integer ≥ period.
    pub fn lowpass_window(&self) -> usize {
        next_odd(self.period)
    }

    pub fn trend_window(&self) -> usize {
        let p = self.period as f64;
        let ns = self.seasonal_window as f64;
        next_odd((1.5 * p / (1.0 - 1.5 / ns) + 0.5) as usize)
    }
}

fn next_odd(v: usize) -> usize {
    if v.is_multiple_of(2) {
        v + 1
    } else {
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub seasonal: Vec<f64>,
    pub trend: Vec<f64>,
    pub remainder: Vec<f64>,
}

/// Local regression of `y` (at positions 1..=n) evaluated at `x`, using the
/// `q` nearest points with tricube weights.
pub fn loess_at(y: &[f64], q: usize, degree: usize, x: f64) -> f64 {
    let n = y.len();
    let q = q.max(1);
    let (lo, hi) = if q >= n {
        (1, n)
    } else {
        let centre = x.round() as i64 - ((q - 1) / 2) as i64;
        let lo = centre.clamp(1, (n - q + 1) as i64) as usize;
        (lo, lo + q - 1)
    };
    let mut h = (x - lo as f64).max(hi as f64 - x);
    if q > n {
        h += ((q - n) / 2) as f64;
    }
    let mut w: Vec<f64> = (lo..=hi)
        .map(|j| {
            let r = (j as f64 - x).abs();
            if r <= 0.001 * h {
                1.0
            } else if r <= 0.999 * h {
                (1.0 - (r / h).powi(3)).powi(3)
            } else {
                0.0
            }
        })
        .collect();
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return y[(x.round() as usize).clamp(1, n) - 1];
    }
    w.iter_mut().for_each(|v| *v /= total);
    if degree > 0 && h > 0.0 {
        let a: f64 = w.iter().enumerate().map(|(i, wi)| wi * (lo + i) as f64).sum();
        let b: f64 = w.iter().enumerate().map(|(i, wi)| wi * ((lo + i) as f64 - a).powi(2)).sum();
        if b.sqrt() > 0.001 * (n as f64 - 1.0) {
            let c = (x - a) / b;
            for (i, wi) in w.iter_mut().enumerate() {
                *wi *= c * ((lo + i) as f64 - a) + 1.0;
            }
        }
    }
    w.iter().zip(&y[lo - 1..hi]).map(|(wi, yi)| wi * yi).sum()
}

fn moving_average(x: &[f64], len: usize) -> Vec<f64> {
    x.windows(len).map(|w| w.iter().sum::<f64>() / len as f64).collect()
}

pub fn decompose(y: &[f64], p: &StlParams) -> Result<Decomposition, ForecastError> {
    let n = y.len();
    let m = p.period;
    if m < 2 || n < 2 * m {
        return Err(ForecastError::TooShort {
            method: "stl",
            len: n,
            need: 2 * m.max(2),
        });
    }
    let (nl, nt) = (p.lowpass_window(), p.trend_window());
    let mut trend = vec![0.0; n];
    let mut seasonal = vec![0.0; n];
    for _ in 0..p.inner_iterations.max(1) {
        let detrended: Vec<f64> = y.iter().zip(&trend).map(|(a, b)| a - b).collect();
        let mut cycle = vec![0.0; n + 2 * m];
        for k in 0..m {
            let sub: Vec<f64> = detrended.iter().skip(k).step_by(m).copied().collect();
            for j in 0..sub.len() + 2 {
                cycle[j * m + k] = loess_at(&sub, p.seasonal_window, p.seasonal_degree, j as f64);
            }
        }
        let low = moving_average(&moving_average(&moving_average(&cycle, m), m), 3);
        debug_assert_eq!(low.len(), n);
        for i in 0..n {
            seasonal[i] = cycle[m + i] - loess_at(&low, nl, 1, (i + 1) as f64);
        }
        let adjusted: Vec<f64> = y.iter().zip(&seasonal).map(|(a, b)| a - b).collect();
        for (i, t) in trend.iter_mut().enumerate() {
            *t = loess_at(&adjusted, nt, 1, (i + 1) as f64);
        }
    }
    let remainder = (0..n).map(|i| y[i] - seasonal[i] - trend[i]).collect();
    Ok(Decomposition {
        seasonal,
        trend,
        remainder,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StlfFit {
    pub decomposition: Decomposition,
    /// Seasonal component of the last full period, repeated in forecasts.
    pub last_seasonal: Vec<f64>,
    pub adjusted: EtsFit,
}

impl StlfFit {
    pub fn predict(&self, h: usize) -> Vec<f64> {
        let m = self.last_seasonal.len();
        self.adjusted
            .predict(h)
            .into_iter()
            .enumerate()
            .map(|(i, v)| v + self.last_seasonal[i % m])
            .collect()
    }
}

pub fn fit(y: &[f64], period: usize, config: &FitConfig) -> Result<StlfFit, ForecastError> {
    if y.iter().any(|v| !v.is_finite()) {
        return Err(ForecastError::NonFinite("stlf"));
    }
    let params = StlParams::new(period, config.stl_seasonal_window, config.stl_seasonal_degree);
    let decomposition = decompose(y, &params)?;
    let n = y.len();
    let adjusted: Vec<f64> = y.iter().zip(&decomposition.seasonal).map(|(a, b)| a - b).collect();
    let fit = ets::fit_candidates(&ets::NONSEASONAL_CANDIDATES, &adjusted, period, config)?;
    Ok(StlfFit {
        last_seasonal: decomposition.seasonal[n - period..].to_vec(),
        decomposition,
        adjusted: fit,
    })
}

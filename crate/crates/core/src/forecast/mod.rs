//! Forecasting methods competing on monthly-accumulated fire counts.
//!
//! Every method except `tsglm` and `linreg` is fitted on Box-Cox transformed
//! MA-FC values. `tsglm` consumes raw counts and `linreg` consumes per-season
//! FSS. [`forecast_monthly`] and [`forecast_fss`] bring every method back to
//! the count scale.

pub mod arima;
pub mod ets;
pub mod mlp;
pub mod optim;
pub mod stl;
pub mod tsglm;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::stats;
use crate::transform::{boxcox, inv_boxcox, BoxCoxParams, TransformError};

/// Months per season window.
pub const PERIOD: usize = 7;
/// Transformed forecasts are capped at this multiple of the largest training
/// count (plus one) before inversion.
pub const COUNT_CAP_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Arima,
    Ets,
    Linreg,
    Mlp,
    Snaive,
    Stlf,
    Tsglm,
}

/// What a method is fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    BoxCox,
    Counts,
    Fss,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Arima,
        Method::Ets,
        Method::Linreg,
        Method::Mlp,
        Method::Snaive,
        Method::Stlf,
        Method::Tsglm,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            Method::Arima => "arima",
            Method::Ets => "ets",
            Method::Linreg => "linreg",
            Method::Mlp => "mlp",
            Method::Snaive => "snaive",
            Method::Stlf => "stlf",
            Method::Tsglm => "tsglm",
        }
    }

    pub fn scale(&self) -> Scale {
        match self {
            Method::Tsglm => Scale::Counts,
            Method::Linreg => Scale::Fss,
            _ => Scale::BoxCox,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Method {
    type Err = ForecastError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.id() == s.trim())
            .ok_or_else(|| ForecastError::UnknownMethod(s.to_owned()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub seed: u64,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub stl_seasonal_window: usize,
    pub stl_seasonal_degree: usize,
    pub mlp_hidden: usize,
    pub mlp_restarts: usize,
    pub mlp_max_epochs: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            max_iterations: 500,
            tolerance: 1e-8,
            stl_seasonal_window: 13,
            stl_seasonal_degree: 1,
            mlp_hidden: 5,
            mlp_restarts: 20,
            mlp_max_epochs: 1000,
        }
    }
}

impl FitConfig {
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// SplitMix64 finalizer over `seed` and a stream index, used to derive
/// independent seeds per cell and per restart.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
    let mut z = (seed ^ stream.wrapping_mul(GOLDEN)).wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Error)]
pub enum ForecastError {
    #[error("{method}: need at least {need} values, got {len}")]
    TooShort { method: &'static str, len: usize, need: usize },
    #[error("{0}: input contains non-finite values")]
    NonFinite(&'static str),
    #[error("value {0} is not a non-negative integer count")]
    Domain(f64),
    #[error("{method} did not converge within {iterations} iterations")]
    NotConverged {
        method: Method,
        iterations: usize,
        /// Best model found before the iteration limit.
        best: Box<ForecastModel>,
    },
    #[error("{0} forecasts per-season totals, not monthly values")]
    NotMonthly(Method),
    #[error("unknown method {0:?}")]
    UnknownMethod(String),
    #[error(transparent)]
    Transform(#[from] TransformError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linreg {
    pub intercept: f64,
    pub slope: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Fitted {
    /// Last full period of the training series.
    Snaive(Vec<f64>),
    Ets(ets::EtsFit),
    Stlf(stl::StlfFit),
    Arima(arima::ArimaFit),
    Tsglm(tsglm::TsglmFit),
    Mlp(mlp::MlpFit),
    Linreg(Linreg),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastModel {
    method: Method,
    period: usize,
    fitted: Fitted,
    train_max: f64,
    converged: bool,
}

impl ForecastModel {
    pub(crate) fn from_fitted(method: Method, period: usize, train: &[f64], fitted: Fitted, converged: bool) -> Self {
        Self {
            method,
            period,
            fitted,
            train_max: train.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            converged,
        }
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn fitted(&self) -> &Fitted {
        &self.fitted
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Largest training value on the model's input scale.
    pub fn train_max(&self) -> f64 {
        self.train_max
    }

    /// Point forecasts for horizons 1..=h on the model's input scale.
    pub fn predict(&self, h: usize) -> Vec<f64> {
        match &self.fitted {
            Fitted::Snaive(last) => (0..h).map(|i| last[i % last.len()]).collect(),
            Fitted::Ets(f) => f.predict(h),
            Fitted::Stlf(f) => f.predict(h),
            Fitted::Arima(f) => f.predict(h),
            Fitted::Tsglm(f) => f.predict(h),
            Fitted::Mlp(f) => f.predict(h),
            Fitted::Linreg(l) => (0..h).map(|i| l.intercept + l.slope * (l.n + i) as f64).collect(),
        }
    }

    /// One-line summary of the selected specification.
    pub fn describe(&self) -> String {
        match &self.fitted {
            Fitted::Snaive(_) if self.method == Method::Arima => "snaive fallback".into(),
            Fitted::Snaive(_) => format!("snaive[{}]", self.period),
            Fitted::Ets(f) => format!("{} aicc={:.6}", f.spec, f.aicc),
            Fitted::Stlf(f) => format!("STL+{} aicc={:.6}", f.adjusted.spec, f.adjusted.aicc),
            Fitted::Arima(f) => format!("{}[{}] aicc={:.6}", f.order, f.period, f.aicc),
            Fitted::Tsglm(f) => match f.coefficients {
                Some([b0, a1, am]) => format!("tsglm b0={b0:.6} a1={a1:.6} a{}={am:.6}", f.period),
                None => "tsglm all-zero".into(),
            },
            Fitted::Mlp(f) => format!("mlp 7-{}-1 restart={} sse={:.6}", f.hidden, f.restart, f.sse),
            Fitted::Linreg(l) => format!("linreg intercept={:.6} slope={:.6}", l.intercept, l.slope),
        }
    }
}

fn check_finite(method: &'static str, train: &[f64]) -> Result<(), ForecastError> {
    if train.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(ForecastError::NonFinite(method))
    }
}

fn need(method: &'static str, train: &[f64], need: usize) -> Result<(), ForecastError> {
    if train.len() < need {
        return Err(ForecastError::TooShort {
            method,
            len: train.len(),
            need,
        });
    }
    check_finite(method, train)
}

fn finish(model: ForecastModel, iterations: usize) -> Result<ForecastModel, ForecastError> {
    if model.converged {
        Ok(model)
    } else {
        Err(ForecastError::NotConverged {
            method: model.method,
            iterations,
            best: Box::new(model),
        })
    }
}

pub fn fit_snaive(train: &[f64], period: usize) -> Result<ForecastModel, ForecastError> {
    need("snaive", train, period.max(1))?;
    let last = train[train.len() - period..].to_vec();
    Ok(ForecastModel::from_fitted(Method::Snaive, period, train, Fitted::Snaive(last), true))
}

pub fn fit_ets(train: &[f64], period: usize, config: &FitConfig) -> Result<ForecastModel, ForecastError> {
    need("ets", train, 2 * period)?;
    let f = ets::fit_candidates(&ets::SEASONAL_CANDIDATES, train, period, config)?;
    let converged = f.converged;
    finish(ForecastModel::from_fitted(Method::Ets, period, train, Fitted::Ets(f), converged), config.max_iterations)
}

pub fn fit_stlf(train: &[f64], period: usize, config: &FitConfig) -> Result<ForecastModel, ForecastError> {
    need("stlf", train, 2 * period)?;
    let f = stl::fit(train, period, config)?;
    let converged = f.adjusted.converged;
    finish(ForecastModel::from_fitted(Method::Stlf, period, train, Fitted::Stlf(f), converged), config.max_iterations)
}

/// Falls back to the seasonal naive forecast, with a warning, when no order
/// yields an admissible fit.
pub fn fit_arima(train: &[f64], period: usize, config: &FitConfig) -> Result<ForecastModel, ForecastError> {
    need("arima", train, 3 * period)?;
    match arima::fit(train, period, config) {
        Some(f) => {
            let converged = f.converged;
            finish(ForecastModel::from_fitted(Method::Arima, period, train, Fitted::Arima(f), converged), config.max_iterations)
        }
        None => {
            log::warn!("arima: no admissible order, using the seasonal naive forecast");
            let last = train[train.len() - period..].to_vec();
            Ok(ForecastModel::from_fitted(Method::Arima, period, train, Fitted::Snaive(last), true))
        }
    }
}

pub fn fit_tsglm(train: &[f64], period: usize, config: &FitConfig) -> Result<ForecastModel, ForecastError> {
    let f = tsglm::fit(train, period, config)?;
    Ok(ForecastModel::from_fitted(Method::Tsglm, period, train, Fitted::Tsglm(f), true))
}

pub fn fit_mlp(train: &[f64], period: usize, config: &FitConfig) -> Result<ForecastModel, ForecastError> {
    need("mlp", train, 3 * period)?;
    let f = mlp::fit(train, config)?;
    Ok(ForecastModel::from_fitted(Method::Mlp, period, train, Fitted::Mlp(f), true))
}

/// OLS line through per-season FSS against the season index 0..n.
pub fn fit_linreg(fss_train: &[f64]) -> Result<ForecastModel, ForecastError> {
    need("linreg", fss_train, 2)?;
    let (intercept, slope) = stats::ols_line(fss_train);
    let l = Linreg {
        intercept,
        slope,
        n: fss_train.len(),
    };
    Ok(ForecastModel::from_fitted(Method::Linreg, 1, fss_train, Fitted::Linreg(l), true))
}

/// Fits `method` on `input`, which must be on the method's [`Scale`].
pub fn fit(method: Method, input: &[f64], period: usize, config: &FitConfig) -> Result<ForecastModel, ForecastError> {
    match method {
        Method::Snaive => fit_snaive(input, period),
        Method::Ets => fit_ets(input, period, config),
        Method::Stlf => fit_stlf(input, period, config),
        Method::Arima => fit_arima(input, period, config),
        Method::Tsglm => fit_tsglm(input, period, config),
        Method::Mlp => fit_mlp(input, period, config),
        Method::Linreg => fit_linreg(input),
    }
}

/// Monthly forecasts on the count scale, clamped to `[0, cap]` with
/// `cap = 10·(largest training count + 1)`. Transformed predictions are
/// capped before inversion and map to 0 below the transform's domain.
pub fn forecast_monthly(model: &ForecastModel, h: usize, params: &BoxCoxParams) -> Result<Vec<f64>, ForecastError> {
    let raw = model.predict(h);
    if let Some(bad) = raw.iter().find(|v| v.is_nan()) {
        log::debug!("{}: NaN forecast {bad}", model.method);
        return Err(ForecastError::NonFinite(model.method.id()));
    }
    match model.method.scale() {
        Scale::Fss => Err(ForecastError::NotMonthly(model.method)),
        Scale::Counts => {
            let cap = COUNT_CAP_FACTOR * (model.train_max.max(0.0) + 1.0);
            Ok(raw.into_iter().map(|v| v.clamp(0.0, cap)).collect())
        }
        Scale::BoxCox => {
            let cap = COUNT_CAP_FACTOR * (inv_boxcox(model.train_max, params)? + 1.0);
            let hi = boxcox(cap, params)?;
            let lambda = params.lambda();
            raw.into_iter()
                .map(|v| {
                    if lambda > 0.0 && lambda * v + 1.0 <= 0.0 {
                        Ok(0.0)
                    } else {
                        Ok(inv_boxcox(v.min(hi), params)?)
                    }
                })
                .collect()
        }
    }
}

/// Per-season FSS forecasts for the next `horizon_seasons` seasons.
pub fn forecast_fss(model: &ForecastModel, horizon_seasons: usize, params: &BoxCoxParams) -> Result<Vec<f64>, ForecastError> {
    if model.method.scale() == Scale::Fss {
        return Ok(model.predict(horizon_seasons).into_iter().map(|v| v.max(0.0)).collect());
    }
    let p = model.period;
    let monthly = forecast_monthly(model, p * horizon_seasons, params)?;
    Ok(monthly.chunks(p).map(|c| c.iter().sum()).collect())
}

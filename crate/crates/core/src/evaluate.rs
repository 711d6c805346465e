//! Error metrics, per-cell model selection and cross-method tests.

use std::collections::BTreeMap;
use std::str::FromStr;

use statrs::distribution::{ChiSquared, Continuous, ContinuousCDF, Normal};
use thiserror::Error;

use crate::forecast::Method;
use crate::hexgrid::CellId;
use crate::stats;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvaluateError {
    #[error("length mismatch: {observed} observed vs {forecast} forecast values")]
    Length { observed: usize, forecast: usize },
    #[error("no values to evaluate")]
    Empty,
    #[error("training series too short for the scaling denominator")]
    ShortTrain,
    #[error("MASE undefined: the naive in-sample error is zero")]
    UndefinedScale,
    #[error("no report with a finite error")]
    NoFiniteReports,
    #[error("need at least {need} {what}, got {got}")]
    TooFew { what: &'static str, need: usize, got: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("unsupported significance level {0}; use 0.05 or 0.001")]
    Alpha(f64),
    #[error("critical values are tabulated for 2 to 10 methods, got {0}")]
    Methods(usize),
    #[error("unknown selection metric {0:?}")]
    Metric(String),
}

fn abs_errors(observed: &[f64], forecast: &[f64]) -> Result<Vec<f64>, EvaluateError> {
    if observed.len() != forecast.len() {
        return Err(EvaluateError::Length {
            observed: observed.len(),
            forecast: forecast.len(),
        });
    }
    if observed.is_empty() {
        return Err(EvaluateError::Empty);
    }
    Ok(observed.iter().zip(forecast).map(|(y, f)| (y - f).abs()).collect())
}

pub fn mae(observed: &[f64], forecast: &[f64]) -> Result<f64, EvaluateError> {
    Ok(stats::mean(&abs_errors(observed, forecast)?))
}

/// In-sample MAE of the naive forecast at `lag` (1 = non-seasonal).
pub fn naive_scale(train: &[f64], lag: usize) -> Result<f64, EvaluateError> {
    if lag == 0 || train.len() <= lag {
        return Err(EvaluateError::ShortTrain);
    }
    let s: f64 = train.windows(lag + 1).map(|w| (w[lag] - w[0]).abs()).sum();
    let scale = s / (train.len() - lag) as f64;
    if scale > 0.0 && scale.is_finite() {
        Ok(scale)
    } else {
        Err(EvaluateError::UndefinedScale)
    }
}

/// MASE against the one-step naive forecast on the training set.
pub fn mase_nonseasonal(observed: &[f64], forecast: &[f64], train: &[f64]) -> Result<f64, EvaluateError> {
    mase_seasonal(observed, forecast, train, 1)
}

/// MASE against the seasonal naive forecast (lag `period`) on the training set.
pub fn mase_seasonal(observed: &[f64], forecast: &[f64], train: &[f64], period: usize) -> Result<f64, EvaluateError> {
    let err = mae(observed, forecast)?;
    Ok(err / naive_scale(train, period)?)
}

/// Accuracy of one method in one cell. `None` marks an undefined value
/// (MASE with a zero denominator, or monthly metrics for `linreg`).
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub cell: CellId,
    pub method: Method,
    pub mae_monthly: Option<f64>,
    pub mase_monthly: Option<f64>,
    pub mae_fss: f64,
    pub nmae_fss: Option<f64>,
    pub mase_fss: Option<f64>,
}

/// Observed and forecast values for one cell and method, on the count scale.
#[derive(Debug, Clone, Copy)]
pub struct CellOutcome<'a> {
    pub train_monthly: &'a [f64],
    pub test_monthly: &'a [f64],
    /// Absent for methods that forecast FSS directly.
    pub forecast_monthly: Option<&'a [f64]>,
    pub train_fss: &'a [f64],
    pub test_fss: &'a [f64],
    pub forecast_fss: &'a [f64],
    pub fss_mean: f64,
    pub period: usize,
}

fn defined(r: Result<f64, EvaluateError>) -> Result<Option<f64>, EvaluateError> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(EvaluateError::UndefinedScale) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn error_report(cell: CellId, method: Method, o: &CellOutcome<'_>) -> Result<ErrorReport, EvaluateError> {
    let (mae_monthly, mase_monthly) = match o.forecast_monthly {
        Some(f) => (
            Some(mae(o.test_monthly, f)?),
            defined(mase_seasonal(o.test_monthly, f, o.train_monthly, o.period))?,
        ),
        None => (None, None),
    };
    let mae_fss = mae(o.test_fss, o.forecast_fss)?;
    let nmae_fss = (o.fss_mean > 0.0).then(|| mae_fss / o.fss_mean);
    let mase_fss = defined(mase_nonseasonal(o.test_fss, o.forecast_fss, o.train_fss))?;
    Ok(ErrorReport {
        cell,
        method,
        mae_monthly,
        mase_monthly,
        mae_fss,
        nmae_fss,
        mase_fss,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectionMetric {
    #[default]
    Mae,
    Mase,
}

impl FromStr for SelectionMetric {
    type Err = EvaluateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mae" => Ok(Self::Mae),
            "mase" => Ok(Self::Mase),
            _ => Err(EvaluateError::Metric(s.to_owned())),
        }
    }
}

/// Method with the smallest monthly error in one cell; ties go to the
/// lexicographically smaller method id. With [`SelectionMetric::Mase`],
/// methods whose MASE is undefined are compared by MAE instead (the MASE
/// denominator is shared within a cell, so both orderings agree).
pub fn select_best(reports: &[ErrorReport], metric: SelectionMetric) -> Result<Method, EvaluateError> {
    let use_mase = metric == SelectionMetric::Mase && reports.iter().all(|r| r.mae_monthly.is_none() || r.mase_monthly.is_some());
    let key = |r: &ErrorReport| if use_mase { r.mase_monthly } else { r.mae_monthly };
    let mut best: Option<(Method, f64)> = None;
    for r in reports {
        let Some(v) = key(r).filter(|v| v.is_finite()) else {
            continue;
        };
        let better = match best {
            None => true,
            Some((m, b)) => v < b || (v == b && r.method < m),
        };
        if better {
            best = Some((r.method, v));
        }
    }
    best.map(|(m, _)| m).ok_or(EvaluateError::NoFiniteReports)
}

/// Outcome of a rank-based test. `mean_ranks` is filled for Friedman (one
/// per column, rank 1 = smallest error) and empty otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonResult {
    pub statistic: f64,
    pub p_value: f64,
    pub mean_ranks: Vec<f64>,
    pub n: usize,
    /// Every paired difference was zero.
    pub degenerate: bool,
}

/// Ranks 1..n with ties averaged.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Friedman test on a cells × methods error matrix.
pub fn friedman_test(errors: &[Vec<f64>]) -> Result<ComparisonResult, EvaluateError> {
    let n = errors.len();
    if n < 10 {
        return Err(EvaluateError::TooFew { what: "cells", need: 10, got: n });
    }
    let k = errors[0].len();
    if k < 2 {
        return Err(EvaluateError::TooFew { what: "methods", need: 2, got: k });
    }
    if errors.iter().any(|row| row.len() != k || row.iter().any(|v| !v.is_finite())) {
        return Err(EvaluateError::Degenerate("rows must be finite and of equal width".into()));
    }
    let mut sums = vec![0.0; k];
    for row in errors {
        for (s, r) in sums.iter_mut().zip(average_ranks(row)) {
            *s += r;
        }
    }
    let mean_ranks: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();
    let (nf, kf) = (n as f64, k as f64);
    let sq: f64 = mean_ranks.iter().map(|r| r * r).sum();
    let statistic = (12.0 * nf / (kf * (kf + 1.0)) * (sq - kf * (kf + 1.0).powi(2) / 4.0)).max(0.0);
    let chi = ChiSquared::new(kf - 1.0).map_err(|e| EvaluateError::Degenerate(e.to_string()))?;
    Ok(ComparisonResult {
        statistic,
        p_value: chi.sf(statistic).clamp(0.0, 1.0),
        mean_ranks,
        n,
        degenerate: false,
    })
}

/// Two-tailed Nemenyi critical values (studentized range / √2), k = 2..=10.
pub const Q_005: [f64; 9] = [1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164];
pub const Q_0001: [f64; 9] = [3.291, 3.580, 3.754, 3.878, 3.974, 4.052, 4.117, 4.174, 4.224];

pub fn nemenyi_q(k: usize, alpha: f64) -> Result<f64, EvaluateError> {
    let table = if alpha == 0.05 {
        &Q_005
    } else if alpha == 0.001 {
        &Q_0001
    } else {
        return Err(EvaluateError::Alpha(alpha));
    };
    if !(2..=10).contains(&k) {
        return Err(EvaluateError::Methods(k));
    }
    Ok(table[k - 2])
}

/// Critical difference of mean ranks: `q_α·√(k(k+1)/(6N))`.
pub fn nemenyi_cd(k: usize, n: usize, alpha: f64) -> Result<f64, EvaluateError> {
    if n < 2 {
        return Err(EvaluateError::TooFew { what: "cells", need: 2, got: n });
    }
    let q = nemenyi_q(k, alpha)?;
    let kf = k as f64;
    Ok(q * (kf * (kf + 1.0) / (6.0 * n as f64)).sqrt())
}

/// `P(range of k iid standard normals ≤ q)` by Simpson quadrature.
pub fn studentized_range_cdf(q: f64, k: usize) -> f64 {
    let norm = Normal::standard();
    let (lo, hi, steps) = (-9.0, 9.0, 3600);
    let h = (hi - lo) / steps as f64;
    let f = |z: f64| norm.pdf(z) * (norm.cdf(z) - norm.cdf(z - q)).max(0.0).powi(k as i32 - 1);
    let mut s = f(lo) + f(hi);
    for i in 1..steps {
        let z = lo + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(z);
    }
    (k as f64 * s * h / 3.0).min(1.0)
}

/// Upper-`alpha` quantile of the studentized range (infinite degrees of
/// freedom), by bisection.
pub fn studentized_range_quantile(alpha: f64, k: usize) -> f64 {
    let (mut lo, mut hi) = (0.0, 20.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if studentized_range_cdf(mid, k) < 1.0 - alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Wilcoxon signed-rank test of `a − b`, two-sided, normal approximation
/// with tie correction. The statistic is the positive rank sum W⁺.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<ComparisonResult, EvaluateError> {
    if a.len() != b.len() {
        return Err(EvaluateError::Length {
            observed: a.len(),
            forecast: b.len(),
        });
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|v| *v != 0.0).collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(EvaluateError::Degenerate("non-finite difference".into()));
    }
    if d.is_empty() && !a.is_empty() {
        return Ok(ComparisonResult {
            statistic: 0.0,
            p_value: 1.0,
            mean_ranks: Vec::new(),
            n: 0,
            degenerate: true,
        });
    }
    let n = d.len();
    if n < 10 {
        return Err(EvaluateError::TooFew { what: "non-zero differences", need: 10, got: n });
    }
    let mags: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = average_ranks(&mags);
    let w_plus: f64 = ranks.iter().zip(&d).filter(|(_, v)| **v > 0.0).map(|(r, _)| r).sum();
    let mut ties = BTreeMap::<u64, usize>::new();
    for m in &mags {
        *ties.entry(m.to_bits()).or_default() += 1;
    }
    let tie_term: f64 = ties.values().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
    let z = (w_plus - mean) / var.sqrt();
    let p = 2.0 * Normal::standard().sf(z.abs());
    Ok(ComparisonResult {
        statistic: w_plus,
        p_value: p.clamp(0.0, 1.0),
        mean_ranks: Vec::new(),
        n,
        degenerate: false,
    })
}

/// Five-number summary after removing values above `Q3 + 1.5·IQR`.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub removed: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

pub fn summarize(values: &[f64]) -> Option<Summary> {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return None;
    }
    let fence = stats::upper_fence(&finite);
    let kept = stats::sorted(&finite.iter().copied().filter(|v| *v <= fence).collect::<Vec<_>>());
    Some(Summary {
        n: kept.len(),
        removed: finite.len() - kept.len(),
        min: kept[0],
        q1: stats::quantile_sorted(&kept, 0.25),
        median: stats::quantile_sorted(&kept, 0.5),
        q3: stats::quantile_sorted(&kept, 0.75),
        max: kept[kept.len() - 1],
    })
}

//! Monthly-accumulated fire counts (MA-FC), train/test split and the Box-Cox
//! transform with Guerrero's λ.

use chrono::Months;
use thiserror::Error;

use crate::hexgrid::CellId;
use crate::ingest::DailySeries;
use crate::season::SeasonProfile;
use crate::stats;

pub const LAMBDA_MIN: f64 = -1.0;
pub const LAMBDA_MAX: f64 = 2.0;
/// Offset added before the transform so zero counts stay in the domain.
pub const COUNT_SHIFT: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("season window {0} is not covered by the daily series")]
    WindowOutsideSeries(usize),
    #[error("profile belongs to cell {profile}, series to {series}")]
    CellMismatch { profile: CellId, series: CellId },
    #[error("cannot train on {train} of {total} seasons")]
    Split { train: usize, total: usize },
    #[error("Box-Cox input {0} is outside the domain")]
    Domain(f64),
    #[error("need at least two complete blocks of {period}, got {len} values")]
    TooShort { len: usize, period: usize },
    #[error("λ = {0} is outside [-1, 2]")]
    Lambda(f64),
}

/// Monthly totals inside consecutive season windows, `period` per season.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthlySeries {
    pub cell: CellId,
    pub period: usize,
    pub values: Vec<f64>,
}

impl MonthlySeries {
    pub fn seasons(&self) -> usize {
        self.values.len() / self.period
    }

    /// `(season, month_offset)` of position `i`.
    pub fn position(&self, i: usize) -> (usize, usize) {
        (i / self.period, i % self.period)
    }

    /// Sum of each season's months.
    pub fn season_totals(&self) -> Vec<f64> {
        self.values.chunks(self.period).map(|c| c.iter().sum()).collect()
    }
}

pub fn monthly_accumulate(s: &DailySeries, profile: &SeasonProfile) -> Result<MonthlySeries, TransformError> {
    if s.cell != profile.cell {
        return Err(TransformError::CellMismatch {
            profile: profile.cell,
            series: s.cell,
        });
    }
    let period = profile.window_months as usize;
    let mut values = Vec::with_capacity(profile.windows.len() * period);
    for (k, w) in profile.windows.iter().enumerate() {
        for first in w.months() {
            let last = (first + Months::new(1)).pred_opt().expect("date in range");
            let (Some(a), Some(b)) = (s.offset(first), s.offset(last)) else {
                return Err(TransformError::WindowOutsideSeries(k));
            };
            values.push(s.counts[a..=b].iter().map(|&c| f64::from(c)).sum());
        }
    }
    Ok(MonthlySeries {
        cell: s.cell,
        period,
        values,
    })
}

pub fn split_train_test(m: &MonthlySeries, train_seasons: usize) -> Result<(MonthlySeries, MonthlySeries), TransformError> {
    let total = m.seasons();
    if train_seasons == 0 || train_seasons >= total {
        return Err(TransformError::Split {
            train: train_seasons,
            total,
        });
    }
    let cut = train_seasons * m.period;
    let part = |values: &[f64]| MonthlySeries {
        cell: m.cell,
        period: m.period,
        values: values.to_vec(),
    };
    Ok((part(&m.values[..cut]), part(&m.values[cut..])))
}

/// Candidate λ values: −1.00, −0.99, …, 2.00.
pub fn lambda_grid() -> impl Iterator<Item = f64> {
    (-100..=200).map(|i| f64::from(i) / 100.0)
}

/// Coefficient of variation of `s_i / m_i^(1−λ)` over the blocks, or `None`
/// when it is not finite.
pub fn guerrero_cv(blocks: &[(f64, f64)], lambda: f64) -> Option<f64> {
    let r: Vec<f64> = blocks.iter().map(|&(m, s)| s / m.powf(1.0 - lambda)).collect();
    let cv = stats::sample_sd(&r) / stats::mean(&r);
    cv.is_finite().then_some(cv)
}

/// `(mean, sample sd)` of each complete block of `period` values.
pub fn guerrero_blocks(x: &[f64], period: usize) -> Vec<(f64, f64)> {
    x.chunks_exact(period)
        .map(|b| (stats::mean(b), stats::sample_sd(b)))
        .collect()
}

/// Guerrero's λ: the grid value minimizing the coefficient of variation of
/// block dispersions scaled by `mean^(1−λ)`. Falls back to λ = 1 when no
/// candidate gives a finite objective (e.g. every block is constant).
pub fn guerrero_lambda(x: &[f64], period: usize) -> Result<f64, TransformError> {
    if let Some(&bad) = x.iter().find(|&&v| v.is_nan() || v <= 0.0) {
        return Err(TransformError::Domain(bad));
    }
    if period < 2 || x.len() < 2 * period {
        return Err(TransformError::TooShort { len: x.len(), period });
    }
    let blocks = guerrero_blocks(x, period);
    let mut best = (f64::INFINITY, 1.0);
    for lambda in lambda_grid() {
        if let Some(cv) = guerrero_cv(&blocks, lambda) {
            if cv < best.0 {
                best = (cv, lambda);
            }
        }
    }
    Ok(best.1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxCoxParams {
    lambda: f64,
    shift: f64,
}

impl BoxCoxParams {
    pub fn new(lambda: f64, shift: f64) -> Result<Self, TransformError> {
        if !(LAMBDA_MIN..=LAMBDA_MAX).contains(&lambda) {
            return Err(TransformError::Lambda(lambda));
        }
        if !(shift >= 0.0 && shift.is_finite()) {
            return Err(TransformError::Domain(shift));
        }
        Ok(Self { lambda, shift })
    }

    /// λ from the training counts (shifted by one), shift of one.
    pub fn for_counts(train: &[f64], period: usize) -> Result<Self, TransformError> {
        let shifted: Vec<f64> = train.iter().map(|v| v + COUNT_SHIFT).collect();
        Self::new(guerrero_lambda(&shifted, period)?, COUNT_SHIFT)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }
}

pub fn boxcox(x: f64, p: &BoxCoxParams) -> Result<f64, TransformError> {
    let v = x + p.shift;
    if v.is_nan() || v <= 0.0 {
        return Err(TransformError::Domain(x));
    }
    Ok(if p.lambda == 0.0 {
        v.ln()
    } else {
        (v.powf(p.lambda) - 1.0) / p.lambda
    })
}

/// Inverse transform minus the shift, clamped at zero.
pub fn inv_boxcox(y: f64, p: &BoxCoxParams) -> Result<f64, TransformError> {
    let v = if p.lambda == 0.0 {
        y.exp()
    } else {
        let base = p.lambda * y + 1.0;
        if base.is_nan() || base <= 0.0 {
            return Err(TransformError::Domain(y));
        }
        base.powf(1.0 / p.lambda)
    };
    if !v.is_finite() {
        return Err(TransformError::Domain(y));
    }
    Ok((v - p.shift).max(0.0))
}

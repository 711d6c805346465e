//! Fire-season lengths, peak months, season windows and severity (FSS).
//!
//! A season length is measured per calendar year: the daily series is smoothed
//! with a 7-day centered moving average, the longest run of "fireless" days
//! (smoothed value below 1/7, i.e. a week without detections) is found within
//! the year, wrapping from December into January of the same year, and the
//! rest of the year is the season. One gap is removed per year, not one per
//! whole series.

use std::ops::Range;

use chrono::{Datelike, Months, NaiveDate};
use thiserror::Error;

use crate::hexgrid::CellId;
use crate::ingest::DailySeries;
use crate::stats;

pub const SMOOTHING_WINDOW: usize = 7;
/// Mean month length used to turn the global percentile length into months.
pub const DAYS_PER_MONTH: f64 = 30.44;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeasonError {
    #[error("moving-average window must be odd and at least 1, got {0}")]
    Window(usize),
    #[error("input is empty")]
    Empty,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("series has no detections")]
    AllZero,
    #[error("percentile {0} is outside (0, 100]")]
    Percentile(f64),
    #[error("season window must span an odd number of months between 1 and 11, got {0}")]
    WindowMonths(u32),
}

/// Inclusive date interval of one season.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeasonWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl SeasonWindow {
    pub fn contains(&self, d: NaiveDate) -> bool {
        self.start <= d && d <= self.end
    }

    /// First day of each calendar month in the window.
    pub fn months(&self) -> Vec<NaiveDate> {
        let mut out = Vec::new();
        let mut m = self.start;
        while m <= self.end {
            out.push(m);
            m = m + Months::new(1);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeasonProfile {
    pub cell: CellId,
    /// Season length in days for each calendar year of the series.
    pub yearly_lengths: Vec<u32>,
    pub mean_length_days: f64,
    /// OLS slope of `yearly_lengths`, days per year.
    pub length_trend: f64,
    pub peak_month: u32,
    pub window_months: u32,
    /// Retained windows; the first and last year's windows are dropped.
    pub windows: Vec<SeasonWindow>,
    /// Raw detections inside each window.
    pub fss: Vec<u64>,
    pub fss_mean: f64,
    /// OLS slope of `fss`, detections per season.
    pub fss_trend: f64,
}

/// Centered moving average; near the ends the window is truncated to the
/// available neighbours.
pub fn smooth_moving_average(counts: &[f64], window: usize) -> Result<Vec<f64>, SeasonError> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(SeasonError::Window(window));
    }
    if counts.is_empty() {
        return Err(SeasonError::Empty);
    }
    let h = window / 2;
    let n = counts.len();
    Ok((0..n)
        .map(|i| {
            let lo = i.saturating_sub(h);
            let hi = (i + h).min(n - 1);
            counts[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect())
}

/// Index ranges of the complete calendar years covered by the series.
pub fn year_cycles(s: &DailySeries) -> Vec<Range<usize>> {
    let Some(last) = s.counts.len().checked_sub(1) else {
        return Vec::new();
    };
    let end = s.start_date + chrono::Days::new(last as u64);
    let mut out = Vec::new();
    for year in s.start_date.year()..=end.year() {
        let first = NaiveDate::from_ymd_opt(year, 1, 1).expect("valid date");
        let dec31 = NaiveDate::from_ymd_opt(year, 12, 31).expect("valid date");
        if let (Some(a), Some(b)) = (s.offset(first), s.offset(dec31)) {
            out.push(a..b + 1);
        }
    }
    out
}

/// Longest run of `true`, treating the slice as circular.
fn longest_circular_run(flags: &[bool]) -> usize {
    if flags.iter().all(|&f| f) {
        return flags.len();
    }
    let lead = flags.iter().take_while(|&&f| f).count();
    let trail = flags.iter().rev().take_while(|&&f| f).count();
    let mut best = lead + trail;
    let mut run = 0;
    for &f in flags {
        run = if f { run + 1 } else { 0 };
        best = best.max(run);
    }
    best
}

/// Season length in days for each complete calendar year.
pub fn estimate_season_lengths(s: &DailySeries) -> Result<Vec<u32>, SeasonError> {
    let cycles = year_cycles(s);
    if cycles.is_empty() {
        return Err(SeasonError::InsufficientData(
            "series does not cover a full calendar year".into(),
        ));
    }
    let raw: Vec<f64> = s.counts.iter().map(|&c| f64::from(c)).collect();
    let smooth = smooth_moving_average(&raw, SMOOTHING_WINDOW)?;
    let quiet = 1.0 / SMOOTHING_WINDOW as f64;
    Ok(cycles
        .into_iter()
        .map(|r| {
            let len = r.len();
            let fireless: Vec<bool> = smooth[r].iter().map(|&v| v < quiet).collect();
            (len - longest_circular_run(&fireless)) as u32
        })
        .collect())
}

/// Drops values above `Q3 + 1.5·IQR` (type-7 quartiles).
pub fn remove_outlier_lengths(lengths: &[f64]) -> Vec<f64> {
    if lengths.is_empty() {
        return Vec::new();
    }
    let fence = stats::upper_fence(lengths);
    lengths.iter().copied().filter(|&x| x <= fence).collect()
}

/// The `percentile`-th percentile of per-cell mean lengths, in whole months
/// (`ceil(days / 30.44)`).
pub fn global_season_length(all_mean_lengths: &[f64], percentile: f64) -> Result<u32, SeasonError> {
    if !(percentile > 0.0 && percentile <= 100.0) {
        return Err(SeasonError::Percentile(percentile));
    }
    if all_mean_lengths.is_empty() {
        return Err(SeasonError::Empty);
    }
    let q = stats::quantile_sorted(&stats::sorted(all_mean_lengths), percentile / 100.0);
    Ok((q / DAYS_PER_MONTH).ceil() as u32)
}

/// Window length actually used for a global length: the next odd number, kept
/// within 1..=11 so consecutive windows never overlap.
pub fn window_months(global_length_months: u32) -> u32 {
    let odd = global_length_months | 1;
    odd.clamp(1, 11)
}

/// Calendar month (1–12) with the largest total detections over all years;
/// ties go to the earlier month.
pub fn peak_month(s: &DailySeries) -> Result<u32, SeasonError> {
    let mut totals = [0u64; 12];
    let mut d = s.start_date;
    for &c in &s.counts {
        totals[d.month0() as usize] += u64::from(c);
        d = d.succ_opt().expect("date in range");
    }
    let best = totals.iter().copied().max().unwrap_or(0);
    if best == 0 {
        return Err(SeasonError::AllZero);
    }
    Ok(totals.iter().position(|&t| t == best).expect("max exists") as u32 + 1)
}

/// Retention rule: at least one detection in every calendar year.
pub fn active_every_year(s: &DailySeries) -> bool {
    let cycles = year_cycles(s);
    !cycles.is_empty() && cycles.into_iter().all(|r| s.counts[r].iter().any(|&c| c > 0))
}

/// OLS slope against indices `0..n`.
pub fn linear_trend(values: &[f64]) -> Result<f64, SeasonError> {
    if values.len() < 2 {
        return Err(SeasonError::InsufficientData("a trend needs at least 2 values".into()));
    }
    Ok(stats::ols_line(values).1)
}

/// Window of `months` calendar months centered on `peak` in `year`.
pub fn season_window(year: i32, peak: u32, months: u32) -> SeasonWindow {
    let half = (months / 2) as i32;
    let first = NaiveDate::from_ymd_opt(year, peak, 1).expect("valid month");
    let start = shift_months(first, -half);
    let end = shift_months(first, half + 1).pred_opt().expect("date in range");
    SeasonWindow { start, end }
}

fn shift_months(d: NaiveDate, k: i32) -> NaiveDate {
    if k >= 0 {
        d + Months::new(k as u32)
    } else {
        d - Months::new((-k) as u32)
    }
}

pub fn build_profile(s: &DailySeries, global_length_months: u32) -> Result<SeasonProfile, SeasonError> {
    let m = global_length_months;
    if m.is_multiple_of(2) || !(1..=11).contains(&m) {
        return Err(SeasonError::WindowMonths(m));
    }
    let yearly_lengths = estimate_season_lengths(s)?;
    let peak = peak_month(s)?;

    let first_year = s.start_date.year();
    let last_year = s.end_date().year();
    let mut windows = Vec::new();
    for year in first_year + 1..last_year {
        let w = season_window(year, peak, m);
        if s.offset(w.start).is_none() || s.offset(w.end).is_none() {
            return Err(SeasonError::InsufficientData(format!(
                "season window {}..{} is not covered by the series",
                w.start, w.end
            )));
        }
        windows.push(w);
    }
    if windows.len() < 3 {
        return Err(SeasonError::InsufficientData(format!(
            "{} seasons remain after dropping the first and last",
            windows.len()
        )));
    }
    let fss: Vec<u64> = windows
        .iter()
        .map(|w| {
            let (a, b) = (s.offset(w.start).unwrap(), s.offset(w.end).unwrap());
            s.counts[a..=b].iter().map(|&c| u64::from(c)).sum()
        })
        .collect();

    let lengths: Vec<f64> = yearly_lengths.iter().map(|&l| f64::from(l)).collect();
    let fss_f: Vec<f64> = fss.iter().map(|&x| x as f64).collect();
    let length_trend = if lengths.len() >= 2 { linear_trend(&lengths)? } else { 0.0 };
    Ok(SeasonProfile {
        cell: s.cell,
        mean_length_days: stats::mean(&lengths),
        length_trend,
        yearly_lengths,
        peak_month: peak,
        window_months: m,
        fss_mean: stats::mean(&fss_f),
        fss_trend: linear_trend(&fss_f)?,
        windows,
        fss,
    })
}

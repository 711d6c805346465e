//! Seeded synthetic detections with planted fire seasons.
//!
//! Each synthetic cell gets one fire season per year. The generative model,
//! with `d` the day offset from the season centre:
//!
//! * peak month `P` ~ uniform on 1..=12 per cell; the season of year `y` is
//!   centred on the middle day of month `P` of year `y`, i.e. the
//!   `(days_in_month − 1) / 2`-th day (0-based).
//! * base length `L₀` ~ uniform on `season_days`; the season of year `y` has
//!   length `L_y = L₀ + J`, `J` uniform on `−length_jitter..=length_jitter`.
//!   Active days are `centre − ⌊L_y/2⌋ .. centre − ⌊L_y/2⌋ + L_y − 1`.
//! * multiplier `m_y = exp(trend·(y − ȳ) + s·Z)`, `Z` ~ N(0,1), `ȳ` the
//!   midpoint of the study years, `trend` ~ uniform on `trend` and the
//!   per-cell noise level `s` ~ uniform on `year_noise`.
//! * on active days detections are Poisson with rate
//!   `base·m_y·(FLOOR + (1 − FLOOR)·exp(−(d/σ)²))`, `σ = L_y/6`,
//!   `base` ~ uniform on `base_rate`. Off-season days have no detections,
//!   which plants the yearly zero gap.
//! * independently, every day of a cell carries Poisson(`low_confidence_rate`)
//!   extra detections with confidence in `0..=75`; a confidence filter of
//!   "strictly above 75" removes all of them. Kept detections have confidence
//!   in `76..=100`.
//!
//! Seasons of the years before and after the study period are generated too,
//! so their tails spill into the first and last year.
//!
//! The planted season length of a calendar year is the number of its days
//! that are active in any season. A 7-day smoothing window widens a detected
//! season by up to 3 days at each edge, so estimates sit between the truth
//! and the truth plus 6 days, minus the wait for the first and last detection.

use chrono::{Days, NaiveDate};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use thiserror::Error;

use crate::forecast::mix_seed;
use crate::hexgrid::{CellId, GridError, HexGrid};
use crate::ingest::{DailySeries, DateRange, FireRecord, IngestError};

/// Share of the peak rate present at the season edges.
pub const RATE_FLOOR: f64 = 0.3;
/// Highest confidence given to a detection that should be filtered out.
pub const LOW_CONFIDENCE_MAX: u8 = 75;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub cells: usize,
    pub resolution: u8,
    pub first_year: i32,
    pub years: u32,
    /// Peak detections per day at multiplier 1.
    pub base_rate: (f64, f64),
    /// Range of the base season length, days.
    pub season_days: (u32, u32),
    pub length_jitter: u32,
    /// Range of the log-intensity slope per year.
    pub trend: (f64, f64),
    /// Range of the per-cell standard deviation of the log year multiplier.
    pub year_noise: (f64, f64),
    /// Expected filtered-out detections per cell and day.
    pub low_confidence_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            cells: 200,
            resolution: 8,
            first_year: 2003,
            years: 15,
            base_rate: (3.0, 8.0),
            season_days: (60, 200),
            length_jitter: 5,
            trend: (-0.03, 0.03),
            year_noise: (0.05, 0.2),
            low_confidence_rate: 0.02,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Config(m.into()));
        let range_ok = |(a, b): (f64, f64)| a.is_finite() && b.is_finite() && a <= b;
        if self.years == 0 {
            return bad("at least one year is required");
        }
        if !range_ok(self.base_rate) || self.base_rate.0 <= 0.0 {
            return bad("base_rate must be a positive range");
        }
        let (lo, hi) = self.season_days;
        if lo > hi || lo <= self.length_jitter || hi + self.length_jitter > 300 {
            return bad("season_days must satisfy jitter < min <= max <= 300 - jitter");
        }
        if !range_ok(self.trend) || !range_ok(self.year_noise) || self.year_noise.0 < 0.0 {
            return bad("trend and year_noise must be ranges, year_noise non-negative");
        }
        if !(self.low_confidence_rate >= 0.0 && self.low_confidence_rate.is_finite()) {
            return bad("low_confidence_rate must be non-negative");
        }
        NaiveDate::from_ymd_opt(self.first_year - 1, 1, 1)
            .zip(NaiveDate::from_ymd_opt(self.last_year() + 1, 12, 31))
            .map(|_| ())
            .ok_or_else(|| SynthError::Config("years out of range".into()))
    }

    pub fn last_year(&self) -> i32 {
        self.first_year + self.years as i32 - 1
    }

    /// January 1 of the first year to December 31 of the last.
    pub fn date_range(&self) -> DateRange {
        let start = NaiveDate::from_ymd_opt(self.first_year, 1, 1).expect("validated year");
        let end = NaiveDate::from_ymd_opt(self.last_year(), 12, 31).expect("validated year");
        DateRange::new(start, end).expect("ordered dates")
    }
}

/// One planted season.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedSeason {
    pub year: i32,
    pub centre: NaiveDate,
    pub first_day: NaiveDate,
    pub length: u32,
    pub multiplier: f64,
}

impl PlantedSeason {
    pub fn last_day(&self) -> NaiveDate {
        self.first_day + Days::new(u64::from(self.length) - 1)
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        self.first_day <= d && d <= self.last_day()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedCell {
    pub cell: CellId,
    pub peak_month: u32,
    pub base_rate: f64,
    pub trend: f64,
    pub year_noise: f64,
    pub seasons: Vec<PlantedSeason>,
    /// Planted season length of each calendar year of the study period.
    pub active_days: Vec<u32>,
    /// Detections kept by the confidence filter.
    pub series: DailySeries,
    /// Daily detections removed by the confidence filter.
    pub low_confidence: Vec<u32>,
}

impl PlantedCell {
    pub fn mean_active_days(&self) -> f64 {
        self.active_days.iter().map(|&d| f64::from(d)).sum::<f64>() / self.active_days.len() as f64
    }

    /// Detections of this cell located at the cell centre, ordered by date.
    pub fn records(&self, grid: &HexGrid, seed: u64) -> Result<Vec<FireRecord>, SynthError> {
        let location = grid.cell_center(self.cell)?;
        let stream = mix_seed(mix_seed(seed, self.cell.index()), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(stream);
        let mut out = Vec::new();
        for (i, (&kept, &low)) in self.series.counts.iter().zip(&self.low_confidence).enumerate() {
            let date = self.series.start_date + Days::new(i as u64);
            for _ in 0..kept {
                let confidence = rng.random_range(LOW_CONFIDENCE_MAX + 1..=100);
                out.push(FireRecord { location, date, confidence });
            }
            for _ in 0..low {
                let confidence = rng.random_range(0..=LOW_CONFIDENCE_MAX);
                out.push(FireRecord { location, date, confidence });
            }
        }
        Ok(out)
    }
}

/// Middle day of `month` in `year`.
pub fn mid_month(year: i32, month: u32) -> NaiveDate {
    let first = NaiveDate::from_ymd_opt(year, month, 1).expect("valid month");
    let next = if month == 12 {
        NaiveDate::from_ymd_opt(year + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(year, month + 1, 1)
    }
    .expect("valid month");
    let days = (next - first).num_days() as u64;
    first + Days::new((days - 1) / 2)
}

/// Expected detections on a day `offset` days from the centre of a season
/// of `length` days, at peak rate `peak`.
pub fn daily_rate(offset: f64, length: u32, peak: f64) -> f64 {
    let sigma = f64::from(length) / 6.0;
    peak * (RATE_FLOOR + (1.0 - RATE_FLOOR) * (-(offset / sigma).powi(2)).exp())
}

fn uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

fn poisson<R: Rng>(rng: &mut R, rate: f64) -> u32 {
    if rate <= 0.0 {
        return 0;
    }
    Poisson::new(rate).expect("positive finite rate").sample(rng) as u32
}

fn plant_cell(config: &SynthConfig, cell: CellId, slot: u64) -> PlantedCell {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, slot));
    let range = config.date_range();
    let peak_month = rng.random_range(1..=12u32);
    let base_rate = uniform(&mut rng, config.base_rate);
    let base_length = rng.random_range(config.season_days.0..=config.season_days.1);
    let trend = uniform(&mut rng, config.trend);
    let year_noise = uniform(&mut rng, config.year_noise);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mid_year = f64::from(config.first_year) + (f64::from(config.years) - 1.0) / 2.0;
    let jitter = config.length_jitter as i64;

    let seasons: Vec<PlantedSeason> = (config.first_year - 1..=config.last_year() + 1)
        .map(|year| {
            let length = (i64::from(base_length) + rng.random_range(-jitter..=jitter)) as u32;
            let z: f64 = normal.sample(&mut rng);
            let multiplier = (trend * (f64::from(year) - mid_year) + year_noise * z).exp();
            let centre = mid_month(year, peak_month);
            PlantedSeason {
                year,
                centre,
                first_day: centre - Days::new(u64::from(length / 2)),
                length,
                multiplier,
            }
        })
        .collect();

    let days = range.days();
    let mut counts = vec![0u32; days];
    let mut low_confidence = vec![0u32; days];
    let mut active = vec![false; days];
    for s in &seasons {
        let peak = base_rate * s.multiplier;
        for k in 0..s.length {
            let d = s.first_day + Days::new(u64::from(k));
            if !range.contains(d) {
                continue;
            }
            let i = (d - range.start()).num_days() as usize;
            active[i] = true;
            let offset = (d - s.centre).num_days() as f64;
            counts[i] += poisson(&mut rng, daily_rate(offset, s.length, peak));
        }
    }
    for v in &mut low_confidence {
        *v = poisson(&mut rng, config.low_confidence_rate);
    }

    let active_days = (config.first_year..=config.last_year())
        .map(|year| {
            let a = (NaiveDate::from_ymd_opt(year, 1, 1).unwrap() - range.start()).num_days() as usize;
            let b = (NaiveDate::from_ymd_opt(year, 12, 31).unwrap() - range.start()).num_days() as usize;
            active[a..=b].iter().filter(|&&x| x).count() as u32
        })
        .collect();

    PlantedCell {
        cell,
        peak_month,
        base_rate,
        trend,
        year_noise,
        seasons,
        active_days,
        series: DailySeries { cell, start_date: range.start(), counts },
        low_confidence,
    }
}

/// Plants `config.cells` distinct hexagonal cells, ordered by cell index.
pub fn generate(config: &SynthConfig, grid: &HexGrid) -> Result<Vec<PlantedCell>, SynthError> {
    config.validate()?;
    if grid.resolution() != config.resolution {
        return Err(SynthError::Config(format!(
            "grid resolution {} differs from configured {}",
            grid.resolution(),
            config.resolution
        )));
    }
    // Indices 0..12 are the pentagons.
    let hexagons = grid.cell_count() - 12;
    if config.cells as u64 > hexagons {
        return Err(SynthError::Config(format!(
            "{} cells requested but the grid has {hexagons} hexagons",
            config.cells
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut indices: Vec<u64> = sample(&mut rng, hexagons as usize, config.cells)
        .into_iter()
        .map(|i| i as u64 + 12)
        .collect();
    indices.sort_unstable();
    indices
        .into_iter()
        .map(|i| Ok(plant_cell(config, grid.cell(i)?, i)))
        .collect()
}

/// Writes detections as a CSV with MCD14ML column names.
pub fn write_csv<W: std::io::Write>(records: &[FireRecord], w: W) -> Result<(), SynthError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["latitude", "longitude", "acq_date", "confidence"])?;
    for r in records {
        out.write_record([
            r.location.lat.to_string(),
            r.location.lon.to_string(),
            r.date.format("%Y-%m-%d").to_string(),
            r.confidence.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Planted cells and all their detections, ordered by cell then date.
pub fn dataset(config: &SynthConfig, grid: &HexGrid) -> Result<(Vec<PlantedCell>, Vec<FireRecord>), SynthError> {
    let cells = generate(config, grid)?;
    let mut records = Vec::new();
    for c in &cells {
        records.extend(c.records(grid, config.seed)?);
    }
    Ok((cells, records))
}

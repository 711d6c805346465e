use std::collections::BTreeMap;
use std::path::Path;

use log::info;
use pyroseason::hexgrid::HexGrid;
use pyroseason::ingest::{CellStore, DailySeries};
use pyroseason::season::{
    active_every_year, build_profile, estimate_season_lengths, global_season_length, remove_outlier_lengths,
    window_months, SeasonProfile,
};
use rayon::prelude::*;

use crate::error::CliError;
use crate::output::{num, Rows, Table};

const STAGE: &str = "seasons";

pub const PROFILE_COLUMNS: [&str; 9] = [
    "cell_id",
    "center_lat",
    "center_lon",
    "mean_length_days",
    "length_trend",
    "peak_month",
    "fss_mean",
    "fss_trend",
    "window_months",
];

#[derive(Debug, Clone)]
pub struct SeasonsOutcome {
    pub profiles: Vec<SeasonProfile>,
    /// Cells in the store before the activity retention rule.
    pub candidates: usize,
    pub global_months: u32,
    pub window_months: u32,
}

/// Keeps cells with detections in every calendar year, derives the global
/// season length from their mean lengths (outliers removed) and builds one
/// profile per retained cell.
pub fn seasons(store: &CellStore, percentile: f64) -> Result<SeasonsOutcome, CliError> {
    let retained: Vec<_> = store.series.iter().filter(|s| active_every_year(s)).collect();
    if retained.is_empty() {
        return Err(CliError::input(STAGE, "no cell has detections in every year"));
    }
    let means = retained
        .par_iter()
        .map(|s| {
            let l = estimate_season_lengths(s)
                .map_err(|e| CliError::input(STAGE, e.to_string()).context(format!("cell {}", s.cell.index())))?;
            Ok(l.iter().map(|&v| f64::from(v)).sum::<f64>() / l.len() as f64)
        })
        .collect::<Result<Vec<f64>, CliError>>()?;
    let global = global_season_length(&remove_outlier_lengths(&means), percentile)
        .map_err(|e| CliError::input(STAGE, e.to_string()))?;
    let months = window_months(global);
    info!(
        "seasons: {} of {} cells retained; global length {global} months, window {months} months",
        retained.len(),
        store.series.len()
    );
    let profiles = retained
        .par_iter()
        .map(|s| {
            build_profile(s, months)
                .map_err(|e| CliError::input(STAGE, e.to_string()).context(format!("cell {}", s.cell.index())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SeasonsOutcome { profiles, candidates: store.series.len(), global_months: global, window_months: months })
}

pub fn profiles_table(profiles: &[SeasonProfile], grid: &HexGrid) -> Result<Table, CliError> {
    let mut t = Table::new(&PROFILE_COLUMNS);
    for p in profiles {
        let c = grid.cell_center(p.cell).map_err(|e| CliError::internal(STAGE, e.to_string()))?;
        t.row([
            p.cell.index().to_string(),
            num(c.lat),
            num(c.lon),
            num(p.mean_length_days),
            num(p.length_trend),
            p.peak_month.to_string(),
            num(p.fss_mean),
            num(p.fss_trend),
            p.window_months.to_string(),
        ]);
    }
    Ok(t)
}

/// What later stages need from `profiles.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRow {
    pub peak_month: u32,
    pub window_months: u32,
    pub fields: BTreeMap<String, f64>,
}

/// Numeric profile columns that can be exported as map layers.
pub const PROFILE_FIELDS: [&str; 6] =
    ["mean_length_days", "length_trend", "peak_month", "fss_mean", "fss_trend", "window_months"];

pub fn read_profiles(path: &Path) -> Result<BTreeMap<u64, ProfileRow>, CliError> {
    let rows = Rows::parse(STAGE, path, &PROFILE_COLUMNS)?;
    let mut out = BTreeMap::new();
    for r in rows.iter() {
        let cell: u64 = r.parse(STAGE, "cell_id")?;
        let mut fields = BTreeMap::new();
        for f in PROFILE_FIELDS {
            fields.insert(f.to_owned(), r.parse(STAGE, f)?);
        }
        let row = ProfileRow {
            peak_month: r.parse(STAGE, "peak_month")?,
            window_months: r.parse(STAGE, "window_months")?,
            fields,
        };
        if out.insert(cell, row).is_some() {
            return Err(CliError::input(STAGE, format!("{}: duplicate cell {cell}", path.display())));
        }
    }
    Ok(out)
}

/// Rebuilds the profiles listed in `profiles.csv` from the cell store and
/// checks that they agree with the file.
pub fn rebuild_profiles<'s>(
    store: &'s CellStore,
    listed: &BTreeMap<u64, ProfileRow>,
) -> Result<Vec<(SeasonProfile, &'s DailySeries)>, CliError> {
    let by_index: BTreeMap<u64, _> = store.series.iter().map(|s| (s.cell.index(), s)).collect();
    listed
        .iter()
        .map(|(&cell, row)| {
            let ctx = format!("cell {cell}");
            let s = by_index
                .get(&cell)
                .ok_or_else(|| CliError::input(STAGE, "listed in profiles but absent from the cell store").context(&ctx))?;
            let p = build_profile(s, row.window_months).map_err(|e| CliError::input(STAGE, e.to_string()).context(&ctx))?;
            if p.peak_month != row.peak_month {
                return Err(CliError::input(STAGE, "peak month differs from the cell store").context(&ctx));
            }
            Ok((p, *s))
        })
        .collect()
}

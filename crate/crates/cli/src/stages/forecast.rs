use std::collections::BTreeMap;
use std::path::Path;

use log::{debug, warn};
use pyroseason::forecast::{self, mix_seed, FitConfig, ForecastError, ForecastModel, Method, Scale};
use pyroseason::ingest::DailySeries;
use pyroseason::season::SeasonProfile;
use pyroseason::transform::{boxcox, monthly_accumulate, split_train_test, BoxCoxParams};
use rayon::prelude::*;

use crate::error::CliError;
use crate::output::{num, opt, Rows, Table};

const STAGE: &str = "forecast";

pub const FORECAST_COLUMNS: [&str; 8] = ["cell_id", "method", "kind", "split", "season", "month", "observed", "forecast"];
pub const MODEL_COLUMNS: [&str; 6] = ["cell_id", "method", "lambda", "converged", "status", "model"];

/// One method's outcome in one cell. `fss` is `None` when fitting failed.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodResult {
    pub method: Method,
    pub model: String,
    pub converged: bool,
    pub monthly: Option<Vec<f64>>,
    pub fss: Option<Vec<f64>>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellForecast {
    pub cell: u64,
    pub period: usize,
    pub lambda: Option<f64>,
    pub train_monthly: Vec<f64>,
    pub test_monthly: Vec<f64>,
    pub train_fss: Vec<f64>,
    pub test_fss: Vec<f64>,
    pub methods: Vec<MethodResult>,
}

impl CellForecast {
    pub fn fss_mean(&self) -> f64 {
        let all: Vec<f64> = self.train_fss.iter().chain(&self.test_fss).copied().collect();
        all.iter().sum::<f64>() / all.len() as f64
    }
}

/// Training data of one cell in the three scales the methods consume.
struct Inputs<'a> {
    counts: &'a [f64],
    transformed: &'a [f64],
    fss: &'a [f64],
    period: usize,
    horizon: usize,
    params: &'a BoxCoxParams,
}

/// Monthly (absent for FSS-scale methods) and per-season forecasts.
type Forecasts = (Option<Vec<f64>>, Vec<f64>);

fn run_method(method: Method, x: &Inputs<'_>, config: &FitConfig) -> Result<(ForecastModel, Forecasts), ForecastError> {
    let (period, horizon, params) = (x.period, x.horizon, x.params);
    let input = match method.scale() {
        Scale::BoxCox => x.transformed,
        Scale::Counts => x.counts,
        Scale::Fss => x.fss,
    };
    let model = match forecast::fit(method, input, period, config) {
        Ok(m) => m,
        Err(ForecastError::NotConverged { best, iterations, .. }) => {
            debug!("{method}: best model after {iterations} iterations kept");
            *best
        }
        Err(e) => return Err(e),
    };
    let monthly = match method.scale() {
        Scale::Fss => None,
        _ => Some(forecast::forecast_monthly(&model, horizon * period, params)?),
    };
    let fss = forecast::forecast_fss(&model, horizon, params)?;
    Ok((model, (monthly, fss)))
}

/// Builds MA-FC, splits it, and fits every requested method in one cell.
pub fn forecast_cell(
    profile: &SeasonProfile,
    series: &DailySeries,
    methods: &[Method],
    train_seasons: usize,
    config: &FitConfig,
) -> Result<CellForecast, CliError> {
    let ctx = format!("cell {}", profile.cell.index());
    let input = |e: &dyn std::fmt::Display| CliError::input(STAGE, e.to_string()).context(&ctx);
    let mafc = monthly_accumulate(series, profile).map_err(|e| input(&e))?;
    let (train, test) = split_train_test(&mafc, train_seasons).map_err(|e| input(&e))?;
    let period = mafc.period;
    let horizon = test.seasons();
    let fss: Vec<f64> = profile.fss.iter().map(|&v| v as f64).collect();
    let (train_fss, test_fss) = fss.split_at(train_seasons);

    let needs_boxcox = methods.iter().any(|m| m.scale() == Scale::BoxCox);
    let params = if needs_boxcox {
        BoxCoxParams::for_counts(&train.values, period).map_err(|e| input(&e))?
    } else {
        BoxCoxParams::new(1.0, 1.0).expect("valid parameters")
    };
    let transformed: Vec<f64> = train
        .values
        .iter()
        .map(|&v| boxcox(v, &params))
        .collect::<Result<_, _>>()
        .map_err(|e| input(&e))?;

    let inputs = Inputs { counts: &train.values, transformed: &transformed, fss: train_fss, period, horizon, params: &params };
    let results = methods
        .iter()
        .map(|&method| match run_method(method, &inputs, config) {
            Ok((model, (monthly, fss))) => MethodResult {
                method,
                model: model.describe(),
                converged: model.converged(),
                monthly,
                fss: Some(fss),
                error: None,
            },
            Err(e) => {
                warn!("{ctx}: {method} failed: {e}");
                MethodResult { method, model: String::new(), converged: false, monthly: None, fss: None, error: Some(e.to_string()) }
            }
        })
        .collect();

    Ok(CellForecast {
        cell: profile.cell.index(),
        period,
        lambda: needs_boxcox.then(|| params.lambda()),
        train_monthly: train.values,
        test_monthly: test.values,
        train_fss: train_fss.to_vec(),
        test_fss: test_fss.to_vec(),
        methods: results,
    })
}

/// Forecasts every cell on the current thread pool. Each cell's fits are
/// seeded from the global seed and the cell index, so the output does not
/// depend on scheduling.
pub fn forecast_all(
    cells: &[(SeasonProfile, &DailySeries)],
    methods: &[Method],
    train_seasons: usize,
    seed: u64,
) -> Result<Vec<CellForecast>, CliError> {
    let base = FitConfig::default();
    let out = cells
        .par_iter()
        .map(|(p, s)| forecast_cell(p, s, methods, train_seasons, &base.with_seed(mix_seed(seed, p.cell.index()))))
        .collect::<Result<Vec<_>, _>>()?;
    let limited = out.iter().flat_map(|c| &c.methods).filter(|m| m.error.is_none() && !m.converged).count();
    if limited > 0 {
        warn!("forecast: {limited} fits reached the iteration limit; their best models were kept");
    }
    Ok(out)
}

pub fn forecasts_table(cells: &[CellForecast]) -> Table {
    let mut t = Table::new(&FORECAST_COLUMNS);
    for c in cells {
        let id = c.cell.to_string();
        let p = c.period;
        let n_train = c.train_fss.len();
        for (i, v) in c.train_monthly.iter().enumerate() {
            t.row([&id, "", "monthly", "train", &(i / p).to_string(), &(i % p + 1).to_string(), &num(*v), ""]);
        }
        for (i, v) in c.train_fss.iter().enumerate() {
            t.row([&id, "", "fss", "train", &i.to_string(), "", &num(*v), ""]);
        }
        for m in &c.methods {
            let Some(fss) = &m.fss else { continue };
            if let Some(monthly) = &m.monthly {
                for (i, (o, f)) in c.test_monthly.iter().zip(monthly).enumerate() {
                    let season = (n_train + i / p).to_string();
                    t.row([&id, m.method.id(), "monthly", "test", &season, &(i % p + 1).to_string(), &num(*o), &num(*f)]);
                }
            }
            for (i, (o, f)) in c.test_fss.iter().zip(fss).enumerate() {
                t.row([&id, m.method.id(), "fss", "test", &(n_train + i).to_string(), "", &num(*o), &num(*f)]);
            }
        }
    }
    t
}

pub fn models_table(cells: &[CellForecast]) -> Table {
    let mut t = Table::new(&MODEL_COLUMNS);
    for c in cells {
        for m in &c.methods {
            let lambda = if m.method.scale() == Scale::BoxCox { c.lambda } else { None };
            let status = m.error.as_deref().map_or_else(|| "ok".to_owned(), |e| format!("failed: {e}"));
            t.row([c.cell.to_string(), m.method.id().into(), opt(lambda), m.converged.to_string(), status, m.model.clone()]);
        }
    }
    t
}

/// Test-period monthly values keyed by (season, month) and FSS keyed by season.
type MethodRows = (BTreeMap<(usize, usize), f64>, BTreeMap<usize, f64>);

#[derive(Default)]
struct Partial {
    train_monthly: BTreeMap<(usize, usize), f64>,
    train_fss: BTreeMap<usize, f64>,
    test_monthly: BTreeMap<(usize, usize), f64>,
    test_fss: BTreeMap<usize, f64>,
    methods: BTreeMap<Method, MethodRows>,
}

/// Reads `forecasts.csv` back into per-cell outcomes (models and errors are
/// not part of the file).
pub fn read_forecasts(path: &Path) -> Result<Vec<CellForecast>, CliError> {
    const S: &str = "evaluate";
    let rows = Rows::parse(S, path, &FORECAST_COLUMNS)?;
    let mut cells: BTreeMap<u64, Partial> = BTreeMap::new();
    let mut period = 0usize;
    for r in rows.iter() {
        let bad = |m: &str| CliError::input(S, format!("{}: line {}: {m}", path.display(), r.line()));
        let cell: u64 = r.parse(S, "cell_id")?;
        let season: usize = r.parse(S, "season")?;
        let observed: f64 = r.parse(S, "observed")?;
        let entry = cells.entry(cell).or_default();
        let monthly = match r.get("kind") {
            "monthly" => {
                let month: usize = r.parse(S, "month")?;
                period = period.max(month);
                Some(month)
            }
            "fss" => None,
            other => return Err(bad(&format!("unknown kind {other:?}"))),
        };
        match (r.get("split"), monthly) {
            ("train", Some(m)) => {
                entry.train_monthly.insert((season, m), observed);
            }
            ("train", None) => {
                entry.train_fss.insert(season, observed);
            }
            ("test", m) => {
                let method: Method = r.get("method").parse().map_err(|e: ForecastError| bad(&e.to_string()))?;
                let forecast: f64 = r.parse(S, "forecast")?;
                let slot = entry.methods.entry(method).or_default();
                match m {
                    Some(m) => {
                        entry.test_monthly.insert((season, m), observed);
                        slot.0.insert((season, m), forecast);
                    }
                    None => {
                        entry.test_fss.insert(season, observed);
                        slot.1.insert(season, forecast);
                    }
                }
            }
            (other, _) => return Err(bad(&format!("unknown split {other:?}"))),
        }
    }
    cells
        .into_iter()
        .map(|(cell, p)| {
            let bad = |m: &str| CliError::input(S, format!("{}: cell {cell}: {m}", path.display()));
            let test_monthly: Vec<f64> = p.test_monthly.values().copied().collect();
            let methods = p
                .methods
                .into_iter()
                .map(|(method, (monthly, fss))| {
                    let monthly: Option<Vec<f64>> = (!monthly.is_empty()).then(|| monthly.into_values().collect());
                    if monthly.as_ref().is_some_and(|m| m.len() != test_monthly.len()) {
                        return Err(bad(&format!("{method} has an incomplete monthly forecast")));
                    }
                    Ok(MethodResult {
                        method,
                        model: String::new(),
                        converged: true,
                        monthly,
                        fss: Some(fss.into_values().collect()),
                        error: None,
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let c = CellForecast {
                cell,
                period,
                lambda: None,
                train_monthly: p.train_monthly.into_values().collect(),
                test_monthly,
                train_fss: p.train_fss.into_values().collect(),
                test_fss: p.test_fss.into_values().collect(),
                methods,
            };
            if c.train_fss.is_empty() || c.test_fss.is_empty() || c.methods.iter().any(|m| m.fss.as_ref().unwrap().len() != c.test_fss.len()) {
                return Err(bad("training or test rows are incomplete"));
            }
            Ok(c)
        })
        .collect()
}

use std::collections::BTreeMap;
use std::path::Path;

use log::warn;
use pyroseason::evaluate::{
    error_report, friedman_test, nemenyi_cd, select_best, summarize, wilcoxon_signed_rank, CellOutcome, ErrorReport,
    SelectionMetric,
};
use pyroseason::forecast::Method;
use pyroseason::hexgrid::CellId;

use super::forecast::CellForecast;
use crate::error::CliError;
use crate::output::{num, opt, Rows, Table};

const STAGE: &str = "evaluate";

pub const REPORT_COLUMNS: [&str; 9] = [
    "cell_id",
    "method",
    "mae_monthly",
    "mase_monthly",
    "mae_fss",
    "nmae_fss",
    "mase_fss",
    "undefined_scale",
    "best",
];

/// Per-method reports of one cell and the selected method.
#[derive(Debug, Clone, PartialEq)]
pub struct CellEvaluation {
    pub cell: u64,
    pub reports: Vec<ErrorReport>,
    pub best: Option<Method>,
}

impl CellEvaluation {
    pub fn best_report(&self) -> Option<&ErrorReport> {
        self.best.and_then(|b| self.reports.iter().find(|r| r.method == b))
    }

    pub fn report(&self, m: Method) -> Option<&ErrorReport> {
        self.reports.iter().find(|r| r.method == m)
    }
}

pub fn evaluate(cells: &[CellForecast], resolution: u8, metric: SelectionMetric) -> Result<Vec<CellEvaluation>, CliError> {
    cells
        .iter()
        .map(|c| {
            let ctx = format!("cell {}", c.cell);
            let id = CellId::new(resolution, c.cell).map_err(|e| CliError::input(STAGE, e.to_string()).context(&ctx))?;
            let fss_mean = c.fss_mean();
            let reports = c
                .methods
                .iter()
                .filter_map(|m| Some((m, m.fss.as_deref()?)))
                .map(|(m, fss)| {
                    let o = CellOutcome {
                        train_monthly: &c.train_monthly,
                        test_monthly: &c.test_monthly,
                        forecast_monthly: m.monthly.as_deref(),
                        train_fss: &c.train_fss,
                        test_fss: &c.test_fss,
                        forecast_fss: fss,
                        fss_mean,
                        period: c.period,
                    };
                    error_report(id, m.method, &o)
                        .map_err(|e| CliError::input(STAGE, e.to_string()).context(format!("{ctx} {}", m.method)))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let best = select_best(&reports, metric).ok();
            if best.is_none() {
                warn!("{ctx}: no method has a finite monthly error; no best method");
            }
            Ok(CellEvaluation { cell: c.cell, reports, best })
        })
        .collect()
}

fn undefined(r: &ErrorReport) -> String {
    let mut parts = Vec::new();
    if r.mae_monthly.is_some() && r.mase_monthly.is_none() {
        parts.push("monthly");
    }
    if r.mase_fss.is_none() {
        parts.push("fss");
    }
    parts.join(";")
}

pub fn report_table(evals: &[CellEvaluation]) -> Table {
    let mut t = Table::new(&REPORT_COLUMNS);
    for e in evals {
        for r in &e.reports {
            t.row([
                e.cell.to_string(),
                r.method.id().into(),
                opt(r.mae_monthly),
                opt(r.mase_monthly),
                num(r.mae_fss),
                opt(r.nmae_fss),
                opt(r.mase_fss),
                undefined(r),
                (e.best == Some(r.method)).to_string(),
            ]);
        }
    }
    t
}

/// Metrics summarised and compared across cells.
pub const SUMMARY_METRICS: [&str; 3] = ["mase_monthly", "mase_fss", "nmae_fss"];

pub fn metric(r: &ErrorReport, name: &str) -> Option<f64> {
    match name {
        "mae_monthly" => r.mae_monthly,
        "mase_monthly" => r.mase_monthly,
        "mae_fss" => Some(r.mae_fss),
        "nmae_fss" => r.nmae_fss,
        "mase_fss" => r.mase_fss,
        _ => None,
    }
}

pub fn read_continents(path: &Path) -> Result<BTreeMap<u64, String>, CliError> {
    let rows = Rows::parse(STAGE, path, &["cell_id", "continent"])?;
    rows.iter()
        .map(|r| Ok((r.parse(STAGE, "cell_id")?, r.get("continent").to_owned())))
        .collect()
}

/// `global` plus one group per continent, each with its cells.
fn groups<'a>(evals: &'a [CellEvaluation], continents: &BTreeMap<u64, String>) -> Vec<(String, Vec<&'a CellEvaluation>)> {
    let mut out = vec![("global".to_owned(), evals.iter().collect::<Vec<_>>())];
    let mut by: BTreeMap<&str, Vec<&CellEvaluation>> = BTreeMap::new();
    for e in evals {
        if let Some(c) = continents.get(&e.cell) {
            by.entry(c).or_default().push(e);
        }
    }
    out.extend(by.into_iter().map(|(k, v)| (k.to_owned(), v)));
    out
}

fn methods_in(evals: &[CellEvaluation]) -> Vec<Method> {
    let mut m: Vec<Method> = evals.iter().flat_map(|e| e.reports.iter().map(|r| r.method)).collect();
    m.sort();
    m.dedup();
    m
}

pub fn summary_table(evals: &[CellEvaluation], continents: &BTreeMap<u64, String>) -> Table {
    let mut t = Table::new(&["group", "method", "metric", "n", "undefined", "removed", "min", "q1", "median", "q3", "max"]);
    let methods = methods_in(evals);
    for (group, cells) in groups(evals, continents) {
        let mut columns: Vec<(String, Vec<Option<&ErrorReport>>)> =
            methods.iter().map(|&m| (m.id().to_owned(), cells.iter().map(|e| e.report(m)).collect())).collect();
        columns.push(("best".into(), cells.iter().map(|e| e.best_report()).collect()));
        for (name, reports) in &columns {
            for metric_name in SUMMARY_METRICS {
                let present: Vec<&ErrorReport> = reports.iter().flatten().copied().collect();
                if metric_name == "mase_monthly" && present.iter().all(|r| r.mae_monthly.is_none()) {
                    continue;
                }
                let values: Vec<f64> = present.iter().filter_map(|r| metric(r, metric_name)).collect();
                let undefined = present.len() - values.len();
                let mut row = vec![group.clone(), name.clone(), metric_name.into(), String::new(), undefined.to_string()];
                match summarize(&values) {
                    Some(s) => {
                        row[3] = s.n.to_string();
                        row.extend([s.removed.to_string(), num(s.min), num(s.q1), num(s.median), num(s.q3), num(s.max)]);
                    }
                    None => {
                        row[3] = "0".into();
                        row.extend(std::iter::repeat_n(String::new(), 6));
                    }
                }
                t.row(row);
            }
        }
    }
    t
}

/// Friedman mean ranks with Nemenyi critical differences, and the pairwise
/// significance matrix, for monthly MASE (methods with monthly forecasts)
/// and FSS MASE (all methods). Cells with any undefined value are left out.
pub fn comparison_tables(evals: &[CellEvaluation]) -> (Table, Table) {
    let mut fr = Table::new(&["metric", "method", "mean_rank", "cells", "statistic", "p_value", "cd_0.05", "cd_0.001"]);
    let mut ne = Table::new(&["metric", "method_a", "method_b", "rank_gap", "significant_0.05", "significant_0.001"]);
    let all = methods_in(evals);
    for metric_name in ["mase_monthly", "mase_fss"] {
        let methods: Vec<Method> = if metric_name == "mase_monthly" {
            all.iter().copied().filter(|&m| evals.iter().any(|e| e.report(m).is_some_and(|r| r.mae_monthly.is_some()))).collect()
        } else {
            all.clone()
        };
        let matrix: Vec<Vec<f64>> = evals
            .iter()
            .filter_map(|e| methods.iter().map(|&m| e.report(m).and_then(|r| metric(r, metric_name))).collect::<Option<Vec<f64>>>())
            .collect();
        let result = match friedman_test(&matrix) {
            Ok(r) => r,
            Err(e) => {
                warn!("evaluate: Friedman test on {metric_name} skipped: {e}");
                continue;
            }
        };
        let n = matrix.len();
        let cd = |alpha| nemenyi_cd(methods.len(), n, alpha).ok();
        let (cd05, cd001) = (cd(0.05), cd(0.001));
        for (m, r) in methods.iter().zip(&result.mean_ranks) {
            fr.row([
                metric_name.to_owned(),
                m.id().into(),
                num(*r),
                n.to_string(),
                num(result.statistic),
                num(result.p_value),
                opt(cd05),
                opt(cd001),
            ]);
        }
        for i in 0..methods.len() {
            for j in i + 1..methods.len() {
                let gap = (result.mean_ranks[i] - result.mean_ranks[j]).abs();
                let sig = |cd: Option<f64>| cd.map_or_else(String::new, |c| (gap > c).to_string());
                ne.row([metric_name.to_owned(), methods[i].id().into(), methods[j].id().into(), num(gap), sig(cd05), sig(cd001)]);
            }
        }
    }
    (fr, ne)
}

/// Wilcoxon signed-rank test of the selected method against the linear
/// regression baseline on per-cell FSS errors.
pub fn wilcoxon_table(evals: &[CellEvaluation], continents: &BTreeMap<u64, String>) -> Table {
    let mut t = Table::new(&["group", "metric", "comparison", "n", "statistic", "p_value", "degenerate"]);
    for (group, cells) in groups(evals, continents) {
        for metric_name in ["mae_fss", "nmae_fss"] {
            let (a, b): (Vec<f64>, Vec<f64>) = cells
                .iter()
                .filter_map(|e| Some((metric(e.best_report()?, metric_name)?, metric(e.report(Method::Linreg)?, metric_name)?)))
                .unzip();
            if a.is_empty() {
                continue;
            }
            match wilcoxon_signed_rank(&a, &b) {
                Ok(r) => t.row([
                    group.clone(),
                    metric_name.into(),
                    "best_vs_linreg".into(),
                    r.n.to_string(),
                    num(r.statistic),
                    num(r.p_value),
                    r.degenerate.to_string(),
                ]),
                Err(e) => warn!("evaluate: Wilcoxon test for {group} {metric_name} skipped: {e}"),
            }
        }
    }
    t
}

//! Subcommand bodies and the end-to-end pipeline.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use log::info;
use pyroseason::forecast::Method;
use pyroseason::hexgrid::HexGrid;
use pyroseason::ingest::{read_store, write_store, CellStore, DateRange};
use pyroseason::synth::{self, SynthConfig};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::export::{self, HISTOGRAM_BINS};
use crate::output::{num, write_file, Table, Written};
use crate::stages::evaluate::{comparison_tables, evaluate, read_continents, report_table, summary_table, wilcoxon_table};
use crate::stages::forecast::{forecast_all, forecasts_table, models_table, read_forecasts};
use crate::stages::ingest::{ingest, IngestStats};
use crate::stages::seasons::{profiles_table, read_profiles, rebuild_profiles, seasons};

pub fn grid(resolution: u8) -> Result<HexGrid, CliError> {
    HexGrid::new(i64::from(resolution)).map_err(|e| CliError::usage(e.to_string()))
}

pub fn date_range(config: &PipelineConfig) -> Result<DateRange, CliError> {
    DateRange::new(config.from, config.to).map_err(|e| CliError::usage(e.to_string()))
}

pub fn load_store(stage: &'static str, path: &Path) -> Result<CellStore, CliError> {
    let f = File::open(path).map_err(|e| CliError::input(stage, format!("cannot open {}: {e}", path.display())))?;
    read_store(BufReader::new(f)).map_err(|e| CliError::input(stage, format!("{}: {e}", path.display())))
}

pub fn store_bytes(store: &CellStore) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write_store(&mut buf, store).map_err(|e| CliError::internal("ingest", e.to_string()))?;
    Ok(buf)
}

pub fn cmd_grid(resolution: u8, out: &Path) -> Result<Written, CliError> {
    let g = grid(resolution)?;
    write_file("grid", out, &export::grid_geojson(&g)?)
}

pub fn cmd_ingest(config: &PipelineConfig, out: &Path) -> Result<(Written, IngestStats), CliError> {
    let g = grid(config.resolution)?;
    let (store, stats) = ingest(&config.inputs, &g, config.min_confidence, date_range(config)?, config.strict)?;
    Ok((write_file("ingest", out, &store_bytes(&store)?)?, stats))
}

pub fn cmd_seasons(cells: &Path, percentile: f64, out: &Path) -> Result<Written, CliError> {
    let store = load_store("seasons", cells)?;
    let g = grid(store.resolution)?;
    let s = seasons(&store, percentile)?;
    write_file("seasons", out, &profiles_table(&s.profiles, &g)?.into_bytes())
}

pub fn cmd_forecast(config: &PipelineConfig, cells: &Path, profiles: &Path, out: &Path, models: &Path) -> Result<Vec<Written>, CliError> {
    let store = load_store("forecast", cells)?;
    let listed = read_profiles(profiles)?;
    let pairs = rebuild_profiles(&store, &listed)?;
    let fc = forecast_all(&pairs, &config.methods, config.train_seasons, config.seed)?;
    Ok(vec![
        write_file("forecast", out, &forecasts_table(&fc).into_bytes())?,
        write_file("forecast", models, &models_table(&fc).into_bytes())?,
    ])
}

/// `report.csv` and its `_summary`, `_friedman`, `_nemenyi` and `_wilcoxon`
/// siblings.
pub fn cmd_evaluate(config: &PipelineConfig, forecasts: &Path, out: &Path) -> Result<Vec<Written>, CliError> {
    let cells = read_forecasts(forecasts)?;
    let evals = evaluate(&cells, config.resolution, config.selection)?;
    let continents = match &config.continents {
        Some(p) => read_continents(p)?,
        None => BTreeMap::new(),
    };
    let (friedman, nemenyi) = comparison_tables(&evals);
    let tables = [
        (out.to_path_buf(), report_table(&evals)),
        (sibling(out, "summary"), summary_table(&evals, &continents)),
        (sibling(out, "friedman"), friedman),
        (sibling(out, "nemenyi"), nemenyi),
        (sibling(out, "wilcoxon"), wilcoxon_table(&evals, &continents)),
    ];
    tables.into_iter().map(|(p, t)| write_file("evaluate", &p, &t.into_bytes())).collect()
}

/// `dir/stem_suffix.ext` for `dir/stem.ext`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let name = match path.extension().and_then(|s| s.to_str()) {
        Some(ext) => format!("{stem}_{suffix}.{ext}"),
        None => format!("{stem}_{suffix}"),
    };
    path.with_file_name(name)
}

/// Writes a layer as GeoJSON plus its histogram CSV next to it.
pub fn write_layer(g: &HexGrid, layer: &export::Layer, field: &str, geojson: &Path) -> Result<Vec<Written>, CliError> {
    let values: Vec<f64> = layer.iter().filter_map(|(_, v)| *v).collect();
    let hist = geojson.with_file_name(format!(
        "{}_hist.csv",
        geojson.file_stem().and_then(|s| s.to_str()).unwrap_or(field)
    ));
    Ok(vec![
        write_file("export", geojson, &export::layer_geojson(g, layer, field)?)?,
        write_file("export", &hist, &export::histogram(&values, HISTOGRAM_BINS).into_bytes())?,
    ])
}

pub fn cmd_synth(config: &SynthConfig, detections: &Path, truth: &Path) -> Result<Vec<Written>, CliError> {
    let g = grid(config.resolution)?;
    let (cells, records) = synth::dataset(config, &g).map_err(|e| CliError::usage(e.to_string()))?;
    let mut csv_bytes = Vec::new();
    synth::write_csv(&records, &mut csv_bytes).map_err(|e| CliError::internal("synth", e.to_string()))?;
    let mut t = Table::new(&["cell_id", "year", "active_days", "peak_month", "base_rate", "trend", "year_noise"]);
    for c in &cells {
        for (k, d) in c.active_days.iter().enumerate() {
            t.row([
                c.cell.index().to_string(),
                (config.first_year + k as i32).to_string(),
                d.to_string(),
                c.peak_month.to_string(),
                num(c.base_rate),
                num(c.trend),
                num(c.year_noise),
            ]);
        }
    }
    info!("synth: {} cells, {} detections", cells.len(), records.len());
    Ok(vec![write_file("synth", detections, &csv_bytes)?, write_file("synth", truth, &t.into_bytes())?])
}

#[derive(Debug, Serialize)]
struct Digest256 {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a PipelineConfig,
    seed: u64,
    threads_affect_output: bool,
    rows: u64,
    malformed_rows: u64,
    filtered_out: u64,
    cells_binned: usize,
    cells_retained: usize,
    global_length_months: u32,
    window_months: u32,
    inputs: Vec<Digest256>,
    outputs: Vec<Digest256>,
}

fn file_digest(path: &Path) -> Result<String, CliError> {
    let mut f = File::open(path).map_err(|e| CliError::input("ingest", format!("cannot open {}: {e}", path.display())))?;
    let mut h = Sha256::new();
    std::io::copy(&mut f, &mut h).map_err(|e| CliError::input("ingest", format!("cannot read {}: {e}", path.display())))?;
    Ok(hex::encode(h.finalize()))
}

/// Everything `run` wrote, relative to the output directory.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub outputs: Vec<Written>,
    pub cells_retained: usize,
}

/// ingest → seasons → forecast → evaluate → exports, all under
/// `config.out_dir`, finished by `run-manifest.json`.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunSummary, CliError> {
    config.validate()?;
    let dir = &config.out_dir;
    let g = grid(config.resolution)?;
    let mut written = Vec::new();

    let (store, stats) = ingest(&config.inputs, &g, config.min_confidence, date_range(config)?, config.strict)?;
    written.push(write_file("ingest", &dir.join("cells.bin"), &store_bytes(&store)?)?);

    let s = seasons(&store, config.length_percentile)?;
    written.push(write_file("seasons", &dir.join("profiles.csv"), &profiles_table(&s.profiles, &g)?.into_bytes())?);
    let by_index: BTreeMap<u64, _> = store.series.iter().map(|x| (x.cell.index(), x)).collect();
    let pairs: Vec<_> = s.profiles.iter().map(|p| (p.clone(), by_index[&p.cell.index()])).collect();
    written.push(write_file("export", &dir.join("mafc.csv"), &export::mafc_table(&pairs)?.into_bytes())?);

    let fc = forecast_all(&pairs, &config.methods, config.train_seasons, config.seed)?;
    let forecasts_path = dir.join("forecasts.csv");
    written.push(write_file("forecast", &forecasts_path, &forecasts_table(&fc).into_bytes())?);
    written.push(write_file("forecast", &dir.join("models.csv"), &models_table(&fc).into_bytes())?);

    // The evaluate stage consumes the written file, as it does standalone.
    written.extend(cmd_evaluate(config, &forecasts_path, &dir.join("report.csv"))?);

    let listed = read_profiles(&dir.join("profiles.csv"))?;
    for field in &config.export_fields {
        let layer = export::profile_layer(&listed, field)?;
        written.extend(write_layer(&g, &layer, field, &dir.join("maps").join(format!("{field}.geojson")))?);
    }
    for field in ["mase_monthly", "nmae_fss"] {
        if config.methods.iter().all(|m| *m == Method::Linreg) && field == "mase_monthly" {
            continue;
        }
        let layer = export::report_layer(&dir.join("report.csv"), field, None)?;
        written.extend(write_layer(&g, &layer, field, &dir.join("maps").join(format!("best_{field}.geojson")))?);
    }

    let inputs = config
        .inputs
        .par_iter()
        .map(|p| Ok(Digest256 { path: p.display().to_string(), sha256: file_digest(p)? }))
        .collect::<Result<Vec<_>, CliError>>()?;
    let rel = |w: &Written| Digest256 {
        path: w.path.strip_prefix(dir).unwrap_or(&w.path).to_string_lossy().replace('\\', "/"),
        sha256: w.sha256.clone(),
    };
    let manifest = Manifest {
        tool: "pyroseason",
        version: env!("CARGO_PKG_VERSION"),
        config,
        seed: config.seed,
        threads_affect_output: false,
        rows: stats.rows,
        malformed_rows: stats.rejected,
        filtered_out: stats.filtered_out,
        cells_binned: s.candidates,
        cells_retained: s.profiles.len(),
        global_length_months: s.global_months,
        window_months: s.window_months,
        inputs,
        outputs: written.iter().map(rel).collect(),
    };
    let mut json = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::internal("run", e.to_string()))?;
    json.push(b'\n');
    written.push(write_file("run", &dir.join("run-manifest.json"), &json)?);
    Ok(RunSummary { outputs: written, cells_retained: s.profiles.len() })
}

//! Map layers: GeoJSON feature collections of cell polygons carrying one
//! scalar, with a 256-bin histogram of that scalar, and the MA-FC table.

use std::collections::BTreeMap;
use std::path::Path;

use pyroseason::forecast::Method;
use pyroseason::hexgrid::{CellId, HexGrid};
use pyroseason::ingest::DailySeries;
use pyroseason::season::SeasonProfile;
use pyroseason::transform::monthly_accumulate;
use serde_json::{json, Value};

use crate::error::CliError;
use crate::output::{num, Rows, Table};
use crate::stages::evaluate::REPORT_COLUMNS;
use crate::stages::seasons::{ProfileRow, PROFILE_FIELDS};

const STAGE: &str = "export";

pub const HISTOGRAM_BINS: usize = 256;
/// Report columns that can be exported as map layers.
pub const REPORT_FIELDS: [&str; 5] = ["mae_monthly", "mase_monthly", "mae_fss", "nmae_fss", "mase_fss"];

/// One value per cell; `None` when undefined in that cell.
pub type Layer = Vec<(u64, Option<f64>)>;

fn unknown(field: &str, valid: &[&str]) -> CliError {
    CliError::input(STAGE, format!("unknown field {field:?}; valid fields: {}", valid.join(", ")))
}

pub fn profile_layer(profiles: &BTreeMap<u64, ProfileRow>, field: &str) -> Result<Layer, CliError> {
    if !PROFILE_FIELDS.contains(&field) {
        return Err(unknown(field, &PROFILE_FIELDS));
    }
    Ok(profiles.iter().map(|(&c, p)| (c, p.fields.get(field).copied())).collect())
}

/// `field` of the selected method in each cell, or of `method` if given.
pub fn report_layer(path: &Path, field: &str, method: Option<Method>) -> Result<Layer, CliError> {
    if !REPORT_FIELDS.contains(&field) {
        return Err(unknown(field, &REPORT_FIELDS));
    }
    let rows = Rows::parse(STAGE, path, &REPORT_COLUMNS)?;
    let mut out = Vec::new();
    for r in rows.iter() {
        let chosen = match method {
            Some(m) => r.get("method") == m.id(),
            None => r.get("best") == "true",
        };
        if chosen {
            out.push((r.parse(STAGE, "cell_id")?, r.parse_opt(STAGE, field)?));
        }
    }
    out.sort_by_key(|(c, _)| *c);
    Ok(out)
}

fn geometry(grid: &HexGrid, cell: u64) -> Result<Value, CliError> {
    let id = CellId::new(grid.resolution(), cell).map_err(|e| CliError::input(STAGE, e.to_string()))?;
    let g = grid.cell_geometry(id).map_err(|e| CliError::input(STAGE, e.to_string()))?;
    let rings = g.lonlat_rings();
    Ok(if rings.len() == 1 {
        json!({"type": "Polygon", "coordinates": [rings[0]]})
    } else {
        let polys: Vec<Value> = rings.into_iter().map(|r| json!([r])).collect();
        json!({"type": "MultiPolygon", "coordinates": polys})
    })
}

fn collection(features: Vec<Value>) -> Result<Vec<u8>, CliError> {
    let doc = json!({"type": "FeatureCollection", "features": features});
    serde_json::to_vec(&doc).map_err(|e| CliError::internal(STAGE, e.to_string()))
}

/// FeatureCollection with one polygon per cell and `field` as a property.
pub fn layer_geojson(grid: &HexGrid, layer: &Layer, field: &str) -> Result<Vec<u8>, CliError> {
    let features = layer
        .iter()
        .map(|&(cell, v)| {
            let mut props = serde_json::Map::new();
            props.insert("cell_id".into(), json!(cell));
            props.insert(field.into(), v.map_or(Value::Null, |x| json!(x)));
            Ok(json!({"type": "Feature", "geometry": geometry(grid, cell)?, "properties": props}))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    collection(features)
}

/// Every cell of the grid, with its index as the only property.
pub fn grid_geojson(grid: &HexGrid) -> Result<Vec<u8>, CliError> {
    let features = (0..grid.cell_count())
        .map(|cell| Ok(json!({"type": "Feature", "geometry": geometry(grid, cell)?, "properties": {"cell_id": cell}})))
        .collect::<Result<Vec<_>, CliError>>()?;
    collection(features)
}

/// Equal-width histogram over the finite values' range with counts and
/// densities (count / (n · width)).
pub fn histogram(values: &[f64], bins: usize) -> Table {
    let v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    let mut t = Table::new(&["bin_lo", "bin_hi", "count", "density"]);
    if v.is_empty() {
        return t;
    }
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        hi = lo + 1.0;
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for x in &v {
        let k = (((x - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    for (k, c) in counts.iter().enumerate() {
        let a = lo + k as f64 * width;
        let b = if k + 1 == bins { hi } else { lo + (k + 1) as f64 * width };
        t.row([num(a), num(b), c.to_string(), num(*c as f64 / (v.len() as f64 * width))]);
    }
    t
}

/// MA-FC values of every profiled cell: `cell_id, season, month_offset, value`.
pub fn mafc_table(cells: &[(SeasonProfile, &DailySeries)]) -> Result<Table, CliError> {
    let mut t = Table::new(&["cell_id", "season", "month_offset", "value"]);
    for (p, s) in cells {
        let m = monthly_accumulate(s, p)
            .map_err(|e| CliError::input(STAGE, e.to_string()).context(format!("cell {}", p.cell.index())))?;
        for (i, v) in m.values.iter().enumerate() {
            let (season, offset) = m.position(i);
            t.row([p.cell.index().to_string(), season.to_string(), offset.to_string(), num(*v)]);
        }
    }
    Ok(t)
}

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use log::{info, warn};
use pyroseason::hexgrid::HexGrid;
use pyroseason::ingest::{keep_record, Binner, CellStore, DateRange, IngestError, RecordReader, Schema};
use rayon::prelude::*;

use crate::error::CliError;

const STAGE: &str = "ingest";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestStats {
    pub rows: u64,
    pub rejected: u64,
    pub filtered_out: u64,
    pub binned: u64,
}

/// Parses, filters and bins every input file. Files are processed in
/// parallel; the merged result does not depend on their order.
pub fn ingest(
    inputs: &[PathBuf],
    grid: &HexGrid,
    min_confidence: u8,
    range: DateRange,
    strict: bool,
) -> Result<(CellStore, IngestStats), CliError> {
    if inputs.is_empty() {
        return Err(CliError::input(STAGE, "no input files given"));
    }
    if let Some(missing) = inputs.iter().find(|p| !p.is_file()) {
        return Err(CliError::input(STAGE, format!("input file {} does not exist", missing.display())));
    }
    let schema = Schema::default();
    let parts = inputs
        .par_iter()
        .map(|path| {
            let ctx = |e: IngestError| CliError::input(STAGE, format!("{}: {e}", path.display()));
            let file = File::open(path).map_err(|e| ctx(e.into()))?;
            let mut binner = Binner::new(grid, range);
            let mut stats = IngestStats { rows: 0, rejected: 0, filtered_out: 0, binned: 0 };
            for item in RecordReader::new(BufReader::new(file), &schema).map_err(ctx)? {
                stats.rows += 1;
                match item {
                    Ok(r) if keep_record(&r, min_confidence, &range) => {
                        binner.add(&r);
                        stats.binned += 1;
                    }
                    Ok(_) => stats.filtered_out += 1,
                    Err(e @ IngestError::Row { .. }) if strict => return Err(ctx(e)),
                    Err(e @ IngestError::Row { .. }) => {
                        stats.rejected += 1;
                        if stats.rejected <= 5 {
                            warn!("{}: skipped {e}", path.display());
                        }
                    }
                    Err(e) => return Err(ctx(e)),
                }
            }
            Ok((binner, stats))
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let mut total = IngestStats { rows: 0, rejected: 0, filtered_out: 0, binned: 0 };
    let mut merged = Binner::new(grid, range);
    for (b, s) in parts {
        merged.merge(b).map_err(|e| CliError::internal(STAGE, e.to_string()))?;
        total.rows += s.rows;
        total.rejected += s.rejected;
        total.filtered_out += s.filtered_out;
        total.binned += s.binned;
    }
    let series = merged.finish();
    info!(
        "ingest: {} rows, {} malformed, {} filtered out, {} binned into {} cells",
        total.rows,
        total.rejected,
        total.filtered_out,
        total.binned,
        series.len()
    );
    let store = CellStore { resolution: grid.resolution(), start_date: range.start(), days: range.days(), series };
    Ok((store, total))
}

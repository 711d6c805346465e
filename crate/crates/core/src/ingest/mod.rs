//! Active-fire CSV parsing, filtering and binning into per-cell daily counts.

mod store;

use std::collections::BTreeMap;
use std::io::Read;

use chrono::NaiveDate;
use thiserror::Error;

use crate::hexgrid::{CellId, GeoPoint, HexGrid};

pub use store::{read_store, write_store, CellStore, STORE_MAGIC, STORE_VERSION};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("required column {0:?} is missing from the header")]
    MissingColumn(String),
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("date range starts ({start}) after it ends ({end})")]
    DateRange { start: NaiveDate, end: NaiveDate },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("cell store: {0}")]
    Store(String),
    #[error("binner resolution/date range differ; cannot merge")]
    IncompatibleBinner,
}

/// One satellite fire detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FireRecord {
    pub location: GeoPoint,
    pub date: NaiveDate,
    /// Detection confidence, percent.
    pub confidence: u8,
}

/// Header names of the four required columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub latitude: String,
    pub longitude: String,
    pub acq_date: String,
    pub confidence: String,
}

impl Default for Schema {
    /// Column names of the MCD14ML text product.
    fn default() -> Self {
        Self {
            latitude: "latitude".into(),
            longitude: "longitude".into(),
            acq_date: "acq_date".into(),
            confidence: "confidence".into(),
        }
    }
}

/// Inclusive calendar-date interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DateRange {
    start: NaiveDate,
    end: NaiveDate,
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self, IngestError> {
        if start > end {
            return Err(IngestError::DateRange { start, end });
        }
        Ok(Self { start, end })
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn end(&self) -> NaiveDate {
        self.end
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        self.start <= d && d <= self.end
    }

    /// Number of days, both ends included.
    pub fn days(&self) -> usize {
        (self.end - self.start).num_days() as usize + 1
    }
}

/// Daily fire counts of one cell, one value per day from `start_date`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DailySeries {
    pub cell: CellId,
    pub start_date: NaiveDate,
    pub counts: Vec<u32>,
}

impl DailySeries {
    pub fn end_date(&self) -> NaiveDate {
        self.start_date + chrono::Days::new(self.counts.len().saturating_sub(1) as u64)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }

    /// Index of `d` in `counts`, if covered.
    pub fn offset(&self, d: NaiveDate) -> Option<usize> {
        let k = (d - self.start_date).num_days();
        (k >= 0 && (k as usize) < self.counts.len()).then_some(k as usize)
    }
}

/// Records read from one stream and the number of malformed rows skipped.
#[derive(Debug, Clone, Default)]
pub struct ParseOutcome {
    pub records: Vec<FireRecord>,
    pub rejected: u64,
}

/// Streaming reader over a detection CSV. Yields one item per data row;
/// malformed rows come out as `Err(IngestError::Row)`.
pub struct RecordReader<R: Read> {
    rows: csv::StringRecordsIntoIter<R>,
    cols: [usize; 4],
}

impl<R: Read> RecordReader<R> {
    pub fn new(stream: R, schema: &Schema) -> Result<Self, IngestError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(stream);
        let header = rdr.headers()?.clone();
        let find = |name: &str| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| IngestError::MissingColumn(name.to_owned()))
        };
        let cols = [
            find(&schema.latitude)?,
            find(&schema.longitude)?,
            find(&schema.acq_date)?,
            find(&schema.confidence)?,
        ];
        Ok(Self {
            rows: rdr.into_records(),
            cols,
        })
    }

    fn convert(&self, row: &csv::StringRecord) -> Result<FireRecord, String> {
        let field = |i: usize| row.get(self.cols[i]).ok_or("row is too short");
        let lat: f64 = field(0)?.parse().map_err(|_| "latitude is not a number")?;
        let lon: f64 = field(1)?.parse().map_err(|_| "longitude is not a number")?;
        let location = GeoPoint::new(lat, lon).map_err(|e| e.to_string())?;
        let date = NaiveDate::parse_from_str(field(2)?, "%Y-%m-%d").map_err(|_| "acq_date is not YYYY-MM-DD")?;
        let confidence: u8 = field(3)?
            .parse()
            .ok()
            .filter(|c| *c <= 100)
            .ok_or("confidence is not an integer percent")?;
        Ok(FireRecord {
            location,
            date,
            confidence,
        })
    }
}

impl<R: Read> Iterator for RecordReader<R> {
    type Item = Result<FireRecord, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        let row = match self.rows.next()? {
            Ok(row) => row,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                return Some(Err(IngestError::Row {
                    line,
                    message: e.to_string(),
                }));
            }
        };
        let line = row.position().map_or(0, |p| p.line());
        Some(
            self.convert(&row)
                .map_err(|message| IngestError::Row { line, message }),
        )
    }
}

/// Reads every record of `stream`. Malformed rows are counted and skipped, or
/// abort the parse when `strict`.
pub fn parse_records<R: Read>(stream: R, schema: &Schema, strict: bool) -> Result<ParseOutcome, IngestError> {
    let mut out = ParseOutcome::default();
    for item in RecordReader::new(stream, schema)? {
        match item {
            Ok(r) => out.records.push(r),
            Err(e @ IngestError::Row { .. }) if strict => return Err(e),
            Err(IngestError::Row { .. }) => out.rejected += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Keeps records with confidence strictly above `min_confidence` and a date
/// inside `range`.
pub fn keep_record(r: &FireRecord, min_confidence: u8, range: &DateRange) -> bool {
    r.confidence > min_confidence && range.contains(r.date)
}

pub fn filter_records(rs: &[FireRecord], min_confidence: u8, range: &DateRange) -> Vec<FireRecord> {
    rs.iter().copied().filter(|r| keep_record(r, min_confidence, range)).collect()
}

/// Accumulates daily counts per cell. Binners over disjoint chunks of the
/// input can be merged in any order with the same result.
#[derive(Debug, Clone)]
pub struct Binner<'g> {
    grid: &'g HexGrid,
    range: DateRange,
    cells: BTreeMap<u64, Vec<u32>>,
    outside_range: u64,
}

impl<'g> Binner<'g> {
    pub fn new(grid: &'g HexGrid, range: DateRange) -> Self {
        Self {
            grid,
            range,
            cells: BTreeMap::new(),
            outside_range: 0,
        }
    }

    pub fn add(&mut self, r: &FireRecord) {
        if !self.range.contains(r.date) {
            self.outside_range += 1;
            return;
        }
        let day = (r.date - self.range.start()).num_days() as usize;
        let cell = self.grid.latlon_to_cell(r.location).index();
        let days = self.range.days();
        let counts = self.cells.entry(cell).or_insert_with(|| vec![0; days]);
        counts[day] += 1;
    }

    /// Records ignored because their date fell outside the range.
    pub fn outside_range(&self) -> u64 {
        self.outside_range
    }

    pub fn merge(&mut self, other: Binner<'_>) -> Result<(), IngestError> {
        if self.grid.resolution() != other.grid.resolution() || self.range != other.range {
            return Err(IngestError::IncompatibleBinner);
        }
        self.outside_range += other.outside_range;
        for (cell, counts) in other.cells {
            match self.cells.get_mut(&cell) {
                Some(mine) => mine.iter_mut().zip(counts).for_each(|(a, b)| *a += b),
                None => {
                    self.cells.insert(cell, counts);
                }
            }
        }
        Ok(())
    }

    /// One series per cell with at least one detection, ordered by cell index.
    pub fn finish(self) -> Vec<DailySeries> {
        let resolution = self.grid.resolution();
        let start = self.range.start();
        self.cells
            .into_iter()
            .map(|(index, counts)| DailySeries {
                cell: CellId::new(resolution, index).expect("binned index is in range"),
                start_date: start,
                counts,
            })
            .collect()
    }
}

/// Bins already-filtered records into per-cell daily series.
pub fn bin_to_cells(rs: &[FireRecord], grid: &HexGrid, range: DateRange) -> Vec<DailySeries> {
    let mut b = Binner::new(grid, range);
    rs.iter().for_each(|r| b.add(r));
    b.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    const HEADER: &str = "latitude,longitude,brightness,scan,track,acq_date,acq_time,satellite,confidence,version,bright_t31,frp,daynight,type\n";

    #[test]
    fn parses_mcd14ml_row() {
        let csv = format!("{HEADER}-10.5,-55.2,320.1,1.0,1.0,2005-08-14,1330,T,91,6.0NRT,300.2,12.5,D,0\n");
        let out = parse_records(csv.as_bytes(), &Schema::default(), false).unwrap();
        assert_eq!(out.rejected, 0);
        assert_eq!(
            out.records,
            vec![FireRecord {
                location: GeoPoint::new(-10.5, -55.2).unwrap(),
                date: date("2005-08-14"),
                confidence: 91
            }]
        );
    }

    #[test]
    fn header_only_is_empty() {
        let out = parse_records(HEADER.as_bytes(), &Schema::default(), true).unwrap();
        assert!(out.records.is_empty());
        assert_eq!(out.rejected, 0);
    }

    #[test]
    fn malformed_rows_are_counted_or_fatal() {
        let csv = "latitude,longitude,acq_date,confidence\n1,2,2005-01-01,low\n1,2,2005-01-01,80\n";
        let out = parse_records(csv.as_bytes(), &Schema::default(), false).unwrap();
        assert_eq!((out.records.len(), out.rejected), (1, 1));
        let err = parse_records(csv.as_bytes(), &Schema::default(), true).unwrap_err();
        assert!(matches!(err, IngestError::Row { line: 2, .. }), "{err}");
    }

    #[test]
    fn missing_column_is_a_schema_error() {
        let err = parse_records("latitude,longitude,acq_date\n".as_bytes(), &Schema::default(), false).unwrap_err();
        assert!(matches!(err, IngestError::MissingColumn(c) if c == "confidence"));
    }

    #[test]
    fn filter_is_strict_on_confidence_and_inclusive_on_dates() {
        let range = DateRange::new(date("2003-01-01"), date("2017-12-31")).unwrap();
        let rec = |c: u8, d: &str| FireRecord {
            location: GeoPoint::new(0.0, 0.0).unwrap(),
            date: date(d),
            confidence: c,
        };
        let rs = [
            rec(75, "2005-01-01"),
            rec(76, "2005-01-01"),
            rec(90, "2002-12-31"),
            rec(90, "2003-01-01"),
            rec(90, "2017-12-31"),
            rec(90, "2018-01-01"),
        ];
        let kept = filter_records(&rs, 75, &range);
        assert_eq!(kept, vec![rs[1], rs[3], rs[4]]);
        assert!(DateRange::new(date("2004-01-01"), date("2003-01-01")).is_err());
    }

    #[test]
    fn binning_counts_per_cell_and_day() {
        let grid = HexGrid::new(4).unwrap();
        let range = DateRange::new(date("2010-01-01"), date("2010-01-10")).unwrap();
        let at = |lat: f64, lon: f64, d: &str| FireRecord {
            location: GeoPoint::new(lat, lon).unwrap(),
            date: date(d),
            confidence: 90,
        };
        let rs = vec![
            at(10.0, 10.0, "2010-01-03"),
            at(10.0, 10.0, "2010-01-03"),
            at(10.0, 10.0, "2010-01-03"),
            at(-40.0, 120.0, "2010-01-10"),
        ];
        let series = bin_to_cells(&rs, &grid, range);
        assert_eq!(series.len(), 2);
        let a = series.iter().find(|s| s.cell == grid.latlon_to_cell(rs[0].location)).unwrap();
        assert_eq!(a.counts[2], 3);
        assert_eq!(a.counts.len(), 10);
        assert_eq!(a.end_date(), date("2010-01-10"));
        assert!(series.windows(2).all(|w| w[0].cell < w[1].cell));
    }
}

//! `cells.bin`: the binned daily series on disk.
//!
//! All integers are little-endian.
//!
//! ```text
//! magic       8 bytes   "PYROCELL"
//! version     u16       1
//! resolution  u8
//! reserved    u8        0
//! start       i32       first day, days since 1970-01-01
//! days        u32       series length
//! cells       u32       number of series
//! per series, in increasing cell index:
//!   index     u64
//!   runs      u32       number of (value, length) runs
//!   runs × (value u32, length u32), lengths summing to `days`
//! ```

use std::io::{Read, Write};

use chrono::NaiveDate;

use super::{DailySeries, IngestError};
use crate::hexgrid::CellId;

pub const STORE_MAGIC: &[u8; 8] = b"PYROCELL";
pub const STORE_VERSION: u16 = 1;

/// Contents of a cell store: series sharing one resolution and date span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellStore {
    pub resolution: u8,
    pub start_date: NaiveDate,
    pub days: usize,
    pub series: Vec<DailySeries>,
}

fn epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid date")
}

pub fn write_store<W: Write>(mut w: W, store: &CellStore) -> Result<(), IngestError> {
    let bad = |m: String| IngestError::Store(m);
    w.write_all(STORE_MAGIC)?;
    w.write_all(&STORE_VERSION.to_le_bytes())?;
    w.write_all(&[store.resolution, 0])?;
    let start = (store.start_date - epoch()).num_days() as i32;
    w.write_all(&start.to_le_bytes())?;
    w.write_all(&(store.days as u32).to_le_bytes())?;
    w.write_all(&(store.series.len() as u32).to_le_bytes())?;
    let mut prev: Option<u64> = None;
    for s in &store.series {
        if s.counts.len() != store.days || s.start_date != store.start_date || s.cell.resolution() != store.resolution {
            return Err(bad(format!("series {} does not match the store layout", s.cell)));
        }
        if prev.is_some_and(|p| p >= s.cell.index()) {
            return Err(bad("series must be sorted by cell index without duplicates".into()));
        }
        prev = Some(s.cell.index());
        let runs = run_lengths(&s.counts);
        w.write_all(&s.cell.index().to_le_bytes())?;
        w.write_all(&(runs.len() as u32).to_le_bytes())?;
        for (value, len) in runs {
            w.write_all(&value.to_le_bytes())?;
            w.write_all(&len.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_store<R: Read>(mut r: R) -> Result<CellStore, IngestError> {
    let bad = |m: &str| IngestError::Store(m.to_owned());
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| bad("file is too short"))?;
    if &magic != STORE_MAGIC {
        return Err(bad("not a cell store (bad magic)"));
    }
    let version = u16::from_le_bytes(take(&mut r)?);
    if version != STORE_VERSION {
        return Err(IngestError::Store(format!("unsupported version {version}")));
    }
    let [resolution, _] = take::<2>(&mut r)?;
    let start = i32::from_le_bytes(take(&mut r)?);
    let days = u32::from_le_bytes(take(&mut r)?) as usize;
    let n = u32::from_le_bytes(take(&mut r)?) as usize;
    let start_date = epoch()
        .checked_add_signed(chrono::TimeDelta::days(i64::from(start)))
        .ok_or_else(|| bad("start date out of range"))?;

    let mut series = Vec::with_capacity(n);
    for _ in 0..n {
        let index = u64::from_le_bytes(take(&mut r)?);
        let cell = CellId::new(resolution, index).map_err(|e| IngestError::Store(e.to_string()))?;
        let runs = u32::from_le_bytes(take(&mut r)?) as usize;
        let mut counts = Vec::with_capacity(days);
        for _ in 0..runs {
            let value = u32::from_le_bytes(take(&mut r)?);
            let len = u32::from_le_bytes(take(&mut r)?) as usize;
            if counts.len() + len > days {
                return Err(bad("run lengths exceed the series length"));
            }
            counts.resize(counts.len() + len, value);
        }
        if counts.len() != days {
            return Err(bad("run lengths do not cover the series"));
        }
        series.push(DailySeries {
            cell,
            start_date,
            counts,
        });
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(bad("trailing bytes after the last series"));
    }
    Ok(CellStore {
        resolution,
        start_date,
        days,
        series,
    })
}

fn take<const N: usize>(r: &mut impl Read) -> Result<[u8; N], IngestError> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)
        .map_err(|_| IngestError::Store("unexpected end of file".into()))?;
    Ok(b)
}

fn run_lengths(counts: &[u32]) -> Vec<(u32, u32)> {
    let mut runs: Vec<(u32, u32)> = Vec::new();
    for &c in counts {
        match runs.last_mut() {
            Some((v, len)) if *v == c => *len += 1,
            _ => runs.push((c, 1)),
        }
    }
    runs
}

//! Small helpers for writing and reading the CSV artifacts.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Shortest representation that reads back to the same `f64`.
pub fn num(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.is_finite() && (v.abs() < 1e-5 || v.abs() >= 1e16) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// In-memory CSV document.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        writer.write_record(header).expect("writing to memory");
        Self { writer }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).expect("writing to memory");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.writer.into_inner().expect("writing to memory")
    }
}

/// A file written by a stage and its digest.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct Written {
    pub path: PathBuf,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn write_file(stage: &'static str, path: &Path, bytes: &[u8]) -> Result<Written, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::input(stage, format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::input(stage, format!("cannot write {}: {e}", path.display())))?;
    Ok(Written { path: path.to_path_buf(), sha256: sha256_hex(bytes) })
}

pub fn read_file(stage: &'static str, path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::input(stage, format!("cannot read {}: {e}", path.display())))
}

/// Rows of a CSV file as maps from header name to field.
pub struct Rows {
    header: Vec<String>,
    records: Vec<csv::StringRecord>,
}

impl Rows {
    pub fn parse(stage: &'static str, path: &Path, required: &[&str]) -> Result<Self, CliError> {
        let bytes = read_file(stage, path)?;
        let bad = |m: String| CliError::input(stage, format!("{}: {m}", path.display()));
        let mut rdr = csv::Reader::from_reader(bytes.as_slice());
        let header: Vec<String> = rdr.headers().map_err(|e| bad(e.to_string()))?.iter().map(String::from).collect();
        if let Some(missing) = required.iter().find(|c| !header.iter().any(|h| h == *c)) {
            return Err(bad(format!("missing column {missing:?}")));
        }
        let records = rdr.records().collect::<Result<Vec<_>, _>>().map_err(|e| bad(e.to_string()))?;
        Ok(Self { header, records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = Row<'_>> {
        self.records.iter().map(|r| Row { header: &self.header, record: r })
    }
}

pub struct Row<'a> {
    header: &'a [String],
    record: &'a csv::StringRecord,
}

impl Row<'_> {
    pub fn get(&self, column: &str) -> &str {
        self.header
            .iter()
            .position(|h| h == column)
            .and_then(|i| self.record.get(i))
            .unwrap_or("")
    }

    pub fn line(&self) -> u64 {
        self.record.position().map_or(0, |p| p.line())
    }

    pub fn parse<T: std::str::FromStr>(&self, stage: &'static str, column: &str) -> Result<T, CliError> {
        let v = self.get(column);
        v.parse()
            .map_err(|_| CliError::input(stage, format!("line {}: bad {column} value {v:?}", self.line())))
    }

    pub fn parse_opt(&self, stage: &'static str, column: &str) -> Result<Option<f64>, CliError> {
        match self.get(column) {
            "" => Ok(None),
            _ => self.parse(stage, column).map(Some),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_roundtrip() {
        for v in [0.1, 1e-300, 123456.789, -2.5, 7.0] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(-0.0), "0");
        assert_eq!(num(4.5e-47), "4.5e-47");
        assert_eq!(num(0.25), "0.25");
        assert_eq!(opt(None), "");
    }

    #[test]
    fn table_is_rfc4180() {
        let mut t = Table::new(&["a", "b"]);
        t.row(["x,y", "q\"z"]);
        assert_eq!(String::from_utf8(t.into_bytes()).unwrap(), "a,b\r\n\"x,y\",\"q\"\"z\"\r\n");
    }
}

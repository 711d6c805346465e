//! Pipeline configuration: defaults, a plain-text `key = value` file, and
//! per-key overrides from the command line, applied in that order.
//!
//! Recognised keys:
//!
//! | key | default |
//! |---|---|
//! | `resolution` | 8 |
//! | `min_confidence` | 75 (kept detections have confidence strictly above) |
//! | `from`, `to` | 2003-01-01, 2017-12-31 |
//! | `length_percentile` | 99 |
//! | `train_seasons` | 10 |
//! | `methods` | arima,ets,linreg,mlp,snaive,stlf,tsglm |
//! | `seed` | 42 |
//! | `selection` | mae |
//! | `threads` | available parallelism |
//! | `inputs` | none; comma-separated paths |
//! | `out_dir` | `out` |
//! | `continents` | none; CSV with `cell_id,continent` |
//! | `strict` | false; abort on the first malformed input row |
//! | `export_fields` | mean_length_days,length_trend,peak_month,fss_mean,fss_trend |
//!
//! Blank lines and lines starting with `#` are ignored.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use pyroseason::evaluate::SelectionMetric;
use pyroseason::forecast::Method;
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub resolution: u8,
    pub min_confidence: u8,
    pub from: NaiveDate,
    pub to: NaiveDate,
    pub length_percentile: f64,
    pub train_seasons: usize,
    #[serde(serialize_with = "ser_methods")]
    pub methods: Vec<Method>,
    pub seed: u64,
    #[serde(serialize_with = "ser_selection")]
    pub selection: SelectionMetric,
    #[serde(skip)]
    pub threads: Option<usize>,
    pub inputs: Vec<PathBuf>,
    #[serde(skip)]
    pub out_dir: PathBuf,
    pub continents: Option<PathBuf>,
    pub strict: bool,
    pub export_fields: Vec<String>,
}

fn ser_methods<S: serde::Serializer>(m: &[Method], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(m.iter().map(|m| m.id()))
}

fn ser_selection<S: serde::Serializer>(m: &SelectionMetric, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(selection_name(*m))
}

pub fn selection_name(m: SelectionMetric) -> &'static str {
    match m {
        SelectionMetric::Mae => "mae",
        SelectionMetric::Mase => "mase",
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            resolution: 8,
            min_confidence: 75,
            from: NaiveDate::from_ymd_opt(2003, 1, 1).expect("valid date"),
            to: NaiveDate::from_ymd_opt(2017, 12, 31).expect("valid date"),
            length_percentile: 99.0,
            train_seasons: 10,
            methods: Method::ALL.to_vec(),
            seed: 42,
            selection: SelectionMetric::Mae,
            threads: None,
            inputs: Vec::new(),
            out_dir: PathBuf::from("out"),
            continents: None,
            strict: false,
            export_fields: ["mean_length_days", "length_trend", "peak_month", "fss_mean", "fss_trend"]
                .map(String::from)
                .to_vec(),
        }
    }
}

fn list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::usage(format!("invalid value {value:?} for {key}")))
}

impl PipelineConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let value = value.trim();
        match key.trim() {
            "resolution" => self.resolution = parse(key, value)?,
            "min_confidence" => self.min_confidence = parse(key, value)?,
            "from" => self.from = parse(key, value)?,
            "to" => self.to = parse(key, value)?,
            "length_percentile" => self.length_percentile = parse(key, value)?,
            "train_seasons" => self.train_seasons = parse(key, value)?,
            "methods" => {
                self.methods = list(value)
                    .map(|m| m.parse().map_err(|e| CliError::usage(format!("{e}"))))
                    .collect::<Result<_, _>>()?;
                self.methods.sort();
                self.methods.dedup();
            }
            "seed" => self.seed = parse(key, value)?,
            "selection" => self.selection = value.parse().map_err(|e| CliError::usage(format!("{e}")))?,
            "threads" => self.threads = Some(parse(key, value)?),
            "inputs" => self.inputs = list(value).map(PathBuf::from).collect(),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "continents" => self.continents = (!value.is_empty()).then(|| PathBuf::from(value)),
            "strict" => self.strict = parse(key, value)?,
            "export_fields" => self.export_fields = list(value).map(String::from).collect(),
            other => return Err(CliError::usage(format!("unknown configuration key {other:?}"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::usage(format!("config line {}: expected key = value", n + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::usage(m));
        if self.resolution > pyroseason::hexgrid::MAX_RESOLUTION {
            return bad(format!("resolution {} exceeds {}", self.resolution, pyroseason::hexgrid::MAX_RESOLUTION));
        }
        if self.min_confidence > 100 {
            return bad(format!("min_confidence {} exceeds 100", self.min_confidence));
        }
        if self.from > self.to {
            return bad(format!("from {} is after to {}", self.from, self.to));
        }
        if !(self.length_percentile > 0.0 && self.length_percentile <= 100.0) {
            return bad(format!("length_percentile {} is outside (0, 100]", self.length_percentile));
        }
        if self.train_seasons == 0 {
            return bad("train_seasons must be positive".into());
        }
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        Ok(())
    }
}

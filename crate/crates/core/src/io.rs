//! Dataset files (JSON and CSV) and the JSON report envelope.
//!
//! CSV layout: a first line `m,k`, then one block of `m` rows with `k`
//! comma-separated values per configuration, blocks separated by blank
//! lines. Lines starting with `#` are comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ShapeError};
use crate::means::Sample;
use crate::preshape::{to_preshape, Configuration, PreShape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    Json,
    Csv,
}

impl DatasetFormat {
    /// Guesses the format from a file extension, defaulting to JSON.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => DatasetFormat::Csv,
            _ => DatasetFormat::Json,
        }
    }
}

/// A set of landmark configurations, each `m` rows (axes) by `k` columns
/// (landmarks).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFile {
    pub m: usize,
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub names: Option<Vec<String>>,
    pub configurations: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl DatasetFile {
    pub fn from_configurations(configs: &[Configuration]) -> Result<Self> {
        let first = configs.first().ok_or(ShapeError::EmptySample)?;
        let ds = DatasetFile {
            m: first.m(),
            k: first.k(),
            names: None,
            configurations: configs
                .iter()
                .map(|c| {
                    c.entries()
                        .row_iter()
                        .map(|r| r.iter().copied().collect())
                        .collect()
                })
                .collect(),
            weights: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.configurations.is_empty() {
            return Err(ShapeError::EmptySample);
        }
        if self.k <= self.m || self.m == 0 {
            return Err(ShapeError::InvalidDimension(format!(
                "need k > m >= 1, got m = {}, k = {}",
                self.m, self.k
            )));
        }
        let expected = format!("{}x{}", self.m, self.k);
        for (index, c) in self.configurations.iter().enumerate() {
            let ragged = c.len() != self.m || c.iter().any(|row| row.len() != self.k);
            if ragged {
                let widths: Vec<String> = c.iter().map(|r| r.len().to_string()).collect();
                return Err(ShapeError::DimensionMismatch {
                    index,
                    expected,
                    found: format!("{} rows of widths [{}]", c.len(), widths.join(", ")),
                });
            }
        }
        if let Some(names) = &self.names {
            if names.len() != self.configurations.len() {
                return Err(ShapeError::InvalidArgument(format!(
                    "{} names for {} configurations",
                    names.len(),
                    self.configurations.len()
                )));
            }
        }
        if let Some(w) = &self.weights {
            if w.len() != self.configurations.len() {
                return Err(ShapeError::InvalidWeights(format!(
                    "{} weights for {} configurations",
                    w.len(),
                    self.configurations.len()
                )));
            }
            if w.iter().any(|&x| !(x >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(ShapeError::InvalidWeights(
                    "weights must be non-negative and sum to 1".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.configurations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configurations.is_empty()
    }

    pub fn configurations(&self) -> Result<Vec<Configuration>> {
        self.configurations
            .iter()
            .map(|rows| {
                let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                Configuration::new(DMatrix::from_row_slice(self.m, self.k, &flat))
            })
            .collect()
    }

    pub fn preshapes(&self) -> Result<Vec<PreShape>> {
        self.configurations()?.iter().map(to_preshape).collect()
    }

    /// Pre-shapes with the file's weights, or uniform weights.
    pub fn sample(&self) -> Result<Sample> {
        let points = self.preshapes()?;
        match &self.weights {
            Some(w) => Sample::weighted(points, w.clone()),
            None => Sample::uniform(points),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| ShapeError::Io(e.to_string()))
    }

    /// CSV text; names and weights are not represented.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},{}\n", self.m, self.k);
        for (i, c) in self.configurations.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            for row in c {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
                let _ = writeln!(out, "{}", cells.join(","));
            }
        }
        out
    }
}

pub fn parse_json(text: &str) -> Result<DatasetFile> {
    let ds: DatasetFile = serde_json::from_str(text).map_err(|e| ShapeError::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    ds.validate()?;
    Ok(ds)
}

pub fn parse_csv(text: &str) -> Result<DatasetFile> {
    let mut header: Option<(usize, usize)> = None;
    let mut configurations = Vec::new();
    let mut block: Vec<Vec<f64>> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.starts_with('#') {
            continue;
        }
        if line.is_empty() {
            if !block.is_empty() {
                configurations.push(std::mem::take(&mut block));
            }
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if header.is_none() {
            let parse = |s: &str| {
                s.parse::<usize>().map_err(|_| ShapeError::Parse {
                    line: line_no,
                    message: format!("expected header `m,k`, found `{line}`"),
                })
            };
            if cells.len() != 2 {
                return Err(ShapeError::Parse {
                    line: line_no,
                    message: format!("expected header `m,k`, found `{line}`"),
                });
            }
            header = Some((parse(cells[0])?, parse(cells[1])?));
            continue;
        }
        let row = cells
            .iter()
            .enumerate()
            .map(|(field, c)| {
                c.parse::<f64>().map_err(|_| ShapeError::Parse {
                    line: line_no,
                    message: format!("field {} is not a number: `{c}`", field + 1),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        block.push(row);
    }
    if !block.is_empty() {
        configurations.push(block);
    }
    let (m, k) = header.ok_or(ShapeError::Parse {
        line: 1,
        message: "missing `m,k` header".into(),
    })?;
    let ds = DatasetFile {
        m,
        k,
        names: None,
        configurations,
        weights: None,
    };
    ds.validate()?;
    Ok(ds)
}

pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<DatasetFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ShapeError::Io(format!("{}: {e}", path.display())))?;
    match format {
        DatasetFormat::Json => parse_json(&text),
        DatasetFormat::Csv => parse_csv(&text),
    }
}

/// Wrapper written by every command: provenance, the resolved configuration
/// and the result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEnvelope<P> {
    pub tool_version: String,
    pub command: String,
    pub config_echo: serde_json::Value,
    pub payload: P,
    pub timings_ms: BTreeMap<String, f64>,
}

impl<P: Serialize> ReportEnvelope<P> {
    pub fn new(command: &str, config_echo: serde_json::Value, payload: P) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_echo,
            payload,
            timings_ms: BTreeMap::new(),
        }
    }

    pub fn with_timing(mut self, key: &str, ms: f64) -> Self {
        self.timings_ms.insert(key.to_string(), ms);
        self
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| ShapeError::Io(e.to_string()))
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| ShapeError::Io(e.to_string()))
    }
}

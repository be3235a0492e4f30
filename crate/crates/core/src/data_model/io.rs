//! File schemas: panel CSV, cost-observation CSV and the `key=value`
//! metadata sidecar.
//!
//! Numbers are parsed locale-independently. Only a decimal point is
//! accepted; thousands separators, currency symbols and non-finite
//! spellings (`inf`, `NaN`) are rejected.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{
    validate_panel, CostObservation, CostSample, DataError, ItemKind, PanelRow,
    PriceQuantityPanel, RawPanel, ShareVector,
};

pub const PANEL_HEADER: [&str; 5] = ["item", "kind", "year", "price", "quantity"];

#[derive(Debug, Error)]
pub enum ReadError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },
    #[error("{path}: {source}")]
    Invalid {
        path: String,
        #[source]
        source: DataError,
    },
}

impl ReadError {
    fn parse(path: &str, line: u64, message: impl Into<String>) -> Self {
        ReadError::Parse {
            path: path.to_string(),
            line,
            message: message.into(),
        }
    }
}

/// Parses a decimal number, refusing anything a locale-aware reader might
/// have guessed at.
pub fn parse_number(field: &str) -> Result<f64, String> {
    let s = field.trim();
    if s.is_empty() {
        return Err("empty numeric field".into());
    }
    if let Some(c) = s
        .chars()
        .find(|c| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
    {
        return Err(format!("invalid character `{c}` in numeric field `{s}`"));
    }
    let v: f64 = s
        .parse()
        .map_err(|_| format!("cannot parse `{s}` as a number"))?;
    if !v.is_finite() {
        return Err(format!("non-finite number `{s}`"));
    }
    Ok(v)
}

fn parse_year(field: &str) -> Result<i32, String> {
    let s = field.trim();
    s.parse::<i32>()
        .map_err(|_| format!("cannot parse `{s}` as a year"))
}

fn open(path: &Path) -> Result<File, ReadError> {
    File::open(path).map_err(|source| ReadError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader)
}

fn csv_err(path: &str, err: csv::Error) -> ReadError {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    ReadError::parse(path, line, err.to_string())
}

/// Reads a panel CSV into raw rows without validating panel invariants.
pub fn read_raw_panel<R: Read>(reader: R, path: &str) -> Result<RawPanel, ReadError> {
    let mut rdr = csv_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let mut cols = [0usize; 5];
    for (slot, name) in cols.iter_mut().zip(PANEL_HEADER) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ReadError::parse(path, 1, format!("missing column `{name}`")))?;
    }

    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |k: usize| record.get(cols[k]).unwrap_or("");
        let kind: ItemKind = field(1)
            .parse()
            .map_err(|m: String| ReadError::parse(path, line, m))?;
        let year = parse_year(field(2)).map_err(|m| ReadError::parse(path, line, m))?;
        let price = parse_number(field(3)).map_err(|m| ReadError::parse(path, line, m))?;
        let quantity = parse_number(field(4)).map_err(|m| ReadError::parse(path, line, m))?;
        rows.push(PanelRow {
            item: field(0).to_string(),
            kind,
            year,
            price,
            quantity,
        });
    }
    Ok(RawPanel { rows })
}

pub fn read_panel(path: &Path) -> Result<PriceQuantityPanel, ReadError> {
    let label = path.display().to_string();
    let raw = read_raw_panel(open(path)?, &label)?;
    validate_panel(raw).map_err(|source| ReadError::Invalid {
        path: label,
        source,
    })
}

/// Reads a cost-observation CSV.
///
/// Inputs are discovered from `price_<item>` columns in header order unless
/// `inputs` selects and orders them explicitly. Optional `quantity_<item>`
/// columns are checked against the shares.
pub fn read_cost_sample<R: Read>(
    reader: R,
    path: &str,
    inputs: Option<&[String]>,
) -> Result<CostSample, ReadError> {
    let mut rdr = csv_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let need = |name: &str| {
        col(name).ok_or_else(|| ReadError::parse(path, 1, format!("missing column `{name}`")))
    };
    let id_col = need("obs_id")?;
    let cost_col = need("total_cost")?;
    let output_col = need("output_level")?;

    let discovered: Vec<String> = headers
        .iter()
        .filter_map(|h| h.strip_prefix("price_").map(str::to_string))
        .collect();
    for h in headers.iter() {
        if let Some(item) = h.strip_prefix("share_") {
            if !discovered.iter().any(|d| d == item) {
                return Err(ReadError::parse(
                    path,
                    1,
                    format!("column `{h}` has no matching `price_{item}`"),
                ));
            }
        }
    }
    let names: Vec<String> = match inputs {
        Some(sel) => sel.to_vec(),
        None => discovered,
    };
    if names.is_empty() {
        return Err(ReadError::parse(path, 1, "no `price_<item>` columns"));
    }
    let mut price_cols = Vec::with_capacity(names.len());
    let mut share_cols = Vec::with_capacity(names.len());
    let mut qty_cols = Vec::with_capacity(names.len());
    for name in &names {
        price_cols.push(need(&format!("price_{name}"))?);
        share_cols.push(need(&format!("share_{name}"))?);
        qty_cols.push(col(&format!("quantity_{name}")));
    }
    let all_qty: Option<Vec<usize>> = qty_cols.iter().copied().collect();

    let mut observations = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let num = |c: usize| {
            parse_number(record.get(c).unwrap_or("")).map_err(|m| ReadError::parse(path, line, m))
        };
        let id = record.get(id_col).unwrap_or("").to_string();
        let total_cost = num(cost_col)?;
        let output_level = num(output_col)?;
        let prices = price_cols.iter().map(|&c| num(c)).collect::<Result<Vec<_>, _>>()?;
        let shares = share_cols.iter().map(|&c| num(c)).collect::<Result<Vec<_>, _>>()?;
        let quantities = match &all_qty {
            Some(cols) => Some(cols.iter().map(|&c| num(c)).collect::<Result<Vec<_>, _>>()?),
            None => None,
        };
        let invalid = |source: DataError| ReadError::Invalid {
            path: format!("{path}:{line}"),
            source,
        };
        let share_vec = ShareVector::new(names.clone(), shares).map_err(invalid)?;
        let obs = CostObservation::new(
            id,
            total_cost,
            prices,
            output_level,
            share_vec,
            quantities.as_deref(),
        )
        .map_err(invalid)?;
        observations.push(obs);
    }
    CostSample::new(names, observations).map_err(|source| ReadError::Invalid {
        path: path.to_string(),
        source,
    })
}

pub fn read_cost_sample_file(
    path: &Path,
    inputs: Option<&[String]>,
) -> Result<CostSample, ReadError> {
    read_cost_sample(open(path)?, &path.display().to_string(), inputs)
}

/// Contents of a `key=value` metadata sidecar.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metadata {
    pub currency: Option<String>,
    pub quantity_unit: Option<String>,
    pub base_year: Option<i32>,
    pub other: BTreeMap<String, String>,
}

pub fn parse_metadata(text: &str, path: &str) -> Result<Metadata, ReadError> {
    let mut meta = Metadata::default();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            ReadError::parse(path, n as u64 + 1, format!("expected key=value, got `{line}`"))
        })?;
        let (key, value) = (key.trim(), value.trim().to_string());
        match key {
            "currency" => meta.currency = Some(value),
            "quantity_unit" => meta.quantity_unit = Some(value),
            "base_year" => {
                meta.base_year = Some(
                    parse_year(&value).map_err(|m| ReadError::parse(path, n as u64 + 1, m))?,
                )
            }
            _ => {
                meta.other.insert(key.to_string(), value);
            }
        }
    }
    Ok(meta)
}

/// Sidecar location for a data file: the same path with `.meta` appended.
pub fn sidecar_path(data_path: &Path) -> PathBuf {
    let mut os = data_path.as_os_str().to_owned();
    os.push(".meta");
    PathBuf::from(os)
}

/// Reads the sidecar next to `data_path`, if one exists.
pub fn read_sidecar(data_path: &Path) -> Result<Option<Metadata>, ReadError> {
    let path = sidecar_path(data_path);
    if !path.exists() {
        return Ok(None);
    }
    let label = path.display().to_string();
    let text = std::fs::read_to_string(&path).map_err(|source| ReadError::Io {
        path: label.clone(),
        source,
    })?;
    parse_metadata(&text, &label).map(Some)
}

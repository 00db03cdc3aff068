//! CSV ingestion of price and return series.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Fewest prices accepted, giving 50 returns.
pub const MIN_PRICES: usize = 51;

/// Percentage log returns of a price series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnsSeries {
    /// Dates of the returns (the later price of each pair), when the file
    /// has a date column.
    pub dates: Option<Vec<String>>,
    pub y: Vec<f64>,
    pub source: String,
}

/// `y_t = 100 (ln P_t − ln P_{t−1})`.
pub fn returns_from_prices(prices: &[f64]) -> Vec<f64> {
    prices
        .windows(2)
        .map(|w| 100.0 * (w[1].ln() - w[0].ln()))
        .collect()
}

struct Column {
    values: Vec<(u64, String)>,
    dates: Option<Vec<String>>,
}

fn read_column<R: Read>(reader: R, column: Option<&str>, source: &str) -> CliResult<Column> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let idx = match column {
        Some(name) => headers
            .iter()
            .position(|h| h == name)
            .or_else(|| headers.iter().position(|h| h.eq_ignore_ascii_case(name))),
        None if headers.len() == 1 => Some(0),
        None => None,
    }
    .ok_or_else(|| {
        CliError::input(format!(
            "{source}: column '{}' not found (header: {})",
            column.unwrap_or("?"),
            headers.iter().collect::<Vec<_>>().join(",")
        ))
    })?;
    let date_idx = headers
        .iter()
        .position(|h| h.to_ascii_lowercase().contains("date"))
        .filter(|d| *d != idx);
    let mut values = Vec::new();
    let mut dates = date_idx.map(|_| Vec::new());
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let field = rec
            .get(idx)
            .ok_or_else(|| CliError::input(format!("{source}: line {line} has no field {}", idx + 1)))?;
        values.push((line, field.to_string()));
        if let (Some(d), Some(di)) = (dates.as_mut(), date_idx) {
            d.push(rec.get(di).unwrap_or("").to_string());
        }
    }
    Ok(Column { values, dates })
}

fn parse_values(col: &[(u64, String)], source: &str, positive: bool) -> CliResult<Vec<f64>> {
    let mut bad = Vec::new();
    let mut out = Vec::with_capacity(col.len());
    for (line, text) in col {
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() && (!positive || v > 0.0) => out.push(v),
            Ok(v) if v.is_finite() => bad.push(format!("line {line}: nonpositive price {v}")),
            _ => bad.push(format!("line {line}: cannot parse '{text}'")),
        }
    }
    if bad.is_empty() {
        return Ok(out);
    }
    let shown: Vec<_> = bad.iter().take(10).cloned().collect();
    let more = if bad.len() > 10 {
        format!(" (and {} more)", bad.len() - 10)
    } else {
        String::new()
    };
    Err(CliError::input(format!("{source}: {}{more}", shown.join("; "))))
}

/// Reads prices from CSV text and converts them to returns.
pub fn prices_from_reader<R: Read>(reader: R, column: &str, source: &str) -> CliResult<ReturnsSeries> {
    let col = read_column(reader, Some(column), source)?;
    let prices = parse_values(&col.values, source, true)?;
    if prices.len() < MIN_PRICES {
        return Err(CliError::input(format!(
            "{source}: need at least {MIN_PRICES} prices, got {}",
            prices.len()
        )));
    }
    Ok(ReturnsSeries {
        dates: col.dates.map(|d| d[1..].to_vec()),
        y: returns_from_prices(&prices),
        source: format!("{source} [{column}]"),
    })
}

/// Reads the price column of a CSV file.
pub fn ingest_prices(path: &Path, column: &str) -> CliResult<ReturnsSeries> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::input(format!("cannot open {}: {e}", path.display())))?;
    prices_from_reader(file, column, &path.display().to_string())
}

/// Reads a numeric series. Without a matching column a single-column file is
/// accepted as is.
pub fn read_series(path: &Path, column: &str) -> CliResult<Vec<f64>> {
    let source = path.display().to_string();
    let open = || {
        std::fs::File::open(path).map_err(|e| CliError::input(format!("cannot open {source}: {e}")))
    };
    let col = match read_column(open()?, Some(column), &source) {
        Ok(c) => c,
        Err(e) => read_column(open()?, None, &source).map_err(|_| e)?,
    };
    let y = parse_values(&col.values, &source, false)?;
    if y.is_empty() {
        return Err(CliError::input(format!("{source}: no observations")));
    }
    Ok(y)
}

//! Dataset acquisition and preprocessing.
//!
//! The stages run in this order in a full pipeline: fetch, load, sample,
//! drop duplicates, drop missing, one-hot encode, standardize, binarize the
//! target. Each stage is a pure function over its input table.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::io::{Cursor, Read};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{Cell, FrameTable, RawTable};

pub const BANK_ADDITIONAL_URL: &str =
    "https://archive.ics.uci.edu/ml/machine-learning-databases/00222/bank-additional.zip";
pub const BANK_ADDITIONAL_MEMBER: &str = "bank-additional/bank-additional.csv";

/// Returns the cached copy of `member` under `cache_dir`, downloading and
/// extracting the zip archive at `url` only when the cache is empty.
///
/// `file://` URLs are read from the local filesystem.
pub fn fetch_dataset(url: &str, cache_dir: &Path, member: &str) -> Result<PathBuf> {
    let target = cache_dir.join(member);
    if target.is_file() {
        log::info!("using cached dataset {}", target.display());
        return Ok(target);
    }
    log::info!("downloading {url}");
    let archive = download(url)?;
    let bytes = extract_member(&archive, member)?;
    if let Some(parent) = target.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let partial = target.with_extension("partial");
    fs::write(&partial, &bytes).map_err(|e| Error::io(&partial, e))?;
    fs::rename(&partial, &target).map_err(|e| Error::io(&target, e))?;
    Ok(target)
}

fn download(url: &str) -> Result<Vec<u8>> {
    let fetch_err = |reason: String| Error::Fetch {
        url: url.to_string(),
        reason,
    };
    if let Some(local) = url.strip_prefix("file://") {
        return fs::read(local).map_err(|e| fetch_err(e.to_string()));
    }
    let resp = ureq::get(url)
        .timeout(std::time::Duration::from_secs(120))
        .call()
        .map_err(|e| {
            let msg = e.to_string();
            let prefix = format!("{url}: ");
            fetch_err(msg.strip_prefix(&prefix).unwrap_or(&msg).to_string())
        })?;
    let mut body = Vec::new();
    resp.into_reader()
        .read_to_end(&mut body)
        .map_err(|e| fetch_err(e.to_string()))?;
    Ok(body)
}

/// Reads one member out of an in-memory zip archive.
pub fn extract_member(archive: &[u8], member: &str) -> Result<Vec<u8>> {
    let mut zip = zip::ZipArchive::new(Cursor::new(archive))
        .map_err(|e| Error::Format(format!("not a zip archive: {e}")))?;
    let mut file = zip
        .by_name(member)
        .map_err(|_| Error::Format(format!("zip member '{member}' not found")))?;
    let mut out = Vec::new();
    file.read_to_end(&mut out)
        .map_err(|e| Error::Format(format!("zip member '{member}': {e}")))?;
    Ok(out)
}

/// Loads a delimited text file with a header row. Double-quoted fields are
/// unquoted; fields that parse as finite numbers become [`Cell::Number`].
pub fn load_csv(path: &Path, separator: u8) -> Result<RawTable> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&bytes, separator)
}

pub fn parse_csv(bytes: &[u8], separator: u8) -> Result<RawTable> {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Err(Error::Format("empty file, header row required".into()));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(separator)
        .has_headers(true)
        .flexible(false)
        .from_reader(bytes);
    let names: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Format(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut columns: Vec<Vec<Cell>> = vec![Vec::new(); names.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::Parse {
                line,
                reason: match e.kind() {
                    csv::ErrorKind::UnequalLengths {
                        expected_len, len, ..
                    } => format!("expected {expected_len} fields, found {len}"),
                    _ => e.to_string(),
                },
            }
        })?;
        for (col, field) in columns.iter_mut().zip(rec.iter()) {
            col.push(Cell::sniff(field));
        }
    }
    RawTable::new(names, columns)
}

/// Uniform sampling without replacement of `floor(fraction * n)` rows.
/// The selected rows come back in shuffled, seed-stable order.
pub fn sample_rows(table: &RawTable, fraction: f64, seed: u64) -> Result<RawTable> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::validation(format!(
            "sample fraction must be in (0, 1], got {fraction}"
        )));
    }
    let n = table.n_rows();
    let amount = ((fraction * n as f64) + 1e-9).floor() as usize;
    let amount = amount.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    let (chosen, _) = idx.partial_shuffle(&mut rng, amount);
    Ok(table.select_rows(chosen))
}

/// Keeps the first occurrence of each fully identical row.
pub fn drop_duplicates(table: &RawTable) -> RawTable {
    let mut seen = HashSet::with_capacity(table.n_rows());
    let keep: Vec<usize> = (0..table.n_rows())
        .filter(|&r| seen.insert(table.row_key(r)))
        .collect();
    table.select_rows(&keep)
}

/// Drops rows holding an empty cell or a cell equal to `sentinel`.
pub fn drop_missing(table: &RawTable, sentinel: Option<&str>) -> RawTable {
    let is_missing = |c: &Cell| match c {
        Cell::Text(s) => s.trim().is_empty() || sentinel.is_some_and(|m| s == m),
        Cell::Number(_) => false,
    };
    let keep: Vec<usize> = (0..table.n_rows())
        .filter(|&r| !table.columns().iter().any(|col| is_missing(&col[r])))
        .collect();
    table.select_rows(&keep)
}

/// Numeric columns pass through; any column holding text becomes one 0/1
/// indicator column per distinct value, named `<column>_<value>`, placed
/// where the source column stood and ordered by value text.
pub fn one_hot_encode(table: &RawTable) -> Result<FrameTable> {
    let n = table.n_rows();
    let mut names = Vec::new();
    let mut columns = Vec::new();
    for (name, col) in table.names().iter().zip(table.columns()) {
        let numeric = col.iter().all(|c| matches!(c, Cell::Number(_)));
        if numeric {
            names.push(name.clone());
            columns.push(
                col.iter()
                    .map(|c| match c {
                        Cell::Number(v) => *v,
                        Cell::Text(_) => unreachable!(),
                    })
                    .collect(),
            );
            continue;
        }
        let texts: Vec<String> = col.iter().map(Cell::as_text).collect();
        let levels: BTreeSet<&str> = texts.iter().map(String::as_str).collect();
        for level in levels {
            names.push(format!("{name}_{level}"));
            let mut ind = vec![0.0; n];
            for (slot, t) in ind.iter_mut().zip(&texts) {
                if t == level {
                    *slot = 1.0;
                }
            }
            columns.push(ind);
        }
    }
    if names.is_empty() {
        return FrameTable::new(Vec::new(), Vec::new(), n);
    }
    FrameTable::from_columns(names, columns)
}

/// Per-column location and scale used by [`standardize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub columns: Vec<ColumnScale>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub name: String,
    pub mean: f64,
    /// Population standard deviation as measured.
    pub stddev: f64,
    /// Divisor actually applied: `stddev`, or 1 for constant columns.
    pub scale: f64,
}

/// Rescales every column to zero mean and unit population standard
/// deviation. Constant columns become all zeros.
pub fn standardize(table: &FrameTable) -> Result<(FrameTable, ScalerParams)> {
    let n = table.n_rows();
    if n == 0 {
        return Err(Error::DegenerateInput(
            "cannot standardize a table with no rows".into(),
        ));
    }
    let mut out = table.clone();
    let mut params = Vec::with_capacity(table.n_cols());
    for (j, name) in table.column_names().iter().enumerate() {
        let col = table.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let stddev = var.sqrt();
        let constant = col.iter().all(|&v| v == col[0]);
        let scale = if constant || stddev == 0.0 { 1.0 } else { stddev };
        if constant {
            out.map_column(j, |_| 0.0);
        } else {
            out.map_column(j, |v| (v - mean) / scale);
        }
        params.push(ColumnScale {
            name: name.clone(),
            mean,
            stddev: if constant { 0.0 } else { stddev },
            scale,
        });
    }
    Ok((out, ScalerParams { columns: params }))
}

/// Maps every value strictly above the column minimum to 1, the rest to 0.
pub fn binarize_target(table: &FrameTable, target: &str) -> Result<FrameTable> {
    let j = table.require_column(target)?;
    let col = table.column(j);
    let Some(min) = col.iter().copied().reduce(f64::min) else {
        return Err(Error::DegenerateInput(format!(
            "target '{target}' has no values"
        )));
    };
    let mut out = table.clone();
    out.map_column(j, |v| if v > min { 1.0 } else { 0.0 });
    Ok(out)
}

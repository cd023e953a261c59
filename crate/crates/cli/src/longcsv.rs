//! Long-format tables: one row per `(query, statistic, index)` with the query's
//! feature values repeated on every row.
//!
//! Columns are `query, <features…>, statistic, index, value`.

use std::collections::BTreeMap;
use std::path::Path;

use hetgp_core::io::write_atomic;

use crate::error::{invalid, CliError, CliResult, Classify};

/// One query point and its statistics, keyed by name then index.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub point: Vec<f64>,
    pub stats: BTreeMap<String, Vec<f64>>,
}

impl Block {
    pub fn new(point: Vec<f64>) -> Self {
        Block {
            point,
            stats: BTreeMap::new(),
        }
    }

    pub fn samples(&self) -> &[f64] {
        self.stats.get("sample").map_or(&[], Vec::as_slice)
    }

    pub fn scalar(&self, name: &str) -> Option<f64> {
        self.stats.get(name).and_then(|v| v.first().copied())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub feature_names: Vec<String>,
    pub blocks: Vec<Block>,
}

/// Fixed statistic order on output; anything else follows alphabetically.
fn stat_rank(name: &str) -> (u8, &str) {
    match name {
        "mean" => (0, name),
        "variance" => (1, name),
        "sample" => (2, name),
        _ => (3, name),
    }
}

pub fn to_string(t: &Table) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["query".to_string()];
    header.extend(t.feature_names.iter().cloned());
    header.extend(["statistic", "index", "value"].map(String::from));
    w.write_record(&header).runtime()?;
    for (q, b) in t.blocks.iter().enumerate() {
        let mut names: Vec<&String> = b.stats.keys().collect();
        names.sort_by_key(|n| stat_rank(n));
        for name in names {
            for (i, v) in b.stats[name].iter().enumerate() {
                let mut rec = vec![q.to_string()];
                rec.extend(b.point.iter().map(f64::to_string));
                rec.extend([name.clone(), i.to_string(), v.to_string()]);
                w.write_record(&rec).runtime()?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write(path: &Path, t: &Table) -> CliResult<()> {
    write_atomic(path, to_string(t)?.as_bytes()).runtime()
}

/// Reads a long table. Queries must be numbered `0, 1, …` in order of first
/// appearance and keep the same feature values on every row; indices of one
/// statistic must run `0, 1, …`.
pub fn read(path: &Path) -> CliResult<Table> {
    let bad = |row: usize, msg: String| CliError::Invalid(format!("{}: data row {row}: {msg}", path.display()));
    let mut r = csv::Reader::from_path(path).invalid()?;
    let header: Vec<String> = r.headers().invalid()?.iter().map(|h| h.trim().to_string()).collect();
    let m = header.len();
    if m < 4 || header[0] != "query" || header[m - 3..] != ["statistic", "index", "value"] {
        return invalid(format!(
            "{}: expected columns `query, <features>, statistic, index, value`",
            path.display()
        ));
    }
    let feature_names = header[1..m - 3].to_vec();
    let mut blocks: Vec<Block> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let row = i + 1;
        let rec = rec.invalid()?;
        if rec.len() != m {
            return Err(bad(row, format!("expected {m} fields, found {}", rec.len())));
        }
        let num = |c: usize| -> CliResult<f64> {
            rec[c]
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(row, format!("column `{}`: `{}` is not a finite number", header[c], &rec[c])))
        };
        let query: usize = rec[0].trim().parse().map_err(|_| bad(row, format!("bad query id `{}`", &rec[0])))?;
        let point = (1..m - 3).map(num).collect::<CliResult<Vec<f64>>>()?;
        if query == blocks.len() {
            blocks.push(Block::new(point));
        } else if query + 1 != blocks.len() {
            return Err(bad(row, format!("query {query} out of order")));
        } else if blocks[query].point != point {
            return Err(bad(row, format!("query {query} changes its feature values")));
        }
        let name = rec[m - 3].trim().to_string();
        let index: usize = rec[m - 2].trim().parse().map_err(|_| bad(row, format!("bad index `{}`", &rec[m - 2])))?;
        let value = num(m - 1)?;
        let slot = blocks[query].stats.entry(name.clone()).or_default();
        if index != slot.len() {
            return Err(bad(row, format!("statistic `{name}` index {index} out of order")));
        }
        slot.push(value);
    }
    if blocks.is_empty() {
        return invalid(format!("{}: no rows", path.display()));
    }
    Ok(Table { feature_names, blocks })
}

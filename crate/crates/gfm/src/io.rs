//! Long-format CSV datasets and the tabular outputs of a run.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use gfm_core::series::{impute, Imputation};
use gfm_core::{Dataset, TimeSeries};

/// A dataset plus the optional third CSV column of each series.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    /// Third-column value of each series' first row, in dataset order.
    pub groups: Vec<Option<String>>,
}

pub fn load_dataset(
    path: &Path,
    horizon: usize,
    seasonal_period: usize,
    imputation: Imputation,
) -> Result<LoadedDataset> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_dataset(file, &path.display().to_string(), horizon, seasonal_period, imputation)
}

/// Parses `series_id,value[,extra]`. Series keep their first-appearance order
/// and rows keep file order within a series; empty values are imputed.
pub fn read_dataset<R: Read>(
    reader: R,
    name: &str,
    horizon: usize,
    seasonal_period: usize,
    imputation: Imputation,
) -> Result<LoadedDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().context("reading the CSV header")?.clone();
    if headers.len() < 2 || &headers[0] != "series_id" || &headers[1] != "value" {
        bail!("row 1: expected header `series_id,value`, found `{}`", headers.iter().collect::<Vec<_>>().join(","));
    }
    let mut order: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut raw: Vec<Vec<Option<f64>>> = Vec::new();
    let mut groups: Vec<Option<String>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| anyhow!("row {row}: {e}"))?;
        if rec.len() < 2 {
            bail!("row {row}: expected at least two fields, found {}", rec.len());
        }
        let id = &rec[0];
        if id.is_empty() {
            bail!("row {row}: empty series_id");
        }
        let value = match &rec[1] {
            "" => None,
            cell => {
                let v: f64 = cell
                    .parse()
                    .map_err(|_| anyhow!("row {row}: value `{cell}` is not a number"))?;
                if !v.is_finite() {
                    bail!("row {row}: value `{cell}` is not finite");
                }
                Some(v)
            }
        };
        let slot = *index.entry(id.to_string()).or_insert_with(|| {
            order.push(id.to_string());
            raw.push(Vec::new());
            groups.push(rec.get(2).map(str::to_string));
            order.len() - 1
        });
        raw[slot].push(value);
    }
    let series = order
        .into_iter()
        .zip(&raw)
        .map(|(id, vals)| TimeSeries::new(id, impute(vals, imputation), seasonal_period))
        .collect::<gfm_core::Result<Vec<_>>>()?;
    let dataset = Dataset::new(name, horizon, series)?;
    Ok(LoadedDataset { dataset, groups })
}

/// Writes `series_id,value[,group]`; values use the shortest representation
/// that reads back to the same bits.
pub fn write_dataset(path: &Path, ds: &Dataset, groups: Option<&[String]>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    match groups {
        Some(_) => w.write_record(["series_id", "value", "group"])?,
        None => w.write_record(["series_id", "value"])?,
    }
    for (i, s) in ds.series().iter().enumerate() {
        for v in &s.values {
            let value = v.to_string();
            match groups {
                Some(g) => w.write_record([s.id.as_str(), &value, &g[i]])?,
                None => w.write_record([s.id.as_str(), &value])?,
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

pub fn horizon_header(prefix: &[&str], horizon: usize) -> Vec<String> {
    prefix
        .iter()
        .map(|s| s.to_string())
        .chain((1..=horizon).map(|h| format!("h{h}")))
        .collect()
}

/// Forecast rows read back from `final_forecasts.csv` or `forecasts.csv`.
/// Per-iteration files are averaged per series and model.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastTable {
    /// `(model_tag, series_id, forecast)` in first-appearance order.
    pub rows: Vec<(String, String, Vec<f64>)>,
}

pub fn read_forecasts(path: &Path) -> Result<ForecastTable> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    let per_iteration = headers.get(2) == Some("iteration");
    let first_h = if per_iteration { 3 } else { 2 };
    if headers.get(0) != Some("series_id") || headers.get(1) != Some("model_tag") || headers.len() <= first_h {
        bail!("row 1: expected `series_id,model_tag,[iteration,]h1..hH`");
    }
    let mut sums: Vec<(String, String, Vec<f64>, usize)> = Vec::new();
    let mut index: HashMap<(String, String), usize> = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| anyhow!("row {row}: {e}"))?;
        let values = (first_h..rec.len())
            .map(|j| rec[j].parse::<f64>().map_err(|_| anyhow!("row {row}: `{}` is not a number", &rec[j])))
            .collect::<Result<Vec<f64>>>()?;
        let key = (rec[1].to_string(), rec[0].to_string());
        let slot = *index.entry(key.clone()).or_insert_with(|| {
            sums.push((key.0, key.1, vec![0.0; values.len()], 0));
            sums.len() - 1
        });
        let entry = &mut sums[slot];
        if entry.2.len() != values.len() {
            bail!("row {row}: horizon differs from earlier rows");
        }
        for (s, v) in entry.2.iter_mut().zip(&values) {
            *s += v;
        }
        entry.3 += 1;
    }
    Ok(ForecastTable {
        rows: sums
            .into_iter()
            .map(|(m, s, sum, n)| (m, s, sum.into_iter().map(|v| v / n as f64).collect()))
            .collect(),
    })
}

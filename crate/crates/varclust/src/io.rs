//! File formats: the dataset CSV, the ground-truth sidecar JSON,
//! clustering result JSON, the BIC grid CSV and the benchmark CSV.
//!
//! Dataset CSV contract: header `series_id,t,y1,…,ym`, rows sorted by
//! (series_id, t), t 1-based and consecutive within each series. The
//! loader rejects files violating any of these and validates equal T and
//! m across series.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::datagen::{DatasetSpec, GeneratedDataset};
use crate::error::{Error, Result};
use crate::metrics::NmiOutcome;
use crate::modelsel::BicGrid;
use crate::types::{ComponentFlags, TimeSeries, TimeSeriesSet, VarComponent};

/// Versioned first line of every benchmark CSV.
pub const BENCH_HEADER_COMMENT: &str = "# varclust-bench v1";
const BENCH_COLUMNS: &str = "suite,algo,m,p,T,K,Nc,seed,ri,nmi,seconds,failed";

pub fn write_dataset_csv(path: &Path, data: &TimeSeriesSet) -> Result<()> {
    let mut order: Vec<usize> = (0..data.n_series()).collect();
    order.sort_by(|&a, &b| data.series()[a].id().cmp(data.series()[b].id()));

    let mut w = csv::Writer::from_path(path)?;
    let m = data.dim();
    let mut header = vec!["series_id".to_string(), "t".to_string()];
    header.extend((1..=m).map(|j| format!("y{j}")));
    w.write_record(&header)?;
    for &i in &order {
        let s = &data.series()[i];
        for t in 0..s.len() {
            let mut rec = vec![s.id().to_string(), (t + 1).to_string()];
            rec.extend((0..m).map(|j| s.values()[(t, j)].to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset_csv(path: &Path) -> Result<TimeSeriesSet> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    if headers.len() < 3 || &headers[0] != "series_id" || &headers[1] != "t" {
        return Err(Error::Format(
            "expected header series_id,t,y1,…".into(),
        ));
    }
    let m = headers.len() - 2;
    for (j, name) in headers.iter().skip(2).enumerate() {
        if name != format!("y{}", j + 1) {
            return Err(Error::Format(format!(
                "column {} named `{name}`, expected `y{}`",
                j + 3,
                j + 1
            )));
        }
    }

    let mut series: Vec<(String, Vec<Vec<f64>>)> = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != m + 2 {
            return Err(Error::Format(format!(
                "row {}: {} fields, expected {}",
                line + 2,
                rec.len(),
                m + 2
            )));
        }
        let id = rec[0].to_string();
        let t: usize = rec[1]
            .parse()
            .map_err(|_| Error::Format(format!("row {}: bad t `{}`", line + 2, &rec[1])))?;
        let vals: Vec<f64> = rec
            .iter()
            .skip(2)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::Format(format!("row {}: bad value `{v}`", line + 2)))
            })
            .collect::<Result<_>>()?;
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format(format!("row {}: non-finite value", line + 2)));
        }

        match series.last_mut() {
            Some((last_id, rows)) if *last_id == id => {
                if t != rows.len() + 1 {
                    return Err(Error::Format(format!(
                        "series `{id}`: t={t} out of order (expected {})",
                        rows.len() + 1
                    )));
                }
                rows.push(vals);
            }
            _ => {
                if series.iter().any(|(prev, _)| *prev == id)
                    || series.last().map(|(prev, _)| id < *prev).unwrap_or(false)
                {
                    return Err(Error::Format(format!(
                        "rows not sorted by (series_id, t) at series `{id}`"
                    )));
                }
                if t != 1 {
                    return Err(Error::Format(format!(
                        "series `{id}` must start at t=1, found t={t}"
                    )));
                }
                series.push((id, vec![vals]));
            }
        }
    }

    let built: Result<Vec<TimeSeries>> = series
        .into_iter()
        .map(|(id, rows)| {
            let t_len = rows.len();
            TimeSeries::new(
                id,
                DMatrix::from_fn(t_len, m, |i, j| rows[i][j]),
            )
        })
        .collect();
    TimeSeriesSet::new(built?)
}

/// Row-major serialization of one model component.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentDto {
    pub intercept: Vec<f64>,
    pub lag_matrices: Vec<Vec<Vec<f64>>>,
    pub covariance: Vec<Vec<f64>>,
    pub order: usize,
}

impl From<&VarComponent> for ComponentDto {
    fn from(c: &VarComponent) -> Self {
        Self {
            intercept: c.intercept().iter().copied().collect(),
            lag_matrices: c.lag_matrices().iter().map(matrix_rows).collect(),
            covariance: matrix_rows(c.covariance()),
            order: c.order(),
        }
    }
}

impl ComponentDto {
    pub fn to_component(&self) -> Result<VarComponent> {
        let intercept = DVector::from_vec(self.intercept.clone());
        let lags: Result<Vec<DMatrix<f64>>> = self
            .lag_matrices
            .iter()
            .map(|rows| rows_to_matrix(rows))
            .collect();
        VarComponent::new(intercept, lags?, rows_to_matrix(&self.covariance)?)
    }
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let r = rows.len();
    if r == 0 {
        return Err(Error::Format("empty matrix".into()));
    }
    let c = rows[0].len();
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::Format("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabeledSeries {
    pub series_id: String,
    /// 1-based cluster label.
    pub label: usize,
}

/// Ground-truth sidecar written next to a generated dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthFile {
    pub spec: DatasetSpec,
    pub seed: u64,
    pub labels: Vec<LabeledSeries>,
    pub models: Vec<ComponentDto>,
}

pub fn write_truth_json(path: &Path, gen: &GeneratedDataset) -> Result<()> {
    let truth = TruthFile {
        spec: gen.spec.clone(),
        seed: gen.spec.seed,
        labels: gen
            .data
            .series()
            .iter()
            .zip(&gen.truth)
            .map(|(s, &l)| LabeledSeries {
                series_id: s.id().to_string(),
                label: l + 1,
            })
            .collect(),
        models: gen.models.iter().map(ComponentDto::from).collect(),
    };
    write_json(path, &truth)
}

pub fn read_truth_json(path: &Path) -> Result<TruthFile> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Clustering result file shared by all algorithms; algorithm-specific
/// fields stay `None` where they do not apply.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultFile {
    pub algorithm: String,
    pub k: usize,
    pub orders: Vec<usize>,
    pub p_max: usize,
    pub seed: u64,
    pub converged: bool,
    pub iterations: usize,
    pub labels: Vec<LabeledSeries>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<ComponentDto>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalized_covariances: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_likelihood: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_likelihood_trace: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective_trace: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cluster_sizes: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub underflow_events: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub underflow_dominated: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degenerate_init: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flags: Option<Vec<FlagsDto>>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FlagsDto {
    pub ridged: bool,
    pub frozen: bool,
    pub reseeded: bool,
    pub singular_covariance: bool,
}

impl From<&ComponentFlags> for FlagsDto {
    fn from(f: &ComponentFlags) -> Self {
        Self {
            ridged: f.ridged,
            frozen: f.frozen,
            reseeded: f.reseeded,
            singular_covariance: f.singular_covariance,
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_result_json(path: &Path) -> Result<ResultFile> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// `series_id,label` with 1-based labels.
pub fn write_labels_csv(path: &Path, ids: &[&str], labels_zero_based: &[usize]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["series_id", "label"])?;
    for (id, &l) in ids.iter().zip(labels_zero_based) {
        w.write_record([id.to_string(), (l + 1).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_labels_csv(path: &Path) -> Result<Vec<LabeledSeries>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "series_id" || &headers[1] != "label" {
        return Err(Error::Format("expected header series_id,label".into()));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let label: usize = rec[1]
            .parse()
            .map_err(|_| Error::Format(format!("bad label `{}`", &rec[1])))?;
        if label == 0 {
            return Err(Error::Format("labels are 1-based".into()));
        }
        out.push(LabeledSeries {
            series_id: rec[0].to_string(),
            label,
        });
    }
    if out.is_empty() {
        return Err(Error::Format("label file has no rows".into()));
    }
    Ok(out)
}

/// Reads labels from either a labels CSV or a truth sidecar JSON.
pub fn read_labels_any(path: &Path) -> Result<Vec<LabeledSeries>> {
    if path.extension().map(|e| e == "json").unwrap_or(false) {
        Ok(read_truth_json(path)?.labels)
    } else {
        read_labels_csv(path)
    }
}

/// Joins two label files on series id; errors when the id sets differ.
pub fn align_labels(
    truth: &[LabeledSeries],
    pred: &[LabeledSeries],
) -> Result<(Vec<usize>, Vec<usize>)> {
    let map: BTreeMap<&str, usize> = truth
        .iter()
        .map(|l| (l.series_id.as_str(), l.label))
        .collect();
    if map.len() != truth.len() {
        return Err(Error::Format("duplicate series id in truth labels".into()));
    }
    if truth.len() != pred.len() {
        return Err(Error::Format(format!(
            "label sets have {} and {} entries",
            truth.len(),
            pred.len()
        )));
    }
    let mut t = Vec::with_capacity(pred.len());
    let mut p = Vec::with_capacity(pred.len());
    for l in pred {
        match map.get(l.series_id.as_str()) {
            Some(&tl) => {
                t.push(tl);
                p.push(l.label);
            }
            None => {
                return Err(Error::Format(format!(
                    "series `{}` missing from truth labels",
                    l.series_id
                )))
            }
        }
    }
    Ok((t, p))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsFile {
    pub n: usize,
    pub rand_index: f64,
    pub nmi: f64,
    pub nmi_degenerate: bool,
}

impl MetricsFile {
    pub fn new(n: usize, ri: f64, nmi: NmiOutcome) -> Self {
        Self {
            n,
            rand_index: ri,
            nmi: nmi.value,
            nmi_degenerate: nmi.degenerate,
        }
    }
}

/// `K,p,gamma,score,converged,seed`, one row per grid cell.
pub fn write_grid_csv(path: &Path, grid: &BicGrid) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["K", "p", "gamma", "score", "converged", "seed"])?;
    for cell in grid.cells() {
        w.write_record([
            cell.k.to_string(),
            cell.p.to_string(),
            grid.gamma.to_string(),
            cell.score.to_string(),
            (cell.converged as u8).to_string(),
            grid.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One benchmark measurement in the long-format CSV.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub suite: String,
    pub algo: String,
    pub m: usize,
    pub p: usize,
    pub t_len: usize,
    pub k: usize,
    pub n_per_cluster: usize,
    pub seed: u64,
    /// Empty on failed runs.
    pub ri: Option<f64>,
    pub nmi: Option<f64>,
    pub seconds: f64,
    pub failed: bool,
}

/// Appends rows to a benchmark CSV, writing the version comment and
/// header only when the file is new or empty.
pub fn append_benchmark_rows(path: &Path, rows: &[BenchRow]) -> Result<()> {
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    if fresh {
        writeln!(file, "{BENCH_HEADER_COMMENT}")?;
        writeln!(file, "{BENCH_COLUMNS}")?;
    }
    for r in rows {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        writeln!(
            file,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.suite,
            r.algo,
            r.m,
            r.p,
            r.t_len,
            r.k,
            r.n_per_cluster,
            r.seed,
            opt(r.ri),
            opt(r.nmi),
            r.seconds,
            r.failed as u8
        )?;
    }
    Ok(())
}

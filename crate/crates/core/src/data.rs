//! Datasets: CSV ingestion, deterministic splitting, standardization and a
//! Gaussian synthetic generator.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::rng::{self, stream};
use crate::{Error, Result};

/// Feature matrix plus integer labels and sensitive attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    sensitive: Vec<usize>,
    label_count: usize,
    sensitive_count: usize,
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        labels: Vec<usize>,
        sensitive: Vec<usize>,
        label_count: usize,
        sensitive_count: usize,
    ) -> Result<Self> {
        let n = features.nrows();
        if n == 0 {
            return Err(Error::data("dataset is empty"));
        }
        if labels.len() != n || sensitive.len() != n {
            return Err(Error::data(format!(
                "length mismatch: {} feature rows, {} labels, {} sensitive values",
                n,
                labels.len(),
                sensitive.len()
            )));
        }
        if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= label_count) {
            return Err(Error::data(format!(
                "label {y} at row {i} is out of range (label_count {label_count})"
            )));
        }
        if let Some((i, &s)) = sensitive
            .iter()
            .enumerate()
            .find(|(_, &s)| s >= sensitive_count)
        {
            return Err(Error::data(format!(
                "sensitive value {s} at row {i} is out of range (sensitive_count {sensitive_count})"
            )));
        }
        if let Some(((i, j), v)) = features.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::data(format!(
                "non-finite feature value {v} at row {i}, column {j}"
            )));
        }
        Ok(Dataset {
            features,
            labels,
            sensitive,
            label_count,
            sensitive_count,
        })
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sensitive(&self) -> &[usize] {
        &self.sensitive
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    pub fn sensitive_count(&self) -> usize {
        self.sensitive_count
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Rows `idx`, in that order. Label and sensitive counts carry over.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            sensitive: idx.iter().map(|&i| self.sensitive[i]).collect(),
            label_count: self.label_count,
            sensitive_count: self.sensitive_count,
        }
    }

    /// Number of examples in each (label, sensitive) cell, row-major.
    pub fn cell_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.label_count * self.sensitive_count];
        for (&y, &s) in self.labels.iter().zip(&self.sensitive) {
            counts[y * self.sensitive_count + s] += 1;
        }
        counts
    }

    fn with_features(&self, features: Array2<f64>) -> Dataset {
        Dataset {
            features,
            ..self.clone()
        }
    }
}

/// A dataset read from CSV together with the dense codes assigned to the
/// label and sensitive columns (index = code).
#[derive(Debug, Clone)]
pub struct CsvData {
    pub dataset: Dataset,
    pub feature_names: Vec<String>,
    pub label_codes: Vec<String>,
    pub sensitive_codes: Vec<String>,
}

pub fn load_csv(path: &Path, label_column: &str, sensitive_column: &str) -> Result<CsvData> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, path, label_column, sensitive_column)
}

/// Parses CSV from any reader; `source` is only used in error messages.
///
/// Label and sensitive values are treated as categories and coded in order
/// of first appearance. Every other column must hold finite numbers.
pub fn read_csv<R: Read>(
    reader: R,
    source: &Path,
    label_column: &str,
    sensitive_column: &str,
) -> Result<CsvData> {
    let parse_err = |message: String| Error::Parse {
        path: source.to_path_buf(),
        message,
    };
    if label_column == sensitive_column {
        return Err(parse_err(format!(
            "label and sensitive column are both '{label_column}'"
        )));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| parse_err(e.to_string()))?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Err(parse_err("empty file (no header row)".into()));
    }
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| parse_err(format!("missing column '{name}'")))
    };
    let label_idx = find(label_column)?;
    let sens_idx = find(sensitive_column)?;
    let feature_cols: Vec<usize> = (0..headers.len())
        .filter(|&j| j != label_idx && j != sens_idx)
        .collect();
    let feature_names: Vec<String> = feature_cols
        .iter()
        .map(|&j| headers[j].trim().to_string())
        .collect();

    let mut label_coder = Coder::default();
    let mut sens_coder = Coder::default();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut sensitive = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| parse_err(format!("row {}: {e}", row + 1)))?;
        for &j in &feature_cols {
            let cell = record.get(j).unwrap_or("").trim();
            let v: f64 = cell.parse().map_err(|_| {
                parse_err(format!(
                    "row {}, column '{}': non-numeric value '{cell}'",
                    row + 1,
                    headers[j].trim()
                ))
            })?;
            if !v.is_finite() {
                return Err(parse_err(format!(
                    "row {}, column '{}': non-finite value '{cell}'",
                    row + 1,
                    headers[j].trim()
                )));
            }
            values.push(v);
        }
        labels.push(label_coder.code(record.get(label_idx).unwrap_or("").trim()));
        sensitive.push(sens_coder.code(record.get(sens_idx).unwrap_or("").trim()));
    }
    if labels.is_empty() {
        return Err(parse_err("no data rows".into()));
    }
    let n = labels.len();
    let features = Array2::from_shape_vec((n, feature_cols.len()), values)
        .map_err(|e| parse_err(e.to_string()))?;
    let dataset = Dataset::new(
        features,
        labels,
        sensitive,
        label_coder.names.len(),
        sens_coder.names.len(),
    )?;
    Ok(CsvData {
        dataset,
        feature_names,
        label_codes: label_coder.names,
        sensitive_codes: sens_coder.names,
    })
}

#[derive(Default)]
struct Coder {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Coder {
    fn code(&mut self, value: &str) -> usize {
        if let Some(&c) = self.index.get(value) {
            return c;
        }
        let c = self.names.len();
        self.names.push(value.to_string());
        self.index.insert(value.to_string(), c);
        c
    }
}

/// Writes `ds` as CSV with header `f0..f{d-1},y,s` and integer codes.
pub fn write_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    let to_io = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    let mut header: Vec<String> = (0..ds.dim()).map(|j| format!("f{j}")).collect();
    header.push("y".into());
    header.push("s".into());
    w.write_record(&header).map_err(to_io)?;
    for (i, row) in ds.features.outer_iter().enumerate() {
        let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        rec.push(ds.labels[i].to_string());
        rec.push(ds.sensitive[i].to_string());
        w.write_record(&rec).map_err(to_io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Deterministic train / validation / test split.
///
/// A seeded permutation is drawn; the first `round(0.2 n)` indices become the
/// test set, the next `round(0.25 · remainder)` the validation set, and the
/// rest the training set.
pub fn split(ds: &Dataset, seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    let n = ds.len();
    if n < 8 {
        return Err(Error::data(format!(
            "cannot split {n} examples into train/val/test (need at least 8)"
        )));
    }
    let perm = rng::permutation(n, &mut rng::stream_rng(seed, stream::SPLIT));
    let n_test = (n as f64 * 0.2).round() as usize;
    let n_val = ((n - n_test) as f64 * 0.25).round() as usize;
    let test = ds.subset(&perm[..n_test]);
    let val = ds.subset(&perm[n_test..n_test + n_val]);
    let train = ds.subset(&perm[n_test + n_val..]);
    Ok((train, val, test))
}

/// Train / validation split (25% validation) for data that comes with its
/// own test set.
pub fn split_train_val(ds: &Dataset, seed: u64) -> Result<(Dataset, Dataset)> {
    let n = ds.len();
    if n < 4 {
        return Err(Error::data(format!(
            "cannot split {n} examples into train/val (need at least 4)"
        )));
    }
    let perm = rng::permutation(n, &mut rng::stream_rng(seed, stream::SPLIT));
    let n_val = (n as f64 * 0.25).round() as usize;
    Ok((ds.subset(&perm[n_val..]), ds.subset(&perm[..n_val])))
}

/// Per-column mean and population standard deviation of a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizeStats {
    pub means: Vec<f64>,
    pub stddevs: Vec<f64>,
}

impl StandardizeStats {
    /// Columns whose standard deviation is below `1e-12 · max(1, |mean|)`
    /// count as constant and get stddev 1.
    pub fn fit(train: &Dataset) -> StandardizeStats {
        let x = &train.features;
        let n = x.nrows() as f64;
        let means: Array1<f64> = x.sum_axis(Axis(0)) / n;
        let stddevs = x
            .axis_iter(Axis(1))
            .zip(means.iter())
            .map(|(col, &m)| {
                let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
                let sd = var.sqrt();
                if sd <= 1e-12 * m.abs().max(1.0) {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        StandardizeStats {
            means: means.to_vec(),
            stddevs,
        }
    }

    pub fn apply(&self, ds: &Dataset) -> Dataset {
        let mut x = ds.features.clone();
        for (mut col, (m, sd)) in x
            .axis_iter_mut(Axis(1))
            .zip(self.means.iter().zip(&self.stddevs))
        {
            col.mapv_inplace(|v| (v - m) / sd);
        }
        ds.with_features(x)
    }
}

/// Standardizes `train` and transforms `others` with the training statistics.
pub fn standardize(
    train: &Dataset,
    others: &[&Dataset],
) -> (Dataset, Vec<Dataset>, StandardizeStats) {
    let stats = StandardizeStats::fit(train);
    let train = stats.apply(train);
    let others = others.iter().map(|d| stats.apply(d)).collect();
    (train, others, stats)
}

/// One Gaussian cell of a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCell {
    pub label: usize,
    pub sensitive: usize,
    pub mean: Vec<f64>,
    pub count: usize,
}

/// Isotropic Gaussian cells sharing one standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub cells: Vec<SyntheticCell>,
    pub std: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.cells.first() else {
            return Err(Error::data("synthetic spec has no cells"));
        };
        let d = first.mean.len();
        if d == 0 {
            return Err(Error::data(
                "synthetic means must have at least one dimension",
            ));
        }
        if !(self.std.is_finite() && self.std > 0.0) {
            return Err(Error::data(format!(
                "synthetic std must be finite and positive, got {}",
                self.std
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for c in &self.cells {
            if c.mean.len() != d {
                return Err(Error::data(format!(
                    "cell (y={}, s={}) has mean of dimension {}, expected {d}",
                    c.label,
                    c.sensitive,
                    c.mean.len()
                )));
            }
            if c.mean.iter().any(|v| !v.is_finite()) {
                return Err(Error::data(format!(
                    "cell (y={}, s={}) has a non-finite mean",
                    c.label, c.sensitive
                )));
            }
            if !seen.insert((c.label, c.sensitive)) {
                return Err(Error::data(format!(
                    "duplicate cell (y={}, s={})",
                    c.label, c.sensitive
                )));
            }
        }
        let nonzero = self.cells.iter().filter(|c| c.count > 0).count();
        if nonzero < 2 {
            return Err(Error::data(
                "synthetic spec needs at least two cells with a nonzero count",
            ));
        }
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.cells.iter().map(|c| c.count).sum()
    }
}

/// Draws exactly `count` samples per cell, cells in listed order.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let d = spec.cells[0].mean.len();
    let n = spec.total();
    let mut rng = rng::stream_rng(spec.seed, stream::SYNTHETIC);
    let mut x = Array2::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    let mut sensitive = Vec::with_capacity(n);
    let mut row = 0;
    for cell in &spec.cells {
        for _ in 0..cell.count {
            for (j, m) in cell.mean.iter().enumerate() {
                let z: f64 = StandardNormal.sample(&mut rng);
                x[(row, j)] = m + spec.std * z;
            }
            labels.push(cell.label);
            sensitive.push(cell.sensitive);
            row += 1;
        }
    }
    let label_count = spec.cells.iter().map(|c| c.label).max().unwrap_or(0) + 1;
    let sensitive_count = spec.cells.iter().map(|c| c.sensitive).max().unwrap_or(0) + 1;
    Dataset::new(x, labels, sensitive, label_count, sensitive_count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn parse(text: &str) -> Result<CsvData> {
        read_csv(text.as_bytes(), Path::new("mem.csv"), "y", "s")
    }

    fn toy(n: usize) -> Dataset {
        let x = Array2::from_shape_fn((n, 2), |(i, j)| (i * 2 + j) as f64);
        Dataset::new(x, vec![0; n], (0..n).map(|i| i % 2).collect(), 2, 2).unwrap()
    }

    #[test]
    fn csv_basic_shape() {
        let d = parse("f1,f2,y,s\n1,2,0,a\n3,4,1,b\n5,6,0,a\n").unwrap();
        assert_eq!(d.dataset.len(), 3);
        assert_eq!(d.dataset.dim(), 2);
        assert_eq!(d.feature_names, vec!["f1", "f2"]);
    }

    #[test]
    fn csv_first_appearance_codes() {
        let d = parse("f1,y,s\n1,yes,A\n2,no,B\n3,yes,A\n").unwrap();
        assert_eq!(d.dataset.sensitive(), &[0, 1, 0]);
        assert_eq!(d.dataset.sensitive_count(), 2);
        assert_eq!(d.dataset.labels(), &[0, 1, 0]);
        assert_eq!(d.label_codes, vec!["yes", "no"]);
    }

    #[test]
    fn csv_rejects_nan_with_location() {
        let err = parse("f1,f2,y,s\n1,2,0,0\n3,NaN,1,1\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 2") && msg.contains("'f2'"), "{msg}");
    }

    #[test]
    fn csv_rejects_non_numeric_and_missing_column() {
        let msg = parse("f1,y,s\nabc,0,0\n").unwrap_err().to_string();
        assert!(msg.contains("row 1") && msg.contains("'f1'"), "{msg}");
        let msg = parse("f1,y,group\n1,0,0\n").unwrap_err().to_string();
        assert!(msg.contains("missing column 's'"), "{msg}");
    }

    #[test]
    fn csv_rejects_empty() {
        assert!(parse("").is_err());
        assert!(parse("f1,y,s\n").is_err());
    }

    #[test]
    fn split_sizes_and_coverage() {
        let ds = toy(100);
        let (tr, va, te) = split(&ds, 3).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (60, 20, 20));
        let mut all: Vec<f64> = [&tr, &va, &te]
            .iter()
            .flat_map(|d| d.features().column(0).to_vec())
            .collect();
        all.sort_by(f64::total_cmp);
        let expected: Vec<f64> = (0..100).map(|i| (2 * i) as f64).collect();
        assert_eq!(all, expected);
    }

    #[test]
    fn split_is_deterministic_and_seed_dependent() {
        let ds = toy(100);
        let a = split(&ds, 11).unwrap();
        let b = split(&ds, 11).unwrap();
        assert_eq!(a, b);
        let c = split(&ds, 12).unwrap();
        assert_ne!(a.2.features(), c.2.features());
    }

    #[test]
    fn split_rejects_tiny() {
        assert!(split(&toy(7), 0).is_err());
        let (tr, va, te) = split(&toy(8), 0).unwrap();
        assert!(!tr.is_empty() && !va.is_empty() && !te.is_empty());
    }

    #[test]
    fn standardize_hand_values() {
        let x = array![[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]];
        let ds = Dataset::new(x, vec![0, 1, 0], vec![0, 0, 1], 2, 2).unwrap();
        let (tr, _, stats) = standardize(&ds, &[]);
        assert!((stats.means[0] - 2.0).abs() < 1e-15);
        assert!((stats.stddevs[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(stats.stddevs[1], 1.0);
        let col: Vec<f64> = tr.features().column(0).to_vec();
        let expect = [-1.224744871391589, 0.0, 1.224744871391589];
        for (a, b) in col.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(tr.features().column(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn standardize_uses_train_stats_for_others() {
        let train = Dataset::new(array![[0.0], [2.0]], vec![0, 1], vec![0, 1], 2, 2).unwrap();
        let test = Dataset::new(array![[10.0], [12.0]], vec![0, 1], vec![0, 1], 2, 2).unwrap();
        let (_, others, _) = standardize(&train, &[&test]);
        assert_eq!(others[0].features().column(0).to_vec(), vec![9.0, 11.0]);
    }

    #[test]
    fn synthetic_exact_cell_counts() {
        let cell = |label, sensitive, count| SyntheticCell {
            label,
            sensitive,
            mean: vec![label as f64, sensitive as f64],
            count,
        };
        let spec = SyntheticSpec {
            cells: vec![
                cell(1, 0, 4000),
                cell(0, 0, 1000),
                cell(1, 1, 1000),
                cell(0, 1, 4000),
            ],
            std: 1.0,
            seed: 5,
        };
        let ds = gen_synthetic(&spec).unwrap();
        assert_eq!(ds.len(), 10_000);
        let counts = ds.cell_counts();
        // row-major (y, s): (0,0) (0,1) (1,0) (1,1)
        assert_eq!(counts, vec![1000, 4000, 4000, 1000]);
        assert_eq!(gen_synthetic(&spec).unwrap(), ds);
    }

    #[test]
    fn synthetic_single_label_is_valid_data() {
        let spec = SyntheticSpec {
            cells: vec![
                SyntheticCell {
                    label: 0,
                    sensitive: 0,
                    mean: vec![0.0],
                    count: 5,
                },
                SyntheticCell {
                    label: 0,
                    sensitive: 1,
                    mean: vec![1.0],
                    count: 5,
                },
            ],
            std: 1.0,
            seed: 0,
        };
        let ds = gen_synthetic(&spec).unwrap();
        assert_eq!(ds.label_count(), 1);
    }

    #[test]
    fn synthetic_rejects_bad_specs() {
        let one = SyntheticSpec {
            cells: vec![SyntheticCell {
                label: 0,
                sensitive: 0,
                mean: vec![0.0],
                count: 5,
            }],
            std: 1.0,
            seed: 0,
        };
        assert!(gen_synthetic(&one).is_err());
        let mut bad_std = one.clone();
        bad_std.cells.push(SyntheticCell {
            label: 1,
            sensitive: 0,
            mean: vec![0.0],
            count: 5,
        });
        bad_std.std = 0.0;
        assert!(gen_synthetic(&bad_std).is_err());
    }
}

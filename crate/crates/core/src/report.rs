//! Evaluation summaries and output files.
//!
//! JSON report (`report.json`), keys in this order:
//!
//! ```text
//! notion        {"kind": ..., "desirable_labels": [...]}
//! groups        [{"key": {...}, "count": n}, ...]   canonical group order
//! accuracy      real
//! fairness      [F_1, ..., F_K]
//! mean_abs      (1/K) Σ |F_k|
//! max_f         signed maximum of F (most advantaged group)
//! min_f         signed minimum of F (most disadvantaged group)
//! ```
//!
//! History CSV (`history.csv`), one row per epoch:
//! `epoch,val_accuracy,mean_abs_fairness,max_f,min_f,lambda_<g>...,w_<g>...`
//! where `<g>` is `s0`, `s1`, ... for accuracy parity and `y0_s0`, `y0_s1`,
//! ... otherwise. The `lambda_` columns hold the multiplier that enters the
//! weights, i.e. `λ − δ` in ε mode.
//!
//! Sweep files: `runs.csv` has one row per training run, `aggregate.csv`
//! one row per setting with population standard deviations.
//!
//! All reals are written with 17 significant digits.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::fairness::{assign_groups, direct_fairness, partition, FairnessNotion, GroupKey};
use crate::model::{self, ModelSpec, Parameters};
use crate::numfmt::{self, real};
use crate::trainer::{accuracy, mean_abs, TrainHistory};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCount {
    pub key: GroupKey,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub notion: FairnessNotion,
    pub groups: Vec<GroupCount>,
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub accuracy: f64,
    #[serde(serialize_with = "numfmt::ser_vec")]
    pub fairness: Vec<f64>,
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub mean_abs: f64,
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub max_f: f64,
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub min_f: f64,
}

impl FairnessReport {
    /// Builds a report from predictions on `ds`.
    pub fn from_predictions(
        predictions: &[usize],
        ds: &Dataset,
        notion: &FairnessNotion,
    ) -> Result<Self> {
        let p = partition(ds, notion)?;
        let fairness = direct_fairness(
            predictions,
            ds.labels(),
            ds.sensitive(),
            notion,
            ds.label_count(),
            ds.sensitive_count(),
        )?;
        let mut counts = vec![0usize; p.k()];
        for g in assign_groups(ds, notion) {
            counts[g] += 1;
        }
        let groups = p
            .keys
            .iter()
            .zip(counts)
            .map(|(&key, count)| GroupCount { key, count })
            .collect();
        Ok(FairnessReport {
            notion: notion.clone(),
            groups,
            accuracy: accuracy(predictions, ds.labels()),
            mean_abs: mean_abs(&fairness),
            max_f: fairness.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            min_f: fairness.iter().copied().fold(f64::INFINITY, f64::min),
            fairness,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map(|mut s| {
                s.push('\n');
                s
            })
            .map_err(|e| Error::Config(format!("cannot serialize report: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::data(format!("bad report JSON: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// Accuracy and exact fairness of a model on `ds`. Every group of the
/// notion must have examples.
pub fn evaluate(
    params: &Parameters,
    spec: &ModelSpec,
    ds: &Dataset,
    notion: &FairnessNotion,
) -> Result<FairnessReport> {
    if ds.is_empty() {
        return Err(Error::data("cannot evaluate on an empty dataset"));
    }
    let (_, predictions) = model::predict(params, spec, ds.features().view());
    FairnessReport::from_predictions(&predictions, ds, notion)
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()
    };
    write().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Column suffix for a group: `s1` or `y0_s1`.
pub fn group_slug(key: &GroupKey) -> String {
    match key {
        GroupKey::Sensitive(s) => format!("s{s}"),
        GroupKey::LabelSensitive(y, s) => format!("y{y}_s{s}"),
    }
}

pub fn history_header(keys: &[GroupKey]) -> Vec<String> {
    let mut h: Vec<String> = [
        "epoch",
        "val_accuracy",
        "mean_abs_fairness",
        "max_f",
        "min_f",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend(keys.iter().map(|k| format!("lambda_{}", group_slug(k))));
    h.extend(keys.iter().map(|k| format!("w_{}", group_slug(k))));
    h
}

/// One parsed row of a history CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow {
    pub epoch: usize,
    pub val_accuracy: f64,
    pub mean_abs_fairness: f64,
    pub max_f: f64,
    pub min_f: f64,
    pub lambda: Vec<f64>,
    pub weights: Vec<f64>,
}

pub fn history_rows(history: &TrainHistory) -> Vec<HistoryRow> {
    history
        .records
        .iter()
        .map(|r| HistoryRow {
            epoch: r.epoch,
            val_accuracy: r.val_accuracy,
            mean_abs_fairness: r.val_mean_abs,
            max_f: r
                .val_fairness
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max),
            min_f: r.val_fairness.iter().copied().fold(f64::INFINITY, f64::min),
            lambda: r.lambda.iter().zip(&r.delta).map(|(l, d)| l - d).collect(),
            weights: r.weights.clone(),
        })
        .collect()
}

pub fn history_to_csv(history: &TrainHistory) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Config(format!("cannot format history CSV: {e}"));
    w.write_record(history_header(&history.group_keys))
        .map_err(csv_err)?;
    for row in history_rows(history) {
        let mut rec = vec![
            row.epoch.to_string(),
            real(row.val_accuracy),
            real(row.mean_abs_fairness),
            real(row.max_f),
            real(row.min_f),
        ];
        rec.extend(row.lambda.iter().map(|&x| real(x)));
        rec.extend(row.weights.iter().map(|&x| real(x)));
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Config(format!("cannot format history CSV: {e}")))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

pub fn save_history(history: &TrainHistory, path: &Path) -> Result<()> {
    write_atomic(path, history_to_csv(history)?.as_bytes())
}

/// Parses a history CSV back into its header and rows.
pub fn parse_history_csv(text: &str) -> Result<(Vec<String>, Vec<HistoryRow>)> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r
        .headers()
        .map_err(|e| Error::data(format!("history CSV: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.len() < 5 || !(header.len() - 5).is_multiple_of(2) {
        return Err(Error::data("history CSV: unexpected column count"));
    }
    let k = (header.len() - 5) / 2;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::data(format!("history CSV row {}: {e}", i + 1)))?;
        let num = |j: usize| -> Result<f64> {
            rec[j].parse().map_err(|_| {
                Error::data(format!("history CSV row {}, column '{}'", i + 1, header[j]))
            })
        };
        let epoch = rec[0]
            .parse()
            .map_err(|_| Error::data(format!("history CSV row {}, column 'epoch'", i + 1)))?;
        rows.push(HistoryRow {
            epoch,
            val_accuracy: num(1)?,
            mean_abs_fairness: num(2)?,
            max_f: num(3)?,
            min_f: num(4)?,
            lambda: (5..5 + k).map(num).collect::<Result<_>>()?,
            weights: (5 + k..5 + 2 * k).map(num).collect::<Result<_>>()?,
        });
    }
    Ok((header, rows))
}

/// Outcome of one training run inside a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRun {
    /// `epsilon` or `batch_size`.
    pub axis: String,
    /// Setting value as written in the CSV.
    pub value: String,
    pub repeat: usize,
    pub seed: u64,
    pub outcome: std::result::Result<RunScore, String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunScore {
    pub accuracy: f64,
    pub mean_abs_fairness: f64,
}

/// Mean and population standard deviation per setting. Failed runs are
/// counted but excluded from the statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepAggregate {
    pub axis: String,
    pub value: String,
    pub runs: usize,
    pub failed: usize,
    pub accuracy_mean: Option<f64>,
    pub accuracy_std: Option<f64>,
    pub fairness_mean: Option<f64>,
    pub fairness_std: Option<f64>,
}

const RUNS_HEADER: [&str; 8] = [
    "axis",
    "value",
    "repeat",
    "seed",
    "status",
    "accuracy",
    "mean_abs_fairness",
    "message",
];

const AGGREGATE_HEADER: [&str; 8] = [
    "axis",
    "value",
    "runs",
    "failed",
    "accuracy_mean",
    "accuracy_std",
    "fairness_mean",
    "fairness_std",
];

fn mean_std(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (Some(m), Some(var.sqrt()))
}

/// Groups runs by `(axis, value)` in order of first appearance.
pub fn aggregate(runs: &[SweepRun]) -> Vec<SweepAggregate> {
    let mut settings: Vec<(&str, &str)> = Vec::new();
    for r in runs {
        if !settings.contains(&(r.axis.as_str(), r.value.as_str())) {
            settings.push((&r.axis, &r.value));
        }
    }
    settings
        .into_iter()
        .map(|(axis, value)| {
            let mine: Vec<&SweepRun> = runs
                .iter()
                .filter(|r| r.axis == axis && r.value == value)
                .collect();
            let ok: Vec<RunScore> = mine.iter().filter_map(|r| r.outcome.clone().ok()).collect();
            let acc: Vec<f64> = ok.iter().map(|s| s.accuracy).collect();
            let fair: Vec<f64> = ok.iter().map(|s| s.mean_abs_fairness).collect();
            let (accuracy_mean, accuracy_std) = mean_std(&acc);
            let (fairness_mean, fairness_std) = mean_std(&fair);
            SweepAggregate {
                axis: axis.to_string(),
                value: value.to_string(),
                runs: mine.len(),
                failed: mine.len() - ok.len(),
                accuracy_mean,
                accuracy_std,
                fairness_mean,
                fairness_std,
            }
        })
        .collect()
}

fn opt_real(x: Option<f64>) -> String {
    x.map(real).unwrap_or_default()
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Config(format!("cannot format CSV: {e}")))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("cannot format CSV: {e}"))
}

pub fn runs_to_csv(runs: &[SweepRun]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RUNS_HEADER).map_err(csv_err)?;
    for r in runs {
        let (status, acc, fair, msg) = match &r.outcome {
            Ok(s) => (
                "ok",
                real(s.accuracy),
                real(s.mean_abs_fairness),
                String::new(),
            ),
            Err(m) => ("failed", String::new(), String::new(), m.clone()),
        };
        w.write_record([
            r.axis.as_str(),
            r.value.as_str(),
            &r.repeat.to_string(),
            &r.seed.to_string(),
            status,
            &acc,
            &fair,
            &msg,
        ])
        .map_err(csv_err)?;
    }
    finish_csv(w)
}

pub fn aggregate_to_csv(rows: &[SweepAggregate]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(AGGREGATE_HEADER).map_err(csv_err)?;
    for a in rows {
        w.write_record([
            a.axis.clone(),
            a.value.clone(),
            a.runs.to_string(),
            a.failed.to_string(),
            opt_real(a.accuracy_mean),
            opt_real(a.accuracy_std),
            opt_real(a.fairness_mean),
            opt_real(a.fairness_std),
        ])
        .map_err(csv_err)?;
    }
    finish_csv(w)
}

fn parse_opt(s: &str, what: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| Error::data(format!("bad number in column '{what}': {s:?}")))
}

fn check_header(r: &mut csv::Reader<&[u8]>, expected: &[&str]) -> Result<()> {
    let h = r.headers().map_err(|e| Error::data(e.to_string()))?;
    if h.iter().ne(expected.iter().copied()) {
        return Err(Error::data(format!("unexpected CSV header: {h:?}")));
    }
    Ok(())
}

pub fn parse_runs_csv(text: &str) -> Result<Vec<SweepRun>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    check_header(&mut r, &RUNS_HEADER)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::data(e.to_string()))?;
        let int = |j: usize| -> Result<u64> {
            rec[j]
                .parse()
                .map_err(|_| Error::data(format!("bad integer in column '{}'", RUNS_HEADER[j])))
        };
        let outcome = match &rec[4] {
            "ok" => Ok(RunScore {
                accuracy: parse_opt(&rec[5], "accuracy")?
                    .ok_or_else(|| Error::data("missing accuracy"))?,
                mean_abs_fairness: parse_opt(&rec[6], "mean_abs_fairness")?
                    .ok_or_else(|| Error::data("missing mean_abs_fairness"))?,
            }),
            "failed" => Err(rec[7].to_string()),
            other => return Err(Error::data(format!("unknown run status {other:?}"))),
        };
        out.push(SweepRun {
            axis: rec[0].to_string(),
            value: rec[1].to_string(),
            repeat: int(2)? as usize,
            seed: int(3)?,
            outcome,
        });
    }
    Ok(out)
}

pub fn parse_aggregate_csv(text: &str) -> Result<Vec<SweepAggregate>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    check_header(&mut r, &AGGREGATE_HEADER)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::data(e.to_string()))?;
        let count = |j: usize| -> Result<usize> {
            rec[j].parse().map_err(|_| {
                Error::data(format!("bad integer in column '{}'", AGGREGATE_HEADER[j]))
            })
        };
        out.push(SweepAggregate {
            axis: rec[0].to_string(),
            value: rec[1].to_string(),
            runs: count(2)?,
            failed: count(3)?,
            accuracy_mean: parse_opt(&rec[4], AGGREGATE_HEADER[4])?,
            accuracy_std: parse_opt(&rec[5], AGGREGATE_HEADER[5])?,
            fairness_mean: parse_opt(&rec[6], AGGREGATE_HEADER[6])?,
            fairness_std: parse_opt(&rec[7], AGGREGATE_HEADER[7])?,
        });
    }
    Ok(out)
}

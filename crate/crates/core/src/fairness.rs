//! Fairness groups, constant matrices and fairness levels.
//!
//! A notion splits the data into `K` disjoint groups and defines, for each
//! group, a signed fairness level `F_k` (positive when the group is
//! advantaged). For every supported notion `F` is linear in the group error
//! rates: `F_k = Σ_k' C[k][k'] · err_k'`. [`fairness_levels`] evaluates that
//! decomposition; [`direct_fairness`] evaluates the probability definitions
//! directly and is used as its oracle and for reporting.
//!
//! Group order is canonical: by sensitive code for accuracy parity, and
//! row-major over `(label, sensitive)` for the odds-based notions.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NotionKind {
    AccuracyParity,
    EqualizedOdds,
    EqualityOfOpportunity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FairnessNotion {
    pub kind: NotionKind,
    /// Label codes whose true-positive rate must be equalized. Only used
    /// (and only allowed) for equality of opportunity.
    pub desirable_labels: Vec<usize>,
}

impl FairnessNotion {
    pub fn accuracy_parity() -> Self {
        FairnessNotion {
            kind: NotionKind::AccuracyParity,
            desirable_labels: Vec::new(),
        }
    }

    pub fn equalized_odds() -> Self {
        FairnessNotion {
            kind: NotionKind::EqualizedOdds,
            desirable_labels: Vec::new(),
        }
    }

    pub fn equality_of_opportunity(desirable_labels: Vec<usize>) -> Self {
        let mut desirable_labels = desirable_labels;
        desirable_labels.sort_unstable();
        desirable_labels.dedup();
        FairnessNotion {
            kind: NotionKind::EqualityOfOpportunity,
            desirable_labels,
        }
    }

    pub fn validate(&self, label_count: usize) -> Result<()> {
        match self.kind {
            NotionKind::EqualityOfOpportunity => {
                if self.desirable_labels.is_empty() {
                    return Err(Error::Config(
                        "equality of opportunity needs at least one desirable label".into(),
                    ));
                }
                if let Some(l) = self.desirable_labels.iter().find(|&&l| l >= label_count) {
                    return Err(Error::Config(format!(
                        "desirable label {l} out of range (label_count {label_count})"
                    )));
                }
            }
            _ => {
                if !self.desirable_labels.is_empty() {
                    return Err(Error::Config(
                        "desirable labels only apply to equality of opportunity".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn group_count(&self, label_count: usize, sensitive_count: usize) -> usize {
        match self.kind {
            NotionKind::AccuracyParity => sensitive_count,
            _ => label_count * sensitive_count,
        }
    }

    /// Canonical group index of an example.
    pub fn group_of(&self, label: usize, sensitive: usize, sensitive_count: usize) -> usize {
        match self.kind {
            NotionKind::AccuracyParity => sensitive,
            _ => label * sensitive_count + sensitive,
        }
    }

    pub fn is_desirable(&self, label: usize) -> bool {
        self.desirable_labels.binary_search(&label).is_ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupKey {
    Sensitive(usize),
    LabelSensitive(usize, usize),
}

impl std::fmt::Display for GroupKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GroupKey::Sensitive(s) => write!(f, "s={s}"),
            GroupKey::LabelSensitive(y, s) => write!(f, "y={y},s={s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupPartition {
    pub group_of: Vec<usize>,
    pub keys: Vec<GroupKey>,
    /// Empirical `P(T_k)`.
    pub priors: Vec<f64>,
}

impl GroupPartition {
    pub fn k(&self) -> usize {
        self.keys.len()
    }
}

fn group_keys(
    notion: &FairnessNotion,
    label_count: usize,
    sensitive_count: usize,
) -> Vec<GroupKey> {
    match notion.kind {
        NotionKind::AccuracyParity => (0..sensitive_count).map(GroupKey::Sensitive).collect(),
        _ => (0..label_count)
            .flat_map(|y| (0..sensitive_count).map(move |s| GroupKey::LabelSensitive(y, s)))
            .collect(),
    }
}

/// Group index of every example of `ds` (no emptiness check).
pub fn assign_groups(ds: &Dataset, notion: &FairnessNotion) -> Vec<usize> {
    ds.labels()
        .iter()
        .zip(ds.sensitive())
        .map(|(&y, &s)| notion.group_of(y, s, ds.sensitive_count()))
        .collect()
}

pub fn partition(ds: &Dataset, notion: &FairnessNotion) -> Result<GroupPartition> {
    notion.validate(ds.label_count())?;
    let keys = group_keys(notion, ds.label_count(), ds.sensitive_count());
    let group_of = assign_groups(ds, notion);
    let mut counts = vec![0usize; keys.len()];
    for &g in &group_of {
        counts[g] += 1;
    }
    let missing: Vec<String> = keys
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c == 0)
        .map(|(k, _)| format!("({k})"))
        .collect();
    if !missing.is_empty() {
        return Err(Error::EmptyGroup(missing.join(", ")));
    }
    let n = ds.len() as f64;
    Ok(GroupPartition {
        group_of,
        keys,
        priors: counts.iter().map(|&c| c as f64 / n).collect(),
    })
}

/// `K × K` matrix; entry `(k, k')` multiplies group `k'`'s error rate in `F_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantMatrix {
    k: usize,
    data: Vec<f64>,
}

impl ConstantMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let k = rows.len();
        assert!(
            rows.iter().all(|r| r.len() == k),
            "constant matrix must be square"
        );
        ConstantMatrix {
            k,
            data: rows.concat(),
        }
    }

    pub fn zeros(k: usize) -> Self {
        ConstantMatrix {
            k,
            data: vec![0.0; k * k],
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.k + col]
    }

    fn set(&mut self, row: usize, col: usize, v: f64) {
        self.data[row * self.k + col] = v;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.k..(row + 1) * self.k]
    }

    /// `C · v`
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.k);
        (0..self.k)
            .map(|r| self.row(r).iter().zip(v).map(|(c, x)| c * x).sum())
            .collect()
    }

    /// `Cᵀ · v`
    pub fn mul_vec_transposed(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.k);
        (0..self.k)
            .map(|c| (0..self.k).map(|r| self.get(r, c) * v[r]).sum())
            .collect()
    }
}

/// Fills the constant matrix from probabilities estimated on `ds`, which
/// must be the dataset `p` was built on.
pub fn build_constants(
    p: &GroupPartition,
    notion: &FairnessNotion,
    ds: &Dataset,
) -> ConstantMatrix {
    let k = p.k();
    let mut c = ConstantMatrix::zeros(k);
    let sc = ds.sensitive_count();
    match notion.kind {
        NotionKind::AccuracyParity => {
            // C[r][r] = P(s=r) - 1, C[r][r'] = P(s=r')
            for r in 0..k {
                for r2 in 0..k {
                    let v = if r == r2 {
                        p.priors[r2] - 1.0
                    } else {
                        p.priors[r2]
                    };
                    c.set(r, r2, v);
                }
            }
        }
        NotionKind::EqualizedOdds | NotionKind::EqualityOfOpportunity => {
            let cells = ds.cell_counts();
            for l in 0..ds.label_count() {
                if notion.kind == NotionKind::EqualityOfOpportunity && !notion.is_desirable(l) {
                    continue;
                }
                let block = &cells[l * sc..(l + 1) * sc];
                let total: usize = block.iter().sum();
                for r in 0..sc {
                    for r2 in 0..sc {
                        let cond = block[r2] as f64 / total as f64;
                        let v = if r == r2 { cond - 1.0 } else { cond };
                        c.set(l * sc + r, l * sc + r2, v);
                    }
                }
            }
        }
    }
    c
}

/// Per-group error rates of one batch. `rates[k]` is `None` when group `k`
/// has no example in the batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchErrors {
    pub rates: Vec<Option<f64>>,
    pub counts: Vec<usize>,
}

pub fn group_error_rates(
    predictions: &[usize],
    labels: &[usize],
    group_of: &[usize],
    k: usize,
) -> BatchErrors {
    assert_eq!(predictions.len(), labels.len());
    assert_eq!(predictions.len(), group_of.len());
    let mut counts = vec![0usize; k];
    let mut wrong = vec![0usize; k];
    for ((&p, &y), &g) in predictions.iter().zip(labels).zip(group_of) {
        counts[g] += 1;
        if p != y {
            wrong[g] += 1;
        }
    }
    let rates = counts
        .iter()
        .zip(&wrong)
        .map(|(&c, &w)| (c > 0).then(|| w as f64 / c as f64))
        .collect();
    BatchErrors { rates, counts }
}

/// Running per-group error rates: each group keeps the rate from the last
/// batch in which it appeared (0 before that).
#[derive(Debug, Clone, PartialEq)]
pub struct GroupErrorEstimates {
    pub rates: Vec<f64>,
    pub seen: Vec<bool>,
}

impl GroupErrorEstimates {
    pub fn new(k: usize) -> Self {
        GroupErrorEstimates {
            rates: vec![0.0; k],
            seen: vec![false; k],
        }
    }

    pub fn update(&mut self, batch: &BatchErrors) {
        assert_eq!(batch.rates.len(), self.rates.len());
        for (k, rate) in batch.rates.iter().enumerate() {
            if let Some(r) = rate {
                self.rates[k] = *r;
                self.seen[k] = true;
            }
        }
    }
}

pub fn merge_running(est: &GroupErrorEstimates, batch: &BatchErrors) -> GroupErrorEstimates {
    let mut next = est.clone();
    next.update(batch);
    next
}

/// `F = C · rates`
pub fn fairness_levels(c: &ConstantMatrix, rates: &[f64]) -> Vec<f64> {
    c.mul_vec(rates)
}

/// Fairness levels straight from the probability definitions, with every
/// probability estimated on the given examples:
///
/// - accuracy parity: `F_r = P(ŷ = y | s = r) − P(ŷ = y)`
/// - equalized odds: `F_(l,r) = P(ŷ ≠ l | y = l) − P(ŷ ≠ l | s = r, y = l)`
/// - equality of opportunity: as equalized odds for desirable `l`, else 0
pub fn direct_fairness(
    predictions: &[usize],
    labels: &[usize],
    sensitive: &[usize],
    notion: &FairnessNotion,
    label_count: usize,
    sensitive_count: usize,
) -> Result<Vec<f64>> {
    assert_eq!(predictions.len(), labels.len());
    assert_eq!(predictions.len(), sensitive.len());
    notion.validate(label_count)?;
    let sc = sensitive_count;
    // [y][s] -> (count, correct)
    let mut count = vec![0usize; label_count * sc];
    let mut correct = vec![0usize; label_count * sc];
    for ((&p, &y), &s) in predictions.iter().zip(labels).zip(sensitive) {
        count[y * sc + s] += 1;
        if p == y {
            correct[y * sc + s] += 1;
        }
    }
    let frac = |num: usize, den: usize| num as f64 / den as f64;
    match notion.kind {
        NotionKind::AccuracyParity => {
            let n = predictions.len();
            if n == 0 {
                return Err(Error::EmptyGroup("no examples".into()));
            }
            let all_correct: usize = correct.iter().sum();
            let overall = frac(all_correct, n);
            (0..sc)
                .map(|r| {
                    let cnt: usize = (0..label_count).map(|y| count[y * sc + r]).sum();
                    let cor: usize = (0..label_count).map(|y| correct[y * sc + r]).sum();
                    if cnt == 0 {
                        return Err(Error::EmptyGroup(format!("(s={r})")));
                    }
                    Ok(frac(cor, cnt) - overall)
                })
                .collect()
        }
        NotionKind::EqualizedOdds | NotionKind::EqualityOfOpportunity => {
            let mut f = vec![0.0; label_count * sc];
            for l in 0..label_count {
                if notion.kind == NotionKind::EqualityOfOpportunity && !notion.is_desirable(l) {
                    continue;
                }
                let block_cnt: usize = count[l * sc..(l + 1) * sc].iter().sum();
                let block_err: usize = (0..sc)
                    .map(|r| count[l * sc + r] - correct[l * sc + r])
                    .sum();
                for r in 0..sc {
                    let cnt = count[l * sc + r];
                    if cnt == 0 {
                        return Err(Error::EmptyGroup(format!("(y={l},s={r})")));
                    }
                    let err = cnt - correct[l * sc + r];
                    f[l * sc + r] = frac(block_err, block_cnt) - frac(err, cnt);
                }
            }
            Ok(f)
        }
    }
}

//! Clustering agreement and outlier-detection rates.

use std::collections::{HashMap, HashSet};
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simgen::LabeledDataSet;

/// Label given to removed observations when they are scored as their own class.
pub const OUTLIER_CLASS: usize = 0;

fn choose2(k: u64) -> f64 {
    (k as f64) * (k.saturating_sub(1) as f64) / 2.0
}

/// Adjusted Rand index under the permutation model.
///
/// When the chance-corrected denominator vanishes (both partitions all one
/// cluster, or both all singletons) the partitions are identical and 1.0 is
/// returned.
pub fn ari<A: Eq + Hash, B: Eq + Hash>(a: &[A], b: &[B]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "label vectors have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len() as u64;
    if n < 2 {
        return Ok(1.0);
    }
    let mut table: HashMap<(&A, &B), u64> = HashMap::new();
    let mut rows: HashMap<&A, u64> = HashMap::new();
    let mut cols: HashMap<&B, u64> = HashMap::new();
    for (x, y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&k| choose2(k)).sum();
    let sum_a: f64 = rows.values().map(|&k| choose2(k)).sum();
    let sum_b: f64 = cols.values().map(|&k| choose2(k)).sum();
    let expected = sum_a * sum_b / choose2(n);
    let max_index = 0.5 * (sum_a + sum_b);
    let denom = max_index - expected;
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((index - expected) / denom)
}

/// Outlier-detection counts and rates. Rates whose denominator is zero are
/// `None` and serialize as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionRates {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
    pub tnr: Option<f64>,
    pub fnr: Option<f64>,
}

impl ConfusionRates {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let rate = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        Self {
            tp,
            fp,
            tn,
            fn_,
            tpr: rate(tp, tp + fn_),
            fnr: rate(fn_, tp + fn_),
            fpr: rate(fp, fp + tn),
            tnr: rate(tn, fp + tn),
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn outlier_eval<S: AsRef<str>>(
    predicted: &[S],
    truth: &LabeledDataSet,
) -> Result<ConfusionRates> {
    let mut flagged = vec![false; truth.data.len()];
    for id in predicted {
        let i = truth
            .data
            .index_of(id.as_ref())
            .ok_or_else(|| Error::UnknownId(id.as_ref().to_string()))?;
        flagged[i] = true;
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&p, &t) in flagged.iter().zip(&truth.is_outlier) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(ConfusionRates::from_counts(tp, fp, tn, fn_))
}

/// Labels for every id in `all_ids`: the fitted label for retained
/// observations and [`OUTLIER_CLASS`] for removed ones.
pub fn labels_with_outlier_class<S: AsRef<str>>(
    all_ids: &[String],
    fit_ids: &[String],
    fit_labels: &[usize],
    outlier_ids: &[S],
) -> Result<Vec<usize>> {
    if fit_ids.len() != fit_labels.len() {
        return Err(Error::Dimension(
            "fit ids and labels differ in length".into(),
        ));
    }
    let outliers: HashSet<&str> = outlier_ids.iter().map(AsRef::as_ref).collect();
    let fitted: HashMap<&str, usize> = fit_ids
        .iter()
        .map(String::as_str)
        .zip(fit_labels.iter().copied())
        .collect();
    all_ids
        .iter()
        .map(|id| {
            if outliers.contains(id.as_str()) {
                Ok(OUTLIER_CLASS)
            } else {
                fitted
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| Error::UnknownId(id.clone()))
            }
        })
        .collect()
}

/// Ground-truth labels with outliers as their own class.
pub fn truth_with_outlier_class(truth: &LabeledDataSet) -> Vec<usize> {
    truth
        .true_cluster
        .iter()
        .zip(&truth.is_outlier)
        .map(|(&c, &o)| if o { OUTLIER_CLASS } else { c })
        .collect()
}

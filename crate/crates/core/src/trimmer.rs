//! Iterative outlier trimming.
//!
//! Each iteration fits the mixture, computes every leave-one-out
//! log-likelihood difference, scores their agreement with the shifted-gamma
//! null by KL divergence, and removes the observation whose absence raises
//! the log-likelihood most. After the last iteration the number of removals
//! with the smallest KL is chosen.

use std::collections::HashSet;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::dataset::DataSet;
use crate::em::{fit, FitConfig, FitResult};
use crate::error::{Error, Result};
use crate::nullmodel::{
    kl_divergence, subset_logliks, KlEstimate, NullGammaMixture, SubsetLogliks, SubsetRefit,
};

/// Index of the largest valid `ŷ_j`; the first one on ties.
pub fn candidate_outlier(ys: &SubsetLogliks) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, y) in ys.ys.iter().enumerate() {
        if let Some(y) = *y {
            if best.is_none_or(|(_, b)| y > b) {
                best = Some((j, y));
            }
        }
    }
    best.map(|(j, _)| j)
        .ok_or_else(|| Error::InsufficientData("no valid subset log-likelihoods".into()))
}

/// Ids of observations whose Mahalanobis distance to their assigned component
/// exceeds the chi-squared(rc) `quantile`. `None` disables the filter.
pub fn gross_outlier_filter(
    data: &DataSet,
    g: usize,
    cfg: &FitConfig,
    quantile: Option<f64>,
) -> Result<Vec<String>> {
    let Some(q) = quantile else {
        return Ok(Vec::new());
    };
    if !(q > 0.5 && q < 1.0) {
        return Err(Error::InvalidValue(format!(
            "gross-outlier quantile {q} outside (0.5, 1)"
        )));
    }
    let dof = (data.rows() * data.cols()) as f64;
    let cutoff = ChiSquared::new(dof)
        .map_err(|e| Error::InvalidValue(e.to_string()))?
        .inverse_cdf(q);
    let fitted = fit(data, g, cfg)?;
    let factored = fitted.model.factor()?;
    let mut flagged = Vec::new();
    for (i, x) in data.observations().iter().enumerate() {
        let d = factored[fitted.hard_labels[i] - 1].mahalanobis(x)?;
        if d > cutoff {
            flagged.push(data.id(i).to_string());
        }
    }
    Ok(flagged)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OclustOptions {
    pub gross_quantile: Option<f64>,
    pub subset_refit: SubsetRefit,
    /// Keep every iteration's fit. When false, the chosen iteration is refit
    /// at the end.
    pub keep_models: bool,
}

impl Default for OclustOptions {
    fn default() -> Self {
        Self {
            gross_quantile: None,
            subset_refit: SubsetRefit::default(),
            keep_models: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrimIteration {
    /// Number of observations removed so far.
    pub f: usize,
    /// The observation removed to reach this iteration; `None` for the first.
    pub removed_id: Option<String>,
    pub kl: KlEstimate,
    pub loglik: f64,
    pub n_remaining: usize,
    pub null: NullGammaMixture,
    pub ys: SubsetLogliks,
    pub fit: Option<FitResult>,
}

#[derive(Debug, Clone)]
pub struct OclustResult {
    pub trace: Vec<TrimIteration>,
    pub f_star: usize,
    /// Removed ids in removal order, gross outliers first.
    pub outlier_ids: Vec<String>,
    pub retained_ids: Vec<String>,
    pub gross_ids: Vec<String>,
    pub final_fit: FitResult,
    /// Set when an iteration failed and the trace stops early.
    pub truncated: Option<String>,
}

impl OclustResult {
    pub fn kl_min(&self) -> f64 {
        self.trace
            .iter()
            .find(|t| t.f == self.f_star)
            .map_or(f64::NAN, |t| t.kl.value)
    }
}

/// Index into `trace` of the smallest KL; earliest iteration on ties.
pub fn select_iteration(trace: &[TrimIteration]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, t) in trace.iter().enumerate() {
        if best.is_none_or(|b| t.kl.value < trace[b].kl.value) {
            best = Some(k);
        }
    }
    best
}

struct Step {
    fit: FitResult,
    kl: KlEstimate,
    null: NullGammaMixture,
    ys: SubsetLogliks,
}

fn step(current: &DataSet, g: usize, cfg: &FitConfig, mode: SubsetRefit) -> Result<Step> {
    let fitted = fit(current, g, cfg)?;
    let ys = subset_logliks(current, cfg, &fitted, mode)?;
    let null = NullGammaMixture::from_model(&fitted.model)?;
    let kl = kl_divergence(&ys, &null)?;
    Ok(Step {
        fit: fitted,
        kl,
        null,
        ys,
    })
}

/// Runs the trimming loop for f = B, …, `max_outliers`, where B is the number
/// of gross outliers removed up front.
pub fn run_oclust(
    data: &DataSet,
    g: usize,
    max_outliers: usize,
    cfg: &FitConfig,
    opts: &OclustOptions,
) -> Result<OclustResult> {
    cfg.validate()?;
    let n0 = data.len();
    let floor = g * (data.rows().max(data.cols()) + 1);
    if n0 <= floor || max_outliers >= n0 - floor {
        return Err(Error::Precondition(format!(
            "F={max_outliers} must be below n - G(max(r,c)+1) = {}",
            n0 as i64 - floor as i64
        )));
    }

    let gross_ids = gross_outlier_filter(data, g, cfg, opts.gross_quantile)?;
    let b = gross_ids.len();
    if b > max_outliers {
        return Err(Error::Precondition(format!(
            "gross-outlier filter removed {b} observations, more than F={max_outliers}"
        )));
    }
    let mut current = data.without_ids(&gross_ids)?;
    let mut removed: Vec<String> = gross_ids.clone();
    let mut trace: Vec<TrimIteration> = Vec::new();
    let mut truncated = None;
    let mut removed_id = None;

    for f in b..=max_outliers {
        let s = match step(&current, g, cfg, opts.subset_refit) {
            Ok(s) => s,
            Err(e) if !trace.is_empty() => {
                truncated = Some(format!("iteration f={f} failed: {e}"));
                break;
            }
            Err(e) => return Err(e),
        };
        let next = if f < max_outliers {
            Some(candidate_outlier(&s.ys)?)
        } else {
            None
        };
        trace.push(TrimIteration {
            f,
            removed_id: removed_id.take(),
            kl: s.kl,
            loglik: s.fit.loglik,
            n_remaining: current.len(),
            null: s.null,
            ys: s.ys,
            fit: opts.keep_models.then_some(s.fit),
        });
        if let Some(j) = next {
            let id = current.id(j).to_string();
            current = current.without(j);
            removed.push(id.clone());
            removed_id = Some(id);
        }
    }

    let best = select_iteration(&trace).expect("trace is non-empty");
    let f_star = trace[best].f;
    let outlier_ids: Vec<String> = removed[..f_star].to_vec();
    let dropped: HashSet<&str> = outlier_ids.iter().map(String::as_str).collect();
    let retained_ids: Vec<String> = data
        .ids()
        .iter()
        .filter(|id| !dropped.contains(id.as_str()))
        .cloned()
        .collect();
    let final_fit = match trace[best].fit.clone() {
        Some(f) => f,
        None => fit(&data.without_ids(&outlier_ids)?, g, cfg)?,
    };
    Ok(OclustResult {
        trace,
        f_star,
        outlier_ids,
        retained_ids,
        gross_ids,
        final_fit,
        truncated,
    })
}

//! Subset log-likelihoods and their shifted-gamma reference distribution.
//!
//! For an observation `X_j` in component h, dropping it from the data changes
//! the log-likelihood by approximately `k_h + ½·t_j`, where `t_j` is its
//! Mahalanobis distance and
//!
//! ```text
//! k_h = −log π_h + (rc/2)·log 2π + (c/2)·log|U_h| + (r/2)·log|V_h|.
//! ```
//!
//! Under normality `½·t_j ~ gamma(rc/2, 1)`, so the differences follow a
//! π-weighted mixture of shifted gammas. How far the observed differences are
//! from that mixture, measured by a histogram KL divergence, drives trimming.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::dataset::DataSet;
use crate::em::{observation_log_densities, refit_raw, simplified_terms, FitConfig, FitResult};
use crate::error::{Error, Result};
use crate::matnorm::{ComponentParams, FactoredComponent};

/// Minimum number of valid differences for a KL estimate.
pub const MIN_KL_VALUES: usize = 20;
/// Floor on model bin probabilities.
pub const Q_FLOOR: f64 = 1e-12;
/// Largest tolerated fraction of failed subset refits.
pub const MAX_FAILURE_FRACTION: f64 = 0.05;
pub const DEFAULT_WARM_ITERS: usize = 50;

/// How each leave-one-out model is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubsetRefit {
    /// EM from the full model, capped at `max_iters` iterations.
    WarmStart { max_iters: usize },
    /// EM from the full model, run under the fit's own iteration limit.
    Converged,
    /// No refit: full-model parameters and the simplified log-likelihood.
    Frozen,
}

impl Default for SubsetRefit {
    fn default() -> Self {
        SubsetRefit::WarmStart {
            max_iters: DEFAULT_WARM_ITERS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetLogliks {
    /// `ŷ_j = ℓ̂(X without X_j) − ℓ̂(X)`; `None` where the refit failed.
    pub ys: Vec<Option<f64>>,
    /// Full-model hard label of each observation.
    pub subset_labels: Vec<usize>,
}

impl SubsetLogliks {
    pub fn valid(&self) -> Vec<f64> {
        self.ys.iter().flatten().copied().collect()
    }

    pub fn n_failures(&self) -> usize {
        self.ys.iter().filter(|y| y.is_none()).count()
    }
}

/// Computes `ŷ_j` for every observation. Refits run in parallel; results are
/// gathered in index order.
pub fn subset_logliks(
    data: &DataSet,
    cfg: &FitConfig,
    full: &FitResult,
    mode: SubsetRefit,
) -> Result<SubsetLogliks> {
    let obs = data.observations();
    let n = obs.len();
    if full.hard_labels.len() != n {
        return Err(Error::Dimension(format!(
            "fit has {} labels, data has {n} observations",
            full.hard_labels.len()
        )));
    }
    let ys: Vec<Option<f64>> = match mode {
        SubsetRefit::Frozen => {
            let terms = simplified_terms(obs, &full.model, &full.hard_labels)?;
            let total: f64 = terms.iter().sum();
            terms.iter().map(|t| Some((total - t) - total)).collect()
        }
        SubsetRefit::WarmStart { .. } | SubsetRefit::Converged => {
            cfg.validate()?;
            let max_iters = match mode {
                SubsetRefit::WarmStart { max_iters } => max_iters.max(1),
                _ => cfg.max_iters,
            };
            let full_ll = full.loglik;
            (0..n)
                .into_par_iter()
                .map(|j| {
                    let mut subset = Vec::with_capacity(n - 1);
                    subset.extend(obs[..j].iter().cloned());
                    subset.extend(obs[j + 1..].iter().cloned());
                    match refit_raw(&subset, &full.model, max_iters, cfg) {
                        Ok(f) if f.loglik.is_finite() => Some(f.loglik - full_ll),
                        _ => None,
                    }
                })
                .collect()
        }
    };
    let failed = ys.iter().filter(|y| y.is_none()).count();
    if failed as f64 > MAX_FAILURE_FRACTION * n as f64 {
        return Err(Error::SubsetFailure { failed, total: n });
    }
    Ok(SubsetLogliks {
        ys,
        subset_labels: full.hard_labels.clone(),
    })
}

/// `ŷ_j` with the full-model parameters held fixed: the change in the
/// observed-data log-likelihood, `−log f(X_j)`.
pub fn frozen_observed_differences(data: &DataSet, full: &FitResult) -> Result<Vec<f64>> {
    Ok(observation_log_densities(data.observations(), &full.model)?
        .into_iter()
        .map(|v| -v)
        .collect())
}

/// k = −log π + (rc/2)·log 2π + (c/2)·log|U| + (r/2)·log|V|.
pub fn gamma_shift(comp: &ComponentParams) -> Result<f64> {
    let f = FactoredComponent::new(comp)?;
    let (r, c) = (comp.rows() as f64, comp.cols() as f64);
    Ok(-comp.weight.ln()
        + 0.5 * r * c * (2.0 * PI).ln()
        + 0.5 * c * f.log_det_u()
        + 0.5 * r * f.log_det_v())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullComponent {
    pub weight: f64,
    pub shift: f64,
}

/// Mixture of gamma(shape, rate 1) densities shifted by `k_g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullGammaMixture {
    pub shape: f64,
    pub components: Vec<NullComponent>,
}

impl NullGammaMixture {
    pub fn new(shape: f64, components: Vec<NullComponent>) -> Result<Self> {
        if !(shape > 0.0) {
            return Err(Error::InvalidValue(format!("gamma shape {shape}")));
        }
        if components.is_empty() {
            return Err(Error::InvalidValue("null mixture has no components".into()));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-10 || components.iter().any(|c| !c.shift.is_finite()) {
            return Err(Error::InvalidValue(
                "null weights must sum to 1 with finite shifts".into(),
            ));
        }
        Ok(Self { shape, components })
    }

    /// Shape rc/2; one shifted gamma per fitted component.
    pub fn from_model(model: &crate::em::MixtureModel) -> Result<Self> {
        let shape = 0.5 * (model.rows() * model.cols()) as f64;
        let components = model
            .components()
            .iter()
            .map(|p| {
                Ok(NullComponent {
                    weight: p.weight,
                    shift: gamma_shift(p)?,
                })
            })
            .collect::<Result<_>>()?;
        Self::new(shape, components)
    }

    pub fn min_shift(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.shift)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn density(&self, y: f64) -> f64 {
        let ln_norm = ln_gamma(self.shape);
        self.components
            .iter()
            .map(|c| c.weight * gamma_pdf(y - c.shift, self.shape, ln_norm))
            .sum()
    }

    pub fn cdf(&self, y: f64) -> f64 {
        self.components
            .iter()
            .map(|c| {
                let t = y - c.shift;
                if t <= 0.0 {
                    0.0
                } else {
                    c.weight * gamma_lr(self.shape, t)
                }
            })
            .sum()
    }
}

fn gamma_pdf(t: f64, shape: f64, ln_gamma_shape: f64) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    if t == 0.0 {
        return match shape {
            s if s < 1.0 => f64::INFINITY,
            s if s == 1.0 => 1.0,
            _ => 0.0,
        };
    }
    ((shape - 1.0) * t.ln() - t - ln_gamma_shape).exp()
}

pub fn null_density(y: f64, null: &NullGammaMixture) -> f64 {
    null.density(y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlEstimate {
    pub value: f64,
    pub n_bins: usize,
    pub bin_edges: Vec<f64>,
}

/// Sturges bin count, ⌈log₂ n + 1⌉.
pub fn sturges_bins(n: usize) -> usize {
    ((n as f64).log2() + 1.0).ceil().max(1.0) as usize
}

/// Σ_{b: p_b > 0} p_b·log(p_b / max(q_b, 1e-12)), clamped at 0.
pub fn kl_from_probabilities(p: &[f64], q: &[f64]) -> f64 {
    let kl: f64 = p
        .iter()
        .zip(q)
        .filter(|(&pb, _)| pb > 0.0)
        .map(|(&pb, &qb)| pb * (pb / qb.max(Q_FLOOR)).ln())
        .sum();
    kl.max(0.0)
}

/// Histogram KL divergence of the observed values from the null mixture.
///
/// Bins are equal-width over [min, max] of the values, with the last bin
/// closed. If every value is identical the range is widened by 0.5 either
/// side.
pub fn kl_divergence_values(values: &[f64], null: &NullGammaMixture) -> Result<KlEstimate> {
    let n = values.len();
    if n < MIN_KL_VALUES {
        return Err(Error::InsufficientData(format!(
            "{n} subset log-likelihood differences; KL needs at least {MIN_KL_VALUES}"
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(
            "non-finite subset log-likelihood difference".into(),
        ));
    }
    let mut lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        lo -= 0.5;
        hi += 0.5;
    }
    let n_bins = sturges_bins(n);
    let width = (hi - lo) / n_bins as f64;
    let mut edges: Vec<f64> = (0..n_bins).map(|b| lo + b as f64 * width).collect();
    edges.push(hi);

    let mut counts = vec![0usize; n_bins];
    for &v in values {
        let b = (((v - lo) / width).floor() as usize).min(n_bins - 1);
        counts[b] += 1;
    }
    let p: Vec<f64> = counts.iter().map(|&k| k as f64 / n as f64).collect();
    let cdf: Vec<f64> = edges.iter().map(|&e| null.cdf(e)).collect();
    let q: Vec<f64> = cdf.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect();
    Ok(KlEstimate {
        value: kl_from_probabilities(&p, &q),
        n_bins,
        bin_edges: edges,
    })
}

pub fn kl_divergence(ys: &SubsetLogliks, null: &NullGammaMixture) -> Result<KlEstimate> {
    kl_divergence_values(&ys.valid(), null)
}

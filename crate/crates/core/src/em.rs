//! EM for mixtures of matrix-variate normals.
//!
//! The M-step is the flip-flop scheme: the mean is the weighted average, then
//! `U` and `V` are updated alternately, each conditional on the other. One
//! alternation per M-step already increases the expected complete-data
//! log-likelihood, so the iteration stays monotone.

use rayon::prelude::*;

use crate::dataset::DataSet;
use crate::error::{CovarianceKind, Error, Result};
use crate::kmeans::kmeans_init;
use crate::linalg::{Cholesky, Matrix};
use crate::matnorm::{normalize_identifiability, ComponentParams, FactoredComponent, ObsMatrix};
use crate::rng;
use crate::simgen::rand_corr;

/// Relative change of the normalized covariances below which the inner
/// U/V alternation stops early.
const UV_SWEEP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    rows: usize,
    cols: usize,
    components: Vec<ComponentParams>,
}

impl MixtureModel {
    /// Validates shapes and weights. Covariances are used as given.
    pub fn new(components: Vec<ComponentParams>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidValue("mixture needs at least one component".into()))?;
        let (rows, cols) = first.mean.shape();
        for (g, p) in components.iter().enumerate() {
            if p.mean.shape() != (rows, cols)
                || p.row_cov.shape() != (rows, rows)
                || p.col_cov.shape() != (cols, cols)
            {
                return Err(Error::Dimension(format!(
                    "component {} does not match {rows}x{cols}",
                    g + 1
                )));
            }
            if !(p.weight > 0.0 && p.weight <= 1.0) {
                return Err(Error::InvalidValue(format!(
                    "component {} has weight {}",
                    g + 1,
                    p.weight
                )));
            }
        }
        let total: f64 = components.iter().map(|p| p.weight).sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidValue(format!("weights sum to {total}")));
        }
        Ok(Self {
            rows,
            cols,
            components,
        })
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn components(&self) -> &[ComponentParams] {
        &self.components
    }

    pub fn component(&self, g: usize) -> &ComponentParams {
        &self.components[g]
    }

    /// Copy with every `U_g` scaled to trace r.
    pub fn normalized(&self) -> Result<Self> {
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            components: self
                .components
                .iter()
                .map(ComponentParams::normalized)
                .collect::<Result<_>>()?,
        })
    }

    pub fn factor(&self) -> Result<Vec<FactoredComponent>> {
        self.components.iter().map(FactoredComponent::new).collect()
    }

    fn check_data(&self, obs: &[ObsMatrix]) -> Result<()> {
        match obs.iter().find(|x| x.shape() != (self.rows, self.cols)) {
            Some(x) => Err(Error::Dimension(format!(
                "observation is {:?}, model is {}x{}",
                x.shape(),
                self.rows,
                self.cols
            ))),
            None => Ok(()),
        }
    }
}

/// Posterior membership probabilities, n rows by G columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    n: usize,
    g: usize,
    values: Vec<f64>,
}

impl Responsibilities {
    pub fn from_row_major(n: usize, g: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * g {
            return Err(Error::Dimension(format!(
                "{} responsibilities for {n}x{g}",
                values.len()
            )));
        }
        Ok(Self { n, g, values })
    }

    /// Indicator matrix for 1-based hard labels.
    pub fn one_hot(labels: &[usize], g: usize) -> Result<Self> {
        let mut values = vec![0.0; labels.len() * g];
        for (i, &l) in labels.iter().enumerate() {
            if l == 0 || l > g {
                return Err(Error::InvalidValue(format!("label {l} outside 1..={g}")));
            }
            values[i * g + l - 1] = 1.0;
        }
        Ok(Self {
            n: labels.len(),
            g,
            values,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_components(&self) -> usize {
        self.g
    }

    pub fn get(&self, i: usize, g: usize) -> f64 {
        self.values[i * self.g + g]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.g..(i + 1) * self.g]
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.g];
        for i in 0..self.n {
            for (acc, z) in s.iter_mut().zip(self.row(i)) {
                *acc += z;
            }
        }
        s
    }

    /// 1-based argmax per row; ties go to the lower component.
    pub fn hard_labels(&self) -> Vec<usize> {
        (0..self.n)
            .map(|i| {
                let row = self.row(i);
                let mut best = 0;
                for (g, &z) in row.iter().enumerate() {
                    if z > row[best] {
                        best = g;
                    }
                }
                best + 1
            })
            .collect()
    }

    /// Keeps all rows except `skip`.
    pub fn without(&self, skip: usize) -> Self {
        let mut values = Vec::with_capacity((self.n - 1) * self.g);
        for i in (0..self.n).filter(|&i| i != skip) {
            values.extend_from_slice(self.row(i));
        }
        Self {
            n: self.n - 1,
            g: self.g,
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub max_iters: usize,
    pub rel_tol: f64,
    pub n_inits: usize,
    pub inner_uv_sweeps: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            rel_tol: 1e-8,
            n_inits: 5,
            inner_uv_sweeps: 1,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || self.n_inits == 0 || self.inner_uv_sweeps == 0 {
            return Err(Error::InvalidValue(
                "max_iters, n_inits and inner_uv_sweeps must be at least 1".into(),
            ));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidValue("rel_tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: MixtureModel,
    pub zhat: Responsibilities,
    /// 1-based.
    pub hard_labels: Vec<usize>,
    pub loglik: f64,
    pub n_iters: usize,
    pub converged: bool,
    /// Log-likelihood after every E-step of the winning start.
    pub loglik_history: Vec<f64>,
    /// Index of the winning start; 0 for warm-started fits.
    pub start: usize,
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Per-observation `log π_g + log φ_g(X_i)`, row-major n×G.
fn joint_log_densities(obs: &[ObsMatrix], factored: &[FactoredComponent]) -> Result<Vec<f64>> {
    let g = factored.len();
    let mut out = vec![0.0; obs.len() * g];
    let mut scratch = vec![0.0; obs.first().map_or(0, |x| x.as_slice().len())];
    for (i, x) in obs.iter().enumerate() {
        for (k, f) in factored.iter().enumerate() {
            let v = f.log_weight() + f.log_density_raw(x.as_slice(), &mut scratch);
            if v.is_nan() {
                return Err(Error::Numeric(format!(
                    "NaN log-density for observation {i}, component {}",
                    k + 1
                )));
            }
            out[i * g + k] = v;
        }
    }
    Ok(out)
}

/// E-step plus the observed-data log-likelihood of the same model.
fn e_step_raw(obs: &[ObsMatrix], model: &MixtureModel) -> Result<(Responsibilities, f64)> {
    model.check_data(obs)?;
    let factored = model.factor()?;
    let g = factored.len();
    let mut values = joint_log_densities(obs, &factored)?;
    let mut total = 0.0;
    for row in values.chunks_mut(g) {
        let lse = log_sum_exp(row);
        if !lse.is_finite() {
            return Err(Error::Numeric("non-finite mixture log-density".into()));
        }
        total += lse;
        for v in row.iter_mut() {
            *v = (*v - lse).exp();
        }
    }
    Ok((
        Responsibilities {
            n: obs.len(),
            g,
            values,
        },
        total,
    ))
}

pub fn e_step(data: &DataSet, model: &MixtureModel) -> Result<Responsibilities> {
    Ok(e_step_raw(data.observations(), model)?.0)
}

/// Σ_i log Σ_g π_g φ(X_i | M_g, V_g, U_g).
pub fn loglik(data: &DataSet, model: &MixtureModel) -> Result<f64> {
    Ok(observation_log_densities(data.observations(), model)?
        .iter()
        .sum())
}

/// log Σ_g π_g φ(X_i | ·) for each observation.
pub fn observation_log_densities(obs: &[ObsMatrix], model: &MixtureModel) -> Result<Vec<f64>> {
    model.check_data(obs)?;
    let factored = model.factor()?;
    let joint = joint_log_densities(obs, &factored)?;
    let out: Vec<f64> = joint.chunks(factored.len()).map(log_sum_exp).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite mixture log-density".into()));
    }
    Ok(out)
}

/// Classification log-likelihood: each observation counts only its own
/// component, `Σ_i [log π_{l_i} + log φ(X_i | l_i)]`.
pub fn simplified_loglik(data: &DataSet, model: &MixtureModel, labels: &[usize]) -> Result<f64> {
    Ok(simplified_terms(data.observations(), model, labels)?
        .iter()
        .sum())
}

pub(crate) fn simplified_terms(
    obs: &[ObsMatrix],
    model: &MixtureModel,
    labels: &[usize],
) -> Result<Vec<f64>> {
    model.check_data(obs)?;
    if labels.len() != obs.len() {
        return Err(Error::Dimension(format!(
            "{} labels for {} observations",
            labels.len(),
            obs.len()
        )));
    }
    let factored = model.factor()?;
    let mut scratch = vec![0.0; model.rows * model.cols];
    obs.iter()
        .zip(labels)
        .map(|(x, &l)| {
            let f = factored.get(l.wrapping_sub(1)).ok_or_else(|| {
                Error::InvalidValue(format!("label {l} outside 1..={}", factored.len()))
            })?;
            Ok(f.log_weight() + f.log_density_raw(x.as_slice(), &mut scratch))
        })
        .collect()
}

/// Σ_i z_i (X_i − M) V⁻¹ (X_i − M)' / (c Σ_i z_i), from the factor of V.
fn update_row_cov(
    centered: &[Vec<f64>],
    weights: impl Iterator<Item = f64> + Clone,
    chol_v: &Cholesky,
    r: usize,
    c: usize,
    total: f64,
) -> Matrix {
    let mut acc = Matrix::zeros(r, r);
    let mut w = vec![0.0; r * c];
    for (d, z) in centered.iter().zip(weights) {
        if z == 0.0 {
            continue;
        }
        // rows of D L_V⁻ᵀ
        w.copy_from_slice(d);
        for i in 0..r {
            chol_v.solve_lower_in_place(&mut w[i * c..(i + 1) * c]);
        }
        let a = acc.as_mut_slice();
        for i in 0..r {
            for j in 0..=i {
                let s: f64 = (0..c).map(|k| w[i * c + k] * w[j * c + k]).sum();
                a[i * r + j] += z * s;
            }
        }
    }
    finish_symmetric(acc, c as f64 * total)
}

/// Σ_i z_i (X_i − M)' U⁻¹ (X_i − M) / (r Σ_i z_i), from the factor of U.
fn update_col_cov(
    centered: &[Vec<f64>],
    weights: impl Iterator<Item = f64> + Clone,
    chol_u: &Cholesky,
    r: usize,
    c: usize,
    total: f64,
) -> Matrix {
    let mut acc = Matrix::zeros(c, c);
    let mut w = vec![0.0; r * c];
    for (d, z) in centered.iter().zip(weights) {
        if z == 0.0 {
            continue;
        }
        // L_U⁻¹ D, column by column
        w.copy_from_slice(d);
        for j in 0..c {
            chol_u.solve_lower_strided(&mut w, j, c);
        }
        let a = acc.as_mut_slice();
        for i in 0..c {
            for j in 0..=i {
                let s: f64 = (0..r).map(|k| w[k * c + i] * w[k * c + j]).sum();
                a[i * c + j] += z * s;
            }
        }
    }
    finish_symmetric(acc, r as f64 * total)
}

/// Scales the accumulated lower triangle and mirrors it.
fn finish_symmetric(mut acc: Matrix, denom: f64) -> Matrix {
    let n = acc.rows();
    let a = acc.as_mut_slice();
    for i in 0..n {
        for j in 0..=i {
            let v = a[i * n + j] / denom;
            a[i * n + j] = v;
            a[j * n + i] = v;
        }
    }
    acc
}

fn m_step_raw(
    obs: &[ObsMatrix],
    zhat: &Responsibilities,
    prev: &MixtureModel,
    sweeps: usize,
) -> Result<MixtureModel> {
    prev.check_data(obs)?;
    if zhat.n != obs.len() || zhat.g != prev.n_components() {
        return Err(Error::Dimension(format!(
            "responsibilities are {}x{}, data has {} observations and model {} components",
            zhat.n,
            zhat.g,
            obs.len(),
            prev.n_components()
        )));
    }
    if sweeps == 0 {
        return Err(Error::InvalidValue(
            "at least one U/V sweep is required".into(),
        ));
    }
    let (r, c) = (prev.rows, prev.cols);
    let n = obs.len() as f64;
    let required = r.max(c) + 1;
    let sizes = zhat.column_sums();
    let mut components = Vec::with_capacity(zhat.g);
    for (g, &size) in sizes.iter().enumerate() {
        if !(size >= required as f64) {
            return Err(Error::DegenerateComponent {
                component: g + 1,
                size,
                required,
            });
        }
        let weights = (0..zhat.n).map(move |i| zhat.get(i, g));

        let mut mean = vec![0.0; r * c];
        for (x, z) in obs.iter().zip(weights.clone()) {
            for (m, v) in mean.iter_mut().zip(x.as_slice()) {
                *m += z * v;
            }
        }
        for m in &mut mean {
            *m /= size;
        }
        let centered: Vec<Vec<f64>> = obs
            .iter()
            .map(|x| x.as_slice().iter().zip(&mean).map(|(v, m)| v - m).collect())
            .collect();

        let singular = |kind| Error::SingularCovariance {
            component: g + 1,
            kind,
        };
        let mut col_cov = prev.components[g].col_cov.clone();
        let mut row_cov = prev.components[g].row_cov.clone();
        let mut last: Option<(Matrix, Matrix)> = None;
        for _ in 0..sweeps {
            let chol_v = Cholesky::new(&col_cov).ok_or_else(|| singular(CovarianceKind::Column))?;
            row_cov = update_row_cov(&centered, weights.clone(), &chol_v, r, c, size);
            let chol_u = Cholesky::new(&row_cov).ok_or_else(|| singular(CovarianceKind::Row))?;
            col_cov = update_col_cov(&centered, weights.clone(), &chol_u, r, c, size);
            if sweeps > 1 {
                let (u, v) = normalize_identifiability(&row_cov, &col_cov)
                    .map_err(|_| singular(CovarianceKind::Row))?;
                if let Some((pu, pv)) = &last {
                    let du = crate::linalg::relative_frobenius_error(&u, pu);
                    let dv = crate::linalg::relative_frobenius_error(&v, pv);
                    if du < UV_SWEEP_TOL && dv < UV_SWEEP_TOL {
                        break;
                    }
                }
                last = Some((u, v));
            }
        }
        let (row_cov, col_cov) = normalize_identifiability(&row_cov, &col_cov)
            .map_err(|_| singular(CovarianceKind::Row))?;
        if Cholesky::new(&row_cov).is_none() {
            return Err(singular(CovarianceKind::Row));
        }
        if Cholesky::new(&col_cov).is_none() {
            return Err(singular(CovarianceKind::Column));
        }
        components.push(ComponentParams {
            mean: Matrix::from_row_major(r, c, mean)?,
            row_cov,
            col_cov,
            weight: size / n,
        });
    }
    // Weights come from a partition of unity, but rounding can leave the sum
    // a few ulps away from 1.
    let total: f64 = components.iter().map(|p| p.weight).sum();
    for p in &mut components {
        p.weight /= total;
    }
    MixtureModel::new(components)
}

/// Closed-form parameter updates given responsibilities. The U/V alternation
/// starts from `prev`'s column covariances and runs up to `sweeps` times.
pub fn m_step(
    data: &DataSet,
    zhat: &Responsibilities,
    prev: &MixtureModel,
    sweeps: usize,
) -> Result<MixtureModel> {
    m_step_raw(data.observations(), zhat, prev, sweeps)
}

/// Alternates E and M steps from `model` until the relative change in
/// log-likelihood drops below `rel_tol` or `max_iters` E-steps have run.
fn iterate(
    obs: &[ObsMatrix],
    mut model: MixtureModel,
    max_iters: usize,
    rel_tol: f64,
    sweeps: usize,
) -> Result<FitResult> {
    let mut history = Vec::new();
    let mut prev: Option<f64> = None;
    for it in 1..=max_iters {
        let (zhat, ll) = e_step_raw(obs, &model)?;
        history.push(ll);
        let converged = prev.is_some_and(|p| (ll - p).abs() / (1.0 + ll.abs()) < rel_tol);
        if converged || it == max_iters {
            return Ok(FitResult {
                hard_labels: zhat.hard_labels(),
                model,
                zhat,
                loglik: ll,
                n_iters: it,
                converged,
                loglik_history: history,
                start: 0,
            });
        }
        prev = Some(ll);
        model = m_step_raw(obs, &zhat, &model, sweeps)?;
    }
    unreachable!("max_iters is at least 1")
}

fn run_start(obs: &[ObsMatrix], g: usize, cfg: &FitConfig, start: usize) -> Result<FitResult> {
    let mut rng = rng::split(cfg.seed, start as u64);
    let labels = kmeans_init(obs, g, &mut rng)?;
    let zhat = Responsibilities::one_hot(&labels, g)?;
    let (r, c) = obs[0].shape();
    let seeds = (0..g)
        .map(|_| ComponentParams {
            mean: Matrix::zeros(r, c),
            row_cov: Matrix::identity(r),
            col_cov: rand_corr(c, &mut rng),
            weight: 1.0 / g as f64,
        })
        .collect();
    let init = MixtureModel {
        rows: r,
        cols: c,
        components: seeds,
    };
    let model = m_step_raw(obs, &zhat, &init, cfg.inner_uv_sweeps)?;
    let mut fit = iterate(obs, model, cfg.max_iters, cfg.rel_tol, cfg.inner_uv_sweeps)?;
    fit.start = start;
    Ok(fit)
}

pub(crate) fn fit_raw(obs: &[ObsMatrix], g: usize, cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    if g == 0 {
        return Err(Error::InvalidValue(
            "number of clusters must be positive".into(),
        ));
    }
    let (r, c) = obs
        .first()
        .map(|x| x.shape())
        .ok_or_else(|| Error::InsufficientData("empty dataset".into()))?;
    let min_n = g * (r.max(c) + 1);
    if obs.len() <= min_n {
        return Err(Error::InsufficientData(format!(
            "{} observations; need more than {min_n} for {g} components of {r}x{c} matrices",
            obs.len()
        )));
    }
    let outcomes: Vec<Result<FitResult>> = (0..cfg.n_inits)
        .into_par_iter()
        .map(|s| run_start(obs, g, cfg, s))
        .collect();
    let mut best: Option<FitResult> = None;
    let mut diagnostics = Vec::new();
    for (s, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(f) => {
                if best.as_ref().is_none_or(|b| f.loglik > b.loglik) {
                    best = Some(f);
                }
            }
            Err(e) => diagnostics.push(format!("start {s}: {e}")),
        }
    }
    best.ok_or(Error::FitFailure { diagnostics })
}

/// Fits a G-component mixture from `cfg.n_inits` k-means starts and keeps the
/// one with the highest final log-likelihood (lowest start index on ties).
pub fn fit(data: &DataSet, g: usize, cfg: &FitConfig) -> Result<FitResult> {
    fit_raw(data.observations(), g, cfg)
}

pub(crate) fn refit_raw(
    obs: &[ObsMatrix],
    start: &MixtureModel,
    max_iters: usize,
    cfg: &FitConfig,
) -> Result<FitResult> {
    iterate(
        obs,
        start.clone(),
        max_iters,
        cfg.rel_tol,
        cfg.inner_uv_sweeps,
    )
}

/// EM started from an existing model instead of k-means.
pub fn refit_from(
    data: &DataSet,
    start: &MixtureModel,
    max_iters: usize,
    cfg: &FitConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    refit_raw(data.observations(), start, max_iters.max(1), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matnorm::{log_density, sample};
    use crate::rng::seeded;

    fn identity_component(mean: Matrix, weight: f64) -> ComponentParams {
        let (r, c) = mean.shape();
        ComponentParams::new(mean, Matrix::identity(r), Matrix::identity(c), weight).unwrap()
    }

    #[test]
    fn single_component_responsibilities_are_one() {
        let model = MixtureModel::new(vec![identity_component(Matrix::zeros(2, 2), 1.0)]).unwrap();
        let mut rng = seeded(5);
        let obs: Vec<_> = (0..10)
            .map(|_| sample(model.component(0), &mut rng).unwrap())
            .collect();
        let data = DataSet::from_observations(obs).unwrap();
        let z = e_step(&data, &model).unwrap();
        assert!((0..10).all(|i| z.get(i, 0) == 1.0));
    }

    #[test]
    fn equidistant_point_splits_evenly() {
        let a = identity_component(Matrix::from_rows(&[[1.0, 0.0]]), 0.5);
        let b = identity_component(Matrix::from_rows(&[[-1.0, 0.0]]), 0.5);
        let model = MixtureModel::new(vec![a, b]).unwrap();
        let x = ObsMatrix::new(1, 2, vec![0.0, 3.0]).unwrap();
        let data = DataSet::from_observations(vec![x]).unwrap();
        let z = e_step(&data, &model).unwrap();
        assert!((z.get(0, 0) - 0.5).abs() < 1e-12);
        assert!((z.get(0, 1) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn loglik_single_component_and_single_observation() {
        let p = ComponentParams::new(
            Matrix::from_rows(&[[0.5, -1.0]]),
            Matrix::identity(1),
            Matrix::from_rows(&[[2.0, 0.3], [0.3, 1.0]]),
            1.0,
        )
        .unwrap();
        let model = MixtureModel::new(vec![p.clone()]).unwrap();
        let obs = vec![
            ObsMatrix::new(1, 2, vec![0.0, 0.0]).unwrap(),
            ObsMatrix::new(1, 2, vec![1.0, -2.0]).unwrap(),
        ];
        let expected: f64 = obs.iter().map(|x| log_density(x, &p).unwrap()).sum();
        let data = DataSet::from_observations(obs.clone()).unwrap();
        assert!((loglik(&data, &model).unwrap() - expected).abs() < 1e-12);
        let labels = vec![1, 1];
        assert_eq!(
            simplified_loglik(&data, &model, &labels).unwrap(),
            loglik(&data, &model).unwrap()
        );

        let two = MixtureModel::new(vec![
            ComponentParams {
                weight: 0.3,
                ..p.clone()
            },
            ComponentParams {
                weight: 0.7,
                mean: Matrix::from_rows(&[[3.0, 3.0]]),
                ..p.clone()
            },
        ])
        .unwrap();
        let one = DataSet::from_observations(vec![obs[1].clone()]).unwrap();
        let direct = (0.3 * log_density(&obs[1], two.component(0)).unwrap().exp()
            + 0.7 * log_density(&obs[1], two.component(1)).unwrap().exp())
        .ln();
        assert!((loglik(&one, &two).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn m_step_rejects_tiny_components() {
        let model = MixtureModel::new(vec![
            identity_component(Matrix::zeros(1, 2), 0.5),
            identity_component(Matrix::zeros(1, 2), 0.5),
        ])
        .unwrap();
        let obs: Vec<_> = (0..6)
            .map(|i| ObsMatrix::new(1, 2, vec![i as f64, (i * i) as f64]).unwrap())
            .collect();
        let data = DataSet::from_observations(obs).unwrap();
        let z = Responsibilities::one_hot(&[1, 1, 1, 1, 1, 2], 2).unwrap();
        assert!(matches!(
            m_step(&data, &z, &model, 1),
            Err(Error::DegenerateComponent { component: 2, .. })
        ));
    }

    #[test]
    fn m_step_reduces_to_multivariate_mle_for_one_column() {
        let mut rng = seeded(11);
        let truth = ComponentParams::new(
            Matrix::from_rows(&[[1.0], [2.0], [-1.0]]),
            Matrix::from_rows(&[[2.0, 0.5, 0.1], [0.5, 1.0, 0.2], [0.1, 0.2, 0.7]]),
            Matrix::identity(1),
            1.0,
        )
        .unwrap();
        let obs: Vec<_> = (0..50).map(|_| sample(&truth, &mut rng).unwrap()).collect();
        let n = obs.len() as f64;
        let mut mean = [0.0; 3];
        for x in &obs {
            for k in 0..3 {
                mean[k] += x.as_slice()[k] / n;
            }
        }
        let mut cov = Matrix::zeros(3, 3);
        for x in &obs {
            for i in 0..3 {
                for j in 0..3 {
                    cov[(i, j)] += (x.as_slice()[i] - mean[i]) * (x.as_slice()[j] - mean[j]) / n;
                }
            }
        }
        let data = DataSet::from_observations(obs).unwrap();
        let prev = MixtureModel::new(vec![identity_component(Matrix::zeros(3, 1), 1.0)]).unwrap();
        let z = Responsibilities::one_hot(&vec![1; 50], 1).unwrap();
        let m = m_step(&data, &z, &prev, 1).unwrap();
        let p = m.component(0);
        for k in 0..3 {
            assert!((p.mean.as_slice()[k] - mean[k]).abs() < 1e-12);
        }
        // V is 1x1, so V ⊗ U = V·U is the sample covariance.
        let kron = p.row_cov.scaled(p.col_cov[(0, 0)]);
        for (a, b) in kron.as_slice().iter().zip(cov.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((p.row_cov.trace() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn fit_rejects_too_little_data() {
        let obs: Vec<_> = (0..6)
            .map(|i| ObsMatrix::new(1, 2, vec![i as f64, 1.0 / (i + 1) as f64]).unwrap())
            .collect();
        let data = DataSet::from_observations(obs).unwrap();
        assert!(matches!(
            fit(&data, 2, &FitConfig::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn hard_labels_follow_argmax() {
        let z = Responsibilities::from_row_major(3, 2, vec![0.2, 0.8, 0.5, 0.5, 0.9, 0.1]).unwrap();
        assert_eq!(z.hard_labels(), vec![2, 1, 1]);
        assert_eq!(z.without(1).hard_labels(), vec![2, 1]);
    }

    #[test]
    fn config_validation() {
        let bad = FitConfig {
            rel_tol: 0.0,
            ..FitConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = FitConfig {
            n_inits: 0,
            ..FitConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(FitConfig::default().validate().is_ok());
    }
}

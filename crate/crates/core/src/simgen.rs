//! Simulated matrix-variate datasets.
//!
//! Three families: a three-group 3×5 design whose outliers are matrices with
//! permuted entries ([`Family::Viroli`]), a two-group 2×4 design whose
//! outliers have one column replaced by Uniform(−15, 15) noise
//! ([`Family::Tomarchio`]), and the uncontaminated version of the latter
//! ([`Family::Clean`]).

use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::{Beta, Distribution, Uniform};

use crate::dataset::DataSet;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::matnorm::{sample_factored, ComponentParams, FactoredComponent, ObsMatrix};
use crate::rng::{seeded, SeededRng};

/// Random correlation matrix from the C-vine construction.
///
/// Partial correlations on tree level k (1-based) are drawn from
/// Beta(β, β) with β = 1 + (dim − 1 − k)/2 and mapped to (−1, 1), which makes
/// the result uniform over correlation matrices.
pub fn rand_corr<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Matrix {
    let mut corr = Matrix::identity(dim);
    if dim < 2 {
        return corr;
    }
    // partial[k][i]: partial correlation of (k, i) given 0..k
    let mut partial = vec![vec![0.0; dim]; dim];
    for k in 0..dim - 1 {
        let beta = 1.0 + (dim - 2 - k) as f64 / 2.0;
        let dist = Beta::new(beta, beta).expect("beta parameters are positive");
        for i in (k + 1)..dim {
            let p = 2.0 * dist.sample(rng) - 1.0;
            partial[k][i] = p;
            let mut rho = p;
            for m in (0..k).rev() {
                let a = partial[m][k];
                let b = partial[m][i];
                rho = a * b + rho * ((1.0 - a * a) * (1.0 - b * b)).sqrt();
            }
            corr[(k, i)] = rho;
            corr[(i, k)] = rho;
        }
    }
    corr
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Viroli,
    Tomarchio,
    Clean,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Viroli => "viroli",
            Family::Tomarchio => "tomarchio",
            Family::Clean => "clean",
        })
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "viroli" => Ok(Family::Viroli),
            "tomarchio" => Ok(Family::Tomarchio),
            "clean" => Ok(Family::Clean),
            other => Err(Error::InvalidValue(format!("unknown family {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub family: Family,
    pub seed: u64,
    pub n_override: Option<usize>,
    pub contamination_override: Option<usize>,
}

impl SimConfig {
    pub fn new(family: Family, seed: u64) -> Self {
        Self {
            family,
            seed,
            n_override: None,
            contamination_override: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_override == Some(0) || self.contamination_override == Some(0) {
            return Err(Error::InvalidValue("overrides must be positive".into()));
        }
        Ok(())
    }
}

/// A dataset with its generating truth. Outliers keep the cluster label of
/// the component they were drawn from before contamination.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataSet {
    pub data: DataSet,
    pub true_cluster: Vec<usize>,
    pub is_outlier: Vec<bool>,
}

impl LabeledDataSet {
    pub fn new(data: DataSet, true_cluster: Vec<usize>, is_outlier: Vec<bool>) -> Result<Self> {
        let data = data
            .with_clusters(true_cluster.clone())?
            .with_outliers(is_outlier.clone())?;
        Ok(Self {
            data,
            true_cluster,
            is_outlier,
        })
    }

    /// Requires both truth columns on the dataset.
    pub fn from_dataset(data: DataSet) -> Result<Self> {
        let true_cluster = data
            .clusters()
            .ok_or_else(|| Error::Format("dataset has no cluster labels".into()))?
            .to_vec();
        let is_outlier = data
            .outliers()
            .ok_or_else(|| Error::Format("dataset has no outlier flags".into()))?
            .to_vec();
        Ok(Self {
            data,
            true_cluster,
            is_outlier,
        })
    }

    pub fn n_outliers(&self) -> usize {
        self.is_outlier.iter().filter(|&&o| o).count()
    }

    pub fn outlier_ids(&self) -> Vec<String> {
        self.data
            .ids()
            .iter()
            .zip(&self.is_outlier)
            .filter(|(_, &o)| o)
            .map(|(id, _)| id.clone())
            .collect()
    }
}

pub fn generate(cfg: &SimConfig) -> Result<LabeledDataSet> {
    match cfg.family {
        Family::Viroli => gen_viroli(cfg),
        Family::Tomarchio | Family::Clean => gen_tomarchio(cfg),
    }
}

fn obs_id(i: usize) -> String {
    format!("obs{:04}", i + 1)
}

/// Draws 1-based component labels from the given proportions.
fn draw_labels(weights: &[f64], n: usize, rng: &mut SeededRng) -> Vec<usize> {
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (g, w) in weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    return g + 1;
                }
            }
            weights.len()
        })
        .collect()
}

fn labeled(
    obs: Vec<ObsMatrix>,
    clusters: Vec<usize>,
    outliers: Vec<bool>,
) -> Result<LabeledDataSet> {
    let ids = (0..obs.len()).map(obs_id).collect();
    LabeledDataSet::new(DataSet::new(ids, obs)?, clusters, outliers)
}

pub const VIROLI_N: usize = 300;
pub const VIROLI_OUTLIERS: usize = 15;
pub const VIROLI_WEIGHTS: [f64; 3] = [0.3, 0.4, 0.3];

/// Three groups of 3×5 matrices; means are zero except the first column,
/// which holds (a, b, 0) with (a, b) = (0.5, 0.5), (0, 0), (−0.5, 0.5).
/// Row and column covariances are fresh random correlation matrices.
/// Outliers have their entries permuted (never by the identity).
pub fn gen_viroli(cfg: &SimConfig) -> Result<LabeledDataSet> {
    let (mut obs, clusters, mut rng) = viroli_draws(cfg)?;
    let n = obs.len();
    let n_out = cfg.contamination_override.unwrap_or(VIROLI_OUTLIERS);
    if n_out > n {
        return Err(Error::InvalidValue(format!(
            "{n_out} outliers requested for n={n}"
        )));
    }
    let (r, c) = (obs[0].rows(), obs[0].cols());
    let mut outliers = vec![false; n];
    let mut chosen = index::sample(&mut rng, n, n_out).into_vec();
    chosen.sort_unstable();
    let len = r * c;
    for i in chosen {
        let mut perm: Vec<usize> = (0..len).collect();
        loop {
            perm.shuffle(&mut rng);
            if perm.iter().enumerate().any(|(k, &p)| k != p) {
                break;
            }
        }
        let src = obs[i].as_slice();
        let permuted = perm.iter().map(|&p| src[p]).collect();
        obs[i] = ObsMatrix::new(r, c, permuted)?;
        outliers[i] = true;
    }
    labeled(obs, clusters, outliers)
}

/// The draws [`gen_viroli`] starts from, before any permutation.
pub fn gen_viroli_uncontaminated(cfg: &SimConfig) -> Result<LabeledDataSet> {
    let (obs, clusters, _) = viroli_draws(cfg)?;
    let n = obs.len();
    labeled(obs, clusters, vec![false; n])
}

fn viroli_draws(cfg: &SimConfig) -> Result<(Vec<ObsMatrix>, Vec<usize>, SeededRng)> {
    if cfg.family != Family::Viroli {
        return Err(Error::InvalidValue(format!(
            "viroli design requested for {}",
            cfg.family
        )));
    }
    cfg.validate()?;
    let n = cfg.n_override.unwrap_or(VIROLI_N);
    let (r, c) = (3, 5);
    let mut rng = seeded(cfg.seed);
    let firsts = [(0.5, 0.5), (0.0, 0.0), (-0.5, 0.5)];
    let comps: Vec<FactoredComponent> = firsts
        .iter()
        .zip(VIROLI_WEIGHTS)
        .map(|(&(a, b), w)| {
            let mut mean = Matrix::zeros(r, c);
            mean[(0, 0)] = a;
            mean[(1, 0)] = b;
            let u = rand_corr(r, &mut rng);
            let v = rand_corr(c, &mut rng);
            FactoredComponent::new(&ComponentParams::new(mean, u, v, w)?)
        })
        .collect::<Result<_>>()?;
    let clusters = draw_labels(&VIROLI_WEIGHTS, n, &mut rng);
    let obs = clusters
        .iter()
        .map(|&g| sample_factored(&comps[g - 1], &mut rng))
        .collect();
    Ok((obs, clusters, rng))
}

pub const TOMARCHIO_N: usize = 200;
pub const TOMARCHIO_OUTLIERS: usize = 10;

/// The two generating components of the 2×4 design, weights 1/2 each.
pub fn tomarchio_components() -> [ComponentParams; 2] {
    let v = Matrix::from_rows(&[
        [1.00, 0.50, 0.25, 0.13],
        [0.50, 1.00, 0.50, 0.25],
        [0.25, 0.50, 1.00, 0.50],
        [0.13, 0.25, 0.50, 1.00],
    ]);
    [
        ComponentParams {
            mean: Matrix::from_rows(&[[-2.60, -1.10, -0.50, -0.20], [1.30, 0.60, 0.30, 0.10]]),
            row_cov: Matrix::from_rows(&[[2.00, 0.00], [0.00, 1.00]]),
            col_cov: v.clone(),
            weight: 0.5,
        },
        ComponentParams {
            mean: Matrix::from_rows(&[[1.50, 1.70, 1.90, 2.20], [-3.70, -2.70, -2.00, -1.50]]),
            row_cov: Matrix::from_rows(&[[1.70, 0.50], [0.50, 1.30]]),
            col_cov: v,
            weight: 0.5,
        },
    ]
}

/// Two equal-weight groups of 2×4 matrices. For [`Family::Tomarchio`], a
/// number of matrices get one random column replaced by Uniform(−15, 15)
/// draws; [`Family::Clean`] stops before that step, so both families share
/// the same underlying draws for a given seed.
pub fn gen_tomarchio(cfg: &SimConfig) -> Result<LabeledDataSet> {
    if cfg.family == Family::Viroli {
        return Err(Error::InvalidValue(
            "gen_tomarchio called for viroli".into(),
        ));
    }
    cfg.validate()?;
    let n = cfg.n_override.unwrap_or(TOMARCHIO_N);
    let mut rng = seeded(cfg.seed);
    let comps: Vec<FactoredComponent> = tomarchio_components()
        .iter()
        .map(FactoredComponent::new)
        .collect::<Result<_>>()?;
    let clusters = draw_labels(&[0.5, 0.5], n, &mut rng);
    let mut obs: Vec<ObsMatrix> = clusters
        .iter()
        .map(|&g| sample_factored(&comps[g - 1], &mut rng))
        .collect();
    let mut outliers = vec![false; n];

    if cfg.family == Family::Tomarchio {
        let n_out = cfg.contamination_override.unwrap_or(TOMARCHIO_OUTLIERS);
        if n_out > n {
            return Err(Error::InvalidValue(format!(
                "{n_out} outliers requested for n={n}"
            )));
        }
        let (r, c) = (2, 4);
        let noise = Uniform::new_inclusive(-15.0, 15.0).expect("valid range");
        let mut chosen = index::sample(&mut rng, n, n_out).into_vec();
        chosen.sort_unstable();
        for i in chosen {
            let col = rng.random_range(0..c);
            let mut x = obs[i].as_slice().to_vec();
            for row in 0..r {
                x[row * c + col] = noise.sample(&mut rng);
            }
            obs[i] = ObsMatrix::new(r, c, x)?;
            outliers[i] = true;
        }
    }
    labeled(obs, clusters, outliers)
}

//! Oracles shared by the integration tests. Nothing here calls into the
//! library's own factorizations.
#![allow(dead_code)]

use moclust::{ComponentParams, Matrix, ObsMatrix};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// Row index of entry (i, j) of an r×c matrix inside column-stacked vec().
fn vec_index(r: usize, i: usize, j: usize) -> usize {
    j * r + i
}

pub fn vec_of(x: &Matrix) -> DVector<f64> {
    let (r, c) = x.shape();
    let mut v = DVector::zeros(r * c);
    for i in 0..r {
        for j in 0..c {
            v[vec_index(r, i, j)] = x[(i, j)];
        }
    }
    v
}

/// V ⊗ U built entry by entry.
pub fn kronecker(v: &Matrix, u: &Matrix) -> DMatrix<f64> {
    let (r, c) = (u.rows(), v.rows());
    let mut k = DMatrix::zeros(r * c, r * c);
    for j in 0..c {
        for l in 0..c {
            for i in 0..r {
                for m in 0..r {
                    k[(vec_index(r, i, j), vec_index(r, m, l))] = v[(j, l)] * u[(i, m)];
                }
            }
        }
    }
    k
}

/// (log-density, squared Mahalanobis) of vec(X) under N(vec(M), V⊗U), using
/// an LU determinant and an explicit inverse.
pub fn brute_force(x: &Matrix, p: &ComponentParams) -> (f64, f64) {
    let sigma = kronecker(&p.col_cov, &p.row_cov);
    let d = vec_of(x) - vec_of(&p.mean);
    let dim = d.len() as f64;
    let lu = sigma.clone().lu();
    let det = lu.determinant();
    let inv = lu.try_inverse().expect("oracle covariance is invertible");
    let maha = (d.transpose() * inv * &d)[(0, 0)];
    let logdens = -0.5 * dim * (2.0 * std::f64::consts::PI).ln() - 0.5 * det.ln() - 0.5 * maha;
    (logdens, maha)
}

pub fn random_matrix<R: Rng>(r: usize, c: usize, scale: f64, rng: &mut R) -> Matrix {
    let data = (0..r * c)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Matrix::from_row_major(r, c, data).unwrap()
}

/// A·A′ + dim/2·I with Gaussian A.
pub fn random_spd<R: Rng>(dim: usize, rng: &mut R) -> Matrix {
    let a = random_matrix(dim, dim, 1.0, rng);
    let mut s = a.matmul(&a.transpose()).unwrap();
    for i in 0..dim {
        s[(i, i)] += 0.5 * dim as f64;
    }
    s.symmetrize();
    s
}

pub fn random_component<R: Rng>(r: usize, c: usize, weight: f64, rng: &mut R) -> ComponentParams {
    ComponentParams::new(
        random_matrix(r, c, 1.0, rng),
        random_spd(r, rng),
        random_spd(c, rng),
        weight,
    )
    .unwrap()
}

pub fn random_obs<R: Rng>(r: usize, c: usize, rng: &mut R) -> ObsMatrix {
    ObsMatrix::from_matrix(random_matrix(r, c, 1.5, rng)).unwrap()
}

/// Sample covariance of vec() over draws, denominator n.
pub fn vec_covariance(draws: &[ObsMatrix]) -> (DVector<f64>, DMatrix<f64>) {
    let n = draws.len() as f64;
    let vs: Vec<DVector<f64>> = draws.iter().map(|x| vec_of(x.matrix())).collect();
    let dim = vs[0].len();
    let mean = vs.iter().fold(DVector::zeros(dim), |acc, v| acc + v) / n;
    let mut cov = DMatrix::zeros(dim, dim);
    for v in &vs {
        let d = v - &mean;
        cov += &d * d.transpose();
    }
    (mean, cov / n)
}

pub fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

/// One-sample Kolmogorov–Smirnov test. Returns (D, asymptotic p-value).
pub fn ks_test(sample: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let sq = n.sqrt();
    let lambda = (sq + 0.12 + 0.11 / sq) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        p += 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
    }
    (d, p.clamp(0.0, 1.0))
}

/// Responsibilities and log-likelihood by direct exponentiation of
/// brute-force component densities (no max-subtraction).
pub fn brute_force_mixture(obs: &[ObsMatrix], comps: &[ComponentParams]) -> (Vec<Vec<f64>>, f64) {
    let mut z = Vec::new();
    let mut ll = 0.0;
    for x in obs {
        let terms: Vec<f64> = comps
            .iter()
            .map(|p| p.weight * brute_force(x.matrix(), p).0.exp())
            .collect();
        let total: f64 = terms.iter().sum();
        assert!(
            total > 0.0 && total.is_finite(),
            "oracle instance underflows"
        );
        ll += total.ln();
        z.push(terms.iter().map(|t| t / total).collect());
    }
    (z, ll)
}

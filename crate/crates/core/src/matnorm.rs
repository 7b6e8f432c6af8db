//! Matrix-variate normal distribution.
//!
//! `X ~ N_{r×c}(M, U, V)` with row covariance `U` (r×r) and column covariance
//! `V` (c×c); equivalently `vec(X) ~ N_{rc}(vec(M), V ⊗ U)`. Determinants and
//! quadratic forms go through Cholesky factors of `U` and `V`, so the rc×rc
//! Kronecker covariance is never built.

use std::f64::consts::PI;
use std::ops::Deref;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{CovarianceKind, Error, Result};
use crate::linalg::{Cholesky, Matrix};

/// One r×c observation. Entries are finite and stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ObsMatrix(Matrix);

impl ObsMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!(
                "observation must be at least 1x1, got {rows}x{cols}"
            )));
        }
        Self::from_matrix(Matrix::from_row_major(rows, cols, entries)?)
    }

    pub fn from_matrix(m: Matrix) -> Result<Self> {
        if m.rows() == 0 || m.cols() == 0 {
            return Err(Error::Dimension("empty observation".into()));
        }
        if !m.is_finite() {
            return Err(Error::InvalidValue(
                "observation has non-finite entries".into(),
            ));
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }
}

impl Deref for ObsMatrix {
    type Target = Matrix;

    fn deref(&self) -> &Matrix {
        &self.0
    }
}

/// Parameters of one mixture component.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentParams {
    pub mean: Matrix,
    pub row_cov: Matrix,
    pub col_cov: Matrix,
    pub weight: f64,
}

impl ComponentParams {
    pub fn new(mean: Matrix, row_cov: Matrix, col_cov: Matrix, weight: f64) -> Result<Self> {
        let p = Self {
            mean,
            row_cov,
            col_cov,
            weight,
        };
        p.check_shape()?;
        if !(weight > 0.0 && weight <= 1.0) {
            return Err(Error::InvalidValue(format!(
                "mixing weight {weight} outside (0, 1]"
            )));
        }
        Ok(p)
    }

    pub fn rows(&self) -> usize {
        self.mean.rows()
    }

    pub fn cols(&self) -> usize {
        self.mean.cols()
    }

    fn check_shape(&self) -> Result<()> {
        let (r, c) = self.mean.shape();
        if self.row_cov.shape() != (r, r) {
            return Err(Error::Dimension(format!(
                "row covariance is {:?}, expected {r}x{r}",
                self.row_cov.shape()
            )));
        }
        if self.col_cov.shape() != (c, c) {
            return Err(Error::Dimension(format!(
                "column covariance is {:?}, expected {c}x{c}",
                self.col_cov.shape()
            )));
        }
        Ok(())
    }

    /// Returns a copy with `trace(U) = r`.
    pub fn normalized(&self) -> Result<Self> {
        let (u, v) = normalize_identifiability(&self.row_cov, &self.col_cov)?;
        Ok(Self {
            mean: self.mean.clone(),
            row_cov: u,
            col_cov: v,
            weight: self.weight,
        })
    }
}

/// A component with its covariances factored, ready for repeated evaluation.
#[derive(Debug, Clone)]
pub struct FactoredComponent {
    rows: usize,
    cols: usize,
    mean: Vec<f64>,
    chol_u: Cholesky,
    chol_v: Cholesky,
    log_det_u: f64,
    log_det_v: f64,
    log_weight: f64,
}

impl FactoredComponent {
    pub fn new(p: &ComponentParams) -> Result<Self> {
        p.check_shape()?;
        let chol_u =
            Cholesky::new(&p.row_cov).ok_or(Error::NotPositiveDefinite(CovarianceKind::Row))?;
        let chol_v =
            Cholesky::new(&p.col_cov).ok_or(Error::NotPositiveDefinite(CovarianceKind::Column))?;
        Ok(Self {
            rows: p.rows(),
            cols: p.cols(),
            mean: p.mean.as_slice().to_vec(),
            log_det_u: chol_u.log_det(),
            log_det_v: chol_v.log_det(),
            chol_u,
            chol_v,
            log_weight: p.weight.ln(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn log_det_u(&self) -> f64 {
        self.log_det_u
    }

    pub fn log_det_v(&self) -> f64 {
        self.log_det_v
    }

    pub fn log_weight(&self) -> f64 {
        self.log_weight
    }

    pub fn chol_u(&self) -> &Cholesky {
        &self.chol_u
    }

    pub fn chol_v(&self) -> &Cholesky {
        &self.chol_v
    }

    /// −(rc/2)log 2π − (r/2)log|V| − (c/2)log|U|.
    pub fn log_normalizer(&self) -> f64 {
        let (r, c) = (self.rows as f64, self.cols as f64);
        -0.5 * r * c * (2.0 * PI).ln() - 0.5 * r * self.log_det_v - 0.5 * c * self.log_det_u
    }

    /// Writes `L_U⁻¹ (X − M) L_V⁻ᵀ` into `scratch` (row-major, r·c long).
    /// Its squared Frobenius norm is the Mahalanobis distance.
    #[inline]
    pub(crate) fn whiten(&self, x: &[f64], scratch: &mut [f64]) {
        let (r, c) = (self.rows, self.cols);
        debug_assert_eq!(x.len(), r * c);
        for ((s, &xi), &mi) in scratch.iter_mut().zip(x).zip(&self.mean) {
            *s = xi - mi;
        }
        for j in 0..c {
            self.chol_u.solve_lower_strided(scratch, j, c);
        }
        for i in 0..r {
            self.chol_v
                .solve_lower_in_place(&mut scratch[i * c..(i + 1) * c]);
        }
    }

    #[inline]
    pub(crate) fn mahalanobis_raw(&self, x: &[f64], scratch: &mut [f64]) -> f64 {
        self.whiten(x, scratch);
        scratch.iter().map(|v| v * v).sum()
    }

    #[inline]
    pub(crate) fn log_density_raw(&self, x: &[f64], scratch: &mut [f64]) -> f64 {
        self.log_normalizer() - 0.5 * self.mahalanobis_raw(x, scratch)
    }

    fn check_obs(&self, x: &ObsMatrix) -> Result<()> {
        if x.shape() != (self.rows, self.cols) {
            return Err(Error::Dimension(format!(
                "observation is {:?}, component is {}x{}",
                x.shape(),
                self.rows,
                self.cols
            )));
        }
        Ok(())
    }

    pub fn mahalanobis(&self, x: &ObsMatrix) -> Result<f64> {
        self.check_obs(x)?;
        let mut scratch = vec![0.0; self.rows * self.cols];
        Ok(self.mahalanobis_raw(x.as_slice(), &mut scratch))
    }

    pub fn log_density(&self, x: &ObsMatrix) -> Result<f64> {
        self.check_obs(x)?;
        let mut scratch = vec![0.0; self.rows * self.cols];
        Ok(self.log_density_raw(x.as_slice(), &mut scratch))
    }
}

/// log φ_{r×c}(X | M, V, U).
pub fn log_density(x: &ObsMatrix, p: &ComponentParams) -> Result<f64> {
    FactoredComponent::new(p)?.log_density(x)
}

/// tr{U⁻¹ (X − M) V⁻¹ (X − M)'}.
pub fn mahalanobis(x: &ObsMatrix, p: &ComponentParams) -> Result<f64> {
    FactoredComponent::new(p)?.mahalanobis(x)
}

/// Draws `M + L_U Z L_V'` with `Z` an r×c matrix of iid standard normals.
pub fn sample<R: Rng + ?Sized>(p: &ComponentParams, rng: &mut R) -> Result<ObsMatrix> {
    let f = FactoredComponent::new(p)?;
    Ok(sample_factored(&f, rng))
}

pub fn sample_factored<R: Rng + ?Sized>(f: &FactoredComponent, rng: &mut R) -> ObsMatrix {
    let (r, c) = (f.rows, f.cols);
    let z: Vec<f64> = (0..r * c).map(|_| rng.sample(StandardNormal)).collect();
    let lu = f.chol_u.lower();
    let lv = f.chol_v.lower();
    // w = L_U z
    let mut w = vec![0.0; r * c];
    for i in 0..r {
        for k in 0..=i {
            let l = lu[i * r + k];
            for j in 0..c {
                w[i * c + j] += l * z[k * c + j];
            }
        }
    }
    // x = M + w L_V'
    let mut x = f.mean.clone();
    for i in 0..r {
        for j in 0..c {
            let mut s = 0.0;
            for k in 0..=j {
                s += w[i * c + k] * lv[j * c + k];
            }
            x[i * c + j] += s;
        }
    }
    ObsMatrix(Matrix::from_row_major(r, c, x).expect("shape is r x c"))
}

/// Rescales `(U, V)` to `(aU, V/a)` with `a = r / trace(U)`. `V ⊗ U` is
/// unchanged.
pub fn normalize_identifiability(u: &Matrix, v: &Matrix) -> Result<(Matrix, Matrix)> {
    if !u.is_square() || !v.is_square() {
        return Err(Error::Dimension("covariances must be square".into()));
    }
    let tr = u.trace();
    if !(tr > 0.0) || !tr.is_finite() {
        return Err(Error::NotPositiveDefinite(CovarianceKind::Row));
    }
    let a = u.rows() as f64 / tr;
    if a == 1.0 {
        return Ok((u.clone(), v.clone()));
    }
    Ok((u.scaled(a), v.scaled(1.0 / a)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn params(mean: Matrix, u: Matrix, v: Matrix) -> ComponentParams {
        ComponentParams::new(mean, u, v, 1.0).unwrap()
    }

    #[test]
    fn density_at_mean_with_identity_covariances() {
        let p = params(
            Matrix::zeros(2, 2),
            Matrix::identity(2),
            Matrix::identity(2),
        );
        let x = ObsMatrix::new(2, 2, vec![0.0; 4]).unwrap();
        let ld = log_density(&x, &p).unwrap();
        assert!((ld - (-2.0 * (2.0 * PI).ln())).abs() < 1e-12);
        assert!((ld - -3.6757541).abs() < 1e-7);
    }

    #[test]
    fn scalar_standard_normal() {
        let p = params(
            Matrix::zeros(1, 1),
            Matrix::identity(1),
            Matrix::identity(1),
        );
        let x = ObsMatrix::new(1, 1, vec![0.0]).unwrap();
        assert!((log_density(&x, &p).unwrap() - -0.9189385).abs() < 1e-7);
    }

    #[test]
    fn mahalanobis_identity_is_squared_frobenius() {
        let p = params(
            Matrix::zeros(2, 2),
            Matrix::identity(2),
            Matrix::identity(2),
        );
        let x = ObsMatrix::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(mahalanobis(&x, &p).unwrap(), 2.0);
    }

    #[test]
    fn mahalanobis_zero_at_mean() {
        let m = Matrix::from_rows(&[[1.0, -2.0, 0.5], [0.3, 0.0, 4.0]]);
        let u = Matrix::from_rows(&[[2.0, 0.4], [0.4, 1.0]]);
        let v = Matrix::from_rows(&[[1.0, 0.5, 0.25], [0.5, 1.0, 0.5], [0.25, 0.5, 1.0]]);
        let p = params(m.clone(), u, v);
        let x = ObsMatrix::from_matrix(m).unwrap();
        assert_eq!(mahalanobis(&x, &p).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let p = params(
            Matrix::zeros(2, 2),
            Matrix::identity(2),
            Matrix::identity(2),
        );
        let x = ObsMatrix::new(2, 3, vec![0.0; 6]).unwrap();
        assert!(matches!(log_density(&x, &p), Err(Error::Dimension(_))));
        assert!(matches!(mahalanobis(&x, &p), Err(Error::Dimension(_))));
    }

    #[test]
    fn non_positive_definite_is_reported() {
        let bad = Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]);
        let p = ComponentParams {
            mean: Matrix::zeros(2, 2),
            row_cov: bad.clone(),
            col_cov: Matrix::identity(2),
            weight: 1.0,
        };
        let x = ObsMatrix::new(2, 2, vec![0.0; 4]).unwrap();
        assert!(matches!(
            log_density(&x, &p),
            Err(Error::NotPositiveDefinite(CovarianceKind::Row))
        ));
        let p = ComponentParams {
            row_cov: Matrix::identity(2),
            col_cov: bad,
            ..p
        };
        assert!(matches!(
            sample(&p, &mut seeded(1)),
            Err(Error::NotPositiveDefinite(CovarianceKind::Column))
        ));
    }

    #[test]
    fn non_finite_observation_rejected() {
        assert!(ObsMatrix::new(1, 2, vec![1.0, f64::INFINITY]).is_err());
        assert!(ObsMatrix::new(0, 2, vec![]).is_err());
        assert!(ObsMatrix::new(2, 2, vec![1.0]).is_err());
    }

    #[test]
    fn identity_covariance_sampling_is_plain_normal_draws() {
        let p = params(
            Matrix::zeros(2, 3),
            Matrix::identity(2),
            Matrix::identity(3),
        );
        let x = sample(&p, &mut seeded(42)).unwrap();
        let mut rng = seeded(42);
        let expected: Vec<f64> = (0..6).map(|_| rng.sample(StandardNormal)).collect();
        assert_eq!(x.as_slice(), expected.as_slice());
    }

    #[test]
    fn normalization_examples() {
        let (u, v) =
            normalize_identifiability(&Matrix::identity(2).scaled(2.0), &Matrix::identity(3))
                .unwrap();
        assert_eq!(u, Matrix::identity(2));
        assert_eq!(v, Matrix::identity(3).scaled(2.0));

        let u0 = Matrix::from_rows(&[[1.5, 0.2], [0.2, 0.5]]);
        let v0 = Matrix::from_rows(&[[3.0]]);
        let (u1, v1) = normalize_identifiability(&u0, &v0).unwrap();
        assert_eq!(u1, u0);
        assert_eq!(v1, v0);
    }

    #[test]
    fn normalization_keeps_trace_equal_to_rows() {
        let u = Matrix::from_rows(&[[4.0, 1.0, 0.0], [1.0, 3.0, 0.2], [0.0, 0.2, 7.5]]);
        let v = Matrix::from_rows(&[[0.3, 0.1], [0.1, 0.4]]);
        let (u1, _) = normalize_identifiability(&u, &v).unwrap();
        assert!((u1.trace() - 3.0).abs() <= 3.0 * 1e-12);
    }
}

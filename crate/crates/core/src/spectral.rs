//! Training data with its full singular value decomposition, and the problem
//! parameters (beta_*, beta_0, noise and prior variances, ridge, test covariance).

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::linalg::thin_svd;

/// Default relative tolerance for the numerical rank of X.
pub const DEFAULT_RANK_TOL: f64 = 1e-12;

/// X = U S V^T with U (n x n) and V (p x p) orthogonal.
///
/// Singular values are sorted non-increasing; those at or below
/// `rank_tol * s_max * max(n, p)` are set to zero.
#[derive(Debug, Clone)]
pub struct SpectralData {
    x: DMatrix<f64>,
    y: DVector<f64>,
    u: DMatrix<f64>,
    singular: DVector<f64>,
    v: DMatrix<f64>,
    lambda: DVector<f64>,
    rank: usize,
    rank_tol: f64,
}

fn check_finite_matrix(what: &str, m: &DMatrix<f64>) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation(format!("{what} has non-finite entries")));
    }
    Ok(())
}

fn check_finite_vector(what: &str, v: &DVector<f64>) -> Result<()> {
    if v.iter().any(|e| !e.is_finite()) {
        return Err(Error::Validation(format!("{what} has non-finite entries")));
    }
    Ok(())
}

/// Extends orthonormal columns to a square orthogonal matrix, keeping the
/// given columns unchanged.
fn complete_basis(thin: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, r) = thin.shape();
    if r == rows {
        return thin.clone();
    }
    if r == 0 {
        return DMatrix::identity(rows, rows);
    }
    // the r Householder reflectors of thin = QR, applied to the identity,
    // give a full orthogonal Q whose first r columns span the same space
    let mut q = DMatrix::identity(rows, rows);
    thin.clone().qr().q_tr_mul(&mut q);
    let mut q = q.transpose();
    q.columns_mut(0, r).copy_from(thin);
    q
}

impl SpectralData {
    pub fn decompose(x: DMatrix<f64>, y: DVector<f64>, rank_tol: f64) -> Result<Self> {
        let (n, p) = x.shape();
        if n == 0 || p == 0 {
            return Err(Error::Validation(format!("X must be non-empty, got {n} x {p}")));
        }
        check_dim("y", y.len(), n)?;
        check_finite_matrix("X", &x)?;
        check_finite_vector("y", &y)?;
        if !(rank_tol.is_finite() && rank_tol >= 0.0) {
            return Err(Error::Validation(format!("rank_tol must be >= 0, got {rank_tol}")));
        }

        let svd = thin_svd(&x)?;
        let mut singular = svd.s;

        let s_max = singular.iter().copied().fold(0.0, f64::max);
        let cutoff = rank_tol * s_max * n.max(p) as f64;
        let rank = singular.iter().filter(|&&s| s > cutoff && s > 0.0).count();
        for s in singular.iter_mut().skip(rank) {
            *s = 0.0;
        }

        let mut lambda = DVector::zeros(p);
        for j in 0..rank {
            lambda[j] = singular[j] * singular[j];
        }

        Ok(SpectralData {
            u: complete_basis(&svd.u.columns(0, rank).into_owned()),
            v: complete_basis(&svd.v.columns(0, rank).into_owned()),
            x,
            y,
            singular,
            lambda,
            rank,
            rank_tol,
        })
    }

    /// Same design matrix and decomposition with a new response vector.
    pub fn with_response(&self, y: DVector<f64>) -> Result<Self> {
        check_dim("y", y.len(), self.n())?;
        check_finite_vector("y", &y)?;
        Ok(SpectralData { y, ..self.clone() })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    /// The min(n, p) diagonal entries of S.
    pub fn singular_values(&self) -> &DVector<f64> {
        &self.singular
    }

    /// Eigenvalues of X^T X, length p, zero beyond the rank.
    pub fn lambda(&self) -> &DVector<f64> {
        &self.lambda
    }

    /// Eigenvalues of the sample covariance, Lambda_j / n.
    pub fn eig_sigma_hat(&self) -> Vec<f64> {
        let n = self.n() as f64;
        self.lambda.iter().map(|l| l / n).collect()
    }

    pub fn lambda_max_sigma_hat(&self) -> f64 {
        self.lambda[0] / self.n() as f64
    }

    /// X^T X / n.
    pub fn sample_covariance(&self) -> DMatrix<f64> {
        self.x.tr_mul(&self.x) / self.n() as f64
    }

    /// The dense n x p matrix S.
    pub fn s_matrix(&self) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.n(), self.p());
        for (j, &v) in self.singular.iter().enumerate() {
            s[(j, j)] = v;
        }
        s
    }

    pub fn to_eigenbasis(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("vector", v.len(), self.p())?;
        Ok(self.v.tr_mul(v))
    }

    pub fn from_eigenbasis(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("vector", v.len(), self.p())?;
        Ok(&self.v * v)
    }

    /// U^T eps.
    pub fn residual_rotate(&self, eps: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("residual", eps.len(), self.n())?;
        Ok(self.u.tr_mul(eps))
    }

    pub fn residual_unrotate(&self, eps: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("residual", eps.len(), self.n())?;
        Ok(&self.u * eps)
    }

    /// S^T w for an n-vector w already in the U basis; zero beyond the rank.
    pub fn s_transpose_times(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("rotated vector", w.len(), self.n())?;
        let mut out = DVector::zeros(self.p());
        for j in 0..self.rank {
            out[j] = self.singular[j] * w[j];
        }
        Ok(out)
    }

    /// V^T Sigma V for a p x p matrix Sigma.
    pub fn rotate_covariance(&self, sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_dim("covariance rows", sigma.nrows(), self.p())?;
        check_dim("covariance cols", sigma.ncols(), self.p())?;
        Ok(self.v.tr_mul(&(sigma * &self.v)))
    }

    /// Frobenius norm of the off-diagonal part of V^T Sigma V.
    pub fn offdiagonal_norm(&self, sigma: &DMatrix<f64>) -> Result<f64> {
        let m = self.rotate_covariance(sigma)?;
        let p = m.nrows();
        let mut acc = 0.0;
        for j in 0..p {
            for i in (0..p).filter(|&i| i != j) {
                acc += m[(i, j)] * m[(i, j)];
            }
        }
        Ok(acc.sqrt())
    }

    /// Whether Sigma is diagonal in the eigenbasis of X^T X up to `tol`
    /// (Frobenius norm of the off-diagonal part).
    pub fn simultaneously_diagonalizable(&self, sigma: &DMatrix<f64>, tol: f64) -> Result<bool> {
        Ok(self.offdiagonal_norm(sigma)? <= tol)
    }
}

/// Problem parameters shared by the trajectory and risk computations.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub beta_star: DVector<f64>,
    pub beta0: DVector<f64>,
    /// Noise variance tau^2.
    pub tau2: f64,
    /// Prior variance sigma^2 of the entries of beta_0 - beta_*.
    pub sigma2: f64,
    /// Ridge parameter.
    pub lambda: f64,
    pub sigma_test: DMatrix<f64>,
}

const PSD_TOL: f64 = 1e-10;

impl ProblemSpec {
    pub fn new(
        beta_star: DVector<f64>,
        beta0: DVector<f64>,
        tau2: f64,
        sigma2: f64,
        lambda: f64,
        sigma_test: DMatrix<f64>,
    ) -> Result<Self> {
        let spec = ProblemSpec {
            beta_star,
            beta0,
            tau2,
            sigma2,
            lambda,
            sigma_test,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// beta_* given, beta_0 = 0, identity test covariance, no ridge.
    pub fn isotropic(beta_star: DVector<f64>, tau2: f64) -> Result<Self> {
        let p = beta_star.len();
        ProblemSpec::new(beta_star, DVector::zeros(p), tau2, 0.0, 0.0, DMatrix::identity(p, p))
    }

    pub fn p(&self) -> usize {
        self.beta_star.len()
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.p();
        check_dim("beta0", self.beta0.len(), p)?;
        check_dim("test covariance rows", self.sigma_test.nrows(), p)?;
        check_dim("test covariance cols", self.sigma_test.ncols(), p)?;
        check_finite_vector("beta_star", &self.beta_star)?;
        check_finite_vector("beta0", &self.beta0)?;
        check_finite_matrix("test covariance", &self.sigma_test)?;
        for (name, v) in [("tau2", self.tau2), ("sigma2", self.sigma2), ("lambda", self.lambda)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Validation(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        let scale = self.sigma_test.norm().max(1.0);
        let asym = (&self.sigma_test - self.sigma_test.transpose()).norm();
        if asym > PSD_TOL * scale {
            return Err(Error::Validation(format!(
                "test covariance is not symmetric (asymmetry {asym:e})"
            )));
        }
        if p > 0 {
            let min_eig = self.sigma_test.clone().symmetric_eigenvalues().min();
            if min_eig < -PSD_TOL * scale {
                return Err(Error::Validation(format!(
                    "test covariance is not PSD (smallest eigenvalue {min_eig:e})"
                )));
            }
        }
        Ok(())
    }

    /// Checks that dimensions match the training data.
    pub fn check_against(&self, sd: &SpectralData) -> Result<()> {
        check_dim("beta_star", self.p(), sd.p())
    }
}

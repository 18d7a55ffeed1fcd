//! Early stopping as generalized ridge regression.
//!
//! Stopping unregularized gradient descent from zero at step T gives the
//! minimum-norm minimizer of (1/2n)|y - X beta|^2 + (1/2)|D beta|^2 with
//! D^T D = V diag(Lambda Phi(T) (I - Phi(T))^+ / n) V^T. Conversely one step
//! with per-direction rates n / (lambda n + Lambda_j) lands on ridge.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::thin_svd;
use crate::phi::PhiDiagonal;
use crate::schedule::Schedule;
use crate::spectral::{ProblemSpec, SpectralData};
use crate::trajectory::closed_form_beta;

/// Relative tolerance used by [`verify_equivalence`].
pub const EQUIVALENCE_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct GeneralizedRidge {
    /// The penalty matrix; for a stopping time this is diag(sqrt|core|) V^T.
    pub d: DMatrix<f64>,
    /// Diagonal of V^T D^T D V when built from a stopping time (signed:
    /// negative entries come from Phi_j > 1). Empty for a user-given D.
    pub core: DVector<f64>,
    /// Stopping iteration encoded by `d` (0 for a user-given D).
    pub t: usize,
    /// Set when some Phi(T)_j > 1, i.e. the true D would be complex.
    pub complex_flag: bool,
}

impl GeneralizedRidge {
    pub fn from_matrix(d: DMatrix<f64>) -> Self {
        GeneralizedRidge {
            d,
            core: DVector::zeros(0),
            t: 0,
            complex_flag: false,
        }
    }
}

/// Penalty matrix reproducing the unregularized run stopped at `t`.
pub fn ridge_matrix_from_stop(sd: &SpectralData, schedule: &Schedule, t: usize) -> Result<GeneralizedRidge> {
    let diag = PhiDiagonal::at_step(schedule, 0.0, &sd.eig_sigma_hat(), t)?;
    let (phi, gaps) = (diag.values(), diag.gaps());
    let n = sd.n() as f64;
    let lam = sd.lambda();
    let core = DVector::from_fn(sd.p(), |j, _| {
        if j >= sd.rank() || gaps[j] == 0.0 {
            0.0
        } else {
            lam[j] * phi[j] / (n * gaps[j])
        }
    });
    let complex_flag = core.iter().any(|&c| c < 0.0);
    let root = DMatrix::from_diagonal(&core.map(|c| c.abs().sqrt()));
    Ok(GeneralizedRidge {
        d: root * sd.v().transpose(),
        core,
        t,
        complex_flag,
    })
}

/// (X^T X + n D^T D)^+ X^T y, computed as the minimum-norm least-squares
/// solution of [X; sqrt(n) D] beta = [y; 0] so that the conditioning is
/// that of the stacked matrix rather than its square.
pub fn gen_ridge_min_norm(sd: &SpectralData, ridge: &GeneralizedRidge) -> Result<DVector<f64>> {
    if ridge.complex_flag {
        return Err(Error::Unsupported(
            "penalty matrix is complex (Phi_j > 1 for some direction)".into(),
        ));
    }
    if ridge.d.ncols() != sd.p() {
        return Err(Error::Validation(format!(
            "penalty matrix has {} columns, expected {}",
            ridge.d.ncols(),
            sd.p()
        )));
    }
    let (n, p, m) = (sd.n(), sd.p(), ridge.d.nrows());
    let mut a = DMatrix::zeros(n + m, p);
    a.rows_mut(0, n).copy_from(sd.x());
    a.rows_mut(n, m).copy_from(&(&ridge.d * (n as f64).sqrt()));
    let mut rhs = DVector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(sd.y());

    let svd = thin_svd(&a)?;
    let cutoff = sd.rank_tol() * svd.s.max() * (n + m).max(p) as f64;
    Ok(svd.solve(&rhs, cutoff))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub max_rel_err: f64,
    pub pass: bool,
}

/// Compares the stopped iterate with the generalized ridge solution.
pub fn verify_equivalence(
    sd: &SpectralData,
    spec: &ProblemSpec,
    schedule: &Schedule,
    t: usize,
) -> Result<EquivalenceReport> {
    if spec.lambda != 0.0 {
        return Err(Error::Validation(format!(
            "equivalence needs lambda = 0, got {}",
            spec.lambda
        )));
    }
    if spec.beta0.iter().any(|&b| b != 0.0) {
        return Err(Error::Validation("equivalence needs beta0 = 0".into()));
    }
    if t == 0 {
        return Err(Error::Validation("equivalence needs T >= 1".into()));
    }
    let ridge = ridge_matrix_from_stop(sd, schedule, t)?;
    if ridge.complex_flag {
        return Err(Error::Validation(format!(
            "Phi(T)_j > 1 for some direction at T = {t}; the penalty matrix is complex"
        )));
    }
    let beta_t = closed_form_beta(sd, spec, schedule, t)?.beta;
    let beta_d = gen_ridge_min_norm(sd, &ridge)?;
    let denom = beta_t.amax().max(f64::MIN_POSITIVE);
    let max_rel_err = (&beta_t - &beta_d).amax() / denom;
    Ok(EquivalenceReport {
        max_rel_err,
        pass: max_rel_err <= EQUIVALENCE_TOL,
    })
}

/// One step from zero with rate n / (lambda n + Lambda_j) along direction j.
pub fn one_step_ridge(sd: &SpectralData, lambda: f64) -> Result<DVector<f64>> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::Validation(format!("lambda must be >= 0, got {lambda}")));
    }
    let n = sd.n() as f64;
    let neg_grad = sd.x().tr_mul(sd.y()) / n;
    let g = sd.to_eigenbasis(&neg_grad)?;
    let lam = sd.lambda();
    let step = DVector::from_fn(sd.p(), |j, _| {
        let d = lambda * n + lam[j];
        if d > 0.0 {
            n / d * g[j]
        } else {
            0.0
        }
    });
    sd.from_eigenbasis(&step)
}

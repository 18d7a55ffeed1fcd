//! Gradient-descent iterates for (ridge) least squares: the literal
//! iteration and its closed form in the eigenbasis of X^T X.

use nalgebra::DVector;

use crate::error::{check_dim, Error, Result};
use crate::phi::PhiDiagonal;
use crate::schedule::Schedule;
use crate::spectral::{ProblemSpec, SpectralData};

/// Relative tolerance between the two closed-form routes.
pub const CLOSED_FORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub k: usize,
    pub beta: DVector<f64>,
    /// V^T (beta - beta_*)
    pub beta_tilde_err: DVector<f64>,
}

impl TrajectoryPoint {
    fn new(sd: &SpectralData, spec: &ProblemSpec, k: usize, beta: DVector<f64>) -> Self {
        let beta_tilde_err = sd.v().tr_mul(&(&beta - &spec.beta_star));
        TrajectoryPoint {
            k,
            beta,
            beta_tilde_err,
        }
    }
}

/// beta - (eta/n) X^T (X beta - y) - eta lambda beta
pub fn gd_step(sd: &SpectralData, spec: &ProblemSpec, beta: &DVector<f64>, eta: f64) -> Result<DVector<f64>> {
    check_dim("beta", beta.len(), sd.p())?;
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::Domain(format!("learning rate must be > 0, got {eta}")));
    }
    let x = sd.x();
    let residual = x * beta - sd.y();
    let grad = x.tr_mul(&residual) / sd.n() as f64;
    Ok(beta - grad * eta - beta * (eta * spec.lambda))
}

/// All iterates beta_0 .. beta_t.
pub fn gd_run(sd: &SpectralData, spec: &ProblemSpec, schedule: &Schedule, t: usize) -> Result<Vec<TrajectoryPoint>> {
    spec.check_against(sd)?;
    let mut out = Vec::with_capacity(t + 1);
    let mut beta = spec.beta0.clone();
    out.push(TrajectoryPoint::new(sd, spec, 0, beta.clone()));
    for k in 1..=t {
        beta = gd_step(sd, spec, &beta, schedule.eta_at(k)?)?;
        out.push(TrajectoryPoint::new(sd, spec, k, beta.clone()));
    }
    Ok(out)
}

/// beta_t only, without keeping intermediate iterates.
pub fn gd_final(sd: &SpectralData, spec: &ProblemSpec, schedule: &Schedule, t: usize) -> Result<TrajectoryPoint> {
    spec.check_against(sd)?;
    let mut beta = spec.beta0.clone();
    for k in 1..=t {
        beta = gd_step(sd, spec, &beta, schedule.eta_at(k)?)?;
    }
    Ok(TrajectoryPoint::new(sd, spec, t, beta))
}

fn pinv_entry(d: f64) -> f64 {
    if d > 0.0 {
        1.0 / d
    } else {
        0.0
    }
}

/// (lambda n + Lambda)^+ S^T U^T y in the eigenbasis.
pub fn min_norm_tilde(sd: &SpectralData, lambda: f64) -> DVector<f64> {
    let uty = sd.u().tr_mul(sd.y());
    let rhs = sd.s_transpose_times(&uty).expect("U^T y has length n");
    let ln = lambda * sd.n() as f64;
    DVector::from_iterator(
        sd.p(),
        rhs.iter().zip(sd.lambda().iter()).map(|(r, l)| r * pinv_entry(ln + l)),
    )
}

/// (lambda n I + X^T X)^+ X^T y, the limit of every convergent run.
pub fn convergence_limit(sd: &SpectralData, spec: &ProblemSpec) -> DVector<f64> {
    sd.v() * min_norm_tilde(sd, spec.lambda)
}

/// V Phi V^T beta_0 + (I - V Phi V^T) w for a given Phi diagonal, w the
/// limit; returned in the eigenbasis.
pub fn beta_tilde_from_phi(sd: &SpectralData, spec: &ProblemSpec, phi: &PhiDiagonal) -> Result<DVector<f64>> {
    check_dim("phi diagonal", phi.len(), sd.p())?;
    let (values, gaps) = (phi.values(), phi.gaps());
    let b0 = sd.to_eigenbasis(&spec.beta0)?;
    let w = min_norm_tilde(sd, spec.lambda);
    Ok(DVector::from_fn(sd.p(), |j, _| values[j] * b0[j] + gaps[j] * w[j]))
}

/// Error form: Phi (b0~ - b*~) + (lambda n + Lambda)^+ (I - Phi)(S^T eps_check - lambda n b*~),
/// with eps_check = U^T eps the rotated noise.
pub fn error_tilde_from_phi(
    sd: &SpectralData,
    spec: &ProblemSpec,
    phi: &PhiDiagonal,
    eps_check: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_dim("phi diagonal", phi.len(), sd.p())?;
    let (values, gaps) = (phi.values(), phi.gaps());
    let b0 = sd.to_eigenbasis(&spec.beta0)?;
    let bs = sd.to_eigenbasis(&spec.beta_star)?;
    let st_eps = sd.s_transpose_times(eps_check)?;
    let ln = spec.lambda * sd.n() as f64;
    let lam = sd.lambda();
    Ok(DVector::from_fn(sd.p(), |j, _| {
        values[j] * (b0[j] - bs[j]) + pinv_entry(ln + lam[j]) * gaps[j] * (st_eps[j] - ln * bs[j])
    }))
}

/// beta_k from the closed form, computed both as a combination of beta_0 and
/// the limit and through the error recursion; the two must agree.
pub fn closed_form_beta(
    sd: &SpectralData,
    spec: &ProblemSpec,
    schedule: &Schedule,
    k: usize,
) -> Result<TrajectoryPoint> {
    spec.check_against(sd)?;
    let phi = PhiDiagonal::at_step(schedule, spec.lambda, &sd.eig_sigma_hat(), k)?;
    let beta = sd.from_eigenbasis(&beta_tilde_from_phi(sd, spec, &phi)?)?;

    let eps = sd.y() - sd.x() * &spec.beta_star;
    let err = error_tilde_from_phi(sd, spec, &phi, &sd.residual_rotate(&eps)?)?;
    let beta_b = sd.from_eigenbasis(&(err + sd.to_eigenbasis(&spec.beta_star)?))?;

    let scale = 1.0 + beta.norm() + spec.beta_star.norm() + spec.beta0.norm();
    let gap = (&beta - &beta_b).norm();
    if gap > CLOSED_FORM_TOL * scale {
        return Err(Error::NumericalConsistency(format!(
            "closed-form routes disagree at k = {k}: gap {gap:e}, scale {scale:e}"
        )));
    }
    Ok(TrajectoryPoint::new(sd, spec, k, beta))
}

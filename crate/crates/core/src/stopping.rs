//! Stopping-time estimates.
//!
//! Direction j is best stopped when Phi_j = tau^2 / (sigma^2 Lambda_j + tau^2).
//! Linearizing log Phi_j ~ -lambda_j(Sigma_hat) sum_i eta_i gives the
//! estimate sum_{i <= k} eta_i = log(sigma^2 Lambda_j / tau^2 + 1) / lambda_j(Sigma_hat).

use std::fmt;

use crate::error::{Error, Result};
use crate::risk::{risk_curve_dense, PriorMode, RiskCurve};
use crate::schedule::Schedule;
use crate::spectral::{ProblemSpec, SpectralData};

/// Steps scanned when inverting the cumulative learning rate.
pub const DEFAULT_MAX_STEPS: usize = 10_000_000;

/// Which eigenvalue divides the log target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RatePairing {
    /// lambda_j(Sigma_hat) = Lambda_j / n, the rate at which Phi_j decays.
    #[default]
    SampleCovariance,
    /// Lambda_j itself.
    Gram,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionStop {
    pub j: usize,
    pub target_phi: f64,
    /// Real stopping index; infinite when the schedule's cumulative rate
    /// does not reach the target within the scan limit.
    pub k: f64,
}

fn check_variances(spec: &ProblemSpec) -> Result<()> {
    if spec.tau2 == 0.0 {
        return Err(Error::Domain("tau = 0: the risk decreases forever, never stop".into()));
    }
    Ok(())
}

/// Stopping estimate for a direction with Gram eigenvalue `big_lambda`.
fn stop_for_eigenvalue(
    spec: &ProblemSpec,
    schedule: &Schedule,
    big_lambda: f64,
    n: usize,
    pairing: RatePairing,
    max_steps: usize,
) -> Result<(f64, f64)> {
    check_variances(spec)?;
    if big_lambda <= 0.0 {
        return Err(Error::Domain("direction outside the row space of X".into()));
    }
    let snr = spec.sigma2 * big_lambda / spec.tau2;
    let target_phi = 1.0 / (snr + 1.0);
    let rate = match pairing {
        RatePairing::SampleCovariance => big_lambda / n as f64,
        RatePairing::Gram => big_lambda,
    };
    let k = match schedule.steps_to_cumulative(snr.ln_1p() / rate, max_steps) {
        Ok(k) => k,
        Err(Error::Domain(_)) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    Ok((target_phi, k))
}

pub fn per_direction_stop(
    sd: &SpectralData,
    spec: &ProblemSpec,
    schedule: &Schedule,
    j: usize,
    pairing: RatePairing,
) -> Result<DirectionStop> {
    if j >= sd.rank() {
        return Err(Error::Domain(format!("direction {j} is outside rank {}", sd.rank())));
    }
    let (target_phi, k) = stop_for_eigenvalue(spec, schedule, sd.lambda()[j], sd.n(), pairing, DEFAULT_MAX_STEPS)?;
    Ok(DirectionStop { j, target_phi, k })
}

/// Estimate at the mean non-zero eigenvalue of the sample covariance.
pub fn aggregate_stop(sd: &SpectralData, spec: &ProblemSpec, schedule: &Schedule, pairing: RatePairing) -> Result<f64> {
    let r = sd.rank();
    if r == 0 {
        return Err(Error::Domain("X has rank 0".into()));
    }
    let mean_gram = sd.lambda().iter().take(r).sum::<f64>() / r as f64;
    Ok(stop_for_eigenvalue(spec, schedule, mean_gram, sd.n(), pairing, DEFAULT_MAX_STEPS)?.1)
}

/// Grid argmin of the analytic risk over 0..=k_max (ties go to the later k),
/// together with the curve.
pub fn true_optimal_stop(
    sd: &SpectralData,
    spec: &ProblemSpec,
    schedule: &Schedule,
    k_max: usize,
    mode: PriorMode,
) -> Result<(usize, RiskCurve)> {
    if k_max == 0 {
        return Err(Error::Validation("k_max must be >= 1".into()));
    }
    let curve = risk_curve_dense(sd, spec, schedule, k_max, mode)?;
    let i = curve.argmin_index().expect("curve is non-empty");
    Ok((curve.ks[i], curve))
}

/// Smallest T <= k_max with
/// sqrt((1/n) sum_{i <= n} min(mu_i, 1/S_T)) > 1 / (2 e tau S_T),
/// S_T = eta_1 + ... + eta_T and mu_i the sample-covariance eigenvalues
/// padded with zeros (or truncated) to n entries.
pub fn raskutti_stop(
    sd: &SpectralData,
    spec: &ProblemSpec,
    schedule: &Schedule,
    k_max: usize,
) -> Result<Option<usize>> {
    let tau = spec.tau2.sqrt();
    if tau == 0.0 {
        return Ok(None);
    }
    let n = sd.n();
    let eig = sd.eig_sigma_hat();
    let mu: Vec<f64> = (0..n).map(|i| eig.get(i).copied().unwrap_or(0.0)).collect();
    let mut s = 0.0;
    for t in 1..=k_max {
        s += schedule.eta_at(t)?;
        let inv = 1.0 / s;
        let lhs = (mu.iter().map(|&m| m.min(inv)).sum::<f64>() / n as f64).sqrt();
        if lhs > 1.0 / (2.0 * std::f64::consts::E * tau * s) {
            return Ok(Some(t));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoppingReport {
    pub per_direction: Vec<DirectionStop>,
    pub aggregate_k: f64,
    pub true_k: usize,
    /// Analytic risk at the aggregate estimate rounded to the nearest
    /// iteration (clamped to the horizon).
    pub risk_at_estimate: f64,
    pub risk_at_true: f64,
    pub raskutti_k: Option<usize>,
}

impl StoppingReport {
    /// The aggregate estimate as an iteration on the curve grid.
    pub fn rounded_estimate(&self, k_max: usize) -> usize {
        round_to_grid(self.aggregate_k, k_max)
    }
}

fn round_to_grid(k: f64, k_max: usize) -> usize {
    if k.is_finite() {
        (k.round() as usize).min(k_max)
    } else {
        k_max
    }
}

impl fmt::Display for StoppingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "aggregate estimate : {:.3} (risk {:.6e})",
            self.aggregate_k, self.risk_at_estimate
        )?;
        writeln!(
            f,
            "true argmin        : {} (risk {:.6e})",
            self.true_k, self.risk_at_true
        )?;
        match self.raskutti_k {
            Some(k) => writeln!(f, "raskutti criterion : {k}")?,
            None => writeln!(f, "raskutti criterion : none within horizon")?,
        }
        writeln!(f, "per direction (j, target phi, k):")?;
        for d in &self.per_direction {
            writeln!(f, "  {:>4}  {:.6}  {:.3}", d.j, d.target_phi, d.k)?;
        }
        Ok(())
    }
}

/// Every estimate for one schedule, with the dense analytic curve.
pub fn stopping_report(
    sd: &SpectralData,
    spec: &ProblemSpec,
    schedule: &Schedule,
    k_max: usize,
    mode: PriorMode,
    pairing: RatePairing,
) -> Result<(StoppingReport, RiskCurve)> {
    let per_direction = (0..sd.rank())
        .map(|j| per_direction_stop(sd, spec, schedule, j, pairing))
        .collect::<Result<Vec<_>>>()?;
    let aggregate_k = aggregate_stop(sd, spec, schedule, pairing)?;
    let (true_k, curve) = true_optimal_stop(sd, spec, schedule, k_max, mode)?;
    let est = round_to_grid(aggregate_k, k_max);
    let report = StoppingReport {
        per_direction,
        aggregate_k,
        true_k,
        risk_at_estimate: curve.analytic[est],
        risk_at_true: curve.analytic[true_k],
        raskutti_k: raskutti_stop(sd, spec, schedule, k_max)?,
    };
    Ok((report, curve))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::DEFAULT_RANK_TOL;
    use nalgebra::{DMatrix, DVector};

    fn diag_problem(diag: &[f64], sigma2: f64, tau2: f64) -> (SpectralData, ProblemSpec) {
        let p = diag.len();
        let x = DMatrix::from_diagonal(&DVector::from_column_slice(diag));
        let sd = SpectralData::decompose(x, DVector::zeros(p), DEFAULT_RANK_TOL).unwrap();
        let mut spec = ProblemSpec::isotropic(DVector::zeros(p), tau2).unwrap();
        spec.sigma2 = sigma2;
        (sd, spec)
    }

    #[test]
    fn constant_rate_reduces_to_log_ratio() {
        let (sd, spec) = diag_problem(&[3.0, 2.0], 0.5, 0.2);
        let eta = 0.05;
        let s = Schedule::constant(eta).unwrap();
        for j in 0..2 {
            let lam = sd.lambda()[j];
            let expected = (0.5 * lam / 0.2 + 1.0).ln() / (eta * lam / 2.0);
            let d = per_direction_stop(&sd, &spec, &s, j, RatePairing::SampleCovariance).unwrap();
            assert!((d.k - expected).abs() < 1e-9 * expected);
            assert!((d.target_phi - 0.2 / (0.5 * lam + 0.2)).abs() < 1e-15);
        }
    }

    #[test]
    fn pure_noise_stops_immediately() {
        let (sd, spec) = diag_problem(&[1.0], 0.0, 1.0);
        let s = Schedule::constant(0.1).unwrap();
        assert_eq!(
            per_direction_stop(&sd, &spec, &s, 0, RatePairing::SampleCovariance)
                .unwrap()
                .k,
            0.0
        );
    }

    #[test]
    fn noiseless_is_reported() {
        let (sd, spec) = diag_problem(&[1.0], 1.0, 0.0);
        let s = Schedule::constant(0.1).unwrap();
        assert!(matches!(
            per_direction_stop(&sd, &spec, &s, 0, RatePairing::SampleCovariance),
            Err(Error::Domain(_))
        ));
        assert_eq!(raskutti_stop(&sd, &spec, &s, 100).unwrap(), None);
    }

    #[test]
    fn equal_spectrum_aggregate_matches_each_direction() {
        let (sd, spec) = diag_problem(&[2.0, 2.0, 2.0], 1.0, 0.5);
        let s = Schedule::polynomial(0.3, 0.5).unwrap();
        let agg = aggregate_stop(&sd, &spec, &s, RatePairing::SampleCovariance).unwrap();
        for j in 0..3 {
            let d = per_direction_stop(&sd, &spec, &s, j, RatePairing::SampleCovariance).unwrap();
            assert!((d.k - agg).abs() < 1e-12 * agg);
        }
    }

    #[test]
    fn huge_noise_crosses_at_first_step() {
        let (sd, spec) = diag_problem(&[1.0, 0.5], 1.0, 1e12);
        let s = Schedule::constant(0.1).unwrap();
        assert_eq!(raskutti_stop(&sd, &spec, &s, 100).unwrap(), Some(1));
    }

    #[test]
    fn noiseless_true_stop_is_horizon() {
        let (sd, mut spec) = diag_problem(&[1.0, 0.5], 1.0, 0.0);
        spec.beta_star = DVector::from_vec(vec![1.0, 1.0]);
        let s = Schedule::constant(0.5).unwrap();
        let (k, _) = true_optimal_stop(&sd, &spec, &s, 50, PriorMode::Isotropic).unwrap();
        assert_eq!(k, 50);
    }
}

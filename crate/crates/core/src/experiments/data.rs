//! Synthetic regression data with a power-law covariance spectrum.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use super::config::{ExperimentConfig, ZVariance};
use crate::error::Result;
use crate::rng::{component, substream};
use crate::spectral::{ProblemSpec, SpectralData};

/// diag(1^{-alpha}, 2^{-alpha}, ..., p^{-alpha})
pub fn powerlaw_covariance(p: usize, alpha: f64) -> DVector<f64> {
    DVector::from_fn(p, |j, _| ((j + 1) as f64).powf(-alpha))
}

/// Rows x_i = z_i Sigma^{1/2}, beta_* ~ N(0, sigma2 I), y = X beta_* + eps with
/// eps ~ N(0, tau^2 I); the test covariance is Sigma and beta_0 = 0.
pub fn gen_powerlaw_data(config: &ExperimentConfig, seed: u64) -> Result<(SpectralData, ProblemSpec)> {
    config.validate()?;
    let (n, p) = (config.n, config.p);
    let diag = powerlaw_covariance(p, config.alpha);
    let z_scale = match config.z_variance {
        ZVariance::Unit => 1.0,
        ZVariance::InverseP => (1.0 / p as f64).sqrt(),
    };
    let root: Vec<f64> = diag.iter().map(|d| d.sqrt() * z_scale).collect();

    let mut rng = substream(seed, component::DESIGN, 0);
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        for (j, r) in root.iter().enumerate() {
            let z: f64 = StandardNormal.sample(&mut rng);
            x[(i, j)] = z * r;
        }
    }

    let sigma2 = config.sigma2();
    let mut rng = substream(seed, component::BETA_STAR, 0);
    let beta_star = DVector::from_fn(p, |_, _| {
        sigma2.sqrt() * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
    });

    let mut rng = substream(seed, component::NOISE, 0);
    let eps = DVector::from_fn(n, |_, _| {
        config.tau * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
    });
    let y = &x * &beta_star + eps;

    let sd = SpectralData::decompose(x, y, config.rank_tol)?;
    let spec = ProblemSpec::new(
        beta_star,
        DVector::zeros(p),
        config.tau * config.tau,
        sigma2,
        0.0,
        DMatrix::from_diagonal(&diag),
    )?;
    Ok((sd, spec))
}

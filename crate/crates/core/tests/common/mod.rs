#![allow(dead_code)]

use earlystop::{ProblemSpec, Schedule, SpectralData, DEFAULT_RANK_TOL};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vec<R: Rng>(rng: &mut R, len: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(len, |_, _| {
        scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
    })
}

pub fn normal_mat<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| {
        <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
    })
}

pub struct Instance {
    pub sd: SpectralData,
    pub spec: ProblemSpec,
}

/// Gaussian design with n, p in [2, 20], beta_* and beta_0 random, identity
/// test covariance.
pub fn random_instance<R: Rng>(rng: &mut R, lambda: f64) -> Instance {
    let n = rng.random_range(2..=20);
    let p = rng.random_range(2..=20);
    instance_with_shape(rng, n, p, lambda)
}

pub fn instance_with_shape<R: Rng>(rng: &mut R, n: usize, p: usize, lambda: f64) -> Instance {
    let x = normal_mat(rng, n, p);
    let beta_star = normal_vec(rng, p, 1.0);
    let eps = normal_vec(rng, n, 0.5);
    let y = &x * &beta_star + eps;
    let sd = SpectralData::decompose(x, y, DEFAULT_RANK_TOL).unwrap();
    let spec = ProblemSpec::new(
        beta_star,
        normal_vec(rng, p, 1.0),
        0.25,
        1.0,
        lambda,
        DMatrix::identity(p, p),
    )
    .unwrap();
    Instance { sd, spec }
}

/// Six families of schedule with rates at most `scale` (horizon covers `k`).
pub fn schedule_family<R: Rng>(rng: &mut R, family: usize, scale: f64, k: usize) -> Schedule {
    let c = rng.random_range(0.1..1.0) * scale;
    match family % 6 {
        0 => Schedule::constant(c).unwrap(),
        1 => Schedule::polynomial(c, rng.random_range(0.0..2.0)).unwrap(),
        2 => Schedule::additive_decay(c, c / (k as f64 + 2.0)).unwrap(),
        3 => Schedule::exponential(rng.random_range(0.05..0.98f64).min(scale)).unwrap(),
        4 => Schedule::cyclic(Schedule::polynomial(c, 1.0).unwrap(), rng.random_range(2..=10)).unwrap(),
        _ => Schedule::explicit((0..k.max(1)).map(|_| rng.random_range(0.01..1.0) * scale).collect()).unwrap(),
    }
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// |a - b| / |b|, or |a - b| when b is essentially zero.
pub fn rel_dev(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-12)
}

/// Largest safe step scale for an instance: 1.9 / (lambda + lambda_max(Sigma_hat)).
pub fn step_scale(inst: &Instance) -> f64 {
    1.9 / (inst.spec.lambda + inst.sd.lambda_max_sigma_hat())
}

//! Expected excess risk along the gradient-descent path.
//!
//! With lambda = 0, b~ = V^T (beta_0 - beta_*) and M = V^T Sigma_test V:
//!
//! ```text
//! E_eps R(beta_k) = (Phi b~)^T M (Phi b~) + tau^2 sum_{j < rank} M_jj (1 - Phi_j)^2 / Lambda_j
//! ```
//!
//! When b~ is itself random with covariance sigma^2 I the first term becomes
//! sigma^2 sum_j M_jj Phi_j^2.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::phi::{phi_derivative, phi_extended, phi_limit, PhiDiagonal, PhiTracker};
use crate::rng::{component, substream};
use crate::schedule::Schedule;
use crate::spectral::{ProblemSpec, SpectralData};
use crate::trajectory::{beta_tilde_from_phi, error_tilde_from_phi, gd_step};

/// How beta_0 - beta_* enters the expectation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PriorMode {
    /// beta_0 - beta_* as given in the problem.
    #[default]
    Fixed,
    /// beta_0 - beta_* ~ N(0, sigma^2 I), averaged analytically.
    Isotropic,
}

impl std::fmt::Display for PriorMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PriorMode::Fixed => "fixed",
            PriorMode::Isotropic => "isotropic",
        })
    }
}

/// Off-diagonal tolerance (relative to max(1, |Sigma|_F)) for treating the
/// test covariance as diagonal in the training eigenbasis.
pub const ALIGNMENT_TOL: f64 = 1e-8;

/// Relative slack allowed on eta_k <= 1 / lambda_max(Sigma_hat).
pub const STEP_HYPOTHESIS_SLACK: f64 = 1e-12;

/// (beta - beta_*)^T Sigma_test (beta - beta_*)
pub fn excess_risk_of(spec: &ProblemSpec, beta: &DVector<f64>) -> f64 {
    let d = beta - &spec.beta_star;
    d.dot(&(&spec.sigma_test * &d))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskPoint {
    pub risk: f64,
    pub bias: f64,
    pub variance: f64,
}

/// Precomputed pieces of the risk formula for one (data, problem) pair.
#[derive(Debug, Clone)]
pub struct RiskModel {
    m: DMatrix<f64>,
    lambda: Vec<f64>,
    zeta: Vec<f64>,
    rank: usize,
    b_tilde: DVector<f64>,
    tau2: f64,
    sigma2: f64,
    mode: PriorMode,
}

impl RiskModel {
    pub fn new(sd: &SpectralData, spec: &ProblemSpec, mode: PriorMode) -> Result<Self> {
        spec.check_against(sd)?;
        if spec.lambda != 0.0 {
            return Err(Error::Unsupported(format!(
                "the analytic risk formula needs lambda = 0, got {}; use risk_curve_empirical or mc_risk",
                spec.lambda
            )));
        }
        Ok(RiskModel {
            m: sd.rotate_covariance(&spec.sigma_test)?,
            lambda: sd.lambda().iter().copied().collect(),
            zeta: sd.eig_sigma_hat(),
            rank: sd.rank(),
            b_tilde: sd.to_eigenbasis(&(&spec.beta0 - &spec.beta_star))?,
            tau2: spec.tau2,
            sigma2: spec.sigma2,
            mode,
        })
    }

    /// Arguments zeta_j = Lambda_j / n of the phi factors.
    pub fn zetas(&self) -> &[f64] {
        &self.zeta
    }

    pub fn mode(&self) -> PriorMode {
        self.mode
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// V^T Sigma_test V.
    pub fn test_weights(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn at_phi(&self, phi: &[f64]) -> RiskPoint {
        let bias = match self.mode {
            PriorMode::Fixed => {
                let d = DVector::from_fn(phi.len(), |j, _| phi[j] * self.b_tilde[j]);
                d.dot(&(&self.m * &d)).max(0.0)
            }
            PriorMode::Isotropic => {
                self.sigma2 * phi.iter().enumerate().map(|(j, f)| self.m[(j, j)] * f * f).sum::<f64>()
            }
        };
        let variance = self.tau2
            * (0..self.rank)
                .map(|j| self.m[(j, j)] * (1.0 - phi[j]).powi(2) / self.lambda[j])
                .sum::<f64>();
        RiskPoint {
            risk: bias + variance,
            bias,
            variance,
        }
    }

    /// d/dx of the risk given Phi(x) and its derivative.
    pub fn derivative_at(&self, phi: &[f64], dphi: &[f64]) -> f64 {
        let bias = match self.mode {
            PriorMode::Fixed => {
                let d = DVector::from_fn(phi.len(), |j, _| phi[j] * self.b_tilde[j]);
                let dd = DVector::from_fn(phi.len(), |j, _| dphi[j] * self.b_tilde[j]);
                2.0 * dd.dot(&(&self.m * &d))
            }
            PriorMode::Isotropic => {
                2.0 * self.sigma2 * (0..phi.len()).map(|j| self.m[(j, j)] * phi[j] * dphi[j]).sum::<f64>()
            }
        };
        let variance = -2.0
            * self.tau2
            * (0..self.rank)
                .map(|j| self.m[(j, j)] * (1.0 - phi[j]) * dphi[j] / self.lambda[j])
                .sum::<f64>();
        bias + variance
    }

    /// Squared weight of direction j in the lower bound: b~_j^2 or sigma^2.
    fn signal(&self, j: usize) -> f64 {
        match self.mode {
            PriorMode::Fixed => self.b_tilde[j].powi(2),
            PriorMode::Isotropic => self.sigma2,
        }
    }

    /// tau^2 / (Lambda_j s_j + tau^2), the Phi_j minimizing direction j's risk.
    pub fn optimal_phi(&self, j: usize) -> f64 {
        let den = self.lambda[j] * self.signal(j) + self.tau2;
        if den > 0.0 {
            self.tau2 / den
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskMeta {
    pub schedule: String,
    pub lambda: f64,
    pub tau2: f64,
    pub sigma2: f64,
    pub test_covariance: String,
    pub mode: PriorMode,
}

impl RiskMeta {
    fn new(spec: &ProblemSpec, schedule: &Schedule, mode: PriorMode) -> Self {
        RiskMeta {
            schedule: schedule.to_string(),
            lambda: spec.lambda,
            tau2: spec.tau2,
            sigma2: spec.sigma2,
            test_covariance: describe_covariance(&spec.sigma_test),
            mode,
        }
    }
}

fn describe_covariance(s: &DMatrix<f64>) -> String {
    let p = s.nrows();
    if *s == DMatrix::identity(p, p) {
        return format!("identity(p={p})");
    }
    let off: f64 = (0..p)
        .flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| s[(i, j)].abs())
        .sum();
    let kind = if off == 0.0 { "diagonal" } else { "dense" };
    format!("{kind}(p={p}, trace={:e})", s.trace())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskCurve {
    pub ks: Vec<usize>,
    pub analytic: Vec<f64>,
    pub bias_part: Vec<f64>,
    pub variance_part: Vec<f64>,
    /// Monte-Carlo overlay aligned with `ks`; `None` where not sampled.
    pub mc: Vec<Option<McEstimate>>,
    pub meta: RiskMeta,
}

impl RiskCurve {
    pub fn len(&self) -> usize {
        self.ks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ks.is_empty()
    }

    /// Index of the smallest analytic value; ties go to the later index.
    pub fn argmin_index(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, &r) in self.analytic.iter().enumerate() {
            if best.is_none_or(|b| r <= self.analytic[b]) {
                best = Some(i);
            }
        }
        best
    }

    /// Fills `mc` at the given iterations.
    pub fn attach_mc(&mut self, ks: &[usize], estimates: &[McEstimate]) {
        for (k, est) in ks.iter().zip(estimates) {
            if let Ok(i) = self.ks.binary_search(k) {
                self.mc[i] = Some(*est);
            }
        }
    }
}

/// Phi diagonals at each requested k (any order, duplicates allowed).
fn phi_at_many(schedule: &Schedule, lambda: f64, eig: &[f64], ks: &[usize]) -> Result<Vec<PhiDiagonal>> {
    let mut order: Vec<usize> = (0..ks.len()).collect();
    order.sort_by_key(|&i| ks[i]);
    let mut tracker = PhiTracker::new(lambda, eig);
    let mut out = vec![None; ks.len()];
    for i in order {
        tracker.advance_to(schedule, ks[i])?;
        out[i] = Some(tracker.diagonal());
    }
    Ok(out.into_iter().flatten().collect())
}

/// Analytic expected risk at each k in `ks`.
pub fn risk_curve_analytic(
    sd: &SpectralData,
    spec: &ProblemSpec,
    schedule: &Schedule,
    ks: &[usize],
    mode: PriorMode,
) -> Result<RiskCurve> {
    let model = RiskModel::new(sd, spec, mode)?;
    let phis = phi_at_many(schedule, 0.0, model.zetas(), ks)?;
    let points: Vec<RiskPoint> = phis.par_iter().map(|phi| model.at_phi(&phi.values())).collect();
    Ok(RiskCurve {
        ks: ks.to_vec(),
        analytic: points.iter().map(|p| p.risk).collect(),
        bias_part: points.iter().map(|p| p.bias).collect(),
        variance_part: points.iter().map(|p| p.variance).collect(),
        mc: vec![None; ks.len()],
        meta: RiskMeta::new(spec, schedule, mode),
    })
}

/// Analytic risk at every k in 0..=k_max.
pub fn risk_curve_dense(
    sd: &SpectralData,
    spec: &ProblemSpec,
    schedule: &Schedule,
    k_max: usize,
    mode: PriorMode,
) -> Result<RiskCurve> {
    let ks: Vec<usize> = (0..=k_max).collect();
    risk_curve_analytic(sd, spec, schedule, &ks, mode)
}

/// Realized excess risk of the iterates computed from the observed y; valid
/// for any lambda. `analytic` holds the realized values and the split into
/// bias and variance is left empty.
pub fn risk_curve_empirical(
    sd: &SpectralData,
    spec: &ProblemSpec,
    schedule: &Schedule,
    ks: &[usize],
) -> Result<RiskCurve> {
    spec.check_against(sd)?;
    let phis = phi_at_many(schedule, spec.lambda, &sd.eig_sigma_hat(), ks)?;
    let analytic = phis
        .iter()
        .map(|phi| Ok(excess_risk_of(spec, &(sd.v() * beta_tilde_from_phi(sd, spec, phi)?))))
        .collect::<Result<Vec<_>>>()?;
    Ok(RiskCurve {
        ks: ks.to_vec(),
        analytic,
        bias_part: Vec::new(),
        variance_part: Vec::new(),
        mc: vec![None; ks.len()],
        meta: RiskMeta::new(spec, schedule, PriorMode::Fixed),
    })
}

/// Risk of the real-index extension at x.
pub fn risk_extended(
    sd: &SpectralData,
    spec: &ProblemSpec,
    schedule: &Schedule,
    x: f64,
    mode: PriorMode,
) -> Result<RiskPoint> {
    let model = RiskModel::new(sd, spec, mode)?;
    let phi = PhiDiagonal::extended(schedule, 0.0, &sd.eig_sigma_hat(), x)?.values();
    Ok(model.at_phi(&phi))
}

/// d/dx of [`risk_extended`].
pub fn risk_derivative(
    sd: &SpectralData,
    spec: &ProblemSpec,
    schedule: &Schedule,
    x: f64,
    mode: PriorMode,
) -> Result<f64> {
    let model = RiskModel::new(sd, spec, mode)?;
    let phi = PhiDiagonal::extended(schedule, 0.0, model.zetas(), x)?.values();
    let dphi = model
        .zetas()
        .iter()
        .map(|&z| phi_derivative(schedule, z, x))
        .collect::<Result<Vec<_>>>()?;
    Ok(model.derivative_at(&phi, &dphi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseKind {
    #[default]
    Gaussian,
    /// +-tau with equal probability.
    Rademacher,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum McEngine {
    /// Literal gradient-descent iteration per trial.
    #[default]
    Iterate,
    /// Closed-form iterate per trial with the sampled noise.
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub trials: usize,
    pub seed: u64,
    pub noise: NoiseKind,
    pub engine: McEngine,
    pub mode: PriorMode,
}

impl McConfig {
    pub fn new(trials: usize, seed: u64) -> Self {
        McConfig {
            trials,
            seed,
            noise: NoiseKind::Gaussian,
            engine: McEngine::Iterate,
            mode: PriorMode::Fixed,
        }
    }
}

fn sample_noise<R: Rng>(rng: &mut R, n: usize, tau: f64, kind: NoiseKind) -> DVector<f64> {
    DVector::from_fn(n, |_, _| match kind {
        NoiseKind::Gaussian => tau * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng),
        NoiseKind::Rademacher => {
            if rng.random::<bool>() {
                tau
            } else {
                -tau
            }
        }
    })
}

/// Excess risks of one trial at each k of `ks` (sorted ascending).
fn trial_risks(
    sd: &SpectralData,
    spec: &ProblemSpec,
    schedule: &Schedule,
    ks: &[usize],
    phis: Option<&[PhiDiagonal]>,
    cfg: &McConfig,
    trial: usize,
) -> Result<Vec<f64>> {
    let mut rng = substream(cfg.seed, component::TRIALS, trial as u64);
    let mut spec_t = spec.clone();
    if cfg.mode == PriorMode::Isotropic {
        let sigma = spec.sigma2.sqrt();
        let b = DVector::from_fn(sd.p(), |_, _| {
            sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
        });
        spec_t.beta_star = &spec.beta0 - b;
    }
    let eps = sample_noise(&mut rng, sd.n(), spec.tau2.sqrt(), cfg.noise);

    match (cfg.engine, phis) {
        (McEngine::ClosedForm, Some(phis)) => {
            let eps_check = sd.residual_rotate(&eps)?;
            let m = sd.rotate_covariance(&spec.sigma_test)?;
            phis.iter()
                .map(|phi| {
                    let e = error_tilde_from_phi(sd, &spec_t, phi, &eps_check)?;
                    Ok(e.dot(&(&m * &e)))
                })
                .collect()
        }
        _ => {
            let y = sd.x() * &spec_t.beta_star + eps;
            let sd_t = sd.with_response(y)?;
            let mut beta = spec_t.beta0.clone();
            let mut k = 0;
            let mut out = Vec::with_capacity(ks.len());
            for &target in ks {
                while k < target {
                    k += 1;
                    beta = gd_step(&sd_t, &spec_t, &beta, schedule.eta_at(k)?)?;
                }
                out.push(excess_risk_of(&spec_t, &beta));
            }
            Ok(out)
        }
    }
}

/// Monte-Carlo estimates of the expected risk at each k; trials run in
/// parallel, each on its own random stream, and are reduced in trial order.
pub fn mc_risk_curve(
    sd: &SpectralData,
    spec: &ProblemSpec,
    schedule: &Schedule,
    ks: &[usize],
    cfg: &McConfig,
) -> Result<Vec<McEstimate>> {
    spec.check_against(sd)?;
    if cfg.trials < 2 {
        return Err(Error::Validation(format!("need at least 2 trials, got {}", cfg.trials)));
    }
    let mut order: Vec<usize> = (0..ks.len()).collect();
    order.sort_by_key(|&i| ks[i]);
    let sorted: Vec<usize> = order.iter().map(|&i| ks[i]).collect();
    let phis = match cfg.engine {
        McEngine::ClosedForm => Some(phi_at_many(schedule, spec.lambda, &sd.eig_sigma_hat(), &sorted)?),
        McEngine::Iterate => None,
    };

    let per_trial = (0..cfg.trials)
        .into_par_iter()
        .map(|t| trial_risks(sd, spec, schedule, &sorted, phis.as_deref(), cfg, t))
        .collect::<Result<Vec<_>>>()?;

    let count = cfg.trials as f64;
    let mut out = vec![McEstimate { mean: 0.0, stderr: 0.0 }; ks.len()];
    for (pos, &orig) in order.iter().enumerate() {
        let mean = per_trial.iter().map(|r| r[pos]).sum::<f64>() / count;
        let var = per_trial.iter().map(|r| (r[pos] - mean).powi(2)).sum::<f64>() / (count - 1.0);
        out[orig] = McEstimate {
            mean,
            stderr: (var / count).sqrt(),
        };
    }
    Ok(out)
}

pub fn mc_risk(
    sd: &SpectralData,
    spec: &ProblemSpec,
    schedule: &Schedule,
    k: usize,
    cfg: &McConfig,
) -> Result<McEstimate> {
    Ok(mc_risk_curve(sd, spec, schedule, &[k], cfg)?[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Beneficial,
    NotBeneficial,
    Indeterminate,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Beneficial => "beneficial",
            Verdict::NotBeneficial => "not beneficial",
            Verdict::Indeterminate => "indeterminate",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateBenefit {
    pub j: usize,
    /// lim_k phi(k; Lambda_j / n)
    pub limit: f64,
    /// tau^2 / (Lambda_j s_j + tau^2)
    pub threshold: f64,
}

impl CoordinateBenefit {
    pub fn beneficial(&self) -> bool {
        self.limit < self.threshold
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenefitReport {
    pub coordinates: Vec<CoordinateBenefit>,
    pub verdict: Verdict,
    pub mode: PriorMode,
}

/// Checks that every rate satisfies eta_k <= 1 / lambda_max(Sigma_hat).
pub fn check_step_hypothesis(sd: &SpectralData, schedule: &Schedule) -> Result<()> {
    let bound = 1.0 / sd.lambda_max_sigma_hat();
    let max_rate = schedule.max_rate()?;
    if max_rate > bound * (1.0 + STEP_HYPOTHESIS_SLACK) {
        return Err(Error::Hypothesis(format!(
            "largest rate {max_rate:e} exceeds 1/lambda_max(Sigma_hat) = {bound:e}"
        )));
    }
    Ok(())
}

fn check_alignment(sd: &SpectralData, spec: &ProblemSpec) -> Result<()> {
    let tol = ALIGNMENT_TOL * spec.sigma_test.norm().max(1.0);
    let off = sd.offdiagonal_norm(&spec.sigma_test)?;
    if off > tol {
        return Err(Error::Hypothesis(format!(
            "test covariance is not diagonal in the training eigenbasis (off-diagonal norm {off:e})"
        )));
    }
    Ok(())
}

/// Compares lim phi with the per-direction threshold for every direction
/// inside the rank. In [`PriorMode::Fixed`] the test covariance must be
/// diagonal in the training eigenbasis.
pub fn benefit_condition(
    sd: &SpectralData,
    spec: &ProblemSpec,
    schedule: &Schedule,
    mode: PriorMode,
) -> Result<BenefitReport> {
    let model = RiskModel::new(sd, spec, mode)?;
    check_step_hypothesis(sd, schedule)?;
    if mode == PriorMode::Fixed {
        check_alignment(sd, spec)?;
    }
    let coordinates = (0..model.rank())
        .map(|j| {
            Ok(CoordinateBenefit {
                j,
                limit: phi_limit(schedule, model.zetas()[j])?,
                threshold: model.optimal_phi(j),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let verdict = if !coordinates.is_empty() && coordinates.iter().all(CoordinateBenefit::beneficial) {
        Verdict::Beneficial
    } else if coordinates.iter().all(|c| !c.beneficial()) {
        Verdict::NotBeneficial
    } else {
        Verdict::Indeterminate
    };
    Ok(BenefitReport {
        coordinates,
        verdict,
        mode,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBound {
    /// tau^2 sum_j s_j / (Lambda_j s_j + tau^2)
    pub displayed: f64,
    /// Same sum with each term weighted by (V^T Sigma_test V)_jj.
    pub weighted: f64,
}

/// Smallest risk reachable by stopping each direction at its own time.
pub fn risk_lower_bound(sd: &SpectralData, spec: &ProblemSpec, mode: PriorMode) -> Result<LowerBound> {
    let model = RiskModel::new(sd, spec, mode)?;
    let mut displayed = 0.0;
    let mut weighted = 0.0;
    for j in 0..sd.p() {
        let s = model.signal(j);
        let den = model.lambda[j] * s + model.tau2;
        let term = if den > 0.0 { model.tau2 * s / den } else { 0.0 };
        displayed += term;
        weighted += model.m[(j, j)] * term;
    }
    Ok(LowerBound { displayed, weighted })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerCoordinateOptimum {
    /// Real stopping index per direction inside the rank; infinite when the
    /// target is never reached.
    pub stops: Vec<f64>,
    pub phi: Vec<f64>,
    pub risk: f64,
}

/// Stops each direction independently where Phi_j reaches its optimum and
/// evaluates the risk of the resulting Phi.
pub fn per_coordinate_optimal_risk(
    sd: &SpectralData,
    spec: &ProblemSpec,
    schedule: &Schedule,
    mode: PriorMode,
) -> Result<PerCoordinateOptimum> {
    let model = RiskModel::new(sd, spec, mode)?;
    let mut phi = vec![1.0; sd.p()];
    let mut stops = Vec::with_capacity(model.rank());
    for (j, phi_j) in phi.iter_mut().enumerate().take(model.rank()) {
        let z = model.zetas()[j];
        let target = model.optimal_phi(j);
        let (x, value) = solve_phi_level(schedule, z, target)?;
        stops.push(x);
        *phi_j = value;
    }
    Ok(PerCoordinateOptimum {
        risk: model.at_phi(&phi).risk,
        stops,
        phi,
    })
}

/// Smallest x >= 0 with phi(x; zeta) = target on a non-increasing extension;
/// when the target lies below the limit, returns (inf, limit).
fn solve_phi_level(schedule: &Schedule, zeta: f64, target: f64) -> Result<(f64, f64)> {
    let f = |x: f64| -> Result<f64> { Ok(phi_extended(schedule, zeta, x)?.to_f64()) };
    if target >= 1.0 {
        return Ok((0.0, 1.0));
    }
    let limit = phi_limit(schedule, zeta)?;
    if target <= limit {
        return Ok((f64::INFINITY, limit));
    }
    let mut hi = 1.0;
    while f(hi)? > target {
        hi *= 2.0;
        if hi > 1e15 {
            return Ok((f64::INFINITY, limit));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((hi, f(hi)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::DEFAULT_RANK_TOL;

    fn scalar_problem(x: f64, b: f64, tau2: f64) -> (SpectralData, ProblemSpec) {
        let sd = SpectralData::decompose(DMatrix::from_element(1, 1, x), DVector::zeros(1), DEFAULT_RANK_TOL).unwrap();
        let mut spec = ProblemSpec::isotropic(DVector::from_element(1, -b), tau2).unwrap();
        spec.beta0 = DVector::zeros(1);
        (sd, spec)
    }

    #[test]
    fn risk_of_target_is_zero() {
        let spec = ProblemSpec::isotropic(DVector::from_vec(vec![1.0, -2.0]), 1.0).unwrap();
        assert_eq!(excess_risk_of(&spec, &spec.beta_star.clone()), 0.0);
        let beta = DVector::from_vec(vec![2.0, 0.0]);
        assert!((excess_risk_of(&spec, &beta) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn scalar_curve_by_hand() {
        // n = 1, x = 2: Lambda = 4, Phi = (1 - 4 eta)^k, b = 1.5
        let (sd, spec) = scalar_problem(2.0, 1.5, 0.3);
        let s = Schedule::constant(0.1).unwrap();
        let c = risk_curve_analytic(&sd, &spec, &s, &[0, 1, 5], PriorMode::Fixed).unwrap();
        for (i, &k) in c.ks.iter().enumerate() {
            let phi = 0.6f64.powi(k as i32);
            let bias = phi * phi * 2.25;
            let var = 0.3 * (1.0 - phi).powi(2) / 4.0;
            assert!((c.bias_part[i] - bias).abs() < 1e-14);
            assert!((c.variance_part[i] - var).abs() < 1e-14);
            assert_eq!(c.analytic[i], c.bias_part[i] + c.variance_part[i]);
        }
    }

    #[test]
    fn rejects_ridge() {
        let (sd, mut spec) = scalar_problem(1.0, 1.0, 1.0);
        spec.lambda = 0.1;
        let s = Schedule::constant(0.1).unwrap();
        assert!(matches!(
            risk_curve_analytic(&sd, &spec, &s, &[1], PriorMode::Fixed),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn noiseless_mc_is_exact() {
        let (sd, spec) = scalar_problem(2.0, 1.5, 0.0);
        let s = Schedule::constant(0.1).unwrap();
        let est = mc_risk(&sd, &spec, &s, 3, &McConfig::new(5, 1)).unwrap();
        let phi = 0.6f64.powi(3);
        assert!((est.mean - phi * phi * 2.25).abs() < 1e-14);
        assert!(est.stderr < 1e-15);
    }

    #[test]
    fn unsorted_ks_keep_order() {
        let (sd, spec) = scalar_problem(2.0, 1.5, 0.3);
        let s = Schedule::constant(0.1).unwrap();
        let a = risk_curve_analytic(&sd, &spec, &s, &[5, 0, 2], PriorMode::Fixed).unwrap();
        let b = risk_curve_analytic(&sd, &spec, &s, &[0, 2, 5], PriorMode::Fixed).unwrap();
        assert_eq!(a.analytic[0], b.analytic[2]);
        assert_eq!(a.analytic[1], b.analytic[0]);
    }

    #[test]
    fn benefit_examples() {
        let (sd, spec) = scalar_problem(2.0, 1.5, 0.3);
        let c = Schedule::constant(0.2).unwrap();
        assert_eq!(
            benefit_condition(&sd, &spec, &c, PriorMode::Fixed).unwrap().verdict,
            Verdict::Beneficial
        );
        let tiny = Schedule::polynomial(0.001, 2.0).unwrap();
        assert_eq!(
            benefit_condition(&sd, &spec, &tiny, PriorMode::Fixed).unwrap().verdict,
            Verdict::NotBeneficial
        );
        let big = Schedule::constant(0.5).unwrap();
        assert!(matches!(
            benefit_condition(&sd, &spec, &big, PriorMode::Fixed),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn lower_bound_trivial_cases() {
        let (sd, spec) = scalar_problem(2.0, 1.5, 0.0);
        assert_eq!(risk_lower_bound(&sd, &spec, PriorMode::Fixed).unwrap().displayed, 0.0);
        let (sd, spec) = scalar_problem(2.0, 0.0, 1.0);
        assert_eq!(risk_lower_bound(&sd, &spec, PriorMode::Fixed).unwrap().displayed, 0.0);
    }
}

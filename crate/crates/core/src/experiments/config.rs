//! Flat `key = value` configuration for the synthetic experiments.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::spectral::DEFAULT_RANK_TOL;
use crate::stopping::RatePairing;

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "EARLYSTOP_SEED";

/// Variance of the latent entries z in x = z Sigma^{1/2}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZVariance {
    /// z ~ N(0, I), so that E[x x^T] = Sigma.
    #[default]
    Unit,
    /// z ~ N(0, I / p).
    InverseP,
}

impl fmt::Display for ZVariance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ZVariance::Unit => "unit",
            ZVariance::InverseP => "inverse_p",
        })
    }
}

impl FromStr for ZVariance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit" | "1" => Ok(ZVariance::Unit),
            "inverse_p" | "1/p" => Ok(ZVariance::InverseP),
            _ => Err(Error::Validation(format!(
                "z_variance must be `unit` or `inverse_p`, got `{s}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub p: usize,
    /// Sigma_jj = j^{-alpha}.
    pub alpha: f64,
    pub tau: f64,
    /// Prior variance of beta_*; `None` means 1/p.
    pub sigma2: Option<f64>,
    /// Polynomial decay powers, one panel each.
    pub ms: Vec<f64>,
    /// eta = eta_scale / lambda_max(Sigma_hat).
    pub eta_scale: f64,
    /// Monte-Carlo trials for the overlay; 0 disables it.
    pub trials: usize,
    /// Iterations at which the overlay is sampled.
    pub mc_points: usize,
    /// Horizon; `None` picks one from the stopping estimates.
    pub k_max: Option<usize>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub z_variance: ZVariance,
    pub pairing: RatePairing,
    pub rank_tol: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n: 100,
            p: 40,
            alpha: 2.0,
            tau: 1.0,
            sigma2: None,
            ms: vec![0.0, 0.25, 0.5, 0.75],
            eta_scale: 0.9,
            trials: 2000,
            mc_points: 16,
            k_max: None,
            seed: 42,
            output_dir: PathBuf::from("out"),
            z_variance: ZVariance::Unit,
            pairing: RatePairing::SampleCovariance,
            rank_tol: DEFAULT_RANK_TOL,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Validation(format!("bad value `{value}` for `{key}`")))
}

pub fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_fraction(key, s))
        .collect()
}

/// Accepts `0.25` as well as `1/4`.
fn parse_fraction(key: &str, s: &str) -> Result<f64> {
    match s.split_once('/') {
        Some((a, b)) => Ok(parse::<f64>(key, a.trim())? / parse::<f64>(key, b.trim())?),
        None => parse(key, s),
    }
}

impl ExperimentConfig {
    pub fn sigma2(&self) -> f64 {
        self.sigma2.unwrap_or(1.0 / self.p as f64)
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "n" => self.n = parse(key, value)?,
            "p" => self.p = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "tau" => self.tau = parse(key, value)?,
            "sigma2" => self.sigma2 = Some(parse_fraction(key, value)?),
            "m" | "ms" => self.ms = parse_list(key, value)?,
            "eta_scale" => self.eta_scale = parse(key, value)?,
            "trials" => self.trials = parse(key, value)?,
            "mc_points" => self.mc_points = parse(key, value)?,
            "k_max" => {
                self.k_max = match value {
                    "auto" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "seed" => self.seed = parse(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "z_variance" => self.z_variance = value.parse()?,
            "pairing" => {
                self.pairing = match value {
                    "sample_covariance" => RatePairing::SampleCovariance,
                    "gram" => RatePairing::Gram,
                    _ => {
                        return Err(Error::Validation(format!(
                            "pairing must be `sample_covariance` or `gram`, got `{value}`"
                        )))
                    }
                }
            }
            "rank_tol" => self.rank_tol = parse(key, value)?,
            other => return Err(Error::Validation(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Parses a config file body on top of the defaults. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Validation(format!("line {}: expected `key = value`", lineno + 1)))?;
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text)
    }

    /// Replaces the seed with `EARLYSTOP_SEED` when set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = parse(SEED_ENV, v.trim())?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Validation(msg));
        if self.n == 0 || self.p == 0 {
            return bad(format!("n and p must be >= 1, got n = {}, p = {}", self.n, self.p));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return bad(format!("alpha must be >= 0, got {}", self.alpha));
        }
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return bad(format!("tau must be >= 0, got {}", self.tau));
        }
        if !(self.eta_scale > 0.0 && self.eta_scale <= 1.0) {
            return bad(format!("eta_scale must lie in (0, 1], got {}", self.eta_scale));
        }
        if let Some(s) = self.sigma2 {
            if !(s.is_finite() && s >= 0.0) {
                return bad(format!("sigma2 must be >= 0, got {s}"));
            }
        }
        if self.ms.is_empty() || self.ms.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return bad(format!("m list must be non-empty with entries >= 0, got {:?}", self.ms));
        }
        if self.trials == 1 {
            return bad("trials must be 0 (no overlay) or >= 2".into());
        }
        if self.k_max == Some(0) {
            return bad("k_max must be >= 1".into());
        }
        if !(self.rank_tol.is_finite() && self.rank_tol >= 0.0) {
            return bad(format!("rank_tol must be >= 0, got {}", self.rank_tol));
        }
        Ok(())
    }

    /// The four configurations of the reference figure: (p, n, tau) in
    /// {(40, 100, 1), (100, 40, 0.15)} crossed with alpha in {2, 4}.
    pub fn reference_grid(&self) -> Vec<(String, ExperimentConfig)> {
        let mut out = Vec::new();
        for &(p, n, tau) in &[(40usize, 100usize, 1.0f64), (100, 40, 0.15)] {
            for &alpha in &[2.0f64, 4.0] {
                let mut c = self.clone();
                c.p = p;
                c.n = n;
                c.tau = tau;
                c.alpha = alpha;
                c.sigma2 = None;
                out.push((format!("p{p}_n{n}_tau{tau}_alpha{alpha}"), c));
            }
        }
        out
    }

    /// Key-value lines describing the run, in a fixed order.
    pub fn describe(&self) -> Vec<(String, String)> {
        let ms: Vec<String> = self.ms.iter().map(f64::to_string).collect();
        vec![
            ("n".into(), self.n.to_string()),
            ("p".into(), self.p.to_string()),
            ("alpha".into(), self.alpha.to_string()),
            ("tau".into(), self.tau.to_string()),
            ("sigma2".into(), self.sigma2().to_string()),
            ("m".into(), ms.join(",")),
            ("eta_scale".into(), self.eta_scale.to_string()),
            ("trials".into(), self.trials.to_string()),
            ("mc_points".into(), self.mc_points.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("z_variance".into(), self.z_variance.to_string()),
            (
                "pairing".into(),
                match self.pairing {
                    RatePairing::SampleCovariance => "sample_covariance".into(),
                    RatePairing::Gram => "gram".into(),
                },
            ),
            ("rank_tol".into(), self.rank_tol.to_string()),
        ]
    }
}

//! Risk curves and stopping times for polynomially decaying schedules
//! eta_k = eta / k^m on power-law data.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::data::gen_powerlaw_data;
use super::io::{write_risk_curve, write_summary, SummaryRow};
use super::svg::{plot_svg, Panel};
use crate::error::{Error, Result};
use crate::risk::{mc_risk_curve, McConfig, McEngine, PriorMode, RiskCurve};
use crate::rng::RNG_ALGORITHM;
use crate::schedule::Schedule;
use crate::spectral::{ProblemSpec, SpectralData};
use crate::stopping::{aggregate_stop, stopping_report, true_optimal_stop, StoppingReport};

/// Smallest horizon picked automatically.
pub const MIN_AUTO_HORIZON: usize = 200;
/// Largest horizon picked automatically.
pub const MAX_AUTO_HORIZON: usize = 2_000_000;
/// The automatic horizon is this multiple of the largest stopping estimate.
pub const HORIZON_FACTOR: f64 = 20.0;

#[derive(Debug, Clone)]
pub struct Figure1Panel {
    pub m: f64,
    pub schedule: Schedule,
    pub curve: RiskCurve,
    pub report: StoppingReport,
}

impl Figure1Panel {
    /// Minimum strictly inside (0, k_max).
    pub fn has_interior_minimum(&self, k_max: usize) -> bool {
        self.report.true_k > 0 && self.report.true_k < k_max
    }

    pub fn estimate_ratio(&self) -> f64 {
        self.report.risk_at_estimate / self.report.risk_at_true
    }
}

#[derive(Debug, Clone)]
pub struct Figure1Run {
    pub config: ExperimentConfig,
    pub eta: f64,
    pub k_max: usize,
    pub mc_ks: Vec<usize>,
    pub panels: Vec<Figure1Panel>,
}

impl Figure1Run {
    pub fn summary_rows(&self) -> Vec<SummaryRow> {
        self.panels
            .iter()
            .map(|p| SummaryRow {
                m: p.m,
                true_k: p.report.true_k,
                est_k: p.report.aggregate_k,
                raskutti_k: p.report.raskutti_k,
                min_risk: p.report.risk_at_true,
                risk_at_est: p.report.risk_at_estimate,
            })
            .collect()
    }

    /// Largest relative spread of the minimum risks across panels.
    pub fn min_risk_spread(&self) -> f64 {
        let mins: Vec<f64> = self.panels.iter().map(|p| p.report.risk_at_true).collect();
        let lo = mins.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = mins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (hi - lo) / lo
    }

    pub fn panels_for_plot(&self) -> Vec<Panel<'_>> {
        self.panels
            .iter()
            .map(|p| Panel {
                title: format!("m = {}", p.m),
                curve: &p.curve,
                true_k: Some(p.report.true_k),
                est_k: Some(p.report.aggregate_k),
                show_mc: true,
            })
            .collect()
    }
}

/// About `count` distinct integers from 0 to k_max, evenly spaced in log(1 + k).
pub fn log_spaced(k_max: usize, count: usize) -> Vec<usize> {
    if count == 0 {
        return Vec::new();
    }
    if count == 1 {
        return vec![k_max];
    }
    let top = (1.0 + k_max as f64).ln();
    let mut out: Vec<usize> = (0..count)
        .map(|i| ((top * i as f64 / (count - 1) as f64).exp() - 1.0).round() as usize)
        .map(|k| k.min(k_max))
        .collect();
    out.dedup();
    out
}

fn schedules(config: &ExperimentConfig, eta: f64) -> Result<Vec<Schedule>> {
    config.ms.iter().map(|&m| Schedule::polynomial(eta, m)).collect()
}

fn auto_horizon(
    sd: &SpectralData,
    spec: &ProblemSpec,
    scheds: &[Schedule],
    config: &ExperimentConfig,
) -> Result<usize> {
    if spec.tau2 == 0.0 {
        return Ok(MIN_AUTO_HORIZON);
    }
    let mut largest: f64 = 0.0;
    for s in scheds {
        largest = largest.max(aggregate_stop(sd, spec, s, config.pairing)?);
    }
    let k = (HORIZON_FACTOR * largest).ceil();
    Ok(if k.is_finite() {
        (k as usize).clamp(MIN_AUTO_HORIZON, MAX_AUTO_HORIZON)
    } else {
        MAX_AUTO_HORIZON
    })
}

/// Runs every m of the configuration on one data draw.
pub fn run_figure1(config: &ExperimentConfig) -> Result<Figure1Run> {
    config.validate()?;
    let (sd, spec) = gen_powerlaw_data(config, config.seed)?;
    let eta = config.eta_scale / sd.lambda_max_sigma_hat();
    let scheds = schedules(config, eta)?;
    let k_max = match config.k_max {
        Some(k) => k,
        None => auto_horizon(&sd, &spec, &scheds, config)?,
    };
    let mc_ks = if config.trials >= 2 {
        log_spaced(k_max, config.mc_points)
    } else {
        Vec::new()
    };

    let panels = config
        .ms
        .par_iter()
        .zip(scheds.par_iter())
        .map(|(&m, schedule)| {
            let (report, mut curve) = if spec.tau2 == 0.0 {
                noiseless(&sd, &spec, schedule, k_max)?
            } else {
                stopping_report(&sd, &spec, schedule, k_max, PriorMode::Isotropic, config.pairing)?
            };
            if !mc_ks.is_empty() {
                let mc = McConfig {
                    engine: McEngine::ClosedForm,
                    mode: PriorMode::Isotropic,
                    ..McConfig::new(config.trials, config.seed)
                };
                let est = mc_risk_curve(&sd, &spec, schedule, &mc_ks, &mc)?;
                curve.attach_mc(&mc_ks, &est);
            }
            Ok(Figure1Panel {
                m,
                schedule: schedule.clone(),
                curve,
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Figure1Run {
        config: config.clone(),
        eta,
        k_max,
        mc_ks,
        panels,
    })
}

/// Without noise nothing is gained by stopping: the estimate is the horizon.
fn noiseless(
    sd: &SpectralData,
    spec: &ProblemSpec,
    schedule: &Schedule,
    k_max: usize,
) -> Result<(StoppingReport, RiskCurve)> {
    let (true_k, curve) = true_optimal_stop(sd, spec, schedule, k_max, PriorMode::Isotropic)?;
    let report = StoppingReport {
        per_direction: Vec::new(),
        aggregate_k: f64::INFINITY,
        true_k,
        risk_at_estimate: curve.analytic[k_max],
        risk_at_true: curve.analytic[true_k],
        raskutti_k: None,
    };
    Ok((report, curve))
}

pub fn curve_file_name(m: f64) -> String {
    format!("risk_m{m}.csv")
}

fn metadata(run: &Figure1Run) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "version={}", env!("CARGO_PKG_VERSION"));
    for (k, v) in run.config.describe() {
        let _ = writeln!(s, "{k}={v}");
    }
    let _ = writeln!(s, "eta={}", run.eta);
    let _ = writeln!(s, "k_max={}", run.k_max);
    let _ = writeln!(s, "rng={RNG_ALGORITHM}");
    let _ = writeln!(s, "risk_mode=isotropic prior, analytic");
    let _ = writeln!(s, "mc_engine=closed form with sampled noise and beta_star");
    let ks: Vec<String> = run.mc_ks.iter().map(usize::to_string).collect();
    let _ = writeln!(s, "mc_ks={}", ks.join(","));
    for p in &run.panels {
        let _ = writeln!(s, "schedule_m{}={}", p.m, p.schedule);
    }
    s
}

/// Writes one curve CSV per m, `summary.csv`, `metadata.txt` and
/// `figure1.svg` into `dir`; returns the written paths.
pub fn write_figure1(run: &Figure1Run, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for p in &run.panels {
        let path = dir.join(curve_file_name(p.m));
        write_risk_curve(&p.curve, &path)?;
        written.push(path);
    }
    let summary = dir.join("summary.csv");
    write_summary(&run.summary_rows(), &summary)?;
    written.push(summary);

    let meta = dir.join("metadata.txt");
    std::fs::write(&meta, metadata(run)).map_err(|e| Error::io(&meta, e))?;
    written.push(meta);

    let svg = dir.join("figure1.svg");
    plot_svg(&[run.panels_for_plot()], &svg)?;
    written.push(svg);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_spacing_covers_ends() {
        let ks = log_spaced(1000, 16);
        assert_eq!(ks[0], 0);
        assert_eq!(*ks.last().unwrap(), 1000);
        assert!(ks.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(log_spaced(10, 1), vec![10]);
        assert!(log_spaced(10, 0).is_empty());
    }
}

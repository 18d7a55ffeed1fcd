//! Command-line front end: trajectories, risk curves, stopping times, the
//! ridge correspondence and the power-law figure experiment.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use earlystop::experiments::config::parse_list;
use earlystop::experiments::{
    gen_powerlaw_data, log_spaced, plot_svg, read_matrix, read_vector, run_figure1, write_figure1, write_risk_curve,
    write_summary, write_table, ExperimentConfig, Figure1Run, Panel, SummaryRow,
};
use earlystop::trajectory::beta_tilde_from_phi;
use earlystop::{
    benefit_condition, gd_run, mc_risk_curve, one_step_ridge, phi_closed_polynomial, phi_product, risk_curve_dense,
    risk_lower_bound, stopping_report, verify_equivalence, Error, McConfig, McEngine, PhiTracker, PriorMode,
    ProblemSpec, RatePairing, Result, RiskCurve, Schedule, SpectralData,
};
use nalgebra::{DMatrix, DVector};

/// Default horizon when neither the config nor a flag sets one.
const DEFAULT_K_MAX: usize = 200;
const TRAJECTORY_TOL: f64 = 1e-8;
const RIDGE_TOL: f64 = 1e-10;

#[derive(Parser)]
#[command(
    name = "earlystop",
    version,
    about = "Exact gradient-descent dynamics and early stopping for least squares"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Experiment settings. Precedence: defaults, then --config, then
/// EARLYSTOP_SEED, then these flags.
#[derive(Args, Clone, Default)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    /// Spectrum exponent: Sigma_jj = j^-alpha.
    #[arg(long)]
    alpha: Option<f64>,
    /// Noise scale.
    #[arg(long)]
    tau: Option<f64>,
    /// Polynomial decay powers, e.g. `0,1/4,1/2`.
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    k_max: Option<usize>,
    /// Monte-Carlo trials (0 disables the overlay).
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
struct Data {
    /// Design matrix CSV (one sample per row); needs --y.
    #[arg(long, requires = "y")]
    x: Option<PathBuf>,
    /// Response CSV; needs --x.
    #[arg(long, requires = "x")]
    y: Option<PathBuf>,
    /// Schedule such as `constant:0.1`, `poly:0.5:0.25`, `exp:0.9`;
    /// defaults to eta_scale / lambda_max / k^m for each configured m.
    #[arg(long)]
    schedule: Option<String>,
    /// Ridge parameter.
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form iterates checked against the literal iteration.
    Trajectory {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Data,
    },
    /// Expected excess-risk curve with an optional Monte-Carlo overlay.
    Risk {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Data,
        /// Use the drawn beta_* instead of the isotropic prior.
        #[arg(long)]
        fixed: bool,
    },
    /// Stopping-time estimates against the true argmin.
    Stop {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Data,
        /// Divide the log target by Lambda_j instead of Lambda_j / n.
        #[arg(long)]
        gram: bool,
    },
    /// Stopped run versus generalized ridge, and one-step ridge.
    EquivalenceCheck {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Data,
        /// Stopping iteration.
        #[arg(long, default_value_t = 20)]
        t: usize,
    },
    /// Risk curves and stopping times for eta / k^m on power-law data.
    ReproduceFig1 {
        #[command(flatten)]
        common: Common,
        /// Run the four reference configurations into subdirectories.
        #[arg(long)]
        all: bool,
    },
    /// Quick internal consistency checks.
    Selftest {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn resolve_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply_env()?;
    if let Some(v) = c.n {
        cfg.n = v;
    }
    if let Some(v) = c.p {
        cfg.p = v;
    }
    if let Some(v) = c.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = c.tau {
        cfg.tau = v;
    }
    if let Some(v) = &c.m {
        cfg.ms = parse_list("m", v)?;
    }
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    if c.k_max.is_some() {
        cfg.k_max = c.k_max;
    }
    if let Some(v) = c.trials {
        cfg.trials = v;
    }
    if let Some(v) = &c.out {
        cfg.output_dir = v.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

struct Problem {
    sd: SpectralData,
    spec: ProblemSpec,
    /// beta_* is known (synthetic data).
    synthetic: bool,
}

fn load_problem(cfg: &ExperimentConfig, data: &Data) -> Result<Problem> {
    match (&data.x, &data.y) {
        (Some(xp), Some(yp)) => {
            let x = read_matrix(xp)?;
            let y = read_vector(yp)?;
            let p = x.ncols();
            let sd = SpectralData::decompose(x, y, cfg.rank_tol)?;
            let spec = ProblemSpec::new(
                DVector::zeros(p),
                DVector::zeros(p),
                cfg.tau * cfg.tau,
                cfg.sigma2.unwrap_or(1.0 / p as f64),
                data.lambda,
                DMatrix::identity(p, p),
            )?;
            Ok(Problem {
                sd,
                spec,
                synthetic: false,
            })
        }
        _ => {
            let (sd, mut spec) = gen_powerlaw_data(cfg, cfg.seed)?;
            spec.lambda = data.lambda;
            spec.validate()?;
            Ok(Problem {
                sd,
                spec,
                synthetic: true,
            })
        }
    }
}

/// (label, m, schedule) triples: the --schedule flag, or one polynomial
/// schedule per configured m.
fn schedules(cfg: &ExperimentConfig, data: &Data, sd: &SpectralData) -> Result<Vec<(String, Option<f64>, Schedule)>> {
    if let Some(s) = &data.schedule {
        let sched: Schedule = s.parse()?;
        return Ok(vec![("custom".into(), None, sched)]);
    }
    let lmax = sd.lambda_max_sigma_hat();
    if lmax <= 0.0 {
        return Err(Error::Validation("X is zero; give --schedule explicitly".into()));
    }
    let eta = cfg.eta_scale / (lmax + data.lambda);
    cfg.ms
        .iter()
        .map(|&m| Ok((format!("m{m}"), Some(m), Schedule::polynomial(eta, m)?)))
        .collect()
}

fn out_dir(cfg: &ExperimentConfig) -> Result<&Path> {
    let dir = cfg.output_dir.as_path();
    std::fs::create_dir_all(dir).map_err(|e| Error::Validation(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn cmd_trajectory(common: &Common, data: &Data) -> Result<()> {
    let cfg = resolve_config(common)?;
    let prob = load_problem(&cfg, data)?;
    let k_max = cfg.k_max.unwrap_or(DEFAULT_K_MAX);
    let dir = out_dir(&cfg)?;
    let p = prob.sd.p();
    for (label, _, schedule) in schedules(&cfg, data, &prob.sd)? {
        let literal = gd_run(&prob.sd, &prob.spec, &schedule, k_max)?;
        let mut tracker = PhiTracker::new(prob.spec.lambda, &prob.sd.eig_sigma_hat());
        let mut rows = Vec::with_capacity(k_max + 1);
        let mut worst: f64 = 0.0;
        for point in &literal {
            tracker.advance_to(&schedule, point.k)?;
            let tilde = beta_tilde_from_phi(&prob.sd, &prob.spec, &tracker.diagonal())?;
            let beta = prob.sd.from_eigenbasis(&tilde)?;
            worst = worst.max((&beta - &point.beta).norm() / point.beta.norm().max(1e-12));
            let mut row = vec![point.k as f64];
            row.extend(beta.iter());
            rows.push(row);
        }
        let mut header = vec!["k".to_string()];
        header.extend((1..=p).map(|j| format!("beta{j}")));
        let path = dir.join(format!("trajectory_{label}.csv"));
        write_table(&header, &rows, &path)?;
        println!(
            "{schedule}: k = 0..{k_max}, max relative deviation from the iteration {worst:.3e} -> {}",
            path.display()
        );
        if worst > TRAJECTORY_TOL {
            return Err(Error::NumericalConsistency(format!(
                "closed form deviates from the iteration by {worst:e} (> {TRAJECTORY_TOL:e})"
            )));
        }
    }
    Ok(())
}

fn prior_mode(prob: &Problem, fixed: bool) -> Result<PriorMode> {
    if fixed && !prob.synthetic {
        return Err(Error::Validation(
            "--fixed needs beta_*, which is only known for synthetic data".into(),
        ));
    }
    Ok(if fixed { PriorMode::Fixed } else { PriorMode::Isotropic })
}

fn cmd_risk(common: &Common, data: &Data, fixed: bool) -> Result<()> {
    let cfg = resolve_config(common)?;
    let prob = load_problem(&cfg, data)?;
    let mode = prior_mode(&prob, fixed)?;
    let k_max = cfg.k_max.unwrap_or(DEFAULT_K_MAX);
    let dir = out_dir(&cfg)?;
    let mut curves: Vec<(String, RiskCurve)> = Vec::new();
    for (label, _, schedule) in schedules(&cfg, data, &prob.sd)? {
        let mut curve = risk_curve_dense(&prob.sd, &prob.spec, &schedule, k_max, mode)?;
        if cfg.trials >= 2 {
            let ks = log_spaced(k_max, cfg.mc_points);
            let mc = McConfig {
                engine: McEngine::ClosedForm,
                mode,
                ..McConfig::new(cfg.trials, cfg.seed)
            };
            curve.attach_mc(&ks, &mc_risk_curve(&prob.sd, &prob.spec, &schedule, &ks, &mc)?);
        }
        let path = dir.join(format!("risk_{label}.csv"));
        write_risk_curve(&curve, &path)?;
        let i = curve.argmin_index().unwrap_or(0);
        println!(
            "{schedule}: min risk {:.6e} at k = {} (risk at k = {k_max}: {:.6e}) -> {}",
            curve.analytic[i],
            curve.ks[i],
            curve.analytic[k_max],
            path.display()
        );
        curves.push((label, curve));
    }
    let panels: Vec<Panel> = curves
        .iter()
        .map(|(l, c)| Panel {
            show_mc: true,
            ..Panel::bare(l.clone(), c)
        })
        .collect();
    plot_svg(&[panels], &dir.join("risk.svg"))
}

fn cmd_stop(common: &Common, data: &Data, gram: bool) -> Result<()> {
    let cfg = resolve_config(common)?;
    let prob = load_problem(&cfg, data)?;
    let pairing = if gram { RatePairing::Gram } else { cfg.pairing };
    let k_max = cfg.k_max.unwrap_or(DEFAULT_K_MAX);
    let dir = out_dir(&cfg)?;
    let mode = PriorMode::Isotropic;
    let bound = risk_lower_bound(&prob.sd, &prob.spec, mode)?;
    println!(
        "risk lower bound: {:.6e} (test-covariance weighted {:.6e})",
        bound.displayed, bound.weighted
    );
    let mut summary = Vec::new();
    for (label, m, schedule) in schedules(&cfg, data, &prob.sd)? {
        let (report, curve) = stopping_report(&prob.sd, &prob.spec, &schedule, k_max, mode, pairing)?;
        println!("== {schedule}");
        print!("{report}");
        match benefit_condition(&prob.sd, &prob.spec, &schedule, mode) {
            Ok(b) => println!("early stopping    : {}", b.verdict),
            Err(e) => println!("early stopping    : not assessed ({e})"),
        }
        write_risk_curve(&curve, &dir.join(format!("risk_{label}.csv")))?;
        if let Some(m) = m {
            summary.push(SummaryRow {
                m,
                true_k: report.true_k,
                est_k: report.aggregate_k,
                raskutti_k: report.raskutti_k,
                min_risk: report.risk_at_true,
                risk_at_est: report.risk_at_estimate,
            });
        }
    }
    if !summary.is_empty() {
        write_summary(&summary, &dir.join("summary.csv"))?;
    }
    Ok(())
}

/// Ridge solution from the normal equations, or the minimum-norm
/// interpolant when lambda = 0 and X has full row rank.
fn direct_ridge(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Option<DVector<f64>> {
    let (n, p) = x.shape();
    if lambda == 0.0 && n < p {
        let w = (x * x.transpose()).cholesky()?.solve(y);
        return Some(x.transpose() * w);
    }
    let a = x.transpose() * x + DMatrix::identity(p, p) * (lambda * n as f64);
    Some(a.cholesky()?.solve(&(x.transpose() * y)))
}

fn cmd_equivalence(common: &Common, data: &Data, t: usize) -> Result<()> {
    let cfg = resolve_config(common)?;
    let mut prob = load_problem(&cfg, data)?;
    prob.spec.lambda = 0.0;
    prob.spec.beta0 = DVector::zeros(prob.sd.p());
    let mut failures = Vec::new();
    for (_, _, schedule) in schedules(
        &cfg,
        &Data {
            lambda: 0.0,
            ..data.clone()
        },
        &prob.sd,
    )? {
        let rep = verify_equivalence(&prob.sd, &prob.spec, &schedule, t)?;
        println!(
            "{schedule}: stopped at T = {t} vs generalized ridge, max relative error {:.3e} [{}]",
            rep.max_rel_err,
            if rep.pass { "pass" } else { "FAIL" }
        );
        if !rep.pass {
            failures.push(format!("{schedule} at T = {t}"));
        }
    }
    for lambda in [0.0, 0.01, 1.0, 100.0] {
        let step = one_step_ridge(&prob.sd, lambda)?;
        match direct_ridge(prob.sd.x(), prob.sd.y(), lambda) {
            Some(direct) => {
                let err = (&step - &direct).norm() / direct.norm().max(1e-300);
                let ok = err <= RIDGE_TOL;
                println!(
                    "one-step ridge, lambda = {lambda}: relative error {err:.3e} [{}]",
                    if ok { "pass" } else { "FAIL" }
                );
                if !ok {
                    failures.push(format!("one-step ridge at lambda = {lambda}"));
                }
            }
            None => println!("one-step ridge, lambda = {lambda}: skipped (normal equations singular)"),
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Error::NumericalConsistency(format!("failed: {}", failures.join("; "))))
    }
}

fn print_run(name: &str, run: &Figure1Run) {
    println!("{name}: eta = {:.6e}, k_max = {}", run.eta, run.k_max);
    println!(
        "  {:>6} {:>8} {:>12} {:>10} {:>14} {:>8}",
        "m", "true_k", "est_k", "raskutti", "min_risk", "ratio"
    );
    for p in &run.panels {
        let r = &p.report;
        let rask = r.raskutti_k.map_or("-".to_string(), |k| k.to_string());
        println!(
            "  {:>6} {:>8} {:>12.3} {:>10} {:>14.6e} {:>8.4}",
            p.m,
            r.true_k,
            r.aggregate_k,
            rask,
            r.risk_at_true,
            p.estimate_ratio()
        );
    }
    println!("  spread of minimum risks across m: {:.4}", run.min_risk_spread());
}

fn cmd_fig1(common: &Common, all: bool) -> Result<()> {
    let cfg = resolve_config(common)?;
    if !all {
        let run = run_figure1(&cfg)?;
        write_figure1(&run, &cfg.output_dir)?;
        print_run("figure 1", &run);
        return Ok(());
    }
    let mut runs = Vec::new();
    for (name, c) in cfg.reference_grid() {
        let run = run_figure1(&c)?;
        write_figure1(&run, &cfg.output_dir.join(&name))?;
        print_run(&name, &run);
        runs.push((name, run));
    }
    let rows: Vec<Vec<Panel>> = runs
        .iter()
        .map(|(name, run)| {
            run.panels_for_plot()
                .into_iter()
                .map(|p| Panel {
                    title: format!("{name}, {}", p.title),
                    ..p
                })
                .collect()
        })
        .collect();
    plot_svg(&rows, &cfg.output_dir.join("figure1_all.svg"))
}

/// Small instances from the power-law generator with varied shapes.
fn selftest_instances(seed: u64) -> Result<Vec<(SpectralData, ProblemSpec)>> {
    let shapes = [(5, 3), (3, 5), (8, 8), (12, 4), (4, 12), (1, 6), (6, 1)];
    shapes
        .iter()
        .enumerate()
        .map(|(i, &(n, p))| {
            let cfg = ExperimentConfig {
                n,
                p,
                alpha: 0.5 * i as f64,
                tau: 0.5,
                ..Default::default()
            };
            gen_powerlaw_data(&cfg, seed.wrapping_add(i as u64))
        })
        .collect()
}

fn cmd_selftest(seed: u64) -> Result<()> {
    let mut failures = Vec::new();
    let mut check = |name: &str, worst: f64, tol: f64| {
        let ok = worst <= tol;
        println!(
            "{} {name}: {worst:.3e} (tolerance {tol:e})",
            if ok { "PASS" } else { "FAIL" }
        );
        if !ok {
            failures.push(name.to_string());
        }
    };

    let mut worst: f64 = 0.0;
    for m in 1..=3u32 {
        for (i, zeta) in [0.1, 0.7, 1.3].into_iter().enumerate() {
            let s = Schedule::polynomial(0.6, m as f64)?;
            let k = 25 * (i + 1);
            let closed = phi_closed_polynomial(0.6, zeta, m, k as u64)?.to_f64();
            let direct = phi_product(&s, zeta, k)?.to_f64();
            worst = worst.max((closed - direct).abs() / direct.abs().max(1e-300));
        }
    }
    check("polynomial phi closed form vs product", worst, 1e-9);

    let instances = selftest_instances(seed)?;
    let mut traj: f64 = 0.0;
    let mut equiv: f64 = 0.0;
    for (sd, spec) in &instances {
        let eta = 0.9 / sd.lambda_max_sigma_hat();
        for s in [
            Schedule::constant(eta)?,
            Schedule::polynomial(eta, 0.5)?,
            Schedule::polynomial(eta, 2.0)?,
        ] {
            let run = gd_run(sd, spec, &s, 60)?;
            let mut tracker = PhiTracker::new(spec.lambda, &sd.eig_sigma_hat());
            for point in run.iter().step_by(7) {
                tracker.advance_to(&s, point.k)?;
                let beta = sd.from_eigenbasis(&beta_tilde_from_phi(sd, spec, &tracker.diagonal())?)?;
                traj = traj.max((&beta - &point.beta).norm() / point.beta.norm().max(1e-12));
            }
            equiv = equiv.max(verify_equivalence(sd, spec, &s, 30)?.max_rel_err);
        }
    }
    check("closed-form iterate vs iteration", traj, TRAJECTORY_TOL);
    check("stopped run vs generalized ridge", equiv, 1e-8);

    if failures.is_empty() {
        println!("selftest passed");
        Ok(())
    } else {
        Err(Error::NumericalConsistency(format!(
            "selftest failed: {}",
            failures.join(", ")
        )))
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Trajectory { common, data } => cmd_trajectory(&common, &data),
        Command::Risk { common, data, fixed } => cmd_risk(&common, &data, fixed),
        Command::Stop { common, data, gram } => cmd_stop(&common, &data, gram),
        Command::EquivalenceCheck { common, data, t } => cmd_equivalence(&common, &data, t),
        Command::ReproduceFig1 { common, all } => cmd_fig1(&common, all),
        Command::Selftest { seed } => cmd_selftest(seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

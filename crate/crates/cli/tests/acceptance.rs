//! End-to-end acceptance run. Each criterion is timed on its own, prints one
//! PASS/FAIL line and counts as failed when it misses either its tolerance or
//! its runtime limit. The process exits non-zero if any criterion fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use earlystop::experiments::{run_figure1, ExperimentConfig};
use earlystop::{
    benefit_condition, closed_form_beta, gd_run, mc_risk_curve, one_step_ridge, phi_closed_additive,
    phi_closed_constant, phi_closed_exponential, phi_closed_polynomial, phi_derivative, phi_limit, risk_curve_analytic,
    risk_curve_dense, risk_lower_bound, verify_equivalence, McConfig, McEngine, PhiValue, PriorMode, ProblemSpec,
    Schedule, SpectralData, Verdict, DEFAULT_RANK_TOL,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

struct Outcome {
    ok: bool,
    detail: String,
}

type Criterion = (u32, &'static str, Duration, fn() -> Outcome);

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal_mat<R: Rng>(r: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| {
        <StandardNormal as Distribution<f64>>::sample(&StandardNormal, r)
    })
}

fn normal_vec<R: Rng>(r: &mut R, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| {
        <StandardNormal as Distribution<f64>>::sample(&StandardNormal, r)
    })
}

struct Instance {
    sd: SpectralData,
    spec: ProblemSpec,
}

/// Gaussian design with n, p in [2, 20], noisy response, random start.
fn instance<R: Rng>(r: &mut R, lambda: f64, sigma_test: Option<DMatrix<f64>>) -> Instance {
    let (n, p) = (r.random_range(2..=20), r.random_range(2..=20));
    let x = normal_mat(r, n, p);
    let beta_star = normal_vec(r, p);
    let y = &x * &beta_star + normal_vec(r, n) * 0.5;
    let sd = SpectralData::decompose(x, y, DEFAULT_RANK_TOL).unwrap();
    let sigma_test = sigma_test.map_or_else(|| DMatrix::identity(p, p), |m| m.view((0, 0), (p, p)).into_owned());
    let spec = ProblemSpec::new(beta_star, normal_vec(r, p), 0.25, 1.0, lambda, sigma_test).unwrap();
    Instance { sd, spec }
}

/// Constant, polynomial, additive decay, exponential and cyclic schedules
/// with rates at most `scale`, valid for `k` steps.
fn family<R: Rng>(r: &mut R, which: usize, scale: f64, k: usize) -> Schedule {
    let c = r.random_range(0.1..1.0) * scale;
    match which % 5 {
        0 => Schedule::constant(c),
        1 => Schedule::polynomial(c, r.random_range(0.0..2.0)),
        2 => Schedule::additive_decay(c, c / (k as f64 + 2.0)),
        3 => Schedule::exponential(r.random_range(0.05..0.98f64).min(scale)),
        _ => Schedule::cyclic(Schedule::polynomial(c, 1.0).unwrap(), r.random_range(2..=10)),
    }
    .unwrap()
}

fn rel_dev(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-12)
}

fn oracle_equivalence() -> Outcome {
    let mut r = rng(1);
    let mut worst: f64 = 0.0;
    for case in 0..300 {
        let lambda = [0.0, 0.05, 0.5][case % 3];
        let inst = instance(&mut r, lambda, None);
        let k = r.random_range(1..=200);
        let scale = 1.0 / (lambda + inst.sd.lambda_max_sigma_hat());
        let s = family(&mut r, case, scale, k);
        let iterates = gd_run(&inst.sd, &inst.spec, &s, k).unwrap();
        for (i, it) in iterates.iter().enumerate() {
            let closed = closed_form_beta(&inst.sd, &inst.spec, &s, i).unwrap();
            worst = worst.max(rel_dev(&closed.beta, &it.beta));
        }
    }
    Outcome {
        ok: worst <= 1e-8,
        detail: format!("max relative deviation {worst:.2e} over 300 instances, every k (tol 1e-8)"),
    }
}

/// Product of (1 - eta_i zeta) accumulated as a log-magnitude and sign.
fn direct_product(s: &Schedule, zeta: f64, k: usize) -> (f64, bool) {
    let mut log = 0.0;
    let mut negative = false;
    for i in 1..=k {
        let f = 1.0 - s.eta_at(i).unwrap() * zeta;
        log += f.abs().ln();
        negative ^= f < 0.0;
    }
    (log, negative)
}

fn rel_gap(closed: PhiValue, (log, negative): (f64, bool)) -> f64 {
    if closed.sign() == 0 || (closed.sign() < 0) != negative {
        return f64::INFINITY;
    }
    (closed.log_magnitude() - log).exp_m1().abs()
}

fn phi_closed_forms() -> Outcome {
    let mut r = rng(2);
    let mut worst = [0.0f64; 4];
    for _ in 0..200 {
        let k = r.random_range(0..=200usize);

        let eta = r.random_range(1e-3..1.0);
        let zeta = r.random_range(0.0..1.9) / eta;
        let s = Schedule::constant(eta).unwrap();
        let gap = rel_gap(
            phi_closed_constant(eta, zeta, k as f64).unwrap(),
            direct_product(&s, zeta, k),
        );
        worst[0] = worst[0].max(gap);

        let m = r.random_range(1..=4u32);
        let s = Schedule::polynomial(eta, m as f64).unwrap();
        let gap = rel_gap(
            phi_closed_polynomial(eta, zeta, m, k as u64).unwrap(),
            direct_product(&s, zeta, k),
        );
        worst[1] = worst[1].max(gap);

        let step = eta / r.random_range(210.0..2000.0);
        let zeta_a = r.random_range(0.01..1.9) / eta;
        let s = Schedule::additive_decay(eta, step).unwrap();
        let gap = rel_gap(
            phi_closed_additive(eta, step, zeta_a, k as u64).unwrap(),
            direct_product(&s, zeta_a, k),
        );
        worst[2] = worst[2].max(gap);

        let q = r.random_range(0.05..0.95);
        let zeta_q = r.random_range(0.0..0.99) / q;
        let s = Schedule::exponential(q).unwrap();
        let gap = rel_gap(
            phi_closed_exponential(q, zeta_q, k as f64).unwrap(),
            direct_product(&s, zeta_q, k),
        );
        worst[3] = worst[3].max(gap);
    }

    // phi'(k) / phi'(k + m) for the exponential schedule tends to q^{-m}
    let (q, m) = (0.5, 2.0);
    let s = Schedule::exponential(q).unwrap();
    let ratio_err = [0.3, 1.0, 1.9]
        .iter()
        .map(|&zeta| {
            let ratio = phi_derivative(&s, zeta, 40.0).unwrap() / phi_derivative(&s, zeta, 40.0 + m).unwrap();
            (ratio - q.powf(-m)).abs()
        })
        .fold(0.0, f64::max);

    let max = worst.iter().copied().fold(0.0, f64::max);
    Outcome {
        ok: max <= 1e-9 && ratio_err <= 1e-3,
        detail: format!(
            "closed vs product: constant {:.1e}, polynomial {:.1e}, additive {:.1e}, exponential {:.1e} (tol 1e-9); \
             derivative ratio at k = 40 off by {ratio_err:.1e} (tol 1e-3)",
            worst[0], worst[1], worst[2], worst[3]
        ),
    }
}

fn risk_formula() -> Outcome {
    let mut r = rng(3);
    let (mut exceed, mut worst_z, mut worst_split) = (0usize, 0.0f64, 0.0f64);
    for case in 0..20 {
        let a = normal_mat(&mut r, 20, 20);
        let inst = instance(&mut r, 0.0, Some(&a * a.transpose() / 20.0));
        let s = family(&mut r, case, 1.0 / inst.sd.lambda_max_sigma_hat(), 200);
        let mut ks: Vec<usize> = (0..=200).collect();
        for i in 0..10 {
            let j = r.random_range(i..ks.len());
            ks.swap(i, j);
        }
        ks.truncate(10);
        ks.sort_unstable();

        let curve = risk_curve_analytic(&inst.sd, &inst.spec, &s, &ks, PriorMode::Fixed).unwrap();
        // bias from a noiseless copy, variance from a copy started at beta_*
        let noiseless = ProblemSpec {
            tau2: 0.0,
            ..inst.spec.clone()
        };
        let unbiased = ProblemSpec {
            beta0: inst.spec.beta_star.clone(),
            ..inst.spec.clone()
        };
        let bias = risk_curve_analytic(&inst.sd, &noiseless, &s, &ks, PriorMode::Fixed)
            .unwrap()
            .analytic;
        let variance = risk_curve_analytic(&inst.sd, &unbiased, &s, &ks, PriorMode::Fixed)
            .unwrap()
            .analytic;
        let mc = McConfig {
            engine: McEngine::Iterate,
            ..McConfig::new(2000, 3000 + case as u64)
        };
        let est = mc_risk_curve(&inst.sd, &inst.spec, &s, &ks, &mc).unwrap();
        for (i, e) in est.iter().enumerate() {
            let z = (curve.analytic[i] - e.mean).abs() / e.stderr;
            worst_z = worst_z.max(z);
            exceed += usize::from(z > 3.0);
            let split = (bias[i] - curve.bias_part[i]).abs()
                + (variance[i] - curve.variance_part[i]).abs()
                + (bias[i] + variance[i] - curve.analytic[i]).abs();
            worst_split = worst_split.max(split / curve.analytic[i].abs().max(1.0));
        }
    }
    Outcome {
        ok: exceed == 0 && worst_split <= 1e-12,
        detail: format!(
            "{exceed} of 200 comparisons beyond 3 standard errors (largest |z| {worst_z:.2}); \
             bias + variance vs risk {worst_split:.1e} (tol 1e-12)"
        ),
    }
}

/// Minimum-norm least squares (lambda = 0) through QR, ridge through Cholesky.
fn direct_ridge(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> DVector<f64> {
    let (n, p) = x.shape();
    if lambda > 0.0 {
        let a = x.transpose() * x + DMatrix::identity(p, p) * (lambda * n as f64);
        return a.cholesky().unwrap().solve(&(x.transpose() * y));
    }
    if n >= p {
        let qr = x.clone().qr();
        qr.r().solve_upper_triangular(&qr.q().tr_mul(y)).unwrap()
    } else {
        // X = R^T Q^T, so the minimum-norm solution is Q R^{-T} y
        let qr = x.transpose().qr();
        qr.q() * qr.r().transpose().solve_lower_triangular(y).unwrap()
    }
}

fn ridge_equivalence() -> Outcome {
    let mut r = rng(4);
    let (mut failed, mut worst) = (0usize, 0.0f64);
    for case in 0..300 {
        let mut inst = instance(&mut r, 0.0, None);
        inst.spec.beta0 = DVector::zeros(inst.spec.p());
        let t = r.random_range(1..=200);
        let s = family(&mut r, case, 1.0 / inst.sd.lambda_max_sigma_hat(), t);
        let rep = verify_equivalence(&inst.sd, &inst.spec, &s, t).unwrap();
        worst = worst.max(rep.max_rel_err);
        failed += usize::from(!rep.pass || rep.max_rel_err > 1e-8);
    }
    let mut ridge_worst: f64 = 0.0;
    for _ in 0..100 {
        let inst = instance(&mut r, 0.0, None);
        for lambda in [0.0, 0.01, 1.0, 100.0] {
            let step = one_step_ridge(&inst.sd, lambda).unwrap();
            ridge_worst = ridge_worst.max(rel_dev(&step, &direct_ridge(inst.sd.x(), inst.sd.y(), lambda)));
        }
    }
    Outcome {
        ok: failed == 0 && ridge_worst <= 1e-10,
        detail: format!(
            "{failed} of 300 stopped runs off their generalized ridge (worst {worst:.1e}, tol 1e-8); \
             one-step ridge vs direct solve {ridge_worst:.1e} (tol 1e-10)"
        ),
    }
}

fn figure_reproduction() -> Outcome {
    let mut bad = Vec::new();
    let (mut worst_ratio, mut worst_spread) = (0.0f64, 0.0f64);
    for (name, cfg) in ExperimentConfig::default().reference_grid() {
        let run = run_figure1(&cfg).unwrap();
        for p in &run.panels {
            let ratio = p.estimate_ratio();
            worst_ratio = worst_ratio.max(ratio);
            if !p.has_interior_minimum(run.k_max) {
                bad.push(format!("{name} m = {}: minimum at k = {}", p.m, p.report.true_k));
            }
            if ratio > 1.15 {
                bad.push(format!("{name} m = {}: ratio {ratio:.4}", p.m));
            }
        }
        let spread = run.min_risk_spread();
        worst_spread = worst_spread.max(spread);
        if spread > 0.02 {
            bad.push(format!("{name}: minimum-risk spread {spread:.4}"));
        }
    }
    Outcome {
        ok: bad.is_empty(),
        detail: format!(
            "16 cells, largest estimate/optimum ratio {worst_ratio:.4} (tol 1.15), \
             largest spread {worst_spread:.4} (tol 0.02){}",
            if bad.is_empty() {
                String::new()
            } else {
                format!("; misses: {}", bad.join(", "))
            }
        ),
    }
}

/// Fast-decay instance: tau^2 set below every direction's break-even level so
/// that the limit of phi stays above each optimum.
fn stalled_instance<R: Rng>(r: &mut R, schedule: impl Fn(f64) -> Schedule) -> (Instance, Schedule) {
    let mut inst = instance(r, 0.0, None);
    let s = schedule(1.0 / inst.sd.lambda_max_sigma_hat());
    let sigma2 = inst.spec.sigma2;
    let lam = inst.sd.lambda();
    let zetas = inst.sd.eig_sigma_hat();
    let tau2 = (0..inst.sd.rank())
        .map(|j| {
            let l = phi_limit(&s, zetas[j]).unwrap();
            l * lam[j] * sigma2 / (1.0 - l)
        })
        .fold(f64::INFINITY, f64::min)
        * 0.5;
    inst.spec = ProblemSpec::new(
        inst.spec.beta_star.clone(),
        inst.spec.beta0.clone(),
        tau2,
        sigma2,
        0.0,
        inst.spec.sigma_test.clone(),
    )
    .unwrap();
    (inst, s)
}

fn benefit_conditions() -> Outcome {
    let mut r = rng(6);
    let mut bad = Vec::new();
    let mut worst_margin = f64::INFINITY;
    let mut beneficial = 0;
    for case in 0..60 {
        let inst = instance(&mut r, 0.0, None);
        let scale = 1.0 / inst.sd.lambda_max_sigma_hat();
        let c = r.random_range(0.1..1.0) * scale;
        let s = if case % 2 == 0 {
            Schedule::constant(c).unwrap()
        } else {
            Schedule::polynomial(c, r.random_range(0.51..=1.0)).unwrap()
        };
        for mode in [PriorMode::Isotropic, PriorMode::Fixed] {
            let rep = benefit_condition(&inst.sd, &inst.spec, &s, mode).unwrap();
            if rep.verdict != Verdict::Beneficial {
                bad.push(format!("{s} ({mode}) classified {}", rep.verdict));
                continue;
            }
            beneficial += 1;
            let bound = risk_lower_bound(&inst.sd, &inst.spec, mode).unwrap().weighted;
            let curve = risk_curve_dense(&inst.sd, &inst.spec, &s, 5000, mode).unwrap();
            let min = curve.analytic.iter().copied().fold(f64::INFINITY, f64::min);
            worst_margin = worst_margin.min((min - bound) / bound);
            if min < bound * (1.0 - 1e-12) {
                bad.push(format!("{s} ({mode}): minimum {min:e} below bound {bound:e}"));
            }
        }
    }
    let mut stalled = 0;
    for case in 0..60 {
        let (inst, s) = if case % 2 == 0 {
            stalled_instance(&mut r, |scale| Schedule::polynomial(0.05 * scale, 2.0).unwrap())
        } else {
            stalled_instance(&mut r, |scale| Schedule::exponential(0.5f64.min(0.5 * scale)).unwrap())
        };
        let rep = benefit_condition(&inst.sd, &inst.spec, &s, PriorMode::Isotropic).unwrap();
        if rep.verdict != Verdict::NotBeneficial {
            bad.push(format!("{s} classified {}", rep.verdict));
            continue;
        }
        stalled += 1;
        // without a benefit the risk never turns back up
        let curve = risk_curve_dense(&inst.sd, &inst.spec, &s, 2000, PriorMode::Isotropic).unwrap();
        if curve.analytic.windows(2).any(|w| w[1] > w[0] * (1.0 + 1e-12)) {
            bad.push(format!("{s}: risk increases although no benefit was predicted"));
        }
    }
    Outcome {
        ok: bad.is_empty() && beneficial >= 50,
        detail: format!(
            "{beneficial} beneficial and {stalled} not-beneficial classifications as constructed; \
             smallest relative gap between curve minimum and lower bound {worst_margin:.2e}{}",
            if bad.is_empty() {
                String::new()
            } else {
                format!("; misses: {}", bad.join(", "))
            }
        ),
    }
}

fn csv_files(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(csv_files(&path));
        } else if path.extension().is_some_and(|e| e == "csv") {
            out.push(path);
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let status = Command::new(env!("CARGO_BIN_EXE_earlystop"))
            .args(["reproduce-fig1", "--all", "--seed", "7", "--out"])
            .arg(d.path())
            .output()
            .unwrap();
        if !status.status.success() {
            return Outcome {
                ok: false,
                detail: format!("reproduce-fig1 failed: {}", String::from_utf8_lossy(&status.stderr)),
            };
        }
    }
    let (a, b) = (csv_files(dirs[0].path()), csv_files(dirs[1].path()));
    let rel = |p: &Path, root: &Path| p.strip_prefix(root).unwrap().to_path_buf();
    let mut differing = Vec::new();
    for path in &a {
        let twin = dirs[1].path().join(rel(path, dirs[0].path()));
        if std::fs::read(path).ok() != std::fs::read(&twin).ok() {
            differing.push(rel(path, dirs[0].path()).display().to_string());
        }
    }
    Outcome {
        ok: !a.is_empty() && a.len() == b.len() && differing.is_empty(),
        detail: format!("{} CSV files per run, {} differ", a.len(), differing.len()),
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        (
            1,
            "closed-form trajectory vs gradient descent",
            Duration::from_secs(30),
            oracle_equivalence,
        ),
        (
            2,
            "closed-form phi vs direct product",
            Duration::from_secs(10),
            phi_closed_forms,
        ),
        (
            3,
            "analytic risk vs Monte Carlo",
            Duration::from_secs(120),
            risk_formula,
        ),
        (
            4,
            "early stopping as generalized ridge",
            Duration::from_secs(30),
            ridge_equivalence,
        ),
        (5, "figure reproduction", Duration::from_secs(300), figure_reproduction),
        (
            6,
            "benefit conditions and lower bound",
            Duration::from_secs(60),
            benefit_conditions,
        ),
        (
            7,
            "determinism of reproduce-fig1",
            Duration::from_secs(300),
            determinism,
        ),
    ];
    let mut failures = 0;
    for (id, name, limit, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let ok = outcome.ok && took < limit;
        failures += usize::from(!ok);
        println!(
            "{} criterion {id} ({name}): {}; {:.1} s (limit {} s)",
            if ok { "PASS" } else { "FAIL" },
            outcome.detail,
            took.as_secs_f64(),
            limit.as_secs()
        );
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} of 7 criteria failed");
        ExitCode::FAILURE
    }
}

mod common;

use common::{normal_mat, random_instance, rel_dev, rng, schedule_family};
use earlystop::{
    gd_final, gen_ridge_min_norm, one_step_ridge, ridge_matrix_from_stop, verify_equivalence, GeneralizedRidge,
    Schedule,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

fn zero_start(inst: &mut common::Instance) {
    inst.spec.beta0 = DVector::zeros(inst.spec.p());
}

/// (X^T X + n D^T D)^+ X^T y through a symmetric eigendecomposition.
fn normal_equation_solution(x: &DMatrix<f64>, y: &DVector<f64>, d: &DMatrix<f64>) -> DVector<f64> {
    let n = x.nrows() as f64;
    let a = x.transpose() * x + d.transpose() * d * n;
    let eig = a.symmetric_eigen();
    let cutoff = 1e-10 * eig.eigenvalues.amax();
    let inv = eig.eigenvalues.map(|l| if l > cutoff { 1.0 / l } else { 0.0 });
    &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose() * (x.transpose() * y)
}

#[test]
fn stopped_runs_are_generalized_ridge() {
    let mut r = rng(21);
    let mut worst: f64 = 0.0;
    for case in 0..300 {
        let mut inst = random_instance(&mut r, 0.0);
        zero_start(&mut inst);
        let t = r.random_range(1..=200);
        let s = schedule_family(&mut r, case, 1.0 / inst.sd.lambda_max_sigma_hat(), t);
        let report = verify_equivalence(&inst.sd, &inst.spec, &s, t).unwrap();
        worst = worst.max(report.max_rel_err);
        assert!(report.pass, "case {case}: {s} T {t} err {:e}", report.max_rel_err);
    }
    assert!(worst <= 1e-8);
}

#[test]
fn penalty_reproduces_the_iteration() {
    let mut r = rng(22);
    for case in 0..60 {
        let mut inst = random_instance(&mut r, 0.0);
        zero_start(&mut inst);
        let t = r.random_range(1..=50);
        let s = schedule_family(&mut r, case, 1.0 / inst.sd.lambda_max_sigma_hat(), t);
        let ridge = ridge_matrix_from_stop(&inst.sd, &s, t).unwrap();
        let ours = gen_ridge_min_norm(&inst.sd, &ridge).unwrap();
        let iterated = gd_final(&inst.sd, &inst.spec, &s, t).unwrap().beta;
        assert!(
            rel_dev(&ours, &iterated) < 1e-8,
            "case {case}: {:e}",
            rel_dev(&ours, &iterated)
        );
    }
}

#[test]
fn arbitrary_penalty_matches_normal_equations() {
    let mut r = rng(23);
    for _ in 0..50 {
        let inst = random_instance(&mut r, 0.0);
        let rows = r.random_range(1..=inst.spec.p());
        let d = normal_mat(&mut r, rows, inst.spec.p()) * 0.3;
        let ours = gen_ridge_min_norm(&inst.sd, &GeneralizedRidge::from_matrix(d.clone())).unwrap();
        assert!(rel_dev(&ours, &normal_equation_solution(inst.sd.x(), inst.sd.y(), &d)) < 1e-9);
    }
}

#[test]
fn one_step_lands_on_ridge() {
    let mut r = rng(24);
    for _ in 0..30 {
        let inst = random_instance(&mut r, 0.0);
        let (x, y) = (inst.sd.x(), inst.sd.y());
        let n = x.nrows() as f64;
        for lambda in [0.0, 0.01, 1.0, 100.0] {
            let direct = if lambda == 0.0 && x.nrows() < x.ncols() {
                // X has full row rank: X^T (X X^T)^{-1} y
                x.transpose() * (x * x.transpose()).cholesky().unwrap().solve(y)
            } else if lambda == 0.0 {
                (x.transpose() * x).cholesky().unwrap().solve(&(x.transpose() * y))
            } else {
                let a = x.transpose() * x + DMatrix::identity(x.ncols(), x.ncols()) * (lambda * n);
                a.cholesky().unwrap().solve(&(x.transpose() * y))
            };
            let step = one_step_ridge(&inst.sd, lambda).unwrap();
            assert!(
                rel_dev(&step, &direct) <= 1e-10,
                "lambda {lambda}: {:e}",
                rel_dev(&step, &direct)
            );
        }
    }
}

#[test]
fn nonzero_start_or_ridge_is_rejected() {
    let mut r = rng(25);
    let inst = random_instance(&mut r, 0.0);
    let s = Schedule::constant(0.5 / inst.sd.lambda_max_sigma_hat()).unwrap();
    assert!(verify_equivalence(&inst.sd, &inst.spec, &s, 5).is_err());
    let mut zero = random_instance(&mut r, 0.1);
    zero_start(&mut zero);
    assert!(verify_equivalence(&zero.sd, &zero.spec, &s, 5).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn penalty_weakens_with_time(seed in any::<u64>(), frac in 0.05f64..1.0, power in 0.0f64..2.0) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, 0.0);
        let s = Schedule::polynomial(frac / inst.sd.lambda_max_sigma_hat(), power).unwrap();
        let mut prev = ridge_matrix_from_stop(&inst.sd, &s, 1).unwrap().core;
        for t in 2..40 {
            let core = ridge_matrix_from_stop(&inst.sd, &s, t).unwrap().core;
            for j in 0..core.len() {
                prop_assert!(core[j] >= 0.0 && core[j] <= prev[j] * (1.0 + 1e-12));
            }
            prev = core;
        }
    }
}

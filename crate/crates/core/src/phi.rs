//! The contraction factor phi(k; zeta) = prod_{i<=k} (1 - eta_i zeta), its
//! closed forms for the standard schedule families, their extension to a real
//! iteration index, and derivatives of that extension.
//!
//! Everything is normalized so that phi(0; zeta) = 1; this is the ratio
//! phi(k)/phi(0) that enters the trajectory.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::schedule::Schedule;
use crate::special::{
    digamma, is_gamma_pole, ln_gamma, ln_gamma_ratio, qpochhammer_infinite, qpochhammer_ratio,
    qpochhammer_ratio_derivative, zeta_tail,
};

/// Tolerated |sin(arg)| of a product that must be real.
pub const IMAG_RESIDUE_TOL: f64 = 1e-8;

/// Upper bound on the number of steps taken when a limit is found numerically.
pub const LIMIT_MAX_STEPS: usize = 1_000_000;

/// A real number stored as sign and natural log of its magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiValue {
    log_magnitude: f64,
    sign: i8,
}

impl PhiValue {
    pub const ONE: PhiValue = PhiValue {
        log_magnitude: 0.0,
        sign: 1,
    };
    pub const ZERO: PhiValue = PhiValue {
        log_magnitude: f64::NEG_INFINITY,
        sign: 0,
    };

    pub fn new(log_magnitude: f64, sign: i8) -> Self {
        if sign == 0 || log_magnitude == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            PhiValue {
                log_magnitude,
                sign: sign.signum(),
            }
        }
    }

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            PhiValue {
                log_magnitude: x.abs().ln(),
                sign: if x > 0.0 { 1 } else { -1 },
            }
        }
    }

    /// Interprets `z` as the log of a (nearly) real number; the sign is read
    /// off the phase.
    pub fn from_complex_log(z: Complex64) -> Self {
        if z.re == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        let sign = if z.im.cos() >= 0.0 { 1 } else { -1 };
        PhiValue {
            log_magnitude: z.re,
            sign,
        }
    }

    pub fn log_magnitude(&self) -> f64 {
        self.log_magnitude
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    pub fn to_f64(&self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => s as f64 * self.log_magnitude.exp(),
        }
    }

    /// 1 - self, without cancellation when self is close to 1.
    pub fn one_minus(&self) -> f64 {
        match self.sign {
            0 => 1.0,
            1 => -self.log_magnitude.exp_m1(),
            _ => 1.0 + self.log_magnitude.exp(),
        }
    }

    /// self * (1 - t), with log1p used for small t.
    pub fn mul_one_minus(self, t: f64) -> Self {
        if self.is_zero() {
            return self;
        }
        let f = 1.0 - t;
        if f == 0.0 {
            return Self::ZERO;
        }
        let ln = if t.abs() < 0.5 { (-t).ln_1p() } else { f.abs().ln() };
        PhiValue {
            log_magnitude: self.log_magnitude + ln,
            sign: if f > 0.0 { self.sign } else { -self.sign },
        }
    }

    pub fn mul_factor(self, f: f64) -> Self {
        self * PhiValue::from_f64(f)
    }

    pub fn powi(self, n: u64) -> Self {
        if n == 0 {
            return Self::ONE;
        }
        if self.is_zero() {
            return self;
        }
        PhiValue {
            log_magnitude: self.log_magnitude * n as f64,
            sign: if self.sign < 0 && n % 2 == 1 { -1 } else { 1 },
        }
    }
}

impl std::ops::Mul for PhiValue {
    type Output = PhiValue;

    fn mul(self, other: PhiValue) -> PhiValue {
        if self.is_zero() || other.is_zero() {
            return PhiValue::ZERO;
        }
        PhiValue {
            log_magnitude: self.log_magnitude + other.log_magnitude,
            sign: self.sign * other.sign,
        }
    }
}

/// Panics when dividing by zero.
impl std::ops::Div for PhiValue {
    type Output = PhiValue;

    fn div(self, other: PhiValue) -> PhiValue {
        assert!(!other.is_zero(), "PhiValue division by zero");
        if self.is_zero() {
            return self;
        }
        PhiValue {
            log_magnitude: self.log_magnitude - other.log_magnitude,
            sign: self.sign * other.sign,
        }
    }
}

fn is_integer(x: f64) -> bool {
    x.fract() == 0.0
}

fn check_index(x: f64) -> Result<()> {
    if !(x.is_finite() && x >= 0.0) {
        return Err(Error::Domain(format!(
            "iteration index must be finite and >= 0, got {x}"
        )));
    }
    Ok(())
}

/// prod_{i=1}^k (1 - eta_i zeta), accumulated in signed log space.
pub fn phi_product(schedule: &Schedule, zeta: f64, k: usize) -> Result<PhiValue> {
    let mut v = PhiValue::ONE;
    for i in 1..=k {
        v = v.mul_one_minus(schedule.eta_at(i)? * zeta);
    }
    Ok(v)
}

/// Same product over an explicit list of rates.
pub fn phi_product_rates(rates: &[f64], zeta: f64) -> PhiValue {
    rates.iter().fold(PhiValue::ONE, |v, &eta| v.mul_one_minus(eta * zeta))
}

/// (1 - eta zeta)^k for real k.
pub fn phi_closed_constant(eta: f64, zeta: f64, k: f64) -> Result<PhiValue> {
    check_index(k)?;
    if k == 0.0 {
        return Ok(PhiValue::ONE);
    }
    let base = PhiValue::ONE.mul_one_minus(eta * zeta);
    if is_integer(k) {
        return Ok(base.powi(k as u64));
    }
    if base.sign() <= 0 {
        return Err(Error::Domain(format!(
            "(1 - eta zeta)^k with non-integer k = {k} needs 1 - eta zeta > 0, got {}",
            1.0 - eta * zeta
        )));
    }
    Ok(PhiValue::new(base.log_magnitude() * k, 1))
}

/// Roots w_1..w_m of w^m = c, so that 1 - c/i^m = prod_l (1 - w_l / i).
fn roots_of(c: f64, m: u32) -> Vec<Complex64> {
    let r = c.abs().powf(1.0 / m as f64);
    let theta = if c >= 0.0 { 0.0 } else { PI / m as f64 };
    (0..m)
        .map(|l| {
            let angle = theta + 2.0 * PI * l as f64 / m as f64;
            if c >= 0.0 && l == 0 {
                Complex64::new(r, 0.0)
            } else if (c >= 0.0 && 2 * l == m) || (c < 0.0 && m % 2 == 1 && 2 * l + 1 == m) {
                Complex64::new(-r, 0.0)
            } else {
                Complex64::from_polar(r, angle)
            }
        })
        .collect()
}

fn polynomial_log(eta: f64, zeta: f64, m: u32, x: f64) -> Result<Complex64> {
    let one = Complex64::new(1.0, 0.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for w in roots_of(eta * zeta, m) {
        let (num, den) = (Complex64::new(x + 1.0, 0.0) - w, one - w);
        if is_gamma_pole(num) || is_gamma_pole(den) {
            return Err(Error::Domain(format!(
                "Gamma pole in polynomial closed form (eta zeta = {}, m = {m}, k = {x})",
                eta * zeta
            )));
        }
        acc += ln_gamma_ratio(x + 1.0, -w) - ln_gamma(den);
    }
    Ok(acc)
}

fn real_from_log(z: Complex64, what: &str) -> Result<PhiValue> {
    let residue = z.im.sin().abs();
    if residue > IMAG_RESIDUE_TOL {
        return Err(Error::NumericalConsistency(format!(
            "{what}: imaginary residue {residue:e} exceeds {IMAG_RESIDUE_TOL:e}"
        )));
    }
    Ok(PhiValue::from_complex_log(z))
}

/// Polynomial schedule eta_k = eta / k^m (integer m >= 1) through the
/// root-of-unity Gamma factorization:
/// prod_l Gamma(k + 1 - w_l) / Gamma(1 - w_l) / Gamma(k + 1)^m.
pub fn phi_closed_polynomial(eta: f64, zeta: f64, m: u32, k: u64) -> Result<PhiValue> {
    phi_closed_polynomial_real(eta, zeta, m, k as f64)
}

fn phi_closed_polynomial_real(eta: f64, zeta: f64, m: u32, x: f64) -> Result<PhiValue> {
    check_index(x)?;
    if m == 0 {
        return Err(Error::Domain("polynomial closed form needs m >= 1".into()));
    }
    if x == 0.0 || eta * zeta == 0.0 {
        return Ok(PhiValue::ONE);
    }
    real_from_log(polynomial_log(eta, zeta, m, x)?, "polynomial closed form")
}

/// Additive decay eta_i = eta0 - i * step (first applied rate eta0 - step):
/// (step zeta)^k Gamma(k + 1 + c) / Gamma(1 + c), c = (1 - eta0 zeta) / (step zeta).
pub fn phi_closed_additive(eta0: f64, step: f64, zeta: f64, k: u64) -> Result<PhiValue> {
    phi_closed_additive_real(eta0, step, zeta, k as f64)
}

fn phi_closed_additive_real(eta0: f64, step: f64, zeta: f64, x: f64) -> Result<PhiValue> {
    check_index(x)?;
    if x == 0.0 || zeta == 0.0 {
        return Ok(PhiValue::ONE);
    }
    let a = step * zeta;
    if a == 0.0 {
        return phi_closed_constant(eta0, zeta, x);
    }
    let c = (1.0 - eta0 * zeta) / a;
    let num = Complex64::new(x + 1.0 + c, 0.0);
    let den = Complex64::new(1.0 + c, 0.0);
    if is_gamma_pole(num) || is_gamma_pole(den) {
        return Err(Error::Domain(format!(
            "Gamma pole in additive-decay closed form (c = {c}, k = {x})"
        )));
    }
    let power = if is_integer(x) {
        PhiValue::from_f64(a).powi(x as u64)
    } else if a > 0.0 {
        PhiValue::new(a.ln() * x, 1)
    } else {
        return Err(Error::Domain(format!(
            "(step zeta)^x with non-integer x needs step zeta > 0, got {a}"
        )));
    };
    let ratio = PhiValue::from_complex_log(ln_gamma(num) - ln_gamma(den));
    Ok(power * ratio)
}

/// Exponential schedule eta_k = q^k: (zeta q; q)_inf / (zeta q^{x+1}; q)_inf,
/// which is prod_{i=1}^k (1 - zeta q^i) at integer x.
pub fn phi_closed_exponential(q: f64, zeta: f64, x: f64) -> Result<PhiValue> {
    check_index(x)?;
    if x == 0.0 || zeta == 0.0 {
        return Ok(PhiValue::ONE);
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!(
            "exponential extension needs base in (0, 1), got {q}"
        )));
    }
    qpochhammer_ratio(zeta * q, q, x)
}

fn integer_power(power: f64) -> Option<u32> {
    ((1.0..=64.0).contains(&power) && is_integer(power)).then_some(power as u32)
}

/// Continuous extension of phi(x; zeta) to real x >= 0.
///
/// Supported: constant, polynomial with integer power (power 0 is the
/// constant schedule), additive decay and exponential schedules.
pub fn phi_extended(schedule: &Schedule, zeta: f64, x: f64) -> Result<PhiValue> {
    check_index(x)?;
    match schedule {
        Schedule::Constant { eta } => phi_closed_constant(*eta, zeta, x),
        Schedule::Polynomial { eta, power } if *power == 0.0 => phi_closed_constant(*eta, zeta, x),
        Schedule::Polynomial { eta, power } => match integer_power(*power) {
            Some(m) => phi_closed_polynomial_real(*eta, zeta, m, x),
            None => Err(Error::Unsupported(format!(
                "no real-index extension for polynomial power {power}"
            ))),
        },
        Schedule::AdditiveDecay { eta0, step } => phi_closed_additive_real(*eta0, *step, zeta, x),
        Schedule::Exponential { base } => phi_closed_exponential(*base, zeta, x),
        Schedule::Cyclic { .. } | Schedule::Explicit(_) => Err(Error::Unsupported(format!(
            "no real-index extension for schedule {schedule}"
        ))),
    }
}

/// d/dx of [`phi_extended`].
pub fn phi_derivative(schedule: &Schedule, zeta: f64, x: f64) -> Result<f64> {
    check_index(x)?;
    let phi = phi_extended(schedule, zeta, x)?;
    if zeta == 0.0 {
        return Ok(0.0);
    }
    match schedule {
        Schedule::Constant { eta } => constant_derivative(*eta, zeta, phi),
        Schedule::Polynomial { eta, power } if *power == 0.0 => constant_derivative(*eta, zeta, phi),
        Schedule::Polynomial { eta, power } => {
            let m = integer_power(*power).expect("checked by phi_extended");
            Ok(phi.to_f64() * polynomial_log_derivative(eta * zeta, m, x)?)
        }
        Schedule::AdditiveDecay { eta0, step } => {
            let a = step * zeta;
            let c = (1.0 - eta0 * zeta) / a;
            if a <= 0.0 {
                return Err(Error::Domain(format!(
                    "additive-decay derivative needs step zeta > 0, got {a}"
                )));
            }
            let psi = digamma(Complex64::new(x + 1.0 + c, 0.0)).re;
            Ok(phi.to_f64() * (a.ln() + psi))
        }
        Schedule::Exponential { base } => qpochhammer_ratio_derivative(zeta * base, *base, x),
        Schedule::Cyclic { .. } | Schedule::Explicit(_) => unreachable!("rejected by phi_extended"),
    }
}

/// d/dx ln phi(x) for eta_i = eta / i^m with a = eta zeta.
///
/// phi(x) = prod_i (1 - a i^{-m}) / (1 - a (x + i)^{-m}), so the log
/// derivative is -sum_{i >= 1} f(x + i) with f(t) = d/dt ln(1 - a t^{-m}).
/// The digamma form of the same sum cancels badly once the product is
/// flat; here the head is summed directly and the tail by Euler-Maclaurin,
/// using that f integrates to -ln(1 - a T^{-m}) on [T, inf).
fn polynomial_log_derivative(a: f64, m: u32, x: f64) -> Result<f64> {
    let mf = m as f64;
    let f = |t: f64| {
        let u = a * t.powi(-(m as i32));
        (mf * u / t / (1.0 - u), u)
    };
    let start = (20.0 * (mf + 1.0)).max(a.abs().powf(1.0 / mf) * 4.0).max(16.0);
    let n = (start - x).ceil().max(16.0) as usize;
    let mut head = 0.0;
    for i in (1..=n).rev() {
        let (v, u) = f(x + i as f64);
        if u == 1.0 {
            return Err(Error::Domain(format!("phi vanishes at x + {i} = {}", x + i as f64)));
        }
        head += v;
    }
    let t = x + n as f64;
    let (ft, u) = f(t);
    let d1 = -ft / t * ((mf + 1.0) + mf * u / (1.0 - u));
    let d3 = -mf * (mf + 1.0) * (mf + 2.0) * (mf + 3.0) * a * t.powi(-(m as i32) - 4);
    let tail = -(-u).ln_1p() - ft / 2.0 - d1 / 12.0 + d3 / 720.0;
    Ok(-(head + tail))
}

fn constant_derivative(eta: f64, zeta: f64, phi: PhiValue) -> Result<f64> {
    let base = 1.0 - eta * zeta;
    if base <= 0.0 {
        return Err(Error::Domain(format!(
            "derivative of (1 - eta zeta)^x needs 1 - eta zeta > 0, got {base}"
        )));
    }
    Ok(phi.to_f64() * (-eta * zeta).ln_1p())
}

/// lim_{k -> inf} phi(k; zeta).
///
/// Exact zero for schedules with divergent sum_k eta_k when every factor
/// lies in [0, 1); Gamma / q-Pochhammer limits for integer polynomial
/// powers >= 2 and exponential schedules; a product plus an
/// Euler-Maclaurin tail for other powers above 1; the full product for
/// finite schedules; otherwise the product is run until log phi stops moving
/// between k and 2k (or [`LIMIT_MAX_STEPS`] is reached).
pub fn phi_limit(schedule: &Schedule, zeta: f64) -> Result<f64> {
    if zeta == 0.0 {
        return Ok(1.0);
    }
    if let Some(h) = schedule.horizon() {
        return Ok(phi_product(schedule, zeta, h)?.to_f64());
    }
    if schedule.has_divergent_sum() && zeta > 0.0 && schedule.max_rate()? * zeta <= 1.0 {
        return Ok(0.0);
    }
    match schedule {
        Schedule::Polynomial { eta, power } if integer_power(*power).is_some_and(|m| m >= 2) => {
            let m = *power as u32;
            // prod_{i>=1} (1 - w^m / i^m) = 1 / prod_l Gamma(1 - w_l) since sum_l w_l = 0
            let one = Complex64::new(1.0, 0.0);
            let mut acc = Complex64::new(0.0, 0.0);
            for w in roots_of(eta * zeta, m) {
                if is_gamma_pole(one - w) {
                    return Ok(0.0);
                }
                acc -= ln_gamma(one - w);
            }
            Ok(real_from_log(acc, "polynomial limit")?.to_f64())
        }
        Schedule::Exponential { base } if *base < 1.0 => Ok(qpochhammer_infinite(zeta * base, *base)?.to_f64()),
        // eventually every factor lies in (0, 1) and sum_i eta_i diverges
        Schedule::Polynomial { power, .. } if *power > 0.0 && *power <= 1.0 => Ok(0.0),
        Schedule::Polynomial { eta, power } if *power > 1.0 => polynomial_limit(*eta, *power, zeta),
        _ => numeric_limit(schedule, zeta),
    }
}

/// Product up to K, then log prod_{i > K} (1 - a i^{-m}) = -sum_r a^r/r sum_{i > K} i^{-rm}.
fn polynomial_limit(eta: f64, power: f64, zeta: f64) -> Result<f64> {
    let a = eta * zeta;
    let mut k = 10_000usize;
    while a.abs() * (k as f64).powf(-power) > 0.1 {
        k *= 2;
    }
    let head = phi_product(&Schedule::polynomial(eta, power)?, zeta, k)?;
    if head.is_zero() {
        return Ok(0.0);
    }
    let mut tail = 0.0;
    for r in 1..=64 {
        let term = a.powi(r) / r as f64 * zeta_tail(r as f64 * power, k as f64);
        tail -= term;
        if term.abs() < 1e-18 {
            break;
        }
    }
    Ok(PhiValue::new(head.log_magnitude() + tail, head.sign()).to_f64())
}

fn numeric_limit(schedule: &Schedule, zeta: f64) -> Result<f64> {
    let mut v = PhiValue::ONE;
    let mut k = 0usize;
    let mut checkpoint = 1usize;
    let mut last_log = 0.0;
    while k < LIMIT_MAX_STEPS {
        k += 1;
        v = v.mul_one_minus(schedule.eta_at(k)? * zeta);
        if v.is_zero() || v.log_magnitude() < -745.0 {
            return Ok(0.0);
        }
        if k == checkpoint {
            if k > 1 && (v.log_magnitude() - last_log).abs() < 1e-12 {
                break;
            }
            last_log = v.log_magnitude();
            checkpoint *= 2;
        }
    }
    Ok(v.to_f64())
}

/// Diagonal of Phi(k): entry j is phi(k; lambda + lambda_j(Sigma_hat)).
#[derive(Debug, Clone, PartialEq)]
pub struct PhiDiagonal {
    pub entries: Vec<PhiValue>,
    pub lambda: f64,
    pub k: f64,
}

impl PhiDiagonal {
    /// Exact product at integer k.
    pub fn at_step(schedule: &Schedule, lambda: f64, eig_sigma_hat: &[f64], k: usize) -> Result<Self> {
        let rates = schedule.rates(k)?;
        let entries = eig_sigma_hat
            .iter()
            .map(|&e| phi_product_rates(&rates, lambda + e))
            .collect();
        Ok(PhiDiagonal {
            entries,
            lambda,
            k: k as f64,
        })
    }

    /// Real-index extension.
    pub fn extended(schedule: &Schedule, lambda: f64, eig_sigma_hat: &[f64], x: f64) -> Result<Self> {
        let entries = eig_sigma_hat
            .iter()
            .map(|&e| phi_extended(schedule, lambda + e, x))
            .collect::<Result<Vec<_>>>()?;
        Ok(PhiDiagonal { entries, lambda, k: x })
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(PhiValue::to_f64).collect()
    }

    /// Entries of I - Phi, accurate when Phi_j is close to 1.
    pub fn gaps(&self) -> Vec<f64> {
        self.entries.iter().map(PhiValue::one_minus).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Incrementally advances Phi(k) one step at a time.
#[derive(Debug, Clone)]
pub struct PhiTracker {
    lambda: f64,
    zetas: Vec<f64>,
    current: Vec<PhiValue>,
    k: usize,
}

impl PhiTracker {
    pub fn new(lambda: f64, eig_sigma_hat: &[f64]) -> Self {
        PhiTracker {
            lambda,
            zetas: eig_sigma_hat.iter().map(|e| lambda + e).collect(),
            current: vec![PhiValue::ONE; eig_sigma_hat.len()],
            k: 0,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Snapshot of the current diagonal.
    pub fn diagonal(&self) -> PhiDiagonal {
        PhiDiagonal {
            entries: self.current.clone(),
            lambda: self.lambda,
            k: self.k as f64,
        }
    }

    /// Applies step k + 1 of `schedule`.
    pub fn advance(&mut self, schedule: &Schedule) -> Result<()> {
        let eta = schedule.eta_at(self.k + 1)?;
        for (v, &z) in self.current.iter_mut().zip(&self.zetas) {
            *v = v.mul_one_minus(eta * z);
        }
        self.k += 1;
        Ok(())
    }

    pub fn advance_to(&mut self, schedule: &Schedule, k: usize) -> Result<()> {
        assert!(k >= self.k, "PhiTracker cannot move backwards");
        while self.k < k {
            self.advance(schedule)?;
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        self.current.iter().map(PhiValue::to_f64).collect()
    }
}

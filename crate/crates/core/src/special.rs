//! Special functions backing the closed-form contraction factors: complex
//! log-Gamma and digamma, and finite / infinite q-Pochhammer products.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::phi::PhiValue;

const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Tail bound used to truncate infinite q-products.
pub const QPOCH_TAIL_TOL: f64 = 1e-16;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// True when `z` is a pole of the Gamma function (0, -1, -2, ...).
pub fn is_gamma_pole(z: Complex64) -> bool {
    z.im == 0.0 && z.re <= 0.0 && z.re.fract() == 0.0
}

/// sin(pi z) with the real part reduced to [-1/2, 1/2] first.
fn sin_pi(z: Complex64) -> Complex64 {
    let shift = z.re.round();
    let reduced = Complex64::new(z.re - shift, z.im);
    let s = (reduced * PI).sin();
    if (shift as i64).rem_euclid(2) == 0 {
        s
    } else {
        -s
    }
}

fn cos_pi(z: Complex64) -> Complex64 {
    let shift = z.re.round();
    let reduced = Complex64::new(z.re - shift, z.im);
    let c = (reduced * PI).cos();
    if (shift as i64).rem_euclid(2) == 0 {
        c
    } else {
        -c
    }
}

/// Principal-ish complex log-Gamma.
///
/// Lanczos approximation (g = 7, 9 terms) with the reflection formula for
/// `Re(z) < 1/2`. The imaginary part is only defined modulo 2*pi; callers
/// exponentiate, so the branch does not matter. Returns `+inf` at poles.
pub fn ln_gamma(z: Complex64) -> Complex64 {
    if is_gamma_pole(z) {
        return Complex64::new(f64::INFINITY, 0.0);
    }
    if z.re < 0.5 {
        let ln_pi = PI.ln();
        return Complex64::new(ln_pi, 0.0) - sin_pi(z).ln() - ln_gamma(Complex64::new(1.0, 0.0) - z);
    }
    let z = z - 1.0;
    let mut acc = Complex64::new(LANCZOS_COEF[0], 0.0);
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    Complex64::new(LN_SQRT_2PI, 0.0) + (z + 0.5) * t.ln() - t + acc.ln()
}

/// ln(1 + u) for complex u, accurate when |u| is small.
fn ln_1p_complex(u: Complex64) -> Complex64 {
    let re = 0.5 * (2.0 * u.re + u.norm_sqr()).ln_1p();
    Complex64::new(re, u.im.atan2(1.0 + u.re))
}

/// ln Gamma(z + b) - ln Gamma(z) for real z > 0.
///
/// For large z both logs are of size z ln z and their difference cancels, so
/// the ratio is expanded from Stirling's series instead.
pub fn ln_gamma_ratio(z: f64, b: Complex64) -> Complex64 {
    if z < 50.0 || b.norm() > 0.25 * z {
        return ln_gamma(Complex64::new(z, 0.0) + b) - ln_gamma(Complex64::new(z, 0.0));
    }
    let w = Complex64::new(z, 0.0) + b;
    let mut acc = b * z.ln() + (w - 0.5) * ln_1p_complex(b / z) - b;
    // B_2k / (2k (2k - 1)) for k = 1..5
    const STIRLING: [f64; 5] = [1.0 / 12.0, -1.0 / 360.0, 1.0 / 1260.0, -1.0 / 1680.0, 1.0 / 1188.0];
    acc -= STIRLING[0] * b / (w * z);
    for (k, c) in STIRLING.iter().enumerate().skip(1) {
        let e = -(2 * k as i32 + 1);
        acc += c * (w.powi(e) - Complex64::new(z.powi(e), 0.0));
    }
    acc
}

/// sum_{i > k} i^{-s} for s > 1 by Euler-Maclaurin.
pub fn zeta_tail(s: f64, k: f64) -> f64 {
    k.powf(1.0 - s) / (s - 1.0) - 0.5 * k.powf(-s) + s * k.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * k.powf(-s - 3.0) / 720.0
}

/// ln Gamma of a real argument as a signed log value.
pub fn ln_gamma_real(x: f64) -> Result<PhiValue> {
    let z = Complex64::new(x, 0.0);
    if is_gamma_pole(z) {
        return Err(Error::Domain(format!("Gamma pole at {x}")));
    }
    Ok(PhiValue::from_complex_log(ln_gamma(z)))
}

/// Complex digamma psi(z) = d/dz ln Gamma(z).
pub fn digamma(z: Complex64) -> Complex64 {
    if z.re < 0.5 {
        let one = Complex64::new(1.0, 0.0);
        return digamma(one - z) - PI * cos_pi(z) / sin_pi(z);
    }
    let mut z = z;
    let mut acc = Complex64::new(0.0, 0.0);
    while z.re < 10.0 {
        acc -= 1.0 / z;
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    // Bernoulli tail: -1/(12z^2) + 1/(120z^4) - 1/(252z^6) + 1/(240z^8) - 1/(132z^10)
    let series = inv2
        * (-1.0 / 12.0 + inv2 * (1.0 / 120.0 + inv2 * (-1.0 / 252.0 + inv2 * (1.0 / 240.0 + inv2 * (-1.0 / 132.0)))));
    acc + z.ln() - 0.5 * inv + series
}

/// Finite q-Pochhammer symbol (a;q)_n = prod_{i=0}^{n-1} (1 - a q^i).
pub fn qpochhammer_finite(a: f64, q: f64, n: u64) -> PhiValue {
    let mut value = PhiValue::ONE;
    let mut term = a;
    for _ in 0..n {
        value = value.mul_factor(1.0 - term);
        if value.is_zero() {
            break;
        }
        term *= q;
    }
    value
}

/// Infinite q-Pochhammer symbol (a;q)_inf for |q| < 1.
///
/// The product stops at the first index K with |a q^K| / (1 - |q|) below
/// [`QPOCH_TAIL_TOL`], which bounds the log of the neglected tail.
pub fn qpochhammer_infinite(a: f64, q: f64) -> Result<PhiValue> {
    check_q(q)?;
    let tail_scale = 1.0 - q.abs();
    let mut value = PhiValue::ONE;
    let mut term = a;
    while term.abs() / tail_scale >= QPOCH_TAIL_TOL {
        value = value.mul_factor(1.0 - term);
        if value.is_zero() {
            break;
        }
        term *= q;
    }
    Ok(value)
}

fn check_q(q: f64) -> Result<()> {
    if !(q.is_finite() && q.abs() < 1.0) {
        return Err(Error::Domain(format!("q-Pochhammer needs |q| < 1, got {q}")));
    }
    Ok(())
}

fn check_real_power(q: f64, x: f64) -> Result<()> {
    if x.fract() != 0.0 && q <= 0.0 {
        return Err(Error::Domain(format!(
            "q^x with non-integer x = {x} needs q > 0, got {q}"
        )));
    }
    Ok(())
}

/// (a;q)_inf / (a q^x; q)_inf, the real-index extension of (a;q)_x.
pub fn qpochhammer_ratio(a: f64, q: f64, x: f64) -> Result<PhiValue> {
    check_q(q)?;
    check_real_power(q, x)?;
    let num = qpochhammer_infinite(a, q)?;
    let den = qpochhammer_infinite(a * q.powf(x), q)?;
    if den.is_zero() {
        return Err(Error::Domain(format!(
            "(a q^x; q)_inf vanishes at a = {a}, q = {q}, x = {x}"
        )));
    }
    Ok(num / den)
}

/// sum_{j >= 0} q^j / (1 - a q^{x + j}), truncated once the remaining
/// geometric tail is below the tolerance relative to the partial sum.
pub fn qpochhammer_log_derivative_sum(a: f64, q: f64, x: f64) -> Result<f64> {
    check_q(q)?;
    check_real_power(q, x)?;
    let mut sum = 0.0;
    let mut qj = 1.0;
    let mut aq = a * q.powf(x);
    let tail_scale = 1.0 - q.abs();
    loop {
        let den = 1.0 - aq;
        if den == 0.0 {
            return Err(Error::Domain(format!(
                "factor 1 - a q^(x+j) vanishes at a = {a}, q = {q}, x = {x}"
            )));
        }
        sum += qj / den;
        qj *= q;
        aq *= q;
        // remaining terms are bounded by |q|^j / ((1 - |q|) (1 - |a q^{x+j}|))
        if aq.abs() < 0.5 && qj.abs() / tail_scale <= QPOCH_TAIL_TOL * sum.abs().max(1.0) {
            break;
        }
    }
    Ok(sum)
}

/// d/dx of [`qpochhammer_ratio`]:
/// phi(x) * a q^x ln(q) * sum_j q^j / (1 - a q^{x+j}).
pub fn qpochhammer_ratio_derivative(a: f64, q: f64, x: f64) -> Result<f64> {
    let phi = qpochhammer_ratio(a, q, x)?;
    if a == 0.0 || phi.is_zero() {
        return Ok(0.0);
    }
    let sum = qpochhammer_log_derivative_sum(a, q, x)?;
    Ok(phi.to_f64() * a * q.powf(x) * q.ln() * sum)
}

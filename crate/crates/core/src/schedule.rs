//! Learning-rate schedules {eta_k}, k >= 1.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::special::zeta_tail;

/// A learning-rate sequence described by family and parameters.
///
/// Iteration indices are 1-based: `eta_at(1)` is the rate of the first step.
#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    /// eta_k = eta
    Constant { eta: f64 },
    /// eta_k = eta / k^power
    Polynomial { eta: f64, power: f64 },
    /// eta_k = eta0 - k * step; only queryable while eta_k > 0
    AdditiveDecay { eta0: f64, step: f64 },
    /// eta_k = base^k
    Exponential { base: f64 },
    /// eta_{k + period} = eta_k, one period taken from `inner`
    Cyclic { inner: Box<Schedule>, period: usize },
    /// eta_k = rates[k - 1]
    Explicit(Vec<f64>),
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::Validation(format!("{name} must be finite and > 0, got {v}")));
    }
    Ok(())
}

impl Schedule {
    pub fn constant(eta: f64) -> Result<Self> {
        positive("eta", eta)?;
        Ok(Schedule::Constant { eta })
    }

    pub fn polynomial(eta: f64, power: f64) -> Result<Self> {
        positive("eta", eta)?;
        if !(power.is_finite() && power >= 0.0) {
            return Err(Error::Validation(format!("power must be >= 0, got {power}")));
        }
        Ok(Schedule::Polynomial { eta, power })
    }

    pub fn additive_decay(eta0: f64, step: f64) -> Result<Self> {
        positive("eta0", eta0)?;
        positive("step", step)?;
        if eta0 - step <= 0.0 {
            return Err(Error::Validation(format!(
                "additive decay has no valid step: eta0 = {eta0}, step = {step}"
            )));
        }
        Ok(Schedule::AdditiveDecay { eta0, step })
    }

    pub fn exponential(base: f64) -> Result<Self> {
        positive("base", base)?;
        Ok(Schedule::Exponential { base })
    }

    pub fn cyclic(inner: Schedule, period: usize) -> Result<Self> {
        if period == 0 {
            return Err(Error::Validation("cyclic period must be >= 1".into()));
        }
        for k in 1..=period {
            inner.eta_at(k)?;
        }
        Ok(Schedule::Cyclic {
            inner: Box::new(inner),
            period,
        })
    }

    pub fn explicit(rates: Vec<f64>) -> Result<Self> {
        for (i, &r) in rates.iter().enumerate() {
            positive(&format!("rate #{}", i + 1), r)?;
        }
        Ok(Schedule::Explicit(rates))
    }

    /// Learning rate of step `k` (k >= 1).
    pub fn eta_at(&self, k: usize) -> Result<f64> {
        if k == 0 {
            return Err(Error::Domain("learning rates are indexed from k = 1".into()));
        }
        let eta = match self {
            Schedule::Constant { eta } => *eta,
            Schedule::Polynomial { eta, power } => {
                if *power == 0.0 {
                    *eta
                } else {
                    eta / (k as f64).powf(*power)
                }
            }
            Schedule::AdditiveDecay { eta0, step } => {
                let v = eta0 - k as f64 * step;
                if v <= 0.0 {
                    return Err(Error::Domain(format!(
                        "additive decay rate at k = {k} is {v}, not positive"
                    )));
                }
                v
            }
            Schedule::Exponential { base } => base.powi(k as i32),
            Schedule::Cyclic { inner, period } => inner.eta_at((k - 1) % period + 1)?,
            Schedule::Explicit(rates) => *rates.get(k - 1).ok_or_else(|| {
                Error::Domain(format!(
                    "explicit schedule has {} rates, asked for k = {k}",
                    rates.len()
                ))
            })?,
        };
        if !eta.is_finite() {
            return Err(Error::Domain(format!("non-finite rate at k = {k}")));
        }
        Ok(eta)
    }

    /// Rates eta_1..=eta_k.
    pub fn rates(&self, k: usize) -> Result<Vec<f64>> {
        (1..=k).map(|i| self.eta_at(i)).collect()
    }

    /// Largest index that can be queried, if finite.
    pub fn horizon(&self) -> Option<usize> {
        match self {
            Schedule::AdditiveDecay { eta0, step } => {
                // largest k with eta0 - k * step > 0
                let mut k = (eta0 / step).floor() as usize;
                while k > 0 && eta0 - k as f64 * step <= 0.0 {
                    k -= 1;
                }
                Some(k)
            }
            Schedule::Explicit(rates) => Some(rates.len()),
            _ => None,
        }
    }

    /// Whether sum_k eta_k diverges (for an unbounded horizon).
    pub fn has_divergent_sum(&self) -> bool {
        match self {
            Schedule::Constant { .. } => true,
            Schedule::Polynomial { power, .. } => *power <= 1.0,
            Schedule::Cyclic { .. } => true,
            Schedule::AdditiveDecay { .. } | Schedule::Exponential { .. } | Schedule::Explicit(_) => false,
        }
    }

    /// sum_{k >= 1} eta_k for an unbounded schedule whose sum converges.
    pub fn total_rate(&self) -> Option<f64> {
        match self {
            Schedule::Exponential { base } if *base < 1.0 => Some(base / (1.0 - base)),
            Schedule::Polynomial { eta, power } if *power > 1.0 => {
                let head: f64 = (1..=1000).map(|i| (i as f64).powf(-power)).sum();
                Some(eta * (head + zeta_tail(*power, 1000.0)))
            }
            _ => None,
        }
    }

    /// Upper bound on the rates; exact for every family here because each is
    /// non-increasing or periodic.
    pub fn max_rate(&self) -> Result<f64> {
        match self {
            Schedule::Constant { eta } => Ok(*eta),
            Schedule::Polynomial { eta, .. } => Ok(*eta),
            Schedule::AdditiveDecay { .. } => self.eta_at(1),
            Schedule::Exponential { base } => {
                if *base <= 1.0 {
                    Ok(*base)
                } else {
                    Err(Error::Domain(format!(
                        "exponential schedule with base {base} > 1 is unbounded"
                    )))
                }
            }
            Schedule::Cyclic { inner, period } => {
                let mut m: f64 = 0.0;
                for k in 1..=*period {
                    m = m.max(inner.eta_at(k)?);
                }
                Ok(m)
            }
            Schedule::Explicit(rates) => Ok(rates.iter().cloned().fold(0.0, f64::max)),
        }
    }

    /// Smallest real x with S(x) >= target, where S is the piecewise-linear
    /// interpolation of the partial sums S(k) = eta_1 + ... + eta_k.
    ///
    /// Gives up after `max_steps` steps or at the end of a finite schedule.
    pub fn steps_to_cumulative(&self, target: f64, max_steps: usize) -> Result<f64> {
        if !(target.is_finite() && target >= 0.0) {
            return Err(Error::Validation(format!(
                "cumulative target must be >= 0, got {target}"
            )));
        }
        if target == 0.0 {
            return Ok(0.0);
        }
        if let Some(total) = self.total_rate() {
            if target >= total {
                return Err(Error::Domain(format!(
                    "cumulative learning rate converges to {total}, below {target}"
                )));
            }
        }
        let limit = match self.horizon() {
            Some(h) => h.min(max_steps),
            None => max_steps,
        };
        let mut sum = 0.0;
        for k in 1..=limit {
            let eta = self.eta_at(k)?;
            if sum + eta >= target {
                return Ok((k - 1) as f64 + (target - sum) / eta);
            }
            sum += eta;
        }
        Err(Error::Domain(format!(
            "cumulative learning rate {sum} after {limit} steps never reaches {target}"
        )))
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Schedule::Constant { eta } => write!(f, "constant:{eta}"),
            Schedule::Polynomial { eta, power } => write!(f, "poly:{eta}:{power}"),
            Schedule::AdditiveDecay { eta0, step } => write!(f, "additive:{eta0}:{step}"),
            Schedule::Exponential { base } => write!(f, "exp:{base}"),
            Schedule::Cyclic { inner, period } => write!(f, "cyclic:{period}:{inner}"),
            Schedule::Explicit(rates) => {
                write!(f, "explicit:")?;
                for (i, r) in rates.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{r}")?;
                }
                Ok(())
            }
        }
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Validation(format!("not a number: {s:?}")))
}

/// Parses the textual form written by `Display`, e.g. `poly:0.5:0.25`,
/// `additive:0.3:0.05`, `cyclic:4:constant:0.1`, `explicit:0.1,0.2`.
impl FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (family, rest) = s.split_once(':').unwrap_or((s, ""));
        let args: Vec<&str> = if rest.is_empty() {
            vec![]
        } else {
            rest.split(':').collect()
        };
        let want = |n: usize| -> Result<()> {
            if args.len() != n {
                return Err(Error::Validation(format!(
                    "schedule {family:?} takes {n} argument(s), got {:?}",
                    rest
                )));
            }
            Ok(())
        };
        match family.trim() {
            "constant" => {
                want(1)?;
                Schedule::constant(parse_f64(args[0])?)
            }
            "poly" | "polynomial" => {
                want(2)?;
                Schedule::polynomial(parse_f64(args[0])?, parse_f64(args[1])?)
            }
            "additive" => {
                want(2)?;
                Schedule::additive_decay(parse_f64(args[0])?, parse_f64(args[1])?)
            }
            "exp" | "exponential" => {
                want(1)?;
                Schedule::exponential(parse_f64(args[0])?)
            }
            "cyclic" => {
                let (period, inner) = rest
                    .split_once(':')
                    .ok_or_else(|| Error::Validation("cyclic schedule needs `cyclic:<period>:<inner>`".into()))?;
                let period = period
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Validation(format!("bad cyclic period {period:?}")))?;
                Schedule::cyclic(inner.parse()?, period)
            }
            "explicit" => {
                let rates = rest
                    .split(',')
                    .filter(|t| !t.trim().is_empty())
                    .map(parse_f64)
                    .collect::<Result<Vec<_>>>()?;
                Schedule::explicit(rates)
            }
            other => Err(Error::Validation(format!("unknown schedule family {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eta_at_examples() {
        assert_eq!(Schedule::constant(0.1).unwrap().eta_at(7).unwrap(), 0.1);
        assert_eq!(Schedule::polynomial(0.5, 1.0).unwrap().eta_at(4).unwrap(), 0.125);
        let add = Schedule::additive_decay(0.3, 0.1).unwrap();
        assert!((add.eta_at(2).unwrap() - 0.1).abs() < 1e-15);
        assert!(matches!(add.eta_at(3), Err(Error::Domain(_))));
        assert_eq!(add.horizon(), Some(2));
    }

    #[test]
    fn zero_index_is_rejected() {
        assert!(Schedule::constant(0.1).unwrap().eta_at(0).is_err());
    }

    #[test]
    fn cyclic_repeats_inner() {
        let inner = Schedule::explicit(vec![0.1, 0.2, 0.3]).unwrap();
        let s = Schedule::cyclic(inner, 3).unwrap();
        for k in 1..20 {
            assert_eq!(s.eta_at(k).unwrap(), s.eta_at(k + 3).unwrap());
        }
        assert_eq!(s.eta_at(4).unwrap(), 0.1);
    }

    #[test]
    fn explicit_out_of_range() {
        let s = Schedule::explicit(vec![0.1, 0.2]).unwrap();
        assert!(s.eta_at(3).is_err());
        assert!(Schedule::explicit(vec![0.1, -0.2]).is_err());
    }

    #[test]
    fn steps_to_cumulative_interpolates() {
        let s = Schedule::constant(0.5).unwrap();
        assert_eq!(s.steps_to_cumulative(0.0, 10).unwrap(), 0.0);
        assert!((s.steps_to_cumulative(1.25, 10).unwrap() - 2.5).abs() < 1e-15);
        let e = Schedule::exponential(0.5).unwrap();
        assert!(e.steps_to_cumulative(2.0, 1000).is_err());
    }

    #[test]
    fn parse_round_trip() {
        for text in [
            "constant:0.1",
            "poly:0.5:0.25",
            "additive:0.3:0.05",
            "exp:0.5",
            "cyclic:3:explicit:0.1,0.2,0.3",
            "explicit:0.1,0.2",
        ] {
            let s: Schedule = text.parse().unwrap();
            assert_eq!(s.to_string(), text);
            assert_eq!(s.to_string().parse::<Schedule>().unwrap(), s);
        }
        assert!("bogus:1".parse::<Schedule>().is_err());
        assert!("constant".parse::<Schedule>().is_err());
    }

    #[test]
    fn convergent_totals() {
        // sum 1/k^2 = pi^2 / 6
        let s = Schedule::polynomial(0.5, 2.0).unwrap();
        assert!((s.total_rate().unwrap() - 0.5 * std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-13);
        let s = Schedule::polynomial(1.0, 1.5).unwrap();
        // zeta(3/2)
        assert!((s.total_rate().unwrap() - 2.612_375_348_685_488).abs() < 1e-12);
        assert_eq!(Schedule::exponential(0.5).unwrap().total_rate(), Some(1.0));
        assert_eq!(Schedule::constant(0.5).unwrap().total_rate(), None);
        assert!(Schedule::polynomial(1.0, 2.0)
            .unwrap()
            .steps_to_cumulative(1.7, usize::MAX)
            .is_err());
        assert!(Schedule::polynomial(1.0, 2.0)
            .unwrap()
            .steps_to_cumulative(1.6, usize::MAX)
            .is_ok());
    }
}

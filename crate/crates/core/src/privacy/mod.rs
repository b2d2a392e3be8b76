//! Privacy definitions, budgets and the mechanism calculus.
//!
//! Budgets are exact nonnegative rationals. Only the conversion to
//! approximate DP leaves the rationals, producing a [`BigReal`].

mod mechanism;
mod query;

use std::fmt;
use std::iter::Sum;
use std::ops::Add;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use mechanism::{compose, compose_adaptive, constant, noise, postprocess, Mechanism};
pub use query::{
    enumerate_databases, neighbour_pairs, neighbours, sensitivity_check, Query, SensitivityReport,
    MAX_ENUMERATION,
};

use crate::error::{Error, Result};
use crate::exactdist::BigReal;

/// Which definition a budget is measured in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DpSystem {
    /// ε-differential privacy.
    Pure,
    /// ρ-zero-concentrated differential privacy.
    Zcdp,
}

impl DpSystem {
    pub fn name(self) -> &'static str {
        match self {
            DpSystem::Pure => "pure",
            DpSystem::Zcdp => "zcdp",
        }
    }
}

impl fmt::Display for DpSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DpSystem {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pure" | "dp" | "pure-dp" => Ok(DpSystem::Pure),
            "zcdp" => Ok(DpSystem::Zcdp),
            other => Err(Error::Parse(format!("unknown DP system {other:?}"))),
        }
    }
}

/// A nonnegative exact rational privacy parameter.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Budget(BigRational);

impl Budget {
    pub fn new(r: BigRational) -> Result<Self> {
        if r.is_negative() {
            return Err(Error::invalid(format!("budget {r} is negative")));
        }
        Ok(Budget(r))
    }

    pub fn ratio(num: u64, den: u64) -> Result<Self> {
        if den == 0 {
            return Err(Error::invalid("budget denominator must be positive"));
        }
        Ok(Budget(BigRational::new(num.into(), den.into())))
    }

    pub fn zero() -> Self {
        Budget(BigRational::zero())
    }

    pub fn value(&self) -> &BigRational {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// `self - other`, or `None` if that would be negative.
    pub fn checked_sub(&self, other: &Budget) -> Option<Budget> {
        let d = &self.0 - &other.0;
        (!d.is_negative()).then_some(Budget(d))
    }

    pub fn scale(&self, k: u64) -> Budget {
        Budget(&self.0 * BigRational::from_integer(k.into()))
    }

    pub fn to_real(&self) -> BigReal {
        BigReal::from_rational(&self.0)
    }
}

impl fmt::Display for Budget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::format_rational(&self.0))
    }
}

impl FromStr for Budget {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Budget::new(crate::parse_rational(s)?)
    }
}

impl Add for &Budget {
    type Output = Budget;
    fn add(self, rhs: &Budget) -> Budget {
        Budget(&self.0 + &rhs.0)
    }
}

impl Add for Budget {
    type Output = Budget;
    fn add(self, rhs: Budget) -> Budget {
        &self + &rhs
    }
}

impl Sum for Budget {
    fn sum<I: Iterator<Item = Budget>>(iter: I) -> Budget {
        iter.fold(Budget::zero(), |a, b| a + b)
    }
}

impl<'a> Sum<&'a Budget> for Budget {
    fn sum<I: Iterator<Item = &'a Budget>>(iter: I) -> Budget {
        iter.fold(Budget::zero(), |a, b| &a + b)
    }
}

impl Serialize for Budget {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Budget {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn check_delta(delta: &BigRational) -> Result<()> {
    if !delta.is_positive() || *delta >= BigRational::one() {
        return Err(Error::invalid(format!("delta {delta} must lie in (0, 1)")));
    }
    Ok(())
}

/// `ln(1/δ)`.
fn log_inv_delta(delta: &BigRational) -> BigReal {
    BigReal::from_rational(&delta.recip())
        .ln()
        .expect("1/δ > 1")
}

/// The ε′ for which a `γ` guarantee implies `(ε′, δ)`-DP.
///
/// Pure: `ε′ = γ`. zCDP: `ε′ = ρ + sqrt(4ρ·ln(1/δ))`.
pub fn approx_dp_of(sys: DpSystem, gamma: &Budget, delta: &BigRational) -> Result<BigReal> {
    check_delta(delta)?;
    match sys {
        DpSystem::Pure => Ok(gamma.to_real()),
        DpSystem::Zcdp => {
            let rho = gamma.to_real();
            let root = (&(&BigReal::from_int(4) * &rho) * &log_inv_delta(delta))
                .sqrt()
                .expect("nonnegative");
            Ok(&rho + &root)
        }
    }
}

/// Largest budget whose `approx_dp_of` at `δ` stays within `ε′`.
///
/// zCDP solves the quadratic: `ρ = (sqrt(L + ε′) - sqrt(L))²` with
/// `L = ln(1/δ)`, returned as the lower endpoint of its enclosure so the
/// forward conversion never exceeds `ε′`.
pub fn of_app_dp(sys: DpSystem, delta: &BigRational, eps: &BigRational) -> Result<Budget> {
    check_delta(delta)?;
    if !eps.is_positive() {
        return Err(Error::invalid(format!("target epsilon {eps} must be positive")));
    }
    match sys {
        DpSystem::Pure => Budget::new(eps.clone()),
        DpSystem::Zcdp => {
            let l = log_inv_delta(delta);
            let a = (&l + &BigReal::from_rational(eps)).sqrt().expect("positive");
            let b = l.sqrt().expect("positive");
            let d = &a - &b;
            let rho = (&d * &d).lower_rational();
            Budget::new(rho.max(BigRational::zero()))
        }
    }
}

/// `ρ = ε²/2`: an ε-DP mechanism is ρ-zCDP.
pub fn pure_to_zcdp(eps: &Budget) -> Budget {
    let e = eps.value();
    Budget(e * e / BigRational::from_integer(2.into()))
}

/// Noise parameters `(γn, γd)` whose claim under `sys` is at most `target`.
///
/// Pure uses the target itself. zCDP needs `γn/γd <= sqrt(2ρ)`, which is
/// rounded down to a multiple of `1/denominator`.
pub fn noise_params_for(sys: DpSystem, target: &Budget, denominator: u64) -> Result<(u64, u64)> {
    if target.is_zero() {
        return Err(Error::invalid("a noise mechanism needs a positive budget"));
    }
    let to_u64 = |x: &BigInt| {
        x.to_u64()
            .ok_or_else(|| Error::invalid(format!("budget {target} needs parameters beyond 64 bits")))
    };
    match sys {
        DpSystem::Pure => Ok((to_u64(target.value().numer())?, to_u64(target.value().denom())?)),
        DpSystem::Zcdp => {
            let two_rho = &target.to_real() * &BigReal::from_int(2);
            let root = two_rho.sqrt().expect("nonnegative").lower_rational();
            let scaled = (root * BigRational::from_integer(denominator.into())).floor().to_integer();
            let n = to_u64(&scaled)?;
            if n == 0 {
                return Err(Error::invalid(format!(
                    "zCDP budget {target} is too small for denominator {denominator}"
                )));
            }
            Ok((n, denominator))
        }
    }
}

/// The claim `noise` makes for parameters `γn/γd`: `ε = γn/γd` under pure DP,
/// `ρ = (γn/γd)²/2` under zCDP.
pub fn noise_claim(sys: DpSystem, gn: u64, gd: u64) -> Result<Budget> {
    let g = Budget::ratio(gn, gd)?;
    Ok(match sys {
        DpSystem::Pure => g,
        DpSystem::Zcdp => pure_to_zcdp(&g),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn budget_arithmetic() {
        let a: Budget = "1/4".parse().unwrap();
        let b = Budget::ratio(1, 4).unwrap();
        assert_eq!((&a + &b).to_string(), "1/2");
        assert!(Budget::new(q(-1, 2)).is_err());
        assert_eq!(a.checked_sub(&(&a + &b)), None);
        assert_eq!(serde_json::to_string(&a).unwrap(), "\"1/4\"");
        let back: Budget = serde_json::from_str("\"2/8\"").unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn pure_conversions_are_identity() {
        let one = Budget::ratio(1, 1).unwrap();
        let e = approx_dp_of(DpSystem::Pure, &one, &q(1, 1000)).unwrap();
        assert_eq!(e, BigReal::one());
        assert_eq!(of_app_dp(DpSystem::Pure, &q(1, 10), &q(3, 2)).unwrap(), Budget::ratio(3, 2).unwrap());
    }

    #[test]
    fn zcdp_forward() {
        let e = approx_dp_of(DpSystem::Zcdp, &Budget::zero(), &q(1, 2)).unwrap();
        assert!(e.is_zero());
        let e = approx_dp_of(DpSystem::Zcdp, &Budget::ratio(1, 2).unwrap(), &q(1, 1_000_000)).unwrap();
        let oracle = 0.5 + (2.0 * 1e6f64.ln()).sqrt();
        assert!((e.to_f64() - oracle).abs() < 1e-12);
        assert!(approx_dp_of(DpSystem::Zcdp, &Budget::zero(), &q(1, 1)).is_err());
    }

    #[test]
    fn zcdp_inverse_round_trips() {
        let delta = q(1, 1_000_000);
        let rho = of_app_dp(DpSystem::Zcdp, &delta, &q(1, 1)).unwrap();
        let back = approx_dp_of(DpSystem::Zcdp, &rho, &delta).unwrap();
        assert!(back.definitely_le(&BigReal::one()) || back.overlaps(&BigReal::one()));
        assert!((back.to_f64() - 1.0).abs() < 1e-40f64.max(1e-15));
    }

    #[test]
    fn zcdp_noise_params() {
        let (n, d) = noise_params_for(DpSystem::Zcdp, &Budget::ratio(1, 2).unwrap(), 1_000_000).unwrap();
        assert_eq!((n, d), (1_000_000, 1_000_000));
        let (n, d) = noise_params_for(DpSystem::Zcdp, &Budget::ratio(1, 4).unwrap(), 1_000_000).unwrap();
        let claim = noise_claim(DpSystem::Zcdp, n, d).unwrap();
        assert!(claim <= Budget::ratio(1, 4).unwrap());
        assert_eq!(n, 707_106);
    }
}

//! Exact discrete samplers for differential privacy, with certified
//! distribution oracles, a privacy budget calculus and an audit harness.
//!
//! Sampling never touches floating point: every sampler is built from uniform
//! bytes ([`entropy::EntropySource`]) with integer comparisons. The oracles in
//! [`exactdist`] compute the intended distributions with certified error
//! bounds, and [`audit`] checks one against the other.
pub mod api;
pub mod audit;
pub mod bench;
pub mod config;
pub mod entropy;
pub mod error;
pub mod exactdist;
pub mod ledger;
pub mod mechanisms;
pub mod privacy;
pub mod samplers;

pub use entropy::EntropySource;
pub use error::{Error, Result};
pub use exactdist::{BigReal, MassFunction};
pub use samplers::{LaplaceAlgo, RationalParam};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

/// Parses `n/d`, an integer, or a decimal with optional exponent (`0.25`,
/// `-1.5e-3`) into an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("bad number {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(BigRational::new(n, d));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if (int.is_empty() && frac.is_empty())
        || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit())
    {
        return Err(bad());
    }
    let digits: BigInt = format!("{int}{frac}0").parse().map_err(|_| bad())?;
    let digits = digits / 10;
    let shift = exp - frac.len() as i32;
    let ten = BigInt::from(10);
    let mut r = if shift >= 0 {
        BigRational::from_integer(digits * num_traits::pow(ten, shift as usize))
    } else {
        BigRational::new(digits, num_traits::pow(ten, (-shift) as usize))
    };
    if neg {
        r = -r;
    }
    Ok(r)
}

/// `n/d` rendering used in every serialized budget.
pub fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        format!("{}/1", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

//! Closed-form mass functions with certified truncation bounds.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;

use super::{BigReal, MassFunction};
use crate::error::{Error, Result};
use crate::samplers::RationalParam;

fn require_positive(p: &RationalParam, what: &str) -> Result<()> {
    if p.is_zero() {
        Err(Error::invalid(format!("{what} must be positive, got {p}")))
    } else {
        Ok(())
    }
}

/// `geo_t(z)`: 0 at `z = 0`, `(1-t)·t^(z-1)` for `z >= 1`.
pub fn geo_pmf(t: &BigReal, z: u64) -> Result<BigReal> {
    if !t.is_nonnegative() || !t.definitely_lt(&BigReal::one()) {
        return Err(Error::invalid(format!("geometric parameter {t} outside [0, 1)")));
    }
    if z == 0 {
        return Ok(BigReal::zero());
    }
    Ok(&(&BigReal::one() - t) * &t.powi(z - 1))
}

/// `geo_t` on `[0, hi]`; the tail beyond `hi` is exactly `t^hi`.
pub fn geo_mass_function(t: &BigReal, hi: u64) -> Result<MassFunction> {
    let masses = (0..=hi).map(|z| geo_pmf(t, z)).collect::<Result<Vec<_>>>()?;
    Ok(MassFunction::new(0, masses, t.powi(hi)))
}

/// Laplace constants: `(c, r)` with `c = (e^{1/t}-1)/(e^{1/t}+1)`, `r = e^{-1/t}`.
fn laplace_constants(t: &RationalParam) -> (BigReal, BigReal) {
    let inv_t = BigRational::new(
        crate::samplers::ubig_to_bigint(t.den()),
        crate::samplers::ubig_to_bigint(t.num()),
    );
    let r = BigReal::from_rational(&(-inv_t)).exp();
    let one = BigReal::one();
    // (e^{1/t}-1)/(e^{1/t}+1) = (1-r)/(1+r)
    let c = &(&one - &r) / &(&one + &r);
    (c, r)
}

/// `lap_t(z) = (e^{1/t}-1)/(e^{1/t}+1) · e^{-|z|/t}`.
pub fn laplace_pmf(t: &RationalParam, z: i64) -> Result<BigReal> {
    require_positive(t, "Laplace scale")?;
    let (c, _) = laplace_constants(t);
    let arg = BigRational::new(
        -BigInt::from(z.unsigned_abs()) * crate::samplers::ubig_to_bigint(t.den()),
        crate::samplers::ubig_to_bigint(t.num()),
    );
    Ok(&c * &BigReal::from_rational(&arg).exp())
}

/// Default half-width of the Laplace window: `ceil(60·t)`.
pub fn laplace_window(t: &RationalParam) -> i64 {
    let r = t.to_big_rational() * BigRational::from_integer(60.into());
    r.ceil().to_integer().to_i64().unwrap_or(i64::MAX / 4)
}

/// `lap_t` on `[-w, w]`. The two tails sum to `2c·r^{w+1}/(1-r)`.
pub fn laplace_mass_function_window(t: &RationalParam, w: i64) -> Result<MassFunction> {
    require_positive(t, "Laplace scale")?;
    let (c, r) = laplace_constants(t);
    let mut half = Vec::with_capacity(w as usize + 1);
    let mut cur = c.clone();
    for _ in 0..=w {
        half.push(cur.clone());
        cur = &cur * &r;
    }
    // cur = c·r^{w+1}
    let one = BigReal::one();
    let tail = &(&cur + &cur) / &(&one - &r);
    let mut masses: Vec<BigReal> = half[1..].iter().rev().cloned().collect();
    masses.extend(half);
    Ok(MassFunction::new(-w, masses, tail))
}

pub fn laplace_mass_function(t: &RationalParam) -> Result<MassFunction> {
    laplace_mass_function_window(t, laplace_window(t))
}

/// `P(Y <= x)` for `Y ~ lap_t`.
pub fn laplace_cdf(t: &RationalParam, x: i64) -> Result<BigReal> {
    require_positive(t, "Laplace scale")?;
    let (c, r) = laplace_constants(t);
    let one = BigReal::one();
    let geo_tail = |k: u64| &(&c * &r.powi(k)) / &(&one - &r); // Σ_{z>=k} c r^z
    if x >= 0 {
        Ok(&one - &geo_tail(x as u64 + 1))
    } else {
        Ok(geo_tail(x.unsigned_abs()))
    }
}

/// Default half-width of the Gaussian window: `ceil(12σ) + 10`.
pub fn gaussian_window(sigma: &RationalParam) -> i64 {
    let r = sigma.to_big_rational() * BigRational::from_integer(12.into());
    r.ceil().to_integer().to_i64().unwrap_or(i64::MAX / 4) + 10
}

/// `1/(2σ²)` as an exact rational.
fn inv_two_sigma2(sigma: &RationalParam) -> BigRational {
    let s = sigma.to_big_rational();
    (s.clone() * s * BigRational::from_integer(2.into())).recip()
}

/// Unnormalized weight `e^{-k²/(2σ²)}`.
fn gaussian_weight(c: &BigRational, k: i64) -> BigReal {
    let k = BigInt::from(k);
    BigReal::from_rational(&(-(c * BigRational::from_integer(&k * &k)))).exp()
}

/// The centred normalizer `Σ_k e^{-k²/(2σ²)}`, summed over the default
/// window. The enclosure includes the tail bound
/// `2·w(W+1)/(1 - e^{-(2W+3)/(2σ²)})`.
pub fn gaussian_normalizer(sigma: &RationalParam) -> Result<BigReal> {
    require_positive(sigma, "Gaussian sigma")?;
    let w = gaussian_window(sigma);
    let c = inv_two_sigma2(sigma);
    let mut sum = gaussian_weight(&c, 0);
    for k in 1..=w {
        let x = gaussian_weight(&c, k);
        sum = &sum + &(&x + &x);
    }
    Ok(sum.hull(&(&sum + &gaussian_tail(&c, w)).upper()))
}

/// Bound on `Σ_{|k|>W} e^{-k²/(2σ²)}`: for `k > W` consecutive weights shrink
/// by at least `q = e^{-(2W+3)/(2σ²)}`, so each side is at most `w(W+1)/(1-q)`.
fn gaussian_tail(c: &BigRational, w: i64) -> BigReal {
    let first = gaussian_weight(c, w + 1);
    let q = BigReal::from_rational(&(-(c * BigRational::from_integer((2 * w + 3).into())))).exp();
    let side = &first / &(&BigReal::one() - &q);
    (&side + &side).upper()
}

/// `N_Z(μ, σ²)` at `z`.
pub fn gaussian_pmf(sigma: &RationalParam, mu: i64, z: i64) -> Result<BigReal> {
    let n = gaussian_normalizer(sigma)?;
    let c = inv_two_sigma2(sigma);
    Ok(&gaussian_weight(&c, z - mu) / &n)
}

/// `N_Z(μ, σ²)` on `μ ± W` with the default window.
pub fn gaussian_mass_function(sigma: &RationalParam, mu: i64) -> Result<MassFunction> {
    let w = gaussian_window(sigma);
    gaussian_mass_function_window(sigma, mu, w)
}

pub fn gaussian_mass_function_window(sigma: &RationalParam, mu: i64, w: i64) -> Result<MassFunction> {
    require_positive(sigma, "Gaussian sigma")?;
    let n = gaussian_normalizer(sigma)?;
    let c = inv_two_sigma2(sigma);
    let half: Vec<BigReal> = (0..=w).map(|k| &gaussian_weight(&c, k) / &n).collect();
    let mut masses: Vec<BigReal> = half[1..].iter().rev().cloned().collect();
    masses.extend(half);
    let tail = &gaussian_tail(&c, w) / &n.lower();
    Ok(MassFunction::new(mu - w, masses, tail.upper()))
}

/// `e^{-k}` for an exact rational `k`.
pub fn exp_neg(k: &BigRational) -> BigReal {
    BigReal::from_rational(&-k.clone()).exp()
}

//! Exact samplers built from uniform bytes.
//!
//! Every decision in this module is an integer comparison against a uniform
//! draw, so the output distributions are exact: no floating point appears
//! anywhere on the sampling path.

use std::fmt;
use std::str::FromStr;

use ibig::{IBig, UBig};
use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::config;
use crate::entropy::EntropySource;
use crate::error::{Error, Result};

/// A rational parameter `num / den` kept as the literal pair.
///
/// The pair is never reduced: the split Laplace loop uses `num` and `den`
/// separately and its control flow depends on the exact values.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RationalParam {
    num: UBig,
    den: UBig,
}

impl RationalParam {
    /// `num / den` with `den >= 1`. A zero numerator is accepted here;
    /// samplers that need a strictly positive value check for it.
    pub fn new(num: impl Into<UBig>, den: impl Into<UBig>) -> Result<Self> {
        let (num, den) = (num.into(), den.into());
        if den == UBig::from(0u8) {
            return Err(Error::invalid("denominator must be positive"));
        }
        Ok(RationalParam { num, den })
    }

    pub fn integer(n: impl Into<UBig>) -> Self {
        RationalParam {
            num: n.into(),
            den: UBig::from(1u8),
        }
    }

    pub fn num(&self) -> &UBig {
        &self.num
    }

    pub fn den(&self) -> &UBig {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num == UBig::from(0u8)
    }

    pub fn to_big_rational(&self) -> BigRational {
        BigRational::new(ubig_to_bigint(&self.num), ubig_to_bigint(&self.den))
    }

    /// Exact conversion from a nonnegative rational (reduced form).
    pub fn from_big_rational(r: &BigRational) -> Result<Self> {
        let (n, d) = (r.numer(), r.denom());
        if n.sign() == num_bigint::Sign::Minus || d.sign() == num_bigint::Sign::Minus {
            return Err(Error::invalid(format!("parameter {r} must be nonnegative")));
        }
        Self::new(bigint_to_ubig(n), bigint_to_ubig(d))
    }

    /// Decimal rendering, exact when it terminates within 12 fractional
    /// digits and truncated there otherwise.
    pub fn to_decimal_string(&self) -> String {
        let int = &self.num / &self.den;
        let mut rem = &self.num % &self.den;
        let zero = UBig::from(0u8);
        if rem == zero {
            return int.to_string();
        }
        let mut frac = String::new();
        while rem != zero && frac.len() < 12 {
            rem *= UBig::from(10u8);
            frac.push_str(&(&rem / &self.den).to_string());
            rem %= &self.den;
        }
        format!("{int}.{frac}")
    }

    fn require_positive(&self, what: &str) -> Result<()> {
        if self.is_zero() {
            Err(Error::invalid(format!("{what} must be positive, got {self}")))
        } else {
            Ok(())
        }
    }
}

impl fmt::Display for RationalParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for RationalParam {
    type Err = Error;

    /// Accepts `n/d`, `n`, or a decimal such as `0.25` / `1e-6`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let parse = |x: &str| {
                UBig::from_str_radix(x.trim(), 10)
                    .map_err(|_| Error::Parse(format!("bad rational {s:?}")))
            };
            return Self::new(parse(n)?, parse(d)?);
        }
        Self::from_big_rational(&crate::parse_rational(s)?)
    }
}

pub(crate) fn ubig_to_bigint(x: &UBig) -> BigInt {
    BigInt::from_bytes_be(num_bigint::Sign::Plus, &x.to_be_bytes())
}

pub(crate) fn bigint_to_ubig(x: &BigInt) -> UBig {
    UBig::from_be_bytes(&x.magnitude().to_bytes_be())
}

/// Which discrete Laplace sampling loop to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LaplaceAlgo {
    /// Geometric count of `exp(-den/num)` trials.
    Algo1,
    /// Uniform fractional part plus `exp(-1)` geometric integer part.
    Algo2,
    /// `Algo2` iff the scale is at least `mix`; [`LaplaceAlgo::NEVER`] never switches.
    Auto(u64),
}

impl LaplaceAlgo {
    /// Sentinel threshold that is never met.
    pub const NEVER: u64 = u64::MAX;

    pub fn auto() -> Self {
        LaplaceAlgo::Auto(config::default_laplace_mix())
    }

    /// The concrete loop used at scale `p`.
    pub fn resolve(self, p: &RationalParam) -> LaplaceAlgo {
        match self {
            LaplaceAlgo::Auto(LaplaceAlgo::NEVER) => LaplaceAlgo::Algo1,
            LaplaceAlgo::Auto(mix) => {
                if p.num >= UBig::from(mix) * &p.den {
                    LaplaceAlgo::Algo2
                } else {
                    LaplaceAlgo::Algo1
                }
            }
            other => other,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            LaplaceAlgo::Algo1 => "algo1",
            LaplaceAlgo::Algo2 => "algo2",
            LaplaceAlgo::Auto(_) => "auto",
        }
    }
}

impl FromStr for LaplaceAlgo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "algo1" | "1" => Ok(LaplaceAlgo::Algo1),
            "algo2" | "2" => Ok(LaplaceAlgo::Algo2),
            "auto" => Ok(LaplaceAlgo::auto()),
            other => match other.strip_prefix("auto:") {
                Some("inf") => Ok(LaplaceAlgo::Auto(LaplaceAlgo::NEVER)),
                Some(m) => m
                    .parse()
                    .map(LaplaceAlgo::Auto)
                    .map_err(|_| Error::Parse(format!("bad mix threshold {m:?}"))),
                None => Err(Error::Parse(format!("unknown Laplace algorithm {s:?}"))),
            },
        }
    }
}

/// Rejection sampling: draws from `body` until `cond` accepts.
pub fn until<T>(
    src: &mut EntropySource,
    mut body: impl FnMut(&mut EntropySource) -> Result<T>,
    cond: impl Fn(&T) -> bool,
) -> Result<T> {
    let mut iterations = 0;
    loop {
        src.check_cap(&mut iterations)?;
        let v = body(src)?;
        if cond(&v) {
            return Ok(v);
        }
    }
}

/// `true` with probability `num / den`.
fn bernoulli_ratio(src: &mut EntropySource, num: &UBig, den: &UBig) -> Result<bool> {
    Ok(src.uniform(den)? < *num)
}

/// `true` with probability exactly `p`, computed as `uniform(den) < num`.
pub fn bernoulli(src: &mut EntropySource, p: &RationalParam) -> Result<bool> {
    if p.num > p.den {
        return Err(Error::invalid(format!("Bernoulli probability {p} exceeds 1")));
    }
    bernoulli_ratio(src, &p.num, &p.den)
}

fn fair_coin(src: &mut EntropySource) -> Result<bool> {
    Ok(src.uniform_u64(2)? == 1)
}

/// `exp(-num/den)` for `num <= den`: run `Bernoulli(γ/k)` for k = 1, 2, ...
/// until one fails and accept iff the failing index is odd.
fn bernoulli_exp_neg_unit(src: &mut EntropySource, num: &UBig, den: &UBig) -> Result<bool> {
    debug_assert!(num <= den);
    let mut k = UBig::from(1u8);
    let mut iterations = 0;
    loop {
        src.check_cap(&mut iterations)?;
        if !bernoulli_ratio(src, num, &(den * &k))? {
            return Ok(&k % UBig::from(2u8) == UBig::from(1u8));
        }
        k += UBig::from(1u8);
    }
}

fn bernoulli_exp_neg_parts(src: &mut EntropySource, num: &UBig, den: &UBig) -> Result<bool> {
    if num <= den {
        return bernoulli_exp_neg_unit(src, num, den);
    }
    // exp(-γ) = exp(-1)^floor(γ) · exp(-frac(γ)).
    let one = UBig::from(1u8);
    let whole = num / den;
    let mut i = UBig::from(0u8);
    while i < whole {
        if !bernoulli_exp_neg_unit(src, &one, &one)? {
            return Ok(false);
        }
        i += &one;
    }
    bernoulli_exp_neg_unit(src, &(num % den), den)
}

/// `true` with probability exactly `exp(-γ)`.
pub fn bernoulli_exp_neg(src: &mut EntropySource, gamma: &RationalParam) -> Result<bool> {
    bernoulli_exp_neg_parts(src, &gamma.num, &gamma.den)
}

/// Number of trials up to and including the first `false` (always >= 1).
pub fn geometric(
    src: &mut EntropySource,
    mut trial: impl FnMut(&mut EntropySource) -> Result<bool>,
) -> Result<u64> {
    let mut count = 0u64;
    let mut iterations = 0;
    loop {
        src.check_cap(&mut iterations)?;
        count += 1;
        if !trial(src)? {
            return Ok(count);
        }
    }
}

fn signed(negative: bool, magnitude: &UBig) -> Result<i64> {
    let m = i64::try_from(magnitude).map_err(|_| Error::Overflow(magnitude.to_string()))?;
    Ok(if negative { -m } else { m })
}

/// The shared outer loop: resample `(negative, 0)` so zero is not counted twice.
fn signed_from_loop(
    src: &mut EntropySource,
    sampling_loop: impl FnMut(&mut EntropySource) -> Result<(bool, UBig)>,
) -> Result<i64> {
    let zero = UBig::from(0u8);
    let (neg, mag) = until(src, sampling_loop, |(neg, mag)| !(*neg && *mag == zero))?;
    signed(neg, &mag)
}

/// Discrete Laplace with scale `num/den`, geometric sampling loop.
pub fn laplace_algo1(src: &mut EntropySource, p: &RationalParam) -> Result<i64> {
    p.require_positive("Laplace scale")?;
    let (num, den) = (&p.num, &p.den);
    signed_from_loop(src, |s| {
        let v = geometric(s, |s| bernoulli_exp_neg_parts(s, den, num))?;
        let neg = fair_coin(s)?;
        Ok((neg, UBig::from(v - 1)))
    })
}

/// Discrete Laplace with scale `num/den`, split loop: `U` uniform on `[0, num)`
/// accepted with `exp(-U/num)`, `V` geometric in `exp(-1)`, and
/// `Y = floor((U + num·V) / den)`.
pub fn laplace_algo2(src: &mut EntropySource, p: &RationalParam) -> Result<i64> {
    p.require_positive("Laplace scale")?;
    let (num, den) = (&p.num, &p.den);
    let one = UBig::from(1u8);
    signed_from_loop(src, |s| {
        let (u, _) = until(
            s,
            |s| {
                let u = s.uniform(num)?;
                let accept = bernoulli_exp_neg_parts(s, &u, num)?;
                Ok((u, accept))
            },
            |(_, accept)| *accept,
        )?;
        let v = geometric(s, |s| bernoulli_exp_neg_unit(s, &one, &one))?;
        let x = u + num * UBig::from(v - 1);
        let y = x / den;
        let neg = fair_coin(s)?;
        Ok((neg, y))
    })
}

pub fn laplace(src: &mut EntropySource, p: &RationalParam, algo: LaplaceAlgo) -> Result<i64> {
    match algo.resolve(p) {
        LaplaceAlgo::Algo1 => laplace_algo1(src, p),
        _ => laplace_algo2(src, p),
    }
}

/// Discrete Gaussian `N_Z(0, σ²)` with `σ = num/den`.
///
/// Proposes `Y ~ Laplace(t)` with `t = floor(σ) + 1` and accepts with
/// probability `exp(-(|Y|·t·den² - num²)² / (2·num²·t²·den²))`.
pub fn gaussian(src: &mut EntropySource, sigma: &RationalParam, algo: LaplaceAlgo) -> Result<i64> {
    sigma.require_positive("Gaussian sigma")?;
    let t = &sigma.num / &sigma.den + UBig::from(1u8);
    let num2 = &sigma.num * &sigma.num;
    let den2 = &sigma.den * &sigma.den;
    let scale = RationalParam::integer(t.clone());
    let accept_den = UBig::from(2u8) * &num2 * &t * &t * &den2;
    let (y, _) = until(
        src,
        |s| {
            let y = laplace(s, &scale, algo)?;
            let dev = IBig::from(y.unsigned_abs()) * IBig::from(&t * &den2) - IBig::from(num2.clone());
            let dev2 = UBig::try_from(&dev * &dev).expect("square is nonnegative");
            let accept = bernoulli_exp_neg_parts(s, &dev2, &accept_den)?;
            Ok((y, accept))
        },
        |(_, accept)| *accept,
    )?;
    Ok(y)
}

/// Discrete Gaussian centred at `mu`.
pub fn gaussian_shifted(
    src: &mut EntropySource,
    sigma: &RationalParam,
    mu: i64,
    algo: LaplaceAlgo,
) -> Result<i64> {
    let y = gaussian(src, sigma, algo)?;
    y.checked_add(mu)
        .ok_or_else(|| Error::Overflow(format!("{y} + {mu}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rp(n: u64, d: u64) -> RationalParam {
        RationalParam::new(n, d).unwrap()
    }

    fn freq(n: usize, mut f: impl FnMut() -> bool) -> f64 {
        (0..n).filter(|_| f()).count() as f64 / n as f64
    }

    #[test]
    fn parse_and_display() {
        assert_eq!("3/6".parse::<RationalParam>().unwrap(), rp(3, 6));
        assert_eq!("3/6".parse::<RationalParam>().unwrap().to_string(), "3/6");
        assert_eq!("0.25".parse::<RationalParam>().unwrap(), rp(1, 4));
        assert!("1/0".parse::<RationalParam>().is_err());
        assert!("-1/2".parse::<RationalParam>().is_err());
        assert_eq!(rp(5, 2).to_decimal_string(), "2.5");
        assert_eq!(rp(10000, 1).to_decimal_string(), "10000");
        assert_eq!(rp(1, 3).to_decimal_string(), "0.333333333333");
    }

    #[test]
    fn algo_resolution() {
        assert_eq!(LaplaceAlgo::Auto(0).resolve(&rp(1, 100)), LaplaceAlgo::Algo2);
        assert_eq!(
            LaplaceAlgo::Auto(LaplaceAlgo::NEVER).resolve(&rp(u64::MAX, 1)),
            LaplaceAlgo::Algo1
        );
        assert_eq!(LaplaceAlgo::Auto(3).resolve(&rp(5, 2)), LaplaceAlgo::Algo1);
        assert_eq!(LaplaceAlgo::Auto(3).resolve(&rp(6, 2)), LaplaceAlgo::Algo2);
        assert_eq!("auto:inf".parse::<LaplaceAlgo>().unwrap(), LaplaceAlgo::Auto(LaplaceAlgo::NEVER));
    }

    #[test]
    fn until_conditions_on_singleton() {
        let mut src = EntropySource::seeded(3);
        for _ in 0..200 {
            let v = until(&mut src, |s| s.uniform_u64(2), |x| *x == 1).unwrap();
            assert_eq!(v, 1);
        }
    }

    #[test]
    fn until_always_true_is_body() {
        let mut a = EntropySource::seeded(11);
        let mut b = EntropySource::seeded(11);
        for _ in 0..100 {
            let x = until(&mut a, |s| s.uniform_u64(10), |_| true).unwrap();
            assert_eq!(x, b.uniform_u64(10).unwrap());
        }
    }

    #[test]
    fn bernoulli_boundaries() {
        let mut src = EntropySource::seeded(5);
        for _ in 0..1000 {
            assert!(!bernoulli(&mut src, &rp(0, 1)).unwrap());
            assert!(bernoulli(&mut src, &rp(1, 1)).unwrap());
        }
        assert!(matches!(bernoulli(&mut src, &rp(3, 2)), Err(Error::InvalidParam(_))));
    }

    #[test]
    fn fair_bernoulli_frequency() {
        let mut src = EntropySource::seeded(17);
        let f = freq(1_000_000, || bernoulli(&mut src, &rp(1, 2)).unwrap());
        assert!((f - 0.5).abs() < 0.002, "{f}");
    }

    #[test]
    fn exp_neg_zero_is_certain() {
        let mut src = EntropySource::seeded(2);
        for _ in 0..1000 {
            assert!(bernoulli_exp_neg(&mut src, &rp(0, 1)).unwrap());
        }
    }

    #[test]
    fn exp_neg_one_frequency() {
        let mut src = EntropySource::seeded(23);
        let f = freq(1_000_000, || bernoulli_exp_neg(&mut src, &rp(1, 1)).unwrap());
        assert!((f - (-1f64).exp()).abs() < 0.002, "{f}");
    }

    #[test]
    fn geometric_with_sure_failure() {
        let mut src = EntropySource::replay([]);
        assert_eq!(geometric(&mut src, |_| Ok(false)).unwrap(), 1);
    }

    #[test]
    fn laplace_rejects_zero_scale() {
        let mut src = EntropySource::seeded(1);
        assert!(laplace_algo1(&mut src, &rp(0, 1)).is_err());
        assert!(gaussian(&mut src, &rp(0, 3), LaplaceAlgo::Algo1).is_err());
    }

    #[test]
    fn laplace_num_one_has_trivial_uniform() {
        // Scale 1/den: U is drawn from [0, 1) and consumes no bytes.
        let mut src = EntropySource::seeded(4);
        for _ in 0..1000 {
            let x = laplace_algo2(&mut src, &rp(1, 3)).unwrap();
            assert!(x.abs() < 60);
        }
    }

    #[test]
    fn laplace_symmetry_and_zero_mass() {
        let n = 1_000_000;
        let p0 = ((1f64).exp() - 1.0) / ((1f64).exp() + 1.0);
        for algo in [LaplaceAlgo::Algo1, LaplaceAlgo::Algo2] {
            let mut src = EntropySource::seeded(99);
            let mut counts = std::collections::HashMap::new();
            for _ in 0..n {
                *counts.entry(laplace(&mut src, &rp(1, 1), algo).unwrap()).or_insert(0u64) += 1;
            }
            let f = |k: i64| *counts.get(&k).unwrap_or(&0) as f64 / n as f64;
            assert!((f(0) - p0).abs() < 0.002, "{algo:?} {}", f(0));
            for k in 1..=3 {
                assert!((f(k) - f(-k)).abs() < 0.003, "{algo:?} k={k}");
            }
        }
    }

    #[test]
    fn gaussian_shift_mode() {
        let mut src = EntropySource::seeded(8);
        let mut counts = std::collections::BTreeMap::new();
        for _ in 0..20_000 {
            let x = gaussian_shifted(&mut src, &rp(1, 1), 7, LaplaceAlgo::auto()).unwrap();
            *counts.entry(x).or_insert(0u32) += 1;
        }
        let mode = counts.iter().max_by_key(|(_, c)| **c).map(|(k, _)| *k).unwrap();
        assert_eq!(mode, 7);
    }

    #[test]
    fn gaussian_symmetry() {
        let n = 1_000_000;
        let mut src = EntropySource::seeded(31);
        let mut counts = std::collections::HashMap::new();
        for _ in 0..n {
            *counts.entry(gaussian(&mut src, &rp(1, 1), LaplaceAlgo::auto()).unwrap()).or_insert(0u64) += 1;
        }
        let f = |k: i64| *counts.get(&k).unwrap_or(&0) as f64 / n as f64;
        for k in 1..=2 {
            assert!((f(k) - f(-k)).abs() < 0.003, "k={k}");
        }
    }

    #[test]
    fn replay_determinism() {
        let script: Vec<u8> = (0..4096u32).map(|i| (i.wrapping_mul(2654435761) >> 13) as u8).collect();
        let run = || {
            let mut src = EntropySource::replay(script.clone());
            let mut out = Vec::new();
            while let Ok(x) = gaussian(&mut src, &rp(3, 2), LaplaceAlgo::Algo2) {
                out.push(x);
            }
            (out, src.consumed())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn loop_cap_surfaces_as_error() {
        let mut src = EntropySource::replay(vec![0xFF; 64]).with_loop_cap(4);
        assert!(matches!(
            until(&mut src, |s| s.uniform_u64(3), |_| true),
            Err(Error::LoopCapExceeded(4))
        ));
    }
}

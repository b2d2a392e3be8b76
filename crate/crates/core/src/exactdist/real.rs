//! Certified real arithmetic.
//!
//! A [`BigReal`] is a closed interval with dyadic endpoints that is guaranteed
//! to contain the true value. Every operation rounds its endpoints outward at
//! the current working precision ([`crate::config::precision_bits`]), so the
//! enclosure stays sound through arbitrary chains of operations.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::config::{precision_bits, with_precision};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Dir {
    Down,
    Up,
}

/// `mant · 2^exp`. Not normalized; equality compares values.
#[derive(Clone, Debug)]
struct Dyadic {
    mant: BigInt,
    exp: i64,
}

fn shr_dir(m: &BigInt, k: u64, dir: Dir) -> BigInt {
    match dir {
        Dir::Down => m >> k,
        Dir::Up => -((-m) >> k),
    }
}

fn div_dir(a: &BigInt, b: &BigInt, dir: Dir) -> BigInt {
    match dir {
        Dir::Down => a.div_floor(b),
        Dir::Up => -((-a).div_floor(b)),
    }
}

impl Dyadic {
    fn zero() -> Self {
        Dyadic {
            mant: BigInt::zero(),
            exp: 0,
        }
    }

    fn int(m: impl Into<BigInt>) -> Self {
        Dyadic {
            mant: m.into(),
            exp: 0,
        }
    }

    fn pow2(e: i64) -> Self {
        Dyadic {
            mant: BigInt::one(),
            exp: e,
        }
    }

    fn is_zero(&self) -> bool {
        self.mant.is_zero()
    }

    fn sign(&self) -> Sign {
        self.mant.sign()
    }

    /// `|self| < 2^top`, and `|self| >= 2^(top-1)` when nonzero.
    fn top(&self) -> i64 {
        self.exp + self.mant.bits() as i64
    }

    fn neg(&self) -> Self {
        Dyadic {
            mant: -&self.mant,
            exp: self.exp,
        }
    }

    fn round(mut self, prec: u32, dir: Dir) -> Self {
        let bits = self.mant.bits();
        if bits > u64::from(prec) {
            let k = bits - u64::from(prec);
            self.mant = shr_dir(&self.mant, k, dir);
            self.exp += k as i64;
        }
        self
    }

    fn exact_add(&self, other: &Dyadic) -> Dyadic {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        let exp = self.exp.min(other.exp);
        let a = &self.mant << (self.exp - exp) as u64;
        let b = &other.mant << (other.exp - exp) as u64;
        Dyadic { mant: a + b, exp }
    }

    fn add_round(&self, other: &Dyadic, prec: u32, dir: Dir) -> Dyadic {
        if self.is_zero() {
            return other.clone().round(prec, dir);
        }
        if other.is_zero() {
            return self.clone().round(prec, dir);
        }
        let (big, small) = if self.top() >= other.top() {
            (self, other)
        } else {
            (other, self)
        };
        let cutoff = big.top() - i64::from(prec) - 8;
        if small.top() < cutoff {
            // |small| < 2^(cutoff-1): replace it by a bound on the correct side
            // so the alignment shift stays small.
            let eps = Dyadic::pow2(cutoff - 1);
            let repl = match (dir, small.sign()) {
                (Dir::Down, Sign::Minus) => eps.neg(),
                (Dir::Up, Sign::Plus) => eps,
                _ => Dyadic::zero(),
            };
            return big.exact_add(&repl).round(prec, dir);
        }
        big.exact_add(small).round(prec, dir)
    }

    fn mul_exact(&self, other: &Dyadic) -> Dyadic {
        Dyadic {
            mant: &self.mant * &other.mant,
            exp: self.exp + other.exp,
        }
    }

    fn div_round(&self, other: &Dyadic, prec: u32, dir: Dir) -> Dyadic {
        debug_assert!(!other.is_zero());
        let k = (i64::from(prec) + 2 + other.mant.bits() as i64 - self.mant.bits() as i64).max(0);
        let num = &self.mant << k as u64;
        let q = div_dir(&num, &other.mant, dir);
        Dyadic {
            mant: q,
            exp: self.exp - k - other.exp,
        }
        .round(prec, dir)
    }

    fn cmp(&self, other: &Dyadic) -> Ordering {
        let (sa, sb) = (self.sign(), other.sign());
        if sa != sb {
            return sign_rank(sa).cmp(&sign_rank(sb));
        }
        if sa == Sign::NoSign {
            return Ordering::Equal;
        }
        let mag = match self.top().cmp(&other.top()) {
            Ordering::Equal => {
                let exp = self.exp.min(other.exp);
                let a = self.mant.abs() << (self.exp - exp) as u64;
                let b = other.mant.abs() << (other.exp - exp) as u64;
                a.cmp(&b)
            }
            o => o,
        };
        if sa == Sign::Minus {
            mag.reverse()
        } else {
            mag
        }
    }

    fn from_ratio(num: &BigInt, den: &BigInt, prec: u32, dir: Dir) -> Dyadic {
        Dyadic::int(num.clone()).div_round(&Dyadic::int(den.clone()), prec, dir)
    }

    fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let bits = self.mant.bits();
        let (m, e) = if bits > 64 {
            let k = bits - 64;
            (&self.mant >> k, self.exp + k as i64)
        } else {
            (self.mant.clone(), self.exp)
        };
        let m = m.to_f64().unwrap_or(0.0);
        let e = e.clamp(-4000, 4000) as i32;
        let half = e / 2;
        m * 2f64.powi(half) * 2f64.powi(e - half)
    }

    fn to_rational(&self) -> BigRational {
        if self.exp >= 0 {
            BigRational::from_integer(&self.mant << self.exp as u64)
        } else {
            BigRational::new(self.mant.clone(), BigInt::one() << (-self.exp) as u64)
        }
    }
}

impl PartialEq for Dyadic {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Dyadic {}

fn sign_rank(s: Sign) -> i8 {
    match s {
        Sign::Minus => -1,
        Sign::NoSign => 0,
        Sign::Plus => 1,
    }
}

fn dmin(a: Dyadic, b: Dyadic) -> Dyadic {
    if a.cmp(&b) == Ordering::Greater {
        b
    } else {
        a
    }
}

fn dmax(a: Dyadic, b: Dyadic) -> Dyadic {
    if a.cmp(&b) == Ordering::Less {
        b
    } else {
        a
    }
}

/// A real number known to lie in `[lo, hi]`.
#[derive(Clone, PartialEq, Eq)]
pub struct BigReal {
    lo: Dyadic,
    hi: Dyadic,
}

impl BigReal {
    fn point(d: Dyadic) -> Self {
        BigReal {
            lo: d.clone(),
            hi: d,
        }
    }

    fn from_bounds(lo: Dyadic, hi: Dyadic) -> Self {
        debug_assert!(lo.cmp(&hi) != Ordering::Greater);
        BigReal { lo, hi }
    }

    pub fn zero() -> Self {
        Self::point(Dyadic::zero())
    }

    pub fn one() -> Self {
        Self::from_int(1)
    }

    pub fn from_int(n: i64) -> Self {
        Self::point(Dyadic::int(n))
    }

    pub fn from_bigint(n: &BigInt) -> Self {
        Self::point(Dyadic::int(n.clone()))
    }

    /// `2^e`, exactly.
    pub fn pow2(e: i64) -> Self {
        Self::point(Dyadic::pow2(e))
    }

    /// Exact for finite inputs; panics on NaN or infinity.
    pub fn from_f64(x: f64) -> Self {
        assert!(x.is_finite(), "non-finite float {x}");
        if x == 0.0 {
            return Self::zero();
        }
        let bits = x.to_bits();
        let sign = if bits >> 63 == 1 { -1i64 } else { 1 };
        let exp = ((bits >> 52) & 0x7ff) as i64;
        let frac = (bits & ((1u64 << 52) - 1)) as i64;
        let (m, e) = if exp == 0 {
            (frac, -1074)
        } else {
            (frac | (1i64 << 52), exp - 1075)
        };
        Self::point(Dyadic {
            mant: BigInt::from(sign * m),
            exp: e,
        })
    }

    /// Enclosure of a rational at the working precision (exact when the
    /// denominator is a power of two that fits).
    pub fn from_rational(r: &BigRational) -> Self {
        let prec = precision_bits();
        let (n, d) = (r.numer(), r.denom());
        if d.is_one() {
            return Self::from_bigint(n);
        }
        Self::from_bounds(
            Dyadic::from_ratio(n, d, prec, Dir::Down),
            Dyadic::from_ratio(n, d, prec, Dir::Up),
        )
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        Self::from_rational(&BigRational::new(num.into(), den.into()))
    }

    /// Lower endpoint as a degenerate interval.
    pub fn lower(&self) -> BigReal {
        Self::point(self.lo.clone())
    }

    pub fn upper(&self) -> BigReal {
        Self::point(self.hi.clone())
    }

    pub fn lo_f64(&self) -> f64 {
        self.lo.to_f64()
    }

    pub fn hi_f64(&self) -> f64 {
        self.hi.to_f64()
    }

    /// Midpoint rounded to `f64`.
    pub fn to_f64(&self) -> f64 {
        self.midpoint().lo.to_f64()
    }

    pub fn lower_rational(&self) -> BigRational {
        self.lo.to_rational()
    }

    pub fn upper_rational(&self) -> BigRational {
        self.hi.to_rational()
    }

    fn midpoint(&self) -> BigReal {
        let sum = self.lo.exact_add(&self.hi);
        Self::point(Dyadic {
            mant: sum.mant,
            exp: sum.exp - 1,
        })
    }

    /// Midpoint as a degenerate interval.
    pub fn mid(&self) -> BigReal {
        self.midpoint()
    }

    /// Half-width of the enclosure, rounded up.
    pub fn error_bound(&self) -> BigReal {
        let w = self.hi.add_round(&self.lo.neg(), precision_bits(), Dir::Up);
        Self::point(Dyadic {
            mant: w.mant,
            exp: w.exp - 1,
        })
    }

    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }

    /// `Some(ordering)` when the enclosures decide it, `None` when they overlap.
    /// Two equal exact points compare `Equal`.
    pub fn partial_cmp_decided(&self, other: &BigReal) -> Option<Ordering> {
        if self.hi.cmp(&other.lo) == Ordering::Less {
            Some(Ordering::Less)
        } else if self.lo.cmp(&other.hi) == Ordering::Greater {
            Some(Ordering::Greater)
        } else if self.is_exact() && other.is_exact() {
            Some(Ordering::Equal)
        } else {
            None
        }
    }

    /// True only if every value in `self` is below every value in `other`.
    pub fn definitely_lt(&self, other: &BigReal) -> bool {
        self.hi.cmp(&other.lo) == Ordering::Less
    }

    pub fn definitely_le(&self, other: &BigReal) -> bool {
        self.hi.cmp(&other.lo) != Ordering::Greater
    }

    /// True if the enclosures share a point.
    pub fn overlaps(&self, other: &BigReal) -> bool {
        self.lo.cmp(&other.hi) != Ordering::Greater && other.lo.cmp(&self.hi) != Ordering::Greater
    }

    pub fn contains(&self, other: &BigReal) -> bool {
        self.lo.cmp(&other.lo) != Ordering::Greater && other.hi.cmp(&self.hi) != Ordering::Greater
    }

    pub fn is_zero(&self) -> bool {
        self.lo.is_zero() && self.hi.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.lo.sign() == Sign::Plus
    }

    pub fn is_nonnegative(&self) -> bool {
        self.lo.sign() != Sign::Minus
    }

    /// Smallest interval containing both.
    pub fn hull(&self, other: &BigReal) -> BigReal {
        Self::from_bounds(
            dmin(self.lo.clone(), other.lo.clone()),
            dmax(self.hi.clone(), other.hi.clone()),
        )
    }

    /// Widens the enclosure by `±r` (`r >= 0`).
    pub fn widen(&self, r: &BigReal) -> BigReal {
        let prec = precision_bits();
        let r = &r.hi;
        Self::from_bounds(
            self.lo.add_round(&r.neg(), prec, Dir::Down),
            self.hi.add_round(r, prec, Dir::Up),
        )
    }

    /// Clamps the lower endpoint at zero (for quantities known to be >= 0).
    pub fn clamp_nonnegative(&self) -> BigReal {
        if self.lo.sign() == Sign::Minus {
            let hi = dmax(self.hi.clone(), Dyadic::zero());
            Self::from_bounds(Dyadic::zero(), hi)
        } else {
            self.clone()
        }
    }

    pub fn abs(&self) -> BigReal {
        if self.lo.sign() != Sign::Minus {
            self.clone()
        } else if self.hi.sign() != Sign::Plus {
            -self
        } else {
            Self::from_bounds(Dyadic::zero(), dmax(self.lo.neg(), self.hi.clone()))
        }
    }

    pub fn max(&self, other: &BigReal) -> BigReal {
        Self::from_bounds(
            dmax(self.lo.clone(), other.lo.clone()),
            dmax(self.hi.clone(), other.hi.clone()),
        )
    }

    pub fn min(&self, other: &BigReal) -> BigReal {
        Self::from_bounds(
            dmin(self.lo.clone(), other.lo.clone()),
            dmin(self.hi.clone(), other.hi.clone()),
        )
    }

    /// `None` if the divisor's enclosure contains zero.
    pub fn checked_div(&self, other: &BigReal) -> Option<BigReal> {
        if other.lo.sign() != Sign::Plus && other.hi.sign() != Sign::Minus {
            return None;
        }
        let prec = precision_bits();
        if self.lo.sign() != Sign::Minus && other.lo.sign() == Sign::Plus {
            return Some(Self::from_bounds(
                self.lo.div_round(&other.hi, prec, Dir::Down),
                self.hi.div_round(&other.lo, prec, Dir::Up),
            ));
        }
        let mut lo: Option<Dyadic> = None;
        let mut hi: Option<Dyadic> = None;
        for a in [&self.lo, &self.hi] {
            for b in [&other.lo, &other.hi] {
                let d = a.div_round(b, prec, Dir::Down);
                let u = a.div_round(b, prec, Dir::Up);
                lo = Some(match lo {
                    Some(l) => dmin(l, d),
                    None => d,
                });
                hi = Some(match hi {
                    Some(h) => dmax(h, u),
                    None => u,
                });
            }
        }
        Some(Self::from_bounds(lo.unwrap(), hi.unwrap()))
    }

    pub fn recip(&self) -> Option<BigReal> {
        BigReal::one().checked_div(self)
    }

    pub fn powi(&self, n: u64) -> BigReal {
        let mut base = self.clone();
        let mut acc = BigReal::one();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                acc = &acc * &base;
            }
            n >>= 1;
            if n > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// Largest `|x|` over the enclosure has `|x| < 2^t`; returns that `t`.
    fn mag_top(&self) -> i64 {
        self.lo.top().max(self.hi.top())
    }

    /// `e^x`.
    pub fn exp(&self) -> BigReal {
        let prec = precision_bits();
        if self.is_exact() {
            return exp_point(&self.lo, prec).round_out(prec);
        }
        let lo = exp_point(&self.lo, prec).lo;
        let hi = exp_point(&self.hi, prec).hi;
        Self::from_bounds(lo, hi).round_out(prec)
    }

    /// Natural logarithm; `None` unless the enclosure is strictly positive.
    pub fn ln(&self) -> Option<BigReal> {
        if !self.is_positive() {
            return None;
        }
        if *self == BigReal::one() {
            return Some(BigReal::zero());
        }
        let prec = precision_bits();
        if self.is_exact() {
            return Some(ln_point(&self.lo, prec).round_out(prec));
        }
        let lo = ln_point(&self.lo, prec).lo;
        let hi = ln_point(&self.hi, prec).hi;
        Some(Self::from_bounds(lo, hi).round_out(prec))
    }

    /// Square root; a slightly negative lower endpoint is clamped at zero.
    /// `None` if the enclosure is entirely negative.
    pub fn sqrt(&self) -> Option<BigReal> {
        if self.hi.sign() == Sign::Minus {
            return None;
        }
        let prec = precision_bits();
        let lo = if self.lo.sign() == Sign::Plus {
            sqrt_point(&self.lo, prec, Dir::Down)
        } else {
            Dyadic::zero()
        };
        let hi = sqrt_point(&self.hi, prec, Dir::Up);
        Some(Self::from_bounds(lo, hi))
    }

    /// `x^a` for `x >= 0` and rational `a > 0`.
    pub fn pow_rational(&self, a: &BigRational) -> Option<BigReal> {
        if a.is_integer() && !a.is_negative() {
            return a.to_integer().to_u64().map(|n| self.powi(n));
        }
        if self.is_zero() && a.is_positive() {
            return Some(BigReal::zero());
        }
        let l = self.ln()?;
        Some((&BigReal::from_rational(a) * &l).exp())
    }

    fn round_out(self, prec: u32) -> BigReal {
        Self::from_bounds(self.lo.round(prec, Dir::Down), self.hi.round(prec, Dir::Up))
    }

    /// Midpoint in scientific notation with `digits` significant digits.
    pub fn to_decimal(&self, digits: usize) -> String {
        dyadic_to_decimal(&self.midpoint().lo, digits.max(1))
    }

    /// Enclosure of a decimal string such as `0.25`, `-3` or `1e-9`.
    pub fn parse_decimal(s: &str) -> crate::Result<BigReal> {
        Ok(BigReal::from_rational(&crate::parse_rational(s)?))
    }
}

fn exp_point(x: &Dyadic, prec: u32) -> BigReal {
    if x.is_zero() {
        return BigReal::one();
    }
    // Halve until |r| < 2^-8, sum the Taylor series, then square back.
    let s = (x.top() + 8).max(0) as u32;
    let wp = prec + s + 32;
    with_precision(wp, || {
        let r = BigReal::point(Dyadic {
            mant: x.mant.clone(),
            exp: x.exp - i64::from(s),
        });
        let stop = -(i64::from(wp) + 4);
        let mut sum = BigReal::one();
        let mut term = BigReal::one();
        let mut k = 1i64;
        loop {
            term = (&term * &r).checked_div(&BigReal::from_int(k)).unwrap();
            sum = &sum + &term;
            if term.mag_top() < stop {
                break;
            }
            k += 1;
        }
        // Remaining terms are bounded by |term|·|r|/(k+1)·1/(1-|r|) < |term|.
        let mut v = sum.widen(&BigReal::pow2(stop));
        for _ in 0..s {
            v = &v * &v;
        }
        v
    })
}

thread_local! {
    static LN2_CACHE: RefCell<HashMap<u32, BigReal>> = RefCell::new(HashMap::new());
}

/// `2·atanh(u)` for `|u| <= 1/3`, evaluated at the current precision.
fn two_atanh(u: &BigReal) -> BigReal {
    let wp = i64::from(precision_bits());
    let stop = -(wp + 4);
    let u2 = u * u;
    let mut pow = u.clone();
    let mut sum = u.clone();
    let mut j = 1i64;
    loop {
        pow = &pow * &u2;
        let term = pow.checked_div(&BigReal::from_int(2 * j + 1)).unwrap();
        sum = &sum + &term;
        if pow.mag_top() < stop {
            break;
        }
        j += 1;
    }
    // Tail: sum over later terms <= |pow|·u²/(1-u²) < |pow|.
    let sum = sum.widen(&BigReal::pow2(stop));
    &sum + &sum
}

fn ln2(prec: u32) -> BigReal {
    if let Some(v) = LN2_CACHE.with(|c| c.borrow().get(&prec).cloned()) {
        return v;
    }
    let v = with_precision(prec, || two_atanh(&BigReal::from_ratio(1, 3)));
    LN2_CACHE.with(|c| c.borrow_mut().insert(prec, v.clone()));
    v
}

fn ln_point(x: &Dyadic, prec: u32) -> BigReal {
    debug_assert!(x.sign() == Sign::Plus);
    let bits = x.mant.bits() as i64;
    let mut n = x.top();
    let mut y = Dyadic {
        mant: x.mant.clone(),
        exp: -bits,
    };
    // y in [1/2, 1); move it into [1/√2, √2) so the series converges fast.
    // 181/256 < 1/√2.
    if (&y.mant * 256) < (BigInt::from(181) << bits as u64) {
        y.exp += 1;
        n -= 1;
    }
    let nbits = 64 - n.unsigned_abs().leading_zeros();
    let wp = prec + 32 + nbits;
    with_precision(wp, || {
        let y = BigReal::point(y);
        let one = BigReal::one();
        let u = (&y - &one).checked_div(&(&y + &one)).unwrap();
        let l = two_atanh(&u);
        if n == 0 {
            l
        } else {
            &l + &(&BigReal::from_int(n) * &ln2(wp))
        }
    })
}

fn sqrt_point(x: &Dyadic, prec: u32, dir: Dir) -> Dyadic {
    if x.is_zero() {
        return Dyadic::zero();
    }
    let bits = x.mant.bits() as i64;
    let mut k = (2 * i64::from(prec) + 4 - bits).max(0);
    if (x.exp - k).rem_euclid(2) != 0 {
        k += 1;
    }
    let m = &x.mant << k as u64;
    let e = (x.exp - k) / 2;
    let s = m.sqrt();
    let mant = if dir == Dir::Up && &s * &s != m { s + 1 } else { s };
    Dyadic { mant, exp: e }.round(prec, dir)
}

fn dyadic_to_decimal(d: &Dyadic, digits: usize) -> String {
    if d.is_zero() {
        return "0".to_string();
    }
    let neg = d.sign() == Sign::Minus;
    let mag = d.mant.abs();
    // Estimate the decimal exponent, then fix it up after scaling.
    let mut dexp = ((d.top() - 1) as f64 * std::f64::consts::LOG10_2).floor() as i64;
    let ten = BigInt::from(10);
    let scaled = |dexp: i64| -> BigInt {
        // round(|d| · 10^(digits-1-dexp))
        let p = digits as i64 - 1 - dexp;
        let (mut num, mut den) = (mag.clone(), BigInt::one());
        if p >= 0 {
            num *= num_traits::pow(ten.clone(), p as usize);
        } else {
            den *= num_traits::pow(ten.clone(), (-p) as usize);
        }
        if d.exp >= 0 {
            num <<= d.exp as u64;
        } else {
            den <<= (-d.exp) as u64;
        }
        let twice: BigInt = num * 2 + &den;
        twice.div_floor(&(den * 2))
    };
    let mut n = scaled(dexp);
    let limit = num_traits::pow(ten.clone(), digits);
    while n >= limit {
        dexp += 1;
        n = scaled(dexp);
    }
    while n < num_traits::pow(ten.clone(), digits - 1) {
        dexp -= 1;
        n = scaled(dexp);
    }
    let s = n.to_string();
    let (head, tail) = s.split_at(1);
    let tail = tail.trim_end_matches('0');
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    out.push_str(head);
    if !tail.is_empty() {
        out.push('.');
        out.push_str(tail);
    }
    if dexp != 0 {
        out.push_str(&format!("e{dexp}"));
    }
    out
}

impl fmt::Display for BigReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = f.precision().unwrap_or(20);
        if self.is_exact() {
            write!(f, "{}", self.to_decimal(digits))
        } else {
            write!(f, "{} ± {}", self.to_decimal(digits), self.error_bound().to_decimal(3))
        }
    }
}

impl fmt::Debug for BigReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}, {}]",
            dyadic_to_decimal(&self.lo, 25),
            dyadic_to_decimal(&self.hi, 25)
        )
    }
}

impl Neg for &BigReal {
    type Output = BigReal;
    fn neg(self) -> BigReal {
        BigReal::from_bounds(self.hi.neg(), self.lo.neg())
    }
}

impl Neg for BigReal {
    type Output = BigReal;
    fn neg(self) -> BigReal {
        -&self
    }
}

impl Add for &BigReal {
    type Output = BigReal;
    fn add(self, rhs: &BigReal) -> BigReal {
        let prec = precision_bits();
        BigReal::from_bounds(
            self.lo.add_round(&rhs.lo, prec, Dir::Down),
            self.hi.add_round(&rhs.hi, prec, Dir::Up),
        )
    }
}

impl Sub for &BigReal {
    type Output = BigReal;
    fn sub(self, rhs: &BigReal) -> BigReal {
        let prec = precision_bits();
        BigReal::from_bounds(
            self.lo.add_round(&rhs.hi.neg(), prec, Dir::Down),
            self.hi.add_round(&rhs.lo.neg(), prec, Dir::Up),
        )
    }
}

impl Mul for &BigReal {
    type Output = BigReal;
    fn mul(self, rhs: &BigReal) -> BigReal {
        let prec = precision_bits();
        if self.lo.sign() != Sign::Minus && rhs.lo.sign() != Sign::Minus {
            return BigReal::from_bounds(
                self.lo.mul_exact(&rhs.lo).round(prec, Dir::Down),
                self.hi.mul_exact(&rhs.hi).round(prec, Dir::Up),
            );
        }
        let ps = [
            self.lo.mul_exact(&rhs.lo),
            self.lo.mul_exact(&rhs.hi),
            self.hi.mul_exact(&rhs.lo),
            self.hi.mul_exact(&rhs.hi),
        ];
        let lo = ps.iter().cloned().reduce(dmin).unwrap();
        let hi = ps.into_iter().reduce(dmax).unwrap();
        BigReal::from_bounds(lo.round(prec, Dir::Down), hi.round(prec, Dir::Up))
    }
}

impl Div for &BigReal {
    type Output = BigReal;
    /// Panics if the divisor's enclosure contains zero; see [`BigReal::checked_div`].
    fn div(self, rhs: &BigReal) -> BigReal {
        self.checked_div(rhs)
            .unwrap_or_else(|| panic!("division by an interval containing zero: {rhs:?}"))
    }
}

macro_rules! owned_ops {
    ($($tr:ident $m:ident),*) => {$(
        impl $tr for BigReal {
            type Output = BigReal;
            fn $m(self, rhs: BigReal) -> BigReal { (&self).$m(&rhs) }
        }
        impl $tr<&BigReal> for BigReal {
            type Output = BigReal;
            fn $m(self, rhs: &BigReal) -> BigReal { (&self).$m(rhs) }
        }
        impl $tr<BigReal> for &BigReal {
            type Output = BigReal;
            fn $m(self, rhs: BigReal) -> BigReal { self.$m(&rhs) }
        }
    )*};
}
owned_ops!(Add add, Sub sub, Mul mul, Div div);

impl std::iter::Sum for BigReal {
    fn sum<I: Iterator<Item = BigReal>>(iter: I) -> BigReal {
        iter.fold(BigReal::zero(), |a, b| &a + &b)
    }
}

impl<'a> std::iter::Sum<&'a BigReal> for BigReal {
    fn sum<I: Iterator<Item = &'a BigReal>>(iter: I) -> BigReal {
        iter.fold(BigReal::zero(), |a, b| &a + b)
    }
}

impl From<i64> for BigReal {
    fn from(n: i64) -> Self {
        BigReal::from_int(n)
    }
}

impl From<&BigRational> for BigReal {
    fn from(r: &BigRational) -> Self {
        BigReal::from_rational(r)
    }
}

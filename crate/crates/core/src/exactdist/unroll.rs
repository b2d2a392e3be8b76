//! Finite-cut unrolling of probabilistic loops.
//!
//! `loop_unroll(spec, k)` computes the sub-distribution of terminal states
//! reachable within `k` guarded iterations: iteration `n > 0` returns the
//! state itself when the guard is false and otherwise continues through the
//! kernel; iteration 0 contributes nothing. The loop's distribution is the
//! pointwise supremum over cuts.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::{BigReal, MassFunction};
use crate::error::{Error, Result};

/// Default bound on distinct live states.
pub const DEFAULT_STATE_CAP: usize = 1_000_000;

/// Mass type of a kernel: exact rationals or certified reals.
pub trait Weight: Clone {
    fn null() -> Self;
    fn unit() -> Self;
    fn plus(&self, other: &Self) -> Self;
    fn times(&self, other: &Self) -> Self;
}

impl Weight for BigRational {
    fn null() -> Self {
        Zero::zero()
    }
    fn unit() -> Self {
        One::one()
    }
    fn plus(&self, other: &Self) -> Self {
        self + other
    }
    fn times(&self, other: &Self) -> Self {
        self * other
    }
}

impl Weight for BigReal {
    fn null() -> Self {
        BigReal::zero()
    }
    fn unit() -> Self {
        BigReal::one()
    }
    fn plus(&self, other: &Self) -> Self {
        self + other
    }
    fn times(&self, other: &Self) -> Self {
        self * other
    }
}

/// A probabilistic loop `while guard(s) { s ~ kernel(s) }` started at `init`.
pub trait LoopSpec {
    type State: Clone + Ord;
    type Weight: Weight;

    fn init(&self) -> Self::State;
    fn guard(&self, s: &Self::State) -> bool;
    /// Successor states with their masses; may sum to less than one.
    fn kernel(&self, s: &Self::State) -> Vec<(Self::State, Self::Weight)>;
}

/// Result of unrolling to a fixed cut.
#[derive(Clone, Debug)]
pub struct Unrolled<S: Ord, W> {
    /// Mass on terminal (guard-false) states.
    pub terminal: BTreeMap<S, W>,
    /// Mass still inside the loop when the cut ran out. For a stochastic
    /// kernel this is exactly the mass missing from `terminal`.
    pub pending: W,
}

impl<S: Ord + Clone, W: Weight> Unrolled<S, W> {
    pub fn mass(&self, s: &S) -> W {
        self.terminal.get(s).cloned().unwrap_or_else(W::null)
    }

    pub fn total(&self) -> W {
        self.terminal.values().fold(W::null(), |a, b| a.plus(b))
    }
}

impl<S: Ord + Clone> Unrolled<S, BigRational> {
    /// Integer-valued projection of the terminal states, with `pending` as the
    /// tail bound.
    pub fn to_mass_function(&self, f: impl Fn(&S) -> Option<i64>) -> MassFunction {
        let mut map: BTreeMap<i64, BigReal> = BTreeMap::new();
        for (s, w) in &self.terminal {
            if let Some(z) = f(s) {
                let e = map.entry(z).or_insert_with(BigReal::zero);
                *e = &*e + &BigReal::from_rational(w);
            }
        }
        MassFunction::from_map(&map, BigReal::from_rational(&self.pending).upper())
    }
}

impl<S: Ord + Clone> Unrolled<S, BigReal> {
    pub fn to_mass_function(&self, f: impl Fn(&S) -> Option<i64>) -> MassFunction {
        let mut map: BTreeMap<i64, BigReal> = BTreeMap::new();
        for (s, w) in &self.terminal {
            if let Some(z) = f(s) {
                let e = map.entry(z).or_insert_with(BigReal::zero);
                *e = &*e + w;
            }
        }
        MassFunction::from_map(&map, self.pending.upper())
    }
}

pub fn loop_unroll<L: LoopSpec>(spec: &L, cut: u32) -> Result<Unrolled<L::State, L::Weight>> {
    loop_unroll_capped(spec, cut, DEFAULT_STATE_CAP)
}

pub fn loop_unroll_capped<L: LoopSpec>(
    spec: &L,
    cut: u32,
    cap: usize,
) -> Result<Unrolled<L::State, L::Weight>> {
    let mut terminal: BTreeMap<L::State, L::Weight> = BTreeMap::new();
    let mut frontier: BTreeMap<L::State, L::Weight> = BTreeMap::new();
    frontier.insert(spec.init(), L::Weight::unit());
    if cut == 0 {
        return Ok(Unrolled {
            terminal,
            pending: L::Weight::null(),
        });
    }
    for _ in 0..cut {
        let mut next: BTreeMap<L::State, L::Weight> = BTreeMap::new();
        for (s, w) in frontier {
            if !spec.guard(&s) {
                let e = terminal.entry(s).or_insert_with(L::Weight::null);
                *e = e.plus(&w);
                continue;
            }
            for (t, p) in spec.kernel(&s) {
                let e = next.entry(t).or_insert_with(L::Weight::null);
                *e = e.plus(&w.times(&p));
            }
        }
        if next.len() + terminal.len() > cap {
            return Err(Error::StateExplosion { limit: cap });
        }
        frontier = next;
    }
    let pending = frontier.values().fold(L::Weight::null(), |a, b| a.plus(b));
    Ok(Unrolled { terminal, pending })
}

fn ratio(n: impl Into<BigInt>, d: impl Into<BigInt>) -> BigRational {
    BigRational::new(n.into(), d.into())
}

/// Counts trials until the first failure. State `(running, count)`, started
/// at `(true, 0)`; the trial succeeds with probability `t`.
#[derive(Clone, Debug)]
pub struct GeometricSpec {
    pub t: BigRational,
}

impl LoopSpec for GeometricSpec {
    type State = (bool, u64);
    type Weight = BigRational;

    fn init(&self) -> (bool, u64) {
        (true, 0)
    }
    fn guard(&self, s: &(bool, u64)) -> bool {
        s.0
    }
    fn kernel(&self, s: &(bool, u64)) -> Vec<((bool, u64), BigRational)> {
        let n = s.1 + 1;
        vec![
            ((true, n), self.t.clone()),
            ((false, n), BigRational::one() - &self.t),
        ]
    }
}

/// State of a rejection loop: still sampling, or accepted value.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum UntilState {
    Pending,
    Done(i64),
}

/// `until(body, cond)` for a body with finite exact distribution.
#[derive(Clone, Debug)]
pub struct UntilSpec {
    pub body: Vec<(i64, BigRational)>,
    pub accept: fn(i64) -> bool,
    /// Optional bound: values `>= n` rejected (used when `accept` can't capture it).
    pub below: Option<i64>,
}

impl UntilSpec {
    fn accepts(&self, v: i64) -> bool {
        (self.accept)(v) && self.below.is_none_or(|n| v < n)
    }

    /// Uniform sampling on `[0, n)` exactly as the entropy source does it:
    /// one round draws a candidate from the smallest whole-byte power-of-two
    /// window masked to `ceil(log2 n)` bits and rejects it if `>= n`.
    pub fn uniform(n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("uniform range must be at least 1"));
        }
        let bits = 64 - (n - 1).leading_zeros();
        if bits > 16 {
            return Err(Error::EnumerationTooLarge(format!("uniform({n}) window 2^{bits}")));
        }
        let w = 1i64 << bits;
        Ok(UntilSpec {
            body: (0..w).map(|v| (v, ratio(1, w))).collect(),
            accept: |_| true,
            below: Some(n as i64),
        })
    }
}

impl LoopSpec for UntilSpec {
    type State = UntilState;
    type Weight = BigRational;

    fn init(&self) -> UntilState {
        UntilState::Pending
    }
    fn guard(&self, s: &UntilState) -> bool {
        *s == UntilState::Pending
    }
    fn kernel(&self, _: &UntilState) -> Vec<(UntilState, BigRational)> {
        let mut reject = BigRational::zero();
        let mut out = Vec::new();
        for (v, p) in &self.body {
            if self.accepts(*v) {
                out.push((UntilState::Done(*v), p.clone()));
            } else {
                reject += p;
            }
        }
        if !reject.is_zero() {
            out.push((UntilState::Pending, reject));
        }
        out
    }
}

/// The alternating-series loop behind `Bernoulli(e^{-γ})` for `γ <= 1`:
/// state `(k, running)`; from `(k, true)` move to `(k+1, true)` with
/// probability `γ/k`, else stop at `(k, false)`. Accept iff the final `k` is odd.
#[derive(Clone, Debug)]
pub struct BernoulliExpNegSpec {
    pub gamma: BigRational,
}

impl LoopSpec for BernoulliExpNegSpec {
    type State = (u64, bool);
    type Weight = BigRational;

    fn init(&self) -> (u64, bool) {
        (1, true)
    }
    fn guard(&self, s: &(u64, bool)) -> bool {
        s.1
    }
    fn kernel(&self, s: &(u64, bool)) -> Vec<((u64, bool), BigRational)> {
        let p = &self.gamma / BigRational::from_integer(s.0.into());
        vec![((s.0 + 1, true), p.clone()), ((s.0, false), BigRational::one() - p)]
    }
}

impl BernoulliExpNegSpec {
    /// Enclosure of the acceptance probability from one unrolling: the odd
    /// terminal mass, widened upward by the pending mass.
    pub fn acceptance(&self, cut: u32) -> Result<(BigRational, BigRational)> {
        let u = loop_unroll(self, cut)?;
        let accepted = u
            .terminal
            .iter()
            .filter(|((k, _), _)| k % 2 == 1)
            .fold(BigRational::zero(), |a, (_, w)| a + w);
        let hi = &accepted + &u.pending;
        Ok((accepted, hi))
    }
}

/// States shared by the flattened Laplace loops.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum LaplaceState {
    /// Algo1: `n` successful `e^{-den/num}` trials so far.
    Geo(u64),
    /// Algo2: drawing the fractional part `U`.
    Uniform,
    /// Algo2: `U = u` drawn, acceptance trial pending.
    Accept(u64),
    /// Algo2: `U = u` accepted, `n` successful `e^{-1}` trials so far.
    Whole(u64, u64),
    /// Magnitude fixed, sign coin pending.
    Coin(u64),
    Done(i64),
}

/// One of the two discrete Laplace loops as a state machine. Bernoulli
/// `e^{-x}` sub-trials are taken as primitives with certified masses.
#[derive(Clone, Debug)]
pub struct LaplaceLoopSpec {
    num: u64,
    den: u64,
    algo2: bool,
    /// `e^{-den/num}` for algo1, `e^{-1}` for algo2.
    p: BigReal,
    /// Algo2 acceptance masses `e^{-u/num}`.
    accept: Vec<BigReal>,
}

impl LaplaceLoopSpec {
    pub fn algo1(num: u64, den: u64) -> Self {
        LaplaceLoopSpec {
            num,
            den,
            algo2: false,
            p: BigReal::from_rational(&-ratio(den, num)).exp(),
            accept: Vec::new(),
        }
    }

    pub fn algo2(num: u64, den: u64) -> Self {
        LaplaceLoopSpec {
            num,
            den,
            algo2: true,
            p: BigReal::from_int(-1).exp(),
            accept: (0..num)
                .map(|u| BigReal::from_rational(&-ratio(u, num)).exp())
                .collect(),
        }
    }
}

impl LoopSpec for LaplaceLoopSpec {
    type State = LaplaceState;
    type Weight = BigReal;

    fn init(&self) -> LaplaceState {
        if self.algo2 {
            LaplaceState::Uniform
        } else {
            LaplaceState::Geo(0)
        }
    }

    fn guard(&self, s: &LaplaceState) -> bool {
        !matches!(s, LaplaceState::Done(_))
    }

    fn kernel(&self, s: &LaplaceState) -> Vec<(LaplaceState, BigReal)> {
        use LaplaceState::*;
        let one = BigReal::one();
        let half = BigReal::from_ratio(1, 2);
        match *s {
            Geo(n) => vec![(Geo(n + 1), self.p.clone()), (Coin(n), &one - &self.p)],
            Uniform => {
                let m = BigReal::from_ratio(1, self.num as i64);
                (0..self.num).map(|u| (Accept(u), m.clone())).collect()
            }
            Accept(u) => {
                let a = &self.accept[u as usize];
                vec![(Whole(u, 0), a.clone()), (Uniform, &one - a)]
            }
            Whole(u, n) => {
                let y = (u + self.num * n) / self.den;
                vec![(Whole(u, n + 1), self.p.clone()), (Coin(y), &one - &self.p)]
            }
            Coin(m) => {
                let restart = self.init();
                let neg = if m == 0 { restart } else { Done(-(m as i64)) };
                vec![(Done(m as i64), half.clone()), (neg, half)]
            }
            Done(_) => Vec::new(),
        }
    }
}

/// Integer outcome of a terminal Laplace state.
pub fn laplace_outcome(s: &LaplaceState) -> Option<i64> {
    match s {
        LaplaceState::Done(z) => Some(*z),
        _ => None,
    }
}

/// Integer outcome of an accepted rejection loop.
pub fn until_outcome(s: &UntilState) -> Option<i64> {
    match s {
        UntilState::Done(v) => Some(*v),
        UntilState::Pending => None,
    }
}

/// Integer outcome of a finished geometric loop.
pub fn geometric_outcome(s: &(bool, u64)) -> Option<i64> {
    (!s.0).then_some(s.1 as i64)
}

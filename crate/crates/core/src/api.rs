//! Entry points shared by the command line and the Python module, so both
//! produce identical results for identical inputs.

use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::audit::{self, AuditReport};
use crate::entropy::EntropySource;
use crate::error::{Error, Result};
use crate::exactdist::unroll::{GeometricSpec, UntilSpec};
use crate::exactdist::{pmf, BigReal, MassFunction};
use crate::mechanisms::{self, Bins, Universe};
use crate::ledger::Ledger;
use crate::privacy::{approx_dp_of, noise, noise_params_for, Budget, DpSystem, Mechanism, Query};
use crate::samplers::{self, LaplaceAlgo, RationalParam};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleDist {
    /// Uniform on `[0, den)`.
    Uniform,
    /// `1` with probability `num/den`.
    Bernoulli,
    /// `1` with probability `e^{-num/den}`.
    BernoulliExpNeg,
    /// Trials up to and including the first failure; success probability `num/den`.
    Geometric,
    /// Discrete Laplace with scale `num/den`, shifted by `mu`.
    Laplace,
    /// Discrete Gaussian with `σ = num/den`, centred at `mu`.
    Gaussian,
}

impl FromStr for SampleDist {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "uniform" => SampleDist::Uniform,
            "bernoulli" => SampleDist::Bernoulli,
            "bernoulli-exp-neg" | "bexp" => SampleDist::BernoulliExpNeg,
            "geometric" => SampleDist::Geometric,
            "laplace" => SampleDist::Laplace,
            "gaussian" => SampleDist::Gaussian,
            other => return Err(Error::Parse(format!("unknown distribution {other:?}"))),
        })
    }
}

impl fmt::Display for SampleDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SampleDist::Uniform => "uniform",
            SampleDist::Bernoulli => "bernoulli",
            SampleDist::BernoulliExpNeg => "bernoulli-exp-neg",
            SampleDist::Geometric => "geometric",
            SampleDist::Laplace => "laplace",
            SampleDist::Gaussian => "gaussian",
        })
    }
}

fn one() -> u64 {
    1
}

fn default_algo() -> String {
    "auto".into()
}

/// A sampler with its parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSpec {
    pub dist: SampleDist,
    #[serde(default = "one")]
    pub num: u64,
    #[serde(default = "one")]
    pub den: u64,
    #[serde(default)]
    pub mu: i64,
    #[serde(default = "default_algo")]
    pub algo: String,
}

impl SamplerSpec {
    pub fn new(dist: SampleDist, num: u64, den: u64) -> Self {
        SamplerSpec {
            dist,
            num,
            den,
            mu: 0,
            algo: default_algo(),
        }
    }

    fn param(&self) -> Result<RationalParam> {
        RationalParam::new(self.num, self.den)
    }

    fn laplace_algo(&self) -> Result<LaplaceAlgo> {
        self.algo.parse()
    }

    /// A reusable closure drawing one sample.
    pub fn sampler(&self) -> Result<impl FnMut(&mut EntropySource) -> Result<i64>> {
        let p = self.param()?;
        let algo = self.laplace_algo()?;
        let (dist, mu, den) = (self.dist, self.mu, self.den);
        match dist {
            SampleDist::Bernoulli if self.num > self.den => {
                return Err(Error::invalid(format!("probability {p} exceeds 1")))
            }
            SampleDist::Geometric if self.num >= self.den => {
                return Err(Error::invalid(format!("geometric success probability {p} must be below 1")))
            }
            SampleDist::Laplace | SampleDist::Gaussian if self.num == 0 => {
                return Err(Error::invalid(format!("{dist} scale must be positive")))
            }
            _ => {}
        }
        Ok(move |src: &mut EntropySource| -> Result<i64> {
            let shift = |z: i64| z.checked_add(mu).ok_or_else(|| Error::Overflow(format!("{z} + {mu}")));
            match dist {
                SampleDist::Uniform => Ok(src.uniform_u64(den)? as i64),
                SampleDist::Bernoulli => Ok(samplers::bernoulli(src, &p)? as i64),
                SampleDist::BernoulliExpNeg => Ok(samplers::bernoulli_exp_neg(src, &p)? as i64),
                SampleDist::Geometric => {
                    let g = samplers::geometric(src, |s| samplers::bernoulli(s, &p))?;
                    i64::try_from(g).map_err(|_| Error::Overflow(format!("geometric count {g}")))
                }
                SampleDist::Laplace => shift(samplers::laplace(src, &p, algo)?),
                SampleDist::Gaussian => samplers::gaussian_shifted(src, &p, mu, algo),
            }
        })
    }

    /// Exact distribution of the sampler.
    pub fn oracle(&self) -> Result<MassFunction> {
        let p = self.param()?;
        let q = p.to_big_rational();
        let bern = |prob: BigReal| {
            let prob = prob.clamp_nonnegative();
            MassFunction::new(0, vec![&BigReal::one() - &prob, prob], BigReal::zero())
        };
        match self.dist {
            SampleDist::Uniform => {
                if self.den > 1 << 20 {
                    return Err(Error::EnumerationTooLarge(format!("uniform({})", self.den)));
                }
                let n = self.den as i64;
                Ok(MassFunction::new(0, vec![BigReal::from_ratio(1, n); n as usize], BigReal::zero()))
            }
            SampleDist::Bernoulli => Ok(bern(BigReal::from_rational(&q))),
            SampleDist::BernoulliExpNeg => Ok(bern(pmf::exp_neg(&q))),
            SampleDist::Geometric => {
                let t = BigReal::from_rational(&q);
                // Enough support that the tail t^hi drops below 2^-80.
                let hi = geometric_window(&q);
                pmf::geo_mass_function(&t, hi)
            }
            SampleDist::Laplace => Ok(pmf::laplace_mass_function(&p)?.translate(self.mu)),
            SampleDist::Gaussian => pmf::gaussian_mass_function(&p, self.mu),
        }
    }
}

fn geometric_window(t: &BigRational) -> u64 {
    let tf = t.numer().to_string().parse::<f64>().unwrap_or(0.0) / t.denom().to_string().parse::<f64>().unwrap_or(1.0);
    if tf <= 0.0 {
        return 1;
    }
    ((80.0 * std::f64::consts::LN_2) / -tf.ln()).ceil().max(1.0) as u64 + 1
}

/// `count` samples from `spec`, seeded if `seed` is given.
pub fn sample_many(spec: &SamplerSpec, count: u64, seed: Option<u64>) -> Result<Vec<i64>> {
    let mut f = spec.sampler()?;
    let mut src = EntropySource::from_seed(seed);
    (0..count).map(|_| f(&mut src)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MechanismKind {
    /// Noised number of records.
    NoisedCount,
    /// Noised sum clipped to `[0, bound]`.
    NoisedSum,
    /// Noised histogram over integer bins `0..bins`.
    Histogram,
    /// Approximate max over the histogram bins.
    ApproxMax,
    /// Sparse vector over the queries `#{x >= c}` for each `c` in `queries`.
    Svt,
}

impl FromStr for MechanismKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Parse(format!("unknown mechanism {s:?}")))
    }
}

/// A shipped mechanism with its parameters, for audits over integer records.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismSpec {
    pub name: MechanismKind,
    #[serde(default = "one")]
    pub gamma_num: u64,
    #[serde(default = "one")]
    pub gamma_den: u64,
    #[serde(default)]
    pub system: Option<DpSystem>,
    #[serde(default)]
    pub bins: Option<usize>,
    #[serde(default)]
    pub bound: Option<u64>,
    #[serde(default)]
    pub threshold: Option<i64>,
    #[serde(default)]
    pub queries: Option<Vec<i64>>,
    #[serde(default = "default_algo")]
    pub algo: String,
}

impl MechanismSpec {
    pub fn new(name: MechanismKind, gamma_num: u64, gamma_den: u64) -> Self {
        MechanismSpec {
            name,
            gamma_num,
            gamma_den,
            system: None,
            bins: None,
            bound: None,
            threshold: None,
            queries: None,
            algo: default_algo(),
        }
    }
}

impl MechanismSpec {
    /// Noise parameter given as text, `num/den` or a decimal.
    pub fn with_gamma(name: MechanismKind, gamma: &str) -> Result<Self> {
        let g = RationalParam::from_big_rational(&crate::parse_rational(gamma)?)?;
        let part = |x: &ibig::UBig| {
            u64::try_from(x).map_err(|_| Error::invalid(format!("noise parameter {gamma} needs more than 64 bits")))
        };
        Ok(MechanismSpec::new(name, part(g.num())?, part(g.den())?))
    }
}

/// `#{x >= c}`; sensitivity 1.
pub fn at_least_query(c: i64) -> Query<i64> {
    Query::new(format!("#{{x >= {c}}}"), 1, move |db: &[i64]| {
        db.iter().filter(|x| **x >= c).count() as i64
    })
}

/// Which exact check to run.
enum ExactCheck<'a> {
    Dp(&'a BigRational),
    Renyi(&'a BigRational, &'a [BigRational]),
}

fn check_mechanism<T>(m: &Mechanism<i64, T>, universe: &[i64], maxlen: usize, check: &ExactCheck) -> Result<AuditReport>
where
    T: Ord + Clone + fmt::Debug + Send + Sync + 'static,
{
    match check {
        ExactCheck::Dp(eps) => audit::dp_ratio_check(m, universe, maxlen, eps),
        ExactCheck::Renyi(rho, alphas) => audit::renyi_check(m, universe, maxlen, rho, alphas),
    }
}

fn run_exact(spec: &MechanismSpec, sys: DpSystem, universe: &[i64], maxlen: usize, check: ExactCheck) -> Result<AuditReport> {
    let algo: LaplaceAlgo = spec.algo.parse()?;
    let (gn, gd) = (spec.gamma_num, spec.gamma_den);
    let bins = || -> Result<Bins<i64>> {
        Bins::range(0, 1, spec.bins.ok_or_else(|| Error::invalid("this mechanism needs bins"))?)
    };
    let mut rep = match spec.name {
        MechanismKind::NoisedCount => check_mechanism(&noise(&Query::count(), 1, gn, gd, sys, algo)?, universe, maxlen, &check),
        MechanismKind::NoisedSum => {
            let b = spec.bound.ok_or_else(|| Error::invalid("noised-sum needs a bound"))?;
            check_mechanism(&noise(&Query::clipped_sum(b), b, gn, gd, sys, algo)?, universe, maxlen, &check)
        }
        MechanismKind::Histogram => {
            check_mechanism(&mechanisms::noised_histogram(&bins()?, gn, gd, sys, algo)?, universe, maxlen, &check)
        }
        MechanismKind::ApproxMax => check_mechanism(
            &mechanisms::approx_max(&bins()?, spec.threshold, gn, gd, sys, algo)?,
            universe,
            maxlen,
            &check,
        ),
        MechanismKind::Svt => {
            if sys != DpSystem::Pure {
                return Err(Error::invalid("sparse vector is a pure DP mechanism"));
            }
            let cuts = spec.queries.clone().unwrap_or_else(|| vec![0, 1]);
            let qs = cuts.into_iter().map(at_least_query).collect();
            let u = Universe {
                records: universe.to_vec(),
                maxlen,
            };
            let eps = RationalParam::new(gn, gd)?;
            let m = mechanisms::sparse_vector(qs, spec.threshold.unwrap_or(1), &eps, &u, algo)?;
            check_mechanism(&m, universe, maxlen, &check)
        }
    }?;
    rep.details.insert("mechanism".into(), serde_json::to_value(spec.name)?);
    Ok(rep)
}

fn default_samples() -> u64 {
    1_000_000
}

fn default_alpha() -> f64 {
    0.001
}

fn default_alphas() -> Vec<String> {
    ["3/2", "2", "4", "8"].iter().map(|s| s.to_string()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutSpecKind {
    Geometric,
    Uniform,
}

impl FromStr for CutSpecKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "geometric" => Ok(CutSpecKind::Geometric),
            "uniform" => Ok(CutSpecKind::Uniform),
            other => Err(Error::Parse(format!("unknown loop {other:?}; use geometric or uniform"))),
        }
    }
}

/// An audit request. JSON form: `{"kind": "pmf", ...}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AuditConfig {
    Pmf {
        sampler: SamplerSpec,
        #[serde(default = "default_samples")]
        samples: u64,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
    TwoSample {
        a: SamplerSpec,
        b: SamplerSpec,
        #[serde(default = "default_samples")]
        samples: u64,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
    Dp {
        mechanism: MechanismSpec,
        epsilon: String,
        #[serde(default)]
        universe: Option<Vec<i64>>,
        #[serde(default)]
        maxlen: Option<usize>,
    },
    Renyi {
        mechanism: MechanismSpec,
        rho: String,
        #[serde(default = "default_alphas")]
        alphas: Vec<String>,
        #[serde(default)]
        universe: Option<Vec<i64>>,
        #[serde(default)]
        maxlen: Option<usize>,
    },
    Cuts {
        spec: CutSpecKind,
        point: i64,
        cut: u32,
        extra: u32,
        /// Geometric success probability (default 1/2) or uniform range (default 3).
        #[serde(default)]
        param: Option<String>,
        /// Closed-form mass to compare with; derived from the spec if absent.
        #[serde(default)]
        expected: Option<String>,
    },
}

impl AuditConfig {
    pub fn from_json(v: serde_json::Value) -> Result<Self> {
        serde_json::from_value(v).map_err(|e| Error::Parse(format!("audit config: {e}")))
    }
}

fn universe_or_standard(u: &Option<Vec<i64>>, maxlen: Option<usize>) -> (Vec<i64>, usize) {
    let (su, sm) = audit::standard_universe();
    (u.clone().unwrap_or(su), maxlen.unwrap_or(sm))
}

pub fn run_audit(cfg: &AuditConfig) -> Result<AuditReport> {
    match cfg {
        AuditConfig::Pmf {
            sampler,
            samples,
            seed,
            alpha,
        } => {
            let oracle = sampler.oracle()?;
            let emp = audit::empirical_pmf(sampler.sampler()?, *samples, *seed)?;
            Ok(audit::gof_test(&emp, &oracle, *alpha)?.detail("dist", sampler.dist.to_string()))
        }
        AuditConfig::TwoSample {
            a,
            b,
            samples,
            seed,
            alpha,
        } => {
            let ea = audit::empirical_pmf(a.sampler()?, *samples, *seed)?;
            let eb = audit::empirical_pmf(b.sampler()?, *samples, seed.wrapping_add(1))?;
            audit::two_sample_test(&ea, &eb, *alpha)
        }
        AuditConfig::Dp {
            mechanism,
            epsilon,
            universe,
            maxlen,
        } => {
            let eps = crate::parse_rational(epsilon)?;
            let (u, n) = universe_or_standard(universe, *maxlen);
            let sys = mechanism.system.unwrap_or(DpSystem::Pure);
            run_exact(mechanism, sys, &u, n, ExactCheck::Dp(&eps))
        }
        AuditConfig::Renyi {
            mechanism,
            rho,
            alphas,
            universe,
            maxlen,
        } => {
            let rho = crate::parse_rational(rho)?;
            let alphas: Vec<BigRational> = alphas.iter().map(|a| crate::parse_rational(a)).collect::<Result<_>>()?;
            let (u, n) = universe_or_standard(universe, *maxlen);
            let sys = mechanism.system.unwrap_or(DpSystem::Zcdp);
            run_exact(mechanism, sys, &u, n, ExactCheck::Renyi(&rho, &alphas))
        }
        AuditConfig::Cuts {
            spec,
            point,
            cut,
            extra,
            param,
            expected,
        } => {
            let expected = expected.as_deref().map(crate::parse_rational).transpose()?;
            match spec {
                CutSpecKind::Geometric => {
                    let t = match param {
                        Some(p) => crate::parse_rational(p)?,
                        None => BigRational::new(1.into(), 2.into()),
                    };
                    if t < BigRational::zero() || t >= BigRational::one() {
                        return Err(Error::invalid("geometric success probability must lie in [0, 1)"));
                    }
                    if *point < 0 {
                        return Err(Error::invalid("geometric counts are nonnegative"));
                    }
                    let want = expected.unwrap_or_else(|| geometric_closed_form(&t, *point as u64));
                    let s = GeometricSpec { t };
                    audit::cut_stability_check(&s, &(false, *point as u64), *cut, *extra, Some(&want))
                }
                CutSpecKind::Uniform => {
                    let n: u64 = match param {
                        Some(p) => p.parse().map_err(|_| Error::Parse(format!("bad uniform range {p:?}")))?,
                        None => 3,
                    };
                    let s = UntilSpec::uniform(n)?;
                    let want = expected.unwrap_or_else(|| BigRational::new(1.into(), n.into()));
                    audit::until_convergence_check(&s, *point, &want, *cut, *extra)
                }
            }
        }
    }
}

/// `(1 - t)·t^{z-1}` for `z >= 1`, zero at `z = 0`.
pub fn geometric_closed_form(t: &BigRational, z: u64) -> BigRational {
    if z == 0 {
        return BigRational::zero();
    }
    let mut p = BigRational::one() - t;
    for _ in 1..z {
        p *= t;
    }
    p
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryKind {
    Count,
    Sum,
    Mean,
    Histogram,
    Max,
    Svt,
}

impl FromStr for QueryKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.trim().to_ascii_lowercase()))
            .map_err(|_| Error::Parse(format!("unknown query {s:?}")))
    }
}

impl fmt::Display for QueryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = serde_json::to_value(self).map_err(|_| fmt::Error)?;
        f.write_str(v.as_str().unwrap_or_default())
    }
}

/// Denominator for zCDP noise parameters, which are rounded down to
/// multiples of its reciprocal.
pub const ZCDP_PARAM_DENOMINATOR: u64 = 1000;

/// A DP query over one integer column.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuerySpec {
    pub query: QueryKind,
    pub system: DpSystem,
    /// The budget to spend, `num/den` or decimal.
    pub budget: String,
    #[serde(default)]
    pub delta: Option<String>,
    /// Clip bound for sum and mean.
    #[serde(default)]
    pub bound: Option<u64>,
    /// Bin count for histogram and max; bins have width `bin_width` from `bin_lo`.
    #[serde(default)]
    pub bins: Option<usize>,
    #[serde(default)]
    pub bin_lo: i64,
    #[serde(default = "one")]
    pub bin_width: u64,
    /// Max's `τ` or the sparse vector threshold.
    #[serde(default)]
    pub threshold: Option<i64>,
    /// Cut values `c` of the sparse vector queries `#{x >= c}`.
    #[serde(default)]
    pub queries: Option<Vec<i64>>,
    #[serde(default = "default_algo")]
    pub algo: String,
}

type Runner = Box<dyn Fn(&[i64], &mut EntropySource) -> Result<serde_json::Value>>;

/// A constructed query whose claim is known before it touches data.
pub struct PreparedQuery {
    pub kind: QueryKind,
    pub system: DpSystem,
    pub claim: Budget,
    runner: Runner,
}

fn wrap<T: Ord + Clone + Send + Sync + Serialize + 'static>(m: Mechanism<i64, T>) -> (Budget, Runner) {
    let claim = m.claim().clone();
    let runner: Runner = Box::new(move |db, src| Ok(serde_json::to_value(m.run(db, src)?)?));
    (claim, runner)
}

impl QuerySpec {
    pub fn new(query: QueryKind, system: DpSystem, budget: &str) -> Self {
        QuerySpec {
            query,
            system,
            budget: budget.to_string(),
            delta: None,
            bound: None,
            bins: None,
            bin_lo: 0,
            bin_width: 1,
            threshold: None,
            queries: None,
            algo: default_algo(),
        }
    }

    /// Builds the mechanism. Its claim never exceeds the requested budget;
    /// zCDP parameters are rounded down, so the claim may be smaller.
    pub fn prepare(&self) -> Result<PreparedQuery> {
        let budget = Budget::new(crate::parse_rational(&self.budget)?)?;
        if budget.is_zero() {
            return Err(Error::invalid("query budget must be positive"));
        }
        let sys = self.system;
        let algo: LaplaceAlgo = self.algo.parse()?;
        let params = |b: &Budget| noise_params_for(sys, b, ZCDP_PARAM_DENOMINATOR);
        let bound = || self.bound.ok_or_else(|| Error::invalid(format!("{} needs a clip bound", self.query)));
        let bins = || -> Result<Bins<i64>> {
            let n = self.bins.ok_or_else(|| Error::invalid(format!("{} needs a bin count", self.query)))?;
            Bins::range(self.bin_lo, self.bin_width, n)
        };
        // Under zCDP the per-bin claims add up to 1/nBins of the base claim.
        let hist_params = |b: &Bins<i64>| match sys {
            DpSystem::Pure => params(&budget),
            DpSystem::Zcdp => params(&budget.scale(b.nbins() as u64)),
        };
        let (claim, runner) = match self.query {
            QueryKind::Count => {
                let (gn, gd) = params(&budget)?;
                wrap(noise(&Query::count(), 1, gn, gd, sys, algo)?)
            }
            QueryKind::Sum => {
                let b = bound()?;
                let (gn, gd) = params(&budget)?;
                wrap(noise(&Query::clipped_sum(b), b, gn, gd, sys, algo)?)
            }
            QueryKind::Mean => {
                let p = mechanisms::even_split(sys, &budget, ZCDP_PARAM_DENOMINATOR)?;
                let m = mechanisms::noised_mean(bound()?, p, p, sys, algo)?;
                let claim = m.claim().clone();
                let runner: Runner = Box::new(move |db, src| {
                    let (sum, count) = m.run(db, src)?;
                    let mean = (count > 0).then(|| sum as f64 / count as f64);
                    Ok(serde_json::json!({ "sum": sum, "count": count, "mean": mean }))
                });
                (claim, runner)
            }
            QueryKind::Histogram => {
                let b = bins()?;
                let (gn, gd) = hist_params(&b)?;
                wrap(mechanisms::noised_histogram(&b, gn, gd, sys, algo)?)
            }
            QueryKind::Max => {
                let b = bins()?;
                let (gn, gd) = hist_params(&b)?;
                wrap(mechanisms::approx_max(&b, self.threshold, gn, gd, sys, algo)?)
            }
            QueryKind::Svt => {
                if sys != DpSystem::Pure {
                    return Err(Error::invalid("sparse vector is a pure DP mechanism"));
                }
                let cuts = self
                    .queries
                    .clone()
                    .filter(|q| !q.is_empty())
                    .ok_or_else(|| Error::invalid("svt needs at least one query cut"))?;
                // Sensitivity is validated on records straddling every cut,
                // independently of the data.
                let mut records: Vec<i64> = cuts.iter().flat_map(|c| [c.saturating_sub(1), *c]).collect();
                records.sort_unstable();
                records.dedup();
                let u = Universe { records, maxlen: 2 };
                let qs = cuts.into_iter().map(at_least_query).collect();
                let eps = RationalParam::from_big_rational(budget.value())?;
                wrap(mechanisms::sparse_vector(qs, self.threshold.unwrap_or(0), &eps, &u, algo)?)
            }
        };
        if claim > budget {
            return Err(Error::invalid(format!("internal: claim {claim} exceeds budget {budget}")));
        }
        Ok(PreparedQuery {
            kind: self.query,
            system: sys,
            claim,
            runner,
        })
    }
}

impl PreparedQuery {
    /// Runs on `db` and returns the report
    /// `{query, result, claimed_budget, system, epsilon_prime_if_delta}`.
    pub fn run(&self, db: &[i64], src: &mut EntropySource, delta: Option<&str>) -> Result<serde_json::Value> {
        let eps_prime = match delta {
            Some(d) => {
                let d = crate::parse_rational(d)?;
                Some(approx_dp_of(self.system, &self.claim, &d)?.upper().to_f64())
            }
            None => None,
        };
        let result = (self.runner)(db, src)?;
        Ok(serde_json::json!({
            "query": self.kind.to_string(),
            "result": result,
            "claimed_budget": self.claim.to_string(),
            "system": self.system.to_string(),
            "epsilon_prime_if_delta": eps_prime,
        }))
    }
}

/// Prepares `spec`, charges `ledger` if given, and runs. Nothing is charged
/// when preparation or the budget check fails.
pub fn run_query(
    spec: &QuerySpec,
    db: &[i64],
    seed: Option<u64>,
    ledger: Option<&mut Ledger>,
) -> Result<serde_json::Value> {
    let q = spec.prepare()?;
    if let Some(l) = &ledger {
        l.check(q.system, &q.claim)?;
    }
    let mut src = EntropySource::from_seed(seed);
    let mut out = q.run(db, &mut src, spec.delta.as_deref())?;
    if let Some(l) = ledger {
        l.charge(&q.kind.to_string(), q.system, &q.claim, seed)?;
        out["remaining_budget"] = serde_json::Value::String(l.remaining.to_string());
    }
    Ok(out)
}

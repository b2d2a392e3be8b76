//! Concrete private queries: noised counts, sums and means, the recursive
//! histogram, approximate max and the sparse vector technique.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use ibig::UBig;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::entropy::EntropySource;
use crate::error::{Error, Result};
use crate::exactdist::{pmf, BigReal, Dist};
use crate::privacy::{
    compose, constant, noise, noise_params_for, postprocess, sensitivity_check, Budget, DpSystem,
    Mechanism, Query,
};
use crate::samplers::{self, LaplaceAlgo, RationalParam};

/// Assigns each record to one of `nbins` bins.
pub struct Bins<R> {
    nbins: usize,
    bin: Arc<dyn Fn(&R) -> usize + Send + Sync>,
}

impl<R> Clone for Bins<R> {
    fn clone(&self) -> Self {
        Bins {
            nbins: self.nbins,
            bin: Arc::clone(&self.bin),
        }
    }
}

impl<R> fmt::Debug for Bins<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bins({})", self.nbins)
    }
}

impl<R> Bins<R> {
    /// `bin` must return indices below `nbins`; larger indices are clamped
    /// to the last bin so the map stays total.
    pub fn new(nbins: usize, bin: impl Fn(&R) -> usize + Send + Sync + 'static) -> Result<Self> {
        if nbins == 0 {
            return Err(Error::invalid("a histogram needs at least one bin"));
        }
        Ok(Bins {
            nbins,
            bin: Arc::new(bin),
        })
    }

    pub fn nbins(&self) -> usize {
        self.nbins
    }

    pub fn index(&self, r: &R) -> usize {
        (self.bin)(r).min(self.nbins - 1)
    }
}

impl Bins<i64> {
    /// Integer bins of `width` starting at `lo`; values outside the range
    /// land in the first or last bin.
    pub fn range(lo: i64, width: u64, nbins: usize) -> Result<Self> {
        if width == 0 {
            return Err(Error::invalid("bin width must be positive"));
        }
        Bins::new(nbins, move |x: &i64| {
            if *x < lo {
                0
            } else {
                ((*x as i128 - lo as i128) / width as i128).min(usize::MAX as i128) as usize
            }
        })
    }
}

/// Noised per-bin counts; entries may be negative.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HistogramResult {
    pub count: Vec<i64>,
}

impl HistogramResult {
    pub fn empty(nbins: usize) -> Self {
        HistogramResult {
            count: vec![0; nbins],
        }
    }

    pub fn set_count(&self, b: usize, v: i64) -> Self {
        let mut h = self.clone();
        h.count[b] = v;
        h
    }
}

/// Number of records falling in bin `b`; sensitivity 1.
pub fn exact_bin_count<R: 'static>(bins: &Bins<R>, b: usize) -> Result<Query<R>> {
    if b >= bins.nbins {
        return Err(Error::invalid(format!("bin {b} out of range for {} bins", bins.nbins)));
    }
    let bins = bins.clone();
    Ok(Query::new(format!("bin count {b}"), 1, move |db: &[R]| {
        db.iter().filter(|r| bins.index(r) == b).count() as i64
    }))
}

/// Noise on bin `b`'s count with parameters `(γ1, γ2·nBins)`.
pub fn noised_bin_count<R: 'static>(
    bins: &Bins<R>,
    b: usize,
    g1: u64,
    g2: u64,
    sys: DpSystem,
    algo: LaplaceAlgo,
) -> Result<Mechanism<R, i64>> {
    let gd = g2
        .checked_mul(bins.nbins as u64)
        .ok_or_else(|| Error::Overflow(format!("{g2} * {}", bins.nbins)))?;
    noise(&exact_bin_count(bins, b)?, 1, g1, gd, sys, algo)
}

/// The histogram as a chain of per-bin compositions, highest bin outermost.
pub fn noised_histogram<R: 'static>(
    bins: &Bins<R>,
    g1: u64,
    g2: u64,
    sys: DpSystem,
    algo: LaplaceAlgo,
) -> Result<Mechanism<R, HistogramResult>> {
    let nbins = bins.nbins;
    let mut acc = constant(sys, HistogramResult::empty(nbins));
    for n in 0..nbins {
        let bin = noised_bin_count(bins, n, g1, g2, sys, algo)?;
        acc = postprocess(&compose(&bin, &acc)?, move |(c, h): &(i64, HistogramResult)| {
            h.set_count(n, *c)
        });
    }
    Ok(acc)
}

/// Standard deviation scale of the per-bin noise, `nBins·γ2/γ1`.
pub fn histogram_noise_scale(nbins: usize, g1: u64, g2: u64) -> Result<RationalParam> {
    RationalParam::new(UBig::from(g2) * UBig::from(nbins), g1)
}

/// Default threshold for [`approx_max`]: `ceil(3·scale)`.
pub fn default_max_threshold(nbins: usize, g1: u64, g2: u64) -> Result<i64> {
    let s = histogram_noise_scale(nbins, g1, g2)?.to_big_rational();
    let t = (s * num_rational::BigRational::from_integer(3.into())).ceil().to_integer();
    t.to_i64().ok_or_else(|| Error::Overflow(format!("threshold {t}")))
}

/// Largest bin index whose noised count exceeds `tau`, or 0 if none does.
pub fn approx_max<R: 'static>(
    bins: &Bins<R>,
    tau: Option<i64>,
    g1: u64,
    g2: u64,
    sys: DpSystem,
    algo: LaplaceAlgo,
) -> Result<Mechanism<R, usize>> {
    let tau = match tau {
        Some(t) => t,
        None => default_max_threshold(bins.nbins, g1, g2)?,
    };
    let hist = noised_histogram(bins, g1, g2, sys, algo)?;
    Ok(postprocess(&hist, move |h: &HistogramResult| select_max(h, tau)))
}

fn select_max(h: &HistogramResult, tau: i64) -> usize {
    h.count.iter().rposition(|c| *c > tau).unwrap_or(0)
}

/// `(noised clipped sum, noised count)`; the consumer divides.
///
/// The sum uses `Δ = bound` with parameters `sum`, the count `Δ = 1` with
/// parameters `count`.
pub fn noised_mean(
    bound: u64,
    sum: (u64, u64),
    count: (u64, u64),
    sys: DpSystem,
    algo: LaplaceAlgo,
) -> Result<Mechanism<i64, (i64, i64)>> {
    if bound == 0 {
        return Err(Error::invalid("clip bound must be at least 1"));
    }
    let s = noise(&Query::clipped_sum(bound), bound, sum.0, sum.1, sys, algo)?;
    let c = noise(&Query::count(), 1, count.0, count.1, sys, algo)?;
    compose(&s, &c)
}

/// Noise parameters for half of `total`, used for each side of an even
/// split. zCDP parameters are rounded down to multiples of `1/denominator`.
pub fn even_split(sys: DpSystem, total: &Budget, denominator: u64) -> Result<(u64, u64)> {
    let half = Budget::new(total.value() / num_rational::BigRational::from_integer(2.into()))?;
    noise_params_for(sys, &half, denominator)
}

/// Records universe and length bound used to validate queries.
#[derive(Clone, Debug)]
pub struct Universe<R> {
    pub records: Vec<R>,
    pub maxlen: usize,
}

/// AboveThreshold: first query index whose noised value reaches the noised
/// threshold, or `None`. Threshold noise has scale `2/ε`, query noise `4/ε`.
///
/// Every query is checked to have sensitivity at most 1 over `universe`.
pub fn sparse_vector<R: Clone + Ord + Send + Sync + 'static>(
    queries: Vec<Query<R>>,
    threshold: i64,
    eps: &RationalParam,
    universe: &Universe<R>,
    algo: LaplaceAlgo,
) -> Result<Mechanism<R, Option<usize>>> {
    if eps.is_zero() {
        return Err(Error::invalid("sparse vector needs ε > 0"));
    }
    for q in &queries {
        let rep = sensitivity_check(q, 1, &universe.records, universe.maxlen)?;
        if q.sensitivity() > 1 || !rep.holds {
            return Err(Error::invalid(format!(
                "query {:?} changes by {} between neighbours; sparse vector needs sensitivity 1",
                q.name(),
                rep.max_change
            )));
        }
    }
    let t_scale = RationalParam::new(eps.den() * UBig::from(2u8), eps.num().clone())?;
    let q_scale = RationalParam::new(eps.den() * UBig::from(4u8), eps.num().clone())?;
    let claim = Budget::new(eps.to_big_rational())?;
    let queries = Arc::new(queries);

    let (rq, rt, rs) = (Arc::clone(&queries), t_scale.clone(), q_scale.clone());
    let run = move |db: &[R], src: &mut EntropySource| -> Result<Option<usize>> {
        let t = threshold
            .checked_add(samplers::laplace(src, &rt, algo)?)
            .ok_or_else(|| Error::Overflow("noised threshold".into()))?;
        for (i, q) in rq.iter().enumerate() {
            let v = q
                .eval(db)
                .checked_add(samplers::laplace(src, &rs, algo)?)
                .ok_or_else(|| Error::Overflow("noised query".into()))?;
            if v >= t {
                return Ok(Some(i));
            }
        }
        Ok(None)
    };
    let exact = move |db: &[R]| svt_exact(&queries, threshold, &t_scale, &q_scale, db);
    Ok(Mechanism::new(DpSystem::Pure, claim, run).with_exact(exact))
}

/// Sums over the threshold noise window; the missing threshold mass `τ`
/// is carried as interval width, so each probability lies in `[S, S + τ]`.
fn svt_exact<R>(
    queries: &[Query<R>],
    threshold: i64,
    t_scale: &RationalParam,
    q_scale: &RationalParam,
    db: &[R],
) -> Result<Dist<Option<usize>>> {
    let values: Vec<i64> = queries.iter().map(|q| q.eval(db)).collect();
    let tmf = pmf::laplace_mass_function(t_scale)?;
    let mut sums: Vec<BigReal> = vec![BigReal::zero(); values.len() + 1];
    for (z, pz) in tmf.iter() {
        let c = threshold + z;
        // Probability that every earlier query stayed below `c`.
        let mut below = pz.clone();
        for (i, v) in values.iter().enumerate() {
            let hit = pmf::laplace_cdf(q_scale, v - c)?;
            let miss = pmf::laplace_cdf(q_scale, c - v - 1)?;
            sums[i] = &sums[i] + &(&below * &hit);
            below = &below * &miss;
        }
        let last = values.len();
        sums[last] = &sums[last] + &below;
    }
    let tau = tmf.tail_bound().clone();
    let mut masses = BTreeMap::new();
    for (i, s) in sums.into_iter().enumerate() {
        let key = (i < values.len()).then_some(i);
        let widened = s.hull(&(&s + &tau));
        masses.insert(key, widened);
    }
    Ok(Dist::from_parts(masses, BigReal::zero()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_bins() -> Bins<i64> {
        Bins::range(0, 1, 2).unwrap()
    }

    #[test]
    fn bins_clamp() {
        let b = Bins::range(10, 5, 3).unwrap();
        assert_eq!(b.index(&0), 0);
        assert_eq!(b.index(&14), 0);
        assert_eq!(b.index(&15), 1);
        assert_eq!(b.index(&1000), 2);
        assert!(Bins::<i64>::range(0, 1, 0).is_err());
    }

    #[test]
    fn histogram_claims() {
        let bins = Bins::range(0, 1, 10).unwrap();
        let h = noised_histogram(&bins, 1, 1, DpSystem::Pure, LaplaceAlgo::auto()).unwrap();
        assert_eq!(h.claim(), &Budget::ratio(1, 1).unwrap());
        assert_eq!(h.constituents().len(), 10);
        for c in h.constituents() {
            assert_eq!(c, &Budget::ratio(1, 10).unwrap());
        }
        let total: Budget = h.constituents().iter().sum();
        assert_eq!(&total, h.claim());
    }

    #[test]
    fn histogram_shape_and_determinism() {
        let bins = Bins::range(0, 1, 3).unwrap();
        let h = noised_histogram(&bins, 1, 1, DpSystem::Pure, LaplaceAlgo::auto()).unwrap();
        let db = [0, 1, 1, 2, 2, 2];
        let a = h.run(&db, &mut EntropySource::seeded(3)).unwrap();
        let b = h.run(&db, &mut EntropySource::seeded(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.count.len(), 3);
    }

    #[test]
    fn one_bin_histogram_matches_bin_count() {
        let bins = Bins::range(0, 1, 1).unwrap();
        let h = noised_histogram(&bins, 1, 1, DpSystem::Pure, LaplaceAlgo::auto()).unwrap();
        let c = noised_bin_count(&bins, 0, 1, 1, DpSystem::Pure, LaplaceAlgo::auto()).unwrap();
        let dh = h.exact(&[0, 0]).unwrap().unwrap();
        let dc = c.exact(&[0, 0]).unwrap().unwrap();
        assert_eq!(dh.len(), dc.len());
        for (z, p) in dc.masses() {
            assert!(dh.get(&HistogramResult { count: vec![*z] }).unwrap().overlaps(p));
        }
    }

    #[test]
    fn histogram_exact_is_product_of_bins() {
        let bins = two_bins();
        let h = noised_histogram(&bins, 2, 1, DpSystem::Pure, LaplaceAlgo::auto()).unwrap();
        let db = [0, 1, 1];
        let dh = h.exact(&db).unwrap().unwrap();
        let d0 = noised_bin_count(&bins, 0, 2, 1, DpSystem::Pure, LaplaceAlgo::auto())
            .unwrap()
            .exact(&db)
            .unwrap()
            .unwrap();
        let d1 = noised_bin_count(&bins, 1, 2, 1, DpSystem::Pure, LaplaceAlgo::auto())
            .unwrap()
            .exact(&db)
            .unwrap()
            .unwrap();
        for (a, b) in [(1, 2), (0, 0), (-3, 5)] {
            let p = &d0.get(&a).unwrap().clone() * d1.get(&b).unwrap();
            assert!(dh.get(&HistogramResult { count: vec![a, b] }).unwrap().overlaps(&p));
        }
    }

    #[test]
    fn approx_max_selects_top() {
        let bins = Bins::range(0, 10, 4).unwrap();
        let m = approx_max(&bins, None, 10, 1, DpSystem::Pure, LaplaceAlgo::auto()).unwrap();
        let h = noised_histogram(&bins, 10, 1, DpSystem::Pure, LaplaceAlgo::auto()).unwrap();
        assert_eq!(m.claim(), h.claim());
        let db = vec![35i64; 200];
        let mut src = EntropySource::seeded(11);
        let hits = (0..1000).filter(|_| m.run(&db, &mut src).unwrap() == 3).count();
        assert!(hits > 990, "{hits}");
        assert_eq!(select_max(&HistogramResult { count: vec![-5, -5] }, 0), 0);
        assert_eq!(default_max_threshold(4, 10, 1).unwrap(), 2);
    }

    #[test]
    fn mean_claims_and_split() {
        let total = Budget::ratio(1, 1).unwrap();
        let p = even_split(DpSystem::Pure, &total, 1000).unwrap();
        assert_eq!(p, (1, 2));
        let m = noised_mean(4, p, p, DpSystem::Pure, LaplaceAlgo::auto()).unwrap();
        assert_eq!(m.claim(), &total);
        let z = even_split(DpSystem::Zcdp, &total, 1000).unwrap();
        assert_eq!(z, (1000, 1000));
        assert!(noised_mean(0, p, p, DpSystem::Pure, LaplaceAlgo::auto()).is_err());
    }

    #[test]
    fn svt_validation_and_empty() {
        let u = Universe {
            records: vec![0i64, 1],
            maxlen: 2,
        };
        let eps = RationalParam::integer(1u8);
        let bad = Query::new("twice", 1, |db: &[i64]| 2 * db.len() as i64);
        assert!(sparse_vector(vec![bad], 0, &eps, &u, LaplaceAlgo::auto()).is_err());
        let m = sparse_vector(Vec::new(), 0, &eps, &u, LaplaceAlgo::auto()).unwrap();
        assert_eq!(m.claim(), &Budget::ratio(1, 1).unwrap());
        assert_eq!(m.run(&[1], &mut EntropySource::seeded(0)).unwrap(), None);
        let d = m.exact(&[1]).unwrap().unwrap();
        assert!(d.get(&None).unwrap().overlaps(&BigReal::one()));
    }

    #[test]
    fn svt_exact_sums_to_one() {
        let u = Universe {
            records: vec![0i64, 1],
            maxlen: 2,
        };
        let qs = vec![Query::count(), Query::new("ones", 1, |db: &[i64]| db.iter().filter(|x| **x == 1).count() as i64)];
        let m = sparse_vector(qs, 1, &RationalParam::integer(1u8), &u, LaplaceAlgo::auto()).unwrap();
        let d = m.exact(&[1, 0]).unwrap().unwrap();
        let total = d.total();
        assert!(total.lo_f64() <= 1.0 && total.hi_f64() >= 1.0 - 1e-12, "{total}");
        assert!((total.to_f64() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn svt_wide_gap_returns_first() {
        let u = Universe {
            records: vec![0i64, 1],
            maxlen: 2,
        };
        let q = Query::new("big", 1, |db: &[i64]| 1000 + db.len() as i64);
        let m = sparse_vector(vec![q], 0, &RationalParam::integer(100u8), &u, LaplaceAlgo::auto()).unwrap();
        let mut src = EntropySource::seeded(5);
        let hits = (0..1000).filter(|_| m.run(&[], &mut src).unwrap() == Some(0)).count();
        assert!(hits > 990);
    }
}

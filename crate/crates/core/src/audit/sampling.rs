use std::collections::BTreeMap;

use num_rational::BigRational;
use serde_json::json;

use super::stats::chi2_sf;
use super::AuditReport;
use crate::config::{precision_bits, with_precision, MAX_PRECISION_BITS};
use crate::entropy::EntropySource;
use crate::error::{Error, Result};
use crate::exactdist::{tv_distance, BigReal, MassFunction};

/// Frequency table of `draws` samples taken from a seeded source.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Empirical {
    pub counts: BTreeMap<i64, u64>,
    pub draws: u64,
    pub seed: Option<u64>,
}

impl Empirical {
    pub fn from_samples(samples: impl IntoIterator<Item = i64>) -> Self {
        let mut counts = BTreeMap::new();
        let mut draws = 0;
        for z in samples {
            *counts.entry(z).or_insert(0) += 1;
            draws += 1;
        }
        Empirical {
            counts,
            draws,
            seed: None,
        }
    }

    /// Exact frequencies `count/draws`.
    pub fn to_mass_function(&self) -> MassFunction {
        let n = self.draws as i64;
        let map: BTreeMap<i64, BigReal> = self
            .counts
            .iter()
            .map(|(z, c)| (*z, BigReal::from_ratio(*c as i64, n)))
            .collect();
        MassFunction::from_map(&map, BigReal::zero())
    }
}

pub fn empirical_pmf(
    mut sampler: impl FnMut(&mut EntropySource) -> Result<i64>,
    n: u64,
    seed: u64,
) -> Result<Empirical> {
    if n == 0 {
        return Err(Error::invalid("need at least one draw"));
    }
    let mut src = EntropySource::seeded(seed);
    let mut counts = BTreeMap::new();
    for _ in 0..n {
        *counts.entry(sampler(&mut src)?).or_insert(0u64) += 1;
    }
    Ok(Empirical {
        counts,
        draws: n,
        seed: Some(seed),
    })
}

const MIN_EXPECTED: f64 = 5.0;

/// Groups consecutive cells until each group's smallest expected count
/// reaches 5; a short final group joins the one before it.
fn merge_cells(cells: &[(Vec<f64>, Vec<f64>)]) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut out: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    let mut cur: Option<(Vec<f64>, Vec<f64>)> = None;
    let add = |a: &mut (Vec<f64>, Vec<f64>), b: &(Vec<f64>, Vec<f64>)| {
        for i in 0..a.0.len() {
            a.0[i] += b.0[i];
            a.1[i] += b.1[i];
        }
    };
    for c in cells {
        match cur.as_mut() {
            Some(a) => add(a, c),
            None => cur = Some(c.clone()),
        }
        let done = cur
            .as_ref()
            .is_some_and(|a| a.1.iter().all(|e| *e >= MIN_EXPECTED));
        if done {
            out.push(cur.take().unwrap());
        }
    }
    if let Some(rest) = cur {
        match out.last_mut() {
            Some(last) => add(last, &rest),
            None => out.push(rest),
        }
    }
    out
}

fn chi2_stat(cells: &[(Vec<f64>, Vec<f64>)]) -> f64 {
    cells
        .iter()
        .flat_map(|(o, e)| o.iter().zip(e).map(|(o, e)| (o - e) * (o - e) / e))
        .sum()
}

fn chi2_report(
    test: &str,
    cells: &[(Vec<f64>, Vec<f64>)],
    alpha: f64,
) -> Result<AuditReport> {
    let merged = merge_cells(cells);
    if merged.len() < 2 {
        return Err(Error::DegenerateCells(merged.len()));
    }
    let stat = chi2_stat(&merged);
    let df = merged.len() as u64 - 1;
    let exact = BigRational::from_float(stat).ok_or_else(|| Error::invalid("non-finite statistic"))?;
    let a = BigReal::from_f64(alpha);
    // Double the precision while the p-value enclosure straddles α.
    let mut bits = precision_bits();
    let p = loop {
        let p = with_precision(bits, || chi2_sf(&exact, df));
        if a.definitely_le(&p) || p.definitely_lt(&a) || bits >= MAX_PRECISION_BITS {
            break p;
        }
        bits = (bits * 2).min(MAX_PRECISION_BITS);
    };
    // Pass only when the whole p-value enclosure clears α.
    let pass = a.definitely_le(&p);
    Ok(
        AuditReport::new(test, BigReal::from_f64(stat), a, pass)
            .detail("p_value", p.to_f64())
            .detail("df", df)
            .detail("cells", merged.len()),
    )
}

/// Chi-squared goodness of fit of `emp` against `oracle`; passes iff the
/// p-value is at least `alpha`. Draws outside the oracle window count in
/// the nearest edge cell.
pub fn gof_test(emp: &Empirical, oracle: &MassFunction, alpha: f64) -> Result<AuditReport> {
    if oracle.is_empty() {
        return Err(Error::DegenerateCells(0));
    }
    let n = emp.draws as f64;
    let (lo, hi) = (oracle.lo(), oracle.hi());
    let mut cells: Vec<(Vec<f64>, Vec<f64>)> = oracle
        .iter()
        .map(|(_, p)| (vec![0.0], vec![n * p.to_f64()]))
        .collect();
    for (z, c) in &emp.counts {
        let i = ((*z).clamp(lo, hi) - lo) as usize;
        cells[i].0[0] += *c as f64;
    }
    let mut rep = chi2_report("gof", &cells, alpha)?;
    let tv = tv_distance(&emp.to_mass_function(), oracle);
    rep.tail_error = oracle.tail_bound().clone();
    rep.draws = Some(emp.draws);
    rep.seed = emp.seed;
    Ok(rep.detail("tv_distance", tv.to_f64()))
}

/// Chi-squared homogeneity test between two samples.
pub fn two_sample_test(a: &Empirical, b: &Empirical, alpha: f64) -> Result<AuditReport> {
    let (na, nb) = (a.draws as f64, b.draws as f64);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::invalid("both samples need draws"));
    }
    let mut support: BTreeMap<i64, (f64, f64)> = BTreeMap::new();
    for (z, c) in &a.counts {
        support.entry(*z).or_default().0 += *c as f64;
    }
    for (z, c) in &b.counts {
        support.entry(*z).or_default().1 += *c as f64;
    }
    let cells: Vec<(Vec<f64>, Vec<f64>)> = support
        .values()
        .map(|(x, y)| {
            let pooled = x + y;
            (
                vec![*x, *y],
                vec![pooled * na / (na + nb), pooled * nb / (na + nb)],
            )
        })
        .collect();
    let mut rep = chi2_report("two-sample", &cells, alpha)?;
    rep.draws = Some(a.draws + b.draws);
    rep.seed = a.seed;
    Ok(rep.detail("draws_each", json!([a.draws, b.draws])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactdist::pmf;
    use crate::samplers::{self, LaplaceAlgo, RationalParam};

    #[test]
    fn single_draw_is_point_mass() {
        let e = empirical_pmf(|src| src.uniform_u64(10).map(|x| x as i64), 1, 3).unwrap();
        let mf = e.to_mass_function();
        assert_eq!(mf.total(), BigReal::one());
        assert_eq!(mf.masses().iter().filter(|p| !p.is_zero()).count(), 1);
    }

    #[test]
    fn exact_frequencies_pass() {
        let oracle = MassFunction::new(0, vec![BigReal::from_ratio(1, 2), BigReal::from_ratio(1, 2)], BigReal::zero());
        let emp = Empirical::from_samples((0..100).map(|i| i % 2));
        let r = gof_test(&emp, &oracle, 0.001).unwrap();
        assert_eq!(r.statistic, BigReal::zero());
        assert!(r.passed());
        assert_eq!(r.details["p_value"], 1.0);
    }

    #[test]
    fn degenerate_cells() {
        let oracle = MassFunction::new(0, vec![BigReal::from_ratio(1, 2), BigReal::from_ratio(1, 2)], BigReal::zero());
        let emp = Empirical::from_samples([0, 1]);
        assert!(matches!(gof_test(&emp, &oracle, 0.01), Err(Error::DegenerateCells(1))));
    }

    #[test]
    fn laplace_gof_and_broken_sign() {
        let t = RationalParam::integer(1u8);
        let oracle = pmf::laplace_mass_function(&t).unwrap();
        let n = 200_000;
        let emp = empirical_pmf(|s| samplers::laplace_algo1(s, &t), n, 1).unwrap();
        let r = gof_test(&emp, &oracle, 0.001).unwrap();
        assert!(r.passed(), "{r}");
        let broken = empirical_pmf(|s| samplers::laplace_algo1(s, &t).map(i64::abs), n, 1).unwrap();
        assert!(!gof_test(&broken, &oracle, 0.001).unwrap().passed());
    }

    #[test]
    fn two_sample_power() {
        let t1 = RationalParam::integer(1u8);
        let t2 = RationalParam::integer(2u8);
        let n = 50_000;
        let a = empirical_pmf(|s| samplers::laplace(s, &t1, LaplaceAlgo::Algo1), n, 1).unwrap();
        let b = empirical_pmf(|s| samplers::laplace(s, &t1, LaplaceAlgo::Algo2), n, 2).unwrap();
        let c = empirical_pmf(|s| samplers::laplace(s, &t2, LaplaceAlgo::Algo1), n, 3).unwrap();
        assert!(two_sample_test(&a, &b, 0.001).unwrap().passed());
        assert!(!two_sample_test(&a, &c, 0.001).unwrap().passed());
    }
}

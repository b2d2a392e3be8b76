use std::collections::btree_map::{BTreeMap, Entry};
use std::fmt::Debug;

use num_rational::BigRational;
use serde_json::{json, Value};

use super::AuditReport;
use crate::error::{Error, Result};
use crate::exactdist::{renyi_divergence_ln, BigReal, Dist, LnDist, RenyiParts};
use crate::privacy::{enumerate_databases, neighbours, Mechanism};

/// Largest slack or unexamined mass an exact check tolerates.
pub const DEFAULT_SLACK_TOLERANCE: f64 = 1e-9;

/// Records `{0, 1, 2}`, databases up to length 3.
pub fn standard_universe() -> (Vec<i64>, usize) {
    (vec![0, 1, 2], 3)
}

/// Exact output distributions of `m` on every database, with databases
/// whose distributions are equal sharing one class. Checks work per class
/// pair, which is much cheaper when outputs depend on few features.
struct Classes<R, T: Ord> {
    class_of: BTreeMap<Vec<R>, usize>,
    dists: Vec<Dist<T>>,
}

fn all_dists<R, T>(m: &Mechanism<R, T>, universe: &[R], maxlen: usize) -> Result<Classes<R, T>>
where
    R: Clone + Ord + 'static,
    T: Ord + Clone + Send + Sync + 'static,
{
    let mut class_of = BTreeMap::new();
    let mut dists: Vec<Dist<T>> = Vec::new();
    for db in enumerate_databases(universe, maxlen)? {
        let d = m
            .exact(&db)
            .ok_or_else(|| Error::invalid("mechanism has no exact builder"))??;
        let c = match dists.iter().position(|x| *x == d) {
            Some(c) => c,
            None => {
                dists.push(d);
                dists.len() - 1
            }
        };
        class_of.insert(db, c);
    }
    Ok(Classes { class_of, dists })
}

fn pair_witness<R: Debug>(a: &[R], b: &[R]) -> Value {
    json!({ "db": format!("{a:?}"), "neighbour": format!("{b:?}") })
}

fn with_pair<R: Debug>(mut w: Value, a: &[R], b: &[R]) -> Value {
    w["db"] = json!(format!("{a:?}"));
    w["neighbour"] = json!(format!("{b:?}"));
    w
}

/// Ratio findings for one ordered pair of output distributions.
#[derive(Default)]
struct RatioScan {
    best: Option<(BigReal, Value)>,
    sup_hi: Option<BigReal>,
    violation: Option<(BigReal, Value)>,
    infinite: Option<Value>,
    unexamined: Option<BigReal>,
}

/// A point is only compared when its mass dwarfs the truncated tails by this
/// factor; lighter points count as unexamined mass instead.
const RESOLVE_FACTOR: f64 = 1e12;

fn scan_ratios<T: Ord + Clone + Debug>(pa: &Dist<T>, pb: &Dist<T>, bound: &BigReal) -> RatioScan {
    let mut out = RatioScan::default();
    let (ta, tb) = (pa.tail().upper(), pb.tail().upper());
    let tails = &ta + &tb;
    let resolve = &tails * &BigReal::from_f64(RESOLVE_FACTOR);
    let mut sup_hi = BigReal::zero();
    let mut unexamined = ta.clone();
    for (z, p) in pa.masses() {
        if p.is_zero() {
            continue;
        }
        let out_w = || json!({ "output": format!("{z:?}") });
        let q = match pb.get(z) {
            Some(q) if q.is_positive() => q,
            _ => {
                if tb.is_zero() && p.is_positive() && pb.get(z).is_none_or(BigReal::is_zero) {
                    out.infinite.get_or_insert_with(out_w);
                }
                unexamined = &unexamined + &p.upper();
                continue;
            }
        };
        if tails.is_positive() && !resolve.definitely_lt(p) {
            unexamined = &unexamined + &p.upper();
            continue;
        }
        // The true masses lie in [p, p + ta] and [q, q + tb].
        let r = p / q;
        let r_lo = p / &(q + &tb);
        let r_hi = &(p + &ta) / q;
        let witness = || {
            let mut w = out_w();
            w["ln_ratio"] = json!(r.ln().map(|l| l.to_f64()));
            w
        };
        if out.best.as_ref().is_none_or(|(x, _)| x.mid().definitely_lt(&r.mid())) {
            out.best = Some((r.clone(), witness()));
        }
        sup_hi = sup_hi.max(&r_hi.upper());
        if bound.definitely_lt(&r_lo) && out.violation.as_ref().is_none_or(|(v, _)| v.definitely_lt(&r_lo)) {
            out.violation = Some((r_lo.clone(), witness()));
        }
    }
    out.sup_hi = Some(sup_hi);
    out.unexamined = Some(unexamined);
    out
}

/// Pointwise `ln(P(z)/P'(z)) <= ε` over every neighbouring pair and output.
///
/// Outputs are countable, so the pointwise bound is equivalent to the bound
/// over all output sets. Each ratio is widened by the truncated tail mass
/// of both sides. Fails as soon as one ratio is certainly above `e^ε`.
/// Otherwise it passes when the slack and the unexamined mass (tails,
/// points outside the common support, points too light to resolve against
/// the tails) both stay within [`DEFAULT_SLACK_TOLERANCE`].
pub fn dp_ratio_check<R, T>(m: &Mechanism<R, T>, universe: &[R], maxlen: usize, eps: &BigRational) -> Result<AuditReport>
where
    R: Clone + Ord + Debug + 'static,
    T: Ord + Clone + Debug + Send + Sync + 'static,
{
    let bound = BigReal::from_rational(eps).exp();
    let classes = all_dists(m, universe, maxlen)?;
    let mut scans: BTreeMap<(usize, usize), RatioScan> = BTreeMap::new();
    let mut best: Option<(BigReal, Value)> = None;
    let mut sup_hi = BigReal::zero();
    let mut violation: Option<(BigReal, Value)> = None;
    let mut infinite: Option<Value> = None;
    let mut tail_error = BigReal::zero();
    let mut pairs = 0u64;
    for (a, &ca) in &classes.class_of {
        for b in neighbours(a, universe, maxlen) {
            let cb = classes.class_of[&b];
            pairs += 1;
            let s = scans
                .entry((ca, cb))
                .or_insert_with(|| scan_ratios(&classes.dists[ca], &classes.dists[cb], &bound));
            if let Some(w) = &s.infinite {
                infinite.get_or_insert_with(|| with_pair(w.clone(), a, &b));
            }
            if let Some((r, w)) = &s.violation {
                if violation.as_ref().is_none_or(|(v, _)| v.definitely_lt(r)) {
                    violation = Some((r.clone(), with_pair(w.clone(), a, &b)));
                }
            }
            if let Some((r, w)) = &s.best {
                if best.as_ref().is_none_or(|(x, _)| x.mid().definitely_lt(&r.mid())) {
                    best = Some((r.clone(), with_pair(w.clone(), a, &b)));
                }
            }
            if let Some(h) = &s.sup_hi {
                sup_hi = sup_hi.max(h);
            }
            if let Some(u) = &s.unexamined {
                tail_error = tail_error.max(u);
            }
        }
    }
    let threshold = BigReal::from_rational(eps);
    let statistic = match &best {
        Some((r, _)) => r.mid().ln().unwrap_or_else(BigReal::zero),
        None => BigReal::zero(),
    };
    let slack = if sup_hi.is_positive() {
        (&sup_hi.ln().expect("positive") - &statistic).clamp_nonnegative().upper()
    } else {
        BigReal::zero()
    };
    let tol = BigReal::from_f64(DEFAULT_SLACK_TOLERANCE);
    let pass = infinite.is_none()
        && violation.is_none()
        && slack.definitely_le(&tol)
        && tail_error.definitely_le(&tol);
    let mut rep = AuditReport::new("dp-ratio", statistic, threshold, pass);
    rep.slack = slack;
    rep.tail_error = tail_error;
    rep.witness = if let Some(w) = infinite {
        rep = rep.detail("unbounded_ratio", true);
        Some(w)
    } else if let Some((_, w)) = violation {
        Some(w)
    } else {
        best.map(|(_, w)| w)
    };
    Ok(rep
        .detail("pairs", pairs)
        .detail("databases", classes.class_of.len())
        .detail("distinct_outputs", classes.dists.len())
        .detail("note", "pointwise likelihood ratios; equivalent to the event bound for countable outputs"))
}

/// `D_α(M(l) ‖ M(l')) <= α·ρ` for every neighbouring pair and each α.
///
/// The statistic is the largest implied `D_α/α`, compared with `ρ`.
pub fn renyi_check<R, T>(
    m: &Mechanism<R, T>,
    universe: &[R],
    maxlen: usize,
    rho: &BigRational,
    alphas: &[BigRational],
) -> Result<AuditReport>
where
    R: Clone + Ord + Debug + 'static,
    T: Ord + Clone + Debug + Send + Sync + 'static,
{
    if alphas.is_empty() {
        return Err(Error::invalid("renyi check needs at least one order"));
    }
    let classes = all_dists(m, universe, maxlen)?;
    let lns: Vec<LnDist<'_, T>> = classes.dists.iter().map(LnDist::new).collect();
    let mut parts: BTreeMap<(usize, usize, usize), RenyiParts> = BTreeMap::new();
    let rho_r = BigReal::from_rational(rho);
    let mut best: Option<(BigReal, Value)> = None;
    let mut violation: Option<Value> = None;
    let mut sup_hi = BigReal::zero();
    let mut tail_error = BigReal::zero();
    let mut pairs = 0u64;
    for (a, &ca) in &classes.class_of {
        for b in neighbours(a, universe, maxlen) {
            let cb = classes.class_of[&b];
            pairs += 1;
            for (i, alpha) in alphas.iter().enumerate() {
                let parts = match parts.entry((ca, cb, i)) {
                    Entry::Occupied(e) => e.into_mut(),
                    Entry::Vacant(e) => {
                        e.insert(renyi_divergence_ln(&lns[ca], &lns[cb], alpha)?)
                    }
                };
                let ar = BigReal::from_rational(alpha);
                let implied = &parts.divergence / &ar;
                let witness = || {
                    let mut w = pair_witness(a, &b);
                    w["alpha"] = json!(crate::format_rational(alpha));
                    w["divergence"] = json!(parts.divergence.to_f64());
                    w
                };
                if rho_r.definitely_lt(&implied) && violation.is_none() {
                    violation = Some(witness());
                }
                if best.as_ref().is_none_or(|(x, _)| x.mid().definitely_lt(&implied.mid())) {
                    best = Some((implied.clone(), witness()));
                }
                sup_hi = sup_hi.max(&implied.upper());
                tail_error = tail_error.max(&(&parts.tail_term + &parts.uncovered).upper());
            }
        }
    }
    let statistic = best.as_ref().map(|(x, _)| x.mid()).unwrap_or_else(BigReal::zero);
    let slack = (&sup_hi - &statistic).clamp_nonnegative().upper();
    let tol = BigReal::from_f64(DEFAULT_SLACK_TOLERANCE);
    let pass = violation.is_none() && slack.definitely_le(&tol) && tail_error.definitely_le(&tol);
    let mut rep = AuditReport::new("renyi", statistic, rho_r, pass);
    rep.slack = slack;
    rep.tail_error = tail_error;
    rep.witness = violation.or(best.map(|(_, w)| w));
    Ok(rep
        .detail("pairs", pairs)
        .detail("distinct_outputs", classes.dists.len())
        .detail(
            "alphas",
            alphas.iter().map(crate::format_rational).collect::<Vec<_>>(),
        ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::privacy::{constant, noise, DpSystem, Query};
    use crate::samplers::LaplaceAlgo;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn constant_is_zero_dp() {
        let m = constant::<i64, i64>(DpSystem::Pure, 4);
        let r = dp_ratio_check(&m, &[0, 1], 2, &q(0, 1)).unwrap();
        assert!(r.passed(), "{r}");
        assert_eq!(r.statistic, BigReal::zero());
    }

    #[test]
    fn laplace_count_scale_two() {
        let m = noise(&Query::<i64>::count(), 1, 1, 2, DpSystem::Pure, LaplaceAlgo::auto()).unwrap();
        let r = dp_ratio_check(&m, &[0, 1], 2, &q(1, 2)).unwrap();
        assert!(r.passed(), "{r}");
        assert!((r.statistic.to_f64() - 0.5).abs() < 1e-12);
        assert!(r.slack.hi_f64() < 1e-9 && r.tail_error.hi_f64() < 1e-9);
        let r = dp_ratio_check(&m, &[0, 1], 2, &q(1, 4)).unwrap();
        assert!(!r.passed());
        assert!(r.witness.is_some());
    }

    #[test]
    fn gaussian_count_renyi() {
        let m = noise(&Query::<i64>::count(), 1, 1, 1, DpSystem::Zcdp, LaplaceAlgo::auto()).unwrap();
        let alphas = [q(3, 2), q(2, 1), q(4, 1), q(8, 1)];
        let r = renyi_check(&m, &[0, 1], 2, &q(1, 2), &alphas).unwrap();
        assert!(r.passed(), "{r}");
        let r = renyi_check(&m, &[0, 1], 2, &q(1, 8), &alphas).unwrap();
        assert!(!r.passed());
    }

    #[test]
    fn identical_outputs_have_zero_divergence() {
        let m = constant::<i64, i64>(DpSystem::Zcdp, 0);
        let r = renyi_check(&m, &[0, 1], 2, &q(0, 1), &[q(2, 1)]).unwrap();
        assert!(r.passed(), "{r}");
    }
}

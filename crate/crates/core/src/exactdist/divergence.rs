use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::One;

use super::{BigReal, Dist, MassFunction};
use crate::error::{Error, Result};

/// Parts of a Rényi sum `Σ P^α Q^{1-α}` kept separately so callers can see
/// how much of the result is estimated rather than computed.
#[derive(Clone, Debug)]
pub struct RenyiParts {
    /// Divergence enclosure including the tail estimate.
    pub divergence: BigReal,
    /// Contribution of the tail estimate to the summed term.
    pub tail_term: BigReal,
    /// P-mass on points where Q is absent or not certainly positive.
    pub uncovered: BigReal,
}

/// A distribution with the logarithm of every mass computed once, for
/// repeated divergence evaluations. `None` marks masses whose enclosure
/// touches zero.
pub struct LnDist<'a, T: Ord> {
    pub dist: &'a Dist<T>,
    ln: BTreeMap<T, Option<BigReal>>,
}

impl<'a, T: Ord + Clone> LnDist<'a, T> {
    pub fn new(dist: &'a Dist<T>) -> Self {
        let ln = dist
            .masses()
            .iter()
            .map(|(z, m)| (z.clone(), if m.is_positive() { m.ln() } else { None }))
            .collect();
        LnDist { dist, ln }
    }
}

/// `D_α(P‖Q) = 1/(α-1) · ln Σ P(z)^α Q(z)^{1-α}`.
///
/// Points where `P` has mass but `Q` was truncated away are not summed.
/// Their contribution, together with `P`'s tail, is estimated as
/// `(tail_P + uncovered) · R^{α-1}` where `R` is the largest ratio `P/Q`
/// seen on the common support, and folded into the enclosure.
pub fn renyi_divergence_dist<T: Ord + Clone>(
    p: &Dist<T>,
    q: &Dist<T>,
    alpha: &BigRational,
) -> Result<RenyiParts> {
    renyi_divergence_ln(&LnDist::new(p), &LnDist::new(q), alpha)
}

pub fn renyi_divergence_ln<T: Ord + Clone>(
    lp_dist: &LnDist<'_, T>,
    lq_dist: &LnDist<'_, T>,
    alpha: &BigRational,
) -> Result<RenyiParts> {
    if *alpha <= BigRational::one() {
        return Err(Error::invalid(format!("Rényi order {alpha} must exceed 1")));
    }
    let (p, q) = (lp_dist.dist, lq_dist.dist);
    let a = BigReal::from_rational(alpha);
    let one_minus_a = &BigReal::one() - &a;
    let mut sum = BigReal::zero();
    let mut uncovered = BigReal::zero();
    let mut max_ln_ratio: Option<BigReal> = None;
    for (z, pz) in p.masses() {
        if pz.is_zero() {
            continue;
        }
        let lq = match lq_dist.ln.get(z) {
            Some(Some(lq)) => lq,
            _ => {
                if q.tail().is_zero() && pz.is_positive() && q.get(z).is_none_or(BigReal::is_zero) {
                    return Err(Error::SupportMismatch(
                        "P has mass where Q has none".into(),
                    ));
                }
                uncovered = &uncovered + &pz.upper();
                continue;
            }
        };
        let Some(Some(lp)) = lp_dist.ln.get(z) else {
            // P's enclosure touches zero: bound the term by treating P as its
            // upper endpoint.
            uncovered = &uncovered + &pz.upper();
            continue;
        };
        let ln_ratio = lp - lq;
        max_ln_ratio = Some(match max_ln_ratio {
            Some(m) => m.max(&ln_ratio),
            None => ln_ratio,
        });
        sum = &sum + &(&(&a * lp) + &(&one_minus_a * lq)).exp();
    }
    let extra = &p.tail().upper() + &uncovered;
    let tail_term = match &max_ln_ratio {
        Some(lr) if !extra.is_zero() => {
            let am1 = &a - &BigReal::one();
            &extra * &(&am1 * &lr.upper()).exp()
        }
        _ => extra.clone(),
    };
    let widened = sum.hull(&(&sum + &tail_term).upper());
    let ln = widened
        .ln()
        .ok_or_else(|| Error::SupportMismatch("no common support".into()))?;
    let divergence = &ln / &(&a - &BigReal::one());
    Ok(RenyiParts {
        divergence,
        tail_term: tail_term.upper(),
        uncovered,
    })
}

pub fn renyi_divergence(p: &MassFunction, q: &MassFunction, alpha: &BigRational) -> Result<BigReal> {
    Ok(renyi_divergence_dist(&p.to_dist(), &q.to_dist(), alpha)?.divergence)
}

/// `½ Σ |P - Q|` over the union of supports; the enclosure's upper end adds
/// half of both tail bounds.
pub fn tv_distance_dist<T: Ord + Clone>(p: &Dist<T>, q: &Dist<T>) -> BigReal {
    let zero = BigReal::zero();
    let mut sum = BigReal::zero();
    for (z, pz) in p.masses() {
        let qz = q.get(z).unwrap_or(&zero);
        sum = &sum + &(pz - qz).abs();
    }
    for (z, qz) in q.masses() {
        if p.get(z).is_none() {
            sum = &sum + qz;
        }
    }
    let half = BigReal::from_ratio(1, 2);
    let s = &sum * &half;
    let tails = &(p.tail() + q.tail()) * &half;
    s.hull(&(&s + &tails).upper())
}

pub fn tv_distance(p: &MassFunction, q: &MassFunction) -> BigReal {
    tv_distance_dist(&p.to_dist(), &q.to_dist())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactdist::pmf::gaussian_mass_function;
    use crate::samplers::RationalParam;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn self_divergence_is_zero() {
        let p = gaussian_mass_function(&RationalParam::new(1u8, 1u8).unwrap(), 0).unwrap();
        let d = renyi_divergence(&p, &p, &q(2, 1)).unwrap();
        assert!(d.contains(&BigReal::zero()));
        assert!(d.error_bound().to_f64() < 1e-30);
        assert!(tv_distance(&p, &p).lower().is_zero());
    }

    #[test]
    fn rejects_small_order() {
        let p = MassFunction::point(0);
        assert!(renyi_divergence(&p, &p, &q(1, 1)).is_err());
    }

    #[test]
    fn support_mismatch_on_exact_zero() {
        let p = MassFunction::point(0);
        let r = MassFunction::point(1);
        assert!(matches!(
            renyi_divergence(&p, &r, &q(2, 1)),
            Err(Error::SupportMismatch(_))
        ));
    }

    #[test]
    fn tv_of_disjoint_points() {
        let d = tv_distance(&MassFunction::point(0), &MassFunction::point(1));
        assert_eq!(d, BigReal::one());
    }

    #[test]
    fn shifted_gaussians_within_bound() {
        let s = RationalParam::new(1u8, 1u8).unwrap();
        let p = gaussian_mass_function(&s, 0).unwrap();
        let r = gaussian_mass_function(&s, 1).unwrap();
        let d2 = renyi_divergence(&p, &r, &q(2, 1)).unwrap();
        let d4 = renyi_divergence(&p, &r, &q(4, 1)).unwrap();
        // Continuous value would be α/2 exactly; the discrete one is at most that.
        assert!(d2.definitely_le(&BigReal::one()) || d2.overlaps(&BigReal::one()));
        assert!(d2.definitely_lt(&d4));
    }
}

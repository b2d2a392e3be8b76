use std::fmt::Debug;

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde_json::json;

use super::AuditReport;
use crate::error::{Error, Result};
use crate::exactdist::unroll::{loop_unroll, UntilSpec, UntilState};
use crate::exactdist::{BigReal, LoopSpec};

/// Reachability and stability of one point's mass across cuts.
///
/// Passes when the mass is zero below some cut at most `k`, equals
/// `expected` (if given) at cut `k`, and stays exactly equal for cuts
/// `k..=k+extra`. The statistic counts cuts in that range whose mass
/// differs from the mass at `k`.
pub fn cut_stability_check<L>(
    spec: &L,
    point: &L::State,
    k: u32,
    extra: u32,
    expected: Option<&BigRational>,
) -> Result<AuditReport>
where
    L: LoopSpec<Weight = BigRational>,
    L::State: Debug,
{
    let masses: Vec<BigRational> = (0..=k + extra)
        .map(|c| loop_unroll(spec, c).map(|u| u.mass(point)))
        .collect::<Result<_>>()?;
    let reach = masses.iter().position(|m| !m.is_zero());
    let at_k = &masses[k as usize];
    let unstable: Vec<u32> = (k..=k + extra)
        .filter(|c| masses[*c as usize] != *at_k)
        .collect();
    let matches = expected.is_none_or(|e| e == at_k);
    let reached = reach.is_none_or(|r| r as u32 <= k);
    let pass = unstable.is_empty() && matches && reached;
    let mut rep = AuditReport::new(
        "cut-stability",
        BigReal::from_int(unstable.len() as i64),
        BigReal::zero(),
        pass,
    );
    if !pass {
        rep.witness = Some(json!({
            "point": format!("{point:?}"),
            "first_unstable_cut": unstable.first(),
            "mass_at_k": crate::format_rational(at_k),
            "expected": expected.map(crate::format_rational),
        }));
    }
    Ok(rep
        .detail("point", format!("{point:?}"))
        .detail("reach", reach)
        .detail("k", k)
        .detail("extra", extra)
        .detail(
            "masses",
            masses.iter().map(crate::format_rational).collect::<Vec<_>>(),
        ))
}

/// Convergence of an `until` loop's mass at `value` towards `target`.
///
/// Pointwise stability fails for rejection loops, since each cut adds
/// mass. Instead this checks, for every cut in `k..=k+extra`, that the
/// mass `m` and the still-looping mass `r` satisfy `m <= target <= m + r`,
/// that `m` strictly grows while `r > 0`, and that `r` shrinks by a fixed
/// factor below one per cut. The statistic is the final gap `r`.
pub fn until_convergence_check(
    spec: &UntilSpec,
    value: i64,
    target: &BigRational,
    k: u32,
    extra: u32,
) -> Result<AuditReport> {
    if extra == 0 {
        return Err(Error::invalid("convergence needs at least two cuts"));
    }
    let point = UntilState::Done(value);
    let runs: Vec<(BigRational, BigRational, BigRational)> = (k..=k + extra)
        .map(|c| {
            loop_unroll(spec, c).map(|u| {
                let total = u.total();
                (u.mass(&point), u.pending.clone(), total)
            })
        })
        .collect::<Result<_>>()?;
    let mut failures = Vec::new();
    for (i, (m, r, _)) in runs.iter().enumerate() {
        if !(m <= target && *target <= m + r) {
            failures.push(json!({ "cut": k + i as u32, "reason": "target outside [m, m + r]" }));
        }
    }
    let mut ratio: Option<BigRational> = None;
    for i in 1..runs.len() {
        let (m0, r0, _) = &runs[i - 1];
        let (m1, r1, _) = &runs[i];
        if r0.is_zero() {
            if m1 != m0 || !r1.is_zero() {
                failures.push(json!({ "cut": k + i as u32, "reason": "mass moved after the loop finished" }));
            }
            continue;
        }
        if m1 <= m0 {
            failures.push(json!({ "cut": k + i as u32, "reason": "mass did not grow" }));
        }
        let q = r1 / r0;
        let geometric = q < BigRational::one() && ratio.as_ref().is_none_or(|p| *p == q);
        if !geometric {
            failures.push(json!({ "cut": k + i as u32, "reason": "pending mass not geometric" }));
        }
        ratio.get_or_insert(q);
    }
    let (m_last, r_last, t_last) = runs.last().expect("nonempty");
    let normalized = if t_last.is_zero() {
        BigRational::zero()
    } else {
        m_last / t_last
    };
    let pass = failures.is_empty();
    let mut rep = AuditReport::new(
        "until-convergence",
        BigReal::from_rational(r_last),
        BigReal::from_rational(r_last),
        pass,
    );
    if !pass {
        rep.witness = Some(json!(failures));
    }
    Ok(rep
        .detail("value", value)
        .detail("target", crate::format_rational(target))
        .detail("normalized_mass", crate::format_rational(&normalized))
        .detail("decay_ratio", ratio.as_ref().map(crate::format_rational))
        .detail(
            "masses",
            runs.iter().map(|(m, _, _)| crate::format_rational(m)).collect::<Vec<_>>(),
        ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactdist::unroll::GeometricSpec;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn geometric_unreachable_point() {
        let spec = GeometricSpec { t: q(1, 2) };
        let r = cut_stability_check(&spec, &(false, 0), 1, 8, Some(&q(0, 1))).unwrap();
        assert!(r.passed(), "{r}");
    }

    #[test]
    fn geometric_stable_masses() {
        let spec = GeometricSpec { t: q(1, 2) };
        for (c, want) in [(1u64, q(1, 2)), (2, q(1, 4)), (3, q(1, 8))] {
            let r = cut_stability_check(&spec, &(false, c), c as u32 + 1, 8, Some(&want)).unwrap();
            assert!(r.passed(), "{r}");
        }
        // Claiming stability one cut too early fails.
        let r = cut_stability_check(&spec, &(false, 3), 3, 8, Some(&q(1, 8))).unwrap();
        assert!(!r.passed());
        let r = cut_stability_check(&spec, &(false, 3), 4, 8, Some(&q(1, 4))).unwrap();
        assert!(!r.passed());
    }

    #[test]
    fn uniform_three_converges() {
        let spec = UntilSpec::uniform(3).unwrap();
        for v in 0..3 {
            let r = until_convergence_check(&spec, v, &q(1, 3), 2, 10).unwrap();
            assert!(r.passed(), "{r}");
            assert_eq!(r.details["normalized_mass"], "1/3");
        }
        assert!(!until_convergence_check(&spec, 0, &q(1, 2), 2, 10).unwrap().passed());
        // Mass grows with the cut, so pointwise stability does not hold.
        assert!(!cut_stability_check(&spec, &UntilState::Done(0), 2, 4, None).unwrap().passed());
    }

    #[test]
    fn power_of_two_uniform_finishes() {
        let spec = UntilSpec::uniform(4).unwrap();
        let r = until_convergence_check(&spec, 1, &q(1, 4), 2, 3).unwrap();
        assert!(r.passed(), "{r}");
    }
}

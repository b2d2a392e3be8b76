//! One line per acceptance criterion, run sequentially so the timing
//! criteria are not disturbed by other tests. Exits non-zero on any failure.

use std::time::{Duration, Instant};

use discrete_dp_core::api::geometric_closed_form;
use discrete_dp_core::audit::{
    cut_stability_check, dp_ratio_check, empirical_pmf, gof_test, renyi_check,
    standard_universe, two_sample_test, until_convergence_check,
};
use discrete_dp_core::bench::{time_sampler, BenchDist};
use discrete_dp_core::exactdist::unroll::{GeometricSpec, UntilSpec};
use discrete_dp_core::exactdist::{pmf, renyi_divergence, tv_distance};
use discrete_dp_core::mechanisms::{self, Bins, Universe};
use discrete_dp_core::privacy::{
    approx_dp_of, compose, noise, noise_claim, of_app_dp, postprocess, Budget, DpSystem, Query,
};
use discrete_dp_core::{BigReal, EntropySource, LaplaceAlgo, RationalParam};
use num_bigint::BigInt;
use num_rational::BigRational;

type Check = std::result::Result<String, String>;

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn rp(n: u64, d: u64) -> RationalParam {
    RationalParam::new(n, d).unwrap()
}

fn ensure(ok: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(start: Instant, budget: Duration) -> std::result::Result<(), String> {
    let e = start.elapsed();
    ensure(e < budget, format!("took {:.1}s, budget {:.0}s", e.as_secs_f64(), budget.as_secs_f64()))
}

fn two_records() -> (Vec<i64>, usize) {
    (vec![0, 1], 2)
}

fn sampler_statistical() -> Check {
    let start = Instant::now();
    let n = 1_000_000;
    let mut notes = Vec::new();
    let laplace = [rp(1, 2), rp(1, 1), rp(5, 3), rp(4, 1)];
    let gauss = [rp(1, 2), rp(1, 1), rp(3, 1)];
    let mut cases: Vec<(String, RationalParam, bool)> = Vec::new();
    cases.extend(laplace.iter().map(|t| (format!("laplace t={t}"), t.clone(), true)));
    cases.extend(gauss.iter().map(|s| (format!("gaussian σ={s}"), s.clone(), false)));
    for (i, (name, p, is_lap)) in cases.iter().enumerate() {
        let (oracle, emp) = if *is_lap {
            (
                pmf::laplace_mass_function(p).unwrap(),
                empirical_pmf(|s| discrete_dp_core::samplers::laplace(s, p, LaplaceAlgo::auto()), n, 100 + i as u64),
            )
        } else {
            (
                pmf::gaussian_mass_function(p, 0).unwrap(),
                empirical_pmf(|s| discrete_dp_core::samplers::gaussian(s, p, LaplaceAlgo::auto()), n, 100 + i as u64),
            )
        };
        let emp = emp.map_err(|e| e.to_string())?;
        let rep = gof_test(&emp, &oracle, 0.001).map_err(|e| e.to_string())?;
        let tv = tv_distance(&emp.to_mass_function(), &oracle);
        let p_value = rep.details["p_value"].as_f64().unwrap();
        ensure(rep.passed(), format!("{name}: gof p = {p_value:.3e}"))?;
        ensure(tv.hi_f64() < 0.005, format!("{name}: tv {:.3e}", tv.hi_f64()))?;
        notes.push(format!("{name} p={p_value:.3} tv={:.1e}", tv.hi_f64()));
    }
    within(start, Duration::from_secs(60))?;
    Ok(notes.join("; "))
}

fn sampler_exact() -> Check {
    let start = Instant::now();
    let spec = GeometricSpec { t: q(1, 2) };
    for c in 1..=3u64 {
        let want = geometric_closed_form(&q(1, 2), c);
        ensure(want == q(1, 1 << c), "closed form")?;
        let r = cut_stability_check(&spec, &(false, c), c as u32 + 1, 8, Some(&want)).map_err(|e| e.to_string())?;
        ensure(r.passed(), format!("geometric count {c}: {r}"))?;
    }
    let r = cut_stability_check(&spec, &(false, 0), 1, 8, Some(&q(0, 1))).map_err(|e| e.to_string())?;
    ensure(r.passed(), format!("geometric count 0: {r}"))?;
    let u = UntilSpec::uniform(3).map_err(|e| e.to_string())?;
    for v in 0..3 {
        let r = until_convergence_check(&u, v, &q(1, 3), 2, 12).map_err(|e| e.to_string())?;
        ensure(r.passed(), format!("uniform(3) value {v}: {r}"))?;
    }
    within(start, Duration::from_secs(5))?;
    Ok("geometric masses 1/2, 1/4, 1/8 stable through 8 extra cuts; uniform(3) converges to 1/3".into())
}

fn two_algorithms() -> Check {
    let start = Instant::now();
    let mut notes = Vec::new();
    for (i, t) in [rp(1, 2), rp(2, 1), rp(10, 1)].iter().enumerate() {
        let seed = 200 + 2 * i as u64;
        let a = empirical_pmf(|s| discrete_dp_core::samplers::laplace_algo1(s, t), 1_000_000, seed).map_err(|e| e.to_string())?;
        let b = empirical_pmf(|s| discrete_dp_core::samplers::laplace_algo2(s, t), 1_000_000, seed + 1).map_err(|e| e.to_string())?;
        let r = two_sample_test(&a, &b, 0.001).map_err(|e| e.to_string())?;
        let p = r.details["p_value"].as_f64().unwrap();
        ensure(r.passed(), format!("t={t}: p = {p:.3e}"))?;
        notes.push(format!("t={t} p={p:.3}"));
    }
    within(start, Duration::from_secs(60))?;
    Ok(notes.join("; "))
}

fn pure_dp_exact() -> Check {
    let start = Instant::now();
    let (u, maxlen) = standard_universe();
    let mut notes = Vec::new();
    for (gn, gd) in [(1u64, 1u64), (1, 2), (2, 3)] {
        let m = noise(&Query::count(), 1, gn, gd, DpSystem::Pure, LaplaceAlgo::auto()).map_err(|e| e.to_string())?;
        let eps = q(gn as i64, gd as i64);
        let r = dp_ratio_check(&m, &u, maxlen, &eps).map_err(|e| e.to_string())?;
        ensure(r.passed(), format!("ε={gn}/{gd}: {r}"))?;
        let slack = r.slack.hi_f64().max(r.tail_error.hi_f64());
        ensure(slack < 1e-9, format!("ε={gn}/{gd}: slack {slack:.2e}"))?;
        let under = dp_ratio_check(&m, &u, maxlen, &(eps.clone() / q(2, 1))).map_err(|e| e.to_string())?;
        ensure(!under.passed() && under.witness.is_some(), format!("ε={gn}/{gd}: under-claim passed"))?;
        notes.push(format!("ε={gn}/{gd} max ln ratio {:.6} slack {slack:.1e}", r.statistic.to_f64()));
    }
    within(start, Duration::from_secs(30))?;
    Ok(notes.join("; ") + "; under-claims fail")
}

fn zcdp_exact() -> Check {
    let start = Instant::now();
    let (u, maxlen) = standard_universe();
    let alphas = [q(3, 2), q(2, 1), q(4, 1), q(8, 1)];
    let mut notes = Vec::new();
    for (gn, gd) in [(1u64, 1u64), (1, 2), (2, 3)] {
        let m = noise(&Query::count(), 1, gn, gd, DpSystem::Zcdp, LaplaceAlgo::auto()).map_err(|e| e.to_string())?;
        let rho = q((gn * gn) as i64, (2 * gd * gd) as i64);
        ensure(m.claim().value() == &rho, "claim is (γn/γd)²/2")?;
        let r = renyi_check(&m, &u, maxlen, &rho, &alphas).map_err(|e| e.to_string())?;
        ensure(r.passed(), format!("ρ={rho}: {r}"))?;
        notes.push(format!("ρ={rho} max D_α/α {:.6}", r.statistic.to_f64()));
    }
    let one = rp(1, 1);
    let p0 = pmf::gaussian_mass_function(&one, 0).map_err(|e| e.to_string())?;
    let p1 = pmf::gaussian_mass_function(&one, 1).map_err(|e| e.to_string())?;
    for a in &alphas {
        let d = renyi_divergence(&p0, &p1, a).map_err(|e| e.to_string())?;
        let bound = &BigReal::from_rational(a) / &BigReal::from_int(2);
        ensure(!bound.definitely_lt(&d), format!("D_{a} = {} exceeds α/2", d.to_decimal(12)))?;
    }
    within(start, Duration::from_secs(30))?;
    Ok(notes.join("; ") + "; σ=1 means 0,1: D_α ≤ α/2 for all α")
}

fn calculus_laws() -> Check {
    let start = Instant::now();
    let (u, maxlen) = two_records();
    let algo = LaplaceAlgo::auto();
    let count = Query::count();
    let ones = audit_query();

    // Composition additivity, pure.
    let a = noise(&count, 1, 1, 2, DpSystem::Pure, algo).map_err(|e| e.to_string())?;
    let b = noise(&ones, 1, 1, 3, DpSystem::Pure, algo).map_err(|e| e.to_string())?;
    let ab = compose(&a, &b).map_err(|e| e.to_string())?;
    ensure(ab.claim() == &(a.claim() + b.claim()), "pure claims add")?;
    let r = dp_ratio_check(&ab, &u, maxlen, ab.claim().value()).map_err(|e| e.to_string())?;
    ensure(r.passed(), format!("pure composition: {r}"))?;
    let ra = dp_ratio_check(&a, &u, maxlen, a.claim().value()).map_err(|e| e.to_string())?;

    // Composition additivity, zCDP.
    let za = noise(&count, 1, 1, 1, DpSystem::Zcdp, algo).map_err(|e| e.to_string())?;
    let zb = noise(&ones, 1, 1, 2, DpSystem::Zcdp, algo).map_err(|e| e.to_string())?;
    let zab = compose(&za, &zb).map_err(|e| e.to_string())?;
    ensure(zab.claim() == &(za.claim() + zb.claim()), "zCDP claims add")?;
    let r = renyi_check(&zab, &u, maxlen, zab.claim().value(), &[q(2, 1), q(4, 1)]).map_err(|e| e.to_string())?;
    ensure(r.passed(), format!("zCDP composition: {r}"))?;

    // Postprocessing does not increase the worst-case ratio, up to the
    // truncation slack the check certifies.
    let pp = postprocess(&a, |z: &i64| (*z).clamp(-1, 1));
    ensure(pp.claim() == a.claim(), "postprocess keeps claim")?;
    let rp_ = dp_ratio_check(&pp, &u, maxlen, pp.claim().value()).map_err(|e| e.to_string())?;
    ensure(rp_.passed(), format!("postprocess: {rp_}"))?;
    ensure(
        !(&ra.statistic + &rp_.slack).definitely_lt(&rp_.statistic),
        format!("postprocessed ratio {} above original {}", rp_.statistic.to_f64(), ra.statistic.to_f64()),
    )?;

    // Budget monotonicity: passing at ε implies passing at every larger ε.
    for bigger in [q(1, 1), q(2, 1)] {
        let r = dp_ratio_check(&a, &u, maxlen, &bigger).map_err(|e| e.to_string())?;
        ensure(r.passed(), format!("monotonicity at {bigger}"))?;
    }
    ensure(noise_claim(DpSystem::Pure, 1, 3).unwrap() < noise_claim(DpSystem::Pure, 1, 2).unwrap(), "claims order")?;

    // Conversion round trip.
    let delta = q(1, 1_000_000);
    for eps in [q(1, 10), q(1, 1), q(5, 1)] {
        let rho = of_app_dp(DpSystem::Zcdp, &delta, &eps).map_err(|e| e.to_string())?;
        let back = approx_dp_of(DpSystem::Zcdp, &rho, &delta).map_err(|e| e.to_string())?;
        let e = BigReal::from_rational(&eps);
        ensure(!e.definitely_lt(&back), format!("round trip overshoots at ε={eps}"))?;
        ensure((&e - &back).hi_f64() < 1e-40, format!("round trip loses {} at ε={eps}", (&e - &back).hi_f64()))?;
        let pure = of_app_dp(DpSystem::Pure, &delta, &eps).map_err(|e| e.to_string())?;
        ensure(approx_dp_of(DpSystem::Pure, &pure, &delta).unwrap() == e, "pure round trip")?;
    }
    within(start, Duration::from_secs(30))?;
    Ok("composition (pure, zCDP), postprocessing, monotonicity, conversion round trip".into())
}

fn audit_query() -> Query<i64> {
    Query::new("ones", 1, |db: &[i64]| db.iter().filter(|x| **x == 1).count() as i64)
}

fn histogram_accounting() -> Check {
    let start = Instant::now();
    let algo = LaplaceAlgo::auto();
    let bins = Bins::range(0, 1, 10).map_err(|e| e.to_string())?;
    let h = mechanisms::noised_histogram(&bins, 1, 1, DpSystem::Pure, algo).map_err(|e| e.to_string())?;
    ensure(h.constituents().len() == 10, "ten constituents")?;
    for c in h.constituents() {
        ensure(c == &Budget::ratio(1, 10).unwrap(), format!("per-bin claim {c}"))?;
    }
    ensure(h.claim() == &Budget::ratio(1, 1).unwrap(), format!("total claim {}", h.claim()))?;
    ensure(&h.constituents().iter().sum::<Budget>() == h.claim(), "ledger sum")?;

    let (u, maxlen) = two_records();
    let small = Bins::range(0, 1, 2).map_err(|e| e.to_string())?;
    let h2 = mechanisms::noised_histogram(&small, 1, 1, DpSystem::Pure, algo).map_err(|e| e.to_string())?;
    let r = dp_ratio_check(&h2, &u, maxlen, h2.claim().value()).map_err(|e| e.to_string())?;
    ensure(r.passed(), format!("2-bin histogram: {r}"))?;
    within(start, Duration::from_secs(30))?;
    Ok(format!(
        "per-bin 1/10, total 1; 2-bin max ln ratio {:.6} at claim {}",
        r.statistic.to_f64(),
        h2.claim()
    ))
}

fn sparse_vector() -> Check {
    let start = Instant::now();
    let (records, maxlen) = two_records();
    let universe = Universe { records: records.clone(), maxlen };
    let qs = vec![Query::count(), audit_query()];
    let m = mechanisms::sparse_vector(qs, 1, &rp(1, 1), &universe, LaplaceAlgo::auto()).map_err(|e| e.to_string())?;
    let r = dp_ratio_check(&m, &records, maxlen, &q(1, 1)).map_err(|e| e.to_string())?;
    ensure(r.passed(), format!("svt: {r}"))?;

    let far = Query::new("far", 1, |db: &[i64]| 1000 + db.len() as i64);
    let m = mechanisms::sparse_vector(vec![far], 0, &rp(100, 1), &universe, LaplaceAlgo::auto()).map_err(|e| e.to_string())?;
    let mut src = EntropySource::seeded(300);
    let n = 10_000;
    let hits = (0..n).filter(|_| m.run(&[0, 1], &mut src).unwrap() == Some(0)).count();
    let freq = hits as f64 / n as f64;
    ensure(freq > 0.99, format!("gap sanity frequency {freq}"))?;
    within(start, Duration::from_secs(60))?;
    Ok(format!(
        "max ln ratio {:.6} (slack {:.1e}, tail {:.1e}); gap sanity {freq:.4}",
        r.statistic.to_f64(),
        r.slack.hi_f64(),
        r.tail_error.hi_f64()
    ))
}

fn benchmark_shape() -> Check {
    let start = Instant::now();
    let draws = 10_000;
    let reps = 5;
    let mut notes = Vec::new();
    let mut algo2_at = Vec::new();
    for s in [1u64, 10, 100, 1000, 10_000] {
        let p = RationalParam::integer(s);
        let t = |a| time_sampler(BenchDist::Laplace, &p, a, draws, reps, 400).map_err(|e| e.to_string());
        let a1 = t(LaplaceAlgo::Algo1)?;
        let a2 = t(LaplaceAlgo::Algo2)?;
        let auto = t(LaplaceAlgo::auto())?;
        let best = a1.min(a2);
        ensure(auto <= 1.2 * best, format!("σ={s}: auto {auto:.0}ns vs best {best:.0}ns"))?;
        notes.push(format!("σ={s} algo1 {a1:.0} algo2 {a2:.0} auto {auto:.0}"));
        algo2_at.push(a2);
    }
    let (at10, at1e4) = (algo2_at[1], algo2_at[4]);
    ensure(at1e4 <= 3.0 * at10, format!("algo2 {at1e4:.0}ns at 10^4 vs {at10:.0}ns at 10"))?;
    within(start, Duration::from_secs(120))?;
    Ok(notes.join("; ") + " (ns/sample)")
}

fn main() {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("sampler correctness (statistical)", sampler_statistical),
        ("sampler correctness (exact cuts)", sampler_exact),
        ("two-algorithm equivalence", two_algorithms),
        ("pure DP exact ratio check", pure_dp_exact),
        ("zCDP exact Rényi check", zcdp_exact),
        ("calculus laws", calculus_laws),
        ("histogram accounting", histogram_accounting),
        ("sparse vector", sparse_vector),
        ("benchmark shape", benchmark_shape),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let out = f();
        let secs = start.elapsed().as_secs_f64();
        match out {
            Ok(msg) => println!("PASS  {name} ({secs:.1}s): {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL  {name} ({secs:.1}s): {msg}");
            }
        }
    }
    println!("{} of 9 acceptance criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

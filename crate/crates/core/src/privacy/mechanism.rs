use std::sync::{Arc, OnceLock};

use ibig::UBig;

use super::{noise_claim, Budget, DpSystem, Query};
use crate::entropy::EntropySource;
use crate::error::{Error, Result};
use crate::exactdist::{pmf, Dist, MassFunction};
use crate::samplers::{self, LaplaceAlgo, RationalParam};

type RunFn<R, T> = Arc<dyn Fn(&[R], &mut EntropySource) -> Result<T> + Send + Sync>;
type ExactFn<R, T> = Arc<dyn Fn(&[R]) -> Result<Dist<T>> + Send + Sync>;

/// A randomized query with a privacy claim.
///
/// `constituents` lists the budgets of the noise steps it was built from; the
/// claim is always their exact sum. When an exact builder is present it
/// produces the output distribution on a given database, which is what the
/// audits check the claim against.
pub struct Mechanism<R, T: Ord> {
    run: RunFn<R, T>,
    system: DpSystem,
    claim: Budget,
    constituents: Vec<Budget>,
    exact: Option<ExactFn<R, T>>,
}

impl<R, T: Ord> Clone for Mechanism<R, T> {
    fn clone(&self) -> Self {
        Mechanism {
            run: Arc::clone(&self.run),
            system: self.system,
            claim: self.claim.clone(),
            constituents: self.constituents.clone(),
            exact: self.exact.clone(),
        }
    }
}

impl<R, T: Ord> std::fmt::Debug for Mechanism<R, T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Mechanism")
            .field("system", &self.system)
            .field("claim", &self.claim.to_string())
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

impl<R: 'static, T: Ord + Clone + Send + Sync + 'static> Mechanism<R, T> {
    /// A primitive mechanism whose single constituent is its claim.
    pub fn new(
        system: DpSystem,
        claim: Budget,
        run: impl Fn(&[R], &mut EntropySource) -> Result<T> + Send + Sync + 'static,
    ) -> Self {
        Mechanism {
            run: Arc::new(run),
            system,
            constituents: vec![claim.clone()],
            claim,
            exact: None,
        }
    }

    pub fn with_exact(mut self, f: impl Fn(&[R]) -> Result<Dist<T>> + Send + Sync + 'static) -> Self {
        self.exact = Some(Arc::new(f));
        self
    }

    pub fn run(&self, db: &[R], src: &mut EntropySource) -> Result<T> {
        (self.run)(db, src)
    }

    pub fn system(&self) -> DpSystem {
        self.system
    }

    pub fn claim(&self) -> &Budget {
        &self.claim
    }

    pub fn constituents(&self) -> &[Budget] {
        &self.constituents
    }

    pub fn has_exact(&self) -> bool {
        self.exact.is_some()
    }

    /// Exact output distribution on `db`, if this mechanism has a builder.
    pub fn exact(&self, db: &[R]) -> Option<Result<Dist<T>>> {
        self.exact.as_ref().map(|f| f(db))
    }

    /// The claim restated as zCDP (`ε²/2` for pure claims).
    pub fn zcdp_claim(&self) -> Budget {
        match self.system {
            DpSystem::Pure => super::pure_to_zcdp(&self.claim),
            DpSystem::Zcdp => self.claim.clone(),
        }
    }
}

fn same_system(a: DpSystem, b: DpSystem) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::SystemMismatch(a.to_string(), b.to_string()))
    }
}

/// Adds Laplace (pure) or Gaussian (zCDP) noise of scale `Δ·γd/γn` to `q`.
///
/// The claim is `γn/γd` under pure DP and `(γn/γd)²/2` under zCDP; `Δ`
/// only widens the noise.
pub fn noise<R: 'static>(
    q: &Query<R>,
    delta: u64,
    gn: u64,
    gd: u64,
    sys: DpSystem,
    algo: LaplaceAlgo,
) -> Result<Mechanism<R, i64>> {
    if delta == 0 || gn == 0 || gd == 0 {
        return Err(Error::invalid(format!(
            "noise needs positive Δ, γn, γd (got {delta}, {gn}, {gd})"
        )));
    }
    let scale = RationalParam::new(UBig::from(delta) * UBig::from(gd), gn)?;
    let claim = noise_claim(sys, gn, gd)?;
    let run_q = q.clone();
    let run_scale = scale.clone();
    let run = move |db: &[R], src: &mut EntropySource| -> Result<i64> {
        let v = run_q.eval(db);
        let z = match sys {
            DpSystem::Pure => samplers::laplace(src, &run_scale, algo)?,
            DpSystem::Zcdp => samplers::gaussian(src, &run_scale, algo)?,
        };
        v.checked_add(z)
            .ok_or_else(|| Error::Overflow(format!("{v} + {z}")))
    };
    let base: Arc<OnceLock<Result<MassFunction>>> = Arc::new(OnceLock::new());
    let exact_q = q.clone();
    let exact = move |db: &[R]| -> Result<Dist<i64>> {
        let mf = base
            .get_or_init(|| match sys {
                DpSystem::Pure => pmf::laplace_mass_function(&scale),
                DpSystem::Zcdp => pmf::gaussian_mass_function(&scale, 0),
            })
            .clone()?;
        Ok(mf.translate(exact_q.eval(db)).to_dist())
    };
    Ok(Mechanism::new(sys, claim, run).with_exact(exact))
}

/// Runs `m1` then `m2` on the same database; the claim is the sum.
pub fn compose<R: 'static, T, U>(m1: &Mechanism<R, T>, m2: &Mechanism<R, U>) -> Result<Mechanism<R, (T, U)>>
where
    T: Ord + Clone + Send + Sync + 'static,
    U: Ord + Clone + Send + Sync + 'static,
{
    same_system(m1.system, m2.system)?;
    let (a, b) = (m1.clone(), m2.clone());
    let run = move |db: &[R], src: &mut EntropySource| -> Result<(T, U)> {
        let t = a.run(db, src)?;
        let u = b.run(db, src)?;
        Ok((t, u))
    };
    let mut constituents = m1.constituents.clone();
    constituents.extend(m2.constituents.iter().cloned());
    let mut out = Mechanism {
        run: Arc::new(run),
        system: m1.system,
        claim: &m1.claim + &m2.claim,
        constituents,
        exact: None,
    };
    if let (Some(e1), Some(e2)) = (m1.exact.clone(), m2.exact.clone()) {
        out.exact = Some(Arc::new(move |db: &[R]| {
            let d1 = e1(db)?;
            let d2 = e2(db)?;
            Ok(d1.bind(|t| d2.map(|u| (t.clone(), u.clone()))))
        }));
    }
    Ok(out)
}

/// Adaptive composition: the second mechanism is chosen from the first
/// output. Every continuation must claim at most `declared` in the same
/// system; the composite claims `m1 + declared`.
pub fn compose_adaptive<R: 'static, T, U>(
    m1: &Mechanism<R, T>,
    declared: Budget,
    next: impl Fn(&T) -> Mechanism<R, U> + Send + Sync + 'static,
) -> Mechanism<R, (T, U)>
where
    T: Ord + Clone + Send + Sync + 'static,
    U: Ord + Clone + Send + Sync + 'static,
{
    let sys = m1.system;
    let next = Arc::new(next);
    let check = {
        let declared = declared.clone();
        move |m: &Mechanism<R, U>| -> Result<()> {
            same_system(sys, m.system)?;
            if m.claim > declared {
                return Err(Error::invalid(format!(
                    "continuation claims {} but {} was declared",
                    m.claim, declared
                )));
            }
            Ok(())
        }
    };
    let check = Arc::new(check);
    let (a, f, c) = (m1.clone(), Arc::clone(&next), Arc::clone(&check));
    let run = move |db: &[R], src: &mut EntropySource| -> Result<(T, U)> {
        let t = a.run(db, src)?;
        let m2 = f(&t);
        c(&m2)?;
        let u = m2.run(db, src)?;
        Ok((t, u))
    };
    let mut constituents = m1.constituents.clone();
    constituents.push(declared.clone());
    let mut out = Mechanism {
        run: Arc::new(run),
        system: sys,
        claim: &m1.claim + &declared,
        constituents,
        exact: None,
    };
    if let Some(e1) = m1.exact.clone() {
        out.exact = Some(Arc::new(move |db: &[R]| {
            let d1 = e1(db)?;
            let err = std::cell::RefCell::new(None);
            let d = d1.bind(|t| {
                let m2 = next(t);
                let res = check(&m2).and_then(|_| {
                    m2.exact(db)
                        .unwrap_or_else(|| Err(Error::invalid("continuation has no exact builder")))
                });
                match res {
                    Ok(d2) => d2.map(|u| (t.clone(), u.clone())),
                    Err(e) => {
                        err.borrow_mut().get_or_insert(e);
                        Dist::from_parts(Default::default(), crate::BigReal::zero())
                    }
                }
            });
            match err.into_inner() {
                Some(e) => Err(e),
                None => Ok(d),
            }
        }));
    }
    out
}

/// Applies a database-independent function to the output; the claim is unchanged.
pub fn postprocess<R: 'static, T, U>(
    m: &Mechanism<R, T>,
    f: impl Fn(&T) -> U + Send + Sync + 'static,
) -> Mechanism<R, U>
where
    T: Ord + Clone + Send + Sync + 'static,
    U: Ord + Clone + Send + Sync + 'static,
{
    let f = Arc::new(f);
    let (a, g) = (m.clone(), Arc::clone(&f));
    let run = move |db: &[R], src: &mut EntropySource| -> Result<U> { Ok(g(&a.run(db, src)?)) };
    let mut out = Mechanism {
        run: Arc::new(run),
        system: m.system,
        claim: m.claim.clone(),
        constituents: m.constituents.clone(),
        exact: None,
    };
    if let Some(e) = m.exact.clone() {
        out.exact = Some(Arc::new(move |db: &[R]| Ok(e(db)?.map(|t| f(t)))));
    }
    out
}

/// Point mass at `u` for every database, claiming nothing.
pub fn constant<R: 'static, T>(sys: DpSystem, u: T) -> Mechanism<R, T>
where
    T: Ord + Clone + Send + Sync + 'static,
{
    let v = u.clone();
    Mechanism {
        run: Arc::new(move |_: &[R], _: &mut EntropySource| Ok(v.clone())),
        system: sys,
        claim: Budget::zero(),
        constituents: Vec::new(),
        exact: Some(Arc::new(move |_: &[R]| Ok(Dist::point(u.clone())))),
    }
}

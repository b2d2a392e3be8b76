use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Largest number of databases an exhaustive check will enumerate.
pub const MAX_ENUMERATION: usize = 100_000;

type Eval<R> = Arc<dyn Fn(&[R]) -> i64 + Send + Sync>;

/// An integer-valued query over a list of records with a declared sensitivity.
pub struct Query<R> {
    name: String,
    eval: Eval<R>,
    sensitivity: u64,
}

impl<R> Clone for Query<R> {
    fn clone(&self) -> Self {
        Query {
            name: self.name.clone(),
            eval: Arc::clone(&self.eval),
            sensitivity: self.sensitivity,
        }
    }
}

impl<R> fmt::Debug for Query<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Query({}, Δ={})", self.name, self.sensitivity)
    }
}

impl<R> Query<R> {
    pub fn new(
        name: impl Into<String>,
        sensitivity: u64,
        eval: impl Fn(&[R]) -> i64 + Send + Sync + 'static,
    ) -> Self {
        Query {
            name: name.into(),
            eval: Arc::new(eval),
            sensitivity,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn sensitivity(&self) -> u64 {
        self.sensitivity
    }

    pub fn eval(&self, db: &[R]) -> i64 {
        (self.eval)(db)
    }
}

impl<R: 'static> Query<R> {
    /// Always `c`; sensitivity 0.
    pub fn constant(c: i64) -> Self {
        Query::new(format!("const {c}"), 0, move |_| c)
    }

    /// Number of records; sensitivity 1.
    pub fn count() -> Self {
        Query::new("count", 1, |db: &[R]| db.len() as i64)
    }
}

impl Query<i64> {
    /// Sum of entries clamped to `[0, bound]`; sensitivity `bound`.
    pub fn clipped_sum(bound: u64) -> Self {
        let b = bound as i64;
        Query::new(format!("sum clipped to [0, {bound}]"), bound, move |db: &[i64]| {
            db.iter().map(|x| (*x).clamp(0, b)).sum()
        })
    }
}

/// Every list over `universe` with length at most `maxlen`.
pub fn enumerate_databases<R: Clone>(universe: &[R], maxlen: usize) -> Result<Vec<Vec<R>>> {
    let mut total: usize = 0;
    let mut layer = 1usize;
    for _ in 0..=maxlen {
        total = total.saturating_add(layer);
        layer = layer.saturating_mul(universe.len().max(1));
    }
    if total > MAX_ENUMERATION {
        return Err(Error::EnumerationTooLarge(format!(
            "{total} databases over {} records up to length {maxlen}",
            universe.len()
        )));
    }
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..maxlen {
        let mut next = Vec::new();
        for db in &frontier {
            for r in universe {
                let mut d: Vec<R> = db.clone();
                d.push(r.clone());
                next.push(d);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    Ok(out)
}

/// Lists obtained from `db` by adding, removing or modifying one entry, with
/// added entries drawn from `universe` and length capped at `maxlen`.
pub fn neighbours<R: Clone + Ord>(db: &[R], universe: &[R], maxlen: usize) -> Vec<Vec<R>> {
    let mut out = BTreeSet::new();
    for i in 0..db.len() {
        let mut d = db.to_vec();
        d.remove(i);
        out.insert(d);
        for r in universe {
            if *r != db[i] {
                let mut d = db.to_vec();
                d[i] = r.clone();
                out.insert(d);
            }
        }
    }
    if db.len() < maxlen {
        for i in 0..=db.len() {
            for r in universe {
                let mut d = db.to_vec();
                d.insert(i, r.clone());
                out.insert(d);
            }
        }
    }
    out.into_iter().collect()
}

/// All ordered neighbouring pairs over the databases of `enumerate_databases`.
pub fn neighbour_pairs<R: Clone + Ord>(universe: &[R], maxlen: usize) -> Result<Vec<(Vec<R>, Vec<R>)>> {
    let dbs = enumerate_databases(universe, maxlen)?;
    let mut pairs = Vec::new();
    for db in &dbs {
        for n in neighbours(db, universe, maxlen) {
            pairs.push((db.clone(), n));
        }
    }
    Ok(pairs)
}

/// Outcome of an exhaustive sensitivity check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SensitivityReport<R> {
    pub holds: bool,
    /// Largest `|q(l) - q(l')|` seen.
    pub max_change: u64,
    /// A pair attaining `max_change`, if any pair was examined.
    pub witness: Option<(Vec<R>, Vec<R>)>,
}

/// Checks `|q(l) - q(l')| <= delta` over every neighbouring pair.
pub fn sensitivity_check<R: Clone + Ord>(
    q: &Query<R>,
    delta: u64,
    universe: &[R],
    maxlen: usize,
) -> Result<SensitivityReport<R>> {
    let mut max_change = 0u64;
    let mut witness = None;
    for (a, b) in neighbour_pairs(universe, maxlen)? {
        let change = q.eval(&a).abs_diff(q.eval(&b));
        if change > max_change || witness.is_none() {
            max_change = max_change.max(change);
            witness = Some((a, b));
        }
    }
    Ok(SensitivityReport {
        holds: max_change <= delta,
        max_change,
        witness,
    })
}

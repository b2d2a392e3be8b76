use std::collections::BTreeMap;

use super::BigReal;

/// A finitely supported sub-distribution over any ordered output type, with a
/// bound on the mass it does not account for.
///
/// This is what exact builders of mechanisms produce: a histogram builder
/// yields `Dist<Vec<i64>>`, a noised count `Dist<i64>`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dist<T: Ord> {
    masses: BTreeMap<T, BigReal>,
    tail: BigReal,
}

impl<T: Ord + Clone> Dist<T> {
    pub fn from_parts(masses: BTreeMap<T, BigReal>, tail: BigReal) -> Self {
        Dist { masses, tail }
    }

    pub fn point(v: T) -> Self {
        let mut masses = BTreeMap::new();
        masses.insert(v, BigReal::one());
        Dist {
            masses,
            tail: BigReal::zero(),
        }
    }

    pub fn masses(&self) -> &BTreeMap<T, BigReal> {
        &self.masses
    }

    pub fn tail(&self) -> &BigReal {
        &self.tail
    }

    pub fn get(&self, v: &T) -> Option<&BigReal> {
        self.masses.get(v)
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn total(&self) -> BigReal {
        self.masses.values().sum()
    }

    /// Pushes mass forward through `f`, merging collisions.
    pub fn map<U: Ord + Clone>(&self, f: impl Fn(&T) -> U) -> Dist<U> {
        let mut out: BTreeMap<U, BigReal> = BTreeMap::new();
        for (v, m) in &self.masses {
            let k = f(v);
            let e = out.entry(k).or_insert_with(BigReal::zero);
            *e = &*e + m;
        }
        Dist {
            masses: out,
            tail: self.tail.clone(),
        }
    }

    /// `v ↦ Σ_t f(t)(v)·p(t)`. The tail collects this tail plus every
    /// continuation's tail weighted by the mass that reaches it.
    pub fn bind<U: Ord + Clone>(&self, f: impl Fn(&T) -> Dist<U>) -> Dist<U> {
        let mut out: BTreeMap<U, BigReal> = BTreeMap::new();
        let mut tail = self.tail.clone();
        for (t, p) in &self.masses {
            let d = f(t);
            for (v, q) in &d.masses {
                let e = out.entry(v.clone()).or_insert_with(BigReal::zero);
                *e = &*e + &(p * q);
            }
            tail = &tail + &(p * &d.tail);
        }
        Dist { masses: out, tail }
    }

    /// Moves every point whose mass is certainly below `threshold` into the tail.
    pub fn prune(&self, threshold: &BigReal) -> Dist<T> {
        let mut masses = BTreeMap::new();
        let mut tail = self.tail.clone();
        for (v, m) in &self.masses {
            if m.definitely_lt(threshold) {
                tail = &tail + &m.upper();
            } else {
                masses.insert(v.clone(), m.clone());
            }
        }
        Dist { masses, tail }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coin() -> Dist<i64> {
        let mut m = BTreeMap::new();
        m.insert(0, BigReal::from_ratio(1, 2));
        m.insert(1, BigReal::from_ratio(1, 2));
        Dist::from_parts(m, BigReal::zero())
    }

    #[test]
    fn bind_sums_paths() {
        let two = coin().bind(|a| coin().map(move |b| a + b));
        assert_eq!(two.get(&1).unwrap(), &BigReal::from_ratio(1, 2));
        assert_eq!(two.get(&2).unwrap(), &BigReal::from_ratio(1, 4));
        assert!(two.tail().is_zero());
    }

    #[test]
    fn map_merges() {
        let d = coin().map(|_| 7);
        assert_eq!(d.len(), 1);
        assert_eq!(d.get(&7).unwrap(), &BigReal::one());
    }

    #[test]
    fn prune_moves_mass_to_tail() {
        let mut m = BTreeMap::new();
        m.insert(0, BigReal::one());
        m.insert(1, BigReal::pow2(-300));
        let d = Dist::from_parts(m, BigReal::zero()).prune(&BigReal::pow2(-200));
        assert_eq!(d.len(), 1);
        assert_eq!(d.tail(), &BigReal::pow2(-300));
    }
}

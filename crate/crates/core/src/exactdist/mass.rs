use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{BigReal, Dist};
use crate::config::precision_bits;
use crate::error::{Error, Result};

/// Significant digits used when serializing masses.
const JSON_DIGITS: usize = 40;

/// Masses on the integer window `[lo, hi]` plus a certified bound on the mass
/// outside it.
#[derive(Clone, Debug)]
pub struct MassFunction {
    lo: i64,
    masses: Vec<BigReal>,
    tail_bound: BigReal,
    precision_bits: u32,
}

impl MassFunction {
    /// `masses[i]` is the mass at `lo + i`.
    pub fn new(lo: i64, masses: Vec<BigReal>, tail_bound: BigReal) -> Self {
        MassFunction {
            lo,
            masses,
            tail_bound,
            precision_bits: precision_bits(),
        }
    }

    /// Mass 1 at `z`, no tail.
    pub fn point(z: i64) -> Self {
        Self::new(z, vec![BigReal::one()], BigReal::zero())
    }

    /// The all-zero function (empty window).
    pub fn zero() -> Self {
        Self::new(0, Vec::new(), BigReal::zero())
    }

    /// Dense window spanning the keys of `map`; missing points get mass 0.
    pub fn from_map(map: &BTreeMap<i64, BigReal>, tail_bound: BigReal) -> Self {
        let (Some(&lo), Some(&hi)) = (map.keys().next(), map.keys().next_back()) else {
            return Self::new(0, Vec::new(), tail_bound);
        };
        let masses = (lo..=hi)
            .map(|z| map.get(&z).cloned().unwrap_or_else(BigReal::zero))
            .collect();
        Self::new(lo, masses, tail_bound)
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    /// Upper end of the window; `lo - 1` for an empty window.
    pub fn hi(&self) -> i64 {
        self.lo + self.masses.len() as i64 - 1
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn masses(&self) -> &[BigReal] {
        &self.masses
    }

    pub fn tail_bound(&self) -> &BigReal {
        &self.tail_bound
    }

    pub fn precision_bits(&self) -> u32 {
        self.precision_bits
    }

    /// Mass at `z` (zero outside the window).
    pub fn get(&self, z: i64) -> BigReal {
        if z < self.lo || z > self.hi() {
            return BigReal::zero();
        }
        self.masses[(z - self.lo) as usize].clone()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, &BigReal)> + '_ {
        self.masses
            .iter()
            .enumerate()
            .map(move |(i, m)| (self.lo + i as i64, m))
    }

    /// Sum of the window masses.
    pub fn total(&self) -> BigReal {
        self.masses.iter().sum()
    }

    /// Shifts every point by `k`.
    pub fn translate(&self, k: i64) -> Self {
        MassFunction {
            lo: self.lo + k,
            ..self.clone()
        }
    }

    /// For objects claimed to be PMFs: window mass plus tail covers
    /// `[1 - tol, 1]` up to enclosure error.
    pub fn check_normalized(&self, tol: &BigReal) -> bool {
        let total = self.total();
        let covered = &total + &self.tail_bound;
        let one = BigReal::one();
        !covered.upper().definitely_lt(&(&one - tol)) && !one.definitely_lt(&total.lower())
    }

    pub fn to_dist(&self) -> Dist<i64> {
        Dist::from_parts(
            self.iter()
                .filter(|(_, m)| !m.is_zero())
                .map(|(z, m)| (z, m.clone()))
                .collect(),
            self.tail_bound.clone(),
        )
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(MassJson::from(self)).expect("mass function serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let j: MassJson = serde_json::from_value(v.clone())?;
        if j.hi - j.lo + 1 != j.masses.len() as i64 && !(j.masses.is_empty() && j.hi < j.lo) {
            return Err(Error::Parse("window length does not match masses".into()));
        }
        let masses = j
            .masses
            .iter()
            .map(|s| BigReal::parse_decimal(s))
            .collect::<Result<Vec<_>>>()?;
        let mut mf = Self::new(j.lo, masses, BigReal::parse_decimal(&j.tail_bound)?);
        mf.precision_bits = j.precision_bits;
        Ok(mf)
    }
}

#[derive(Serialize, Deserialize)]
struct MassJson {
    lo: i64,
    hi: i64,
    masses: Vec<String>,
    tail_bound: String,
    precision_bits: u32,
}

impl From<&MassFunction> for MassJson {
    fn from(m: &MassFunction) -> Self {
        MassJson {
            lo: m.lo,
            hi: m.hi(),
            masses: m.masses.iter().map(|x| x.to_decimal(JSON_DIGITS)).collect(),
            // Round the bound up so the serialized value stays a bound.
            tail_bound: m.tail_bound.upper().to_decimal(JSON_DIGITS),
            precision_bits: m.precision_bits,
        }
    }
}

impl Serialize for MassFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MassJson::from(self).serialize(s)
    }
}

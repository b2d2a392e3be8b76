//! A file-backed privacy budget account.
//!
//! The file is JSON `{system, remaining: "n/d", log: [...]}`. There is no
//! locking: one writer at a time is assumed.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::privacy::{Budget, DpSystem};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub query: String,
    pub charged: Budget,
    pub remaining: Budget,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ledger {
    pub system: DpSystem,
    pub remaining: Budget,
    #[serde(default)]
    pub log: Vec<LedgerEntry>,
}

impl Ledger {
    pub fn new(system: DpSystem, total: Budget) -> Self {
        Ledger {
            system,
            remaining: total,
            log: Vec::new(),
        }
    }

    /// Fails without changing anything if the claim is in another system
    /// or exceeds what is left.
    pub fn check(&self, system: DpSystem, claim: &Budget) -> Result<Budget> {
        if system != self.system {
            return Err(Error::SystemMismatch(self.system.to_string(), system.to_string()));
        }
        self.remaining
            .checked_sub(claim)
            .ok_or_else(|| Error::BudgetExhausted {
                requested: claim.to_string(),
                remaining: self.remaining.to_string(),
            })
    }

    pub fn charge(&mut self, query: &str, system: DpSystem, claim: &Budget, seed: Option<u64>) -> Result<()> {
        let left = self.check(system, claim)?;
        self.remaining = left.clone();
        self.log.push(LedgerEntry {
            query: query.to_string(),
            charged: claim.clone(),
            remaining: left,
            seed,
        });
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("ledger {}: {e}", path.display())))
    }

    /// Writes to a sibling temporary file, then renames over `path`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, serde_json::to_string_pretty(self)? + "\n")?;
        fs::rename(&tmp, path)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charges_until_exhausted() {
        let mut l = Ledger::new(DpSystem::Pure, Budget::ratio(1, 1).unwrap());
        let half = Budget::ratio(1, 2).unwrap();
        l.charge("count", DpSystem::Pure, &half, None).unwrap();
        l.charge("count", DpSystem::Pure, &half, Some(3)).unwrap();
        assert!(l.remaining.is_zero());
        let err = l.charge("count", DpSystem::Pure, &half, None).unwrap_err();
        assert_eq!(err.code(), "BUDGET_EXHAUSTED");
        assert_eq!(l.log.len(), 2);
        assert!(matches!(
            l.charge("count", DpSystem::Zcdp, &Budget::zero(), None),
            Err(Error::SystemMismatch(..))
        ));
    }

    #[test]
    fn round_trips_exactly() {
        let dir = std::env::temp_dir().join(format!("ledger-test-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("l.json");
        let mut l = Ledger::new(DpSystem::Zcdp, "1/3".parse().unwrap());
        l.charge("mean", DpSystem::Zcdp, &"1/7".parse().unwrap(), None).unwrap();
        l.save(&path).unwrap();
        let back = Ledger::load(&path).unwrap();
        assert_eq!(back, l);
        assert_eq!(back.remaining.to_string(), "4/21");
        fs::remove_dir_all(&dir).unwrap();
    }
}

//! Checks of samplers and mechanisms against the exact oracles.
//!
//! Statistical tests (`gof_test`, `two_sample_test`) compare draws with
//! an oracle or with each other. Exact tests (`dp_ratio_check`,
//! `renyi_check`) enumerate every neighbouring pair of a small universe and
//! compare exact output distributions. Cut tests run `loop_unroll` at
//! increasing cuts.

mod cuts;
mod exact;
mod sampling;
pub mod stats;

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::exactdist::BigReal;

pub use cuts::{cut_stability_check, until_convergence_check};
pub use exact::{dp_ratio_check, renyi_check, standard_universe, DEFAULT_SLACK_TOLERANCE};
pub use sampling::{empirical_pmf, gof_test, two_sample_test, Empirical};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(pass: bool) -> Self {
        if pass {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

/// Outcome of one audit.
///
/// `statistic` is compared with `threshold`; `slack` is the numerical
/// uncertainty already charged against the statistic and `tail_error` the
/// mass that was not examined (truncated windows, uncovered points).
#[derive(Clone, Debug)]
pub struct AuditReport {
    pub test: String,
    pub statistic: BigReal,
    pub threshold: BigReal,
    pub slack: BigReal,
    pub tail_error: BigReal,
    pub verdict: Verdict,
    pub witness: Option<Value>,
    pub seed: Option<u64>,
    pub draws: Option<u64>,
    /// Test-specific extras such as the p-value or degrees of freedom.
    pub details: Map<String, Value>,
}

impl AuditReport {
    pub fn new(test: impl Into<String>, statistic: BigReal, threshold: BigReal, pass: bool) -> Self {
        AuditReport {
            test: test.into(),
            statistic,
            threshold,
            slack: BigReal::zero(),
            tail_error: BigReal::zero(),
            verdict: Verdict::from_bool(pass),
            witness: None,
            seed: None,
            draws: None,
            details: Map::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn detail(mut self, key: &str, v: impl Into<Value>) -> Self {
        self.details.insert(key.to_string(), v.into());
        self
    }

    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "test": self.test,
            "statistic": num(&self.statistic),
            "threshold": num(&self.threshold),
            "slack": num(&self.slack),
            "tail_error": self.tail_error.hi_f64(),
            "verdict": self.verdict,
            "witness": self.witness,
            "seed": self.seed,
            "draws": self.draws,
        });
        if !self.details.is_empty() {
            v["details"] = Value::Object(self.details.clone());
        }
        v
    }
}

fn num(x: &BigReal) -> Value {
    let f = x.to_f64();
    if f.is_finite() {
        json!(f)
    } else {
        json!(x.to_decimal(20))
    }
}

impl Serialize for AuditReport {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: statistic {} threshold {} slack {:.3e} tail {:.3e}",
            self.test,
            match self.verdict {
                Verdict::Pass => "PASS",
                Verdict::Fail => "FAIL",
            },
            self.statistic.to_decimal(8),
            self.threshold.to_decimal(8),
            self.slack.hi_f64(),
            self.tail_error.hi_f64(),
        )?;
        if let Some(w) = &self.witness {
            write!(f, " witness {w}")?;
        }
        Ok(())
    }
}

//! Pass/fail bookkeeping shared by every empirical inequality check.

use serde::{Deserialize, Serialize};

/// Default absolute slack for inequality checks.
pub const DEFAULT_SLACK: f64 = 1e-9;

/// Number of violations kept verbatim in a report; the rest are only counted.
const KEPT_VIOLATIONS: usize = 8;

/// One failed instance of `lhs ≤ rhs + slack`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub n: u64,
    pub check: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// Outcome of evaluating one inequality over many samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub slack: f64,
    pub evaluated: u64,
    pub violations: u64,
    /// Largest observed `lhs − rhs`; `None` when nothing was evaluated.
    pub max_excess: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub examples: Vec<Violation>,
}

impl CheckReport {
    pub fn new(check: impl Into<String>, slack: f64) -> Self {
        CheckReport {
            check: check.into(),
            slack,
            evaluated: 0,
            violations: 0,
            max_excess: None,
            skipped: None,
            note: None,
            examples: Vec::new(),
        }
    }

    /// Records `lhs ≤ rhs + slack` at index `n`. Returns whether it held.
    pub fn record(&mut self, n: u64, lhs: f64, rhs: f64) -> bool {
        self.record_with(n, lhs, rhs, || None)
    }

    pub fn record_with(&mut self, n: u64, lhs: f64, rhs: f64, detail: impl FnOnce() -> Option<String>) -> bool {
        self.evaluated += 1;
        let excess = lhs - rhs;
        self.max_excess = Some(match self.max_excess {
            Some(m) if !(excess > m) => m,
            _ => excess,
        });
        // NaN on either side is a violation
        let ok = lhs <= rhs + self.slack;
        if !ok {
            self.violations += 1;
            if self.examples.len() < KEPT_VIOLATIONS {
                self.examples.push(Violation {
                    n,
                    check: self.check.clone(),
                    lhs,
                    rhs,
                    slack: self.slack,
                    detail: detail(),
                });
            }
        }
        ok
    }

    /// Records a failure that is not an inequality (e.g. a missing witness).
    pub fn record_failure(&mut self, n: u64, lhs: f64, rhs: f64, detail: String) {
        self.evaluated += 1;
        self.violations += 1;
        if self.examples.len() < KEPT_VIOLATIONS {
            self.examples.push(Violation {
                n,
                check: self.check.clone(),
                lhs,
                rhs,
                slack: self.slack,
                detail: Some(detail),
            });
        }
    }

    pub fn skip(&mut self) {
        *self.skipped.get_or_insert(0) += 1;
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

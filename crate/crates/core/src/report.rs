//! Result records for exact identity checks.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::qarith::Rational;

pub const MAX_FAILING_ENTRIES: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    ExactPass,
    Fail,
    /// A boundary factor could not be validated, so the comparison is not trusted.
    UntrustedBoundary,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::ExactPass => "exact-pass",
            Status::Fail => "fail",
            Status::UntrustedBoundary => "untrusted-boundary",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailingEntry {
    pub left: String,
    pub right: String,
    pub lhs: Rational,
    pub rhs: Rational,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub identity: String,
    pub parameters: Map<String, Value>,
    pub status: Status,
    pub max_discrepancy: Rational,
    pub failing_entries: Vec<FailingEntry>,
    pub entries_checked: u64,
    pub failures: u64,
    pub sampled: bool,
    pub notes: Vec<String>,
}

impl CheckReport {
    pub fn new(identity: impl Into<String>) -> Self {
        CheckReport {
            identity: identity.into(),
            parameters: Map::new(),
            status: Status::ExactPass,
            max_discrepancy: Rational::zero(),
            failing_entries: Vec::new(),
            entries_checked: 0,
            failures: 0,
            sampled: false,
            notes: Vec::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl Serialize) -> Self {
        self.set_param(key, value);
        self
    }

    pub fn set_param(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.parameters.insert(key.to_string(), v);
    }

    /// Records one exact comparison.
    pub fn compare(&mut self, left: impl FnOnce() -> String, right: impl FnOnce() -> String, lhs: &Rational, rhs: &Rational) {
        self.entries_checked += 1;
        if lhs == rhs {
            return;
        }
        let d = (lhs - rhs).abs();
        if d > self.max_discrepancy {
            self.max_discrepancy = d;
        }
        self.failures += 1;
        if self.status == Status::ExactPass {
            self.status = Status::Fail;
        }
        if self.failing_entries.len() < MAX_FAILING_ENTRIES {
            self.failing_entries.push(FailingEntry {
                left: left(),
                right: right(),
                lhs: lhs.clone(),
                rhs: rhs.clone(),
            });
        }
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    /// Records a failed condition that is not an entrywise comparison.
    pub fn fail(&mut self, why: impl Into<String>) {
        self.failures += 1;
        if self.status == Status::ExactPass {
            self.status = Status::Fail;
        }
        self.notes.push(why.into());
    }

    pub fn mark_untrusted(&mut self, why: impl Into<String>) {
        self.status = Status::UntrustedBoundary;
        self.notes.push(why.into());
    }

    /// Folds another report's comparisons into this one.
    pub fn absorb(&mut self, other: &CheckReport) {
        self.entries_checked += other.entries_checked;
        self.failures += other.failures;
        if other.max_discrepancy > self.max_discrepancy {
            self.max_discrepancy = other.max_discrepancy.clone();
        }
        for e in &other.failing_entries {
            if self.failing_entries.len() < MAX_FAILING_ENTRIES {
                self.failing_entries.push(e.clone());
            }
        }
        self.status = match (self.status, other.status) {
            (Status::UntrustedBoundary, _) | (_, Status::UntrustedBoundary) => Status::UntrustedBoundary,
            (Status::Fail, _) | (_, Status::Fail) => Status::Fail,
            _ => Status::ExactPass,
        };
        self.sampled |= other.sampled;
        self.notes.extend(other.notes.iter().cloned());
    }

    pub fn passed(&self) -> bool {
        self.status == Status::ExactPass
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "identity: {}", self.identity)?;
        for (k, v) in &self.parameters {
            writeln!(f, "  {k}: {v}")?;
        }
        writeln!(
            f,
            "status: {}  checked: {}{}  failures: {}  max discrepancy: {}",
            self.status,
            self.entries_checked,
            if self.sampled { " (sampled)" } else { "" },
            self.failures,
            self.max_discrepancy
        )?;
        for e in &self.failing_entries {
            writeln!(f, "  {} | {}: lhs {} rhs {}", e.left, e.right, e.lhs, e.rhs)?;
        }
        for n in &self.notes {
            writeln!(f, "  note: {n}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_tracks_discrepancy() {
        let mut r = CheckReport::new("t");
        r.compare(|| "a".into(), || "b".into(), &Rational::one(), &Rational::one());
        assert!(r.passed());
        assert!(r.max_discrepancy.is_zero());
        r.compare(|| "a".into(), || "b".into(), &Rational::new(1, 2), &Rational::new(-1, 3));
        assert_eq!(r.status, Status::Fail);
        assert_eq!(r.max_discrepancy, Rational::new(5, 6));
        for _ in 0..30 {
            r.compare(|| "x".into(), || "y".into(), &Rational::zero(), &Rational::one());
        }
        assert_eq!(r.failing_entries.len(), MAX_FAILING_ENTRIES);
        assert_eq!(r.failures, 31);
        let json = serde_json::to_string(&r).unwrap();
        let back: CheckReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
        assert!(json.contains("\"status\":\"fail\""));
    }
}

//! Verification records.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// One asserted inequality `value ≤ bound + tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub id: String,
    /// Name of the statement being checked.
    pub anchor: String,
    pub value: f64,
    pub bound: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(id: impl Into<String>, anchor: impl Into<String>, value: f64, bound: f64, tolerance: f64) -> Self {
        // NaN never passes
        let pass = value <= bound + tolerance;
        Check { id: id.into(), anchor: anchor.into(), value, bound, tolerance, pass }
    }
}

/// A named value that is reported but not asserted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub id: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VerificationReport {
    pub suite: String,
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<Diagnostic>,
    #[serde(default)]
    pub environment: BTreeMap<String, String>,
    /// Seconds; only recorded on request so reports stay reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

impl VerificationReport {
    pub fn new(suite: impl Into<String>) -> Self {
        VerificationReport { suite: suite.into(), ..Default::default() }
    }

    pub fn check(&mut self, id: impl Into<String>, anchor: impl Into<String>, value: f64, bound: f64, tol: f64) {
        self.checks.push(Check::new(id, anchor, value, bound, tol));
    }

    pub fn diagnostic(&mut self, id: impl Into<String>, value: f64) {
        self.diagnostics.push(Diagnostic { id: id.into(), value });
    }

    pub fn env(&mut self, key: impl Into<String>, value: impl ToString) {
        self.environment.insert(key.into(), value.to_string());
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn find(&self, id: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.id == id)
    }

    /// Appends the checks of `other` with ids prefixed by `prefix/`.
    pub fn absorb(&mut self, prefix: &str, other: VerificationReport) {
        for mut c in other.checks {
            c.id = format!("{prefix}/{}", c.id);
            self.checks.push(c);
        }
        for mut d in other.diagnostics {
            d.id = format!("{prefix}/{}", d.id);
            self.diagnostics.push(d);
        }
    }

    /// Orders checks and diagnostics by id.
    pub fn sort(&mut self) {
        self.checks.sort_by(|a, b| a.id.cmp(&b.id));
        self.diagnostics.sort_by(|a, b| a.id.cmp(&b.id));
    }
}

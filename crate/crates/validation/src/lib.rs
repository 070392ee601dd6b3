//! Bookkeeping for the acceptance suite in `tests/acceptance.rs`.

use std::fmt;

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone)]
pub struct Check {
    pub id: &'static str,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} [{}] {}: {}", self.id, self.title, self.detail)
    }
}

/// Collects checks, printing each as it is recorded.
#[derive(Debug, Default)]
pub struct Suite {
    checks: Vec<Check>,
}

impl Suite {
    pub fn record(&mut self, id: &'static str, title: &'static str, passed: bool, detail: String) {
        let check = Check { id, title, passed, detail };
        println!("{check}");
        self.checks.push(check);
    }

    /// Extra measurement that is not itself a criterion.
    pub fn note(&self, id: &'static str, detail: impl fmt::Display) {
        println!("INFO [{id}] {detail}");
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn len(&self) -> usize {
        self.checks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.checks.is_empty()
    }
}

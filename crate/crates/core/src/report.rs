use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

/// Outcome of one quantitative check.
///
/// `verdict` is `Pass` iff `worst_margin <= threshold` (and the margin is a
/// number); the constructor enforces this.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub samples: usize,
    /// Fitted or empirical constants, keyed by name.
    pub constants: BTreeMap<String, f64>,
    pub worst_margin: f64,
    pub threshold: f64,
    pub verdict: Verdict,
    /// Grid, schedule, seed and solver parameters behind the numbers.
    pub provenance: BTreeMap<String, String>,
    pub notes: Vec<String>,
}

impl BoundReport {
    pub fn new(name: impl Into<String>, samples: usize, worst_margin: f64, threshold: f64) -> Self {
        let verdict = if worst_margin <= threshold { Verdict::Pass } else { Verdict::Fail };
        Self {
            name: name.into(),
            samples,
            constants: BTreeMap::new(),
            worst_margin,
            threshold,
            verdict,
            provenance: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn constant(mut self, key: &str, value: f64) -> Self {
        self.constants.insert(key.to_string(), value);
        self
    }

    pub fn provenance(mut self, key: &str, value: impl fmt::Display) -> Self {
        self.provenance.insert(key.to_string(), value.to_string());
        self
    }

    pub fn note(mut self, text: impl Into<String>) -> Self {
        self.notes.push(text.into());
        self
    }
}

impl fmt::Display for BoundReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = match self.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
        };
        write!(
            f,
            "{v} {} (margin {:.4e} vs threshold {:.4e}, {} samples)",
            self.name, self.worst_margin, self.threshold, self.samples
        )
    }
}

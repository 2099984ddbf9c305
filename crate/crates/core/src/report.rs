//! Run reports.
//!
//! Every check carries the measured value together with the bound it is judged
//! against, so the verdict can be recomputed from the document alone. Timings live in
//! a separate top-level field; everything else is a deterministic function of the
//! configuration.

use crate::config::ScenarioConfig;
use crate::error::Result;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    AtMost(f64),
    AtLeast(f64),
    GreaterThan(f64),
}

impl Bound {
    pub fn holds(&self, v: f64) -> bool {
        match *self {
            Bound::AtMost(b) => v <= b,
            Bound::AtLeast(b) => v >= b,
            Bound::GreaterThan(b) => v > b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    /// Neither the pass nor the fail bound holds.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub pass_if: Bound,
    /// When absent, anything that does not pass fails.
    pub fail_if: Option<Bound>,
    pub verdict: Outcome,
    /// The outcome depends on whether the chosen projection field is a symmetry.
    pub preset_dependent: bool,
    pub expected_failure: bool,
    pub residuals: BTreeMap<String, f64>,
}

impl Check {
    pub fn new(name: &str, value: f64, pass_if: Bound) -> Self {
        let mut c = Check {
            name: name.to_string(),
            value,
            pass_if,
            fail_if: None,
            verdict: Outcome::Fail,
            preset_dependent: false,
            expected_failure: false,
            residuals: BTreeMap::new(),
        };
        c.verdict = c.evaluate();
        c
    }

    pub fn with_fail(mut self, fail_if: Bound) -> Self {
        self.fail_if = Some(fail_if);
        self.verdict = self.evaluate();
        self
    }

    pub fn preset_dependent(mut self) -> Self {
        self.preset_dependent = true;
        self
    }

    pub fn residual(mut self, key: &str, v: f64) -> Self {
        self.residuals.insert(key.to_string(), v);
        self
    }

    /// Recomputes the verdict from value and bounds.
    pub fn evaluate(&self) -> Outcome {
        if self.value.is_finite() && self.pass_if.holds(self.value) {
            Outcome::Pass
        } else {
            match self.fail_if {
                Some(b) if self.value.is_finite() && !b.holds(self.value) => Outcome::Inconclusive,
                _ => Outcome::Fail,
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Outcome::Pass
    }

    /// Counts against the exit status.
    pub fn blocking(&self) -> bool {
        !self.passed() && !self.expected_failure
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub h: f64,
    pub error: f64,
    /// `log(e_prev/e) / log(h_prev/h)`; absent on the coarsest row or when an error is zero.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub name: String,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn new(name: &str, points: &[(f64, f64)]) -> Self {
        let rows = points
            .iter()
            .enumerate()
            .map(|(i, &(h, error))| {
                let order = (i > 0)
                    .then(|| {
                        let (h0, e0) = points[i - 1];
                        (e0 / error).ln() / (h0 / h).ln()
                    })
                    .filter(|o| o.is_finite());
                ConvergenceRow { h, error, order }
            })
            .collect();
        ConvergenceTable {
            name: name.to_string(),
            rows,
        }
    }

    pub fn min_order(&self) -> Option<f64> {
        self.rows.iter().filter_map(|r| r.order).reduce(f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the output directory.
    pub path: String,
    pub kind: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub checks: usize,
    pub passed: usize,
    pub failed: usize,
    pub inconclusive: usize,
    pub expected_failures: usize,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: ScenarioConfig,
    /// Sorted by name.
    pub checks: Vec<Check>,
    pub observations: BTreeMap<String, Value>,
    pub convergence: Vec<ConvergenceTable>,
    pub artifacts: Vec<Artifact>,
    pub summary: Summary,
    /// Wall-clock seconds per phase; excluded from reproducibility comparisons.
    pub timings: BTreeMap<String, f64>,
}

impl RunReport {
    pub fn new(command: &str, config: &ScenarioConfig) -> Self {
        RunReport {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config: config.clone(),
            checks: Vec::new(),
            observations: BTreeMap::new(),
            convergence: Vec::new(),
            artifacts: Vec::new(),
            summary: Summary {
                checks: 0,
                passed: 0,
                failed: 0,
                inconclusive: 0,
                expected_failures: 0,
                success: true,
            },
            timings: BTreeMap::new(),
        }
    }

    pub fn observe(&mut self, key: &str, value: impl Serialize) -> Result<()> {
        self.observations
            .insert(key.to_string(), serde_json::to_value(value)?);
        Ok(())
    }

    /// Marks expected failures, sorts checks by name and fills the summary.
    pub fn finish(&mut self, expect_failure: bool) {
        for c in &mut self.checks {
            c.verdict = c.evaluate();
            c.expected_failure = expect_failure && c.preset_dependent;
        }
        self.checks.sort_by(|a, b| a.name.cmp(&b.name));
        let count = |o: Outcome| self.checks.iter().filter(|c| c.verdict == o).count();
        self.summary = Summary {
            checks: self.checks.len(),
            passed: count(Outcome::Pass),
            failed: count(Outcome::Fail),
            inconclusive: count(Outcome::Inconclusive),
            expected_failures: self.checks.iter().filter(|c| c.expected_failure).count(),
            success: !self.checks.iter().any(Check::blocking),
        };
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// JSON with the timing field removed.
    pub fn reproducible_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Value::Object(m) = &mut v {
            m.remove("timings");
        }
        let mut s = serde_json::to_string_pretty(&v)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// Parses a report file and drops its timing field.
pub fn strip_timings(json: &str) -> Result<String> {
    let mut v: Value = serde_json::from_str(json)?;
    if let Value::Object(m) = &mut v {
        m.remove("timings");
    }
    Ok(serde_json::to_string_pretty(&v)?)
}

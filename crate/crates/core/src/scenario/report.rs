use serde::Serialize;
use serde_json::Value;

use super::config::Expectation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRecord {
    pub name: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub anchor: String,
    pub residual: Option<f64>,
    pub tolerance: f64,
    pub expect: Expectation,
    /// Raw result before the expectation is applied.
    pub outcome: Verdict,
    pub verdict: Verdict,
    pub details: Value,
    pub error: Option<ErrorRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Environment {
    pub seed: u64,
    pub step: f64,
    pub points: usize,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub scenario: String,
    pub anchor: String,
    pub environment: Environment,
    pub records: Vec<CheckRecord>,
    pub overall: Verdict,
    /// Seconds since the Unix epoch; the only non-deterministic field.
    pub generated_unix: u64,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.overall == Verdict::Pass
    }

    /// 0 on pass, 2 if any check hit an unexpected error, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else if self.records.iter().any(|r| r.verdict == Verdict::Error) {
            2
        } else {
            1
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// JSON with the timestamp zeroed, for byte comparison.
    pub fn canonical_json(&self) -> String {
        let mut r = self.clone();
        r.generated_unix = 0;
        r.to_json()
    }

    pub fn record(&self, name: &str) -> Option<&CheckRecord> {
        self.records.iter().find(|r| r.name == name)
    }
}

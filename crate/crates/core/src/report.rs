use serde::{Deserialize, Serialize};

/// A single failed instance of a law, with the data that exhibits it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub witness: serde_json::Value,
    pub deviation: f64,
}

/// Outcome of a law checker: how many instances were tested and which failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub law: String,
    pub samples: usize,
    pub violations: Vec<Violation>,
    /// Largest deviation seen over all samples, including passing ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_deviation: Option<f64>,
}

impl Report {
    pub fn new(law: impl Into<String>) -> Self {
        Report {
            law: law.into(),
            samples: 0,
            violations: Vec::new(),
            max_deviation: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// Records one tested instance. A deviation above `tol` becomes a violation.
    pub fn record(&mut self, deviation: f64, tol: f64, witness: impl FnOnce() -> serde_json::Value) {
        self.samples += 1;
        let worst = self.max_deviation.unwrap_or(0.0);
        if deviation > worst || deviation.is_nan() {
            self.max_deviation = Some(deviation);
        } else if self.max_deviation.is_none() {
            self.max_deviation = Some(deviation);
        }
        if !(deviation <= tol) {
            self.violations.push(Violation {
                witness: witness(),
                deviation,
            });
        }
    }

    /// Records a boolean condition; failures get deviation 1.
    pub fn check(&mut self, ok: bool, witness: impl FnOnce() -> serde_json::Value) {
        self.record(if ok { 0.0 } else { 1.0 }, 0.5, witness);
    }

    /// Folds another report's samples and violations into this one.
    pub fn absorb(&mut self, other: Report) {
        self.samples += other.samples;
        if let Some(d) = other.max_deviation {
            if self.max_deviation.map_or(true, |m| d > m || d.is_nan()) {
                self.max_deviation = Some(d);
            }
        }
        self.violations.extend(other.violations);
    }

    pub fn max_deviation(&self) -> f64 {
        self.max_deviation.unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn records_violations_above_tolerance() {
        let mut r = Report::new("law");
        r.record(1e-12, 1e-10, || json!("a"));
        r.record(1e-3, 1e-10, || json!("b"));
        assert_eq!(r.samples, 2);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.max_deviation(), 1e-3);
        assert!(!r.passed());
    }

    #[test]
    fn nan_deviation_is_a_violation() {
        let mut r = Report::new("law");
        r.record(f64::NAN, 1.0, || json!(null));
        assert!(!r.passed());
    }

    #[test]
    fn serializes_to_schema() {
        let mut r = Report::new("functoriality");
        r.check(false, || json!({"slice": [1]}));
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["law"], "functoriality");
        assert_eq!(v["samples"], 1);
        assert_eq!(v["violations"][0]["deviation"], 1.0);
    }
}

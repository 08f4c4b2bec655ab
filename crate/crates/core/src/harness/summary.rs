//! Run summaries: one entry per checked claim.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::ExperimentConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub id: String,
    pub claim: String,
    pub target: Value,
    pub measured: Value,
    pub tolerance: f64,
    /// How `measured`, `target` and `tolerance` are compared.
    pub comparison: String,
    pub pass: bool,
    /// Reported only when false; does not affect the exit code.
    pub asserted: bool,
    /// Where the target comes from: a formula, an oracle or an empirical threshold.
    pub provenance: String,
}

fn num(v: f64) -> Value {
    // NaN and infinities are not JSON numbers
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

impl Claim {
    #[allow(clippy::too_many_arguments)]
    fn new(id: &str, claim: &str, target: Value, measured: Value, tolerance: f64, comparison: &str, pass: bool, provenance: &str) -> Self {
        Self {
            id: id.into(),
            claim: claim.into(),
            target,
            measured,
            tolerance,
            comparison: comparison.into(),
            pass,
            asserted: true,
            provenance: provenance.into(),
        }
    }

    /// `|measured − target| ≤ tolerance`
    pub fn abs(id: &str, claim: &str, target: f64, measured: f64, tolerance: f64, provenance: &str) -> Self {
        let pass = (measured - target).abs() <= tolerance;
        Self::new(id, claim, num(target), num(measured), tolerance, "abs", pass, provenance)
    }

    /// `|measured − target| ≤ tolerance · |target|`
    pub fn rel(id: &str, claim: &str, target: f64, measured: f64, tolerance: f64, provenance: &str) -> Self {
        let pass = (measured - target).abs() <= tolerance * target.abs();
        Self::new(id, claim, num(target), num(measured), tolerance, "rel", pass, provenance)
    }

    /// `measured ≤ bound`
    pub fn at_most(id: &str, claim: &str, measured: f64, bound: f64, provenance: &str) -> Self {
        Self::new(id, claim, num(bound), num(measured), 0.0, "le", measured <= bound, provenance)
    }

    /// `measured ≥ bound`
    pub fn at_least(id: &str, claim: &str, measured: f64, bound: f64, provenance: &str) -> Self {
        Self::new(id, claim, num(bound), num(measured), 0.0, "ge", measured >= bound, provenance)
    }

    /// `‖measured − target‖₂ ≤ tolerance`
    pub fn near(id: &str, claim: &str, target: &[f64], measured: &[f64], tolerance: f64, provenance: &str) -> Self {
        let dist = if target.len() == measured.len() {
            target.iter().zip(measured).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
        } else {
            f64::NAN
        };
        let arr = |v: &[f64]| Value::Array(v.iter().map(|x| num(*x)).collect());
        Self::new(id, claim, arr(target), arr(measured), tolerance, "dist", dist <= tolerance, provenance)
    }

    /// Exact match of two labels, for categorical outcomes.
    pub fn label(id: &str, claim: &str, target: &str, measured: &str, provenance: &str) -> Self {
        Self::new(id, claim, json!(target), json!(measured), 0.0, "eq", target == measured, provenance)
    }

    pub fn reported(mut self) -> Self {
        self.asserted = false;
        self
    }

    pub fn line(&self) -> String {
        let status = match (self.asserted, self.pass) {
            (true, true) => "PASS",
            (true, false) => "FAIL",
            (false, _) => "info",
        };
        format!("[{status}] {}: {} (measured {}, target {} {})", self.id, self.claim, self.measured, self.comparison, self.target)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub experiment: String,
    pub config: ExperimentConfig,
    pub claims: Vec<Claim>,
    pub notes: Vec<String>,
    /// All asserted claims passed.
    pub pass: bool,
}

impl RunSummary {
    pub fn new(config: &ExperimentConfig) -> Self {
        Self {
            experiment: config.experiment.as_str().into(),
            config: config.clone(),
            claims: Vec::new(),
            notes: Vec::new(),
            pass: true,
        }
    }

    pub fn push(&mut self, claim: Claim) {
        if claim.asserted && !claim.pass {
            self.pass = false;
        }
        self.claims.push(claim);
    }

    pub fn note(&mut self, note: impl Into<String>) {
        let note = note.into();
        log::info!("{note}");
        self.notes.push(note);
    }

    pub fn claim(&self, id: &str) -> Option<&Claim> {
        self.claims.iter().find(|c| c.id == id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comparisons() {
        assert!(Claim::abs("a", "", 1.0, 1.05, 0.1, "").pass);
        assert!(!Claim::rel("a", "", 1.0, 1.05, 0.01, "").pass);
        assert!(Claim::near("a", "", &[0.0, 0.0], &[0.03, 0.04], 0.05, "").pass);
        assert!(!Claim::at_most("a", "", f64::NAN, 1.0, "").pass);
        assert_eq!(Claim::at_most("a", "", f64::NAN, 1.0, "").measured, Value::Null);
    }

    #[test]
    fn reported_claims_do_not_fail_the_run() {
        let cfg = crate::harness::ExperimentConfig::defaults(crate::harness::Experiment::Toy4d, None);
        let mut s = RunSummary::new(&cfg);
        s.push(Claim::at_most("x", "", 2.0, 1.0, "").reported());
        assert!(s.pass);
        s.push(Claim::at_most("y", "", 2.0, 1.0, ""));
        assert!(!s.pass);
    }
}

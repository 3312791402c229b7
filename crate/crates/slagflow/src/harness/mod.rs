//! Experiment orchestration: configuration, scenario pipelines, output
//! persistence and the acceptance suite.

mod acceptance;
mod config;
pub mod persist;
mod scenarios;

pub use acceptance::{acceptance, AcceptanceSummary, CriterionOutcome, Selection, CRITERIA};
pub use config::{
    AmbientModel, AmbientRef, DtDoc, ExperimentConfig, FibrationSettings, LagrangianSpec, LmcfDoc, MoserSettings,
    SCENARIOS,
};
pub use scenarios::run_scenario;

use crate::ambient::AmbientError;
use crate::fibration::FibrationError;
use crate::lagmesh::LagError;
use crate::lmcf::LmcfError;
use crate::moser::MoserError;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModuleError {
    #[error(transparent)]
    Ambient(#[from] AmbientError),
    #[error(transparent)]
    Mesh(#[from] LagError),
    #[error(transparent)]
    Moser(#[from] MoserError),
    #[error(transparent)]
    Lmcf(#[from] LmcfError),
    #[error(transparent)]
    Fibration(#[from] FibrationError),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("unknown scenario {id:?}; known scenarios: {}", known.join(", "))]
    UnknownScenario { id: String, known: Vec<String> },
    #[error("unknown acceptance criterion {0:?}; known: A1 … A15")]
    UnknownCriterion(String),
    #[error("{}: {msg}", path.display())]
    Io { path: PathBuf, msg: String },
    #[error("mesh snapshot line {line}: {msg}")]
    Snapshot { line: usize, msg: String },
    #[error("scenario {scenario}, stage {stage}: {source}")]
    Stage {
        scenario: String,
        stage: &'static str,
        #[source]
        source: ModuleError,
    },
}

/// Attaches scenario context to a module error.
pub(crate) trait StageContext<T> {
    fn stage(self, scenario: &str, stage: &'static str) -> Result<T, HarnessError>;
}

impl<T, E: Into<ModuleError>> StageContext<T> for Result<T, E> {
    fn stage(self, scenario: &str, stage: &'static str) -> Result<T, HarnessError> {
        self.map_err(|e| HarnessError::Stage { scenario: scenario.into(), stage, source: e.into() })
    }
}

/// One measured quantity against its bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub pass: bool,
}

impl Check {
    pub fn between(name: &str, value: f64, lower: Option<f64>, upper: Option<f64>) -> Check {
        let pass = value.is_finite() && lower.is_none_or(|l| value >= l) && upper.is_none_or(|u| value <= u);
        Check { name: name.into(), value, target: None, lower, upper, pass }
    }

    pub fn below(name: &str, value: f64, upper: f64) -> Check {
        Check::between(name, value, None, Some(upper))
    }

    pub fn above(name: &str, value: f64, lower: f64) -> Check {
        Check::between(name, value, Some(lower), None)
    }

    /// |value − target| ≤ rel·|target|
    pub fn relative(name: &str, value: f64, target: f64, rel: f64) -> Check {
        let w = rel * target.abs();
        Check { target: Some(target), ..Check::between(name, value, Some(target - w), Some(target + w)) }
    }

    pub fn absolute(name: &str, value: f64, target: f64, tol: f64) -> Check {
        Check { target: Some(target), ..Check::between(name, value, Some(target - tol), Some(target + tol)) }
    }

    /// Recorded value without bounds.
    pub fn info(name: &str, value: f64) -> Check {
        Check { name: name.into(), value, target: None, lower: None, upper: None, pass: true }
    }

    pub fn flag(name: &str, ok: bool) -> Check {
        Check {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            target: None,
            lower: Some(1.0),
            upper: None,
            pass: ok,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub pass: bool,
    pub checks: Vec<Check>,
    /// Output files, relative to the run directory.
    pub artifacts: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl LedgerEntry {
    pub fn new(checks: Vec<Check>, artifacts: Vec<String>) -> Self {
        LedgerEntry { pass: !checks.is_empty() && checks.iter().all(|c| c.pass), checks, artifacts, error: None }
    }

    pub fn failed(error: String) -> Self {
        LedgerEntry { pass: false, checks: Vec::new(), artifacts: Vec::new(), error: Some(error) }
    }

    pub fn failing(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect()
    }
}

/// Criterion id → entry.
pub type Ledger = BTreeMap<String, LedgerEntry>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario: String,
    /// SHA-256 of the canonical config text.
    pub config_hash: String,
    pub output_dir: PathBuf,
    /// Output kind → file name, in the order written.
    pub outputs: Vec<(String, String)>,
    pub ledger: Ledger,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunRecord {
    pub fn pass(&self) -> bool {
        self.error.is_none() && self.ledger.values().all(|e| e.pass)
    }

    /// Ledger entries whose artifacts are missing from the outputs.
    pub fn dangling_artifacts(&self) -> Vec<String> {
        self.ledger
            .values()
            .flat_map(|e| e.artifacts.iter())
            .filter(|a| !self.outputs.iter().any(|(_, f)| f == *a))
            .cloned()
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checks_and_entries() {
        assert!(Check::relative("x", 1.01, 1.0, 0.02).pass);
        assert!(!Check::relative("x", 1.03, 1.0, 0.02).pass);
        assert!(!Check::below("x", f64::NAN, 1.0).pass);
        assert!(Check::between("x", 4.0, Some(3.5), Some(4.5)).pass);
        let e = LedgerEntry::new(vec![Check::flag("a", true), Check::above("b", -1.0, 0.0)], vec![]);
        assert!(!e.pass);
        assert_eq!(e.failing(), vec!["b"]);
        assert!(!LedgerEntry::new(vec![], vec![]).pass);
    }
}

//! Structural checkers (USO, acyclicity) and behavioral checkers (growth,
//! trace properties).

mod behavior;
mod structure;

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use behavior::{check_growth, check_trace_properties, growth_rows, GrowthRow, LevelLength};
pub use structure::{
    check_acyclic, check_uso_exhaustive, check_uso_sampled, face_population, materialize_par,
    pair_violates, sample_face, UsoMode, DEFAULT_ACYCLIC_CAP, DEFAULT_USO_CAP, MAX_SAMPLED_FACE_DIM,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VerifyError {
    #[error("dimension {dim} exceeds the exhaustive cap {cap}; use sampled mode")]
    CapExceeded { dim: usize, cap: usize },
    #[error("invalid parameters: {0}")]
    BadParameters(String),
}

/// Reproducible evidence for a failed check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    Face {
        anchor: String,
        free: String,
        sinks: Vec<String>,
    },
    Pair {
        first: String,
        second: String,
    },
    Cycle {
        vertices: Vec<String>,
    },
    Step {
        step: usize,
        detail: String,
    },
    Level {
        level: usize,
        detail: String,
    },
    Vertex {
        vertex: String,
        detail: String,
    },
    Walk {
        visited: Vec<String>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

impl CheckResult {
    pub fn pass(name: impl Into<String>, detail: impl Into<String>) -> Self {
        CheckResult {
            name: name.into(),
            passed: true,
            detail: detail.into(),
            witness: None,
        }
    }

    pub fn fail(name: impl Into<String>, detail: impl Into<String>, witness: Witness) -> Self {
        CheckResult {
            name: name.into(),
            passed: false,
            detail: detail.into(),
            witness: Some(witness),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub mode: String,
    pub checks: Vec<CheckResult>,
    pub elapsed_ms: u64,
}

impl VerificationReport {
    pub fn new(mode: impl Into<String>) -> Self {
        VerificationReport {
            mode: mode.into(),
            checks: Vec::new(),
            elapsed_ms: 0,
        }
    }

    pub fn push(&mut self, check: CheckResult) {
        self.checks.push(check);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// Appends the checks of `other`; timings add up.
    pub fn merge(&mut self, other: VerificationReport) {
        self.checks.extend(other.checks);
        self.elapsed_ms += other.elapsed_ms;
    }

    fn timed<F: FnOnce(&mut Self)>(mode: &str, f: F) -> Self {
        let start = Instant::now();
        let mut r = VerificationReport::new(mode);
        f(&mut r);
        r.elapsed_ms = start.elapsed().as_millis() as u64;
        r
    }
}

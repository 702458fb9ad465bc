//! Solver outcome reporting shared by all algorithms.

use crate::metrics::{Beamformers, LiftedSolution, UtilityBreakdown};
use serde::{Deserialize, Serialize};

/// Terminal status of one solver run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveOutcome {
    /// Optimal within the algorithm's stated tolerance.
    Optimal,
    /// Feasible solution without a global optimality certificate.
    Feasible,
    /// No feasible solution found; trial counts as an outage.
    Infeasible,
    /// Iteration budget exhausted; reported point is still feasible.
    MaxIter,
}

/// One point of an iteration trace (bounds or objective progression).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub lower: f64,
    pub upper: f64,
}

/// Normalized slack of one audited constraint; negative means violated.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstraintSlack {
    pub name: String,
    pub slack: f64,
}

/// Full record of one solver run on one scenario realization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub algorithm: String,
    pub outcome: SolveOutcome,
    /// Utility of the reported solution (0 on outage).
    pub utility: f64,
    /// Certified upper bound on the optimum, when the algorithm provides one.
    pub upper_bound: Option<f64>,
    pub activation: Vec<bool>,
    pub breakdown: Option<UtilityBreakdown>,
    pub slacks: Vec<ConstraintSlack>,
    pub iterations: usize,
    pub trace: Vec<TracePoint>,
    pub runtime_s: f64,
    #[serde(skip)]
    pub solution: Option<LiftedSolution>,
    #[serde(skip)]
    pub beamformers: Option<Beamformers>,
}

impl SolveReport {
    /// Empty infeasible (outage) report.
    pub fn outage(algorithm: &str, num_bs: usize, runtime_s: f64) -> Self {
        SolveReport {
            algorithm: algorithm.to_string(),
            outcome: SolveOutcome::Infeasible,
            utility: 0.0,
            upper_bound: None,
            activation: vec![false; num_bs],
            breakdown: None,
            slacks: Vec::new(),
            iterations: 0,
            trace: Vec::new(),
            runtime_s,
            solution: None,
            beamformers: None,
        }
    }

    pub fn is_outage(&self) -> bool {
        self.outcome == SolveOutcome::Infeasible
    }
}

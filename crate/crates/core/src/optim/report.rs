use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::losses::LossBreakdown;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIters,
    Threshold,
    Stall,
}

/// Loss trace and outcome of one optimisation run.
///
/// `trace[k]` is the loss at the k-th evaluated iterate; the parameters returned
/// alongside the report are those of the last entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimReport {
    pub trace: Vec<LossBreakdown>,
    pub stop_reason: StopReason,
    /// Adam steps taken.
    pub iterations: usize,
    pub final_metrics: BTreeMap<String, f64>,
    /// Seconds; excluded from determinism comparisons.
    pub wall_time: f64,
}

impl OptimReport {
    pub fn totals(&self) -> Vec<f64> {
        self.trace.iter().map(|b| b.total).collect()
    }

    pub fn last(&self) -> Option<&LossBreakdown> {
        self.trace.last()
    }

    /// The report without wall time, for reproducibility checks.
    pub fn metrics_only(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serialises");
        if let Some(o) = v.as_object_mut() {
            o.remove("wall_time");
        }
        v
    }
}

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossTerm {
    pub weight: f64,
    pub value: f64,
}

/// Named loss terms and their weighted total.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub terms: BTreeMap<String, LossTerm>,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a term; the total accumulates in insertion order.
    pub fn push(&mut self, name: &str, weight: f64, value: f64) {
        self.terms
            .insert(name.to_owned(), LossTerm { weight, value });
        self.total += weight * value;
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.terms.get(name).map(|t| t.value)
    }
}

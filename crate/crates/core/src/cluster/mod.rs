//! K-means on fused representations and clustering metrics.

mod hungarian;
mod kmeans;
mod metrics;

pub use hungarian::{assignment_cost, hungarian};
pub use kmeans::{kmeans, KMeansParams};
pub use metrics::{acc, ari, contingency, nmi};

use serde::{Deserialize, Serialize};

use crate::Matrix;

/// Outcome of a K-means run, optionally scored against ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    pub assignments: Vec<usize>,
    pub centers: Matrix,
    pub inertia: f64,
    /// Inertia after each assignment step of the winning restart.
    pub inertia_trace: Vec<f64>,
    pub metrics: Option<Metrics>,
    pub seed: u64,
    pub restarts: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub acc: f64,
    pub nmi: f64,
    pub ari: f64,
}

impl Metrics {
    pub fn compute(pred: &[usize], truth: &[usize]) -> crate::Result<Self> {
        Ok(Self {
            acc: acc(pred, truth)?,
            nmi: nmi(pred, truth)?,
            ari: ari(pred, truth)?,
        })
    }
}

impl ClusterResult {
    pub fn score(&mut self, truth: &[usize]) -> crate::Result<Metrics> {
        let m = Metrics::compute(&self.assignments, truth)?;
        self.metrics = Some(m);
        Ok(m)
    }
}

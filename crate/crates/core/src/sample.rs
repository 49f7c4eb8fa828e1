use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Where a batch of points came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub sampler: String,
    pub iteration: usize,
    pub seed: u64,
}

/// `n` points in `R^D`, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub points: Array2<f64>,
    pub provenance: Provenance,
}

impl SampleBatch {
    pub fn new(points: Array2<f64>, sampler: impl Into<String>, iteration: usize, seed: u64) -> Self {
        Self {
            points,
            provenance: Provenance {
                sampler: sampler.into(),
                iteration,
                seed,
            },
        }
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }
}

//! MAPE scoring and seeded Monte-Carlo experiments over estimators.

mod experiments;
mod report;

use serde::{Deserialize, Serialize};

use crate::clustering::MlcConfig;
use crate::error::{invalid, Error, Result};
use crate::lstm::TrainConfig;

pub use experiments::{
    run_mlc_experiment, run_spatial_experiment, run_temporal_experiment, temporal_pipeline, TemporalScore,
};
pub use report::{write_fig2_csv, write_fig3_csv, write_fig7_csv, write_results_csv};

/// Denominator floor for idle slots: `0/0` scores 0 rather than NaN.
pub const MAPE_FLOOR: f64 = 1e-6;

/// Mean absolute percentage error, in percent.
pub fn mape(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    if actual.len() != predicted.len() {
        return Err(Error::DimensionMismatch { expected: actual.len(), got: predicted.len() });
    }
    if actual.is_empty() {
        return Err(Error::EmptyInput("MAPE inputs"));
    }
    let sum: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (p - a).abs() / a.max(MAPE_FLOOR))
        .sum();
    Ok(100.0 * sum / actual.len() as f64)
}

/// Per-trial MAPE values and their summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationError {
    pub trials: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation over trials.
    pub std: f64,
}

impl EstimationError {
    pub fn from_trials(trials: Vec<f64>) -> Result<Self> {
        if trials.is_empty() {
            return Err(Error::EmptyInput("estimation trials"));
        }
        let n = trials.len() as f64;
        let mean = trials.iter().sum::<f64>() / n;
        let std = (trials.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        Ok(Self { trials, mean, std })
    }

    pub fn count(&self) -> usize {
        self.trials.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialEstimator {
    /// Mean of the `N` nearest cells.
    DistanceUnweighted,
    /// Inverse-distance-power mean of the `N` nearest cells.
    DistanceWeighted,
    /// Mean of `N` random cells.
    RandomUnweighted,
    /// Inverse-distance-power mean of `N` random cells.
    RandomWeighted,
}

impl SpatialEstimator {
    pub const ALL: [SpatialEstimator; 4] = [
        Self::DistanceUnweighted,
        Self::DistanceWeighted,
        Self::RandomUnweighted,
        Self::RandomWeighted,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::DistanceUnweighted => "distance_unweighted",
            Self::DistanceWeighted => "distance_weighted",
            Self::RandomUnweighted => "random_unweighted",
            Self::RandomWeighted => "random_weighted",
        }
    }

    pub fn is_weighted(self) -> bool {
        matches!(self, Self::DistanceWeighted | Self::RandomWeighted)
    }
}

/// Sweep axes and Monte-Carlo settings shared by all experiments.
/// Defaults follow the reference setup (300 iterations, one sleeping cell).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub estimators: Vec<SpatialEstimator>,
    /// Neighbor counts `N`.
    pub neighbor_counts: Vec<usize>,
    /// Weighting exponents `n`.
    pub exponents: Vec<f64>,
    /// MLC layer counts `L`.
    pub layers: Vec<usize>,
    pub windows: Vec<usize>,
    /// LSTM hidden-unit counts.
    pub units: Vec<usize>,
    pub iterations: usize,
    pub sleeping_per_iteration: usize,
    /// Cells whose history the temporal experiment trains on.
    pub temporal_cells: usize,
    pub zscore_threshold: f64,
    pub train_fraction: f64,
    pub mlc: MlcConfig,
    pub train: TrainConfig,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            estimators: SpatialEstimator::ALL.to_vec(),
            neighbor_counts: vec![10, 25, 50, 100, 150, 200],
            exponents: vec![1.0, 3.0, 5.0, 10.0],
            layers: (1..=7).collect(),
            windows: vec![4, 8, 12],
            units: vec![5, 10, 20],
            iterations: 300,
            sleeping_per_iteration: 1,
            temporal_cells: 1,
            zscore_threshold: 2.5,
            train_fraction: 0.6,
            mlc: MlcConfig::default(),
            train: TrainConfig::default(),
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.sleeping_per_iteration == 0 {
            return Err(invalid("iterations and sleeping cells per iteration must be at least 1"));
        }
        if self.exponents.iter().any(|n| !(*n > 0.0 && n.is_finite())) {
            return Err(invalid("weighting exponents must be positive"));
        }
        if self.neighbor_counts.contains(&0) || self.layers.contains(&0) || self.windows.contains(&0) || self.units.contains(&0) {
            return Err(invalid("sweep values must be positive"));
        }
        Ok(())
    }
}

/// One aggregated table row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub estimator: String,
    pub param1: String,
    pub param2: String,
    pub error: EstimationError,
}

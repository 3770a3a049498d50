use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mape, EstimationError, ExperimentConfig, ResultRow, SpatialEstimator};
use crate::clustering::{elbow_select_g, mlc_estimate_profiles, ClusterCount};
use crate::error::{invalid, Error, Result};
use crate::lstm::{evaluate_mae, predict, train, LstmParams, TrainConfig};
use crate::seed;
use crate::spatial::{
    estimate_distance_weighted, estimate_unweighted_mean, select_nearest_active, select_random_active,
    NeighborSet, WeightingConfig,
};
use crate::traffic::{make_windows_excluding, split_train_test, zscore_outliers, CellId, TrafficGrid};

/// Distinct cells put to sleep in iteration `it`, ascending.
fn draw_sleeping(n_cells: usize, count: usize, seed: u64, it: usize) -> Vec<usize> {
    let mut picked = index::sample(&mut seed::rng_for(seed, it as u64), n_cells, count).into_vec();
    picked.sort_unstable();
    picked
}

fn profiles_of(grid: &TrafficGrid) -> Vec<Vec<f64>> {
    grid.day_profiles().into_iter().map(|p| p.0).collect()
}

fn fmt_param(v: f64) -> String {
    format!("{v}")
}

#[derive(Clone, Copy, Debug)]
struct SpatialKey {
    estimator: SpatialEstimator,
    n: Option<f64>,
    count: usize,
}

/// Scores every configured spatial estimator over `(n, N)` on day profiles:
/// each iteration puts fresh cells to sleep and estimates their whole
/// profile slot by slot from active cells only. One trial per sleeping cell.
pub fn run_spatial_experiment(grid: &TrafficGrid, cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let n_cells = grid.len();
    let k = cfg.sleeping_per_iteration;
    if k >= n_cells {
        return Err(invalid(format!("{k} sleeping cells leave no active cell among {n_cells}")));
    }
    if let Some(&big) = cfg.neighbor_counts.iter().find(|&&c| c > n_cells - k) {
        return Err(invalid(format!("{big} neighbors requested but only {} cells stay active", n_cells - k)));
    }
    if cfg.estimators.is_empty() || cfg.neighbor_counts.is_empty() {
        return Err(invalid("spatial experiment needs estimators and neighbor counts"));
    }
    if cfg.estimators.iter().any(|e| e.is_weighted()) && cfg.exponents.is_empty() {
        return Err(invalid("weighted estimators need at least one exponent"));
    }

    let mut keys = Vec::new();
    for &estimator in &cfg.estimators {
        let exps: Vec<Option<f64>> = if estimator.is_weighted() {
            cfg.exponents.iter().map(|&n| Some(n)).collect()
        } else {
            vec![None]
        };
        for n in exps {
            for &count in &cfg.neighbor_counts {
                keys.push(SpatialKey { estimator, n, count });
            }
        }
    }
    keys.sort_by(|a, b| {
        a.estimator
            .name()
            .cmp(b.estimator.name())
            .then(a.n.unwrap_or(0.0).total_cmp(&b.n.unwrap_or(0.0)))
            .then(a.count.cmp(&b.count))
    });

    let profiles = profiles_of(grid);
    let spd = grid.slots_per_day();
    let by_slot: Vec<Vec<f64>> = (0..spd).map(|t| profiles.iter().map(|p| p[t]).collect()).collect();

    let per_iteration = (0..cfg.iterations)
        .into_par_iter()
        .map(|it| -> Result<Vec<Vec<f64>>> {
            let sleeping = draw_sleeping(n_cells, k, cfg.seed, it);
            let mut active = vec![true; n_cells];
            sleeping.iter().for_each(|&s| active[s] = false);
            let it_seed = seed::derive(cfg.seed, it as u64);
            let mut errors = vec![Vec::with_capacity(k); keys.len()];
            for &s in &sleeping {
                let target = grid.cells()[s].id;
                for (key, errs) in keys.iter().zip(errors.iter_mut()) {
                    let base = match key.estimator {
                        SpatialEstimator::DistanceUnweighted | SpatialEstimator::DistanceWeighted => {
                            select_nearest_active(grid, target, key.count, &by_slot[0], Some(&active))?
                        }
                        SpatialEstimator::RandomUnweighted | SpatialEstimator::RandomWeighted => {
                            let draw = seed::derive(it_seed, ((s as u64) << 32) | key.count as u64);
                            select_random_active(grid, target, key.count, &by_slot[0], Some(&active), draw)?
                        }
                    };
                    let estimate = |ns: &NeighborSet| match key.n {
                        Some(n) => estimate_distance_weighted(ns, WeightingConfig::new(n)?),
                        None => estimate_unweighted_mean(ns),
                    };
                    let predicted = by_slot
                        .iter()
                        .map(|loads| estimate(&base.with_loads(grid, loads)?))
                        .collect::<Result<Vec<_>>>()?;
                    errs.push(mape(&profiles[s], &predicted)?);
                }
            }
            Ok(errors)
        })
        .collect::<Result<Vec<_>>>()?;

    keys.iter()
        .enumerate()
        .map(|(i, key)| {
            let trials: Vec<f64> = per_iteration.iter().flat_map(|e| e[i].iter().copied()).collect();
            Ok(ResultRow {
                experiment: "spatial".into(),
                estimator: key.estimator.name().into(),
                param1: key.n.map(fmt_param).unwrap_or_default(),
                param2: key.count.to_string(),
                error: EstimationError::from_trials(trials)?,
            })
        })
        .collect()
}

/// Scores MLC for each layer count in `cfg.layers`. A single run with the
/// largest count yields every smaller count as a prefix of its layers.
pub fn run_mlc_experiment(grid: &TrafficGrid, cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let n_cells = grid.len();
    let k = cfg.sleeping_per_iteration;
    if k >= n_cells {
        return Err(invalid(format!("{k} sleeping cells leave no active cell among {n_cells}")));
    }
    let max_layers = *cfg.layers.iter().max().ok_or_else(|| invalid("layer sweep is empty"))?;
    let ids: Vec<CellId> = grid.ids().collect();
    let profiles = profiles_of(grid);
    let mut mlc = cfg.mlc.clone();
    mlc.layers = max_layers;
    if let ClusterCount::Elbow { min, max } = mlc.clusters {
        mlc.clusters = ClusterCount::Fixed(elbow_select_g(&profiles, min..=max.min(n_cells), cfg.seed)?.g);
    }
    let g = match mlc.clusters {
        ClusterCount::Fixed(g) => g,
        ClusterCount::Elbow { .. } => unreachable!("resolved above"),
    };
    let spd = grid.slots_per_day();

    // [iteration][layer][sleeping cell] → MAPE
    let per_iteration = (0..cfg.iterations)
        .into_par_iter()
        .map(|it| -> Result<Vec<Vec<f64>>> {
            let sleeping = draw_sleeping(n_cells, k, cfg.seed, it);
            let sleeping_ids: Vec<CellId> = sleeping.iter().map(|&s| ids[s]).collect();
            let run_cfg = crate::clustering::MlcConfig {
                seed: seed::derive(cfg.seed ^ mlc.seed, it as u64),
                ..mlc.clone()
            };
            // [slot] → outcome
            let outcomes = (0..spd)
                .into_par_iter()
                .map(|t| mlc_estimate_profiles(&ids, &profiles, &sleeping_ids, t, &run_cfg))
                .collect::<Result<Vec<_>>>()?;
            (0..max_layers)
                .map(|l| {
                    sleeping
                        .iter()
                        .enumerate()
                        .map(|(j, &s)| {
                            let predicted: Vec<f64> = outcomes.iter().map(|o| o.layers[l].estimates[j]).collect();
                            mape(&profiles[s], &predicted)
                        })
                        .collect()
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut layers = cfg.layers.clone();
    layers.sort_unstable();
    layers.dedup();
    layers
        .into_iter()
        .map(|l| {
            let trials: Vec<f64> = per_iteration.iter().flat_map(|e| e[l - 1].iter().copied()).collect();
            Ok(ResultRow {
                experiment: "mlc".into(),
                estimator: "mlc".into(),
                param1: l.to_string(),
                param2: g.to_string(),
                error: EstimationError::from_trials(trials)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemporalScore {
    pub test_mape: f64,
    pub train_samples: usize,
    pub test_samples: usize,
    pub initial_train_mae: f64,
    pub final_train_mae: f64,
    pub params: LstmParams,
}

/// Outlier flagging, windowing, seeded 60/40-style split, training and
/// test scoring for one load series.
///
/// Windows touching a z-score outlier are dropped whole, so every kept
/// window is a contiguous stretch of the original series.
pub fn temporal_pipeline(
    values: &[f64],
    window: usize,
    train_cfg: &TrainConfig,
    zscore_threshold: f64,
    train_fraction: f64,
    split_seed: u64,
) -> Result<TemporalScore> {
    let outliers = zscore_outliers(values, zscore_threshold)?;
    let samples = make_windows_excluding(values, window, &outliers)?;
    let (train_set, test_set) = split_train_test(samples, train_fraction, split_seed)?;
    if train_set.is_empty() || test_set.is_empty() {
        return Err(Error::SeriesTooShort {
            len: values.len(),
            reason: "split leaves an empty train or test set".into(),
        });
    }
    let outcome = train(&train_set, train_cfg)?;
    let predicted = test_set
        .iter()
        .map(|s| predict(&outcome.params, &s.input))
        .collect::<Result<Vec<_>>>()?;
    let actual: Vec<f64> = test_set.iter().map(|s| s.target).collect();
    Ok(TemporalScore {
        test_mape: mape(&actual, &predicted)?,
        train_samples: train_set.len(),
        test_samples: test_set.len(),
        initial_train_mae: outcome.initial_loss,
        final_train_mae: evaluate_mae(&outcome.params, &train_set)?,
        params: outcome.params,
    })
}

/// LSTM test MAPE for each `(window, units)` pair, one trial per evaluated cell.
pub fn run_temporal_experiment(grid: &TrafficGrid, cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    if cfg.windows.is_empty() || cfg.units.is_empty() {
        return Err(invalid("temporal experiment needs window and unit sweeps"));
    }
    let count = cfg.temporal_cells.clamp(1, grid.len());
    let max_window = *cfg.windows.iter().max().expect("non-empty");
    if grid.series_len() <= max_window + 1 {
        return Err(Error::SeriesTooShort {
            len: grid.series_len(),
            reason: format!("window {max_window} leaves too few samples"),
        });
    }
    let mut cells = index::sample(&mut seed::rng_for(cfg.seed, u64::MAX), grid.len(), count).into_vec();
    cells.sort_unstable();

    let mut pairs: Vec<(usize, usize)> = cfg
        .windows
        .iter()
        .flat_map(|&w| cfg.units.iter().map(move |&u| (w, u)))
        .collect();
    pairs.sort_unstable();
    pairs.dedup();

    pairs
        .par_iter()
        .map(|&(window, units)| {
            let trials = cells
                .par_iter()
                .map(|&c| {
                    let cell_seed = seed::derive(cfg.seed, c as u64);
                    let train_cfg = TrainConfig {
                        hidden: units,
                        seed: seed::derive(cell_seed ^ cfg.train.seed, 1),
                        ..cfg.train.clone()
                    };
                    temporal_pipeline(
                        grid.cells()[c].series.values(),
                        window,
                        &train_cfg,
                        cfg.zscore_threshold,
                        cfg.train_fraction,
                        cell_seed,
                    )
                    .map(|s| s.test_mape)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ResultRow {
                experiment: "temporal".into(),
                estimator: "lstm".into(),
                param1: window.to_string(),
                param2: units.to_string(),
                error: EstimationError::from_trials(trials)?,
            })
        })
        .collect()
}

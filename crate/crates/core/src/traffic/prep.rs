use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{DayProfile, TrafficGrid, TrafficSeries};
use crate::error::{invalid, Error, Result};
use crate::seed;

/// Divides every load by the global maximum over all cells and slots.
pub fn normalize_loads(grid: &TrafficGrid) -> Result<TrafficGrid> {
    let max = grid.max_load();
    if max <= 0.0 {
        return Err(Error::AllZero);
    }
    Ok(grid.map_series(|s| s.map_values(|v| v / max)))
}

pub fn average_day_profile(series: &TrafficSeries) -> Result<DayProfile> {
    let spd = series.slots_per_day();
    if series.len() % spd != 0 {
        return Err(Error::SeriesTooShort {
            len: series.len(),
            reason: format!("not a whole number of {spd}-slot days"),
        });
    }
    let days = series.num_days() as f64;
    let mut profile = vec![0.0; spd];
    for day in series.values().chunks_exact(spd) {
        for (acc, v) in profile.iter_mut().zip(day) {
            *acc += v;
        }
    }
    profile.iter_mut().for_each(|v| *v /= days);
    Ok(DayProfile(profile))
}

/// Flags values whose z-score (population std) exceeds `threshold`.
/// A constant series has no outliers.
pub fn zscore_outliers(values: &[f64], threshold: f64) -> Result<Vec<bool>> {
    if values.len() < 2 {
        return Err(Error::SeriesTooShort {
            len: values.len(),
            reason: "z-score filtering needs at least 2 values".into(),
        });
    }
    if !(threshold > 0.0) {
        return Err(invalid(format!("z-score threshold must be positive, got {threshold}")));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if std == 0.0 {
        return Ok(vec![false; values.len()]);
    }
    Ok(values.iter().map(|v| (v - mean).abs() / std > threshold).collect())
}

/// Drops every value whose z-score exceeds `threshold`.
pub fn remove_outliers_zscore(values: &[f64], threshold: f64) -> Result<Vec<f64>> {
    let mask = zscore_outliers(values, threshold)?;
    Ok(values
        .iter()
        .zip(mask)
        .filter_map(|(v, out)| (!out).then_some(*v))
        .collect())
}

/// One supervised example: `input` past loads followed by `target`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowSample {
    pub input: Vec<f64>,
    pub target: f64,
}

pub fn make_windows(values: &[f64], window: usize) -> Result<Vec<WindowSample>> {
    make_windows_excluding(values, window, &[])
}

/// Sliding windows over `values`, skipping any window whose input or target
/// touches an index flagged in `excluded` (an empty mask excludes nothing).
pub fn make_windows_excluding(values: &[f64], window: usize, excluded: &[bool]) -> Result<Vec<WindowSample>> {
    if window == 0 {
        return Err(invalid("window size must be at least 1"));
    }
    if values.len() <= window {
        return Err(Error::SeriesTooShort {
            len: values.len(),
            reason: format!("window of {window} needs at least {} values", window + 1),
        });
    }
    if !excluded.is_empty() && excluded.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: values.len(),
            got: excluded.len(),
        });
    }
    let skip = |k: usize| !excluded.is_empty() && excluded[k..=k + window].iter().any(|&x| x);
    Ok((0..values.len() - window)
        .filter(|&k| !skip(k))
        .map(|k| WindowSample {
            input: values[k..k + window].to_vec(),
            target: values[k + window],
        })
        .collect())
}

/// Seeded shuffle, then the first `⌊fraction·M⌋` samples train and the rest test.
pub fn split_train_test<T>(mut samples: Vec<T>, train_fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(invalid(format!("train fraction must lie in (0, 1), got {train_fraction}")));
    }
    if samples.len() < 2 {
        return Err(Error::SeriesTooShort {
            len: samples.len(),
            reason: "a train/test split needs at least 2 samples".into(),
        });
    }
    samples.shuffle(&mut seed::rng(seed));
    let n_train = (train_fraction * samples.len() as f64).floor() as usize;
    let test = samples.split_off(n_train);
    Ok((samples, test))
}

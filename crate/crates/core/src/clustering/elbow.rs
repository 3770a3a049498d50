use std::ops::RangeInclusive;

use super::kmeans::{kmeans_restarts, KMeansOptions};
use crate::error::{invalid, Error, Result};

/// Restarts per candidate cluster count.
pub const ELBOW_RESTARTS: u64 = 5;
/// Extra restart rounds allowed for a count whose SSE rises above its predecessor.
const MAX_RERUNS: u64 = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct ElbowCurve {
    pub g: usize,
    /// `(g, SSE(g))` over the searched range, non-increasing in `g`.
    pub sse: Vec<(usize, f64)>,
}

/// Index of the knee of a non-increasing curve: the point farthest below the
/// chord joining its endpoints, after scaling both axes to `[0, 1]`.
/// A flat curve has its knee at the first point.
pub fn knee_index(values: &[f64]) -> usize {
    let n = values.len();
    if n < 3 {
        return 0;
    }
    let (first, last) = (values[0], values[n - 1]);
    let drop = first - last;
    if !(drop > 1e-12 * first.abs().max(1.0)) {
        return 0;
    }
    let mut best = (0, 0.0);
    for (i, &v) in values.iter().enumerate() {
        let x = i as f64 / (n - 1) as f64;
        let y = (v - last) / drop;
        // distance below the chord x + y = 1, up to a constant factor
        let gap = 1.0 - x - y;
        if gap > best.1 + 1e-12 {
            best = (i, gap);
        }
    }
    best.0
}

/// Picks the cluster count at the elbow of the SSE curve over `g_range`.
pub fn elbow_select_g(points: &[Vec<f64>], g_range: RangeInclusive<usize>, seed: u64) -> Result<ElbowCurve> {
    let (lo, hi) = (*g_range.start(), *g_range.end());
    if lo == 0 || lo > hi {
        return Err(invalid(format!("empty cluster-count range {lo}..={hi}")));
    }
    if points.is_empty() {
        return Err(Error::EmptyInput("elbow points"));
    }
    if hi > points.len() {
        return Err(invalid(format!("range up to {hi} exceeds {} points", points.len())));
    }
    let opts = KMeansOptions::default();
    let mut curve: Vec<(usize, f64)> = Vec::with_capacity(hi - lo + 1);
    for g in lo..=hi {
        let stream = (g as u64) << 32;
        let mut best = kmeans_restarts(points, g, stream..stream + ELBOW_RESTARTS, seed, &opts)?.sse;
        if let Some(&(_, prev)) = curve.last() {
            let mut round = 1;
            while best > prev && round <= MAX_RERUNS {
                let start = stream + round * ELBOW_RESTARTS;
                best = best.min(kmeans_restarts(points, g, start..start + ELBOW_RESTARTS, seed, &opts)?.sse);
                round += 1;
            }
            // more clusters can never fit worse at the optimum
            best = best.min(prev);
        }
        curve.push((g, best));
    }
    let values: Vec<f64> = curve.iter().map(|&(_, s)| s).collect();
    Ok(ElbowCurve {
        g: curve[knee_index(&values)].0,
        sse: curve,
    })
}

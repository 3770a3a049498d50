//! Neighbor-based load estimation for a sleeping cell.
//!
//! The target's own load is never read; only the listed neighbors' loads at
//! the evaluation slot enter the estimate.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::seed;
use crate::traffic::{CellId, TrafficGrid};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub id: CellId,
    /// Center-to-center distance to the target, meters.
    pub distance: f64,
    pub load: f64,
}

/// Neighbors of one target cell, in selection order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborSet {
    target: CellId,
    neighbors: Vec<Neighbor>,
    d_max: f64,
}

impl NeighborSet {
    pub fn new(target: CellId, neighbors: Vec<Neighbor>) -> Result<Self> {
        if neighbors.is_empty() {
            return Err(Error::EmptyInput("neighbor set"));
        }
        for nb in &neighbors {
            if nb.id == target {
                return Err(invalid(format!("cell {target} cannot be its own neighbor")));
            }
            if !(nb.distance > 0.0 && nb.distance.is_finite()) {
                return Err(invalid(format!("neighbor {} has non-positive distance {}", nb.id, nb.distance)));
            }
            if !nb.load.is_finite() {
                return Err(Error::NonFinite(format!("load of neighbor {}", nb.id)));
            }
        }
        let d_max = neighbors.iter().map(|n| n.distance).fold(0.0, f64::max);
        Ok(Self { target, neighbors, d_max })
    }

    pub fn target(&self) -> CellId {
        self.target
    }

    pub fn neighbors(&self) -> &[Neighbor] {
        &self.neighbors
    }

    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    /// Same cells with loads taken from `loads[cell index]` instead.
    pub fn with_loads(&self, grid: &TrafficGrid, loads: &[f64]) -> Result<Self> {
        let neighbors = self
            .neighbors
            .iter()
            .map(|nb| Ok(Neighbor { load: loads[grid.index_of(nb.id)?], ..*nb }))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { neighbors, ..self.clone() })
    }
}

/// Exponent `n` of the inverse-distance weight.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightingConfig {
    pub n: f64,
}

impl WeightingConfig {
    pub fn new(n: f64) -> Result<Self> {
        if !(n > 0.0 && n.is_finite()) {
            return Err(invalid(format!("weighting exponent must be positive, got {n}")));
        }
        Ok(Self { n })
    }
}

/// Loads every neighbor reports at `slot` of its series.
pub fn slot_loads(grid: &TrafficGrid, slot: usize) -> Result<Vec<f64>> {
    if slot >= grid.series_len() {
        return Err(invalid(format!("slot {slot} beyond series length {}", grid.series_len())));
    }
    Ok(grid.cells().iter().map(|c| c.series.values()[slot]).collect())
}

/// Indices of the cells `target` may draw neighbors from: every other
/// cell, restricted to `active` when a mask is given.
fn pool(grid: &TrafficGrid, target: CellId, count: usize, active: Option<&[bool]>) -> Result<(usize, Vec<usize>)> {
    let t = grid.index_of(target)?;
    if count == 0 {
        return Err(invalid("neighbor count must be at least 1"));
    }
    if let Some(mask) = active {
        if mask.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: mask.len() });
        }
    }
    let candidates: Vec<usize> = (0..grid.len())
        .filter(|&i| i != t && active.map_or(true, |m| m[i]))
        .collect();
    if count > candidates.len() {
        return Err(invalid(format!(
            "{count} neighbors requested but only {} candidate cells exist",
            candidates.len()
        )));
    }
    Ok((t, candidates))
}

fn neighbor(grid: &TrafficGrid, origin: usize, i: usize, loads: &[f64]) -> Neighbor {
    let cell = &grid.cells()[i];
    Neighbor {
        id: cell.id,
        distance: grid.cells()[origin].position.distance(&cell.position),
        load: loads[i],
    }
}

fn check_loads(grid: &TrafficGrid, loads: &[f64]) -> Result<()> {
    if loads.len() != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), got: loads.len() });
    }
    Ok(())
}

/// The `count` cells closest to `target` (ties by ascending id), with their
/// loads taken from `loads`, indexed like `grid.cells()`.
pub fn select_nearest(grid: &TrafficGrid, target: CellId, count: usize, loads: &[f64]) -> Result<NeighborSet> {
    select_nearest_active(grid, target, count, loads, None)
}

/// [`select_nearest`] restricted to cells flagged in `active`.
pub fn select_nearest_active(
    grid: &TrafficGrid,
    target: CellId,
    count: usize,
    loads: &[f64],
    active: Option<&[bool]>,
) -> Result<NeighborSet> {
    check_loads(grid, loads)?;
    let (t, candidates) = pool(grid, target, count, active)?;
    let mut ranked: Vec<Neighbor> = candidates.into_iter().map(|i| neighbor(grid, t, i, loads)).collect();
    // cells are sorted by id, so a stable sort keeps distance ties in id order
    ranked.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    ranked.truncate(count);
    NeighborSet::new(target, ranked)
}

/// `count` distinct non-target cells drawn uniformly without replacement.
pub fn select_random(grid: &TrafficGrid, target: CellId, count: usize, loads: &[f64], seed: u64) -> Result<NeighborSet> {
    select_random_active(grid, target, count, loads, None, seed)
}

/// [`select_random`] restricted to cells flagged in `active`.
pub fn select_random_active(
    grid: &TrafficGrid,
    target: CellId,
    count: usize,
    loads: &[f64],
    active: Option<&[bool]>,
    seed: u64,
) -> Result<NeighborSet> {
    check_loads(grid, loads)?;
    let (t, candidates) = pool(grid, target, count, active)?;
    let mut rng = seed::rng(seed);
    let neighbors = index::sample(&mut rng, candidates.len(), count)
        .into_iter()
        .map(|k| neighbor(grid, t, candidates[k], loads))
        .collect();
    NeighborSet::new(target, neighbors)
}

/// Plain mean of the neighbor loads.
pub fn estimate_unweighted_mean(ns: &NeighborSet) -> Result<f64> {
    if ns.is_empty() {
        return Err(Error::EmptyInput("neighbor set"));
    }
    Ok(ns.neighbors.iter().map(|n| n.load).sum::<f64>() / ns.len() as f64)
}

/// `w = d_max / d^n`.
pub fn weight_factor(d: f64, d_max: f64, cfg: WeightingConfig) -> Result<f64> {
    if !(d > 0.0) {
        return Err(invalid(format!("distance must be positive, got {d}")));
    }
    Ok(d_max / d.powf(cfg.n))
}

/// Inverse-distance-power weighted mean `Σ λ_a w_a / Σ w_a`.
///
/// Weights are evaluated relative to the nearest neighbor, i.e. as
/// `(d_min / d)^n`; the common factor `d_max / d_min^n` cancels in the ratio
/// and the rescaled form cannot overflow or underflow for large `n`.
pub fn estimate_distance_weighted(ns: &NeighborSet, cfg: WeightingConfig) -> Result<f64> {
    if ns.is_empty() {
        return Err(Error::EmptyInput("neighbor set"));
    }
    let d_min = ns.neighbors.iter().map(|n| n.distance).fold(f64::INFINITY, f64::min);
    let (mut num, mut den) = (0.0, 0.0);
    for nb in &ns.neighbors {
        let w = (d_min / nb.distance).powf(cfg.n);
        num += nb.load * w;
        den += w;
    }
    Ok(num / den)
}

/// Random selection followed by plain averaging.
pub fn estimate_random_mean(grid: &TrafficGrid, target: CellId, count: usize, loads: &[f64], seed: u64) -> Result<f64> {
    estimate_unweighted_mean(&select_random(grid, target, count, loads, seed)?)
}

/// Random selection followed by distance weighting.
pub fn estimate_random_weighted(
    grid: &TrafficGrid,
    target: CellId,
    count: usize,
    cfg: WeightingConfig,
    loads: &[f64],
    seed: u64,
) -> Result<f64> {
    estimate_distance_weighted(&select_random(grid, target, count, loads, seed)?, cfg)
}

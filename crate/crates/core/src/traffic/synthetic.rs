//! Synthetic grid traffic with known spatial structure, standing in for the
//! proprietary CDR feed in tests and experiments.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{CellId, GridGeometry, TrafficGrid, TrafficSeries, CELL_SIZE_M, SLOTS_PER_DAY};
use crate::error::{invalid, Result};
use crate::seed;

/// Largest lattice the dense covariance factorization is allowed to handle.
const MAX_SIDE: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    /// Cells per lattice axis.
    pub grid_side: usize,
    /// Lattice pitch in meters.
    pub cell_size: f64,
    pub num_days: usize,
    pub slots_per_day: usize,
    /// Decay scale `ℓ` of the field covariance `exp(-d/ℓ)`, in meters.
    pub spatial_corr_length: f64,
    /// Amplitudes of the diurnal harmonics (periods of 1, 1/2, 1/3 … day).
    pub diurnal_amplitudes: Vec<f64>,
    /// Mean load the diurnal signal oscillates around.
    pub base_level: f64,
    /// Standard deviation of the spatially correlated field.
    pub field_std: f64,
    /// Share of the field variance that is static (the same every slot);
    /// the rest is redrawn each slot.
    pub static_share: f64,
    /// i.i.d. Gaussian noise added per cell and slot.
    pub noise_std: f64,
    /// Number of static activity hotspots shaping the regional load level.
    pub hotspots: usize,
    /// Ceiling of the regional lift; a lone hotspot peaks at `[0.5, 1]` of it.
    pub hotspot_amplitude: f64,
    /// Hotspot radius as a multiple of `spatial_corr_length`.
    pub hotspot_scale: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            grid_side: 20,
            cell_size: CELL_SIZE_M,
            num_days: 7,
            slots_per_day: SLOTS_PER_DAY,
            spatial_corr_length: 2.0 * CELL_SIZE_M,
            diurnal_amplitudes: vec![0.15, 0.04],
            base_level: 0.4,
            field_std: 0.08,
            static_share: 0.5,
            noise_std: 0.05,
            hotspots: 8,
            hotspot_amplitude: 0.4,
            hotspot_scale: 1.25,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_side < 2 || self.grid_side > MAX_SIDE {
            return Err(invalid(format!("grid_side must lie in [2, {MAX_SIDE}], got {}", self.grid_side)));
        }
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            return Err(invalid("cell_size must be positive"));
        }
        if self.num_days == 0 || self.slots_per_day == 0 {
            return Err(invalid("num_days and slots_per_day must be positive"));
        }
        if !(self.spatial_corr_length > 0.0) {
            return Err(invalid("spatial_corr_length must be positive"));
        }
        if !(self.noise_std >= 0.0 && self.field_std >= 0.0) {
            return Err(invalid("noise_std and field_std must be non-negative"));
        }
        if !(self.hotspot_amplitude >= 0.0 && self.hotspot_scale > 0.0) {
            return Err(invalid("hotspot_amplitude must be non-negative and hotspot_scale positive"));
        }
        if !(0.0..=1.0).contains(&self.static_share) {
            return Err(invalid("static_share must lie in [0, 1]"));
        }
        if !self.base_level.is_finite() || self.diurnal_amplitudes.iter().any(|a| !a.is_finite()) {
            return Err(invalid("base level and diurnal amplitudes must be finite"));
        }
        Ok(())
    }

    /// Shared diurnal signal at absolute slot `t`; lowest around midnight.
    pub fn diurnal(&self, t: usize) -> f64 {
        let phase = (t % self.slots_per_day) as f64 / self.slots_per_day as f64;
        self.base_level
            - self
                .diurnal_amplitudes
                .iter()
                .enumerate()
                .map(|(k, a)| a * (TAU * (k + 1) as f64 * phase).cos())
                .sum::<f64>()
    }
}

/// Each cell's series is `clip(diurnal(t) + regional(cell) + field(cell, t) + noise, 0, 1)`.
/// The field is a Gaussian process over cell centers with covariance
/// `field_std² · exp(-d/ℓ)`; the regional term is a soft union of Gaussian
/// hotspots of radius `hotspot_scale · ℓ` raising the load around random centers.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<TrafficGrid> {
    cfg.validate()?;
    let geometry = GridGeometry::new(cfg.grid_side, cfg.cell_size)?;
    let n = geometry.cell_count();
    let positions = (0..n as u32)
        .map(|i| geometry.position(CellId(i)))
        .collect::<Result<Vec<_>>>()?;
    let mut cov = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let c = (-positions[i].distance(&positions[j]) / cfg.spatial_corr_length).exp();
            cov[i * n + j] = c;
            cov[j * n + i] = c;
        }
    }
    let factor = cholesky_psd(&cov, n);

    let mut rng = seed::rng(cfg.seed);
    let draw_field = |rng: &mut rand_chacha::ChaCha8Rng| {
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        lower_matvec(&factor, &z, n)
    };
    let static_field = draw_field(&mut rng);
    let regional = hotspot_surface(cfg, &positions);
    let w_static = cfg.field_std * cfg.static_share.sqrt();
    let w_dynamic = cfg.field_std * (1.0 - cfg.static_share).sqrt();

    let len = cfg.num_days * cfg.slots_per_day;
    let mut values = vec![vec![0.0; len]; n];
    for t in 0..len {
        let dynamic = draw_field(&mut rng);
        let base = cfg.diurnal(t);
        for (cell, series) in values.iter_mut().enumerate() {
            let noise: f64 = rng.sample(StandardNormal);
            let v = base + regional[cell] + w_static * static_field[cell] + w_dynamic * dynamic[cell] + cfg.noise_std * noise;
            series[t] = v.clamp(0.0, 1.0);
        }
    }
    let series = values
        .into_iter()
        .enumerate()
        .map(|(i, v)| Ok((CellId(i as u32), TrafficSeries::new(v, cfg.slots_per_day)?)))
        .collect::<Result<Vec<_>>>()?;
    TrafficGrid::from_series(geometry, series)
}

fn hotspot_surface(cfg: &SyntheticConfig, positions: &[super::Position]) -> Vec<f64> {
    let mut rng = seed::rng_for(cfg.seed, 1);
    let extent = cfg.grid_side as f64 * cfg.cell_size;
    let radius = cfg.hotspot_scale * cfg.spatial_corr_length;
    let spots: Vec<(f64, f64, f64)> = (0..cfg.hotspots)
        .map(|_| {
            let x = rng.gen_range(0.0..extent);
            let y = rng.gen_range(0.0..extent);
            (x, y, rng.gen_range(0.5..=1.0))
        })
        .collect();
    // soft union of the bumps: overlapping hotspots never exceed the amplitude
    positions
        .iter()
        .map(|p| {
            let quiet: f64 = spots
                .iter()
                .map(|&(x, y, u)| {
                    let d2 = (p.x - x).powi(2) + (p.y - y).powi(2);
                    1.0 - u * (-d2 / (2.0 * radius * radius)).exp()
                })
                .product();
            cfg.hotspot_amplitude * (1.0 - quiet)
        })
        .collect()
}

/// Cells drawn from a few distinct daily patterns, for clustering tests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusteredConfig {
    pub grid_side: usize,
    pub cell_size: f64,
    pub num_days: usize,
    pub slots_per_day: usize,
    pub clusters: usize,
    /// i.i.d. noise per cell and slot; zero gives identical series within a cluster.
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for ClusteredConfig {
    fn default() -> Self {
        Self {
            grid_side: 20,
            cell_size: CELL_SIZE_M,
            num_days: 7,
            slots_per_day: SLOTS_PER_DAY,
            clusters: 3,
            noise_std: 0.0,
            seed: 0,
        }
    }
}

impl ClusteredConfig {
    /// Daily pattern of cluster `g`: distinct mean level, amplitude and peak hour.
    pub fn pattern(&self, g: usize, slot: usize) -> f64 {
        let span = (self.clusters.max(2) - 1) as f64;
        let level = 0.2 + 0.5 * g as f64 / span;
        let amp = 0.1 + 0.05 * (g % 3) as f64;
        let peak = 0.35 + 0.3 * g as f64 / span;
        let phase = slot as f64 / self.slots_per_day as f64 - peak;
        level + amp * (TAU * phase).cos()
    }
}

/// Returns the grid and each cell's cluster label; labels are drawn
/// uniformly but every cluster gets at least one cell.
pub fn generate_clustered(cfg: &ClusteredConfig) -> Result<(TrafficGrid, Vec<usize>)> {
    let geometry = GridGeometry::new(cfg.grid_side, cfg.cell_size)?;
    let n = geometry.cell_count();
    if cfg.clusters == 0 || cfg.clusters > n {
        return Err(invalid(format!("cluster count must lie in [1, {n}]")));
    }
    if cfg.num_days == 0 || cfg.slots_per_day == 0 || !(cfg.noise_std >= 0.0) {
        return Err(invalid("invalid clustered synthetic config"));
    }
    let mut rng = seed::rng(cfg.seed);
    let mut labels: Vec<usize> = (0..n).map(|i| if i < cfg.clusters { i } else { rng.gen_range(0..cfg.clusters) }).collect();
    rand::seq::SliceRandom::shuffle(labels.as_mut_slice(), &mut rng);
    let len = cfg.num_days * cfg.slots_per_day;
    let series = labels
        .iter()
        .enumerate()
        .map(|(i, &g)| {
            let values = (0..len)
                .map(|t| {
                    let noise: f64 = if cfg.noise_std > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
                    (cfg.pattern(g, t % cfg.slots_per_day) + cfg.noise_std * noise).clamp(0.0, 1.0)
                })
                .collect();
            Ok((CellId(i as u32), TrafficSeries::new(values, cfg.slots_per_day)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((TrafficGrid::from_series(geometry, series)?, labels))
}

/// Lower Cholesky factor of a positive semi-definite matrix (row-major).
/// Pivots that round to zero or below zero their column, so near-singular
/// covariances (very long correlation lengths) still factor.
fn cholesky_psd(a: &[f64], n: usize) -> Vec<f64> {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let (row_j, _) = l.split_at(j * n + j);
        let row_j = &row_j[j * n..];
        let d = a[j * n + j] - row_j.iter().map(|v| v * v).sum::<f64>();
        if d <= 1e-12 * a[j * n + j] {
            continue;
        }
        let pivot = d.sqrt();
        l[j * n + j] = pivot;
        for i in j + 1..n {
            let dot: f64 = (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum();
            l[i * n + j] = (a[i * n + j] - dot) / pivot;
        }
    }
    l
}

fn lower_matvec(l: &[f64], z: &[f64], n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| l[i * n..i * n + i + 1].iter().zip(z).map(|(a, b)| a * b).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SyntheticConfig {
        SyntheticConfig {
            grid_side: 4,
            num_days: 2,
            slots_per_day: 24,
            seed,
            ..SyntheticConfig::default()
        }
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = [4.0, 2.0, 0.4, 2.0, 5.0, 1.0, 0.4, 1.0, 3.0];
        let l = cholesky_psd(&a, 3);
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| l[i * 3 + k] * l[j * 3 + k]).sum();
                assert!((v - a[i * 3 + j]).abs() < 1e-12);
            }
        }
        // rank one: all-ones
        let l = cholesky_psd(&[1.0; 9], 3);
        assert_eq!(lower_matvec(&l, &[0.3, 5.0, -2.0], 3), vec![0.3; 3]);
    }

    #[test]
    fn deterministic_and_bounded() {
        let a = generate_synthetic(&small(3)).unwrap();
        let b = generate_synthetic(&small(3)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_synthetic(&small(4)).unwrap());
        assert_eq!(a.len(), 16);
        assert_eq!(a.series_len(), 48);
        assert!(a.cells().iter().all(|c| c.series.values().iter().all(|v| (0.0..=1.0).contains(v))));
    }

    #[test]
    fn fully_correlated_limit() {
        let cfg = SyntheticConfig {
            noise_std: 0.0,
            spatial_corr_length: 1e9,
            ..small(1)
        };
        let g = generate_synthetic(&cfg).unwrap();
        let first = g.cells()[0].series.values();
        for c in g.cells() {
            for (a, b) in c.series.values().iter().zip(first) {
                assert!((a - b).abs() < 1e-3, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn invalid_configs() {
        for cfg in [
            SyntheticConfig { grid_side: 1, ..small(0) },
            SyntheticConfig { spatial_corr_length: 0.0, ..small(0) },
            SyntheticConfig { noise_std: -0.1, ..small(0) },
            SyntheticConfig { num_days: 0, ..small(0) },
            SyntheticConfig { grid_side: 100, ..small(0) },
        ] {
            assert!(generate_synthetic(&cfg).is_err());
        }
    }

    #[test]
    fn clustered_labels_cover_all_clusters() {
        let cfg = ClusteredConfig {
            grid_side: 3,
            num_days: 1,
            slots_per_day: 6,
            clusters: 3,
            ..ClusteredConfig::default()
        };
        let (grid, labels) = generate_clustered(&cfg).unwrap();
        assert_eq!(grid.len(), 9);
        for g in 0..3 {
            assert!(labels.contains(&g));
        }
        for (c, &g) in grid.cells().iter().zip(&labels) {
            assert_eq!(c.series.values()[2], cfg.pattern(g, 2).clamp(0.0, 1.0));
        }
    }
}

//! Multi-level clustering: repeated k-means over day profiles where each
//! layer feeds its sleeping-cell estimates back into the features.
//!
//! A sleeping cell's profile is known except at the evaluation slot, whose
//! entry is withheld and replaced by a bootstrap value before layer 1.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::elbow::elbow_select_g;
use super::kmeans::{kmeans_best_of, KMeansOptions};
use crate::error::{invalid, Error, Result};
use crate::traffic::{CellId, TrafficGrid};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterCount {
    Fixed(usize),
    /// Elbow search over `min..=max`, run once before the first layer.
    Elbow { min: usize, max: usize },
}

/// Value standing in for a sleeping cell's withheld slot before layer 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bootstrap {
    /// Mean over active cells of the evaluation slot.
    GlobalActiveMean,
    Constant(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlcConfig {
    pub layers: usize,
    pub clusters: ClusterCount,
    pub bootstrap: Bootstrap,
    /// k-means restarts per layer.
    pub restarts: usize,
    pub kmeans: KMeansOptions,
    pub seed: u64,
}

impl Default for MlcConfig {
    fn default() -> Self {
        Self {
            layers: 7,
            clusters: ClusterCount::Fixed(3),
            bootstrap: Bootstrap::GlobalActiveMean,
            restarts: 3,
            kmeans: KMeansOptions::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlcLayer {
    /// 1-based layer index.
    pub layer: usize,
    /// Cluster of each sleeping cell, in the order they were given.
    pub clusters: Vec<usize>,
    pub estimates: Vec<f64>,
    pub sse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlcOutcome {
    pub g: usize,
    pub sleeping: Vec<CellId>,
    pub layers: Vec<MlcLayer>,
    pub warnings: Vec<String>,
}

impl MlcOutcome {
    /// Final-layer estimate per sleeping cell.
    pub fn estimates(&self) -> impl Iterator<Item = (CellId, f64)> + '_ {
        let last = self.layers.last().expect("at least one layer");
        self.sleeping.iter().copied().zip(last.estimates.iter().copied())
    }
}

pub fn mlc_estimate(grid: &TrafficGrid, sleeping: &[CellId], slot: usize, cfg: &MlcConfig) -> Result<MlcOutcome> {
    let ids: Vec<CellId> = grid.ids().collect();
    let profiles: Vec<Vec<f64>> = grid.day_profiles().into_iter().map(|p| p.0).collect();
    mlc_estimate_profiles(&ids, &profiles, sleeping, slot, cfg)
}

/// MLC over precomputed profiles; `ids[i]` names `profiles[i]` and `slot`
/// indexes into the profiles.
pub fn mlc_estimate_profiles(
    ids: &[CellId],
    profiles: &[Vec<f64>],
    sleeping: &[CellId],
    slot: usize,
    cfg: &MlcConfig,
) -> Result<MlcOutcome> {
    if cfg.layers == 0 {
        return Err(invalid("MLC needs at least one layer"));
    }
    if ids.len() != profiles.len() {
        return Err(Error::DimensionMismatch { expected: ids.len(), got: profiles.len() });
    }
    if sleeping.is_empty() {
        return Err(Error::EmptyInput("sleeping cells"));
    }
    let dim = profiles.first().map_or(0, Vec::len);
    if slot >= dim {
        return Err(invalid(format!("slot {slot} outside {dim}-slot profiles")));
    }
    let sleep_idx = sleeping
        .iter()
        .map(|id| ids.iter().position(|x| x == id).ok_or(Error::UnknownCell(id.0)))
        .collect::<Result<Vec<_>>>()?;
    let asleep: HashSet<usize> = sleep_idx.iter().copied().collect();
    if asleep.len() != sleep_idx.len() {
        return Err(invalid("sleeping cells must be distinct"));
    }
    let active: Vec<usize> = (0..ids.len()).filter(|i| !asleep.contains(i)).collect();
    if active.is_empty() {
        return Err(invalid("at least one cell must stay active"));
    }
    let active_mean = active.iter().map(|&i| profiles[i][slot]).sum::<f64>() / active.len() as f64;

    let mut features = profiles.to_vec();
    let boot = match cfg.bootstrap {
        Bootstrap::GlobalActiveMean => active_mean,
        Bootstrap::Constant(v) => v,
    };
    for &s in &sleep_idx {
        features[s][slot] = boot;
    }

    let g = match cfg.clusters {
        ClusterCount::Fixed(g) => g,
        ClusterCount::Elbow { min, max } => elbow_select_g(&features, min..=max.min(features.len()), cfg.seed)?.g,
    };
    if g == 0 || g > active.len() {
        return Err(invalid(format!("{g} clusters requested with {} active cells", active.len())));
    }

    let mut layers: Vec<MlcLayer> = Vec::with_capacity(cfg.layers);
    let mut warnings = Vec::new();
    for layer in 1..=cfg.layers {
        if let [.., a, b] = layers.as_slice() {
            if a.estimates.iter().zip(&b.estimates).all(|(x, y)| (x - y).abs() <= 1e-12) {
                // features are unchanged, so the clustering would repeat exactly
                let same = MlcLayer { layer, ..b.clone() };
                layers.push(same);
                continue;
            }
        }
        let model = kmeans_best_of(&features, g, cfg.restarts, cfg.seed, &cfg.kmeans)?;
        let mut sums = vec![(0.0, 0usize); g];
        for &a in &active {
            let s = &mut sums[model.assignment[a]];
            s.0 += profiles[a][slot];
            s.1 += 1;
        }
        let means: Vec<f64> = sums
            .iter()
            .enumerate()
            .map(|(k, &(sum, n))| {
                if n == 0 {
                    if model.members(k).next().is_some() {
                        warnings.push(format!(
                            "layer {layer}: cluster {k} has no active member, using the global active mean"
                        ));
                    }
                    active_mean
                } else {
                    sum / n as f64
                }
            })
            .collect();
        let clusters: Vec<usize> = sleep_idx.iter().map(|&s| model.assignment[s]).collect();
        let estimates: Vec<f64> = clusters.iter().map(|&k| means[k]).collect();
        for (&s, &e) in sleep_idx.iter().zip(&estimates) {
            features[s][slot] = e;
        }
        layers.push(MlcLayer {
            layer,
            clusters,
            estimates,
            sse: model.sse,
        });
    }
    Ok(MlcOutcome {
        g,
        sleeping: sleeping.to_vec(),
        layers,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<CellId> {
        (0..n as u32).map(CellId).collect()
    }

    fn cfg(layers: usize, g: usize) -> MlcConfig {
        MlcConfig {
            layers,
            clusters: ClusterCount::Fixed(g),
            ..MlcConfig::default()
        }
    }

    #[test]
    fn constant_field() {
        let profiles = vec![vec![0.5, 0.5, 0.5]; 9];
        let out = mlc_estimate_profiles(&ids(9), &profiles, &[CellId(2), CellId(7)], 1, &cfg(4, 2)).unwrap();
        for layer in &out.layers {
            assert_eq!(layer.estimates, vec![0.5, 0.5]);
        }
    }

    #[test]
    fn separated_clusters_hand_trace() {
        // cells 0..3 load 0.2 everywhere, cells 4..7 load 0.8; cell 7 sleeps at slot 0.
        // Active mean at slot 0 = (4·0.2 + 3·0.8)/7 = 0.457142…, so layer 1 sees
        // cell 7 at (0.457, 0.8): 0.257² + 0.6² to cluster A, 0.343² to cluster B.
        // It joins B, is estimated 0.8 exactly, and stays there.
        let mut profiles = vec![vec![0.2, 0.2]; 4];
        profiles.extend(vec![vec![0.8, 0.8]; 4]);
        let out = mlc_estimate_profiles(&ids(8), &profiles, &[CellId(7)], 0, &cfg(3, 2)).unwrap();
        let errors: Vec<f64> = out.layers.iter().map(|l| (l.estimates[0] - 0.8).abs()).collect();
        assert!(errors.windows(2).all(|w| w[1] <= w[0]));
        let (id, est) = out.estimates().next().unwrap();
        assert_eq!(id, CellId(7));
        assert!((est - 0.8).abs() < 1e-15);
        assert!(out.warnings.is_empty());
    }

    #[test]
    fn layer_one_is_plain_cluster_mean() {
        let profiles: Vec<Vec<f64>> = (0..12)
            .map(|i| {
                let base = [0.1, 0.5, 0.9][i % 3];
                vec![base + 0.01 * i as f64, base, base - 0.005 * i as f64]
            })
            .collect();
        let sleeping = [CellId(4), CellId(9)];
        let c = cfg(1, 3);
        let out = mlc_estimate_profiles(&ids(12), &profiles, &sleeping, 0, &c).unwrap();

        let mut features = profiles.clone();
        let active: Vec<usize> = (0..12).filter(|i| *i != 4 && *i != 9).collect();
        let boot = active.iter().map(|&i| profiles[i][0]).sum::<f64>() / active.len() as f64;
        features[4][0] = boot;
        features[9][0] = boot;
        let model = kmeans_best_of(&features, 3, c.restarts, c.seed, &c.kmeans).unwrap();
        for (k, s) in [4usize, 9].into_iter().enumerate() {
            let members: Vec<usize> = active.iter().copied().filter(|&a| model.assignment[a] == model.assignment[s]).collect();
            let mean = members.iter().map(|&a| profiles[a][0]).sum::<f64>() / members.len() as f64;
            assert_eq!(out.layers[0].estimates[k], mean);
        }
    }

    #[test]
    fn fixed_point_layers_repeat() {
        let profiles: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 / 10.0, 0.3]).collect();
        let out = mlc_estimate_profiles(&ids(10), &profiles, &[CellId(3)], 0, &cfg(6, 2)).unwrap();
        let settled = out
            .layers
            .windows(2)
            .position(|w| w[0].estimates == w[1].estimates)
            .expect("settles");
        for l in &out.layers[settled..] {
            assert_eq!(l.estimates, out.layers[settled].estimates);
            assert_eq!(l.clusters, out.layers[settled].clusters);
        }
    }

    #[test]
    fn orphan_cluster_falls_back_with_warning() {
        // two sleeping cells far from everything form their own cluster
        let mut profiles = vec![vec![0.1, 0.1]; 4];
        profiles.push(vec![0.9, 5.0]);
        profiles.push(vec![0.9, 5.0]);
        let out = mlc_estimate_profiles(
            &ids(6),
            &profiles,
            &[CellId(4), CellId(5)],
            0,
            &MlcConfig {
                bootstrap: Bootstrap::Constant(0.9),
                ..cfg(1, 2)
            },
        )
        .unwrap();
        assert!((out.layers[0].estimates[0] - 0.1).abs() < 1e-15);
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn input_errors() {
        let profiles = vec![vec![0.5, 0.5]; 4];
        let c = cfg(2, 2);
        assert!(mlc_estimate_profiles(&ids(4), &profiles, &[], 0, &c).is_err());
        assert!(mlc_estimate_profiles(&ids(4), &profiles, &[CellId(9)], 0, &c).is_err());
        assert!(mlc_estimate_profiles(&ids(4), &profiles, &[CellId(1)], 2, &c).is_err());
        assert!(mlc_estimate_profiles(&ids(4), &profiles, &[CellId(1), CellId(1)], 0, &c).is_err());
        assert!(mlc_estimate_profiles(&ids(4), &profiles, &ids(4), 0, &c).is_err());
        // 3 clusters need 3 active cells
        assert!(mlc_estimate_profiles(&ids(4), &profiles, &[CellId(0), CellId(1)], 0, &cfg(1, 3)).is_err());
        assert!(mlc_estimate_profiles(&ids(4), &profiles, &[CellId(0)], 0, &cfg(0, 1)).is_err());
    }

    #[test]
    fn elbow_count_is_resolved_once() {
        let profiles: Vec<Vec<f64>> = (0..30).map(|i| vec![[0.1, 0.5, 0.9][i % 3]; 4]).collect();
        let out = mlc_estimate_profiles(
            &ids(30),
            &profiles,
            &[CellId(5)],
            2,
            &MlcConfig {
                clusters: ClusterCount::Elbow { min: 1, max: 8 },
                ..cfg(3, 0)
            },
        )
        .unwrap();
        assert_eq!(out.g, 3);
        assert!((out.estimates().next().unwrap().1 - 0.9).abs() < 1e-12);
    }
}

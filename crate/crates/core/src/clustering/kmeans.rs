use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansOptions {
    pub max_iter: usize,
    /// Stop once no centroid moves farther than this.
    pub tol: f64,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self { max_iter: 300, tol: 1e-10 }
    }
}

/// Result of one k-means run; `assignment[i]` is the cluster of point `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub centroids: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    pub sse: f64,
    pub iterations: usize,
    /// True when the run ended on a Lloyd fixed point.
    pub converged: bool,
}

impl ClusterModel {
    pub fn g(&self) -> usize {
        self.centroids.len()
    }

    pub fn members(&self, cluster: usize) -> impl Iterator<Item = usize> + '_ {
        self.assignment
            .iter()
            .enumerate()
            .filter_map(move |(i, &c)| (c == cluster).then_some(i))
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the closest centroid; ties go to the lowest index.
pub fn nearest_centroid(point: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centroids.iter().enumerate() {
        let d = squared_distance(point, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best.0
}

/// Sum over clusters of squared Euclidean distances to the centroid.
pub fn sse(points: &[Vec<f64>], model: &ClusterModel) -> Result<f64> {
    if model.assignment.len() != points.len() {
        return Err(invalid(format!(
            "model assigns {} points but {} were given",
            model.assignment.len(),
            points.len()
        )));
    }
    points
        .iter()
        .zip(&model.assignment)
        .enumerate()
        .map(|(i, (p, &c))| {
            let centroid = model
                .centroids
                .get(c)
                .ok_or_else(|| invalid(format!("point {i} assigned to missing cluster {c}")))?;
            Ok(squared_distance(p, centroid))
        })
        .sum()
}

fn check_points(points: &[Vec<f64>], g: usize) -> Result<usize> {
    let dim = points.first().ok_or(Error::EmptyInput("k-means points"))?.len();
    if dim == 0 {
        return Err(invalid("k-means points have zero dimensions"));
    }
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("k-means points".into()));
    }
    if g == 0 || g > points.len() {
        return Err(invalid(format!("cannot form {g} clusters from {} points", points.len())));
    }
    Ok(dim)
}

/// k-means++ seeding: first center uniform, then proportional to squared
/// distance from the nearest chosen center.
fn init_plus_plus(points: &[Vec<f64>], g: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.gen_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| squared_distance(p, &centroids[0])).collect();
    while centroids.len() < g {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && r < d {
                    chosen = i;
                    break;
                }
                r -= d;
            }
            while d2[chosen] == 0.0 {
                chosen -= 1;
            }
            chosen
        } else {
            rng.gen_range(0..points.len())
        };
        let c = points[pick].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(squared_distance(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Nearest-centroid assignment; returns whether anything changed.
fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>], assignment: &mut [usize]) -> bool {
    let mut changed = false;
    for (p, a) in points.iter().zip(assignment.iter_mut()) {
        let k = nearest_centroid(p, centroids);
        changed |= k != *a;
        *a = k;
    }
    changed
}

/// Gives every empty cluster the point farthest from its current centroid,
/// taken from a cluster that keeps at least one member.
fn repair_empty(points: &[Vec<f64>], centroids: &mut [Vec<f64>], assignment: &mut [usize]) -> bool {
    let g = centroids.len();
    let mut counts = vec![0usize; g];
    assignment.iter().for_each(|&a| counts[a] += 1);
    let mut changed = false;
    for empty in 0..g {
        if counts[empty] > 0 {
            continue;
        }
        let (victim, _) = points
            .iter()
            .enumerate()
            .filter(|&(i, _)| counts[assignment[i]] > 1)
            .map(|(i, p)| (i, squared_distance(p, &centroids[assignment[i]])))
            .fold((usize::MAX, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        counts[assignment[victim]] -= 1;
        counts[empty] = 1;
        assignment[victim] = empty;
        centroids[empty] = points[victim].clone();
        changed = true;
    }
    changed
}

/// Recomputes centroids as member means; returns the largest move.
fn update_centroids(points: &[Vec<f64>], centroids: &mut [Vec<f64>], assignment: &[usize]) -> f64 {
    let dim = points[0].len();
    let mut sums = vec![vec![0.0; dim]; centroids.len()];
    let mut counts = vec![0usize; centroids.len()];
    for (p, &a) in points.iter().zip(assignment) {
        counts[a] += 1;
        sums[a].iter_mut().zip(p).for_each(|(s, v)| *s += v);
    }
    let mut moved: f64 = 0.0;
    for ((c, s), n) in centroids.iter_mut().zip(sums).zip(counts) {
        if n == 0 {
            continue;
        }
        let mean: Vec<f64> = s.into_iter().map(|v| v / n as f64).collect();
        moved = moved.max(squared_distance(c, &mean).sqrt());
        *c = mean;
    }
    moved
}

/// Lloyd's algorithm from a seeded k-means++ start.
pub fn kmeans(points: &[Vec<f64>], g: usize, seed: u64, opts: &KMeansOptions) -> Result<ClusterModel> {
    check_points(points, g)?;
    let mut rng = seed::rng(seed);
    let mut centroids = init_plus_plus(points, g, &mut rng);
    let mut assignment = vec![usize::MAX; points.len()];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter.max(1) {
        iterations += 1;
        let changed = assign(points, &centroids, &mut assignment) | repair_empty(points, &mut centroids, &mut assignment);
        if !changed {
            converged = true;
            break;
        }
        let moved = update_centroids(points, &mut centroids, &assignment);
        if moved < opts.tol {
            let mut probe = assignment.clone();
            converged = !assign(points, &centroids, &mut probe);
            break;
        }
    }
    let mut model = ClusterModel {
        centroids,
        assignment,
        sse: 0.0,
        iterations,
        converged,
    };
    model.sse = sse(points, &model)?;
    Ok(model)
}

/// Best (lowest SSE) of `restarts` independently seeded runs; ties go to the
/// earliest restart.
pub fn kmeans_best_of(
    points: &[Vec<f64>],
    g: usize,
    restarts: usize,
    seed: u64,
    opts: &KMeansOptions,
) -> Result<ClusterModel> {
    kmeans_restarts(points, g, 0..restarts.max(1) as u64, seed, opts)
}

pub(crate) fn kmeans_restarts(
    points: &[Vec<f64>],
    g: usize,
    streams: std::ops::Range<u64>,
    seed: u64,
    opts: &KMeansOptions,
) -> Result<ClusterModel> {
    check_points(points, g)?;
    let runs = streams
        .into_par_iter()
        .map(|r| kmeans(points, g, seed::derive(seed, r), opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(runs
        .into_iter()
        .reduce(|best, m| if m.sse < best.sse { m } else { best })
        .expect("at least one restart"))
}

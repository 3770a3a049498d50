//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;
use sbs_load::clustering::{elbow_select_g, kmeans_best_of, nearest_centroid, ClusterCount, KMeansOptions};
use sbs_load::evaluation::{
    run_mlc_experiment, run_spatial_experiment, run_temporal_experiment, temporal_pipeline, write_fig2_csv,
    write_fig3_csv, write_fig7_csv, write_results_csv, ExperimentConfig, ResultRow, SpatialEstimator,
};
use sbs_load::lstm::{backward_bptt, evaluate_mae, LstmParams, TrainConfig};
use sbs_load::power::{bs_power, network_power, BsPowerProfile, BsRole};
use sbs_load::seed;
use sbs_load::spatial::{estimate_distance_weighted, Neighbor, NeighborSet, WeightingConfig};
use sbs_load::traffic::{
    average_day_profile, generate_clustered, generate_synthetic, make_windows, remove_outliers_zscore,
    split_train_test, zscore_outliers, CellId, ClusteredConfig, SyntheticConfig, TrafficSeries, WindowSample,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: f64, b: f64, tol: f64, what: &str) -> Result<(), String> {
    ensure((a - b).abs() <= tol, || format!("{what}: {a} vs {b} (tol {tol})"))
}

fn c01_power_exactness() -> Outcome {
    // (P_o, eta, P_t, P_s, load, expected)
    let cases = [
        (56.0, 2.6, 6.3, 6.0, 0.0, 6.0),
        (56.0, 2.6, 6.3, 6.0, 0.5, 64.19),
        (56.0, 2.6, 6.3, 6.0, 1.0, 72.38),
        (130.0, 4.7, 20.0, 75.0, 0.0, 75.0),
        (130.0, 4.7, 20.0, 75.0, 0.25, 153.5),
        (130.0, 4.7, 20.0, 75.0, 1.0, 224.0),
        (10.0, 1.0, 0.0, 0.0, 0.3, 10.0),
        (100.0, 2.0, 10.0, 50.0, 0.1, 102.0),
        (20.0, 3.0, 4.0, 1.0, 0.75, 29.0),
        (0.0, 1.0, 1.0, 0.0, 1e-9, 1e-9),
    ];
    for (i, &(po, eta, pt, ps, load, want)) in cases.iter().enumerate() {
        let p = BsPowerProfile::new(po, eta, pt, ps, BsRole::Sbs).map_err(|e| e.to_string())?;
        let got = bs_power(&p, load).map_err(|e| e.to_string())?;
        close(got, want, 1e-12, &format!("set {i}"))?;
    }
    let sbs = BsPowerProfile::default_sbs();
    let net = network_power(
        (&BsPowerProfile::default_haps(), 0.5),
        (&BsPowerProfile::default_mbs(), 0.8),
        &[(sbs, 0.0), (sbs, 0.5), (sbs, 1.0)],
    )
    .map_err(|e| e.to_string())?;
    close(net.haps, 177.0, 1e-12, "HAPS")?;
    close(net.mbs, 205.2, 1e-12, "MBS")?;
    close(net.total, 524.77, 1e-12, "network total")?;
    Ok(format!("{} single-station sets and one network sum", cases.len()))
}

fn c02_weighting_exactness() -> Outcome {
    let mut rng = seed::rng(2);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let k = rng.gen_range(1..30);
        let neighbors: Vec<Neighbor> = (0..k)
            .map(|i| Neighbor {
                id: CellId(i + 1),
                distance: rng.gen_range(100.0..3000.0),
                load: rng.gen_range(0.0..1.0),
            })
            .collect();
        let n = [0.5, 1.0, 2.0, 3.0, 5.0, 10.0][rng.gen_range(0..6)];
        let cfg = WeightingConfig::new(n).map_err(|e| e.to_string())?;
        let d_max = neighbors.iter().map(|nb| nb.distance).fold(0.0, f64::max);
        let (num, den) = neighbors.iter().fold((0.0, 0.0), |(a, b), nb| {
            let w = d_max / nb.distance.powf(n);
            (a + nb.load * w, b + w)
        });
        let ns = NeighborSet::new(CellId(0), neighbors.clone()).map_err(|e| e.to_string())?;
        let est = estimate_distance_weighted(&ns, cfg).map_err(|e| e.to_string())?;
        close(est, num / den, 1e-12, "direct formula")?;
        worst = worst.max((est - num / den).abs());
        for c in [1e-3, 7.3, 1e3] {
            let scaled: Vec<Neighbor> = neighbors.iter().map(|nb| Neighbor { distance: nb.distance * c, ..*nb }).collect();
            let ns = NeighborSet::new(CellId(0), scaled).map_err(|e| e.to_string())?;
            let other = estimate_distance_weighted(&ns, cfg).map_err(|e| e.to_string())?;
            close(other, est, 1e-12, "rescale invariance")?;
        }
    }
    Ok(format!("500 random sets, max |direct - estimate| = {worst:.1e}"))
}

const ORACLE_SEEDS: u64 = 20;

/// Pooled mean MAPE per `(n, N)` of the weighted nearest-neighbor estimator
/// over the oracle grid seeds.
fn weighted_sweep(exponents: &[f64], counts: &[usize], iterations: usize) -> Result<(BTreeMap<(String, usize), f64>, usize), String> {
    let mut pooled: BTreeMap<(String, usize), Vec<f64>> = BTreeMap::new();
    for s in 0..ORACLE_SEEDS {
        let grid = generate_synthetic(&SyntheticConfig { seed: s, ..SyntheticConfig::default() }).map_err(|e| e.to_string())?;
        let cfg = ExperimentConfig {
            estimators: vec![SpatialEstimator::DistanceWeighted],
            exponents: exponents.to_vec(),
            neighbor_counts: counts.to_vec(),
            iterations,
            seed: s,
            ..ExperimentConfig::default()
        };
        for row in run_spatial_experiment(&grid, &cfg).map_err(|e| e.to_string())? {
            let key = (row.param1.clone(), row.param2.parse::<usize>().map_err(|e| e.to_string())?);
            pooled.entry(key).or_default().extend(row.error.trials);
        }
    }
    let trials = pooled.values().next().map_or(0, Vec::len);
    let means = pooled.into_iter().map(|(k, v)| (k, v.iter().sum::<f64>() / v.len() as f64)).collect();
    Ok((means, trials))
}

fn c03_exponent_trend() -> Outcome {
    let (m, trials) = weighted_sweep(&[1.0, 3.0, 5.0], &[50], 10)?;
    ensure(trials >= 100, || format!("only {trials} trials"))?;
    let (e1, e3, e5) = (m[&("1".into(), 50)], m[&("3".into(), 50)], m[&("5".into(), 50)]);
    ensure(e1 > e3 && e3 > e5, || format!("ordering broken: n=1 {e1:.3}, n=3 {e3:.3}, n=5 {e5:.3}"))?;
    let reduction = (e1 - e5) / e1;
    ensure(reduction >= 0.25, || format!("reduction {:.1}% below 25%", 100.0 * reduction))?;
    Ok(format!(
        "N=50, {trials} trials: n=1 {e1:.3}% > n=3 {e3:.3}% > n=5 {e5:.3}%, reduction {:.1}%",
        100.0 * reduction
    ))
}

fn c04_neighbor_count_trend() -> Outcome {
    let (m, trials) = weighted_sweep(&[1.0], &[10, 200], 10)?;
    let (small, large) = (m[&("1".into(), 10)], m[&("1".into(), 200)]);
    ensure(large > small, || format!("N=200 {large:.3}% not above N=10 {small:.3}%"))?;
    Ok(format!("n=1, {trials} trials: N=200 {large:.3}% > N=10 {small:.3}%"))
}

fn c05_spread_trend() -> Outcome {
    let counts = [10, 50, 100, 200];
    let (m, _) = weighted_sweep(&[1.0, 10.0], &counts, 10)?;
    let spread = |n: &str| {
        let v: Vec<f64> = counts.iter().map(|&c| m[&(n.to_string(), c)]).collect();
        v.iter().copied().fold(f64::MIN, f64::max) - v.iter().copied().fold(f64::MAX, f64::min)
    };
    let (s1, s10) = (spread("1"), spread("10"));
    ensure(s10 < s1, || format!("spread at n=10 ({s10:.4}) not below n=1 ({s1:.4})"))?;
    Ok(format!("spread over N: n=10 {s10:.4} < n=1 {s1:.4}"))
}

/// Minimum SSE over every partition of the points into exactly `g` non-empty groups.
fn exhaustive_min_sse(points: &[Vec<f64>], g: usize) -> f64 {
    let n = points.len();
    let dim = points[0].len();
    let mut labels = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        let mut sums = vec![vec![0.0; dim]; g];
        let mut counts = vec![0usize; g];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            sums[l].iter_mut().zip(p).for_each(|(s, v)| *s += v);
        }
        if counts.iter().all(|&c| c > 0) {
            let sse: f64 = points
                .iter()
                .zip(&labels)
                .map(|(p, &l)| p.iter().zip(&sums[l]).map(|(v, s)| (v - s / counts[l] as f64).powi(2)).sum::<f64>())
                .sum();
            best = best.min(sse);
        }
        let mut i = 0;
        loop {
            if i == n {
                return best;
            }
            labels[i] += 1;
            if labels[i] < g {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
    }
}

fn c06_kmeans_oracle() -> Outcome {
    let mut rng = seed::rng(6);
    let opts = KMeansOptions::default();
    let mut fixed_points = 0;
    for inst in 0..30u64 {
        let g = rng.gen_range(1..=3);
        let n = rng.gen_range(g.max(2)..=8);
        let dim = rng.gen_range(1..=3);
        let points: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect();
        let oracle = exhaustive_min_sse(&points, g);
        let model = kmeans_best_of(&points, g, 10, inst, &opts).map_err(|e| e.to_string())?;
        close(model.sse, oracle, 1e-9, &format!("instance {inst} (n={n}, G={g})"))?;
        if model.converged {
            fixed_points += 1;
            for (i, p) in points.iter().enumerate() {
                ensure(nearest_centroid(p, &model.centroids) == model.assignment[i], || {
                    format!("instance {inst}: point {i} not at its nearest centroid")
                })?;
            }
            for k in 0..g {
                let members: Vec<usize> = model.members(k).collect();
                ensure(!members.is_empty(), || format!("instance {inst}: empty cluster {k}"))?;
                for d in 0..dim {
                    let mean = members.iter().map(|&i| points[i][d]).sum::<f64>() / members.len() as f64;
                    close(model.centroids[k][d], mean, 1e-12, &format!("instance {inst} centroid {k}"))?;
                }
            }
        }
    }
    Ok(format!("30 instances match the exhaustive optimum; {fixed_points} converged models are Lloyd fixed points"))
}

fn c07_elbow() -> Outcome {
    let mut hits = 0;
    let mut misses = Vec::new();
    for s in 0..20u64 {
        let cfg = ClusteredConfig { clusters: 3, noise_std: 0.02, seed: s, ..ClusteredConfig::default() };
        let (grid, _) = generate_clustered(&cfg).map_err(|e| e.to_string())?;
        let profiles: Vec<Vec<f64>> = grid.day_profiles().into_iter().map(|p| p.0).collect();
        let curve = elbow_select_g(&profiles, 1..=8, s).map_err(|e| e.to_string())?;
        if curve.g == 3 {
            hits += 1;
        } else {
            misses.push((s, curve.g));
        }
    }
    ensure(hits >= 18, || format!("G=3 in only {hits}/20 seeds; misses {misses:?}"))?;
    Ok(format!("G=3 recovered in {hits}/20 seeds"))
}

fn c08_mlc_convergence() -> Outcome {
    let (grid, _) = generate_clustered(&ClusteredConfig::default()).map_err(|e| e.to_string())?;
    let cfg = ExperimentConfig {
        layers: (1..=7).collect(),
        iterations: 4,
        sleeping_per_iteration: 10,
        seed: 8,
        ..ExperimentConfig::default()
    };
    let rows = run_mlc_experiment(&grid, &cfg).map_err(|e| e.to_string())?;
    let means: Vec<f64> = rows.iter().map(|r| r.error.mean).collect();
    ensure(means.len() == 7, || format!("expected 7 layer rows, got {}", means.len()))?;
    ensure(means.windows(2).all(|w| w[1] <= w[0]), || format!("not non-increasing: {means:?}"))?;
    ensure(means[6] < 1.0, || format!("MAPE(L=7) = {:.4}%", means[6]))?;
    Ok(format!("MAPE over L=1..7: {}", means.iter().map(|m| format!("{m:.2e}")).collect::<Vec<_>>().join(", ")))
}

fn c09_gradient_check() -> Outcome {
    let mut rng = seed::rng(9);
    let h_step = 1e-5;
    let mut worst = 0.0f64;
    for draw in 0..20u64 {
        let hidden = [2, 5][(draw % 2) as usize];
        let window = [3, 8][((draw / 2) % 2) as usize];
        let p = LstmParams::random(hidden, 1, 0.5, &mut rng).map_err(|e| e.to_string())?;
        let batch: Vec<WindowSample> = (0..4)
            .map(|_| WindowSample {
                input: (0..window).map(|_| rng.gen_range(0.0..1.0)).collect(),
                target: rng.gen_range(0.0..1.0),
            })
            .collect();
        let (_, grad) = backward_bptt(&p, &batch).map_err(|e| e.to_string())?;
        let analytic = grad.to_flat();
        let flat = p.to_flat();
        for i in 0..flat.len() {
            let at = |delta: f64| {
                let mut f = flat.clone();
                f[i] += delta;
                let q = LstmParams::from_flat(hidden, 1, &f).expect("same shape");
                evaluate_mae(&q, &batch).expect("valid batch")
            };
            let numeric = (at(h_step) - at(-h_step)) / (2.0 * h_step);
            // absolute floor keeps vanishing components from dominating
            let rel = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
            ensure(rel < 1e-4, || {
                format!("draw {draw} {}: analytic {} vs numeric {numeric}", p.describe_index(i), analytic[i])
            })?;
        }
    }
    Ok(format!("20 draws, max relative error {worst:.2e}"))
}

fn sine_oracle() -> Vec<f64> {
    (0..30 * 144).map(|t| 0.5 + 0.4 * (std::f64::consts::TAU * t as f64 / 144.0).sin()).collect()
}

fn c10_lstm_learning() -> Outcome {
    let values = sine_oracle();
    let run = |hidden: usize, window: usize| {
        let cfg = TrainConfig { hidden, seed: 10, ..TrainConfig::default() };
        temporal_pipeline(&values, window, &cfg, 2.5, 0.6, 10).map(|s| s.test_mape).map_err(|e| e.to_string())
    };
    let main = run(10, 12)?;
    ensure(main < 5.0, || format!("H=10, window 12: test MAPE {main:.3}%"))?;
    let (w12, w4) = (run(5, 12)?, run(5, 4)?);
    ensure(w12 < w4, || format!("H=5: window 12 {w12:.3}% not below window 4 {w4:.3}%"))?;
    Ok(format!("H=10/w=12 {main:.3}%; H=5: w=12 {w12:.3}% < w=4 {w4:.3}%"))
}

fn experiment_csvs() -> Result<Vec<Vec<u8>>, String> {
    let grid = generate_synthetic(&SyntheticConfig { grid_side: 8, num_days: 3, seed: 11, ..SyntheticConfig::default() })
        .map_err(|e| e.to_string())?;
    let cfg = ExperimentConfig {
        neighbor_counts: vec![5, 20],
        exponents: vec![1.0, 5.0],
        layers: vec![1, 2, 3],
        windows: vec![4, 8],
        units: vec![3],
        iterations: 3,
        sleeping_per_iteration: 2,
        temporal_cells: 2,
        train: TrainConfig { epochs: 2, ..TrainConfig::default() },
        mlc: sbs_load::clustering::MlcConfig { clusters: ClusterCount::Elbow { min: 1, max: 5 }, ..Default::default() },
        seed: 11,
        ..ExperimentConfig::default()
    };
    let spatial = run_spatial_experiment(&grid, &cfg).map_err(|e| e.to_string())?;
    let mlc = run_mlc_experiment(&grid, &cfg).map_err(|e| e.to_string())?;
    let temporal = run_temporal_experiment(&grid, &cfg).map_err(|e| e.to_string())?;
    let all: Vec<ResultRow> = spatial.iter().chain(&mlc).chain(&temporal).cloned().collect();
    let fig3: Vec<ResultRow> = mlc.iter().chain(&spatial).cloned().collect();
    let mut out = vec![Vec::new(); 4];
    write_results_csv(&all, &mut out[0]).map_err(|e| e.to_string())?;
    write_fig2_csv(&spatial, &mut out[1]).map_err(|e| e.to_string())?;
    write_fig3_csv(&fig3, &mut out[2]).map_err(|e| e.to_string())?;
    write_fig7_csv(&temporal, &mut out[3]).map_err(|e| e.to_string())?;
    Ok(out)
}

fn c11_determinism() -> Outcome {
    let first = experiment_csvs()?;
    let second = experiment_csvs()?;
    ensure(first == second, || "re-run produced different CSV bytes".into())?;
    let bytes: usize = first.iter().map(Vec::len).sum();
    Ok(format!("results, fig2, fig3, fig7 byte-identical across runs ({bytes} bytes)"))
}

fn c12_pipeline_fixtures() -> Outcome {
    let e = |r: sbs_load::Error| r.to_string();
    let mut outliers = vec![0.1; 19];
    outliers.push(0.9);
    let flags = zscore_outliers(&outliers, 2.5).map_err(e)?;
    ensure(flags.iter().filter(|&&f| f).count() == 1 && flags[19], || "z-score did not flag exactly 0.9".into())?;
    ensure(remove_outliers_zscore(&outliers, 2.5).map_err(e)? == vec![0.1; 19], || "0.9 not removed".into())?;
    ensure(remove_outliers_zscore(&[0.4; 6], 2.5).map_err(e)? == vec![0.4; 6], || "constant series changed".into())?;
    ensure(remove_outliers_zscore(&outliers, 1e9).map_err(e)? == outliers, || "huge threshold removed values".into())?;

    let w = make_windows(&[1.0, 2.0, 3.0, 4.0], 2).map_err(e)?;
    ensure(
        w == vec![
            WindowSample { input: vec![1.0, 2.0], target: 3.0 },
            WindowSample { input: vec![2.0, 3.0], target: 4.0 },
        ],
        || format!("windows {w:?}"),
    )?;
    ensure(make_windows(&[1.0, 2.0, 3.0], 2).map_err(e)?.len() == 1, || "boundary window count".into())?;
    ensure(make_windows(&[1.0, 2.0], 2).is_err(), || "length = window accepted".into())?;
    for len in [5usize, 20, 144] {
        let v: Vec<f64> = (0..len).map(|i| i as f64 / len as f64).collect();
        for win in 1..len {
            ensure(make_windows(&v, win).map_err(e)?.len() == len - win, || format!("count for len {len}, window {win}"))?;
        }
    }

    let (tr, te) = split_train_test((0..10).collect::<Vec<_>>(), 0.6, 1).map_err(e)?;
    ensure(tr.len() == 6 && te.len() == 4, || "10 samples did not split 6/4".into())?;
    let (tr, te) = split_train_test(vec![0, 1], 0.6, 1).map_err(e)?;
    ensure(tr.len() == 1 && te.len() == 1, || "2 samples did not split 1/1".into())?;

    let series = TrafficSeries::new(vec![0.1, 0.2, 0.3, 0.4], 2).map_err(e)?;
    let profile = average_day_profile(&series).map_err(e)?;
    ensure(profile.0 == vec![(0.1 + 0.3) / 2.0, (0.2 + 0.4) / 2.0], || format!("profile {:?}", profile.0))?;
    close(profile.0[0], 0.2, 1e-15, "profile slot 0")?;
    close(profile.0[1], 0.3, 1e-15, "profile slot 1")?;
    let one_day = TrafficSeries::new(vec![0.3, 0.7, 0.1], 3).map_err(e)?;
    ensure(average_day_profile(&one_day).map_err(e)?.0 == vec![0.3, 0.7, 0.1], || "single day profile".into())?;
    Ok("z-score, windowing, split and day-profile fixtures exact".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("power model exactness", c01_power_exactness),
        ("distance weighting exactness and rescale invariance", c02_weighting_exactness),
        ("error decreases with the exponent", c03_exponent_trend),
        ("error grows with neighbor count at n=1", c04_neighbor_count_trend),
        ("large exponent flattens the neighbor-count dependence", c05_spread_trend),
        ("k-means matches exhaustive partitions", c06_kmeans_oracle),
        ("elbow recovers three clusters", c07_elbow),
        ("multi-level clustering converges", c08_mlc_convergence),
        ("LSTM gradient check", c09_gradient_check),
        ("LSTM learns the diurnal sine", c10_lstm_learning),
        ("experiment CSVs are deterministic", c11_determinism),
        ("data pipeline micro-fixtures", c12_pipeline_fixtures),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS [{:>2}] {name} ({secs:.1}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL [{:>2}] {name} ({secs:.1}s): {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

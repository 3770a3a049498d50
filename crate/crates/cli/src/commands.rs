use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use sbs_load::clustering::mlc_estimate;
use sbs_load::evaluation::{
    mape, run_mlc_experiment, run_spatial_experiment, run_temporal_experiment, write_fig2_csv, write_fig3_csv,
    write_fig7_csv, write_results_csv, ResultRow, SpatialEstimator,
};
use sbs_load::lstm::{predict, train, ModelFile, TrainConfig};
use sbs_load::power::{network_power, BsPowerProfile, BsRole};
use sbs_load::spatial::{
    estimate_distance_weighted, estimate_unweighted_mean, select_nearest_active, select_random_active,
    WeightingConfig,
};
use sbs_load::traffic::{
    generate_clustered, generate_synthetic, ingest_cdr, make_windows_excluding, normalize_loads, write_cdr,
    zscore_outliers, CellId, TrafficGrid,
};
use sbs_load::{fmt_decimal, seed};
use serde::Deserialize;

use crate::config::{CliConfig, SourceKind};
use crate::{Figure, Method};

pub fn load_grid(cfg: &CliConfig) -> Result<TrafficGrid> {
    Ok(match cfg.data.source {
        SourceKind::Synthetic => generate_synthetic(&cfg.data.synthetic)?,
        SourceKind::Clustered => generate_clustered(&cfg.data.clustered)?.0,
        SourceKind::File => {
            let path = cfg.data.path.as_deref().expect("checked when the config was resolved");
            let grid = read_cdr(path, cfg)?;
            if cfg.data.schema.normalize {
                normalize_loads(&grid)?
            } else {
                grid
            }
        }
    })
}

fn read_cdr(path: &Path, cfg: &CliConfig) -> Result<TrafficGrid> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    ingest_cdr(io::BufReader::new(file), &cfg.data.schema.to_schema()?).with_context(|| format!("ingesting {}", path.display()))
}

fn create_out(cfg: &CliConfig, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let path = cfg.out.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok((path, BufWriter::new(file)))
}

pub fn synth(cfg: &CliConfig, file_name: &str) -> Result<()> {
    if cfg.data.source == SourceKind::File {
        bail!("synth needs a generated data source, not a file");
    }
    let grid = load_grid(cfg)?;
    let (path, mut sink) = create_out(cfg, file_name)?;
    write_cdr(&grid, &mut sink)?;
    sink.flush()?;
    eprintln!("wrote {} cells x {} slots to {}", grid.len(), grid.series_len(), path.display());
    Ok(())
}

pub struct EstimateArgs {
    pub method: Method,
    pub targets: Vec<u32>,
    pub slot: usize,
    pub neighbors: usize,
    pub exponent: f64,
    pub layers: usize,
    pub window: usize,
    pub save_model: bool,
}

/// Puts the targets to sleep and estimates their load at one time-of-day
/// slot. Spatial and clustering methods work on day profiles; the LSTM
/// forecasts the slot on the last recorded day from the target's own history.
pub fn estimate(cfg: &CliConfig, args: &EstimateArgs) -> Result<()> {
    let grid = load_grid(cfg)?;
    ensure!(!args.targets.is_empty(), "no target cells given");
    let spd = grid.slots_per_day();
    ensure!(args.slot < spd, "slot {} outside the {spd}-slot day", args.slot);
    let targets: Vec<CellId> = args.targets.iter().map(|&t| CellId(t)).collect();
    let mut active = vec![true; grid.len()];
    for &t in &targets {
        let idx = grid.index_of(t)?;
        ensure!(active[idx], "target {t} listed twice");
        active[idx] = false;
    }
    let profile_loads: Vec<f64> = grid.day_profiles().iter().map(|p| p.0[args.slot]).collect();

    let mut results: Vec<(CellId, f64, f64)> = Vec::with_capacity(targets.len());
    match args.method {
        Method::Mlc => {
            let mlc = sbs_load::clustering::MlcConfig {
                layers: args.layers,
                seed: cfg.seed,
                ..cfg.experiment.mlc.clone()
            };
            let out = mlc_estimate(&grid, &targets, args.slot, &mlc)?;
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            for (id, est) in out.estimates() {
                results.push((id, est, profile_loads[grid.index_of(id)?]));
            }
        }
        Method::Lstm => {
            for &t in &targets {
                let (est, actual, model) = lstm_forecast(&grid, t, args, &cfg.experiment.train, cfg)?;
                if args.save_model {
                    let (path, sink) = create_out(cfg, &format!("lstm_cell{}.json", t.0))?;
                    model.write_json(sink)?;
                    eprintln!("saved model to {}", path.display());
                }
                results.push((t, est, actual));
            }
        }
        spatial => {
            let weighting = WeightingConfig::new(args.exponent)?;
            for &t in &targets {
                let draw = seed::derive(cfg.seed, u64::from(t.0));
                let ns = match spatial {
                    Method::Mean | Method::Idw => {
                        select_nearest_active(&grid, t, args.neighbors, &profile_loads, Some(&active))?
                    }
                    _ => select_random_active(&grid, t, args.neighbors, &profile_loads, Some(&active), draw)?,
                };
                let est = match spatial {
                    Method::Mean | Method::Random => estimate_unweighted_mean(&ns)?,
                    _ => estimate_distance_weighted(&ns, weighting)?,
                };
                results.push((t, est, profile_loads[grid.index_of(t)?]));
            }
        }
    }

    let stdout = io::stdout();
    let mut w = csv::Writer::from_writer(stdout.lock());
    w.write_record(["cell_id", "method", "estimate", "actual", "ape"])?;
    for &(id, est, actual) in &results {
        let ape = mape(&[actual], &[est])?;
        w.write_record([id.0.to_string(), args.method.name().into(), fmt_decimal(est), fmt_decimal(actual), fmt_decimal(ape)])?;
    }
    w.flush()?;
    let actual: Vec<f64> = results.iter().map(|r| r.2).collect();
    let predicted: Vec<f64> = results.iter().map(|r| r.1).collect();
    eprintln!("MAPE over {} targets: {:.4}%", results.len(), mape(&actual, &predicted)?);
    Ok(())
}

fn lstm_forecast(
    grid: &TrafficGrid,
    target: CellId,
    args: &EstimateArgs,
    base: &TrainConfig,
    cfg: &CliConfig,
) -> Result<(f64, f64, ModelFile)> {
    let values = grid.cell(target)?.series.values();
    let at = (grid.series_len() / grid.slots_per_day() - 1) * grid.slots_per_day() + args.slot;
    ensure!(
        at > args.window + 1,
        "cell {target} has {at} slots of history before the forecast slot; window {} needs more",
        args.window
    );
    let history = &values[..at];
    let outliers = zscore_outliers(history, cfg.experiment.zscore_threshold)?;
    let samples = make_windows_excluding(history, args.window, &outliers)?;
    ensure!(!samples.is_empty(), "every training window of cell {target} touches an outlier");
    let train_cfg = TrainConfig {
        seed: seed::derive(cfg.seed, u64::from(target.0)),
        ..base.clone()
    };
    let outcome = train(&samples, &train_cfg)?;
    let est = predict(&outcome.params, &values[at - args.window..at])?;
    Ok((est, values[at], ModelFile::new(&outcome.params, args.window)))
}

pub fn experiment(cfg: &CliConfig, figure: Figure) -> Result<()> {
    let grid = load_grid(cfg)?;
    let (name, rows, fig_rows): (&str, Vec<ResultRow>, Vec<ResultRow>) = match figure {
        Figure::Fig2 => {
            let mut exp = cfg.experiment.clone();
            exp.estimators = vec![SpatialEstimator::DistanceWeighted];
            let rows = run_spatial_experiment(&grid, &exp)?;
            ("fig2.csv", rows.clone(), rows)
        }
        Figure::Fig3 => {
            let mlc = run_mlc_experiment(&grid, &cfg.experiment)?;
            let spatial = run_spatial_experiment(&grid, &cfg.experiment)?;
            let rows: Vec<ResultRow> = mlc.into_iter().chain(spatial).collect();
            ("fig3.csv", rows.clone(), rows)
        }
        Figure::Fig7 => {
            let rows = run_temporal_experiment(&grid, &cfg.experiment)?;
            ("fig7.csv", rows.clone(), rows)
        }
    };
    let (fig_path, mut sink) = create_out(cfg, name)?;
    match figure {
        Figure::Fig2 => write_fig2_csv(&fig_rows, &mut sink)?,
        Figure::Fig3 => write_fig3_csv(&fig_rows, &mut sink)?,
        Figure::Fig7 => write_fig7_csv(&fig_rows, &mut sink)?,
    }
    sink.flush()?;
    let (res_path, mut sink) = create_out(cfg, "results.csv")?;
    write_results_csv(&rows, &mut sink)?;
    sink.flush()?;
    eprintln!("wrote {} rows to {} and {}", rows.len(), fig_path.display(), res_path.display());
    Ok(())
}

#[derive(Debug, Deserialize)]
struct LoadRow {
    role: BsRole,
    load: f64,
}

/// Loads file rows are `role,load` with role `haps_smbs`, `mbs` or `sbs`;
/// exactly one HAPS and one macro row, any number of small cells.
pub fn power(cfg: &CliConfig, loads: &Path, write_csv: bool) -> Result<()> {
    let file = File::open(loads).with_context(|| format!("opening {}", loads.display()))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let (mut haps, mut mbs, mut sbs) = (Vec::new(), Vec::new(), Vec::new());
    for (i, row) in reader.deserialize::<LoadRow>().enumerate() {
        let row = row.with_context(|| format!("{} row {}", loads.display(), i + 1))?;
        match row.role {
            BsRole::HapsSmbs => haps.push(row.load),
            BsRole::Mbs => mbs.push(row.load),
            BsRole::Sbs => sbs.push(row.load),
        }
    }
    ensure!(haps.len() == 1, "expected exactly one haps_smbs row, found {}", haps.len());
    ensure!(mbs.len() == 1, "expected exactly one mbs row, found {}", mbs.len());
    let small: Vec<(BsPowerProfile, f64)> = sbs.iter().map(|&l| (cfg.power.sbs, l)).collect();
    let net = network_power((&cfg.power.haps, haps[0]), (&cfg.power.mbs, mbs[0]), &small)?;

    let mut text = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut text);
        w.write_record(["station", "role", "load", "power_w"])?;
        w.write_record(["haps", "haps_smbs", &haps[0].to_string(), &net.haps.to_string()])?;
        w.write_record(["mbs", "mbs", &mbs[0].to_string(), &net.mbs.to_string()])?;
        for (j, (load, p)) in sbs.iter().zip(&net.sbs).enumerate() {
            w.write_record([format!("sbs{j}"), "sbs".into(), load.to_string(), p.to_string()])?;
        }
        w.write_record(["total", "", "", &net.total.to_string()])?;
        w.flush()?;
    }
    io::stdout().write_all(&text)?;
    if write_csv {
        let (path, mut sink) = create_out(cfg, "power.csv")?;
        sink.write_all(&text)?;
        sink.flush()?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

pub fn ingest_check(cfg: &CliConfig, input: &Path) -> Result<()> {
    let grid = read_cdr(input, cfg)?;
    let nonzero = grid.cells().iter().filter(|c| c.series.values().iter().any(|&v| v > 0.0)).count();
    println!("cells,{}", grid.len());
    println!("active_cells,{nonzero}");
    println!("slots,{}", grid.series_len());
    println!("days,{}", grid.series_len() / grid.slots_per_day());
    println!("max_load,{}", grid.max_load());
    Ok(())
}

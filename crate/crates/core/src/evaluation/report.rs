use std::io::Write;

use super::ResultRow;
use crate::error::Result;
use crate::fmt_decimal;

/// `experiment,estimator,param1,param2,mean_mape,std_mape,trials`
pub fn write_results_csv<W: Write>(rows: &[ResultRow], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["experiment", "estimator", "param1", "param2", "mean_mape", "std_mape", "trials"])?;
    for r in rows {
        w.write_record([
            r.experiment.clone(),
            r.estimator.clone(),
            r.param1.clone(),
            r.param2.clone(),
            fmt_decimal(r.error.mean),
            fmt_decimal(r.error.std),
            r.error.count().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_long<W: Write>(rows: &[&ResultRow], header: [&str; 3], with_estimator: bool, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let mut head: Vec<&str> = Vec::new();
    if with_estimator {
        head.push("estimator");
    }
    head.extend(header[..2].iter().copied());
    head.extend(["mean_mape", "std_mape", header[2]]);
    w.write_record(&head)?;
    for r in rows {
        let mut rec: Vec<String> = Vec::new();
        if with_estimator {
            rec.push(r.estimator.clone());
        }
        rec.extend([
            r.param1.clone(),
            r.param2.clone(),
            fmt_decimal(r.error.mean),
            fmt_decimal(r.error.std),
            r.error.count().to_string(),
        ]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Weighted nearest-neighbor sweep: one row per `(n, N)`.
pub fn write_fig2_csv<W: Write>(rows: &[ResultRow], sink: W) -> Result<()> {
    let picked: Vec<&ResultRow> = rows.iter().filter(|r| r.estimator == "distance_weighted").collect();
    write_long(&picked, ["n", "N", "trials"], false, sink)
}

/// Method comparison: MLC per layer count next to the spatial baselines.
/// `param1`/`param2` are `(L, G)` for MLC and `(n, N)` for spatial rows.
pub fn write_fig3_csv<W: Write>(rows: &[ResultRow], sink: W) -> Result<()> {
    let picked: Vec<&ResultRow> = rows.iter().collect();
    write_long(&picked, ["param1", "param2", "trials"], true, sink)
}

/// LSTM sweep: one row per `(window, units)`.
pub fn write_fig7_csv<W: Write>(rows: &[ResultRow], sink: W) -> Result<()> {
    let picked: Vec<&ResultRow> = rows.iter().filter(|r| r.experiment == "temporal").collect();
    write_long(&picked, ["window", "units", "trials"], false, sink)
}

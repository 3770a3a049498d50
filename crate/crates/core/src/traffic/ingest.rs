use std::collections::HashMap;
use std::collections::hash_map::Entry;
use std::io::{Read, Write};

use super::{CellId, GridGeometry, TrafficGrid, TrafficSeries, SLOTS_PER_DAY, SLOT_MINUTES};
use crate::error::{invalid, Error, Result};
use crate::fmt_decimal;

/// Geometry and slot layout the CDR rows are interpreted against.
#[derive(Clone, Debug, PartialEq)]
pub struct CdrSchema {
    pub geometry: GridGeometry,
    pub slots_per_day: usize,
    pub slot_minutes: u32,
    /// Total slots per cell. When `None` it is inferred from the largest slot
    /// index, rounded up to whole days.
    pub num_slots: Option<usize>,
}

impl Default for CdrSchema {
    fn default() -> Self {
        Self {
            geometry: GridGeometry::default(),
            slots_per_day: SLOTS_PER_DAY,
            slot_minutes: SLOT_MINUTES,
            num_slots: None,
        }
    }
}

/// Collapses the three CDR activity counts into one raw load (plain sum).
pub fn aggregate_activities(calls: f64, texts: f64, internet: f64) -> Result<f64> {
    for (name, v) in [("calls", calls), ("texts", texts), ("internet", internet)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(invalid(format!("{name} activity must be finite and non-negative, got {v}")));
        }
    }
    Ok(calls + texts + internet)
}

enum Layout {
    Activities { calls: usize, texts: usize, internet: usize },
    Load(usize),
}

/// Reads `cell_id,slot,calls,texts,internet` or `cell_id,slot,load` rows.
///
/// Activity rows for the same (cell, slot) accumulate, as CDR exports split
/// one interval across several rows. Pre-aggregated `load` rows may repeat
/// only with the identical value. Slots without any row are zero.
pub fn ingest_cdr<R: Read>(source: R, schema: &CdrSchema) -> Result<TrafficGrid> {
    if schema.slots_per_day == 0 {
        return Err(invalid("slots_per_day must be positive"));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (cell_col, slot_col) = match (col("cell_id"), col("slot")) {
        (Some(c), Some(s)) => (c, s),
        _ => return Err(Error::MalformedRow {
            line: 1,
            message: "header must name cell_id and slot columns".into(),
        }),
    };
    let layout = match (col("calls"), col("texts"), col("internet"), col("load")) {
        (Some(calls), Some(texts), Some(internet), _) => Layout::Activities { calls, texts, internet },
        (_, _, _, Some(load)) => Layout::Load(load),
        _ => return Err(Error::MalformedRow {
            line: 1,
            message: "header must name calls,texts,internet or load".into(),
        }),
    };

    let mut loads: HashMap<(u32, usize), f64> = HashMap::new();
    let mut max_slot = 0usize;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| Error::MalformedRow { line, message };
        let field = |i: usize| record.get(i).ok_or_else(|| bad(format!("missing column {}", i + 1)));
        let number = |i: usize| -> Result<f64> {
            let raw = field(i)?;
            if raw.is_empty() {
                return Ok(0.0);
            }
            raw.parse::<f64>().map_err(|_| bad(format!("non-numeric value {raw:?}")))
        };

        let cell: u32 = field(cell_col)?
            .parse()
            .map_err(|_| bad(format!("invalid cell_id {:?}", record.get(cell_col).unwrap_or(""))))?;
        let slot: usize = field(slot_col)?
            .parse()
            .map_err(|_| bad(format!("invalid slot {:?}", record.get(slot_col).unwrap_or(""))))?;
        if cell as usize >= schema.geometry.cell_count() {
            return Err(bad(format!("cell_id {cell} outside the {0}x{0} grid", schema.geometry.side)));
        }
        if schema.num_slots.is_some_and(|n| slot >= n) {
            return Err(bad(format!("slot {slot} beyond the declared slot count")));
        }
        max_slot = max_slot.max(slot);

        match layout {
            Layout::Activities { calls, texts, internet } => {
                let load = aggregate_activities(number(calls)?, number(texts)?, number(internet)?)
                    .map_err(|e| bad(e.to_string()))?;
                *loads.entry((cell, slot)).or_insert(0.0) += load;
            }
            Layout::Load(i) => {
                let load = number(i)?;
                if !(load.is_finite() && load >= 0.0) {
                    return Err(bad(format!("load must be non-negative, got {load}")));
                }
                match loads.entry((cell, slot)) {
                    Entry::Vacant(e) => {
                        e.insert(load);
                    }
                    Entry::Occupied(e) if *e.get() != load => {
                        return Err(Error::ConflictingRecord {
                            cell,
                            slot,
                            first: *e.get(),
                            second: load,
                        });
                    }
                    Entry::Occupied(_) => {}
                }
            }
        }
    }
    if loads.is_empty() {
        return Err(Error::EmptyInput("CDR source has no data rows"));
    }

    let spd = schema.slots_per_day;
    let num_slots = schema.num_slots.unwrap_or_else(|| (max_slot / spd + 1) * spd);
    let mut per_cell: HashMap<u32, Vec<f64>> = HashMap::new();
    for ((cell, slot), load) in loads {
        per_cell.entry(cell).or_insert_with(|| vec![0.0; num_slots])[slot] = load;
    }
    let series = per_cell
        .into_iter()
        .map(|(cell, values)| {
            Ok((CellId(cell), TrafficSeries::with_slot_minutes(values, spd, schema.slot_minutes)?))
        })
        .collect::<Result<Vec<_>>>()?;
    TrafficGrid::from_series(schema.geometry, series)
}

/// Writes the grid as `cell_id,slot,load` rows, cells in id order.
pub fn write_cdr<W: Write>(grid: &TrafficGrid, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["cell_id", "slot", "load"])?;
    for cell in grid.cells() {
        for (slot, v) in cell.series.values().iter().enumerate() {
            w.write_record([cell.id.to_string(), slot.to_string(), fmt_decimal(*v)])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema(side: usize, spd: usize) -> CdrSchema {
        CdrSchema {
            geometry: GridGeometry::new(side, 235.0).unwrap(),
            slots_per_day: spd,
            ..CdrSchema::default()
        }
    }

    #[test]
    fn aggregate_is_plain_sum() {
        assert_eq!(aggregate_activities(0.0, 0.0, 0.0).unwrap(), 0.0);
        assert_eq!(aggregate_activities(1.0, 2.0, 3.0).unwrap(), 6.0);
        assert_eq!(aggregate_activities(5.0, 0.0, 0.0).unwrap(), 5.0);
        assert!(aggregate_activities(-1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn uniform_activity_rows() {
        let csv = "cell_id,slot,calls,texts,internet\n0,0,1,1,2\n0,1,1,1,2\n0,2,1,1,2\n";
        let grid = ingest_cdr(csv.as_bytes(), &schema(1, 3)).unwrap();
        assert_eq!(grid.len(), 1);
        assert_eq!(grid.cells()[0].series.values(), &[4.0, 4.0, 4.0]);
    }

    #[test]
    fn split_activity_rows_accumulate() {
        let csv = "cell_id,slot,calls,texts,internet\n0,0,2,0,0\n0,0,0,3,0\n";
        let grid = ingest_cdr(csv.as_bytes(), &schema(1, 1)).unwrap();
        assert_eq!(grid.cells()[0].series.values(), &[5.0]);
    }

    #[test]
    fn empty_activity_fields_count_as_zero() {
        let csv = "cell_id,slot,calls,texts,internet\n0,0,,2,\n";
        let grid = ingest_cdr(csv.as_bytes(), &schema(1, 1)).unwrap();
        assert_eq!(grid.cells()[0].series.values(), &[2.0]);
    }

    #[test]
    fn missing_slots_are_zero_filled() {
        let csv = "cell_id,slot,load\n0,0,1.5\n1,3,2\n";
        let grid = ingest_cdr(csv.as_bytes(), &schema(2, 2)).unwrap();
        assert_eq!(grid.cells()[0].series.values(), &[1.5, 0.0, 0.0, 0.0]);
        assert_eq!(grid.cells()[1].series.values(), &[0.0, 0.0, 0.0, 2.0]);
        assert_eq!(grid.cells()[1].position.x, 352.5);
    }

    #[test]
    fn non_numeric_row_names_line() {
        let csv = "cell_id,slot,load\n0,0,0.5\n0,1,abc\n";
        match ingest_cdr(csv.as_bytes(), &schema(1, 2)) {
            Err(Error::MalformedRow { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected malformed row, got {other:?}"),
        }
    }

    #[test]
    fn conflicting_loads_rejected() {
        let csv = "cell_id,slot,load\n0,0,0.5\n0,0,0.7\n";
        assert!(matches!(
            ingest_cdr(csv.as_bytes(), &schema(1, 1)),
            Err(Error::ConflictingRecord { cell: 0, slot: 0, .. })
        ));
        let same = "cell_id,slot,load\n0,0,0.5\n0,0,0.5\n";
        assert!(ingest_cdr(same.as_bytes(), &schema(1, 1)).is_ok());
    }

    #[test]
    fn empty_and_headerless_inputs() {
        assert!(matches!(
            ingest_cdr("cell_id,slot,load\n".as_bytes(), &schema(1, 1)),
            Err(Error::EmptyInput(_))
        ));
        assert!(ingest_cdr("a,b,c\n1,2,3\n".as_bytes(), &schema(1, 1)).is_err());
        assert!(ingest_cdr("".as_bytes(), &schema(1, 1)).is_err());
    }

    #[test]
    fn out_of_grid_cell_rejected() {
        let csv = "cell_id,slot,load\n4,0,0.5\n";
        assert!(matches!(
            ingest_cdr(csv.as_bytes(), &schema(2, 1)),
            Err(Error::MalformedRow { line: 2, .. })
        ));
    }

    #[test]
    fn write_then_ingest() {
        let csv = "cell_id,slot,load\n0,0,0.25\n0,1,1\n3,0,0.125\n3,1,0.5\n";
        let grid = ingest_cdr(csv.as_bytes(), &schema(2, 2)).unwrap();
        let mut out = Vec::new();
        write_cdr(&grid, &mut out).unwrap();
        let text = String::from_utf8(out.clone()).unwrap();
        assert!(text.starts_with("cell_id,slot,load\n0,0,2.500000000000e-1\n"));
        assert_eq!(ingest_cdr(out.as_slice(), &schema(2, 2)).unwrap(), grid);
    }
}

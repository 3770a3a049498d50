//! Grid traffic data: ingestion, normalization, day profiles, supervised
//! windows and a spatially correlated synthetic generator.

mod ingest;
mod prep;
mod synthetic;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub use ingest::{aggregate_activities, ingest_cdr, write_cdr, CdrSchema};
pub use prep::{
    average_day_profile, make_windows, make_windows_excluding, normalize_loads,
    remove_outliers_zscore, split_train_test, zscore_outliers, WindowSample,
};
pub use synthetic::{generate_clustered, generate_synthetic, ClusteredConfig, SyntheticConfig};

/// Default slot length of the CDR feed.
pub const SLOT_MINUTES: u32 = 10;
/// 24 h of 10-minute slots.
pub const SLOTS_PER_DAY: usize = 144;
/// Edge length of one square CDR grid cell.
pub const CELL_SIZE_M: f64 = 235.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellId(pub u32);

impl std::fmt::Display for CellId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Square lattice of `side × side` cells numbered row-major from 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub side: usize,
    pub cell_size: f64,
}

impl Default for GridGeometry {
    fn default() -> Self {
        // Milan grid: 100 × 100 cells of 235 m.
        Self {
            side: 100,
            cell_size: CELL_SIZE_M,
        }
    }
}

impl GridGeometry {
    pub fn new(side: usize, cell_size: f64) -> Result<Self> {
        if side == 0 || !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(invalid(format!(
                "grid geometry needs side >= 1 and positive cell size, got {side} x {cell_size}"
            )));
        }
        Ok(Self { side, cell_size })
    }

    pub fn cell_count(&self) -> usize {
        self.side * self.side
    }

    /// Center of the cell, row-major: `id = row * side + col`.
    pub fn position(&self, id: CellId) -> Result<Position> {
        let id = id.0 as usize;
        if id >= self.cell_count() {
            return Err(Error::UnknownCell(id as u32));
        }
        let (row, col) = (id / self.side, id % self.side);
        Ok(Position {
            x: (col as f64 + 0.5) * self.cell_size,
            y: (row as f64 + 0.5) * self.cell_size,
        })
    }
}

/// Per-slot load of one cell. Values are raw non-negative activity after
/// ingestion and lie in `[0, 1]` once the grid is normalized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrafficSeries {
    values: Vec<f64>,
    slot_minutes: u32,
    slots_per_day: usize,
}

impl TrafficSeries {
    pub fn new(values: Vec<f64>, slots_per_day: usize) -> Result<Self> {
        Self::with_slot_minutes(values, slots_per_day, SLOT_MINUTES)
    }

    pub fn with_slot_minutes(values: Vec<f64>, slots_per_day: usize, slot_minutes: u32) -> Result<Self> {
        if slots_per_day == 0 {
            return Err(invalid("slots_per_day must be positive"));
        }
        if values.is_empty() {
            return Err(Error::EmptyInput("traffic series"));
        }
        if values.len() % slots_per_day != 0 {
            return Err(Error::SeriesTooShort {
                len: values.len(),
                reason: format!("length is not a multiple of {slots_per_day} slots per day"),
            });
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(invalid(format!("traffic load must be finite and non-negative, got {v}")));
        }
        Ok(Self {
            values,
            slot_minutes,
            slots_per_day,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn slots_per_day(&self) -> usize {
        self.slots_per_day
    }

    pub fn slot_minutes(&self) -> u32 {
        self.slot_minutes
    }

    pub fn num_days(&self) -> usize {
        self.values.len() / self.slots_per_day
    }

    pub(crate) fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: self.values.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }
}

/// Mean load of each time-of-day slot over all days.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DayProfile(pub Vec<f64>);

impl DayProfile {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub id: CellId,
    pub position: Position,
    pub series: TrafficSeries,
}

/// Positioned cells sharing one slot layout, kept sorted by id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrafficGrid {
    geometry: GridGeometry,
    cells: Vec<CellRecord>,
}

impl TrafficGrid {
    /// Builds a grid from `(id, series)` pairs; positions follow `geometry`.
    pub fn from_series(
        geometry: GridGeometry,
        series: impl IntoIterator<Item = (CellId, TrafficSeries)>,
    ) -> Result<Self> {
        let mut cells = series
            .into_iter()
            .map(|(id, series)| {
                Ok(CellRecord {
                    id,
                    position: geometry.position(id)?,
                    series,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if cells.is_empty() {
            return Err(Error::EmptyInput("traffic grid"));
        }
        cells.sort_by_key(|c| c.id);
        if let Some(w) = cells.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(invalid(format!("duplicate cell id {}", w[0].id)));
        }
        let first = &cells[0].series;
        if let Some(c) = cells
            .iter()
            .find(|c| c.series.len() != first.len() || c.series.slots_per_day() != first.slots_per_day())
        {
            return Err(invalid(format!(
                "cell {} has a slot layout different from cell {}",
                c.id, cells[0].id
            )));
        }
        Ok(Self { geometry, cells })
    }

    pub fn geometry(&self) -> GridGeometry {
        self.geometry
    }

    pub fn cells(&self) -> &[CellRecord] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = CellId> + '_ {
        self.cells.iter().map(|c| c.id)
    }

    pub fn index_of(&self, id: CellId) -> Result<usize> {
        self.cells
            .binary_search_by_key(&id, |c| c.id)
            .map_err(|_| Error::UnknownCell(id.0))
    }

    pub fn cell(&self, id: CellId) -> Result<&CellRecord> {
        Ok(&self.cells[self.index_of(id)?])
    }

    pub fn series_len(&self) -> usize {
        self.cells[0].series.len()
    }

    pub fn slots_per_day(&self) -> usize {
        self.cells[0].series.slots_per_day()
    }

    pub fn max_load(&self) -> f64 {
        self.cells
            .iter()
            .flat_map(|c| c.series.values().iter().copied())
            .fold(0.0, f64::max)
    }

    /// Day profile of every cell, in cell order.
    pub fn day_profiles(&self) -> Vec<DayProfile> {
        self.cells
            .iter()
            .map(|c| average_day_profile(&c.series).expect("grid series are whole days"))
            .collect()
    }

    pub(crate) fn map_series(&self, f: impl Fn(&TrafficSeries) -> TrafficSeries) -> Self {
        Self {
            geometry: self.geometry,
            cells: self
                .cells
                .iter()
                .map(|c| CellRecord {
                    series: f(&c.series),
                    ..c.clone()
                })
                .collect(),
        }
    }
}

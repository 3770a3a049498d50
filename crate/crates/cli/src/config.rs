use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use sbs_load::evaluation::ExperimentConfig;
use sbs_load::power::BsPowerProfile;
use sbs_load::traffic::{CdrSchema, ClusteredConfig, GridGeometry, SyntheticConfig, CELL_SIZE_M, SLOTS_PER_DAY, SLOT_MINUTES};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Synthetic,
    Clustered,
    File,
}

/// Layout of an ingested CDR file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchemaSection {
    pub grid_side: usize,
    pub cell_size: f64,
    pub slots_per_day: usize,
    pub slot_minutes: u32,
    /// Scale raw activity counts into `[0, 1]` by the global maximum.
    pub normalize: bool,
}

impl Default for SchemaSection {
    fn default() -> Self {
        Self {
            grid_side: 100,
            cell_size: CELL_SIZE_M,
            slots_per_day: SLOTS_PER_DAY,
            slot_minutes: SLOT_MINUTES,
            normalize: true,
        }
    }
}

impl SchemaSection {
    pub fn to_schema(&self) -> Result<CdrSchema> {
        Ok(CdrSchema {
            geometry: GridGeometry::new(self.grid_side, self.cell_size)?,
            slots_per_day: self.slots_per_day,
            slot_minutes: self.slot_minutes,
            num_slots: None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataSection {
    pub source: SourceKind,
    /// CDR file, required when `source = "file"`.
    pub path: Option<PathBuf>,
    pub schema: SchemaSection,
    pub synthetic: SyntheticConfig,
    pub clustered: ClusteredConfig,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            source: SourceKind::Synthetic,
            path: None,
            schema: SchemaSection::default(),
            synthetic: SyntheticConfig::default(),
            clustered: ClusteredConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PowerSection {
    pub haps: BsPowerProfile,
    pub mbs: BsPowerProfile,
    pub sbs: BsPowerProfile,
}

impl Default for PowerSection {
    fn default() -> Self {
        Self {
            haps: BsPowerProfile::default_haps(),
            mbs: BsPowerProfile::default_mbs(),
            sbs: BsPowerProfile::default_sbs(),
        }
    }
}

/// Everything a run needs. Every field has a default, so an empty file
/// (or no file at all) is a valid configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CliConfig {
    /// Drives every random choice: generators, sleeping draws, training.
    pub seed: u64,
    pub out: PathBuf,
    pub data: DataSection,
    pub power: PowerSection,
    pub experiment: ExperimentConfig,
}

impl Default for CliConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            data: DataSection::default(),
            power: PowerSection::default(),
            experiment: ExperimentConfig::default(),
        }
    }
}

impl CliConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
            }
        }
    }

    /// Applies command-line overrides and pushes the global seed into every
    /// seeded section.
    pub fn resolve(mut self, seed: Option<u64>, out: Option<PathBuf>) -> Result<Self> {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(o) = out {
            self.out = o;
        }
        self.data.synthetic.seed = self.seed;
        self.data.clustered.seed = self.seed;
        self.experiment.seed = self.seed;
        match (self.data.source, &self.data.path) {
            (SourceKind::File, None) => bail!("data.source = \"file\" needs data.path"),
            (SourceKind::Synthetic | SourceKind::Clustered, Some(_)) => {
                bail!("data.path is set but data.source is not \"file\"; pick one data source")
            }
            _ => {}
        }
        for p in [&self.power.haps, &self.power.mbs, &self.power.sbs] {
            p.validate()?;
        }
        self.experiment.validate()?;
        Ok(self)
    }
}

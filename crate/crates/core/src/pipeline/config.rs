//! Run configuration: one JSON file plus command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphgen::GraphParams;
use crate::learning::ToyConfig;
use crate::oracle::NoiseConfig;
use crate::scene::Family;

/// Which layout families a command touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyFilter {
    Train,
    Test,
    #[default]
    All,
}

impl FamilyFilter {
    pub fn admits(self, f: Family) -> bool {
        match self {
            FamilyFilter::All => true,
            FamilyFilter::Train => f == Family::Train,
            FamilyFilter::Test => f == Family::Test,
        }
    }
}

impl std::str::FromStr for FamilyFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(FamilyFilter::Train),
            "test" => Ok(FamilyFilter::Test),
            "all" => Ok(FamilyFilter::All),
            _ => Err(Error::InvalidArgument(format!("unknown family '{s}'"))),
        }
    }
}

/// Default number of evaluation samples per layout.
pub const SAMPLES_PER_LAYOUT: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub library: PathBuf,
    pub family: FamilyFilter,
    pub samples: usize,
    pub seed: u64,
    pub noise_flip: f64,
    /// Radians.
    pub noise_dir_sigma: f64,
    pub graph: GraphParams,
    pub toy: ToyConfig,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            library: PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/layouts")),
            family: FamilyFilter::All,
            samples: SAMPLES_PER_LAYOUT,
            seed: 0,
            noise_flip: 0.0,
            noise_dir_sigma: 0.0,
            graph: GraphParams::default(),
            toy: ToyConfig::default(),
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }

    pub fn noise(&self) -> NoiseConfig {
        NoiseConfig::new(self.noise_flip, self.noise_dir_sigma)
    }
}

//! JSON description stored next to a steering tensor, enough to rebuild the
//! manifold it was sampled from.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wbarray::persist::{parse_config_str, RunConfig};
use wbarray::{Error, WidebandManifold};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    /// The narrow band the array observes.
    Field,
    /// The wide band used as the design target.
    Target,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ManifoldMeta {
    pub dims: Vec<usize>,
    pub band: Band,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub n_freq: usize,
    pub n_elements: usize,
    pub spacing_m: f64,
    pub radius_m: f64,
    /// Radians.
    pub angles: Vec<f64>,
    /// The full run configuration, in config-file syntax.
    pub config: String,
}

impl ManifoldMeta {
    pub fn new(cfg: &RunConfig, band: Band, angles: Vec<f64>) -> wbarray::Result<Self> {
        let grid = match band {
            Band::Field => cfg.field_grid()?,
            Band::Target => cfg.target_grid()?,
        };
        let ring = cfg.ring()?;
        Ok(Self {
            dims: vec![grid.n_points(), ring.n_elements(), angles.len()],
            band,
            carrier_hz: grid.carrier_hz(),
            bandwidth_hz: grid.bandwidth_hz(),
            n_freq: grid.n_points(),
            n_elements: ring.n_elements(),
            spacing_m: ring.spacing_m(),
            radius_m: ring.radius_m(),
            angles,
            config: cfg.to_config_string(),
        })
    }

    pub fn run_config(&self) -> wbarray::Result<RunConfig> {
        parse_config_str(&self.config)
    }

    pub fn manifold(&self) -> wbarray::Result<WidebandManifold> {
        let cfg = self.run_config()?;
        match self.band {
            Band::Field => cfg.field_manifold(),
            Band::Target => cfg.target_manifold(),
        }
    }

    pub fn write(&self, path: &Path) -> wbarray::Result<()> {
        let text = serde_json::to_string_pretty(self).expect("metadata serializes");
        fs::write(path, text)?;
        Ok(())
    }

    pub fn read(path: &Path) -> wbarray::Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Domain(format!("manifold sidecar {}: {e}", path.display())))
    }
}

/// `manifold.wbt` -> `manifold.wbt.json`.
pub fn path_for(tensor: &Path) -> PathBuf {
    let mut s = tensor.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

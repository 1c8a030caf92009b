use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{Layout, PathLoss};
use crate::error::{Error, Result};
use crate::model::GridDims;
use crate::sortpm::SortPmParams;

/// Noise floor that puts the default power grid across the accuracy
/// transition for four receive antennas.
pub const DEFAULT_NOISE_DBM: f64 = -80.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    SortPm,
    Bisect,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::SortPm => "sortpm",
            Method::Bisect => "bisect",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodSelector {
    SortPm,
    Bisect,
    #[default]
    Both,
}

impl MethodSelector {
    pub fn methods(self) -> &'static [Method] {
        match self {
            MethodSelector::SortPm => &[Method::SortPm],
            MethodSelector::Bisect => &[Method::Bisect],
            MethodSelector::Both => &[Method::SortPm, Method::Bisect],
        }
    }
}

impl FromStr for MethodSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sortpm" => Ok(Self::SortPm),
            "bisect" => Ok(Self::Bisect),
            "both" => Ok(Self::Both),
            other => Err(Error::Config(format!("unknown method `{other}`"))),
        }
    }
}

/// Everything a sweep needs. Serialized as TOML; missing keys take defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Grid columns (horizontal extent).
    pub n_h: usize,
    /// Grid rows (vertical extent).
    pub n_v: usize,
    /// Defect rectangle width in columns.
    pub defect_h: usize,
    /// Defect rectangle height in rows.
    pub defect_v: usize,
    /// Receive-antenna counts to sweep.
    pub antennas: Vec<usize>,
    /// Transmit powers to sweep, dBm.
    pub power_dbm: Vec<f64>,
    pub noise_dbm: f64,
    /// Drop receiver noise entirely.
    pub noiseless: bool,
    pub epsilon: f64,
    pub q: f64,
    pub k_max: usize,
    /// Per-test false-reject rate.
    pub alpha: f64,
    pub trials: usize,
    pub seed: u64,
    pub method: MethodSelector,
    pub layout: Layout,
    pub path_loss: PathLoss,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_h: 32,
            n_v: 32,
            defect_h: 4,
            defect_v: 4,
            antennas: vec![4],
            power_dbm: vec![0.0, 4.0, 8.0, 12.0, 16.0, 20.0],
            noise_dbm: DEFAULT_NOISE_DBM,
            noiseless: false,
            epsilon: 0.1,
            q: 0.1,
            k_max: 200,
            alpha: 1e-3,
            trials: 200,
            seed: 2024,
            method: MethodSelector::Both,
            layout: Layout::default(),
            path_loss: PathLoss::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn dims(&self) -> Result<GridDims> {
        GridDims::new(self.n_h, self.n_v).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn sortpm_params(&self) -> SortPmParams {
        SortPmParams {
            q: self.q,
            epsilon: self.epsilon,
            k_max: self.k_max,
        }
    }

    /// Sweep points in row order: antennas outer, power inner.
    pub fn points(&self) -> Vec<TrialPoint> {
        self.antennas
            .iter()
            .flat_map(|&antennas| {
                self.power_dbm.iter().map(move |&power_dbm| TrialPoint { power_dbm, antennas })
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        self.dims()?;
        if self.defect_h == 0 || self.defect_v == 0 || self.defect_h > self.n_h || self.defect_v > self.n_v {
            return bad(format!(
                "defect {}x{} does not fit a {}x{} grid",
                self.defect_h, self.defect_v, self.n_h, self.n_v
            ));
        }
        if self.antennas.is_empty() || self.antennas.contains(&0) {
            return bad("antenna list must be nonempty and positive".into());
        }
        if self.power_dbm.is_empty() || self.power_dbm.iter().any(|p| !p.is_finite()) {
            return bad("power grid must be nonempty and finite".into());
        }
        if !self.noise_dbm.is_finite() {
            return bad("noise power must be finite".into());
        }
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha {} outside (0, 1)", self.alpha));
        }
        self.sortpm_params()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}

/// One sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialPoint {
    pub power_dbm: f64,
    pub antennas: usize,
}

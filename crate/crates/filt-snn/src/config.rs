//! Run configuration: one JSON file describing topology, kernel and encoder
//! parameters, the simulation window, training hyperparameters, and where
//! the dataset lives.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::encoder::EncoderParams;
use crate::error::{Error, Result};
use crate::network::Topology;
use crate::neuron::{KernelParams, SimWindow};
use crate::plasticity::TrainConfig;

/// Environment variable that overrides [`DataConfig::dir`].
pub const DATA_DIR_ENV: &str = "FILT_SNN_DATA_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowConfig {
    pub duration: f64,
    pub dt: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig { duration: 10.0, dt: 0.1 }
    }
}

impl WindowConfig {
    pub fn build(&self) -> Result<SimWindow> {
        SimWindow::new(self.duration, self.dt)
    }
}

/// Where the IDX files live and how much of them to use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Directory holding the four IDX files. Overridden by
    /// `FILT_SNN_DATA_DIR` when set.
    pub dir: String,
    pub train_images: String,
    pub train_labels: String,
    pub test_images: String,
    pub test_labels: String,
    /// Cap on training samples (deterministic subset), None for all.
    pub train_subset: Option<usize>,
    /// Cap on test samples, None for all.
    pub test_subset: Option<usize>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            dir: "data".into(),
            train_images: "train-images-idx3-ubyte".into(),
            train_labels: "train-labels-idx1-ubyte".into(),
            test_images: "test-images-idx3-ubyte".into(),
            test_labels: "test-labels-idx1-ubyte".into(),
            train_subset: None,
            test_subset: None,
        }
    }
}

impl DataConfig {
    /// Effective dataset directory after the environment override.
    pub fn resolved_dir(&self) -> PathBuf {
        match std::env::var(DATA_DIR_ENV) {
            Ok(d) if !d.is_empty() => PathBuf::from(d),
            _ => PathBuf::from(&self.dir),
        }
    }

    pub fn train_paths(&self) -> (PathBuf, PathBuf) {
        let dir = self.resolved_dir();
        (dir.join(&self.train_images), dir.join(&self.train_labels))
    }

    pub fn test_paths(&self) -> (PathBuf, PathBuf) {
        let dir = self.resolved_dir();
        (dir.join(&self.test_images), dir.join(&self.test_labels))
    }
}

/// Everything a training run needs, as read from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Layer sizes, inputs first.
    pub topology: Vec<usize>,
    pub kernel: KernelParams,
    pub encoder: EncoderParams,
    pub window: WindowConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
    pub output_dir: String,
    /// Evaluate on the test set every this many batches.
    pub eval_every: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            topology: vec![784, 100, 10],
            kernel: KernelParams::default(),
            encoder: EncoderParams::default(),
            window: WindowConfig::default(),
            train: TrainConfig::default(),
            data: DataConfig::default(),
            output_dir: "runs/default".into(),
            eval_every: 25,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config(format!("read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        Topology::new(self.topology.clone())?;
        self.kernel.validate()?;
        self.encoder.validate()?;
        self.window.build()?;
        self.train.validate()?;
        if self.eval_every == 0 {
            return Err(Error::config("eval_every must be positive"));
        }
        Ok(())
    }

    pub fn topology(&self) -> Result<Topology> {
        Topology::new(self.topology.clone())
    }

    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_json() {
        let cfg = RunConfig::default();
        let text = cfg.to_json_pretty();
        let back = RunConfig::from_json(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn empty_object_is_all_defaults() {
        let cfg = RunConfig::from_json("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn partial_override_keeps_other_defaults() {
        let cfg = RunConfig::from_json(r#"{"topology": [784, 40, 10], "train": {"eta": 0.1}}"#)
            .unwrap();
        assert_eq!(cfg.topology, vec![784, 40, 10]);
        assert_eq!(cfg.train.eta, 0.1);
        assert_eq!(cfg.train.beta, 0.9);
        assert_eq!(cfg.eval_every, 25);
    }

    #[test]
    fn unknown_field_is_rejected() {
        let err = RunConfig::from_json(r#"{"learning_rate": 0.1}"#).unwrap_err();
        assert!(err.to_string().contains("learning_rate"));
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(RunConfig::from_json(r#"{"topology": [784]}"#).is_err());
        assert!(RunConfig::from_json(r#"{"train": {"eta": -1.0}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"window": {"duration": 10.0, "dt": 0.3}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"eval_every": 0}"#).is_err());
    }

    #[test]
    fn env_var_overrides_data_dir() {
        // Serial with other env tests by virtue of unique var usage here.
        let cfg = RunConfig::default();
        std::env::remove_var(DATA_DIR_ENV);
        assert_eq!(cfg.data.resolved_dir(), PathBuf::from("data"));
        std::env::set_var(DATA_DIR_ENV, "/somewhere/else");
        assert_eq!(cfg.data.resolved_dir(), PathBuf::from("/somewhere/else"));
        let (imgs, labs) = cfg.data.train_paths();
        assert_eq!(imgs, PathBuf::from("/somewhere/else/train-images-idx3-ubyte"));
        assert_eq!(labs, PathBuf::from("/somewhere/else/train-labels-idx1-ubyte"));
        std::env::remove_var(DATA_DIR_ENV);
    }
}

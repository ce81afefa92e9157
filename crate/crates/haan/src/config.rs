//! JSON training configuration.

use std::path::{Path, PathBuf};

use haan_core::losses::LossWeights;
use haan_core::networks::ArchConfig;
use haan_core::optim::Adam;
use serde::{Deserialize, Serialize};

use crate::error::{HaanError, Result};

/// Objective weights, in the order adversarial (removal, refinement,
/// synthesis), cycle (foggy, fog-free), perceptual.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lambdas {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
    pub lambda5: f64,
    pub lambda6: f64,
}

impl Default for Lambdas {
    fn default() -> Self {
        let w = LossWeights::default();
        Self {
            lambda1: w.adv_r,
            lambda2: w.adv_ctr,
            lambda3: w.adv_s,
            lambda4: w.cyc_fog,
            lambda5: w.cyc_fogfree,
            lambda6: w.perceptual,
        }
    }
}

impl From<Lambdas> for LossWeights {
    fn from(l: Lambdas) -> Self {
        Self {
            adv_r: l.lambda1,
            adv_ctr: l.lambda2,
            adv_s: l.lambda3,
            cyc_fog: l.lambda4,
            cyc_fogfree: l.lambda5,
            perceptual: l.lambda6,
        }
    }
}

/// Settings shared by `train` and `train-ssm`. Missing fields take their
/// defaults; unknown fields are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub image_size: usize,
    pub width_scale: usize,
    pub lr: f64,
    /// Discriminator learning rate; `lr` when absent.
    pub d_lr: Option<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Overrides `epochs` when set.
    pub iterations: Option<u64>,
    pub lambdas: Lambdas,
    pub seed: u64,
    /// Foggy images; synthetic scenes are generated when absent.
    pub fog_dir: Option<PathBuf>,
    /// Fog-free images (HAAN) or enhancement targets (sky model).
    pub clear_dir: Option<PathBuf>,
    /// Binary sky masks paired with `fog_dir` by file stem (sky model).
    pub mask_dir: Option<PathBuf>,
    /// Number of synthetic scenes when no directories are given.
    pub synthetic_count: usize,
    pub ssm_checkpoint: Option<PathBuf>,
    pub checkpoint_out: PathBuf,
    /// Checkpoint to continue from.
    pub resume: Option<PathBuf>,
    /// Loss log (JSON lines); defaults to `checkpoint_out` with a `.jsonl`
    /// extension.
    pub log_path: Option<PathBuf>,
    pub log_interval: u64,
    /// Intermediate checkpoints every this many iterations (0 = only at the end).
    pub checkpoint_interval: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let arch = ArchConfig::desk();
        let adam = Adam::default();
        Self {
            image_size: arch.image_size,
            width_scale: arch.width_scale,
            lr: adam.lr,
            d_lr: None,
            beta1: adam.beta1,
            beta2: adam.beta2,
            batch_size: 2,
            epochs: 15,
            iterations: None,
            lambdas: Lambdas::default(),
            seed: 0,
            fog_dir: None,
            clear_dir: None,
            mask_dir: None,
            synthetic_count: 16,
            ssm_checkpoint: None,
            checkpoint_out: PathBuf::from("haan.ckpt"),
            resume: None,
            log_path: None,
            log_interval: 1,
            checkpoint_interval: 0,
        }
    }
}

impl TrainConfig {
    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|source| HaanError::Json { path: origin.to_path_buf(), source })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HaanError::io(path, e))?;
        Self::from_json(&text, path)
    }

    pub fn arch(&self) -> ArchConfig {
        ArchConfig { width_scale: self.width_scale, image_size: self.image_size, ..ArchConfig::desk() }
    }

    pub fn adam(&self) -> Adam {
        Adam { lr: self.lr, beta1: self.beta1, beta2: self.beta2, ..Adam::default() }
    }

    pub fn disc_adam(&self) -> Adam {
        Adam { lr: self.d_lr.unwrap_or(self.lr), ..self.adam() }
    }

    pub fn weights(&self) -> LossWeights {
        self.lambdas.into()
    }

    pub fn log_path(&self) -> PathBuf {
        self.log_path.clone().unwrap_or_else(|| self.checkpoint_out.with_extension("jsonl"))
    }

    /// Checks values and that every referenced input path exists.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HaanError::Config(m));
        for (name, lr) in [("lr", Some(self.lr)), ("d_lr", self.d_lr)] {
            if let Some(lr) = lr.filter(|lr| !(*lr > 0.0 && lr.is_finite())) {
                return bad(format!("{name} must be positive, got {lr}"));
            }
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} must lie in [0, 1), got {b}"));
            }
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.log_interval == 0 {
            return bad("log_interval must be at least 1".into());
        }
        self.arch().validate()?;
        self.weights().validate()?;
        let dirs = [("fog_dir", &self.fog_dir), ("clear_dir", &self.clear_dir), ("mask_dir", &self.mask_dir)];
        for (name, dir) in dirs {
            if let Some(d) = dir {
                if !d.is_dir() {
                    return Err(HaanError::io(d, std::io::Error::new(std::io::ErrorKind::NotFound, format!("{name} is not a directory"))));
                }
            }
        }
        for p in [&self.ssm_checkpoint, &self.resume].into_iter().flatten() {
            if !p.is_file() {
                return Err(HaanError::io(p, std::io::Error::new(std::io::ErrorKind::NotFound, "file not found")));
            }
        }
        Ok(())
    }
}

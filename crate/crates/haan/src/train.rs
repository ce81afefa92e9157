//! Training drivers: dataset assembly, per-step sampling, loss logging and
//! checkpointing around the core trainers.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use haan_core::asm::AtmosphericLight;
use haan_core::image::ImageRGB;
use haan_core::networks::{Network, SkySegmentation};
use haan_core::optim::AdamState;
use haan_core::synthetic::{fogged_set, sample_airlight};
use haan_core::training::{estimate_airlight, signed_batch, Batch, HaanModels, SsmBatch, SsmReport, SsmTrainer, StepReport, Trainer};
use haan_core::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::checkpoint::Checkpoint;
use crate::config::TrainConfig;
use crate::error::{HaanError, Result};
use crate::image_io::{list_pngs, read_png, stem};

/// RNG stream used to initialize network weights.
pub const INIT_STREAM: u64 = u64::MAX;
/// RNG stream used to generate synthetic datasets.
pub const DATA_STREAM: u64 = u64::MAX - 1;

/// Deterministic generator for `(seed, stream)`; iteration `t` uses stream `t`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Unpaired foggy and fog-free training images (unit range, square).
#[derive(Clone, Debug)]
pub struct HaanData {
    pub foggy: Vec<ImageRGB>,
    /// Airlight estimated on each foggy image.
    pub foggy_airlight: Vec<[f64; 3]>,
    pub clear: Vec<ImageRGB>,
}

fn read_dir_images(dir: &Path, size: usize) -> Result<Vec<(String, ImageRGB)>> {
    list_pngs(dir)?.into_iter().map(|p| Ok((stem(&p), read_png(&p)?.resize(size, size)?))).collect()
}

impl HaanData {
    /// Loads the configured directories, or synthesizes `synthetic_count`
    /// fogged toy scenes (foggy and clear domains drawn from the same scenes,
    /// sampled independently during training).
    pub fn load(cfg: &TrainConfig, mut ssm: Option<&mut SkySegmentation<f32>>) -> Result<Self> {
        let size = cfg.image_size;
        let (foggy, clear): (Vec<ImageRGB>, Vec<ImageRGB>) = match (&cfg.fog_dir, &cfg.clear_dir) {
            (Some(f), Some(c)) => (
                read_dir_images(f, size)?.into_iter().map(|x| x.1).collect(),
                read_dir_images(c, size)?.into_iter().map(|x| x.1).collect(),
            ),
            (None, None) => {
                let set = fogged_set(&mut rng_for(cfg.seed, DATA_STREAM), cfg.synthetic_count, size, size)?;
                set.into_iter().map(|s| (s.foggy, s.scene.clear)).unzip()
            }
            _ => return Err(HaanError::Config("fog_dir and clear_dir must be given together".into())),
        };
        if foggy.is_empty() || clear.is_empty() {
            return Err(HaanError::Config("training needs at least one foggy and one clear image".into()));
        }
        let foggy_airlight = foggy
            .iter()
            .map(|img| Ok(estimate_airlight(ssm.as_deref_mut(), img)?.0.rgb()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { foggy, foggy_airlight, clear })
    }

    /// Batch for iteration `step`, drawn with replacement from both domains.
    pub fn batch(&self, seed: u64, step: u64, batch_size: usize) -> Result<Batch<f32>> {
        let mut rng = rng_for(seed, step);
        let fi: Vec<usize> = (0..batch_size).map(|_| rng.random_range(0..self.foggy.len())).collect();
        let ci: Vec<usize> = (0..batch_size).map(|_| rng.random_range(0..self.clear.len())).collect();
        let synth: Vec<[f64; 3]> = ci.iter().map(|_| sample_airlight(&mut rng).rgb()).collect();
        let foggy: Vec<ImageRGB> = fi.iter().map(|&i| self.foggy[i].clone()).collect();
        let clear: Vec<ImageRGB> = ci.iter().map(|&i| self.clear[i].clone()).collect();
        Ok(Batch::from_images(&foggy, fi.iter().map(|&i| self.foggy_airlight[i]).collect(), &clear, synth)?)
    }

    pub fn iterations_per_epoch(&self, batch_size: usize) -> u64 {
        self.foggy.len().max(self.clear.len()).div_ceil(batch_size) as u64
    }
}

/// One line of the HAAN loss log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LossRecord {
    pub step: u64,
    pub adv_r: f64,
    pub adv_ctr: f64,
    pub adv_s: f64,
    pub cyc1: f64,
    pub cyc2: f64,
    pub perc: f64,
    pub total: f64,
    pub d_fogfree: f64,
    pub d_foggy: f64,
}

impl From<&StepReport> for LossRecord {
    fn from(r: &StepReport) -> Self {
        let c = r.components;
        Self {
            step: r.step,
            adv_r: c.adv_r,
            adv_ctr: c.adv_ctr,
            adv_s: c.adv_s,
            cyc1: c.cyc1,
            cyc2: c.cyc2,
            perc: c.perc,
            total: r.total,
            d_fogfree: r.d_fogfree,
            d_foggy: r.d_foggy,
        }
    }
}

struct LossLog(BufWriter<File>);

impl LossLog {
    fn open(path: &Path, append: bool) -> Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| HaanError::io(dir, e))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .append(append)
            .truncate(!append)
            .open(path)
            .map_err(|e| HaanError::io(path, e))?;
        Ok(Self(BufWriter::new(file)))
    }

    fn write<S: Serialize>(&mut self, path: &Path, record: &S) -> Result<()> {
        let line = serde_json::to_string(record).expect("records serialize");
        writeln!(self.0, "{line}").and_then(|_| self.0.flush()).map_err(|e| HaanError::io(path, e))
    }
}

/// Target iteration count of a run.
pub fn total_iterations(cfg: &TrainConfig, per_epoch: u64) -> u64 {
    cfg.iterations.unwrap_or(cfg.epochs as u64 * per_epoch)
}

/// Outcome of a training run.
#[derive(Clone, Debug)]
pub struct TrainOutcome<R> {
    pub checkpoint: Checkpoint,
    /// Reports of the iterations run by this invocation.
    pub reports: Vec<R>,
}

fn save_verified(ck: &Checkpoint, path: &Path) -> Result<()> {
    ck.save(path)?;
    if Checkpoint::load(path)? != *ck {
        return Err(HaanError::format("reload", format!("{} does not read back identically", path.display())));
    }
    Ok(())
}

fn load_ssm(cfg: &TrainConfig) -> Result<Option<SkySegmentation<f32>>> {
    cfg.ssm_checkpoint.as_deref().map(|p| Checkpoint::load(p)?.ssm()).transpose()
}

/// Joint training of the defogging, synthesizing and fusion generators
/// with both discriminators. `progress` sees every iteration's report.
pub fn train(cfg: &TrainConfig, mut progress: impl FnMut(&StepReport)) -> Result<TrainOutcome<StepReport>> {
    cfg.validate()?;
    let mut ssm = load_ssm(cfg)?;
    let data = HaanData::load(cfg, ssm.as_mut())?;
    let arch = cfg.arch();
    let mut trainer = match &cfg.resume {
        Some(p) => {
            let ck = Checkpoint::load(p)?;
            if ck.arch()? != arch {
                return Err(HaanError::Config(format!("{} was trained with a different architecture", p.display())));
            }
            ck.to_trainer(cfg.adam(), cfg.weights())?
        }
        None => {
            let models = HaanModels::new(&arch, &mut rng_for(cfg.seed, INIT_STREAM));
            Trainer::new(arch, models, cfg.adam(), cfg.weights())?
        }
    };
    trainer.disc_adam = cfg.disc_adam();
    let total = total_iterations(cfg, data.iterations_per_epoch(cfg.batch_size));
    let log_path = cfg.log_path();
    let mut log = LossLog::open(&log_path, cfg.resume.is_some())?;
    let mut reports = Vec::new();
    while trainer.step < total {
        let batch = data.batch(cfg.seed, trainer.step + 1, cfg.batch_size)?;
        let report = trainer.train_step(&batch)?;
        if report.step % cfg.log_interval == 0 {
            log.write(&log_path, &LossRecord::from(&report))?;
        }
        progress(&report);
        reports.push(report);
        if cfg.checkpoint_interval > 0 && report.step % cfg.checkpoint_interval == 0 && report.step < total {
            Checkpoint::from_trainer(&trainer, ssm.as_ref()).save(&cfg.checkpoint_out)?;
        }
    }
    let checkpoint = Checkpoint::from_trainer(&trainer, ssm.as_ref());
    save_verified(&checkpoint, &cfg.checkpoint_out)?;
    Ok(TrainOutcome { checkpoint, reports })
}

/// Foggy images with sky masks and fog-free enhancement targets.
#[derive(Clone, Debug)]
pub struct SkyData {
    pub foggy: Vec<ImageRGB>,
    /// Row-major binary masks, 1 on sky.
    pub masks: Vec<Vec<f64>>,
    pub clear: Vec<ImageRGB>,
    /// Airlight used to fog each image, when known.
    pub airlight: Vec<Option<AtmosphericLight>>,
}

impl SkyData {
    /// Loads `fog_dir`, `mask_dir` and `clear_dir` paired by stem, or
    /// synthesizes `synthetic_count` labeled toy scenes.
    pub fn load(cfg: &TrainConfig) -> Result<Self> {
        let size = cfg.image_size;
        match (&cfg.fog_dir, &cfg.mask_dir, &cfg.clear_dir) {
            (None, None, None) => {
                let set = fogged_set(&mut rng_for(cfg.seed, DATA_STREAM), cfg.synthetic_count, size, size)?;
                let mut d = Self { foggy: vec![], masks: vec![], clear: vec![], airlight: vec![] };
                for s in set {
                    d.foggy.push(s.foggy);
                    d.masks.push(s.scene.sky_mask);
                    d.clear.push(s.scene.clear);
                    d.airlight.push(Some(s.airlight));
                }
                Ok(d)
            }
            (Some(f), Some(m), Some(c)) => {
                let masks = read_dir_images(m, size)?;
                let clear = read_dir_images(c, size)?;
                let mut d = Self { foggy: vec![], masks: vec![], clear: vec![], airlight: vec![] };
                for (name, img) in read_dir_images(f, size)? {
                    let mask = masks.iter().find(|(n, _)| *n == name);
                    let target = clear.iter().find(|(n, _)| *n == name);
                    let (Some((_, mask)), Some((_, target))) = (mask, target) else {
                        return Err(HaanError::Config(format!("`{name}` lacks a mask or clear image with the same stem")));
                    };
                    d.foggy.push(img);
                    d.masks.push(mask.gray().into_iter().map(|v| if v > 0.5 { 1.0 } else { 0.0 }).collect());
                    d.clear.push(target.clone());
                    d.airlight.push(None);
                }
                if d.foggy.is_empty() {
                    return Err(HaanError::Config("sky training needs at least one image".into()));
                }
                Ok(d)
            }
            _ => Err(HaanError::Config("fog_dir, mask_dir and clear_dir must be given together".into())),
        }
    }

    pub fn batch(&self, seed: u64, step: u64, batch_size: usize) -> Result<SsmBatch<f32>> {
        let mut rng = rng_for(seed, step);
        let idx: Vec<usize> = (0..batch_size).map(|_| rng.random_range(0..self.foggy.len())).collect();
        let (h, w) = (self.foggy[0].height(), self.foggy[0].width());
        let masks: Vec<Tensor<f32>> = idx
            .iter()
            .map(|&i| Tensor::new(&[1, 1, h, w], self.masks[i].iter().map(|&v| v as f32).collect()))
            .collect::<haan_core::Result<_>>()?;
        let foggy: Vec<ImageRGB> = idx.iter().map(|&i| self.foggy[i].clone()).collect();
        let clear: Vec<ImageRGB> = idx.iter().map(|&i| self.clear[i].clone()).collect();
        Ok(SsmBatch { foggy: signed_batch(&foggy)?, mask: Tensor::stack_batch(&masks)?, clear: signed_batch(&clear)? })
    }
}

/// One line of the sky-model loss log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SsmRecord {
    pub step: u64,
    pub bce: f64,
    pub enhance: f64,
    pub total: f64,
}

/// Supervised training of the sky segmentation model.
pub fn train_ssm(cfg: &TrainConfig, mut progress: impl FnMut(&SsmReport)) -> Result<TrainOutcome<SsmReport>> {
    cfg.validate()?;
    if cfg.image_size % 8 != 0 {
        return Err(HaanError::Config(format!("image_size {} must be a multiple of 8 for the sky model", cfg.image_size)));
    }
    let data = SkyData::load(cfg)?;
    let arch = cfg.arch();
    let mut trainer = match &cfg.resume {
        Some(p) => {
            let ck = Checkpoint::load(p)?;
            if ck.arch()? != arch {
                return Err(HaanError::Config(format!("{} was trained with a different architecture", p.display())));
            }
            let model = ck.ssm()?;
            let mut state = AdamState::new(model.params());
            ck.restore_adam(model.params(), &mut state)?;
            SsmTrainer { model, state, adam: cfg.adam(), step: ck.step }
        }
        None => SsmTrainer::new(SkySegmentation::new(&arch, &mut rng_for(cfg.seed, INIT_STREAM)), cfg.adam()),
    };
    let total = cfg.iterations.unwrap_or(cfg.epochs as u64 * data.foggy.len().div_ceil(cfg.batch_size) as u64);
    let log_path = cfg.log_path();
    let mut log = LossLog::open(&log_path, cfg.resume.is_some())?;
    let mut reports = Vec::new();
    while trainer.step < total {
        let batch = data.batch(cfg.seed, trainer.step + 1, cfg.batch_size)?;
        let r = trainer.train_step(&batch)?;
        if r.step % cfg.log_interval == 0 {
            log.write(&log_path, &SsmRecord { step: r.step, bce: r.bce, enhance: r.enhance, total: r.total })?;
        }
        progress(&r);
        reports.push(r);
    }
    let checkpoint = Checkpoint::from_ssm(&arch, &trainer.model, Some(&trainer.state), trainer.step);
    save_verified(&checkpoint, &cfg.checkpoint_out)?;
    Ok(TrainOutcome { checkpoint, reports })
}

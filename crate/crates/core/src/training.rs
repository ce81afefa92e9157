//! One iteration of the dual-path adversarial training scheme, plus
//! supervised training of the sky segmentation model.
//!
//! This module is deliberately free of randomness and I/O: callers assemble
//! [`Batch`]es (including the airlights used for synthesis) and own the
//! sampling RNG, so a run is fully determined by its inputs.

use alloc::vec::Vec;

use rand::Rng;

use crate::asm::{atmospheric_light_dark_channel, atmospheric_light_from_sky, AirlightSource, AtmosphericLight};
use crate::asm::DARK_CHANNEL_TOP_FRACTION;
use crate::autodiff::{NormMode, Tape, Var};
use crate::derived::derive_inputs;
use crate::error::{bail, Result};
use crate::image::{ImageRGB, Range};
use crate::losses::{cycle_loss, lsgan_discriminator, lsgan_generator, LossComponents, LossWeights, PerceptualExtractor};
use crate::networks::{
    airlight_tensor, synthesize_with, ArchConfig, AttentionFusion, DefogGenerator, Discriminator, Network,
    SkySegmentation, TransmissionNet,
};
use crate::optim::{Adam, AdamState};
use crate::params::NetworkParams;
use crate::{Error, Real, Tensor};

pub const D_FOGFREE_TAG: &str = "dff";
pub const D_FOGGY_TAG: &str = "df";

/// The five jointly trained networks.
#[derive(Clone, Debug)]
pub struct HaanModels<T> {
    pub defog: DefogGenerator<T>,
    pub trans: TransmissionNet<T>,
    pub ctr: AttentionFusion<T>,
    pub d_ff: Discriminator<T>,
    pub d_f: Discriminator<T>,
}

impl<T: Real> HaanModels<T> {
    /// Initializes all networks from one RNG, in a fixed order.
    pub fn new<R: Rng + ?Sized>(arch: &ArchConfig, rng: &mut R) -> Self {
        Self {
            defog: DefogGenerator::new(arch, rng),
            trans: TransmissionNet::new(arch, rng),
            ctr: AttentionFusion::new(arch, rng),
            d_ff: Discriminator::new(D_FOGFREE_TAG, arch, rng),
            d_f: Discriminator::new(D_FOGGY_TAG, arch, rng),
        }
    }

    /// Parameter sets in checkpoint order.
    pub fn params(&self) -> [&NetworkParams<T>; 5] {
        [self.defog.params(), self.trans.params(), self.ctr.params(), self.d_ff.params(), self.d_f.params()]
    }

    pub fn params_mut(&mut self) -> [&mut NetworkParams<T>; 5] {
        [
            self.defog.params_mut(),
            self.trans.params_mut(),
            self.ctr.params_mut(),
            self.d_ff.params_mut(),
            self.d_f.params_mut(),
        ]
    }
}

/// Adam moments for every trained network, in [`HaanModels::params`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerStates<T> {
    pub states: [AdamState<T>; 5],
}

impl<T: Real> OptimizerStates<T> {
    pub fn new(models: &HaanModels<T>) -> Self {
        Self { states: models.params().map(AdamState::new) }
    }
}

/// Network inputs for one iteration. Images are N×3×H×W signed tensors.
#[derive(Clone, Debug)]
pub struct Batch<T> {
    pub foggy: Tensor<T>,
    /// Derived inputs of `foggy`: contrast-enhanced, gamma-corrected,
    /// white-balanced (the order the fusion generator expects after the
    /// defogged image).
    pub foggy_derived: [Tensor<T>; 3],
    /// Airlight estimated on each foggy image.
    pub foggy_airlight: Vec<[f64; 3]>,
    pub clear: Tensor<T>,
    /// Airlight used to fog each clear image.
    pub synth_airlight: Vec<[f64; 3]>,
}

impl<T: Real> Batch<T> {
    /// Assembles a batch from unit-range (or signed) images, computing the
    /// derived inputs of the foggy images.
    pub fn from_images(
        foggy: &[ImageRGB],
        foggy_airlight: Vec<[f64; 3]>,
        clear: &[ImageRGB],
        synth_airlight: Vec<[f64; 3]>,
    ) -> Result<Self> {
        Ok(Self {
            foggy: signed_batch(foggy)?,
            foggy_derived: derived_tensors(foggy)?,
            foggy_airlight,
            clear: signed_batch(clear)?,
            synth_airlight,
        })
    }
}

/// Derived inputs of each batch item, stacked as signed tensors in
/// fusion order (ce, gc, wb). A channel with zero mean cannot be white
/// balanced; such images pass through unchanged.
pub fn derived_tensors<T: Real>(images: &[ImageRGB]) -> Result<[Tensor<T>; 3]> {
    let mut ce = Vec::with_capacity(images.len());
    let mut gc = Vec::with_capacity(images.len());
    let mut wb = Vec::with_capacity(images.len());
    for img in images {
        let unit = match img.range() {
            Range::Unit => img.clone(),
            Range::Signed => img.to_unit()?,
        }
        .clamped();
        let d = match derive_inputs(&unit) {
            Ok(d) => d,
            Err(Error::DegenerateInput(_)) => {
                let mut lifted = unit.clone();
                lifted.pixels_mut().iter_mut().for_each(|v| *v = v.max(1e-6));
                let mut d = derive_inputs(&lifted)?;
                d.wb = unit.to_signed()?;
                d
            }
            Err(e) => return Err(e),
        };
        ce.push(d.ce.to_tensor());
        gc.push(d.gc.to_tensor());
        wb.push(d.wb.to_tensor());
    }
    Ok([Tensor::stack_batch(&ce)?, Tensor::stack_batch(&gc)?, Tensor::stack_batch(&wb)?])
}

/// Stacks unit-range images into one signed N×3×H×W tensor.
pub fn signed_batch<T: Real>(images: &[ImageRGB]) -> Result<Tensor<T>> {
    let items: Result<Vec<Tensor<T>>> = images
        .iter()
        .map(|img| match img.range() {
            Range::Unit => Ok(img.to_signed()?.to_tensor()),
            Range::Signed => Ok(img.to_tensor()),
        })
        .collect();
    Tensor::stack_batch(&items?)
}

/// Splits a signed N×3×H×W tensor into unit-range images.
pub fn unit_images<T: Real>(t: &Tensor<T>) -> Result<Vec<ImageRGB>> {
    let n = t.dims4()?.0;
    (0..n).map(|i| ImageRGB::from_tensor(t, i, Range::Signed)?.to_unit().map(ImageRGB::clamped)).collect()
}

/// Losses observed during one iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepReport {
    pub step: u64,
    pub components: LossComponents,
    /// Weighted generator objective.
    pub total: f64,
    pub d_fogfree: f64,
    pub d_foggy: f64,
}

/// Values produced by the generator paths, kept for the discriminator update.
#[derive(Clone, Debug)]
struct Fakes<T> {
    defogged: Tensor<T>,
    refined: Tensor<T>,
    synthesized: Tensor<T>,
}

/// Result of the generator half of an iteration; consumed by
/// [`Trainer::discriminator_update`].
#[derive(Clone, Debug)]
pub struct GeneratorUpdate<T> {
    pub components: LossComponents,
    pub total: f64,
    iteration: u64,
    fakes: Fakes<T>,
}

/// Owns the models, optimizer state and step counter of a training run.
#[derive(Clone, Debug)]
pub struct Trainer<T> {
    pub arch: ArchConfig,
    pub models: HaanModels<T>,
    pub optim: OptimizerStates<T>,
    /// Optimizer settings of the generators.
    pub adam: Adam,
    /// Optimizer settings of the discriminators (same as `adam` by default).
    pub disc_adam: Adam,
    pub weights: LossWeights,
    /// Completed iterations.
    pub step: u64,
    extractor: PerceptualExtractor<T>,
}

impl<T: Real> Trainer<T> {
    pub fn new(arch: ArchConfig, models: HaanModels<T>, adam: Adam, weights: LossWeights) -> Result<Self> {
        arch.validate()?;
        weights.validate()?;
        let optim = OptimizerStates::new(&models);
        Ok(Self { arch, models, optim, adam, disc_adam: adam, weights, step: 0, extractor: PerceptualExtractor::new() })
    }

    /// Generator update followed by discriminator update.
    pub fn train_step(&mut self, batch: &Batch<T>) -> Result<StepReport> {
        let g = self.generator_update(batch)?;
        let (d_fogfree, d_foggy) = self.discriminator_update(batch, &g)?;
        Ok(StepReport { step: self.step, components: g.components, total: g.total, d_fogfree, d_foggy })
    }

    /// Updates the three generators with the discriminators frozen.
    pub fn generator_update(&mut self, batch: &Batch<T>) -> Result<GeneratorUpdate<T>> {
        self.check_batch(batch)?;
        let t = self.step + 1;
        let (components, total, fakes) = self.generator_step(batch, t)?;
        Ok(GeneratorUpdate { components, total, iteration: t, fakes })
    }

    /// Updates both discriminators on the fakes of `g` with the generators
    /// frozen, completing the iteration. Returns the two discriminator losses.
    pub fn discriminator_update(&mut self, batch: &Batch<T>, g: &GeneratorUpdate<T>) -> Result<(f64, f64)> {
        if g.iteration != self.step + 1 {
            bail!(Contract, "generator update belongs to iteration {}, trainer is at {}", g.iteration, self.step + 1);
        }
        self.check_batch(batch)?;
        let losses = self.discriminator_step(batch, &g.fakes, g.iteration)?;
        self.step = g.iteration;
        Ok(losses)
    }

    /// Outputs of both mapping paths for `batch`, with batch normalization
    /// using batch statistics and nothing updated.
    pub fn path_outputs(&mut self, batch: &Batch<T>) -> Result<PathOutputs<T>> {
        self.check_batch(batch)?;
        let g = self.generator_forward(batch, NormMode::TrainFrozen)?;
        let v = g.paths.map(|p| g.tape.value(p).clone());
        let [i_df, i_rcf1, i_rr, i_rcf2, i_sf, i_rcff, i_rr_sf] = v;
        Ok(PathOutputs { i_df, i_rcf1, i_rr, i_rcf2, i_sf, i_rcff, i_rr_sf })
    }

    /// Generator objective for `batch` without updating anything.
    pub fn evaluate_generator(&mut self, batch: &Batch<T>) -> Result<(LossComponents, f64)> {
        self.check_batch(batch)?;
        let g = self.generator_forward(batch, NormMode::TrainFrozen)?;
        Ok((g.components, g.total_value))
    }

    fn check_batch(&self, batch: &Batch<T>) -> Result<()> {
        let (n, c, h, w) = batch.foggy.dims4()?;
        let (cn, cc, ch, cw) = batch.clear.dims4()?;
        if n == 0 || cn == 0 || c != 3 || cc != 3 {
            bail!(Dimension, "batches need at least one 3-channel image");
        }
        if (h, w) != (ch, cw) {
            bail!(Dimension, "foggy {}×{} and clear {}×{} batches differ in size", h, w, ch, cw);
        }
        if batch.foggy_derived.iter().any(|d| d.shape() != batch.foggy.shape()) {
            bail!(Dimension, "derived inputs must match the foggy batch shape");
        }
        if batch.foggy_airlight.len() != n || batch.synth_airlight.len() != cn {
            bail!(Dimension, "one airlight per image is required");
        }
        Ok(())
    }

    fn generator_step(&mut self, batch: &Batch<T>, t: u64) -> Result<(LossComponents, f64, Fakes<T>)> {
        let g = self.generator_forward(batch, NormMode::Train)?;
        let GeneratorPass { mut tape, binds, total, components, total_value, fakes, .. } = g;
        tape.backward(total)?;
        let [b_defog, b_trans, b_ctr] = binds;
        let m = &mut self.models;
        for (params, bind) in [
            (m.defog.params_mut(), &b_defog),
            (m.trans.params_mut(), &b_trans),
            (m.ctr.params_mut(), &b_ctr),
        ] {
            params.zero_grad();
            params.accumulate_grads(&tape, bind);
        }
        drop(tape);
        let [s_defog, s_trans, s_ctr, _, _] = &mut self.optim.states;
        self.adam.step(self.models.defog.params_mut(), s_defog, t)?;
        self.adam.step(self.models.trans.params_mut(), s_trans, t)?;
        self.adam.step(self.models.ctr.params_mut(), s_ctr, t)?;
        for p in &self.models.params()[..3] {
            p.check_finite()?;
        }
        Ok((components, total_value, fakes))
    }

    fn generator_forward(&mut self, batch: &Batch<T>, mode: NormMode) -> Result<GeneratorPass<T>> {
        let mut tape = Tape::new();
        let tape = &mut tape;
        let m = &mut self.models;
        let b_defog = m.defog.params().bind(tape, true);
        let b_trans = m.trans.params().bind(tape, true);
        let b_ctr = m.ctr.params().bind(tape, true);
        let b_dff = m.d_ff.params().bind(tape, false);
        let b_df = m.d_f.params().bind(tape, false);
        let b_ext = self.extractor.bind(tape);

        let x_rf = tape.constant(batch.foggy.clone());
        let [ce, gc, wb] = batch.foggy_derived.clone().map(|d| tape.constant(d));
        let a_rf = tape.constant(airlight_tensor(&batch.foggy_airlight));
        let x_rff = tape.constant(batch.clear.clone());
        let a_s = tape.constant(airlight_tensor(&batch.synth_airlight));

        // Foggy → fog-free: defog, resynthesize, refine, resynthesize.
        let i_df = m.defog.forward(tape, &b_defog, x_rf, mode)?.image;
        let i_rcf1 = m.trans.synthesize(tape, &b_trans, i_df, a_rf)?;
        let i_rr = m.ctr.forward(tape, &b_ctr, [i_df, ce, gc, wb])?;
        let i_rcf2 = m.trans.synthesize(tape, &b_trans, i_rr, a_rf)?;

        // Fog-free → foggy: synthesize, defog, refine with derived inputs of
        // the synthesized image (computed on its values, outside the graph).
        let i_sf = m.trans.synthesize(tape, &b_trans, x_rff, a_s)?;
        let i_rcff = m.defog.forward(tape, &b_defog, i_sf, mode)?.image;
        let sf_images = unit_images(tape.value(i_sf))?;
        let [ce_s, gc_s, wb_s] = derived_tensors::<T>(&sf_images)?.map(|d| tape.constant(d));
        let i_rr_sf = m.ctr.forward(tape, &b_ctr, [i_rcff, ce_s, gc_s, wb_s])?;

        let frozen = match mode {
            NormMode::Eval => NormMode::Eval,
            _ => NormMode::TrainFrozen,
        };
        let logits = m.d_ff.forward(tape, &b_dff, i_df, frozen)?;
        let adv_r = lsgan_generator(tape, logits)?;
        let logits = m.d_ff.forward(tape, &b_dff, i_rr, frozen)?;
        let adv_ctr = lsgan_generator(tape, logits)?;
        let logits = m.d_f.forward(tape, &b_df, i_sf, frozen)?;
        let adv_s = lsgan_generator(tape, logits)?;

        let cyc1 = cycle_loss(tape, x_rf, i_rcf1, i_rcf2)?;
        let cyc2 = cycle_loss(tape, x_rff, i_rcff, i_rr_sf)?;
        let perc = self
            .extractor
            .loss(tape, &b_ext, &[(x_rf, i_rcf1), (x_rf, i_rcf2), (x_rff, i_rcff), (x_rff, i_rr_sf)])?;

        let terms = [adv_r, adv_ctr, adv_s, cyc1, cyc2, perc];
        let total = self.weights.total_on_tape(tape, terms)?;
        let components = LossComponents::from_array(terms.map(|v| tape.value(v).item().as_f64()));
        let total_value = tape.value(total).item().as_f64();
        if !total_value.is_finite() {
            bail!(NonFinite, "generator loss at step {}", self.step + 1);
        }
        let fakes = Fakes {
            defogged: tape.value(i_df).clone(),
            refined: tape.value(i_rr).clone(),
            synthesized: tape.value(i_sf).clone(),
        };
        let owned = core::mem::take(tape);
        Ok(GeneratorPass {
            tape: owned,
            binds: [b_defog, b_trans, b_ctr],
            total,
            components,
            total_value,
            fakes,
            paths: [i_df, i_rcf1, i_rr, i_rcf2, i_sf, i_rcff, i_rr_sf],
        })
    }

    fn discriminator_step(&mut self, batch: &Batch<T>, fakes: &Fakes<T>, t: u64) -> Result<(f64, f64)> {
        let mut tape = Tape::new();
        let tape = &mut tape;
        let m = &mut self.models;
        let b_dff = m.d_ff.params().bind(tape, true);
        let b_df = m.d_f.params().bind(tape, true);
        let real_ff = tape.constant(batch.clear.clone());
        let real_f = tape.constant(batch.foggy.clone());
        let fake_df = tape.constant(fakes.defogged.clone());
        let fake_rr = tape.constant(fakes.refined.clone());
        let fake_sf = tape.constant(fakes.synthesized.clone());

        let real_logits = m.d_ff.forward(tape, &b_dff, real_ff, NormMode::Train)?;
        let df_logits = m.d_ff.forward(tape, &b_dff, fake_df, NormMode::Train)?;
        let rr_logits = m.d_ff.forward(tape, &b_dff, fake_rr, NormMode::Train)?;
        let l1 = lsgan_discriminator(tape, real_logits, df_logits)?;
        let l2 = lsgan_discriminator(tape, real_logits, rr_logits)?;
        let loss_ff = tape.add(l1, l2)?;

        let real_logits = m.d_f.forward(tape, &b_df, real_f, NormMode::Train)?;
        let sf_logits = m.d_f.forward(tape, &b_df, fake_sf, NormMode::Train)?;
        let loss_f = lsgan_discriminator(tape, real_logits, sf_logits)?;

        let total = tape.add(loss_ff, loss_f)?;
        tape.backward(total)?;
        let values = (tape.value(loss_ff).item().as_f64(), tape.value(loss_f).item().as_f64());
        m.d_ff.params_mut().zero_grad();
        m.d_ff.params_mut().accumulate_grads(tape, &b_dff);
        m.d_f.params_mut().zero_grad();
        m.d_f.params_mut().accumulate_grads(tape, &b_df);
        let [_, _, _, s_dff, s_df] = &mut self.optim.states;
        self.disc_adam.step(m.d_ff.params_mut(), s_dff, t)?;
        self.disc_adam.step(m.d_f.params_mut(), s_df, t)?;
        m.d_ff.params().check_finite()?;
        m.d_f.params().check_finite()?;
        Ok(values)
    }
}

struct GeneratorPass<T: Real> {
    tape: Tape<T>,
    binds: [crate::params::Binding; 3],
    total: Var,
    components: LossComponents,
    total_value: f64,
    fakes: Fakes<T>,
    paths: [Var; 7],
}

/// Images produced by the foggy → fog-free path (`i_df`, `i_rcf1`, `i_rr`,
/// `i_rcf2`) and the fog-free → foggy path (`i_sf`, `i_rcff`, `i_rr_sf`;
/// the defogged synthesized image is `i_rcff`).
#[derive(Clone, Debug)]
pub struct PathOutputs<T> {
    pub i_df: Tensor<T>,
    pub i_rcf1: Tensor<T>,
    pub i_rr: Tensor<T>,
    pub i_rcf2: Tensor<T>,
    pub i_sf: Tensor<T>,
    pub i_rcff: Tensor<T>,
    pub i_rr_sf: Tensor<T>,
}

/// Estimates the airlight of a unit-range foggy image from the sky mask
/// predicted by `ssm`, or with the dark-channel prior when no model is given.
pub fn estimate_airlight<T: Real>(
    ssm: Option<&mut SkySegmentation<T>>,
    foggy: &ImageRGB,
) -> Result<(AtmosphericLight, AirlightSource)> {
    match ssm {
        None => Ok((atmospheric_light_dark_channel(foggy, DARK_CHANNEL_TOP_FRACTION), AirlightSource::DarkChannelFallback)),
        Some(model) => {
            let input = signed_batch::<T>(core::slice::from_ref(foggy))?;
            let (_, sky) = model.infer(&input)?;
            let mask: Vec<f64> = sky.data().iter().map(|v| v.as_f64()).collect();
            atmospheric_light_from_sky(foggy, &mask)
        }
    }
}

/// Supervised sky segmentation batch.
#[derive(Clone, Debug)]
pub struct SsmBatch<T> {
    /// N×3×H×W signed foggy images.
    pub foggy: Tensor<T>,
    /// N×1×H×W binary sky masks.
    pub mask: Tensor<T>,
    /// N×3×H×W signed fog-free targets for the enhance block.
    pub clear: Tensor<T>,
}

/// Probability clamp that keeps the cross-entropy finite.
pub const BCE_CLAMP: f64 = 1e-6;

/// `−mean(m·ln p + (1−m)·ln(1−p))` with `p` clamped to `[ε, 1−ε]`.
pub fn binary_cross_entropy<T: Real>(tape: &mut Tape<T>, prob: Var, mask: Var) -> Result<Var> {
    let eps = T::lit(BCE_CLAMP);
    let p = tape.clamp(prob, eps, T::one() - eps)?;
    let lp = tape.ln(p)?;
    let q = tape.affine(p, -T::one(), T::one())?;
    let lq = tape.ln(q)?;
    let inv_mask = tape.affine(mask, -T::one(), T::one())?;
    let a = tape.mul(mask, lp)?;
    let b = tape.mul(inv_mask, lq)?;
    let s = tape.add(a, b)?;
    let m = tape.mean_all(s)?;
    tape.scale(m, -T::one())
}

/// Trains the sky segmentation model with cross-entropy on the sky
/// probability plus mean-squared error of the enhanced image.
#[derive(Clone, Debug)]
pub struct SsmTrainer<T> {
    pub model: SkySegmentation<T>,
    pub state: AdamState<T>,
    pub adam: Adam,
    pub step: u64,
}

/// Losses of one segmentation step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SsmReport {
    pub step: u64,
    pub bce: f64,
    pub enhance: f64,
    pub total: f64,
}

impl<T: Real> SsmTrainer<T> {
    pub fn new(model: SkySegmentation<T>, adam: Adam) -> Self {
        let state = AdamState::new(model.params());
        Self { model, state, adam, step: 0 }
    }

    pub fn train_step(&mut self, batch: &SsmBatch<T>) -> Result<SsmReport> {
        let (n, _, h, w) = batch.foggy.dims4()?;
        if batch.mask.shape() != [n, 1, h, w] || batch.clear.shape() != batch.foggy.shape() {
            bail!(Dimension, "segmentation batch shapes disagree");
        }
        let mut tape = Tape::new();
        let bind = self.model.params().bind(&mut tape, true);
        let x = tape.constant(batch.foggy.clone());
        let mask = tape.constant(batch.mask.clone());
        let clear = tape.constant(batch.clear.clone());
        let out = self.model.forward(&mut tape, &bind, x, NormMode::Train)?;
        let bce = binary_cross_entropy(&mut tape, out.sky_prob, mask)?;
        let enh = tape.mse(out.enhanced, clear)?;
        let total = tape.add(bce, enh)?;
        tape.backward(total)?;
        let report = SsmReport {
            step: self.step + 1,
            bce: tape.value(bce).item().as_f64(),
            enhance: tape.value(enh).item().as_f64(),
            total: tape.value(total).item().as_f64(),
        };
        let params = self.model.params_mut();
        params.zero_grad();
        params.accumulate_grads(&tape, &bind);
        drop(tape);
        self.step += 1;
        self.adam.step(self.model.params_mut(), &mut self.state, self.step)?;
        self.model.params().check_finite()?;
        Ok(report)
    }
}

/// Fraction of pixels where `prob > 0.5` agrees with `mask > 0.5`.
pub fn mask_accuracy(prob: &[f64], mask: &[f64]) -> f64 {
    let hits = prob.iter().zip(mask).filter(|(p, m)| (**p > 0.5) == (**m > 0.5)).count();
    hits as f64 / prob.len().max(1) as f64
}

/// Splits `synth_forward` out for callers that need only the synthesizing
/// path (e.g. inference-time fog generation).
pub fn synthesize_batch<T: Real>(trans: &mut TransmissionNet<T>, clear: &Tensor<T>, airlight: &[[f64; 3]]) -> Result<Tensor<T>> {
    let mut tape = Tape::new();
    let bind = trans.params().bind(&mut tape, false);
    let x = tape.constant(clear.clone());
    let a = tape.constant(airlight_tensor(airlight));
    let t = trans.forward(&mut tape, &bind, x)?;
    let y = synthesize_with(&mut tape, x, t, a)?;
    Ok(tape.value(y).clone())
}

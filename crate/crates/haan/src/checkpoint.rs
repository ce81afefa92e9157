//! Binary checkpoints: named f32 tensor sections plus a step counter.
//!
//! Layout (little-endian): magic `HAAN`, u32 version, u32 section count;
//! per section a u16 name length, the UTF-8 name, a u8 rank, rank × u32
//! dims and the row-major f32 payload; finally a u64 step counter.
//! Network tensors are named `{tag}.{tensor}`, Adam moments append `.m` and
//! `.v`, and `meta.arch` records the architecture.

use std::io::Write;
use std::path::Path;

use haan_core::networks::{ArchConfig, AttentionFusion, DefogGenerator, Network, SkySegmentation, TransmissionNet};
use haan_core::optim::{Adam, AdamState};
use haan_core::params::NetworkParams;
use haan_core::training::{HaanModels, Trainer, D_FOGFREE_TAG};
use haan_core::losses::LossWeights;
use haan_core::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{HaanError, Result};

pub const MAGIC: &[u8; 4] = b"HAAN";
pub const VERSION: u32 = 1;
pub const ARCH_SECTION: &str = "meta.arch";

#[derive(Clone, Debug, PartialEq)]
pub struct Section {
    pub name: String,
    pub dims: Vec<u32>,
    pub data: Vec<f32>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    pub sections: Vec<Section>,
    pub step: u64,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, section: &str, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| HaanError::format(section, format!("truncated while reading {what}")))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self, s: &str, what: &str) -> Result<u8> {
        Ok(self.take(1, s, what)?[0])
    }

    fn u16(&mut self, s: &str, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, s, what)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self, s: &str, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, s, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, s: &str, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, s, what)?.try_into().expect("8 bytes")))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let payload: usize = self.sections.iter().map(|s| 3 + s.name.len() + 4 * (s.dims.len() + s.data.len())).sum();
        let mut out = Vec::with_capacity(12 + payload + 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.sections.len() as u32).to_le_bytes());
        for s in &self.sections {
            out.extend_from_slice(&(s.name.len() as u16).to_le_bytes());
            out.extend_from_slice(s.name.as_bytes());
            out.push(s.dims.len() as u8);
            for d in &s.dims {
                out.extend_from_slice(&d.to_le_bytes());
            }
            for v in &s.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out.extend_from_slice(&self.step.to_le_bytes());
        out
    }

    /// Parses a checkpoint, validating magic and version before reading any
    /// section and each payload length before allocating it.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4, "header", "magic")? != MAGIC {
            return Err(HaanError::format("header", "bad magic; not a checkpoint"));
        }
        let version = r.u32("header", "version")?;
        if version != VERSION {
            return Err(HaanError::format("header", format!("unsupported version {version}")));
        }
        let count = r.u32("header", "section count")? as usize;
        let mut sections = Vec::with_capacity(count.min(r.remaining() / 3));
        for i in 0..count {
            let label = format!("#{i}");
            let len = r.u16(&label, "name length")? as usize;
            let name = std::str::from_utf8(r.take(len, &label, "name")?)
                .map_err(|_| HaanError::format(&label, "name is not UTF-8"))?
                .to_string();
            let rank = r.u8(&name, "rank")? as usize;
            let dims = (0..rank).map(|_| r.u32(&name, "dims")).collect::<Result<Vec<u32>>>()?;
            let numel = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d as usize));
            let bytes_needed = numel.and_then(|n| n.checked_mul(4));
            let bytes_needed = match bytes_needed {
                Some(b) if b <= r.remaining() => b,
                _ => return Err(HaanError::format(&name, format!("payload for dims {dims:?} exceeds the file"))),
            };
            let data = r.take(bytes_needed, &name, "payload")?.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
            sections.push(Section { name, dims, data });
        }
        let step = r.u64("trailer", "step counter")?;
        if r.remaining() != 0 {
            return Err(HaanError::format("trailer", format!("{} unexpected trailing bytes", r.remaining())));
        }
        Ok(Self { sections, step })
    }

    /// Writes to a temporary sibling and renames it into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| HaanError::io(dir, e))?;
        }
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        let tmp = Path::new(&tmp);
        let mut f = std::fs::File::create(tmp).map_err(|e| HaanError::io(tmp, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| HaanError::io(tmp, e))?;
        f.sync_all().map_err(|e| HaanError::io(tmp, e))?;
        std::fs::rename(tmp, path).map_err(|e| HaanError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| HaanError::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Hex SHA-256 of the serialized bytes.
    pub fn digest(&self) -> String {
        Sha256::digest(self.to_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn push(&mut self, name: String, tensor: &Tensor<f32>) {
        let dims = tensor.shape().iter().map(|&d| d as u32).collect();
        self.sections.push(Section { name, dims, data: tensor.data().to_vec() });
    }

    fn tensor(&self, name: &str, shape: &[usize]) -> Result<Tensor<f32>> {
        let s = self.section(name).ok_or_else(|| HaanError::format(name, "missing"))?;
        let dims: Vec<usize> = s.dims.iter().map(|&d| d as usize).collect();
        if dims != shape {
            return Err(HaanError::format(name, format!("dims {dims:?}, expected {shape:?}")));
        }
        Ok(Tensor::new(shape, s.data.clone())?)
    }

    pub fn has_network(&self, tag: &str) -> bool {
        let prefix = format!("{tag}.");
        self.sections.iter().any(|s| s.name.starts_with(&prefix))
    }

    pub fn push_arch(&mut self, arch: &ArchConfig) {
        let v = [arch.width_scale, arch.image_size, arch.resblocks, arch.ssm_resblocks, arch.attention_reduction];
        self.push(ARCH_SECTION.to_string(), &Tensor::from_fn(&[5], |i| v[i] as f32));
    }

    pub fn arch(&self) -> Result<ArchConfig> {
        let t = self.tensor(ARCH_SECTION, &[5])?;
        let v: Vec<usize> = t.data().iter().map(|&x| x as usize).collect();
        let arch = ArchConfig {
            width_scale: v[0],
            image_size: v[1],
            resblocks: v[2],
            ssm_resblocks: v[3],
            attention_reduction: v[4],
        };
        arch.validate().map_err(|e| HaanError::format(ARCH_SECTION, e.to_string()))?;
        Ok(arch)
    }

    /// Appends every parameter and buffer of `params`.
    pub fn push_params(&mut self, params: &NetworkParams<f32>) {
        let tag = params.tag();
        for e in params.entries() {
            self.push(format!("{tag}.{}", e.name), &e.value);
        }
        for (name, b) in params.buffers() {
            self.push(format!("{tag}.{name}"), b);
        }
    }

    pub fn push_adam(&mut self, params: &NetworkParams<f32>, state: &AdamState<f32>) {
        let tag = params.tag();
        for ((e, m), v) in params.entries().iter().zip(&state.m).zip(&state.v) {
            self.push(format!("{tag}.{}.m", e.name), m);
            self.push(format!("{tag}.{}.v", e.name), v);
        }
    }

    /// Overwrites every tensor of `params` from its section.
    pub fn restore_params(&self, params: &mut NetworkParams<f32>) -> Result<()> {
        let tag = params.tag().to_string();
        let slots: Vec<(String, Vec<usize>)> = params
            .entries()
            .iter()
            .map(|e| (e.name.clone(), e.value.shape().to_vec()))
            .chain(params.buffers().iter().map(|(n, b)| (n.clone(), b.shape().to_vec())))
            .collect();
        for (name, shape) in slots {
            let t = self.tensor(&format!("{tag}.{name}"), &shape)?;
            params.assign(&name, t)?;
        }
        Ok(())
    }

    pub fn restore_adam(&self, params: &NetworkParams<f32>, state: &mut AdamState<f32>) -> Result<()> {
        let tag = params.tag();
        for (i, e) in params.entries().iter().enumerate() {
            state.m[i] = self.tensor(&format!("{tag}.{}.m", e.name), e.value.shape())?;
            state.v[i] = self.tensor(&format!("{tag}.{}.v", e.name), e.value.shape())?;
        }
        Ok(())
    }

    /// Full training state: all five networks, their Adam moments, the
    /// step counter and optionally the frozen sky model.
    pub fn from_trainer(trainer: &Trainer<f32>, ssm: Option<&SkySegmentation<f32>>) -> Self {
        let mut ck = Self { sections: Vec::new(), step: trainer.step };
        ck.push_arch(&trainer.arch);
        for (p, s) in trainer.models.params().into_iter().zip(&trainer.optim.states) {
            ck.push_params(p);
            ck.push_adam(p, s);
        }
        if let Some(m) = ssm {
            ck.push_params(m.params());
        }
        ck
    }

    /// Rebuilds a trainer whose state matches the one that was saved.
    pub fn to_trainer(&self, adam: Adam, weights: LossWeights) -> Result<Trainer<f32>> {
        let arch = self.arch()?;
        let mut models = HaanModels::new(&arch, &mut ChaCha8Rng::seed_from_u64(0));
        for p in models.params_mut() {
            self.restore_params(p)?;
        }
        let mut trainer = Trainer::new(arch, models, adam, weights)?;
        let [a, b, c, d, e] = &mut trainer.optim.states;
        for (p, s) in trainer.models.params().into_iter().zip([a, b, c, d, e]) {
            self.restore_adam(p, s)?;
        }
        trainer.step = self.step;
        Ok(trainer)
    }

    /// Segmentation-model checkpoint with optional Adam moments.
    pub fn from_ssm(arch: &ArchConfig, model: &SkySegmentation<f32>, state: Option<&AdamState<f32>>, step: u64) -> Self {
        let mut ck = Self { sections: Vec::new(), step };
        ck.push_arch(arch);
        ck.push_params(model.params());
        if let Some(s) = state {
            ck.push_adam(model.params(), s);
        }
        ck
    }

    pub fn defog(&self) -> Result<DefogGenerator<f32>> {
        let mut net = DefogGenerator::new(&self.arch()?, &mut ChaCha8Rng::seed_from_u64(0));
        self.restore_params(net.params_mut())?;
        Ok(net)
    }

    pub fn transmission(&self) -> Result<TransmissionNet<f32>> {
        let mut net = TransmissionNet::new(&self.arch()?, &mut ChaCha8Rng::seed_from_u64(0));
        self.restore_params(net.params_mut())?;
        Ok(net)
    }

    pub fn fusion(&self) -> Result<AttentionFusion<f32>> {
        let mut net = AttentionFusion::new(&self.arch()?, &mut ChaCha8Rng::seed_from_u64(0));
        self.restore_params(net.params_mut())?;
        Ok(net)
    }

    pub fn ssm(&self) -> Result<SkySegmentation<f32>> {
        let mut net = SkySegmentation::new(&self.arch()?, &mut ChaCha8Rng::seed_from_u64(0));
        self.restore_params(net.params_mut())?;
        Ok(net)
    }

    /// Whether the checkpoint holds the jointly trained networks.
    pub fn is_training_state(&self) -> bool {
        self.has_network(D_FOGFREE_TAG)
    }
}

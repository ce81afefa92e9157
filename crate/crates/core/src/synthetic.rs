//! Procedural toy scenes: a gradient sky over textured ground, with a depth
//! map and a binary sky mask, fogged through the scattering model. Used for
//! smoke training runs and for training the sky segmentation model.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_traits::Float;
use rand::Rng;

use crate::asm::{synthesize_fog, transmission_from_depth, AtmosphericLight, TransmissionMap};
use crate::error::Result;
use crate::image::{ImageRGB, Range};

/// Gray airlight range used when fogging clear images during training.
pub const AIRLIGHT_RANGE: (f64, f64) = (0.7, 1.0);
/// Scattering coefficient range for toy fog, per unit of normalized depth.
pub const BETA_RANGE: (f64, f64) = (1.0, 2.0);
/// Normalized depth assigned to sky pixels.
pub const SKY_DEPTH: f64 = 3.0;

/// A clear scene with its geometry.
#[derive(Clone, Debug)]
pub struct ToyScene {
    pub clear: ImageRGB,
    /// Normalized depth, row-major H×W.
    pub depth: Vec<f64>,
    /// 1.0 on sky pixels, 0.0 elsewhere.
    pub sky_mask: Vec<f64>,
}

/// A toy scene after fog synthesis.
#[derive(Clone, Debug)]
pub struct FoggedScene {
    pub scene: ToyScene,
    pub foggy: ImageRGB,
    pub transmission: TransmissionMap,
    pub airlight: AtmosphericLight,
    pub beta: f64,
}

/// Uniformly sampled gray airlight in [`AIRLIGHT_RANGE`].
pub fn sample_airlight<R: Rng + ?Sized>(rng: &mut R) -> AtmosphericLight {
    AtmosphericLight::gray(rng.random_range(AIRLIGHT_RANGE.0..=AIRLIGHT_RANGE.1)).expect("airlight in range")
}

struct Wave {
    amp: f64,
    freq: f64,
    phase: f64,
    angle: f64,
}

impl Wave {
    fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            amp: rng.random_range(0.02..0.08),
            freq: rng.random_range(2.0..9.0),
            phase: rng.random_range(0.0..2.0 * PI),
            angle: rng.random_range(0.0..PI),
        }
    }

    fn at(&self, u: f64, v: f64) -> f64 {
        let t = u * Float::cos(self.angle) + v * Float::sin(self.angle);
        self.amp * Float::sin(2.0 * PI * self.freq * t + self.phase)
    }
}

/// Generates an `h`×`w` scene. The skyline is a random low-frequency curve
/// through the upper half; ground texture is a sum of random plane waves over
/// a random earthy base colour, darkened toward the viewer.
pub fn toy_scene<R: Rng + ?Sized>(rng: &mut R, h: usize, w: usize) -> Result<ToyScene> {
    let horizon = rng.random_range(0.35..0.6);
    let hill_amp = rng.random_range(0.0..0.12);
    let hill_freq = rng.random_range(0.5..2.5);
    let hill_phase = rng.random_range(0.0..2.0 * PI);
    let sky_top = [rng.random_range(0.55..0.75), rng.random_range(0.7..0.85), rng.random_range(0.85..1.0)];
    let sky_bottom = [rng.random_range(0.85..0.95), rng.random_range(0.88..0.96), rng.random_range(0.9..1.0)];
    let base = [rng.random_range(0.15..0.5), rng.random_range(0.2..0.5), rng.random_range(0.05..0.35)];
    let waves: Vec<Wave> = (0..4).map(|_| Wave::random(rng)).collect();
    let tint: [f64; 3] = core::array::from_fn(|_| rng.random_range(-0.05..0.05));

    let mut depth = Vec::with_capacity(h * w);
    let mut sky_mask = Vec::with_capacity(h * w);
    let clear = ImageRGB::from_fn(h, w, Range::Unit, |y, x| {
        let v = (y as f64 + 0.5) / h as f64;
        let u = (x as f64 + 0.5) / w as f64;
        let skyline = horizon + hill_amp * Float::sin(2.0 * PI * hill_freq * u + hill_phase);
        if v < skyline {
            depth.push(SKY_DEPTH);
            sky_mask.push(1.0);
            let s = (v / skyline).clamp(0.0, 1.0);
            core::array::from_fn(|c| sky_top[c] + (sky_bottom[c] - sky_top[c]) * s)
        } else {
            // 1 at the skyline, falling to 0.1 at the bottom edge.
            let near = ((v - skyline) / (1.0 - skyline).max(1e-6)).clamp(0.0, 1.0);
            depth.push(1.0 - 0.9 * near);
            sky_mask.push(0.0);
            let texture: f64 = waves.iter().map(|wv| wv.at(u, v)).sum();
            core::array::from_fn(|c| (base[c] + tint[c] * near + texture * (0.6 + 0.4 * near)).clamp(0.02, 0.95))
        }
    })?;
    Ok(ToyScene { clear, depth, sky_mask })
}

/// Fogs `scene` with a sampled scattering coefficient and airlight.
pub fn fog_scene<R: Rng + ?Sized>(rng: &mut R, scene: ToyScene) -> Result<FoggedScene> {
    let beta = rng.random_range(BETA_RANGE.0..=BETA_RANGE.1);
    let airlight = sample_airlight(rng);
    fog_scene_with(scene, beta, airlight)
}

pub fn fog_scene_with(scene: ToyScene, beta: f64, airlight: AtmosphericLight) -> Result<FoggedScene> {
    let (h, w) = (scene.clear.height(), scene.clear.width());
    let transmission = transmission_from_depth(&scene.depth, h, w, beta)?;
    let foggy = synthesize_fog(&scene.clear, &transmission, airlight)?;
    Ok(FoggedScene { scene, foggy, transmission, airlight, beta })
}

/// `n` independent fogged scenes.
pub fn fogged_set<R: Rng + ?Sized>(rng: &mut R, n: usize, h: usize, w: usize) -> Result<Vec<FoggedScene>> {
    (0..n)
        .map(|_| {
            let scene = toy_scene(rng, h, w)?;
            fog_scene(rng, scene)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scene_geometry_is_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = toy_scene(&mut rng, 32, 40).unwrap();
        assert_eq!(s.depth.len(), 32 * 40);
        assert!(s.clear.in_range());
        // Top row is sky, bottom row is ground.
        assert!(s.sky_mask[..40].iter().all(|&m| m == 1.0));
        assert!(s.sky_mask[31 * 40..].iter().all(|&m| m == 0.0));
        for (d, m) in s.depth.iter().zip(&s.sky_mask) {
            assert_eq!(*m == 1.0, *d == SKY_DEPTH);
        }
    }

    #[test]
    fn fog_sky_approaches_airlight() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let scene = toy_scene(&mut rng, 16, 16).unwrap();
        let f = fog_scene(&mut rng, scene).unwrap();
        let a = f.airlight.rgb();
        let p = f.foggy.pixel(0, 0);
        for c in 0..3 {
            assert!((p[c] - a[c]).abs() < 0.05);
        }
    }

    #[test]
    fn same_seed_same_scene() {
        let a = toy_scene(&mut ChaCha8Rng::seed_from_u64(1), 8, 8).unwrap();
        let b = toy_scene(&mut ChaCha8Rng::seed_from_u64(1), 8, 8).unwrap();
        assert_eq!(a.clear, b.clear);
    }
}

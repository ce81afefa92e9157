use rand::Rng;

use super::layers::{Conv, Ctx};
use super::{impl_network, ArchConfig};
use crate::autodiff::{NormMode, ReduceOp, Tape, Var};
use crate::error::Result;
use crate::params::{Binding, NetworkParams};
use crate::Real;

/// Predicts a transmission map in (0,1) from a clear image; the
/// synthesizing generator embeds it in the scattering model.
#[derive(Clone, Debug)]
pub struct TransmissionNet<T> {
    params: NetworkParams<T>,
    head: Conv,
    body: [Conv; 3],
    tail: Conv,
}

impl_network!(TransmissionNet);

impl<T: Real> TransmissionNet<T> {
    pub const TAG: &'static str = "trans";

    pub fn new<R: Rng + ?Sized>(cfg: &ArchConfig, rng: &mut R) -> Self {
        let mut p = NetworkParams::new(Self::TAG, cfg.width_scale);
        let c = cfg.width(64);
        let head = Conv::same(&mut p, rng, "head", 4, c, 9);
        let body = [
            Conv::same(&mut p, rng, "body0", c, c, 3),
            Conv::same(&mut p, rng, "body1", c, c, 3),
            Conv::same(&mut p, rng, "body2", c, c, 3),
        ];
        let tail = Conv::same(&mut p, rng, "tail", c, 1, 3);
        Self { params: p, head, body, tail }
    }

    /// N×3×H×W signed clear image → N×1×H×W transmission.
    pub fn forward(&mut self, tape: &mut Tape<T>, bind: &Binding, clear: Var) -> Result<Var> {
        let cx = &mut Ctx { tape, bind, params: &mut self.params, mode: NormMode::Eval };
        let bright = cx.tape.reduce(clear, ReduceOp::Max, &[1])?;
        let x = cx.tape.concat_channels(&[clear, bright])?;
        let mut f = self.head.forward(cx, x)?;
        for conv in &self.body {
            let y = conv.forward(cx, f)?;
            f = cx.tape.relu(y)?;
        }
        let t = self.tail.forward(cx, f)?;
        cx.tape.sigmoid(t)
    }

    /// Synthesizing generator: fogs `clear` with the predicted transmission
    /// and the per-sample airlight `airlight` (an N×3×1×1 unit-range tensor).
    pub fn synthesize(&mut self, tape: &mut Tape<T>, bind: &Binding, clear: Var, airlight: Var) -> Result<Var> {
        let t = self.forward(tape, bind, clear)?;
        synthesize_with(tape, clear, t, airlight)
    }
}

/// Scattering model on tape values: `to_signed(to_unit(clear)·t + a·(1−t))`.
pub fn synthesize_with<T: Real>(tape: &mut Tape<T>, clear: Var, t: Var, airlight: Var) -> Result<Var> {
    let half = T::lit(0.5);
    let unit = tape.affine(clear, half, half)?;
    // a + t·(J − a)
    let diff = tape.sub(unit, airlight)?;
    let scaled = tape.mul(diff, t)?;
    let fog = tape.add(scaled, airlight)?;
    tape.affine(fog, T::lit(2.0), -T::one())
}

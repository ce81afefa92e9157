use alloc::vec;
use alloc::vec::Vec;

use super::{Op, Tape, Var};
use crate::error::{bail, Result};
use crate::tensor::dims4;
use crate::{Real, Tensor};

/// How batch normalization obtains its statistics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormMode {
    /// Batch statistics; running statistics are updated.
    Train,
    /// Batch statistics; running statistics left untouched. Used when a
    /// network participates in a forward pass without being optimized.
    TrainFrozen,
    /// Running statistics.
    Eval,
}

/// Per-channel running mean/variance owned by a batch-norm layer.
pub struct RunningStats<'a, T> {
    pub mean: &'a mut [T],
    pub var: &'a mut [T],
    pub momentum: T,
}

impl<T: Real> Tape<T> {
    /// Per-channel normalization of an N×C×H×W tensor followed by the
    /// `gamma`/`beta` affine map.
    pub fn batch_norm(
        &mut self,
        input: Var,
        gamma: Var,
        beta: Var,
        eps: T,
        mode: NormMode,
        stats: RunningStats<'_, T>,
    ) -> Result<Var> {
        let (n, c, h, w) = dims4(self.shape(input))?;
        if self.shape(gamma) != [c] || self.shape(beta) != [c] {
            bail!(Dimension, "batch_norm over {} channels got gamma {:?} beta {:?}", c, self.shape(gamma), self.shape(beta));
        }
        if stats.mean.len() != c || stats.var.len() != c {
            bail!(Dimension, "batch_norm running statistics do not cover {} channels", c);
        }
        if eps <= T::zero() {
            bail!(Contract, "batch_norm eps must be positive");
        }
        let plane = h * w;
        let count = n * plane;
        let x = self.value(input).data();
        let gm = self.value(gamma).data();
        let bt = self.value(beta).data();

        let batch_stats = mode != NormMode::Eval;
        let mut mean = vec![T::zero(); c];
        let mut var = vec![T::zero(); c];
        if batch_stats {
            let inv = T::one() / T::lit(count as f64);
            for ch in 0..c {
                let mut s = T::zero();
                for bi in 0..n {
                    let off = (bi * c + ch) * plane;
                    s += x[off..off + plane].iter().copied().sum::<T>();
                }
                let m = s * inv;
                let mut v = T::zero();
                for bi in 0..n {
                    let off = (bi * c + ch) * plane;
                    v += x[off..off + plane].iter().map(|&xv| (xv - m) * (xv - m)).sum::<T>();
                }
                mean[ch] = m;
                var[ch] = v * inv;
            }
        } else {
            mean.copy_from_slice(stats.mean);
            var.copy_from_slice(stats.var);
        }
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();

        let mut xhat = vec![T::zero(); x.len()];
        let mut out = vec![T::zero(); x.len()];
        for bi in 0..n {
            for ch in 0..c {
                let off = (bi * c + ch) * plane;
                for j in off..off + plane {
                    let xh = (x[j] - mean[ch]) * inv_std[ch];
                    xhat[j] = xh;
                    out[j] = gm[ch] * xh + bt[ch];
                }
            }
        }

        if mode == NormMode::Train {
            let m = stats.momentum;
            let keep = T::one() - m;
            let unbias = if count > 1 { T::lit(count as f64 / (count - 1) as f64) } else { T::one() };
            for ch in 0..c {
                stats.mean[ch] = keep * stats.mean[ch] + m * mean[ch];
                stats.var[ch] = keep * stats.var[ch] + m * var[ch] * unbias;
            }
        }

        let value = Tensor::new(self.shape(input), out)?;
        self.push(
            "batch_norm",
            value,
            &[input, gamma, beta],
            Op::BatchNorm { input, gamma, beta, xhat, inv_std, batch_stats },
        )
    }
}

#[allow(clippy::too_many_arguments)]
pub(super) fn batch_norm_backward<T: Real>(
    tape: &Tape<T>,
    input: Var,
    gamma: Var,
    beta: Var,
    xhat: &[T],
    inv_std: &[T],
    batch_stats: bool,
    g: &[T],
) -> Vec<(Var, Vec<T>)> {
    let (n, c, h, w) = dims4(tape.shape(input)).expect("validated in forward");
    let plane = h * w;
    let gm = tape.value(gamma).data();

    let mut dgamma = vec![T::zero(); c];
    let mut dbeta = vec![T::zero(); c];
    for bi in 0..n {
        for ch in 0..c {
            let off = (bi * c + ch) * plane;
            for j in off..off + plane {
                dgamma[ch] += g[j] * xhat[j];
                dbeta[ch] += g[j];
            }
        }
    }

    let mut res = Vec::with_capacity(3);
    if tape.wants(input) {
        let mut dx = vec![T::zero(); g.len()];
        let count = T::lit((n * plane) as f64);
        for ch in 0..c {
            let scale = gm[ch] * inv_std[ch];
            // sum(dxhat) = gamma * dbeta, sum(dxhat * xhat) = gamma * dgamma
            let (mean_d, mean_dx) = (dbeta[ch] / count, dgamma[ch] / count);
            for bi in 0..n {
                let off = (bi * c + ch) * plane;
                for j in off..off + plane {
                    dx[j] = if batch_stats {
                        scale * (g[j] - mean_d - xhat[j] * mean_dx)
                    } else {
                        scale * g[j]
                    };
                }
            }
        }
        res.push((input, dx));
    }
    if tape.wants(gamma) {
        res.push((gamma, dgamma));
    }
    if tape.wants(beta) {
        res.push((beta, dbeta));
    }
    res
}

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::gradcheck::{check_gradients, DEFAULT_STEP};
use super::*;

const TOL: f64 = 1e-4;

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(lo..hi))
}

fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
    Tensor::new(shape, data.to_vec()).unwrap()
}

fn assert_grad(inputs: &[Tensor<f64>], f: impl FnMut(&mut Tape<f64>, &[Var]) -> Result<Var>) {
    let r = check_gradients(inputs, DEFAULT_STEP, f).unwrap();
    assert!(r.relative_error < TOL, "relative error {:e}, per tensor {:?}", r.relative_error, r.per_tensor);
}

fn stats<'a>(mean: &'a mut [f64], var: &'a mut [f64]) -> RunningStats<'a, f64> {
    RunningStats { mean, var, momentum: 0.1 }
}

#[test]
fn conv_identity_and_ones() {
    let mut tape = Tape::<f64>::new();
    let x = tape.constant(Tensor::from_fn(&[1, 1, 3, 3], |i| i as f64));
    let w = tape.constant(t(&[1, 1, 1, 1], &[1.0]));
    let b = tape.constant(t(&[1], &[0.0]));
    let y = tape.conv2d(x, w, b, 1, 0).unwrap();
    assert_eq!(tape.value(y), tape.value(x));

    let ones = tape.constant(Tensor::full(&[1, 1, 3, 3], 1.0));
    let k = tape.constant(Tensor::full(&[1, 1, 3, 3], 1.0));
    let y = tape.conv2d(ones, k, b, 1, 0).unwrap();
    assert_eq!(tape.value(y).shape(), &[1, 1, 1, 1]);
    assert_eq!(tape.value(y).item(), 9.0);
}

#[test]
fn conv_shapes_and_errors() {
    let mut tape = Tape::<f64>::new();
    let x = tape.constant(Tensor::zeros(&[1, 3, 64, 64]));
    let w = tape.constant(Tensor::zeros(&[5, 3, 4, 4]));
    let b = tape.constant(Tensor::zeros(&[5]));
    let y = tape.conv2d(x, w, b, 2, 1).unwrap();
    assert_eq!(tape.shape(y), &[1, 5, 32, 32]);

    let bad = tape.constant(Tensor::zeros(&[5, 2, 4, 4]));
    assert!(matches!(tape.conv2d(x, bad, b, 2, 1), Err(Error::Dimension(_))));
    let tiny = tape.constant(Tensor::zeros(&[1, 3, 2, 2]));
    assert!(matches!(tape.conv2d(tiny, w, b, 1, 0), Err(Error::Geometry(_))));
}

#[test]
fn conv_transpose_doubles() {
    let mut tape = Tape::<f64>::new();
    let x = tape.constant(Tensor::zeros(&[1, 4, 16, 16]));
    let w3 = tape.constant(Tensor::zeros(&[4, 2, 3, 3]));
    let w4 = tape.constant(Tensor::zeros(&[4, 2, 4, 4]));
    let b = tape.constant(Tensor::zeros(&[2]));
    let y3 = tape.conv_transpose2d(x, w3, b, 2, 1, 1).unwrap();
    let y4 = tape.conv_transpose2d(x, w4, b, 2, 1, 0).unwrap();
    assert_eq!(tape.shape(y3), &[1, 2, 32, 32]);
    assert_eq!(tape.shape(y4), &[1, 2, 32, 32]);
}

#[test]
fn conv_transpose_is_adjoint_of_conv() {
    // <conv(x), y> == <x, convT(y)> with the same kernel (bias zero).
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = rand_tensor(&mut rng, &[1, 2, 6, 6], -1.0, 1.0);
    let y = rand_tensor(&mut rng, &[1, 3, 3, 3], -1.0, 1.0);
    let w = rand_tensor(&mut rng, &[3, 2, 3, 3], -1.0, 1.0);
    let mut tape = Tape::<f64>::new();
    let (xv, yv, wv) = (tape.constant(x.clone()), tape.constant(y.clone()), tape.constant(w));
    let b3 = tape.constant(Tensor::zeros(&[3]));
    let b2 = tape.constant(Tensor::zeros(&[2]));
    let cx = tape.conv2d(xv, wv, b3, 2, 1).unwrap();
    let ty = tape.conv_transpose2d(yv, wv, b2, 2, 1, 1).unwrap();
    assert_eq!(tape.shape(ty), x.shape());
    let lhs: f64 = tape.value(cx).data().iter().zip(y.data()).map(|(a, b)| a * b).sum();
    let rhs: f64 = x.data().iter().zip(tape.value(ty).data()).map(|(a, b)| a * b).sum();
    assert!((lhs - rhs).abs() < 1e-12);
}

#[test]
fn batch_norm_examples() {
    let mut tape = Tape::<f64>::new();
    let (mut m, mut v) = (vec![0.0], vec![1.0]);
    let c = tape.constant(Tensor::full(&[2, 1, 2, 2], 3.0));
    let g1 = tape.constant(t(&[1], &[1.0]));
    let b0 = tape.constant(t(&[1], &[0.0]));
    let y = tape.batch_norm(c, g1, b0, 1e-5, NormMode::Train, stats(&mut m, &mut v)).unwrap();
    assert!(tape.value(y).data().iter().all(|&v| v == 0.0));

    let x = tape.constant(t(&[1, 1, 2, 2], &[1.0, 2.0, 3.0, 4.0]));
    let g0 = tape.constant(t(&[1], &[0.0]));
    let bc = tape.constant(t(&[1], &[0.7]));
    let y = tape.batch_norm(x, g0, bc, 1e-5, NormMode::Train, stats(&mut m, &mut v)).unwrap();
    assert!(tape.value(y).data().iter().all(|&v| v == 0.7));

    let (mut m, mut v) = (vec![0.0], vec![1.0]);
    let y = tape.batch_norm(x, g1, b0, 1e-5, NormMode::Train, stats(&mut m, &mut v)).unwrap();
    let d = tape.value(y).data();
    let mean = d.iter().sum::<f64>() / 4.0;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
    assert!(mean.abs() < 1e-12);
    assert!((var - 1.25 / (1.25 + 1e-5)).abs() < 1e-12);
    let expect_first = (1.0 - 2.5) / (1.25f64 + 1e-5).sqrt();
    assert!((d[0] - expect_first).abs() < 1e-12);
    // Running statistics: momentum 0.1, unbiased variance 5/3.
    assert!((m[0] - 0.25).abs() < 1e-12);
    assert!((v[0] - (0.9 + 0.1 * 5.0 / 3.0)).abs() < 1e-12);

    // Frozen training mode leaves the statistics alone; eval uses them.
    let (m0, v0) = (m.clone(), v.clone());
    tape.batch_norm(x, g1, b0, 1e-5, NormMode::TrainFrozen, stats(&mut m, &mut v)).unwrap();
    assert_eq!((m.clone(), v.clone()), (m0, v0));
    let y = tape.batch_norm(x, g1, b0, 1e-5, NormMode::Eval, stats(&mut m, &mut v)).unwrap();
    assert!((tape.value(y).data()[0] - (1.0 - m[0]) / (v[0] + 1e-5).sqrt()).abs() < 1e-12);

    let g2 = tape.constant(t(&[2], &[1.0, 1.0]));
    assert!(matches!(
        tape.batch_norm(x, g2, b0, 1e-5, NormMode::Train, stats(&mut m, &mut v)),
        Err(Error::Dimension(_))
    ));
}

#[test]
fn activation_examples() {
    let mut tape = Tape::<f64>::new();
    let x = tape.constant(t(&[3], &[-1.0, 0.0, 2.0]));
    let r = tape.relu(x).unwrap();
    assert_eq!(tape.value(r).data(), &[0.0, 0.0, 2.0]);
    let l = tape.leaky_relu(x, 0.2).unwrap();
    assert_eq!(tape.value(l).data()[0], -0.2);
    let s = tape.sigmoid(x).unwrap();
    assert_eq!(tape.value(s).data()[1], 0.5);
    let th = tape.tanh(x).unwrap();
    assert_eq!(tape.value(th).data()[1], 0.0);
}

#[test]
fn pool_examples() {
    let mut tape = Tape::<f64>::new();
    let x = tape.constant(t(&[1, 1, 2, 2], &[1.0, 2.0, 3.0, 4.0]));
    let m = tape.pool(x, PoolKind::Max, 2, 2).unwrap();
    let a = tape.pool(x, PoolKind::Avg, 2, 2).unwrap();
    assert_eq!(tape.value(m).data(), &[4.0]);
    assert_eq!(tape.value(a).data(), &[2.5]);
    let big = tape.constant(Tensor::zeros(&[1, 3, 64, 64]));
    let pooled = tape.pool(big, PoolKind::Avg, 2, 2).unwrap();
    assert_eq!(tape.shape(pooled), &[1, 3, 32, 32]);
    assert!(matches!(tape.pool(x, PoolKind::Max, 3, 1), Err(Error::Geometry(_))));

    let g = tape.constant(t(&[1, 1, 2, 2], &[1.0, 3.0, 5.0, 7.0]));
    let ga = tape.global_pool(g, PoolKind::Avg).unwrap();
    let gm = tape.global_pool(g, PoolKind::Max).unwrap();
    assert_eq!(tape.value(ga).data(), &[4.0]);
    assert_eq!(tape.value(gm).data(), &[7.0]);
    assert_eq!(tape.shape(ga), &[1, 1, 1, 1]);
}

#[test]
fn upsample_concat_slice() {
    let mut tape = Tape::<f64>::new();
    let x = tape.constant(t(&[1, 1, 2, 2], &[1.0, 2.0, 3.0, 4.0]));
    let u = tape.upsample_nearest(x, 2).unwrap();
    assert_eq!(
        tape.value(u).data(),
        &[1.0, 1.0, 2.0, 2.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 4.0, 4.0, 3.0, 3.0, 4.0, 4.0]
    );
    let same = tape.upsample_nearest(x, 1).unwrap();
    assert_eq!(tape.value(same), tape.value(x));

    let parts: Vec<Var> = (0..4).map(|i| tape.constant(Tensor::full(&[1, 3, 2, 2], i as f64))).collect();
    let cat = tape.concat_channels(&parts).unwrap();
    assert_eq!(tape.shape(cat), &[1, 12, 2, 2]);
    let one = tape.concat_channels(&parts[..1]).unwrap();
    assert_eq!(tape.value(one), tape.value(parts[0]));
    for (i, &p) in parts.iter().enumerate() {
        let s = tape.slice_channels(cat, 3 * i, 3).unwrap();
        assert_eq!(tape.value(s), tape.value(p));
    }
    let wrong = tape.constant(Tensor::zeros(&[1, 3, 3, 2]));
    assert!(matches!(tape.concat_channels(&[parts[0], wrong]), Err(Error::Dimension(_))));
}

#[test]
fn concat_gradient_splits_exactly() {
    let mut tape = Tape::<f64>::new();
    let a = tape.leaf(Tensor::full(&[1, 1, 2, 2], 1.0), true);
    let b = tape.leaf(Tensor::full(&[1, 2, 2, 2], 1.0), true);
    let c = tape.concat_channels(&[a, b]).unwrap();
    let w = tape.constant(Tensor::from_fn(&[1, 3, 2, 2], |i| i as f64));
    let p = tape.mul(c, w).unwrap();
    let s = tape.sum_all(p).unwrap();
    tape.backward(s).unwrap();
    assert_eq!(tape.grad(a).unwrap().data(), &[0.0, 1.0, 2.0, 3.0]);
    assert_eq!(tape.grad(b).unwrap().data(), &[4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0]);
}

#[test]
fn elementwise_and_broadcast() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut tape = Tape::<f64>::new();
    let xt = rand_tensor(&mut rng, &[1, 3, 2, 2], -1.0, 1.0);
    let x = tape.constant(xt.clone());
    let ones = tape.constant(Tensor::full(&[1, 3, 2, 2], 1.0));
    let p = tape.mul(x, ones).unwrap();
    assert_eq!(tape.value(p), &xt);
    let neg = tape.scale(x, -1.0).unwrap();
    let z = tape.add(x, neg).unwrap();
    assert!(tape.value(z).data().iter().all(|&v| v == 0.0));

    let w = tape.constant(t(&[3, 1, 1], &[1.0, 2.0, 3.0]));
    let y = tape.mul(w, x).unwrap();
    assert_eq!(tape.shape(y), &[1, 3, 2, 2]);
    for c in 0..3 {
        for i in 0..4 {
            assert_eq!(tape.value(y).data()[c * 4 + i], xt.data()[c * 4 + i] * (c + 1) as f64);
        }
    }
    let bad = tape.constant(Tensor::zeros(&[2, 1, 1]));
    assert!(matches!(tape.mul(bad, x), Err(Error::Dimension(_))));

    let zero = tape.constant(Tensor::zeros(&[1, 3, 2, 2]));
    assert!(matches!(tape.div(zero, zero), Err(Error::NonFinite(_))));
    let mut unchecked = Tape::unchecked();
    let z = unchecked.constant(Tensor::<f64>::zeros(&[1]));
    let nan = unchecked.div(z, z).unwrap();
    assert!(unchecked.value(nan).data()[0].is_nan());
}

#[test]
fn reduce_examples() {
    let mut tape = Tape::<f64>::new();
    let x = tape.constant(t(&[3], &[1.0, 2.0, 3.0]));
    let m = tape.reduce(x, ReduceOp::Mean, &[0]).unwrap();
    assert_eq!(tape.value(m).data(), &[2.0]);
    let z = tape.constant(Tensor::zeros(&[4]));
    let s = tape.reduce(z, ReduceOp::Sum, &[0]).unwrap();
    assert_eq!(tape.value(s).data(), &[0.0]);
    assert_eq!(tape.reduce(x, ReduceOp::Max, &[]).unwrap(), x);
    let px = tape.constant(t(&[1, 3, 1, 2], &[0.1, 0.9, 0.5, 0.2, 0.3, 0.4]));
    let bright = tape.reduce(px, ReduceOp::Max, &[1]).unwrap();
    assert_eq!(tape.shape(bright), &[1, 1, 1, 2]);
    assert_eq!(tape.value(bright).data(), &[0.5, 0.9]);
    let dark = tape.reduce(px, ReduceOp::Min, &[1]).unwrap();
    assert_eq!(tape.value(dark).data(), &[0.1, 0.2]);
    assert!(matches!(tape.reduce(x, ReduceOp::Sum, &[1]), Err(Error::Dimension(_))));
}

#[test]
fn backward_examples() {
    let mut tape = Tape::<f64>::new();
    let xt = t(&[2, 2], &[1.0, -2.0, 3.0, 0.5]);
    let x = tape.leaf(xt.clone(), true);
    let s = tape.sum_all(x).unwrap();
    tape.backward(s).unwrap();
    assert!(tape.grad(x).unwrap().data().iter().all(|&g| g == 1.0));

    let mut tape = Tape::<f64>::new();
    let x = tape.leaf(xt.clone(), true);
    let sq = tape.mul(x, x).unwrap();
    let s = tape.sum_all(sq).unwrap();
    tape.backward(s).unwrap();
    let want: Vec<f64> = xt.data().iter().map(|v| 2.0 * v).collect();
    assert_eq!(tape.grad(x).unwrap().data(), want.as_slice());

    assert!(matches!(tape.backward(sq), Err(Error::Contract(_))));
}

#[test]
fn constants_get_no_gradient() {
    let mut tape = Tape::<f64>::new();
    let x = tape.leaf(Tensor::full(&[3], 2.0), true);
    let c = tape.constant(Tensor::full(&[3], 5.0));
    let p = tape.mul(x, c).unwrap();
    let s = tape.sum_all(p).unwrap();
    tape.backward(s).unwrap();
    assert!(tape.grad(c).is_none());
    assert_eq!(tape.grad(x).unwrap().data(), &[5.0, 5.0, 5.0]);
}

#[test]
fn gradient_accumulates_over_fanout() {
    let mut tape = Tape::<f64>::new();
    let x = tape.leaf(Tensor::full(&[2], 1.5), true);
    let a = tape.scale(x, 2.0).unwrap();
    let b = tape.scale(x, 3.0).unwrap();
    let y = tape.add(a, b).unwrap();
    let s = tape.sum_all(y).unwrap();
    tape.backward(s).unwrap();
    assert_eq!(tape.grad(x).unwrap().data(), &[5.0, 5.0]);
}

// ---- finite-difference checks, one per differentiable op ----

#[test]
fn grad_conv2d() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let inputs = [
        rand_tensor(&mut rng, &[1, 2, 5, 5], -1.0, 1.0),
        rand_tensor(&mut rng, &[3, 2, 3, 3], -1.0, 1.0),
        rand_tensor(&mut rng, &[3], -1.0, 1.0),
    ];
    assert_grad(&inputs, |t, v| t.conv2d(v[0], v[1], v[2], 1, 1));
    assert_grad(&inputs, |t, v| t.conv2d(v[0], v[1], v[2], 2, 0));
    let k4 = [
        rand_tensor(&mut rng, &[2, 2, 5, 5], -1.0, 1.0),
        rand_tensor(&mut rng, &[2, 2, 4, 4], -1.0, 1.0),
        rand_tensor(&mut rng, &[2], -1.0, 1.0),
    ];
    assert_grad(&k4, |t, v| t.conv2d(v[0], v[1], v[2], 1, Padding::same(4)));
    assert_grad(&k4, |t, v| t.conv2d(v[0], v[1], v[2], 2, 1));
}

#[test]
fn grad_conv_transpose2d() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let k3 = [
        rand_tensor(&mut rng, &[2, 3, 3, 3], -1.0, 1.0),
        rand_tensor(&mut rng, &[3, 2, 3, 3], -1.0, 1.0),
        rand_tensor(&mut rng, &[2], -1.0, 1.0),
    ];
    assert_grad(&k3, |t, v| t.conv_transpose2d(v[0], v[1], v[2], 2, 1, 1));
    let k4 = [
        rand_tensor(&mut rng, &[1, 2, 3, 3], -1.0, 1.0),
        rand_tensor(&mut rng, &[2, 3, 4, 4], -1.0, 1.0),
        rand_tensor(&mut rng, &[3], -1.0, 1.0),
    ];
    assert_grad(&k4, |t, v| t.conv_transpose2d(v[0], v[1], v[2], 2, 1, 0));
}

#[test]
fn grad_batch_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let inputs = [
        rand_tensor(&mut rng, &[2, 3, 3, 3], -2.0, 2.0),
        rand_tensor(&mut rng, &[3], 0.5, 1.5),
        rand_tensor(&mut rng, &[3], -0.5, 0.5),
    ];
    for mode in [NormMode::TrainFrozen, NormMode::Eval] {
        let mut m = vec![0.1, -0.2, 0.3];
        let mut v = vec![1.5, 0.7, 1.1];
        assert_grad(&inputs, |t, x| t.batch_norm(x[0], x[1], x[2], 1e-5, mode, stats(&mut m, &mut v)));
    }
}

#[test]
fn grad_activations() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    // Keep samples away from the ReLU kink.
    let x = Tensor::from_fn(&[2, 3, 4], |_| {
        let v: f64 = rng.random_range(0.05..2.0);
        if rng.random_bool(0.5) { v } else { -v }
    });
    let inputs = [x];
    assert_grad(&inputs, |t, v| t.relu(v[0]));
    assert_grad(&inputs, |t, v| t.leaky_relu(v[0], 0.2));
    assert_grad(&inputs, |t, v| t.sigmoid(v[0]));
    assert_grad(&inputs, |t, v| t.tanh(v[0]));
}

#[test]
fn grad_binary_with_broadcast() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let a = rand_tensor(&mut rng, &[2, 3, 2, 2], -1.0, 1.0);
    let b = rand_tensor(&mut rng, &[2, 3, 2, 2], 0.5, 1.5);
    let c = rand_tensor(&mut rng, &[3, 1, 1], 0.5, 1.5);
    let d = rand_tensor(&mut rng, &[2, 1, 2, 2], 0.5, 1.5);
    for kind in [BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div] {
        assert_grad(&[a.clone(), b.clone()], |t, v| t.binary(v[0], v[1], kind));
        assert_grad(&[a.clone(), c.clone()], |t, v| t.binary(v[0], v[1], kind));
        assert_grad(&[d.clone(), a.clone()], |t, v| t.binary(v[1], v[0], kind));
    }
}

#[test]
fn grad_affine_clamp_ln() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let x = Tensor::from_fn(&[10], |i| if i % 2 == 0 { rng.random_range(-0.8..0.8) } else { rng.random_range(1.2..2.0) });
    let pos = rand_tensor(&mut rng, &[6], 0.2, 3.0);
    assert_grad(core::slice::from_ref(&x), |t, v| t.affine(v[0], 1.7, -0.3));
    assert_grad(core::slice::from_ref(&x), |t, v| t.clamp(v[0], -1.0, 1.0));
    assert_grad(&[pos], |t, v| t.ln(v[0]));
}

#[test]
fn grad_pools() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    // Distinct values so max-pool argmaxes are stable.
    let mut vals: Vec<f64> = (0..2 * 2 * 4 * 4).map(|i| i as f64 * 0.1).collect();
    for i in (1..vals.len()).rev() {
        vals.swap(i, rng.random_range(0..=i));
    }
    let inputs = [t(&[2, 2, 4, 4], &vals)];
    assert_grad(&inputs, |t, v| t.pool(v[0], PoolKind::Max, 2, 2));
    assert_grad(&inputs, |t, v| t.pool(v[0], PoolKind::Avg, 2, 2));
    assert_grad(&inputs, |t, v| t.global_pool(v[0], PoolKind::Max));
    assert_grad(&inputs, |t, v| t.global_pool(v[0], PoolKind::Avg));
}

#[test]
fn grad_shape_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let a = rand_tensor(&mut rng, &[2, 2, 3, 3], -1.0, 1.0);
    let b = rand_tensor(&mut rng, &[2, 3, 3, 3], -1.0, 1.0);
    assert_grad(core::slice::from_ref(&a), |t, v| t.upsample_nearest(v[0], 2));
    assert_grad(core::slice::from_ref(&a), |t, v| t.upsample_nearest(v[0], 4));
    assert_grad(&[a.clone(), b.clone()], |t, v| t.concat_channels(&[v[0], v[1], v[0]]));
    assert_grad(core::slice::from_ref(&b), |t, v| t.slice_channels(v[0], 1, 2));
    assert_grad(core::slice::from_ref(&b), |t, v| t.reshape(v[0], &[6, 9]));
}

#[test]
fn grad_reductions() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let mut vals: Vec<f64> = (0..2 * 3 * 2 * 2).map(|i| i as f64 * 0.05 - 0.3).collect();
    for i in (1..vals.len()).rev() {
        vals.swap(i, rng.random_range(0..=i));
    }
    let inputs = [t(&[2, 3, 2, 2], &vals)];
    for kind in [ReduceOp::Sum, ReduceOp::Mean, ReduceOp::Max, ReduceOp::Min] {
        assert_grad(&inputs, |t, v| t.reduce(v[0], kind, &[1]));
        assert_grad(&inputs, |t, v| t.reduce(v[0], kind, &[0, 2, 3]));
    }
    assert_grad(&inputs, |t, v| t.sum_all(v[0]));
    assert_grad(&inputs, |t, v| t.mean_all(v[0]));
    let other = rand_tensor(&mut rng, &[2, 3, 2, 2], -1.0, 1.0);
    assert_grad(&[inputs[0].clone(), other], |t, v| t.mse(v[0], v[1]));
}

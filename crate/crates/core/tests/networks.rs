use haan_core::autodiff::{NormMode, Tape};
use haan_core::networks::{
    airlight_tensor, discriminator_output_size, synthesize_with, ArchConfig, AttentionFusion, DefogGenerator,
    Discriminator, Network, SkySegmentation, TransmissionNet,
};
use haan_core::{Error, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn arch(width_scale: usize) -> ArchConfig {
    ArchConfig { width_scale, ..ArchConfig::desk() }
}

fn random(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor<f32> {
    Tensor::from_fn(shape, |_| rng.random_range(-scale..scale) as f32)
}

// Hand tallies: conv = out·in·k² + out, batch norm = 2·channels.
fn conv(ci: usize, co: usize, k: usize) -> usize {
    co * ci * k * k + co
}
fn bn(c: usize) -> usize {
    2 * c
}

fn defog_tally(s: usize) -> usize {
    let (c, g) = (64 / s, 32 / s);
    let dense = |cin: usize| (0..3).map(|i| conv(cin + g * i, g, 3) + bn(g)).sum::<usize>() + bn(3 * g);
    conv(3, c, 7) + bn(c)
        + dense(c) + conv(3 * g, c, 1)
        + conv(2 * c, 2 * c, 3) + bn(2 * c)
        + dense(2 * c) + conv(3 * g, 2 * c, 1)
        + 6 * (2 * conv(4 * c, 4 * c, 3) + 2 * bn(4 * c))
        + conv(4 * c, 2 * c, 3) + conv(4 * c, 2 * c, 3) + bn(2 * c) + conv(2 * c, 2 * c, 1)
        + conv(2 * c, c, 3) + conv(2 * c, c, 3) + bn(c) + conv(c, c, 1)
        + conv(c, 3, 7)
}

#[test]
fn parameter_counts_match_hand_tallies() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    // Regression table (width_scale = 1 and 4).
    let table = [(1, 8_253_443, 132_161, 9_830_020, 1_414, 6_962_369), (4, 521_603, 12_305, 619_684, 1_414, 438_065)];
    for (s, defog, trans, ssm, ctr, disc) in table {
        let a = arch(s);
        assert_eq!(defog_tally(s), defog);
        assert_eq!(DefogGenerator::<f32>::new(&a, &mut rng).params().num_scalars(), defog);
        assert_eq!(TransmissionNet::<f32>::new(&a, &mut rng).params().num_scalars(), trans);
        assert_eq!(conv(4, 64 / s, 9) + 3 * conv(64 / s, 64 / s, 3) + conv(64 / s, 1, 3), trans);
        assert_eq!(SkySegmentation::<f32>::new(&a, &mut rng).params().num_scalars(), ssm);
        assert_eq!(AttentionFusion::<f32>::new(&a, &mut rng).params().num_scalars(), ctr);
        assert_eq!(conv(12, 12, 3) + conv(12, 3, 1) + conv(3, 12, 1) + conv(2, 1, 3), ctr);
        assert_eq!(Discriminator::<f32>::new("d", &a, &mut rng).params().num_scalars(), disc);
    }
}

#[test]
fn parameter_names_are_unique_and_ordered() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let net = DefogGenerator::<f32>::new(&arch(16), &mut rng);
    let names: Vec<&str> = net.params().tensor_names().collect();
    let mut sorted = names.clone();
    sorted.sort();
    sorted.dedup();
    assert_eq!(sorted.len(), names.len());
    assert_eq!(names[0], "enc1.conv.w");
    let again = DefogGenerator::<f32>::new(&arch(16), &mut ChaCha8Rng::seed_from_u64(1));
    assert_eq!(again.params(), net.params());
}

#[test]
fn discriminator_patch_maps() {
    assert_eq!(discriminator_output_size(256), Some(30));
    assert_eq!(discriminator_output_size(64), Some(6));
    assert_eq!(discriminator_output_size(16), None);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut d = Discriminator::<f32>::new("dff", &arch(16), &mut rng);
    for (size, out) in [(256, 30), (64, 6)] {
        let mut tape = Tape::new();
        let bind = d.params().bind(&mut tape, false);
        let x = tape.constant(random(&mut rng, &[1, 3, size, size], 1.0));
        let y = d.forward(&mut tape, &bind, x, NormMode::Eval).unwrap();
        assert_eq!(tape.shape(y), &[1, 1, out, out]);
    }
    let mut tape = Tape::new();
    let bind = d.params().bind(&mut tape, false);
    let x = tape.constant(Tensor::zeros(&[1, 3, 16, 16]));
    assert!(matches!(d.forward(&mut tape, &bind, x, NormMode::Eval), Err(Error::Geometry(_))));
}

#[test]
fn discriminator_is_fully_convolutional() {
    // The map before the last two (size-preserving, stride-1) layers
    // doubles with the input once the strided layers divide evenly.
    for size in [64usize, 128, 256] {
        assert_eq!(discriminator_output_size(2 * size).unwrap() + 2, 2 * (discriminator_output_size(size).unwrap() + 2));
    }
}

#[test]
fn defog_shapes_and_bottleneck() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for s in [4, 16] {
        let mut g = DefogGenerator::<f32>::new(&arch(s), &mut rng);
        let mut tape = Tape::new();
        let bind = g.params().bind(&mut tape, false);
        let x = tape.constant(random(&mut rng, &[1, 3, 64, 64], 1.0));
        let out = g.forward(&mut tape, &bind, x, NormMode::Eval).unwrap();
        assert_eq!(tape.shape(out.image), &[1, 3, 64, 64]);
        assert_eq!(tape.shape(out.bottleneck), &[1, 256 / s, 16, 16]);
        assert_eq!(g.bottleneck_channels(), 256 / s);
    }
    let mut g = DefogGenerator::<f32>::new(&arch(16), &mut rng);
    let r = g.infer(&Tensor::zeros(&[1, 3, 30, 30]));
    assert!(matches!(r, Err(Error::Config(_))));
    assert_eq!(g.infer(&Tensor::zeros(&[1, 3, 12, 20])).unwrap().shape(), &[1, 3, 12, 20]);
}

#[test]
fn ssm_shapes_and_divisibility() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut m = SkySegmentation::<f32>::new(&arch(16), &mut rng);
    let (e, s) = m.infer(&random(&mut rng, &[1, 3, 64, 64], 1.0)).unwrap();
    assert_eq!(e.shape(), &[1, 3, 64, 64]);
    assert_eq!(s.shape(), &[1, 1, 64, 64]);
    assert!(matches!(m.infer(&Tensor::zeros(&[1, 3, 12, 12])), Err(Error::Config(_))));
}

#[test]
fn transmission_shapes_and_zeroed_tail() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut t = TransmissionNet::<f64>::new(&arch(16), &mut rng);
    let mut tape = Tape::new();
    let bind = t.params().bind(&mut tape, false);
    let x = tape.constant(Tensor::from_fn(&[1, 3, 32, 32], |i| ((i % 17) as f64 / 8.0) - 1.0));
    let y = t.forward(&mut tape, &bind, x).unwrap();
    assert_eq!(tape.shape(y), &[1, 1, 32, 32]);

    let shape = t.params().value(t.params().find("tail.w").unwrap()).shape().to_vec();
    t.params_mut().assign("tail.w", Tensor::zeros(&shape)).unwrap();
    let mut tape = Tape::new();
    let bind = t.params().bind(&mut tape, false);
    let x = tape.constant(Tensor::from_fn(&[1, 3, 8, 8], |i| (i as f64).sin()));
    let y = t.forward(&mut tape, &bind, x).unwrap();
    assert!(tape.value(y).data().iter().all(|&v| v == 0.5));
}

#[test]
fn scattering_inside_the_generator() {
    let mut tape = Tape::<f64>::new();
    let clear = Tensor::from_fn(&[1, 3, 2, 2], |i| (i as f64) / 6.0 - 1.0);
    let x = tape.constant(clear.clone());
    let a = tape.constant(airlight_tensor(&[[0.9, 0.8, 0.7]]));
    let one = tape.constant(Tensor::full(&[1, 1, 2, 2], 1.0));
    let y = synthesize_with(&mut tape, x, one, a).unwrap();
    for (got, want) in tape.value(y).data().iter().zip(clear.data()) {
        assert!((got - want).abs() < 1e-15);
    }
    // Constant clear 0.8 (unit), t = 0.25, A = 0.9 → 0.875 unit → 0.75 signed.
    let c = tape.constant(Tensor::full(&[1, 3, 2, 2], 0.6));
    let t = tape.constant(Tensor::full(&[1, 1, 2, 2], 0.25));
    let a = tape.constant(airlight_tensor(&[[0.9; 3]]));
    let y = synthesize_with(&mut tape, c, t, a).unwrap();
    assert!(tape.value(y).data().iter().all(|v| (v - 0.75).abs() < 1e-12));
}

#[test]
fn fusion_with_saturated_channel_attention_sums_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut f = AttentionFusion::<f64>::new(&ArchConfig::desk(), &mut rng);
    f.params_mut().assign("ca.excite.w", Tensor::zeros(&[12, 3, 1, 1])).unwrap();
    f.params_mut().assign("ca.excite.b", Tensor::full(&[12], 80.0)).unwrap();
    let img = Tensor::from_fn(&[1, 3, 8, 8], |i| ((i * 7) % 13) as f64 / 26.0 - 0.25);
    let mut tape = Tape::new();
    let bind = f.params().bind(&mut tape, false);
    let v: Vec<_> = (0..4).map(|_| tape.constant(img.clone())).collect();
    let (out, maps) = f.forward_with_maps(&mut tape, &bind, [v[0], v[1], v[2], v[3]]).unwrap();
    assert!(tape.value(maps.channel).data().iter().all(|&w| w == 1.0));
    let ws = tape.value(maps.spatial).data().to_vec();
    let plane = 64;
    for (i, &o) in tape.value(out).data().iter().enumerate() {
        let want = (4.0 * img.data()[i] * ws[i % plane]).clamp(-1.0, 1.0);
        assert!((o - want).abs() < 1e-12);
    }
    let odd = tape.constant(Tensor::zeros(&[1, 3, 4, 4]));
    assert!(matches!(f.forward(&mut tape, &bind, [v[0], v[1], v[2], odd]), Err(Error::Dimension(_))));
}

#[test]
fn bounded_outputs_on_random_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let a = arch(16);
    let mut defog = DefogGenerator::<f32>::new(&a, &mut rng);
    let mut trans = TransmissionNet::<f32>::new(&a, &mut rng);
    let mut ssm = SkySegmentation::<f32>::new(&a, &mut rng);
    let mut ctr = AttentionFusion::<f32>::new(&a, &mut rng);
    for i in 0..100 {
        let scale = [1.0, 3.0, 10.0][i % 3];
        let x = random(&mut rng, &[1, 3, 16, 16], scale);
        let y = defog.infer(&x).unwrap();
        assert!(y.data().iter().all(|v| (-1.0..=1.0).contains(v)));
        let (e, s) = ssm.infer(&x).unwrap();
        assert!(e.data().iter().all(|v| (-1.0..=1.0).contains(v)));
        assert!(s.data().iter().all(|v| (0.0..=1.0).contains(v)));

        let mut tape = Tape::new();
        let bt = trans.params().bind(&mut tape, false);
        let bc = ctr.params().bind(&mut tape, false);
        let xv = tape.constant(x.clone());
        let t = trans.forward(&mut tape, &bt, xv).unwrap();
        assert!(tape.value(t).data().iter().all(|&v| v > 0.0 && v < 1.0));
        let others: Vec<_> = (0..3).map(|_| tape.constant(random(&mut rng, &[1, 3, 16, 16], scale))).collect();
        let (out, maps) = ctr.forward_with_maps(&mut tape, &bc, [xv, others[0], others[1], others[2]]).unwrap();
        assert!(tape.value(out).data().iter().all(|v| (-1.0..=1.0).contains(v)));
        for m in [maps.channel, maps.spatial] {
            assert!(tape.value(m).data().iter().all(|&w| w > 0.0 && w < 1.0));
        }
    }
}

#[test]
fn eval_forward_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut g = DefogGenerator::<f32>::new(&arch(16), &mut rng);
    let x = random(&mut rng, &[2, 3, 16, 16], 1.0);
    let a = g.infer(&x).unwrap();
    let b = g.infer(&x).unwrap();
    assert_eq!(a.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
}

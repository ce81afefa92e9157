use haan_core::image::{ImageRGB, Range};
use haan_core::metrics::{edge_gradient_ratio, psnr, ssim};
use haan_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Direct 2-D windowed SSIM: explicit 11×11 Gaussian weights, weighted
/// moments summed per window position, no separability.
fn ssim_oracle(a: &ImageRGB, b: &ImageRGB) -> f64 {
    let (h, w) = (a.height(), a.width());
    let gray = |img: &ImageRGB, y: usize, x: usize| {
        let p = img.pixel(y, x);
        (p[0] + p[1] + p[2]) / 3.0
    };
    let mut win = [[0.0f64; 11]; 11];
    let mut norm = 0.0;
    for (i, row) in win.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (dy, dx) = (i as f64 - 5.0, j as f64 - 5.0);
            *v = (-(dy * dy + dx * dx) / (2.0 * 1.5 * 1.5)).exp();
            norm += *v;
        }
    }
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let mut total = 0.0;
    let mut count = 0;
    for y0 in 0..=h - 11 {
        for x0 in 0..=w - 11 {
            let (mut ma, mut mb) = (0.0, 0.0);
            for i in 0..11 {
                for j in 0..11 {
                    let k = win[i][j] / norm;
                    ma += k * gray(a, y0 + i, x0 + j);
                    mb += k * gray(b, y0 + i, x0 + j);
                }
            }
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for i in 0..11 {
                for j in 0..11 {
                    let k = win[i][j] / norm;
                    let da = gray(a, y0 + i, x0 + j) - ma;
                    let db = gray(b, y0 + i, x0 + j) - mb;
                    va += k * da * da;
                    vb += k * db * db;
                    cov += k * da * db;
                }
            }
            total += (2.0 * ma * mb + c1) * (2.0 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    total / count as f64
}

fn gradient_image(h: usize, w: usize) -> ImageRGB {
    ImageRGB::from_fn(h, w, Range::Unit, |y, x| {
        let v = (y + x) as f64 / (h + w - 2) as f64;
        [v, 0.5 * v + 0.25, 1.0 - v]
    })
    .unwrap()
}

fn noised(img: &ImageRGB, amp: f64, seed: u64) -> ImageRGB {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let px = img.pixels().iter().map(|v| (v + rng.random_range(-amp..amp)).clamp(0.0, 1.0)).collect();
    ImageRGB::new(img.height(), img.width(), Range::Unit, px).unwrap()
}

#[test]
fn ssim_matches_windowed_oracle() {
    let a = gradient_image(16, 16);
    let b = noised(&a, 0.05, 1);
    let (got, want) = (ssim(&a, &b).unwrap(), ssim_oracle(&a, &b));
    assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    assert!(got < 1.0);
    let c = noised(&gradient_image(23, 31), 0.3, 2);
    let d = noised(&c, 0.1, 3);
    assert!((ssim(&c, &d).unwrap() - ssim_oracle(&c, &d)).abs() < 1e-6);
}

#[test]
fn ssim_identity_and_errors() {
    let a = noised(&gradient_image(16, 16), 0.2, 4);
    assert_eq!(ssim(&a, &a).unwrap(), 1.0);
    let inv = ImageRGB::new(16, 16, Range::Unit, a.pixels().iter().map(|v| 1.0 - v).collect()).unwrap();
    assert!(ssim(&a, &inv).unwrap() < 1.0);
    let small = gradient_image(10, 16);
    assert!(matches!(ssim(&small, &small), Err(Error::Geometry(_))));
    assert!(matches!(ssim(&a, &gradient_image(16, 17)), Err(Error::Dimension(_))));
}

#[test]
fn psnr_examples() {
    let a = ImageRGB::filled(8, 8, Range::Unit, [0.3, 0.4, 0.5]).unwrap();
    let b = ImageRGB::filled(8, 8, Range::Unit, [0.4, 0.5, 0.6]).unwrap();
    assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-9);
    assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
    let zero = ImageRGB::filled(4, 4, Range::Unit, [0.0; 3]).unwrap();
    let one = ImageRGB::filled(4, 4, Range::Unit, [1.0; 3]).unwrap();
    assert_eq!(psnr(&zero, &one).unwrap(), 0.0);
}

#[test]
fn edge_ratio_examples() {
    let f = gradient_image(16, 16);
    let same = edge_gradient_ratio(&f, &f).unwrap();
    // The 1e-6 guard in the denominator keeps ratios just under 1.
    assert!(!same.empty && (same.value - 1.0).abs() < 1e-4 && same.value <= 1.0);
    let half = ImageRGB::new(16, 16, Range::Unit, f.pixels().iter().map(|v| 0.5 * v).collect()).unwrap();
    let r = edge_gradient_ratio(&half, &f).unwrap();
    assert!((r.value - 2.0).abs() < 1e-4);
    let flat = ImageRGB::filled(16, 16, Range::Unit, [0.5; 3]).unwrap();
    let e = edge_gradient_ratio(&f, &flat).unwrap();
    assert!(e.empty && e.value == 1.0);
}

fn image_strategy() -> impl Strategy<Value = (ImageRGB, ImageRGB)> {
    (11usize..20, 11usize..20, any::<u64>()).prop_map(|(h, w, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gen = || ImageRGB::from_fn(h, w, Range::Unit, |_, _| [rng.random(), rng.random(), rng.random()]).unwrap();
        (gen(), gen())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn metrics_are_symmetric_and_bounded((a, b) in image_strategy()) {
        let s = ssim(&a, &b).unwrap();
        prop_assert!((s - ssim(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&s));
        prop_assert_eq!(ssim(&a, &a).unwrap(), 1.0);
        let p = psnr(&a, &b).unwrap();
        prop_assert_eq!(p, psnr(&b, &a).unwrap());
        prop_assert!(p > 0.0);
        prop_assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
    }
}

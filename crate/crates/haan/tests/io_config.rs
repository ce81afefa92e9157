use haan::config::TrainConfig;
use haan::image_io::{dequantize, fit_multiple, list_pngs, quantize, read_png, write_gray_png, write_png};
use haan::HaanError;
use haan_core::image::{ImageRGB, Range};
use proptest::prelude::*;
use std::path::Path;

#[test]
fn quantization_rounds_half_up() {
    assert_eq!(quantize(0.0), 0);
    assert_eq!(quantize(1.0), 255);
    assert_eq!(quantize(0.5 / 255.0), 1);
    assert_eq!(quantize(0.499 / 255.0), 0);
    assert_eq!(quantize(-0.3), 0);
    assert_eq!(quantize(1.7), 255);
    for b in 0..=255u8 {
        assert_eq!(quantize(dequantize(b)), b);
    }
}

#[test]
fn png_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let img = ImageRGB::from_fn(5, 7, Range::Unit, |y, x| [y as f64 / 4.0, x as f64 / 6.5, 0.5]).unwrap();
    let path = dir.path().join("sub/a.png");
    write_png(&path, &img).unwrap();
    let back = read_png(&path).unwrap();
    assert_eq!((back.height(), back.width()), (5, 7));
    for (a, b) in back.pixels().iter().zip(img.pixels()) {
        assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
    }
    write_png(&path, &back).unwrap();
    assert_eq!(read_png(&path).unwrap(), back);
    let signed = img.to_signed().unwrap();
    write_png(&dir.path().join("s.png"), &signed).unwrap();
    assert_eq!(read_png(&dir.path().join("s.png")).unwrap(), back);

    write_gray_png(&dir.path().join("g.png"), &[0.0, 0.5, 1.0, 0.25], 2, 2).unwrap();
    let g = read_png(&dir.path().join("g.png")).unwrap();
    assert_eq!(g.pixel(0, 1), [128.0 / 255.0; 3]);
    std::fs::write(dir.path().join("junk.png"), b"not a png").unwrap();
    assert!(matches!(read_png(&dir.path().join("junk.png")), Err(HaanError::Png { .. })));
    assert!(matches!(read_png(Path::new("/nonexistent/x.png")), Err(HaanError::Io { .. })));
    let names: Vec<String> = list_pngs(dir.path()).unwrap().iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert_eq!(names, ["g.png", "junk.png", "s.png"]);
}

#[test]
fn fitting_to_multiples() {
    let img = ImageRGB::filled(30, 17, Range::Unit, [0.2; 3]).unwrap();
    let f = fit_multiple(&img, 4).unwrap();
    assert_eq!((f.height(), f.width()), (28, 16));
    let tiny = ImageRGB::filled(3, 3, Range::Unit, [0.2; 3]).unwrap();
    let f = fit_multiple(&tiny, 8).unwrap();
    assert_eq!((f.height(), f.width()), (8, 8));
}

#[test]
fn config_defaults_and_errors() {
    let c = TrainConfig::from_json("{}", Path::new("c.json")).unwrap();
    assert_eq!(c, TrainConfig::default());
    assert_eq!((c.image_size, c.width_scale, c.batch_size, c.lr), (64, 4, 2, 1e-4));
    assert_eq!(c.weights().as_array(), [10.0, 10.0, 10.0, 5.0, 5.0, 1.0]);
    assert_eq!(c.log_path(), Path::new("haan.jsonl"));

    let e = TrainConfig::from_json(r#"{"lr": "fast"}"#, Path::new("c.json")).unwrap_err();
    assert!(e.is_usage());
    assert!(e.to_string().contains("c.json"));
    let e = TrainConfig::from_json(r#"{"learning_rate": 1}"#, Path::new("c.json")).unwrap_err();
    assert!(e.to_string().contains("learning_rate"), "{e}");
    let e = TrainConfig::from_json(r#"{"lambdas": {"lambda1": 1}}"#, Path::new("c.json")).unwrap_err();
    assert!(e.to_string().contains("lambda2"), "{e}");

    let bad = TrainConfig { lr: 0.0, ..TrainConfig::default() };
    assert!(bad.validate().unwrap_err().is_usage());
    let bad = TrainConfig { image_size: 30, ..TrainConfig::default() };
    assert!(bad.validate().unwrap_err().is_usage());
    let missing = TrainConfig { fog_dir: Some("/nonexistent/fog".into()), ..TrainConfig::default() };
    let e = missing.validate().unwrap_err();
    assert!(!e.is_usage() && e.to_string().contains("/nonexistent/fog"));
    let json = serde_json::to_string(&TrainConfig::default()).unwrap();
    assert_eq!(TrainConfig::from_json(&json, Path::new("x")).unwrap(), TrainConfig::default());
}

proptest! {
    #[test]
    fn quantize_is_monotone_and_within_half_step(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        if a <= b {
            prop_assert!(quantize(a) <= quantize(b));
        }
        prop_assert!((dequantize(quantize(a)) - a).abs() <= 0.5 / 255.0 + 1e-12);
    }
}

//! Command-line front end. Exit codes: 0 success, 1 usage error, 2 runtime
//! error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use haan_core::asm::{invert_fog, synthesize_fog, transmission_from_depth, AirlightSource, AtmosphericLight, T_FLOOR};
use haan_core::derived::{contrast_enhance, gamma_correct, white_balance};
use haan_core::image::ImageRGB;
use haan_core::synthetic::sample_airlight;
use haan_core::Error as CoreError;
use rayon::prelude::*;

use crate::checkpoint::Checkpoint;
use crate::config::TrainConfig;
use crate::error::{HaanError, Result};
use crate::evaluate::{build_report, evaluate_items, pair_by_stem, Defogger, IdentityDefogger, ModelDefogger, ReportMetadata};
use crate::image_io::{fit_multiple, list_pngs, read_png, stem, write_gray_png, write_png};
use crate::train::{rng_for, train, train_ssm};

/// Environment variable capping worker threads (0 or unset = automatic).
pub const THREADS_ENV: &str = "HAAN_THREADS";

#[derive(Debug, Parser)]
#[command(name = "haan", version, about = "Unsupervised single-image defogging")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fog a clear image with the atmospheric scattering model (or invert it).
    Synth(SynthArgs),
    /// Write the white-balanced, contrast-enhanced and gamma-corrected inputs.
    Derive(DeriveArgs),
    /// Train the defogging networks from a JSON config.
    Train(ConfigArgs),
    /// Train the sky segmentation model from a JSON config.
    TrainSsm(ConfigArgs),
    /// Defog an image or every PNG in a directory.
    Defog(DefogArgs),
    /// Evaluate a checkpoint and write a metrics report.
    Eval(EvalArgs),
    /// Predict a sky mask and estimate the airlight.
    SegmentSky(SegmentArgs),
}

/// Airlight given on the command line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AirlightArg {
    Auto,
    Rgb([f64; 3]),
}

fn parse_airlight(s: &str) -> std::result::Result<AirlightArg, String> {
    if s == "auto" {
        return Ok(AirlightArg::Auto);
    }
    let parts: Vec<&str> = s.split(',').collect();
    let values: Vec<f64> = parts.iter().map(|p| p.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|e| format!("{e}"))?;
    let rgb: [f64; 3] = match values.as_slice() {
        [v] => [*v; 3],
        [r, g, b] => [*r, *g, *b],
        _ => return Err("expected `auto`, one value or `r,g,b`".into()),
    };
    if rgb.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err("airlight components must lie in [0, 1]".into());
    }
    Ok(AirlightArg::Rgb(rgb))
}

fn parse_non_negative(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
        Ok(v) => Err(format!("must be finite and non-negative, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Clear image (the foggy image with --invert).
    #[arg(long)]
    pub clear: PathBuf,
    /// Gray depth PNG; depth = value · dmax.
    #[arg(long)]
    pub depth: PathBuf,
    #[arg(long, value_parser = parse_non_negative)]
    pub beta: f64,
    /// `r,g,b` in [0, 1], a single gray value, or `auto` to sample one.
    #[arg(long, value_parser = parse_airlight)]
    pub airlight: AirlightArg,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1.0, value_parser = parse_non_negative)]
    pub dmax: f64,
    /// Seed of the generator used by `--airlight auto`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Recover the scene from a foggy input instead of adding fog.
    #[arg(long)]
    pub invert: bool,
}

#[derive(Debug, Args)]
pub struct DeriveArgs {
    /// PNG file or directory of PNGs.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub outdir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Args)]
pub struct DefogArgs {
    /// PNG file or directory of PNGs.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Refine with the attention-fusion generator.
    #[arg(long)]
    pub use_ctr: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub foggy: PathBuf,
    /// References paired with foggy images by file stem.
    #[arg(long = "ref")]
    pub reference: Option<PathBuf>,
    #[arg(long, required_unless_present = "identity", conflicts_with = "identity")]
    pub ckpt: Option<PathBuf>,
    /// Evaluate the foggy images themselves (no-defogging baseline).
    #[arg(long)]
    pub identity: bool,
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub use_ctr: bool,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Mask PNG (byte = probability · 255).
    #[arg(long)]
    pub out: PathBuf,
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(HaanError::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "file not found")))
    }
}

fn require_exists(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(HaanError::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory")))
    }
}

/// Worker count from [`THREADS_ENV`]; `None` means automatic.
pub fn thread_limit() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(0) => Ok(None),
            Ok(n) => Ok(Some(n)),
            Err(_) => Err(HaanError::Config(format!("{THREADS_ENV} must be a non-negative integer, got `{v}`"))),
        },
    }
}

fn inputs_of(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_dir() {
        list_pngs(path)
    } else {
        require_file(path)?;
        Ok(vec![path.to_path_buf()])
    }
}

fn cmd_synth(a: &SynthArgs, out: &mut (dyn Write + Send)) -> Result<()> {
    require_file(&a.clear)?;
    require_file(&a.depth)?;
    let image = read_png(&a.clear)?;
    let depth_img = read_png(&a.depth)?;
    if !image.same_dims(&depth_img) {
        return Err(CoreError::Dimension(format!(
            "depth {}×{} differs from image {}×{}",
            depth_img.height(),
            depth_img.width(),
            image.height(),
            image.width()
        ))
        .into());
    }
    let depth: Vec<f64> = depth_img.gray().iter().map(|v| v * a.dmax).collect();
    let t = transmission_from_depth(&depth, image.height(), image.width(), a.beta)?;
    let airlight = match a.airlight {
        AirlightArg::Rgb(rgb) => AtmosphericLight::new(rgb)?,
        AirlightArg::Auto => {
            let _ = writeln!(out, "seed: {}", a.seed);
            sample_airlight(&mut rng_for(a.seed, 0))
        }
    };
    let [r, g, b] = airlight.rgb();
    let _ = writeln!(out, "airlight: {r},{g},{b}");
    let result = if a.invert { invert_fog(&image, &t, airlight, T_FLOOR)? } else { synthesize_fog(&image, &t, airlight)? };
    write_png(&a.out, &result)
}

/// White-balanced image, or the input unchanged when a channel is empty.
fn white_balanced_or_input(img: &ImageRGB) -> Result<(ImageRGB, bool)> {
    match white_balance(img) {
        Ok(wb) => Ok((wb, false)),
        Err(CoreError::DegenerateInput(_)) => Ok((img.clone(), true)),
        Err(e) => Err(e.into()),
    }
}

fn cmd_derive(a: &DeriveArgs, out: &mut (dyn Write + Send)) -> Result<()> {
    let files = inputs_of(&a.input)?;
    let results: Vec<Result<Option<String>>> = files
        .par_iter()
        .map(|path| {
            let img = read_png(path)?;
            let s = stem(path);
            let (wb, passthrough) = white_balanced_or_input(&img)?;
            write_png(&a.outdir.join(format!("{s}_wb.png")), &wb)?;
            write_png(&a.outdir.join(format!("{s}_ce.png")), &contrast_enhance(&img)?)?;
            write_png(&a.outdir.join(format!("{s}_gc.png")), &gamma_correct(&img)?)?;
            Ok(passthrough.then(|| format!("{}: a channel is empty; white balance left the image unchanged", path.display())))
        })
        .collect();
    for r in results {
        if let Some(note) = r? {
            let _ = writeln!(out, "{note}");
        }
    }
    Ok(())
}

fn cmd_train(a: &ConfigArgs, err: &mut (dyn Write + Send)) -> Result<()> {
    require_file(&a.config)?;
    let cfg = TrainConfig::load(&a.config)?;
    let _ = writeln!(err, "seed: {}", cfg.seed);
    let outcome = train(&cfg, |r| {
        let _ = writeln!(
            err,
            "step {} total {:.6} d_fogfree {:.6} d_foggy {:.6}",
            r.step, r.total, r.d_fogfree, r.d_foggy
        );
    })?;
    let _ = writeln!(err, "wrote {} (sha256 {})", cfg.checkpoint_out.display(), outcome.checkpoint.digest());
    Ok(())
}

fn cmd_train_ssm(a: &ConfigArgs, err: &mut (dyn Write + Send)) -> Result<()> {
    require_file(&a.config)?;
    let cfg = TrainConfig::load(&a.config)?;
    let _ = writeln!(err, "seed: {}", cfg.seed);
    let outcome = train_ssm(&cfg, |r| {
        let _ = writeln!(err, "step {} bce {:.6} enhance {:.6} total {:.6}", r.step, r.bce, r.enhance, r.total);
    })?;
    let _ = writeln!(err, "wrote {} (sha256 {})", cfg.checkpoint_out.display(), outcome.checkpoint.digest());
    Ok(())
}

fn cmd_defog(a: &DefogArgs, err: &mut (dyn Write + Send)) -> Result<()> {
    require_exists(&a.input)?;
    require_file(&a.ckpt)?;
    let model = ModelDefogger::from_checkpoint(&Checkpoint::load(&a.ckpt)?, a.use_ctr)?;
    let files = inputs_of(&a.input)?;
    let single = !a.input.is_dir();
    let results: Vec<(PathBuf, Result<()>)> = files
        .par_iter()
        .map_init(
            || model.clone(),
            |m, path| {
                let mut run = || -> Result<()> {
                    let out = m.defog(&read_png(path)?)?;
                    write_png(&a.out.join(format!("{}.png", stem(path))), &out)
                };
                (path.clone(), run())
            },
        )
        .collect();
    let mut failed = 0;
    for (path, r) in results {
        if let Err(e) = r {
            if single {
                return Err(e);
            }
            failed += 1;
            let _ = writeln!(err, "skipped {}: {e}", path.display());
        }
    }
    if failed > 0 {
        let _ = writeln!(err, "{failed} file(s) skipped");
    }
    Ok(())
}

fn cmd_eval(a: &EvalArgs, out: &mut (dyn Write + Send)) -> Result<()> {
    require_exists(&a.foggy)?;
    if let Some(r) = &a.reference {
        require_exists(r)?;
    }
    let (items, unmatched) = pair_by_stem(&a.foggy, a.reference.as_deref())?;
    for s in &unmatched {
        let _ = writeln!(out, "reference `{s}` has no foggy image with the same stem");
    }
    let (records, checkpoint) = match &a.ckpt {
        Some(path) => {
            require_file(path)?;
            let ck = Checkpoint::load(path)?;
            (evaluate_items(&items, &ModelDefogger::from_checkpoint(&ck, a.use_ctr)?), ck.digest())
        }
        None => (evaluate_items(&items, &IdentityDefogger), "identity".to_string()),
    };
    let metadata = ReportMetadata {
        checkpoint,
        dataset: a.foggy.display().to_string(),
        reference: a.reference.as_ref().map(|r| r.display().to_string()),
        unmatched_references: unmatched,
        ..ReportMetadata::default()
    };
    let report = build_report(metadata, records);
    for r in report.records.iter().filter(|r| r.error.is_some()) {
        let _ = writeln!(out, "{}: {}", r.name, r.error.as_deref().unwrap_or_default());
    }
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    if let Some(dir) = a.report.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HaanError::io(dir, e))?;
    }
    std::fs::write(&a.report, json + "\n").map_err(|e| HaanError::io(&a.report, e))
}

fn cmd_segment_sky(a: &SegmentArgs, out: &mut (dyn Write + Send)) -> Result<()> {
    require_file(&a.input)?;
    require_file(&a.ckpt)?;
    let mut model = Checkpoint::load(&a.ckpt)?.ssm()?;
    let image = read_png(&a.input)?;
    let fitted = fit_multiple(&image, 8)?;
    let x = haan_core::training::signed_batch::<f32>(std::slice::from_ref(&fitted))?;
    let (_, sky) = model.infer(&x)?;
    let (fh, fw) = (fitted.height(), fitted.width());
    // Resample the probability map back to the input size.
    let prob = ImageRGB::new(fh, fw, haan_core::image::Range::Unit, sky.data().iter().flat_map(|&p| [f64::from(p); 3]).collect())?
        .resize(image.height(), image.width())?
        .gray();
    write_gray_png(&a.out, &prob, image.height(), image.width())?;
    let (airlight, source) = haan_core::asm::atmospheric_light_from_sky(&image, &prob)?;
    let [r, g, b] = airlight.rgb();
    let _ = writeln!(out, "airlight: {r:.6},{g:.6},{b:.6}");
    match source {
        AirlightSource::Sky => {
            let _ = writeln!(out, "source: sky mask");
        }
        AirlightSource::DarkChannelFallback => {
            let _ = writeln!(out, "source: dark-channel fallback (sky covers under 1% of the image)");
        }
    }
    Ok(())
}

/// Runs a parsed command, printing results to `out` and progress to `err`.
pub fn run(cli: &Cli, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_limit()? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| HaanError::Config(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Synth(a) => cmd_synth(a, out),
        Command::Derive(a) => cmd_derive(a, out),
        Command::Train(a) => cmd_train(a, err),
        Command::TrainSsm(a) => cmd_train_ssm(a, err),
        Command::Defog(a) => cmd_defog(a, err),
        Command::Eval(a) => cmd_eval(a, out),
        Command::SegmentSky(a) => cmd_segment_sky(a, out),
    })
}

/// Parses `args` and runs, mapping outcomes to the exit-code contract.
pub fn main_with<I, T>(args: I, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if code == 0 { write!(out, "{}", e.render()) } else { write!(err, "{}", e.render()) };
            return ExitCode::from(code);
        }
    };
    match run(&cli, out, err) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            ExitCode::from(if e.is_usage() { 1 } else { 2 })
        }
    }
}

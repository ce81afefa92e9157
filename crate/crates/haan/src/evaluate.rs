//! Defogging inference and the metrics report.

use std::path::{Path, PathBuf};

use haan_core::autodiff::Tape;
use haan_core::image::ImageRGB;
use haan_core::metrics::{edge_gradient_ratio, psnr, ssim};
use haan_core::networks::{AttentionFusion, DefogGenerator, Network};
use haan_core::training::{derived_tensors, signed_batch, unit_images};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::error::Result;
use crate::image_io::{fit_multiple, list_pngs, read_png, stem};

/// Anything that maps a unit-range foggy image to a defogged one.
pub trait Defogger {
    fn defog(&mut self, foggy: &ImageRGB) -> Result<ImageRGB>;
}

/// Returns its input; evaluating it gives the no-defogging baseline.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityDefogger;

impl Defogger for IdentityDefogger {
    fn defog(&mut self, foggy: &ImageRGB) -> Result<ImageRGB> {
        Ok(foggy.clone())
    }
}

/// Defogging generator from a checkpoint, optionally refined by the
/// attention-fusion generator. Inputs are resized to multiples of 4.
#[derive(Clone, Debug)]
pub struct ModelDefogger {
    pub defog: DefogGenerator<f32>,
    pub fusion: Option<AttentionFusion<f32>>,
}

impl ModelDefogger {
    pub fn from_checkpoint(ck: &Checkpoint, use_ctr: bool) -> Result<Self> {
        Ok(Self { defog: ck.defog()?, fusion: if use_ctr { Some(ck.fusion()?) } else { None } })
    }
}

impl Defogger for ModelDefogger {
    fn defog(&mut self, foggy: &ImageRGB) -> Result<ImageRGB> {
        let fitted = fit_multiple(foggy, 4)?;
        let x = signed_batch::<f32>(std::slice::from_ref(&fitted))?;
        let mut out = self.defog.infer(&x)?;
        if let Some(fusion) = &mut self.fusion {
            let [ce, gc, wb] = derived_tensors::<f32>(std::slice::from_ref(&fitted))?;
            let mut tape = Tape::new();
            let bind = fusion.params().bind(&mut tape, false);
            let inputs = [out, ce, gc, wb].map(|t| tape.constant(t));
            let y = fusion.forward(&mut tape, &bind, inputs)?;
            out = tape.value(y).clone();
        }
        Ok(unit_images(&out)?.remove(0))
    }
}

/// Metrics of one evaluated image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub name: String,
    /// `null` when there is no reference, or when the images are identical
    /// (then `psnr_infinite` is set).
    pub psnr_db: Option<f64>,
    pub psnr_infinite: bool,
    pub ssim: Option<f64>,
    pub edge_gradient_ratio: Option<f64>,
    /// The defogged image had no visible edges; the ratio is the 1.0 sentinel.
    pub edge_set_empty: bool,
    /// Set when the image could not be processed; metrics are then `null`.
    pub error: Option<String>,
}

/// Arithmetic means over the records that carry each metric.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub images: usize,
    pub errors: usize,
    pub psnr_db: Option<f64>,
    pub psnr_infinite: bool,
    pub ssim: Option<f64>,
    pub edge_gradient_ratio: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    /// SHA-256 of the checkpoint file, or `identity` for the baseline.
    pub checkpoint: String,
    pub dataset: String,
    pub reference: Option<String>,
    /// RFC 3339 UTC time of the run.
    pub timestamp: String,
    pub edge_metric: String,
    pub unmatched_references: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub metadata: ReportMetadata,
    pub records: Vec<MetricsRecord>,
    pub aggregate: Aggregates,
}

/// Label attached to the edge metric in every report.
pub const EDGE_METRIC_LABEL: &str = "simplified visible-edge gradient ratio (Sobel, threshold 0.1·max)";

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl Aggregates {
    pub fn from_records(records: &[MetricsRecord]) -> Self {
        let ok: Vec<&MetricsRecord> = records.iter().filter(|r| r.error.is_none()).collect();
        let psnr_infinite = ok.iter().any(|r| r.psnr_infinite);
        Self {
            images: ok.len(),
            errors: records.len() - ok.len(),
            psnr_db: if psnr_infinite { None } else { mean(ok.iter().filter_map(|r| r.psnr_db)) },
            psnr_infinite,
            ssim: mean(ok.iter().filter_map(|r| r.ssim)),
            edge_gradient_ratio: mean(ok.iter().filter_map(|r| r.edge_gradient_ratio)),
        }
    }
}

/// Metrics of `defogged` against its foggy source and optional reference.
pub fn measure(name: &str, foggy: &ImageRGB, defogged: &ImageRGB, reference: Option<&ImageRGB>) -> Result<MetricsRecord> {
    let (h, w) = (defogged.height(), defogged.width());
    let foggy = foggy.resize(h, w)?;
    let edge = edge_gradient_ratio(&foggy, defogged)?;
    let mut rec = MetricsRecord {
        name: name.to_string(),
        psnr_db: None,
        psnr_infinite: false,
        ssim: None,
        edge_gradient_ratio: Some(edge.value),
        edge_set_empty: edge.empty,
        error: None,
    };
    if let Some(r) = reference {
        let r = r.resize(h, w)?;
        let p = psnr(defogged, &r)?;
        rec.psnr_infinite = p.is_infinite();
        rec.psnr_db = p.is_finite().then_some(p);
        rec.ssim = Some(ssim(defogged, &r)?);
    }
    Ok(rec)
}

fn error_record(name: &str, e: impl ToString) -> MetricsRecord {
    MetricsRecord {
        name: name.to_string(),
        psnr_db: None,
        psnr_infinite: false,
        ssim: None,
        edge_gradient_ratio: None,
        edge_set_empty: false,
        error: Some(e.to_string()),
    }
}

/// One evaluation item: a foggy image and its optional reference.
#[derive(Clone, Debug)]
pub struct EvalItem {
    pub name: String,
    pub foggy: PathBuf,
    pub reference: Option<PathBuf>,
}

/// Pairs `foggy_dir` PNGs with `ref_dir` PNGs of the same stem. Returns the
/// items (sorted by name) and the reference stems left unmatched.
pub fn pair_by_stem(foggy_dir: &Path, ref_dir: Option<&Path>) -> Result<(Vec<EvalItem>, Vec<String>)> {
    let refs = match ref_dir {
        Some(d) => list_pngs(d)?,
        None => Vec::new(),
    };
    let foggy = list_pngs(foggy_dir)?;
    let items: Vec<EvalItem> = foggy
        .iter()
        .map(|p| {
            let name = stem(p);
            let reference = refs.iter().find(|r| stem(r) == name).cloned();
            EvalItem { name, foggy: p.clone(), reference }
        })
        .collect();
    let unmatched = refs.iter().map(|r| stem(r)).filter(|s| items.iter().all(|i| i.name != *s)).collect();
    Ok((items, unmatched))
}

/// Evaluates every item in parallel (one defogger clone per worker);
/// per-image failures become error records. Output order follows `items`.
pub fn evaluate_items<D: Defogger + Clone + Send + Sync>(items: &[EvalItem], defogger: &D) -> Vec<MetricsRecord> {
    items
        .par_iter()
        .map_init(
            || defogger.clone(),
            |d, item| {
                let mut run = || -> Result<MetricsRecord> {
                    let foggy = read_png(&item.foggy)?;
                    let out = d.defog(&foggy)?;
                    let reference = item.reference.as_deref().map(read_png).transpose()?;
                    measure(&item.name, &foggy, &out, reference.as_ref())
                };
                run().unwrap_or_else(|e| error_record(&item.name, e))
            },
        )
        .collect()
}

/// Builds a report from records, filling aggregates and the timestamp.
pub fn build_report(mut metadata: ReportMetadata, records: Vec<MetricsRecord>) -> MetricsReport {
    metadata.timestamp = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    metadata.edge_metric = EDGE_METRIC_LABEL.to_string();
    let aggregate = Aggregates::from_records(&records);
    MetricsReport { metadata, records, aggregate }
}

//! End-to-end defurnishing: mask, context transform, backend calls,
//! band-scale blend, pole restore.

mod config;
mod eval;

pub use config::{BlendMode, InpaintSettings, PipelineConfig};
pub use eval::{run_eval_suite, EvalFailure, EvalMethod, EvalReport, EvalRow};

use std::ops::Range;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backend::{Backend, InpaintRequest, SuperresParams, SuperresRequest};
use crate::blend::{naive_blend, shadow_aware_blend, BlendConfig, WeightMap};
use crate::context::{
    forward_context, unwarp_rolled_window, unwarp_to_band, ContextTransform, WorkingSet,
};
use crate::error::{Error, Result};
use crate::image::{BinaryMask, EquirectPanorama, FloatImage, Image, LabelMap, Sample, ScalarField};
use crate::maskops::{dilate, mask_from_labels, FurnitureClassSet};
use crate::pano::{crop_poles, restore_band};

/// What marks the furniture: a semantic label map or a ready mask.
#[derive(Debug, Clone, Copy)]
pub enum MaskSource<'a> {
    Labels(&'a LabelMap),
    Mask(&'a BinaryMask),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub ms: f64,
}

/// Stages that run on the backend; everything else is local work.
pub const BACKEND_STAGES: [&str; 2] = ["inpaint", "superres"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub stages: Vec<StageTiming>,
    pub transform: ContextTransform,
    pub mask_coverage_pct: f64,
    pub clipped_mask_pixels: usize,
    pub backend_name: String,
    pub request_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
}

impl RunReport {
    pub fn total_ms(&self) -> f64 {
        self.stages.iter().map(|s| s.ms).sum()
    }

    /// Time spent outside backend calls.
    pub fn local_ms(&self) -> f64 {
        self.stages
            .iter()
            .filter(|s| !BACKEND_STAGES.contains(&s.stage.as_str()))
            .map(|s| s.ms)
            .sum()
    }

    pub fn stage_ms(&self, stage: &str) -> Option<f64> {
        self.stages.iter().find(|s| s.stage == stage).map(|s| s.ms)
    }
}

#[derive(Debug, Clone)]
pub struct Defurnished {
    pub image: EquirectPanorama,
    pub report: RunReport,
    /// Band-scale blend weights in input coordinates.
    pub weights: WeightMap,
    /// Band-scale mask actually used for blending.
    pub band_mask: BinaryMask,
}

struct Timer {
    stages: Vec<StageTiming>,
}

impl Timer {
    fn run<T>(&mut self, stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f().map_err(|e| e.in_stage(stage))?;
        self.stages.push(StageTiming {
            stage: stage.into(),
            ms: start.elapsed().as_secs_f64() * 1e3,
        });
        Ok(out)
    }
}

/// Content-derived request id, so identical runs send identical requests.
pub fn derive_request_id(image: &EquirectPanorama, seed: u64) -> String {
    let mut h = Sha256::new();
    h.update((image.width() as u64).to_le_bytes());
    h.update((image.height() as u64).to_le_bytes());
    h.update(seed.to_le_bytes());
    h.update(image.as_slice());
    let d = h.finalize();
    let mut id = String::from("req-");
    for b in &d[..8] {
        id.push_str(&format!("{b:02x}"));
    }
    id
}

/// Builds the inpainting mask (labels or explicit, plus baseline dilation).
pub fn build_mask(
    pano: &EquirectPanorama,
    source: MaskSource<'_>,
    config: &PipelineConfig,
) -> Result<BinaryMask> {
    let mask = match source {
        MaskSource::Mask(m) => m.clone(),
        MaskSource::Labels(labels) => {
            let classes = match &config.class_set {
                Some(path) => FurnitureClassSet::load(path)?,
                None => FurnitureClassSet::default(),
            };
            mask_from_labels(labels, &classes)?
        }
    };
    pano.ensure_same_dims(&mask, "panorama and mask")?;
    Ok(if config.baseline_mask_dilation > 0 {
        dilate(&mask, config.baseline_mask_dilation)
    } else {
        mask
    })
}

/// Mask construction plus the forward context transform.
pub fn prepare(
    pano: &EquirectPanorama,
    source: MaskSource<'_>,
    config: &PipelineConfig,
) -> Result<WorkingSet> {
    let mut timer = Timer { stages: Vec::new() };
    let mask = timer.run("mask", || build_mask(pano, source, config))?;
    timer.run("context", || forward_context(pano, &mask, &config.context))
}

/// Band-scale post-processing of a superresolved working image.
pub fn finish(
    pano: &EquirectPanorama,
    working: &WorkingSet,
    superresolved: &EquirectPanorama,
    config: &PipelineConfig,
) -> Result<(EquirectPanorama, WeightMap)> {
    let mut timer = Timer { stages: Vec::new() };
    finish_timed(pano, working, superresolved, config, &mut timer)
}

fn finish_timed(
    pano: &EquirectPanorama,
    working: &WorkingSet,
    superresolved: &EquirectPanorama,
    config: &PipelineConfig,
    timer: &mut Timer,
) -> Result<(EquirectPanorama, WeightMap)> {
    let t = &working.transform;
    let (blended, weights) = match blend_region(t, &working.band_mask, &config.blend) {
        Some(region) => finish_region(pano, working, superresolved, config, timer, &region)?,
        None => finish_full(pano, working, superresolved, config, timer)?,
    };
    let image = timer.run("restore", || {
        restore_band(&blended, pano, t.crop_top, t.crop_bottom)
    })?;
    Ok((image, weights))
}

fn blend_band<A: Sample, B: Sample>(
    band: &Image<A>,
    generated: &Image<B>,
    mask: &BinaryMask,
    config: &PipelineConfig,
) -> Result<(EquirectPanorama, WeightMap)> {
    match config.blend_mode {
        BlendMode::Custom => {
            let out = shadow_aware_blend(band, generated, mask, &config.blend)?;
            Ok((out.image, out.weights))
        }
        BlendMode::Naive => Ok((
            naive_blend(band, generated, mask)?,
            WeightMap::from_mask(mask),
        )),
    }
}

fn finish_full(
    pano: &EquirectPanorama,
    working: &WorkingSet,
    superresolved: &EquirectPanorama,
    config: &PipelineConfig,
    timer: &mut Timer,
) -> Result<(EquirectPanorama, WeightMap)> {
    let generated = timer.run("unwarp", || {
        unwarp_to_band(superresolved, &working.transform, config.unwarp_filter)
    })?;
    timer.run("blend", || {
        let band = crop_poles(pano)?.band;
        blend_band(&band, &generated, &working.band_mask, config)
    })
}

/// Rolled-frame window outside which the blend returns the original.
#[derive(Debug, Clone, PartialEq)]
struct Region {
    cols: Range<usize>,
    rows: Range<usize>,
}

/// A window with enough margin that no blend filter sees past its edges
/// anything but zero weights. `None` when the window would wrap the
/// rolled seam or cover most of the band.
fn blend_region(t: &ContextTransform, band_mask: &BinaryMask, cfg: &BlendConfig) -> Option<Region> {
    let (w, h) = band_mask.dims();
    let (mut cmin, mut cmax, mut ymin, mut ymax) = (usize::MAX, 0, usize::MAX, 0);
    for y in 0..h {
        for (x, &m) in band_mask.row(y).iter().enumerate() {
            if m {
                let r = (x + t.roll_offset) % w;
                cmin = cmin.min(r);
                cmax = cmax.max(r);
                ymin = ymin.min(y);
                ymax = ymax.max(y);
            }
        }
    }
    if cmin > cmax {
        return None;
    }
    let margin = cfg.r_far.ceil() as usize + cfg.feather_support() + cfg.diff_smoothing + 2;
    let a = cmin.checked_sub(margin)?;
    let b = cmax + margin + 1;
    if b > w || 2 * (b - a) > w {
        return None;
    }
    Some(Region {
        cols: a..b,
        rows: ymin.saturating_sub(margin)..(ymax + margin + 1).min(h),
    })
}

fn finish_region(
    pano: &EquirectPanorama,
    working: &WorkingSet,
    superresolved: &EquirectPanorama,
    config: &PipelineConfig,
    timer: &mut Timer,
    region: &Region,
) -> Result<(EquirectPanorama, WeightMap)> {
    let t = &working.transform;
    let generated: FloatImage = timer.run("unwarp", || {
        unwarp_rolled_window(
            superresolved,
            t,
            config.unwarp_filter,
            region.cols.clone(),
            region.rows.clone(),
        )
    })?;
    timer.run("blend", || {
        let mut band = crop_poles(pano)?.band;
        let w = band.width();
        let (x0, y0) = (region.cols.start, region.rows.start);
        let (rw, rh) = (region.cols.len(), region.rows.len());
        let unroll = |j: usize| (x0 + j + w - t.roll_offset) % w;
        let ch = band.channels();
        let orig = Image::from_fn(rw, rh, ch, |j, i, c| band.get(unroll(j), y0 + i, c));
        let mask = Image::from_fn(rw, rh, 1, |j, i, _| {
            working.band_mask.get(unroll(j), y0 + i, 0)
        });
        let (image, weights) = blend_band(&orig, &generated, &mask, config)?;
        let mut field = ScalarField::filled(w, band.height(), 1, 0.0);
        for i in 0..rh {
            for j in 0..rw {
                let x = unroll(j);
                band.pixel_mut(x, y0 + i).copy_from_slice(image.pixel(j, i));
                field.set(x, y0 + i, 0, weights.field().get(j, i, 0));
            }
        }
        Ok((band, WeightMap::new(field)?))
    })
}

/// Removes the masked furniture from `pano` using `backend`.
pub fn defurnish(
    pano: &EquirectPanorama,
    source: MaskSource<'_>,
    config: &PipelineConfig,
    backend: &dyn Backend,
) -> Result<Defurnished> {
    config.validate().map_err(|e| e.in_stage("config"))?;
    if pano.channels() != 3 {
        return Err(Error::dim("panorama must be RGB").in_stage("input"));
    }
    let mut timer = Timer { stages: Vec::new() };
    let mask = timer.run("mask", || build_mask(pano, source, config))?;
    let working = timer.run("context", || forward_context(pano, &mask, &config.context))?;
    let request_id = config
        .inpaint
        .request_id
        .clone()
        .unwrap_or_else(|| derive_request_id(pano, config.inpaint.seed));

    let inpainted = timer.run("inpaint", || {
        let req = InpaintRequest::new(
            &working.image,
            &working.mask,
            config.inpaint.params(request_id.clone()),
        )?;
        let resp = backend.inpaint(&req)?;
        resp.decode()
    })?;
    let superresolved = timer.run("superres", || {
        let req = SuperresRequest::new(
            &inpainted,
            SuperresParams {
                scale: config.superres_scale,
                request_id: request_id.clone(),
            },
        )?;
        backend.superresolve(&req)?.decode()
    })?;
    let (image, weights) = finish_timed(pano, &working, &superresolved, config, &mut timer)?;

    let band = &working.band_mask;
    let report = RunReport {
        stages: timer.stages,
        transform: working.transform.clone(),
        mask_coverage_pct: 100.0 * mask.coverage(),
        clipped_mask_pixels: working.clipped_mask_pixels,
        backend_name: backend.name().to_string(),
        request_id,
        output_path: None,
    };
    Ok(Defurnished {
        image,
        report,
        weights,
        band_mask: band.clone(),
    })
}

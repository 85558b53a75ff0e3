//! Context maximization before inpainting and its inverse.
//!
//! The forward chain is crop-poles, roll (masked content to the center),
//! wrap-pad, then resample to the working height. Padding is applied at
//! band scale, before resampling. Pad sizes are chosen so that the padded
//! band maps onto a working width that is a multiple of `width_multiple`.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{BinaryMask, EquirectPanorama, FloatImage, Image, Sample};
use crate::pano::{crop_poles, optimal_roll_offset, restore_band, roll, unpad, wrap_pad};
use crate::resample::{
    resize, resize_float, resize_float_window, resize_nearest, EdgeMode, ResampleFilter,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContextConfig {
    /// Height of the image sent to the inpainter. `None` disables resampling.
    pub working_height: Option<usize>,
    /// Requested wrap padding per side, in working-scale pixels.
    pub pad: usize,
    /// Working width is rounded to a multiple of this (latent grid).
    pub width_multiple: usize,
    /// When false the panorama is not rolled (ablation).
    pub roll: bool,
    pub filter: ResampleFilter,
}

impl Default for ContextConfig {
    fn default() -> Self {
        Self {
            working_height: Some(512),
            pad: 256,
            width_multiple: 64,
            roll: true,
            filter: ResampleFilter::Lanczos3,
        }
    }
}

/// Invertible record of the forward context transform.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextTransform {
    pub crop_top: usize,
    pub crop_bottom: usize,
    /// Rightward cyclic shift applied to the band.
    pub roll_offset: usize,
    /// Wrap padding in band-scale pixels.
    pub pad_left: usize,
    pub pad_right: usize,
    pub source_size: (usize, usize),
    pub working_size: (usize, usize),
}

impl ContextTransform {
    pub fn band_size(&self) -> (usize, usize) {
        (
            self.source_size.0,
            self.source_size.1 - self.crop_top - self.crop_bottom,
        )
    }

    pub fn padded_size(&self) -> (usize, usize) {
        let (w, h) = self.band_size();
        (w + self.pad_left + self.pad_right, h)
    }

    /// Working-scale divided by band-scale.
    pub fn scale(&self) -> f64 {
        self.working_size.1 as f64 / self.band_size().1 as f64
    }

    /// Pads expressed in working-scale pixels (rounded).
    pub fn working_pads(&self) -> (usize, usize) {
        let s = self.scale();
        (
            (self.pad_left as f64 * s).round() as usize,
            (self.pad_right as f64 * s).round() as usize,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let (sw, sh) = self.source_size;
        if sw == 0 || sh == 0 || self.crop_top + self.crop_bottom >= sh {
            return Err(Error::Transform(format!(
                "crops {}+{} leave no band in height {sh}",
                self.crop_top, self.crop_bottom
            )));
        }
        if self.roll_offset >= sw {
            return Err(Error::Transform(format!(
                "roll offset {} not below width {sw}",
                self.roll_offset
            )));
        }
        if self.pad_left >= sw || self.pad_right >= sw {
            return Err(Error::Transform(format!(
                "pads ({}, {}) not below band width {sw}",
                self.pad_left, self.pad_right
            )));
        }
        if self.working_size.0 == 0 || self.working_size.1 == 0 {
            return Err(Error::Transform("empty working size".into()));
        }
        Ok(())
    }

    /// Checks that `processed` is the working image at some uniform scale.
    fn check_processed(&self, processed: (usize, usize)) -> Result<()> {
        let (ww, wh) = self.working_size;
        let (pw, ph) = processed;
        let (padded_w, _) = self.padded_size();
        if pw * padded_w <= (self.pad_left + self.pad_right) * ww {
            return Err(Error::Transform(format!(
                "processed width {pw} cannot hold pads ({}, {})",
                self.pad_left, self.pad_right
            )));
        }
        let expected_w = ww as f64 * ph as f64 / wh as f64;
        if (pw as f64 - expected_w).abs() > (ph as f64 / wh as f64).max(1.0) {
            return Err(Error::Transform(format!(
                "processed size {pw}x{ph} is not a uniform scaling of working size {ww}x{wh}"
            )));
        }
        Ok(())
    }
}

/// Working-scale inputs for the inpainter.
#[derive(Debug, Clone)]
pub struct WorkingSet {
    pub image: EquirectPanorama,
    pub mask: BinaryMask,
    pub transform: ContextTransform,
    /// Band-scale mask, before rolling (same coordinates as the input).
    pub band_mask: BinaryMask,
    /// Mask pixels lost because they lie in the cropped pole rows.
    pub clipped_mask_pixels: usize,
}

fn round_to_multiple(v: f64, m: usize) -> usize {
    let m = m.max(1);
    (((v / m as f64).round() as usize).max(1)) * m
}

/// Picks band-scale pads and the working size for a band.
fn plan_padding(
    band: (usize, usize),
    cfg: &ContextConfig,
) -> Result<(usize, usize, (usize, usize))> {
    let (bw, bh) = band;
    let target_h = cfg.working_height.unwrap_or(bh);
    if target_h == 0 {
        return Err(Error::param("working height must be at least 1"));
    }
    let scale = target_h as f64 / bh as f64;
    let m = cfg.width_multiple.max(1);
    let mut working_w = round_to_multiple(bw as f64 * scale + 2.0 * cfg.pad as f64, m);
    let mut padded_w = (working_w as f64 / scale).round() as usize;
    while padded_w < bw {
        working_w += m;
        padded_w = (working_w as f64 / scale).round() as usize;
    }
    let total = padded_w - bw;
    let pad_left = total / 2;
    let pad_right = total - pad_left;
    if pad_left >= bw || pad_right >= bw {
        return Err(Error::param(format!(
            "padding ({pad_left}, {pad_right}) for width multiple {m} exceeds band width {bw}"
        )));
    }
    if cfg.working_height.is_none() && padded_w != working_w {
        return Err(Error::param(format!(
            "without resampling the padded width {padded_w} must equal the working width {working_w}"
        )));
    }
    Ok((pad_left, pad_right, (working_w, target_h)))
}

/// Crop, roll, pad and downsample a panorama and its mask.
pub fn forward_context(
    pano: &EquirectPanorama,
    mask: &BinaryMask,
    cfg: &ContextConfig,
) -> Result<WorkingSet> {
    pano.ensure_same_dims(mask, "panorama and mask")?;
    let crop = crop_poles(pano)?;
    let mask_crop = crop_poles(mask)?;
    let clipped = mask.count_true() - mask_crop.band.count_true();
    if clipped > 0 {
        log::warn!(
            "{clipped} mask pixels ({:.3}% of the mask) fall in the cropped pole rows and are ignored",
            100.0 * clipped as f64 / mask.count_true() as f64
        );
    }

    let band_mask = mask_crop.band;
    let roll_offset = if cfg.roll {
        if spans_full_width(&band_mask) {
            log::warn!("mask touches every column; keeping roll offset 0 (the seam stays masked)");
            0
        } else {
            optimal_roll_offset(&band_mask)
        }
    } else {
        0
    };
    let (pad_left, pad_right, working_size) = plan_padding(crop.band.dims(), cfg)?;

    let image = wrap_pad(&roll(&crop.band, roll_offset as isize), pad_left, pad_right)?;
    let rolled_mask = wrap_pad(&roll(&band_mask, roll_offset as isize), pad_left, pad_right)?;
    let (ww, wh) = working_size;
    let image = resize(&image, ww, wh, cfg.filter, EdgeMode::Clamp)?;
    let working_mask = resize_nearest(&rolled_mask, ww, wh)?;

    let transform = ContextTransform {
        crop_top: crop.crop_top,
        crop_bottom: crop.crop_bottom,
        roll_offset,
        pad_left,
        pad_right,
        source_size: pano.dims(),
        working_size,
    };
    Ok(WorkingSet {
        image,
        mask: working_mask,
        transform,
        band_mask,
        clipped_mask_pixels: clipped,
    })
}

fn spans_full_width(mask: &BinaryMask) -> bool {
    crate::pano::column_histogram(mask).iter().all(|&n| n > 0)
}

/// Maps a processed working image (at any uniform scale) back to band
/// coordinates: resample to the padded band, unpad, unroll.
pub fn unwarp_to_band<S: Sample>(
    processed: &Image<S>,
    t: &ContextTransform,
    filter: ResampleFilter,
) -> Result<FloatImage> {
    t.validate()?;
    t.check_processed(processed.dims())?;
    let (pw, ph) = t.padded_size();
    let padded = resize_float(processed, pw, ph, filter, EdgeMode::Clamp)?;
    let band = unpad(&padded, t.pad_left, t.pad_right)?;
    Ok(roll(&band, -(t.roll_offset as isize)))
}

/// A window of the unpadded band in the rolled frame: output pixel
/// `(j, i)` is rolled column `cols.start + j`, band row `rows.start + i`.
/// Matches [`unwarp_to_band`] bit for bit (before unrolling).
pub fn unwarp_rolled_window<S: Sample>(
    processed: &Image<S>,
    t: &ContextTransform,
    filter: ResampleFilter,
    cols: Range<usize>,
    rows: Range<usize>,
) -> Result<FloatImage> {
    t.validate()?;
    t.check_processed(processed.dims())?;
    let (bw, _) = t.band_size();
    if cols.end > bw {
        return Err(Error::Transform(format!("window {cols:?} outside band width {bw}")));
    }
    let (pw, ph) = t.padded_size();
    let padded_cols = cols.start + t.pad_left..cols.end + t.pad_left;
    resize_float_window(processed, pw, ph, padded_cols, rows, filter, EdgeMode::Clamp)
}

/// Full inverse of [`forward_context`]: unwarp to the band and put the
/// original poles back.
pub fn inverse_context(
    processed: &EquirectPanorama,
    t: &ContextTransform,
    original: &EquirectPanorama,
    filter: ResampleFilter,
) -> Result<EquirectPanorama> {
    if original.dims() != t.source_size {
        return Err(Error::Transform(format!(
            "original {}x{} does not match recorded source {:?}",
            original.width(),
            original.height(),
            t.source_size
        )));
    }
    let band = if filter == ResampleFilter::Nearest {
        t.validate()?;
        t.check_processed(processed.dims())?;
        let (pw, ph) = t.padded_size();
        let padded = resize_nearest(processed, pw, ph)?;
        roll(&unpad(&padded, t.pad_left, t.pad_right)?, -(t.roll_offset as isize))
    } else {
        unwarp_to_band(processed, t, filter)?.to_u8()
    };
    restore_band(&band, original, t.crop_top, t.crop_bottom)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noisy_pano(w: usize, seed: u64) -> EquirectPanorama {
        Image::from_fn(w, w / 2, 3, |x, y, c| {
            let v = (x as u64 * 2654435761) ^ (y as u64 * 40503) ^ (c as u64 * 977) ^ seed;
            (v % 256) as u8
        })
    }

    fn block_mask(w: usize, h: usize, x0: usize, x1: usize, y0: usize, y1: usize) -> BinaryMask {
        Image::from_fn(w, h, 1, |x, y, _| x >= x0 && x < x1 && y >= y0 && y < y1)
    }

    #[test]
    fn full_resolution_default_geometry() {
        let t = plan_padding((8192, 2730), &ContextConfig::default()).unwrap();
        let (pl, pr, working) = t;
        assert_eq!(working, (2048, 512));
        let tr = ContextTransform {
            crop_top: 683,
            crop_bottom: 683,
            roll_offset: 0,
            pad_left: pl,
            pad_right: pr,
            source_size: (8192, 4096),
            working_size: working,
        };
        assert_eq!(tr.working_pads(), (256, 256));
        // Aspect ratio of the padded band is kept within a pixel.
        let (pw, ph) = tr.padded_size();
        assert!((pw as f64 * 512.0 / ph as f64 - 2048.0).abs() <= 1.0);
    }

    #[test]
    fn forward_working_width_is_aligned() {
        let pano = noisy_pano(1024, 1);
        let mask = block_mask(1024, 512, 10, 60, 300, 340);
        let cfg = ContextConfig {
            working_height: Some(128),
            pad: 64,
            ..ContextConfig::default()
        };
        let ws = forward_context(&pano, &mask, &cfg).unwrap();
        assert_eq!(ws.image.width() % 64, 0);
        assert_eq!(ws.image.height(), 128);
        assert_eq!(ws.mask.dims(), ws.image.dims());
        assert!(ws.transform.roll_offset > 0);
    }

    #[test]
    fn empty_mask_keeps_zero_roll() {
        let pano = noisy_pano(256, 2);
        let mask = Image::filled(256, 128, 1, false);
        let cfg = ContextConfig {
            working_height: Some(64),
            pad: 16,
            ..ContextConfig::default()
        };
        let ws = forward_context(&pano, &mask, &cfg).unwrap();
        assert_eq!(ws.transform.roll_offset, 0);
    }

    #[test]
    fn exact_round_trip_without_resampling() {
        let pano = noisy_pano(240, 3);
        let mask = block_mask(240, 120, 200, 239, 50, 70);
        let cfg = ContextConfig {
            working_height: None,
            pad: 30,
            width_multiple: 1,
            ..ContextConfig::default()
        };
        let ws = forward_context(&pano, &mask, &cfg).unwrap();
        assert_eq!(ws.transform.working_pads(), (30, 30));
        let back = inverse_context(&ws.image, &ws.transform, &pano, ResampleFilter::Nearest).unwrap();
        assert_eq!(back, pano);
        let back = inverse_context(&ws.image, &ws.transform, &pano, ResampleFilter::Lanczos3).unwrap();
        assert_eq!(back, pano);
    }

    #[test]
    fn upscaled_processed_image_is_accepted() {
        let pano = noisy_pano(512, 4);
        let mask = block_mask(512, 256, 0, 40, 150, 170);
        let cfg = ContextConfig {
            working_height: Some(64),
            pad: 32,
            ..ContextConfig::default()
        };
        let ws = forward_context(&pano, &mask, &cfg).unwrap();
        let (ww, wh) = ws.transform.working_size;
        let big = Image::filled(ww * 4, wh * 4, 3, 9u8);
        let out = inverse_context(&big, &ws.transform, &pano, ResampleFilter::Lanczos3).unwrap();
        assert_eq!(out.dims(), pano.dims());
        let t = &ws.transform;
        assert_eq!(out.get(5, t.crop_top + 3, 0), 9);
        assert_eq!(out.row(0), pano.row(0));
    }

    #[test]
    fn oversized_pads_are_rejected() {
        let pano = noisy_pano(240, 5);
        let mask = Image::filled(240, 120, 1, false);
        let cfg = ContextConfig {
            working_height: None,
            pad: 10,
            width_multiple: 1,
            ..ContextConfig::default()
        };
        let ws = forward_context(&pano, &mask, &cfg).unwrap();
        let mut t = ws.transform.clone();
        t.pad_left = 500;
        assert!(matches!(
            inverse_context(&ws.image, &t, &pano, ResampleFilter::Lanczos3),
            Err(Error::Transform(_))
        ));
        let narrow = Image::filled(15, ws.image.height(), 3, 0u8);
        assert!(inverse_context(&narrow, &ws.transform, &pano, ResampleFilter::Lanczos3).is_err());
    }

    #[test]
    fn alignment_padding_cannot_exceed_band() {
        let cfg = ContextConfig {
            working_height: None,
            pad: 10,
            width_multiple: 64,
            ..ContextConfig::default()
        };
        assert!(plan_padding((20, 7), &cfg).is_err());
    }
}

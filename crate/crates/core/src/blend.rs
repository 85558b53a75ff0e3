//! Shadow-aware blending of the original and the generated panorama.
//!
//! The generated image is used inside the mask, and also outside it where
//! it differs significantly from the original (removed shadows, reflections)
//! as long as that happens close to the mask. Significant changes far from
//! the mask are treated as hallucinations and rejected:
//!
//! * `dist <= r_near`: significant pixels take the generated value;
//! * `r_near < dist <= r_far`: their weight ramps linearly down to 0;
//! * `dist > r_far`: original pixels only.
//!
//! The raw weights are then feathered with a Gaussian. Feathering only
//! spreads weight outward: mask pixels keep weight 1, and everything farther
//! than `r_far` plus the feather support keeps weight 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{box_sum_u32, convolve_separable, gaussian_kernel, gaussian_support};
use crate::image::{BinaryMask, EquirectPanorama, Image, Sample, ScalarField};
use crate::maskops::distance_from_mask;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlendConfig {
    /// Threshold on the smoothed max-channel difference (unit interval).
    pub tau: f32,
    /// Significant changes within this distance of the mask are kept.
    pub r_near: f32,
    /// Beyond this distance generated pixels are always rejected.
    pub r_far: f32,
    pub feather_sigma: f32,
    /// Half-width of the box filter applied to the difference map.
    pub diff_smoothing: usize,
}

impl Default for BlendConfig {
    fn default() -> Self {
        Self {
            tau: 0.05,
            r_near: 64.0,
            r_far: 192.0,
            feather_sigma: 8.0,
            diff_smoothing: 4,
        }
    }
}

impl BlendConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::param(format!("blend tau {} outside (0, 1]", self.tau)));
        }
        if !(self.r_near >= 0.0 && self.r_near <= self.r_far) {
            return Err(Error::param(format!(
                "need 0 <= r_near ({}) <= r_far ({})",
                self.r_near, self.r_far
            )));
        }
        if !(self.feather_sigma >= 0.0) {
            return Err(Error::param("feather_sigma must be non-negative"));
        }
        Ok(())
    }

    /// Half-width of the feathering window.
    pub fn feather_support(&self) -> usize {
        gaussian_support(self.feather_sigma)
    }

    /// Distance beyond which the blend is guaranteed to copy the original.
    pub fn reject_distance(&self) -> f32 {
        self.r_far + self.feather_support() as f32
    }
}

/// Per-pixel blend weights in `[0, 1]`; 1 selects the generated image.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMap(ScalarField);

impl WeightMap {
    pub fn new(field: ScalarField) -> Result<Self> {
        if field.channels() != 1 {
            return Err(Error::dim("weight map must have one channel"));
        }
        if let Some(v) = field.as_slice().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::param(format!("weight {v} outside [0, 1]")));
        }
        Ok(Self(field))
    }

    pub fn from_mask(mask: &BinaryMask) -> Self {
        Self(mask.map(|b| if b { 1.0 } else { 0.0 }))
    }

    pub fn field(&self) -> &ScalarField {
        &self.0
    }

    pub fn into_field(self) -> ScalarField {
        self.0
    }
}

/// Thresholded, box-smoothed max-channel absolute difference as 0/1.
///
/// The difference is quantized to 16 bits before smoothing so the window
/// sums are exact integers.
pub fn significance_map<A: Sample, B: Sample>(
    original: &Image<A>,
    generated: &Image<B>,
    cfg: &BlendConfig,
) -> Result<ScalarField> {
    cfg.validate()?;
    original.ensure_same_shape(generated, "significance map")?;
    let (w, h) = original.dims();
    let ch = original.channels();
    let quant: Vec<u32> = original
        .as_slice()
        .chunks_exact(ch)
        .zip(generated.as_slice().chunks_exact(ch))
        .map(|(o, g)| {
            let d = o
                .iter()
                .zip(g)
                .map(|(&a, &b)| (a.to_unit() - b.to_unit()).abs())
                .fold(0.0f32, f32::max);
            (d.min(1.0) * 65535.0).round() as u32
        })
        .collect();
    let r = cfg.diff_smoothing;
    let sums = box_sum_u32(&quant, w, h, r);
    let n = ((2 * r + 1) * (2 * r + 1)) as f64;
    let threshold = cfg.tau as f64 * 65535.0 * n;
    let data = sums
        .into_iter()
        .map(|s| if s as f64 > threshold { 1.0 } else { 0.0 })
        .collect();
    Image::from_vec(w, h, 1, data)
}

/// Unfeathered weights (see module docs).
pub fn raw_weights(
    mask: &BinaryMask,
    significance: &ScalarField,
    dist: &ScalarField,
    cfg: &BlendConfig,
) -> Result<ScalarField> {
    cfg.validate()?;
    mask.ensure_same_dims(significance, "mask and significance")?;
    mask.ensure_same_dims(dist, "mask and distance field")?;
    let ramp = cfg.r_far - cfg.r_near;
    let data = mask
        .as_slice()
        .iter()
        .zip(significance.as_slice())
        .zip(dist.as_slice())
        .map(|((&m, &s), &d)| {
            if m {
                1.0
            } else if s <= 0.0 || d > cfg.r_far {
                0.0
            } else if d <= cfg.r_near {
                s.min(1.0)
            } else {
                s.min(1.0) * ((cfg.r_far - d) / ramp).clamp(0.0, 1.0)
            }
        })
        .collect();
    Image::from_vec(mask.width(), mask.height(), 1, data)
}

/// Feathered, clamped blend weights.
pub fn blend_weights(
    mask: &BinaryMask,
    significance: &ScalarField,
    dist: &ScalarField,
    cfg: &BlendConfig,
) -> Result<WeightMap> {
    let raw = raw_weights(mask, significance, dist, cfg)?;
    let feathered = if cfg.feather_sigma > 0.0 {
        convolve_separable(&raw, &gaussian_kernel(cfg.feather_sigma))
    } else {
        raw.clone()
    };
    let reject = cfg.reject_distance();
    let data = feathered
        .as_slice()
        .iter()
        .zip(mask.as_slice())
        .zip(dist.as_slice())
        .map(|((&f, &m), &d)| {
            if m {
                1.0
            } else if d > reject {
                0.0
            } else {
                f.clamp(0.0, 1.0)
            }
        })
        .collect();
    WeightMap::new(Image::from_vec(mask.width(), mask.height(), 1, data)?)
}

/// Per-pixel convex combination `original * (1 - w) + generated * w`,
/// quantized once to 8 bits (round half away from zero).
pub fn blend<A: Sample, B: Sample>(
    original: &Image<A>,
    generated: &Image<B>,
    weights: &WeightMap,
) -> Result<EquirectPanorama> {
    original.ensure_same_shape(generated, "blend inputs")?;
    original.ensure_same_dims(weights.field(), "blend weights")?;
    let ch = original.channels();
    let mut out = Vec::with_capacity(original.as_slice().len());
    for ((o, g), &w) in original
        .as_slice()
        .chunks_exact(ch)
        .zip(generated.as_slice().chunks_exact(ch))
        .zip(weights.field().as_slice())
    {
        for (&a, &b) in o.iter().zip(g) {
            let (a, b) = (a.to_unit(), b.to_unit());
            let v = if w == 0.0 {
                a
            } else if w == 1.0 {
                b
            } else {
                (a * (1.0 - w) + b * w).clamp(a.min(b), a.max(b))
            };
            out.push(u8::from_unit(v));
        }
    }
    Image::from_vec(original.width(), original.height(), ch, out)
}

/// Ablation baseline: hard replacement inside the mask.
pub fn naive_blend<A: Sample, B: Sample>(
    original: &Image<A>,
    generated: &Image<B>,
    mask: &BinaryMask,
) -> Result<EquirectPanorama> {
    blend(original, generated, &WeightMap::from_mask(mask))
}

/// Intermediate products of [`shadow_aware_blend`].
#[derive(Debug, Clone)]
pub struct BlendOutput {
    pub image: EquirectPanorama,
    pub weights: WeightMap,
    pub significance: ScalarField,
}

/// Significance, distance gating, feathering and blending in one call.
pub fn shadow_aware_blend<A: Sample, B: Sample>(
    original: &Image<A>,
    generated: &Image<B>,
    mask: &BinaryMask,
    cfg: &BlendConfig,
) -> Result<BlendOutput> {
    original.ensure_same_dims(mask, "blend mask")?;
    let significance = significance_map(original, generated, cfg)?;
    let dist = distance_from_mask(mask);
    let weights = blend_weights(mask, &significance, &dist, cfg)?;
    let image = blend(original, generated, &weights)?;
    Ok(BlendOutput {
        image,
        weights,
        significance,
    })
}

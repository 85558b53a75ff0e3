//! Full-reference image quality metrics.
//!
//! SSIM follows the standard construction: 11x11 Gaussian window with
//! sigma 1.5, K1 = 0.01, K2 = 0.03, averaged over all window positions
//! that fit inside the image and then over channels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{BinaryMask, EquirectPanorama};

/// Reported PSNR when the images are identical.
pub const PSNR_CAP_DB: f64 = 99.0;
pub const PEAK_8BIT: f64 = 255.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn psnr_from_mse(mse: f64, peak: f64) -> f64 {
    if mse == 0.0 {
        PSNR_CAP_DB
    } else {
        (10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB)
    }
}

/// Peak signal-to-noise ratio over all samples, in dB (capped).
pub fn psnr(a: &EquirectPanorama, b: &EquirectPanorama, peak: f64) -> Result<f64> {
    a.ensure_same_shape(b, "psnr")?;
    let sse: f64 = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    Ok(psnr_from_mse(sse / a.as_slice().len() as f64, peak))
}

/// PSNR restricted to the pixels set in `mask`; `None` for an empty mask.
pub fn masked_psnr(
    a: &EquirectPanorama,
    b: &EquirectPanorama,
    mask: &BinaryMask,
    peak: f64,
) -> Result<Option<f64>> {
    a.ensure_same_shape(b, "masked psnr")?;
    a.ensure_same_dims(mask, "masked psnr mask")?;
    let ch = a.channels();
    let mut sse = 0.0;
    let mut n = 0usize;
    for (i, &m) in mask.as_slice().iter().enumerate() {
        if !m {
            continue;
        }
        for c in 0..ch {
            let d = a.as_slice()[i * ch + c] as f64 - b.as_slice()[i * ch + c] as f64;
            sse += d * d;
        }
        n += ch;
    }
    if n == 0 {
        return Ok(None);
    }
    Ok(Some(psnr_from_mse(sse / n as f64, peak)))
}

fn gaussian_window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as isize;
    let taps: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / total).collect()
}

/// Valid-mode separable filtering of one plane.
fn filter_valid(plane: &[f64], w: usize, h: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let ow = w - n + 1;
    let oh = h - n + 1;
    let mut horiz = vec![0.0; ow * h];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..ow {
            horiz[y * ow + x] = k.iter().zip(&row[x..x + n]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        let dst = &mut out[y * ow..(y + 1) * ow];
        for (j, &kw) in k.iter().enumerate() {
            let src = &horiz[(y + j) * ow..(y + j + 1) * ow];
            for (o, &s) in dst.iter_mut().zip(src) {
                *o += kw * s;
            }
        }
    }
    out
}

/// Mean structural similarity (8-bit dynamic range).
pub fn ssim(a: &EquirectPanorama, b: &EquirectPanorama) -> Result<f64> {
    a.ensure_same_shape(b, "ssim")?;
    let (w, h) = a.dims();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::dim(format!(
            "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {w}x{h}"
        )));
    }
    let k = gaussian_window();
    let c1 = (SSIM_K1 * PEAK_8BIT).powi(2);
    let c2 = (SSIM_K2 * PEAK_8BIT).powi(2);
    let ch = a.channels();
    let mut total = 0.0;
    for c in 0..ch {
        let plane = |img: &EquirectPanorama| -> Vec<f64> {
            img.as_slice().iter().skip(c).step_by(ch).map(|&v| v as f64).collect()
        };
        let x = plane(a);
        let y = plane(b);
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
        let mx = filter_valid(&x, w, h, &k);
        let my = filter_valid(&y, w, h, &k);
        let sxx = filter_valid(&xx, w, h, &k);
        let syy = filter_valid(&yy, w, h, &k);
        let sxy = filter_valid(&xy, w, h, &k);
        let mut sum = 0.0;
        for i in 0..mx.len() {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cov = sxy[i] - ux * uy;
            sum += ((2.0 * ux * uy + c1) * (2.0 * cov + c2))
                / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
        }
        total += sum / mx.len() as f64;
    }
    Ok(total / ch as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub psnr_db: f64,
    pub ssim: f64,
    pub pixel_count: usize,
    /// PSNR inside the mask; absent when no mask (or an empty one) is given.
    pub masked_psnr_db: Option<f64>,
}

/// Compares a defurnished result with the ground-truth empty panorama.
pub fn evaluate(
    result: &EquirectPanorama,
    ground_truth: &EquirectPanorama,
    mask: Option<&BinaryMask>,
) -> Result<QualityReport> {
    let masked_psnr_db = match mask {
        Some(m) => masked_psnr(result, ground_truth, m, PEAK_8BIT)?,
        None => None,
    };
    Ok(QualityReport {
        psnr_db: psnr(result, ground_truth, PEAK_8BIT)?,
        ssim: ssim(result, ground_truth)?,
        pixel_count: result.pixel_count(),
        masked_psnr_db,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Image;
    use crate::pano::roll;

    fn lcg_image(w: usize, h: usize, ch: usize, seed: u64) -> EquirectPanorama {
        let mut s = seed;
        Image::from_fn(w, h, ch, |_, _, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 56) as u8
        })
    }

    #[test]
    fn psnr_closed_forms() {
        let a = Image::filled(32, 16, 3, 100u8);
        assert_eq!(psnr(&a, &a, PEAK_8BIT).unwrap(), PSNR_CAP_DB);
        let b = Image::filled(32, 16, 3, 116u8);
        let expected = 20.0 * (255.0f64 / 16.0).log10();
        assert!((psnr(&a, &b, PEAK_8BIT).unwrap() - expected).abs() < 1e-9);
        assert!((expected - 24.05).abs() < 0.01);
        let black = Image::filled(8, 8, 1, 0u8);
        let white = Image::filled(8, 8, 1, 255u8);
        assert!(psnr(&black, &white, PEAK_8BIT).unwrap().abs() < 1e-12);
    }

    #[test]
    fn ssim_identity_and_constants() {
        let x = lcg_image(40, 30, 3, 5);
        assert!((ssim(&x, &x).unwrap() - 1.0).abs() < 1e-9);
        let (c, d) = (80.0f64, 30.0f64);
        let a = Image::filled(20, 20, 1, c as u8);
        let b = Image::filled(20, 20, 1, (c + d) as u8);
        let c1 = (SSIM_K1 * 255.0f64).powi(2);
        let expected = (2.0 * c * (c + d) + c1) / (c * c + (c + d) * (c + d) + c1);
        assert!((ssim(&a, &b).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn ssim_rejects_small_images() {
        let a = Image::filled(10, 40, 1, 0u8);
        assert!(ssim(&a, &a).is_err());
    }

    #[test]
    fn metrics_are_symmetric_and_roll_invariant_for_psnr() {
        let a = lcg_image(48, 24, 3, 1);
        let b = lcg_image(48, 24, 3, 2);
        assert_eq!(psnr(&a, &b, 255.0).unwrap(), psnr(&b, &a, 255.0).unwrap());
        assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-12);
        let ra = roll(&a, 7);
        let rb = roll(&b, 7);
        assert!((psnr(&ra, &rb, 255.0).unwrap() - psnr(&a, &b, 255.0).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn masked_psnr_empty_mask_is_absent() {
        let a = lcg_image(16, 16, 3, 9);
        let empty = Image::filled(16, 16, 1, false);
        let report = evaluate(&a, &a, Some(&empty)).unwrap();
        assert_eq!(report.masked_psnr_db, None);
        assert_eq!(report.psnr_db, PSNR_CAP_DB);
        assert!((report.ssim - 1.0).abs() < 1e-9);
    }

    #[test]
    fn psnr_decreases_with_noise_amplitude() {
        let base = lcg_image(32, 32, 1, 3);
        let noise = lcg_image(32, 32, 1, 4);
        let mut last = f64::INFINITY;
        for amp in [2i32, 4, 8, 16, 32] {
            let noisy = base.zip_with(&noise, "noise", |v, n| {
                let delta = (n as i32 * 2 * amp) / 255 - amp;
                (v as i32 + delta).clamp(0, 255) as u8
            })
            .unwrap();
            let p = psnr(&base, &noisy, 255.0).unwrap();
            assert!(p < last, "amplitude {amp}: {p} !< {last}");
            last = p;
        }
    }
}

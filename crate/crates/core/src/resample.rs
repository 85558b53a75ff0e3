//! Separable image resampling.
//!
//! Kernels follow the usual convention: sample centers map as
//! `src = (dst + 0.5) * in / out - 0.5`, and when downscaling the kernel is
//! stretched by the scale factor so it acts as a low-pass filter. Tap
//! weights are normalized to sum to one, so constant images stay constant.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{FloatImage, Image, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResampleFilter {
    Nearest,
    Bilinear,
    #[default]
    Lanczos3,
}

impl ResampleFilter {
    fn support(self) -> f64 {
        match self {
            ResampleFilter::Nearest => 0.0,
            ResampleFilter::Bilinear => 1.0,
            ResampleFilter::Lanczos3 => 3.0,
        }
    }

    fn eval(self, x: f64) -> f64 {
        match self {
            ResampleFilter::Nearest => 1.0,
            ResampleFilter::Bilinear => (1.0 - x.abs()).max(0.0),
            ResampleFilter::Lanczos3 => {
                let ax = x.abs();
                if ax < 3.0 {
                    sinc(x) * sinc(x / 3.0)
                } else {
                    0.0
                }
            }
        }
    }
}

impl std::str::FromStr for ResampleFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nearest" => Ok(Self::Nearest),
            "bilinear" => Ok(Self::Bilinear),
            "lanczos3" => Ok(Self::Lanczos3),
            other => Err(Error::param(format!("unknown resample filter `{other}`"))),
        }
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// How taps beyond the horizontal border are resolved. Rows always clamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EdgeMode {
    #[default]
    Clamp,
    /// The horizontal axis wraps around (unpadded panoramas).
    Wrap,
}

/// Per-output tap lists for one axis.
struct Taps {
    offsets: Vec<(usize, usize)>,
    indices: Vec<usize>,
    weights: Vec<f32>,
}

impl Taps {
    fn new(filter: ResampleFilter, src: usize, dst: usize, edge: EdgeMode) -> Self {
        let ratio = src as f64 / dst as f64;
        let scale = ratio.max(1.0);
        let support = filter.support() * scale;
        let mut offsets = Vec::with_capacity(dst);
        let mut indices = Vec::new();
        let mut weights = Vec::new();
        let mut raw = Vec::new();
        for d in 0..dst {
            let center = (d as f64 + 0.5) * ratio - 0.5;
            let start = indices.len();
            raw.clear();
            let lo = (center - support).floor() as isize;
            let hi = (center + support).ceil() as isize;
            for s in lo..=hi {
                let w = filter.eval((s as f64 - center) / scale);
                if w != 0.0 {
                    raw.push((s, w));
                }
            }
            if raw.is_empty() {
                raw.push((center.round() as isize, 1.0));
            }
            let total: f64 = raw.iter().map(|&(_, w)| w).sum();
            for &(s, w) in &raw {
                let idx = match edge {
                    EdgeMode::Clamp => s.clamp(0, src as isize - 1) as usize,
                    EdgeMode::Wrap => s.rem_euclid(src as isize) as usize,
                };
                indices.push(idx);
                weights.push((w / total) as f32);
            }
            offsets.push((start, indices.len() - start));
        }
        Self {
            offsets,
            indices,
            weights,
        }
    }

    /// Smallest source index range read by the outputs in `dst`.
    fn source_span(&self, dst: Range<usize>) -> (usize, usize) {
        let mut lo = usize::MAX;
        let mut hi = 0;
        for &(start, len) in &self.offsets[dst] {
            for &i in &self.indices[start..start + len] {
                lo = lo.min(i);
                hi = hi.max(i + 1);
            }
        }
        (lo, hi)
    }
}

/// Source index sampled by nearest-neighbour for output index `d`.
#[inline]
fn nearest_index(d: usize, src: usize, dst: usize) -> usize {
    (((2 * d + 1) * src) / (2 * dst)).min(src - 1)
}

/// Nearest-neighbour resize for any sample type (masks, label maps).
pub fn resize_nearest<T: Copy>(image: &Image<T>, width: usize, height: usize) -> Result<Image<T>> {
    check_target(width, height)?;
    let (sw, sh) = image.dims();
    if (sw, sh) == (width, height) {
        return Ok(image.clone());
    }
    let ch = image.channels();
    let cols: Vec<usize> = (0..width).map(|x| nearest_index(x, sw, width)).collect();
    let mut data = Vec::with_capacity(width * height * ch);
    for y in 0..height {
        let row = image.row(nearest_index(y, sh, height));
        for &sx in &cols {
            data.extend_from_slice(&row[sx * ch..(sx + 1) * ch]);
        }
    }
    Image::from_vec(width, height, ch, data)
}

fn check_target(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::param(format!("resample target {width}x{height} is empty")));
    }
    Ok(())
}

/// Resizes to exactly `width` x `height`, returning unit-interval floats.
pub fn resize_float<S: Sample>(
    image: &Image<S>,
    width: usize,
    height: usize,
    filter: ResampleFilter,
    edge: EdgeMode,
) -> Result<FloatImage> {
    check_target(width, height)?;
    if filter == ResampleFilter::Nearest {
        return Ok(resize_nearest(image, width, height)?.to_float());
    }
    let (sw, sh) = image.dims();
    if (sw, sh) == (width, height) {
        return Ok(image.to_float());
    }
    Ok(resize_window(image, (width, height), 0..width, 0..height, filter, edge))
}

/// The window `cols x rows` of [`resize_float`] to `width` x `height`,
/// computed without producing the rest of the image. Results are
/// bit-identical to cropping the full resize.
pub fn resize_float_window<S: Sample>(
    image: &Image<S>,
    width: usize,
    height: usize,
    cols: Range<usize>,
    rows: Range<usize>,
    filter: ResampleFilter,
    edge: EdgeMode,
) -> Result<FloatImage> {
    check_target(width, height)?;
    if cols.end > width || rows.end > height || cols.is_empty() || rows.is_empty() {
        return Err(Error::param(format!(
            "window {cols:?} x {rows:?} outside {width}x{height}"
        )));
    }
    if filter == ResampleFilter::Nearest || image.dims() == (width, height) {
        let full = resize_float(image, width, height, filter, edge)?;
        return full
            .crop_rows(rows.start, rows.len())?
            .crop_columns(cols.start, cols.len());
    }
    Ok(resize_window(image, (width, height), cols, rows, filter, edge))
}

fn resize_window<S: Sample>(
    image: &Image<S>,
    (width, height): (usize, usize),
    cols: Range<usize>,
    rows: Range<usize>,
    filter: ResampleFilter,
    edge: EdgeMode,
) -> FloatImage {
    let (sw, sh) = image.dims();
    let vtaps = Taps::new(filter, sh, height, EdgeMode::Clamp);
    // Horizontal pass first when it shrinks the data more.
    if width * sh <= sw * height {
        let (lo, hi) = vtaps.source_span(rows.clone());
        let mid = horizontal_pass(image, width, cols, lo..hi, filter, edge);
        vertical_pass(&mid, lo, &vtaps, rows)
    } else {
        let mid = vertical_pass(&image.to_float(), 0, &vtaps, rows);
        let n = mid.height();
        horizontal_pass(&mid, width, cols, 0..n, filter, edge)
    }
}

/// Resizes and quantizes back to the input sample type.
pub fn resize<S: Sample>(
    image: &Image<S>,
    width: usize,
    height: usize,
    filter: ResampleFilter,
    edge: EdgeMode,
) -> Result<Image<S>> {
    if (width, height) == image.dims() {
        check_target(width, height)?;
        return Ok(image.clone());
    }
    if filter == ResampleFilter::Nearest {
        return resize_nearest(image, width, height);
    }
    Ok(resize_float(image, width, height, filter, edge)?.map(S::from_unit))
}

/// Width that keeps the aspect ratio at `target_height`.
pub fn aspect_width(width: usize, height: usize, target_height: usize) -> usize {
    ((width as f64 * target_height as f64 / height as f64).round() as usize).max(1)
}

/// Resizes to `target_height`, preserving aspect ratio.
pub fn resample<S: Sample>(
    image: &Image<S>,
    target_height: usize,
    filter: ResampleFilter,
) -> Result<Image<S>> {
    let w = aspect_width(image.width(), image.height(), target_height);
    resize(image, w, target_height, filter, EdgeMode::Clamp)
}

/// Output columns `cols` for source rows `rows`.
fn horizontal_pass<S: Sample>(
    image: &Image<S>,
    width: usize,
    cols: Range<usize>,
    rows: Range<usize>,
    filter: ResampleFilter,
    edge: EdgeMode,
) -> FloatImage {
    let sw = image.width();
    let ch = image.channels();
    let taps = Taps::new(filter, sw, width, edge);
    let ow = cols.len();
    let mut out = vec![0f32; ow * rows.len() * ch];
    let mut src_row = vec![0f32; sw * ch];
    for (oy, y) in rows.enumerate() {
        for (dst, &s) in src_row.iter_mut().zip(image.row(y)) {
            *dst = s.to_unit();
        }
        let out_row = &mut out[oy * ow * ch..(oy + 1) * ow * ch];
        for (ox, &(start, len)) in taps.offsets[cols.clone()].iter().enumerate() {
            let idx = &taps.indices[start..start + len];
            let wts = &taps.weights[start..start + len];
            let px = &mut out_row[ox * ch..(ox + 1) * ch];
            match ch {
                3 => {
                    let (mut a, mut b, mut c) = (0f32, 0f32, 0f32);
                    for (&i, &w) in idx.iter().zip(wts) {
                        let p = &src_row[i * 3..i * 3 + 3];
                        a += p[0] * w;
                        b += p[1] * w;
                        c += p[2] * w;
                    }
                    px[0] = a;
                    px[1] = b;
                    px[2] = c;
                }
                _ => {
                    for (k, v) in px.iter_mut().enumerate() {
                        *v = idx
                            .iter()
                            .zip(wts)
                            .map(|(&i, &w)| src_row[i * ch + k] * w)
                            .sum();
                    }
                }
            }
        }
    }
    let n = out.len() / (ow * ch);
    Image::from_vec(ow, n, ch, out).expect("resample buffer size")
}

/// Output rows `rows`; `image` holds source rows starting at `first_row`.
fn vertical_pass(image: &FloatImage, first_row: usize, taps: &Taps, rows: Range<usize>) -> FloatImage {
    let w = image.width();
    let ch = image.channels();
    let stride = w * ch;
    let mut out = vec![0f32; stride * rows.len()];
    for (oy, &(start, len)) in taps.offsets[rows.clone()].iter().enumerate() {
        let out_row = &mut out[oy * stride..(oy + 1) * stride];
        for (&i, &wt) in taps.indices[start..start + len]
            .iter()
            .zip(&taps.weights[start..start + len])
        {
            for (o, &s) in out_row.iter_mut().zip(image.row(i - first_row)) {
                *o += s * wt;
            }
        }
    }
    Image::from_vec(w, rows.len(), ch, out).expect("resample buffer size")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_size_is_identity() {
        let img = Image::from_fn(17, 9, 3, |x, y, c| ((x * 11 + y * 5 + c * 3) % 256) as u8);
        for f in [
            ResampleFilter::Nearest,
            ResampleFilter::Bilinear,
            ResampleFilter::Lanczos3,
        ] {
            assert_eq!(resample(&img, 9, f).unwrap(), img);
        }
    }

    #[test]
    fn constant_is_preserved() {
        let img = Image::filled(40, 20, 3, 0.37f32);
        for (w, h) in [(13, 7), (80, 40), (40, 3), (7, 61)] {
            for edge in [EdgeMode::Clamp, EdgeMode::Wrap] {
                let out = resize_float(&img, w, h, ResampleFilter::Lanczos3, edge).unwrap();
                assert!(out.as_slice().iter().all(|&v| (v - 0.37).abs() < 1e-6));
            }
        }
        let img8 = Image::filled(40, 20, 1, 200u8);
        assert!(resample(&img8, 5, ResampleFilter::Lanczos3)
            .unwrap()
            .as_slice()
            .iter()
            .all(|&v| v == 200));
    }

    #[test]
    fn window_matches_full_resize() {
        let img = Image::from_fn(37, 23, 3, |x, y, c| ((x * 29 + y * 13 + c * 7) % 256) as u8);
        for (w, h) in [(50, 31), (11, 9), (80, 12), (20, 40)] {
            for edge in [EdgeMode::Clamp, EdgeMode::Wrap] {
                let full = resize_float(&img, w, h, ResampleFilter::Lanczos3, edge).unwrap();
                for (cols, rows) in [(0..w, 0..h), (3..w / 2, 1..h - 1), (w - 2..w, 0..1)] {
                    let win = resize_float_window(&img, w, h, cols.clone(), rows.clone(), ResampleFilter::Lanczos3, edge)
                        .unwrap();
                    let expect = full
                        .crop_rows(rows.start, rows.len())
                        .unwrap()
                        .crop_columns(cols.start, cols.len())
                        .unwrap();
                    assert_eq!(win.as_slice(), expect.as_slice(), "{w}x{h} {cols:?} {rows:?}");
                }
            }
        }
        assert!(resize_float_window(&img, 10, 10, 5..11, 0..2, ResampleFilter::Bilinear, EdgeMode::Clamp).is_err());
    }

    #[test]
    fn aspect_is_preserved() {
        let img = Image::filled(2730, 910, 1, 0u8);
        let out = resample(&img, 512, ResampleFilter::Bilinear).unwrap();
        assert_eq!(out.dims(), (1536, 512));
    }

    #[test]
    fn lanczos_kernel_zero_crossings() {
        let f = ResampleFilter::Lanczos3;
        assert_eq!(f.eval(0.0), 1.0);
        for k in 1..4 {
            assert!(f.eval(k as f64).abs() < 1e-12);
        }
        assert_eq!(f.eval(3.5), 0.0);
    }

    #[test]
    fn nearest_keeps_masks_binary() {
        let mask = Image::from_fn(30, 10, 1, |x, y, _| (x + y) % 3 == 0);
        let small = resize_nearest(&mask, 7, 3).unwrap();
        assert_eq!(small.dims(), (7, 3));
        let large = resize_nearest(&mask, 60, 20).unwrap();
        for y in 0..20 {
            for x in 0..60 {
                assert_eq!(large.get(x, y, 0), mask.get(x / 2, y / 2, 0));
            }
        }
    }

    #[test]
    fn wrap_edge_mixes_opposite_border() {
        // A single bright last column bleeds into column 0 only when wrapping.
        let img = Image::from_fn(16, 1, 1, |x, _, _| if x == 15 { 1.0f32 } else { 0.0 });
        let clamp = resize_float(&img, 8, 1, ResampleFilter::Lanczos3, EdgeMode::Clamp).unwrap();
        let wrap = resize_float(&img, 8, 1, ResampleFilter::Lanczos3, EdgeMode::Wrap).unwrap();
        assert!(clamp.get(0, 0, 0).abs() < 1e-6);
        assert!(wrap.get(0, 0, 0).abs() > 1e-3);
    }
}

//! Row-major interleaved rasters.
//!
//! Every raster in the engine is an [`Image`]: panoramas (`u8` or `f32`
//! samples), binary masks (`bool`), label maps (`u16`) and scalar fields
//! such as distance maps (`f32`). Horizontal position is cyclic for all of
//! them; the helpers here only deal with storage.

use crate::error::{Error, Result};

#[derive(Clone, PartialEq)]
pub struct Image<T> {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<T>,
}

/// 8-bit sRGB equirectangular panorama (1 or 3 channels).
pub type EquirectPanorama = Image<u8>;
/// Unit-interval float image.
pub type FloatImage = Image<f32>;
/// Per-pixel inpainting region; `true` means "to be inpainted".
pub type BinaryMask = Image<bool>;
/// Per-pixel semantic class ids.
pub type LabelMap = Image<u16>;
/// Per-pixel scalar field (e.g. Euclidean distance in pixels).
pub type ScalarField = Image<f32>;

impl<T> std::fmt::Debug for Image<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Image")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("channels", &self.channels)
            .finish_non_exhaustive()
    }
}

impl<T: Copy> Image<T> {
    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::dim(format!("empty raster {width}x{height}")));
        }
        if channels == 0 {
            return Err(Error::dim("raster needs at least one channel"));
        }
        if data.len() != width * height * channels {
            return Err(Error::dim(format!(
                "buffer length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Panics on zero dimensions.
    pub fn filled(width: usize, height: usize, channels: usize, value: T) -> Self {
        assert!(width > 0 && height > 0 && channels > 0, "empty raster");
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Self {
        assert!(width > 0 && height > 0 && channels > 0, "empty raster");
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self {
            width,
            height,
            channels,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> T {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, value: T) {
        let idx = (y * self.width + x) * self.channels + c;
        self.data[idx] = value;
    }

    /// Samples of the pixel at (x, y).
    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[T] {
        let start = (y * self.width + x) * self.channels;
        &self.data[start..start + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [T] {
        let start = (y * self.width + x) * self.channels;
        &mut self.data[start..start + self.channels]
    }

    #[inline]
    pub fn row(&self, y: usize) -> &[T] {
        let stride = self.width * self.channels;
        &self.data[y * stride..(y + 1) * stride]
    }

    #[inline]
    pub fn row_mut(&mut self, y: usize) -> &mut [T] {
        let stride = self.width * self.channels;
        &mut self.data[y * stride..(y + 1) * stride]
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Image<U> {
        Image {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Rows `[top, top + rows)` as a new raster.
    pub fn crop_rows(&self, top: usize, rows: usize) -> Result<Self> {
        if rows == 0 || top + rows > self.height {
            return Err(Error::dim(format!(
                "row range {top}..{} outside height {}",
                top + rows,
                self.height
            )));
        }
        let stride = self.width * self.channels;
        Ok(Self {
            width: self.width,
            height: rows,
            channels: self.channels,
            data: self.data[top * stride..(top + rows) * stride].to_vec(),
        })
    }

    /// Columns `[left, left + cols)` as a new raster (no wrapping).
    pub fn crop_columns(&self, left: usize, cols: usize) -> Result<Self> {
        if cols == 0 || left + cols > self.width {
            return Err(Error::dim(format!(
                "column range {left}..{} outside width {}",
                left + cols,
                self.width
            )));
        }
        let ch = self.channels;
        let mut data = Vec::with_capacity(cols * self.height * ch);
        for y in 0..self.height {
            let row = self.row(y);
            data.extend_from_slice(&row[left * ch..(left + cols) * ch]);
        }
        Ok(Self {
            width: cols,
            height: self.height,
            channels: ch,
            data,
        })
    }

    pub fn same_shape<U>(&self, other: &Image<U>) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub(crate) fn ensure_same_shape<U>(&self, other: &Image<U>, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::dim(format!(
                "{what}: {}x{}x{} vs {}x{}x{}",
                self.width, self.height, self.channels, other.width, other.height, other.channels
            )))
        }
    }

    pub(crate) fn ensure_same_dims<U>(&self, other: &Image<U>, what: &str) -> Result<()> {
        if (self.width, self.height) == (other.width, other.height) {
            Ok(())
        } else {
            Err(Error::dim(format!(
                "{what}: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )))
        }
    }
}

impl Image<bool> {
    pub fn count_true(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn any(&self) -> bool {
        self.data.iter().any(|&b| b)
    }

    /// Fraction of pixels set, in `[0, 1]`.
    pub fn coverage(&self) -> f64 {
        self.count_true() as f64 / self.data.len() as f64
    }

    /// Element-wise OR.
    pub fn union(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "mask union", |a, b| a || b)
    }

    /// Element-wise AND NOT.
    pub fn difference(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "mask difference", |a, b| a && !b)
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.same_shape(other) && self.data.iter().zip(&other.data).all(|(&a, &b)| !a || b)
    }
}

impl<T: Copy> Image<T> {
    /// Element-wise combination of two rasters with identical shape.
    pub fn zip_with<U: Copy, V: Copy>(
        &self,
        other: &Image<U>,
        what: &str,
        f: impl Fn(T, U) -> V,
    ) -> Result<Image<V>> {
        self.ensure_same_shape(other, what)?;
        Ok(Image {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }
}

/// Conversion between stored samples and unit-interval floats.
pub trait Sample: Copy + Send + Sync + 'static {
    fn to_unit(self) -> f32;
    fn from_unit(v: f32) -> Self;
}

impl Sample for u8 {
    #[inline]
    fn to_unit(self) -> f32 {
        self as f32 / 255.0
    }

    /// Rounds half away from zero after clamping to `[0, 1]`.
    #[inline]
    fn from_unit(v: f32) -> Self {
        (v.clamp(0.0, 1.0) * 255.0).round() as u8
    }
}

impl Sample for f32 {
    #[inline]
    fn to_unit(self) -> f32 {
        self
    }

    #[inline]
    fn from_unit(v: f32) -> Self {
        v
    }
}

impl<S: Sample> Image<S> {
    pub fn to_float(&self) -> FloatImage {
        self.map(Sample::to_unit)
    }
}

impl FloatImage {
    /// Quantizes to 8 bits, clamping to the unit interval.
    pub fn to_u8(&self) -> EquirectPanorama {
        self.map(u8::from_unit)
    }
}

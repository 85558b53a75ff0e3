//! PNG encoding for panoramas, masks and label maps.

use std::path::Path;

use image::codecs::png::{CompressionType, FilterType, PngEncoder};
use image::{ColorType, DynamicImage, ImageEncoder};

use crate::error::{Error, Result};
use crate::image::{BinaryMask, EquirectPanorama, Image, LabelMap};

fn encode(data: &[u8], width: usize, height: usize, color: ColorType) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    PngEncoder::new_with_quality(&mut out, CompressionType::Fast, FilterType::Sub).write_image(
        data,
        width as u32,
        height as u32,
        color.into(),
    )?;
    Ok(out)
}

/// PNG bytes of an 8-bit panorama (gray or RGB).
pub fn encode_png(img: &EquirectPanorama) -> Result<Vec<u8>> {
    let color = match img.channels() {
        1 => ColorType::L8,
        3 => ColorType::Rgb8,
        n => return Err(Error::dim(format!("cannot encode {n}-channel image as PNG"))),
    };
    encode(img.as_slice(), img.width(), img.height(), color)
}

fn into_panorama(decoded: DynamicImage) -> Result<EquirectPanorama> {
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    match decoded {
        DynamicImage::ImageLuma8(buf) => Image::from_vec(w, h, 1, buf.into_raw()),
        other => Image::from_vec(w, h, 3, other.into_rgb8().into_raw()),
    }
}

/// Decodes PNG bytes; gray stays 1-channel, everything else becomes RGB.
pub fn decode_png(bytes: &[u8]) -> Result<EquirectPanorama> {
    let decoded = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)?;
    into_panorama(decoded)
}

/// 1-channel PNG with 0 / 255.
pub fn encode_mask_png(mask: &BinaryMask) -> Result<Vec<u8>> {
    let data: Vec<u8> = mask.as_slice().iter().map(|&b| if b { 255 } else { 0 }).collect();
    encode(&data, mask.width(), mask.height(), ColorType::L8)
}

/// Any PNG; a pixel is set when its luminance is at least 128.
pub fn decode_mask_png(bytes: &[u8]) -> Result<BinaryMask> {
    let decoded = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)?;
    luma_to_mask(decoded)
}

fn luma_to_mask(decoded: DynamicImage) -> Result<BinaryMask> {
    let luma = decoded.into_luma8();
    let (w, h) = (luma.width() as usize, luma.height() as usize);
    Image::from_vec(w, h, 1, luma.into_raw().into_iter().map(|v| v >= 128).collect())
}

fn read(path: &Path) -> Result<DynamicImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(image::load_from_memory(&bytes)?)
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_panorama(path: &Path) -> Result<EquirectPanorama> {
    into_panorama(read(path)?)
}

pub fn save_panorama(path: &Path, img: &EquirectPanorama) -> Result<()> {
    write(path, &encode_png(img)?)
}

pub fn load_mask(path: &Path) -> Result<BinaryMask> {
    luma_to_mask(read(path)?)
}

pub fn save_mask(path: &Path, mask: &BinaryMask) -> Result<()> {
    write(path, &encode_mask_png(mask)?)
}

/// 16-bit (or 8-bit) grayscale label map.
pub fn load_labels(path: &Path) -> Result<LabelMap> {
    let decoded = read(path)?;
    let luma = decoded.into_luma16();
    let (w, h) = (luma.width() as usize, luma.height() as usize);
    Image::from_vec(w, h, 1, luma.into_raw())
}

pub fn save_labels(path: &Path, labels: &LabelMap) -> Result<()> {
    // The encoder takes 16-bit samples in native byte order.
    let native: Vec<u8> = labels
        .as_slice()
        .iter()
        .flat_map(|v| v.to_ne_bytes())
        .collect();
    write(
        path,
        &encode(&native, labels.width(), labels.height(), ColorType::L16)?,
    )
}

//! Equirectangular geometry: pole cropping, cyclic rolls and wrap padding.
//!
//! Every operation here is an exact copy or permutation of samples, so all
//! of them are bit-exact invertible. They work on any [`Image`] so the same
//! code path transforms panoramas, masks and label maps.

use crate::error::{Error, Result};
use crate::image::{BinaryMask, Image};

/// Height of the 3:1 band kept by [`crop_poles`] for a panorama of the
/// given width. Always even.
pub fn band_height(width: usize) -> usize {
    2 * (width / 6)
}

/// Output of [`crop_poles`].
#[derive(Debug, Clone)]
pub struct PoleCrop<T> {
    pub band: Image<T>,
    pub crop_top: usize,
    pub crop_bottom: usize,
}

/// Crops a full 2:1 panorama to its central 3:1 band.
///
/// The band height is `2 * floor(width / 6)`. When the removed row count is
/// odd the extra row is taken from the top, so the band keeps the floor side.
pub fn crop_poles<T: Copy>(pano: &Image<T>) -> Result<PoleCrop<T>> {
    let (w, h) = pano.dims();
    if w != 2 * h {
        return Err(Error::dim(format!(
            "pole crop needs a 2:1 panorama, got {w}x{h}"
        )));
    }
    let band_h = band_height(w);
    if band_h == 0 {
        return Err(Error::dim(format!("panorama {w}x{h} too small for a 3:1 band")));
    }
    let removed = h - band_h;
    let crop_top = removed.div_ceil(2);
    let crop_bottom = removed - crop_top;
    Ok(PoleCrop {
        band: pano.crop_rows(crop_top, band_h)?,
        crop_top,
        crop_bottom,
    })
}

/// Writes a processed band back into a copy of `original`; pole rows are
/// copied unchanged from `original`.
pub fn restore_band<T: Copy>(
    band: &Image<T>,
    original: &Image<T>,
    crop_top: usize,
    crop_bottom: usize,
) -> Result<Image<T>> {
    if band.width() != original.width() || band.channels() != original.channels() {
        return Err(Error::dim(format!(
            "band {}x{}x{} does not fit panorama {}x{}x{}",
            band.width(),
            band.height(),
            band.channels(),
            original.width(),
            original.height(),
            original.channels()
        )));
    }
    if crop_top + band.height() + crop_bottom != original.height() {
        return Err(Error::dim(format!(
            "crops {crop_top}+{crop_bottom} and band height {} do not sum to {}",
            band.height(),
            original.height()
        )));
    }
    let mut out = original.clone();
    for y in 0..band.height() {
        out.row_mut(crop_top + y).copy_from_slice(band.row(y));
    }
    Ok(out)
}

/// Rightward cyclic shift: output column `(c + offset) mod width` holds
/// input column `c`.
pub fn roll<T: Copy>(image: &Image<T>, offset: isize) -> Image<T> {
    let w = image.width();
    let shift = offset.rem_euclid(w as isize) as usize;
    let mut out = image.clone();
    if shift == 0 {
        return out;
    }
    let ch = image.channels();
    for y in 0..image.height() {
        out.row_mut(y).rotate_right(shift * ch);
    }
    out
}

/// Pads horizontally with content from the opposite edge.
pub fn wrap_pad<T: Copy>(image: &Image<T>, pad_left: usize, pad_right: usize) -> Result<Image<T>> {
    let (w, h) = image.dims();
    if pad_left >= w || pad_right >= w {
        return Err(Error::param(format!(
            "wrap pad ({pad_left}, {pad_right}) must be smaller than width {w}"
        )));
    }
    let ch = image.channels();
    let out_w = w + pad_left + pad_right;
    let mut data = Vec::with_capacity(out_w * h * ch);
    for y in 0..h {
        let row = image.row(y);
        data.extend_from_slice(&row[(w - pad_left) * ch..]);
        data.extend_from_slice(row);
        data.extend_from_slice(&row[..pad_right * ch]);
    }
    Image::from_vec(out_w, h, ch, data)
}

/// Removes wrap padding (center crop).
pub fn unpad<T: Copy>(image: &Image<T>, pad_left: usize, pad_right: usize) -> Result<Image<T>> {
    let w = image.width();
    if pad_left + pad_right >= w {
        return Err(Error::Transform(format!(
            "pads ({pad_left}, {pad_right}) leave nothing of width {w}"
        )));
    }
    image.crop_columns(pad_left, w - pad_left - pad_right)
}

/// Number of set pixels in each column.
pub fn column_histogram(mask: &BinaryMask) -> Vec<u64> {
    let w = mask.width();
    let mut hist = vec![0u64; w];
    for y in 0..mask.height() {
        for (x, &bit) in mask.row(y).iter().enumerate() {
            hist[x] += bit as u64;
        }
    }
    hist
}

/// Roll cost of every offset, scaled by 4 so it stays integral:
/// `cost[o] = sum over mask pixels of (2 * ((c + o) mod W) - (W - 1))^2`.
pub fn roll_costs(hist: &[u64]) -> Vec<u128> {
    let w = hist.len();
    let occupied: Vec<(usize, u64)> = hist
        .iter()
        .copied()
        .enumerate()
        .filter(|&(_, n)| n > 0)
        .collect();
    (0..w)
        .map(|o| {
            occupied
                .iter()
                .map(|&(c, n)| {
                    let col = ((c + o) % w) as i128;
                    let d = 2 * col - (w as i128 - 1);
                    n as u128 * (d * d) as u128
                })
                .sum()
        })
        .collect()
}

/// Rightward roll that brings masked pixels closest to the image center
/// (least squared column distance). Ties go to the smallest offset; an
/// empty mask yields 0.
pub fn optimal_roll_offset(mask: &BinaryMask) -> usize {
    let hist = column_histogram(mask);
    if hist.iter().all(|&n| n == 0) {
        return 0;
    }
    let costs = roll_costs(&hist);
    let mut best = 0;
    for (o, &c) in costs.iter().enumerate() {
        if c < costs[best] {
            best = o;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(values: &[u8]) -> Image<u8> {
        Image::from_vec(values.len(), 1, 1, values.to_vec()).unwrap()
    }

    #[test]
    fn crop_full_resolution_pano() {
        let pano = Image::filled(8192, 4096, 1, 7u8);
        let crop = crop_poles(&pano).unwrap();
        assert_eq!(crop.band.dims(), (8192, 2730));
        assert_eq!((crop.crop_top, crop.crop_bottom), (683, 683));
    }

    #[test]
    fn crop_smallest_band_takes_extra_row_from_top() {
        let pano = Image::from_fn(6, 3, 1, |_, y, _| y as u8);
        let crop = crop_poles(&pano).unwrap();
        assert_eq!(crop.band.dims(), (6, 2));
        assert_eq!((crop.crop_top, crop.crop_bottom), (1, 0));
        assert!(crop.band.as_slice().iter().take(6).all(|&v| v == 1));
    }

    #[test]
    fn crop_rejects_non_2_to_1() {
        let pano = Image::filled(8192, 4000, 1, 0u8);
        assert!(matches!(crop_poles(&pano), Err(Error::Dimension(_))));
    }

    #[test]
    fn restore_keeps_poles() {
        let original = Image::from_fn(12, 6, 3, |x, y, c| (x + y * 3 + c) as u8 + 1);
        let crop = crop_poles(&original).unwrap();
        let zeros = Image::filled(12, crop.band.height(), 3, 0u8);
        let out = restore_band(&zeros, &original, crop.crop_top, crop.crop_bottom).unwrap();
        for y in 0..6 {
            let in_band = y >= crop.crop_top && y < crop.crop_top + crop.band.height();
            for x in 0..12 {
                if in_band {
                    assert_eq!(out.pixel(x, y), &[0, 0, 0]);
                } else {
                    assert_eq!(out.pixel(x, y), original.pixel(x, y));
                }
            }
        }
        let bad = Image::filled(10, crop.band.height(), 3, 0u8);
        assert!(restore_band(&bad, &original, crop.crop_top, crop.crop_bottom).is_err());
    }

    #[test]
    fn roll_definition() {
        let r = row(&[1, 2, 3, 4]);
        assert_eq!(roll(&r, 1).as_slice(), &[4, 1, 2, 3]);
        assert_eq!(roll(&r, 0), r);
        assert_eq!(roll(&r, 4), r);
        assert_eq!(roll(&r, -1).as_slice(), &[2, 3, 4, 1]);
    }

    #[test]
    fn wrap_pad_definition() {
        let r = row(&[1, 2, 3, 4]);
        assert_eq!(wrap_pad(&r, 1, 1).unwrap().as_slice(), &[4, 1, 2, 3, 4, 1]);
        assert_eq!(wrap_pad(&r, 0, 0).unwrap(), r);
        assert!(wrap_pad(&r, 4, 0).is_err());
    }

    #[test]
    fn roll_offset_examples() {
        let empty = Image::filled(8, 3, 1, false);
        assert_eq!(optimal_roll_offset(&empty), 0);

        let mut two_cols = empty.clone();
        two_cols.set(0, 1, 0, true);
        two_cols.set(1, 1, 0, true);
        assert_eq!(optimal_roll_offset(&two_cols), 3);
        // cost(3) = 0.5 pixel^2, stored scaled by 4.
        assert_eq!(roll_costs(&column_histogram(&two_cols))[3], 2);

        let full = Image::filled(8, 3, 1, true);
        assert_eq!(optimal_roll_offset(&full), 0);
    }

    fn brute_force_offset(mask: &BinaryMask) -> usize {
        let w = mask.width();
        let center = (w as f64 - 1.0) / 2.0;
        let mut best = (f64::INFINITY, 0);
        for o in 0..w {
            let mut cost = 0.0;
            for y in 0..mask.height() {
                for x in 0..w {
                    if mask.get(x, y, 0) {
                        let d = ((x + o) % w) as f64 - center;
                        cost += d * d;
                    }
                }
            }
            if cost < best.0 {
                best = (cost, o);
            }
        }
        if mask.any() {
            best.1
        } else {
            0
        }
    }

    proptest! {
        #[test]
        fn roll_inverse_and_sum(w in 1usize..40, h in 1usize..6, k in 0usize..80, seed in any::<u64>()) {
            let img = Image::from_fn(w, h, 3, |x, y, c| {
                (seed.wrapping_mul(31).wrapping_add((x * 7 + y * 13 + c) as u64) % 251) as u8
            });
            let rolled = roll(&img, k as isize);
            let sum = |i: &Image<u8>| i.as_slice().iter().map(|&v| v as u64).sum::<u64>();
            prop_assert_eq!(sum(&rolled), sum(&img));
            let back = roll(&rolled, (w - k % w) as isize);
            prop_assert_eq!(back, img);
        }

        #[test]
        fn pad_unpad_identity(w in 1usize..30, pl in 0usize..30, pr in 0usize..30) {
            prop_assume!(pl < w && pr < w);
            let img = Image::from_fn(w, 2, 1, |x, y, _| (x + 100 * y) as u16);
            let padded = wrap_pad(&img, pl, pr).unwrap();
            prop_assert_eq!(padded.width(), w + pl + pr);
            prop_assert_eq!(unpad(&padded, pl, pr).unwrap(), img);
        }

        #[test]
        fn roll_offset_matches_brute_force(w in 1usize..48, h in 1usize..5, bits in proptest::collection::vec(any::<bool>(), 240)) {
            let mask = Image::from_fn(w, h, 1, |x, y, _| bits[(y * w + x) % bits.len()] && (x * 3 + y) % 4 == 0);
            prop_assert_eq!(optimal_roll_offset(&mask), brute_force_offset(&mask));
        }
    }
}

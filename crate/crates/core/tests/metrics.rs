use defurnish::image::Image;
use defurnish::metrics::{evaluate, masked_psnr, psnr, ssim, PEAK_8BIT};
use defurnish::EquirectPanorama;

fn lcg(n: usize, seed: u64) -> Vec<i64> {
    let mut s = seed;
    (0..n)
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 56) as i64
        })
        .collect()
}

/// Same construction as fixtures/ssim_reference.py.
fn fixture(ch: usize, seed_a: u64, seed_b: u64, mix: i64) -> (EquirectPanorama, EquirectPanorama) {
    let n = 64 * 64 * ch;
    let a = lcg(n, seed_a);
    let noise = lcg(n, seed_b);
    let b: Vec<u8> = a
        .iter()
        .zip(&noise)
        .map(|(&x, &z)| ((x * (4 - mix) + z * mix) / 4) as u8)
        .collect();
    let a = a.into_iter().map(|v| v as u8).collect();
    (
        Image::from_vec(64, 64, ch, a).unwrap(),
        Image::from_vec(64, 64, ch, b).unwrap(),
    )
}

// scikit-image structural_similarity(gaussian_weights=True, sigma=1.5,
// use_sample_covariance=False, data_range=255)
const SSIM_REFERENCE: [(usize, u64, u64, i64, f64); 5] = [
    (1, 1, 2, 1, 0.921929010316),
    (1, 3, 4, 4, -0.014780340180),
    (3, 5, 6, 1, 0.922767955744),
    (3, 7, 8, 2, 0.649433585840),
    (3, 9, 10, 3, 0.299803409537),
];

#[test]
fn ssim_matches_frozen_reference() {
    for (ch, sa, sb, mix, expected) in SSIM_REFERENCE {
        let (a, b) = fixture(ch, sa, sb, mix);
        let got = ssim(&a, &b).unwrap();
        assert!((got - expected).abs() < 1e-4, "fixture {sa}/{sb}: {got} vs {expected}");
    }
}

#[test]
fn ssim_self_is_one() {
    for (ch, sa, sb, mix, _) in SSIM_REFERENCE {
        let (a, b) = fixture(ch, sa, sb, mix);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-9);
        assert!((ssim(&b, &b).unwrap() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn psnr_constant_offsets() {
    for (offset, expected) in [(16u8, 24.05f64), (1, 48.13), (64, 12.0)] {
        let a = Image::filled(64, 32, 3, 100u8);
        let b = Image::filled(64, 32, 3, 100 + offset);
        let got = psnr(&a, &b, PEAK_8BIT).unwrap();
        assert!((got - expected).abs() < 0.01, "offset {offset}: {got}");
    }
}

#[test]
fn masked_psnr_only_sees_the_mask() {
    let a = Image::filled(32, 16, 3, 50u8);
    let mut b = a.clone();
    for y in 0..16 {
        for x in 0..16 {
            b.pixel_mut(x, y).fill(66);
        }
        for x in 16..32 {
            b.pixel_mut(x, y).fill(0);
        }
    }
    let left = Image::from_fn(32, 16, 1, |x, _, _| x < 16);
    let got = masked_psnr(&a, &b, &left, PEAK_8BIT).unwrap().unwrap();
    assert!((got - 24.05).abs() < 0.01);
    let report = evaluate(&a, &b, Some(&left)).unwrap();
    assert!(report.psnr_db < got);
    assert_eq!(report.pixel_count, 512);
}

#[test]
fn shape_mismatch_is_an_error() {
    let a = Image::filled(16, 16, 3, 0u8);
    let b = Image::filled(16, 16, 1, 0u8);
    assert!(psnr(&a, &b, PEAK_8BIT).is_err());
    assert!(ssim(&a, &b).is_err());
}

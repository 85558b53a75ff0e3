//! Separable smoothing on single-channel fields.
//!
//! The horizontal axis wraps, the vertical axis clamps. Each output is a
//! gather over a fixed window in a fixed order, so results do not depend on
//! where column 0 is: rolling the input rolls the output bit-for-bit.

use crate::image::ScalarField;

/// Normalized Gaussian taps over `[-ceil(3 sigma), ceil(3 sigma)]`.
pub fn gaussian_kernel(sigma: f32) -> Vec<f32> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = gaussian_support(sigma);
    let taps: Vec<f64> = (-(radius as isize)..=radius as isize)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma as f64 * sigma as f64)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    taps.iter().map(|&t| (t / total) as f32).collect()
}

/// Half-width of the window used by [`gaussian_kernel`].
pub fn gaussian_support(sigma: f32) -> usize {
    if sigma <= 0.0 {
        0
    } else {
        (3.0 * sigma).ceil() as usize
    }
}

/// Counts of entries satisfying a predicate, with cyclic window queries.
struct CyclicCounts {
    prefix: Vec<u32>,
}

impl CyclicCounts {
    fn new(row: &[f32], pred: impl Fn(f32) -> bool) -> Self {
        let mut prefix = Vec::with_capacity(row.len() + 1);
        prefix.push(0);
        let mut acc = 0;
        for &v in row {
            acc += pred(v) as u32;
            prefix.push(acc);
        }
        Self { prefix }
    }

    fn total(&self) -> u32 {
        *self.prefix.last().unwrap()
    }

    /// Count in the cyclic window `[x - r, x + r]`, `2r + 1 <= len`.
    fn window(&self, x: usize, r: usize) -> u32 {
        let n = self.prefix.len() - 1;
        let lo = x as isize - r as isize;
        let hi = x + r + 1;
        let mut c = 0;
        if lo < 0 {
            c += self.prefix[n] - self.prefix[(n as isize + lo) as usize];
            c += self.prefix[hi.min(n)];
        } else if hi > n {
            c += self.prefix[n] - self.prefix[lo as usize];
            c += self.prefix[hi - n];
        } else {
            c += self.prefix[hi] - self.prefix[lo as usize];
        }
        c
    }
}

/// Convolves a field with the same symmetric kernel along both axes.
///
/// Windows that are entirely 0 (or entirely 1 in the horizontal pass) are
/// written as that constant without evaluating the taps, which keeps
/// sparse weight maps cheap.
pub fn convolve_separable(field: &ScalarField, kernel: &[f32]) -> ScalarField {
    assert_eq!(field.channels(), 1, "convolve_separable expects one channel");
    assert!(kernel.len() % 2 == 1, "kernel must have odd length");
    let r = kernel.len() / 2;
    if r == 0 {
        return field.map(|v| v * kernel[0]);
    }
    let (w, h) = field.dims();

    // Horizontal, cyclic.
    let mut horiz = ScalarField::filled(w, h, 1, 0.0);
    let mut spans: Vec<Option<(usize, usize)>> = vec![None; h];
    let wide = 2 * r + 1 > w;
    for y in 0..h {
        let src = field.row(y);
        let nonzero = CyclicCounts::new(src, |v| v != 0.0);
        if nonzero.total() == 0 {
            continue;
        }
        let nonone = CyclicCounts::new(src, |v| v != 1.0);
        let dst = horiz.row_mut(y);
        let mut lo = usize::MAX;
        let mut hi = 0;
        for (x, out) in dst.iter_mut().enumerate() {
            let v = if !wide && nonzero.window(x, r) == 0 {
                0.0
            } else if !wide && nonone.window(x, r) == 0 {
                1.0
            } else {
                let mut acc = 0.0f32;
                for (k, &kw) in kernel.iter().enumerate() {
                    let sx = (x + w * (r / w + 1) + k - r) % w;
                    acc += kw * src[sx];
                }
                acc
            };
            if v != 0.0 {
                lo = lo.min(x);
                hi = hi.max(x);
            }
            *out = v;
        }
        if lo <= hi {
            spans[y] = Some((lo, hi + 1));
        }
    }

    // Vertical, clamped. Rows whose span misses a column contribute exact
    // zeros there, so skipping them does not change any sum.
    let mut out = ScalarField::filled(w, h, 1, 0.0);
    for y in 0..h {
        let dst = out.row_mut(y);
        for (k, &kw) in kernel.iter().enumerate() {
            let sy = (y as isize + k as isize - r as isize).clamp(0, h as isize - 1) as usize;
            if let Some((lo, hi)) = spans[sy] {
                let src = &horiz.row(sy)[lo..hi];
                for (o, &s) in dst[lo..hi].iter_mut().zip(src) {
                    *o += kw * s;
                }
            }
        }
    }
    out
}

/// Integer box filter of half-width `radius` (cyclic horizontally, clamped
/// vertically). Returns window sums; integer adds keep it order independent.
pub fn box_sum_u32(values: &[u32], width: usize, height: usize, radius: usize) -> Vec<u64> {
    assert_eq!(values.len(), width * height);
    if radius == 0 {
        return values.iter().map(|&v| v as u64).collect();
    }
    let mut horiz = vec![0u64; width * height];
    let mut prefix = vec![0u64; width + 1];
    for y in 0..height {
        let row = &values[y * width..(y + 1) * width];
        for x in 0..width {
            prefix[x + 1] = prefix[x] + row[x] as u64;
        }
        let total = prefix[width];
        let out = &mut horiz[y * width..(y + 1) * width];
        let span = 2 * radius + 1;
        let full_cycles = (span / width) as u64;
        let rem = span % width;
        for (x, o) in out.iter_mut().enumerate() {
            // Window [x - radius, x - radius + span) taken cyclically.
            let start = (x as isize - radius as isize).rem_euclid(width as isize) as usize;
            let mut s = full_cycles * total;
            if rem > 0 {
                let end = start + rem;
                if end <= width {
                    s += prefix[end] - prefix[start];
                } else {
                    s += total - prefix[start] + prefix[end - width];
                }
            }
            *o = s;
        }
    }
    let mut out = vec![0u64; width * height];
    // Vertical: clamp-to-edge running sums per output row.
    for y in 0..height {
        let dst = &mut out[y * width..(y + 1) * width];
        for dy in -(radius as isize)..=radius as isize {
            let sy = (y as isize + dy).clamp(0, height as isize - 1) as usize;
            for (o, &s) in dst.iter_mut().zip(&horiz[sy * width..(sy + 1) * width]) {
                *o += s;
            }
        }
    }
    out
}

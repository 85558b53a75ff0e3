//! Inpainting masks: construction from semantic labels, Euclidean
//! morphology, distance fields and training-time perturbation.
//!
//! Distances are exact Euclidean distances between pixel centers, with the
//! horizontal axis cyclic.

use std::collections::BTreeSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{BinaryMask, Image, LabelMap, ScalarField};

const DEFAULT_CLASS_SET: &str = include_str!("../data/ade20k_furniture.toml");

/// Semantic classes whose union forms the inpainting mask.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FurnitureClassSet {
    #[serde(default = "default_ontology", alias = "ontology_name")]
    pub ontology: String,
    pub class_ids: BTreeSet<u16>,
}

fn default_ontology() -> String {
    "ADE20K".to_string()
}

impl Default for FurnitureClassSet {
    fn default() -> Self {
        toml::from_str(DEFAULT_CLASS_SET).expect("bundled class set parses")
    }
}

impl FurnitureClassSet {
    pub fn new(ids: impl IntoIterator<Item = u16>) -> Self {
        Self {
            ontology: default_ontology(),
            class_ids: ids.into_iter().collect(),
        }
    }

    /// Loads a class set from a `.toml` or `.json` file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let set: Self = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text)?,
            _ => toml::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
        };
        Ok(set)
    }

    pub fn contains(&self, id: u16) -> bool {
        self.class_ids.contains(&id)
    }
}

/// True exactly where the label is one of `classes`.
pub fn mask_from_labels(labels: &LabelMap, classes: &FurnitureClassSet) -> Result<BinaryMask> {
    if classes.class_ids.is_empty() {
        return Err(Error::param("furniture class set is empty"));
    }
    if labels.channels() != 1 {
        return Err(Error::dim("label map must have one channel"));
    }
    let mut lut = vec![false; u16::MAX as usize + 1];
    for &id in &classes.class_ids {
        lut[id as usize] = true;
    }
    Ok(labels.map(|l| lut[l as usize]))
}

/// Sentinel returned by [`squared_distance_field`] where no target exists.
pub const NO_TARGET: u64 = u64::MAX;

/// Exact squared Euclidean distance from every pixel to the nearest pixel
/// where `target` holds. Two-pass lower-envelope algorithm (Felzenszwalb &
/// Huttenlocher) with the row pass run on a cyclically extended domain.
pub fn squared_distance_field(
    width: usize,
    height: usize,
    target: impl Fn(usize, usize) -> bool,
) -> Vec<u64> {
    // Column pass: squared vertical distance.
    let mut vert = vec![NO_TARGET; width * height];
    for x in 0..width {
        let mut last: Option<usize> = None;
        for y in 0..height {
            if target(x, y) {
                last = Some(y);
            }
            if let Some(l) = last {
                let d = (y - l) as u64;
                vert[y * width + x] = d * d;
            }
        }
        let mut next: Option<usize> = None;
        for y in (0..height).rev() {
            if target(x, y) {
                next = Some(y);
            }
            if let Some(n) = next {
                let d = (n - y) as u64;
                let idx = y * width + x;
                vert[idx] = vert[idx].min(d * d);
            }
        }
    }

    // Row pass on the cyclic domain.
    let mut out = vec![NO_TARGET; width * height];
    let ext = width.div_ceil(2).min(width);
    let span = width + 2 * ext;
    let mut sites: Vec<isize> = Vec::with_capacity(span);
    let mut bounds: Vec<f64> = Vec::with_capacity(span + 1);
    for y in 0..height {
        let row = &vert[y * width..(y + 1) * width];
        let f = |q: isize| row[q.rem_euclid(width as isize) as usize];
        sites.clear();
        bounds.clear();
        for q in -(ext as isize)..(width + ext) as isize {
            let fq = f(q);
            if fq == NO_TARGET {
                continue;
            }
            let fq = fq as f64;
            let qf = q as f64;
            loop {
                match sites.last() {
                    None => {
                        sites.push(q);
                        bounds.push(f64::NEG_INFINITY);
                        break;
                    }
                    Some(&v) => {
                        let vf = v as f64;
                        let s = ((fq + qf * qf) - (f(v) as f64 + vf * vf)) / (2.0 * (qf - vf));
                        if s <= *bounds.last().unwrap() {
                            sites.pop();
                            bounds.pop();
                        } else {
                            sites.push(q);
                            bounds.push(s);
                            break;
                        }
                    }
                }
            }
        }
        if sites.is_empty() {
            continue;
        }
        let dst = &mut out[y * width..(y + 1) * width];
        let mut k = 0;
        for (x, o) in dst.iter_mut().enumerate() {
            let xf = x as f64;
            while k + 1 < sites.len() && bounds[k + 1] < xf {
                k += 1;
            }
            let q = sites[k];
            let dx = (x as isize - q).unsigned_abs() as u64;
            *o = dx * dx + f(q);
        }
    }
    out
}

/// Euclidean distance (pixels) to the nearest set pixel of `mask`;
/// `+inf` everywhere when the mask is empty.
pub fn distance_from_mask(mask: &BinaryMask) -> ScalarField {
    let (w, h) = mask.dims();
    let sq = squared_distance_field(w, h, |x, y| mask.get(x, y, 0));
    let data = sq
        .into_iter()
        .map(|d| {
            if d == NO_TARGET {
                f32::INFINITY
            } else {
                (d as f64).sqrt() as f32
            }
        })
        .collect();
    Image::from_vec(w, h, 1, data).expect("distance field size")
}

/// Distance to the nearest unset pixel (0 outside the mask).
pub fn distance_to_complement(mask: &BinaryMask) -> ScalarField {
    let (w, h) = mask.dims();
    let sq = squared_distance_field(w, h, |x, y| !mask.get(x, y, 0));
    let data = sq
        .into_iter()
        .map(|d| {
            if d == NO_TARGET {
                f32::INFINITY
            } else {
                (d as f64).sqrt() as f32
            }
        })
        .collect();
    Image::from_vec(w, h, 1, data).expect("distance field size")
}

/// Pixels within Euclidean distance `radius` of a set pixel.
pub fn dilate(mask: &BinaryMask, radius: usize) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = mask.dims();
    let r2 = (radius * radius) as u64;
    let sq = squared_distance_field(w, h, |x, y| mask.get(x, y, 0));
    Image::from_vec(w, h, 1, sq.into_iter().map(|d| d <= r2).collect()).expect("mask size")
}

/// Set pixels whose distance to every unset pixel exceeds `radius`.
pub fn erode(mask: &BinaryMask, radius: usize) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = mask.dims();
    let r2 = (radius * radius) as u64;
    let sq = squared_distance_field(w, h, |x, y| !mask.get(x, y, 0));
    Image::from_vec(w, h, 1, sq.into_iter().map(|d| d > r2).collect()).expect("mask size")
}

/// Training-time perturbation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbParams {
    pub seed: u64,
    /// Largest boundary displacement of the smooth jitter field.
    pub max_boundary_jitter: usize,
    pub erode_prob: f64,
    pub dilate_prob: f64,
    /// Largest per-component erosion/dilation radius.
    pub max_radius: usize,
    /// Spacing of the jitter field's control grid.
    pub jitter_cell: usize,
}

impl Default for PerturbParams {
    fn default() -> Self {
        Self {
            seed: 0,
            max_boundary_jitter: 2,
            erode_prob: 0.3,
            dilate_prob: 0.5,
            max_radius: 3,
            jitter_cell: 8,
        }
    }
}

impl PerturbParams {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("erode_prob", self.erode_prob), ("dilate_prob", self.dilate_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::param(format!("{name} = {p} outside [0, 1]")));
            }
        }
        if self.erode_prob + self.dilate_prob > 1.0 + 1e-12 {
            return Err(Error::param("erode_prob + dilate_prob must not exceed 1"));
        }
        if self.jitter_cell == 0 {
            return Err(Error::param("jitter_cell must be at least 1"));
        }
        Ok(())
    }
}

/// 8-connected components (cyclic horizontally), labelled in scan order
/// starting from 1; 0 means background.
pub fn connected_components(mask: &BinaryMask) -> (Vec<u32>, u32) {
    let (w, h) = mask.dims();
    let mut labels = vec![0u32; w * h];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for start in 0..w * h {
        if labels[start] != 0 || !mask.as_slice()[start] {
            continue;
        }
        next += 1;
        labels[start] = next;
        stack.push(start);
        while let Some(idx) = stack.pop() {
            let (x, y) = ((idx % w) as isize, (idx / w) as isize);
            for dy in -1..=1isize {
                let ny = y + dy;
                if ny < 0 || ny >= h as isize {
                    continue;
                }
                for dx in -1..=1isize {
                    let nx = (x + dx).rem_euclid(w as isize);
                    let n = ny as usize * w + nx as usize;
                    if labels[n] == 0 && mask.as_slice()[n] {
                        labels[n] = next;
                        stack.push(n);
                    }
                }
            }
        }
    }
    (labels, next)
}

/// Smooth random field in `[-amplitude, amplitude]`: bilinear interpolation
/// of uniform values on a grid with `cell` spacing (cyclic horizontally).
fn jitter_field(w: usize, h: usize, cell: usize, amplitude: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let gw = w.div_ceil(cell).max(1);
    let gh = h.div_ceil(cell) + 1;
    let grid: Vec<f64> = (0..gw * gh)
        .map(|_| rng.random_range(-amplitude..=amplitude))
        .collect();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let gy = y as f64 / cell as f64;
        let y0 = (gy.floor() as usize).min(gh - 1);
        let y1 = (y0 + 1).min(gh - 1);
        let ty = gy - y0 as f64;
        for x in 0..w {
            let gx = x as f64 / cell as f64;
            let x0 = gx.floor() as usize % gw;
            let x1 = (x0 + 1) % gw;
            let tx = gx - gx.floor();
            let top = grid[y0 * gw + x0] * (1.0 - tx) + grid[y0 * gw + x1] * tx;
            let bot = grid[y1 * gw + x0] * (1.0 - tx) + grid[y1 * gw + x1] * tx;
            out.push(top * (1.0 - ty) + bot * ty);
        }
    }
    out
}

/// Simulates imperfect segmentation.
///
/// Each connected component is independently eroded (with `erode_prob`) or
/// dilated (with `dilate_prob`) by a random radius up to `max_radius`;
/// erosion is capped at a third of the component's inradius so small
/// objects are not deleted. The boundary is then displaced by a smooth
/// random field bounded by `max_boundary_jitter`. Every changed pixel lies
/// within `max_radius + max_boundary_jitter` of a pixel of opposite input
/// value.
pub fn perturb(mask: &BinaryMask, params: &PerturbParams) -> Result<BinaryMask> {
    params.validate()?;
    if params.max_radius == 0 && params.max_boundary_jitter == 0 {
        return Ok(mask.clone());
    }
    let (w, h) = mask.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut stage = mask.clone();

    if params.max_radius > 0 && mask.any() {
        let (labels, count) = connected_components(mask);
        let to_background = squared_distance_field(w, h, |x, y| !mask.get(x, y, 0));
        let mut inradius2 = vec![0u64; count as usize + 1];
        for (i, &l) in labels.iter().enumerate() {
            if l > 0 {
                inradius2[l as usize] = inradius2[l as usize].max(to_background[i]);
            }
        }
        // (erode radius, dilate radius) per component.
        let mut ops = vec![(0usize, 0usize); count as usize + 1];
        for (c, op) in ops.iter_mut().enumerate().skip(1) {
            let u: f64 = rng.random();
            let r = rng.random_range(1..=params.max_radius);
            if u < params.erode_prob {
                let cap = ((inradius2[c] as f64).sqrt() / 3.0).floor() as usize;
                op.0 = r.min(cap);
            } else if u < params.erode_prob + params.dilate_prob {
                op.1 = r;
            }
        }
        for (i, &l) in labels.iter().enumerate() {
            if l > 0 {
                let er = ops[l as usize].0 as u64;
                if er > 0 && to_background[i] <= er * er {
                    stage.as_mut_slice()[i] = false;
                }
            }
        }
        for r in 1..=params.max_radius {
            if !ops.iter().any(|&(_, d)| d == r) {
                continue;
            }
            let sq = squared_distance_field(w, h, |x, y| {
                let l = labels[y * w + x];
                l > 0 && ops[l as usize].1 == r
            });
            let r2 = (r * r) as u64;
            for (i, &d) in sq.iter().enumerate() {
                if d <= r2 {
                    stage.as_mut_slice()[i] = true;
                }
            }
        }
    }

    if params.max_boundary_jitter > 0 && stage.any() {
        let field = jitter_field(
            w,
            h,
            params.jitter_cell,
            params.max_boundary_jitter as f64,
            &mut rng,
        );
        let to_fg = squared_distance_field(w, h, |x, y| stage.get(x, y, 0));
        let to_bg = squared_distance_field(w, h, |x, y| !stage.get(x, y, 0));
        let mut out = stage.clone();
        for (i, o) in out.as_mut_slice().iter_mut().enumerate() {
            let j = field[i];
            if *o {
                if j < 0.0 && to_bg[i] != NO_TARGET && to_bg[i] as f64 <= j * j {
                    *o = false;
                }
            } else if j > 0.0 && (to_fg[i] as f64) <= j * j {
                *o = true;
            }
        }
        stage = out;
    }
    Ok(stage)
}

/// Intersection over union; two empty masks score 1.
pub fn iou(a: &BinaryMask, b: &BinaryMask) -> f64 {
    let mut inter = 0usize;
    let mut union = 0usize;
    for (&x, &y) in a.as_slice().iter().zip(b.as_slice()) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_distance(mask: &BinaryMask, x: usize, y: usize) -> f64 {
        let w = mask.width() as isize;
        let mut best = f64::INFINITY;
        for qy in 0..mask.height() {
            for qx in 0..mask.width() {
                if mask.get(qx, qy, 0) {
                    let dx = (x as isize - qx as isize).rem_euclid(w);
                    let dx = dx.min(w - dx) as f64;
                    let dy = y as f64 - qy as f64;
                    best = best.min((dx * dx + dy * dy).sqrt());
                }
            }
        }
        best
    }

    fn random_mask(w: usize, h: usize, bits: &[bool], density: usize) -> BinaryMask {
        Image::from_fn(w, h, 1, |x, y, _| {
            bits[(y * w + x) % bits.len()] && (x * 5 + y * 3) % density == 0
        })
    }

    #[test]
    fn labels_to_mask() {
        let labels = Image::from_vec(4, 1, 1, vec![3u16, 7, 7, 3]).unwrap();
        let m = mask_from_labels(&labels, &FurnitureClassSet::new([7])).unwrap();
        assert_eq!(m.as_slice(), &[false, true, true, false]);
        let all = mask_from_labels(&labels, &FurnitureClassSet::new([3, 7])).unwrap();
        assert!(all.as_slice().iter().all(|&b| b));
        let none = mask_from_labels(&labels, &FurnitureClassSet::new([1])).unwrap();
        assert!(!none.any());
        assert!(mask_from_labels(&labels, &FurnitureClassSet::new([])).is_err());
    }

    #[test]
    fn bundled_class_set_loads() {
        let set = FurnitureClassSet::default();
        assert_eq!(set.ontology, "ADE20K");
        assert!(set.contains(8) && set.contains(24) && set.contains(98));
        assert!(!set.contains(1) && !set.contains(4));
    }

    #[test]
    fn class_set_from_json_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("classes.json");
        std::fs::write(&path, r#"{"ontology_name": "custom", "class_ids": [5, 9]}"#).unwrap();
        let set = FurnitureClassSet::load(&path).unwrap();
        assert_eq!(set.ontology, "custom");
        assert_eq!(set.class_ids.len(), 2);
    }

    #[test]
    fn dilate_single_pixel_is_cross() {
        let mut m = Image::filled(5, 5, 1, false);
        m.set(2, 2, 0, true);
        let d = dilate(&m, 1);
        let expected: Vec<(usize, usize)> = vec![(2, 1), (1, 2), (2, 2), (3, 2), (2, 3)];
        for y in 0..5 {
            for x in 0..5 {
                assert_eq!(d.get(x, y, 0), expected.contains(&(x, y)), "({x},{y})");
            }
        }
        assert_eq!(dilate(&m, 0), m);
    }

    #[test]
    fn dilate_wraps_horizontally() {
        let mut m = Image::filled(10, 5, 1, false);
        m.set(9, 2, 0, true);
        let d = dilate(&m, 2);
        assert!(d.get(0, 2, 0) && d.get(1, 2, 0));
        assert!(!d.get(2, 2, 0));
    }

    #[test]
    fn distance_basics() {
        let mut m = Image::filled(7, 7, 1, false);
        m.set(3, 3, 0, true);
        let d = distance_from_mask(&m);
        assert_eq!(d.get(3, 3, 0), 0.0);
        assert_eq!(d.get(3, 4, 0), 1.0);
        assert_eq!(d.get(4, 3, 0), 1.0);
        let empty = distance_from_mask(&Image::filled(4, 4, 1, false));
        assert!(empty.as_slice().iter().all(|v| v.is_infinite()));
    }

    #[test]
    fn distance_matches_brute_force_on_16x16() {
        let mut state = 0x9e3779b97f4a7c15u64;
        for _ in 0..50 {
            let mask = Image::from_fn(16, 16, 1, |_, _, _| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                state % 11 == 0
            });
            let d = distance_from_mask(&mask);
            for y in 0..16 {
                for x in 0..16 {
                    let b = brute_distance(&mask, x, y);
                    let f = d.get(x, y, 0) as f64;
                    if b.is_infinite() {
                        assert!(f.is_infinite());
                    } else {
                        assert!((f - b).abs() < 1e-6, "({x},{y}) {f} vs {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn perturb_identity_and_determinism() {
        let mask = Image::from_fn(48, 32, 1, |x, y, _| (10..30).contains(&x) && (8..20).contains(&y));
        let zero = PerturbParams {
            max_radius: 0,
            max_boundary_jitter: 0,
            ..PerturbParams::default()
        };
        assert_eq!(perturb(&mask, &zero).unwrap(), mask);
        let p = PerturbParams {
            seed: 17,
            ..PerturbParams::default()
        };
        assert_eq!(perturb(&mask, &p).unwrap(), perturb(&mask, &p).unwrap());
        let bad = PerturbParams {
            erode_prob: 1.5,
            ..PerturbParams::default()
        };
        assert!(perturb(&mask, &bad).is_err());
    }

    #[test]
    fn erode_is_dual_of_dilate() {
        let mask = Image::from_fn(20, 12, 1, |x, y, _| (x + 2 * y) % 7 < 4);
        let inv = mask.map(|b| !b);
        assert_eq!(erode(&mask, 2), dilate(&inv, 2).map(|b| !b));
    }

    proptest! {
        #[test]
        fn label_union_distributes(ids in proptest::collection::vec(0u16..6, 64), a in proptest::collection::btree_set(0u16..6, 1..4), b in proptest::collection::btree_set(0u16..6, 1..4)) {
            let labels = Image::from_vec(8, 8, 1, ids).unwrap();
            let sa = FurnitureClassSet::new(a.iter().copied());
            let sb = FurnitureClassSet::new(b.iter().copied());
            let sab = FurnitureClassSet::new(a.union(&b).copied());
            let lhs = mask_from_labels(&labels, &sab).unwrap();
            let rhs = mask_from_labels(&labels, &sa).unwrap().union(&mask_from_labels(&labels, &sb).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn dilation_composes(bits in proptest::collection::vec(any::<bool>(), 96), r1 in 0usize..4, r2 in 0usize..4) {
            let m = random_mask(24, 14, &bits, 5);
            let once = dilate(&m, r1 + r2);
            let twice = dilate(&dilate(&m, r1), r2);
            prop_assert!(twice.is_subset_of(&once));
        }

        #[test]
        fn distance_of_dilation(bits in proptest::collection::vec(any::<bool>(), 96), r in 0usize..5) {
            let m = random_mask(24, 14, &bits, 7);
            prop_assume!(m.any());
            let d0 = distance_from_mask(&m);
            let dr = distance_from_mask(&dilate(&m, r));
            for (a, b) in d0.as_slice().iter().zip(dr.as_slice()) {
                let expect = (a - r as f32).max(0.0);
                prop_assert!((b - expect).abs() <= 1.0, "{} vs {}", b, expect);
            }
        }

        #[test]
        fn perturb_changes_stay_near_boundary(bits in proptest::collection::vec(any::<bool>(), 128), seed in any::<u64>(), jitter in 0usize..3, radius in 0usize..4) {
            let m = dilate(&random_mask(40, 24, &bits, 9), 2);
            let p = PerturbParams { seed, max_boundary_jitter: jitter, max_radius: radius, ..PerturbParams::default() };
            let out = perturb(&m, &p).unwrap();
            let to_fg = distance_from_mask(&m);
            let to_bg = distance_to_complement(&m);
            let bound = (radius + jitter) as f32 + 1e-4;
            for i in 0..m.pixel_count() {
                let before = m.as_slice()[i];
                if out.as_slice()[i] != before {
                    let d = if before { to_bg.as_slice()[i] } else { to_fg.as_slice()[i] };
                    prop_assert!(d <= bound, "pixel {} changed at distance {}", i, d);
                }
            }
        }
    }
}

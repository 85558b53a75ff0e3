use super::pixel_direction;
use super::scene::ScenePlacement;
use crate::filter::box_sum_u32;
use crate::image::{BinaryMask, EquirectPanorama, Image};

/// Output of [`render_composite`].
#[derive(Debug, Clone, PartialEq)]
pub struct Composite {
    pub furnished: EquirectPanorama,
    /// Pixels whose center ray hits an object.
    pub object_mask: BinaryMask,
    /// Object pixels plus every pixel the shadow changed.
    pub support: BinaryMask,
}

/// Draws the placement's objects and blob shadows over `empty`.
pub fn render_composite(empty: &EquirectPanorama, placement: &ScenePlacement) -> Composite {
    let (w, h) = empty.dims();
    let ch = empty.channels();
    let mut furnished = empty.clone();
    let mut object_mask = Image::filled(w, h, 1, false);
    if placement.objects.is_empty() {
        return Composite {
            furnished,
            support: object_mask.clone(),
            object_mask,
        };
    }
    let eye = [0.0, placement.camera_height, 0.0];
    let light = placement.light_vector();
    let dir = placement.shadow_direction();
    let length = placement
        .objects
        .iter()
        .map(|o| o.size.1 / placement.light_elevation.tan())
        .collect::<Vec<_>>();

    let mut hard_shadow = vec![0u32; w * h];
    let mut floor = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let d = pixel_direction(x as f64 + 0.5, y as f64 + 0.5, w, h);
            let nearest = placement
                .objects
                .iter()
                .enumerate()
                .filter_map(|(i, o)| o.intersect(eye, d).map(|hit| (i, hit)))
                .min_by(|a, b| a.1.t.total_cmp(&b.1.t));
            let i = y * w + x;
            if let Some((k, hit)) = nearest {
                let obj = &placement.objects[k];
                let n = hit.normal;
                let lambert = (n[0] * light[0] + n[1] * light[1] + n[2] * light[2]).max(0.0);
                let gradient = 0.75 + 0.25 * (hit.y / obj.size.1).clamp(0.0, 1.0);
                let shade = (0.35 + 0.65 * lambert) * gradient;
                let px = furnished.pixel_mut(x, y);
                for c in 0..ch {
                    let a = if ch == 3 {
                        obj.albedo[c]
                    } else {
                        (obj.albedo[0] + obj.albedo[1] + obj.albedo[2]) / 3.0
                    };
                    px[c] = (a * shade * 255.0).round().clamp(0.0, 255.0) as u8;
                }
                object_mask.set(x, y, 0, true);
            } else if d[1] < 0.0 {
                floor[i] = true;
                let t = placement.camera_height / -d[1];
                let (fx, fz) = (t * d[0], t * d[2]);
                let shadowed = placement
                    .objects
                    .iter()
                    .zip(&length)
                    .any(|(o, &len)| o.swept_footprint_contains(fx, fz, dir, len));
                hard_shadow[i] = shadowed as u32;
            }
        }
    }

    let mut support = object_mask.clone();
    if placement.shadow_opacity > 0.0 {
        let r = placement.shadow_softness.round().max(0.0) as usize;
        let sums = box_sum_u32(&hard_shadow, w, h, r);
        let n = ((2 * r + 1) * (2 * r + 1)) as f64;
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if !floor[i] || sums[i] == 0 {
                    continue;
                }
                let factor = 1.0 - placement.shadow_opacity * (sums[i] as f64 / n);
                let px = furnished.pixel_mut(x, y);
                let mut changed = false;
                for v in px.iter_mut() {
                    let nv = (*v as f64 * factor).round() as u8;
                    changed |= nv != *v;
                    *v = nv;
                }
                if changed {
                    support.set(x, y, 0, true);
                }
            }
        }
    }
    Composite {
        furnished,
        object_mask,
        support,
    }
}

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SynthConfig;
use crate::error::{Error, Result};
use crate::image::EquirectPanorama;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Box,
    Ellipsoid,
    Cylinder,
}

/// One primitive standing on the floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObjectSpec {
    pub shape: Shape,
    /// `(azimuth radians, horizontal distance meters)` of the footprint center;
    /// azimuth 0 is the panorama's center column.
    pub floor_position: (f64, f64),
    /// `(width along x, height, depth along z)` in meters.
    pub size: (f64, f64, f64),
    pub albedo: [f64; 3],
    pub seed: u64,
}

pub(crate) struct Hit {
    pub t: f64,
    pub normal: [f64; 3],
    pub y: f64,
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = dot(v, v).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

impl SceneObjectSpec {
    pub fn validate(&self) -> Result<()> {
        let (w, h, d) = self.size;
        if !(w > 0.0 && h > 0.0 && d > 0.0) {
            return Err(Error::param(format!("object size {:?} must be positive", self.size)));
        }
        if !(self.floor_position.1 > 0.0) {
            return Err(Error::param("object distance must be positive"));
        }
        Ok(())
    }

    /// Footprint center in world `(x, z)`.
    pub fn center(&self) -> (f64, f64) {
        let (a, r) = self.floor_position;
        (r * a.sin(), r * a.cos())
    }

    /// Radius of a circle around the center that contains the footprint.
    pub fn bounding_radius(&self) -> f64 {
        let (hw, hd) = (self.size.0 / 2.0, self.size.2 / 2.0);
        match self.shape {
            Shape::Box => (hw * hw + hd * hd).sqrt(),
            Shape::Ellipsoid | Shape::Cylinder => hw.max(hd),
        }
    }

    pub fn footprint_contains(&self, x: f64, z: f64) -> bool {
        self.swept_footprint_contains(x, z, (0.0, 0.0), 0.0)
    }

    /// Whether `(x, z)` lies in the footprint swept along `dir` (unit) for
    /// `length` meters.
    pub fn swept_footprint_contains(&self, x: f64, z: f64, dir: (f64, f64), length: f64) -> bool {
        let (cx, cz) = self.center();
        let (hw, hd) = (self.size.0 / 2.0, self.size.2 / 2.0);
        let (px, pz) = (x - cx, z - cz);
        match self.shape {
            Shape::Box => {
                // Feasible sweep parameters s in [0, length] per axis.
                let mut lo = 0.0f64;
                let mut hi = length;
                for (p, dv, half) in [(px, dir.0, hw), (pz, dir.1, hd)] {
                    if dv.abs() < 1e-12 {
                        if p.abs() > half {
                            return false;
                        }
                    } else {
                        let a = (p - half) / dv;
                        let b = (p + half) / dv;
                        lo = lo.max(a.min(b));
                        hi = hi.min(a.max(b));
                    }
                }
                lo <= hi
            }
            Shape::Ellipsoid | Shape::Cylinder => {
                // Unit-circle space; distance from point to the swept segment.
                let (qx, qz) = (px / hw, pz / hd);
                let (sx, sz) = (dir.0 * length / hw, dir.1 * length / hd);
                let len2 = sx * sx + sz * sz;
                let s = if len2 > 0.0 {
                    ((qx * sx + qz * sz) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let (ex, ez) = (qx - s * sx, qz - s * sz);
                ex * ex + ez * ez <= 1.0
            }
        }
    }

    /// First intersection of the ray `o + t d`, `t > 0`.
    pub(crate) fn intersect(&self, o: [f64; 3], d: [f64; 3]) -> Option<Hit> {
        let (cx, cz) = self.center();
        let (w, h, dep) = self.size;
        match self.shape {
            Shape::Box => {
                let lo = [cx - w / 2.0, 0.0, cz - dep / 2.0];
                let hi = [cx + w / 2.0, h, cz + dep / 2.0];
                let mut tmin = f64::NEG_INFINITY;
                let mut tmax = f64::INFINITY;
                let mut normal = [0.0; 3];
                for i in 0..3 {
                    if d[i].abs() < 1e-12 {
                        if o[i] < lo[i] || o[i] > hi[i] {
                            return None;
                        }
                        continue;
                    }
                    let t1 = (lo[i] - o[i]) / d[i];
                    let t2 = (hi[i] - o[i]) / d[i];
                    let (near, far, sign) = if t1 < t2 { (t1, t2, -1.0) } else { (t2, t1, 1.0) };
                    if near > tmin {
                        tmin = near;
                        normal = [0.0; 3];
                        normal[i] = sign;
                    }
                    tmax = tmax.min(far);
                }
                (tmin > 0.0 && tmin <= tmax).then(|| Hit {
                    t: tmin,
                    normal,
                    y: o[1] + tmin * d[1],
                })
            }
            Shape::Ellipsoid => {
                let c = [cx, h / 2.0, cz];
                let r = [w / 2.0, h / 2.0, dep / 2.0];
                let oc = [(o[0] - c[0]) / r[0], (o[1] - c[1]) / r[1], (o[2] - c[2]) / r[2]];
                let dd = [d[0] / r[0], d[1] / r[1], d[2] / r[2]];
                let a = dot(dd, dd);
                let b = 2.0 * dot(oc, dd);
                let cc = dot(oc, oc) - 1.0;
                let disc = b * b - 4.0 * a * cc;
                if disc < 0.0 {
                    return None;
                }
                let t = (-b - disc.sqrt()) / (2.0 * a);
                if t <= 0.0 {
                    return None;
                }
                let p = [o[0] + t * d[0], o[1] + t * d[1], o[2] + t * d[2]];
                let n = [
                    (p[0] - c[0]) / (r[0] * r[0]),
                    (p[1] - c[1]) / (r[1] * r[1]),
                    (p[2] - c[2]) / (r[2] * r[2]),
                ];
                Some(Hit {
                    t,
                    normal: normalize(n),
                    y: p[1],
                })
            }
            Shape::Cylinder => {
                let (rx, rz) = (w / 2.0, dep / 2.0);
                let inside = |x: f64, z: f64| {
                    let (u, v) = ((x - cx) / rx, (z - cz) / rz);
                    u * u + v * v <= 1.0
                };
                let mut best: Option<Hit> = None;
                let mut offer = |hit: Hit| {
                    if best.as_ref().is_none_or(|b| hit.t < b.t) {
                        best = Some(hit);
                    }
                };
                let (ox, oz) = ((o[0] - cx) / rx, (o[2] - cz) / rz);
                let (dx, dz) = (d[0] / rx, d[2] / rz);
                let a = dx * dx + dz * dz;
                if a > 0.0 {
                    let b = 2.0 * (ox * dx + oz * dz);
                    let c = ox * ox + oz * oz - 1.0;
                    let disc = b * b - 4.0 * a * c;
                    if disc >= 0.0 {
                        let t = (-b - disc.sqrt()) / (2.0 * a);
                        let y = o[1] + t * d[1];
                        if t > 0.0 && (0.0..=h).contains(&y) {
                            let p = [o[0] + t * d[0], o[2] + t * d[2]];
                            let n = [(p[0] - cx) / (rx * rx), 0.0, (p[1] - cz) / (rz * rz)];
                            offer(Hit {
                                t,
                                normal: normalize(n),
                                y,
                            });
                        }
                    }
                }
                if d[1].abs() > 1e-12 {
                    for (plane, ny) in [(h, 1.0), (0.0, -1.0)] {
                        let t = (plane - o[1]) / d[1];
                        if t > 0.0 && inside(o[0] + t * d[0], o[2] + t * d[2]) {
                            offer(Hit {
                                t,
                                normal: [0.0, ny, 0.0],
                                y: plane,
                            });
                        }
                    }
                }
                best
            }
        }
    }
}

/// Objects plus lighting for one composite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenePlacement {
    pub objects: Vec<SceneObjectSpec>,
    pub camera_height: f64,
    /// Direction towards the light, same convention as object azimuths.
    pub light_azimuth: f64,
    /// Light elevation in radians; sets shadow length and shading.
    pub light_elevation: f64,
    /// Box-blur half-width of the shadow, pixels.
    pub shadow_softness: f64,
    pub shadow_opacity: f64,
}

impl ScenePlacement {
    pub fn validate(&self) -> Result<()> {
        for o in &self.objects {
            o.validate()?;
        }
        if !(0.0..=1.0).contains(&self.shadow_opacity) {
            return Err(Error::param("shadow opacity outside [0, 1]"));
        }
        if !(self.camera_height > 0.0) {
            return Err(Error::param("camera height must be positive"));
        }
        if !(self.light_elevation > 0.0 && self.light_elevation < PI / 2.0) {
            return Err(Error::param("light elevation must lie in (0, pi/2)"));
        }
        Ok(())
    }

    /// Horizontal unit direction in which shadows are cast.
    pub fn shadow_direction(&self) -> (f64, f64) {
        (-self.light_azimuth.sin(), -self.light_azimuth.cos())
    }

    /// Unit vector towards the light.
    pub(crate) fn light_vector(&self) -> [f64; 3] {
        let (a, e) = (self.light_azimuth, self.light_elevation);
        [e.cos() * a.sin(), e.sin(), e.cos() * a.cos()]
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Samples non-overlapping primitives on the floor around the camera.
pub fn place_objects(
    empty: &EquirectPanorama,
    config: &SynthConfig,
    seed: u64,
) -> Result<ScenePlacement> {
    config.validate()?;
    if empty.width() < 2 || empty.height() < 2 {
        return Err(Error::dim("empty panorama is too small"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = config.object_count;
    let count = rng.random_range(lo..=hi);
    let mut objects: Vec<SceneObjectSpec> = Vec::with_capacity(count);
    for index in 0..count {
        let mut placed = None;
        for _ in 0..config.placement_retries.max(1) {
            let shape = match rng.random_range(0..3) {
                0 => Shape::Box,
                1 => Shape::Ellipsoid,
                _ => Shape::Cylinder,
            };
            let candidate = SceneObjectSpec {
                shape,
                floor_position: (
                    rng.random_range(-PI..PI),
                    uniform(&mut rng, config.distance_range),
                ),
                size: (
                    uniform(&mut rng, config.width_range),
                    uniform(&mut rng, config.height_range),
                    uniform(&mut rng, config.depth_range),
                ),
                albedo: [
                    rng.random_range(0.12..0.9),
                    rng.random_range(0.12..0.9),
                    rng.random_range(0.12..0.9),
                ],
                seed: rng.random(),
            };
            let radius = candidate.bounding_radius();
            if candidate.floor_position.1 - radius < config.min_clearance {
                continue;
            }
            let (cx, cz) = candidate.center();
            let clear = objects.iter().all(|o| {
                let (ox, oz) = o.center();
                let gap = ((cx - ox).powi(2) + (cz - oz).powi(2)).sqrt();
                gap >= radius + o.bounding_radius() + config.footprint_margin
            });
            if clear {
                placed = Some(candidate);
                break;
            }
        }
        match placed {
            Some(o) => objects.push(o),
            None => {
                return Err(Error::Placement(format!(
                    "could not place object {} of {count} without overlap after {} attempts \
                     (distance range {:?}, clearance {} m)",
                    index + 1,
                    config.placement_retries,
                    config.distance_range,
                    config.min_clearance
                )))
            }
        }
    }
    let placement = ScenePlacement {
        objects,
        camera_height: config.camera_height,
        light_azimuth: rng.random_range(-PI..PI),
        light_elevation: uniform(&mut rng, config.light_elevation_deg).to_radians(),
        shadow_softness: uniform(&mut rng, config.shadow_softness),
        shadow_opacity: uniform(&mut rng, config.shadow_opacity),
    };
    placement.validate()?;
    Ok(placement)
}

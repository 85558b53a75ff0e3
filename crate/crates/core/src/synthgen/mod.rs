//! Synthetic furnished panoramas with ground truth.
//!
//! Procedural primitives (boxes, ellipsoids, cylinders) stand on a single
//! horizontal floor below the camera and cast blurred directional blob
//! shadows. Walls do not occlude objects. Everything is a pure function of
//! the inputs and the seed.

mod dataset;
mod render;
mod room;
mod scene;

pub use dataset::{
    config_hash, generate_dataset, make_eval_case, make_training_triple, read_manifest,
    regenerate, write_manifest, CaseKind, EmptySource, EvalCase, GeneratedCase, ManifestRecord,
    TrainingTriple,
};
pub use render::{render_composite, Composite};
pub use room::procedural_room;
pub use scene::{place_objects, ScenePlacement, SceneObjectSpec, Shape};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maskops::PerturbParams;

/// Generator parameters. Ranges are `(min, max)` and sampled uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Width of procedural empty rooms; height is half of it.
    pub width: usize,
    pub camera_height: f64,
    pub object_count: (usize, usize),
    /// Horizontal camera-to-object-center distance, meters.
    pub distance_range: (f64, f64),
    pub width_range: (f64, f64),
    pub height_range: (f64, f64),
    pub depth_range: (f64, f64),
    /// Smallest horizontal gap between the camera and any footprint.
    pub min_clearance: f64,
    /// Smallest gap between two footprints.
    pub footprint_margin: f64,
    pub light_elevation_deg: (f64, f64),
    pub shadow_softness: (f64, f64),
    pub shadow_opacity: (f64, f64),
    pub placement_retries: usize,
    /// Mask perturbation for training triples; `None` keeps silhouettes.
    pub perturb: Option<PerturbParams>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            width: 1024,
            camera_height: 1.5,
            object_count: (1, 3),
            distance_range: (1.8, 3.2),
            width_range: (0.4, 1.2),
            height_range: (0.3, 1.0),
            depth_range: (0.4, 1.2),
            min_clearance: 0.8,
            footprint_margin: 0.1,
            light_elevation_deg: (35.0, 65.0),
            shadow_softness: (2.0, 6.0),
            shadow_opacity: (0.35, 0.7),
            placement_retries: 500,
            perturb: Some(PerturbParams::default()),
        }
    }
}

fn check_range(name: &str, (lo, hi): (f64, f64), min: f64) -> Result<()> {
    if !(lo >= min && lo <= hi && hi.is_finite()) {
        return Err(Error::param(format!("{name} range ({lo}, {hi}) is invalid")));
    }
    Ok(())
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width < 8 || self.width % 2 != 0 {
            return Err(Error::param(format!("room width {} must be even and >= 8", self.width)));
        }
        if !(self.camera_height > 0.0) {
            return Err(Error::param("camera_height must be positive"));
        }
        if self.object_count.0 > self.object_count.1 {
            return Err(Error::param("object_count min exceeds max"));
        }
        check_range("distance", self.distance_range, f64::MIN_POSITIVE)?;
        check_range("width", self.width_range, f64::MIN_POSITIVE)?;
        check_range("height", self.height_range, f64::MIN_POSITIVE)?;
        check_range("depth", self.depth_range, f64::MIN_POSITIVE)?;
        check_range("light elevation", self.light_elevation_deg, 1.0)?;
        if self.light_elevation_deg.1 > 89.0 {
            return Err(Error::param("light elevation must stay below 89 degrees"));
        }
        check_range("shadow softness", self.shadow_softness, 0.0)?;
        check_range("shadow opacity", self.shadow_opacity, 0.0)?;
        if self.shadow_opacity.1 > 1.0 {
            return Err(Error::param("shadow opacity must be at most 1"));
        }
        if !(self.min_clearance >= 0.0 && self.footprint_margin >= 0.0) {
            return Err(Error::param("clearance and margin must be non-negative"));
        }
        if let Some(p) = &self.perturb {
            p.validate()?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.into(),
            source: e,
        })?;
        let cfg: Self = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Decorrelates derived seeds (splitmix64 finalizer).
pub(crate) fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Unit view direction (x right, y up, z forward) through a continuous
/// pixel position.
pub(crate) fn pixel_direction(px: f64, py: f64, width: usize, height: usize) -> [f64; 3] {
    use std::f64::consts::{FRAC_PI_2, PI, TAU};
    let lon = px / width as f64 * TAU - PI;
    let lat = FRAC_PI_2 - py / height as f64 * PI;
    [lat.cos() * lon.sin(), lat.sin(), lat.cos() * lon.cos()]
}

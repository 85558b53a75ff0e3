//! Furniture removal for equirectangular indoor panoramas.

pub mod backend;
pub mod blend;
pub mod context;
pub mod error;
pub mod filter;
pub mod image;
pub mod io;
pub mod maskops;
pub mod metrics;
pub mod pano;
pub mod pipeline;
pub mod prompts;
pub mod resample;
pub mod synthgen;

pub use error::{Error, Result};
pub use image::{BinaryMask, EquirectPanorama, FloatImage, Image, LabelMap, Sample, ScalarField};

//! Wire protocol and clients for the inpainting / superresolution service.
//!
//! `POST /v1/inpaint` takes multipart parts `image` (RGB PNG), `mask`
//! (1-channel PNG) and `params` (JSON [`InpaintParams`]); `POST /v1/superres`
//! takes `image` and `params` (JSON [`SuperresParams`]). Success returns the
//! PNG with `X-Backend-Name` and `X-Elapsed-Ms` headers; failures return a
//! JSON [`ErrorBody`].

mod http;
mod mock;
pub mod multipart;
mod server;

pub use http::{BackendEndpoint, HttpBackend, ENDPOINT_ENV};
pub use mock::{MockBackend, MockMode, OracleTargets};
pub use server::{serve_mock, MockServerHandle};

use std::io::Cursor;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{BinaryMask, EquirectPanorama};
use crate::io::{decode_png, encode_mask_png, encode_png};
use crate::prompts::INFERENCE_PROMPT;

pub const INPAINT_PATH: &str = "/v1/inpaint";
pub const SUPERRES_PATH: &str = "/v1/superres";
pub const HEADER_BACKEND_NAME: &str = "x-backend-name";
pub const HEADER_ELAPSED_MS: &str = "x-elapsed-ms";
/// Working images must have both sides divisible by this.
pub const SIZE_MULTIPLE: u32 = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InpaintParams {
    pub prompt: String,
    pub seed: u64,
    pub num_steps: u32,
    /// Fraction of pure noise in the initial latent; the rest is the
    /// encoded input.
    pub noise_mix: f32,
    pub request_id: String,
    /// Classifier-free guidance; the backend picks its own default.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub guidance: Option<f32>,
}

impl Default for InpaintParams {
    fn default() -> Self {
        Self {
            prompt: INFERENCE_PROMPT.to_string(),
            seed: 0,
            num_steps: 10,
            noise_mix: 0.97,
            request_id: String::new(),
            guidance: None,
        }
    }
}

impl InpaintParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.noise_mix) {
            return Err(Error::Validation(format!(
                "noise_mix {} outside [0, 1]",
                self.noise_mix
            )));
        }
        if self.num_steps < 1 {
            return Err(Error::Validation("num_steps must be at least 1".into()));
        }
        if let Some(g) = self.guidance {
            if !g.is_finite() {
                return Err(Error::Validation("guidance must be finite".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuperresParams {
    pub scale: u32,
    pub request_id: String,
}

impl Default for SuperresParams {
    fn default() -> Self {
        Self {
            scale: 4,
            request_id: String::new(),
        }
    }
}

impl SuperresParams {
    pub fn validate(&self) -> Result<()> {
        if self.scale != 2 && self.scale != 4 {
            return Err(Error::Validation(format!(
                "superresolution scale {} is not 2 or 4",
                self.scale
            )));
        }
        Ok(())
    }
}

/// Width and height from a PNG header.
pub fn png_dimensions(bytes: &[u8]) -> Result<(u32, u32)> {
    let reader = image::ImageReader::with_format(Cursor::new(bytes), image::ImageFormat::Png);
    Ok(reader.into_dimensions()?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InpaintRequest {
    pub image: Vec<u8>,
    pub mask: Vec<u8>,
    pub params: InpaintParams,
}

impl InpaintRequest {
    pub fn new(image: &EquirectPanorama, mask: &BinaryMask, params: InpaintParams) -> Result<Self> {
        if image.channels() != 3 {
            return Err(Error::Validation("inpainting input must be RGB".into()));
        }
        Ok(Self {
            image: encode_png(image)?,
            mask: encode_mask_png(mask)?,
            params,
        })
    }

    /// Checks the protocol invariants without decoding pixel data.
    pub fn validate(&self) -> Result<(u32, u32)> {
        self.params.validate()?;
        let (iw, ih) = png_dimensions(&self.image)
            .map_err(|e| Error::Validation(format!("image part: {e}")))?;
        let (mw, mh) = png_dimensions(&self.mask)
            .map_err(|e| Error::Validation(format!("mask part: {e}")))?;
        if (iw, ih) != (mw, mh) {
            return Err(Error::Validation(format!(
                "mask {mw}x{mh} does not match image {iw}x{ih}"
            )));
        }
        if iw == 0 || ih == 0 || iw % SIZE_MULTIPLE != 0 || ih % SIZE_MULTIPLE != 0 {
            return Err(Error::Validation(format!(
                "image {iw}x{ih} is not a multiple of {SIZE_MULTIPLE}"
            )));
        }
        Ok((iw, ih))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuperresRequest {
    pub image: Vec<u8>,
    pub params: SuperresParams,
}

impl SuperresRequest {
    pub fn new(image: &EquirectPanorama, params: SuperresParams) -> Result<Self> {
        Ok(Self {
            image: encode_png(image)?,
            params,
        })
    }

    pub fn validate(&self) -> Result<(u32, u32)> {
        self.params.validate()?;
        png_dimensions(&self.image).map_err(|e| Error::Validation(format!("image part: {e}")))
    }
}

/// PNG result of either operation.
#[derive(Debug, Clone, PartialEq)]
pub struct BackendResponse {
    pub image: Vec<u8>,
    pub backend_name: String,
    pub elapsed_ms: u64,
}

impl BackendResponse {
    pub fn decode(&self) -> Result<EquirectPanorama> {
        decode_png(&self.image)
    }

    /// Protocol check on the returned size.
    pub fn expect_dimensions(&self, width: u32, height: u32) -> Result<()> {
        let got = png_dimensions(&self.image)
            .map_err(|e| Error::Protocol(format!("response is not a PNG: {e}")))?;
        if got != (width, height) {
            return Err(Error::Protocol(format!(
                "backend returned {}x{}, expected {width}x{height}",
                got.0, got.1
            )));
        }
        Ok(())
    }
}

/// Structured error body returned with every non-2xx status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    pub request_id: Option<String>,
}

/// An inpainting + superresolution service.
pub trait Backend: Send + Sync {
    fn name(&self) -> &str;
    fn inpaint(&self, req: &InpaintRequest) -> Result<BackendResponse>;
    fn superresolve(&self, req: &SuperresRequest) -> Result<BackendResponse>;
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn inpaint(&self, req: &InpaintRequest) -> Result<BackendResponse> {
        (**self).inpaint(req)
    }
    fn superresolve(&self, req: &SuperresRequest) -> Result<BackendResponse> {
        (**self).superresolve(req)
    }
}

impl<B: Backend + ?Sized> Backend for std::sync::Arc<B> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn inpaint(&self, req: &InpaintRequest) -> Result<BackendResponse> {
        (**self).inpaint(req)
    }
    fn superresolve(&self, req: &SuperresRequest) -> Result<BackendResponse> {
        (**self).superresolve(req)
    }
}

/// Opens a backend from a spec string: `mock:<mode>` runs a mock in
/// process (see [`MockMode`]), anything else is an HTTP base URL.
pub fn open_backend(spec: &str, endpoint: &BackendEndpoint) -> Result<Box<dyn Backend>> {
    if let Some(mode) = spec.strip_prefix("mock:") {
        Ok(Box::new(MockBackend::new(mode.parse()?)))
    } else {
        let ep = BackendEndpoint {
            base_url: spec.to_string(),
            ..endpoint.clone()
        };
        Ok(Box::new(HttpBackend::new(ep)?))
    }
}

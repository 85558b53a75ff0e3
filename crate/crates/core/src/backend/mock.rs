use std::collections::HashMap;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::{Arc, RwLock};
use std::time::Instant;

use super::{Backend, BackendResponse, ErrorBody, InpaintRequest, SuperresRequest};
use crate::error::{Error, Result};
use crate::image::EquirectPanorama;
use crate::io::{decode_mask_png, decode_png, encode_png, load_panorama};
use crate::resample::{resize, EdgeMode, ResampleFilter};

/// Ground-truth images served by the oracle mock, keyed by request id.
#[derive(Debug, Clone)]
pub enum OracleTargets {
    /// `<dir>/<request_id>.png`.
    Dir(PathBuf),
    Memory(Arc<RwLock<HashMap<String, EquirectPanorama>>>),
}

impl OracleTargets {
    pub fn memory() -> Self {
        OracleTargets::Memory(Arc::default())
    }

    /// Registers a target. Directory-backed targets are written as PNG.
    pub fn register(&self, request_id: &str, target: EquirectPanorama) -> Result<()> {
        check_request_id(request_id).map_err(|f| Error::param(f.body.message))?;
        match self {
            OracleTargets::Dir(dir) => {
                crate::io::save_panorama(&dir.join(format!("{request_id}.png")), &target)
            }
            OracleTargets::Memory(map) => {
                map.write()
                    .unwrap_or_else(|e| e.into_inner())
                    .insert(request_id.to_string(), target);
                Ok(())
            }
        }
    }

    fn lookup(&self, request_id: &str) -> Result<Option<EquirectPanorama>> {
        match self {
            OracleTargets::Dir(dir) => {
                let path = dir.join(format!("{request_id}.png"));
                if path.is_file() {
                    load_panorama(&path).map(Some)
                } else {
                    Ok(None)
                }
            }
            OracleTargets::Memory(map) => Ok(map
                .read()
                .unwrap_or_else(|e| e.into_inner())
                .get(request_id)
                .cloned()),
        }
    }
}

/// Deterministic stand-ins for the neural backend.
///
/// Every mode answers superresolution with a Lanczos-3 upscale.
#[derive(Debug, Clone)]
pub enum MockMode {
    /// Returns the input image.
    Identity,
    /// Returns the target registered under the request id.
    Oracle(OracleTargets),
    /// Fills masked pixels with a color.
    Constant([u8; 3]),
    /// Identity inpainting; exists to exercise the classical upscaler.
    FallbackSuperres,
}

impl MockMode {
    pub fn name(&self) -> &'static str {
        match self {
            MockMode::Identity => "mock-identity",
            MockMode::Oracle(_) => "mock-oracle",
            MockMode::Constant(_) => "mock-constant",
            MockMode::FallbackSuperres => "mock-fallback-superres",
        }
    }
}

/// Parses `identity`, `oracle:<dir>`, `constant`, `constant:<v>`,
/// `constant:<r>,<g>,<b>` and `fallback-superres`.
impl FromStr for MockMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        match (head, arg) {
            ("identity", None) => Ok(MockMode::Identity),
            ("fallback-superres" | "fallback_superres", None) => Ok(MockMode::FallbackSuperres),
            ("oracle", Some(dir)) if !dir.is_empty() => {
                Ok(MockMode::Oracle(OracleTargets::Dir(PathBuf::from(dir))))
            }
            ("constant", None) => Ok(MockMode::Constant([128; 3])),
            ("constant", Some(v)) => {
                let vals: std::result::Result<Vec<u8>, _> =
                    v.split(',').map(|c| c.trim().parse::<u8>()).collect();
                match vals.map_err(|e| Error::param(format!("bad color `{v}`: {e}")))?[..] {
                    [g] => Ok(MockMode::Constant([g; 3])),
                    [r, g, b] => Ok(MockMode::Constant([r, g, b])),
                    _ => Err(Error::param(format!("color `{v}` needs 1 or 3 components"))),
                }
            }
            _ => Err(Error::param(format!(
                "unknown mock mode `{s}` (identity, oracle:<dir>, constant[:r,g,b], fallback-superres)"
            ))),
        }
    }
}

/// HTTP status plus structured body, shared by the in-process and HTTP mocks.
#[derive(Debug, Clone)]
pub(crate) struct MockFailure {
    pub status: u16,
    pub body: ErrorBody,
}

impl MockFailure {
    pub fn new(status: u16, code: &str, message: impl Into<String>, request_id: Option<&str>) -> Self {
        Self {
            status,
            body: ErrorBody {
                code: code.into(),
                message: message.into(),
                request_id: request_id.filter(|id| !id.is_empty()).map(str::to_string),
            },
        }
    }

    fn from_error(e: Error, request_id: &str) -> Self {
        let status = if e.is_validation() || e.is_io() { 400 } else { 500 };
        let code = if status == 400 { "validation" } else { "internal" };
        Self::new(status, code, e.to_string(), Some(request_id))
    }
}

impl From<MockFailure> for Error {
    fn from(f: MockFailure) -> Self {
        Error::Backend {
            status: f.status,
            code: f.body.code,
            message: f.body.message,
            request_id: f.body.request_id,
        }
    }
}

fn check_request_id(id: &str) -> std::result::Result<(), MockFailure> {
    let ok = !id.is_empty()
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(MockFailure::new(
            400,
            "validation",
            format!("request_id `{id}` must be non-empty [A-Za-z0-9._-]"),
            Some(id),
        ))
    }
}

pub(crate) fn mock_inpaint(
    mode: &MockMode,
    req: &InpaintRequest,
) -> std::result::Result<Vec<u8>, MockFailure> {
    let id = req.params.request_id.as_str();
    req.validate().map_err(|e| MockFailure::from_error(e, id))?;
    let fail = |e: Error| MockFailure::from_error(e, id);
    match mode {
        MockMode::Identity | MockMode::FallbackSuperres => {
            encode_png(&decode_png(&req.image).map_err(fail)?).map_err(fail)
        }
        MockMode::Oracle(targets) => {
            check_request_id(id)?;
            match targets.lookup(id).map_err(fail)? {
                Some(t) => encode_png(&t).map_err(fail),
                None => Err(MockFailure::new(
                    404,
                    "target_not_found",
                    format!("no oracle target registered for request_id `{id}`"),
                    Some(id),
                )),
            }
        }
        MockMode::Constant(color) => {
            let mut img = decode_png(&req.image).map_err(fail)?;
            let mask = decode_mask_png(&req.mask).map_err(fail)?;
            let ch = img.channels();
            for (px, &m) in img.as_mut_slice().chunks_exact_mut(ch).zip(mask.as_slice()) {
                if m {
                    for (c, v) in px.iter_mut().enumerate() {
                        *v = color[c.min(2)];
                    }
                }
            }
            encode_png(&img).map_err(fail)
        }
    }
}

pub(crate) fn mock_superres(req: &SuperresRequest) -> std::result::Result<Vec<u8>, MockFailure> {
    let id = req.params.request_id.as_str();
    let fail = |e: Error| MockFailure::from_error(e, id);
    req.validate().map_err(fail)?;
    let img = decode_png(&req.image).map_err(fail)?;
    let s = req.params.scale as usize;
    let up = resize(
        &img,
        img.width() * s,
        img.height() * s,
        ResampleFilter::Lanczos3,
        EdgeMode::Clamp,
    )
    .map_err(fail)?;
    encode_png(&up).map_err(fail)
}

/// Runs a [`MockMode`] in process, without a network round trip.
#[derive(Debug, Clone)]
pub struct MockBackend {
    mode: MockMode,
}

impl MockBackend {
    pub fn new(mode: MockMode) -> Self {
        Self { mode }
    }

    pub fn mode(&self) -> &MockMode {
        &self.mode
    }
}

impl Backend for MockBackend {
    fn name(&self) -> &str {
        self.mode.name()
    }

    fn inpaint(&self, req: &InpaintRequest) -> Result<BackendResponse> {
        let start = Instant::now();
        let (w, h) = req.validate()?;
        let image = mock_inpaint(&self.mode, req)?;
        let resp = BackendResponse {
            image,
            backend_name: self.mode.name().into(),
            elapsed_ms: start.elapsed().as_millis() as u64,
        };
        resp.expect_dimensions(w, h)?;
        Ok(resp)
    }

    fn superresolve(&self, req: &SuperresRequest) -> Result<BackendResponse> {
        let start = Instant::now();
        let (w, h) = req.validate()?;
        let image = mock_superres(req)?;
        let s = req.params.scale;
        let resp = BackendResponse {
            image,
            backend_name: self.mode.name().into(),
            elapsed_ms: start.elapsed().as_millis() as u64,
        };
        resp.expect_dimensions(w * s, h * s)?;
        Ok(resp)
    }
}

//! Deterministic `multipart/form-data` bodies.
//!
//! The boundary is derived from the content, so encoding the same request
//! twice (e.g. on a retry) yields byte-identical bodies.

use sha2::{Digest, Sha256};

use super::{InpaintRequest, SuperresRequest};
use crate::error::Result;

pub struct Part<'a> {
    pub name: &'a str,
    pub filename: Option<&'a str>,
    pub content_type: &'a str,
    pub data: &'a [u8],
}

/// Encoded body plus its `Content-Type` header value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Body {
    pub content_type: String,
    pub bytes: Vec<u8>,
}

pub fn encode(parts: &[Part<'_>]) -> Body {
    let mut hasher = Sha256::new();
    for p in parts {
        hasher.update(p.name.as_bytes());
        hasher.update((p.data.len() as u64).to_le_bytes());
        hasher.update(p.data);
    }
    let digest = hasher.finalize();
    let mut boundary = String::from("defurnish-");
    for b in &digest[..16] {
        boundary.push_str(&format!("{b:02x}"));
    }
    let mut bytes = Vec::with_capacity(parts.iter().map(|p| p.data.len() + 160).sum());
    for p in parts {
        bytes.extend_from_slice(format!("--{boundary}\r\n").as_bytes());
        let disposition = match p.filename {
            Some(f) => format!("Content-Disposition: form-data; name=\"{}\"; filename=\"{f}\"\r\n", p.name),
            None => format!("Content-Disposition: form-data; name=\"{}\"\r\n", p.name),
        };
        bytes.extend_from_slice(disposition.as_bytes());
        bytes.extend_from_slice(format!("Content-Type: {}\r\n\r\n", p.content_type).as_bytes());
        bytes.extend_from_slice(p.data);
        bytes.extend_from_slice(b"\r\n");
    }
    bytes.extend_from_slice(format!("--{boundary}--\r\n").as_bytes());
    Body {
        content_type: format!("multipart/form-data; boundary={boundary}"),
        bytes,
    }
}

pub fn inpaint_body(req: &InpaintRequest) -> Result<Body> {
    let params = serde_json::to_vec(&req.params)?;
    Ok(encode(&[
        Part {
            name: "image",
            filename: Some("image.png"),
            content_type: "image/png",
            data: &req.image,
        },
        Part {
            name: "mask",
            filename: Some("mask.png"),
            content_type: "image/png",
            data: &req.mask,
        },
        Part {
            name: "params",
            filename: None,
            content_type: "application/json",
            data: &params,
        },
    ]))
}

pub fn superres_body(req: &SuperresRequest) -> Result<Body> {
    let params = serde_json::to_vec(&req.params)?;
    Ok(encode(&[
        Part {
            name: "image",
            filename: Some("image.png"),
            content_type: "image/png",
            data: &req.image,
        },
        Part {
            name: "params",
            filename: None,
            content_type: "application/json",
            data: &params,
        },
    ]))
}

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::header::CONTENT_TYPE;
use serde::{Deserialize, Serialize};

use super::multipart::{self, Body};
use super::{
    Backend, BackendResponse, ErrorBody, InpaintRequest, SuperresRequest, HEADER_BACKEND_NAME,
    HEADER_ELAPSED_MS, INPAINT_PATH, SUPERRES_PATH,
};
use crate::error::{Error, Result};

/// Environment variable holding the default backend URL.
pub const ENDPOINT_ENV: &str = "DEFURNISH_BACKEND_URL";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendEndpoint {
    pub base_url: String,
    pub timeout_ms: u64,
    /// Extra attempts after a connection failure or timeout. Requests are
    /// deterministic, so resending them is safe.
    pub retries: u32,
    pub max_in_flight: usize,
}

impl Default for BackendEndpoint {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8700".into(),
            timeout_ms: 60_000,
            retries: 2,
            max_in_flight: 4,
        }
    }
}

impl BackendEndpoint {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            ..Self::default()
        }
    }

    /// Default endpoint with the URL taken from [`ENDPOINT_ENV`], if set.
    pub fn from_env() -> Option<Self> {
        std::env::var(ENDPOINT_ENV)
            .ok()
            .filter(|v| !v.trim().is_empty())
            .map(Self::new)
    }

    pub fn validate(&self) -> Result<()> {
        if self.timeout_ms == 0 {
            return Err(Error::param("backend timeout must be positive"));
        }
        if self.max_in_flight == 0 {
            return Err(Error::param("max_in_flight must be at least 1"));
        }
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return Err(Error::param(format!(
                "backend URL `{}` must start with http:// or https://",
                self.base_url
            )));
        }
        Ok(())
    }
}

struct Slots {
    free: Mutex<usize>,
    ready: Condvar,
}

struct Permit<'a>(&'a Slots);

impl Slots {
    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.ready.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.ready.notify_one();
    }
}

/// Blocking HTTP client, safe to share between threads.
pub struct HttpBackend {
    endpoint: BackendEndpoint,
    client: Client,
    label: String,
    slots: Slots,
}

impl HttpBackend {
    pub fn new(endpoint: BackendEndpoint) -> Result<Self> {
        endpoint.validate()?;
        let client = Client::builder()
            .timeout(Duration::from_millis(endpoint.timeout_ms))
            .build()
            .map_err(|e| Error::Transport {
                attempts: 0,
                message: format!("cannot build HTTP client: {e}"),
            })?;
        Ok(Self {
            label: format!("http:{}", endpoint.base_url),
            slots: Slots {
                free: Mutex::new(endpoint.max_in_flight),
                ready: Condvar::new(),
            },
            endpoint,
            client,
        })
    }

    pub fn endpoint(&self) -> &BackendEndpoint {
        &self.endpoint
    }

    fn post(&self, path: &str, body: Body) -> Result<BackendResponse> {
        let _permit = self.slots.acquire();
        let url = format!("{}{path}", self.endpoint.base_url.trim_end_matches('/'));
        let mut attempts = 0;
        loop {
            attempts += 1;
            let sent = self
                .client
                .post(&url)
                .header(CONTENT_TYPE, &body.content_type)
                .body(body.bytes.clone())
                .send()
                .and_then(|resp| {
                    let status = resp.status().as_u16();
                    let header = |name: &str| {
                        resp.headers()
                            .get(name)
                            .and_then(|v| v.to_str().ok())
                            .map(str::to_string)
                    };
                    let name = header(HEADER_BACKEND_NAME);
                    let elapsed = header(HEADER_ELAPSED_MS);
                    resp.bytes().map(|b| (status, name, elapsed, b.to_vec()))
                });
            match sent {
                Ok((status, name, elapsed, bytes)) => {
                    return finish(status, name, elapsed, bytes);
                }
                Err(e) if attempts <= self.endpoint.retries => {
                    log::warn!("backend request to {url} failed (attempt {attempts}): {e}");
                    std::thread::sleep(Duration::from_millis(50 * attempts as u64));
                }
                Err(e) => {
                    return Err(Error::Transport {
                        attempts,
                        message: format!("{url}: {e}"),
                    })
                }
            }
        }
    }
}

fn finish(
    status: u16,
    name: Option<String>,
    elapsed: Option<String>,
    bytes: Vec<u8>,
) -> Result<BackendResponse> {
    if (200..300).contains(&status) {
        return Ok(BackendResponse {
            image: bytes,
            backend_name: name.unwrap_or_else(|| "unknown".into()),
            elapsed_ms: elapsed.and_then(|v| v.parse().ok()).unwrap_or(0),
        });
    }
    let body: Option<ErrorBody> = serde_json::from_slice(&bytes).ok();
    Err(match body {
        Some(b) => Error::Backend {
            status,
            code: b.code,
            message: b.message,
            request_id: b.request_id,
        },
        None => Error::Backend {
            status,
            code: format!("http_{status}"),
            message: String::from_utf8_lossy(&bytes).chars().take(500).collect(),
            request_id: None,
        },
    })
}

impl Backend for HttpBackend {
    fn name(&self) -> &str {
        &self.label
    }

    fn inpaint(&self, req: &InpaintRequest) -> Result<BackendResponse> {
        let (w, h) = req.validate()?;
        let resp = self.post(INPAINT_PATH, multipart::inpaint_body(req)?)?;
        resp.expect_dimensions(w, h)?;
        Ok(resp)
    }

    fn superresolve(&self, req: &SuperresRequest) -> Result<BackendResponse> {
        let (w, h) = req.validate()?;
        let resp = self.post(SUPERRES_PATH, multipart::superres_body(req)?)?;
        let s = req.params.scale;
        resp.expect_dimensions(w * s, h * s)?;
        Ok(resp)
    }
}

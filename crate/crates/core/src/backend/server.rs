use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Instant;

use axum::extract::multipart::MultipartRejection;
use axum::extract::{DefaultBodyLimit, Multipart, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use tokio::sync::oneshot;

use super::mock::{mock_inpaint, mock_superres, MockFailure, MockMode};
use super::{
    InpaintParams, InpaintRequest, SuperresParams, SuperresRequest, HEADER_BACKEND_NAME,
    HEADER_ELAPSED_MS, INPAINT_PATH, SUPERRES_PATH,
};
use crate::error::{Error, Result};

impl IntoResponse for MockFailure {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.body)).into_response()
    }
}

fn png_response(mode: &MockMode, bytes: Vec<u8>, start: Instant) -> Response {
    let mut resp = bytes.into_response();
    let headers = resp.headers_mut();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static("image/png"));
    headers.insert(HEADER_BACKEND_NAME, HeaderValue::from_static(mode.name()));
    headers.insert(
        HEADER_ELAPSED_MS,
        HeaderValue::from(start.elapsed().as_millis() as u64),
    );
    resp
}

async fn read_parts(
    multipart: std::result::Result<Multipart, MultipartRejection>,
) -> std::result::Result<HashMap<String, Vec<u8>>, MockFailure> {
    let bad = |m: String| MockFailure::new(400, "bad_request", m, None);
    let mut multipart = multipart.map_err(|e| bad(e.body_text()))?;
    let mut parts = HashMap::new();
    while let Some(field) = multipart.next_field().await.map_err(|e| bad(e.body_text()))? {
        let name = field.name().unwrap_or_default().to_string();
        let data = field.bytes().await.map_err(|e| bad(e.body_text()))?;
        parts.insert(name, data.to_vec());
    }
    Ok(parts)
}

fn params<T: serde::de::DeserializeOwned + Default>(
    parts: &mut HashMap<String, Vec<u8>>,
) -> std::result::Result<T, MockFailure> {
    match parts.remove("params") {
        Some(bytes) => serde_json::from_slice(&bytes).map_err(|e| {
            MockFailure::new(400, "validation", format!("invalid params: {e}"), None)
        }),
        None => Ok(T::default()),
    }
}

fn required(
    parts: &mut HashMap<String, Vec<u8>>,
    name: &str,
    request_id: &str,
) -> std::result::Result<Vec<u8>, MockFailure> {
    parts.remove(name).ok_or_else(|| {
        MockFailure::new(400, "validation", format!("missing part `{name}`"), Some(request_id))
    })
}

async fn inpaint(
    State(mode): State<Arc<MockMode>>,
    multipart: std::result::Result<Multipart, MultipartRejection>,
) -> std::result::Result<Response, MockFailure> {
    let start = Instant::now();
    let mut parts = read_parts(multipart).await?;
    let params: InpaintParams = params(&mut parts)?;
    let req = InpaintRequest {
        image: required(&mut parts, "image", &params.request_id)?,
        mask: required(&mut parts, "mask", &params.request_id)?,
        params,
    };
    let m = mode.clone();
    let out = tokio::task::spawn_blocking(move || mock_inpaint(&m, &req))
        .await
        .map_err(|e| MockFailure::new(500, "internal", e.to_string(), None))??;
    Ok(png_response(&mode, out, start))
}

async fn superres(
    State(mode): State<Arc<MockMode>>,
    multipart: std::result::Result<Multipart, MultipartRejection>,
) -> std::result::Result<Response, MockFailure> {
    let start = Instant::now();
    let mut parts = read_parts(multipart).await?;
    let params: SuperresParams = params(&mut parts)?;
    let req = SuperresRequest {
        image: required(&mut parts, "image", &params.request_id)?,
        params,
    };
    let out = tokio::task::spawn_blocking(move || mock_superres(&req))
        .await
        .map_err(|e| MockFailure::new(500, "internal", e.to_string(), None))??;
    Ok(png_response(&mode, out, start))
}

fn router(mode: MockMode) -> Router {
    Router::new()
        .route(INPAINT_PATH, post(inpaint))
        .route(SUPERRES_PATH, post(superres))
        .route("/v1/health", get(|| async { "ok" }))
        .layer(DefaultBodyLimit::max(512 * 1024 * 1024))
        .with_state(Arc::new(mode))
}

/// A mock server running on its own thread; stops on [`shutdown`] or drop.
///
/// [`shutdown`]: MockServerHandle::shutdown
pub struct MockServerHandle {
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl MockServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn shutdown(mut self) {
        self.stop_and_join();
    }

    /// Blocks until ctrl-c, then shuts down gracefully.
    pub fn wait_for_ctrl_c(self) -> Result<()> {
        let rt = tokio::runtime::Builder::new_current_thread()
            .enable_all()
            .build()
            .map_err(|e| Error::io("tokio runtime", e))?;
        rt.block_on(tokio::signal::ctrl_c())
            .map_err(|e| Error::io("signal handler", e))?;
        self.shutdown();
        Ok(())
    }

    fn stop_and_join(&mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for MockServerHandle {
    fn drop(&mut self) {
        self.stop_and_join();
    }
}

/// Binds `bind` (e.g. `127.0.0.1:0`) and serves `mode` in the background.
pub fn serve_mock(mode: MockMode, bind: &str) -> Result<MockServerHandle> {
    let listener = std::net::TcpListener::bind(bind).map_err(|e| Error::io(bind, e))?;
    listener
        .set_nonblocking(true)
        .map_err(|e| Error::io(bind, e))?;
    let addr = listener.local_addr().map_err(|e| Error::io(bind, e))?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()
        .map_err(|e| Error::io("tokio runtime", e))?;
    let (stop, stopped) = oneshot::channel::<()>();
    let app = router(mode);
    let thread = std::thread::Builder::new()
        .name(format!("mock-backend-{addr}"))
        .spawn(move || {
            runtime.block_on(async move {
                let listener = match tokio::net::TcpListener::from_std(listener) {
                    Ok(l) => l,
                    Err(e) => {
                        log::error!("mock server on {addr}: {e}");
                        return;
                    }
                };
                let graceful = async {
                    let _ = stopped.await;
                };
                if let Err(e) = axum::serve(listener, app).with_graceful_shutdown(graceful).await {
                    log::error!("mock server on {addr}: {e}");
                }
            });
        })
        .map_err(|e| Error::io("mock server thread", e))?;
    log::info!("mock backend listening on http://{addr}");
    Ok(MockServerHandle {
        addr,
        stop: Some(stop),
        thread: Some(thread),
    })
}

//! HTTP and raw-TCP front ends.
//!
//! * `POST /classify`: one [`StreamRecord`] as JSON, answers a [`ClassifiedRecord`].
//! * `GET /trend?from=&to=&bucket=`: series in milliseconds; `bucket` (seconds)
//!   merges into coarser buckets.
//! * `GET /health`: model version, uptime and counters.
//!
//! The TCP listener reads NDJSON per connection and answers each line with
//! either a classified record or `{"dead_letter": {...}}`.

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};

use super::{rebucket, Counters, Outcome, Service, ServiceError, StreamRecord, TrendPoint};

#[derive(Debug, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub model_version: String,
    pub uptime_seconds: f64,
    #[serde(flatten)]
    pub counters: Counters,
}

#[derive(Debug, Deserialize)]
pub struct TrendQuery {
    pub from: i64,
    pub to: i64,
    pub bucket: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TrendResponse {
    pub bucket_seconds: u64,
    pub points: Vec<TrendPoint>,
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let status = match e {
            ServiceError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError(status, e.to_string())
    }
}

async fn health(State(svc): State<Arc<Service>>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        model_version: svc.model_version().to_string(),
        uptime_seconds: svc.uptime_seconds(),
        counters: svc.counters(),
    })
}

async fn classify(
    State(svc): State<Arc<Service>>,
    Json(record): Json<StreamRecord>,
) -> Result<Response, ApiError> {
    let rec = svc.ingest_record(record)?;
    Ok(Json(rec).into_response())
}

async fn trend(
    State(svc): State<Arc<Service>>,
    Query(q): Query<TrendQuery>,
) -> Result<Json<TrendResponse>, ApiError> {
    let points = svc.trend(q.from, q.to)?;
    let base = svc.window_snapshot().bucket_seconds();
    match q.bucket {
        None => Ok(Json(TrendResponse {
            bucket_seconds: base,
            points,
        })),
        Some(b) if b >= base && b % base == 0 => Ok(Json(TrendResponse {
            bucket_seconds: b,
            points: rebucket(&points, b as i64 * 1000),
        })),
        Some(b) => Err(ApiError(
            StatusCode::BAD_REQUEST,
            format!("bucket must be a positive multiple of {base} seconds, got {b}"),
        )),
    }
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/classify", post(classify))
        .route("/trend", get(trend))
        .with_state(service)
}

/// Serve HTTP on `listener` until `shutdown` resolves.
pub async fn serve_http<F>(
    service: Arc<Service>,
    listener: TcpListener,
    shutdown: F,
) -> std::io::Result<()>
where
    F: Future<Output = ()> + Send + 'static,
{
    axum::serve(listener, router(service))
        .with_graceful_shutdown(shutdown)
        .await
}

async fn handle_connection(service: Arc<Service>, stream: TcpStream) -> std::io::Result<()> {
    let (read, mut write) = stream.into_split();
    let mut lines = BufReader::new(read).lines();
    while let Some(line) = lines.next_line().await? {
        let svc = service.clone();
        let outcome = tokio::task::spawn_blocking(move || svc.ingest_line(&line))
            .await
            .map_err(std::io::Error::other)?;
        let json = match outcome {
            Some(Outcome::Classified(rec)) => serde_json::to_string(&rec),
            Some(Outcome::DeadLetter(d)) => {
                serde_json::to_string(&serde_json::json!({ "dead_letter": d }))
            }
            None => continue,
        }
        .map_err(std::io::Error::from)?;
        write.write_all(json.as_bytes()).await?;
        write.write_all(b"\n").await?;
    }
    write.flush().await
}

/// Accept NDJSON connections on `listener` until `shutdown` resolves.
pub async fn serve_ndjson<F>(
    service: Arc<Service>,
    listener: TcpListener,
    shutdown: F,
) -> std::io::Result<()>
where
    F: Future<Output = ()> + Send,
{
    tokio::pin!(shutdown);
    loop {
        tokio::select! {
            _ = &mut shutdown => return Ok(()),
            accepted = listener.accept() => {
                let (stream, peer): (TcpStream, SocketAddr) = accepted?;
                let svc = service.clone();
                tokio::spawn(async move {
                    if let Err(e) = handle_connection(svc, stream).await {
                        log::warn!("ndjson connection {peer}: {e}");
                    }
                });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::TfIdfModel;
    use crate::models::{Classifier, LinearKind, LinearModel, ModelBundle};
    use crate::preprocess::{process_text, PreprocessConfig};
    use crate::service::{Anonymizer, ServiceConfig};

    fn service() -> Arc<Service> {
        let preprocess = PreprocessConfig::default();
        let features = TfIdfModel::fit(&[process_text("great", &preprocess)], 10);
        let mut m = LinearModel::zeros(1, LinearKind::Logistic, 1.0);
        m.weights[2][0] = 3.0;
        let bundle = ModelBundle {
            preprocess,
            features,
            classifier: Classifier::Linear(m),
        };
        Arc::new(Service::new(bundle, "logreg-abc", Some(Anonymizer::new("k")), ServiceConfig::default()))
    }

    async fn request(addr: SocketAddr, raw: String) -> String {
        let mut s = TcpStream::connect(addr).await.unwrap();
        s.write_all(raw.as_bytes()).await.unwrap();
        let mut buf = Vec::new();
        tokio::io::AsyncReadExt::read_to_end(&mut s, &mut buf).await.unwrap();
        String::from_utf8(buf).unwrap()
    }

    fn body(resp: &str) -> &str {
        resp.split("\r\n\r\n").nth(1).unwrap()
    }

    #[tokio::test]
    async fn endpoints() {
        let svc = service();
        let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let server = tokio::spawn(serve_http(svc.clone(), listener, async {
            let _ = rx.await;
        }));

        let payload = r#"{"id":"u1","text":"great day","ts":120000}"#;
        let resp = request(
            addr,
            format!(
                "POST /classify HTTP/1.1\r\nHost: x\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                payload.len()
            ),
        )
        .await;
        assert!(resp.starts_with("HTTP/1.1 200"), "{resp}");
        let rec: serde_json::Value = serde_json::from_str(body(&resp)).unwrap();
        assert_eq!(rec["label"], "positive");
        assert_eq!(rec["model_version"], "logreg-abc");

        let resp = request(addr, "GET /health HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n".into()).await;
        let h: Health = serde_json::from_str(body(&resp)).unwrap();
        assert_eq!(h.model_version, "logreg-abc");
        assert_eq!(h.counters.classified, 1);

        let resp = request(
            addr,
            "GET /trend?from=0&to=299999&bucket=300 HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n".into(),
        )
        .await;
        let t: TrendResponse = serde_json::from_str(body(&resp)).unwrap();
        assert_eq!(t.bucket_seconds, 300);
        assert_eq!(t.points.len(), 1);
        assert_eq!(t.points[0].positive, 1);

        let resp = request(addr, "GET /trend?from=5&to=1 HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n".into()).await;
        assert!(resp.starts_with("HTTP/1.1 400"), "{resp}");

        tx.send(()).unwrap();
        server.await.unwrap().unwrap();
    }

    #[tokio::test]
    async fn ndjson_listener() {
        let svc = service();
        let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let server = tokio::spawn({
            let svc = svc.clone();
            async move {
                serve_ndjson(svc, listener, async {
                    let _ = rx.await;
                })
                .await
            }
        });
        let mut s = TcpStream::connect(addr).await.unwrap();
        s.write_all(b"{\"id\":\"a\",\"text\":\"great\",\"ts\":1}\nbroken\n").await.unwrap();
        s.shutdown().await.unwrap();
        let mut buf = String::new();
        tokio::io::AsyncReadExt::read_to_string(&mut s, &mut buf).await.unwrap();
        let lines: Vec<&str> = buf.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[1].contains("dead_letter"));
        let c = svc.counters();
        assert_eq!((c.ingested, c.classified, c.dead_lettered), (2, 1, 1));
        tx.send(()).unwrap();
        server.await.unwrap().unwrap();
    }
}

//! Helpers for driving the service in-process: image fixtures, multipart
//! bodies and a router wrapper that speaks JSON. Used by this crate's tests
//! and by the client's acceptance suite.

pub mod sequence;

use std::io::Cursor;
use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use foodrec_core::analysis::Analyzer;
use foodrec_core::api::{upload_parts, API_PREFIX, IDEMPOTENCY_HEADER};
use foodrec_core::FoodDatabase;
use serde_json::{json, Value};
use tower::ServiceExt;

use crate::config::AnalysisMode;
use crate::routes::{router, AppState, Tokens};
use crate::service::{Service, ServiceOptions};

pub const PARTICIPANT_TOKEN: &str = "participant-test-token";
pub const RESEARCHER_TOKEN: &str = "researcher-test-token";

/// Food list with the potato family, duplicated names and a few staples.
pub const SAMPLE_FOOD_LIST: &str = "\
code,name,energy_kcal_per_100g
11100000,milk,61
58100100,potato,93
58100110,potato wedges,180
58100120,roast potato,149
94000100,water,0
61210000,juice,47
61210010,juice,54
51000100,bread,266
56100100,pasta,158
58130011,lasagna,135
";

pub fn sample_foods() -> FoodDatabase {
    foodrec_core::food::load_food_list(SAMPLE_FOOD_LIST.as_bytes()).expect("sample food list")
}

/// A PNG of the given size. `seed` varies the pixels so distinct seeds give
/// distinct content hashes.
pub fn png(width: u32, height: u32, seed: u32) -> Vec<u8> {
    let img = image::RgbImage::from_fn(width, height, |x, y| {
        image::Rgb([
            (x.wrapping_mul(7) ^ seed) as u8,
            (y.wrapping_mul(13) ^ (seed >> 8)) as u8,
            (seed >> 16) as u8,
        ])
    });
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png)
        .expect("png encoding");
    out.into_inner()
}

/// Capture metadata JSON with a timestamp and nothing else.
pub fn metadata_at(captured_at: &str) -> Value {
    json!({ "captured_at": captured_at, "fiducial_marker_present": false })
}

/// A `multipart/form-data` body.
#[derive(Debug, Clone)]
pub struct MultipartBody {
    boundary: String,
    body: Vec<u8>,
}

impl Default for MultipartBody {
    fn default() -> Self {
        Self::new()
    }
}

impl MultipartBody {
    pub fn new() -> Self {
        Self {
            boundary: format!("foodrec-{}", uuid::Uuid::new_v4().simple()),
            body: Vec::new(),
        }
    }

    pub fn text(mut self, name: &str, value: &str) -> Self {
        self.body.extend_from_slice(
            format!(
                "--{}\r\nContent-Disposition: form-data; name=\"{name}\"\r\n\r\n{value}\r\n",
                self.boundary
            )
            .as_bytes(),
        );
        self
    }

    pub fn file(mut self, name: &str, file_name: &str, content_type: &str, bytes: &[u8]) -> Self {
        self.body.extend_from_slice(
            format!(
                "--{}\r\nContent-Disposition: form-data; name=\"{name}\"; filename=\"{file_name}\"\r\nContent-Type: {content_type}\r\n\r\n",
                self.boundary
            )
            .as_bytes(),
        );
        self.body.extend_from_slice(bytes);
        self.body.extend_from_slice(b"\r\n");
        self
    }

    pub fn content_type(&self) -> String {
        format!("multipart/form-data; boundary={}", self.boundary)
    }

    pub fn finish(mut self) -> (String, Vec<u8>) {
        self.body
            .extend_from_slice(format!("--{}--\r\n", self.boundary).as_bytes());
        (self.content_type(), self.body)
    }
}

/// A complete, valid upload.
pub fn upload_body(
    participant: &str,
    study: &str,
    metadata: &Value,
    before: &[u8],
    after: &[u8],
) -> MultipartBody {
    MultipartBody::new()
        .text(upload_parts::PARTICIPANT_ID, participant)
        .text(upload_parts::STUDY_ID, study)
        .text(upload_parts::METADATA, &metadata.to_string())
        .file(upload_parts::BEFORE, "before.png", "image/png", before)
        .file(upload_parts::AFTER, "after.png", "image/png", after)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum As {
    Anonymous,
    Participant,
    Researcher,
}

impl As {
    fn token(self) -> Option<&'static str> {
        match self {
            As::Anonymous => None,
            As::Participant => Some(PARTICIPANT_TOKEN),
            As::Researcher => Some(RESEARCHER_TOKEN),
        }
    }
}

/// Response of a [`TestApp`] call. JSON bodies are parsed; other bodies are
/// kept as bytes.
#[derive(Debug, Clone)]
pub struct Reply {
    pub status: StatusCode,
    pub content_type: Option<String>,
    pub bytes: Vec<u8>,
    pub json: Value,
}

/// The router over an in-memory service, called without a network.
#[derive(Clone)]
pub struct TestApp {
    pub router: Router,
    pub service: Arc<Service>,
}

impl TestApp {
    pub fn new(foods: FoodDatabase, analyzer: Box<dyn Analyzer>, mode: AnalysisMode) -> Self {
        Self::with_options(foods, analyzer, mode, ServiceOptions::default())
    }

    pub fn with_options(
        foods: FoodDatabase,
        analyzer: Box<dyn Analyzer>,
        mode: AnalysisMode,
        options: ServiceOptions,
    ) -> Self {
        Self::over(Arc::new(Service::in_memory(foods, analyzer, options)), mode)
    }

    pub fn over(service: Arc<Service>, mode: AnalysisMode) -> Self {
        let state = AppState {
            service: service.clone(),
            tokens: Arc::new(test_tokens()),
            mode,
        };
        Self {
            router: router(state, None),
            service,
        }
    }

    pub async fn send(&self, req: Request<Body>) -> Reply {
        let resp = self
            .router
            .clone()
            .oneshot(req)
            .await
            .expect("router is infallible");
        let status = resp.status();
        let content_type = resp
            .headers()
            .get(header::CONTENT_TYPE)
            .and_then(|v| v.to_str().ok())
            .map(str::to_owned);
        let bytes = to_bytes(resp.into_body(), usize::MAX)
            .await
            .expect("body")
            .to_vec();
        let json = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
        Reply {
            status,
            content_type,
            bytes,
            json,
        }
    }

    /// `path` is relative to the API prefix.
    pub async fn call(&self, method: Method, path: &str, who: As, body: Option<Value>) -> Reply {
        let mut req = Request::builder()
            .method(method)
            .uri(format!("{API_PREFIX}{path}"));
        if let Some(t) = who.token() {
            req = req.header(header::AUTHORIZATION, format!("Bearer {t}"));
        }
        let req = match body {
            Some(v) => req
                .header(header::CONTENT_TYPE, "application/json")
                .body(Body::from(v.to_string())),
            None => req.body(Body::empty()),
        };
        self.send(req.expect("request")).await
    }

    pub async fn get(&self, path: &str, who: As) -> Reply {
        self.call(Method::GET, path, who, None).await
    }

    pub async fn upload(&self, body: MultipartBody, key: Option<&str>, who: As) -> Reply {
        let (content_type, bytes) = body.finish();
        let mut req = Request::builder()
            .method(Method::POST)
            .uri(format!("{API_PREFIX}/occasions"))
            .header(header::CONTENT_TYPE, content_type);
        if let Some(t) = who.token() {
            req = req.header(header::AUTHORIZATION, format!("Bearer {t}"));
        }
        if let Some(k) = key {
            req = req.header(IDEMPOTENCY_HEADER, k);
        }
        self.send(req.body(Body::from(bytes)).expect("request"))
            .await
    }
}

pub fn test_tokens() -> Tokens {
    Tokens {
        participant: PARTICIPANT_TOKEN.into(),
        researcher: RESEARCHER_TOKEN.into(),
    }
}

use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::multipart::{Field, MultipartError, MultipartRejection};
use axum::extract::rejection::JsonRejection;
use axum::extract::{DefaultBodyLimit, FromRequest, FromRequestParts, Multipart, Request, State};
use axum::http::header::{self, HeaderMap, HeaderValue};
use axum::http::request::Parts;
use axum::http::StatusCode;
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post, put};
use axum::{Json, Router};
use foodrec_core::api::{
    upload_parts, AnalysisReport, AnalysisStatus, AuditTrailResponse, ErrorBody, FinalizeRequest,
    FoodHashResponse, FoodListResponse, ReviewRequest, SaveAnnotationsRequest, SearchResponse,
    StateResponse, UploadResponse, API_PREFIX, DEFAULT_SEARCH_LIMIT, IDEMPOTENCY_HEADER,
};
use foodrec_core::{AnnotationId, MediaType, OccasionId, ParticipantId, StudyId};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use tower_http::services::ServeDir;
use tower_http::trace::{DefaultMakeSpan, DefaultOnResponse, TraceLayer};
use tracing::Level;

use crate::config::AnalysisMode;
use crate::error::{ApiError, ErrorCode};
use crate::export::{self, ExportFormat};
use crate::service::{Service, UploadOutcome, UploadRequest, UploadedImage};
use crate::thumbnail::{thumbnail, DEFAULT_THUMBNAIL_PX, MAX_THUMBNAIL_PX};

const TEXT_PART_LIMIT: usize = 1024 * 1024;

/// Bearer tokens, one per role.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tokens {
    pub participant: String,
    pub researcher: String,
}

#[derive(Clone)]
pub struct AppState {
    pub service: Arc<Service>,
    pub tokens: Arc<Tokens>,
    pub mode: AnalysisMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Role {
    Participant,
    Researcher,
}

fn path(suffix: &str) -> String {
    format!("{API_PREFIX}{suffix}")
}

/// The full HTTP interface. Participant routes accept either token;
/// researcher routes only the researcher token. Static UI assets, when a
/// directory is given, are served without authentication under `/ui`.
pub fn router(state: AppState, ui_dir: Option<PathBuf>) -> Router {
    let upload_limit = state
        .service
        .max_image_bytes()
        .saturating_mul(2)
        .saturating_add(TEXT_PART_LIMIT * 4);

    let participant = Router::new()
        .route(
            &path("/occasions"),
            post(upload).layer(DefaultBodyLimit::max(upload_limit)),
        )
        .route(&path("/occasions/{id}/predictions"), get(predictions))
        .route(&path("/occasions/{id}/review"), post(review))
        .route(&path("/foods"), get(foods))
        .route(&path("/foods/hash"), get(food_hash))
        .route(&path("/foods/search"), get(search_foods))
        .route(
            &path("/participants/{pid}/occasions"),
            get(participant_occasions),
        )
        .route(&path("/blobs/{hash}"), get(blob))
        .route(&path("/blobs/{hash}/thumbnail"), get(blob_thumbnail))
        .route_layer(middleware::from_fn_with_state(
            state.clone(),
            require_participant,
        ));

    let researcher = Router::new()
        .route(&path("/occasions/{id}"), get(detail))
        .route(&path("/occasions/{id}/annotations"), put(save_annotations))
        .route(
            &path("/occasions/{id}/annotations/{aid}"),
            delete(delete_annotation),
        )
        .route(&path("/occasions/{id}/finalize"), post(finalize))
        .route(&path("/occasions/{id}/analyze"), post(analyze))
        .route(&path("/occasions/{id}/audit"), get(audit))
        .route(&path("/studies/{sid}/export"), get(export_study))
        .route_layer(middleware::from_fn_with_state(
            state.clone(),
            require_researcher,
        ));

    let mut app = Router::new().merge(participant).merge(researcher);
    if let Some(dir) = ui_dir {
        app = app.nest_service(
            "/ui",
            ServeDir::new(dir).append_index_html_on_directories(true),
        );
    }
    app.fallback(not_found)
        .method_not_allowed_fallback(method_not_allowed)
        .layer(
            TraceLayer::new_for_http()
                .make_span_with(DefaultMakeSpan::new().level(Level::INFO))
                .on_response(DefaultOnResponse::new().level(Level::INFO)),
        )
        .with_state(state)
}

async fn not_found() -> ApiError {
    ApiError::new(ErrorCode::NotFound, "no such endpoint")
}

async fn method_not_allowed() -> ApiError {
    ApiError::new(
        ErrorCode::MethodNotAllowed,
        "method not allowed on this endpoint",
    )
}

// Authentication

fn tokens_equal(a: &str, b: &str) -> bool {
    a.len() == b.len()
        && a.bytes()
            .zip(b.bytes())
            .fold(0u8, |acc, (x, y)| acc | (x ^ y))
            == 0
}

fn role_of(headers: &HeaderMap, tokens: &Tokens) -> Result<Role, ApiError> {
    let unauthorized = |msg: &str| ApiError::new(ErrorCode::Unauthorized, msg);
    let value = headers
        .get(header::AUTHORIZATION)
        .ok_or_else(|| unauthorized("missing bearer token"))?
        .to_str()
        .map_err(|_| unauthorized("malformed authorization header"))?;
    let token = value
        .strip_prefix("Bearer ")
        .ok_or_else(|| unauthorized("expected a bearer token"))?
        .trim();
    if tokens_equal(token, &tokens.researcher) {
        Ok(Role::Researcher)
    } else if tokens_equal(token, &tokens.participant) {
        Ok(Role::Participant)
    } else {
        Err(unauthorized("unknown token"))
    }
}

async fn authorize(state: &AppState, needed: Role, req: Request, next: Next) -> Response {
    match role_of(req.headers(), &state.tokens) {
        Ok(role) if role >= needed => next.run(req).await,
        Ok(_) => ApiError::new(
            ErrorCode::Forbidden,
            "this endpoint needs the researcher token",
        )
        .into_response(),
        Err(e) => {
            let mut resp = e.into_response();
            resp.headers_mut()
                .insert(header::WWW_AUTHENTICATE, HeaderValue::from_static("Bearer"));
            resp
        }
    }
}

async fn require_participant(State(state): State<AppState>, req: Request, next: Next) -> Response {
    authorize(&state, Role::Participant, req, next).await
}

async fn require_researcher(State(state): State<AppState>, req: Request, next: Next) -> Response {
    authorize(&state, Role::Researcher, req, next).await
}

// Extractors whose rejections use the API error body.

pub struct ApiJson<T>(pub T);

impl<S, T> FromRequest<S> for ApiJson<T>
where
    T: DeserializeOwned,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(ApiJson(v)),
            Err(JsonRejection::BytesRejection(r))
                if r.status() == StatusCode::PAYLOAD_TOO_LARGE =>
            {
                Err(ApiError::new(ErrorCode::PayloadTooLarge, r.body_text()))
            }
            Err(r) => Err(ApiError::invalid("body", r.body_text())),
        }
    }
}

pub struct ApiQuery<T>(pub T);

impl<S, T> FromRequestParts<S> for ApiQuery<T>
where
    T: DeserializeOwned,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, Self::Rejection> {
        axum::extract::Query::<T>::from_request_parts(parts, state)
            .await
            .map(|q| ApiQuery(q.0))
            .map_err(|r| ApiError::invalid("query", r.body_text()))
    }
}

pub struct ApiPath<T>(pub T);

impl<S, T> FromRequestParts<S> for ApiPath<T>
where
    T: DeserializeOwned + Send,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, Self::Rejection> {
        axum::extract::Path::<T>::from_request_parts(parts, state)
            .await
            .map(|p| ApiPath(p.0))
            .map_err(|r| ApiError::invalid("path", r.body_text()))
    }
}

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

fn error_body(e: &ApiError) -> ErrorBody {
    ErrorBody {
        status: e.status,
        code: e.code.as_str().to_owned(),
        message: e.message.clone(),
        details: e.details.clone(),
    }
}

// Upload

fn multipart_error(e: MultipartError) -> ApiError {
    if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
        ApiError::new(ErrorCode::PayloadTooLarge, e.body_text())
    } else {
        ApiError::invalid("body", e.body_text())
    }
}

async fn read_limited(
    field: &mut Field<'_>,
    limit: usize,
    part: &str,
) -> Result<Vec<u8>, ApiError> {
    let mut buf = Vec::new();
    while let Some(chunk) = field.chunk().await.map_err(multipart_error)? {
        if buf.len() + chunk.len() > limit {
            return Err(ApiError::too_large(part, limit));
        }
        buf.extend_from_slice(&chunk);
    }
    Ok(buf)
}

async fn upload(
    State(state): State<AppState>,
    headers: HeaderMap,
    multipart: Result<Multipart, MultipartRejection>,
) -> Result<(StatusCode, Json<UploadResponse>), ApiError> {
    let mut multipart = multipart.map_err(|r| ApiError::invalid("body", r.body_text()))?;
    let mut req = UploadRequest {
        idempotency_key: match headers.get(IDEMPOTENCY_HEADER) {
            Some(v) => Some(
                v.to_str()
                    .map_err(|_| ApiError::invalid(IDEMPOTENCY_HEADER, "must be visible ASCII"))?
                    .to_owned(),
            ),
            None => None,
        },
        ..UploadRequest::default()
    };
    let image_limit = state.service.max_image_bytes();
    while let Some(mut field) = multipart.next_field().await.map_err(multipart_error)? {
        let name = field.name().unwrap_or_default().to_owned();
        match name.as_str() {
            upload_parts::BEFORE | upload_parts::AFTER => {
                let file_name = field.file_name().map(str::to_owned);
                let bytes = read_limited(&mut field, image_limit, &name).await?;
                let image = Some(UploadedImage { file_name, bytes });
                if name == upload_parts::BEFORE {
                    req.before = image;
                } else {
                    req.after = image;
                }
            }
            upload_parts::PARTICIPANT_ID | upload_parts::STUDY_ID | upload_parts::METADATA => {
                let bytes = read_limited(&mut field, TEXT_PART_LIMIT, &name).await?;
                let text = String::from_utf8(bytes)
                    .map_err(|_| ApiError::invalid(&name, "must be UTF-8 text"))?;
                match name.as_str() {
                    upload_parts::PARTICIPANT_ID => req.participant_id = Some(text),
                    upload_parts::STUDY_ID => req.study_id = Some(text),
                    _ => req.metadata = Some(text),
                }
            }
            _ => {}
        }
    }

    let mode = state.mode;
    let service = state.service.clone();
    let (outcome, analysis) = blocking(move || {
        let outcome = service.upload(req)?;
        let analysis = match (&outcome, mode) {
            (UploadOutcome::Existing(_), _) => None,
            (UploadOutcome::Created(r), AnalysisMode::Inline) => {
                Some(match service.analyze(&r.occasion.occasion_id) {
                    Ok(_) => AnalysisReport {
                        status: AnalysisStatus::Completed,
                        error: None,
                    },
                    Err(e) => AnalysisReport {
                        status: AnalysisStatus::Failed,
                        error: Some(error_body(&e)),
                    },
                })
            }
            (UploadOutcome::Created(_), AnalysisMode::Background) => Some(AnalysisReport {
                status: AnalysisStatus::Scheduled,
                error: None,
            }),
            (UploadOutcome::Created(_), AnalysisMode::Deferred) => Some(AnalysisReport {
                status: AnalysisStatus::Deferred,
                error: None,
            }),
        };
        Ok((outcome, analysis))
    })
    .await?;

    match outcome {
        UploadOutcome::Created(record) => {
            let id = record.occasion.occasion_id.clone();
            if mode == AnalysisMode::Background {
                let service = state.service.clone();
                let id = id.clone();
                tokio::task::spawn_blocking(move || {
                    if let Err(e) = service.analyze(&id) {
                        tracing::warn!(occasion_id = %id, error = %e, "background analysis failed");
                    }
                });
            }
            tracing::info!(occasion_id = %id, "occasion uploaded");
            Ok((
                StatusCode::CREATED,
                Json(UploadResponse {
                    occasion_id: id,
                    state: record.state(),
                    version: record.version(),
                    duplicate: false,
                    analysis,
                }),
            ))
        }
        UploadOutcome::Existing(record) => Ok((
            StatusCode::OK,
            Json(UploadResponse {
                occasion_id: record.occasion.occasion_id.clone(),
                state: record.state(),
                version: record.version(),
                duplicate: true,
                analysis: None,
            }),
        )),
    }
}

// Participant loop

async fn predictions(
    State(state): State<AppState>,
    ApiPath(id): ApiPath<String>,
) -> Result<impl IntoResponse, ApiError> {
    let id = OccasionId::new(id);
    Ok(Json(
        blocking(move || state.service.predictions(&id)).await?,
    ))
}

async fn review(
    State(state): State<AppState>,
    ApiPath(id): ApiPath<String>,
    ApiJson(body): ApiJson<ReviewRequest>,
) -> Result<impl IntoResponse, ApiError> {
    let id = OccasionId::new(id);
    Ok(Json(
        blocking(move || state.service.review(&id, body)).await?,
    ))
}

async fn analyze(
    State(state): State<AppState>,
    ApiPath(id): ApiPath<String>,
) -> Result<impl IntoResponse, ApiError> {
    let id = OccasionId::new(id);
    let record = blocking(move || state.service.analyze(&id)).await?;
    Ok(Json(StateResponse {
        occasion_id: record.occasion.occasion_id.clone(),
        state: record.state(),
        version: record.version(),
    }))
}

// Researcher side

async fn detail(
    State(state): State<AppState>,
    ApiPath(id): ApiPath<String>,
) -> Result<impl IntoResponse, ApiError> {
    let id = OccasionId::new(id);
    Ok(Json(blocking(move || state.service.detail(&id)).await?))
}

async fn save_annotations(
    State(state): State<AppState>,
    ApiPath(id): ApiPath<String>,
    ApiJson(body): ApiJson<SaveAnnotationsRequest>,
) -> Result<impl IntoResponse, ApiError> {
    let id = OccasionId::new(id);
    Ok(Json(
        blocking(move || state.service.save_annotations(&id, body)).await?,
    ))
}

#[derive(Debug, Deserialize)]
struct DeleteQuery {
    expected_version: u64,
    initials: String,
}

async fn delete_annotation(
    State(state): State<AppState>,
    ApiPath((id, aid)): ApiPath<(String, String)>,
    ApiQuery(q): ApiQuery<DeleteQuery>,
) -> Result<impl IntoResponse, ApiError> {
    let id = OccasionId::new(id);
    let aid = AnnotationId::new(aid);
    Ok(Json(
        blocking(move || {
            state
                .service
                .delete_annotation(&id, &aid, q.expected_version, &q.initials)
        })
        .await?,
    ))
}

async fn finalize(
    State(state): State<AppState>,
    ApiPath(id): ApiPath<String>,
    ApiJson(body): ApiJson<FinalizeRequest>,
) -> Result<impl IntoResponse, ApiError> {
    let id = OccasionId::new(id);
    Ok(Json(
        blocking(move || state.service.finalize(&id, body)).await?,
    ))
}

async fn audit(
    State(state): State<AppState>,
    ApiPath(id): ApiPath<String>,
) -> Result<impl IntoResponse, ApiError> {
    let id = OccasionId::new(id);
    let occasion_id = id.clone();
    let events = blocking(move || state.service.audit(&id)).await?;
    Ok(Json(AuditTrailResponse {
        occasion_id,
        events,
    }))
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    format: Option<String>,
}

async fn export_study(
    State(state): State<AppState>,
    ApiPath(study): ApiPath<String>,
    ApiQuery(q): ApiQuery<ExportQuery>,
) -> Result<Response, ApiError> {
    let format = match q.format.as_deref().map(str::to_ascii_lowercase).as_deref() {
        None | Some("json") => ExportFormat::Json,
        Some("csv") => ExportFormat::Csv,
        Some(other) => {
            return Err(ApiError::invalid(
                "format",
                format!("expected json or csv, got {other:?}"),
            ))
        }
    };
    let study = StudyId::new(study);
    let file_stem: String = study
        .as_str()
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    let bytes = blocking(move || {
        let bundle = export::build_bundle(&state.service, &study)?;
        export::render(&bundle, format)
    })
    .await?;
    let disposition = format!(
        "attachment; filename=\"{file_stem}-export.{}\"",
        format.extension()
    );
    Ok((
        [
            (header::CONTENT_TYPE, format.content_type().to_owned()),
            (header::CONTENT_DISPOSITION, disposition),
        ],
        bytes,
    )
        .into_response())
}

#[derive(Debug, Deserialize)]
struct ListQuery {
    study_id: Option<String>,
}

async fn participant_occasions(
    State(state): State<AppState>,
    ApiPath(pid): ApiPath<String>,
    ApiQuery(q): ApiQuery<ListQuery>,
) -> Result<impl IntoResponse, ApiError> {
    let pid = ParticipantId::new(pid);
    let study = q.study_id.map(StudyId::new);
    Ok(Json(
        blocking(move || state.service.participant_occasions(&pid, study.as_ref())).await?,
    ))
}

// Food list

async fn foods(State(state): State<AppState>) -> Json<FoodListResponse> {
    let db = state.service.foods();
    Json(FoodListResponse {
        hash: db.content_hash(),
        count: db.len(),
        items: db.items().to_vec(),
    })
}

async fn food_hash(State(state): State<AppState>) -> Json<FoodHashResponse> {
    let db = state.service.foods();
    Json(FoodHashResponse {
        hash: db.content_hash(),
        count: db.len(),
    })
}

#[derive(Debug, Deserialize)]
struct SearchQuery {
    #[serde(default)]
    q: String,
    limit: Option<usize>,
}

async fn search_foods(
    State(state): State<AppState>,
    ApiQuery(q): ApiQuery<SearchQuery>,
) -> Json<SearchResponse> {
    let limit = q.limit.unwrap_or(DEFAULT_SEARCH_LIMIT);
    let db = state.service.foods();
    let results = db.search(&q.q).into_iter().take(limit).cloned().collect();
    Json(SearchResponse {
        query: q.q,
        limit,
        results,
    })
}

// Images

async fn blob(
    State(state): State<AppState>,
    ApiPath(hash): ApiPath<String>,
) -> Result<Response, ApiError> {
    let bytes = blocking(move || state.service.blob(&hash)).await?;
    let mime = MediaType::sniff(&bytes).map_or("application/octet-stream", MediaType::mime);
    Ok((
        [
            (header::CONTENT_TYPE, mime),
            (
                header::CACHE_CONTROL,
                "private, max-age=31536000, immutable",
            ),
        ],
        bytes,
    )
        .into_response())
}

#[derive(Debug, Deserialize)]
struct ThumbnailQuery {
    size: Option<u32>,
}

async fn blob_thumbnail(
    State(state): State<AppState>,
    ApiPath(hash): ApiPath<String>,
    ApiQuery(q): ApiQuery<ThumbnailQuery>,
) -> Result<Response, ApiError> {
    let size = q.size.unwrap_or(DEFAULT_THUMBNAIL_PX);
    if !(1..=MAX_THUMBNAIL_PX).contains(&size) {
        return Err(ApiError::invalid(
            "size",
            format!("must be between 1 and {MAX_THUMBNAIL_PX}"),
        ));
    }
    let png = blocking(move || thumbnail(&state.service.blob(&hash)?, size)).await?;
    Ok((
        [
            (header::CONTENT_TYPE, "image/png"),
            (
                header::CACHE_CONTROL,
                "private, max-age=31536000, immutable",
            ),
        ],
        png,
    )
        .into_response())
}

//! Blocking HTTP client for the participant endpoints.

use std::path::Path;
use std::time::Duration;

use foodrec_core::api::{
    upload_parts, ErrorBody, FoodHashResponse, FoodListResponse, ParticipantOccasions,
    PredictionsResponse, ReviewRequest, ReviewResponse, UploadResponse, API_PREFIX,
    IDEMPOTENCY_HEADER,
};
use reqwest::blocking::{multipart, Client as Http, RequestBuilder};
use serde::de::DeserializeOwned;

use crate::error::CliError;

pub struct Client {
    base: String,
    token: String,
    http: Http,
}

impl Client {
    pub fn new(server_url: &str, token: &str) -> Result<Client, CliError> {
        let http = Http::builder()
            .connect_timeout(Duration::from_secs(5))
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| CliError::Local(format!("http client: {e}")))?;
        Ok(Client {
            base: format!("{}{API_PREFIX}", server_url.trim_end_matches('/')),
            token: token.to_owned(),
            http,
        })
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    fn send<T: DeserializeOwned>(&self, req: RequestBuilder) -> Result<T, CliError> {
        let resp = req
            .bearer_auth(&self.token)
            .send()
            .map_err(|e| CliError::Network(error_chain(&e)))?;
        let status = resp.status();
        let bytes = resp
            .bytes()
            .map_err(|e| CliError::Network(error_chain(&e)))?;
        if status.is_success() {
            serde_json::from_slice(&bytes).map_err(|e| CliError::Protocol(e.to_string()))
        } else {
            Err(CliError::Api(
                serde_json::from_slice(&bytes).unwrap_or_else(|_| ErrorBody {
                    status: status.as_u16(),
                    code: "INTERNAL".into(),
                    message: String::from_utf8_lossy(&bytes).into_owned(),
                    details: None,
                }),
            ))
        }
    }

    pub fn food_hash(&self) -> Result<FoodHashResponse, CliError> {
        self.send(self.http.get(self.url("/foods/hash")))
    }

    pub fn foods(&self) -> Result<FoodListResponse, CliError> {
        self.send(self.http.get(self.url("/foods")))
    }

    pub fn upload(
        &self,
        participant_id: &str,
        study_id: &str,
        metadata: &foodrec_core::CaptureMetadata,
        before: &Path,
        after: &Path,
        idempotency_key: &str,
    ) -> Result<UploadResponse, CliError> {
        let part = |path: &Path| -> Result<multipart::Part, CliError> {
            let bytes = std::fs::read(path).map_err(|_| CliError::FileNotFound(path.to_owned()))?;
            let name = path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            Ok(multipart::Part::bytes(bytes).file_name(name))
        };
        let form = multipart::Form::new()
            .text(upload_parts::PARTICIPANT_ID, participant_id.to_owned())
            .text(upload_parts::STUDY_ID, study_id.to_owned())
            .text(
                upload_parts::METADATA,
                serde_json::to_string(metadata).expect("metadata serializes"),
            )
            .part(upload_parts::BEFORE, part(before)?)
            .part(upload_parts::AFTER, part(after)?);
        self.send(
            self.http
                .post(self.url("/occasions"))
                .header(IDEMPOTENCY_HEADER, idempotency_key)
                .multipart(form),
        )
    }

    pub fn predictions(&self, occasion_id: &str) -> Result<PredictionsResponse, CliError> {
        self.send(
            self.http
                .get(self.url(&format!("/occasions/{occasion_id}/predictions"))),
        )
    }

    pub fn review(
        &self,
        occasion_id: &str,
        review: &ReviewRequest,
    ) -> Result<ReviewResponse, CliError> {
        self.send(
            self.http
                .post(self.url(&format!("/occasions/{occasion_id}/review")))
                .json(review),
        )
    }

    pub fn participant_occasions(
        &self,
        participant_id: &str,
    ) -> Result<ParticipantOccasions, CliError> {
        self.send(
            self.http
                .get(self.url(&format!("/participants/{participant_id}/occasions"))),
        )
    }
}

fn error_chain(e: &dyn std::error::Error) -> String {
    let mut out = e.to_string();
    let mut source = e.source();
    while let Some(s) = source {
        out.push_str(": ");
        out.push_str(&s.to_string());
        source = s.source();
    }
    out
}

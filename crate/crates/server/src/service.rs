use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Utc};
use foodrec_core::analysis::{self, build_analyzer, AnalysisInput, Analyzer, AnalyzerRef};
use foodrec_core::api::{
    blob_url, thumbnail_url, AnnotationInput, AnnotationsResponse, FinalizeRequest, ImageView,
    OccasionDetail, OccasionPreview, ParticipantOccasions, ParticipantSection, PredictionStatus,
    PredictionsResponse, ResearcherSection, ReviewRequest, ReviewResponse, SaveAnnotationsRequest,
    StateResponse,
};
use foodrec_core::store::AuditEntry;
use foodrec_core::{
    merge_review, probe_image, refine, validate_box, AnnotationId, AuditAction, AuditActor,
    AuditEvent, BlobStore, CaptureMetadata, EatingOccasion, EnergySource, FieldViolation, FoodCode,
    FoodDatabase, ImageCapture, ImageKind, Initials, LifecycleState, OccasionId, OccasionRecord,
    ParticipantId, ParticipantReview, RecordStore, ResearcherAnnotation, Resolution, ResolveError,
    StoreError, StudyId,
};

use crate::config::ServerConfig;
use crate::error::{box_violations, ApiError, ErrorCode};

/// One image part of an upload.
#[derive(Debug, Clone, Default)]
pub struct UploadedImage {
    pub file_name: Option<String>,
    pub bytes: Vec<u8>,
}

/// The parts of an upload as received. Everything is optional here so that
/// missing parts are reported together with other invalid fields.
#[derive(Debug, Clone, Default)]
pub struct UploadRequest {
    pub participant_id: Option<String>,
    pub study_id: Option<String>,
    pub metadata: Option<String>,
    pub before: Option<UploadedImage>,
    pub after: Option<UploadedImage>,
    pub idempotency_key: Option<String>,
}

#[derive(Debug, Clone)]
pub enum UploadOutcome {
    Created(OccasionRecord),
    /// The idempotency key was seen before; nothing new was stored.
    Existing(OccasionRecord),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ResumeReport {
    pub analyzed: Vec<OccasionId>,
    pub refined: Vec<OccasionId>,
    pub failed: Vec<(OccasionId, String)>,
}

#[derive(Debug, Clone)]
pub struct ServiceOptions {
    pub max_image_bytes: usize,
    /// Studies accepting uploads; empty accepts any id.
    pub studies: Vec<StudyId>,
}

impl Default for ServiceOptions {
    fn default() -> Self {
        Self {
            max_image_bytes: crate::config::DEFAULT_MAX_IMAGE_BYTES,
            studies: Vec::new(),
        }
    }
}

const MAX_KEY_LEN: usize = 200;

/// The server's domain logic over the stores, independent of HTTP. All
/// methods block on storage and are meant to run off the async executor.
pub struct Service {
    records: RecordStore,
    blobs: BlobStore,
    foods: RwLock<Arc<FoodDatabase>>,
    analyzer: Result<Box<dyn Analyzer>, String>,
    studies: BTreeSet<StudyId>,
    max_image_bytes: usize,
    failures: Mutex<HashMap<OccasionId, ApiError>>,
}

fn now() -> DateTime<Utc> {
    Utc::now()
}

impl Service {
    pub fn new(
        records: RecordStore,
        blobs: BlobStore,
        foods: FoodDatabase,
        analyzer: Result<Box<dyn Analyzer>, String>,
        options: ServiceOptions,
    ) -> Self {
        Self {
            records,
            blobs,
            foods: RwLock::new(Arc::new(foods)),
            analyzer,
            studies: options.studies.into_iter().collect(),
            max_image_bytes: options.max_image_bytes,
            failures: Mutex::default(),
        }
    }

    /// In-memory stores; for tests and throwaway servers.
    pub fn in_memory(
        foods: FoodDatabase,
        analyzer: Box<dyn Analyzer>,
        options: ServiceOptions,
    ) -> Self {
        Self::new(
            RecordStore::open_in_memory().expect("in-memory sqlite"),
            BlobStore::in_memory(),
            foods,
            Ok(analyzer),
            options,
        )
    }

    pub fn from_config(config: &ServerConfig) -> anyhow::Result<Self> {
        let foods = match &config.food_list {
            Some(path) => FoodDatabase::from_path(path)
                .map_err(|e| anyhow::anyhow!("food list {}: {e}", path.display()))?,
            None => {
                tracing::warn!("no food list configured; search will return nothing");
                FoodDatabase::from_items(Vec::new())?
            }
        };
        let analyzer = build_analyzer(
            AnalyzerRef {
                analyzer_id: config.analyzer_id(),
                kind: config.analyzer_kind,
            },
            config.sidecar_dir.clone(),
        )
        .map_err(|e| e.to_string());
        if let Err(e) = &analyzer {
            tracing::warn!(error = %e, "analysis is unavailable");
        }
        Ok(Self::new(
            RecordStore::open(config.record_path())?,
            BlobStore::open(config.blob_path())?,
            foods,
            analyzer,
            ServiceOptions {
                max_image_bytes: config.max_image_bytes,
                studies: config
                    .studies
                    .iter()
                    .map(|s| StudyId::new(s.as_str()))
                    .collect(),
            },
        ))
    }

    pub fn records(&self) -> &RecordStore {
        &self.records
    }

    pub fn blobs(&self) -> &BlobStore {
        &self.blobs
    }

    pub fn max_image_bytes(&self) -> usize {
        self.max_image_bytes
    }

    pub fn foods(&self) -> Arc<FoodDatabase> {
        self.foods.read().unwrap_or_else(|p| p.into_inner()).clone()
    }

    /// Swaps in a new food list. Requests already holding the old list
    /// finish with it.
    pub fn replace_foods(&self, db: FoodDatabase) {
        *self.foods.write().unwrap_or_else(|p| p.into_inner()) = Arc::new(db);
    }

    fn load(&self, id: &OccasionId) -> Result<OccasionRecord, ApiError> {
        match self.records.load_occasion(id) {
            Err(StoreError::NotFound(_)) => Err(ApiError::not_found(format!("occasion {id}"))),
            other => Ok(other?),
        }
    }

    fn save(
        &self,
        record: &mut OccasionRecord,
        expected: u64,
        actor: AuditActor,
        action: AuditAction,
        at: DateTime<Utc>,
    ) -> Result<u64, ApiError> {
        Ok(self
            .records
            .save_occasion(record, expected, AuditEntry::new(actor, action, at))?)
    }

    pub fn study_exists(&self, study: &StudyId) -> Result<bool, ApiError> {
        Ok(self.studies.contains(study) || self.records.study_exists(study)?)
    }

    // Upload

    pub fn upload(&self, req: UploadRequest) -> Result<UploadOutcome, ApiError> {
        if let Some(key) = &req.idempotency_key {
            if key.trim().is_empty() || key.len() > MAX_KEY_LEN {
                return Err(ApiError::invalid(
                    "Idempotency-Key",
                    format!("must be 1 to {MAX_KEY_LEN} characters"),
                ));
            }
            if let Some(existing) = self.records.find_by_idempotency_key(key)? {
                return Ok(UploadOutcome::Existing(existing));
            }
        }

        let mut violations = Vec::new();
        let participant = required_text(
            req.participant_id.as_deref(),
            "participant_id",
            &mut violations,
        );
        let study = required_text(req.study_id.as_deref(), "study_id", &mut violations);
        if let Some(s) = &study {
            if !self.studies.is_empty() && !self.studies.contains(&StudyId::new(s.as_str())) {
                violations.push(FieldViolation::new("study_id", "unknown study"));
            }
        }
        let metadata = match req.metadata.as_deref() {
            None => {
                violations.push(FieldViolation::new("metadata", "part is missing"));
                None
            }
            Some(text) => match serde_json::from_str::<CaptureMetadata>(text) {
                Ok(m) => {
                    violations.extend(m.violations());
                    Some(m)
                }
                Err(e) => {
                    violations.push(FieldViolation::new("metadata", e.to_string()));
                    None
                }
            },
        };
        let before = self.probe_part(ImageKind::Before, req.before.as_ref(), &mut violations)?;
        let after = self.probe_part(ImageKind::After, req.after.as_ref(), &mut violations)?;
        let (Some(participant), Some(study), Some(metadata), Some(before), Some(after)) =
            (participant, study, metadata, before, after)
        else {
            return Err(ApiError::validation(violations));
        };
        if !violations.is_empty() {
            return Err(ApiError::validation(violations));
        }

        let before_part = req.before.as_ref().expect("probed");
        let after_part = req.after.as_ref().expect("probed");
        self.blobs.put(&before_part.bytes)?;
        self.blobs.put(&after_part.bytes)?;

        let at = now();
        let occasion = EatingOccasion {
            occasion_id: OccasionId::generate(),
            participant_id: ParticipantId::new(participant),
            study_id: StudyId::new(study),
            before,
            after: Some(after),
            metadata,
            state: LifecycleState::Uploaded,
            version: 0,
        };
        let mut record = OccasionRecord::new_uploaded(occasion, at);
        record.idempotency_key = req.idempotency_key.clone();
        record.before_file_name = before_part.file_name.as_deref().and_then(base_name);
        let actor = AuditActor::Participant(record.occasion.participant_id.clone());
        let entry = AuditEntry::new(actor, AuditAction::Uploaded, at);
        match self.records.save_occasion(&mut record, 0, entry) {
            Ok(_) => Ok(UploadOutcome::Created(record)),
            // Lost a race against a retry carrying the same key.
            Err(StoreError::DuplicateIdempotencyKey(existing)) => {
                Ok(UploadOutcome::Existing(self.load(&existing)?))
            }
            Err(e) => Err(e.into()),
        }
    }

    fn probe_part(
        &self,
        kind: ImageKind,
        part: Option<&UploadedImage>,
        violations: &mut Vec<FieldViolation>,
    ) -> Result<Option<ImageCapture>, ApiError> {
        let field = match kind {
            ImageKind::Before => "before",
            ImageKind::After => "after",
        };
        let Some(part) = part else {
            violations.push(FieldViolation::new(field, "image part is missing"));
            return Ok(None);
        };
        if part.bytes.len() > self.max_image_bytes {
            return Err(ApiError::too_large(field, self.max_image_bytes));
        }
        match probe_image(kind, &part.bytes) {
            Ok(capture) => Ok(Some(capture)),
            Err(e) => {
                violations.push(FieldViolation::new(field, e.to_string()));
                Ok(None)
            }
        }
    }

    // Analysis

    /// Runs the analyzer on an Uploaded occasion and moves it to Analyzed.
    /// A failure is remembered so that pollers see it instead of waiting.
    pub fn analyze(&self, id: &OccasionId) -> Result<OccasionRecord, ApiError> {
        let mut record = self.load(id)?;
        if record.state() != LifecycleState::Uploaded {
            return Err(ApiError::illegal_transition(
                record.state(),
                LifecycleState::Analyzed,
            ));
        }
        let analyzer = self
            .analyzer
            .as_deref()
            .map_err(|e| ApiError::new(ErrorCode::AnalysisUnavailable, e.clone()))?;
        let bytes = self
            .blobs
            .get(&record.occasion.before.content_hash)
            .map_err(|e| ApiError::internal(format!("before image unreadable: {e}")))?;
        let input = AnalysisInput {
            image: &record.occasion.before,
            bytes: &bytes,
            file_name: record.before_file_name.as_deref(),
            metadata: &record.occasion.metadata,
        };
        let predictions = match analysis::analyze(&input, analyzer) {
            Ok(p) => p,
            Err(e) => {
                let err = ApiError::from(e);
                self.failures().insert(id.clone(), err.clone());
                return Err(err);
            }
        };
        self.failures().remove(id);
        record.predictions = predictions;
        let expected = record.version();
        let at = now();
        record.advance(LifecycleState::Analyzed, at)?;
        self.save(
            &mut record,
            expected,
            AuditActor::System,
            AuditAction::Analyzed,
            at,
        )?;
        Ok(record)
    }

    fn failures(&self) -> std::sync::MutexGuard<'_, HashMap<OccasionId, ApiError>> {
        self.failures.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn analysis_failure(&self, id: &OccasionId) -> Option<ApiError> {
        self.failures().get(id).cloned()
    }

    // Predictions

    pub fn predictions(&self, id: &OccasionId) -> Result<PredictionsResponse, ApiError> {
        let record = self.load(id)?;
        let pending = record.state() == LifecycleState::Uploaded;
        if pending {
            if let Some(err) = self.analysis_failure(id) {
                return Err(err);
            }
        }
        Ok(PredictionsResponse {
            occasion_id: record.occasion.occasion_id.clone(),
            state: record.state(),
            version: record.version(),
            status: if pending {
                PredictionStatus::Pending
            } else {
                PredictionStatus::Ready
            },
            predictions: if pending {
                Vec::new()
            } else {
                record.predictions
            },
        })
    }

    // Participant review and refinement

    pub fn review(&self, id: &OccasionId, req: ReviewRequest) -> Result<ReviewResponse, ApiError> {
        let mut record = self.load(id)?;
        if record.state() != LifecycleState::Analyzed {
            return Err(ApiError::illegal_transition(
                record.state(),
                LifecycleState::ParticipantReviewed,
            ));
        }
        let at = now();
        let review = ParticipantReview {
            verdicts: req.verdicts,
            additions: req.additions,
            submitted_at: req.submitted_at.unwrap_or(at),
        };
        let violations = review.violations(&record.predictions, &record.occasion.before);
        if !violations.is_empty() {
            return Err(ApiError::validation(violations));
        }
        let confirmed = merge_review(&record.predictions, &review)
            .map_err(|e| ApiError::invalid("verdicts", e.to_string()))?;
        record.review = Some(review);
        record.participant_confirmed = confirmed;
        let expected = record.version();
        record.advance(LifecycleState::ParticipantReviewed, at)?;
        let actor = AuditActor::Participant(record.occasion.participant_id.clone());
        self.save(
            &mut record,
            expected,
            actor,
            AuditAction::ReviewSubmitted,
            at,
        )?;
        self.refine_record(&mut record)?;
        Ok(ReviewResponse {
            occasion_id: record.occasion.occasion_id.clone(),
            state: record.state(),
            version: record.version(),
            confirmed: record.participant_confirmed.clone(),
            annotations: record.annotations.clone(),
        })
    }

    fn refine_record(&self, record: &mut OccasionRecord) -> Result<(), ApiError> {
        let at = now();
        let foods = self.foods();
        let refinement = refine(
            &record.participant_confirmed,
            &record.occasion.before,
            &foods,
            &record.occasion.metadata,
            at,
        );
        record.annotations = refinement.drafts;
        record.energy_estimate = Some(refinement.estimate);
        let expected = record.version();
        record.advance(LifecycleState::Refined, at)?;
        self.save(
            record,
            expected,
            AuditActor::System,
            AuditAction::Refined,
            at,
        )?;
        Ok(())
    }

    // Researcher side

    pub fn detail(&self, id: &OccasionId) -> Result<OccasionDetail, ApiError> {
        Ok(detail_of(self.load(id)?))
    }

    pub fn save_annotations(
        &self,
        id: &OccasionId,
        req: SaveAnnotationsRequest,
    ) -> Result<AnnotationsResponse, ApiError> {
        let mut record = self.load(id)?;
        require_refined(&record, "saving annotations")?;
        let initials = parse_initials(&req.initials)?;
        if req.expected_version != record.version() {
            return Err(ApiError::version_conflict(record.version()));
        }
        let at = now();
        let annotations = self.build_annotations(&record, &initials, req.annotations, at)?;
        record.annotations = annotations;
        self.save(
            &mut record,
            req.expected_version,
            AuditActor::Researcher(initials),
            AuditAction::AnnotationSaved,
            at,
        )?;
        Ok(annotations_response(&record))
    }

    fn build_annotations(
        &self,
        record: &OccasionRecord,
        initials: &Initials,
        inputs: Vec<AnnotationInput>,
        at: DateTime<Utc>,
    ) -> Result<Vec<ResearcherAnnotation>, ApiError> {
        let foods = self.foods();
        let image = &record.occasion.before;
        let mut violations = Vec::new();
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(inputs.len());
        for (i, input) in inputs.into_iter().enumerate() {
            let field = |name: &str| format!("annotations[{i}].{name}");
            if let Err(v) = validate_box(&input.bbox, image) {
                violations.extend(box_violations(&field("box"), &v));
            }
            let label = input.label.trim().to_owned();
            if label.is_empty() {
                violations.push(FieldViolation::new(
                    field("label"),
                    "label must not be empty",
                ));
            }
            if let Some(kcal) = input.energy_kcal {
                if !(kcal >= 0.0 && kcal.is_finite()) {
                    violations.push(FieldViolation::new(
                        field("energy_kcal"),
                        "must be a finite non-negative number",
                    ));
                }
            }
            if let Some(aid) = &input.annotation_id {
                if aid.as_str().trim().is_empty() || !seen.insert(aid.clone()) {
                    violations.push(FieldViolation::new(
                        field("annotation_id"),
                        "annotation ids must be non-empty and unique",
                    ));
                }
            }
            let food_code = match input.food_code.as_deref().map(str::trim) {
                Some(code) if !code.is_empty() => match FoodCode::parse(code) {
                    Ok(c) if foods.by_code(&c).is_some() => Some(c),
                    Ok(_) => {
                        violations.push(FieldViolation::new(
                            field("food_code"),
                            "code is not in the food list",
                        ));
                        None
                    }
                    Err(e) => {
                        violations.push(FieldViolation::new(field("food_code"), e.to_string()));
                        None
                    }
                },
                _ if label.is_empty() => None,
                _ => match foods.resolve(&label) {
                    Ok(Resolution::Matched(item)) => Some(item.code.clone()),
                    Ok(Resolution::FreeText(_)) | Err(ResolveError::EmptyEntry) => None,
                    Err(ResolveError::Ambiguous(codes)) => {
                        let codes: Vec<&str> = codes.iter().map(FoodCode::as_str).collect();
                        violations.push(FieldViolation::new(
                            field("label"),
                            format!("name matches several food codes: {}", codes.join(", ")),
                        ));
                        None
                    }
                },
            };
            let energy_source = match (input.energy_kcal, input.energy_source) {
                (None, _) => None,
                (Some(_), Some(source)) => Some(source),
                (Some(_), None) => Some(EnergySource::Manual),
            };
            let candidate = ResearcherAnnotation {
                annotation_id: input.annotation_id.unwrap_or_else(AnnotationId::generate),
                initials: initials.clone(),
                bbox: input.bbox,
                label,
                food_code,
                energy_kcal: input.energy_kcal,
                energy_source,
                created_at: at,
            };
            // Unchanged annotations keep their original author and time.
            let kept = record
                .annotations
                .iter()
                .find(|a| a.annotation_id == candidate.annotation_id && a.same_content(&candidate))
                .cloned();
            out.push(kept.unwrap_or(candidate));
        }
        if violations.is_empty() {
            Ok(out)
        } else {
            Err(ApiError::validation(violations))
        }
    }

    pub fn delete_annotation(
        &self,
        id: &OccasionId,
        annotation_id: &AnnotationId,
        expected_version: u64,
        initials: &str,
    ) -> Result<AnnotationsResponse, ApiError> {
        let mut record = self.load(id)?;
        require_refined(&record, "deleting annotations")?;
        let initials = parse_initials(initials)?;
        let Some(pos) = record
            .annotations
            .iter()
            .position(|a| &a.annotation_id == annotation_id)
        else {
            return Err(ApiError::not_found(format!("annotation {annotation_id}")));
        };
        if expected_version != record.version() {
            return Err(ApiError::version_conflict(record.version()));
        }
        record.annotations.remove(pos);
        self.save(
            &mut record,
            expected_version,
            AuditActor::Researcher(initials),
            AuditAction::AnnotationDeleted,
            now(),
        )?;
        Ok(annotations_response(&record))
    }

    pub fn finalize(
        &self,
        id: &OccasionId,
        req: FinalizeRequest,
    ) -> Result<StateResponse, ApiError> {
        let mut record = self.load(id)?;
        if record.state() != LifecycleState::Refined {
            return Err(ApiError::illegal_transition(
                record.state(),
                LifecycleState::Finalized,
            ));
        }
        let initials = parse_initials(&req.initials)?;
        if req.expected_version != record.version() {
            return Err(ApiError::version_conflict(record.version()));
        }
        if record.annotations.is_empty() {
            return Err(ApiError::invalid("annotations", "no annotations"));
        }
        let at = now();
        record.advance(LifecycleState::Finalized, at)?;
        self.save(
            &mut record,
            req.expected_version,
            AuditActor::Researcher(initials),
            AuditAction::Finalized,
            at,
        )?;
        Ok(StateResponse {
            occasion_id: record.occasion.occasion_id.clone(),
            state: record.state(),
            version: record.version(),
        })
    }

    pub fn audit(&self, id: &OccasionId) -> Result<Vec<AuditEvent>, ApiError> {
        self.load(id)?;
        Ok(self.records.audit_events(id)?)
    }

    pub fn participant_occasions(
        &self,
        participant: &ParticipantId,
        study: Option<&StudyId>,
    ) -> Result<ParticipantOccasions, ApiError> {
        let occasions = self
            .records
            .list_occasions(participant, study)?
            .into_iter()
            .map(|s| OccasionPreview {
                before_url: blob_url(&s.before.content_hash),
                before_thumbnail_url: thumbnail_url(&s.before.content_hash),
                after_url: s.after.as_ref().map(|a| blob_url(&a.content_hash)),
                after_thumbnail_url: s.after.as_ref().map(|a| thumbnail_url(&a.content_hash)),
                occasion_id: s.occasion_id,
                study_id: s.study_id,
                state: s.state,
                version: s.version,
                captured_at: s.captured_at,
            })
            .collect();
        Ok(ParticipantOccasions {
            participant_id: participant.clone(),
            occasions,
        })
    }

    pub fn blob(&self, hash: &str) -> Result<Vec<u8>, ApiError> {
        match self.blobs.get(hash) {
            Ok(bytes) => Ok(bytes),
            Err(StoreError::NotFound(_)) => Err(ApiError::not_found(format!("blob {hash}"))),
            Err(e) => Err(e.into()),
        }
    }

    /// Finishes work interrupted by a restart: analysis of Uploaded
    /// occasions (unless `analyze_uploaded` is false) and refinement of
    /// reviewed ones.
    pub fn resume(&self, analyze_uploaded: bool) -> Result<ResumeReport, ApiError> {
        let mut report = ResumeReport::default();
        if analyze_uploaded {
            for id in self
                .records
                .occasion_ids_in_state(LifecycleState::Uploaded)?
            {
                match self.analyze(&id) {
                    Ok(_) => report.analyzed.push(id),
                    Err(e) => report.failed.push((id, e.to_string())),
                }
            }
        }
        for id in self
            .records
            .occasion_ids_in_state(LifecycleState::ParticipantReviewed)?
        {
            let result = self.load(&id).and_then(|mut r| self.refine_record(&mut r));
            match result {
                Ok(()) => report.refined.push(id),
                Err(e) => report.failed.push((id, e.to_string())),
            }
        }
        Ok(report)
    }
}

fn required_text(
    value: Option<&str>,
    field: &str,
    violations: &mut Vec<FieldViolation>,
) -> Option<String> {
    match value.map(str::trim) {
        Some(v) if !v.is_empty() => Some(v.to_owned()),
        Some(_) => {
            violations.push(FieldViolation::new(field, "must not be empty"));
            None
        }
        None => {
            violations.push(FieldViolation::new(field, "part is missing"));
            None
        }
    }
}

fn base_name(name: &str) -> Option<String> {
    let base = name.rsplit(['/', '\\']).next()?.trim();
    (!base.is_empty() && base != "." && base != "..").then(|| base.to_owned())
}

fn parse_initials(s: &str) -> Result<Initials, ApiError> {
    Initials::parse(s.trim()).map_err(|e| ApiError::invalid("initials", e.to_string()))
}

fn require_refined(record: &OccasionRecord, operation: &str) -> Result<(), ApiError> {
    if record.state() == LifecycleState::Refined {
        Ok(())
    } else {
        Err(ApiError::wrong_state(record.state(), operation))
    }
}

fn annotations_response(record: &OccasionRecord) -> AnnotationsResponse {
    AnnotationsResponse {
        occasion_id: record.occasion.occasion_id.clone(),
        state: record.state(),
        version: record.version(),
        annotations: record.annotations.clone(),
    }
}

fn image_view(capture: &ImageCapture) -> ImageView {
    ImageView {
        url: blob_url(&capture.content_hash),
        thumbnail_url: thumbnail_url(&capture.content_hash),
        capture: capture.clone(),
    }
}

pub fn detail_of(record: OccasionRecord) -> OccasionDetail {
    let o = record.occasion;
    OccasionDetail {
        finalized: o.state == LifecycleState::Finalized,
        before: image_view(&o.before),
        after: o.after.as_ref().map(image_view),
        occasion_id: o.occasion_id,
        participant_id: o.participant_id,
        study_id: o.study_id,
        state: o.state,
        version: o.version,
        metadata: o.metadata,
        participant: ParticipantSection {
            predictions: record.predictions,
            review: record.review,
            confirmed: record.participant_confirmed,
        },
        researcher: ResearcherSection {
            annotations: record.annotations,
            energy_estimate: record.energy_estimate,
        },
        history: record.history,
    }
}

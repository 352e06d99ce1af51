use std::collections::BTreeSet;

use foodrec_core::api::{
    ExportBundle, ExportManifest, ExportedAnnotation, ExportedOccasion, EXPORT_CSV_HEADER,
    EXPORT_SCHEMA_VERSION,
};
use foodrec_core::{canonical, LifecycleState, StudyId};
use serde::Deserialize;

use crate::error::ApiError;
use crate::service::Service;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    #[default]
    Json,
    Csv,
}

impl ExportFormat {
    pub fn content_type(self) -> &'static str {
        match self {
            ExportFormat::Json => "application/json",
            ExportFormat::Csv => "text/csv; charset=utf-8",
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Json => "json",
            ExportFormat::Csv => "csv",
        }
    }
}

/// Collects every finalized occasion of a study, ordered by occasion id.
pub fn build_bundle(service: &Service, study: &StudyId) -> Result<ExportBundle, ApiError> {
    if !service.study_exists(study)? {
        return Err(ApiError::not_found(format!("study {study}")));
    }
    let records = service.records().occasions_in_study(study)?;
    let mut exported_at = None;
    for r in &records {
        let events = service.records().audit_events(&r.occasion.occasion_id)?;
        if let Some(last) = events.iter().map(|e| e.at).max() {
            exported_at = exported_at.max(Some(last));
        }
    }

    let mut images = BTreeSet::new();
    let mut occasions = Vec::new();
    for r in records {
        if r.state() != LifecycleState::Finalized {
            continue;
        }
        let o = r.occasion;
        images.insert(o.before.content_hash.clone());
        if let Some(a) = &o.after {
            images.insert(a.content_hash.clone());
        }
        occasions.push(ExportedOccasion {
            occasion_id: o.occasion_id,
            participant_id: o.participant_id,
            study_id: o.study_id,
            state: o.state,
            version: o.version,
            metadata: o.metadata,
            before: o.before,
            after: o.after,
            predictions: r.predictions,
            participant_confirmed: r.participant_confirmed,
            researcher_annotations: r
                .annotations
                .into_iter()
                .map(|a| ExportedAnnotation {
                    free_text: a.food_code.is_none(),
                    annotation_id: a.annotation_id,
                    initials: a.initials.as_str().to_owned(),
                    bbox: a.bbox,
                    label: a.label,
                    food_code: a.food_code,
                    energy_kcal: a.energy_kcal,
                    energy_source: a.energy_source,
                    created_at: a.created_at,
                })
                .collect(),
            energy_estimate: r.energy_estimate,
            history: r.history,
        });
    }
    Ok(ExportBundle {
        manifest: ExportManifest {
            schema_version: EXPORT_SCHEMA_VERSION.to_owned(),
            study_id: study.clone(),
            exported_at,
            food_list_hash: service.foods().content_hash(),
            occasion_count: occasions.len(),
            annotation_count: occasions
                .iter()
                .map(|o| o.researcher_annotations.len())
                .sum(),
            images: images.into_iter().collect(),
        },
        occasions,
    })
}

pub fn render(bundle: &ExportBundle, format: ExportFormat) -> Result<Vec<u8>, ApiError> {
    match format {
        ExportFormat::Json => {
            canonical::to_vec(bundle).map_err(|e| ApiError::internal(e.to_string()))
        }
        ExportFormat::Csv => render_csv(bundle).map_err(|e| ApiError::internal(e.to_string())),
    }
}

fn render_csv(bundle: &ExportBundle) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(EXPORT_CSV_HEADER)?;
    for o in &bundle.occasions {
        for a in &o.researcher_annotations {
            w.write_record([
                o.occasion_id.as_str(),
                o.participant_id.as_str(),
                &a.initials,
                &a.label,
                a.food_code.as_ref().map_or("", |c| c.as_str()),
                &a.bbox.x_px.to_string(),
                &a.bbox.y_px.to_string(),
                &a.bbox.w_px.to_string(),
                &a.bbox.h_px.to_string(),
                &a.energy_kcal.map(|k| k.to_string()).unwrap_or_default(),
                o.state.as_str(),
            ])?;
        }
    }
    w.into_inner().map_err(|e| csv::Error::from(e.into_error()))
}

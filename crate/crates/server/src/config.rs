use std::net::{IpAddr, Ipv4Addr};
use std::path::{Path, PathBuf};

use foodrec_core::analysis::AnalyzerKind;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_MAX_IMAGE_BYTES: usize = 20 * 1024 * 1024;

/// When analysis runs relative to the upload that triggers it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisMode {
    /// Before the upload response is sent.
    #[default]
    Inline,
    /// On a worker after the upload response; clients poll for results.
    Background,
    /// Only when `POST /occasions/{id}/analyze` is called.
    Deferred,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid value for {var}: {reason}")]
    Env { var: &'static str, reason: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub bind: IpAddr,
    pub port: u16,
    /// Root for `blobs/` and `data/` unless those are set on their own.
    pub data_dir: PathBuf,
    pub blob_dir: Option<PathBuf>,
    pub record_dir: Option<PathBuf>,
    pub food_list: Option<PathBuf>,
    pub participant_token: Option<String>,
    pub researcher_token: Option<String>,
    pub analyzer_kind: AnalyzerKind,
    pub analyzer_id: Option<String>,
    pub sidecar_dir: Option<PathBuf>,
    pub analysis_mode: AnalysisMode,
    pub max_image_bytes: usize,
    /// Studies that accept uploads. Empty means any study id is accepted.
    pub studies: Vec<String>,
    /// Directory of static web UI assets served under `/ui`.
    pub ui_dir: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            bind: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: 8080,
            data_dir: PathBuf::from("foodrec-data"),
            blob_dir: None,
            record_dir: None,
            food_list: None,
            participant_token: None,
            researcher_token: None,
            analyzer_kind: AnalyzerKind::GridStub,
            analyzer_id: None,
            sidecar_dir: None,
            analysis_mode: AnalysisMode::Inline,
            max_image_bytes: DEFAULT_MAX_IMAGE_BYTES,
            studies: Vec::new(),
            ui_dir: None,
        }
    }
}

impl ServerConfig {
    /// Reads the TOML file (if any), then applies `FOODREC_*` environment
    /// overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read {
                    path: p.to_path_buf(),
                    source,
                })?;
                Self::from_toml(&text)?
            }
            None => Self::default(),
        };
        config.apply_env(|k| std::env::var(k).ok())?;
        Ok(config)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        fn parse<T: std::str::FromStr>(var: &'static str, value: &str) -> Result<T, ConfigError>
        where
            T::Err: std::fmt::Display,
        {
            value.parse().map_err(|e: T::Err| ConfigError::Env {
                var,
                reason: e.to_string(),
            })
        }

        if let Some(v) = var("FOODREC_BIND") {
            self.bind = parse("FOODREC_BIND", &v)?;
        }
        if let Some(v) = var("FOODREC_PORT") {
            self.port = parse("FOODREC_PORT", &v)?;
        }
        if let Some(v) = var("FOODREC_DATA_DIR") {
            self.data_dir = v.into();
        }
        if let Some(v) = var("FOODREC_FOOD_LIST") {
            self.food_list = Some(v.into());
        }
        if let Some(v) = var("FOODREC_PARTICIPANT_TOKEN") {
            self.participant_token = Some(v);
        }
        if let Some(v) = var("FOODREC_RESEARCHER_TOKEN") {
            self.researcher_token = Some(v);
        }
        if let Some(v) = var("FOODREC_ANALYZER") {
            self.analyzer_kind = parse_kind(&v).ok_or_else(|| ConfigError::Env {
                var: "FOODREC_ANALYZER",
                reason: format!("unknown analyzer kind {v:?}"),
            })?;
        }
        if let Some(v) = var("FOODREC_SIDECAR_DIR") {
            self.sidecar_dir = Some(v.into());
        }
        if let Some(v) = var("FOODREC_MAX_IMAGE_BYTES") {
            self.max_image_bytes = parse("FOODREC_MAX_IMAGE_BYTES", &v)?;
        }
        if let Some(v) = var("FOODREC_ANALYSIS_MODE") {
            self.analysis_mode = match v.to_ascii_lowercase().as_str() {
                "inline" => AnalysisMode::Inline,
                "background" => AnalysisMode::Background,
                "deferred" => AnalysisMode::Deferred,
                _ => {
                    return Err(ConfigError::Env {
                        var: "FOODREC_ANALYSIS_MODE",
                        reason: format!("expected inline, background or deferred, got {v:?}"),
                    })
                }
            };
        }
        if let Some(v) = var("FOODREC_UI_DIR") {
            self.ui_dir = Some(v.into());
        }
        Ok(())
    }

    /// Checks the settings a running server cannot do without.
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, token) in [
            ("participant_token", &self.participant_token),
            ("researcher_token", &self.researcher_token),
        ] {
            match token {
                None => return Err(ConfigError::Invalid(format!("{name} is not set"))),
                Some(t) if t.trim().is_empty() => {
                    return Err(ConfigError::Invalid(format!("{name} is empty")))
                }
                _ => {}
            }
        }
        if self.participant_token == self.researcher_token {
            return Err(ConfigError::Invalid(
                "participant and researcher tokens must differ".into(),
            ));
        }
        if self.max_image_bytes == 0 {
            return Err(ConfigError::Invalid(
                "max_image_bytes must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn blob_path(&self) -> PathBuf {
        self.blob_dir
            .clone()
            .unwrap_or_else(|| self.data_dir.join("blobs"))
    }

    pub fn record_path(&self) -> PathBuf {
        self.record_dir
            .clone()
            .unwrap_or_else(|| self.data_dir.join("data"))
    }

    pub fn analyzer_id(&self) -> String {
        self.analyzer_id
            .clone()
            .unwrap_or_else(|| match self.analyzer_kind {
                AnalyzerKind::SidecarStub => "sidecar-stub".into(),
                AnalyzerKind::GridStub => "grid-stub".into(),
                AnalyzerKind::External => "external".into(),
            })
    }
}

fn parse_kind(s: &str) -> Option<AnalyzerKind> {
    match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
        "sidecar" | "sidecarstub" => Some(AnalyzerKind::SidecarStub),
        "grid" | "gridstub" => Some(AnalyzerKind::GridStub),
        "external" => Some(AnalyzerKind::External),
        _ => None,
    }
}

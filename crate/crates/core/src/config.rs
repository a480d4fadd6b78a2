//! Run configuration: a single JSON file driving every pipeline stage.
//!
//! The same validated [`RunConfig`] feeds all subcommands, and its SHA-256
//! hash is stamped into every artifact so later stages can refuse inputs
//! produced under a different configuration. Flag overrides are applied by
//! the CLI before validation; the `RHETORIC_SERVER` environment variable
//! overrides a remote backend's URL last.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::Genre;
use crate::error::{Error, Result};
use crate::fightin_words::TokenFilter;
use crate::lm::{NgramConfig, RemoteConfig, DEFAULT_WINDOW_TOKENS};
use crate::stats::CiMethod;
use crate::corpus::SpeakerId;

/// Which loss backend scores sentences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendConfig {
    /// In-process interpolated n-gram model trained by the `train` stage.
    Ngram {
        #[serde(default = "defaults::order")]
        order: usize,
        #[serde(default = "defaults::add_k")]
        add_k: f64,
        /// Interpolation weights; tuned on held-out data when absent.
        #[serde(default)]
        lambdas: Option<Vec<f64>>,
    },
    /// Remote loss server speaking the `/v1/token_losses` protocol.
    Remote {
        server_url: String,
        #[serde(default = "defaults::max_in_flight")]
        max_in_flight: usize,
        #[serde(default = "defaults::retries")]
        retries: usize,
    },
    /// Fixed `log2(vocab_size)` bits per token; a debugging null model.
    Uniform { vocab_size: usize },
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig::Ngram {
            order: defaults::order(),
            add_k: defaults::add_k(),
            lambdas: None,
        }
    }
}

impl BackendConfig {
    /// The n-gram training configuration, when this backend is one.
    pub fn ngram_config(&self) -> Option<NgramConfig> {
        match self {
            BackendConfig::Ngram { order, add_k, lambdas } => Some(NgramConfig {
                order: *order,
                add_k: *add_k,
                lambdas: lambdas.clone(),
            }),
            _ => None,
        }
    }

    /// The remote-client configuration, when this backend is one.
    pub fn remote_config(&self) -> Option<RemoteConfig> {
        match self {
            BackendConfig::Remote { server_url, max_in_flight, retries } => {
                let mut cfg = RemoteConfig::new(server_url.clone());
                cfg.max_in_flight = *max_in_flight;
                cfg.retries = *retries;
                Some(cfg)
            }
            _ => None,
        }
    }
}

/// Restricts campaign corpora to documents shortly before an election.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignWindow {
    pub election_days: Vec<chrono::NaiveDate>,
    pub window_days: u32,
    pub min_cycle_year: i32,
}

/// How `possible` mention labels are treated downstream.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MentionConfig {
    /// Count unreviewed `possible` labels as mentions.
    #[serde(default)]
    pub count_possible: bool,
    /// CSV of reviewed sentence ids promoted to mentions.
    #[serde(default)]
    pub confirmed_path: Option<PathBuf>,
}

/// Word-association stage parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FwSettings {
    /// Total prior mass α_0 given to the pooled-corpus prior.
    #[serde(default = "defaults::prior_scale")]
    pub prior_scale: f64,
    /// Top-set size for the overlap metric.
    #[serde(default = "defaults::top_n")]
    pub top_n: usize,
    /// Part-of-speech tags kept when counting; empty list keeps every
    /// token.
    #[serde(default = "defaults::pos_tags")]
    pub pos_tags: Vec<String>,
}

impl Default for FwSettings {
    fn default() -> Self {
        FwSettings {
            prior_scale: defaults::prior_scale(),
            top_n: defaults::top_n(),
            pos_tags: defaults::pos_tags(),
        }
    }
}

impl FwSettings {
    pub fn token_filter(&self) -> TokenFilter {
        if self.pos_tags.is_empty() {
            TokenFilter::All
        } else {
            TokenFilter::PosTags(self.pos_tags.clone())
        }
    }
}

/// Confidence-interval construction for aggregate tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum CiConfig {
    #[default]
    Normal,
    Bootstrap {
        #[serde(default = "defaults::bootstrap_iterations")]
        iterations: usize,
    },
}

impl CiConfig {
    pub fn to_method(&self, seed: u64) -> CiMethod {
        match self {
            CiConfig::Normal => CiMethod::Normal,
            CiConfig::Bootstrap { iterations } => {
                CiMethod::Bootstrap { iterations: *iterations, seed }
            }
        }
    }
}

/// Everything a run needs, read from one JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Transcript JSONL per genre.
    pub corpus: BTreeMap<Genre, PathBuf>,
    /// Mention-rule JSON per genre; genres without an entry use built-in
    /// default rules.
    #[serde(default)]
    pub rules: BTreeMap<Genre, PathBuf>,
    /// Speakers whose prompts may substitute for each other.
    pub pool: Vec<SpeakerId>,
    /// Speaker singled out in party aggregations.
    #[serde(default)]
    pub focal_speaker: Option<SpeakerId>,
    #[serde(default)]
    pub backend: BackendConfig,
    /// Context window in tokens for scoring requests.
    #[serde(default = "defaults::window_tokens")]
    pub window_tokens: usize,
    /// Divisive-term list; the bundled lexicon when absent.
    #[serde(default)]
    pub lexicon_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Seed for every randomized step (bootstrap resampling).
    #[serde(default)]
    pub seed: u64,
    /// Worker threads for scoring fan-out.
    #[serde(default = "defaults::jobs")]
    pub jobs: usize,
    #[serde(default)]
    pub campaign_window: Option<CampaignWindow>,
    #[serde(default)]
    pub mention: MentionConfig,
    #[serde(default)]
    pub fw: FwSettings,
    #[serde(default)]
    pub ci: CiConfig,
}

mod defaults {
    pub fn order() -> usize {
        3
    }
    pub fn add_k() -> f64 {
        0.01
    }
    pub fn max_in_flight() -> usize {
        crate::lm::remote::DEFAULT_MAX_IN_FLIGHT
    }
    pub fn retries() -> usize {
        3
    }
    pub fn window_tokens() -> usize {
        super::DEFAULT_WINDOW_TOKENS
    }
    pub fn jobs() -> usize {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    }
    pub fn prior_scale() -> f64 {
        500.0
    }
    pub fn top_n() -> usize {
        25
    }
    pub fn pos_tags() -> Vec<String> {
        vec!["ADJ".to_string()]
    }
    pub fn bootstrap_iterations() -> usize {
        2000
    }
}

impl RunConfig {
    /// Reads and validates a JSON config file.
    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig> {
        let config = Self::parse_file(path)?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a JSON config file without validating, so callers can apply
    /// overrides first.
    pub fn parse_file(path: impl AsRef<Path>) -> Result<RunConfig> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(Error::read(path))?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }

    /// Checks every field, reporting all offenders at once.
    pub fn validate(&self) -> Result<()> {
        let mut faults: Vec<String> = Vec::new();
        let mut fault = |field: &str, reason: String| faults.push(format!("{field}: {reason}"));

        if self.corpus.is_empty() {
            fault("corpus", "at least one genre path is required".into());
        }
        if self.pool.len() < 2 {
            fault("pool", format!("needs at least 2 speakers, got {}", self.pool.len()));
        }
        if let Some(focal) = &self.focal_speaker {
            if !self.pool.contains(focal) {
                fault("focal_speaker", format!("`{focal}` is not in the pool"));
            }
        }
        match &self.backend {
            BackendConfig::Ngram { order, add_k, lambdas } => {
                if *order < 1 {
                    fault("backend.order", "must be at least 1".into());
                }
                if !(*add_k >= 0.0) || !add_k.is_finite() {
                    fault("backend.add_k", format!("must be finite and non-negative, got {add_k}"));
                }
                if let Some(lambdas) = lambdas {
                    if lambdas.len() != *order {
                        fault(
                            "backend.lambdas",
                            format!("needs {} weights, got {}", order, lambdas.len()),
                        );
                    } else if lambdas.iter().any(|l| *l < 0.0 || !l.is_finite())
                        || (lambdas.iter().sum::<f64>() - 1.0).abs() > 1e-9
                    {
                        fault(
                            "backend.lambdas",
                            "weights must be non-negative and sum to 1".into(),
                        );
                    }
                }
            }
            BackendConfig::Remote { server_url, max_in_flight, .. } => {
                if server_url.trim().is_empty() {
                    fault("backend.server_url", "must not be empty".into());
                }
                if *max_in_flight < 1 {
                    fault("backend.max_in_flight", "must be at least 1".into());
                }
            }
            BackendConfig::Uniform { vocab_size } => {
                if *vocab_size < 2 {
                    fault("backend.vocab_size", "must be at least 2".into());
                }
            }
        }
        if self.window_tokens < 1 {
            fault("window_tokens", "must be at least 1".into());
        }
        if self.output_dir.as_os_str().is_empty() {
            fault("output_dir", "must not be empty".into());
        }
        if self.jobs < 1 {
            fault("jobs", "must be at least 1".into());
        }
        if let Some(window) = &self.campaign_window {
            if window.election_days.is_empty() {
                fault("campaign_window.election_days", "must not be empty".into());
            }
            if window.window_days < 1 {
                fault("campaign_window.window_days", "must be at least 1".into());
            }
        }
        if !(self.fw.prior_scale > 0.0) || !self.fw.prior_scale.is_finite() {
            fault(
                "fw.prior_scale",
                format!("must be positive and finite, got {}", self.fw.prior_scale),
            );
        }
        if self.fw.top_n < 1 {
            fault("fw.top_n", "must be at least 1".into());
        }
        if let CiConfig::Bootstrap { iterations } = &self.ci {
            if *iterations < 1 {
                fault("ci.iterations", "must be at least 1".into());
            }
        }

        if faults.is_empty() {
            Ok(())
        } else {
            Err(Error::BadConfig(faults.join("; ")))
        }
    }

    /// Canonical JSON (sorted maps, declaration-ordered fields) used for
    /// hashing and provenance sidecars.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON, as lowercase hex.
    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Applies the `RHETORIC_SERVER` environment override to a remote
    /// backend's URL.
    pub fn apply_env(&mut self) {
        self.apply_server_override(std::env::var("RHETORIC_SERVER").ok().as_deref());
    }

    fn apply_server_override(&mut self, url: Option<&str>) {
        if let (Some(url), BackendConfig::Remote { server_url, .. }) = (url, &mut self.backend) {
            *server_url = url.to_string();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> String {
        r#"{
            "corpus": {"debate": "fixtures/debates.jsonl"},
            "pool": ["alice_smith", "bob_jones"],
            "output_dir": "out"
        }"#
        .to_string()
    }

    fn minimal() -> RunConfig {
        serde_json::from_str(&minimal_json()).unwrap()
    }

    #[test]
    fn minimal_config_fills_defaults_and_validates() {
        let config = minimal();
        config.validate().unwrap();
        assert_eq!(
            config.backend,
            BackendConfig::Ngram { order: 3, add_k: 0.01, lambdas: None }
        );
        assert_eq!(config.window_tokens, DEFAULT_WINDOW_TOKENS);
        assert_eq!(config.fw.prior_scale, 500.0);
        assert_eq!(config.fw.top_n, 25);
        assert_eq!(config.fw.token_filter(), TokenFilter::PosTags(vec!["ADJ".to_string()]));
        assert_eq!(config.ci, CiConfig::Normal);
        assert!(config.lexicon_path.is_none());
        assert_eq!(config.seed, 0);
    }

    #[test]
    fn invalid_fields_are_all_listed() {
        let mut config = minimal();
        config.pool.truncate(1);
        config.window_tokens = 0;
        config.fw.top_n = 0;
        let err = config.validate().unwrap_err();
        let message = err.to_string();
        for field in ["pool", "window_tokens", "fw.top_n"] {
            assert!(message.contains(field), "missing `{field}` in: {message}");
        }
    }

    #[test]
    fn focal_speaker_must_be_pooled() {
        let mut config = minimal();
        config.focal_speaker = Some(SpeakerId::new("nobody"));
        let err = config.validate().unwrap_err().to_string();
        assert!(err.contains("focal_speaker"));
    }

    #[test]
    fn backend_variants_parse_and_validate() {
        let remote: RunConfig = serde_json::from_str(
            &minimal_json().replace(
                "\"output_dir\": \"out\"",
                r#""output_dir": "out",
                   "backend": {"kind": "remote", "server_url": "http://localhost:9000"}"#,
            ),
        )
        .unwrap();
        remote.validate().unwrap();
        let cfg = remote.backend.remote_config().unwrap();
        assert_eq!(cfg.base_url, "http://localhost:9000");
        assert_eq!(cfg.retries, 3);
        assert!(remote.backend.ngram_config().is_none());

        let bad_lambdas: RunConfig = serde_json::from_str(
            &minimal_json().replace(
                "\"output_dir\": \"out\"",
                r#""output_dir": "out",
                   "backend": {"kind": "ngram", "order": 2, "lambdas": [0.5, 0.6]}"#,
            ),
        )
        .unwrap();
        let err = bad_lambdas.validate().unwrap_err().to_string();
        assert!(err.contains("backend.lambdas"));
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = minimal();
        let b = minimal();
        assert_eq!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash().len(), 64);

        let mut c = minimal();
        c.seed = 7;
        assert_ne!(a.config_hash(), c.config_hash());
    }

    #[test]
    fn canonical_json_roundtrips() {
        let config = minimal();
        let back: RunConfig = serde_json::from_str(&config.canonical_json()).unwrap();
        assert_eq!(back, config);
        assert_eq!(back.config_hash(), config.config_hash());
    }

    #[test]
    fn server_env_override_rewrites_remote_urls_only() {
        let mut remote = minimal();
        remote.backend = BackendConfig::Remote {
            server_url: "http://old:1".to_string(),
            max_in_flight: 8,
            retries: 3,
        };
        remote.apply_server_override(Some("http://new:2"));
        assert!(matches!(
            &remote.backend,
            BackendConfig::Remote { server_url, .. } if server_url == "http://new:2"
        ));

        let mut ngram = minimal();
        ngram.apply_server_override(Some("http://new:2"));
        assert_eq!(ngram.backend, BackendConfig::Ngram { order: 3, add_k: 0.01, lambdas: None });
    }

    #[test]
    fn ci_config_builds_methods_with_the_run_seed() {
        assert_eq!(CiConfig::Normal.to_method(9), CiMethod::Normal);
        assert_eq!(
            CiConfig::Bootstrap { iterations: 100 }.to_method(9),
            CiMethod::Bootstrap { iterations: 100, seed: 9 }
        );
    }
}

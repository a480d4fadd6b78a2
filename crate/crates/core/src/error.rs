//! Crate-wide error type.
//!
//! Every fallible operation returns [`Result`]. Variants carry enough
//! context (file paths, line numbers, speaker/document ids, stage names)
//! that a CLI user can act on the message without a stack trace.

use std::path::PathBuf;

use thiserror::Error;

/// Alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// All failure modes surfaced by the library and the CLI.
#[derive(Debug, Error)]
pub enum Error {
    // ---------- I/O and parsing ----------
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed record: {reason}")]
    MalformedRecord {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("unknown genre `{0}` (expected `debate`, `sotu`, or `campaign`)")]
    UnknownGenre(String),

    #[error("duplicate record id `{0}`")]
    DuplicateRecord(String),

    // ---------- corpus operations ----------
    #[error("entity spans overlap at byte {at} in {text:?}")]
    OverlappingSpans { at: usize, text: String },

    #[error("entity span {start}..{end} is out of bounds or splits a character in {text:?}")]
    InvalidSpan {
        start: usize,
        end: usize,
        text: String,
    },

    #[error("document `{doc_id}` has no {field}, required by this operation")]
    MissingDocumentField { doc_id: String, field: &'static str },

    #[error("unknown document id `{0}`")]
    UnknownDocument(String),

    #[error("unknown speaker id `{0}`")]
    UnknownSpeaker(String),

    #[error("unknown sentence id `{0}`")]
    UnknownSentence(String),

    // ---------- mention tagging ----------
    #[error("speaker `{0}` is missing from the mention rule set")]
    SpeakerNotInRules(String),

    #[error("speaker `{0}` has an empty pattern list in the mention rule set")]
    EmptyPatternList(String),

    #[error("review file {path}: duplicate vote for sentence `{sentence_id}` by rater `{rater_id}`")]
    DuplicateVote {
        path: String,
        sentence_id: String,
        rater_id: String,
    },

    #[error("rater `{0}` does not appear in the review file")]
    UnknownRater(String),

    #[error("raters `{0}` and `{1}` share no labeled sentences")]
    NoSharedItems(String, String),

    // ---------- lexicon ----------
    #[error("embedding table {path}: {reason}")]
    BadEmbeddingTable { path: String, reason: String },

    #[error("seed term `{0}` is missing from the embedding vocabulary")]
    SeedNotInVocabulary(String),

    #[error("lexicon file {path}:{line}: {reason}")]
    BadLexiconEntry {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("annotation matrix: {0}")]
    BadAnnotationMatrix(String),

    // ---------- language model ----------
    #[error("interpolation weights must be nonnegative and sum to 1 (got {0:?})")]
    BadLambdas(Vec<f64>),

    #[error("n-gram order must be at least 1")]
    BadOrder,

    #[error("speaker prompt {0:?} must be nonempty and end with `:`")]
    BadPrompt(String),

    #[error("scoring target must be nonempty")]
    EmptyTarget,

    #[error("token `{token}` at position {index} produced a non-finite loss")]
    NonFiniteLoss { token: String, index: usize },

    #[error("model file {path}: {reason}")]
    BadModelFile { path: String, reason: String },

    #[error("loss server request failed after {attempts} attempts: {reason}")]
    ServerUnavailable { attempts: usize, reason: String },

    #[error("loss server protocol error: {0}")]
    Protocol(String),

    // ---------- uniqueness ----------
    #[error("speaker pool must contain at least two speakers (got {0})")]
    PoolTooSmall(usize),

    #[error("no alternate prompts remain for sentences in document `{0}` after exclusions")]
    EmptyAlternateSet(String),

    #[error("no uniqueness records for speaker `{0}`")]
    NoRecordsForSpeaker(String),

    // ---------- fightin' words ----------
    #[error("prior assigns zero mass to vocabulary word `{0}`")]
    ZeroPriorMass(String),

    #[error("side {side} for speaker `{speaker}` has no tokens after filtering")]
    EmptySide { speaker: String, side: String },

    #[error("top-word set for speaker `{0}` is empty")]
    EmptyTopSet(String),

    #[error(
        "sentence `{0}` has no part-of-speech tags; the requested token filter needs them \
         (re-ingest with `pos` arrays or pass a filter that ignores tags)"
    )]
    MissingPosTags(String),

    // ---------- analysis ----------
    #[error("correlation input is constant; rank correlation is undefined")]
    ConstantInput,

    #[error("input vectors have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),

    #[error("operation needs at least {needed} values, got {got}")]
    NotEnoughData { needed: usize, got: usize },

    // ---------- configuration and pipeline ----------
    #[error("invalid configuration: {0}")]
    BadConfig(String),

    #[error("stage `{stage}` is missing its prerequisite artifact {path}; run `{hint}` first")]
    MissingPrerequisite {
        stage: &'static str,
        path: PathBuf,
        hint: &'static str,
    },

    #[error(
        "artifact {path} was produced under config hash {found} but the current config hashes \
         to {expected}; re-run the earlier stages or restore the matching config"
    )]
    ConfigHashMismatch {
        path: PathBuf,
        found: String,
        expected: String,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Helper for wrapping read failures with the offending path.
    pub fn read(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Read { path, source }
    }

    /// Helper for wrapping write failures with the offending path.
    pub fn write(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Write { path, source }
    }
}

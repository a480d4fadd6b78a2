//! Corpus analytics for political speech.
//!
//! The crate ingests transcript corpora (candidate debates, State of the
//! Union addresses, campaign rallies) and computes three families of
//! speaker-level statistics:
//!
//! * **Uniqueness** ([`uniqueness`]) — how much worse a language model
//!   predicts a sentence when the speaker prompt is swapped for another
//!   speaker's name. A positive score means the sentence is cheaper to
//!   encode under its true speaker, i.e. the phrasing is characteristic.
//! * **Divisive vocabulary** ([`lexicon`]) — how often a speaker draws on a
//!   bundled lexicon of 178 insult/outrage terms, plus the seed-expansion
//!   and multi-annotator vote machinery used to build such lexicons.
//! * **Opponent-overlap** ([`fightin_words`]) — log-odds z-scores contrasting
//!   the words a speaker uses when mentioning opponents against the rest of
//!   their speech, and a graph-degree overlap metric that asks whether
//!   different speakers attack with the same vocabulary.
//!
//! Supporting modules: [`corpus`] (ingestion, sentence segmentation,
//! normalization, entity masking), [`tagging`] (opponent-mention rules and
//! inter-rater agreement), [`lm`] (interpolated n-gram model, remote
//! loss-server client, bits-per-character), [`analysis`] (readability
//! indices, rank correlation, cross-metric tables), and [`pipeline`]/
//! [`report`] (the staged CLI workflow behind the `rhetoric` binary).
//!
//! Scores from the language-model layer are always expressed in bits; the
//! remote-backend client converts nat-based replies before they reach any
//! caller.

pub mod analysis;
pub mod config;
pub mod corpus;
pub mod error;
pub mod fightin_words;
pub mod lexicon;
pub mod lm;
pub mod pipeline;
pub mod report;
pub mod stats;
pub mod tagging;
pub mod uniqueness;

pub use config::RunConfig;
pub use corpus::{Corpus, Document, Genre, MentionLabel, Party, Sentence, Speaker, SpeakerId};
pub use error::{Error, Result};

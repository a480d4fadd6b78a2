//! Sentence- and speaker-level language uniqueness.
//!
//! A sentence's BPC is its total token loss in bits divided by the
//! character count of the verbatim sentence. `SentUniq` rescores the same
//! sentence under every alternate speaker prompt in the pool and reports
//! the mean alternate BPC minus the original BPC: positive values mean the
//! other speakers were less likely to say it. Requests carry the masked
//! sentence text (matching how models train) while the character
//! denominator stays the raw sentence, so scores are comparable across
//! masking configurations.
//!
//! Scoring fans out over a worker pool; records then persist as JSONL so
//! aggregations ([`aggregate`]) never re-run the expensive part.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Write};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::corpus::{speaker_term_map, Corpus, Genre, Party, Sentence, SpeakerId};
use crate::error::{Error, Result};
use crate::lm::{speaker_prompt, LossBackend, ScoringRequest, DEFAULT_WINDOW_TOKENS};
use crate::stats::{confidence_interval, mean, Ci, CiMethod};

// ---------- records ----------

/// One scored sentence. `sent_uniq` is always the mean of
/// `bpc_alternates` minus `bpc_original`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessRecord {
    pub sentence_id: String,
    pub bpc_original: f64,
    /// Alternate-speaker BPC, keyed by speaker id; never contains the
    /// original speaker.
    pub bpc_alternates: BTreeMap<String, f64>,
    pub sent_uniq: f64,
}

impl UniquenessRecord {
    /// Builds a record, deriving `sent_uniq` from the parts.
    pub fn new(
        sentence_id: impl Into<String>,
        bpc_original: f64,
        bpc_alternates: BTreeMap<String, f64>,
    ) -> UniquenessRecord {
        let values: Vec<f64> = bpc_alternates.values().copied().collect();
        UniquenessRecord {
            sentence_id: sentence_id.into(),
            bpc_original,
            sent_uniq: mean(&values) - bpc_original,
            bpc_alternates,
        }
    }
}

/// Writes records as JSONL, one object per line, in input order.
pub fn write_records(mut w: impl Write, records: &[UniquenessRecord]) -> Result<()> {
    for record in records {
        serde_json::to_writer(&mut w, record)?;
        w.write_all(b"\n").map_err(|e| Error::Write { path: "<writer>".into(), source: e })?;
    }
    Ok(())
}

/// Reads a JSONL record stream, re-validating the `sent_uniq` derivation.
pub fn read_records(r: impl BufRead, path_label: &str) -> Result<Vec<UniquenessRecord>> {
    let mut records = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::MalformedRecord {
            path: path_label.to_string(),
            line: lineno + 1,
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: UniquenessRecord =
            serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                path: path_label.to_string(),
                line: lineno + 1,
                reason: e.to_string(),
            })?;
        let expected = UniquenessRecord::new(
            record.sentence_id.clone(),
            record.bpc_original,
            record.bpc_alternates.clone(),
        );
        if record.sent_uniq != expected.sent_uniq {
            return Err(Error::MalformedRecord {
                path: path_label.to_string(),
                line: lineno + 1,
                reason: format!(
                    "sent_uniq {} does not equal mean(alternates) − bpc_original = {}",
                    record.sent_uniq, expected.sent_uniq
                ),
            });
        }
        records.push(record);
    }
    Ok(records)
}

// ---------- pool policy ----------

/// Who may serve as an alternate prompt, and who is barred per document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolPolicy {
    pool: Vec<SpeakerId>,
    /// Document id → speakers excluded from alternates for sentences of
    /// that document (the original speaker is always excluded implicitly).
    exclusions: HashMap<String, HashSet<SpeakerId>>,
}

impl PoolPolicy {
    /// A pool with no per-document exclusions. At least two speakers are
    /// required — otherwise some sentence would have no alternates.
    pub fn new(pool: Vec<SpeakerId>) -> Result<PoolPolicy> {
        if pool.len() < 2 {
            return Err(Error::PoolTooSmall(pool.len()));
        }
        Ok(PoolPolicy { pool, exclusions: HashMap::new() })
    }

    /// Adds the debate-opponent rule: in a debate document, every pool
    /// member who speaks in it is excluded from the alternates of all its
    /// sentences. Other genres gain no exclusions.
    pub fn with_debate_exclusions(mut self, corpus: &Corpus) -> PoolPolicy {
        if corpus.genre() != Genre::Debate {
            return self;
        }
        let pool: HashSet<&SpeakerId> = self.pool.iter().collect();
        for sentence in corpus.sentences() {
            if pool.contains(&sentence.speaker) {
                self.exclusions
                    .entry(sentence.doc_id.clone())
                    .or_default()
                    .insert(sentence.speaker.clone());
            }
        }
        self
    }

    /// Adds explicit exclusions for one document.
    pub fn exclude(mut self, doc_id: impl Into<String>, speakers: &[SpeakerId]) -> PoolPolicy {
        self.exclusions
            .entry(doc_id.into())
            .or_default()
            .extend(speakers.iter().cloned());
        self
    }

    pub fn pool(&self) -> &[SpeakerId] {
        &self.pool
    }

    /// Alternate speakers for a sentence: the pool minus the original
    /// speaker minus the document's exclusions. Empty → error naming the
    /// document.
    pub fn alternates_for(&self, sentence: &Sentence) -> Result<Vec<&SpeakerId>> {
        let excluded = self.exclusions.get(&sentence.doc_id);
        let alternates: Vec<&SpeakerId> = self
            .pool
            .iter()
            .filter(|id| {
                **id != sentence.speaker && !excluded.is_some_and(|set| set.contains(*id))
            })
            .collect();
        if alternates.is_empty() {
            return Err(Error::EmptyAlternateSet(sentence.doc_id.clone()));
        }
        Ok(alternates)
    }

    fn contains(&self, id: &SpeakerId) -> bool {
        self.pool.contains(id)
    }
}

// ---------- scoring ----------

/// Scoring knobs independent of the backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScoreOptions {
    /// Context window in tokens (most recent kept; prompt not counted).
    pub window_tokens: usize,
    /// Worker threads for fan-out.
    pub jobs: usize,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        ScoreOptions {
            window_tokens: DEFAULT_WINDOW_TOKENS,
            jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

/// Context for a sentence: the document's preceding sentences, each as
/// `"Display Name: masked text"`, oldest first.
fn context_for(corpus: &Corpus, sentence: &Sentence) -> String {
    corpus
        .document_sentences(&sentence.doc_id)
        .iter()
        .filter(|s| s.seq < sentence.seq)
        .map(|s| {
            let name = &corpus
                .speaker(&s.speaker)
                .expect("corpus sentences reference known speakers")
                .display_name;
            format!("{} {}", speaker_prompt(name), s.masked_text)
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn bpc_for_prompt(
    backend: &impl LossBackend,
    display_name: &str,
    context: &str,
    sentence: &Sentence,
    window_tokens: usize,
) -> Result<f64> {
    let request = ScoringRequest::new(speaker_prompt(display_name), context, &sentence.masked_text)?
        .truncate_context(window_tokens);
    let losses = backend.token_losses(&request)?;
    // The denominator is the verbatim sentence, not the masked form the
    // request carries.
    Ok(losses.total_bits() / sentence.char_len as f64)
}

/// Scores one sentence: BPC under the original prompt and under every
/// alternate the policy allows.
pub fn score_sentence(
    corpus: &Corpus,
    sentence: &Sentence,
    backend: &impl LossBackend,
    policy: &PoolPolicy,
    options: &ScoreOptions,
) -> Result<UniquenessRecord> {
    let context = context_for(corpus, sentence);
    let original = corpus
        .speaker(&sentence.speaker)
        .ok_or_else(|| Error::UnknownSpeaker(sentence.speaker.to_string()))?;
    let bpc_original = bpc_for_prompt(
        backend,
        &original.display_name,
        &context,
        sentence,
        options.window_tokens,
    )?;
    let mut bpc_alternates = BTreeMap::new();
    for id in policy.alternates_for(sentence)? {
        let alternate = corpus
            .speaker(id)
            .ok_or_else(|| Error::UnknownSpeaker(id.to_string()))?;
        let value = bpc_for_prompt(
            backend,
            &alternate.display_name,
            &context,
            sentence,
            options.window_tokens,
        )?;
        bpc_alternates.insert(id.to_string(), value);
    }
    Ok(UniquenessRecord::new(&sentence.id, bpc_original, bpc_alternates))
}

/// Scores every sentence spoken by a pool member, fanning out over
/// `options.jobs` workers. Output order matches corpus order regardless of
/// completion order; the first error (in corpus order) wins.
pub fn score_corpus(
    corpus: &Corpus,
    backend: &(impl LossBackend + ?Sized),
    policy: &PoolPolicy,
    options: &ScoreOptions,
) -> Result<Vec<UniquenessRecord>> {
    let sentences: Vec<&Sentence> = corpus
        .sentences()
        .iter()
        .filter(|s| policy.contains(&s.speaker))
        .collect();
    let cursor = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, Result<UniquenessRecord>)>> =
        Mutex::new(Vec::with_capacity(sentences.len()));
    let jobs = options.jobs.max(1).min(sentences.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = cursor.fetch_add(1, Ordering::Relaxed);
                let Some(sentence) = sentences.get(i) else { break };
                let record = score_sentence(corpus, sentence, &backend, policy, options);
                results.lock().expect("no panics hold this lock").push((i, record));
            });
        }
    });
    let mut indexed = results.into_inner().expect("workers joined");
    indexed.sort_by_key(|(i, _)| *i);
    indexed.into_iter().map(|(_, r)| r).collect()
}

/// `Uniq(c)`: the mean `sent_uniq` over a speaker's records.
pub fn speaker_uniq(
    records: &[UniquenessRecord],
    corpus: &Corpus,
    speaker: &SpeakerId,
) -> Result<f64> {
    let values: Vec<f64> = records
        .iter()
        .filter(|r| {
            corpus
                .sentence(&r.sentence_id)
                .is_some_and(|s| s.speaker == *speaker)
        })
        .map(|r| r.sent_uniq)
        .collect();
    if values.is_empty() {
        return Err(Error::NoRecordsForSpeaker(speaker.to_string()));
    }
    Ok(mean(&values))
}

// ---------- aggregation ----------

/// Grouping dimension for [`aggregate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AggregateDim {
    /// One group per speaker.
    Speaker,
    /// Three groups: the focal speaker by id, then `republican` and
    /// `democrat` for the rest of each party.
    Party { focal: Option<SpeakerId> },
    /// Width-5 sentence-length bins over [0, 50): `0-4`, `5-9`, …, `45-49`.
    /// Longer sentences are out of range and absent.
    LengthBin,
    /// Document year.
    Year,
    /// Per-speaker term ordinal, keyed `speaker/term`.
    Term,
    /// Per speaker, the top 10% of records (by `sent_uniq`, at least one).
    Decile,
}

/// One aggregation row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub group: String,
    pub ci: Ci,
}

/// Groups records along a dimension and reports per-group means with 95%
/// confidence intervals. Groups without records are absent; rows sort by
/// group key.
pub fn aggregate(
    records: &[UniquenessRecord],
    corpus: &Corpus,
    dim: &AggregateDim,
    method: CiMethod,
) -> Result<Vec<AggregateRow>> {
    let term_map = match dim {
        AggregateDim::Term => Some(speaker_term_map(corpus)),
        _ => None,
    };
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for record in records {
        let sentence = corpus
            .sentence(&record.sentence_id)
            .ok_or_else(|| Error::UnknownSentence(record.sentence_id.clone()))?;
        let group = match dim {
            AggregateDim::Speaker => Some(sentence.speaker.to_string()),
            AggregateDim::Party { focal } => {
                if focal.as_ref() == Some(&sentence.speaker) {
                    Some(sentence.speaker.to_string())
                } else {
                    let speaker = corpus
                        .speaker(&sentence.speaker)
                        .ok_or_else(|| Error::UnknownSpeaker(sentence.speaker.to_string()))?;
                    match speaker.party {
                        Party::Republican => Some("republican".to_string()),
                        Party::Democrat => Some("democrat".to_string()),
                        Party::Other => None,
                    }
                }
            }
            AggregateDim::LengthBin => {
                let words = sentence.word_count;
                (words < 50).then(|| {
                    let low = words / 5 * 5;
                    format!("{low}-{}", low + 4)
                })
            }
            AggregateDim::Year => {
                use chrono::Datelike;
                let doc = corpus
                    .document(&sentence.doc_id)
                    .ok_or_else(|| Error::UnknownDocument(sentence.doc_id.clone()))?;
                Some(doc.date.year().to_string())
            }
            AggregateDim::Term => {
                let ordinal = term_map
                    .as_ref()
                    .expect("term map built for Term dimension")
                    .get(&(sentence.speaker.clone(), sentence.doc_id.clone()))
                    .copied()
                    .expect("every corpus sentence has a term ordinal");
                Some(format!("{}/{}", sentence.speaker, ordinal))
            }
            AggregateDim::Decile => Some(sentence.speaker.to_string()),
        };
        if let Some(group) = group {
            groups.entry(group).or_default().push(record.sent_uniq);
        }
    }
    if matches!(dim, AggregateDim::Decile) {
        for values in groups.values_mut() {
            values.sort_by(|a, b| b.total_cmp(a));
            values.truncate(values.len().div_ceil(10));
        }
    }
    Ok(groups
        .into_iter()
        .filter_map(|(group, values)| {
            confidence_interval(&values, method).map(|ci| AggregateRow { group, ci })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ingest_reader, IngestOptions};
    use crate::lm::{NgramConfig, NgramModel, PromptBlind, ScaleLosses, TokenLossSequence};
    use approx::assert_abs_diff_eq;

    /// Loss per token depends only on the prompt: a lookup table of bits.
    struct PromptTable(HashMap<String, f64>);

    impl LossBackend for PromptTable {
        fn token_losses(&self, req: &ScoringRequest) -> Result<TokenLossSequence> {
            let bits = *self
                .0
                .get(req.speaker_prompt())
                .unwrap_or_else(|| panic!("no entry for {:?}", req.speaker_prompt()));
            let tokens: Vec<String> =
                req.target().split_whitespace().map(str::to_string).collect();
            let losses = vec![bits; tokens.len()];
            TokenLossSequence::new(tokens, losses)
        }
    }

    /// Adds a constant to every token loss of the inner backend.
    struct ShiftLosses<B>(B, f64);

    impl<B: LossBackend> LossBackend for ShiftLosses<B> {
        fn token_losses(&self, req: &ScoringRequest) -> Result<TokenLossSequence> {
            let seq = self.0.token_losses(req)?;
            let losses = seq.losses_bits().iter().map(|l| l + self.1).collect();
            TokenLossSequence::new(seq.tokens().to_vec(), losses)
        }
    }

    fn debate_jsonl(rows: &[(&str, &str, &str, usize, &str)]) -> String {
        rows.iter()
            .map(|(doc, speaker, party, seq, text)| {
                format!(
                    r#"{{"doc_id":"{doc}","genre":"debate","date":"2020-09-29","title":"t","speaker":"{speaker}","party":"{party}","seq":{seq},"text":"{text}"}}"#
                )
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    fn ingest(jsonl: &str) -> Corpus {
        ingest_reader(
            std::io::Cursor::new(jsonl.as_bytes().to_vec()),
            "<test>",
            Genre::Debate,
            &IngestOptions::default(),
        )
        .unwrap()
        .0
    }

    fn two_speaker_corpus() -> Corpus {
        ingest(&debate_jsonl(&[
            ("d1", "Alice Smith", "D", 0, "We choose hope."),
            ("d1", "Bob Jones", "R", 1, "We choose strength."),
        ]))
    }

    fn ids(names: &[&str]) -> Vec<SpeakerId> {
        names.iter().map(|n| SpeakerId::new(*n)).collect()
    }

    #[test]
    fn pool_needs_two_speakers() {
        assert!(matches!(
            PoolPolicy::new(ids(&["alice_smith"])).unwrap_err(),
            Error::PoolTooSmall(1)
        ));
    }

    #[test]
    fn two_speaker_arithmetic() {
        let corpus = two_speaker_corpus();
        let policy = PoolPolicy::new(ids(&["alice_smith", "bob_jones"])).unwrap();
        // "We choose hope." is 15 chars, 3 tokens: 5 bits/token gives
        // BPC 1.0; 8 bits/token gives 1.6.
        let backend = PromptTable(HashMap::from([
            ("Alice Smith:".to_string(), 5.0),
            ("Bob Jones:".to_string(), 8.0),
        ]));
        let sentence = &corpus.sentences()[0];
        assert_eq!(sentence.char_len, 15);
        let record =
            score_sentence(&corpus, sentence, &backend, &policy, &ScoreOptions::default())
                .unwrap();
        assert_abs_diff_eq!(record.bpc_original, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(record.bpc_alternates["bob_jones"], 1.6, epsilon = 1e-12);
        assert_abs_diff_eq!(record.sent_uniq, 0.6, epsilon = 1e-12);
    }

    #[test]
    fn prompt_blind_backend_zeroes_every_sent_uniq() {
        let corpus = ingest(&debate_jsonl(&[
            ("d1", "Alice Smith", "D", 0, "We choose hope."),
            ("d1", "Bob Jones", "R", 1, "We choose strength, always."),
            ("d2", "Carol White", "R", 0, "Taxes must fall."),
        ]));
        let model = NgramModel::train(&corpus, &NgramConfig::default()).unwrap();
        let policy =
            PoolPolicy::new(ids(&["alice_smith", "bob_jones", "carol_white"])).unwrap();
        let records = score_corpus(
            &corpus,
            &PromptBlind(&model),
            &policy,
            &ScoreOptions::default(),
        )
        .unwrap();
        assert_eq!(records.len(), 3);
        for record in &records {
            assert_eq!(record.sent_uniq, 0.0, "record {:?}", record.sentence_id);
        }
        // The unwrapped model does react to prompts.
        let reactive = score_corpus(&corpus, &model, &policy, &ScoreOptions::default()).unwrap();
        assert!(reactive.iter().any(|r| r.sent_uniq != 0.0));
    }

    #[test]
    fn debate_opponents_never_serve_as_alternates() {
        let corpus = ingest(&debate_jsonl(&[
            ("d1", "Alice Smith", "D", 0, "We choose hope."),
            ("d1", "Bob Jones", "R", 1, "We choose strength."),
            ("d2", "Carol White", "R", 0, "Taxes must fall."),
        ]));
        let policy = PoolPolicy::new(ids(&["alice_smith", "bob_jones", "carol_white"]))
            .unwrap()
            .with_debate_exclusions(&corpus);
        let alice = &corpus.sentences()[0];
        let alternates = policy.alternates_for(alice).unwrap();
        assert_eq!(alternates, vec![&SpeakerId::new("carol_white")]);
        // Carol debated nobody in d2, so both others are fair alternates.
        let carol = corpus.sentences_by(&SpeakerId::new("carol_white")).next().unwrap();
        assert_eq!(policy.alternates_for(carol).unwrap().len(), 2);
    }

    #[test]
    fn empty_alternate_set_names_the_document() {
        let corpus = two_speaker_corpus();
        let policy = PoolPolicy::new(ids(&["alice_smith", "bob_jones"]))
            .unwrap()
            .with_debate_exclusions(&corpus);
        let err = policy.alternates_for(&corpus.sentences()[0]).unwrap_err();
        assert!(matches!(err, Error::EmptyAlternateSet(doc) if doc == "d1"));
    }

    #[test]
    fn shifting_all_losses_leaves_sent_uniq_unchanged() {
        let corpus = two_speaker_corpus();
        let policy = PoolPolicy::new(ids(&["alice_smith", "bob_jones"])).unwrap();
        let base = PromptTable(HashMap::from([
            ("Alice Smith:".to_string(), 5.0),
            ("Bob Jones:".to_string(), 8.0),
        ]));
        let sentence = &corpus.sentences()[0];
        let options = ScoreOptions::default();
        let plain = score_sentence(&corpus, sentence, &base, &policy, &options).unwrap();
        let shifted_backend = ShiftLosses(
            PromptTable(HashMap::from([
                ("Alice Smith:".to_string(), 5.0),
                ("Bob Jones:".to_string(), 8.0),
            ])),
            2.5,
        );
        let shifted =
            score_sentence(&corpus, sentence, &shifted_backend, &policy, &options).unwrap();
        assert_abs_diff_eq!(plain.sent_uniq, shifted.sent_uniq, epsilon = 1e-12);
        assert!(shifted.bpc_original > plain.bpc_original);
    }

    #[test]
    fn scaling_losses_scales_sent_uniq() {
        let corpus = two_speaker_corpus();
        let policy = PoolPolicy::new(ids(&["alice_smith", "bob_jones"])).unwrap();
        let table = || {
            PromptTable(HashMap::from([
                ("Alice Smith:".to_string(), 5.0),
                ("Bob Jones:".to_string(), 8.0),
            ]))
        };
        let options = ScoreOptions::default();
        let sentence = &corpus.sentences()[0];
        let plain = score_sentence(&corpus, sentence, &table(), &policy, &options).unwrap();
        let scaled = score_sentence(
            &corpus,
            sentence,
            &ScaleLosses::new(table(), 3.0),
            &policy,
            &options,
        )
        .unwrap();
        assert_abs_diff_eq!(scaled.sent_uniq, 3.0 * plain.sent_uniq, epsilon = 1e-12);
    }

    #[test]
    fn context_is_preceding_prompted_sentences() {
        let corpus = ingest(&debate_jsonl(&[
            ("d1", "Alice Smith", "D", 0, "First point."),
            ("d1", "Bob Jones", "R", 1, "Second point."),
            ("d1", "Alice Smith", "D", 2, "Third point."),
        ]));
        let third = &corpus.sentences()[2];
        assert_eq!(
            context_for(&corpus, third),
            "Alice Smith: First point. Bob Jones: Second point."
        );
        assert_eq!(context_for(&corpus, &corpus.sentences()[0]), "");
    }

    #[test]
    fn parallel_scoring_matches_serial() {
        let rows: Vec<(String, &str, &str, usize, String)> = (0..30)
            .map(|i| {
                let (speaker, party) =
                    if i % 2 == 0 { ("Alice Smith", "D") } else { ("Bob Jones", "R") };
                ("d1".to_string(), speaker, party, i, format!("Sentence number {i} here."))
            })
            .collect();
        let borrowed: Vec<(&str, &str, &str, usize, &str)> = rows
            .iter()
            .map(|(d, s, p, i, t)| (d.as_str(), *s, *p, *i, t.as_str()))
            .collect();
        let corpus = ingest(&debate_jsonl(&borrowed));
        let model = NgramModel::train(&corpus, &NgramConfig::default()).unwrap();
        let policy = PoolPolicy::new(ids(&["alice_smith", "bob_jones"])).unwrap();
        let serial = score_corpus(
            &corpus,
            &model,
            &policy,
            &ScoreOptions { jobs: 1, ..ScoreOptions::default() },
        )
        .unwrap();
        let parallel = score_corpus(
            &corpus,
            &model,
            &policy,
            &ScoreOptions { jobs: 4, ..ScoreOptions::default() },
        )
        .unwrap();
        assert_eq!(serial, parallel);
        assert_eq!(serial.len(), 30);
    }

    #[test]
    fn records_roundtrip_through_jsonl() {
        let records = vec![
            UniquenessRecord::new(
                "d1:0",
                1.0,
                BTreeMap::from([("bob_jones".to_string(), 1.6)]),
            ),
            UniquenessRecord::new(
                "d1:1",
                0.25,
                BTreeMap::from([
                    ("alice_smith".to_string(), 0.5),
                    ("carol_white".to_string(), 0.75),
                ]),
            ),
        ];
        let mut bytes = Vec::new();
        write_records(&mut bytes, &records).unwrap();
        let back = read_records(bytes.as_slice(), "<memory>").unwrap();
        assert_eq!(back, records);

        let tampered = String::from_utf8(bytes).unwrap().replace("0.6", "0.7");
        assert!(matches!(
            read_records(tampered.as_bytes(), "<memory>").unwrap_err(),
            Error::MalformedRecord { .. }
        ));
    }

    #[test]
    fn speaker_uniq_is_the_mean_of_that_speakers_records() {
        let corpus = two_speaker_corpus();
        let policy = PoolPolicy::new(ids(&["alice_smith", "bob_jones"])).unwrap();
        let backend = PromptTable(HashMap::from([
            ("Alice Smith:".to_string(), 5.0),
            ("Bob Jones:".to_string(), 8.0),
        ]));
        let records =
            score_corpus(&corpus, &backend, &policy, &ScoreOptions::default()).unwrap();
        let alice = speaker_uniq(&records, &corpus, &SpeakerId::new("alice_smith")).unwrap();
        assert!(alice > 0.0, "Bob is 'less likely' to say Alice's words");
        assert!(matches!(
            speaker_uniq(&records, &corpus, &SpeakerId::new("nobody")).unwrap_err(),
            Error::NoRecordsForSpeaker(_)
        ));
    }

    fn record_for(sentence_id: &str, sent_uniq: f64) -> UniquenessRecord {
        // bpc_original 0 and a single alternate at `sent_uniq` keeps the
        // derivation exact.
        UniquenessRecord::new(
            sentence_id,
            0.0,
            BTreeMap::from([("x".to_string(), sent_uniq)]),
        )
    }

    #[test]
    fn constant_records_aggregate_to_zero_width_intervals() {
        let corpus = two_speaker_corpus();
        let records: Vec<UniquenessRecord> = corpus
            .sentences()
            .iter()
            .map(|s| record_for(&s.id, 0.42))
            .collect();
        for dim in [
            AggregateDim::Speaker,
            AggregateDim::Party { focal: None },
            AggregateDim::LengthBin,
            AggregateDim::Year,
            AggregateDim::Term,
            AggregateDim::Decile,
        ] {
            let rows = aggregate(&records, &corpus, &dim, CiMethod::Normal).unwrap();
            assert!(!rows.is_empty(), "dim {dim:?}");
            for row in rows {
                assert_abs_diff_eq!(row.ci.mean, 0.42, epsilon = 1e-12);
                assert_abs_diff_eq!(row.ci.lo, row.ci.hi, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn party_dimension_splits_out_the_focal_speaker() {
        let corpus = ingest(&debate_jsonl(&[
            ("d1", "Alice Smith", "D", 0, "One two."),
            ("d1", "Bob Jones", "R", 1, "Three four."),
            ("d1", "Carol White", "R", 2, "Five six."),
        ]));
        let records: Vec<UniquenessRecord> = corpus
            .sentences()
            .iter()
            .enumerate()
            .map(|(i, s)| record_for(&s.id, i as f64))
            .collect();
        let rows = aggregate(
            &records,
            &corpus,
            &AggregateDim::Party { focal: Some(SpeakerId::new("carol_white")) },
            CiMethod::Normal,
        )
        .unwrap();
        let names: Vec<&str> = rows.iter().map(|r| r.group.as_str()).collect();
        assert_eq!(names, vec!["carol_white", "democrat", "republican"]);
        let by_name = |n: &str| rows.iter().find(|r| r.group == n).unwrap().ci.mean;
        assert_abs_diff_eq!(by_name("carol_white"), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(by_name("democrat"), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(by_name("republican"), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn length_bins_are_width_five_and_bounded() {
        let corpus = ingest(&debate_jsonl(&[
            ("d1", "Alice Smith", "D", 0, "One two three."),
            (
                "d1",
                "Alice Smith",
                "D",
                1,
                "This sentence contains exactly seven words total.",
            ),
        ]));
        assert_eq!(corpus.sentences()[0].word_count, 3);
        assert_eq!(corpus.sentences()[1].word_count, 7);
        let records: Vec<UniquenessRecord> = corpus
            .sentences()
            .iter()
            .map(|s| record_for(&s.id, 1.0))
            .collect();
        let rows =
            aggregate(&records, &corpus, &AggregateDim::LengthBin, CiMethod::Normal).unwrap();
        let names: Vec<&str> = rows.iter().map(|r| r.group.as_str()).collect();
        assert_eq!(names, vec!["0-4", "5-9"]);
    }

    #[test]
    fn decile_keeps_the_top_tenth() {
        let corpus = ingest(&debate_jsonl(
            &(0..10)
                .map(|i| ("d1", "Alice Smith", "D", i, "Words here."))
                .collect::<Vec<_>>(),
        ));
        // Records 1..=10; the top 10% of ten records is the single best.
        let records: Vec<UniquenessRecord> = corpus
            .sentences()
            .iter()
            .enumerate()
            .map(|(i, s)| record_for(&s.id, (i + 1) as f64))
            .collect();
        let rows =
            aggregate(&records, &corpus, &AggregateDim::Decile, CiMethod::Normal).unwrap();
        assert_eq!(rows.len(), 1);
        assert_abs_diff_eq!(rows[0].ci.mean, 10.0, epsilon = 1e-12);
    }
}

//! Transcript corpora: ingestion, segmentation, normalization, masking.
//!
//! A [`Corpus`] is an immutable collection of [`Sentence`]s grouped into
//! [`Document`]s and attributed to [`Speaker`]s. Ingestion reads JSONL
//! transcript records, splits multi-sentence turns, strips audience
//! annotations (`[applause]`, `[laughter]`), and derives the normalized and
//! entity-masked variants of every sentence up front, so downstream stages
//! can treat the corpus as read-only shared data.

mod mask;
mod normalize;
mod segment;

pub use mask::{mask_spans, mask_with_tagger, BuiltinTagger, EntityTagger, MASK_TOKEN};
pub use normalize::normalize;
pub use segment::segment;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::ops::Range;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// ---------- identifiers and enums ----------

/// Opaque, stable speaker identifier (a slug of the display name).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpeakerId(String);

impl SpeakerId {
    pub fn new(id: impl Into<String>) -> Self {
        SpeakerId(id.into())
    }

    /// Derives the canonical id for a display name: lowercase alphanumeric
    /// runs joined by underscores (`"Donald Trump"` → `donald_trump`).
    pub fn from_display_name(name: &str) -> Self {
        let mut s = String::with_capacity(name.len());
        let mut gap = true;
        for c in name.to_lowercase().chars() {
            if c.is_alphanumeric() {
                s.push(c);
                gap = false;
            } else if !gap {
                s.push('_');
                gap = true;
            }
        }
        SpeakerId(s.trim_matches('_').to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SpeakerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SpeakerId {
    fn from(s: &str) -> Self {
        SpeakerId(s.to_string())
    }
}

/// Political party affiliation as recorded in the transcripts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Party {
    #[serde(rename = "D")]
    Democrat,
    #[serde(rename = "R")]
    Republican,
    #[serde(rename = "O")]
    Other,
}

impl Party {
    pub fn letter(self) -> &'static str {
        match self {
            Party::Democrat => "D",
            Party::Republican => "R",
            Party::Other => "O",
        }
    }

    fn parse(s: &str) -> Option<Party> {
        match s {
            "D" => Some(Party::Democrat),
            "R" => Some(Party::Republican),
            "O" => Some(Party::Other),
            _ => None,
        }
    }
}

/// Corpus genre. Every corpus holds exactly one genre.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Genre {
    Debate,
    Sotu,
    Campaign,
}

impl Genre {
    pub fn as_str(self) -> &'static str {
        match self {
            Genre::Debate => "debate",
            Genre::Sotu => "sotu",
            Genre::Campaign => "campaign",
        }
    }

    pub fn parse(s: &str) -> Result<Genre> {
        match s {
            "debate" => Ok(Genre::Debate),
            "sotu" => Ok(Genre::Sotu),
            "campaign" => Ok(Genre::Campaign),
            other => Err(Error::UnknownGenre(other.to_string())),
        }
    }
}

impl fmt::Display for Genre {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Opponent-mention label attached by the tagging stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MentionLabel {
    Definite,
    Possible,
    #[default]
    None,
}

// ---------- core records ----------

/// A speaker appearing in a corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Speaker {
    pub id: SpeakerId,
    pub display_name: String,
    pub party: Party,
    /// Whether the speaker participates in the alternate-prompt pool.
    /// Ingestion marks everyone `false`; the scoring configuration opts
    /// speakers in explicitly.
    pub is_pool_member: bool,
}

/// A speech, debate, or address: the unit that carries date metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub genre: Genre,
    pub date: NaiveDate,
    pub title: String,
    /// Presidential election cycle the document belongs to (debate and
    /// campaign genres only): the document year rounded up to the next
    /// year divisible by four.
    pub election_cycle: Option<i32>,
    /// 1-based ordinal of this document's year/cycle among the distinct
    /// years/cycles of its sole speaker. `None` for multi-speaker documents.
    pub term_index: Option<u32>,
}

/// One sentence, with every derived representation precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct Sentence {
    pub id: String,
    pub doc_id: String,
    pub speaker: SpeakerId,
    /// Zero-based position within the document.
    pub seq: usize,
    /// Verbatim transcript text.
    pub raw_text: String,
    /// Lowercased, contraction-expanded, punctuation-free form.
    pub normalized_text: String,
    /// Raw text with entity spans collapsed to [`MASK_TOKEN`].
    pub masked_text: String,
    /// Whitespace tokens in `normalized_text`.
    pub word_count: usize,
    /// Characters in `raw_text` (the denominator for bits-per-character).
    pub char_len: usize,
    pub mention_label: MentionLabel,
    /// Per-token part-of-speech tags aligned with the whitespace tokens of
    /// `raw_text`, when the source transcript supplies them.
    pub pos_tags: Option<Vec<String>>,
}

impl Sentence {
    /// Builds a sentence from raw text, deriving the normalized and masked
    /// forms with the builtin entity tagger.
    pub fn derive(
        id: impl Into<String>,
        doc_id: impl Into<String>,
        speaker: SpeakerId,
        seq: usize,
        raw_text: impl Into<String>,
    ) -> Sentence {
        let raw_text = raw_text.into();
        let normalized_text = normalize(&raw_text);
        let masked_text = mask_with_tagger(&raw_text, &BuiltinTagger)
            .expect("builtin tagger yields non-overlapping spans");
        Sentence {
            id: id.into(),
            doc_id: doc_id.into(),
            speaker,
            seq,
            word_count: normalized_text.split_whitespace().count(),
            char_len: raw_text.chars().count(),
            raw_text,
            normalized_text,
            masked_text,
            mention_label: MentionLabel::None,
            pos_tags: None,
        }
    }

    /// Whitespace tokens of the normalized text.
    pub fn normalized_tokens(&self) -> impl Iterator<Item = &str> {
        self.normalized_text.split_whitespace()
    }
}

// ---------- corpus ----------

/// An immutable, queryable transcript collection.
///
/// Sentences are stored contiguously per document, ordered by `(document
/// first-appearance, seq)`; all lookups go through prebuilt indices, so a
/// corpus can be shared freely across scoring threads.
#[derive(Debug, Clone)]
pub struct Corpus {
    genre: Genre,
    speakers: BTreeMap<SpeakerId, Speaker>,
    documents: Vec<Document>,
    doc_index: HashMap<String, usize>,
    doc_ranges: HashMap<String, Range<usize>>,
    sentences: Vec<Sentence>,
    sentence_index: HashMap<String, usize>,
}

impl Corpus {
    /// Assembles and validates a corpus from parts. Sentences are reordered
    /// by `(document order, seq)`; ids must be unique and every reference
    /// must resolve.
    pub fn from_parts(
        genre: Genre,
        speakers: Vec<Speaker>,
        documents: Vec<Document>,
        mut sentences: Vec<Sentence>,
    ) -> Result<Corpus> {
        let mut speaker_map = BTreeMap::new();
        for sp in speakers {
            let id = sp.id.clone();
            if speaker_map.insert(sp.id.clone(), sp).is_some() {
                return Err(Error::DuplicateRecord(format!("speaker {id}")));
            }
        }
        let mut doc_index = HashMap::new();
        for (i, doc) in documents.iter().enumerate() {
            if doc_index.insert(doc.id.clone(), i).is_some() {
                return Err(Error::DuplicateRecord(doc.id.clone()));
            }
        }
        sentences.sort_by(|a, b| {
            let da = doc_index.get(&a.doc_id).copied().unwrap_or(usize::MAX);
            let db = doc_index.get(&b.doc_id).copied().unwrap_or(usize::MAX);
            (da, a.seq).cmp(&(db, b.seq))
        });
        let mut sentence_index = HashMap::new();
        let mut doc_ranges: HashMap<String, Range<usize>> = HashMap::new();
        for (i, s) in sentences.iter().enumerate() {
            if !doc_index.contains_key(&s.doc_id) {
                return Err(Error::UnknownDocument(s.doc_id.clone()));
            }
            if !speaker_map.contains_key(&s.speaker) {
                return Err(Error::UnknownSpeaker(s.speaker.to_string()));
            }
            if sentence_index.insert(s.id.clone(), i).is_some() {
                return Err(Error::DuplicateRecord(s.id.clone()));
            }
            doc_ranges
                .entry(s.doc_id.clone())
                .and_modify(|r| r.end = i + 1)
                .or_insert(i..i + 1);
        }
        Ok(Corpus {
            genre,
            speakers: speaker_map,
            documents,
            doc_index,
            doc_ranges,
            sentences,
            sentence_index,
        })
    }

    pub fn genre(&self) -> Genre {
        self.genre
    }

    pub fn speakers(&self) -> impl Iterator<Item = &Speaker> {
        self.speakers.values()
    }

    pub fn speaker(&self, id: &SpeakerId) -> Option<&Speaker> {
        self.speakers.get(id)
    }

    /// Speakers opted into the alternate-prompt pool, in id order.
    pub fn pool_speakers(&self) -> impl Iterator<Item = &Speaker> {
        self.speakers.values().filter(|s| s.is_pool_member)
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn document(&self, id: &str) -> Option<&Document> {
        self.doc_index.get(id).map(|&i| &self.documents[i])
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn sentence(&self, id: &str) -> Option<&Sentence> {
        self.sentence_index.get(id).map(|&i| &self.sentences[i])
    }

    /// Sentences of one document in `seq` order (contiguous slice).
    pub fn document_sentences(&self, doc_id: &str) -> &[Sentence] {
        self.doc_ranges
            .get(doc_id)
            .map(|r| &self.sentences[r.clone()])
            .unwrap_or(&[])
    }

    pub fn sentences_by(&self, speaker: &SpeakerId) -> impl Iterator<Item = &Sentence> {
        let speaker = speaker.clone();
        self.sentences.iter().filter(move |s| s.speaker == speaker)
    }

    /// Marks exactly the listed speakers as pool members.
    pub fn set_pool(&mut self, pool: &[SpeakerId]) -> Result<()> {
        for id in pool {
            if !self.speakers.contains_key(id) {
                return Err(Error::UnknownSpeaker(id.to_string()));
            }
        }
        for sp in self.speakers.values_mut() {
            sp.is_pool_member = pool.contains(&sp.id);
        }
        Ok(())
    }

    /// Returns a copy with replacement mention labels; ids absent from the
    /// map keep their current label.
    pub fn with_mention_labels(&self, labels: &HashMap<String, MentionLabel>) -> Corpus {
        let mut out = self.clone();
        for s in &mut out.sentences {
            if let Some(&l) = labels.get(&s.id) {
                s.mention_label = l;
            }
        }
        out
    }

    /// Keeps only documents satisfying `keep` (and speakers that still have
    /// sentences afterwards).
    fn retain_documents(&self, keep: impl Fn(&Document) -> bool) -> Corpus {
        let documents: Vec<Document> = self.documents.iter().filter(|d| keep(d)).cloned().collect();
        let kept: HashSet<&str> = documents.iter().map(|d| d.id.as_str()).collect();
        let sentences: Vec<Sentence> = self
            .sentences
            .iter()
            .filter(|s| kept.contains(s.doc_id.as_str()))
            .cloned()
            .collect();
        let used: HashSet<&SpeakerId> = sentences.iter().map(|s| &s.speaker).collect();
        let speakers: Vec<Speaker> = self
            .speakers
            .values()
            .filter(|sp| used.contains(&sp.id))
            .cloned()
            .collect();
        Corpus::from_parts(self.genre, speakers, documents, sentences)
            .expect("filtering preserves corpus invariants")
    }

    /// Serializes the corpus back to transcript JSONL. Mention labels other
    /// than `none` and part-of-speech tags are included, so re-ingesting the
    /// output reproduces this corpus exactly.
    pub fn emit(&self, mut w: impl Write) -> Result<()> {
        for s in &self.sentences {
            let doc = self.document(&s.doc_id).expect("sentence references known document");
            let sp = self.speaker(&s.speaker).expect("sentence references known speaker");
            let record = TranscriptRecord {
                doc_id: doc.id.clone(),
                genre: doc.genre.as_str().to_string(),
                date: doc.date.format("%Y-%m-%d").to_string(),
                title: doc.title.clone(),
                speaker: sp.display_name.clone(),
                party: sp.party.letter().to_string(),
                seq: s.seq as i64,
                text: s.raw_text.clone(),
                pos: s.pos_tags.clone(),
                mention: match s.mention_label {
                    MentionLabel::None => None,
                    MentionLabel::Definite => Some("definite".to_string()),
                    MentionLabel::Possible => Some("possible".to_string()),
                },
            };
            serde_json::to_writer(&mut w, &record)?;
            w.write_all(b"\n").map_err(|e| Error::Write {
                path: "<writer>".into(),
                source: e,
            })?;
        }
        Ok(())
    }

    /// Writes `emit` output to a file path.
    pub fn emit_to_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(Error::write(path))?;
        self.emit(std::io::BufWriter::new(file))
    }
}

// ---------- ingestion ----------

/// One JSONL transcript record (one speaking turn).
#[derive(Debug, Serialize, Deserialize)]
struct TranscriptRecord {
    doc_id: String,
    genre: String,
    date: String,
    title: String,
    speaker: String,
    party: String,
    seq: i64,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pos: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mention: Option<String>,
}

/// Ingestion knobs. The defaults match the transcript conventions of
/// televised debates: bracketed audience reactions are removed and
/// stand-alone reaction sentences are dropped.
#[derive(Debug, Clone)]
pub struct IngestOptions {
    /// Normalized annotation phrases to strip/drop (`"applause"`, …).
    pub annotation_stoplist: Vec<String>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            annotation_stoplist: [
                "applause",
                "applause and cheers",
                "audience booing",
                "boos",
                "booing",
                "cheering",
                "cheers",
                "cheers and applause",
                "crosstalk",
                "inaudible",
                "laughter",
                "laughing",
                "music",
                "sustained applause",
                "unintelligible",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        }
    }
}

/// Per-speaker ingestion statistics.
#[derive(Debug, Clone, Serialize)]
pub struct SpeakerIngestStats {
    pub speaker: SpeakerId,
    pub display_name: String,
    pub party: String,
    pub n_sentences: usize,
    pub mean_sentence_words: f64,
}

/// Summary returned alongside a freshly ingested corpus.
#[derive(Debug, Clone, Serialize)]
pub struct IngestReport {
    pub genre: Genre,
    pub n_records: usize,
    pub n_documents: usize,
    pub n_sentences: usize,
    /// Bracketed reaction spans removed plus stand-alone reaction sentences
    /// dropped.
    pub n_dropped_annotations: usize,
    /// Sentence counts per party letter.
    pub party_sentences: BTreeMap<String, usize>,
    /// Sorted by speaker id.
    pub speakers: Vec<SpeakerIngestStats>,
}

/// Reads a JSONL transcript file into a corpus (default options).
pub fn ingest(path: impl AsRef<Path>, genre: Genre) -> Result<(Corpus, IngestReport)> {
    ingest_with(path, genre, &IngestOptions::default())
}

/// Reads a JSONL transcript file into a corpus.
pub fn ingest_with(
    path: impl AsRef<Path>,
    genre: Genre,
    opts: &IngestOptions,
) -> Result<(Corpus, IngestReport)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(Error::read(path))?;
    ingest_reader(BufReader::new(file), &path.display().to_string(), genre, opts)
}

/// Reads JSONL transcript records from any reader. `path_label` appears in
/// error messages in place of a file name.
pub fn ingest_reader(
    reader: impl BufRead,
    path_label: &str,
    genre: Genre,
    opts: &IngestOptions,
) -> Result<(Corpus, IngestReport)> {
    let malformed = |line: usize, reason: String| Error::MalformedRecord {
        path: path_label.to_string(),
        line,
        reason,
    };

    // Parse all records, grouped per document in first-appearance order.
    let mut doc_order: Vec<String> = Vec::new();
    let mut doc_meta: HashMap<String, (NaiveDate, String)> = HashMap::new();
    let mut doc_records: HashMap<String, Vec<(i64, usize, TranscriptRecord)>> = HashMap::new();
    let mut seen_seq: HashSet<(String, i64)> = HashSet::new();
    let mut speakers: BTreeMap<SpeakerId, Speaker> = BTreeMap::new();
    let mut n_records = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| malformed(lineno, format!("unreadable line: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TranscriptRecord = serde_json::from_str(&line)
            .map_err(|e| malformed(lineno, format!("invalid JSON: {e}")))?;
        n_records += 1;

        let record_genre = Genre::parse(&record.genre)?;
        if record_genre != genre {
            return Err(malformed(
                lineno,
                format!("record genre `{record_genre}` does not match requested `{genre}`"),
            ));
        }
        let date = NaiveDate::parse_from_str(&record.date, "%Y-%m-%d")
            .map_err(|e| malformed(lineno, format!("bad date `{}`: {e}", record.date)))?;
        let party = Party::parse(&record.party)
            .ok_or_else(|| malformed(lineno, format!("unknown party `{}`", record.party)))?;
        if record.speaker.trim().is_empty() {
            return Err(malformed(lineno, "empty speaker name".to_string()));
        }

        if !seen_seq.insert((record.doc_id.clone(), record.seq)) {
            return Err(Error::DuplicateRecord(format!(
                "{}:{}",
                record.doc_id, record.seq
            )));
        }
        match doc_meta.get(&record.doc_id) {
            None => {
                doc_order.push(record.doc_id.clone());
                doc_meta.insert(record.doc_id.clone(), (date, record.title.clone()));
            }
            Some((d, t)) => {
                if *d != date || *t != record.title {
                    return Err(malformed(
                        lineno,
                        format!("document `{}` has conflicting date/title", record.doc_id),
                    ));
                }
            }
        }

        let id = SpeakerId::from_display_name(&record.speaker);
        if id.as_str().is_empty() {
            return Err(malformed(lineno, format!("speaker name `{}` has no usable characters", record.speaker)));
        }
        match speakers.get(&id) {
            None => {
                speakers.insert(
                    id.clone(),
                    Speaker {
                        id: id.clone(),
                        display_name: record.speaker.clone(),
                        party,
                        is_pool_member: false,
                    },
                );
            }
            Some(existing) => {
                if existing.party != party {
                    return Err(malformed(
                        lineno,
                        format!("speaker `{id}` appears with conflicting parties"),
                    ));
                }
            }
        }

        doc_records
            .entry(record.doc_id.clone())
            .or_default()
            .push((record.seq, lineno, record));
    }

    // Split turns into sentences document by document.
    let mut documents = Vec::with_capacity(doc_order.len());
    let mut sentences = Vec::new();
    let mut n_dropped = 0usize;

    for doc_id in &doc_order {
        let (date, title) = doc_meta[doc_id].clone();
        let mut records = doc_records.remove(doc_id).unwrap_or_default();
        records.sort_by_key(|(seq, _, _)| *seq);

        let mut seq = 0usize;
        for (_, lineno, record) in records {
            let (cleaned, removed_spans) = strip_annotations(&record.text, &opts.annotation_stoplist);
            n_dropped += removed_spans;
            let segments = segment(&cleaned);

            // Part-of-speech arrays cover the whole turn; carve them up by
            // each segment's token count. Segmentation preserves tokens, so
            // the total must match exactly.
            let mut pos_tags = record.pos;
            if let Some(tags) = &pos_tags {
                let token_total: usize = segments.iter().map(|s| s.split_whitespace().count()).sum();
                if tags.len() != token_total {
                    return Err(malformed(
                        lineno,
                        format!(
                            "pos array has {} tags but the turn has {} tokens after annotation \
                             stripping",
                            tags.len(),
                            token_total
                        ),
                    ));
                }
            }

            let mention = match record.mention.as_deref() {
                None | Some("none") => MentionLabel::None,
                Some("definite") => MentionLabel::Definite,
                Some("possible") => MentionLabel::Possible,
                Some(other) => {
                    return Err(malformed(lineno, format!("unknown mention label `{other}`")));
                }
            };

            let speaker_id = SpeakerId::from_display_name(&record.speaker);
            let mut tag_cursor = 0usize;
            for seg in segments {
                let n_tokens = seg.split_whitespace().count();
                let seg_tags = pos_tags
                    .as_mut()
                    .map(|tags| tags[tag_cursor..tag_cursor + n_tokens].to_vec());
                tag_cursor += n_tokens;

                if is_annotation_sentence(&seg, &opts.annotation_stoplist) {
                    n_dropped += 1;
                    continue;
                }
                let mut sentence = Sentence::derive(
                    format!("{doc_id}:{seq}"),
                    doc_id.clone(),
                    speaker_id.clone(),
                    seq,
                    seg,
                );
                sentence.pos_tags = seg_tags;
                sentence.mention_label = mention;
                sentences.push(sentence);
                seq += 1;
            }
        }

        documents.push(Document {
            id: doc_id.clone(),
            genre,
            date,
            title,
            election_cycle: match genre {
                Genre::Debate | Genre::Campaign => Some(election_cycle_for(date)),
                Genre::Sotu => None,
            },
            term_index: None, // filled in below once speaker→docs is known
        });
    }

    assign_term_indices(&mut documents, &sentences);

    let corpus = Corpus::from_parts(genre, speakers.into_values().collect(), documents, sentences)?;
    let report = build_report(&corpus, n_records, n_dropped);
    Ok((corpus, report))
}

/// Rounds a date up to the presidential election year (divisible by 4).
fn election_cycle_for(date: NaiveDate) -> i32 {
    let y = date.year();
    y + (4 - y.rem_euclid(4)) % 4
}

/// Computes 1-based term ordinals for single-speaker documents: the rank of
/// the document's cycle (or year, for genres without cycles) among the
/// distinct values of its speaker.
fn assign_term_indices(documents: &mut [Document], sentences: &[Sentence]) {
    let mut doc_speakers: HashMap<&str, HashSet<&SpeakerId>> = HashMap::new();
    for s in sentences {
        doc_speakers.entry(s.doc_id.as_str()).or_default().insert(&s.speaker);
    }
    let period = |d: &Document| d.election_cycle.unwrap_or_else(|| d.date.year());

    let mut speaker_periods: HashMap<SpeakerId, Vec<i32>> = HashMap::new();
    for d in documents.iter() {
        if let Some(set) = doc_speakers.get(d.id.as_str()) {
            if set.len() == 1 {
                let sp = (*set.iter().next().unwrap()).clone();
                speaker_periods.entry(sp).or_default().push(period(d));
            }
        }
    }
    for periods in speaker_periods.values_mut() {
        periods.sort_unstable();
        periods.dedup();
    }
    for d in documents.iter_mut() {
        let Some(set) = doc_speakers.get(d.id.as_str()) else {
            continue;
        };
        if set.len() != 1 {
            continue;
        }
        let sp = *set.iter().next().unwrap();
        if let Some(periods) = speaker_periods.get(sp) {
            let p = period(d);
            d.term_index = periods.iter().position(|&x| x == p).map(|i| i as u32 + 1);
        }
    }
}

fn build_report(corpus: &Corpus, n_records: usize, n_dropped: usize) -> IngestReport {
    let mut party_sentences: BTreeMap<String, usize> = BTreeMap::new();
    let mut per_speaker: BTreeMap<SpeakerId, (usize, usize)> = BTreeMap::new(); // (sentences, words)
    for s in corpus.sentences() {
        let sp = corpus.speaker(&s.speaker).expect("known speaker");
        *party_sentences.entry(sp.party.letter().to_string()).or_default() += 1;
        let e = per_speaker.entry(s.speaker.clone()).or_default();
        e.0 += 1;
        e.1 += s.word_count;
    }
    let speakers = per_speaker
        .into_iter()
        .map(|(id, (n, words))| {
            let sp = corpus.speaker(&id).expect("known speaker");
            SpeakerIngestStats {
                display_name: sp.display_name.clone(),
                party: sp.party.letter().to_string(),
                speaker: id,
                n_sentences: n,
                mean_sentence_words: words as f64 / n as f64,
            }
        })
        .collect();
    IngestReport {
        genre: corpus.genre(),
        n_records,
        n_documents: corpus.documents().len(),
        n_sentences: corpus.sentences().len(),
        n_dropped_annotations: n_dropped,
        party_sentences,
        speakers,
    }
}

// ---------- audience-annotation handling ----------

/// Removes bracketed/parenthesized spans whose content is on the stoplist
/// (`"Thank you. [applause] And..."` → `"Thank you.  And..."`) and returns
/// how many spans were removed.
fn strip_annotations(text: &str, stoplist: &[String]) -> (String, usize) {
    let mut out = String::with_capacity(text.len());
    let mut removed = 0usize;
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let closer = match c {
            '[' => Some(']'),
            '(' => Some(')'),
            _ => None,
        };
        if let Some(closer) = closer {
            if let Some(end) = chars[i + 1..].iter().position(|&x| x == closer) {
                let inner: String = chars[i + 1..i + 1 + end].iter().collect();
                if is_stoplisted(&inner, stoplist) {
                    i += end + 2; // skip the whole bracketed span
                    removed += 1;
                    continue;
                }
            }
        }
        out.push(c);
        i += 1;
    }
    (out, removed)
}

/// True when an already-segmented sentence is nothing but an annotation.
fn is_annotation_sentence(sentence: &str, stoplist: &[String]) -> bool {
    let trimmed = sentence
        .trim()
        .trim_start_matches(['[', '('])
        .trim_end_matches([']', ')']);
    is_stoplisted(trimmed, stoplist)
}

fn is_stoplisted(inner: &str, stoplist: &[String]) -> bool {
    let normalized = normalize(inner);
    !normalized.is_empty() && stoplist.iter().any(|s| *s == normalized)
}

/// 1-based ordinal of each document's period within its speaker's distinct
/// periods, keyed by `(speaker, doc_id)`. The period is the election cycle
/// when the document has one, otherwise the document year — so a candidate's
/// debates group by campaign, and yearly addresses group by year.
///
/// Unlike [`Document::term_index`], this is well-defined for multi-speaker
/// documents: each participant gets their own ordinal.
pub fn speaker_term_map(corpus: &Corpus) -> HashMap<(SpeakerId, String), u32> {
    let period = |d: &Document| d.election_cycle.unwrap_or_else(|| d.date.year());
    let mut speaker_periods: HashMap<&SpeakerId, Vec<i32>> = HashMap::new();
    let mut pairs: HashSet<(&SpeakerId, &str)> = HashSet::new();
    for s in corpus.sentences() {
        pairs.insert((&s.speaker, &s.doc_id));
    }
    for &(sp, doc_id) in &pairs {
        let doc = corpus.document(doc_id).expect("sentence references known document");
        speaker_periods.entry(sp).or_default().push(period(doc));
    }
    for periods in speaker_periods.values_mut() {
        periods.sort_unstable();
        periods.dedup();
    }
    pairs
        .into_iter()
        .map(|(sp, doc_id)| {
            let doc = corpus.document(doc_id).expect("known document");
            let p = period(doc);
            let ordinal = speaker_periods[sp].iter().position(|&x| x == p).unwrap() as u32 + 1;
            ((sp.clone(), doc_id.to_string()), ordinal)
        })
        .collect()
}

// ---------- campaign-window filtering ----------

/// Keeps documents dated within `window_days` before `election_day`
/// (inclusive on both ends) whose election cycle is at least
/// `min_cycle_year`. Documents lacking a cycle are an error, named by id.
pub fn filter_campaign_window(
    corpus: &Corpus,
    election_day: NaiveDate,
    window_days: u32,
    min_cycle_year: i32,
) -> Result<Corpus> {
    filter_campaign_windows(corpus, &[election_day], window_days, min_cycle_year)
}

/// Multi-cycle variant of [`filter_campaign_window`]: a document is kept if
/// it falls in the window before *any* of the given election days.
pub fn filter_campaign_windows(
    corpus: &Corpus,
    election_days: &[NaiveDate],
    window_days: u32,
    min_cycle_year: i32,
) -> Result<Corpus> {
    for doc in corpus.documents() {
        if doc.election_cycle.is_none() {
            return Err(Error::MissingDocumentField {
                doc_id: doc.id.clone(),
                field: "election_cycle",
            });
        }
    }
    let windows: Vec<(NaiveDate, NaiveDate)> = election_days
        .iter()
        .map(|&day| (day - Duration::days(window_days as i64), day))
        .collect();
    Ok(corpus.retain_documents(|doc| {
        let cycle = doc.election_cycle.expect("checked above");
        cycle >= min_cycle_year
            && windows.iter().any(|&(lo, hi)| doc.date >= lo && doc.date <= hi)
    }))
}

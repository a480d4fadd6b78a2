//! Divisive-word lexicon: seed expansion, annotation votes, usage counts.
//!
//! The bundled lexicon holds 178 single-word insult/outrage terms built by
//! expanding 10 seed words through embedding-space nearest neighbors and
//! keeping the candidates a strict majority of four annotators accepted.
//! This module ships that lexicon ([`Lexicon::bundled`]) and the machinery
//! to rebuild or extend it: cosine-similarity expansion over a word-vector
//! table, vote aggregation with majority statistics (Fleiss' kappa,
//! majority-class-size table), and corpus frequency counts.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::sync::LazyLock;

use serde::Serialize;

use crate::corpus::{speaker_term_map, Corpus, Sentence, SpeakerId};
use crate::error::{Error, Result};

// ---------- word embeddings ----------

/// A dense word-vector table in the plain-text format
/// `term v1 v2 … vd`, one term per line.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn load(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(Error::read(path))?;
        Self::from_reader(BufReader::new(file), &path.display().to_string())
    }

    pub fn from_reader(reader: impl Read, path_label: &str) -> Result<EmbeddingTable> {
        let bad = |reason: String| Error::BadEmbeddingTable {
            path: path_label.to_string(),
            reason,
        };
        let mut dim = None;
        let mut vectors = BTreeMap::new();
        for (lineno, line) in BufReader::new(reader).lines().enumerate() {
            let lineno = lineno + 1;
            let line = line.map_err(|e| bad(format!("line {lineno}: {e}")))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let term = parts.next().expect("non-empty line").to_string();
            let values: Vec<f64> = parts
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|e| bad(format!("line {lineno}: bad value `{v}`: {e}")))
                })
                .collect::<Result<_>>()?;
            if values.is_empty() {
                return Err(bad(format!("line {lineno}: term `{term}` has no values")));
            }
            match dim {
                None => dim = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(bad(format!(
                        "line {lineno}: expected {d} dimensions, got {}",
                        values.len()
                    )));
                }
                _ => {}
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(bad(format!("line {lineno}: non-finite value for `{term}`")));
            }
            if values.iter().all(|&v| v == 0.0) {
                return Err(bad(format!("line {lineno}: zero vector for `{term}`")));
            }
            if vectors.insert(term.clone(), values).is_some() {
                return Err(bad(format!("line {lineno}: duplicate term `{term}`")));
            }
        }
        let dim = dim.ok_or_else(|| bad("table is empty".to_string()))?;
        Ok(EmbeddingTable { dim, vectors })
    }

    /// Builds a table from in-memory vectors (used by tests and bindings).
    pub fn from_vectors(vectors: impl IntoIterator<Item = (String, Vec<f64>)>) -> Result<EmbeddingTable> {
        let mut text = String::new();
        for (term, values) in vectors {
            text.push_str(&term);
            for v in values {
                text.push_str(&format!(" {v}"));
            }
            text.push('\n');
        }
        Self::from_reader(text.as_bytes(), "<memory>")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn contains(&self, term: &str) -> bool {
        self.vectors.contains_key(term)
    }

    fn cosine(&self, a: &str, b: &str) -> f64 {
        let (va, vb) = (&self.vectors[a], &self.vectors[b]);
        let dot: f64 = va.iter().zip(vb).map(|(x, y)| x * y).sum();
        let na: f64 = va.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = vb.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    }
}

/// How per-seed similarities combine into one candidate score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SeedAggregation {
    /// Score a candidate by its closest seed (the default: one strong
    /// affinity is enough to surface a candidate for annotation).
    #[default]
    Max,
    /// Score by the mean similarity over all seeds.
    Mean,
}

/// Ranks non-seed vocabulary terms by aggregated cosine similarity to the
/// seeds and returns the top `k` (fewer only if the vocabulary runs out).
/// Ties break lexicographically. Seeds missing from the table are an error,
/// reported by name.
pub fn expand_seeds(
    table: &EmbeddingTable,
    seeds: &[String],
    k: usize,
    aggregation: SeedAggregation,
) -> Result<Vec<String>> {
    for seed in seeds {
        if !table.contains(seed) {
            return Err(Error::SeedNotInVocabulary(seed.clone()));
        }
    }
    let seed_set: HashSet<&str> = seeds.iter().map(String::as_str).collect();
    let mut scored: Vec<(f64, &str)> = table
        .vectors
        .keys()
        .filter(|t| !seed_set.contains(t.as_str()))
        .map(|t| {
            let sims = seeds.iter().map(|s| table.cosine(t, s));
            let score = match aggregation {
                SeedAggregation::Max => sims.fold(f64::NEG_INFINITY, f64::max),
                SeedAggregation::Mean => {
                    let (sum, n) = sims.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
                    sum / n.max(1) as f64
                }
            };
            (score, t.as_str())
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    Ok(scored.into_iter().take(k).map(|(_, t)| t.to_string()).collect())
}

// ---------- annotation votes ----------

/// Binary annotation labels, items × raters. Loaded from a CSV whose header
/// is `term,<rater>,<rater>,…` and whose cells are `0`/`1`.
#[derive(Debug, Clone)]
pub struct AnnotationMatrix {
    items: Vec<String>,
    raters: Vec<String>,
    /// `labels[item][rater]`
    labels: Vec<Vec<bool>>,
}

impl AnnotationMatrix {
    pub fn new(items: Vec<String>, raters: Vec<String>, labels: Vec<Vec<bool>>) -> Result<Self> {
        if items.len() != labels.len() {
            return Err(Error::BadAnnotationMatrix(format!(
                "{} items but {} label rows",
                items.len(),
                labels.len()
            )));
        }
        if raters.len() < 2 {
            return Err(Error::BadAnnotationMatrix("need at least two raters".to_string()));
        }
        let mut seen = HashSet::new();
        for item in &items {
            if !seen.insert(item.as_str()) {
                return Err(Error::BadAnnotationMatrix(format!("duplicate item `{item}`")));
            }
        }
        for (item, row) in items.iter().zip(&labels) {
            if row.len() != raters.len() {
                return Err(Error::BadAnnotationMatrix(format!(
                    "item `{item}` has {} labels for {} raters",
                    row.len(),
                    raters.len()
                )));
            }
        }
        Ok(AnnotationMatrix { items, raters, labels })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<AnnotationMatrix> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(Error::read(path))?;
        Self::from_reader(file)
    }

    pub fn from_reader(reader: impl Read) -> Result<AnnotationMatrix> {
        let mut csv_reader = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = csv_reader.headers()?.clone();
        if headers.len() < 3 {
            return Err(Error::BadAnnotationMatrix(
                "header must be `term` plus at least two rater columns".to_string(),
            ));
        }
        let raters: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut items = Vec::new();
        let mut labels = Vec::new();
        for row in csv_reader.records() {
            let row = row?;
            if row.len() != headers.len() {
                return Err(Error::BadAnnotationMatrix(format!(
                    "row for `{}` has {} fields, expected {}",
                    row.get(0).unwrap_or(""),
                    row.len(),
                    headers.len()
                )));
            }
            items.push(row[0].trim().to_string());
            let votes: Vec<bool> = row
                .iter()
                .skip(1)
                .map(|cell| match cell.trim() {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    other => Err(Error::BadAnnotationMatrix(format!(
                        "label must be 0 or 1, got `{other}`"
                    ))),
                })
                .collect::<Result<_>>()?;
            labels.push(votes);
        }
        Self::new(items, raters, labels)
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn raters(&self) -> &[String] {
        &self.raters
    }

    pub fn n_raters(&self) -> usize {
        self.raters.len()
    }

    fn yes_counts(&self) -> impl Iterator<Item = usize> + '_ {
        self.labels.iter().map(|row| row.iter().filter(|&&v| v).count())
    }
}

/// Keeps the items a strict majority of raters accepted (> half the votes;
/// with four raters that means at least three).
pub fn aggregate_votes(matrix: &AnnotationMatrix) -> Lexicon {
    let terms: Vec<String> = matrix
        .items
        .iter()
        .zip(matrix.yes_counts())
        .filter(|&(_, yes)| 2 * yes > matrix.n_raters())
        .map(|(item, _)| item.clone())
        .collect();
    Lexicon::from_terms(terms, [] as [String; 0])
}

/// Percentage of items by majority-class size (the count of raters in the
/// larger vote class). Sizes run from `⌈r/2⌉` to `r`; percentages sum
/// to 100 over the sizes that occur.
pub fn majority_class_table(matrix: &AnnotationMatrix) -> BTreeMap<usize, f64> {
    let n_items = matrix.items.len();
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for yes in matrix.yes_counts() {
        let majority = yes.max(matrix.n_raters() - yes);
        *counts.entry(majority).or_default() += 1;
    }
    counts
        .into_iter()
        .map(|(size, c)| (size, 100.0 * c as f64 / n_items as f64))
        .collect()
}

/// Fleiss' kappa over the binary annotation matrix:
/// `κ = (P̄ − P̄_e) / (1 − P̄_e)`. When every vote lands in one category,
/// `P̄_e = 1` and the quotient is undefined; that is perfect agreement, so
/// the function returns 1.0.
pub fn fleiss_kappa(matrix: &AnnotationMatrix) -> f64 {
    let n = matrix.n_raters() as f64;
    let n_items = matrix.items.len() as f64;
    let mut p_bar = 0.0;
    let mut yes_total = 0.0;
    for yes in matrix.yes_counts() {
        let yes = yes as f64;
        let no = n - yes;
        p_bar += (yes * (yes - 1.0) + no * (no - 1.0)) / (n * (n - 1.0));
        yes_total += yes;
    }
    p_bar /= n_items;
    let p_yes = yes_total / (n_items * n);
    let p_e = p_yes * p_yes + (1.0 - p_yes) * (1.0 - p_yes);
    if (1.0 - p_e).abs() < 1e-12 {
        return 1.0;
    }
    (p_bar - p_e) / (1.0 - p_e)
}

// ---------- the lexicon ----------

/// An ordered set of single-word terms; seeds keep a flag.
#[derive(Debug, Clone)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
    index: HashMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LexiconEntry {
    pub term: String,
    pub is_seed: bool,
}

static BUNDLED: LazyLock<Lexicon> = LazyLock::new(|| {
    Lexicon::parse(include_str!("../data/divisive_lexicon.txt"), "<bundled>")
        .expect("bundled lexicon is well-formed")
});

impl Lexicon {
    /// The 178-term divisive-word lexicon shipped with the crate
    /// (10 seed terms marked).
    pub fn bundled() -> &'static Lexicon {
        &BUNDLED
    }

    /// Reads a lexicon file: one term per line, `*` suffix on seeds,
    /// `#` comments allowed. Terms must be single normalized words.
    pub fn load(path: impl AsRef<Path>) -> Result<Lexicon> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(Error::read(path))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, path_label: &str) -> Result<Lexicon> {
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let lineno = lineno + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |reason: String| Error::BadLexiconEntry {
                path: path_label.to_string(),
                line: lineno,
                reason,
            };
            let (term, is_seed) = match line.strip_suffix('*') {
                Some(t) => (t.trim(), true),
                None => (line, false),
            };
            if term.is_empty() {
                return Err(bad("empty term".to_string()));
            }
            if term.split_whitespace().count() != 1 {
                return Err(bad(format!("`{term}` is not a single word")));
            }
            if crate::corpus::normalize(term) != term {
                return Err(bad(format!("`{term}` is not in normalized form")));
            }
            entries.push(LexiconEntry { term: term.to_string(), is_seed });
        }
        Self::from_entries(entries, path_label)
    }

    /// Builds a lexicon from plain terms, marking those in `seeds`.
    pub fn from_terms(
        terms: impl IntoIterator<Item = String>,
        seeds: impl IntoIterator<Item = String>,
    ) -> Lexicon {
        let seed_set: HashSet<String> = seeds.into_iter().collect();
        let entries = terms
            .into_iter()
            .map(|term| LexiconEntry {
                is_seed: seed_set.contains(&term),
                term,
            })
            .collect();
        Self::from_entries(entries, "<memory>").expect("caller provides unique terms")
    }

    fn from_entries(entries: Vec<LexiconEntry>, path_label: &str) -> Result<Lexicon> {
        let mut index = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if index.insert(e.term.clone(), i).is_some() {
                return Err(Error::BadLexiconEntry {
                    path: path_label.to_string(),
                    line: 0,
                    reason: format!("duplicate term `{}`", e.term),
                });
            }
        }
        Ok(Lexicon { entries, index })
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.term.as_str())
    }

    pub fn seeds(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().filter(|e| e.is_seed).map(|e| e.term.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// Number of lexicon hits among the sentence's normalized tokens.
    pub fn count_matches(&self, sentence: &Sentence) -> usize {
        sentence.normalized_tokens().filter(|t| self.contains(t)).count()
    }

    /// Writes the lexicon in the one-term-per-line format.
    pub fn emit(&self, mut w: impl std::io::Write) -> Result<()> {
        for e in &self.entries {
            let line = if e.is_seed { format!("{}*\n", e.term) } else { format!("{}\n", e.term) };
            w.write_all(line.as_bytes()).map_err(|e| Error::Write {
                path: "<writer>".into(),
                source: e,
            })?;
        }
        Ok(())
    }
}

// ---------- corpus frequencies ----------

/// Grouping key for [`divisive_frequency`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrequencyGroupBy {
    Speaker,
    Year,
    /// Per-speaker term ordinal (first campaign, second campaign, …);
    /// rows are keyed `speaker/term`.
    Term,
}

/// One frequency row: lexicon hits over total tokens for a group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyRow {
    pub group: String,
    pub matches: usize,
    pub tokens: usize,
    pub frequency: f64,
}

/// Lexicon hit-rate per group, over normalized tokens. Groups without
/// sentences are absent; ordering is lexicographic by group key.
pub fn divisive_frequency(
    corpus: &Corpus,
    lexicon: &Lexicon,
    group_by: FrequencyGroupBy,
) -> Vec<FrequencyRow> {
    let term_map = match group_by {
        FrequencyGroupBy::Term => Some(speaker_term_map(corpus)),
        _ => None,
    };
    let mut counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for s in corpus.sentences() {
        let group = match group_by {
            FrequencyGroupBy::Speaker => s.speaker.to_string(),
            FrequencyGroupBy::Year => {
                use chrono::Datelike;
                let doc = corpus.document(&s.doc_id).expect("known document");
                doc.date.year().to_string()
            }
            FrequencyGroupBy::Term => {
                let ordinal = term_map
                    .as_ref()
                    .expect("term map built for Term grouping")
                    .get(&(s.speaker.clone(), s.doc_id.clone()))
                    .copied()
                    .expect("every sentence has a term ordinal");
                format!("{}/{}", s.speaker, ordinal)
            }
        };
        let e = counts.entry(group).or_default();
        e.0 += lexicon.count_matches(s);
        e.1 += s.word_count;
    }
    counts
        .into_iter()
        .map(|(group, (matches, tokens))| FrequencyRow {
            group,
            matches,
            tokens,
            frequency: if tokens == 0 { 0.0 } else { matches as f64 / tokens as f64 },
        })
        .collect()
}

/// A speaker's most-used lexicon terms: `(term, count)` sorted by
/// descending count, ties lexicographic; zero-count terms are omitted.
pub fn top_divisive_terms(
    corpus: &Corpus,
    lexicon: &Lexicon,
    speaker: &SpeakerId,
    n: usize,
) -> Vec<(String, usize)> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for s in corpus.sentences_by(speaker) {
        for token in s.normalized_tokens() {
            if lexicon.contains(token) {
                *counts.entry(token).or_default() += 1;
            }
        }
    }
    // BTreeMap iteration is lexicographic, so a stable sort by descending
    // count leaves ties in term order.
    let mut rows: Vec<(String, usize)> = counts
        .into_iter()
        .map(|(t, c)| (t.to_string(), c))
        .collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    rows.truncate(n);
    rows
}

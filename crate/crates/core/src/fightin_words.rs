//! Word-association z-scores between opponent-mention and non-mention
//! speech, and how much speakers' attack vocabularies overlap.
//!
//! The association statistic is the log-odds ratio with an informative
//! Dirichlet prior (Monroe, Colaresi & Quinn's "Fightin' Words"
//! estimator): for word `w` with counts `y_aw`, `y_bw` in two sub-corpora
//! of sizes `n_a`, `n_b` and prior mass `α_w` (summing to `α_0`),
//!
//! ```text
//! δ_w = ln[(y_aw + α_w) / (n_a + α_0 − y_aw − α_w)]
//!     − ln[(y_bw + α_w) / (n_b + α_0 − y_bw − α_w)]
//! z_w = δ_w / √(1/(y_aw + α_w) + 1/(y_bw + α_w))
//! ```
//!
//! Per speaker, sub-corpus Y holds the sentences that mention an opponent
//! and N the rest, so positive z marks mention-associated words. The
//! overlap metric then builds a bipartite speaker–word graph from each
//! speaker's top-n words and reports the mean degree of one speaker's
//! words: 1 means nobody else shares them, `|speakers|` means everyone
//! does.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Serialize;

use crate::corpus::{normalize, Corpus, Sentence, SpeakerId};
use crate::error::{Error, Result};
use crate::tagging::MentionPolicy;

/// Word → occurrence count.
pub type TokenCounts = BTreeMap<String, u64>;

/// Which sub-corpus a result ranks toward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Side {
    /// Opponent-mention sentences; ranked by most positive z.
    Y,
    /// Everything else; ranked by most negative z.
    N,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Y => "Y",
            Side::N => "N",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which tokens of a sentence participate in counting.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum TokenFilter {
    #[default]
    All,
    /// Keep only tokens whose part-of-speech tag is listed (tags align
    /// with the sentence's verbatim whitespace tokens). Sentences without
    /// tags make the run fail rather than silently under-count.
    PosTags(Vec<String>),
}

impl TokenFilter {
    /// Human-readable descriptor recorded alongside results.
    pub fn describe(&self) -> String {
        match self {
            TokenFilter::All => "all".to_string(),
            TokenFilter::PosTags(tags) => format!("pos:{}", tags.join("+")),
        }
    }

    /// The sentence's countable tokens, normalized.
    fn tokens(&self, sentence: &Sentence) -> Result<Vec<String>> {
        match self {
            TokenFilter::All => Ok(sentence.normalized_tokens().map(str::to_string).collect()),
            TokenFilter::PosTags(wanted) => {
                let tags = sentence
                    .pos_tags
                    .as_ref()
                    .ok_or_else(|| Error::MissingPosTags(sentence.id.clone()))?;
                let mut tokens = Vec::new();
                for (token, tag) in sentence.raw_text.split_whitespace().zip(tags) {
                    if wanted.iter().any(|w| w == tag) {
                        tokens.extend(normalize(token).split_whitespace().map(str::to_string));
                    }
                }
                Ok(tokens)
            }
        }
    }
}

/// Counts filtered tokens over a set of sentences.
pub fn count_tokens<'a>(
    sentences: impl IntoIterator<Item = &'a Sentence>,
    filter: &TokenFilter,
) -> Result<TokenCounts> {
    let mut counts = TokenCounts::new();
    for sentence in sentences {
        for token in filter.tokens(sentence)? {
            *counts.entry(token).or_insert(0) += 1;
        }
    }
    Ok(counts)
}

/// Filtered token counts pooled over the whole corpus — the default prior.
pub fn pooled_prior(corpus: &Corpus, filter: &TokenFilter) -> Result<TokenCounts> {
    count_tokens(corpus.sentences(), filter)
}

/// Informative-Dirichlet log-odds z-scores over the union vocabulary of
/// the two corpora. The prior is rescaled so its total mass is
/// `prior_scale` (= α_0); each word's share must be positive.
pub fn fw_zscores(
    a: &TokenCounts,
    b: &TokenCounts,
    prior: &TokenCounts,
    prior_scale: f64,
) -> Result<BTreeMap<String, f64>> {
    if !(prior_scale > 0.0) {
        return Err(Error::BadConfig(format!(
            "prior_scale must be positive, got {prior_scale}"
        )));
    }
    let prior_total: u64 = prior.values().sum();
    if prior_total == 0 {
        return Err(Error::BadConfig("prior has no mass at all".to_string()));
    }
    let n_a: u64 = a.values().sum();
    let n_b: u64 = b.values().sum();
    let alpha_0 = prior_scale;

    let vocabulary: BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    let mut zscores = BTreeMap::new();
    for word in vocabulary {
        let prior_w = prior.get(word).copied().unwrap_or(0);
        if prior_w == 0 {
            return Err(Error::ZeroPriorMass(word.clone()));
        }
        let alpha_w = alpha_0 * prior_w as f64 / prior_total as f64;
        let y_a = a.get(word).copied().unwrap_or(0) as f64;
        let y_b = b.get(word).copied().unwrap_or(0) as f64;
        let delta = ((y_a + alpha_w) / (n_a as f64 + alpha_0 - y_a - alpha_w)).ln()
            - ((y_b + alpha_w) / (n_b as f64 + alpha_0 - y_b - alpha_w)).ln();
        let variance = 1.0 / (y_a + alpha_w) + 1.0 / (y_b + alpha_w);
        let z = delta / variance.sqrt();
        if !z.is_finite() {
            return Err(Error::BadConfig(format!(
                "non-finite z-score for word `{word}` (counts {y_a}/{y_b}, α_w {alpha_w})"
            )));
        }
        zscores.insert(word.clone(), z);
    }
    Ok(zscores)
}

/// One speaker-side association result. Both sides of a speaker share the
/// same z map (mention-positive orientation); the side picks the ranking
/// direction.
#[derive(Debug, Clone, PartialEq)]
pub struct FwResult {
    pub speaker: SpeakerId,
    pub side: Side,
    /// Descriptor of the token filter the counts used.
    pub token_filter: String,
    pub zscores: BTreeMap<String, f64>,
}

/// A ranked word list, flagged when the vocabulary ran out before `n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopWords {
    pub words: Vec<String>,
    pub truncated: bool,
}

/// The `n` strongest words for the result's side: most positive z for Y,
/// most negative for N; ties break lexicographically.
pub fn top_n(result: &FwResult, n: usize) -> TopWords {
    assert!(n >= 1, "top_n needs n >= 1");
    let mut ranked: Vec<(&String, f64)> =
        result.zscores.iter().map(|(w, z)| (w, *z)).collect();
    match result.side {
        Side::Y => ranked.sort_by(|(wa, za), (wb, zb)| zb.total_cmp(za).then_with(|| wa.cmp(wb))),
        Side::N => ranked.sort_by(|(wa, za), (wb, zb)| za.total_cmp(zb).then_with(|| wa.cmp(wb))),
    }
    let truncated = ranked.len() < n;
    TopWords {
        words: ranked.into_iter().take(n).map(|(w, _)| w.clone()).collect(),
        truncated,
    }
}

// ---------- overlap graph ----------

/// Bipartite speaker–word graph: an edge joins a speaker to each word in
/// their top-n set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FwOverlapGraph {
    sets: BTreeMap<SpeakerId, BTreeSet<String>>,
    degrees: BTreeMap<String, usize>,
}

impl FwOverlapGraph {
    /// Builds the graph from per-speaker top-word lists (built at the same
    /// `n` and side).
    pub fn from_top_sets(top_sets: &BTreeMap<SpeakerId, Vec<String>>) -> FwOverlapGraph {
        let sets: BTreeMap<SpeakerId, BTreeSet<String>> = top_sets
            .iter()
            .map(|(s, words)| (s.clone(), words.iter().cloned().collect()))
            .collect();
        let mut degrees = BTreeMap::new();
        for words in sets.values() {
            for word in words {
                *degrees.entry(word.clone()).or_insert(0) += 1;
            }
        }
        FwOverlapGraph { sets, degrees }
    }

    /// Number of speakers whose top set contains `word`.
    pub fn degree(&self, word: &str) -> usize {
        self.degrees.get(word).copied().unwrap_or(0)
    }

    pub fn speakers(&self) -> impl Iterator<Item = &SpeakerId> {
        self.sets.keys()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.degrees.keys().map(String::as_str)
    }

    /// Mean degree of the speaker's own top words — the overlap metric.
    /// Always within `[1, |speakers|]`.
    pub fn overlap(&self, speaker: &SpeakerId) -> Result<f64> {
        let words = self
            .sets
            .get(speaker)
            .ok_or_else(|| Error::UnknownSpeaker(speaker.to_string()))?;
        if words.is_empty() {
            return Err(Error::EmptyTopSet(speaker.to_string()));
        }
        let total: usize = words.iter().map(|w| self.degree(w)).sum();
        Ok(total as f64 / words.len() as f64)
    }
}

/// Convenience wrapper: build the graph and score one speaker.
pub fn overlap_metric(
    top_sets: &BTreeMap<SpeakerId, Vec<String>>,
    speaker: &SpeakerId,
) -> Result<f64> {
    FwOverlapGraph::from_top_sets(top_sets).overlap(speaker)
}

// ---------- per-speaker pipeline ----------

/// Both sides of one speaker's mention/non-mention contrast.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerFw {
    pub y: FwResult,
    pub n: FwResult,
}

fn speaker_fw_with_prior(
    corpus: &Corpus,
    speaker: &SpeakerId,
    policy: &MentionPolicy,
    filter: &TokenFilter,
    prior: &TokenCounts,
    prior_scale: f64,
) -> Result<SpeakerFw> {
    let mut mention: Vec<&Sentence> = Vec::new();
    let mut rest: Vec<&Sentence> = Vec::new();
    for sentence in corpus.sentences_by(speaker) {
        if policy.counts(sentence) {
            mention.push(sentence);
        } else {
            rest.push(sentence);
        }
    }
    if mention.is_empty() && rest.is_empty() {
        return Err(Error::NoRecordsForSpeaker(speaker.to_string()));
    }
    let y_counts = count_tokens(mention, filter)?;
    let n_counts = count_tokens(rest, filter)?;
    for (counts, side) in [(&y_counts, Side::Y), (&n_counts, Side::N)] {
        if counts.values().sum::<u64>() == 0 {
            return Err(Error::EmptySide {
                speaker: speaker.to_string(),
                side: side.to_string(),
            });
        }
    }
    let zscores = fw_zscores(&y_counts, &n_counts, prior, prior_scale)?;
    let make = |side| FwResult {
        speaker: speaker.clone(),
        side,
        token_filter: filter.describe(),
        zscores: zscores.clone(),
    };
    Ok(SpeakerFw { y: make(Side::Y), n: make(Side::N) })
}

/// Contrasts one speaker's mention sentences against the rest of their
/// speech, with the pooled-corpus prior.
pub fn speaker_fw(
    corpus: &Corpus,
    speaker: &SpeakerId,
    policy: &MentionPolicy,
    filter: &TokenFilter,
    prior_scale: f64,
) -> Result<SpeakerFw> {
    let prior = pooled_prior(corpus, filter)?;
    speaker_fw_with_prior(corpus, speaker, policy, filter, &prior, prior_scale)
}

/// Runs the contrast for every pool speaker, fanning speaker jobs over
/// `jobs` workers; results come back in pool (speaker-id) order.
pub fn corpus_fw(
    corpus: &Corpus,
    policy: &MentionPolicy,
    filter: &TokenFilter,
    prior_scale: f64,
    jobs: usize,
) -> Result<Vec<SpeakerFw>> {
    let prior = pooled_prior(corpus, filter)?;
    let speakers: Vec<&SpeakerId> = corpus.pool_speakers().map(|s| &s.id).collect();
    let cursor = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, Result<SpeakerFw>)>> =
        Mutex::new(Vec::with_capacity(speakers.len()));
    let jobs = jobs.max(1).min(speakers.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = cursor.fetch_add(1, Ordering::Relaxed);
                let Some(speaker) = speakers.get(i) else { break };
                let fw = speaker_fw_with_prior(
                    corpus,
                    speaker,
                    policy,
                    filter,
                    &prior,
                    prior_scale,
                );
                results.lock().expect("no panics hold this lock").push((i, fw));
            });
        }
    });
    let mut indexed = results.into_inner().expect("workers joined");
    indexed.sort_by_key(|(i, _)| *i);
    indexed.into_iter().map(|(_, r)| r).collect()
}

/// One row of the overlap report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapScore {
    pub speaker: SpeakerId,
    pub side: Side,
    pub n: usize,
    pub score: f64,
}

/// Overlap metric for every speaker at one side and cutoff.
pub fn overlap_scores(
    speaker_fws: &[SpeakerFw],
    side: Side,
    n: usize,
) -> Result<Vec<OverlapScore>> {
    let top_sets: BTreeMap<SpeakerId, Vec<String>> = speaker_fws
        .iter()
        .map(|fw| {
            let result = match side {
                Side::Y => &fw.y,
                Side::N => &fw.n,
            };
            (result.speaker.clone(), top_n(result, n).words)
        })
        .collect();
    let graph = FwOverlapGraph::from_top_sets(&top_sets);
    top_sets
        .keys()
        .map(|speaker| {
            Ok(OverlapScore {
                speaker: speaker.clone(),
                side,
                n,
                score: graph.overlap(speaker)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ingest_reader, Genre, IngestOptions};
    use approx::assert_abs_diff_eq;

    fn counts(pairs: &[(&str, u64)]) -> TokenCounts {
        pairs.iter().map(|(w, c)| (w.to_string(), *c)).collect()
    }

    #[test]
    fn identical_corpora_score_zero_everywhere() {
        let a = counts(&[("x", 4), ("y", 7)]);
        let prior = counts(&[("x", 1), ("y", 1)]);
        let z = fw_zscores(&a, &a, &prior, 10.0).unwrap();
        for (word, z) in z {
            assert!(z.abs() < 1e-12, "word {word}: z = {z}");
        }
    }

    #[test]
    fn swapping_corpora_negates_every_zscore() {
        let a = counts(&[("x", 9), ("y", 1), ("q", 3)]);
        let b = counts(&[("x", 1), ("y", 9)]);
        let prior = counts(&[("x", 5), ("y", 3), ("q", 2)]);
        let forward = fw_zscores(&a, &b, &prior, 500.0).unwrap();
        let backward = fw_zscores(&b, &a, &prior, 500.0).unwrap();
        assert_eq!(forward.len(), backward.len());
        for (word, z) in &forward {
            assert!((z + backward[word]).abs() < 1e-12, "word {word}");
        }
    }

    #[test]
    fn two_word_toy_matches_the_direct_formula() {
        // a = {x:9, y:1}, b = {x:1, y:9}, uniform α_w = 1 (prior_scale 2).
        let a = counts(&[("x", 9), ("y", 1)]);
        let b = counts(&[("x", 1), ("y", 9)]);
        let prior = counts(&[("x", 1), ("y", 1)]);
        let z = fw_zscores(&a, &b, &prior, 2.0).unwrap();
        // By hand: δ_x = ln[(9+1)/(10+2−9−1)] − ln[(1+1)/(10+2−1−1)]
        //              = ln 5 − ln(1/5) = 2·ln 5, var = 1/10 + 1/2.
        let delta_x = 2.0 * 5.0f64.ln();
        let var: f64 = 1.0 / 10.0 + 1.0 / 2.0;
        assert_abs_diff_eq!(z["x"], delta_x / var.sqrt(), epsilon = 1e-12);
        assert!(z["x"] > 0.0);
        assert_abs_diff_eq!(z["y"], -z["x"], epsilon = 1e-12);
    }

    #[test]
    fn scaling_both_corpora_preserves_delta_signs() {
        let a = counts(&[("x", 9), ("y", 1), ("z", 5)]);
        let b = counts(&[("x", 1), ("y", 9), ("z", 5)]);
        let prior = counts(&[("x", 1), ("y", 1), ("z", 1)]);
        let scaled = |m: u64, c: &TokenCounts| -> TokenCounts {
            c.iter().map(|(w, n)| (w.clone(), n * m)).collect()
        };
        let base = fw_zscores(&a, &b, &prior, 30.0).unwrap();
        let bigger = fw_zscores(&scaled(7, &a), &scaled(7, &b), &prior, 30.0).unwrap();
        for (word, z) in &base {
            if *z != 0.0 {
                assert_eq!(z.signum(), bigger[word].signum(), "word {word}");
            }
        }
    }

    #[test]
    fn missing_prior_mass_is_an_error() {
        let a = counts(&[("x", 2), ("novel", 1)]);
        let b = counts(&[("x", 3)]);
        let prior = counts(&[("x", 1)]);
        let err = fw_zscores(&a, &b, &prior, 10.0).unwrap_err();
        assert!(matches!(err, Error::ZeroPriorMass(w) if w == "novel"));
        assert!(matches!(
            fw_zscores(&a, &b, &prior, 0.0).unwrap_err(),
            Error::BadConfig(_)
        ));
    }

    fn result_with(side: Side, zs: &[(&str, f64)]) -> FwResult {
        FwResult {
            speaker: SpeakerId::new("s"),
            side,
            token_filter: "all".to_string(),
            zscores: zs.iter().map(|(w, z)| (w.to_string(), *z)).collect(),
        }
    }

    #[test]
    fn top_n_ranks_by_side_with_lexicographic_ties() {
        let y = result_with(Side::Y, &[("a", 2.0), ("b", 1.0), ("c", -1.0)]);
        assert_eq!(top_n(&y, 2).words, vec!["a", "b"]);
        assert!(!top_n(&y, 2).truncated);

        let n = result_with(Side::N, &[("a", 2.0), ("b", 1.0), ("c", -1.0)]);
        assert_eq!(top_n(&n, 2).words, vec!["c", "b"]);

        let tied = result_with(Side::Y, &[("beta", 1.0), ("alpha", 1.0)]);
        assert_eq!(top_n(&tied, 2).words, vec!["alpha", "beta"]);

        let short = top_n(&y, 5);
        assert_eq!(short.words.len(), 3);
        assert!(short.truncated);
    }

    fn top_sets(entries: &[(&str, &[&str])]) -> BTreeMap<SpeakerId, Vec<String>> {
        entries
            .iter()
            .map(|(s, words)| {
                (SpeakerId::new(*s), words.iter().map(|w| w.to_string()).collect())
            })
            .collect()
    }

    #[test]
    fn overlap_on_the_three_speaker_fixture() {
        // A={p,q}, B={p,r}, C={p,s}: deg(p)=3, the rest 1.
        let sets = top_sets(&[("A", &["p", "q"]), ("B", &["p", "r"]), ("C", &["p", "s"])]);
        for speaker in ["A", "B", "C"] {
            assert_abs_diff_eq!(
                overlap_metric(&sets, &SpeakerId::new(speaker)).unwrap(),
                2.0,
                epsilon = 0.0
            );
        }
        let graph = FwOverlapGraph::from_top_sets(&sets);
        assert_eq!(graph.degree("p"), 3);
        assert_eq!(graph.degree("q"), 1);
        assert_eq!(graph.degree("absent"), 0);
        assert_eq!(graph.words().count(), 4);
    }

    #[test]
    fn overlap_extremes_hit_the_bounds() {
        let shared = top_sets(&[("A", &["p", "q"]), ("B", &["p", "q"]), ("C", &["p", "q"])]);
        let disjoint = top_sets(&[("A", &["a1", "a2"]), ("B", &["b1", "b2"]), ("C", &["c1"])]);
        for speaker in ["A", "B", "C"] {
            let id = SpeakerId::new(speaker);
            assert_abs_diff_eq!(overlap_metric(&shared, &id).unwrap(), 3.0, epsilon = 0.0);
            assert_abs_diff_eq!(overlap_metric(&disjoint, &id).unwrap(), 1.0, epsilon = 0.0);
        }
    }

    #[test]
    fn overlap_errors_name_the_speaker()
    {
        let sets = top_sets(&[("A", &["p"]), ("B", &[])]);
        assert!(matches!(
            overlap_metric(&sets, &SpeakerId::new("B")).unwrap_err(),
            Error::EmptyTopSet(s) if s == "B"
        ));
        assert!(matches!(
            overlap_metric(&sets, &SpeakerId::new("missing")).unwrap_err(),
            Error::UnknownSpeaker(_)
        ));
    }

    // ---------- corpus-level fixtures ----------

    fn mention_corpus() -> Corpus {
        let jsonl = [
            r#"{"doc_id":"d1","genre":"debate","date":"2020-09-29","title":"t","speaker":"Alice Smith","party":"D","seq":0,"text":"You peddle dishonest nonsense.","mention":"definite"}"#,
            r#"{"doc_id":"d1","genre":"debate","date":"2020-09-29","title":"t","speaker":"Alice Smith","party":"D","seq":1,"text":"You keep spreading dishonest claims.","mention":"definite"}"#,
            r#"{"doc_id":"d1","genre":"debate","date":"2020-09-29","title":"t","speaker":"Alice Smith","party":"D","seq":2,"text":"Our plan funds hopeful schools."}"#,
            r#"{"doc_id":"d1","genre":"debate","date":"2020-09-29","title":"t","speaker":"Alice Smith","party":"D","seq":3,"text":"Hopeful families deserve better schools."}"#,
            r#"{"doc_id":"d1","genre":"debate","date":"2020-09-29","title":"t","speaker":"Bob Jones","party":"R","seq":4,"text":"That attack is dishonest.","mention":"definite"}"#,
            r#"{"doc_id":"d1","genre":"debate","date":"2020-09-29","title":"t","speaker":"Bob Jones","party":"R","seq":5,"text":"We will win this fight."}"#,
        ]
        .join("\n");
        ingest_reader(
            std::io::Cursor::new(jsonl.into_bytes()),
            "<test>",
            Genre::Debate,
            &IngestOptions::default(),
        )
        .unwrap()
        .0
    }

    #[test]
    fn speaker_fw_separates_mention_vocabulary() {
        let corpus = mention_corpus();
        let fw = speaker_fw(
            &corpus,
            &SpeakerId::new("alice_smith"),
            &MentionPolicy::default(),
            &TokenFilter::All,
            500.0,
        )
        .unwrap();
        assert_eq!(fw.y.side, Side::Y);
        assert_eq!(fw.n.side, Side::N);
        assert_eq!(fw.y.zscores, fw.n.zscores);
        assert!(fw.y.zscores["dishonest"] > 0.0, "mention-side word");
        assert!(fw.y.zscores["hopeful"] < 0.0, "stump-side word");
        // The twice-used mention words outrank the singletons.
        assert_eq!(top_n(&fw.y, 2).words, vec!["you", "dishonest"]);
    }

    #[test]
    fn corpus_fw_covers_the_pool_in_order() {
        let mut corpus = mention_corpus();
        corpus
            .set_pool(&[SpeakerId::new("alice_smith"), SpeakerId::new("bob_jones")])
            .unwrap();
        let all = corpus_fw(
            &corpus,
            &MentionPolicy::default(),
            &TokenFilter::All,
            500.0,
            4,
        )
        .unwrap();
        assert_eq!(all.len(), 2);
        assert_eq!(all[0].y.speaker, SpeakerId::new("alice_smith"));
        assert_eq!(all[1].y.speaker, SpeakerId::new("bob_jones"));

        let scores = overlap_scores(&all, Side::Y, 4).unwrap();
        assert_eq!(scores.len(), 2);
        for score in &scores {
            assert!(score.score >= 1.0 && score.score <= 2.0);
            assert_eq!(score.n, 4);
        }
        // "dishonest" sits in both speakers' top-4 mention words, so both
        // overlap scores see one shared word among four.
        for score in &scores {
            assert_abs_diff_eq!(score.score, 1.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn speaker_without_mentions_fails_loudly() {
        let jsonl = concat!(
            r#"{"doc_id":"d1","genre":"debate","date":"2020-09-29","title":"t","speaker":"Alice Smith","party":"D","seq":0,"text":"Just policy talk."}"#,
            "\n",
            r#"{"doc_id":"d1","genre":"debate","date":"2020-09-29","title":"t","speaker":"Bob Jones","party":"R","seq":1,"text":"You are wrong.","mention":"definite"}"#,
        );
        let corpus = ingest_reader(
            std::io::Cursor::new(jsonl.as_bytes().to_vec()),
            "<test>",
            Genre::Debate,
            &IngestOptions::default(),
        )
        .unwrap()
        .0;
        let err = speaker_fw(
            &corpus,
            &SpeakerId::new("alice_smith"),
            &MentionPolicy::default(),
            &TokenFilter::All,
            500.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::EmptySide { side, .. } if side == "Y"));
    }

    #[test]
    fn pos_filter_keeps_only_tagged_tokens_and_demands_tags() {
        let jsonl = r#"{"doc_id":"d1","genre":"debate","date":"2020-09-29","title":"t","speaker":"Alice Smith","party":"D","seq":0,"text":"Totally corrupt deal.","pos":["ADV","ADJ","NOUN"]}"#;
        let corpus = ingest_reader(
            std::io::Cursor::new(jsonl.as_bytes().to_vec()),
            "<test>",
            Genre::Debate,
            &IngestOptions::default(),
        )
        .unwrap()
        .0;
        let filter = TokenFilter::PosTags(vec!["ADJ".to_string()]);
        let counted = count_tokens(corpus.sentences(), &filter).unwrap();
        assert_eq!(counted, counts(&[("corrupt", 1)]));
        assert_eq!(filter.describe(), "pos:ADJ");

        let untagged = mention_corpus();
        let err = count_tokens(untagged.sentences(), &filter).unwrap_err();
        assert!(matches!(err, Error::MissingPosTags(_)));
    }
}

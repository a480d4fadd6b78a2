//! Opponent-mention tagging and inter-rater agreement.
//!
//! A [`MentionRuleSet`] lists, per pool speaker, the patterns that identify
//! their electoral opponent (names, nicknames, opposing-party keywords).
//! [`tag_mentions`] marks each sentence `definite`, `possible`, or `none`;
//! `possible` hits (second-person pronouns and other ambiguous triggers) are
//! only ever resolved by human review — they are exported to a review sheet
//! and never auto-promoted. A [`ReviewFile`] stores rater votes and feeds
//! [`cohen_kappa`] and the confirmed-mention policy of [`mention_rate`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{normalize, Corpus, Genre, MentionLabel, Party, Sentence, SpeakerId};
use crate::error::{Error, Result};

// ---------- rule sets ----------

/// Mention-detection rules for one corpus genre.
///
/// `opponent_patterns` is keyed by speaker id; each entry holds the phrases
/// that count as a *definite* opponent mention for that speaker. Patterns
/// are matched whole-word and case-insensitively against normalized text,
/// so `"Clinton's"` and `"CLINTON"` both hit the pattern `"clinton"`.
///
/// `party_keywords` adds party-level patterns shared by every speaker: a
/// keyword containing `democrat` counts for speakers whose opponent is a
/// Democrat, one containing `republican` (or equal to `gop`) for speakers
/// whose opponent is a Republican. Keywords that name neither party are
/// ignored — put those in `opponent_patterns` instead.
///
/// `ambiguity_triggers` (second-person pronouns in debates, unresolved
/// surnames) downgrade to *possible*: they flag a sentence for manual
/// review without asserting a mention.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MentionRuleSet {
    pub genre: Genre,
    #[serde(default)]
    pub party_keywords: Vec<String>,
    #[serde(default)]
    pub ambiguity_triggers: Vec<String>,
    pub opponent_patterns: BTreeMap<SpeakerId, Vec<String>>,
}

impl MentionRuleSet {
    /// Loads rules from a JSON file.
    pub fn load(path: impl AsRef<Path>) -> Result<MentionRuleSet> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(Error::read(path))?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }

    /// The conventional ambiguity triggers for a genre: second-person
    /// pronouns in debates (the opponent is on stage), nothing elsewhere.
    pub fn default_triggers(genre: Genre) -> Vec<String> {
        match genre {
            Genre::Debate => ["you", "your", "yours", "yourself"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            Genre::Sotu | Genre::Campaign => Vec::new(),
        }
    }
}

/// A normalized multi-word pattern, stored as its token sequence.
type Phrase = Vec<String>;

fn compile_phrase(pattern: &str) -> Option<Phrase> {
    let normalized = normalize(pattern);
    if normalized.is_empty() {
        return None;
    }
    Some(normalized.split_whitespace().map(str::to_string).collect())
}

/// Whole-word phrase containment over normalized tokens.
fn contains_phrase(tokens: &[&str], phrase: &Phrase) -> bool {
    if phrase.is_empty() || phrase.len() > tokens.len() {
        return false;
    }
    tokens
        .windows(phrase.len())
        .any(|w| w.iter().zip(phrase).all(|(t, p)| *t == p))
}

fn keyword_party(keyword_normalized: &str) -> Option<Party> {
    if keyword_normalized.contains("democrat") {
        Some(Party::Democrat)
    } else if keyword_normalized.contains("republican") || keyword_normalized == "gop" {
        Some(Party::Republican)
    } else {
        None
    }
}

/// Patterns compiled for one speaker.
struct CompiledRules {
    definite: Vec<Phrase>,
    triggers: Vec<Phrase>,
}

fn compile_rules(corpus: &Corpus, rules: &MentionRuleSet) -> Result<BTreeMap<SpeakerId, CompiledRules>> {
    let triggers: Vec<Phrase> = rules
        .ambiguity_triggers
        .iter()
        .filter_map(|t| compile_phrase(t))
        .collect();

    let mut compiled = BTreeMap::new();
    for sp in corpus.pool_speakers() {
        let patterns = rules
            .opponent_patterns
            .get(&sp.id)
            .ok_or_else(|| Error::SpeakerNotInRules(sp.id.to_string()))?;
        let mut definite: Vec<Phrase> = patterns.iter().filter_map(|p| compile_phrase(p)).collect();
        if definite.is_empty() {
            return Err(Error::EmptyPatternList(sp.id.to_string()));
        }
        let opposing = match sp.party {
            Party::Republican => Some(Party::Democrat),
            Party::Democrat => Some(Party::Republican),
            Party::Other => None,
        };
        if let Some(opposing) = opposing {
            for kw in &rules.party_keywords {
                if let Some(phrase) = compile_phrase(kw) {
                    if keyword_party(&phrase.join(" ")) == Some(opposing) {
                        definite.push(phrase);
                    }
                }
            }
        }
        compiled.insert(sp.id.clone(), CompiledRules { definite, triggers: triggers.clone() });
    }
    Ok(compiled)
}

/// Labels every pool speaker's sentences and returns the tagged corpus.
///
/// A sentence is `definite` when any opponent pattern for its speaker
/// matches, `possible` when only an ambiguity trigger matches, `none`
/// otherwise. Sentences by non-pool speakers (moderators, guests) are always
/// `none`. Pool speakers missing from the rules — or present with an empty
/// pattern list — are an error.
pub fn tag_mentions(corpus: &Corpus, rules: &MentionRuleSet) -> Result<Corpus> {
    if rules.genre != corpus.genre() {
        return Err(Error::BadConfig(format!(
            "rule set is for genre `{}` but the corpus is `{}`",
            rules.genre,
            corpus.genre()
        )));
    }
    let compiled = compile_rules(corpus, rules)?;

    let mut labels: HashMap<String, MentionLabel> = HashMap::new();
    for s in corpus.sentences() {
        let label = match compiled.get(&s.speaker) {
            None => MentionLabel::None,
            Some(rules) => {
                let tokens: Vec<&str> = s.normalized_tokens().collect();
                if rules.definite.iter().any(|p| contains_phrase(&tokens, p)) {
                    MentionLabel::Definite
                } else if rules.triggers.iter().any(|p| contains_phrase(&tokens, p)) {
                    MentionLabel::Possible
                } else {
                    MentionLabel::None
                }
            }
        };
        labels.insert(s.id.clone(), label);
    }
    Ok(corpus.with_mention_labels(&labels))
}

// ---------- mention rates ----------

/// How possible/confirmed mentions enter the rate numerator. The default
/// counts definite labels plus manually confirmed sentence ids only.
#[derive(Debug, Clone, Default)]
pub struct MentionPolicy {
    /// Count unreviewed `possible` labels as mentions.
    pub count_possible: bool,
    /// Sentence ids promoted by manual review.
    pub confirmed: BTreeSet<String>,
}

impl MentionPolicy {
    /// Whether a sentence counts as an opponent mention under this policy.
    pub fn counts(&self, sentence: &Sentence) -> bool {
        match sentence.mention_label {
            MentionLabel::Definite => true,
            MentionLabel::Possible => self.count_possible || self.confirmed.contains(&sentence.id),
            MentionLabel::None => self.confirmed.contains(&sentence.id),
        }
    }
}

/// Grouping key for [`mention_rate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateGroupBy {
    Speaker,
    Genre,
}

/// One mention-rate row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MentionRate {
    pub group: String,
    pub mentions: usize,
    pub total: usize,
    pub rate: f64,
}

/// Fraction of sentences that mention an opponent, per group. Groups with
/// no sentences are absent from the output.
pub fn mention_rate(corpus: &Corpus, group_by: RateGroupBy, policy: &MentionPolicy) -> Vec<MentionRate> {
    let mut counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for s in corpus.sentences() {
        let group = match group_by {
            RateGroupBy::Speaker => s.speaker.to_string(),
            RateGroupBy::Genre => corpus.genre().to_string(),
        };
        let e = counts.entry(group).or_default();
        e.0 += policy.counts(s) as usize;
        e.1 += 1;
    }
    counts
        .into_iter()
        .map(|(group, (mentions, total))| MentionRate {
            group,
            mentions,
            total,
            rate: mentions as f64 / total as f64,
        })
        .collect()
}

/// Sentences awaiting manual review: id and verbatim text of every
/// `possible`-labeled sentence, in corpus order.
pub fn review_queue(corpus: &Corpus) -> Vec<(String, String)> {
    corpus
        .sentences()
        .iter()
        .filter(|s| s.mention_label == MentionLabel::Possible)
        .map(|s| (s.id.clone(), s.raw_text.clone()))
        .collect()
}

// ---------- review files ----------

/// Rater votes over sentences, loaded from a `sentence_id,rater_id,label`
/// CSV where `label` is `yes` or `no`.
#[derive(Debug, Clone)]
pub struct ReviewFile {
    /// (sentence_id, rater_id) → voted yes.
    votes: BTreeMap<(String, String), bool>,
    raters: BTreeSet<String>,
}

impl ReviewFile {
    pub fn load(path: impl AsRef<Path>) -> Result<ReviewFile> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(Error::read(path))?;
        Self::from_reader(file, &path.display().to_string())
    }

    pub fn from_reader(reader: impl Read, path_label: &str) -> Result<ReviewFile> {
        let mut csv_reader = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let mut votes = BTreeMap::new();
        let mut raters = BTreeSet::new();
        for row in csv_reader.records() {
            let row = row?;
            let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
            let malformed = |reason: String| Error::MalformedRecord {
                path: path_label.to_string(),
                line,
                reason,
            };
            if row.len() != 3 {
                return Err(malformed(format!("expected 3 columns, got {}", row.len())));
            }
            let sentence_id = row[0].trim().to_string();
            let rater_id = row[1].trim().to_string();
            let label = match row[2].trim() {
                "yes" => true,
                "no" => false,
                other => return Err(malformed(format!("label must be yes/no, got `{other}`"))),
            };
            if sentence_id.is_empty() || rater_id.is_empty() {
                return Err(malformed("empty sentence_id or rater_id".to_string()));
            }
            if votes.insert((sentence_id.clone(), rater_id.clone()), label).is_some() {
                return Err(Error::DuplicateVote {
                    path: path_label.to_string(),
                    sentence_id,
                    rater_id,
                });
            }
            raters.insert(rater_id);
        }
        Ok(ReviewFile { votes, raters })
    }

    pub fn raters(&self) -> impl Iterator<Item = &str> {
        self.raters.iter().map(String::as_str)
    }

    /// Sentence → vote for one rater, in sentence-id order.
    pub fn votes_by(&self, rater: &str) -> BTreeMap<&str, bool> {
        self.votes
            .iter()
            .filter(|((_, r), _)| r == rater)
            .map(|((s, _), &v)| (s.as_str(), v))
            .collect()
    }

    /// Sentence ids where a strict majority of the raters who voted said
    /// yes — the set a [`MentionPolicy`] treats as confirmed.
    pub fn confirmed(&self) -> BTreeSet<String> {
        let mut tally: BTreeMap<&str, (usize, usize)> = BTreeMap::new(); // (yes, total)
        for ((sentence, _), &vote) in &self.votes {
            let e = tally.entry(sentence).or_default();
            e.0 += vote as usize;
            e.1 += 1;
        }
        tally
            .into_iter()
            .filter(|(_, (yes, total))| 2 * yes > *total)
            .map(|(s, _)| s.to_string())
            .collect()
    }
}

/// Cohen's kappa between two raters over their shared sentences.
///
/// `κ = (p_o − p_e) / (1 − p_e)` with `p_e` from the raters' yes/no
/// marginals. Two identical labelings score 1.0 even when both raters are
/// constant (where `p_e = 1` and the quotient is formally undefined).
pub fn cohen_kappa(review: &ReviewFile, rater_a: &str, rater_b: &str) -> Result<f64> {
    for r in [rater_a, rater_b] {
        if !review.raters.contains(r) {
            return Err(Error::UnknownRater(r.to_string()));
        }
    }
    let a = review.votes_by(rater_a);
    let b = review.votes_by(rater_b);
    let shared: Vec<(&bool, &bool)> = a
        .iter()
        .filter_map(|(s, va)| b.get(s).map(|vb| (va, vb)))
        .collect();
    if shared.is_empty() {
        return Err(Error::NoSharedItems(rater_a.to_string(), rater_b.to_string()));
    }

    let n = shared.len() as f64;
    let agree = shared.iter().filter(|(x, y)| x == y).count() as f64;
    let yes_a = shared.iter().filter(|(x, _)| **x).count() as f64;
    let yes_b = shared.iter().filter(|(_, y)| **y).count() as f64;
    let p_o = agree / n;
    let p_e = (yes_a / n) * (yes_b / n) + (1.0 - yes_a / n) * (1.0 - yes_b / n);
    if (1.0 - p_e).abs() < 1e-12 {
        // Both raters constant in the same class ⇒ perfect agreement.
        return Ok(1.0);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

//! Readability indices, rank correlations, and cross-metric tables.
//!
//! Readability is computed per sentence (every formula's `sentences` term is
//! fixed at 1) so the scores line up one-to-one with per-sentence uniqueness
//! records. Syllables come from a documented heuristic: count vowel groups
//! (`aeiouy`), drop a silent final `e`, floor at one, and consult a bundled
//! exception list for words the rules miscount. [`spearman`] provides the
//! rank correlation used throughout, and [`relate_metrics`] assembles the
//! uniqueness × divisiveness × opponent-mention comparison tables.

use std::collections::{HashMap, HashSet};
use std::sync::LazyLock;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::corpus::{Corpus, Sentence};
use crate::error::{Error, Result};
use crate::lexicon::Lexicon;
use crate::stats::{confidence_interval, Ci, CiMethod};
use crate::tagging::MentionPolicy;

// ---------- syllables ----------

static SYLLABLE_EXCEPTIONS: LazyLock<HashMap<&'static str, usize>> = LazyLock::new(|| {
    include_str!("../data/syllable_exceptions.tsv")
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| {
            let (word, count) = l.split_once('\t').expect("word<TAB>count");
            (word, count.trim().parse().expect("syllable count"))
        })
        .collect()
});

static EASY_WORDS: LazyLock<HashSet<&'static str>> = LazyLock::new(|| {
    include_str!("../data/easy_words.txt")
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
});

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

/// Estimates the syllable count of one word.
///
/// The heuristic: lowercase the alphabetic characters, look the result up in
/// the bundled exception table, otherwise count maximal vowel groups
/// (`aeiouy`), subtract one for a silent final `e` (an `e` ending the word
/// that is not part of a consonant + `le` cluster, as in `table`), and never
/// return less than one. Tokens with no letters (numerals, symbols) count
/// as one syllable.
pub fn syllables(word: &str) -> usize {
    let letters: String = word
        .chars()
        .filter(|c| c.is_alphabetic())
        .flat_map(char::to_lowercase)
        .collect();
    if letters.is_empty() {
        return 1;
    }
    if let Some(&count) = SYLLABLE_EXCEPTIONS.get(letters.as_str()) {
        return count;
    }
    let chars: Vec<char> = letters.chars().collect();
    let mut groups = 0;
    let mut in_group = false;
    for &c in &chars {
        if is_vowel(c) {
            if !in_group {
                groups += 1;
            }
            in_group = true;
        } else {
            in_group = false;
        }
    }
    let n = chars.len();
    let silent_e = n >= 2
        && chars[n - 1] == 'e'
        && !is_vowel(chars[n - 2])
        && !(n >= 3 && chars[n - 1] == 'e' && chars[n - 2] == 'l' && !is_vowel(chars[n - 3]));
    if silent_e && groups > 1 {
        groups -= 1;
    }
    groups.max(1)
}

// ---------- readability ----------

/// The four per-sentence readability indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReadabilityScores {
    /// Flesch-Kincaid grade level.
    pub fkgl: f64,
    /// Gunning fog index.
    pub fog: f64,
    /// Dale-Chall score against the bundled easy-word list.
    pub dale_chall: f64,
    /// Automated readability index.
    pub ari: f64,
}

struct SentenceCounts {
    words: usize,
    syllables: usize,
    /// Words of three or more syllables (the fog "complex word" class).
    complex_words: usize,
    /// Words absent from the easy-word list and its regular inflections.
    difficult_words: usize,
    /// Letters and digits only.
    chars: usize,
}

fn count_text(text: &str) -> SentenceCounts {
    let mut counts = SentenceCounts {
        words: 0,
        syllables: 0,
        complex_words: 0,
        difficult_words: 0,
        chars: text.chars().filter(|c| c.is_alphanumeric()).count(),
    };
    for token in text.split_whitespace() {
        if !token.chars().any(char::is_alphanumeric) {
            continue;
        }
        counts.words += 1;
        let syl = syllables(token);
        counts.syllables += syl;
        if syl >= 3 {
            counts.complex_words += 1;
        }
        if !is_easy_word(token) {
            counts.difficult_words += 1;
        }
    }
    counts
}

/// Whether a token is on the easy-word list, directly or as a regular
/// inflection (`-s`, `-es`, `-ed`, `-ing`, `-er`, `-est`, allowing the usual
/// dropped final `e` and doubled final consonant).
fn is_easy_word(token: &str) -> bool {
    let word: String = token
        .chars()
        .filter(|c| c.is_alphabetic())
        .flat_map(char::to_lowercase)
        .collect();
    if word.is_empty() || EASY_WORDS.contains(word.as_str()) {
        return true;
    }
    for suffix in ["s", "es", "ed", "ing", "er", "est"] {
        let Some(stem) = word.strip_suffix(suffix) else {
            continue;
        };
        if stem.is_empty() {
            continue;
        }
        if EASY_WORDS.contains(stem) || EASY_WORDS.contains(format!("{stem}e").as_str()) {
            return true;
        }
        // "running" → "runn" → "run".
        let chars: Vec<char> = stem.chars().collect();
        if chars.len() >= 2 && chars[chars.len() - 1] == chars[chars.len() - 2] {
            let collapsed: String = chars[..chars.len() - 1].iter().collect();
            if EASY_WORDS.contains(collapsed.as_str()) {
                return true;
            }
        }
    }
    false
}

/// Scores arbitrary text with every formula's `sentences` term fixed at 1.
/// Text without any word token scores NaN across the board.
pub fn readability_of_text(text: &str) -> ReadabilityScores {
    let c = count_text(text);
    if c.words == 0 {
        return ReadabilityScores {
            fkgl: f64::NAN,
            fog: f64::NAN,
            dale_chall: f64::NAN,
            ari: f64::NAN,
        };
    }
    let words = c.words as f64;
    let fkgl = 0.39 * words + 11.8 * (c.syllables as f64 / words) - 15.59;
    let fog = 0.4 * (words + 100.0 * c.complex_words as f64 / words);
    let difficult_pct = 100.0 * c.difficult_words as f64 / words;
    let mut dale_chall = 0.1579 * difficult_pct + 0.0496 * words;
    if difficult_pct > 5.0 {
        dale_chall += 3.6365;
    }
    let ari = 4.71 * (c.chars as f64 / words) + 0.5 * words - 21.43;
    ReadabilityScores { fkgl, fog, dale_chall, ari }
}

/// Readability of a sentence's verbatim text.
pub fn readability(sentence: &Sentence) -> ReadabilityScores {
    readability_of_text(&sentence.raw_text)
}

// ---------- rank correlation ----------

fn has_ties(ranks: &[f64]) -> bool {
    // Tied values share one average rank, so ties show up as duplicates.
    let mut sorted: Vec<f64> = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.windows(2).any(|w| w[0] == w[1])
}

/// Average ranks (1-based); tied values share the mean of their positions.
fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let shared = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = shared;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with a two-sided p-value.
///
/// Ranks use the average-rank convention for ties and the correlation is the
/// Pearson coefficient of the rank vectors. The p-value comes from the usual
/// t-approximation, `t = ρ·√((n−2)/(1−ρ²))` against Student's t with `n − 2`
/// degrees of freedom; `|ρ| = 1` yields `p = 0`.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(Error::NotEnoughData { needed: 3, got: x.len() });
    }
    for v in [x, y] {
        if v.iter().all(|&a| a == v[0]) {
            return Err(Error::ConstantInput);
        }
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let rho = if has_ties(&rx) || has_ties(&ry) {
        // Pearson coefficient of the average-rank vectors.
        let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (a, b) in rx.iter().zip(&ry) {
            sxy += (a - mx) * (b - my);
            sxx += (a - mx) * (a - mx);
            syy += (b - my) * (b - my);
        }
        (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
    } else {
        // No ties: the rank-difference form is equivalent and exact, so
        // perfectly concordant input yields exactly ±1.
        let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b) * (a - b)).sum();
        1.0 - 6.0 * d2 / (n * (n * n - 1.0))
    };
    let dof = n - 2.0;
    let p = if 1.0 - rho * rho <= 0.0 {
        0.0
    } else {
        let t = rho * (dof / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, dof).expect("n ≥ 3 gives positive dof");
        2.0 * dist.sf(t.abs())
    };
    Ok((rho, p))
}

// ---------- cross-metric tables ----------

/// Mean uniqueness of one stratum (e.g. divisive sentences).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupMean {
    /// The split: `divisive` or `mention`.
    pub dimension: String,
    /// The stratum within the split.
    pub group: String,
    pub ci: Ci,
}

/// One pairwise correlation; `rho`/`p` are absent when the correlation is
/// undefined (a constant column or fewer than three sentences).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricCorrelation {
    pub metric_a: String,
    pub metric_b: String,
    pub n: usize,
    pub rho: Option<f64>,
    pub p: Option<f64>,
}

/// The uniqueness × divisiveness × opponent-mention comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossTables {
    /// Stratified uniqueness means; empty strata are absent.
    pub group_means: Vec<GroupMean>,
    /// Pairwise Spearman correlations over the per-sentence metric columns,
    /// in a fixed declaration order.
    pub correlations: Vec<MetricCorrelation>,
}

const METRIC_NAMES: [&str; 7] =
    ["sent_uniq", "divisive_count", "mention", "fkgl", "fog", "dale_chall", "ari"];

/// Builds the cross-metric tables over the sentences that have a uniqueness
/// value in `sent_uniq` (keyed by sentence id).
pub fn relate_metrics(
    corpus: &Corpus,
    lexicon: &Lexicon,
    sent_uniq: &HashMap<String, f64>,
    policy: &MentionPolicy,
    method: CiMethod,
) -> CrossTables {
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); METRIC_NAMES.len()];
    let mut strata: HashMap<(&str, &str), Vec<f64>> = HashMap::new();
    for s in corpus.sentences() {
        let Some(&uniq) = sent_uniq.get(&s.id) else {
            continue;
        };
        let divisive = lexicon.count_matches(s);
        let mention = policy.counts(s);
        let scores = readability(s);
        for (column, value) in columns.iter_mut().zip([
            uniq,
            divisive as f64,
            mention as u8 as f64,
            scores.fkgl,
            scores.fog,
            scores.dale_chall,
            scores.ari,
        ]) {
            column.push(value);
        }
        let divisive_group = if divisive > 0 { "divisive" } else { "plain" };
        let mention_group = if mention { "mention" } else { "no_mention" };
        strata.entry(("divisive", divisive_group)).or_default().push(uniq);
        strata.entry(("mention", mention_group)).or_default().push(uniq);
    }
    let mut group_means: Vec<GroupMean> = strata
        .into_iter()
        .filter_map(|((dimension, group), values)| {
            confidence_interval(&values, method).map(|ci| GroupMean {
                dimension: dimension.to_string(),
                group: group.to_string(),
                ci,
            })
        })
        .collect();
    group_means.sort_by(|a, b| (&a.dimension, &a.group).cmp(&(&b.dimension, &b.group)));

    let mut correlations = Vec::new();
    for i in 0..METRIC_NAMES.len() {
        for j in i + 1..METRIC_NAMES.len() {
            let (rho, p) = match spearman(&columns[i], &columns[j]) {
                Ok((rho, p)) => (Some(rho), Some(p)),
                Err(_) => (None, None),
            };
            correlations.push(MetricCorrelation {
                metric_a: METRIC_NAMES[i].to_string(),
                metric_b: METRIC_NAMES[j].to_string(),
                n: columns[i].len(),
                rho,
                p,
            });
        }
    }
    CrossTables { group_means, correlations }
}

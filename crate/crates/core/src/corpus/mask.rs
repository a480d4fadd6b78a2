//! Named-entity masking.
//!
//! Speaker names and other proper nouns leak identity into language-model
//! scores, so sentences are masked before training or scoring: each entity
//! span collapses to the single atomic token [`MASK_TOKEN`]. Span providers
//! are pluggable through [`EntityTagger`]; [`BuiltinTagger`] is a
//! dependency-free fallback that masks capitalized token runs that do not
//! start the sentence.

use crate::error::{Error, Result};

/// The atomic replacement token. Never split or partially emitted.
pub const MASK_TOKEN: &str = "<ENT>";

/// A source of entity spans, as byte ranges into the sentence.
///
/// Implementations must return in-bounds, non-overlapping ranges; overlap is
/// rejected by [`mask_with_tagger`] rather than silently merged.
pub trait EntityTagger {
    fn entity_spans(&self, text: &str) -> Vec<(usize, usize)>;
}

/// Heuristic fallback tagger: masks maximal runs of capitalized (or
/// all-caps) tokens that do not begin the sentence.
///
/// A run starting at the first token is left alone — ordinary sentence
/// openers are capitalized too, and erring toward under-masking keeps real
/// words out of the mask. Pronoun forms of "I" and the article "A" never
/// qualify.
#[derive(Debug, Clone, Copy, Default)]
pub struct BuiltinTagger;

/// Words that look capitalized but are never entities.
const NEVER_ENTITIES: &[&str] = &["A", "I", "I'd", "I'll", "I'm", "I've"];

impl EntityTagger for BuiltinTagger {
    fn entity_spans(&self, text: &str) -> Vec<(usize, usize)> {
        let tokens = tokens_with_offsets(text);
        let mut spans = Vec::new();
        let mut run: Option<(usize, usize, usize)> = None; // (first_idx, start, end)

        for (idx, (start, end)) in tokens.iter().enumerate() {
            let qualifies = looks_like_entity(&text[*start..*end]);
            match (qualifies, run) {
                (true, None) => run = Some((idx, *start, *end)),
                (true, Some((first, s, _))) => run = Some((first, s, *end)),
                (false, Some((first, s, e))) => {
                    if first > 0 {
                        spans.push((s, e));
                    }
                    run = None;
                }
                (false, None) => {}
            }
        }
        if let Some((first, s, e)) = run {
            if first > 0 {
                spans.push((s, e));
            }
        }
        spans
    }
}

/// Whitespace tokens as byte ranges, trimmed of edge punctuation so a mask
/// never swallows an adjacent comma or quote.
fn tokens_with_offsets(text: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s, i));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s, text.len()));
    }
    // Trim edge punctuation (keep interior dots/apostrophes: "U.S.", "Biden's"
    // keep their cores; a trailing comma, quote, or sentence period stays out
    // of the span so masking never deletes clause punctuation).
    out.into_iter()
        .filter_map(|(s, e)| {
            let tok = &text[s..e];
            let first = tok.find(|c: char| c.is_alphanumeric())?;
            let last = tok
                .char_indices()
                .rev()
                .find(|(_, c)| c.is_alphanumeric())
                .map(|(i, c)| i + c.len_utf8())?;
            (first < last).then_some((s + first, s + last))
        })
        .collect()
}

fn looks_like_entity(core: &str) -> bool {
    if NEVER_ENTITIES.contains(&core) {
        return false;
    }
    let mut alphabetic = core.chars().filter(|c| c.is_alphabetic());
    let Some(first) = alphabetic.next() else {
        return false;
    };
    if !first.is_uppercase() {
        return false;
    }
    let rest: Vec<char> = alphabetic.collect();
    if rest.is_empty() {
        return false; // single letters are initials, not entities
    }
    let all_caps = rest.iter().all(|c| c.is_uppercase());
    let has_lower = rest.iter().any(|c| c.is_lowercase());
    all_caps || has_lower
}

/// Replaces each span with [`MASK_TOKEN`], validating bounds and overlap.
pub fn mask_spans(text: &str, spans: &[(usize, usize)]) -> Result<String> {
    let mut sorted: Vec<(usize, usize)> = spans.to_vec();
    sorted.sort_unstable();
    for &(start, end) in &sorted {
        if start >= end
            || end > text.len()
            || !text.is_char_boundary(start)
            || !text.is_char_boundary(end)
        {
            return Err(Error::InvalidSpan {
                start,
                end,
                text: text.to_string(),
            });
        }
    }
    for pair in sorted.windows(2) {
        if pair[1].0 < pair[0].1 {
            return Err(Error::OverlappingSpans {
                at: pair[1].0,
                text: text.to_string(),
            });
        }
    }

    let mut out = String::with_capacity(text.len());
    let mut cursor = 0usize;
    for (start, end) in sorted {
        out.push_str(&text[cursor..start]);
        out.push_str(MASK_TOKEN);
        cursor = end;
    }
    out.push_str(&text[cursor..]);
    Ok(out)
}

/// Masks `text` using spans from `tagger`.
pub fn mask_with_tagger(text: &str, tagger: &dyn EntityTagger) -> Result<String> {
    mask_spans(text, &tagger.entity_spans(text))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn explicit_spans_are_replaced_atomically() {
        let text = "they hate the Clintons, they hate NAFTA";
        let spans = vec![(14, 22), (34, 39)];
        assert_eq!(
            mask_spans(text, &spans).unwrap(),
            "they hate the <ENT>, they hate <ENT>"
        );
    }

    #[test]
    fn overlapping_spans_are_rejected() {
        let err = mask_spans("abcdef", &[(0, 3), (2, 5)]).unwrap_err();
        assert!(matches!(err, Error::OverlappingSpans { at: 2, .. }));
    }

    #[test]
    fn out_of_bounds_spans_are_rejected() {
        assert!(mask_spans("abc", &[(1, 9)]).is_err());
        assert!(mask_spans("abc", &[(2, 2)]).is_err());
    }

    #[test]
    fn builtin_masks_mid_sentence_capitalized_runs() {
        let got = mask_with_tagger("And they hate the Clintons.", &BuiltinTagger).unwrap();
        assert_eq!(got, "And they hate the <ENT>.");
    }

    #[test]
    fn builtin_merges_adjacent_capitalized_tokens() {
        let got = mask_with_tagger("We ran against Hillary Clinton, remember?", &BuiltinTagger).unwrap();
        assert_eq!(got, "We ran against <ENT>, remember?");
    }

    #[test]
    fn builtin_masks_acronyms() {
        let got = mask_with_tagger("they gave us NAFTA and it failed", &BuiltinTagger).unwrap();
        assert_eq!(got, "they gave us <ENT> and it failed");
    }

    #[test]
    fn builtin_skips_sentence_start_runs() {
        let got = mask_with_tagger("Donald Trump said he would win.", &BuiltinTagger).unwrap();
        assert_eq!(got, "Donald Trump said he would win.");
    }

    #[test]
    fn builtin_never_masks_the_pronoun_i() {
        let got = mask_with_tagger("and I said no, I'm done", &BuiltinTagger).unwrap();
        assert_eq!(got, "and I said no, I'm done");
    }

    #[test]
    fn builtin_keeps_edge_punctuation_outside_the_mask() {
        let got = mask_with_tagger("we beat Ohio!", &BuiltinTagger).unwrap();
        assert_eq!(got, "we beat <ENT>!");
        let got = mask_with_tagger("we beat Ohio.", &BuiltinTagger).unwrap();
        assert_eq!(got, "we beat <ENT>.");
    }
}

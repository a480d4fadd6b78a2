//! Text normalization for counting and lexicon matching.
//!
//! `normalize` lowercases, expands contractions from a bundled table,
//! removes punctuation, and collapses whitespace. The result contains only
//! lowercase alphanumeric words separated by single spaces, which makes the
//! function idempotent: `normalize(normalize(s)) == normalize(s)`.

use std::collections::HashMap;
use std::sync::LazyLock;

/// Bundled contraction table (`data/contractions.tsv`).
static CONTRACTIONS: LazyLock<HashMap<&'static str, &'static str>> = LazyLock::new(|| {
    let mut map = HashMap::new();
    for line in include_str!("../../data/contractions.tsv").lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (surface, expansion) = line
            .split_once('\t')
            .expect("contraction table lines are `surface<TAB>expansion`");
        map.insert(surface, expansion);
    }
    map
});

/// Lowercases, expands contractions, strips punctuation, and single-spaces.
///
/// ```
/// use rhetoric::corpus::normalize;
/// assert_eq!(normalize("It's a disgrace."), "it is a disgrace");
/// assert_eq!(normalize("They CAN'T hide!!"), "they can not hide");
/// ```
pub fn normalize(text: &str) -> String {
    let lowered = text.to_lowercase().replace('’', "'");
    let mut words: Vec<String> = Vec::new();

    for token in lowered.split_whitespace() {
        // Strip edge punctuation but keep interior apostrophes so the
        // contraction lookup sees forms like `can't` inside `"can't!"`.
        let core = token
            .trim_matches(|c: char| !c.is_alphanumeric() && c != '\'')
            .trim_matches('\'');
        if let Some(expansion) = CONTRACTIONS.get(core) {
            words.extend(expansion.split(' ').map(str::to_string));
            continue;
        }
        let cleaned: String = token.chars().filter(|c| c.is_alphanumeric()).collect();
        if cleaned.is_empty() {
            continue;
        }
        // A cleaned token can itself be a listed form (e.g. `g.o.n.n.a`
        // cleans to `gonna`); expand it here so a second pass finds nothing new.
        if let Some(expansion) = CONTRACTIONS.get(cleaned.as_str()) {
            words.extend(expansion.split(' ').map(str::to_string));
        } else {
            words.push(cleaned);
        }
    }
    words.join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expands_contractions_and_strips_punctuation() {
        assert_eq!(normalize("It's a disgrace."), "it is a disgrace");
        assert_eq!(normalize("We won't stop; we can't."), "we will not stop we can not");
    }

    #[test]
    fn lowercases_and_collapses_whitespace() {
        assert_eq!(normalize("  SO   MUCH\twinning \n"), "so much winning");
    }

    #[test]
    fn handles_curly_apostrophes() {
        assert_eq!(normalize("they’re done"), "they are done");
    }

    #[test]
    fn drops_punctuation_only_tokens() {
        assert_eq!(normalize("wrong -- just wrong !!"), "wrong just wrong");
    }

    #[test]
    fn keeps_digits() {
        assert_eq!(normalize("47 percent!"), "47 percent");
    }

    #[test]
    fn possessives_lose_the_apostrophe() {
        assert_eq!(normalize("the senator's plan"), "the senators plan");
    }

    #[test]
    fn idempotent_on_expanded_output() {
        let once = normalize("Don't tell me it's over... it isn't!");
        assert_eq!(normalize(&once), once);
    }

    #[test]
    fn empty_input_is_empty() {
        assert_eq!(normalize(""), "");
        assert_eq!(normalize(" . , ; "), "");
    }
}

//! Rule-based sentence segmentation.
//!
//! Splits transcript turns on terminal punctuation (`.`, `!`, `?`, `…`)
//! followed by whitespace and a plausible sentence starter, with guards for
//! abbreviations (`Mr.`, `Sen.`), personal initials (`George W. Bush`),
//! dotted acronyms (`U.S.`), and decimal numbers. The segmenter never drops
//! or reorders non-whitespace characters: joining the output restores the
//! input up to inter-sentence whitespace.

/// Abbreviations after which a period never ends a sentence.
const ABBREVIATIONS: &[&str] = &[
    "adm", "apr", "aug", "capt", "cmdr", "co", "col", "corp", "dec", "dept", "dr", "est", "etc",
    "feb", "gen", "gov", "hon", "inc", "jan", "jr", "jul", "jun", "lt", "ltd", "mar", "messrs",
    "mr", "mrs", "ms", "mt", "nov", "oct", "prof", "rep", "rev", "sen", "sept", "sgt", "sr", "st",
    "vs",
];

/// Abbreviations that only suppress a split when a number follows
/// (`No. 3`, `fig. 2`); elsewhere the same spelling is an ordinary word.
const ABBREVIATIONS_BEFORE_DIGIT: &[&str] = &["fig", "figs", "no", "nos", "pp", "sec", "secs", "vol", "vols"];

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | '…')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | '”' | '’' | ')' | ']' | '»')
}

fn is_starter(c: char) -> bool {
    c.is_uppercase() || c.is_ascii_digit() || matches!(c, '"' | '\'' | '“' | '‘' | '(' | '[' | '«' | '$')
}

/// Splits `text` into sentences.
///
/// Empty or whitespace-only input yields no sentences. Each returned
/// sentence is trimmed; all interior characters are preserved verbatim.
pub fn segment(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0usize; // index into `chars` where the current sentence begins
    let mut i = 0usize;

    while i < chars.len() {
        if !is_terminal(chars[i].1) {
            i += 1;
            continue;
        }

        // Consume the full run of terminal characters ("?!", "...", "…").
        let run_start = i;
        let mut run_end = i;
        while run_end + 1 < chars.len() && is_terminal(chars[run_end + 1].1) {
            run_end += 1;
        }
        // Closing quotes and brackets belong to the finished sentence.
        let mut close_end = run_end;
        while close_end + 1 < chars.len() && is_closer(chars[close_end + 1].1) {
            close_end += 1;
        }

        // Find the next non-whitespace character.
        let mut next = close_end + 1;
        let mut saw_whitespace = false;
        while next < chars.len() && chars[next].1.is_whitespace() {
            saw_whitespace = true;
            next += 1;
        }

        let single_period = run_start == run_end && chars[run_start].1 == '.';
        let boundary = next < chars.len()
            && saw_whitespace
            && is_starter(chars[next].1)
            && !(single_period && suppress_split(text, &chars, run_start, chars[next].1));

        if boundary {
            let seg = &text[chars[start].0..end_byte(text, &chars, close_end)];
            let seg = seg.trim();
            if !seg.is_empty() {
                out.push(seg.to_string());
            }
            start = next;
            i = next;
        } else {
            i = close_end + 1;
        }
    }

    if start < chars.len() {
        let tail = text[chars[start].0..].trim();
        if !tail.is_empty() {
            out.push(tail.to_string());
        }
    }
    out
}

/// Byte offset one past character `idx`.
fn end_byte(text: &str, chars: &[(usize, char)], idx: usize) -> usize {
    if idx + 1 < chars.len() {
        chars[idx + 1].0
    } else {
        text.len()
    }
}

/// Decides whether the period at character index `dot` is protected by the
/// word before it (abbreviation, initial, or dotted acronym).
fn suppress_split(text: &str, chars: &[(usize, char)], dot: usize, next_char: char) -> bool {
    // Walk back to the previous whitespace to recover the preceding token.
    let mut first = dot;
    while first > 0 && !chars[first - 1].1.is_whitespace() {
        first -= 1;
    }
    if first == dot {
        return false; // the period has no word attached
    }
    let token = &text[chars[first].0..chars[dot].0];
    // Ignore any leading quotes or brackets on the token.
    let token = token.trim_start_matches(|c: char| !c.is_alphanumeric() && c != '.');
    if token.is_empty() {
        return false;
    }

    // Dotted acronyms keep their final period attached: "U.S.", "D.C.".
    if token.contains('.') {
        return true;
    }
    // A single capital letter is a personal initial: "George W. Bush".
    let mut letters = token.chars();
    if let (Some(c), None) = (letters.next(), letters.next()) {
        if c.is_alphabetic() && c.is_uppercase() {
            return true;
        }
    }
    let lower = token.to_lowercase();
    if ABBREVIATIONS.contains(&lower.as_str()) {
        return true;
    }
    if ABBREVIATIONS_BEFORE_DIGIT.contains(&lower.as_str()) && next_char.is_ascii_digit() {
        return true;
    }
    false
}

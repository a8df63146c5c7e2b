use serde::{Deserialize, Serialize};

use crate::types::Span;

/// Words ending in a period that never close a sentence.
const ABBREVIATIONS: &[&str] = &[
    "Mr.", "Mrs.", "Ms.", "Dr.", "Prof.", "Rs.", "U.S.", "St.", "Smt.", "Shri.", "Jr.", "Sr.",
    "No.", "Gen.", "Col.", "Lt.", "Govt.",
];

const CLOSERS: &[char] = &['"', '\'', ')', ']', '\u{201d}', '\u{2019}'];
const OPENERS: &[char] = &['"', '\'', '(', '\u{201c}', '\u{2018}'];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub index: usize,
    pub span: Span,
    pub text: String,
}

/// Rule-based splitter: a sentence ends at `.`, `?` or `!` (plus any closing
/// quotes) followed by whitespace and an uppercase letter. Periods after
/// stop-listed abbreviations and dotted acronyms do not end a sentence.
///
/// Spans are trimmed of surrounding whitespace, ordered and disjoint; the
/// gaps between them contain only whitespace.
pub fn split_sentences(text: &str) -> Vec<Sentence> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    let mut chars = text.char_indices().peekable();

    while let Some((i, c)) = chars.next() {
        if start.is_none() {
            if c.is_whitespace() {
                continue;
            }
            start = Some(i);
        }
        if !matches!(c, '.' | '?' | '!') {
            continue;
        }
        if c == '.' && is_abbreviation(text, i) {
            continue;
        }
        let mut end = i + c.len_utf8();
        while let Some(&(j, d)) = chars.peek() {
            if !CLOSERS.contains(&d) {
                break;
            }
            end = j + d.len_utf8();
            chars.next();
        }
        if starts_new_sentence(&text[end..]) {
            push(&mut out, text, start.take().unwrap_or(i), end);
        }
    }
    if let Some(s) = start {
        push(&mut out, text, s, text.len());
    }
    out
}

fn push(out: &mut Vec<Sentence>, text: &str, start: usize, end: usize) {
    let raw = &text[start..end];
    let trimmed_end = start + raw.trim_end().len();
    if trimmed_end == start {
        return;
    }
    out.push(Sentence {
        index: out.len(),
        span: Span::new(start, trimmed_end),
        text: text[start..trimmed_end].to_string(),
    });
}

fn starts_new_sentence(rest: &str) -> bool {
    let after_ws = rest.trim_start();
    if after_ws.len() == rest.len() {
        return false;
    }
    let after_open = after_ws.trim_start_matches(OPENERS);
    after_open.chars().next().is_some_and(char::is_uppercase)
}

fn is_abbreviation(text: &str, dot: usize) -> bool {
    let word_start = text[..dot]
        .char_indices()
        .rev()
        .find(|(_, c)| c.is_whitespace() || OPENERS.contains(c))
        .map(|(j, c)| j + c.len_utf8())
        .unwrap_or(0);
    let word = &text[word_start..=dot];
    let stem = &word[..word.len() - 1];
    if ABBREVIATIONS.contains(&word) {
        return true;
    }
    // Dotted acronyms such as "U.K.".
    stem.contains('.') && !stem.ends_with('.')
}

/// Index of the sentence containing byte offset `at`, if any.
pub fn sentence_at(sentences: &[Sentence], at: usize) -> Option<usize> {
    let pos = sentences.partition_point(|s| s.span.end <= at);
    sentences
        .get(pos)
        .filter(|s| s.span.start <= at && at < s.span.end)
        .map(|s| s.index)
}

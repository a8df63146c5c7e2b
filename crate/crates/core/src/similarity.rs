//! String normalization and similarity kernels for matching entity mentions
//! across documents.
//!
//! All measures operate on Unicode scalar values, not bytes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::PipelineConfig;

const HONORIFICS: &[&str] = &["mr", "mrs", "ms", "dr", "shri", "smt"];

/// Shortest string (in characters) allowed to win a substring match.
pub const MIN_SUBSTRING_CHARS: usize = 3;

/// Lowercases, drops punctuation, collapses whitespace and strips leading
/// honorifics.
pub fn normalize_mention(s: &str) -> String {
    let lowered: String = s
        .to_lowercase()
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect();
    let mut tokens: Vec<&str> = lowered.split_whitespace().collect();
    let leading = tokens
        .iter()
        .take_while(|t| HONORIFICS.contains(t))
        .count();
    tokens.drain(..leading);
    tokens.join(" ")
}

pub fn jaro(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    jaro_chars(&a, &b)
}

fn jaro_chars(a: &[char], b: &[char]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let window = (a.len().max(b.len()) / 2).saturating_sub(1);

    let mut b_taken = vec![false; b.len()];
    let mut a_matched = Vec::with_capacity(a.len());
    for (i, ca) in a.iter().enumerate() {
        let lo = i.saturating_sub(window);
        let hi = (i + window + 1).min(b.len());
        for j in lo..hi {
            if !b_taken[j] && b[j] == *ca {
                b_taken[j] = true;
                a_matched.push(*ca);
                break;
            }
        }
    }
    let m = a_matched.len();
    if m == 0 {
        return 0.0;
    }
    let b_matched = b
        .iter()
        .zip(&b_taken)
        .filter(|(_, taken)| **taken)
        .map(|(c, _)| *c);
    let mismatched = a_matched
        .iter()
        .zip(b_matched)
        .filter(|(x, y)| **x != *y)
        .count();
    let m = m as f64;
    let t = mismatched as f64 / 2.0;
    (m / a.len() as f64 + m / b.len() as f64 + (m - t) / m) / 3.0
}

/// Jaro similarity boosted by the common prefix (at most four characters).
pub fn jaro_winkler(a: &str, b: &str, prefix_scale: f64) -> Result<f64> {
    if !(0.0..=0.25).contains(&prefix_scale) {
        return Err(Error::Invalid(format!(
            "jaro-winkler prefix scale {prefix_scale} outside [0, 0.25]"
        )));
    }
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let sim = jaro_chars(&a, &b);
    let prefix = a
        .iter()
        .zip(&b)
        .take(4)
        .take_while(|(x, y)| x == y)
        .count();
    Ok(sim + prefix as f64 * prefix_scale * (1.0 - sim))
}

/// Unit-cost edit distance, two-row dynamic program.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let substitution = prev[j] + usize::from(ca != cb);
            cur[j + 1] = substitution.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// True when the shorter string is a whole-token run of the longer one.
///
/// Inputs are expected to be normalized already.
pub fn substring_match(a: &str, b: &str) -> bool {
    let (short, long) = if a.chars().count() <= b.chars().count() {
        (a, b)
    } else {
        (b, a)
    };
    if short.chars().count() < MIN_SUBSTRING_CHARS {
        return false;
    }
    let needle: Vec<&str> = short.split_whitespace().collect();
    let haystack: Vec<&str> = long.split_whitespace().collect();
    !needle.is_empty()
        && needle.len() <= haystack.len()
        && haystack.windows(needle.len()).any(|w| w == needle.as_slice())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchRule {
    Exact,
    JaroWinkler,
    Substring,
}

/// Outcome of [`mention_match`]. `rule` is the first test that succeeded,
/// or `None` when none did; `score` is always the Jaro-Winkler value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchDecision {
    pub matched: bool,
    pub rule: Option<MatchRule>,
    pub score: f64,
}

/// Exact, then Jaro-Winkler against the configured threshold, then
/// token-aligned substring. Levenshtein does not take part.
pub fn mention_match(a: &str, b: &str, config: &PipelineConfig) -> MatchDecision {
    let a = normalize_mention(a);
    let b = normalize_mention(b);
    let scale = config.jw_prefix_scale.clamp(0.0, 0.25);
    let score = jaro_winkler(&a, &b, scale).expect("prefix scale clamped");
    let rule = if !a.is_empty() && a == b {
        Some(MatchRule::Exact)
    } else if !a.is_empty() && !b.is_empty() && score >= config.jw_threshold {
        Some(MatchRule::JaroWinkler)
    } else if substring_match(&a, &b) {
        Some(MatchRule::Substring)
    } else {
        None
    };
    MatchDecision {
        matched: rule.is_some(),
        rule,
        score,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_mention("Dr. Narendra  Modi "), "narendra modi");
        assert_eq!(normalize_mention("RBI"), "rbi");
        assert_eq!(normalize_mention(""), "");
        assert_eq!(normalize_mention("Smt. Nirmala Sitharaman"), "nirmala sitharaman");
        assert_eq!(normalize_mention("N. Modi"), "n modi");
        // Honorific only at the front.
        assert_eq!(normalize_mention("Bank of Mr X"), "bank of mr x");
    }

    #[test]
    fn jaro_examples() {
        assert_eq!(jaro("abc", "abc"), 1.0);
        assert_eq!(jaro("", "abc"), 0.0);
        assert_eq!(jaro("", ""), 1.0);
        assert_eq!(jaro("a", "b"), 0.0);
        // m = 6, t = 1: (1 + 1 + 5/6) / 3
        let expected = (1.0 + 1.0 + 5.0 / 6.0) / 3.0;
        assert!((jaro("martha", "marhta") - expected).abs() < 1e-15);
    }

    #[test]
    fn jaro_winkler_examples() {
        assert_eq!(jaro_winkler("abc", "abc", 0.1).unwrap(), 1.0);
        assert_eq!(jaro_winkler("a", "b", 0.1).unwrap(), 0.0);
        let j = (1.0 + 1.0 + 5.0 / 6.0) / 3.0;
        let expected = j + 3.0 * 0.1 * (1.0 - j);
        assert!((jaro_winkler("martha", "marhta", 0.1).unwrap() - expected).abs() < 1e-15);
        assert!(jaro_winkler("a", "b", 0.3).is_err());
        assert!(jaro_winkler("a", "b", -0.1).is_err());
    }

    #[test]
    fn levenshtein_examples() {
        assert_eq!(levenshtein("abc", "abc"), 0);
        assert_eq!(levenshtein("abc", ""), 3);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
    }

    #[test]
    fn substring_examples() {
        assert!(substring_match("narendra modi", "modi"));
        assert!(!substring_match("modi", "mod"));
        assert!(!substring_match("", "abc"));
        assert!(!substring_match("rajasthan", "raj"));
        assert!(!substring_match("the rbi", "rb"));
        assert!(substring_match("reserve bank of india", "bank of india"));
    }

    #[test]
    fn mention_match_rules() {
        let config = PipelineConfig::default();
        let d = mention_match("Modi", "modi", &config);
        assert!(d.matched);
        assert_eq!(d.rule, Some(MatchRule::Exact));

        let strict = PipelineConfig {
            jw_threshold: 0.9,
            ..Default::default()
        };
        let d = mention_match("martha", "marhta", &strict);
        assert_eq!(d.rule, Some(MatchRule::JaroWinkler));
        assert!((d.score - 0.961111).abs() < 1e-6);

        let d = mention_match("Narendra Modi", "Modi", &config);
        assert_eq!(d.rule, Some(MatchRule::Substring));

        // Honorific-only strings normalize to empty and never match.
        assert!(!mention_match("Mr.", "Dr.", &config).matched);
    }
}

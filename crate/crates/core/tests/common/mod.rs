//! Reference implementations and fixture helpers shared by the integration
//! tests. The oracles are written straight from the textbook definitions
//! and deliberately share no code with the library.

#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

use newsstake::pipeline::DescribedEntity;
use newsstake::similarity::normalize_mention;
use newsstake::PipelineConfig;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

/// Edit distance by memoized recursion on suffixes.
pub fn levenshtein_oracle(a: &str, b: &str) -> usize {
    fn go(a: &[char], b: &[char], i: usize, j: usize, memo: &mut HashMap<(usize, usize), usize>) -> usize {
        if i == a.len() {
            return b.len() - j;
        }
        if j == b.len() {
            return a.len() - i;
        }
        if let Some(&v) = memo.get(&(i, j)) {
            return v;
        }
        let v = if a[i] == b[j] {
            go(a, b, i + 1, j + 1, memo)
        } else {
            1 + go(a, b, i + 1, j, memo)
                .min(go(a, b, i, j + 1, memo))
                .min(go(a, b, i + 1, j + 1, memo))
        };
        memo.insert((i, j), v);
        v
    }
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    go(&a, &b, 0, 0, &mut HashMap::new())
}

/// Jaro similarity as defined: characters match when equal and no further
/// apart than floor(max(|a|,|b|)/2) - 1, each character of `b` matched at
/// most once scanning `a` left to right; t is half the number of matched
/// characters that differ when both match sequences are read in order.
pub fn jaro_oracle(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let reach = (a.len().max(b.len()) / 2) as isize - 1;
    let reach = reach.max(0);
    let mut used = vec![false; b.len()];
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    #[allow(clippy::needless_range_loop)]
    for i in 0..a.len() {
        for j in 0..b.len() {
            let distance = (i as isize - j as isize).abs();
            if distance <= reach && !used[j] && a[i] == b[j] {
                used[j] = true;
                pairs.push((i, j));
                break;
            }
        }
    }
    if pairs.is_empty() {
        return 0.0;
    }
    let from_a: Vec<char> = pairs.iter().map(|&(i, _)| a[i]).collect();
    let mut b_positions: Vec<usize> = pairs.iter().map(|&(_, j)| j).collect();
    b_positions.sort_unstable();
    let from_b: Vec<char> = b_positions.iter().map(|&j| b[j]).collect();
    let half_transpositions = from_a.iter().zip(&from_b).filter(|(x, y)| x != y).count();
    let m = pairs.len() as f64;
    let t = half_transpositions as f64 / 2.0;
    (m / a.len() as f64 + m / b.len() as f64 + (m - t) / m) / 3.0
}

pub fn jaro_winkler_oracle(a: &str, b: &str, p: f64) -> f64 {
    let j = jaro_oracle(a, b);
    let l = a
        .chars()
        .zip(b.chars())
        .take_while(|(x, y)| x == y)
        .count()
        .min(4);
    j + l as f64 * p * (1.0 - j)
}

/// Whole-token containment checked by padded string search.
pub fn token_substring_oracle(a: &str, b: &str) -> bool {
    let (short, long) = if a.chars().count() <= b.chars().count() { (a, b) } else { (b, a) };
    if short.chars().count() < 3 || short.trim().is_empty() {
        return false;
    }
    let pad = |s: &str| format!(" {} ", s.split_whitespace().collect::<Vec<_>>().join(" "));
    pad(long).contains(&pad(short))
}

/// Exact, Jaro-Winkler above threshold, or token substring, all after
/// normalization.
pub fn mention_match_oracle(a: &str, b: &str, config: &PipelineConfig) -> bool {
    let a = normalize_mention(a);
    let b = normalize_mention(b);
    if a.is_empty() || b.is_empty() {
        return false;
    }
    a == b
        || jaro_winkler_oracle(&a, &b, config.jw_prefix_scale) >= config.jw_threshold
        || token_substring_oracle(&a, &b)
}

/// Per-label tp/fp/fn by brute force, then macro P/R/F1 over `universe`.
pub fn macro_oracle(golds: &[String], preds: &[String], universe: &[String]) -> (f64, f64, f64) {
    let mut p_sum = 0.0;
    let mut r_sum = 0.0;
    let mut f_sum = 0.0;
    for label in universe {
        let mut tp = 0usize;
        let mut predicted = 0usize;
        let mut actual = 0usize;
        for k in 0..golds.len() {
            let g = &golds[k] == label;
            let p = &preds[k] == label && universe.contains(&preds[k]);
            if g && p {
                tp += 1;
            }
            if p {
                predicted += 1;
            }
            if g {
                actual += 1;
            }
        }
        let precision = if predicted == 0 { 0.0 } else { tp as f64 / predicted as f64 };
        let recall = if actual == 0 { 0.0 } else { tp as f64 / actual as f64 };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        p_sum += precision;
        r_sum += recall;
        f_sum += f1;
    }
    let n = universe.len() as f64;
    (p_sum / n, r_sum / n, f_sum / n)
}

/// Lowercased alphanumeric words.
pub fn words(s: &str) -> Vec<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn find<'a>(entities: &'a [DescribedEntity], phrase: &str) -> &'a DescribedEntity {
    entities
        .iter()
        .find(|e| e.entity_phrase == phrase)
        .unwrap_or_else(|| panic!("no description for {phrase:?}"))
}

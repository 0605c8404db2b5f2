//! Mapping free-form replies to option indices.
//!
//! Matchers run in priority order and the first one that finds anything
//! decides:
//!
//! 1. parenthesized letters such as `(b)` (any case)
//! 2. standalone capital letters such as `B`, `B.` or `B:`; a reply that
//!    is nothing but one letter may be lower case
//! 3. a reply equal to an option text (case and surrounding punctuation
//!    ignored)
//! 4. option texts contained in the reply, ignoring options whose text
//!    is itself part of a longer contained option
//!
//! Letters outside the option range are ignored. More than one distinct
//! candidate within the deciding matcher is ambiguous.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(rename_all = "snake_case")]
pub enum ParseFailure {
    #[error("empty response")]
    Empty,
    #[error("ambiguous response (candidates {0:?})")]
    Ambiguous(Vec<usize>),
    #[error("no option matched")]
    NoMatch,
}

fn letter_index(c: char, n: usize) -> Option<usize> {
    let i = (c.to_ascii_uppercase() as u32).checked_sub('A' as u32)? as usize;
    (c.is_ascii_alphabetic() && i < n).then_some(i)
}

fn decide(mut found: Vec<usize>) -> Option<Result<usize, ParseFailure>> {
    found.sort_unstable();
    found.dedup();
    match found.len() {
        0 => None,
        1 => Some(Ok(found[0])),
        _ => Some(Err(ParseFailure::Ambiguous(found))),
    }
}

fn parenthesized(chars: &[char], n: usize) -> Vec<usize> {
    chars
        .windows(3)
        .filter(|w| w[0] == '(' && w[2] == ')')
        .filter_map(|w| letter_index(w[1], n))
        .collect()
}

fn standalone_capitals(chars: &[char], n: usize) -> Vec<usize> {
    let boundary = |c: Option<&char>| c.is_none_or(|c| !c.is_alphanumeric() && *c != '\'' && *c != '’');
    (0..chars.len())
        .filter(|&i| chars[i].is_ascii_uppercase())
        .filter(|&i| boundary(i.checked_sub(1).and_then(|j| chars.get(j))) && boundary(chars.get(i + 1)))
        .filter_map(|i| letter_index(chars[i], n))
        .collect()
}

fn normalize(s: &str) -> String {
    s.trim()
        .trim_matches(|c: char| c.is_ascii_punctuation() || c.is_whitespace())
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

pub fn parse_answer(text: &str, options: &[String]) -> Result<usize, ParseFailure> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(ParseFailure::Empty);
    }
    let n = options.len();
    let chars: Vec<char> = trimmed.chars().collect();

    if let Some(r) = decide(parenthesized(&chars, n)) {
        return r;
    }
    if let Some(r) = decide(standalone_capitals(&chars, n)) {
        return r;
    }
    let bare: Vec<char> = trimmed.trim_matches(|c: char| c == '(' || c == ')' || c == '.' || c.is_whitespace()).chars().collect();
    if let [c] = bare[..] {
        if let Some(i) = letter_index(c, n) {
            return Ok(i);
        }
    }

    let reply = normalize(trimmed);
    let normalized: Vec<String> = options.iter().map(|o| normalize(o)).collect();
    if let Some(r) = decide((0..n).filter(|&i| !normalized[i].is_empty() && normalized[i] == reply).collect()) {
        return r;
    }
    let contained: Vec<usize> = (0..n).filter(|&i| !normalized[i].is_empty() && reply.contains(&normalized[i])).collect();
    let maximal: Vec<usize> = contained
        .iter()
        .copied()
        .filter(|&i| !contained.iter().any(|&j| normalized[j] != normalized[i] && normalized[j].contains(&normalized[i])))
        .collect();
    decide(maximal).unwrap_or(Err(ParseFailure::NoMatch))
}

//! Text helpers shared by augmentation, retrieval, and evaluation.

use alloc::string::String;
use alloc::vec::Vec;
use core::hash::Hasher;

use fnv::FnvHasher;

/// Lowercases, strips terminal punctuation, and collapses whitespace.
///
/// Used for scene QA lookup, answer validation, and exact-match scoring.
pub fn normalize_answer(text: &str) -> String {
    let lowered = text.to_lowercase();
    let mut out = String::with_capacity(lowered.len());
    for word in lowered.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    while out.ends_with(['.', '?', '!', ',', ';', ':']) {
        out.pop();
        while out.ends_with(' ') {
            out.pop();
        }
    }
    out
}

pub fn fnv64(bytes: &[u8]) -> u64 {
    let mut hasher = FnvHasher::default();
    hasher.write(bytes);
    hasher.finish()
}

/// SplitMix64 finalizer; used to derive independent per-record seeds.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn seed_for(seed: u64, key: &str) -> u64 {
    mix_seed(seed, fnv64(key.as_bytes()))
}

/// Lowercased alphanumeric tokens.
pub fn word_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric() && c != '\'')
        .map(|w| w.trim_matches('\''))
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
        .collect()
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Byte ranges of case-insensitive whole-word occurrences of `needle`.
pub fn whole_word_matches(haystack: &str, needle: &str) -> Vec<(usize, usize)> {
    let mut found = Vec::new();
    if needle.trim().is_empty() {
        return found;
    }
    let hay_lower = haystack.to_lowercase();
    let needle_lower = needle.to_lowercase();
    // Lowercasing can change byte lengths for some scripts; fall back to a
    // case-sensitive scan so ranges stay valid for the original string.
    let (hay, pat) = if hay_lower.len() == haystack.len() && needle_lower.len() == needle.len() {
        (hay_lower.as_str(), needle_lower.as_str())
    } else {
        (haystack, needle)
    };
    let mut start = 0;
    while let Some(offset) = hay[start..].find(pat) {
        let begin = start + offset;
        let end = begin + pat.len();
        let before_ok = hay[..begin].chars().next_back().is_none_or(|c| !is_word_char(c))
            || !pat.chars().next().is_some_and(is_word_char);
        let after_ok = hay[end..].chars().next().is_none_or(|c| !is_word_char(c))
            || !pat.chars().next_back().is_some_and(is_word_char);
        if before_ok && after_ok {
            found.push((begin, end));
            start = end;
        } else {
            start = begin + pat.chars().next().map_or(1, char::len_utf8);
        }
    }
    found
}

pub fn contains_whole_word(haystack: &str, needle: &str) -> bool {
    !whole_word_matches(haystack, needle).is_empty()
}

/// English plural for the regular cases used by the bundled vocabularies.
pub fn plural(noun: &str) -> String {
    let lower = noun.to_lowercase();
    let bytes = lower.as_bytes();
    let consonant_y = bytes.len() >= 2
        && bytes[bytes.len() - 1] == b'y'
        && !b"aeiou".contains(&bytes[bytes.len() - 2]);
    if consonant_y {
        let mut out = String::from(&noun[..noun.len() - 1]);
        out.push_str("ies");
        out
    } else if ["s", "x", "z", "ch", "sh"].iter().any(|s| lower.ends_with(s)) {
        let mut out = String::from(noun);
        out.push_str("es");
        out
    } else {
        let mut out = String::from(noun);
        out.push('s');
        out
    }
}

//! Web-text cleaning: desensitization, compatibility folding, whitespace
//! collapse, brevity filtering and exact deduplication.

use std::collections::HashSet;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizeConfig {
    /// Minimum number of content characters (ideographs, letters, digits)
    /// for a text to count as substantive.
    pub min_content_chars: usize,
    pub strip_mentions: bool,
    pub strip_urls: bool,
    pub collapse_whitespace: bool,
}

impl Default for NormalizeConfig {
    fn default() -> Self {
        NormalizeConfig {
            min_content_chars: 4,
            strip_mentions: true,
            strip_urls: true,
            collapse_whitespace: true,
        }
    }
}

/// Code point ranges treated as emoji. Covers the pictographic blocks plus
/// the sequence glue (ZWJ, variation selector 16, keycap, tag characters).
const EMOJI_RANGES: &[(u32, u32)] = &[
    (0x00A9, 0x00A9),
    (0x00AE, 0x00AE),
    (0x200D, 0x200D),
    (0x203C, 0x203C),
    (0x2049, 0x2049),
    (0x20E3, 0x20E3),
    (0x2122, 0x2122),
    (0x2139, 0x2139),
    (0x2194, 0x2199),
    (0x21A9, 0x21AA),
    (0x231A, 0x231B),
    (0x2328, 0x2328),
    (0x23CF, 0x23CF),
    (0x23E9, 0x23F3),
    (0x23F8, 0x23FA),
    (0x24C2, 0x24C2),
    (0x25AA, 0x25AB),
    (0x25B6, 0x25B6),
    (0x25C0, 0x25C0),
    (0x25FB, 0x25FE),
    (0x2600, 0x27BF),
    (0x2934, 0x2935),
    (0x2B05, 0x2B07),
    (0x2B1B, 0x2B1C),
    (0x2B50, 0x2B50),
    (0x2B55, 0x2B55),
    (0x3030, 0x3030),
    (0x303D, 0x303D),
    (0x3297, 0x3297),
    (0x3299, 0x3299),
    (0xFE0F, 0xFE0F),
    (0x1F000, 0x1FAFF),
    (0xE0020, 0xE007F),
];

pub fn is_emoji(c: char) -> bool {
    let cp = c as u32;
    EMOJI_RANGES
        .binary_search_by(|&(lo, hi)| {
            if hi < cp {
                std::cmp::Ordering::Less
            } else if lo > cp {
                std::cmp::Ordering::Greater
            } else {
                std::cmp::Ordering::Equal
            }
        })
        .is_ok()
}

/// Full-width sentence punctuation that Chinese text uses natively. These are
/// kept as-is instead of being folded to their ASCII forms.
fn is_cjk_sentence_punct(c: char) -> bool {
    matches!(c, '！' | '，' | '：' | '；' | '？' | '（' | '）' | '～')
}

/// Content characters: ideographs, letters and digits.
pub fn is_content_char(c: char) -> bool {
    c.is_alphanumeric()
}

fn emoji_class() -> String {
    let mut class = String::new();
    for &(lo, hi) in EMOJI_RANGES {
        class.push_str(&format!("\\x{{{lo:X}}}-\\x{{{hi:X}}}"));
    }
    class
}

fn url_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)(?:[a-z][a-z0-9+.\-]*://|www\.)[\x21-\x7E]*").expect("url regex")
    })
}

fn mention_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(&format!(r"[@＠][^\s\p{{P}}{}]+", emoji_class())).expect("mention regex")
    })
}

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)[\[【](?:图片|圖片|image|img|pic|picture|photo)[\]】]").expect("placeholder regex")
    })
}

/// NFKC over everything except emoji and native full-width punctuation,
/// which pass through verbatim.
fn compat_fold(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut run = String::new();
    for c in s.chars() {
        if is_emoji(c) || is_cjk_sentence_punct(c) {
            out.extend(run.nfkc());
            run.clear();
            out.push(c);
        } else {
            run.push(c);
        }
    }
    out.extend(run.nfkc());
    out
}

fn strip_tokens(s: &str, cfg: &NormalizeConfig) -> String {
    let mut cur = s.to_string();
    // Removing one token can splice together another; repeat until stable.
    loop {
        let mut next = placeholder_re().replace_all(&cur, " ").into_owned();
        if cfg.strip_urls {
            next = url_re().replace_all(&next, " ").into_owned();
        }
        if cfg.strip_mentions {
            next = mention_re().replace_all(&next, " ").into_owned();
        }
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

fn finish_whitespace(s: &str, cfg: &NormalizeConfig) -> String {
    if cfg.collapse_whitespace {
        s.split_whitespace().collect::<Vec<_>>().join(" ")
    } else {
        s.trim().to_string()
    }
}

fn normalize_once(s: &str, cfg: &NormalizeConfig) -> String {
    let folded = compat_fold(s);
    let stripped = strip_tokens(&folded, cfg);
    finish_whitespace(&stripped, cfg)
}

/// Cleans one raw comment.
///
/// Folds compatibility forms (full-width ASCII to half-width) while keeping
/// emoji and native full-width punctuation, removes image placeholders, URLs
/// and @-mentions, collapses whitespace and trims. The result is a fixpoint:
/// normalizing it again returns it unchanged.
pub fn normalize_text(raw: &str, cfg: &NormalizeConfig) -> String {
    let mut cur = normalize_once(raw, cfg);
    for _ in 0..8 {
        let next = normalize_once(&cur, cfg);
        if next == cur {
            break;
        }
        cur = next;
    }
    cur
}

pub fn content_char_count(text: &str) -> usize {
    text.chars().filter(|&c| is_content_char(c)).count()
}

pub fn is_substantive(text: &str, cfg: &NormalizeConfig) -> bool {
    content_char_count(text) >= cfg.min_content_chars
}

/// Ids whose normalized text is the first occurrence of that exact string,
/// in input order. Comparison is case-sensitive.
pub fn deduplicate<'a, I>(records: I) -> Vec<u64>
where
    I: IntoIterator<Item = (u64, &'a str)>,
{
    let mut seen = HashSet::new();
    records
        .into_iter()
        .filter(|(_, text)| seen.insert(*text))
        .map(|(id, _)| id)
        .collect()
}

//! Categorized insult lexicon with multi-pattern matching and per-character
//! toxic category assignment.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use aho_corasick::{AhoCorasick, MatchKind};
use serde::{Deserialize, Serialize};

use crate::corpus::Group;
use crate::error::{Error, Result};
use crate::normalize::{normalize_text, NormalizeConfig};

const BUILTIN_LEXICON: &str = include_str!("../resources/lexicon.tsv");

/// Number of insult categories (four targeted groups plus general swearing).
pub const NUM_CATEGORIES: usize = 5;

/// Category id assigned to characters not covered by any insult.
pub const NON_TOXIC: u8 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Sexism = 1,
    Racism = 2,
    RegionalBias = 3,
    AntiLgbtq = 4,
    General = 5,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Sexism,
        Category::Racism,
        Category::RegionalBias,
        Category::AntiLgbtq,
        Category::General,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Category::ALL.get(usize::from(id).checked_sub(1)?).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Sexism => "sexism",
            Category::Racism => "racism",
            Category::RegionalBias => "regional_bias",
            Category::AntiLgbtq => "anti_lgbtq",
            Category::General => "general",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Category::ALL.into_iter().find(|c| c.name() == s)
    }

    /// The targeted group, if this is not the general category.
    pub fn group(self) -> Option<Group> {
        match self {
            Category::Sexism => Some(Group::Sexism),
            Category::Racism => Some(Group::Racism),
            Category::RegionalBias => Some(Group::RegionalBias),
            Category::AntiLgbtq => Some(Group::AntiLgbtq),
            Category::General => None,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Surface {
    Explicit,
    Implicit,
}

impl Surface {
    pub fn name(self) -> &'static str {
        match self {
            Surface::Explicit => "explicit",
            Surface::Implicit => "implicit",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "explicit" => Some(Surface::Explicit),
            "implicit" => Some(Surface::Implicit),
            _ => None,
        }
    }
}

/// How an insult was derived from more basic vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleTag {
    None,
    Deformation,
    Homophonic,
    Irony,
    Abbreviation,
    Metaphor,
    CodeMixing,
    BorrowedWord,
}

impl RuleTag {
    pub const ALL: [RuleTag; 8] = [
        RuleTag::None,
        RuleTag::Deformation,
        RuleTag::Homophonic,
        RuleTag::Irony,
        RuleTag::Abbreviation,
        RuleTag::Metaphor,
        RuleTag::CodeMixing,
        RuleTag::BorrowedWord,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RuleTag::None => "none",
            RuleTag::Deformation => "deformation",
            RuleTag::Homophonic => "homophonic",
            RuleTag::Irony => "irony",
            RuleTag::Abbreviation => "abbreviation",
            RuleTag::Metaphor => "metaphor",
            RuleTag::CodeMixing => "code_mixing",
            RuleTag::BorrowedWord => "borrowed_word",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        RuleTag::ALL.into_iter().find(|r| r.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InsultEntry {
    pub term: String,
    pub category: Category,
    pub surface: Surface,
    pub rule_tag: RuleTag,
}

impl InsultEntry {
    pub fn new(term: impl Into<String>, category: Category, surface: Surface, rule_tag: RuleTag) -> Self {
        InsultEntry {
            term: term.into(),
            category,
            surface,
            rule_tag,
        }
    }

    pub fn to_tsv(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}",
            self.term,
            self.category.name(),
            self.surface.name(),
            self.rule_tag.name()
        )
    }
}

/// One occurrence of a lexicon term in a text, in character offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LexiconMatch {
    pub start: usize,
    /// Exclusive.
    pub end: usize,
    /// Index into [`Lexicon::entries`].
    pub entry: usize,
}

impl LexiconMatch {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// An immutable set of insult entries with a multi-pattern search index.
#[derive(Debug, Clone)]
pub struct Lexicon {
    entries: Vec<InsultEntry>,
    by_term: HashMap<String, usize>,
    matcher: AhoCorasick,
}

impl Lexicon {
    pub fn empty() -> Self {
        Lexicon::from_entries(Vec::new()).expect("empty lexicon is valid")
    }

    /// Builds a lexicon. Terms are normalized first; empty or duplicate
    /// terms are rejected.
    pub fn from_entries(entries: Vec<InsultEntry>) -> Result<Self> {
        Self::build(entries.into_iter().enumerate().map(|(i, e)| (i + 1, e)), "<entries>")
    }

    fn build(rows: impl Iterator<Item = (usize, InsultEntry)>, source: &str) -> Result<Self> {
        let cfg = NormalizeConfig::default();
        let mut entries = Vec::new();
        let mut by_term = HashMap::new();
        for (line, mut entry) in rows {
            entry.term = normalize_text(&entry.term, &cfg);
            if entry.term.is_empty() {
                return Err(Error::resource(source, line, "empty term after normalization"));
            }
            if by_term.contains_key(&entry.term) {
                return Err(Error::resource(
                    source,
                    line,
                    format!("duplicate term {:?}", entry.term),
                ));
            }
            by_term.insert(entry.term.clone(), entries.len());
            entries.push(entry);
        }
        let matcher = AhoCorasick::builder()
            .match_kind(MatchKind::Standard)
            .build(entries.iter().map(|e| e.term.as_str()))
            .map_err(|e| Error::Model(format!("cannot build matcher: {e}")))?;
        Ok(Lexicon {
            entries,
            by_term,
            matcher,
        })
    }

    /// Parses the TSV format: `term<TAB>category<TAB>surface<TAB>rule_tag`,
    /// `#` comment lines and blank lines ignored, no header.
    pub fn parse_tsv(content: &str, source: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in content.lines().enumerate() {
            let lineno = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            rows.push((lineno, parse_row(line, source, lineno)?));
        }
        Self::build(rows.into_iter(), source)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_tsv(&content, &path.display().to_string())
    }

    /// The seed lexicon shipped with the crate.
    pub fn builtin() -> Self {
        Self::parse_tsv(BUILTIN_LEXICON, "builtin lexicon").expect("builtin lexicon is valid")
    }

    pub fn entries(&self) -> &[InsultEntry] {
        &self.entries
    }

    pub fn entry(&self, index: usize) -> &InsultEntry {
        &self.entries[index]
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, term: &str) -> bool {
        self.by_term.contains_key(term)
    }

    pub fn get(&self, term: &str) -> Option<&InsultEntry> {
        self.by_term.get(term).map(|&i| &self.entries[i])
    }

    /// A new lexicon with `extra` appended. Fails on duplicates.
    pub fn extended(&self, extra: impl IntoIterator<Item = InsultEntry>) -> Result<Self> {
        let entries: Vec<InsultEntry> = self.entries.iter().cloned().chain(extra).collect();
        Self::from_entries(entries)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.to_tsv());
            out.push('\n');
        }
        out
    }
}

fn parse_row(line: &str, source: &str, lineno: usize) -> Result<InsultEntry> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 4 {
        return Err(Error::resource(
            source,
            lineno,
            format!("expected 4 tab-separated columns, found {}", cols.len()),
        ));
    }
    let category = Category::from_name(cols[1].trim())
        .ok_or_else(|| Error::resource(source, lineno, format!("unknown category {:?}", cols[1])))?;
    let surface = Surface::from_name(cols[2].trim())
        .ok_or_else(|| Error::resource(source, lineno, format!("unknown surface {:?}", cols[2])))?;
    let rule_tag = RuleTag::from_name(cols[3].trim())
        .ok_or_else(|| Error::resource(source, lineno, format!("unknown rule tag {:?}", cols[3])))?;
    Ok(InsultEntry::new(cols[0], category, surface, rule_tag))
}

/// A reviewed-term row: either a full lexicon row or a bare term, which
/// becomes an explicit general insult.
pub(crate) fn parse_accept_row(line: &str, source: &str, lineno: usize) -> Result<InsultEntry> {
    if line.contains('\t') {
        parse_row(line, source, lineno)
    } else {
        Ok(InsultEntry::new(line.trim(), Category::General, Surface::Explicit, RuleTag::None))
    }
}

/// Every occurrence of every term (overlaps included), sorted by start
/// ascending, then length descending, then entry index.
pub fn find_matches(text: &str, lex: &Lexicon) -> Vec<LexiconMatch> {
    if text.is_empty() || lex.is_empty() {
        return Vec::new();
    }
    // byte offset -> char offset, valid at char boundaries
    let mut char_at = vec![0usize; text.len() + 1];
    let mut n = 0;
    for (b, _) in text.char_indices() {
        char_at[b] = n;
        n += 1;
    }
    char_at[text.len()] = n;

    let mut out: Vec<LexiconMatch> = lex
        .matcher
        .find_overlapping_iter(text)
        .map(|m| LexiconMatch {
            start: char_at[m.start()],
            end: char_at[m.end()],
            entry: m.pattern().as_usize(),
        })
        .collect();
    out.sort_by(|a, b| {
        a.start
            .cmp(&b.start)
            .then(b.len().cmp(&a.len()))
            .then(a.entry.cmp(&b.entry))
    });
    out
}

/// Category id (0..=5) for each character of `text`: the category of the
/// longest match covering it, ties going to the smaller id; 0 if uncovered.
pub fn token_category(text: &str, lex: &Lexicon) -> Vec<u8> {
    let n = text.chars().count();
    let mut best: Vec<(usize, u8)> = vec![(0, NON_TOXIC); n];
    for m in find_matches(text, lex) {
        let cat = lex.entry(m.entry).category.id();
        let len = m.len();
        for slot in &mut best[m.start..m.end] {
            if len > slot.0 || (len == slot.0 && cat < slot.1) {
                *slot = (len, cat);
            }
        }
    }
    best.into_iter().map(|(_, c)| c).collect()
}

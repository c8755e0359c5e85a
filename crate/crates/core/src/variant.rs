//! Surface-feature derivation rules for insult variants: homophones,
//! pinyin-initial abbreviations, code mixing and glyph deformation.
//!
//! Candidates are proposals for review; nothing here edits a lexicon.
//! Irony, metaphor and borrowed words are semantic classes that only exist
//! as [`RuleTag`](crate::lexicon::RuleTag)s on curated entries.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BUILTIN_PINYIN: &str = include_str!("../resources/pinyin.tsv");
const BUILTIN_GLYPH: &str = include_str!("../resources/glyph.tsv");

fn data_lines(content: &str) -> impl Iterator<Item = (usize, &str)> {
    content
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

fn single_char(s: &str) -> Option<char> {
    let mut it = s.chars();
    match (it.next(), it.next()) {
        (Some(c), None) => Some(c),
        _ => None,
    }
}

/// Character to toneless pinyin syllables. The first syllable is the
/// common reading.
#[derive(Debug, Clone, Default)]
pub struct PinyinTable {
    map: HashMap<char, Vec<String>>,
}

impl PinyinTable {
    /// Parses `char<TAB>syllable[,syllable...]` rows.
    pub fn parse_tsv(content: &str, source: &str) -> Result<Self> {
        let mut map = HashMap::new();
        for (line, row) in data_lines(content) {
            let (ch, syls) = row
                .split_once('\t')
                .ok_or_else(|| Error::resource(source, line, "expected char<TAB>syllables"))?;
            let ch = single_char(ch.trim())
                .ok_or_else(|| Error::resource(source, line, format!("{ch:?} is not a single character")))?;
            let syllables: Vec<String> = syls.split(',').map(|s| s.trim().to_string()).collect();
            if syllables
                .iter()
                .any(|s| s.is_empty() || !s.bytes().all(|b| b.is_ascii_lowercase()))
            {
                return Err(Error::resource(
                    source,
                    line,
                    "syllables must be non-empty lowercase ASCII",
                ));
            }
            if map.insert(ch, syllables).is_some() {
                return Err(Error::resource(source, line, format!("duplicate character {ch}")));
            }
        }
        Ok(PinyinTable { map })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_tsv(&content, &path.display().to_string())
    }

    pub fn builtin() -> Self {
        Self::parse_tsv(BUILTIN_PINYIN, "builtin pinyin table").expect("builtin pinyin table is valid")
    }

    pub fn syllables(&self, c: char) -> Option<&[String]> {
        self.map.get(&c).map(Vec::as_slice)
    }

    pub fn contains(&self, c: char) -> bool {
        self.map.contains_key(&c)
    }

    /// All characters in the table, in code point order.
    pub fn chars(&self) -> Vec<char> {
        let mut v: Vec<char> = self.map.keys().copied().collect();
        v.sort_unstable();
        v
    }

    fn shares_syllable(&self, a: char, b: char) -> bool {
        match (self.map.get(&a), self.map.get(&b)) {
            (Some(x), Some(y)) => x.iter().any(|s| y.contains(s)),
            _ => false,
        }
    }
}

/// Character to ordered glyph components.
#[derive(Debug, Clone, Default)]
pub struct GlyphTable {
    map: BTreeMap<char, Vec<char>>,
}

impl GlyphTable {
    /// Parses `char<TAB>component[+component...]` rows and rejects cycles.
    pub fn parse_tsv(content: &str, source: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        let mut lines = HashMap::new();
        for (line, row) in data_lines(content) {
            let (ch, comps) = row
                .split_once('\t')
                .ok_or_else(|| Error::resource(source, line, "expected char<TAB>components"))?;
            let ch = single_char(ch.trim())
                .ok_or_else(|| Error::resource(source, line, format!("{ch:?} is not a single character")))?;
            let components = comps
                .split('+')
                .map(|c| single_char(c.trim()))
                .collect::<Option<Vec<char>>>()
                .ok_or_else(|| Error::resource(source, line, "components must be single characters"))?;
            if map.insert(ch, components).is_some() {
                return Err(Error::resource(source, line, format!("duplicate character {ch}")));
            }
            lines.insert(ch, line);
        }
        let table = GlyphTable { map };
        if let Some(ch) = table.find_cycle() {
            return Err(Error::resource(source, lines[&ch], format!("cyclic decomposition through {ch}")));
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_tsv(&content, &path.display().to_string())
    }

    pub fn builtin() -> Self {
        Self::parse_tsv(BUILTIN_GLYPH, "builtin glyph table").expect("builtin glyph table is valid")
    }

    pub fn entries(&self) -> impl Iterator<Item = (char, &[char])> {
        self.map.iter().map(|(c, v)| (*c, v.as_slice()))
    }

    fn find_cycle(&self) -> Option<char> {
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state: HashMap<char, u8> = HashMap::new();
        fn visit(t: &GlyphTable, c: char, state: &mut HashMap<char, u8>) -> Option<char> {
            match state.get(&c) {
                Some(1) => return Some(c),
                Some(2) => return None,
                _ => {}
            }
            state.insert(c, 1);
            if let Some(comps) = t.map.get(&c) {
                for &k in comps {
                    if let Some(hit) = visit(t, k, state) {
                        return Some(hit);
                    }
                }
            }
            state.insert(c, 2);
            None
        }
        self.map.keys().find_map(|&c| visit(self, c, &mut state))
    }
}

/// Generative derivation rules. Semantic classes are deliberately absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantRule {
    Homophonic,
    Abbreviation,
    CodeMixing,
    Deformation,
}

impl VariantRule {
    pub fn name(self) -> &'static str {
        match self {
            VariantRule::Homophonic => "homophonic",
            VariantRule::Abbreviation => "abbreviation",
            VariantRule::CodeMixing => "code_mixing",
            VariantRule::Deformation => "deformation",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "homophonic" => Some(VariantRule::Homophonic),
            "abbreviation" => Some(VariantRule::Abbreviation),
            "code_mixing" => Some(VariantRule::CodeMixing),
            "deformation" => Some(VariantRule::Deformation),
            _ => None,
        }
    }
}

impl fmt::Display for VariantRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantCandidate {
    pub variant: String,
    pub source_term: String,
    pub rule: VariantRule,
    pub note: String,
}

fn unmapped(c: char) -> Error {
    Error::InvalidInput(format!("character {c:?} is missing from the pinyin table"))
}

/// Variants of `term` that replace at least one character with a pool
/// character sharing a toneless syllable. Output order is deterministic.
pub fn gen_homophones(
    term: &str,
    table: &PinyinTable,
    pool: impl IntoIterator<Item = char>,
) -> Result<Vec<VariantCandidate>> {
    let chars: Vec<char> = term.chars().collect();
    if let Some(&c) = chars.iter().find(|c| !table.contains(**c)) {
        return Err(unmapped(c));
    }
    let pool: BTreeSet<char> = pool.into_iter().collect();
    let options: Vec<Vec<char>> = chars
        .iter()
        .map(|&c| {
            std::iter::once(c)
                .chain(pool.iter().copied().filter(|&p| p != c && table.shares_syllable(c, p)))
                .collect()
        })
        .collect();

    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    let mut pick = vec![0usize; chars.len()];
    loop {
        if pick.iter().any(|&p| p != 0) {
            let variant: String = pick.iter().zip(&options).map(|(&p, o)| o[p]).collect();
            if seen.insert(variant.clone()) {
                let note = pick
                    .iter()
                    .zip(&options)
                    .enumerate()
                    .filter(|(_, (&p, _))| p != 0)
                    .map(|(i, (&p, o))| {
                        format!("{}->{} ({})", chars[i], o[p], table.syllables(o[p]).map(|s| s.join("/")).unwrap_or_default())
                    })
                    .collect::<Vec<_>>()
                    .join(", ");
                out.push(VariantCandidate {
                    variant,
                    source_term: term.to_string(),
                    rule: VariantRule::Homophonic,
                    note,
                });
            }
        }
        // odometer increment
        let mut pos = chars.len();
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            pick[pos] += 1;
            if pick[pos] < options[pos].len() {
                break;
            }
            pick[pos] = 0;
        }
    }
}

/// Pinyin-initial abbreviation: the first letter of each character's first
/// syllable, e.g. 同性恋 -> txl.
pub fn gen_abbreviation(term: &str, table: &PinyinTable) -> Result<VariantCandidate> {
    if term.is_empty() {
        return Err(Error::InvalidInput("empty term".into()));
    }
    let mut variant = String::new();
    let mut readings = Vec::new();
    for c in term.chars() {
        let syl = table
            .syllables(c)
            .and_then(|s| s.first())
            .ok_or_else(|| unmapped(c))?;
        variant.push(syl.chars().next().expect("syllables are non-empty"));
        readings.push(syl.as_str());
    }
    Ok(VariantCandidate {
        variant,
        source_term: term.to_string(),
        rule: VariantRule::Abbreviation,
        note: readings.join(" "),
    })
}

/// Code-mixed variants: one character at a time replaced by its common
/// syllable spelled in Latin letters, e.g. 尼哥 -> ni哥.
pub fn gen_code_mixing(term: &str, table: &PinyinTable) -> Result<Vec<VariantCandidate>> {
    let chars: Vec<char> = term.chars().collect();
    let mut out = Vec::new();
    for (i, &c) in chars.iter().enumerate() {
        if script_of(c) != Script::Cjk {
            continue;
        }
        let syl = table
            .syllables(c)
            .and_then(|s| s.first())
            .ok_or_else(|| unmapped(c))?;
        let variant: String = chars[..i]
            .iter()
            .collect::<String>()
            + syl
            + &chars[i + 1..].iter().collect::<String>();
        if variant != term {
            out.push(VariantCandidate {
                variant,
                source_term: term.to_string(),
                rule: VariantRule::CodeMixing,
                note: format!("{c}->{syl}"),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Script {
    /// Latin letters and digits.
    Latin,
    Cjk,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptRun {
    pub script: Script,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeMixing {
    pub mixed: bool,
    pub runs: Vec<ScriptRun>,
}

pub fn is_cjk_ideograph(c: char) -> bool {
    matches!(c as u32,
        0x4E00..=0x9FFF
        | 0x3400..=0x4DBF
        | 0xF900..=0xFAFF
        | 0x20000..=0x2A6DF
        | 0x2A700..=0x2EBEF
        | 0x30000..=0x323AF)
}

fn is_latin(c: char) -> bool {
    c.is_ascii_alphanumeric() || (c.is_alphabetic() && ('\u{00C0}'..='\u{024F}').contains(&c))
}

pub fn script_of(c: char) -> Script {
    if is_latin(c) {
        Script::Latin
    } else if is_cjk_ideograph(c) {
        Script::Cjk
    } else {
        Script::Other
    }
}

/// Splits `token` into maximal same-script runs; mixed when both Latin
/// (letters or digits) and CJK runs are present.
pub fn detect_code_mixing(token: &str) -> CodeMixing {
    let mut runs: Vec<ScriptRun> = Vec::new();
    for c in token.chars() {
        let script = script_of(c);
        match runs.last_mut() {
            Some(run) if run.script == script => run.text.push(c),
            _ => runs.push(ScriptRun {
                script,
                text: c.to_string(),
            }),
        }
    }
    let has = |s| runs.iter().any(|r| r.script == s);
    CodeMixing {
        mixed: has(Script::Latin) && has(Script::Cjk),
        runs,
    }
}

/// Result of a glyph table lookup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Deformation {
    Covered(Vec<char>),
    NotCovered(String),
}

impl Deformation {
    /// The looked-up characters, empty when not covered.
    pub fn chars(&self) -> &[char] {
        match self {
            Deformation::Covered(v) => v,
            Deformation::NotCovered(_) => &[],
        }
    }

    pub fn is_covered(&self) -> bool {
        matches!(self, Deformation::Covered(_))
    }
}

/// Ordered glyph components of `ch`.
pub fn expand_deformation(ch: char, table: &GlyphTable) -> Deformation {
    match table.map.get(&ch) {
        Some(c) => Deformation::Covered(c.clone()),
        None => Deformation::NotCovered(format!("{ch} is not covered by the glyph table")),
    }
}

/// Every table character whose component list equals `components`.
pub fn compose_deformation(components: &[char], table: &GlyphTable) -> Deformation {
    let hits: Vec<char> = table
        .map
        .iter()
        .filter(|(_, v)| v.as_slice() == components)
        .map(|(c, _)| *c)
        .collect();
    if hits.is_empty() {
        let s: String = components.iter().collect();
        Deformation::NotCovered(format!("no character is composed of {s}"))
    } else {
        Deformation::Covered(hits)
    }
}

/// Deformation variants of `term`: each covered character split into its
/// components, and each run of adjacent characters that composes into a
/// single table character merged.
pub fn gen_deformations(term: &str, table: &GlyphTable) -> Vec<VariantCandidate> {
    let chars: Vec<char> = term.chars().collect();
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    let mut push = |variant: String, note: String, out: &mut Vec<VariantCandidate>| {
        if variant != term && seen.insert(variant.clone()) {
            out.push(VariantCandidate {
                variant,
                source_term: term.to_string(),
                rule: VariantRule::Deformation,
                note,
            });
        }
    };
    for (i, &c) in chars.iter().enumerate() {
        if let Deformation::Covered(comps) = expand_deformation(c, table) {
            let variant: String = chars[..i].iter().chain(&comps).chain(&chars[i + 1..]).collect();
            let note = format!("{c}->{}", comps.iter().collect::<String>());
            push(variant, note, &mut out);
        }
    }
    for (&target, comps) in &table.map {
        let k = comps.len();
        if k == 0 || k > chars.len() {
            continue;
        }
        for i in 0..=chars.len() - k {
            if chars[i..i + k] == comps[..] {
                let variant: String = chars[..i]
                    .iter()
                    .chain(std::iter::once(&target))
                    .chain(&chars[i + k..])
                    .collect();
                let note = format!("{}->{target}", comps.iter().collect::<String>());
                push(variant, note, &mut out);
            }
        }
    }
    out
}

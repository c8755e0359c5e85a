//! Lexicon-driven pseudo-labeling with reviewed lexicon growth.
//!
//! A round labels every document containing at least one lexicon term as
//! toxic, then ranks character n-grams that are frequent in the toxic side
//! and rare in the clean side. Only candidates a reviewer put on the accept
//! list are added; rounds repeat until nothing new is accepted.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::{
    find_matches, parse_accept_row, InsultEntry, Lexicon, LexiconMatch,
};
use crate::normalize::{is_content_char, normalize_text, NormalizeConfig};

/// A text to be pseudo-labeled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: u64,
    pub text: String,
}

impl Document {
    pub fn new(id: u64, text: impl Into<String>) -> Self {
        Document {
            id,
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PseudoLabel {
    Toxic,
    NonToxic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PseudoLabeledSample {
    pub id: u64,
    pub pseudo_label: PseudoLabel,
    pub matches: Vec<LexiconMatch>,
}

impl PseudoLabeledSample {
    pub fn is_toxic(&self) -> bool {
        self.pseudo_label == PseudoLabel::Toxic
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateTerm {
    pub term: String,
    /// Number of pseudo-toxic documents containing the term.
    pub toxic_freq: usize,
    /// Number of pseudo-non-toxic documents containing the term.
    pub clean_freq: usize,
    /// `(toxic_freq + 1) / (clean_freq + 1)`.
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateParams {
    pub min_freq: usize,
    pub min_score: f64,
    pub max_n: usize,
}

impl Default for CandidateParams {
    fn default() -> Self {
        CandidateParams {
            min_freq: 3,
            min_score: 3.0,
            max_n: 4,
        }
    }
}

/// Toxic iff the document contains at least one lexicon term.
pub fn pseudo_label(docs: &[Document], lex: &Lexicon) -> Vec<PseudoLabeledSample> {
    docs.iter()
        .map(|d| {
            let matches = find_matches(&d.text, lex);
            PseudoLabeledSample {
                id: d.id,
                pseudo_label: if matches.is_empty() {
                    PseudoLabel::NonToxic
                } else {
                    PseudoLabel::Toxic
                },
                matches,
            }
        })
        .collect()
}

/// Distinct candidate n-grams of one document: content characters only,
/// not a lexicon term, and not lying entirely inside an existing match.
fn doc_ngrams(text: &str, matches: &[LexiconMatch], lex: &Lexicon, max_n: usize) -> HashSet<String> {
    let chars: Vec<char> = text.chars().collect();
    // reach[s] = furthest end among matches starting at or before s
    let mut reach = vec![0usize; chars.len()];
    let mut best = 0;
    let mut mi = 0;
    for (s, slot) in reach.iter_mut().enumerate() {
        while mi < matches.len() && matches[mi].start <= s {
            best = best.max(matches[mi].end);
            mi += 1;
        }
        *slot = best;
    }

    let mut out = HashSet::new();
    for s in 0..chars.len() {
        for n in 1..=max_n.min(chars.len() - s) {
            if !is_content_char(chars[s + n - 1]) {
                break;
            }
            if reach[s] >= s + n {
                continue;
            }
            let gram: String = chars[s..s + n].iter().collect();
            if !lex.contains(&gram) {
                out.insert(gram);
            }
        }
    }
    out
}

/// Ranks new insult candidates: n-grams (1..=max_n chars) with
/// `toxic_freq >= min_freq` and `score >= min_score`, ordered by score,
/// then toxic frequency (both descending), then term.
pub fn extract_candidates(
    labeled: &[PseudoLabeledSample],
    docs: &[Document],
    lex: &Lexicon,
    params: &CandidateParams,
) -> Vec<CandidateTerm> {
    assert_eq!(labeled.len(), docs.len(), "labels and documents must align");
    let mut counts: HashMap<String, (usize, usize)> = HashMap::new();
    for (label, doc) in labeled.iter().zip(docs) {
        for gram in doc_ngrams(&doc.text, &label.matches, lex, params.max_n.max(1)) {
            let c = counts.entry(gram).or_default();
            if label.is_toxic() {
                c.0 += 1;
            } else {
                c.1 += 1;
            }
        }
    }
    let mut out: Vec<CandidateTerm> = counts
        .into_iter()
        .filter(|(_, (t, _))| *t >= params.min_freq)
        .map(|(term, (toxic_freq, clean_freq))| CandidateTerm {
            term,
            toxic_freq,
            clean_freq,
            score: (toxic_freq as f64 + 1.0) / (clean_freq as f64 + 1.0),
        })
        .filter(|c| c.score >= params.min_score)
        .collect();
    out.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(b.toxic_freq.cmp(&a.toxic_freq))
            .then(a.term.cmp(&b.term))
    });
    out
}

pub fn candidates_to_tsv(cands: &[CandidateTerm]) -> String {
    let mut out = String::from("term\ttoxic_freq\tclean_freq\tscore\n");
    for c in cands {
        out.push_str(&format!("{}\t{}\t{}\t{:.4}\n", c.term, c.toxic_freq, c.clean_freq, c.score));
    }
    out
}

/// Reviewer-approved terms, keyed by normalized term.
#[derive(Debug, Clone, Default)]
pub struct AcceptList {
    entries: BTreeMap<String, InsultEntry>,
}

impl AcceptList {
    /// Each non-comment line is either a bare term (entered as an explicit
    /// general insult) or a full lexicon row.
    pub fn parse(content: &str, source: &str) -> Result<Self> {
        let cfg = NormalizeConfig::default();
        let mut entries = BTreeMap::new();
        for (i, line) in content.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut entry = parse_accept_row(line, source, i + 1)?;
            entry.term = normalize_text(&entry.term, &cfg);
            if entry.term.is_empty() {
                return Err(Error::resource(source, i + 1, "empty term"));
            }
            entries.insert(entry.term.clone(), entry);
        }
        Ok(AcceptList { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&content, &path.display().to_string())
    }

    pub fn from_entries(entries: impl IntoIterator<Item = InsultEntry>) -> Self {
        AcceptList {
            entries: entries.into_iter().map(|e| (e.term.clone(), e)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, term: &str) -> Option<&InsultEntry> {
        self.entries.get(term)
    }
}

#[derive(Debug, Clone)]
pub struct FixpointResult {
    pub lexicon: Lexicon,
    pub labels: Vec<PseudoLabeledSample>,
    /// Labeling rounds run, including the final one that added nothing.
    pub iterations: usize,
    /// Pseudo-toxic count after each round.
    pub toxic_counts: Vec<usize>,
    /// Terms added after each round (the last entry is always empty).
    pub added: Vec<Vec<String>>,
    /// Candidates of the final round.
    pub candidates: Vec<CandidateTerm>,
}

/// Repeats label / extract / accept until no accepted candidate is new.
/// Terminates because the lexicon only grows and is bounded by the accept
/// list.
pub fn iterate_to_fixpoint(
    docs: &[Document],
    seed_lex: &Lexicon,
    accept: &AcceptList,
    params: &CandidateParams,
) -> Result<FixpointResult> {
    let mut lex = seed_lex.clone();
    let mut toxic_counts = Vec::new();
    let mut added = Vec::new();
    loop {
        let labels = pseudo_label(docs, &lex);
        toxic_counts.push(labels.iter().filter(|l| l.is_toxic()).count());
        let candidates = extract_candidates(&labels, docs, &lex, params);
        let new: Vec<InsultEntry> = candidates
            .iter()
            .filter(|c| !lex.contains(&c.term))
            .filter_map(|c| accept.get(&c.term).cloned())
            .collect();
        added.push(new.iter().map(|e| e.term.clone()).collect());
        if new.is_empty() {
            return Ok(FixpointResult {
                lexicon: lex,
                labels,
                iterations: toxic_counts.len(),
                toxic_counts,
                added,
                candidates,
            });
        }
        lex = lex.extended(new)?;
    }
}

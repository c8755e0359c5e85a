//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use toxicn_core::lexicon::{Lexicon, LexiconMatch};

/// Every occurrence by direct comparison at every position.
pub fn naive_matches(text: &str, lex: &Lexicon) -> BTreeSet<LexiconMatch> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = BTreeSet::new();
    for (e, entry) in lex.entries().iter().enumerate() {
        let term: Vec<char> = entry.term.chars().collect();
        for s in 0..chars.len() {
            if chars[s..].starts_with(&term) {
                out.insert(LexiconMatch { start: s, end: s + term.len(), entry: e });
            }
        }
    }
    out
}

/// Kappa from explicit rater pairs: observed agreement is the share of
/// agreeing ordered pairs of distinct raters, chance agreement the
/// probability two random ratings coincide.
pub fn kappa_oracle(rows: &[Vec<u32>]) -> f64 {
    let mut agree_pairs = 0u64;
    let mut pairs = 0u64;
    let k = rows[0].len();
    let mut totals = vec![0u64; k];
    let mut ratings = 0u64;
    for row in rows {
        let labels: Vec<usize> = row.iter().enumerate().flat_map(|(j, &c)| std::iter::repeat_n(j, c as usize)).collect();
        for a in 0..labels.len() {
            for b in 0..labels.len() {
                if a != b {
                    pairs += 1;
                    agree_pairs += u64::from(labels[a] == labels[b]);
                }
            }
            totals[labels[a]] += 1;
            ratings += 1;
        }
    }
    let po = agree_pairs as f64 / pairs as f64;
    let pe: f64 = totals.iter().map(|&t| (t as f64 / ratings as f64).powi(2)).sum();
    (po - pe) / (1.0 - pe)
}


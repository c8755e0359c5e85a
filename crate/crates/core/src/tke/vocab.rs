use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;

/// Character vocabulary. Ids 0 and 1 are reserved for padding and unknown
/// characters; the rest follow frequency (descending), then code point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<char>", into = "Vec<char>")]
pub struct Vocab {
    chars: Vec<char>,
    index: HashMap<char, u32>,
}

impl From<Vec<char>> for Vocab {
    fn from(chars: Vec<char>) -> Self {
        let index = chars
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, i as u32 + 2))
            .collect();
        Vocab { chars, index }
    }
}

impl From<Vocab> for Vec<char> {
    fn from(v: Vocab) -> Self {
        v.chars
    }
}

impl Vocab {
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut freq: HashMap<char, usize> = HashMap::new();
        let mut any = false;
        for t in texts {
            any = true;
            for c in t.chars() {
                *freq.entry(c).or_default() += 1;
            }
        }
        if !any {
            return Err(Error::InvalidInput("cannot build a vocabulary from an empty corpus".into()));
        }
        let mut ranked: Vec<(char, usize)> = freq.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        Ok(Vocab::from(ranked.into_iter().map(|(c, _)| c).collect::<Vec<_>>()))
    }

    /// Number of ids including the two reserved ones.
    pub fn len(&self) -> usize {
        self.chars.len() + 2
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn id(&self, c: char) -> u32 {
        self.index.get(&c).copied().unwrap_or(UNK_ID)
    }

    pub fn char_of(&self, id: u32) -> Option<char> {
        (id as usize).checked_sub(2).and_then(|i| self.chars.get(i)).copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_by_frequency() {
        let v = Vocab::build(["aa", "ab"]).unwrap();
        assert_eq!(v.len(), 4);
        assert_eq!((v.id('a'), v.id('b')), (2, 3));
        assert_eq!(v.id('z'), UNK_ID);
        assert_eq!(v.char_of(3), Some('b'));
        assert_eq!(v, Vocab::build(["aa", "ab"]).unwrap());
    }

    #[test]
    fn ties_by_code_point() {
        let v = Vocab::build(["ba"]).unwrap();
        assert_eq!((v.id('a'), v.id('b')), (2, 3));
    }

    #[test]
    fn empty_corpus_errors() {
        assert!(Vocab::build(std::iter::empty::<&str>()).is_err());
    }
}

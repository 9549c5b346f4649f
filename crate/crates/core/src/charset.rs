use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered character inventory; a label token is an index into it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<char>", into = "Vec<char>")]
pub struct Charset {
    chars: Vec<char>,
    index: HashMap<char, usize>,
}

impl Charset {
    pub fn new(chars: Vec<char>) -> Result<Self> {
        let mut index = HashMap::with_capacity(chars.len());
        for (i, &c) in chars.iter().enumerate() {
            if index.insert(c, i).is_some() {
                return Err(Error::Config(format!("duplicate character {c:?} in charset")));
            }
        }
        Ok(Self { chars, index })
    }

    /// Every distinct character of `lines`, in code point order.
    pub fn from_lines<'a>(lines: impl IntoIterator<Item = &'a str>) -> Self {
        let set: BTreeSet<char> = lines.into_iter().flat_map(str::chars).collect();
        Self::new(set.into_iter().collect()).expect("set is duplicate-free")
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn index_of(&self, c: char) -> Option<usize> {
        self.index.get(&c).copied()
    }

    pub fn char_at(&self, i: usize) -> Option<char> {
        self.chars.get(i).copied()
    }

    /// Token indices for `text`; `line` is only used in the error.
    pub fn encode(&self, text: &str, line: usize) -> Result<Vec<usize>> {
        text.chars()
            .map(|ch| self.index_of(ch).ok_or(Error::Encode { ch, line }))
            .collect()
    }

    pub fn decode(&self, tokens: &[usize]) -> String {
        tokens.iter().filter_map(|&t| self.char_at(t)).collect()
    }
}

impl TryFrom<Vec<char>> for Charset {
    type Error = Error;

    fn try_from(chars: Vec<char>) -> Result<Self> {
        Self::new(chars)
    }
}

impl From<Charset> for Vec<char> {
    fn from(c: Charset) -> Self {
        c.chars
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_lines_is_sorted_and_unique() {
        let cs = Charset::from_lines(["ba", "ab c"]);
        assert_eq!(cs.chars(), &[' ', 'a', 'b', 'c']);
        assert_eq!(cs.encode("cab", 0).unwrap(), vec![3, 1, 2]);
        assert_eq!(cs.decode(&[2, 1]), "ba");
    }

    #[test]
    fn unknown_character_named() {
        let cs = Charset::from_lines(["ab"]);
        let err = cs.encode("az", 7).unwrap_err();
        assert!(matches!(err, Error::Encode { ch: 'z', line: 7 }));
    }

    #[test]
    fn duplicates_rejected() {
        assert!(Charset::new(vec!['a', 'a']).is_err());
    }
}

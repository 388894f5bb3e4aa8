//! Fixed-width binary words: split addresses `u ∈ 2^{≤30}` and section leaves.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Longest word we ever pack into a `u32` (also the point-packing cap in bits).
pub const MAX_WORD_LEN: usize = 30;

/// A binary string of length ≤ [`MAX_WORD_LEN`].
///
/// Position 0 is the leftmost character of the rendered form; for words of
/// equal length the derived ordering coincides with lexicographic order.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Word {
    len: u8,
    bits: u32,
}

impl Word {
    pub const fn empty() -> Self {
        Word { len: 0, bits: 0 }
    }

    /// Builds a word from the low `len` bits of `bits` (bit `len-1-k` of
    /// `bits` is position `k` of the word).
    pub fn new(len: usize, bits: u32) -> Self {
        assert!(len <= MAX_WORD_LEN, "word length {len} exceeds cap");
        let mask = if len == 0 { 0 } else { u32::MAX >> (32 - len) };
        Word {
            len: len as u8,
            bits: bits & mask,
        }
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn raw(&self) -> u32 {
        self.bits
    }

    /// Bit at position `k` (0 = leftmost).
    pub fn bit(&self, k: usize) -> bool {
        assert!(k < self.len());
        self.bits >> (self.len() - 1 - k) & 1 == 1
    }

    pub fn last(&self) -> Option<bool> {
        if self.is_empty() {
            None
        } else {
            Some(self.bit(self.len() - 1))
        }
    }

    pub fn push(&self, e: bool) -> Word {
        Word::new(self.len() + 1, self.bits << 1 | e as u32)
    }

    /// The first `k` positions.
    pub fn prefix(&self, k: usize) -> Word {
        assert!(k <= self.len());
        Word::new(k, self.bits >> (self.len() - k))
    }

    /// Everything but the last position, with the last bit.
    pub fn split_last(&self) -> Option<(Word, bool)> {
        self.last().map(|e| (self.prefix(self.len() - 1), e))
    }

    pub fn is_prefix_of(&self, other: &Word) -> bool {
        self.len() <= other.len() && other.prefix(self.len()) == *self
    }

    pub fn bits_iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len()).map(move |k| self.bit(k))
    }

    /// All words of the given length in lexicographic order.
    pub fn all_of_len(len: usize) -> impl Iterator<Item = Word> {
        assert!(len <= MAX_WORD_LEN);
        (0..1u64 << len).map(move |b| Word::new(len, b as u32))
    }

    /// Longest common prefix of two equal-or-unequal length words.
    pub fn common_prefix(&self, other: &Word) -> Word {
        let max = self.len().min(other.len());
        let mut k = 0;
        while k < max && self.bit(k) == other.bit(k) {
            k += 1;
        }
        self.prefix(k)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.bits_iter() {
            write!(f, "{}", b as u8)?;
        }
        Ok(())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\"{self}\"")
    }
}

#[derive(Debug, thiserror::Error)]
#[error("invalid bit string {0:?}: expected only '0'/'1', length <= {MAX_WORD_LEN}")]
pub struct ParseWordError(pub String);

impl FromStr for Word {
    type Err = ParseWordError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() > MAX_WORD_LEN {
            return Err(ParseWordError(s.to_owned()));
        }
        let mut bits = 0u32;
        for c in s.chars() {
            match c {
                '0' => bits <<= 1,
                '1' => bits = bits << 1 | 1,
                _ => return Err(ParseWordError(s.to_owned())),
            }
        }
        Ok(Word::new(s.len(), bits))
    }
}

impl Serialize for Word {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_and_bits() {
        let w = Word::empty().push(true).push(false).push(true);
        assert_eq!(w.to_string(), "101");
        assert!(w.bit(0) && !w.bit(1) && w.bit(2));
        assert_eq!(w.prefix(2).to_string(), "10");
        assert_eq!(w.split_last(), Some((Word::new(2, 0b10), true)));
    }

    #[test]
    fn lex_order_matches_numeric_for_equal_lengths() {
        let words: Vec<Word> = Word::all_of_len(3).collect();
        let mut rendered: Vec<String> = words.iter().map(|w| w.to_string()).collect();
        let sorted = rendered.clone();
        rendered.sort();
        assert_eq!(rendered, sorted);
    }

    #[test]
    fn parse_round_trip() {
        for s in ["", "0", "1", "0110", "111111"] {
            let w: Word = s.parse().unwrap();
            assert_eq!(w.to_string(), s);
        }
        assert!("012".parse::<Word>().is_err());
    }

    #[test]
    fn common_prefix() {
        let a: Word = "0101".parse().unwrap();
        let b: Word = "0110".parse().unwrap();
        assert_eq!(a.common_prefix(&b).to_string(), "01");
        assert!(a.prefix(2).is_prefix_of(&a));
    }
}

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::Result;

pub const PAD_TOKEN: &str = "<PAD>";
pub const UNK_TOKEN: &str = "<UNK>";
pub const PAD_INDEX: usize = 0;
pub const UNK_INDEX: usize = 1;

/// Bidirectional token/index map with fixed PAD and UNK entries.
///
/// Corpus tokens are ordered by descending frequency, ties broken
/// lexicographically, so a vocabulary built from the same corpus is always
/// identical. Tokens are lowercased by the tokenizer, so they can never
/// collide with the mixed-case PAD/UNK markers.
#[derive(Clone, Debug)]
pub struct Vocabulary {
    token_to_index: HashMap<String, usize>,
    index_to_token: Vec<String>,
}

impl Vocabulary {
    fn from_ordered_tokens(tokens: impl IntoIterator<Item = String>) -> Self {
        let mut index_to_token = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        for t in tokens {
            if t != PAD_TOKEN && t != UNK_TOKEN {
                index_to_token.push(t);
            }
        }
        let token_to_index = index_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary {
            token_to_index,
            index_to_token,
        }
    }

    /// Build from (token, count) pairs.
    pub fn from_token_counts(counts: impl IntoIterator<Item = (String, usize)>) -> Self {
        let mut counts: Vec<(String, usize)> = counts.into_iter().collect();
        counts.sort_by(|(ta, ca), (tb, cb)| cb.cmp(ca).then_with(|| ta.cmp(tb)));
        Self::from_ordered_tokens(counts.into_iter().map(|(t, _)| t))
    }

    /// Build from a stream of tokens, counting frequencies.
    pub fn from_tokens<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let mut counts: HashMap<String, usize> = HashMap::new();
        for t in tokens {
            *counts.entry(t.to_string()).or_insert(0) += 1;
        }
        Self::from_token_counts(counts)
    }

    pub fn len(&self) -> usize {
        self.index_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        false // PAD and UNK are always present
    }

    /// Index of a token, or UNK for out-of-vocabulary tokens.
    pub fn index_of(&self, token: &str) -> usize {
        self.token_to_index.get(token).copied().unwrap_or(UNK_INDEX)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.token_to_index.contains_key(token)
    }

    pub fn token(&self, index: usize) -> &str {
        &self.index_to_token[index]
    }

    pub fn tokens(&self) -> &[String] {
        &self.index_to_token
    }

    /// One token per line; the line number is the index.
    pub fn write_file(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        for t in &self.index_to_token {
            writeln!(f, "{t}")?;
        }
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        let mut tokens = Vec::new();
        for line in BufReader::new(f).lines() {
            tokens.push(line?);
        }
        // The file starts with PAD and UNK written by write_file.
        Ok(Self::from_ordered_tokens(tokens.into_iter().skip(2)))
    }

    /// Rebuild from a checkpoint's token list (PAD and UNK included).
    pub fn from_full_token_list(tokens: Vec<String>) -> Self {
        debug_assert_eq!(tokens.first().map(String::as_str), Some(PAD_TOKEN));
        debug_assert_eq!(tokens.get(1).map(String::as_str), Some(UNK_TOKEN));
        Self::from_ordered_tokens(tokens.into_iter().skip(2))
    }

    /// Order-insensitive fingerprint of the token list, used to verify that a
    /// checkpoint and its inputs agree on the vocabulary.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for t in &self.index_to_token {
            for b in t.as_bytes() {
                h ^= *b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
            h ^= 0xff;
            h = h.wrapping_mul(0x100000001b3);
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pad_and_unk_have_fixed_indices() {
        let v = Vocabulary::from_tokens(["b", "a", "b"]);
        assert_eq!(v.index_of(PAD_TOKEN), PAD_INDEX);
        assert_eq!(v.index_of(UNK_TOKEN), UNK_INDEX);
    }

    #[test]
    fn ordering_is_frequency_then_lexicographic() {
        let v = Vocabulary::from_tokens(["b", "a", "b", "c", "a", "b"]);
        // b: 3, a: 2, c: 1
        assert_eq!(v.token(2), "b");
        assert_eq!(v.token(3), "a");
        assert_eq!(v.token(4), "c");

        let tie = Vocabulary::from_tokens(["z", "m", "a"]);
        assert_eq!(tie.token(2), "a");
        assert_eq!(tie.token(3), "m");
        assert_eq!(tie.token(4), "z");
    }

    #[test]
    fn unknown_tokens_map_to_unk() {
        let v = Vocabulary::from_tokens(["a"]);
        assert_eq!(v.index_of("nope"), UNK_INDEX);
    }

    #[test]
    fn bijection_between_map_and_list() {
        let v = Vocabulary::from_tokens(["x", "y", "z", "x"]);
        for i in 0..v.len() {
            assert_eq!(v.index_of(v.token(i)), i);
        }
    }

    #[test]
    fn file_round_trip() {
        let v = Vocabulary::from_tokens(["hello", "world", "hello"]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        v.write_file(&path).unwrap();
        let v2 = Vocabulary::read_file(&path).unwrap();
        assert_eq!(v.tokens(), v2.tokens());
        assert_eq!(v.hash(), v2.hash());
    }
}

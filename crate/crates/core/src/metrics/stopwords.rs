use std::collections::HashSet;
use std::path::Path;

use crate::error::Result;

/// Set of stop words; membership is exact string equality after lowercasing.
#[derive(Clone, Debug)]
pub struct StopwordList {
    words: HashSet<String>,
}

impl StopwordList {
    /// The bundled English list (one word per line, shipped with the crate).
    /// A different list, e.g. the full SMART list, can be loaded with
    /// [`StopwordList::from_file`].
    pub fn default_english() -> Self {
        Self::from_lines(include_str!("../../data/stopwords_en.txt"))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Ok(Self::from_lines(&std::fs::read_to_string(path)?))
    }

    fn from_lines(text: &str) -> Self {
        StopwordList {
            words: text
                .lines()
                .map(|l| l.trim().to_lowercase())
                .filter(|l| !l.is_empty())
                .collect(),
        }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(&token.to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

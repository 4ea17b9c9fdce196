//! Tokenization, vocabulary, pretrained embeddings, and padding/masking.

mod embeddings;
mod vocab;

pub use embeddings::{load_pretrained, read_pretrained_file, EmbeddingMatrix, PretrainedVectors};
pub use vocab::{Vocabulary, PAD_INDEX, PAD_TOKEN, UNK_INDEX, UNK_TOKEN};

/// Characters split off the edges of whitespace-separated pieces.
const EDGE_PUNCT: &[char] = &['.', ',', '!', '?', '\'', ';', ':', '"', '(', ')'];

/// Lowercase and split on whitespace, peeling leading and trailing
/// punctuation into separate tokens. Internal punctuation (as in "he's")
/// stays attached. A string with no non-whitespace content yields the single
/// token [`UNK_TOKEN`], so no utterance ever tokenizes to an empty list.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for piece in text.to_lowercase().split_whitespace() {
        let mut chars: Vec<char> = piece.chars().collect();
        let mut leading = Vec::new();
        while let Some(&c) = chars.first() {
            if EDGE_PUNCT.contains(&c) {
                leading.push(c);
                chars.remove(0);
            } else {
                break;
            }
        }
        let mut trailing = Vec::new();
        while let Some(&c) = chars.last() {
            if EDGE_PUNCT.contains(&c) {
                trailing.push(c);
                chars.pop();
            } else {
                break;
            }
        }
        tokens.extend(leading.into_iter().map(String::from));
        if !chars.is_empty() {
            tokens.push(chars.into_iter().collect());
        }
        tokens.extend(trailing.into_iter().rev().map(String::from));
    }
    if tokens.is_empty() {
        tokens.push(UNK_TOKEN.to_string());
    }
    tokens
}

/// Token indices of one utterance, padded and masked to a fixed length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedUtterance {
    /// Indices into the vocabulary, length `n_max`.
    pub indices: Vec<usize>,
    /// True at the first `len` positions, false at padding.
    pub mask: Vec<bool>,
    /// Number of real tokens (after truncation).
    pub len: usize,
}

impl EncodedUtterance {
    /// A fully padded slot used to align dialogues within a batch; every
    /// position is masked.
    pub fn padding(n_max: usize) -> Self {
        EncodedUtterance {
            indices: vec![PAD_INDEX; n_max],
            mask: vec![false; n_max],
            len: 0,
        }
    }

    pub fn is_padding(&self) -> bool {
        self.len == 0
    }
}

/// Map tokens to indices (unknown tokens become UNK), truncate to `n_max`,
/// and pad with PAD up to `n_max`.
pub fn encode_utterance(tokens: &[String], vocab: &Vocabulary, n_max: usize) -> EncodedUtterance {
    assert!(n_max >= 1, "n_max must be at least 1");
    let len = tokens.len().min(n_max);
    let mut indices: Vec<usize> = tokens[..len].iter().map(|t| vocab.index_of(t)).collect();
    indices.resize(n_max, PAD_INDEX);
    let mut mask = vec![true; len];
    mask.resize(n_max, false);
    EncodedUtterance { indices, mask, len }
}

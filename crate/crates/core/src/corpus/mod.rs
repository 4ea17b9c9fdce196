//! Corpus parsing, splits, and the canonical line-delimited format.

mod canonical;
mod dailydialog;
pub mod synth;

pub use canonical::{read_canonical, write_canonical, CorpusDir};
pub use dailydialog::{parse_dailydialog, ParseStats};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::SeededRng;

/// One dialogue: ordered utterances with speaker indices and (optionally)
/// per-utterance dialogue-act labels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dialogue {
    pub id: String,
    pub utterances: Vec<String>,
    pub speakers: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub da_labels: Option<Vec<usize>>,
}

impl Dialogue {
    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    /// Equal-length fields and at least one utterance.
    pub fn validate(&self) -> Result<()> {
        if self.utterances.is_empty() {
            return Err(Error::Data(format!("dialogue '{}' has no utterances", self.id)));
        }
        if self.speakers.len() != self.utterances.len() {
            return Err(Error::Data(format!(
                "dialogue '{}': {} speakers for {} utterances",
                self.id,
                self.speakers.len(),
                self.utterances.len()
            )));
        }
        if let Some(labels) = &self.da_labels {
            if labels.len() != self.utterances.len() {
                return Err(Error::Data(format!(
                    "dialogue '{}': {} labels for {} utterances",
                    self.id,
                    labels.len(),
                    self.utterances.len()
                )));
            }
        }
        Ok(())
    }
}

/// Dialogue-act label names; index = label id used everywhere else.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    pub names: Vec<String>,
}

impl LabelSet {
    /// The DailyDialog generic label set.
    pub fn dailydialog() -> Self {
        LabelSet {
            names: ["Inform", "Question", "Directive", "Commissive"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Validation,
    Test,
}

impl std::fmt::Display for SplitName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SplitName::Train => write!(f, "train"),
            SplitName::Validation => write!(f, "validation"),
            SplitName::Test => write!(f, "test"),
        }
    }
}

/// One split of a corpus.
#[derive(Clone, Debug)]
pub struct CorpusSplit {
    pub name: SplitName,
    pub dialogues: Vec<Dialogue>,
}

/// Seeded shuffle followed by contiguous slicing. Used only for corpora that
/// do not ship official splits. The remainder after the floor-sized
/// validation and test slices goes to train, so each split size differs from
/// its exact fraction by at most one.
pub fn split_corpus(
    dialogues: Vec<Dialogue>,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<(CorpusSplit, CorpusSplit, CorpusSplit)> {
    let (ft, fv, fe) = fractions;
    if (ft + fv + fe - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split fractions must sum to 1, got {ft} + {fv} + {fe}"
        )));
    }
    if dialogues.len() < 3 {
        return Err(Error::Data(format!(
            "need at least 3 dialogues to split, got {}",
            dialogues.len()
        )));
    }
    let mut dialogues = dialogues;
    let mut rng = SeededRng::new(seed).derive("split");
    rng.shuffle(&mut dialogues);

    let n = dialogues.len();
    let n_val = (n as f64 * fv).floor() as usize;
    let n_test = (n as f64 * fe).floor() as usize;
    let n_train = n - n_val - n_test;

    let test = dialogues.split_off(n_train + n_val);
    let val = dialogues.split_off(n_train);
    Ok((
        CorpusSplit {
            name: SplitName::Train,
            dialogues,
        },
        CorpusSplit {
            name: SplitName::Validation,
            dialogues: val,
        },
        CorpusSplit {
            name: SplitName::Test,
            dialogues: test,
        },
    ))
}

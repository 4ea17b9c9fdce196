use serde::{Deserialize, Serialize};

use crate::corpus::Dialogue;
use crate::error::Result;
use crate::nn::{SeededRng, Tape};
use crate::text::{tokenize, Vocabulary};

use super::{encode_dialogue, score_dialogue, CoherenceModel};

/// Word-level attention for one utterance plus its dialogue-level weight.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UtteranceAttention {
    pub utterance_index: usize,
    pub dialogue_weight: f64,
    pub tokens: Vec<(String, f64)>,
}

/// Attention dump for one dialogue, one record per utterance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AttentionReport {
    pub dialogue_id: String,
    pub score: f64,
    pub utterances: Vec<UtteranceAttention>,
}

/// Run the scorer in evaluation mode and collect the word-level and
/// utterance-level attention weights.
pub fn inspect_dialogue(
    model: &CoherenceModel,
    vocab: &Vocabulary,
    dialogue: &Dialogue,
    n_max: usize,
) -> Result<AttentionReport> {
    let encoded = encode_dialogue(dialogue, vocab, n_max);
    let mut tape = Tape::new(&model.params);
    let mut rng = SeededRng::new(0);
    let fwd = score_dialogue(&mut tape, model, &encoded, false, &mut rng)?;

    let dial_weights = tape.value(fwd.dialogue_attention).to_vec();
    let mut utterances = Vec::new();
    for (slot, &utt_index) in fwd.real_utterances.iter().enumerate() {
        let weights = tape.value(fwd.word_attention[slot]);
        let tokens: Vec<String> = tokenize(&dialogue.utterances[utt_index]);
        let pairs: Vec<(String, f64)> = tokens
            .into_iter()
            .take(encoded[utt_index].len)
            .zip(weights.iter().copied())
            .collect();
        utterances.push(UtteranceAttention {
            utterance_index: utt_index,
            dialogue_weight: dial_weights[slot],
            tokens: pairs,
        });
    }

    Ok(AttentionReport {
        dialogue_id: dialogue.id.clone(),
        score: tape.scalar_value(fwd.score),
        utterances,
    })
}

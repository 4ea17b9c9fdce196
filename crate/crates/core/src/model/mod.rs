//! The coherence model: a shared utterance encoder (embedding, BiLSTM,
//! self-attention pooling), a dialogue scorer (BiLSTM over utterance vectors,
//! self-attention pooling, linear score), and a dialogue-act head (softmax
//! over utterance vectors).

mod inspect;

pub use inspect::{inspect_dialogue, AttentionReport, UtteranceAttention};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{bilstm, LstmCellParams, ParamId, SeededRng, Tape, Var};
use crate::text::{EmbeddingMatrix, EncodedUtterance, Vocabulary};
use crate::{ParamStore, Real};

/// Architecture hyperparameters. Defaults follow the full-scale setting
/// (300-d embeddings, 128/256 hidden units, dropout 0.1, 4 labels).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub emb_dim: usize,
    pub utt_hidden: usize,
    pub dial_hidden: usize,
    pub num_labels: usize,
    pub dropout_p: f64,
    /// Feed the dialogue-act head post-dropout utterance vectors instead of
    /// the pre-dropout ones.
    pub dap_after_dropout: bool,
    pub train_embeddings: bool,
}

impl ModelConfig {
    pub fn new(vocab_size: usize) -> Self {
        ModelConfig {
            vocab_size,
            emb_dim: 300,
            utt_hidden: 128,
            dial_hidden: 256,
            num_labels: 4,
            dropout_p: 0.1,
            dap_after_dropout: false,
            train_embeddings: true,
        }
    }

    /// Exact number of scalars the model registers, computable from the
    /// dimensions alone.
    pub fn expected_param_count(&self) -> usize {
        let v = self.vocab_size;
        let e = self.emb_dim;
        let hu = self.utt_hidden;
        let hd = self.dial_hidden;
        let a = self.num_labels;
        v * e
            + 2 * LstmCellParams::scalar_count(e, hu)
            + 2 * hu
            + 2 * LstmCellParams::scalar_count(2 * hu, hd)
            + 2 * hd
            + (2 * hd + 1)
            + (a * 2 * hu + a)
            + 2
    }
}

/// All parameters of the model plus handles into the store.
#[derive(Clone, Debug)]
pub struct CoherenceModel {
    pub config: ModelConfig,
    pub params: ParamStore,
    pub embedding: ParamId,
    pub utt_fwd: LstmCellParams,
    pub utt_bwd: LstmCellParams,
    pub utt_attention: ParamId,
    pub dial_fwd: LstmCellParams,
    pub dial_bwd: LstmCellParams,
    pub dial_attention: ParamId,
    pub scorer_w: ParamId,
    pub scorer_b: ParamId,
    pub dap_w: ParamId,
    pub dap_b: ParamId,
    /// log(gamma_1), log(gamma_2): the trainable loss-balance parameters.
    pub eta1: ParamId,
    pub eta2: ParamId,
}

impl CoherenceModel {
    /// Register every parameter. Weights are uniform with a 1/sqrt(fan-in)
    /// bound (the LSTM cells use 1/sqrt(hidden)); the loss balances start at
    /// gamma = 2, i.e. eta = ln 2.
    pub fn build(config: ModelConfig, embedding: EmbeddingMatrix, seed_rng: &SeededRng) -> Self {
        assert_eq!(
            embedding.weights.shape(),
            &[config.vocab_size, config.emb_dim],
            "embedding table shape does not match the model configuration"
        );
        let mut rng = seed_rng.derive("init");
        let mut params = ParamStore::new();
        let trainable = config.train_embeddings;
        let embedding = params.add("embedding", embedding.weights, trainable);

        let utt_fwd =
            LstmCellParams::register(&mut params, "utt.fwd", config.emb_dim, config.utt_hidden, &mut rng);
        let utt_bwd =
            LstmCellParams::register(&mut params, "utt.bwd", config.emb_dim, config.utt_hidden, &mut rng);
        let utt_feat = 2 * config.utt_hidden;
        let utt_attention = params.add_uniform(
            "utt.attention.w",
            vec![utt_feat],
            1.0 / (utt_feat as f64).sqrt(),
            true,
            &mut rng,
        );

        let dial_fwd =
            LstmCellParams::register(&mut params, "dial.fwd", utt_feat, config.dial_hidden, &mut rng);
        let dial_bwd =
            LstmCellParams::register(&mut params, "dial.bwd", utt_feat, config.dial_hidden, &mut rng);
        let dial_feat = 2 * config.dial_hidden;
        let dial_attention = params.add_uniform(
            "dial.attention.w",
            vec![dial_feat],
            1.0 / (dial_feat as f64).sqrt(),
            true,
            &mut rng,
        );

        let scorer_w = params.add_uniform(
            "scorer.w",
            vec![dial_feat],
            1.0 / (dial_feat as f64).sqrt(),
            true,
            &mut rng,
        );
        let scorer_b = params.add_uniform("scorer.b", vec![1], 1.0 / (dial_feat as f64).sqrt(), true, &mut rng);

        let dap_w = params.add_uniform(
            "dap.w",
            vec![config.num_labels, utt_feat],
            1.0 / (utt_feat as f64).sqrt(),
            true,
            &mut rng,
        );
        let dap_b = params.add_uniform(
            "dap.b",
            vec![config.num_labels],
            1.0 / (utt_feat as f64).sqrt(),
            true,
            &mut rng,
        );

        let eta_init = crate::Tensor::scalar((2.0f64).ln());
        let eta1 = params.add("loss_balance.eta1", eta_init.clone(), true);
        let eta2 = params.add("loss_balance.eta2", eta_init, true);

        assert_eq!(
            params.scalar_count(),
            config.expected_param_count(),
            "registered parameter count does not match the architecture formula"
        );

        CoherenceModel {
            config,
            params,
            embedding,
            utt_fwd,
            utt_bwd,
            utt_attention,
            dial_fwd,
            dial_bwd,
            dial_attention,
            scorer_w,
            scorer_b,
            dap_w,
            dap_b,
            eta1,
            eta2,
        }
    }
}

/// Self-attention pooling: score each unmasked vector by a dot product with
/// the weight vector, softmax over the unmasked scores, and sum the vectors
/// with those weights.
///
/// Returns the pooled vector, the attention weights (one per unmasked
/// position), and the unmasked positions they refer to.
pub fn attention(
    tape: &mut Tape<'_, Real>,
    w: ParamId,
    xs: &[Var],
    mask: &[bool],
) -> Result<(Var, Var, Vec<usize>)> {
    assert_eq!(xs.len(), mask.len(), "attention: mask length mismatch");
    let active: Vec<usize> = (0..xs.len()).filter(|&t| mask[t]).collect();
    if active.is_empty() {
        return Err(Error::Precondition(
            "attention requires at least one unmasked position".into(),
        ));
    }
    let scores: Vec<Var> = active.iter().map(|&t| tape.dot(xs[t], w)).collect();
    let stacked = tape.stack(&scores);
    let alpha = tape.softmax(stacked);
    let kept: Vec<Var> = active.iter().map(|&t| xs[t]).collect();
    let pooled = tape.weighted_sum(alpha, &kept);
    Ok((pooled, alpha, active))
}

/// Forward pass of the utterance encoder for one utterance.
#[derive(Debug)]
pub struct UtteranceForward {
    /// Attention-pooled vector before dropout; the dialogue-act head reads
    /// this by default.
    pub vector: Var,
    /// The vector the dialogue encoder consumes (dropout applied in
    /// training mode).
    pub coherence_vector: Var,
    /// Word attention weights over the real tokens.
    pub word_attention: Var,
    /// Token positions the attention weights refer to.
    pub token_positions: Vec<usize>,
}

/// Embedding -> BiLSTM -> masked attention pooling -> dropout (training
/// only). Padded token positions never touch the embedding table, so the PAD
/// row receives no gradient.
pub fn encode_utterance_vector(
    tape: &mut Tape<'_, Real>,
    model: &CoherenceModel,
    utt: &EncodedUtterance,
    training: bool,
    rng: &mut SeededRng,
) -> Result<UtteranceForward> {
    if utt.len == 0 {
        return Err(Error::Precondition(
            "cannot encode a fully padded utterance".into(),
        ));
    }
    let embedded: Vec<Var> = utt.indices[..utt.len]
        .iter()
        .map(|&ix| tape.embed_row(model.embedding, ix))
        .collect();
    let mask = vec![true; utt.len];
    let hidden = bilstm(tape, &model.utt_fwd, &model.utt_bwd, &embedded, &mask)?;
    let (pooled, alpha, positions) = attention(tape, model.utt_attention, &hidden, &mask)?;
    let dropped = tape.dropout(pooled, model.config.dropout_p, training, rng)?;
    Ok(UtteranceForward {
        vector: pooled,
        coherence_vector: dropped,
        word_attention: alpha,
        token_positions: positions,
    })
}

/// Forward pass of the whole dialogue scorer.
#[derive(Debug)]
pub struct DialogueForward {
    /// Scalar coherence score node.
    pub score: Var,
    /// Pre-dropout utterance vectors of the real (non-padded) utterances.
    pub utterance_vectors: Vec<Var>,
    /// Vectors the dialogue-act head should consume (honors
    /// `dap_after_dropout`).
    pub dap_vectors: Vec<Var>,
    /// Word attention weights per real utterance.
    pub word_attention: Vec<Var>,
    /// Dialogue-level attention weights over the real utterances.
    pub dialogue_attention: Var,
    /// Indices (into the input slice) of the real utterances, aligned with
    /// the vectors above.
    pub real_utterances: Vec<usize>,
}

/// Utterance vectors -> dialogue BiLSTM -> attention pooling -> linear score.
/// Fully padded utterance slots (used to align batches) are carried through
/// the dialogue BiLSTM unchanged and ignored by the attention.
pub fn score_dialogue(
    tape: &mut Tape<'_, Real>,
    model: &CoherenceModel,
    dialogue: &[EncodedUtterance],
    training: bool,
    rng: &mut SeededRng,
) -> Result<DialogueForward> {
    let dial_mask: Vec<bool> = dialogue.iter().map(|u| !u.is_padding()).collect();
    if !dial_mask.iter().any(|&m| m) {
        return Err(Error::Precondition("cannot score an empty dialogue".into()));
    }

    let mut utterance_vectors = Vec::new();
    let mut dap_vectors = Vec::new();
    let mut word_attention = Vec::new();
    let mut real_utterances = Vec::new();
    let mut coherence_inputs: Vec<Var> = Vec::with_capacity(dialogue.len());
    let mut pad_slot: Option<Var> = None;

    for (k, utt) in dialogue.iter().enumerate() {
        if utt.is_padding() {
            let feat = 2 * model.config.utt_hidden;
            let z = *pad_slot.get_or_insert_with(|| tape.zeros(feat));
            coherence_inputs.push(z);
            continue;
        }
        let enc = encode_utterance_vector(tape, model, utt, training, rng)?;
        coherence_inputs.push(enc.coherence_vector);
        dap_vectors.push(if model.config.dap_after_dropout {
            enc.coherence_vector
        } else {
            enc.vector
        });
        utterance_vectors.push(enc.vector);
        word_attention.push(enc.word_attention);
        real_utterances.push(k);
    }

    let hidden = bilstm(tape, &model.dial_fwd, &model.dial_bwd, &coherence_inputs, &dial_mask)?;
    let (pooled, alpha, _) = attention(tape, model.dial_attention, &hidden, &dial_mask)?;
    let dot = tape.dot(pooled, model.scorer_w);
    let score = tape.add(dot, model.scorer_b);

    Ok(DialogueForward {
        score,
        utterance_vectors,
        dap_vectors,
        word_attention,
        dialogue_attention: alpha,
        real_utterances,
    })
}

/// Logits of the dialogue-act head for one utterance vector.
pub fn dap_logits(tape: &mut Tape<'_, Real>, model: &CoherenceModel, u: Var) -> Var {
    let wx = tape.matvec(model.dap_w, u);
    tape.add(wx, model.dap_b)
}

/// Probability distributions over the dialogue-act labels, one per utterance
/// vector; each row sums to 1.
pub fn predict_dialogue_acts(
    tape: &mut Tape<'_, Real>,
    model: &CoherenceModel,
    utterance_vectors: &[Var],
) -> Vec<Var> {
    utterance_vectors
        .iter()
        .map(|&u| {
            let logits = dap_logits(tape, model, u);
            tape.softmax(logits)
        })
        .collect()
}

/// Encode a dialogue's utterances for the model.
pub fn encode_dialogue(
    dialogue: &crate::corpus::Dialogue,
    vocab: &Vocabulary,
    n_max: usize,
) -> Vec<EncodedUtterance> {
    dialogue
        .utterances
        .iter()
        .map(|u| crate::text::encode_utterance(&crate::text::tokenize(u), vocab, n_max))
        .collect()
}

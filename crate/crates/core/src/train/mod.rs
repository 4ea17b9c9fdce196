//! Loss functions, the multi-task training loop over dialogue pairs, model
//! selection, and checkpoints.

mod checkpoint;
mod loss;

pub use checkpoint::Checkpoint;
pub use loss::{coherence_loss, dap_loss, total_loss, LossBalance};

use serde::{Deserialize, Serialize};

use crate::corpus::LabelSet;
use crate::error::{Error, Result};
use crate::metrics;
use crate::model::{
    encode_utterance_vector, predict_dialogue_acts, score_dialogue, CoherenceModel,
    DialogueForward, ModelConfig,
};
use crate::nn::{SeededRng, Tape, Var};
use crate::perturb::DialoguePair;
use crate::text::{EncodedUtterance, Vocabulary};
use crate::{AdamState, GradStore};

/// Which supervision signals drive the optimizer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainingRegime {
    /// Coherence hinge only.
    SDicoh,
    /// Uncertainty-weighted coherence + dialogue-act losses.
    MDicoh,
    /// Dialogue-act loss only, averaged over the pair's two dialogues.
    SDap,
    /// Same objective as `MDicoh`, selected and evaluated on dialogue-act F1.
    MDap,
}

impl TrainingRegime {
    /// Does the objective include the dialogue-act loss?
    pub fn uses_dap(self) -> bool {
        !matches!(self, TrainingRegime::SDicoh)
    }

    /// Is the validation/selection metric dialogue-act macro-F1 (instead of
    /// pairwise accuracy)?
    pub fn selects_on_dap(self) -> bool {
        matches!(self, TrainingRegime::SDap | TrainingRegime::MDap)
    }
}

impl std::fmt::Display for TrainingRegime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TrainingRegime::SDicoh => write!(f, "s-dicoh"),
            TrainingRegime::MDicoh => write!(f, "m-dicoh"),
            TrainingRegime::SDap => write!(f, "s-dap"),
            TrainingRegime::MDap => write!(f, "m-dap"),
        }
    }
}

impl std::str::FromStr for TrainingRegime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_lowercase().as_str() {
            "s-dicoh" => Ok(TrainingRegime::SDicoh),
            "m-dicoh" => Ok(TrainingRegime::MDicoh),
            "s-dap" => Ok(TrainingRegime::SDap),
            "m-dap" => Ok(TrainingRegime::MDap),
            other => Err(Error::Config(format!(
                "unknown regime '{other}' (expected s-dicoh, m-dicoh, s-dap, or m-dap)"
            ))),
        }
    }
}

/// Full training configuration; recorded verbatim into every checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub regime: TrainingRegime,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub dropout_p: f64,
    pub seed: u64,
    pub n_max: usize,
    pub emb_dim: usize,
    pub utt_hidden: usize,
    pub dial_hidden: usize,
    pub dap_after_dropout: bool,
    pub train_embeddings: bool,
}

impl TrainConfig {
    pub fn new(regime: TrainingRegime) -> Self {
        TrainConfig {
            regime,
            batch_size: 128,
            epochs: 20,
            learning_rate: 0.0005,
            dropout_p: 0.1,
            seed: 0,
            n_max: 40,
            emb_dim: 300,
            utt_hidden: 128,
            dial_hidden: 256,
            dap_after_dropout: false,
            train_embeddings: true,
        }
    }

    pub fn model_config(&self, vocab_size: usize, num_labels: usize) -> ModelConfig {
        ModelConfig {
            vocab_size,
            emb_dim: self.emb_dim,
            utt_hidden: self.utt_hidden,
            dial_hidden: self.dial_hidden,
            num_labels,
            dropout_p: self.dropout_p,
            dap_after_dropout: self.dap_after_dropout,
            train_embeddings: self.train_embeddings,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0
            || self.epochs == 0
            || self.n_max == 0
            || self.emb_dim == 0
            || self.utt_hidden == 0
            || self.dial_hidden == 0
        {
            return Err(Error::Config("all sizes must be positive".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Config(format!(
                "dropout probability must lie in [0, 1), got {}",
                self.dropout_p
            )));
        }
        Ok(())
    }
}

/// One dialogue encoded for the model, with optional gold act labels.
#[derive(Clone, Debug)]
pub struct EncodedDialogue {
    pub utterances: Vec<EncodedUtterance>,
    pub labels: Option<Vec<usize>>,
}

/// One training/evaluation pair: two encoded dialogues plus the preference
/// label (0 = the first is the original).
#[derive(Clone, Debug)]
pub struct EncodedPair {
    pub a: EncodedDialogue,
    pub b: EncodedDialogue,
    pub label: u8,
}

/// Tokenize and index a pair file's dialogues once, up front.
pub fn encode_pairs(pairs: &[DialoguePair], vocab: &Vocabulary, n_max: usize) -> Vec<EncodedPair> {
    let encode = |side: &crate::perturb::PairSide| EncodedDialogue {
        utterances: crate::model::encode_dialogue(&side.dialogue, vocab, n_max),
        labels: side.dialogue.da_labels.clone(),
    };
    pairs
        .iter()
        .map(|p| EncodedPair {
            a: encode(&p.dial_a),
            b: encode(&p.dial_b),
            label: p.label,
        })
        .collect()
}

/// Build the vocabulary from every utterance in the training pairs.
pub fn vocabulary_from_pairs(pairs: &[DialoguePair]) -> Vocabulary {
    let mut counts: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    for p in pairs {
        for side in [&p.dial_a, &p.dial_b] {
            for utt in &side.dialogue.utterances {
                for tok in crate::text::tokenize(utt) {
                    *counts.entry(tok).or_insert(0) += 1;
                }
            }
        }
    }
    Vocabulary::from_token_counts(counts)
}

fn dap_loss_for_dialogue(
    tape: &mut Tape<'_, crate::Real>,
    model: &CoherenceModel,
    dap_vectors: &[Var],
    real_utterances: &[usize],
    dial: &EncodedDialogue,
) -> Result<Var> {
    let labels = dial.labels.as_ref().ok_or_else(|| {
        Error::Data("regime needs dialogue-act labels but the pair carries none".into())
    })?;
    let gold: Vec<usize> = real_utterances.iter().map(|&k| labels[k]).collect();
    let probs = predict_dialogue_acts(tape, model, dap_vectors);
    dap_loss(tape, &probs, &gold)
}

fn dap_loss_of(
    tape: &mut Tape<'_, crate::Real>,
    model: &CoherenceModel,
    fwd: &DialogueForward,
    dial: &EncodedDialogue,
) -> Result<Var> {
    dap_loss_for_dialogue(tape, model, &fwd.dap_vectors, &fwd.real_utterances, dial)
}

/// Utterance vectors only, skipping the dialogue-level stack; the s-dap
/// regime has no coherence path.
fn encode_utterances_only(
    tape: &mut Tape<'_, crate::Real>,
    model: &CoherenceModel,
    dial: &EncodedDialogue,
    training: bool,
    rng: &mut SeededRng,
) -> Result<(Vec<Var>, Vec<usize>)> {
    let mut vectors = Vec::new();
    let mut real = Vec::new();
    for (k, utt) in dial.utterances.iter().enumerate() {
        if utt.is_padding() {
            continue;
        }
        let enc = encode_utterance_vector(tape, model, utt, training, rng)?;
        vectors.push(if model.config.dap_after_dropout {
            enc.coherence_vector
        } else {
            enc.vector
        });
        real.push(k);
    }
    if vectors.is_empty() {
        return Err(Error::Precondition("cannot encode an empty dialogue".into()));
    }
    Ok((vectors, real))
}

fn forward_pair(
    tape: &mut Tape<'_, crate::Real>,
    model: &CoherenceModel,
    pair: &EncodedPair,
    regime: TrainingRegime,
    training: bool,
    rng: &mut SeededRng,
) -> Result<Var> {
    let balance = LossBalance {
        eta1: model.eta1,
        eta2: model.eta2,
    };

    match regime {
        TrainingRegime::SDicoh => {
            let fa = score_dialogue(tape, model, &pair.a.utterances, training, rng)?;
            let fb = score_dialogue(tape, model, &pair.b.utterances, training, rng)?;
            Ok(coherence_loss(tape, fa.score, fb.score, pair.label))
        }
        TrainingRegime::MDicoh | TrainingRegime::MDap => {
            let fa = score_dialogue(tape, model, &pair.a.utterances, training, rng)?;
            let fb = score_dialogue(tape, model, &pair.b.utterances, training, rng)?;
            let l_coh = coherence_loss(tape, fa.score, fb.score, pair.label);
            let l_da_a = dap_loss_of(tape, model, &fa, &pair.a)?;
            let l_da_b = dap_loss_of(tape, model, &fb, &pair.b)?;
            Ok(total_loss(tape, l_coh, l_da_a, l_da_b, &balance))
        }
        TrainingRegime::SDap => {
            let (va, ra) = encode_utterances_only(tape, model, &pair.a, training, rng)?;
            let (vb, rb) = encode_utterances_only(tape, model, &pair.b, training, rng)?;
            let l_da_a = dap_loss_for_dialogue(tape, model, &va, &ra, &pair.a)?;
            let l_da_b = dap_loss_for_dialogue(tape, model, &vb, &rb, &pair.b)?;
            let sum = tape.add(l_da_a, l_da_b);
            Ok(tape.scale(sum, 0.5))
        }
    }
}

/// Coherence score of one encoded dialogue in evaluation mode.
pub fn score_encoded_dialogue(model: &CoherenceModel, dialogue: &EncodedDialogue) -> Result<f64> {
    let mut tape = Tape::new(&model.params);
    let mut rng = SeededRng::new(0);
    let fwd = score_dialogue(&mut tape, model, &dialogue.utterances, false, &mut rng)?;
    Ok(tape.scalar_value(fwd.score))
}

/// Correct and total pair counts under the strict-inequality rule. Never
/// reads the dialogue-act labels.
pub fn eval_pairwise_counts(
    model: &CoherenceModel,
    pairs: &[EncodedPair],
) -> Result<(usize, usize)> {
    if pairs.is_empty() {
        return Err(Error::Precondition("no pairs to evaluate".into()));
    }
    let mut scored = Vec::with_capacity(pairs.len());
    for p in pairs {
        let sa = score_encoded_dialogue(model, &p.a)?;
        let sb = score_encoded_dialogue(model, &p.b)?;
        scored.push((sa, sb, p.label));
    }
    Ok(metrics::pairwise_accuracy(&scored))
}

/// Pairwise discrimination accuracy over encoded pairs.
pub fn eval_pairwise_accuracy(model: &CoherenceModel, pairs: &[EncodedPair]) -> Result<f64> {
    let (correct, total) = eval_pairwise_counts(model, pairs)?;
    Ok(correct as f64 / total as f64)
}

/// Predicted act labels (argmax of the head's distribution) for every real
/// utterance of one encoded dialogue.
pub fn predict_acts_encoded(model: &CoherenceModel, dialogue: &EncodedDialogue) -> Result<Vec<usize>> {
    let mut tape = Tape::new(&model.params);
    let mut rng = SeededRng::new(0);
    let fwd = score_dialogue(&mut tape, model, &dialogue.utterances, false, &mut rng)?;
    let probs = predict_dialogue_acts(&mut tape, model, &fwd.dap_vectors);
    Ok(probs
        .iter()
        .map(|&p| {
            let row = tape.value(p);
            row.iter()
                .enumerate()
                .max_by(|(_, a), (_, b)| a.partial_cmp(b).expect("finite probabilities"))
                .map(|(i, _)| i)
                .expect("non-empty distribution")
        })
        .collect())
}

/// Dialogue-act macro-F1 over both sides of every pair that carries labels.
pub fn eval_dap_macro_f1(
    model: &CoherenceModel,
    pairs: &[EncodedPair],
    labels: &LabelSet,
) -> Result<f64> {
    let mut predictions = Vec::new();
    let mut gold = Vec::new();
    for p in pairs {
        for dial in [&p.a, &p.b] {
            let Some(dial_gold) = &dial.labels else {
                continue;
            };
            let preds = predict_acts_encoded(model, dial)?;
            let real: Vec<usize> = dial
                .utterances
                .iter()
                .enumerate()
                .filter(|(_, u)| !u.is_padding())
                .map(|(k, _)| k)
                .collect();
            for (pred, &k) in preds.iter().zip(real.iter()) {
                predictions.push(*pred);
                gold.push(dial_gold[k]);
            }
        }
    }
    if predictions.is_empty() {
        return Err(Error::Data(
            "no dialogue-act labels available for evaluation".into(),
        ));
    }
    Ok(metrics::macro_f1(&predictions, &gold, labels)?.macro_f1)
}

/// One line of the per-epoch training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub val_metric: f64,
}

impl std::fmt::Display for EpochLog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "epoch={} train_loss={:.6} gamma1={:.6} gamma2={:.6} val_metric={:.6}",
            self.epoch, self.train_loss, self.gamma1, self.gamma2, self.val_metric
        )
    }
}

/// Result of a training run: the best-validation checkpoint and the log.
#[derive(Debug)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub logs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_metric: f64,
}

/// Train for `cfg.epochs` epochs, shuffling pairs each epoch, stepping Adam
/// once per batch on the mean pair loss, and evaluating the regime's
/// validation metric after every epoch. The checkpoint with the best
/// validation metric is kept (earlier epoch wins ties). A non-finite loss
/// aborts with the epoch/batch coordinates.
pub fn train(
    cfg: &TrainConfig,
    model: &mut CoherenceModel,
    vocab: &Vocabulary,
    labels: &LabelSet,
    train_pairs: &[EncodedPair],
    val_pairs: &[EncodedPair],
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_pairs.is_empty() || val_pairs.is_empty() {
        return Err(Error::Precondition(
            "training and validation pair sets must be nonempty".into(),
        ));
    }

    let balance = LossBalance {
        eta1: model.eta1,
        eta2: model.eta2,
    };
    let root = SeededRng::new(cfg.seed);
    let mut dropout_rng = root.derive("dropout");
    let mut adam = AdamState::new(&model.params, cfg.learning_rate);
    let mut grads = GradStore::zeros_like(&model.params);

    let mut logs = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, crate::ParamStore, AdamState)> = None;

    let mut order: Vec<usize> = (0..train_pairs.len()).collect();
    for epoch in 1..=cfg.epochs {
        let mut shuffle_rng = root.derive_indexed("shuffle", epoch as u64);
        shuffle_rng.shuffle(&mut order);

        let mut epoch_loss = 0.0;
        for (batch_no, batch) in order.chunks(cfg.batch_size).enumerate() {
            grads.zero_all();
            let scale = 1.0 / batch.len() as f64;
            for &ix in batch {
                let pair = &train_pairs[ix];
                let mut tape = Tape::new(&model.params);
                let loss_var =
                    forward_pair(&mut tape, model, pair, cfg.regime, true, &mut dropout_rng)?;
                let loss = tape.scalar_value(loss_var);
                if !loss.is_finite() {
                    return Err(Error::Train(format!(
                        "non-finite loss {loss} at epoch {epoch}, batch {batch_no}"
                    )));
                }
                epoch_loss += loss;
                tape.backward(loss_var, scale, &mut grads)?;
            }
            // The PAD embedding row stays zero: its gradient is discarded.
            grads.zero_row(model.embedding, crate::text::PAD_INDEX);
            adam.update(&mut model.params, &grads)?;
        }

        let val_metric = if cfg.regime.selects_on_dap() {
            eval_dap_macro_f1(model, val_pairs, labels)?
        } else {
            eval_pairwise_accuracy(model, val_pairs)?
        };

        let log = EpochLog {
            epoch,
            train_loss: epoch_loss / train_pairs.len() as f64,
            gamma1: balance.gamma1(&model.params),
            gamma2: balance.gamma2(&model.params),
            val_metric,
        };
        logs.push(log);

        let improved = match &best {
            None => true,
            Some((_, best_metric, _, _)) => val_metric > *best_metric,
        };
        if improved {
            best = Some((epoch, val_metric, model.params.clone(), adam.clone()));
        }
    }

    let (best_epoch, best_val_metric, best_params, best_adam) =
        best.expect("at least one epoch ran");
    let checkpoint = Checkpoint::new(
        cfg.clone(),
        vocab,
        labels.clone(),
        best_params,
        best_adam,
        best_epoch,
        best_val_metric,
    );

    Ok(TrainOutcome {
        checkpoint,
        logs,
        best_epoch,
        best_val_metric,
    })
}

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::LabelSet;
use crate::error::{Error, Result};
use crate::model::CoherenceModel;
use crate::nn::LstmCellParams;
use crate::text::Vocabulary;
use crate::{AdamState, ParamStore};

use super::TrainConfig;

/// Self-describing training snapshot: the full configuration, the
/// vocabulary (with an integrity hash), every named parameter tensor, the
/// Adam state (which includes the loss-balance parameters' moments), and the
/// seed. Serialized as JSON; f64 values round-trip bit-exactly.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub vocab_tokens: Vec<String>,
    pub vocab_hash: u64,
    pub labels: LabelSet,
    pub params: ParamStore,
    pub adam: AdamState,
    pub seed: u64,
    pub best_epoch: usize,
    pub val_metric: f64,
}

impl Checkpoint {
    pub fn new(
        config: TrainConfig,
        vocab: &Vocabulary,
        labels: LabelSet,
        params: ParamStore,
        adam: AdamState,
        best_epoch: usize,
        val_metric: f64,
    ) -> Self {
        Checkpoint {
            seed: config.seed,
            vocab_tokens: vocab.tokens().to_vec(),
            vocab_hash: vocab.hash(),
            labels,
            config,
            params,
            adam,
            best_epoch,
            val_metric,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(f), self)?;
        Ok(())
    }

    /// Load and verify the embedded vocabulary against its hash.
    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        let ckpt: Checkpoint = serde_json::from_reader(std::io::BufReader::new(f))?;
        let vocab = Vocabulary::from_full_token_list(ckpt.vocab_tokens.clone());
        if vocab.hash() != ckpt.vocab_hash {
            return Err(Error::Compatibility(format!(
                "vocabulary hash mismatch in {}: stored {:#x}, recomputed {:#x}",
                path.display(),
                ckpt.vocab_hash,
                vocab.hash()
            )));
        }
        Ok(ckpt)
    }

    pub fn vocabulary(&self) -> Vocabulary {
        Vocabulary::from_full_token_list(self.vocab_tokens.clone())
    }

    /// Reattach parameter handles to the stored tensors by name.
    pub fn rebuild_model(&self) -> Result<CoherenceModel> {
        let vocab = self.vocabulary();
        let config = self.config.model_config(vocab.len(), self.labels.len());
        let params = self.params.clone();

        let find = |name: &str| {
            params.find(name).ok_or_else(|| {
                Error::Compatibility(format!("checkpoint is missing parameter '{name}'"))
            })
        };
        let cell = |prefix: &str, hidden: usize| -> Result<LstmCellParams> {
            LstmCellParams::from_store(&params, prefix, hidden).ok_or_else(|| {
                Error::Compatibility(format!("checkpoint is missing LSTM cell '{prefix}'"))
            })
        };

        let model = CoherenceModel {
            embedding: find("embedding")?,
            utt_fwd: cell("utt.fwd", config.utt_hidden)?,
            utt_bwd: cell("utt.bwd", config.utt_hidden)?,
            utt_attention: find("utt.attention.w")?,
            dial_fwd: cell("dial.fwd", config.dial_hidden)?,
            dial_bwd: cell("dial.bwd", config.dial_hidden)?,
            dial_attention: find("dial.attention.w")?,
            scorer_w: find("scorer.w")?,
            scorer_b: find("scorer.b")?,
            dap_w: find("dap.w")?,
            dap_b: find("dap.b")?,
            eta1: find("loss_balance.eta1")?,
            eta2: find("loss_balance.eta2")?,
            config,
            params,
        };
        Ok(model)
    }
}

use crate::error::{Error, Result};
use crate::nn::{ParamId, Tape, Var};
use crate::Real;

/// Handles to the two trainable loss-balance parameters. Each gamma is
/// parameterized as exp(eta) so it stays positive and the log term in the
/// total loss is always defined; both start at gamma = 2.
#[derive(Clone, Copy, Debug)]
pub struct LossBalance {
    pub eta1: ParamId,
    pub eta2: ParamId,
}

impl LossBalance {
    pub fn gamma1(&self, params: &crate::ParamStore) -> f64 {
        params.get(self.eta1).data()[0].exp()
    }

    pub fn gamma2(&self, params: &crate::ParamStore) -> f64 {
        params.get(self.eta2).data()[0].exp()
    }
}

/// Pairwise hinge on the two coherence scores:
/// max{0, 1 - s_preferred + s_other}, where the preferred side is `s_i` when
/// the label is 0 and `s_j` when it is 1.
pub fn coherence_loss(tape: &mut Tape<'_, Real>, s_i: Var, s_j: Var, label: u8) -> Var {
    debug_assert!(label <= 1, "preference label must be 0 or 1");
    let (preferred, other) = if label == 0 { (s_i, s_j) } else { (s_j, s_i) };
    let diff = tape.sub(other, preferred);
    let arg = tape.add_const(diff, 1.0);
    tape.relu(arg)
}

/// Average cross-entropy of the per-utterance label distributions against
/// the gold labels: -(1/m) sum_k log p_k[gold_k].
pub fn dap_loss(tape: &mut Tape<'_, Real>, predictions: &[Var], gold: &[usize]) -> Result<Var> {
    if predictions.is_empty() {
        return Err(Error::Precondition("dap_loss: no predictions".into()));
    }
    if predictions.len() != gold.len() {
        return Err(Error::Data(format!(
            "dap_loss: {} predictions for {} gold labels",
            predictions.len(),
            gold.len()
        )));
    }
    let mut picked = Vec::with_capacity(predictions.len());
    for (k, (&p, &g)) in predictions.iter().zip(gold.iter()).enumerate() {
        let width = tape.value(p).len();
        if g >= width {
            return Err(Error::Data(format!(
                "dap_loss: gold label {g} out of range for {width} labels at utterance {k}"
            )));
        }
        let prob = tape.pick(p, g);
        picked.push(tape.log(prob));
    }
    let stacked = tape.stack(&picked);
    let sum = tape.sum_all(stacked);
    Ok(tape.scale(sum, -1.0 / predictions.len() as f64))
}

/// Uncertainty-weighted combination of the coherence loss and the two
/// dialogue-act losses:
/// l_coh / gamma1^2 + (l_da_i + l_da_j) / gamma2^2 + log gamma1 + log gamma2,
/// with gamma_i = exp(eta_i) so gradients flow into the eta parameters.
pub fn total_loss(
    tape: &mut Tape<'_, Real>,
    l_coh: Var,
    l_da_i: Var,
    l_da_j: Var,
    balance: &LossBalance,
) -> Var {
    let gamma1 = tape.exp(balance.eta1);
    let gamma2 = tape.exp(balance.eta2);
    let gamma1_sq = tape.mul(gamma1, gamma1);
    let gamma2_sq = tape.mul(gamma2, gamma2);
    let coh_term = tape.div(l_coh, gamma1_sq);
    let da_sum = tape.add(l_da_i, l_da_j);
    let da_term = tape.div(da_sum, gamma2_sq);
    let log_g1 = tape.log(gamma1);
    let log_g2 = tape.log(gamma2);
    let weighted = tape.add(coh_term, da_term);
    let logs = tape.add(log_g1, log_g2);
    tape.add(weighted, logs)
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{LstmState, ParamId, ParamStore, Scalar, SeededRng, Tape, Var};

/// Parameter handles of one LSTM cell: four input weight matrices, four
/// hidden (square) weight matrices, and eight bias vectors.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LstmCellParams {
    pub w_ii: ParamId,
    pub w_hi: ParamId,
    pub w_if: ParamId,
    pub w_hf: ParamId,
    pub w_ig: ParamId,
    pub w_hg: ParamId,
    pub w_io: ParamId,
    pub w_ho: ParamId,
    pub b_ii: ParamId,
    pub b_hi: ParamId,
    pub b_if: ParamId,
    pub b_hf: ParamId,
    pub b_ig: ParamId,
    pub b_hg: ParamId,
    pub b_io: ParamId,
    pub b_ho: ParamId,
    pub hidden_size: usize,
}

impl LstmCellParams {
    /// Register one cell's parameters under `prefix`, initialized uniformly
    /// in [-1/sqrt(hidden), 1/sqrt(hidden)].
    pub fn register<F: Scalar>(
        store: &mut ParamStore<F>,
        prefix: &str,
        input_dim: usize,
        hidden_size: usize,
        rng: &mut SeededRng,
    ) -> Self {
        assert!(hidden_size > 0, "hidden_size must be positive");
        let bound = 1.0 / (hidden_size as f64).sqrt();
        let mut mat = |name: &str, rows: usize, cols: usize, rng: &mut SeededRng| {
            store.add_uniform(&format!("{prefix}.{name}"), vec![rows, cols], bound, true, rng)
        };
        let w_ii = mat("w_ii", hidden_size, input_dim, rng);
        let w_hi = mat("w_hi", hidden_size, hidden_size, rng);
        let w_if = mat("w_if", hidden_size, input_dim, rng);
        let w_hf = mat("w_hf", hidden_size, hidden_size, rng);
        let w_ig = mat("w_ig", hidden_size, input_dim, rng);
        let w_hg = mat("w_hg", hidden_size, hidden_size, rng);
        let w_io = mat("w_io", hidden_size, input_dim, rng);
        let w_ho = mat("w_ho", hidden_size, hidden_size, rng);
        let mut vec = |name: &str, rng: &mut SeededRng| {
            store.add_uniform(&format!("{prefix}.{name}"), vec![hidden_size], bound, true, rng)
        };
        let b_ii = vec("b_ii", rng);
        let b_hi = vec("b_hi", rng);
        let b_if = vec("b_if", rng);
        let b_hf = vec("b_hf", rng);
        let b_ig = vec("b_ig", rng);
        let b_hg = vec("b_hg", rng);
        let b_io = vec("b_io", rng);
        let b_ho = vec("b_ho", rng);
        LstmCellParams {
            w_ii,
            w_hi,
            w_if,
            w_hf,
            w_ig,
            w_hg,
            w_io,
            w_ho,
            b_ii,
            b_hi,
            b_if,
            b_hf,
            b_ig,
            b_hg,
            b_io,
            b_ho,
            hidden_size,
        }
    }

    /// Number of scalars in one cell.
    pub fn scalar_count(input_dim: usize, hidden_size: usize) -> usize {
        4 * hidden_size * input_dim + 4 * hidden_size * hidden_size + 8 * hidden_size
    }

    /// Reattach handles to a store that already holds a cell registered under
    /// `prefix` (checkpoint loading).
    pub fn from_store<F: Scalar>(
        store: &ParamStore<F>,
        prefix: &str,
        hidden_size: usize,
    ) -> Option<Self> {
        let f = |name: &str| store.find(&format!("{prefix}.{name}"));
        Some(LstmCellParams {
            w_ii: f("w_ii")?,
            w_hi: f("w_hi")?,
            w_if: f("w_if")?,
            w_hf: f("w_hf")?,
            w_ig: f("w_ig")?,
            w_hg: f("w_hg")?,
            w_io: f("w_io")?,
            w_ho: f("w_ho")?,
            b_ii: f("b_ii")?,
            b_hi: f("b_hi")?,
            b_if: f("b_if")?,
            b_hf: f("b_hf")?,
            b_ig: f("b_ig")?,
            b_hg: f("b_hg")?,
            b_io: f("b_io")?,
            b_ho: f("b_ho")?,
            hidden_size,
        })
    }
}

/// Run forward and backward LSTMs over a sequence and concatenate their
/// hidden states per position.
///
/// Masked (padded) positions carry the recurrent state through unchanged and
/// contribute no step of their own; their outputs are the carried states and
/// must be ignored downstream via the same mask.
pub fn bilstm<F: Scalar>(
    tape: &mut Tape<'_, F>,
    forward: &LstmCellParams,
    backward: &LstmCellParams,
    seq: &[Var],
    mask: &[bool],
) -> Result<Vec<Var>> {
    if seq.is_empty() {
        return Err(Error::Precondition("bilstm: empty sequence".into()));
    }
    if seq.len() != mask.len() {
        return Err(Error::Precondition(format!(
            "bilstm: sequence length {} does not match mask length {}",
            seq.len(),
            mask.len()
        )));
    }

    let run = |tape: &mut Tape<'_, F>, cell: &LstmCellParams, order: Vec<usize>| -> Vec<Var> {
        let mut state = LstmState::Zero;
        let mut zero: Option<Var> = None;
        let mut outs: Vec<Option<Var>> = vec![None; seq.len()];
        for t in order {
            if mask[t] {
                let v = tape.lstm_step(cell, seq[t], state);
                state = LstmState::Step(v);
                outs[t] = Some(v);
            } else {
                // Carry the state through; the output at a padded position is
                // the carried hidden state (or zeros before any real step).
                outs[t] = match state {
                    LstmState::Step(v) => Some(v),
                    _ => {
                        let z = *zero
                            .get_or_insert_with(|| tape.zeros(cell.hidden_size));
                        Some(z)
                    }
                };
            }
        }
        outs.into_iter().map(|v| v.unwrap()).collect()
    };

    let fwd_outs = run(tape, forward, (0..seq.len()).collect());
    let bwd_outs = run(tape, backward, (0..seq.len()).rev().collect());

    Ok(fwd_outs
        .into_iter()
        .zip(bwd_outs)
        .map(|(f, b)| tape.concat(f, b))
        .collect())
}

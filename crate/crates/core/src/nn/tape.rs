use crate::error::{Error, Result};

use super::lstm::LstmCellParams;
use super::{GradStore, ParamId, ParamStore, Scalar, SeededRng};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

/// Operand of a tape operation: either an earlier tape value or a parameter.
#[derive(Clone, Copy, Debug)]
pub enum Src {
    Var(Var),
    Param(ParamId),
}

impl From<Var> for Src {
    fn from(v: Var) -> Self {
        Src::Var(v)
    }
}

impl From<ParamId> for Src {
    fn from(p: ParamId) -> Self {
        Src::Param(p)
    }
}

/// Recurrent state feeding an LSTM step.
#[derive(Clone, Copy, Debug)]
pub enum LstmState {
    /// Zero hidden and cell state (sequence start).
    Zero,
    /// Chain from a previous `lstm_step` node (hidden = its value, cell = its
    /// cell-state output).
    Step(Var),
    /// Explicit hidden and cell operands.
    Pair { h: Src, c: Src },
}

/// Cached gate activations of one LSTM step, kept for the backward pass.
#[derive(Debug)]
struct LstmCache<F> {
    input: Vec<F>,
    forget: Vec<F>,
    cell_cand: Vec<F>,
    output: Vec<F>,
}

/// Payload of a fused LSTM step, boxed to keep the op enum small.
#[derive(Debug)]
struct LstmStepOp<F> {
    cell: LstmCellParams,
    x: Src,
    prev: LstmState,
    cache: LstmCache<F>,
}

#[derive(Debug)]
enum Op<F> {
    /// Input value; accumulates a gradient but propagates nowhere.
    Leaf,
    /// Row lookup into a 2-d embedding parameter.
    EmbedRow { emb: ParamId, row: usize },
    /// y = W x for a 2-d parameter W.
    MatVec { w: ParamId, x: Src },
    Add { a: Src, b: Src },
    Sub { a: Src, b: Src },
    Mul { a: Src, b: Src },
    Div { a: Src, b: Src },
    ScaleConst { x: Src, c: F },
    AddConst { x: Src },
    Sigmoid { x: Src },
    Tanh { x: Src },
    Relu { x: Src },
    Exp { x: Src },
    Log { x: Src },
    Concat { a: Src, b: Src },
    /// Scalar dot product of two equal-length vectors.
    Dot { a: Src, b: Src },
    /// Scalars stacked into one vector.
    Stack { xs: Vec<Src> },
    Softmax { x: Src },
    LogSoftmax { x: Src },
    /// Scalar x[index].
    Pick { x: Src, index: usize },
    SumAll { x: Src },
    /// y = sum_t weights[t] * xs[t].
    WeightedSum { weights: Src, xs: Vec<Src> },
    Dropout { x: Src, keep: Vec<bool>, scale: F },
    LstmStep {
        cell: LstmCellParams,
        x: Src,
        prev: LstmState,
        cache: LstmCache<F>,
    },
}

struct Node<F> {
    value: Vec<F>,
    /// Secondary output channel; only LSTM steps use it (the cell state).
    aux: Option<Vec<F>>,
    op: Op<F>,
}

/// Gradients of tape-local values after a backward pass; lets callers read
/// the gradients accumulated at leaf inputs.
#[derive(Debug)]
pub struct Backprop<F> {
    node_grads: Vec<Option<Vec<F>>>,
}

impl<F: Scalar> Backprop<F> {
    /// Gradient accumulated at `v`, if it received any.
    pub fn grad(&self, v: Var) -> Option<&[F]> {
        self.node_grads[v.0].as_deref()
    }
}

/// Record of one forward computation. Values are vectors; matrices only occur
/// as parameters. Nodes are appended in topological order, so the backward
/// pass is a single reverse sweep that visits each node exactly once.
pub struct Tape<'p, F> {
    params: &'p ParamStore<F>,
    nodes: Vec<Node<F>>,
    spent: bool,
}

// y += W x
fn matvec_accum<F: Scalar>(w: &[F], rows: usize, cols: usize, x: &[F], y: &mut [F]) {
    debug_assert_eq!(x.len(), cols);
    debug_assert_eq!(y.len(), rows);
    for (i, yi) in y.iter_mut().enumerate() {
        let row = &w[i * cols..(i + 1) * cols];
        let mut acc = F::zero();
        for (wij, xj) in row.iter().zip(x.iter()) {
            acc = acc + *wij * *xj;
        }
        *yi += acc;
    }
}

// y += W^T d
fn matvec_t_accum<F: Scalar>(w: &[F], rows: usize, cols: usize, d: &[F], y: &mut [F]) {
    debug_assert_eq!(d.len(), rows);
    debug_assert_eq!(y.len(), cols);
    for (i, &di) in d.iter().enumerate() {
        let row = &w[i * cols..(i + 1) * cols];
        for (yj, wij) in y.iter_mut().zip(row.iter()) {
            *yj += di * *wij;
        }
    }
}

// W += d x^T
fn outer_accum<F: Scalar>(d: &[F], x: &[F], w: &mut [F]) {
    let cols = x.len();
    for (i, &di) in d.iter().enumerate() {
        let row = &mut w[i * cols..(i + 1) * cols];
        for (wij, xj) in row.iter_mut().zip(x.iter()) {
            *wij += di * *xj;
        }
    }
}

fn axpy<F: Scalar>(alpha: F, x: &[F], y: &mut [F]) {
    for (yi, xi) in y.iter_mut().zip(x.iter()) {
        *yi += alpha * *xi;
    }
}

fn add_into<F: Scalar>(x: &[F], y: &mut [F]) {
    for (yi, xi) in y.iter_mut().zip(x.iter()) {
        *yi += *xi;
    }
}

impl<'p, F: Scalar> Tape<'p, F> {
    pub fn new(params: &'p ParamStore<F>) -> Self {
        Tape {
            params,
            nodes: Vec::new(),
            spent: false,
        }
    }

    pub fn params(&self) -> &ParamStore<F> {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Value of a recorded node.
    pub fn value(&self, v: Var) -> &[F] {
        &self.nodes[v.0].value
    }

    /// Scalar value of a length-1 node.
    pub fn scalar_value(&self, v: Var) -> F {
        let val = self.value(v);
        assert_eq!(val.len(), 1, "node #{} is not a scalar", v.0);
        val[0]
    }

    /// Cell-state output of an LSTM step node.
    pub fn cell_state(&self, v: Var) -> &[F] {
        self.nodes[v.0]
            .aux
            .as_deref()
            .expect("node has no cell-state output")
    }

    fn src_value(&self, s: Src) -> &[F] {
        match s {
            Src::Var(v) => &self.nodes[v.0].value,
            Src::Param(p) => self.params.get(p).data(),
        }
    }

    fn src_len(&self, s: Src) -> usize {
        self.src_value(s).len()
    }

    fn src_name(&self, s: Src) -> String {
        match s {
            Src::Var(v) => format!("tape node #{}", v.0),
            Src::Param(p) => format!("parameter '{}'", self.params.name(p)),
        }
    }

    fn push(&mut self, value: Vec<F>, op: Op<F>) -> Var {
        self.nodes.push(Node {
            value,
            aux: None,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn assert_same_len(&self, a: Src, b: Src, op: &str) {
        assert_eq!(
            self.src_len(a),
            self.src_len(b),
            "{op}: length mismatch between {} (len {}) and {} (len {})",
            self.src_name(a),
            self.src_len(a),
            self.src_name(b),
            self.src_len(b)
        );
    }

    /// Input value that can accumulate a gradient (read it via [`Backprop::grad`]).
    pub fn leaf(&mut self, data: &[F]) -> Var {
        self.push(data.to_vec(), Op::Leaf)
    }

    /// Zero-vector leaf.
    pub fn zeros(&mut self, len: usize) -> Var {
        self.push(vec![F::zero(); len], Op::Leaf)
    }

    /// Row lookup into a 2-d embedding parameter.
    pub fn embed_row(&mut self, emb: ParamId, row: usize) -> Var {
        let t = self.params.get(emb);
        let (rows, _) = t.dims2();
        assert!(
            row < rows,
            "embed_row: row {row} out of range for parameter '{}' with {rows} rows",
            self.params.name(emb)
        );
        self.push(t.row(row).to_vec(), Op::EmbedRow { emb, row })
    }

    /// y = W x.
    pub fn matvec(&mut self, w: ParamId, x: impl Into<Src>) -> Var {
        let x = x.into();
        let (rows, cols) = self.params.get(w).dims2();
        assert_eq!(
            cols,
            self.src_len(x),
            "matvec: parameter '{}' has {cols} columns but {} has length {}",
            self.params.name(w),
            self.src_name(x),
            self.src_len(x)
        );
        let mut y = vec![F::zero(); rows];
        matvec_accum(self.params.get(w).data(), rows, cols, self.src_value(x), &mut y);
        self.push(y, Op::MatVec { w, x })
    }

    fn zip_op(&mut self, a: Src, b: Src, name: &str, f: impl Fn(F, F) -> F, op: Op<F>) -> Var {
        self.assert_same_len(a, b, name);
        let y: Vec<F> = self
            .src_value(a)
            .iter()
            .zip(self.src_value(b).iter())
            .map(|(&x, &y)| f(x, y))
            .collect();
        self.push(y, op)
    }

    pub fn add(&mut self, a: impl Into<Src>, b: impl Into<Src>) -> Var {
        let (a, b) = (a.into(), b.into());
        self.zip_op(a, b, "add", |x, y| x + y, Op::Add { a, b })
    }

    pub fn sub(&mut self, a: impl Into<Src>, b: impl Into<Src>) -> Var {
        let (a, b) = (a.into(), b.into());
        self.zip_op(a, b, "sub", |x, y| x - y, Op::Sub { a, b })
    }

    pub fn mul(&mut self, a: impl Into<Src>, b: impl Into<Src>) -> Var {
        let (a, b) = (a.into(), b.into());
        self.zip_op(a, b, "mul", |x, y| x * y, Op::Mul { a, b })
    }

    pub fn div(&mut self, a: impl Into<Src>, b: impl Into<Src>) -> Var {
        let (a, b) = (a.into(), b.into());
        self.zip_op(a, b, "div", |x, y| x / y, Op::Div { a, b })
    }

    fn map_op(&mut self, x: Src, f: impl Fn(F) -> F, op: Op<F>) -> Var {
        let y: Vec<F> = self.src_value(x).iter().map(|&v| f(v)).collect();
        self.push(y, op)
    }

    pub fn scale(&mut self, x: impl Into<Src>, c: F) -> Var {
        let x = x.into();
        self.map_op(x, |v| v * c, Op::ScaleConst { x, c })
    }

    pub fn add_const(&mut self, x: impl Into<Src>, c: F) -> Var {
        let x = x.into();
        self.map_op(x, |v| v + c, Op::AddConst { x })
    }

    pub fn sigmoid(&mut self, x: impl Into<Src>) -> Var {
        let x = x.into();
        self.map_op(x, |v| F::one() / (F::one() + (-v).exp()), Op::Sigmoid { x })
    }

    pub fn tanh(&mut self, x: impl Into<Src>) -> Var {
        let x = x.into();
        self.map_op(x, |v| v.tanh(), Op::Tanh { x })
    }

    pub fn relu(&mut self, x: impl Into<Src>) -> Var {
        let x = x.into();
        self.map_op(x, |v| v.max(F::zero()), Op::Relu { x })
    }

    pub fn exp(&mut self, x: impl Into<Src>) -> Var {
        let x = x.into();
        self.map_op(x, |v| v.exp(), Op::Exp { x })
    }

    pub fn log(&mut self, x: impl Into<Src>) -> Var {
        let x = x.into();
        self.map_op(x, |v| v.ln(), Op::Log { x })
    }

    pub fn concat(&mut self, a: impl Into<Src>, b: impl Into<Src>) -> Var {
        let (a, b) = (a.into(), b.into());
        let mut y = self.src_value(a).to_vec();
        y.extend_from_slice(self.src_value(b));
        self.push(y, Op::Concat { a, b })
    }

    pub fn dot(&mut self, a: impl Into<Src>, b: impl Into<Src>) -> Var {
        let (a, b) = (a.into(), b.into());
        self.assert_same_len(a, b, "dot");
        let s: F = self
            .src_value(a)
            .iter()
            .zip(self.src_value(b).iter())
            .map(|(&x, &y)| x * y)
            .sum();
        self.push(vec![s], Op::Dot { a, b })
    }

    /// Stack scalar values into one vector.
    pub fn stack(&mut self, xs: &[Var]) -> Var {
        let xs: Vec<Src> = xs.iter().map(|&v| Src::Var(v)).collect();
        let y: Vec<F> = xs
            .iter()
            .map(|&s| {
                let v = self.src_value(s);
                assert_eq!(v.len(), 1, "stack: {} is not a scalar", self.src_name(s));
                v[0]
            })
            .collect();
        self.push(y, Op::Stack { xs })
    }

    /// Numerically stabilized softmax (max-subtraction).
    pub fn softmax(&mut self, x: impl Into<Src>) -> Var {
        let x = x.into();
        assert!(self.src_len(x) >= 1, "softmax: empty input");
        let y = super::softmax_slice(self.src_value(x));
        self.push(y, Op::Softmax { x })
    }

    pub fn log_softmax(&mut self, x: impl Into<Src>) -> Var {
        let x = x.into();
        assert!(self.src_len(x) >= 1, "log_softmax: empty input");
        let v = self.src_value(x);
        let max = v.iter().cloned().fold(F::neg_infinity(), F::max);
        let lse: F = v.iter().map(|&xi| (xi - max).exp()).sum::<F>().ln() + max;
        let y: Vec<F> = v.iter().map(|&xi| xi - lse).collect();
        self.push(y, Op::LogSoftmax { x })
    }

    pub fn pick(&mut self, x: impl Into<Src>, index: usize) -> Var {
        let x = x.into();
        assert!(
            index < self.src_len(x),
            "pick: index {index} out of range for {}",
            self.src_name(x)
        );
        let v = self.src_value(x)[index];
        self.push(vec![v], Op::Pick { x, index })
    }

    pub fn sum_all(&mut self, x: impl Into<Src>) -> Var {
        let x = x.into();
        let s: F = self.src_value(x).iter().cloned().sum();
        self.push(vec![s], Op::SumAll { x })
    }

    /// y = sum_t weights[t] * xs[t].
    pub fn weighted_sum(&mut self, weights: Var, xs: &[Var]) -> Var {
        let weights = Src::Var(weights);
        assert_eq!(
            self.src_len(weights),
            xs.len(),
            "weighted_sum: {} weights for {} vectors",
            self.src_len(weights),
            xs.len()
        );
        assert!(!xs.is_empty(), "weighted_sum: no inputs");
        let dim = self.src_len(Src::Var(xs[0]));
        let mut y = vec![F::zero(); dim];
        let xs: Vec<Src> = xs.iter().map(|&v| Src::Var(v)).collect();
        for (t, &xv) in xs.iter().enumerate() {
            let alpha = self.src_value(weights)[t];
            let x = self.src_value(xv);
            assert_eq!(x.len(), dim, "weighted_sum: ragged input lengths");
            axpy(alpha, x, &mut y);
        }
        self.push(y, Op::WeightedSum { weights, xs })
    }

    /// Inverted dropout: in training, zero each element with probability `p`
    /// and scale survivors by `1/(1-p)`; in evaluation mode, identity.
    pub fn dropout(&mut self, x: Var, p: f64, training: bool, rng: &mut SeededRng) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Config(format!(
                "dropout probability must lie in [0, 1), got {p}"
            )));
        }
        if !training || p == 0.0 {
            return Ok(x);
        }
        let x = Src::Var(x);
        let keep: Vec<bool> = (0..self.src_len(x)).map(|_| rng.unit() >= p).collect();
        let scale = F::from_f64(1.0 / (1.0 - p));
        let y: Vec<F> = self
            .src_value(x)
            .iter()
            .zip(keep.iter())
            .map(|(&v, &k)| if k { v * scale } else { F::zero() })
            .collect();
        Ok(self.push(y, Op::Dropout { x, keep, scale }))
    }

    /// One LSTM step. The node's value is the new hidden state; the new cell
    /// state is available through [`Tape::cell_state`] and feeds the next
    /// step via [`LstmState::Step`].
    pub fn lstm_step(&mut self, cell: &LstmCellParams, x: impl Into<Src>, prev: LstmState) -> Var {
        let x = x.into();
        let h = cell.hidden_size;
        self.check_lstm_shapes(cell, x);

        let (h_prev, c_prev) = self.lstm_prev_values(cell, prev);

        let gate = |tape: &Self, wi: ParamId, bi: ParamId, wh: ParamId, bh: ParamId| -> Vec<F> {
            let mut pre = tape.params.get(bi).data().to_vec();
            add_into(tape.params.get(bh).data(), &mut pre);
            let (rows, cols) = tape.params.get(wi).dims2();
            matvec_accum(tape.params.get(wi).data(), rows, cols, tape.src_value(x), &mut pre);
            let (rows, cols) = tape.params.get(wh).dims2();
            matvec_accum(tape.params.get(wh).data(), rows, cols, &h_prev, &mut pre);
            pre
        };
        let sigm = |v: Vec<F>| -> Vec<F> {
            v.into_iter()
                .map(|x| F::one() / (F::one() + (-x).exp()))
                .collect()
        };

        let input = sigm(gate(self, cell.w_ii, cell.b_ii, cell.w_hi, cell.b_hi));
        let forget = sigm(gate(self, cell.w_if, cell.b_if, cell.w_hf, cell.b_hf));
        let cell_cand: Vec<F> = gate(self, cell.w_ig, cell.b_ig, cell.w_hg, cell.b_hg)
            .into_iter()
            .map(|x| x.tanh())
            .collect();
        let output = sigm(gate(self, cell.w_io, cell.b_io, cell.w_ho, cell.b_ho));

        let mut c_t = vec![F::zero(); h];
        for k in 0..h {
            c_t[k] = forget[k] * c_prev[k] + input[k] * cell_cand[k];
        }
        let h_t: Vec<F> = output
            .iter()
            .zip(c_t.iter())
            .map(|(&o, &c)| o * c.tanh())
            .collect();

        let cache = LstmCache {
            input,
            forget,
            cell_cand,
            output,
        };
        self.nodes.push(Node {
            value: h_t,
            aux: Some(c_t),
            op: Op::LstmStep {
                cell: cell.clone(),
                x,
                prev,
                cache,
            },
        });
        Var(self.nodes.len() - 1)
    }

    fn check_lstm_shapes(&self, cell: &LstmCellParams, x: Src) {
        let h = cell.hidden_size;
        let input_dim = self.src_len(x);
        for (w, is_input) in [
            (cell.w_ii, true),
            (cell.w_if, true),
            (cell.w_ig, true),
            (cell.w_io, true),
            (cell.w_hi, false),
            (cell.w_hf, false),
            (cell.w_hg, false),
            (cell.w_ho, false),
        ] {
            let (rows, cols) = self.params.get(w).dims2();
            let want_cols = if is_input { input_dim } else { h };
            assert!(
                rows == h && cols == want_cols,
                "lstm_step: parameter '{}' has shape {rows}x{cols}, expected {h}x{want_cols}",
                self.params.name(w)
            );
        }
        for b in [
            cell.b_ii, cell.b_if, cell.b_ig, cell.b_io, cell.b_hi, cell.b_hf, cell.b_hg, cell.b_ho,
        ] {
            assert_eq!(
                self.params.get(b).len(),
                h,
                "lstm_step: bias '{}' has length {}, expected {h}",
                self.params.name(b),
                self.params.get(b).len()
            );
        }
    }

    fn lstm_prev_values(&self, cell: &LstmCellParams, prev: LstmState) -> (Vec<F>, Vec<F>) {
        let h = cell.hidden_size;
        match prev {
            LstmState::Zero => (vec![F::zero(); h], vec![F::zero(); h]),
            LstmState::Step(v) => (
                self.nodes[v.0].value.clone(),
                self.nodes[v.0]
                    .aux
                    .as_ref()
                    .expect("LstmState::Step must reference an lstm_step node")
                    .clone(),
            ),
            LstmState::Pair { h: hs, c: cs } => {
                let hv = self.src_value(hs).to_vec();
                let cv = self.src_value(cs).to_vec();
                assert_eq!(hv.len(), h, "lstm_step: previous hidden state has wrong length");
                assert_eq!(cv.len(), h, "lstm_step: previous cell state has wrong length");
                (hv, cv)
            }
        }
    }

    /// Reverse sweep from `root` (a scalar node), accumulating parameter
    /// gradients scaled by `seed` into `grads`. Each node is visited exactly
    /// once; running backward twice without re-recording is an error.
    pub fn backward(&mut self, root: Var, seed: F, grads: &mut GradStore<F>) -> Result<Backprop<F>> {
        if self.spent {
            return Err(Error::Precondition(
                "backward was already run on this tape; re-record the forward pass first".into(),
            ));
        }
        self.spent = true;
        if self.nodes[root.0].value.len() != 1 {
            return Err(Error::Precondition("backward root must be a scalar node".into()));
        }
        if grads.len() != self.params.len() {
            return Err(Error::Train(format!(
                "gradient store has {} entries for {} parameters",
                grads.len(),
                self.params.len()
            )));
        }

        let mut node_grads: Vec<Option<Vec<F>>> = (0..self.nodes.len()).map(|_| None).collect();
        let mut aux_grads: Vec<Option<Vec<F>>> = (0..self.nodes.len()).map(|_| None).collect();
        node_grads[root.0] = Some(vec![seed]);

        for i in (0..=root.0).rev() {
            let d = node_grads[i].take();
            let daux = aux_grads[i].take();
            if d.is_none() && daux.is_none() {
                continue;
            }
            let d = d.unwrap_or_else(|| vec![F::zero(); self.nodes[i].value.len()]);
            if let Op::Leaf = self.nodes[i].op {
                node_grads[i] = Some(d);
                continue;
            }
            self.propagate(i, &d, daux.as_deref(), grads, &mut node_grads, &mut aux_grads);
        }

        Ok(Backprop { node_grads })
    }

    fn accum_src(
        &self,
        s: Src,
        contrib: &[F],
        grads: &mut GradStore<F>,
        node_grads: &mut [Option<Vec<F>>],
    ) {
        match s {
            Src::Var(v) => {
                let slot = node_grads[v.0]
                    .get_or_insert_with(|| vec![F::zero(); self.nodes[v.0].value.len()]);
                add_into(contrib, slot);
            }
            Src::Param(p) => {
                add_into(contrib, grads.get_mut(p).data_mut());
            }
        }
    }

    fn accum_src_scaled(
        &self,
        s: Src,
        alpha: F,
        x: &[F],
        grads: &mut GradStore<F>,
        node_grads: &mut [Option<Vec<F>>],
    ) {
        match s {
            Src::Var(v) => {
                let slot = node_grads[v.0]
                    .get_or_insert_with(|| vec![F::zero(); self.nodes[v.0].value.len()]);
                axpy(alpha, x, slot);
            }
            Src::Param(p) => {
                axpy(alpha, x, grads.get_mut(p).data_mut());
            }
        }
    }

    fn propagate(
        &self,
        i: usize,
        d: &[F],
        daux: Option<&[F]>,
        grads: &mut GradStore<F>,
        node_grads: &mut [Option<Vec<F>>],
        aux_grads: &mut [Option<Vec<F>>],
    ) {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf => unreachable!("leaves are handled by the caller"),
            Op::EmbedRow { emb, row } => {
                add_into(d, grads.get_mut(*emb).row_mut(*row));
            }
            Op::MatVec { w, x } => {
                let (rows, cols) = self.params.get(*w).dims2();
                outer_accum(d, self.src_value(*x), grads.get_mut(*w).data_mut());
                let mut dx = vec![F::zero(); cols];
                matvec_t_accum(self.params.get(*w).data(), rows, cols, d, &mut dx);
                self.accum_src(*x, &dx, grads, node_grads);
            }
            Op::Add { a, b } => {
                self.accum_src(*a, d, grads, node_grads);
                self.accum_src(*b, d, grads, node_grads);
            }
            Op::Sub { a, b } => {
                self.accum_src(*a, d, grads, node_grads);
                let neg: Vec<F> = d.iter().map(|&v| -v).collect();
                self.accum_src(*b, &neg, grads, node_grads);
            }
            Op::Mul { a, b } => {
                let da: Vec<F> = d
                    .iter()
                    .zip(self.src_value(*b).iter())
                    .map(|(&g, &bv)| g * bv)
                    .collect();
                let db: Vec<F> = d
                    .iter()
                    .zip(self.src_value(*a).iter())
                    .map(|(&g, &av)| g * av)
                    .collect();
                self.accum_src(*a, &da, grads, node_grads);
                self.accum_src(*b, &db, grads, node_grads);
            }
            Op::Div { a, b } => {
                let bv = self.src_value(*b);
                let z = &node.value;
                let da: Vec<F> = d.iter().zip(bv.iter()).map(|(&g, &b)| g / b).collect();
                let db: Vec<F> = d
                    .iter()
                    .zip(z.iter())
                    .zip(bv.iter())
                    .map(|((&g, &z), &b)| -g * z / b)
                    .collect();
                self.accum_src(*a, &da, grads, node_grads);
                self.accum_src(*b, &db, grads, node_grads);
            }
            Op::ScaleConst { x, c } => {
                self.accum_src_scaled(*x, *c, d, grads, node_grads);
            }
            Op::AddConst { x } => {
                self.accum_src(*x, d, grads, node_grads);
            }
            Op::Sigmoid { x } => {
                let dx: Vec<F> = d
                    .iter()
                    .zip(node.value.iter())
                    .map(|(&g, &y)| g * y * (F::one() - y))
                    .collect();
                self.accum_src(*x, &dx, grads, node_grads);
            }
            Op::Tanh { x } => {
                let dx: Vec<F> = d
                    .iter()
                    .zip(node.value.iter())
                    .map(|(&g, &y)| g * (F::one() - y * y))
                    .collect();
                self.accum_src(*x, &dx, grads, node_grads);
            }
            Op::Relu { x } => {
                let dx: Vec<F> = d
                    .iter()
                    .zip(node.value.iter())
                    .map(|(&g, &y)| if y > F::zero() { g } else { F::zero() })
                    .collect();
                self.accum_src(*x, &dx, grads, node_grads);
            }
            Op::Exp { x } => {
                let dx: Vec<F> = d
                    .iter()
                    .zip(node.value.iter())
                    .map(|(&g, &y)| g * y)
                    .collect();
                self.accum_src(*x, &dx, grads, node_grads);
            }
            Op::Log { x } => {
                let dx: Vec<F> = d
                    .iter()
                    .zip(self.src_value(*x).iter())
                    .map(|(&g, &xv)| g / xv)
                    .collect();
                self.accum_src(*x, &dx, grads, node_grads);
            }
            Op::Concat { a, b } => {
                let la = self.src_len(*a);
                self.accum_src(*a, &d[..la], grads, node_grads);
                self.accum_src(*b, &d[la..], grads, node_grads);
            }
            Op::Dot { a, b } => {
                let g = d[0];
                self.accum_src_scaled(*a, g, self.src_value(*b), grads, node_grads);
                self.accum_src_scaled(*b, g, self.src_value(*a), grads, node_grads);
            }
            Op::Stack { xs } => {
                for (t, &s) in xs.iter().enumerate() {
                    self.accum_src(s, &d[t..t + 1], grads, node_grads);
                }
            }
            Op::Softmax { x } => {
                let y = &node.value;
                let dot: F = d.iter().zip(y.iter()).map(|(&g, &yi)| g * yi).sum();
                let dx: Vec<F> = d
                    .iter()
                    .zip(y.iter())
                    .map(|(&g, &yi)| yi * (g - dot))
                    .collect();
                self.accum_src(*x, &dx, grads, node_grads);
            }
            Op::LogSoftmax { x } => {
                let y = &node.value;
                let sum: F = d.iter().cloned().sum();
                let dx: Vec<F> = d
                    .iter()
                    .zip(y.iter())
                    .map(|(&g, &yi)| g - yi.exp() * sum)
                    .collect();
                self.accum_src(*x, &dx, grads, node_grads);
            }
            Op::Pick { x, index } => {
                let mut dx = vec![F::zero(); self.src_len(*x)];
                dx[*index] = d[0];
                self.accum_src(*x, &dx, grads, node_grads);
            }
            Op::SumAll { x } => {
                let dx = vec![d[0]; self.src_len(*x)];
                self.accum_src(*x, &dx, grads, node_grads);
            }
            Op::WeightedSum { weights, xs } => {
                let mut dw = vec![F::zero(); xs.len()];
                for (t, &xv) in xs.iter().enumerate() {
                    let x = self.src_value(xv);
                    dw[t] = d.iter().zip(x.iter()).map(|(&g, &xi)| g * xi).sum();
                    let alpha = self.src_value(*weights)[t];
                    self.accum_src_scaled(xv, alpha, d, grads, node_grads);
                }
                self.accum_src(*weights, &dw, grads, node_grads);
            }
            Op::Dropout { x, keep, scale } => {
                let dx: Vec<F> = d
                    .iter()
                    .zip(keep.iter())
                    .map(|(&g, &k)| if k { g * *scale } else { F::zero() })
                    .collect();
                self.accum_src(*x, &dx, grads, node_grads);
            }
            Op::LstmStep { cell, x, prev, cache } => {
                self.backward_lstm(
                    i, cell, *x, *prev, cache, d, daux, grads, node_grads, aux_grads,
                );
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn backward_lstm(
        &self,
        i: usize,
        cell: &LstmCellParams,
        x: Src,
        prev: LstmState,
        cache: &LstmCache<F>,
        dh: &[F],
        dc_in: Option<&[F]>,
        grads: &mut GradStore<F>,
        node_grads: &mut [Option<Vec<F>>],
        aux_grads: &mut [Option<Vec<F>>],
    ) {
        let h = cell.hidden_size;
        let c_t = self.nodes[i].aux.as_deref().expect("LSTM node has a cell state");
        let (h_prev, c_prev) = self.lstm_prev_values(cell, prev);
        let one = F::one();

        let mut dc_total = vec![F::zero(); h];
        let mut dpre_i = vec![F::zero(); h];
        let mut dpre_f = vec![F::zero(); h];
        let mut dpre_g = vec![F::zero(); h];
        let mut dpre_o = vec![F::zero(); h];
        for k in 0..h {
            let tanh_c = c_t[k].tanh();
            let o = cache.output[k];
            let f = cache.forget[k];
            let ig = cache.input[k];
            let g = cache.cell_cand[k];
            let mut dc = dh[k] * o * (one - tanh_c * tanh_c);
            if let Some(dci) = dc_in {
                dc += dci[k];
            }
            dc_total[k] = dc;
            dpre_o[k] = dh[k] * tanh_c * o * (one - o);
            dpre_f[k] = dc * c_prev[k] * f * (one - f);
            dpre_i[k] = dc * g * ig * (one - ig);
            dpre_g[k] = dc * ig * (one - g * g);
        }

        let x_val = self.src_value(x).to_vec();
        let input_dim = x_val.len();
        let mut dx = vec![F::zero(); input_dim];
        let mut dh_prev = vec![F::zero(); h];

        let gates = [
            (&dpre_i, cell.w_ii, cell.w_hi, cell.b_ii, cell.b_hi),
            (&dpre_f, cell.w_if, cell.w_hf, cell.b_if, cell.b_hf),
            (&dpre_g, cell.w_ig, cell.w_hg, cell.b_ig, cell.b_hg),
            (&dpre_o, cell.w_io, cell.w_ho, cell.b_io, cell.b_ho),
        ];
        for (dpre, w_i, w_h, b_i, b_h) in gates {
            outer_accum(dpre, &x_val, grads.get_mut(w_i).data_mut());
            outer_accum(dpre, &h_prev, grads.get_mut(w_h).data_mut());
            add_into(dpre, grads.get_mut(b_i).data_mut());
            add_into(dpre, grads.get_mut(b_h).data_mut());
            matvec_t_accum(self.params.get(w_i).data(), h, input_dim, dpre, &mut dx);
            matvec_t_accum(self.params.get(w_h).data(), h, h, dpre, &mut dh_prev);
        }

        let dc_prev: Vec<F> = dc_total
            .iter()
            .zip(cache.forget.iter())
            .map(|(&dc, &f)| dc * f)
            .collect();

        self.accum_src(x, &dx, grads, node_grads);
        match prev {
            LstmState::Zero => {}
            LstmState::Step(v) => {
                let slot =
                    node_grads[v.0].get_or_insert_with(|| vec![F::zero(); self.nodes[v.0].value.len()]);
                add_into(&dh_prev, slot);
                let aux_slot = aux_grads[v.0].get_or_insert_with(|| vec![F::zero(); h]);
                add_into(&dc_prev, aux_slot);
            }
            LstmState::Pair { h: hs, c: cs } => {
                self.accum_src(hs, &dh_prev, grads, node_grads);
                self.accum_src(cs, &dc_prev, grads, node_grads);
            }
        }
    }
}

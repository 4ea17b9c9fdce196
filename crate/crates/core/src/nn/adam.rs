use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{GradStore, ParamStore, Scalar, Tensor};

/// Adam optimizer state: per-parameter first and second moment accumulators
/// plus the shared step counter. Defaults follow the standard setting
/// (beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8) with learning rate 0.0005.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdamState<F> {
    pub learning_rate: F,
    pub beta1: F,
    pub beta2: F,
    pub epsilon: F,
    pub step: u64,
    m: Vec<Tensor<F>>,
    v: Vec<Tensor<F>>,
}


impl<F: Scalar> AdamState<F> {
    pub fn new(params: &ParamStore<F>, learning_rate: F) -> Self {
        AdamState {
            learning_rate,
            beta1: F::from_f64(0.9),
            beta2: F::from_f64(0.999),
            epsilon: F::from_f64(1e-8),
            step: 0,
            m: params.ids().map(|id| params.get(id).zeros_like()).collect(),
            v: params.ids().map(|id| params.get(id).zeros_like()).collect(),
        }
    }

    /// One bias-corrected Adam step applied in place to every trainable
    /// parameter. The gradient store must carry an entry of matching shape
    /// for each parameter.
    pub fn update(&mut self, params: &mut ParamStore<F>, grads: &GradStore<F>) -> Result<()> {
        if grads.len() != self.m.len() {
            return Err(Error::Train(format!(
                "gradient store has {} entries for {} optimizer slots",
                grads.len(),
                self.m.len()
            )));
        }
        self.step += 1;
        let t = self.step as i32;
        let one = F::one();
        let bc1 = one - self.beta1.powi(t);
        let bc2 = one - self.beta2.powi(t);

        for id in params.ids() {
            if !params.is_trainable(id) {
                continue;
            }
            let g = grads.get(id);
            if g.shape() != params.get(id).shape() {
                return Err(Error::Train(format!(
                    "missing or misshapen gradient for parameter '{}'",
                    params.name(id)
                )));
            }
            let m = self.m[id.index()].data_mut();
            let v = self.v[id.index()].data_mut();
            let p = params.get_mut(id).data_mut();
            for k in 0..p.len() {
                let gk = g.data()[k];
                m[k] = self.beta1 * m[k] + (one - self.beta1) * gk;
                v[k] = self.beta2 * v[k] + (one - self.beta2) * gk * gk;
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                p[k] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}

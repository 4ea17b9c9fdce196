//! Central finite-difference gradient checks.
//!
//! These helpers re-evaluate a forward closure at perturbed parameter values,
//! so they are independent of the tape's backward pass and serve as its
//! oracle in tests.

use super::{GradStore, ParamStore, Scalar};

/// Relative error with a unit floor, so tiny gradients near the finite
/// difference noise floor do not produce spurious failures.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Central finite differences of `f` at `x`, one entry per coordinate.
pub fn fd_slice(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut probe = x.to_vec();
    for k in 0..x.len() {
        let orig = probe[k];
        probe[k] = orig + step;
        let up = f(&probe);
        probe[k] = orig - step;
        let down = f(&probe);
        probe[k] = orig;
        out.push((up - down) / (2.0 * step));
    }
    out
}

/// Maximum relative error between `analytic` parameter gradients and central
/// finite differences of `forward` over every trainable parameter scalar.
pub fn max_param_rel_err<P: Scalar>(
    params: &ParamStore<P>,
    analytic: &GradStore<P>,
    forward: impl Fn(&ParamStore<P>) -> f64,
    step: f64,
) -> f64 {
    let mut worst: f64 = 0.0;
    let mut probe = params.clone();
    for id in params.ids() {
        if !params.is_trainable(id) {
            continue;
        }
        for k in 0..params.get(id).len() {
            let orig = probe.get(id).data()[k];
            probe.get_mut(id).data_mut()[k] = orig + P::from_f64(step);
            let up = forward(&probe);
            probe.get_mut(id).data_mut()[k] = orig - P::from_f64(step);
            let down = forward(&probe);
            probe.get_mut(id).data_mut()[k] = orig;
            let fd = (up - down) / (2.0 * step);
            let ad = analytic.get(id).data()[k].to_f64();
            worst = worst.max(rel_err(ad, fd));
        }
    }
    worst
}

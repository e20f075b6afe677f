//! Parameter updates: bias-corrected Adam, plain SGD, and Polyak averaging
//! for target networks.

use serde::{Deserialize, Serialize};

use crate::config::OptimizerKind;
use crate::error::{Error, Result};
use crate::nn::{GradientSet, Mlp};

/// Adam moment accumulators for one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    m: GradientSet,
    v: GradientSet,
}

impl AdamState {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: GradientSet::zeros_like(net),
            v: GradientSet::zeros_like(net),
        }
    }
}

fn check_finite(name: &str, block: &str, layer: usize, values: &[f64]) -> Result<()> {
    if values.iter().any(|g| !g.is_finite()) {
        return Err(Error::Divergence(format!(
            "{name}: non-finite gradient in layer {layer} {block}"
        )));
    }
    Ok(())
}

/// One bias-corrected Adam update. Rejects non-finite gradients, naming the
/// offending parameter block.
pub fn adam_step(net: &mut Mlp, grads: &GradientSet, state: &mut AdamState) -> Result<()> {
    for (l, w) in grads.weights.iter().enumerate() {
        check_finite("adam", "weights", l, w)?;
    }
    for (l, b) in grads.biases.iter().enumerate() {
        check_finite("adam", "biases", l, b)?;
    }
    state.step += 1;
    let t = state.step as f64;
    let bias1 = 1.0 - state.beta1.powf(t);
    let bias2 = 1.0 - state.beta2.powf(t);
    let (weights, biases) = net.params_mut();
    let mut update = |params: &mut Vec<Vec<f64>>,
                      grads: &Vec<Vec<f64>>,
                      m: &mut Vec<Vec<f64>>,
                      v: &mut Vec<Vec<f64>>| {
        for l in 0..params.len() {
            for k in 0..params[l].len() {
                let g = grads[l][k];
                m[l][k] = state.beta1 * m[l][k] + (1.0 - state.beta1) * g;
                v[l][k] = state.beta2 * v[l][k] + (1.0 - state.beta2) * g * g;
                let m_hat = m[l][k] / bias1;
                let v_hat = v[l][k] / bias2;
                params[l][k] -= state.lr * m_hat / (v_hat.sqrt() + state.epsilon);
            }
        }
    };
    update(weights, &grads.weights, &mut state.m.weights, &mut state.v.weights);
    update(biases, &grads.biases, &mut state.m.biases, &mut state.v.biases);
    Ok(())
}

/// Plain gradient descent, exposed as an alternative optimizer tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdState {
    pub lr: f64,
    pub step: u64,
}

pub fn sgd_step(net: &mut Mlp, grads: &GradientSet, state: &mut SgdState) -> Result<()> {
    for (l, w) in grads.weights.iter().enumerate() {
        check_finite("sgd", "weights", l, w)?;
    }
    for (l, b) in grads.biases.iter().enumerate() {
        check_finite("sgd", "biases", l, b)?;
    }
    state.step += 1;
    let (weights, biases) = net.params_mut();
    for (p, g) in weights.iter_mut().zip(&grads.weights) {
        for (x, gi) in p.iter_mut().zip(g) {
            *x -= state.lr * gi;
        }
    }
    for (p, g) in biases.iter_mut().zip(&grads.biases) {
        for (x, gi) in p.iter_mut().zip(g) {
            *x -= state.lr * gi;
        }
    }
    Ok(())
}

/// Optimizer state for one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Adam(AdamState),
    Sgd(SgdState),
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, net: &Mlp, lr: f64) -> Self {
        match kind {
            OptimizerKind::Adam => Optimizer::Adam(AdamState::new(net, lr)),
            OptimizerKind::Sgd => Optimizer::Sgd(SgdState { lr, step: 0 }),
        }
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &GradientSet) -> Result<()> {
        match self {
            Optimizer::Adam(state) => adam_step(net, grads, state),
            Optimizer::Sgd(state) => sgd_step(net, grads, state),
        }
    }

    /// Number of updates applied so far.
    pub fn step_count(&self) -> u64 {
        match self {
            Optimizer::Adam(state) => state.step,
            Optimizer::Sgd(state) => state.step,
        }
    }
}

/// Polyak averaging: `target <- tau * online + (1 - tau) * target`.
pub fn polyak_update(target: &mut Mlp, online: &Mlp, tau: f64) -> Result<()> {
    if !target.same_architecture(online) {
        return Err(Error::Contract(
            "polyak update requires identical architectures".into(),
        ));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Contract(format!("tau must lie in [0, 1], got {tau}")));
    }
    let online_w: Vec<Vec<f64>> = online.weights().to_vec();
    let online_b: Vec<Vec<f64>> = online.biases().to_vec();
    let (weights, biases) = target.params_mut();
    for (tw, ow) in weights.iter_mut().zip(&online_w) {
        for (t, o) in tw.iter_mut().zip(ow) {
            *t = tau * o + (1.0 - tau) * *t;
        }
    }
    for (tb, ob) in biases.iter_mut().zip(&online_b) {
        for (t, o) in tb.iter_mut().zip(ob) {
            *t = tau * o + (1.0 - tau) * *t;
        }
    }
    Ok(())
}

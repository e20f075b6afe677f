//! Minimal dense network engine: forward pass and exact reverse-mode
//! gradients for fixed MLP topologies, in 64-bit throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative at a pre-activation value. relu'(0) := 0.
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = pre.tanh();
                1.0 - t * t
            }
            Activation::Identity => 1.0,
        }
    }
}

/// A dense feed-forward network. Weights are row-major per layer:
/// `weights[l][o * in + i]` connects input `i` to output `o`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    activations: Vec<Activation>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

/// Gradients (or any parameter-shaped value) mirroring an [`Mlp`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientSet {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl GradientSet {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// `self += scale * other`, shapes must match.
    pub fn accumulate(&mut self, other: &GradientSet, scale: f64) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            for x in w {
                *x *= factor;
            }
        }
        for b in &mut self.biases {
            for x in b {
                *x *= factor;
            }
        }
    }
}

/// Intermediates of one forward pass, consumed by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer; `layer_inputs[0]` is the network input.
    layer_inputs: Vec<Vec<f64>>,
    /// Pre-activation values per layer.
    pre_activations: Vec<Vec<f64>>,
}

impl Mlp {
    /// Fan-in scaled uniform initialization; the output layer is scaled by
    /// `output_scale` (use a small value for actors so initial actions sit
    /// near zero).
    pub fn init(
        sizes: &[usize],
        activations: &[Activation],
        output_scale: f64,
        rng: &mut RngStream,
    ) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::Contract("an MLP needs at least two layer sizes".into()));
        }
        if activations.len() != sizes.len() - 1 {
            return Err(Error::Contract(format!(
                "expected {} activations for {} sizes, got {}",
                sizes.len() - 1,
                sizes.len(),
                activations.len()
            )));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(Error::Contract("layer sizes must be positive".into()));
        }
        let layers = sizes.len() - 1;
        let mut weights = Vec::with_capacity(layers);
        let mut biases = Vec::with_capacity(layers);
        for l in 0..layers {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let scale = if l == layers - 1 { output_scale } else { 1.0 };
            let w = (0..fan_in * fan_out)
                .map(|_| scale * rng.uniform_range(-bound, bound))
                .collect();
            let b = (0..fan_out)
                .map(|_| scale * rng.uniform_range(-bound, bound))
                .collect();
            weights.push(w);
            biases.push(b);
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            activations: activations.to_vec(),
            weights,
            biases,
        })
    }

    /// Builds a network from explicit parameters (tests, checkpoints).
    pub fn from_parts(
        sizes: Vec<usize>,
        activations: Vec<Activation>,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if activations.len() != sizes.len() - 1
            || weights.len() != sizes.len() - 1
            || biases.len() != sizes.len() - 1
        {
            return Err(Error::Contract("mismatched MLP component counts".into()));
        }
        for l in 0..weights.len() {
            if weights[l].len() != sizes[l] * sizes[l + 1] || biases[l].len() != sizes[l + 1] {
                return Err(Error::Contract(format!("layer {l} has wrong parameter shape")));
            }
        }
        Ok(Self {
            sizes,
            activations,
            weights,
            biases,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    pub fn same_architecture(&self, other: &Mlp) -> bool {
        self.sizes == other.sizes && self.activations == other.activations
    }

    pub(crate) fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub(crate) fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub(crate) fn params_mut(&mut self) -> (&mut Vec<Vec<f64>>, &mut Vec<Vec<f64>>) {
        (&mut self.weights, &mut self.biases)
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(input)?.0)
    }

    /// Forward pass keeping the intermediates backward needs.
    pub fn forward_cached(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        if input.len() != self.input_dim() {
            return Err(Error::Contract(format!(
                "input has {} components, network expects {}",
                input.len(),
                self.input_dim()
            )));
        }
        let mut layer_inputs = Vec::with_capacity(self.weights.len());
        let mut pre_activations = Vec::with_capacity(self.weights.len());
        let mut current = input.to_vec();
        for (l, act) in self.activations.iter().enumerate() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.weights[l];
            let mut pre = self.biases[l].clone();
            for (o, pre_o) in pre.iter_mut().enumerate() {
                let row = &w[o * fan_in..(o + 1) * fan_in];
                let mut acc = 0.0;
                for (wi, xi) in row.iter().zip(&current) {
                    acc += wi * xi;
                }
                *pre_o += acc;
            }
            let post: Vec<f64> = pre.iter().map(|&p| act.apply(p)).collect();
            layer_inputs.push(current);
            pre_activations.push(pre);
            current = post;
            debug_assert_eq!(current.len(), fan_out);
        }
        Ok((
            current,
            ForwardCache {
                layer_inputs,
                pre_activations,
            },
        ))
    }

    /// Exact reverse-mode gradients of `output . upstream` with respect to
    /// every parameter and to the input. The input gradient realizes the
    /// action-gradient term of the deterministic policy gradient.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        upstream: &[f64],
    ) -> Result<(GradientSet, Vec<f64>)> {
        if upstream.len() != self.output_dim() {
            return Err(Error::Contract(format!(
                "upstream has {} components, network outputs {}",
                upstream.len(),
                self.output_dim()
            )));
        }
        let layers = self.weights.len();
        let mut grads = GradientSet::zeros_like(self);
        // delta over pre-activations of the current layer
        let mut delta: Vec<f64> = upstream
            .iter()
            .zip(&cache.pre_activations[layers - 1])
            .map(|(&u, &p)| u * self.activations[layers - 1].derivative(p))
            .collect();
        for l in (0..layers).rev() {
            let fan_in = self.sizes[l];
            let inputs = &cache.layer_inputs[l];
            {
                let gw = &mut grads.weights[l];
                for (o, &d) in delta.iter().enumerate() {
                    let row = &mut gw[o * fan_in..(o + 1) * fan_in];
                    for (g, &x) in row.iter_mut().zip(inputs) {
                        *g += d * x;
                    }
                }
                for (g, &d) in grads.biases[l].iter_mut().zip(&delta) {
                    *g += d;
                }
            }
            // propagate to the layer below (or to the network input)
            let w = &self.weights[l];
            let mut below = vec![0.0; fan_in];
            for (o, &d) in delta.iter().enumerate() {
                let row = &w[o * fan_in..(o + 1) * fan_in];
                for (b, &wi) in below.iter_mut().zip(row) {
                    *b += d * wi;
                }
            }
            if l == 0 {
                return Ok((grads, below));
            }
            let act = self.activations[l - 1];
            delta = below
                .iter()
                .zip(&cache.pre_activations[l - 1])
                .map(|(&b, &p)| b * act.derivative(p))
                .collect();
        }
        unreachable!("loop returns at layer 0");
    }

    pub fn assert_finite(&self) -> Result<()> {
        for (l, w) in self.weights.iter().enumerate() {
            if w.iter().any(|x| !x.is_finite()) {
                return Err(Error::Divergence(format!("layer {l} weights are non-finite")));
            }
        }
        for (l, b) in self.biases.iter().enumerate() {
            if b.iter().any(|x| !x.is_finite()) {
                return Err(Error::Divergence(format!("layer {l} biases are non-finite")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamId;

    fn rng() -> RngStream {
        RngStream::new(123, StreamId::ActorInit)
    }

    /// Central finite differences of `output . upstream` for every
    /// parameter and input component. Independent of the backward pass.
    pub(crate) fn finite_difference_grads(
        net: &Mlp,
        input: &[f64],
        upstream: &[f64],
        h: f64,
    ) -> (GradientSet, Vec<f64>) {
        let eval = |net: &Mlp, input: &[f64]| -> f64 {
            net.forward(input)
                .unwrap()
                .iter()
                .zip(upstream)
                .map(|(o, u)| o * u)
                .sum()
        };
        let mut grads = GradientSet::zeros_like(net);
        for l in 0..net.weights.len() {
            for k in 0..net.weights[l].len() {
                let mut plus = net.clone();
                let mut minus = net.clone();
                plus.weights[l][k] += h;
                minus.weights[l][k] -= h;
                grads.weights[l][k] = (eval(&plus, input) - eval(&minus, input)) / (2.0 * h);
            }
            for k in 0..net.biases[l].len() {
                let mut plus = net.clone();
                let mut minus = net.clone();
                plus.biases[l][k] += h;
                minus.biases[l][k] -= h;
                grads.biases[l][k] = (eval(&plus, input) - eval(&minus, input)) / (2.0 * h);
            }
        }
        let mut input_grad = vec![0.0; input.len()];
        for (k, g) in input_grad.iter_mut().enumerate() {
            let mut plus = input.to_vec();
            let mut minus = input.to_vec();
            plus[k] += h;
            minus[k] -= h;
            *g = (eval(net, &plus) - eval(net, &minus)) / (2.0 * h);
        }
        (grads, input_grad)
    }

    pub(crate) fn relative_error(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::from_parts(
            vec![3, 2],
            vec![Activation::Tanh],
            vec![vec![0.0; 6]],
            vec![vec![0.0; 2]],
        )
        .unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 0.5]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn scalar_relu_hand_value() {
        let net = Mlp::from_parts(
            vec![1, 1],
            vec![Activation::Relu],
            vec![vec![2.0]],
            vec![vec![1.0]],
        )
        .unwrap();
        assert_eq!(net.forward(&[3.0]).unwrap(), vec![7.0]);
        assert_eq!(net.forward(&[-3.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn forward_rejects_shape_mismatch() {
        let net = Mlp::init(&[4, 8, 2], &[Activation::Relu, Activation::Tanh], 1.0, &mut rng())
            .unwrap();
        assert!(matches!(net.forward(&[0.0; 3]), Err(Error::Contract(_))));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let net = Mlp::init(&[3, 5, 2], &[Activation::Relu, Activation::Identity], 1.0, &mut rng())
            .unwrap();
        let (_, cache) = net.forward_cached(&[0.3, -0.7, 1.1]).unwrap();
        let (grads, input_grad) = net.backward(&cache, &[0.0, 0.0]).unwrap();
        assert!(grads.weights.iter().flatten().all(|&g| g == 0.0));
        assert!(grads.biases.iter().flatten().all(|&g| g == 0.0));
        assert!(input_grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = rng();
        for (sizes, acts) in [
            (vec![2usize, 4, 1], vec![Activation::Relu, Activation::Identity]),
            (vec![3, 8, 8, 2], vec![Activation::Tanh, Activation::Tanh, Activation::Tanh]),
            (vec![4, 6, 3], vec![Activation::Relu, Activation::Tanh]),
        ] {
            let net = Mlp::init(&sizes, &acts, 1.0, &mut rng).unwrap();
            let input: Vec<f64> = (0..sizes[0]).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
            let upstream: Vec<f64> = (0..*sizes.last().unwrap())
                .map(|_| rng.uniform_range(-1.0, 1.0))
                .collect();
            let (_, cache) = net.forward_cached(&input).unwrap();
            let (analytic, analytic_input) = net.backward(&cache, &upstream).unwrap();
            let (numeric, numeric_input) = finite_difference_grads(&net, &input, &upstream, 1e-5);
            let mut worst = 0.0f64;
            for l in 0..analytic.weights.len() {
                for (a, n) in analytic.weights[l].iter().zip(&numeric.weights[l]) {
                    worst = worst.max(relative_error(*a, *n));
                }
                for (a, n) in analytic.biases[l].iter().zip(&numeric.biases[l]) {
                    worst = worst.max(relative_error(*a, *n));
                }
            }
            for (a, n) in analytic_input.iter().zip(&numeric_input) {
                worst = worst.max(relative_error(*a, *n));
            }
            assert!(worst < 1e-5, "max relative error {worst} for sizes {sizes:?}");
        }
    }

    #[test]
    fn relu_subgradient_at_zero_is_zero() {
        // pre-activation exactly 0: w*x + b = 0
        let net = Mlp::from_parts(
            vec![1, 1],
            vec![Activation::Relu],
            vec![vec![1.0]],
            vec![vec![-2.0]],
        )
        .unwrap();
        let (out, cache) = net.forward_cached(&[2.0]).unwrap();
        assert_eq!(out, vec![0.0]);
        let (grads, input_grad) = net.backward(&cache, &[1.0]).unwrap();
        assert_eq!(grads.weights[0][0], 0.0);
        assert_eq!(grads.biases[0][0], 0.0);
        assert_eq!(input_grad[0], 0.0);
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let a = Mlp::init(&[4, 64, 64, 2], &[Activation::Relu, Activation::Relu, Activation::Tanh], 1.0, &mut rng()).unwrap();
        let b = Mlp::init(&[4, 64, 64, 2], &[Activation::Relu, Activation::Relu, Activation::Tanh], 1.0, &mut rng()).unwrap();
        assert_eq!(a, b);
        // parameter count: 4*64+64 + 64*64+64 + 64*2+2
        assert_eq!(a.param_count(), 320 + 4160 + 130);
        for (l, w) in a.weights().iter().enumerate() {
            let bound = 1.0 / (a.sizes[l] as f64).sqrt();
            assert!(w.iter().all(|x| x.abs() <= bound), "layer {l} exceeds bound");
        }
    }

    #[test]
    fn output_scale_shrinks_final_layer() {
        let scaled = Mlp::init(&[4, 8, 2], &[Activation::Relu, Activation::Tanh], 1e-2, &mut rng()).unwrap();
        let bound = 1e-2 / (8.0f64).sqrt();
        assert!(scaled.weights()[1].iter().all(|x| x.abs() <= bound));
        let out = scaled.forward(&[0.5, 0.5, 0.5, 0.5]).unwrap();
        assert!(out.iter().all(|o| o.abs() < 0.05), "initial outputs near zero: {out:?}");
    }

    #[test]
    fn outputs_stay_finite_under_fuzz() {
        let mut rng = rng();
        for _ in 0..200 {
            let net = Mlp::init(
                &[6, 16, 16, 3],
                &[Activation::Relu, Activation::Relu, Activation::Tanh],
                1.0,
                &mut rng,
            )
            .unwrap();
            let input: Vec<f64> = (0..6).map(|_| rng.uniform_range(-100.0, 100.0)).collect();
            let (out, cache) = net.forward_cached(&input).unwrap();
            assert!(out.iter().all(|x| x.is_finite()));
            let upstream: Vec<f64> = (0..3).map(|_| rng.uniform_range(-10.0, 10.0)).collect();
            let (grads, input_grad) = net.backward(&cache, &upstream).unwrap();
            assert!(grads.weights.iter().flatten().all(|g| g.is_finite()));
            assert!(input_grad.iter().all(|g| g.is_finite()));
        }
    }
}

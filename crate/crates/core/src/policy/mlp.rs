use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lang::{ActionId, SymbolicModel};
use crate::model::StateValuation;

use super::{argmax, Policy};

/// Fully connected layer; `weights` is `n_out` rows of `n_in`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn zeros(n_in: usize, n_out: usize) -> Layer {
        Layer { n_in, n_out, weights: vec![0.0; n_in * n_out], biases: vec![0.0; n_out] }
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for (row, b) in self.weights.chunks_exact(self.n_in).zip(&self.biases) {
            let mut acc = *b;
            for (w, xi) in row.iter().zip(x) {
                acc += w * xi;
            }
            out.push(acc);
        }
    }
}

/// Feedforward network with ReLU hidden layers and a linear output layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

/// Gradient buffers shaped like an [`Mlp`]: (weights, biases) per layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Gradients {
    pub fn clear(&mut self) {
        for (w, b) in &mut self.layers {
            w.iter_mut().for_each(|g| *g = 0.0);
            b.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|(w, b)| w.iter().chain(b))
            .fold(0.0, |m: f64, g| m.max(g.abs()))
    }
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Mlp {
        assert!(sizes.len() >= 2, "a network needs input and output sizes");
        Mlp { layers: sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect() }
    }

    /// Uniform Glorot initialization, zero biases.
    pub fn random(sizes: &[usize], rng: &mut impl Rng) -> Mlp {
        let mut net = Mlp::zeros(sizes);
        for layer in &mut net.layers {
            let limit = (6.0 / (layer.n_in + layer.n_out) as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-limit..limit);
            }
        }
        net
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].n_in];
        s.extend(self.layers.iter().map(|l| l.n_out));
        s
    }

    pub fn n_in(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn n_out(&self) -> usize {
        self.layers.last().expect("non-empty network").n_out
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.apply(&cur, &mut next);
            if i < last {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    /// Activations of every layer, input first.
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.n_out);
            layer.apply(acts.last().unwrap(), &mut out);
            if i < last {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(out);
        }
        acts
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            layers: self.layers.iter().map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.biases.len()])).collect(),
        }
    }

    /// Adds the gradient of `0.5 * sum_j (out_j - target_j)^2` to `grads`,
    /// restricted to output `only` when given, and returns the loss.
    pub fn accumulate(&self, x: &[f64], target: &[f64], only: Option<usize>, grads: &mut Gradients) -> f64 {
        let acts = self.activations(x);
        let out = acts.last().unwrap();
        let mut delta: Vec<f64> = vec![0.0; out.len()];
        let mut loss = 0.0;
        for j in 0..out.len() {
            if only.is_none_or(|k| k == j) {
                let d = out[j] - target[j];
                delta[j] = d;
                loss += 0.5 * d * d;
            }
        }
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let input = &acts[li];
            let (gw, gb) = &mut grads.layers[li];
            for (o, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                gb[o] += d;
                let row = &mut gw[o * layer.n_in..(o + 1) * layer.n_in];
                for (g, a) in row.iter_mut().zip(input) {
                    *g += d * a;
                }
            }
            if li == 0 {
                break;
            }
            let mut prev = vec![0.0; layer.n_in];
            for (o, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                let row = &layer.weights[o * layer.n_in..(o + 1) * layer.n_in];
                for (p, w) in prev.iter_mut().zip(row) {
                    *p += d * w;
                }
            }
            // ReLU derivative, taken as 0 at the kink.
            for (p, a) in prev.iter_mut().zip(input) {
                if *a <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }
        loss
    }

    /// Plain gradient step `theta -= step * grad`.
    pub fn apply_gradients(&mut self, grads: &Gradients, step: f64) {
        for (layer, (gw, gb)) in self.layers.iter_mut().zip(&grads.layers) {
            for (w, g) in layer.weights.iter_mut().zip(gw) {
                *w -= step * g;
            }
            for (b, g) in layer.biases.iter_mut().zip(gb) {
                *b -= step * g;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }

    fn param_mut(&mut self, layer: usize, index: usize) -> &mut f64 {
        let l = &mut self.layers[layer];
        if index < l.weights.len() {
            &mut l.weights[index]
        } else {
            &mut l.biases[index - l.weights.len()]
        }
    }
}

/// Network policy over min-max scaled inputs: each variable is mapped to
/// `[0, 1]` by its declared bounds. Acts by argmax over the outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpPolicy {
    pub net: Mlp,
    pub input_lo: Vec<f64>,
    pub input_hi: Vec<f64>,
}

impl MlpPolicy {
    fn bounds(model: &SymbolicModel) -> (Vec<f64>, Vec<f64>) {
        model.variables.iter().map(|v| {
            let (lo, hi) = v.bounds();
            (lo as f64, hi as f64)
        }).unzip()
    }

    fn sizes(model: &SymbolicModel, hidden: &[usize]) -> Vec<usize> {
        let mut sizes = vec![model.variables.len()];
        sizes.extend_from_slice(hidden);
        sizes.push(model.actions.len());
        sizes
    }

    pub fn zeros(model: &SymbolicModel, hidden: &[usize]) -> MlpPolicy {
        let (input_lo, input_hi) = Self::bounds(model);
        MlpPolicy { net: Mlp::zeros(&Self::sizes(model, hidden)), input_lo, input_hi }
    }

    pub fn random(model: &SymbolicModel, hidden: &[usize], rng: &mut impl Rng) -> MlpPolicy {
        let (input_lo, input_hi) = Self::bounds(model);
        MlpPolicy { net: Mlp::random(&Self::sizes(model, hidden), rng), input_lo, input_hi }
    }

    pub fn encode(&self, state: &[i64]) -> Vec<f64> {
        state
            .iter()
            .zip(self.input_lo.iter().zip(&self.input_hi))
            .map(|(&v, (&lo, &hi))| if hi > lo { (v as f64 - lo) / (hi - lo) } else { 0.0 })
            .collect()
    }

    pub fn q_values(&self, state: &StateValuation) -> Vec<f64> {
        self.net.forward(&self.encode(state))
    }
}

impl Policy for MlpPolicy {
    fn act(&self, state: &StateValuation) -> ActionId {
        ActionId(argmax(&self.q_values(state)) as u16)
    }
}

const FD_STEP: f64 = 1e-5;

fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Largest relative difference between the analytic gradient of the summed
/// squared-error loss over `(inputs, targets)` and central finite
/// differences, over all parameters.
pub fn mlp_gradient_error(net: &Mlp, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> f64 {
    let mut grads = net.zero_gradients();
    for (x, t) in inputs.iter().zip(targets) {
        net.accumulate(x, t, None, &mut grads);
    }
    let loss = |n: &Mlp| -> f64 {
        inputs
            .iter()
            .zip(targets)
            .map(|(x, t)| n.forward(x).iter().zip(t).map(|(o, t)| 0.5 * (o - t) * (o - t)).sum::<f64>())
            .sum()
    };
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for (li, (gw, gb)) in grads.layers.iter().enumerate() {
        for (pi, analytic) in gw.iter().chain(gb).enumerate() {
            let original = *probe.param_mut(li, pi);
            *probe.param_mut(li, pi) = original + FD_STEP;
            let up = loss(&probe);
            *probe.param_mut(li, pi) = original - FD_STEP;
            let down = loss(&probe);
            *probe.param_mut(li, pi) = original;
            let numeric = (up - down) / (2.0 * FD_STEP);
            worst = worst.max(relative_error(*analytic, numeric));
        }
    }
    worst
}

/// Gradient check on eight random inputs in `[0, 1]` with random targets in
/// `[-1, 1]`, drawn from a fixed seed.
pub fn mlp_backprop_check(policy: &MlpPolicy) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6772_6164);
    let n_in = policy.net.n_in();
    let n_out = policy.net.n_out();
    let inputs: Vec<Vec<f64>> = (0..8).map(|_| (0..n_in).map(|_| rng.random::<f64>()).collect()).collect();
    let targets: Vec<Vec<f64>> =
        (0..8).map(|_| (0..n_out).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    mlp_gradient_error(&policy.net, &inputs, &targets)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_applies_relu_on_hidden_only() {
        let mut net = Mlp::zeros(&[1, 1, 1]);
        net.layers[0].weights[0] = -1.0;
        net.layers[1].biases[0] = -2.0;
        assert_eq!(net.forward(&[3.0]), vec![-2.0]);
        net.layers[0].weights[0] = 1.0;
        net.layers[1].weights[0] = 2.0;
        assert_eq!(net.forward(&[3.0]), vec![4.0]);
    }

    #[test]
    fn zero_net_zero_target_has_zero_gradient() {
        let net = Mlp::zeros(&[3, 4, 2]);
        let mut g = net.zero_gradients();
        let loss = net.accumulate(&[0.2, 0.5, 0.9], &[0.0, 0.0], None, &mut g);
        assert_eq!(loss, 0.0);
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn linear_net_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::random(&[4, 3], &mut rng);
        let inputs = vec![vec![0.1, 0.7, 0.3, 0.9], vec![0.5, 0.2, 0.8, 0.4]];
        let targets = vec![vec![1.0, -1.0, 0.5], vec![0.0, 0.3, -0.2]];
        assert!(mlp_gradient_error(&net, &inputs, &targets) < 1e-6);
    }

    #[test]
    fn single_output_loss_touches_one_row_of_the_last_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = Mlp::random(&[2, 3], &mut rng);
        let mut g = net.zero_gradients();
        net.accumulate(&[0.5, 0.5], &[9.0, 9.0, 9.0], Some(1), &mut g);
        let (gw, gb) = &g.layers[0];
        assert_eq!(&gw[0..2], &[0.0, 0.0]);
        assert_ne!(gw[2], 0.0);
        assert_eq!(gb[0], 0.0);
        assert_eq!(gb[2], 0.0);
    }
}

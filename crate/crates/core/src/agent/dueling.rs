//! Dueling Q-network: a shared ReLU trunk feeding a state-value head and an
//! advantage head, recombined as `Q = V + A − mean_a(A)`.
//!
//! Forward and backward passes are written out by hand on `ndarray` matrices.
//! Rows are samples.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng;

use crate::environment::Action;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `fan_in × fan_out`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    /// Uniform initialisation with bound `sqrt(6 / (fan_in + fan_out))`.
    pub fn random<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let weights = Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-bound..=bound));
        Self {
            weights,
            bias: Array1::zeros(fan_out),
        }
    }

    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weights: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weights.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.ncols()
    }

    fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.weights) + &self.bias
    }

    /// Parameter gradients for this layer and the gradient w.r.t. its input.
    fn backward(&self, input: &Array2<f64>, d_out: &Array2<f64>) -> (Dense, Array2<f64>) {
        let grad = Dense {
            weights: input.t().dot(d_out),
            bias: d_out.sum_axis(Axis(0)),
        };
        (grad, d_out.dot(&self.weights.t()))
    }
}

fn relu(mut x: Array2<f64>) -> Array2<f64> {
    x.mapv_inplace(|v| v.max(0.0));
    x
}

/// Zero the gradient wherever the unit was inactive.
fn relu_backward(mut grad: Array2<f64>, activation: &Array2<f64>) -> Array2<f64> {
    grad.zip_mut_with(activation, |g, &a| {
        if a <= 0.0 {
            *g = 0.0;
        }
    });
    grad
}

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `acts[0]` is the input, `acts[k + 1]` the output of trunk layer `k`.
    acts: Vec<Array2<f64>>,
    value_hidden: Array2<f64>,
    advantage_hidden: Array2<f64>,
    pub value: Array2<f64>,
    pub advantage: Array2<f64>,
    pub q: Array2<f64>,
}

impl ForwardCache {
    fn features(&self) -> &Array2<f64> {
        self.acts.last().expect("input is always cached")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DuelingNet {
    pub trunk: Vec<Dense>,
    pub value_hidden: Dense,
    pub value_out: Dense,
    pub advantage_hidden: Dense,
    pub advantage_out: Dense,
}

impl DuelingNet {
    pub fn new<R: Rng + ?Sized>(input: usize, trunk_widths: &[usize], head_width: usize, rng: &mut R) -> Self {
        let mut trunk = Vec::with_capacity(trunk_widths.len());
        let mut fan_in = input;
        for &w in trunk_widths {
            trunk.push(Dense::random(fan_in, w, rng));
            fan_in = w;
        }
        Self {
            trunk,
            value_hidden: Dense::random(fan_in, head_width, rng),
            value_out: Dense::random(head_width, 1, rng),
            advantage_hidden: Dense::random(fan_in, head_width, rng),
            advantage_out: Dense::random(head_width, Action::COUNT, rng),
        }
    }

    /// Same shape, all parameters zero.
    pub fn zeros_like(&self) -> Self {
        let z = |d: &Dense| Dense::zeros(d.fan_in(), d.fan_out());
        Self {
            trunk: self.trunk.iter().map(z).collect(),
            value_hidden: z(&self.value_hidden),
            value_out: z(&self.value_out),
            advantage_hidden: z(&self.advantage_hidden),
            advantage_out: z(&self.advantage_out),
        }
    }

    pub fn input_width(&self) -> usize {
        self.trunk.first().unwrap_or(&self.value_hidden).fan_in()
    }

    pub fn trunk_widths(&self) -> Vec<usize> {
        self.trunk.iter().map(Dense::fan_out).collect()
    }

    pub fn head_width(&self) -> usize {
        self.value_hidden.fan_out()
    }

    /// Layer names in a fixed order, matching [`Self::layers`].
    pub fn layer_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (0..self.trunk.len()).map(|k| format!("trunk.{k}")).collect();
        names.extend(["value.hidden", "value.out", "advantage.hidden", "advantage.out"].map(String::from));
        names
    }

    pub fn layers(&self) -> Vec<&Dense> {
        let mut out: Vec<&Dense> = self.trunk.iter().collect();
        out.extend([&self.value_hidden, &self.value_out, &self.advantage_hidden, &self.advantage_out]);
        out
    }

    pub fn layers_mut(&mut self) -> Vec<&mut Dense> {
        let mut out: Vec<&mut Dense> = self.trunk.iter_mut().collect();
        out.extend([
            &mut self.value_hidden,
            &mut self.value_out,
            &mut self.advantage_hidden,
            &mut self.advantage_out,
        ]);
        out
    }

    pub fn n_params(&self) -> usize {
        self.layers().iter().map(|d| d.weights.len() + d.bias.len()).sum()
    }

    pub fn forward_cached(&self, obs: &Array2<f64>) -> Result<ForwardCache> {
        if obs.ncols() != self.input_width() {
            return Err(Error::Shape(format!(
                "observation width {} does not match network input {}",
                obs.ncols(),
                self.input_width()
            )));
        }
        let mut acts = Vec::with_capacity(self.trunk.len() + 1);
        acts.push(obs.clone());
        for layer in &self.trunk {
            let next = relu(layer.forward(acts.last().unwrap()));
            acts.push(next);
        }
        let features = acts.last().unwrap();
        let value_hidden = relu(self.value_hidden.forward(features));
        let advantage_hidden = relu(self.advantage_hidden.forward(features));
        let value = self.value_out.forward(&value_hidden);
        let advantage = self.advantage_out.forward(&advantage_hidden);
        let adv_mean = advantage.mean_axis(Axis(1)).unwrap().insert_axis(Axis(1));
        let q = &advantage - &adv_mean + &value;
        Ok(ForwardCache {
            acts,
            value_hidden,
            advantage_hidden,
            value,
            advantage,
            q,
        })
    }

    /// Q-values for a batch of observations.
    pub fn forward_batch(&self, obs: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_cached(obs)?.q)
    }

    pub fn forward(&self, obs: &[f64]) -> Result<[f64; Action::COUNT]> {
        let batch = ArrayView1::from(obs).insert_axis(Axis(0)).to_owned();
        let q = self.forward_batch(&batch)?;
        let mut out = [0.0; Action::COUNT];
        for (o, v) in out.iter_mut().zip(q.row(0)) {
            *o = *v;
        }
        Ok(out)
    }

    /// Gradients of all parameters given `dL/dQ`.
    pub fn backward(&self, cache: &ForwardCache, d_q: &Array2<f64>) -> DuelingNet {
        let d_value = d_q.sum_axis(Axis(1)).insert_axis(Axis(1));
        let d_q_mean = d_q.mean_axis(Axis(1)).unwrap().insert_axis(Axis(1));
        let d_adv = d_q - &d_q_mean;

        let (g_value_out, d_vh) = self.value_out.backward(&cache.value_hidden, &d_value);
        let d_vh = relu_backward(d_vh, &cache.value_hidden);
        let (g_value_hidden, d_feat_v) = self.value_hidden.backward(cache.features(), &d_vh);

        let (g_adv_out, d_ah) = self.advantage_out.backward(&cache.advantage_hidden, &d_adv);
        let d_ah = relu_backward(d_ah, &cache.advantage_hidden);
        let (g_adv_hidden, d_feat_a) = self.advantage_hidden.backward(cache.features(), &d_ah);

        let mut d = d_feat_v + d_feat_a;
        let mut g_trunk = Vec::with_capacity(self.trunk.len());
        for k in (0..self.trunk.len()).rev() {
            let d_pre = relu_backward(d, &cache.acts[k + 1]);
            let (g, d_in) = self.trunk[k].backward(&cache.acts[k], &d_pre);
            g_trunk.push(g);
            d = d_in;
        }
        g_trunk.reverse();

        DuelingNet {
            trunk: g_trunk,
            value_hidden: g_value_hidden,
            value_out: g_value_out,
            advantage_hidden: g_adv_hidden,
            advantage_out: g_adv_out,
        }
    }

    /// Mean squared error between `Q(s_i, a_i)` and `targets[i]`, and its
    /// gradient with respect to every parameter.
    pub fn loss_and_gradients(
        &self,
        obs: &Array2<f64>,
        actions: &[usize],
        targets: &[f64],
    ) -> Result<(f64, DuelingNet)> {
        let n = obs.nrows();
        if actions.len() != n || targets.len() != n || n == 0 {
            return Err(Error::Shape(format!(
                "batch of {n} observations with {} actions and {} targets",
                actions.len(),
                targets.len()
            )));
        }
        let cache = self.forward_cached(obs)?;
        let mut d_q = Array2::zeros(cache.q.raw_dim());
        let mut loss = 0.0;
        for i in 0..n {
            let err = cache.q[[i, actions[i]]] - targets[i];
            loss += err * err;
            d_q[[i, actions[i]]] = 2.0 * err / n as f64;
        }
        Ok((loss / n as f64, self.backward(&cache, &d_q)))
    }

    pub fn loss(&self, obs: &Array2<f64>, actions: &[usize], targets: &[f64]) -> Result<f64> {
        let q = self.forward_batch(obs)?;
        let n = obs.nrows();
        Ok((0..n).map(|i| (q[[i, actions[i]]] - targets[i]).powi(2)).sum::<f64>() / n as f64)
    }

    pub fn grad_norm(&self) -> f64 {
        self.layers()
            .iter()
            .map(|d| d.weights.iter().chain(d.bias.iter()).map(|g| g * g).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    /// `θ ← θ − lr·g`, with `g` rescaled to global L2 norm `clip` if it is
    /// larger. Returns the norm before clipping.
    pub fn sgd_step(&mut self, grads: &DuelingNet, lr: f64, clip: Option<f64>) -> f64 {
        let norm = grads.grad_norm();
        let scale = match clip {
            Some(c) if norm > c => c / norm,
            _ => 1.0,
        };
        for (layer, grad) in self.layers_mut().into_iter().zip(grads.layers()) {
            layer.weights.scaled_add(-lr * scale, &grad.weights);
            layer.bias.scaled_add(-lr * scale, &grad.bias);
        }
        norm
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn mean_advantage_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = DuelingNet::new(6, &[8, 8], 4, &mut rng);
        let obs = Array2::from_shape_fn((7, 6), |_| rng.random::<f64>());
        let cache = net.forward_cached(&obs).unwrap();
        for i in 0..7 {
            let mean_q = cache.q.row(i).mean().unwrap();
            assert!((mean_q - cache.value[[i, 0]]).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_wrong_width() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = DuelingNet::new(3, &[4], 4, &mut rng);
        assert!(matches!(net.forward(&[0.0; 4]), Err(Error::Shape(_))));
    }

    #[test]
    fn sgd_reduces_loss_on_fixed_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut net = DuelingNet::new(3, &[16], 8, &mut rng);
        let obs = Array2::from_shape_fn((16, 3), |_| rng.random::<f64>());
        let actions: Vec<usize> = (0..16).map(|i| i % 5).collect();
        let targets: Vec<f64> = (0..16).map(|i| i as f64 / 16.0).collect();
        let before = net.loss(&obs, &actions, &targets).unwrap();
        for _ in 0..200 {
            let (_, g) = net.loss_and_gradients(&obs, &actions, &targets).unwrap();
            net.sgd_step(&g, 0.05, None);
        }
        assert!(net.loss(&obs, &actions, &targets).unwrap() < 0.5 * before);
    }

    #[test]
    fn clipping_caps_update_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = DuelingNet::new(2, &[4], 4, &mut rng);
        let obs = Array2::from_shape_fn((4, 2), |_| rng.random::<f64>());
        let (_, g) = net.loss_and_gradients(&obs, &[0, 1, 2, 3], &[1e3; 4]).unwrap();
        let mut stepped = net.clone();
        let norm = stepped.sgd_step(&g, 1.0, Some(0.5));
        assert!(norm > 0.5);
        let mut diff = net.zeros_like();
        for ((d, a), b) in diff.layers_mut().into_iter().zip(net.layers()).zip(stepped.layers()) {
            d.weights = &a.weights - &b.weights;
            d.bias = &a.bias - &b.bias;
        }
        assert!((diff.grad_norm() - 0.5).abs() < 1e-9);
    }
}

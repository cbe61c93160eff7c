//! A small fully connected classifier trained with and without angular
//! regularizers on a synthetic three-class problem.
//!
//! Network weights are `n_out x fan_in` matrices, so each row is one
//! neuron's incoming weight vector. The regularizer sees exactly those rows;
//! biases are never regularized.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::analyzer::{angle_stats, AngleStats, DEFAULT_BINS};
use crate::error::{Error, Result};
use crate::geometry::PointSet;
use crate::losses::{regularization, LayerSet, LossKind};
use crate::rng::{mix64, seeded, standard_normal};

pub const CLASSES: usize = 3;
pub const TRAIN_SIZE: usize = 1000;
pub const TEST_SIZE: usize = 500;
const CLASS_RADIUS: f64 = 2.0;
const CLASS_STD: f64 = 0.9;

/// Threshold used for the per-layer "similar pairs" count.
pub const LAYER_THRESHOLD: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularizer {
    None,
    Mma,
    Orthogonal,
    RieszFisher { s: f64 },
    Logarithmic,
}

impl Regularizer {
    pub fn loss_kind(self) -> Option<LossKind> {
        match self {
            Regularizer::None => None,
            Regularizer::Mma => Some(LossKind::Mma),
            Regularizer::Orthogonal => Some(LossKind::Orthogonal),
            Regularizer::RieszFisher { s } => Some(LossKind::RieszFisher { s }),
            Regularizer::Logarithmic => Some(LossKind::Logarithmic),
        }
    }

    pub fn default_lambda(self) -> f64 {
        match self {
            Regularizer::None => 0.0,
            Regularizer::Mma => 0.07,
            Regularizer::Orthogonal => 1e-4,
            Regularizer::RieszFisher { .. } => 1e-5,
            Regularizer::Logarithmic => 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoConfig {
    pub reg: Regularizer,
    pub lambda: f64,
    pub include_output_layer: bool,
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub hidden: Vec<usize>,
}

impl DemoConfig {
    pub fn new(reg: Regularizer, seed: u64) -> Self {
        Self {
            reg,
            lambda: reg.default_lambda(),
            include_output_layer: true,
            epochs: 200,
            lr: 0.05,
            momentum: 0.9,
            batch_size: 64,
            seed,
            hidden: vec![64, 64],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if let Some(kind) = self.reg.loss_kind() {
            kind.validate()?;
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be a nonnegative number");
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch size must be positive");
        }
        if !(self.lr > 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return bad("learning rate must be positive and momentum in [0, 1)");
        }
        if self.hidden.contains(&0) {
            return bad("hidden layers must have at least one neuron");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<[f64; 2]>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_counts(&self) -> [usize; CLASSES] {
        let mut counts = [0; CLASSES];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }
}

fn gaussian_mixture(size: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Dataset {
    let mut inputs = Vec::with_capacity(size);
    let mut labels = Vec::with_capacity(size);
    for k in 0..size {
        let class = k % CLASSES;
        let angle = 2.0 * PI * class as f64 / CLASSES as f64;
        let x = CLASS_RADIUS * angle.cos() + CLASS_STD * standard_normal(rng);
        let y = CLASS_RADIUS * angle.sin() + CLASS_STD * standard_normal(rng);
        inputs.push([x, y]);
        labels.push(class);
    }
    Dataset { inputs, labels }
}

/// Three isotropic Gaussians with means at 0, 120 and 240 degrees on a circle
/// of radius 2. Sample `k` belongs to class `k % 3`, so the 1000 training
/// points split 334/333/333 and the 500 test points 167/167/166.
pub fn make_dataset(seed: u64) -> (Dataset, Dataset) {
    let mut rng = seeded(seed);
    let train = gaussian_mixture(TRAIN_SIZE, &mut rng);
    let test = gaussian_mixture(TEST_SIZE, &mut rng);
    (train, test)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `n_out x fan_in`.
    pub weights: PointSet,
    pub bias: Vec<f64>,
}

/// Fully connected network with ReLU between layers and a linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Gradients shaped like an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub weights: Vec<PointSet>,
    pub bias: Vec<Vec<f64>>,
}

impl MlpGrads {
    fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net
                .layers
                .iter()
                .map(|l| PointSet::zeros(l.weights.n(), l.weights.d()))
                .collect(),
            bias: net.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    /// Weights then biases, layer by layer, matching [`Mlp::flat_params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.bias) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b);
        }
        out
    }
}

impl Mlp {
    /// Weights drawn from `N(0, 1/fan_in)`, biases zero.
    pub fn new(sizes: &[usize], seed: u64) -> Self {
        let mut rng = seeded(seed);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let scale = 1.0 / (fan_in as f64).sqrt();
                let data = (0..fan_in * fan_out)
                    .map(|_| scale * standard_normal(&mut rng))
                    .collect();
                Dense {
                    weights: PointSet::new(fan_out, fan_in, data).expect("positive layer sizes"),
                    bias: vec![0.0; fan_out],
                }
            })
            .collect();
        Self { layers }
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(l.weights.as_slice());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_flat_params(&mut self, values: &[f64]) {
        let mut at = 0;
        for l in &mut self.layers {
            let w = l.weights.as_mut_slice();
            w.copy_from_slice(&values[at..at + w.len()]);
            at += w.len();
            let len = l.bias.len();
            l.bias.copy_from_slice(&values[at..at + len]);
            at += len;
        }
    }

    /// Activations of every layer; the last entry holds the logits.
    fn forward(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let input = acts.last().expect("input present");
            let mut out: Vec<f64> = layer
                .weights
                .rows()
                .zip(&layer.bias)
                .map(|(row, b)| b + row.iter().zip(input).map(|(w, a)| w * a).sum::<f64>())
                .collect();
            if k != last {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(out);
        }
        acts
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let logits = self.forward(x).pop().expect("logits");
        let mut best = 0;
        for (k, &v) in logits.iter().enumerate() {
            if v > logits[best] {
                best = k;
            }
        }
        best
    }

    pub fn accuracy(&self, data: &Dataset) -> f64 {
        let correct = data
            .inputs
            .iter()
            .zip(&data.labels)
            .filter(|(x, &y)| self.predict(&x[..]) == y)
            .count();
        correct as f64 / data.len() as f64
    }

    /// Mean softmax cross-entropy over the given samples and its gradient.
    pub fn task_loss_grad(&self, data: &Dataset, indices: &[usize]) -> (f64, MlpGrads) {
        let mut grads = MlpGrads::zeros_like(self);
        let mut total = 0.0;
        let scale = 1.0 / indices.len() as f64;
        for &i in indices {
            let acts = self.forward(&data.inputs[i]);
            let logits = acts.last().expect("logits");
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
            let sum: f64 = exps.iter().sum();
            let y = data.labels[i];
            total += sum.ln() - (logits[y] - max);

            let mut delta: Vec<f64> = exps.iter().map(|e| e / sum * scale).collect();
            delta[y] -= scale;
            for k in (0..self.layers.len()).rev() {
                let input = &acts[k];
                let gw = &mut grads.weights[k];
                for (o, &dz) in delta.iter().enumerate() {
                    grads.bias[k][o] += dz;
                    gw.row_mut(o).iter_mut().zip(input).for_each(|(g, a)| *g += dz * a);
                }
                if k == 0 {
                    break;
                }
                let w = &self.layers[k].weights;
                delta = (0..w.d())
                    .map(|c| {
                        if input[c] > 0.0 {
                            (0..w.n()).map(|o| w.row(o)[c] * delta[o]).sum()
                        } else {
                            0.0
                        }
                    })
                    .collect();
            }
        }
        (total * scale, grads)
    }

    /// Indices of the layers the regularizer acts on.
    pub fn regularized_layers(&self, include_output: bool) -> Vec<usize> {
        let count = if include_output {
            self.layers.len()
        } else {
            self.layers.len() - 1
        };
        (0..count).collect()
    }

    pub fn layer_set(&self, include_output: bool, lambda: f64) -> LayerSet {
        LayerSet::new(
            self.regularized_layers(include_output)
                .into_iter()
                .map(|k| self.layers[k].weights.clone())
                .collect(),
            lambda,
        )
    }
}

/// Regularizer value over the included layers and its gradient added into `grads`.
fn add_regularizer(net: &Mlp, config: &DemoConfig, grads: Option<&mut MlpGrads>) -> Result<f64> {
    let kind = match config.reg.loss_kind() {
        Some(kind) if config.lambda > 0.0 => kind,
        _ => return Ok(0.0),
    };
    let layers = net.layer_set(config.include_output_layer, config.lambda);
    let eval = regularization(kind, &layers)?;
    if let Some(grads) = grads {
        for (k, g) in net.regularized_layers(config.include_output_layer).into_iter().zip(&eval.gradients) {
            grads.weights[k]
                .as_mut_slice()
                .iter_mut()
                .zip(g.as_slice())
                .for_each(|(a, b)| *a += b);
        }
    }
    Ok(eval.value)
}

/// Task loss plus regularizer on a batch, with the full gradient.
pub fn objective_grad(net: &Mlp, config: &DemoConfig, data: &Dataset, indices: &[usize]) -> Result<(f64, f64, MlpGrads)> {
    let (task, mut grads) = net.task_loss_grad(data, indices);
    let reg = add_regularizer(net, config, Some(&mut grads))?;
    Ok((task, reg, grads))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoReport {
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    /// `None` for layers with fewer than two neurons.
    pub per_layer_min_angle_deg: Vec<Option<f64>>,
    pub per_layer_count_above_02: Vec<Option<usize>>,
    /// `(epoch, task_loss, reg_loss)` measured on the full training set at
    /// the end of each epoch.
    pub loss_curve: Vec<(usize, f64, f64)>,
    pub regularized_layers: Vec<usize>,
}

/// Angle statistics of every layer; single-neuron layers are `None`.
pub fn layer_angle_report(net: &Mlp) -> Result<Vec<Option<AngleStats>>> {
    net.layers
        .iter()
        .map(|l| {
            if l.weights.n() < 2 {
                log::warn!("layer with a single neuron has no pairwise angles");
                Ok(None)
            } else {
                angle_stats(&l.weights, LAYER_THRESHOLD, DEFAULT_BINS).map(Some)
            }
        })
        .collect()
}

pub fn network_sizes(config: &DemoConfig) -> Vec<usize> {
    let mut sizes = vec![2];
    sizes.extend_from_slice(&config.hidden);
    sizes.push(CLASSES);
    sizes
}

/// Trains the network and returns it with its report.
///
/// Streams: the dataset uses `seed`, weight init `mix64(seed ^ 1)` and batch
/// shuffling `mix64(seed ^ 2)`.
pub fn train(config: &DemoConfig) -> Result<(Mlp, DemoReport)> {
    config.validate()?;
    let (train_set, test_set) = make_dataset(config.seed);
    let mut net = Mlp::new(&network_sizes(config), mix64(config.seed ^ 1));
    let mut shuffle_rng = seeded(mix64(config.seed ^ 2));

    let mut velocity = MlpGrads::zeros_like(&net);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let all: Vec<usize> = order.clone();
    let mut loss_curve = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks(config.batch_size) {
            let (_, _, grads) = objective_grad(&net, config, &train_set, batch)?;
            for (k, layer) in net.layers.iter_mut().enumerate() {
                let params = layer
                    .weights
                    .as_mut_slice()
                    .iter_mut()
                    .chain(layer.bias.iter_mut());
                let vel = velocity.weights[k]
                    .as_mut_slice()
                    .iter_mut()
                    .chain(velocity.bias[k].iter_mut());
                let g = grads.weights[k].as_slice().iter().chain(&grads.bias[k]);
                for ((w, v), g) in params.zip(vel).zip(g) {
                    *v = config.momentum * *v - config.lr * g;
                    *w += *v;
                }
            }
        }
        let (task, _) = net.task_loss_grad(&train_set, &all);
        let reg = add_regularizer(&net, config, None)?;
        if !task.is_finite() || !reg.is_finite() {
            return Err(Error::NonFiniteLoss {
                iteration: epoch,
                loss_trace: Vec::new(),
            });
        }
        loss_curve.push((epoch, task, reg));
    }

    let stats = layer_angle_report(&net)?;
    let report = DemoReport {
        train_accuracy: net.accuracy(&train_set),
        test_accuracy: net.accuracy(&test_set),
        per_layer_min_angle_deg: stats.iter().map(|s| s.as_ref().map(|s| s.min_angle_deg)).collect(),
        per_layer_count_above_02: stats
            .iter()
            .map(|s| s.as_ref().map(|s| s.count_above_threshold))
            .collect(),
        loss_curve,
        regularized_layers: net.regularized_layers(config.include_output_layer),
    };
    Ok((net, report))
}

pub fn train_mlp(config: &DemoConfig) -> Result<DemoReport> {
    train(config).map(|(_, report)| report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_is_deterministic_and_balanced() {
        let (a, b) = make_dataset(4);
        assert_eq!(make_dataset(4), (a.clone(), b.clone()));
        assert_ne!(make_dataset(5).0, a);
        assert_eq!(a.len(), 1000);
        assert_eq!(b.len(), 500);
        assert_eq!(a.class_counts(), [334, 333, 333]);
        assert_eq!(b.class_counts(), [167, 167, 166]);
    }

    #[test]
    fn network_shapes() {
        let net = Mlp::new(&[2, 64, 64, 3], 1);
        let shapes: Vec<(usize, usize)> = net.layers.iter().map(|l| (l.weights.n(), l.weights.d())).collect();
        assert_eq!(shapes, vec![(64, 2), (64, 64), (3, 64)]);
        assert_eq!(net.regularized_layers(true), vec![0, 1, 2]);
        assert_eq!(net.regularized_layers(false), vec![0, 1]);
    }

    #[test]
    fn flat_params_round_trip() {
        let mut net = Mlp::new(&[2, 4, 3], 9);
        let mut p = net.flat_params();
        assert_eq!(p.len(), 2 * 4 + 4 + 4 * 3 + 3);
        p[0] = 42.0;
        net.set_flat_params(&p);
        assert_eq!(net.layers[0].weights.as_slice()[0], 42.0);
        assert_eq!(net.flat_params(), p);
    }

    #[test]
    fn config_validation() {
        assert!(DemoConfig::new(Regularizer::Mma, 0).validate().is_ok());
        let bad = DemoConfig {
            lambda: -1.0,
            ..DemoConfig::new(Regularizer::Mma, 0)
        };
        assert!(bad.validate().is_err());
        let bad = DemoConfig {
            hidden: vec![0],
            ..DemoConfig::new(Regularizer::None, 0)
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn single_neuron_layer_has_no_stats() {
        let net = Mlp::new(&[2, 1, 3], 0);
        let stats = layer_angle_report(&net).unwrap();
        assert!(stats[0].is_none());
        assert!(stats[1].is_some());
    }

    #[test]
    fn zero_lambda_matches_baseline() {
        let base = DemoConfig {
            epochs: 3,
            ..DemoConfig::new(Regularizer::None, 11)
        };
        let zero = DemoConfig {
            reg: Regularizer::Mma,
            lambda: 0.0,
            ..base.clone()
        };
        assert_eq!(train_mlp(&base).unwrap(), train_mlp(&zero).unwrap());
    }
}

//! Dense feedforward networks.
//!
//! A [`Network`] is a chain of affine layers. The activation is applied after
//! every affine transform except the last one, so the output layer is always
//! linear. Inputs are evaluated either one at a time or as row-major batches
//! (`N x input_dim` arrays); both paths share the same arithmetic.

mod activation;
pub mod nnet;

pub use activation::{activate, Activation};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{RepairError, Result};

/// One affine transform: `weights` is `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

impl Layer {
    pub fn new(weights: Array2<f64>, biases: Array1<f64>) -> Self {
        Self { weights, biases }
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weights: Array2::zeros((outputs, inputs)),
            biases: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }
}

/// Input/output normalization constants carried by NNet files.
///
/// `means` and `ranges` have `input_dim + 1` entries; the trailing entry
/// scales the outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub input_mins: Vec<f64>,
    pub input_maxes: Vec<f64>,
    pub means: Vec<f64>,
    pub ranges: Vec<f64>,
}

/// Norm used by the regression losses. `L2` is the squared Euclidean
/// distance, `L1` the sum of absolute differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LossNorm {
    L1,
    #[default]
    L2,
}

impl LossNorm {
    pub fn distance(&self, y: ArrayView1<f64>, target: ArrayView1<f64>) -> f64 {
        match self {
            LossNorm::L1 => y.iter().zip(target).map(|(a, b)| (a - b).abs()).sum(),
            LossNorm::L2 => y.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum(),
        }
    }

    #[inline]
    fn derivative(&self, diff: f64) -> f64 {
        match self {
            LossNorm::L1 => {
                if diff > 0.0 {
                    1.0
                } else if diff < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            LossNorm::L2 => 2.0 * diff,
        }
    }
}

/// Post-activation states of one input, input first and output last.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorTrace {
    pub states: Vec<Vec<f64>>,
}

impl BehaviorTrace {
    pub fn output(&self) -> &[f64] {
        self.states.last().expect("trace always has at least two states")
    }
}

/// Parameter-shaped gradient (one entry per affine layer).
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub layers: Vec<Layer>,
}

impl Gradient {
    pub fn scaled(mut self, factor: f64) -> Self {
        for l in &mut self.layers {
            l.weights *= factor;
            l.biases *= factor;
        }
        self
    }

    /// `self += factor * other`
    pub fn add_scaled(&mut self, other: &Gradient, factor: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.scaled_add(factor, &b.weights);
            a.biases.scaled_add(factor, &b.biases);
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }

    /// Euclidean norm over all components.
    pub fn norm(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.weights.iter().chain(l.biases.iter()).map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }
}

/// Dense feedforward network.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
    activation: Activation,
    normalization: Option<Normalization>,
}

impl Network {
    pub fn new(layers: Vec<Layer>, activation: Activation) -> Result<Self> {
        activation.validate()?;
        if layers.is_empty() {
            return Err(RepairError::InvalidNetwork(
                "a network needs at least one affine layer".into(),
            ));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.biases.len() != l.outputs() {
                return Err(RepairError::InvalidNetwork(format!(
                    "layer {}: {} biases for {} outputs",
                    i + 1,
                    l.biases.len(),
                    l.outputs()
                )));
            }
            if l.inputs() == 0 || l.outputs() == 0 {
                return Err(RepairError::InvalidNetwork(format!("layer {} is empty", i + 1)));
            }
            if i > 0 && layers[i - 1].outputs() != l.inputs() {
                return Err(RepairError::InvalidNetwork(format!(
                    "layer {} expects {} inputs but layer {} produces {}",
                    i + 1,
                    l.inputs(),
                    i,
                    layers[i - 1].outputs()
                )));
            }
            if l.weights.iter().chain(l.biases.iter()).any(|v| !v.is_finite()) {
                return Err(RepairError::InvalidNetwork(format!(
                    "layer {} has non-finite parameters",
                    i + 1
                )));
            }
        }
        Ok(Self {
            layers,
            activation,
            normalization: None,
        })
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Result<Self> {
        let m = self.input_dim();
        if normalization.input_mins.len() != m
            || normalization.input_maxes.len() != m
            || normalization.means.len() != m + 1
            || normalization.ranges.len() != m + 1
        {
            return Err(RepairError::InvalidNetwork(
                "normalization constants do not match the input dimension".into(),
            ));
        }
        self.normalization = Some(normalization);
        Ok(self)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn set_activation(&mut self, activation: Activation) -> Result<()> {
        activation.validate()?;
        self.activation = activation;
        Ok(())
    }

    pub fn normalization(&self) -> Option<&Normalization> {
        self.normalization.as_ref()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(Layer::outputs).unwrap_or(0)
    }

    /// `[input_dim, d_1, ..., output_dim]`
    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Layer::outputs))
            .collect()
    }

    /// Number of states in a behavior trace (input included).
    pub fn num_states(&self) -> usize {
        self.layers.len() + 1
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    fn check_input(&self, len: usize) -> Result<()> {
        if len != self.input_dim() {
            return Err(RepairError::Shape {
                expected: self.input_dim(),
                got: len,
                context: "network input",
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.trace(x)?.states.pop().unwrap_or_default())
    }

    pub fn trace(&self, x: &[f64]) -> Result<BehaviorTrace> {
        self.check_input(x.len())?;
        let mut states = Vec::with_capacity(self.num_states());
        let mut current = Array1::from(x.to_vec());
        states.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = layer.weights.dot(&current) + &layer.biases;
            if i != last {
                z.mapv_inplace(|v| self.activation.apply(v));
            }
            states.push(z.to_vec());
            current = z;
        }
        Ok(BehaviorTrace { states })
    }

    /// Forward a batch of row inputs.
    pub fn forward_batch(&self, inputs: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(inputs.ncols())?;
        Ok(self.propagate_from(0, inputs.to_owned()))
    }

    /// Continue propagation from post-activation state `start_state`
    /// (0 = input) given the rows of that state.
    pub fn forward_batch_from(
        &self,
        start_state: usize,
        states: ArrayView2<f64>,
    ) -> Result<Array2<f64>> {
        if start_state >= self.num_states() {
            return Err(RepairError::Shape {
                expected: self.num_states() - 1,
                got: start_state,
                context: "start state",
            });
        }
        let width = self.layer_sizes()[start_state];
        if states.ncols() != width {
            return Err(RepairError::Shape {
                expected: width,
                got: states.ncols(),
                context: "cached state width",
            });
        }
        Ok(self.propagate_from(start_state, states.to_owned()))
    }

    fn propagate_from(&self, start_state: usize, mut current: Array2<f64>) -> Array2<f64> {
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate().skip(start_state) {
            let mut z = current.dot(&layer.weights.t());
            z += &layer.biases;
            if i != last {
                z.mapv_inplace(|v| self.activation.apply(v));
            }
            current = z;
        }
        current
    }

    /// Post-activation states of a batch: entry `i` is `N x d_i`.
    pub fn trace_batch(&self, inputs: ArrayView2<f64>) -> Result<Vec<Array2<f64>>> {
        self.check_input(inputs.ncols())?;
        let (_, states) = self.forward_cache(inputs);
        Ok(states)
    }

    /// Returns (pre-activations per layer, post-activation states).
    fn forward_cache(&self, inputs: ArrayView2<f64>) -> (Vec<Array2<f64>>, Vec<Array2<f64>>) {
        let last = self.layers.len() - 1;
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut states = Vec::with_capacity(self.num_states());
        states.push(inputs.to_owned());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = states[i].dot(&layer.weights.t());
            z += &layer.biases;
            let a = if i != last {
                z.mapv(|v| self.activation.apply(v))
            } else {
                z.clone()
            };
            pre.push(z);
            states.push(a);
        }
        (pre, states)
    }

    /// Gradient of `sum_i norm(N(x_i) - label_i)` with respect to every
    /// parameter, by backpropagation.
    pub fn gradient(
        &self,
        inputs: ArrayView2<f64>,
        labels: ArrayView2<f64>,
        norm: LossNorm,
    ) -> Result<Gradient> {
        self.check_input(inputs.ncols())?;
        if inputs.nrows() == 0 {
            return Err(RepairError::EmptySampleSet("gradient batch"));
        }
        if labels.nrows() != inputs.nrows() {
            return Err(RepairError::Shape {
                expected: inputs.nrows(),
                got: labels.nrows(),
                context: "label rows",
            });
        }
        if labels.ncols() != self.output_dim() {
            return Err(RepairError::Shape {
                expected: self.output_dim(),
                got: labels.ncols(),
                context: "label width",
            });
        }
        let (pre, states) = self.forward_cache(inputs);
        let out = states.last().expect("non-empty");
        let mut delta = Array2::from_shape_fn(out.raw_dim(), |(r, c)| {
            norm.derivative(out[[r, c]] - labels[[r, c]])
        });
        let mut grads: Vec<Layer> = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let gw = delta.t().dot(&states[i]);
            let gb = delta.sum_axis(Axis(0));
            if i > 0 {
                let mut back = delta.dot(&self.layers[i].weights);
                back.zip_mut_with(&pre[i - 1], |d, &z| *d *= self.activation.derivative(z));
                delta = back;
            }
            grads.push(Layer::new(gw, gb));
        }
        grads.reverse();
        Ok(Gradient { layers: grads })
    }

    /// `theta <- theta - lr * grad`
    pub fn apply_gradient(&mut self, grad: &Gradient, lr: f64) {
        for (l, g) in self.layers.iter_mut().zip(&grad.layers) {
            l.weights.scaled_add(-lr, &g.weights);
            l.biases.scaled_add(-lr, &g.biases);
        }
    }

    /// All parameters, layer by layer, weights row-major then biases.
    pub fn params_flat(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(RepairError::Shape {
                expected: self.num_params(),
                got: params.len(),
                context: "flat parameter vector",
            });
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            for w in l.weights.iter_mut() {
                *w = it.next().expect("length checked");
            }
            for b in l.biases.iter_mut() {
                *b = it.next().expect("length checked");
            }
        }
        Ok(())
    }

    /// Absorb the stored normalization into the first and last affine layers
    /// so the returned network maps raw inputs to raw outputs. Input clamping
    /// to the min/max box is not reproduced; intersect property boxes with
    /// [`Normalization`] bounds instead.
    pub fn fold_normalization(&self) -> Result<Network> {
        let norm = self.normalization.as_ref().ok_or_else(|| {
            RepairError::InvalidNetwork("network carries no normalization constants".into())
        })?;
        let m = self.input_dim();
        let mut layers = self.layers.clone();
        {
            let first = &mut layers[0];
            for j in 0..m {
                let range = norm.ranges[j];
                if range == 0.0 {
                    return Err(RepairError::InvalidNetwork(format!(
                        "zero normalization range for input {j}"
                    )));
                }
                let mean = norm.means[j];
                for r in 0..first.outputs() {
                    let w = first.weights[[r, j]] / range;
                    first.weights[[r, j]] = w;
                    first.biases[r] -= w * mean;
                }
            }
        }
        let (out_mean, out_range) = (norm.means[m], norm.ranges[m]);
        let last = layers.last_mut().expect("non-empty");
        last.weights *= out_range;
        last.biases.mapv_inplace(|b| b * out_range + out_mean);
        let mut net = Network::new(layers, self.activation)?;
        net.normalization = self.normalization.clone();
        Ok(net)
    }

    /// Inverse of [`Network::fold_normalization`]: map a raw-to-raw network
    /// back to normalized coordinates under its stored constants.
    pub fn unfold_normalization(&self) -> Result<Network> {
        let norm = self.normalization.as_ref().ok_or_else(|| {
            RepairError::InvalidNetwork("network carries no normalization constants".into())
        })?;
        let m = self.input_dim();
        let mut layers = self.layers.clone();
        {
            let first = &mut layers[0];
            for r in 0..first.outputs() {
                for j in 0..m {
                    let w = first.weights[[r, j]];
                    first.biases[r] += w * norm.means[j];
                    first.weights[[r, j]] = w * norm.ranges[j];
                }
            }
        }
        let (out_mean, out_range) = (norm.means[m], norm.ranges[m]);
        if out_range == 0.0 {
            return Err(RepairError::InvalidNetwork("zero output normalization range".into()));
        }
        let last = layers.last_mut().expect("non-empty");
        last.weights /= out_range;
        last.biases.mapv_inplace(|b| (b - out_mean) / out_range);
        let mut net = Network::new(layers, self.activation)?;
        net.normalization = self.normalization.clone();
        Ok(net)
    }
}

fn flatten_layers(layers: &[Layer]) -> Vec<f64> {
    let mut out = Vec::new();
    for l in layers {
        out.extend(l.weights.iter().copied());
        out.extend(l.biases.iter().copied());
    }
    out
}

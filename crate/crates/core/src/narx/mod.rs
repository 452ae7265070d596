//! Sensorimotor NARX network.
//!
//! The network maps delayed copies of the exogenous input `u` and of its own
//! output `y` through sigmoid hidden layers to one linear output node. In
//! closed-loop mode the fed-back values are the network's own past outputs.
//! All arithmetic happens in normalized units; pre-history (negative time
//! indices) is zero in normalized units.
//!
//! Lesioned hidden nodes output exactly zero and are skipped in downstream
//! sums, so a lesioned network behaves identically to one with those nodes
//! deleted (see [`NarxNetwork::compact`]).

mod persist;
mod train;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::task::{Trajectory, Unit};

pub use persist::{NetworkDocument, NETWORK_SCHEMA_VERSION};
pub use train::{
    jacobian, objective, objective_gradient, train, train_with, EpochStats, Regularization,
    StopReason, TrainOptions, TrainingReport,
};

/// The two network shapes used for the simulated patient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkVariant {
    /// One hidden layer of 7 nodes.
    Narx1,
    /// Two hidden layers of 4 and 3 nodes.
    Narx2,
}

impl NetworkVariant {
    pub fn hidden_layers(self) -> Vec<usize> {
        match self {
            NetworkVariant::Narx1 => vec![7],
            NetworkVariant::Narx2 => vec![4, 3],
        }
    }

    /// Hidden nodes removed per layer to simulate a stroke.
    pub fn stroke_removals(self) -> Vec<usize> {
        match self {
            NetworkVariant::Narx1 => vec![3],
            NetworkVariant::Narx2 => vec![2, 1],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NetworkVariant::Narx1 => "narx1",
            NetworkVariant::Narx2 => "narx2",
        }
    }
}

/// Delay structure and layer widths.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NarxTopology {
    pub exogenous_delays: Vec<usize>,
    pub feedback_delays: Vec<usize>,
    pub hidden_layers: Vec<usize>,
}

impl NarxTopology {
    pub fn new(
        exogenous_delays: Vec<usize>,
        feedback_delays: Vec<usize>,
        hidden_layers: Vec<usize>,
    ) -> Result<Self> {
        let t = Self {
            exogenous_delays,
            feedback_delays,
            hidden_layers,
        };
        t.validate()?;
        Ok(t)
    }

    /// Default delays u(t), u(t−1), y(t−1), y(t−2) with the variant's hidden widths.
    pub fn for_variant(variant: NetworkVariant) -> Self {
        Self {
            exogenous_delays: vec![0, 1],
            feedback_delays: vec![1, 2],
            hidden_layers: variant.hidden_layers(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers.is_empty() {
            return Err(SimError::InvalidTopology("no hidden layers".into()));
        }
        if self.hidden_layers.contains(&0) {
            return Err(SimError::InvalidTopology("hidden layer of width 0".into()));
        }
        if self.feedback_delays.contains(&0) {
            return Err(SimError::InvalidTopology(
                "feedback delay 0 would create an algebraic loop".into(),
            ));
        }
        if self.exogenous_delays.is_empty() && self.feedback_delays.is_empty() {
            return Err(SimError::InvalidTopology("network has no inputs".into()));
        }
        Ok(())
    }

    pub fn input_count(&self) -> usize {
        self.exogenous_delays.len() + self.feedback_delays.len()
    }

    pub fn max_delay(&self) -> usize {
        self.exogenous_delays
            .iter()
            .chain(&self.feedback_delays)
            .copied()
            .max()
            .unwrap_or(0)
    }
}

/// Affine maps `x_n = gain·x + offset` applied to the input and (inverted) to the output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub input_gain: f64,
    pub input_offset: f64,
    pub output_gain: f64,
    pub output_offset: f64,
}

impl Default for Normalization {
    fn default() -> Self {
        Self {
            input_gain: 1.0,
            input_offset: 0.0,
            output_gain: 1.0,
            output_offset: 0.0,
        }
    }
}

fn range_map(values: &[f64]) -> (f64, f64) {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if hi <= lo {
        return (1.0, 0.0);
    }
    let gain = 2.0 / (hi - lo);
    (gain, -1.0 - gain * lo)
}

impl Normalization {
    /// Maps the observed range of `u` and `y` onto [−1, 1].
    pub fn from_ranges(u: &[f64], y: &[f64]) -> Self {
        let (input_gain, input_offset) = range_map(u);
        let (output_gain, output_offset) = range_map(y);
        Self {
            input_gain,
            input_offset,
            output_gain,
            output_offset,
        }
    }

    pub fn normalize_input(&self, u: f64) -> f64 {
        self.input_gain * u + self.input_offset
    }

    pub fn normalize_output(&self, y: f64) -> f64 {
        self.output_gain * y + self.output_offset
    }

    pub fn denormalize_output(&self, y_n: f64) -> f64 {
        (y_n - self.output_offset) / self.output_gain
    }
}

/// Dense layer; `weights` is row-major with one row per output node.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layer {
    pub(crate) inputs: usize,
    pub(crate) outputs: usize,
    pub(crate) weights: Vec<f64>,
    pub(crate) biases: Vec<f64>,
}

impl Layer {
    fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }
}

/// Seeds that produced a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NetworkSeeds {
    pub init: u64,
    pub lesion: Option<u64>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Sensorimotor NARX network with optional lesion mask.
#[derive(Debug, Clone, PartialEq)]
pub struct NarxNetwork {
    pub(crate) topology: NarxTopology,
    /// Hidden layers followed by the output layer.
    pub(crate) layers: Vec<Layer>,
    pub(crate) normalization: Option<Normalization>,
    /// One mask per hidden layer; `false` marks a lesioned node.
    pub(crate) active: Vec<Vec<bool>>,
    pub(crate) seeds: NetworkSeeds,
}

/// Per-step activations: `acts[0]` is the input vector, `acts[l]` the output of hidden layer `l`.
pub(crate) type Activations = Vec<Vec<f64>>;

impl NarxNetwork {
    /// Weights and biases drawn uniformly from [−0.5, 0.5]; all nodes active.
    pub fn init(topology: NarxTopology, seed: u64) -> Result<Self> {
        topology.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(topology.hidden_layers.len() + 1);
        let mut fan_in = topology.input_count();
        for &width in topology.hidden_layers.iter().chain(std::iter::once(&1)) {
            let weights = (0..width * fan_in)
                .map(|_| rng.random_range(-0.5..=0.5))
                .collect();
            let biases = (0..width).map(|_| rng.random_range(-0.5..=0.5)).collect();
            layers.push(Layer {
                inputs: fan_in,
                outputs: width,
                weights,
                biases,
            });
            fan_in = width;
        }
        let active = topology
            .hidden_layers
            .iter()
            .map(|&w| vec![true; w])
            .collect();
        Ok(Self {
            topology,
            layers,
            normalization: None,
            active,
            seeds: NetworkSeeds {
                init: seed,
                lesion: None,
            },
        })
    }

    pub fn for_variant(variant: NetworkVariant, seed: u64) -> Result<Self> {
        Self::init(NarxTopology::for_variant(variant), seed)
    }

    pub fn topology(&self) -> &NarxTopology {
        &self.topology
    }

    pub fn normalization(&self) -> Option<&Normalization> {
        self.normalization.as_ref()
    }

    /// Freezes the normalization. Training calls this from the training data when unset.
    pub fn set_normalization(&mut self, norm: Normalization) {
        self.normalization = Some(norm);
    }

    pub fn seeds(&self) -> NetworkSeeds {
        self.seeds
    }

    pub fn active_mask(&self) -> &[Vec<bool>] {
        &self.active
    }

    pub fn active_widths(&self) -> Vec<usize> {
        self.active
            .iter()
            .map(|m| m.iter().filter(|&&a| a).count())
            .collect()
    }

    pub fn hidden_node_count(&self) -> usize {
        self.topology.hidden_layers.iter().sum()
    }

    pub fn active_node_count(&self) -> usize {
        self.active_widths().iter().sum()
    }

    pub fn output_node_count(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Flattened parameters: per layer, row-major weights then biases.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            p.extend_from_slice(&l.weights);
            p.extend_from_slice(&l.biases);
        }
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.param_count(), "parameter vector length");
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&p[off..off + nw]);
            off += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&p[off..off + nb]);
            off += nb;
        }
    }

    fn input_active(&self, layer: usize, i: usize) -> bool {
        layer == 0 || self.active[layer - 1][i]
    }

    pub(crate) fn new_activations(&self) -> Activations {
        let mut acts = vec![vec![0.0; self.topology.input_count()]];
        acts.extend(self.topology.hidden_layers.iter().map(|&w| vec![0.0; w]));
        acts
    }

    /// One feed-forward pass; `acts[0]` must hold the input vector.
    #[allow(clippy::needless_range_loop)]
    pub(crate) fn eval(&self, acts: &mut Activations) -> f64 {
        let n_hidden = self.topology.hidden_layers.len();
        for (l, layer) in self.layers.iter().enumerate().take(n_hidden) {
            let (prev, rest) = acts.split_at_mut(l + 1);
            let input = &prev[l];
            let out = &mut rest[0];
            for j in 0..layer.outputs {
                if !self.active[l][j] {
                    out[j] = 0.0;
                    continue;
                }
                let row = &layer.weights[j * layer.inputs..(j + 1) * layer.inputs];
                let mut z = layer.biases[j];
                for (i, (&w, &a)) in row.iter().zip(input).enumerate() {
                    if self.input_active(l, i) {
                        z += w * a;
                    }
                }
                out[j] = sigmoid(z);
            }
        }
        let out_layer = &self.layers[n_hidden];
        let input = &acts[n_hidden];
        let mut y = out_layer.biases[0];
        for (i, (&w, &a)) in out_layer.weights.iter().zip(input).enumerate() {
            if self.input_active(n_hidden, i) {
                y += w * a;
            }
        }
        y
    }

    /// Accumulates `upstream · ∂y/∂params` into `grad_w` and writes `upstream · ∂y/∂x` into `grad_x`.
    pub(crate) fn backprop(
        &self,
        acts: &Activations,
        upstream: f64,
        grad_w: &mut [f64],
        grad_x: &mut [f64],
    ) {
        let n_hidden = self.topology.hidden_layers.len();
        let offsets: Vec<usize> = self
            .layers
            .iter()
            .scan(0, |off, l| {
                let o = *off;
                *off += l.param_count();
                Some(o)
            })
            .collect();

        // output layer (linear)
        let out_layer = &self.layers[n_hidden];
        let off = offsets[n_hidden];
        let mut delta: Vec<f64> = vec![upstream];
        let mut prev_delta = vec![0.0; out_layer.inputs];
        for i in 0..out_layer.inputs {
            if self.input_active(n_hidden, i) {
                grad_w[off + i] += upstream * acts[n_hidden][i];
                prev_delta[i] = upstream * out_layer.weights[i];
            }
        }
        grad_w[off + out_layer.weights.len()] += upstream;

        for l in (0..n_hidden).rev() {
            let layer = &self.layers[l];
            let a = &acts[l + 1];
            // d(sigmoid)/dz = a(1 − a)
            delta.clear();
            delta.extend((0..layer.outputs).map(|j| {
                if self.active[l][j] {
                    prev_delta[j] * a[j] * (1.0 - a[j])
                } else {
                    0.0
                }
            }));
            let off = offsets[l];
            let input = &acts[l];
            let mut next_prev = vec![0.0; layer.inputs];
            for j in 0..layer.outputs {
                if !self.active[l][j] {
                    continue;
                }
                let dz = delta[j];
                let row = j * layer.inputs;
                for i in 0..layer.inputs {
                    if self.input_active(l, i) {
                        grad_w[off + row + i] += dz * input[i];
                        next_prev[i] += dz * layer.weights[row + i];
                    }
                }
                grad_w[off + layer.weights.len() + j] += dz;
            }
            prev_delta = next_prev;
        }
        grad_x.copy_from_slice(&prev_delta);
    }

    /// Fills `acts[0]` for step `t` from normalized exogenous input and fed-back output history.
    pub(crate) fn fill_inputs(
        &self,
        acts: &mut Activations,
        t: usize,
        u_n: &[f64],
        y_hist: &[f64],
    ) {
        let x = &mut acts[0];
        let mut k = 0;
        for &d in &self.topology.exogenous_delays {
            x[k] = if t >= d { u_n[t - d] } else { 0.0 };
            k += 1;
        }
        for &d in &self.topology.feedback_delays {
            x[k] = if t >= d { y_hist[t - d] } else { 0.0 };
            k += 1;
        }
    }

    /// Closed-loop run in normalized units.
    pub fn forward_normalized(&self, u_n: &[f64]) -> Result<Vec<f64>> {
        let mut acts = self.new_activations();
        let mut y = Vec::with_capacity(u_n.len());
        for t in 0..u_n.len() {
            self.fill_inputs(&mut acts, t, u_n, &y);
            let v = self.eval(&mut acts);
            if !v.is_finite() {
                return Err(SimError::NetworkDivergence { step: t });
            }
            y.push(v);
        }
        Ok(y)
    }

    /// Closed-loop motor command for the exogenous input `u`, on the same grid.
    pub fn forward_closed_loop(&self, u: &Trajectory) -> Result<Trajectory> {
        if u.len() <= self.topology.max_delay() {
            return Err(SimError::IncompatibleTrajectory(format!(
                "input has {} samples, need more than the maximum delay {}",
                u.len(),
                self.topology.max_delay()
            )));
        }
        let norm = self.normalization.unwrap_or_default();
        let u_n: Vec<f64> = u
            .samples()
            .iter()
            .map(|&v| norm.normalize_input(v))
            .collect();
        let y_n = self.forward_normalized(&u_n)?;
        let mut y = Vec::with_capacity(y_n.len());
        for (t, v) in y_n.into_iter().enumerate() {
            let out = norm.denormalize_output(v);
            if !out.is_finite() {
                return Err(SimError::NetworkDivergence { step: t });
            }
            y.push(out);
        }
        u.with_samples(y, Unit::NewtonMeters)
    }

    /// Marks `removals[l]` randomly chosen active nodes of hidden layer `l` as lesioned.
    pub fn lesion(&self, removals: &[usize], seed: u64) -> Result<Self> {
        if removals.len() != self.active.len() {
            return Err(SimError::InvalidLesion(format!(
                "{} removal counts for {} hidden layers",
                removals.len(),
                self.active.len()
            )));
        }
        let mut out = self.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (l, (&k, mask)) in removals.iter().zip(&mut out.active).enumerate() {
            let live: Vec<usize> = (0..mask.len()).filter(|&j| mask[j]).collect();
            if k > live.len() {
                return Err(SimError::InvalidLesion(format!(
                    "cannot remove {k} nodes from layer {l} with {} active",
                    live.len()
                )));
            }
            for pick in index::sample(&mut rng, live.len(), k) {
                mask[live[pick]] = false;
            }
        }
        out.seeds.lesion = Some(seed);
        Ok(out)
    }

    /// Equivalent network with lesioned nodes physically deleted.
    pub fn compact(&self) -> Self {
        let n_hidden = self.topology.hidden_layers.len();
        let keep_in = |l: usize| -> Vec<usize> {
            if l == 0 {
                (0..self.topology.input_count()).collect()
            } else {
                (0..self.active[l - 1].len())
                    .filter(|&i| self.active[l - 1][i])
                    .collect()
            }
        };
        let mut layers = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let cols = keep_in(l);
            let rows: Vec<usize> = if l < n_hidden {
                (0..layer.outputs).filter(|&j| self.active[l][j]).collect()
            } else {
                (0..layer.outputs).collect()
            };
            let mut weights = Vec::with_capacity(rows.len() * cols.len());
            for &j in &rows {
                weights.extend(cols.iter().map(|&i| layer.weights[j * layer.inputs + i]));
            }
            layers.push(Layer {
                inputs: cols.len(),
                outputs: rows.len(),
                weights,
                biases: rows.iter().map(|&j| layer.biases[j]).collect(),
            });
        }
        let widths = self.active_widths();
        Self {
            topology: NarxTopology {
                hidden_layers: widths.clone(),
                ..self.topology.clone()
            },
            layers,
            normalization: self.normalization,
            active: widths.iter().map(|&w| vec![true; w]).collect(),
            seeds: self.seeds,
        }
    }
}

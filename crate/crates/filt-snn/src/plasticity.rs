//! Learning mathematics: the double-exponential coincidence window, the
//! spike-time weight update, desirability propagation and normalization,
//! target assignment, RMSprop, synaptic scaling, and dropout masks.

use ndarray::{Array1, Array2, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Network;
use crate::neuron::{KernelParams, SpikeTrain};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Learning rate, applied only in the optimizer step.
    pub eta: f64,
    /// RMSprop decay.
    pub beta: f64,
    /// RMSprop offset inside the square root.
    pub eps_rms: f64,
    /// Synaptic scaling coefficient.
    pub gamma: f64,
    /// Target shift (ms): targets sit this far before the actual first spike.
    pub delta_t: f64,
    /// Desirability threshold separating reinforced from suppressed neurons.
    pub d_t: f64,
    /// Per-sample probability that a hidden neuron is dropped.
    pub dropout_rate: f64,
    pub batch_size: usize,
    pub batches: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            eta: 0.01,
            beta: 0.9,
            eps_rms: 0.003,
            gamma: 0.01,
            delta_t: 0.5,
            d_t: 0.0,
            dropout_rate: 0.35,
            batch_size: 20,
            batches: 500,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::config(format!("eta must be positive, got {}", self.eta)));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::config(format!("beta must lie in [0, 1), got {}", self.beta)));
        }
        if !(self.eps_rms > 0.0) {
            return Err(Error::config(format!("eps_rms must be positive, got {}", self.eps_rms)));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::config(format!("gamma must be nonnegative, got {}", self.gamma)));
        }
        if !(self.delta_t >= 0.0 && self.delta_t.is_finite()) {
            return Err(Error::config(format!("delta_t must be nonnegative, got {}", self.delta_t)));
        }
        if !self.d_t.is_finite() {
            return Err(Error::config(format!("d_t must be finite, got {}", self.d_t)));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::config(format!(
                "dropout_rate must lie in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1".to_string()));
        }
        Ok(())
    }
}

/// Per-neuron desirability values for one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DesirabilityVector(pub Vec<f64>);

impl DesirabilityVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Per-neuron optional target times; None suppresses the neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetAssignment(pub Vec<Option<f64>>);

/// Coincidence window: how strongly a presynaptic spike at offset -s from a
/// (target or actual) postsynaptic spike supports it. Causal side is a
/// double exponential; the acausal side decays with tau_q.
pub fn lambda_window(s: f64, p: &KernelParams) -> f64 {
    let (cm, cs) = (p.c_m(), p.c_s());
    if s > 0.0 {
        p.eps0 * (cm * (-s / p.tau_m).exp() - cs * (-s / p.tau_s).exp())
    } else {
        p.eps0 * (cm - cs) * (s / p.tau_q).exp()
    }
}

/// Unit-learning-rate weight change for one synapse: window sums at the
/// target time minus window sums at the actual first spike. Absent times
/// contribute nothing. The learning rate is applied later, in the
/// optimizer step.
pub fn filt_delta_w(
    target: Option<f64>,
    actual_first: Option<f64>,
    presyn: &SpikeTrain,
    p: &KernelParams,
) -> f64 {
    let sum_at = |t0: Option<f64>| -> f64 {
        t0.map_or(0.0, |t0| presyn.times().iter().map(|&tj| lambda_window(t0 - tj, p)).sum())
    };
    sum_at(target) - sum_at(actual_first)
}

/// Output-layer base case: +1 at the label, -1 everywhere else.
pub fn output_desirability(label: usize, n_classes: usize) -> DesirabilityVector {
    assert!(label < n_classes, "label {label} out of range for {n_classes} classes");
    DesirabilityVector((0..n_classes).map(|i| if i == label { 1.0 } else { -1.0 }).collect())
}

/// Affine rescaling onto [-1, +1]; an all-equal vector maps to all +1 so a
/// layer is never suppressed wholesale.
pub fn normalize_desirability(raw: &[f64]) -> Vec<f64> {
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
    if max == min {
        return vec![1.0; raw.len()];
    }
    raw.iter().map(|&v| 1.0 + 2.0 * (v - max) / (max - min)).collect()
}

/// Pull desirability one layer down: weight-transposed propagation followed
/// by normalization.
pub fn backpropagate_desirability(w_next: &Array2<f64>, d_next: &DesirabilityVector) -> DesirabilityVector {
    assert_eq!(
        w_next.nrows(),
        d_next.len(),
        "weight rows must match the next layer's desirability length"
    );
    let d = Array1::from_vec(d_next.0.clone());
    let raw = w_next.t().dot(&d);
    DesirabilityVector(normalize_desirability(raw.as_slice().expect("contiguous")))
}

/// Per-neuron targets: desirable neurons aim delta_t before their actual
/// first spike (or before 5 * layer_index ms when silent); the rest are
/// suppressed.
pub fn assign_targets(
    d: &DesirabilityVector,
    first_spikes: &[Option<f64>],
    layer_index: usize,
    cfg: &TrainConfig,
) -> TargetAssignment {
    assert_eq!(d.len(), first_spikes.len(), "desirability and spike vectors must agree");
    assert!(layer_index >= 1, "layer 0 is the input layer and has no targets");
    let silent_stand_in = 5.0 * layer_index as f64;
    TargetAssignment(
        d.values()
            .iter()
            .zip(first_spikes)
            .map(|(&dj, &tj)| {
                if dj >= cfg.d_t {
                    Some(tj.unwrap_or(silent_stand_in) - cfg.delta_t)
                } else {
                    None
                }
            })
            .collect(),
    )
}

/// RMSprop accumulator and the synaptic-scaling reference magnitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    /// Running mean of squared batch updates, one matrix per connection.
    pub r: Vec<Array2<f64>>,
    /// |w| after the previous batch's scaling step.
    pub prev_scaled: Vec<Array2<f64>>,
}

impl OptimizerState {
    pub fn new(net: &Network) -> Self {
        OptimizerState {
            r: net.weights.iter().map(|w| Array2::ones(w.raw_dim())).collect(),
            prev_scaled: net.weights.iter().map(|w| w.mapv(f64::abs)).collect(),
        }
    }
}

/// One RMSprop update from batch-accumulated raw weight changes.
pub fn rmsprop_step(
    net: &mut Network,
    accumulated: &[Array2<f64>],
    state: &mut OptimizerState,
    cfg: &TrainConfig,
) {
    assert_eq!(accumulated.len(), net.weights.len(), "one delta matrix per connection");
    for (l, dw) in accumulated.iter().enumerate() {
        assert_eq!(dw.raw_dim(), net.weights[l].raw_dim());
        Zip::from(&mut state.r[l]).and(dw).for_each(|r, &d| {
            *r = cfg.beta * *r + (1.0 - cfg.beta) * d * d;
        });
        Zip::from(&mut net.weights[l])
            .and(dw)
            .and(&state.r[l])
            .for_each(|w, &d, &r| {
                *w += cfg.eta * d / (cfg.eps_rms + r).sqrt();
            });
    }
}

/// Homeostatic correction after the optimizer step: connections into hidden
/// neurons grow when the neuron undershoots one spike per sample and shrink
/// when it overshoots. The output layer passes through unchanged.
///
/// `hidden_spike_counts[h][i]` is the batch-total spike count of neuron i in
/// hidden layer h+1.
pub fn synaptic_scaling(
    net: &mut Network,
    state: &mut OptimizerState,
    hidden_spike_counts: &[Vec<u64>],
    cfg: &TrainConfig,
) {
    let n_conn = net.weights.len();
    assert_eq!(hidden_spike_counts.len(), n_conn - 1, "counts cover exactly the hidden layers");
    let per_sample = cfg.batch_size as f64;
    for l in 0..n_conn - 1 {
        let counts = &hidden_spike_counts[l];
        assert_eq!(counts.len(), net.weights[l].nrows());
        for (i, mut row) in net.weights[l].rows_mut().into_iter().enumerate() {
            let correction = cfg.gamma * (1.0 - counts[i] as f64 / per_sample);
            if correction != 0.0 {
                let prev = state.prev_scaled[l].row(i);
                Zip::from(&mut row).and(&prev).for_each(|w, &m| *w += correction * m);
            }
        }
        state.prev_scaled[l] = net.weights[l].mapv(f64::abs);
    }
}

/// Keep-flags for one hidden layer: each neuron is independently dropped
/// with the given probability. Fresh mask per training sample; evaluation
/// never drops.
pub fn dropout_mask<R: Rng>(n_hidden: usize, rate: f64, rng: &mut R) -> Vec<bool> {
    (0..n_hidden).map(|_| rng.random::<f64>() >= rate).collect()
}

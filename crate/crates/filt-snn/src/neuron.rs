//! Closed-form spike response model: PSP and reset kernels, membrane
//! potential evaluation, and grid-based threshold-crossing simulation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Time constants and potentials shared by the neuron model and the
/// learning window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelParams {
    /// Membrane time constant (ms).
    pub tau_m: f64,
    /// Synaptic time constant (ms).
    pub tau_s: f64,
    /// PSP amplitude coefficient (mV).
    pub eps0: f64,
    /// Reset potential (mV).
    pub u_r: f64,
    /// Firing threshold (mV).
    pub v_t: f64,
    /// Time constant of the acausal branch of the learning window (ms).
    pub tau_q: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        KernelParams {
            tau_m: 10.0,
            tau_s: 5.0,
            eps0: 4.0,
            u_r: 0.0,
            v_t: 15.0,
            tau_q: 10.0,
        }
    }
}

impl KernelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_m > self.tau_s && self.tau_s > 0.0) {
            return Err(Error::config(format!(
                "kernel params require tau_m > tau_s > 0, got tau_m={} tau_s={}",
                self.tau_m, self.tau_s
            )));
        }
        if !(self.tau_q > 0.0) {
            return Err(Error::config(format!("tau_q must be positive, got {}", self.tau_q)));
        }
        if !(self.v_t > self.u_r) {
            return Err(Error::config(format!(
                "firing threshold must exceed reset potential, got v_t={} u_r={}",
                self.v_t, self.u_r
            )));
        }
        if !self.eps0.is_finite() || self.eps0 <= 0.0 {
            return Err(Error::config(format!("eps0 must be positive, got {}", self.eps0)));
        }
        Ok(())
    }

    /// Weight of the slow exponential in the learning window.
    pub fn c_m(&self) -> f64 {
        self.tau_m / (self.tau_m + self.tau_q)
    }

    /// Weight of the fast exponential in the learning window.
    pub fn c_s(&self) -> f64 {
        self.tau_s / (self.tau_s + self.tau_q)
    }

    /// Offset at which the PSP kernel peaks.
    pub fn psp_peak_time(&self) -> f64 {
        self.tau_m * self.tau_s / (self.tau_m - self.tau_s) * (self.tau_m / self.tau_s).ln()
    }

    /// Maximum value of the PSP kernel.
    pub fn psp_peak(&self) -> f64 {
        psp_kernel(self.psp_peak_time(), self)
    }
}

/// Strictly increasing, nonnegative spike times of one neuron.
///
/// An empty train means the neuron never fired. "Infinite" times are never
/// stored; absence is the sentinel.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpikeTrain {
    times: Vec<f64>,
}

impl SpikeTrain {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        for (i, &t) in times.iter().enumerate() {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::data(format!(
                    "spike time must be finite and nonnegative, got {t}"
                )));
            }
            if i > 0 && times[i - 1] >= t {
                return Err(Error::data(format!(
                    "spike times must be strictly increasing, got {} then {}",
                    times[i - 1],
                    t
                )));
            }
        }
        Ok(SpikeTrain { times })
    }

    pub fn empty() -> Self {
        SpikeTrain::default()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn first(&self) -> Option<f64> {
        self.times.first().copied()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub(crate) fn push(&mut self, t: f64) {
        debug_assert!(self.times.last().is_none_or(|&last| last < t));
        self.times.push(t);
    }
}

/// Simulation window: duration and grid step, with an integral step count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimWindow {
    duration: f64,
    dt: f64,
    steps: usize,
}

impl SimWindow {
    pub fn new(duration: f64, dt: f64) -> Result<Self> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::config(format!("window duration must be positive, got {duration}")));
        }
        if !(dt > 0.0 && dt <= duration) {
            return Err(Error::config(format!(
                "window step must satisfy 0 < dt <= duration, got dt={dt} duration={duration}"
            )));
        }
        let steps_f = duration / dt;
        let rounded = steps_f.round();
        if (steps_f - rounded).abs() > 1e-9 * rounded.max(1.0) {
            return Err(Error::config(format!(
                "duration {duration} is not an integer number of {dt} steps"
            )));
        }
        Ok(SimWindow {
            duration,
            dt,
            steps: rounded as usize,
        })
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Time of grid point k.
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }
}

/// Postsynaptic potential evoked by one presynaptic spike, as a function of
/// the offset since that spike. Strictly causal: zero at and before zero.
pub fn psp_kernel(s: f64, p: &KernelParams) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    p.eps0 * ((-s / p.tau_m).exp() - (-s / p.tau_s).exp())
}

/// Reset transient following the neuron's own spike. Strictly causal.
pub fn reset_kernel(s: f64, p: &KernelParams) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    (p.u_r - p.v_t) * (-s / p.tau_m).exp()
}

/// Membrane potential at time t from the closed form: weighted PSP sums
/// over all input spikes plus reset contributions from the neuron's own
/// spikes. No numerical integration is involved.
pub fn membrane_potential(
    t: f64,
    inputs: &[(f64, &SpikeTrain)],
    own_spikes: &SpikeTrain,
    p: &KernelParams,
) -> f64 {
    let mut u = 0.0;
    for (w, train) in inputs {
        let mut acc = 0.0;
        for &tj in train.times() {
            acc += psp_kernel(t - tj, p);
        }
        u += w * acc;
    }
    for &ti in own_spikes.times() {
        u += reset_kernel(t - ti, p);
    }
    u
}

/// Simulate one neuron over the window grid.
///
/// A spike is recorded at the first grid point where the potential reaches
/// threshold; its reset enters the potential from the next grid point on,
/// which is what keeps the neuron from firing at every subsequent point.
/// Multiple spikes per window are permitted.
///
/// The scan keeps per-time-constant decay accumulators so the whole grid
/// costs O(steps + spikes) exponentials instead of O(steps * spikes); every
/// candidate crossing is confirmed against [`membrane_potential`] so that
/// recorded spike times satisfy the closed form exactly, not just the
/// running state.
pub fn simulate_neuron(inputs: &[(f64, &SpikeTrain)], p: &KernelParams, w: &SimWindow) -> SpikeTrain {
    let dt = w.dt();
    let decay_m = (-dt / p.tau_m).exp();
    let decay_s = (-dt / p.tau_s).exp();
    let reset_amp = p.u_r - p.v_t;

    // Weighted sums of exp(-(t - t_j)/tau) over input spikes folded so far.
    let mut em = 0.0;
    let mut es = 0.0;
    // Sum of exp(-(t - t_i)/tau_m) over own spikes.
    let mut km = 0.0;
    let mut cursors = vec![0usize; inputs.len()];
    let mut out = SpikeTrain::empty();

    for k in 1..=w.steps() {
        let t = w.time(k);
        em *= decay_m;
        es *= decay_s;
        km *= decay_m;
        for (idx, (wj, train)) in inputs.iter().enumerate() {
            let times = train.times();
            while cursors[idx] < times.len() && times[cursors[idx]] <= t {
                let s = t - times[cursors[idx]];
                em += wj * (-s / p.tau_m).exp();
                es += wj * (-s / p.tau_s).exp();
                cursors[idx] += 1;
            }
        }
        let u = p.eps0 * (em - es) + reset_amp * km;
        if u >= p.v_t && membrane_potential(t, inputs, &out, p) >= p.v_t {
            out.push(t);
            km += 1.0;
        }
    }
    out
}

//! Single-neuron dynamics toolkit: the potential-change landscape at the
//! moment of spiking, equilibrium spike times, attractor-convergence runs,
//! and two-train alternation, all emitted as plot-ready series.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::neuron::{psp_kernel, simulate_neuron, KernelParams, SimWindow, SpikeTrain};
use crate::plasticity::{filt_delta_w, lambda_window};

/// A single neuron driven by fixed input spikes, trained against its own
/// shifted first spike.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumProblem {
    pub input_times: Vec<f64>,
    /// Target shift (ms).
    pub delta_t: f64,
    pub params: KernelParams,
    pub window: SimWindow,
}

impl EquilibriumProblem {
    pub fn new(input_times: Vec<f64>, delta_t: f64, params: KernelParams, window: SimWindow) -> Result<Self> {
        if input_times.is_empty() {
            return Err(Error::config("equilibrium problem needs at least one input spike"));
        }
        for (i, &t) in input_times.iter().enumerate() {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::config(format!("input time must be finite and nonnegative, got {t}")));
            }
            if i > 0 && input_times[i - 1] >= t {
                return Err(Error::config("input times must be strictly increasing"));
            }
        }
        if !(delta_t >= 0.0 && delta_t.is_finite()) {
            return Err(Error::config(format!("delta_t must be nonnegative, got {delta_t}")));
        }
        params.validate()?;
        Ok(EquilibriumProblem { input_times, delta_t, params, window })
    }
}

/// Change of the membrane potential at a candidate spike time after one
/// unit-rate update against the shifted target, reset kernel excluded:
/// sum over inputs of [lambda(t - dt_shift - t_k) - lambda(t - t_k)] * psp(t - t_k).
pub fn delta_u(t_i: f64, prob: &EquilibriumProblem) -> f64 {
    prob.input_times
        .iter()
        .map(|&tk| {
            (lambda_window(t_i - prob.delta_t - tk, &prob.params) - lambda_window(t_i - tk, &prob.params))
                * psp_kernel(t_i - tk, &prob.params)
        })
        .sum()
}

/// Contribution of one input spike to [`delta_u`].
pub fn delta_u_component(t_i: f64, k: usize, prob: &EquilibriumProblem) -> f64 {
    let tk = prob.input_times[k];
    (lambda_window(t_i - prob.delta_t - tk, &prob.params) - lambda_window(t_i - tk, &prob.params))
        * psp_kernel(t_i - tk, &prob.params)
}

/// An equilibrium spike time with attractor sign structure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    pub t_e: f64,
    /// True when the landscape had more than one sign change; the returned
    /// root is then the attractor at the largest time.
    pub multiple_roots: bool,
}

const SCAN_STEP: f64 = 0.01;
const BISECT_TOL: f64 = 1e-6;

/// Locate the spike time where the update leaves the potential unchanged,
/// with the attractor structure (negative below, positive above). Scans a
/// 0.01 ms grid for sign changes, then bisects each bracket.
pub fn find_t_e(prob: &EquilibriumProblem) -> Option<Equilibrium> {
    let t0 = *prob.input_times.first()?;
    let t_end = prob.window.duration();
    if t0 >= t_end {
        return None;
    }

    let mut roots: Vec<(f64, bool)> = Vec::new(); // (root, is_attractor)
    let mut prev_t = f64::NAN;
    let mut prev_sign = 0i8;
    let steps = ((t_end - t0) / SCAN_STEP).floor() as usize;
    for k in 1..=steps {
        let t = t0 + k as f64 * SCAN_STEP;
        let f = delta_u(t, prob);
        let sign = if f > 0.0 {
            1
        } else if f < 0.0 {
            -1
        } else {
            0
        };
        if sign != 0 && prev_sign != 0 && sign != prev_sign {
            let root = bisect(prob, prev_t, t);
            roots.push((root, prev_sign < 0));
        }
        if sign != 0 {
            prev_sign = sign;
            prev_t = t;
        }
    }

    let multiple = roots.len() > 1;
    roots
        .into_iter()
        .filter(|&(_, attractor)| attractor)
        .next_back()
        .map(|(t_e, _)| Equilibrium { t_e, multiple_roots: multiple })
}

fn bisect(prob: &EquilibriumProblem, mut lo: f64, mut hi: f64) -> f64 {
    let rising = delta_u(hi, prob) > 0.0;
    while hi - lo > BISECT_TOL {
        let mid = 0.5 * (lo + hi);
        let f = delta_u(mid, prob);
        if (f >= 0.0) == rising {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Trajectory of first-spike times under repeated self-shifted training.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRun {
    /// First spike per iteration, up to the point the neuron fell silent.
    pub spike_times: Vec<f64>,
    /// The neuron stopped firing before the iteration budget ran out.
    pub went_silent: bool,
    pub final_weights: Vec<f64>,
}

/// Repeatedly simulate and apply the raw spike-time update with the target
/// pinned delta_t before the actual first spike. No optimizer, no
/// desirability gating: the plain single-neuron setting.
pub fn convergence_run(
    prob: &EquilibriumProblem,
    initial_weights: &[f64],
    eta: f64,
    iterations: usize,
) -> Result<ConvergenceRun> {
    if initial_weights.len() != prob.input_times.len() {
        return Err(Error::config(format!(
            "{} weights for {} input spikes",
            initial_weights.len(),
            prob.input_times.len()
        )));
    }
    let trains: Vec<SpikeTrain> = prob
        .input_times
        .iter()
        .map(|&t| SpikeTrain::new(vec![t]).expect("validated input times"))
        .collect();
    let mut ws = initial_weights.to_vec();
    let mut spike_times = Vec::new();
    for _ in 0..iterations {
        let inputs: Vec<(f64, &SpikeTrain)> = ws.iter().copied().zip(trains.iter()).collect();
        let Some(t) = simulate_neuron(&inputs, &prob.params, &prob.window).first() else {
            return Ok(ConvergenceRun { spike_times, went_silent: true, final_weights: ws });
        };
        spike_times.push(t);
        let target = Some(t - prob.delta_t);
        for (w, train) in ws.iter_mut().zip(trains.iter()) {
            *w += eta * filt_delta_w(target, Some(t), train, &prob.params);
        }
    }
    Ok(ConvergenceRun { spike_times, went_silent: false, final_weights: ws })
}

/// One presentation during alternating training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoTrainStep {
    /// Which pattern was shown (0 or 1).
    pub pattern: usize,
    pub spike_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoTrainRun {
    pub steps: Vec<TwoTrainStep>,
    /// Equilibrium of each pattern alone.
    pub t_e: [Option<Equilibrium>; 2],
    /// Both patterns stopped eliciting spikes.
    pub went_silent: bool,
}

/// Alternate two input patterns over the same synapses, picking one
/// uniformly at random per iteration and training toward the shifted self
/// target. Patterns must have one spike per synapse.
pub fn two_train_run(
    patterns: [&[f64]; 2],
    delta_t: f64,
    params: &KernelParams,
    window: &SimWindow,
    initial_weights: &[f64],
    eta: f64,
    iterations: usize,
    seed: u64,
) -> Result<TwoTrainRun> {
    let n = initial_weights.len();
    if patterns[0].len() != n || patterns[1].len() != n {
        return Err(Error::config(format!(
            "both patterns must carry one spike per synapse ({n}), got {} and {}",
            patterns[0].len(),
            patterns[1].len()
        )));
    }
    let probs = [
        EquilibriumProblem::new(patterns[0].to_vec(), delta_t, *params, *window)?,
        EquilibriumProblem::new(patterns[1].to_vec(), delta_t, *params, *window)?,
    ];
    let trains: [Vec<SpikeTrain>; 2] = [
        probs[0].input_times.iter().map(|&t| SpikeTrain::new(vec![t]).unwrap()).collect(),
        probs[1].input_times.iter().map(|&t| SpikeTrain::new(vec![t]).unwrap()).collect(),
    ];
    let t_e = [find_t_e(&probs[0]), find_t_e(&probs[1])];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(3);
    let mut ws = initial_weights.to_vec();
    let mut steps = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let pick = rng.random_range(0..2usize);
        let inputs: Vec<(f64, &SpikeTrain)> = ws.iter().copied().zip(trains[pick].iter()).collect();
        let first = simulate_neuron(&inputs, params, window).first();
        steps.push(TwoTrainStep { pattern: pick, spike_time: first });
        match first {
            Some(t) => {
                let target = Some(t - delta_t);
                for (w, train) in ws.iter_mut().zip(trains[pick].iter()) {
                    *w += eta * filt_delta_w(target, Some(t), train, params);
                }
            }
            None => {
                // No update happens on a silent presentation; if the other
                // pattern is silent too, nothing can ever change again.
                let other: Vec<(f64, &SpikeTrain)> =
                    ws.iter().copied().zip(trains[1 - pick].iter()).collect();
                if simulate_neuron(&other, params, window).first().is_none() {
                    return Ok(TwoTrainRun { steps, t_e, went_silent: true });
                }
            }
        }
    }
    Ok(TwoTrainRun { steps, t_e, went_silent: false })
}

/// One row of a plot-ready series file.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPoint {
    pub x: f64,
    pub series: String,
    pub value: f64,
}

impl SeriesPoint {
    pub fn new(x: f64, series: impl Into<String>, value: f64) -> Self {
        SeriesPoint { x, series: series.into(), value }
    }
}

/// Render series rows as `x,series,value` CSV.
pub fn series_csv(points: &[SeriesPoint]) -> String {
    let mut out = String::from("x,series,value\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.x, p.series, p.value));
    }
    out
}

pub fn write_series_csv(path: &Path, points: &[SeriesPoint]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(series_csv(points).as_bytes())?;
    Ok(())
}

/// Landscape of the potential change against candidate spike times, with
/// one series per input's contribution plus the total.
pub fn delta_u_series(prob: &EquilibriumProblem, step: f64) -> Vec<SeriesPoint> {
    let t_end = prob.window.duration();
    let steps = (t_end / step).floor() as usize;
    let mut points = Vec::new();
    for k in 1..=steps {
        let t = k as f64 * step;
        points.push(SeriesPoint::new(t, "total", delta_u(t, prob)));
        for i in 0..prob.input_times.len() {
            points.push(SeriesPoint::new(t, format!("input_{i}"), delta_u_component(t, i, prob)));
        }
    }
    points
}

/// Equilibrium time as a function of the target shift, for fixed inputs.
/// Shifts without an equilibrium are skipped.
pub fn t_e_sweep_series(
    input_times: &[f64],
    shifts: &[f64],
    params: &KernelParams,
    window: &SimWindow,
) -> Result<Vec<SeriesPoint>> {
    let mut points = Vec::new();
    for &dt in shifts {
        let prob = EquilibriumProblem::new(input_times.to_vec(), dt, *params, *window)?;
        if let Some(eq) = find_t_e(&prob) {
            points.push(SeriesPoint::new(dt, "t_e", eq.t_e));
        }
    }
    Ok(points)
}

/// Convergence trajectory plus a constant equilibrium reference line.
pub fn convergence_series(run: &ConvergenceRun, t_e: Option<f64>) -> Vec<SeriesPoint> {
    let mut points = Vec::new();
    for (i, &t) in run.spike_times.iter().enumerate() {
        points.push(SeriesPoint::new(i as f64, "spike_time", t));
        if let Some(te) = t_e {
            points.push(SeriesPoint::new(i as f64, "t_e", te));
        }
    }
    points
}

/// Per-pattern trajectories plus per-pattern equilibrium reference lines.
pub fn two_train_series(run: &TwoTrainRun) -> Vec<SeriesPoint> {
    let mut points = Vec::new();
    for (i, step) in run.steps.iter().enumerate() {
        if let Some(t) = step.spike_time {
            points.push(SeriesPoint::new(i as f64, format!("pattern_{}", step.pattern), t));
        }
        for (k, te) in run.t_e.iter().enumerate() {
            if let Some(eq) = te {
                points.push(SeriesPoint::new(i as f64, format!("t_e_{k}"), eq.t_e));
            }
        }
    }
    points
}

//! Batch training loop: forward passes with dropout, desirability-gated
//! spike-time updates accumulated per batch, the optimizer and scaling
//! steps, evaluation, and the metrics stream.

use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{make_batches, RawImage};
use crate::encoder::{encode_image, EncodedSample, EncoderParams};
use crate::error::{Error, Result};
use crate::network::{first_spike, init_weights, InitScheme, Network, Topology};
use crate::neuron::{KernelParams, SimWindow};
use crate::plasticity::{
    assign_targets, backpropagate_desirability, dropout_mask, filt_delta_w, output_desirability,
    rmsprop_step, synaptic_scaling, DesirabilityVector, OptimizerState, TrainConfig,
};

/// Counters from one training batch, forward passes run with dropout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchStats {
    pub n_samples: usize,
    pub correct: usize,
    pub abstained: usize,
    /// Spikes per hidden neuron per sample.
    pub mean_hidden_spikes: f64,
    /// Spikes per output neuron per sample.
    pub mean_output_spikes: f64,
}

impl BatchStats {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.n_samples as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalResult {
    /// Correct decisions over all samples; abstentions count as wrong.
    pub accuracy: f64,
    pub abstain_rate: f64,
}

/// Classify every sample with the full network (no dropout).
pub fn evaluate(net: &Network, samples: &[EncodedSample], window: &SimWindow) -> Result<EvalResult> {
    if samples.is_empty() {
        return Err(Error::config("cannot evaluate on an empty sample set"));
    }
    let mut correct = 0usize;
    let mut abstained = 0usize;
    for sample in samples {
        let fwd = net.forward(sample, window, None)?;
        match fwd.decision {
            Some(d) if d == sample.label as usize => correct += 1,
            Some(_) => {}
            None => abstained += 1,
        }
    }
    let n = samples.len() as f64;
    Ok(EvalResult { accuracy: correct as f64 / n, abstain_rate: abstained as f64 / n })
}

/// Desirability vectors for every hidden layer and every possible label,
/// computed from the current weights. Indexed `[label][hidden_layer - 1]`
/// where hidden layers are numbered 1..n_layers-1.
pub fn hidden_desirabilities(net: &Network, n_classes: usize) -> Vec<Vec<DesirabilityVector>> {
    let n_layers = net.topology().n_layers();
    let n_out = net.topology().n_outputs();
    (0..n_classes)
        .map(|label| {
            let mut per_layer: Vec<DesirabilityVector> = vec![DesirabilityVector(Vec::new()); n_layers - 2];
            let mut d = output_desirability(label, n_out);
            for h in (1..n_layers - 1).rev() {
                d = backpropagate_desirability(&net.weights[h], &d);
                per_layer[h - 1] = d.clone();
            }
            per_layer
        })
        .collect()
}

/// Run one batch: accumulate spike-time updates over the samples, then
/// apply the optimizer step followed by synaptic scaling.
///
/// Hidden desirabilities are computed once from the weights as they stand
/// at batch start, so every sample in the batch sees the same gating.
/// Dropped hidden neurons neither update their incoming weights nor count
/// toward the scaling statistics.
pub fn train_batch(
    net: &mut Network,
    opt: &mut OptimizerState,
    samples: &[EncodedSample],
    cfg: &TrainConfig,
    window: &SimWindow,
    dropout_rng: &mut ChaCha8Rng,
) -> Result<BatchStats> {
    if samples.is_empty() {
        return Err(Error::config("cannot train on an empty batch"));
    }
    let topo = net.topology().clone();
    let n_layers = topo.n_layers();
    let n_out = topo.n_outputs();
    let sizes = topo.layer_sizes().to_vec();
    for s in samples {
        if (s.label as usize) >= n_out {
            return Err(Error::data(format!("label {} outside the {n_out} output classes", s.label)));
        }
    }

    let per_label = hidden_desirabilities(net, n_out);
    let mut acc: Vec<Array2<f64>> =
        net.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect();
    let mut hidden_counts: Vec<Vec<u64>> =
        sizes[1..n_layers - 1].iter().map(|&s| vec![0u64; s]).collect();

    let mut correct = 0usize;
    let mut abstained = 0usize;
    let mut hidden_spikes = 0u64;
    let mut output_spikes = 0u64;

    for sample in samples {
        let masks: Vec<Vec<bool>> = sizes[1..n_layers - 1]
            .iter()
            .map(|&s| dropout_mask(s, cfg.dropout_rate, dropout_rng))
            .collect();
        let fwd = net.forward(sample, window, Some(&masks))?;

        match fwd.decision {
            Some(d) if d == sample.label as usize => correct += 1,
            Some(_) => {}
            None => abstained += 1,
        }
        for l in 1..n_layers - 1 {
            for (i, tr) in fwd.spikes[l].iter().enumerate() {
                hidden_counts[l - 1][i] += tr.len() as u64;
                hidden_spikes += tr.len() as u64;
            }
        }
        output_spikes += fwd.spikes[n_layers - 1].iter().map(|t| t.len() as u64).sum::<u64>();

        for l in 1..n_layers {
            let d = if l == n_layers - 1 {
                output_desirability(sample.label as usize, n_out)
            } else {
                per_label[sample.label as usize][l - 1].clone()
            };
            let firsts: Vec<Option<f64>> = fwd.spikes[l].iter().map(first_spike).collect();
            let targets = assign_targets(&d, &firsts, l, cfg);
            let presyn = &fwd.spikes[l - 1];
            let layer_acc = &mut acc[l - 1];
            for i in 0..sizes[l] {
                if l < n_layers - 1 && !masks[l - 1][i] {
                    continue;
                }
                let target = targets.0[i];
                let actual = firsts[i];
                if target.is_none() && actual.is_none() {
                    continue;
                }
                for (j, tr) in presyn.iter().enumerate() {
                    if tr.is_empty() {
                        continue;
                    }
                    layer_acc[[i, j]] += filt_delta_w(target, actual, tr, &net.params);
                }
            }
        }
    }

    rmsprop_step(net, &acc, opt, cfg);
    synaptic_scaling(net, opt, &hidden_counts, cfg);

    let n = samples.len() as f64;
    let n_hidden: usize = sizes[1..n_layers - 1].iter().sum();
    Ok(BatchStats {
        n_samples: samples.len(),
        correct,
        abstained,
        mean_hidden_spikes: hidden_spikes as f64 / (n * n_hidden.max(1) as f64),
        mean_output_spikes: output_spikes as f64 / (n * n_out as f64),
    })
}

/// One row of the metrics stream. Train columns are filled on training
/// rows, test columns on evaluation rows; absent values render empty.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub batch: usize,
    pub train_acc: Option<f64>,
    pub test_acc: Option<f64>,
    pub abstain_rate: Option<f64>,
    pub mean_hidden_spikes: Option<f64>,
    pub mean_output_spikes: Option<f64>,
    /// Wall clock since the start of the run, in milliseconds.
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunMetrics {
    pub rows: Vec<MetricsRow>,
}

pub const METRICS_HEADER: &str =
    "batch,train_acc,test_acc,abstain_rate,mean_hidden_spikes,mean_output_spikes,wall_ms";

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn metrics_csv(metrics: &RunMetrics) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in &metrics.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.batch,
            opt_cell(r.train_acc),
            opt_cell(r.test_acc),
            opt_cell(r.abstain_rate),
            opt_cell(r.mean_hidden_spikes),
            opt_cell(r.mean_output_spikes),
            r.wall_ms,
        ));
    }
    out
}

pub fn write_metrics_csv(path: &Path, metrics: &RunMetrics) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(metrics_csv(metrics).as_bytes())?;
    Ok(())
}

/// Train a fresh network on the given images.
///
/// Evaluates on the test set before training, every `eval_every` batches,
/// and after the final batch. When `output_dir` is given, writes
/// `metrics.csv` and `checkpoint.bin` there. `on_row` fires as each
/// metrics row is finalized.
#[allow(clippy::too_many_arguments)]
pub fn train_run(
    train_images: &[RawImage],
    test_images: &[RawImage],
    topology: &Topology,
    kernel: &KernelParams,
    encoder: &EncoderParams,
    window: &SimWindow,
    cfg: &TrainConfig,
    eval_every: usize,
    output_dir: Option<&Path>,
    mut on_row: impl FnMut(&MetricsRow),
) -> Result<(Network, RunMetrics)> {
    if eval_every == 0 {
        return Err(Error::config("eval_every must be positive"));
    }
    cfg.validate()?;
    let mut net = init_weights(topology, cfg.seed, InitScheme::UniformDrive, kernel);
    let mut opt = OptimizerState::new(&net);
    let plan = make_batches(train_images.len(), cfg, cfg.seed)?;
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    dropout_rng.set_stream(2);

    let test_encoded: Vec<EncodedSample> = test_images
        .iter()
        .map(|img| encode_image(&img.pixels, img.label, encoder))
        .collect::<Result<_>>()?;

    let start = Instant::now();
    let mut metrics = RunMetrics::default();

    let initial = evaluate(&net, &test_encoded, window)?;
    let row = MetricsRow {
        batch: 0,
        train_acc: None,
        test_acc: Some(initial.accuracy),
        abstain_rate: Some(initial.abstain_rate),
        mean_hidden_spikes: None,
        mean_output_spikes: None,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    on_row(&row);
    metrics.rows.push(row);

    let n_batches = plan.batches.len();
    for (bi, batch) in plan.batches.iter().enumerate() {
        let batch_no = bi + 1;
        let samples: Vec<EncodedSample> = batch
            .iter()
            .map(|&idx| {
                let img = &train_images[idx];
                encode_image(&img.pixels, img.label, encoder)
            })
            .collect::<Result<_>>()?;
        let stats = train_batch(&mut net, &mut opt, &samples, cfg, window, &mut dropout_rng)?;

        let eval = if batch_no % eval_every == 0 || batch_no == n_batches {
            Some(evaluate(&net, &test_encoded, window)?)
        } else {
            None
        };
        let row = MetricsRow {
            batch: batch_no,
            train_acc: Some(stats.accuracy()),
            test_acc: eval.map(|e| e.accuracy),
            abstain_rate: eval.map(|e| e.abstain_rate),
            mean_hidden_spikes: Some(stats.mean_hidden_spikes),
            mean_output_spikes: Some(stats.mean_output_spikes),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        };
        on_row(&row);
        metrics.rows.push(row);
    }

    if let Some(dir) = output_dir {
        fs::create_dir_all(dir)?;
        write_metrics_csv(&dir.join("metrics.csv"), &metrics)?;
        net.save_checkpoint(&dir.join("checkpoint.bin"))?;
    }
    Ok((net, metrics))
}

//! Command line front end: training runs, checkpoint evaluation, input
//! encoding inspection, single-neuron analysis series, and hyperparameter
//! sweeps.
//!
//! Exit codes: 0 success, 1 usage, 2 data loading, 3 runtime failure.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use filt_snn::analysis::{
    convergence_run, convergence_series, delta_u_series, find_t_e, series_csv, t_e_sweep_series,
    two_train_run, two_train_series, write_series_csv, EquilibriumProblem, SeriesPoint,
};
use filt_snn::config::{DataConfig, RunConfig};
use filt_snn::dataset::{load_pair, sample_subset, RawImage};
use filt_snn::encoder::encode_image;
use filt_snn::network::Network;
use filt_snn::neuron::{KernelParams, SimWindow};
use filt_snn::trainer::{evaluate, train_run, MetricsRow};

#[derive(Parser)]
#[command(
    name = "filt-snn",
    version,
    about = "Train and analyze spiking networks that classify by first output spike"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a network and write metrics, checkpoint, and config provenance.
    Train(TrainArgs),
    /// Evaluate a saved checkpoint on a dataset split.
    Eval(EvalArgs),
    /// Show the spike encoding of one image.
    Encode(EncodeArgs),
    /// Single-neuron analysis series as CSV.
    Analyze(AnalyzeArgs),
    /// Train across a hyperparameter axis and aggregate test accuracy.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Config file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the training seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the learning rate.
    #[arg(long)]
    eta: Option<f64>,
    /// Override the number of batches.
    #[arg(long)]
    batches: Option<usize>,
    /// Override the desirability threshold.
    #[arg(long)]
    d_t: Option<f64>,
    /// Replace the hidden layers with a single layer of this size.
    #[arg(long)]
    hidden: Option<usize>,
    /// Override the output directory.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Split {
    Train,
    Test,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint written by a training run.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Config file naming the dataset; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Which split to evaluate.
    #[arg(long, value_enum, default_value = "test")]
    set: Split,
}

#[derive(Args)]
struct EncodeArgs {
    /// Config file naming the dataset; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Which split to read the image from.
    #[arg(long, value_enum, default_value = "train")]
    set: Split,
    /// Image index within the split.
    #[arg(long)]
    index: usize,
    /// Emit JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(subcommand)]
    cmd: AnalyzeCmd,
}

#[derive(Subcommand)]
enum AnalyzeCmd {
    /// Potential change at the firing time against candidate times,
    /// with per-input contributions.
    DeltaU(DeltaUArgs),
    /// Equilibrium time as a function of the target shift.
    TeSweep(TeSweepArgs),
    /// Spike-time trajectory under repeated self-shifted training.
    Converge(ConvergeArgs),
    /// Alternating presentation of two spike trains over shared synapses.
    TwoTrain(TwoTrainArgs),
}

#[derive(Args)]
struct DeltaUArgs {
    /// Input spike times in ms.
    #[arg(long, value_delimiter = ',', required = true)]
    inputs: Vec<f64>,
    /// Target shift in ms.
    #[arg(long, default_value_t = 0.5)]
    delta_t: f64,
    /// Sample step in ms.
    #[arg(long, default_value_t = 0.01)]
    step: f64,
    /// Window length in ms.
    #[arg(long, default_value_t = 10.0)]
    duration: f64,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TeSweepArgs {
    /// Input spike times in ms.
    #[arg(long, value_delimiter = ',', required = true)]
    inputs: Vec<f64>,
    /// Target shifts to sweep, in ms.
    #[arg(long, value_delimiter = ',', required = true)]
    shifts: Vec<f64>,
    /// Window length in ms.
    #[arg(long, default_value_t = 10.0)]
    duration: f64,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConvergeArgs {
    /// Input spike times in ms, one synapse each.
    #[arg(long, value_delimiter = ',', required = true)]
    inputs: Vec<f64>,
    /// Target shift in ms.
    #[arg(long, default_value_t = 0.5)]
    delta_t: f64,
    /// Initial weight per synapse.
    #[arg(long, value_delimiter = ',', required = true)]
    weights: Vec<f64>,
    /// Learning rate.
    #[arg(long, default_value_t = 5.0)]
    eta: f64,
    #[arg(long, default_value_t = 200)]
    iterations: usize,
    /// Window length in ms.
    #[arg(long, default_value_t = 10.0)]
    duration: f64,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TwoTrainArgs {
    /// First train's spike times, one synapse each.
    #[arg(long, value_delimiter = ',', required = true)]
    pattern_a: Vec<f64>,
    /// Second train's spike times over the same synapses.
    #[arg(long, value_delimiter = ',', required = true)]
    pattern_b: Vec<f64>,
    /// Target shift in ms.
    #[arg(long, default_value_t = 0.5)]
    delta_t: f64,
    /// Initial weight per synapse.
    #[arg(long, value_delimiter = ',', required = true)]
    weights: Vec<f64>,
    /// Learning rate.
    #[arg(long, default_value_t = 2.0)]
    eta: f64,
    #[arg(long, default_value_t = 500)]
    iterations: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Window length in ms.
    #[arg(long, default_value_t = 10.0)]
    duration: f64,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum SweepAxis {
    /// Hidden layer size.
    Hidden,
    /// Learning rate.
    Eta,
    /// Desirability threshold.
    DtThreshold,
}

#[derive(Args)]
struct SweepArgs {
    /// Base config file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Which hyperparameter the values apply to.
    #[arg(long, value_enum)]
    axis: SweepAxis,
    /// Axis values to sweep.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
    /// Seeds to run per value.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    seeds: Vec<u64>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Failure {
    code: i32,
    msg: String,
}

const EXIT_USAGE: i32 = 1;
const EXIT_DATA: i32 = 2;
const EXIT_RUNTIME: i32 = 3;

trait Phase<T> {
    fn phase(self, code: i32) -> Result<T, Failure>;
}

impl<T, E: std::fmt::Display> Phase<T> for Result<T, E> {
    fn phase(self, code: i32) -> Result<T, Failure> {
        self.map_err(|e| Failure { code, msg: e.to_string() })
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match cli.cmd {
        Cmd::Train(args) => cmd_train(args),
        Cmd::Eval(args) => cmd_eval(args),
        Cmd::Encode(args) => cmd_encode(args),
        Cmd::Analyze(args) => cmd_analyze(args),
        Cmd::Sweep(args) => cmd_sweep(args),
    };
    if let Err(f) = result {
        eprintln!("error: {}", f.msg);
        std::process::exit(f.code);
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, Failure> {
    match path {
        Some(p) => RunConfig::load(p).phase(EXIT_USAGE),
        None => Ok(RunConfig::default()),
    }
}

fn load_split(data: &DataConfig, split: Split, seed: u64) -> Result<Vec<RawImage>, Failure> {
    let ((imgs, labs), subset) = match split {
        Split::Train => (data.train_paths(), data.train_subset),
        Split::Test => (data.test_paths(), data.test_subset),
    };
    let all = load_pair(&imgs, &labs).phase(EXIT_DATA)?;
    match subset {
        Some(n) if n < all.len() => {
            let idx = sample_subset(all.len(), n, seed).phase(EXIT_DATA)?;
            Ok(idx.into_iter().map(|i| all[i].clone()).collect())
        }
        _ => Ok(all),
    }
}

fn print_row(row: &MetricsRow) {
    let mut line = format!("batch {:>4}", row.batch);
    if let Some(v) = row.train_acc {
        line.push_str(&format!("  train_acc {v:.4}"));
    }
    if let Some(v) = row.test_acc {
        line.push_str(&format!("  test_acc {v:.4}"));
    }
    if let Some(v) = row.abstain_rate {
        line.push_str(&format!("  abstain {v:.4}"));
    }
    if let Some(v) = row.mean_hidden_spikes {
        line.push_str(&format!("  hidden_spikes {v:.3}"));
    }
    line.push_str(&format!("  wall_ms {:.0}", row.wall_ms));
    eprintln!("{line}");
}

fn cmd_train(args: TrainArgs) -> Result<(), Failure> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.train.seed = seed;
    }
    if let Some(eta) = args.eta {
        cfg.train.eta = eta;
    }
    if let Some(batches) = args.batches {
        cfg.train.batches = batches;
    }
    if let Some(d_t) = args.d_t {
        cfg.train.d_t = d_t;
    }
    if let Some(hidden) = args.hidden {
        let first = *cfg.topology.first().unwrap_or(&784);
        let last = *cfg.topology.last().unwrap_or(&10);
        cfg.topology = vec![first, hidden, last];
    }
    if let Some(out) = args.output {
        cfg.output_dir = out.display().to_string();
    }
    cfg.validate().phase(EXIT_USAGE)?;

    let train = load_split(&cfg.data, Split::Train, cfg.train.seed)?;
    let test = load_split(&cfg.data, Split::Test, cfg.train.seed)?;

    let out_dir = PathBuf::from(&cfg.output_dir);
    std::fs::create_dir_all(&out_dir).phase(EXIT_RUNTIME)?;
    std::fs::write(out_dir.join("config.json"), cfg.to_json_pretty()).phase(EXIT_RUNTIME)?;

    let topology = cfg.topology().phase(EXIT_USAGE)?;
    let window = cfg.window.build().phase(EXIT_USAGE)?;
    let (_, metrics) = train_run(
        &train,
        &test,
        &topology,
        &cfg.kernel,
        &cfg.encoder,
        &window,
        &cfg.train,
        cfg.eval_every,
        Some(&out_dir),
        print_row,
    )
    .phase(EXIT_RUNTIME)?;

    let last = metrics.rows.last().expect("run produces rows");
    println!("test_accuracy {}", last.test_acc.expect("final row evaluates"));
    println!("abstain_rate {}", last.abstain_rate.expect("final row evaluates"));
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), Failure> {
    let cfg = load_config(args.config.as_deref())?;
    let net = Network::load_checkpoint(&args.checkpoint).phase(EXIT_DATA)?;
    let images = load_split(&cfg.data, args.set, cfg.train.seed)?;
    let window = cfg.window.build().phase(EXIT_USAGE)?;
    let samples = images
        .iter()
        .map(|img| encode_image(&img.pixels, img.label, &cfg.encoder))
        .collect::<filt_snn::Result<Vec<_>>>()
        .phase(EXIT_DATA)?;
    let result = evaluate(&net, &samples, &window).phase(EXIT_RUNTIME)?;
    println!("accuracy {}", result.accuracy);
    println!("abstain_rate {}", result.abstain_rate);
    Ok(())
}

fn cmd_encode(args: EncodeArgs) -> Result<(), Failure> {
    let cfg = load_config(args.config.as_deref())?;
    let images = load_split(&cfg.data, args.set, cfg.train.seed)?;
    let img = images.get(args.index).ok_or(Failure {
        code: EXIT_USAGE,
        msg: format!("index {} outside the split of {} images", args.index, images.len()),
    })?;
    let sample = encode_image(&img.pixels, img.label, &cfg.encoder).phase(EXIT_DATA)?;
    if args.json {
        let doc = serde_json::json!({
            "label": sample.label,
            "spike_times": sample.spike_times,
        });
        println!("{doc}");
    } else {
        println!("label {}", sample.label);
        for (ch, t) in sample.spike_times.iter().enumerate() {
            if let Some(t) = t {
                println!("{ch} {t}");
            }
        }
    }
    Ok(())
}

fn emit_series(out: Option<&Path>, points: &[SeriesPoint]) -> Result<(), Failure> {
    match out {
        Some(p) => write_series_csv(p, points).phase(EXIT_RUNTIME),
        None => {
            print!("{}", series_csv(points));
            Ok(())
        }
    }
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<(), Failure> {
    let params = KernelParams::default();
    match args.cmd {
        AnalyzeCmd::DeltaU(a) => {
            let window = SimWindow::new(a.duration, 0.1).phase(EXIT_USAGE)?;
            let prob = EquilibriumProblem::new(a.inputs, a.delta_t, params, window)
                .phase(EXIT_USAGE)?;
            if a.step <= 0.0 {
                return Err(Failure { code: EXIT_USAGE, msg: "step must be positive".into() });
            }
            if let Some(eq) = find_t_e(&prob) {
                eprintln!("t_e {}{}", eq.t_e, if eq.multiple_roots { " (multiple roots)" } else { "" });
            }
            emit_series(a.out.as_deref(), &delta_u_series(&prob, a.step))
        }
        AnalyzeCmd::TeSweep(a) => {
            let window = SimWindow::new(a.duration, 0.1).phase(EXIT_USAGE)?;
            let points =
                t_e_sweep_series(&a.inputs, &a.shifts, &params, &window).phase(EXIT_USAGE)?;
            emit_series(a.out.as_deref(), &points)
        }
        AnalyzeCmd::Converge(a) => {
            let window = SimWindow::new(a.duration, 0.1).phase(EXIT_USAGE)?;
            let prob = EquilibriumProblem::new(a.inputs, a.delta_t, params, window)
                .phase(EXIT_USAGE)?;
            let run =
                convergence_run(&prob, &a.weights, a.eta, a.iterations).phase(EXIT_USAGE)?;
            if run.went_silent {
                eprintln!("went silent after {} spikes", run.spike_times.len());
            }
            let te = find_t_e(&prob).map(|eq| eq.t_e);
            emit_series(a.out.as_deref(), &convergence_series(&run, te))
        }
        AnalyzeCmd::TwoTrain(a) => {
            let window = SimWindow::new(a.duration, 0.1).phase(EXIT_USAGE)?;
            let run = two_train_run(
                [&a.pattern_a, &a.pattern_b],
                a.delta_t,
                &params,
                &window,
                &a.weights,
                a.eta,
                a.iterations,
                a.seed,
            )
            .phase(EXIT_USAGE)?;
            if run.went_silent {
                eprintln!("both trains went silent after {} steps", run.steps.len());
            }
            emit_series(a.out.as_deref(), &two_train_series(&run))
        }
    }
}

fn cmd_sweep(args: SweepArgs) -> Result<(), Failure> {
    let base = load_config(args.config.as_deref())?;
    if args.values.is_empty() {
        return Err(Failure { code: EXIT_USAGE, msg: "no sweep values given".into() });
    }
    if args.jobs == 0 {
        return Err(Failure { code: EXIT_USAGE, msg: "jobs must be positive".into() });
    }
    if args.axis == SweepAxis::Hidden {
        for &v in &args.values {
            if v.fract() != 0.0 || v < 1.0 {
                return Err(Failure {
                    code: EXIT_USAGE,
                    msg: format!("hidden size must be a positive integer, got {v}"),
                });
            }
        }
    }

    let mut configs = Vec::new();
    for &value in &args.values {
        for &seed in &args.seeds {
            let mut cfg = base.clone();
            cfg.train.seed = seed;
            match args.axis {
                SweepAxis::Hidden => {
                    let first = *cfg.topology.first().unwrap_or(&784);
                    let last = *cfg.topology.last().unwrap_or(&10);
                    cfg.topology = vec![first, value as usize, last];
                }
                SweepAxis::Eta => cfg.train.eta = value,
                SweepAxis::DtThreshold => cfg.train.d_t = value,
            }
            cfg.validate().phase(EXIT_USAGE)?;
            configs.push((value, seed, cfg));
        }
    }

    let train = load_split(&base.data, Split::Train, base.train.seed)?;
    let test = load_split(&base.data, Split::Test, base.train.seed)?;

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<f64>>> = Mutex::new(vec![None; configs.len()]);
    std::thread::scope(|scope| {
        for _ in 0..args.jobs.min(configs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((value, seed, cfg)) = configs.get(i) else { break };
                let acc = run_sweep_job(cfg, &train, &test);
                match acc {
                    Ok(acc) => {
                        eprintln!("value {value} seed {seed}: test_accuracy {acc}");
                        results.lock().unwrap()[i] = Some(acc);
                    }
                    Err(msg) => eprintln!("value {value} seed {seed} failed: {msg}"),
                }
            });
        }
    });
    let results = results.into_inner().unwrap();

    let mut points = Vec::new();
    for (value_idx, &value) in args.values.iter().enumerate() {
        let mut accs = Vec::new();
        for (seed_idx, &seed) in args.seeds.iter().enumerate() {
            if let Some(acc) = results[value_idx * args.seeds.len() + seed_idx] {
                points.push(SeriesPoint::new(value, format!("seed_{seed}"), acc));
                accs.push(acc);
            }
        }
        if !accs.is_empty() {
            let mean = accs.iter().sum::<f64>() / accs.len() as f64;
            points.push(SeriesPoint::new(value, "mean", mean));
        }
    }
    if points.is_empty() {
        return Err(Failure { code: EXIT_RUNTIME, msg: "every sweep job failed".into() });
    }
    emit_series(args.out.as_deref(), &points)
}

fn run_sweep_job(cfg: &RunConfig, train: &[RawImage], test: &[RawImage]) -> Result<f64, String> {
    let topology = cfg.topology().map_err(|e| e.to_string())?;
    let window = cfg.window.build().map_err(|e| e.to_string())?;
    let (_, metrics) = train_run(
        train,
        test,
        &topology,
        &cfg.kernel,
        &cfg.encoder,
        &window,
        &cfg.train,
        cfg.eval_every,
        None,
        |_| {},
    )
    .map_err(|e| e.to_string())?;
    metrics
        .rows
        .last()
        .and_then(|r| r.test_acc)
        .ok_or_else(|| "run produced no evaluation".into())
}

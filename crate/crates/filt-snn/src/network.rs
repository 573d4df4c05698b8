//! Feedforward network container: weights, layer-wise simulation, the
//! first-to-spike decision, and checkpoint I/O.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::encoder::EncodedSample;
use crate::error::{Error, Result};
use crate::neuron::{membrane_potential, psp_kernel, KernelParams, SimWindow, SpikeTrain};

/// Layer sizes from input channels to output classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    layer_sizes: Vec<usize>,
}

impl Topology {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::config(format!(
                "topology needs at least an input and an output layer, got {layer_sizes:?}"
            )));
        }
        if layer_sizes.iter().any(|&n| n == 0) {
            return Err(Error::config(format!("all layer sizes must be >= 1, got {layer_sizes:?}")));
        }
        Ok(Topology { layer_sizes })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn n_layers(&self) -> usize {
        self.layer_sizes.len()
    }

    pub fn n_inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn n_outputs(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Number of weight matrices (connections between adjacent layers).
    pub fn n_connections(&self) -> usize {
        self.layer_sizes.len() - 1
    }
}

/// Weight initialization schemes, recorded in checkpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitScheme {
    /// Each weight uniform on [0, 2c] with c = v_t / (0.3 * fan_in * psp_peak),
    /// so spikes on ~30% of a neuron's inputs put the expected peak drive
    /// near threshold.
    UniformDrive,
    /// Every weight set to the same constant.
    Constant(f64),
}

impl InitScheme {
    fn tag(&self) -> u32 {
        match self {
            InitScheme::UniformDrive => 0,
            InitScheme::Constant(_) => 1,
        }
    }

    fn payload(&self) -> f64 {
        match self {
            InitScheme::UniformDrive => 0.0,
            InitScheme::Constant(c) => *c,
        }
    }

    fn from_parts(tag: u32, payload: f64) -> Result<Self> {
        match tag {
            0 => Ok(InitScheme::UniformDrive),
            1 => Ok(InitScheme::Constant(payload)),
            other => Err(Error::data(format!("unknown init scheme tag {other} in checkpoint"))),
        }
    }
}

/// Upper bound of the uniform init interval for a given fan-in.
pub fn init_scale(fan_in: usize, params: &KernelParams) -> f64 {
    params.v_t / (0.3 * fan_in as f64 * params.psp_peak())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    topology: Topology,
    /// weights[l] has shape (sizes[l+1], sizes[l]); row = postsynaptic neuron.
    pub weights: Vec<Array2<f64>>,
    pub params: KernelParams,
    init: InitScheme,
    seed: u64,
}

/// Per-layer spike trains plus the first-to-spike decision.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardResult {
    /// spikes[l][i] is neuron i of layer l; layer 0 holds the input trains.
    pub spikes: Vec<Vec<SpikeTrain>>,
    /// Winning class, or None when no output neuron fired.
    pub decision: Option<usize>,
}

/// Deterministic weight initialization.
pub fn init_weights(topology: &Topology, seed: u64, scheme: InitScheme, params: &KernelParams) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sizes = topology.layer_sizes();
    let weights = (0..topology.n_connections())
        .map(|l| {
            let (post, pre) = (sizes[l + 1], sizes[l]);
            match scheme {
                InitScheme::UniformDrive => {
                    let bound = 2.0 * init_scale(pre, params);
                    Array2::from_shape_fn((post, pre), |_| rng.random_range(0.0..bound))
                }
                InitScheme::Constant(c) => Array2::from_elem((post, pre), c),
            }
        })
        .collect();
    Network {
        topology: topology.clone(),
        weights,
        params: *params,
        init: scheme,
        seed,
    }
}

/// Earliest spike of a train, if any.
pub fn first_spike(train: &SpikeTrain) -> Option<f64> {
    train.first()
}

impl Network {
    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn init_scheme(&self) -> InitScheme {
        self.init
    }

    pub fn init_seed(&self) -> u64 {
        self.seed
    }

    /// Simulate the whole network on one encoded sample.
    ///
    /// `mask` holds keep-flags for each hidden layer (true = active); masked
    /// neurons emit no spikes. The decision is the output neuron with the
    /// earliest first spike, ties broken by lowest index.
    pub fn forward(
        &self,
        sample: &EncodedSample,
        window: &SimWindow,
        mask: Option<&[Vec<bool>]>,
    ) -> Result<ForwardResult> {
        if sample.channels() != self.topology.n_inputs() {
            return Err(Error::data(format!(
                "sample has {} channels but the network expects {}",
                sample.channels(),
                self.topology.n_inputs()
            )));
        }
        self.forward_trains(sample.trains(), window, mask)
    }

    /// Simulate from explicit input spike trains (layer 0).
    pub fn forward_trains(
        &self,
        input_trains: Vec<SpikeTrain>,
        window: &SimWindow,
        mask: Option<&[Vec<bool>]>,
    ) -> Result<ForwardResult> {
        if input_trains.len() != self.topology.n_inputs() {
            return Err(Error::data(format!(
                "got {} input trains but the network expects {}",
                input_trains.len(),
                self.topology.n_inputs()
            )));
        }
        let n_conn = self.topology.n_connections();
        if let Some(m) = mask {
            let n_hidden_layers = n_conn - 1;
            if m.len() != n_hidden_layers {
                return Err(Error::data(format!(
                    "mask covers {} layers but the network has {} hidden layers",
                    m.len(),
                    n_hidden_layers
                )));
            }
            for (h, flags) in m.iter().enumerate() {
                if flags.len() != self.topology.layer_sizes()[h + 1] {
                    return Err(Error::data(format!(
                        "mask for hidden layer {} has {} entries, expected {}",
                        h + 1,
                        flags.len(),
                        self.topology.layer_sizes()[h + 1]
                    )));
                }
            }
        }

        let mut spikes: Vec<Vec<SpikeTrain>> = Vec::with_capacity(self.topology.n_layers());
        spikes.push(input_trains);
        for l in 0..n_conn {
            let active = mask.and_then(|m| if l < n_conn - 1 { Some(m[l].as_slice()) } else { None });
            let layer = simulate_layer(&self.weights[l], &spikes[l], &self.params, window, active);
            spikes.push(layer);
        }

        let mut decision = None;
        let mut best = f64::INFINITY;
        for (i, train) in spikes[self.topology.n_layers() - 1].iter().enumerate() {
            if let Some(t) = train.first() {
                if t < best {
                    best = t;
                    decision = Some(i);
                }
            }
        }
        Ok(ForwardResult { spikes, decision })
    }

    /// Write a self-describing little-endian checkpoint.
    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let mut buf: Vec<u8> = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.topology.n_layers() as u32).to_le_bytes());
        for &n in self.topology.layer_sizes() {
            buf.extend_from_slice(&(n as u32).to_le_bytes());
        }
        for v in [
            self.params.tau_m,
            self.params.tau_s,
            self.params.eps0,
            self.params.u_r,
            self.params.v_t,
            self.params.tau_q,
        ] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&self.init.tag().to_le_bytes());
        buf.extend_from_slice(&self.init.payload().to_le_bytes());
        buf.extend_from_slice(&self.seed.to_le_bytes());
        for w in &self.weights {
            for &v in w.iter() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        let mut f = fs::File::create(path)?;
        f.write_all(&buf)?;
        Ok(())
    }

    /// Load and validate a checkpoint written by [`Network::save_checkpoint`].
    pub fn load_checkpoint(path: &Path) -> Result<Network> {
        let bytes = fs::read(path)?;
        let mut r = Reader { bytes: &bytes, pos: 0, path };
        let magic = r.take(8)?;
        if magic != MAGIC {
            return Err(Error::data(format!("{}: not a network checkpoint", path.display())));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::data(format!(
                "{}: unsupported checkpoint version {version}",
                path.display()
            )));
        }
        let n_layers = r.u32()? as usize;
        if !(2..=1024).contains(&n_layers) {
            return Err(Error::data(format!("{}: implausible layer count {n_layers}", path.display())));
        }
        let mut sizes = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            sizes.push(r.u32()? as usize);
        }
        let topology = Topology::new(sizes)?;
        let params = KernelParams {
            tau_m: r.f64()?,
            tau_s: r.f64()?,
            eps0: r.f64()?,
            u_r: r.f64()?,
            v_t: r.f64()?,
            tau_q: r.f64()?,
        };
        params.validate()?;
        let init = InitScheme::from_parts(r.u32()?, r.f64()?)?;
        let seed = r.u64()?;
        let sizes = topology.layer_sizes().to_vec();
        let mut weights = Vec::with_capacity(topology.n_connections());
        for l in 0..topology.n_connections() {
            let (post, pre) = (sizes[l + 1], sizes[l]);
            let mut data = Vec::with_capacity(post * pre);
            for _ in 0..post * pre {
                let v = r.f64()?;
                if !v.is_finite() {
                    return Err(Error::data(format!("{}: non-finite weight", path.display())));
                }
                data.push(v);
            }
            weights.push(
                Array2::from_shape_vec((post, pre), data).expect("shape matches element count"),
            );
        }
        if r.pos != bytes.len() {
            return Err(Error::data(format!(
                "{}: {} trailing bytes after weights",
                path.display(),
                bytes.len() - r.pos
            )));
        }
        Ok(Network {
            topology,
            weights,
            params,
            init,
            seed,
        })
    }
}

const MAGIC: &[u8; 8] = b"FILTSNN\0";
const VERSION: u32 = 1;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::data(format!("{}: checkpoint truncated", self.path.display())));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Simulate one whole layer against shared presynaptic trains.
///
/// Same grid scan as [`crate::neuron::simulate_neuron`], but the decay
/// state is vectorized over postsynaptic neurons so each presynaptic spike
/// costs two exponentials total instead of two per neuron. Inactive neurons
/// (dropout) emit nothing.
pub fn simulate_layer(
    weights: &Array2<f64>,
    presyn: &[SpikeTrain],
    p: &KernelParams,
    w: &SimWindow,
    active: Option<&[bool]>,
) -> Vec<SpikeTrain> {
    let (n_post, n_pre) = (weights.nrows(), weights.ncols());
    assert_eq!(n_pre, presyn.len(), "presynaptic trains must match weight columns");
    if let Some(a) = active {
        assert_eq!(a.len(), n_post, "active flags must match weight rows");
    }

    // All presynaptic spikes merged in time order.
    let mut events: Vec<(f64, usize)> = presyn
        .iter()
        .enumerate()
        .flat_map(|(j, train)| train.times().iter().map(move |&t| (t, j)))
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let dt = w.dt();
    let decay_m = (-dt / p.tau_m).exp();
    let decay_s = (-dt / p.tau_s).exp();
    let reset_amp = p.u_r - p.v_t;

    let mut em = vec![0.0f64; n_post];
    let mut es = vec![0.0f64; n_post];
    let mut km = vec![0.0f64; n_post];
    let mut out = vec![SpikeTrain::empty(); n_post];
    let mut next_event = 0usize;

    for k in 1..=w.steps() {
        let t = w.time(k);
        for v in em.iter_mut() {
            *v *= decay_m;
        }
        for v in es.iter_mut() {
            *v *= decay_s;
        }
        for v in km.iter_mut() {
            *v *= decay_m;
        }
        while next_event < events.len() && events[next_event].0 <= t {
            let (tj, j) = events[next_event];
            let s = t - tj;
            let fm = (-s / p.tau_m).exp();
            let fs = (-s / p.tau_s).exp();
            let col = weights.column(j);
            for (i, &wij) in col.iter().enumerate() {
                em[i] += wij * fm;
                es[i] += wij * fs;
            }
            next_event += 1;
        }
        for i in 0..n_post {
            if let Some(a) = active {
                if !a[i] {
                    continue;
                }
            }
            let u = p.eps0 * (em[i] - es[i]) + reset_amp * km[i];
            if u >= p.v_t && literal_potential(t, weights, i, presyn, &out[i], p) >= p.v_t {
                out[i].push(t);
                km[i] += 1.0;
            }
        }
    }
    out
}

/// Closed-form potential of one row of the layer, used to confirm grid
/// crossings independently of the running decay state.
fn literal_potential(
    t: f64,
    weights: &Array2<f64>,
    row: usize,
    presyn: &[SpikeTrain],
    own: &SpikeTrain,
    p: &KernelParams,
) -> f64 {
    let mut u = 0.0;
    for (j, train) in presyn.iter().enumerate() {
        if train.is_empty() {
            continue;
        }
        let wij = weights[[row, j]];
        for &tj in train.times() {
            u += wij * psp_kernel(t - tj, p);
        }
    }
    let empty: [(f64, &SpikeTrain); 0] = [];
    u + membrane_potential(t, &empty, own, p)
}

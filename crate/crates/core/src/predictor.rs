//! Multi-resource feed-forward forecaster.
//!
//! The network has `x` resource channels that share one topology
//! (`n` lag inputs plus a bias, `p` hidden nodes, one output) but never
//! share weights: channel `k` only sees the lags of resource `k`. A genome
//! is the concatenation of the `x` channel blocks, each laid out as
//!
//! ```text
//! [w_00 .. w_0(n-1) b_0] [w_10 .. b_1] ... [w_(p-1)0 .. b_(p-1)] [v_0 .. v_(p-1)]
//! ```
//!
//! Hidden and output nodes use the logistic sigmoid, so forecasts live in
//! `(0, 1)` like the normalized targets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::traces::{Bounds, TrainingWindow};

pub const PREDICTOR_FORMAT_VERSION: u32 = 1;

/// Default EDP blending weight of the most recent error.
pub const DEFAULT_ALPHA: f64 = 0.8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    /// Lag inputs per channel.
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
    /// Resource channels.
    pub resources: usize,
}

impl Topology {
    pub fn new(inputs: usize, hidden: usize, outputs: usize, resources: usize) -> Result<Self> {
        if inputs == 0 || hidden == 0 || outputs == 0 || resources == 0 {
            return Err(Error::invalid("topology sizes must be at least 1"));
        }
        if outputs != 1 {
            return Err(Error::invalid("only single-step forecasts (one output set) are supported"));
        }
        Ok(Topology { inputs, hidden, outputs, resources })
    }

    /// Weights of one resource channel.
    pub fn channel_len(&self) -> usize {
        network_size(self)
    }

    /// Total genome length across channels.
    pub fn genome_len(&self) -> usize {
        self.resources * self.channel_len()
    }

    pub fn input_len(&self) -> usize {
        self.inputs * self.resources
    }
}

/// Per-channel weight count `(n + 1) * p + p * q`.
pub fn network_size(t: &Topology) -> usize {
    (t.inputs + 1) * t.hidden + t.hidden * t.outputs
}

/// Flat weight vector of one network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NetworkGenome<T> {
    pub weights: Vec<T>,
}

impl<T: Scalar> NetworkGenome<T> {
    pub fn new(weights: Vec<T>) -> Self {
        NetworkGenome { weights }
    }

    pub fn zeros(topology: &Topology) -> Self {
        NetworkGenome { weights: vec![T::zero(); topology.genome_len()] }
    }

    /// Weights drawn uniformly from `[-1, 1]`.
    pub fn random<R: rand::Rng + ?Sized>(topology: &Topology, rng: &mut R) -> Self {
        let weights = (0..topology.genome_len()).map(|_| T::lit(rng.gen_range(-1.0..=1.0))).collect();
        NetworkGenome { weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn channel(&self, topology: &Topology, k: usize) -> &[T] {
        let c = topology.channel_len();
        &self.weights[k * c..(k + 1) * c]
    }

    pub fn check(&self, topology: &Topology) -> Result<()> {
        if self.len() != topology.genome_len() {
            return Err(Error::Dimension { expected: topology.genome_len(), got: self.len() });
        }
        Ok(())
    }
}

/// Evaluates one channel; `lag(i)` yields the `i`-th lag of that channel's resource.
#[inline]
fn channel_output<T: Scalar>(weights: &[T], n: usize, p: usize, lag: impl Fn(usize) -> T) -> T {
    let (hidden_w, out_w) = weights.split_at((n + 1) * p);
    let mut acc = T::zero();
    for (j, row) in hidden_w.chunks_exact(n + 1).enumerate() {
        let mut a = row[n];
        for (i, w) in row[..n].iter().enumerate() {
            a = a + *w * lag(i);
        }
        acc = acc + out_w[j] * a.sigmoid();
    }
    acc.sigmoid()
}

/// Forecast of every channel, written into `out`.
pub(crate) fn forward_into<T: Scalar>(genome: &[T], topology: &Topology, inputs: &[T], out: &mut [T]) {
    let (n, p, x) = (topology.inputs, topology.hidden, topology.resources);
    let c = topology.channel_len();
    for (k, slot) in out.iter_mut().enumerate().take(x) {
        *slot = channel_output(&genome[k * c..(k + 1) * c], n, p, |i| inputs[i * x + k]);
    }
}

/// Per-resource forecast for a lag-major input vector of `n * x` values.
pub fn forward<T: Scalar>(genome: &NetworkGenome<T>, topology: &Topology, inputs: &[T]) -> Result<Vec<T>> {
    genome.check(topology)?;
    if inputs.len() != topology.input_len() {
        return Err(Error::Dimension { expected: topology.input_len(), got: inputs.len() });
    }
    let mut out = vec![T::zero(); topology.resources];
    forward_into(&genome.weights, topology, inputs, &mut out);
    Ok(out)
}

/// Prediction error per resource and its scalar aggregate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fitness<T> {
    /// Mean squared error per resource.
    pub per_resource: Vec<T>,
    /// Arithmetic mean of `per_resource`; lower is better.
    pub aggregate: T,
}

impl<T: Scalar> Fitness<T> {
    pub fn from_per_resource(per_resource: Vec<T>) -> Self {
        let aggregate = mean(&per_resource);
        Fitness { per_resource, aggregate }
    }
}

fn mean<T: Scalar>(v: &[T]) -> T {
    if v.is_empty() {
        return T::zero();
    }
    v.iter().copied().sum::<T>() / T::lit(v.len() as f64)
}

/// `xi = (1/m) * sum (actual - predicted)^2` per resource.
pub fn fitness<T: Scalar>(genome: &NetworkGenome<T>, topology: &Topology, samples: &[TrainingWindow<T>]) -> Result<Fitness<T>> {
    genome.check(topology)?;
    if samples.is_empty() {
        return Err(Error::InsufficientData("fitness needs at least one sample".into()));
    }
    for w in samples {
        if w.inputs.len() != topology.input_len() {
            return Err(Error::Dimension { expected: topology.input_len(), got: w.inputs.len() });
        }
        if w.target.len() != topology.resources {
            return Err(Error::Dimension { expected: topology.resources, got: w.target.len() });
        }
    }
    Ok(fitness_unchecked(&genome.weights, topology, samples))
}

pub(crate) fn fitness_unchecked<T: Scalar>(weights: &[T], topology: &Topology, samples: &[TrainingWindow<T>]) -> Fitness<T> {
    let x = topology.resources;
    let mut sse = vec![T::zero(); x];
    let mut out = vec![T::zero(); x];
    for w in samples {
        forward_into(weights, topology, &w.inputs, &mut out);
        for k in 0..x {
            let e = w.target[k] - out[k];
            sse[k] = sse[k] + e * e;
        }
    }
    let m = T::lit(samples.len() as f64);
    Fitness::from_per_resource(sse.into_iter().map(|s| s / m).collect())
}

/// Error-driven padding `(1 - alpha) * prev + alpha * curr`, `alpha` in `(0.5, 1]`.
pub fn edp<T: Scalar>(prev_error: T, curr_error: T, alpha: T) -> Result<T> {
    if !(alpha > T::lit(0.5) && alpha <= T::one()) {
        return Err(Error::invalid(format!("EDP alpha {alpha} outside (0.5, 1]")));
    }
    if prev_error < T::zero() || curr_error < T::zero() {
        return Err(Error::invalid("EDP errors must be non-negative"));
    }
    Ok((T::one() - alpha) * prev_error + alpha * curr_error)
}

/// Forecast in normalized space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forecast<T> {
    pub predicted: Vec<T>,
    pub padding: Vec<T>,
    /// `predicted + padding`, clamped to `[0, 1]`.
    pub padded: Vec<T>,
}

/// Last two training errors per resource, feeding the padding.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorHistory<T> {
    pub previous: Vec<T>,
    pub current: Vec<T>,
}

impl<T: Scalar> ErrorHistory<T> {
    /// Shifts in a new error observation; the first observation fills both slots.
    pub fn push(&mut self, errors: Vec<T>) {
        if self.current.is_empty() {
            self.previous = errors.clone();
        } else {
            self.previous = std::mem::take(&mut self.current);
        }
        self.current = errors;
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainerMeta {
    pub trainer: String,
    pub seed: u64,
    pub generations: usize,
    pub train_fitness: Option<Vec<f64>>,
    pub validation_fitness: Option<Vec<f64>>,
}

/// Trained forecaster of one VM, serializable as a versioned document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Predictor<T> {
    pub version: u32,
    pub topology: Topology,
    pub resources: Vec<String>,
    pub genome: Option<NetworkGenome<T>>,
    pub bounds: Vec<Bounds>,
    pub errors: ErrorHistory<T>,
    pub alpha: T,
    pub meta: TrainerMeta,
}

impl<T: Scalar> Predictor<T> {
    pub fn new(topology: Topology, resources: Vec<String>) -> Self {
        Predictor {
            version: PREDICTOR_FORMAT_VERSION,
            topology,
            resources,
            genome: None,
            bounds: Vec::new(),
            errors: ErrorHistory::default(),
            alpha: T::lit(DEFAULT_ALPHA),
            meta: TrainerMeta::default(),
        }
    }

    pub fn with_alpha(mut self, alpha: T) -> Result<Self> {
        edp(T::zero(), T::zero(), alpha)?;
        self.alpha = alpha;
        Ok(self)
    }

    pub fn is_trained(&self) -> bool {
        self.genome.is_some()
    }

    /// Installs a trained genome and records its error for padding.
    pub fn install(&mut self, genome: NetworkGenome<T>, bounds: Vec<Bounds>, error: Vec<T>) -> Result<()> {
        genome.check(&self.topology)?;
        if bounds.len() != self.topology.resources || error.len() != self.topology.resources {
            return Err(Error::Dimension { expected: self.topology.resources, got: bounds.len().min(error.len()) });
        }
        self.genome = Some(genome);
        self.bounds = bounds;
        self.errors.push(error);
        Ok(())
    }

    pub fn padding(&self) -> Result<Vec<T>> {
        if self.errors.current.is_empty() {
            return Ok(vec![T::zero(); self.topology.resources]);
        }
        self.errors.previous.iter().zip(&self.errors.current).map(|(&p, &c)| edp(p, c, self.alpha)).collect()
    }

    pub fn predict_padded(&self, inputs: &[T]) -> Result<Forecast<T>> {
        let genome = self.genome.as_ref().ok_or(Error::Untrained)?;
        let predicted = forward(genome, &self.topology, inputs)?;
        let padding = self.padding()?;
        let padded = predicted.iter().zip(&padding).map(|(&z, &e)| (z + e).max(T::zero()).min(T::one())).collect();
        Ok(Forecast { predicted, padding, padded })
    }

    /// Maps a normalized forecast back to trace units.
    pub fn denormalize(&self, normalized: &[T]) -> Vec<f64> {
        normalized.iter().zip(&self.bounds).map(|(v, b)| b.denormalize(v.as_f64())).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s)?;
        if p.version != PREDICTOR_FORMAT_VERSION {
            return Err(Error::invalid(format!("unsupported predictor format version {}", p.version)));
        }
        if let Some(g) = &p.genome {
            g.check(&p.topology)?;
        }
        Ok(p)
    }
}

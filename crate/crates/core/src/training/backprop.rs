//! Full-batch gradient descent on the same genome encoding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::predictor::{fitness_unchecked, Fitness, NetworkGenome, Topology};
use crate::seed;
use crate::traces::TrainingWindow;

/// Aggregate loss and its gradient with respect to every genome weight.
///
/// The loss is the mean over resources of the per-resource mean squared error.
pub fn gradient<T: Scalar>(genome: &NetworkGenome<T>, topology: &Topology, windows: &[TrainingWindow<T>]) -> Result<(Fitness<T>, Vec<T>)> {
    genome.check(topology)?;
    if windows.is_empty() {
        return Err(Error::InsufficientData("gradient needs at least one window".into()));
    }
    let (n, p, x) = (topology.inputs, topology.hidden, topology.resources);
    let c = topology.channel_len();
    let two = T::lit(2.0);
    let scale = two / T::lit((windows.len() * x) as f64);

    let mut grad = vec![T::zero(); genome.len()];
    let mut sse = vec![T::zero(); x];
    let mut hidden = vec![T::zero(); p];
    for w in windows {
        for k in 0..x {
            let block = &genome.weights[k * c..(k + 1) * c];
            let (hw, ow) = block.split_at((n + 1) * p);
            let mut o = T::zero();
            for j in 0..p {
                let row = &hw[j * (n + 1)..(j + 1) * (n + 1)];
                let mut a = row[n];
                for i in 0..n {
                    a = a + row[i] * w.inputs[i * x + k];
                }
                hidden[j] = a.sigmoid();
                o = o + ow[j] * hidden[j];
            }
            let y = o.sigmoid();
            let e = y - w.target[k];
            sse[k] = sse[k] + e * e;

            let delta_o = scale * e * y * (T::one() - y);
            let g = &mut grad[k * c..(k + 1) * c];
            for j in 0..p {
                g[(n + 1) * p + j] = g[(n + 1) * p + j] + delta_o * hidden[j];
                let delta_h = delta_o * ow[j] * hidden[j] * (T::one() - hidden[j]);
                for i in 0..n {
                    g[j * (n + 1) + i] = g[j * (n + 1) + i] + delta_h * w.inputs[i * x + k];
                }
                g[j * (n + 1) + n] = g[j * (n + 1) + n] + delta_h;
            }
        }
    }
    let m = T::lit(windows.len() as f64);
    let loss = Fitness::from_per_resource(sse.into_iter().map(|s| s / m).collect());
    if !loss.aggregate.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok((loss, grad))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackpropOutcome<T> {
    pub genome: NetworkGenome<T>,
    pub fitness: Fitness<T>,
    /// Aggregate loss before each epoch.
    pub loss_history: Vec<f64>,
}

/// Gradient descent from a random `[-1, 1]` initialization.
pub fn train_backprop_baseline<T: Scalar>(
    samples: &[TrainingWindow<T>],
    topology: &Topology,
    learning_rate: f64,
    epochs: usize,
    seed: u64,
) -> Result<BackpropOutcome<T>> {
    let init = NetworkGenome::random(topology, &mut seed::stream(seed, &[0xB9]));
    train_backprop_from(init, samples, topology, learning_rate, epochs)
}

pub fn train_backprop_from<T: Scalar>(
    mut genome: NetworkGenome<T>,
    samples: &[TrainingWindow<T>],
    topology: &Topology,
    learning_rate: f64,
    epochs: usize,
) -> Result<BackpropOutcome<T>> {
    if !(learning_rate >= 0.0) || !learning_rate.is_finite() {
        return Err(Error::invalid("learning rate must be finite and non-negative"));
    }
    let lr = T::lit(learning_rate);
    let mut loss_history = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        let (loss, grad) = gradient(&genome, topology, samples)?;
        loss_history.push(loss.aggregate.as_f64());
        for (w, g) in genome.weights.iter_mut().zip(grad) {
            *w = *w - lr * g;
        }
    }
    genome.check(topology)?;
    if samples.is_empty() {
        return Err(Error::InsufficientData("backprop needs at least one window".into()));
    }
    let fitness = fitness_unchecked(&genome.weights, topology, samples);
    if !fitness.aggregate.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(BackpropOutcome { genome, fitness, loss_history })
}

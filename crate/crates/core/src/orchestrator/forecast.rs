//! Online per-task forecasting shared by the prediction-driven scenarios.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictor::{Predictor, Topology};
use crate::resources::Resources;
use crate::seed;
use crate::traces::{latest_inputs, make_windows, normalize, TaskSeries};
use crate::training::{train_tade, TadeConfig, TrainState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForecastConfig {
    /// Lagged samples per resource fed to the network.
    pub inputs: usize,
    pub hidden: usize,
    pub alpha: f64,
    /// Trainer settings for the initial fit on the warm-up history.
    pub tade: TadeConfig,
    /// Generations of continued evolution at every later interval.
    pub retrain_generations: usize,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        ForecastConfig {
            inputs: 3,
            hidden: 5,
            alpha: crate::predictor::DEFAULT_ALPHA,
            tade: TadeConfig::default(),
            retrain_generations: 10,
        }
    }
}

impl ForecastConfig {
    pub fn validate(&self) -> Result<()> {
        if self.inputs == 0 {
            return Err(Error::config("predictor.inputs", "must be at least 1"));
        }
        if self.hidden == 0 {
            return Err(Error::config("predictor.hidden", "must be at least 1"));
        }
        if !(self.alpha > 0.5 && self.alpha <= 1.0) {
            return Err(Error::config("predictor.alpha", "must lie in (0.5, 1]"));
        }
        self.tade.validate()
    }

    pub fn topology(&self, resources: usize) -> Result<Topology> {
        Topology::new(self.inputs, self.hidden, 1, resources)
    }
}

/// Padded forecasts in absolute units, indexed `[interval][task]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forecasts {
    /// First forecast interval.
    pub start: usize,
    pub demand: Vec<Vec<Resources>>,
    /// Training error of the model behind each forecast, per resource.
    pub xi: Vec<Vec<[f64; 2]>>,
}

impl Forecasts {
    pub fn at(&self, interval: usize) -> Option<&[Resources]> {
        interval.checked_sub(self.start).and_then(|i| self.demand.get(i)).map(Vec::as_slice)
    }

    /// Mean training error across tasks at `interval`.
    pub fn mean_xi(&self, interval: usize) -> Option<[f64; 2]> {
        let row = self.xi.get(interval.checked_sub(self.start)?)?;
        if row.is_empty() {
            return Some([0.0, 0.0]);
        }
        let n = row.len() as f64;
        Some([row.iter().map(|x| x[0]).sum::<f64>() / n, row.iter().map(|x| x[1]).sum::<f64>() / n])
    }
}

/// Column indices of the CPU and memory resources in `series`.
pub fn resource_columns(series: &TaskSeries) -> Result<[usize; 2]> {
    let find = |name: &str| series.resources.iter().position(|r| r.eq_ignore_ascii_case(name));
    match (find("cpu"), find("mem")) {
        (Some(c), Some(m)) => Ok([c, m]),
        _ if series.resources.len() >= 2 => Ok([0, 1]),
        _ => Err(Error::invalid(format!("vm `{}` needs two resources, has {}", series.vm_id, series.resources.len()))),
    }
}

/// Demand of sample `t` in absolute units.
pub fn absolute_demand(series: &TaskSeries, cols: [usize; 2], t: usize, reference: Resources) -> Resources {
    let d = &series.samples[t].demand;
    Resources::new(d[cols[0]] * reference.cpu, d[cols[1]] * reference.mem)
}

/// Trains one predictor per task on the first `start` samples, then walks
/// forward: at each interval `t` in `start..end` the model forecasts sample
/// `t` from samples before it, and afterwards keeps evolving on the grown history.
pub fn forecast_tasks(
    traces: &[TaskSeries],
    start: usize,
    end: usize,
    reference: Resources,
    config: &ForecastConfig,
    seed: u64,
) -> Result<Forecasts> {
    config.validate()?;
    let tasks = traces.len();
    let mut demand = vec![Vec::with_capacity(tasks); end.saturating_sub(start)];
    let mut xi: Vec<Vec<[f64; 2]>> = vec![Vec::with_capacity(tasks); end.saturating_sub(start)];
    for (i, series) in traces.iter().enumerate() {
        let cols = resource_columns(series)?;
        let two = series.select_resources(&cols)?;
        if two.len() < end {
            return Err(Error::InsufficientData(format!("vm `{}` has {} samples, need {end}", series.vm_id, two.len())));
        }
        let topology = config.topology(2)?;
        let tade = TadeConfig { seed: seed::derive(seed, &[seed::tag_str("forecast"), i as u64]), ..config.tade.clone() };
        let mut predictor = Predictor::<f64>::new(topology, two.resources.clone()).with_alpha(config.alpha)?;
        let mut state: Option<TrainState<f64>> = None;
        for t in start..end {
            let history = normalize(&two.prefix(t))?;
            let windows = make_windows::<f64>(&history, config.inputs)?;
            let st = match state.as_mut() {
                None => {
                    let out = train_tade(&windows, &topology, &tade)?;
                    state.insert(out.state)
                }
                Some(st) => {
                    st.reevaluate(&windows)?;
                    st.evolve(&windows, config.retrain_generations)?;
                    st
                }
            };
            let error = st.best.fitness.per_resource.clone();
            predictor.install(st.best.genome.clone(), history.bounds.clone(), error.clone())?;
            let f = predictor.predict_padded(&latest_inputs::<f64>(&history, config.inputs)?)?;
            let abs = predictor.denormalize(&f.padded);
            demand[t - start].push(Resources::new(abs[0].max(0.0) * reference.cpu, abs[1].max(0.0) * reference.mem));
            xi[t - start].push([error[0], error[1]]);
        }
    }
    Ok(Forecasts { start, demand, xi })
}

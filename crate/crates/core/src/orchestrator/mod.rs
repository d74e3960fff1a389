//! The periodic provisioning loop and the four-scenario experiment harness.
//!
//! Each interval sizes one VM per task, places the VMs on the fleet and then
//! charges the demand that actually materialized to the chosen servers.
//!
//! | scenario | sizing input              | VM types                         |
//! |----------|---------------------------|----------------------------------|
//! | OA       | actual demand             | clustered                        |
//! | PA       | padded forecast           | clustered                        |
//! | PWA      | padded forecast           | one type covering every forecast |
//! | WPWA     | historical peak demand    | one type covering every peak     |

mod forecast;
mod report;

pub use forecast::{absolute_demand, forecast_tasks, resource_columns, ForecastConfig, Forecasts};
pub use report::{
    compare_scenarios, prediction_report, write_comparison, write_metrics, write_prediction_report, Comparison, ComparisonRow,
    PredictionReport, PredictionRow,
};

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autoscaler::{autoscale, map_cluster_to_vm, AutoscaleOptions, TaskDemand, VmCatalog};
use crate::error::{Error, Result};
use crate::placement::{place, power_from_loads, utilization_from_loads, Engine, GaConfig, ServerSpec, VmInstance};
use crate::resources::Resources;
use crate::seed;
use crate::traces::TaskSeries;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ScenarioKind {
    #[serde(rename = "OA")]
    Oa,
    #[serde(rename = "PA")]
    Pa,
    #[serde(rename = "PWA")]
    Pwa,
    #[serde(rename = "WPWA")]
    Wpwa,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] = [ScenarioKind::Oa, ScenarioKind::Pa, ScenarioKind::Pwa, ScenarioKind::Wpwa];

    pub fn label(self) -> &'static str {
        match self {
            ScenarioKind::Oa => "OA",
            ScenarioKind::Pa => "PA",
            ScenarioKind::Pwa => "PWA",
            ScenarioKind::Wpwa => "WPWA",
        }
    }

    pub fn uses_prediction(self) -> bool {
        matches!(self, ScenarioKind::Pa | ScenarioKind::Pwa)
    }

    pub fn autoscaling(self) -> bool {
        matches!(self, ScenarioKind::Oa | ScenarioKind::Pa)
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown scenario `{s}` (expected OA, PA, PWA or WPWA)")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub engine: Engine,
}

impl Scenario {
    pub fn new(kind: ScenarioKind) -> Self {
        Scenario { kind, engine: Engine::Ga }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Intervals of history before the first managed interval.
    pub warmup: usize,
    /// Managed intervals; all remaining samples when unset.
    pub intervals: Option<usize>,
    /// Absolute capacity that a trace value of 1.0 stands for.
    pub reference: Resources,
    pub forecast: ForecastConfig,
    pub autoscale: AutoscaleOptions,
    pub ga: GaConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            warmup: 10,
            intervals: None,
            reference: Resources::new(2000.0, 3.0),
            forecast: ForecastConfig::default(),
            autoscale: AutoscaleOptions::default(),
            ga: GaConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.warmup < self.forecast.inputs + 2 {
            return Err(Error::config("simulation.warmup", format!("must be at least inputs + 2 = {}", self.forecast.inputs + 2)));
        }
        if self.intervals == Some(0) {
            return Err(Error::config("simulation.intervals", "must be at least 1"));
        }
        if !(self.reference.cpu > 0.0 && self.reference.mem > 0.0 && self.reference.is_valid()) {
            return Err(Error::config("simulation.reference", "capacities must be positive"));
        }
        if self.autoscale.k_max < 2 {
            return Err(Error::config("autoscale.k_max", "must be at least 2"));
        }
        self.forecast.validate()?;
        self.ga.validate()
    }

    /// Managed interval range for traces of `len` samples.
    pub fn span(&self, len: usize) -> Result<(usize, usize)> {
        if len <= self.warmup {
            return Err(Error::InsufficientData(format!("traces have {len} intervals; warm-up of {} leaves none to manage", self.warmup)));
        }
        let end = match self.intervals {
            Some(n) => (self.warmup + n).min(len),
            None => len,
        };
        Ok((self.warmup, end))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IntervalMetrics {
    pub interval: usize,
    pub ru: f64,
    pub pw: f64,
    pub active_pms: usize,
    /// VMs per catalog type.
    pub vm_counts: Vec<usize>,
    pub vms: usize,
    /// Tasks sized to zero and left without a VM.
    pub unprovisioned: usize,
    /// Tasks whose actual demand exceeded the capacity provisioned for them.
    pub violations: usize,
    /// Tasks hosted on a different server than in the previous interval.
    pub churn: usize,
    /// Mean forecast training error per resource.
    pub xi: Option<[f64; 2]>,
    /// Every mapped type covers its cluster's largest demand and counts sum to the VMs.
    pub sizing_ok: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRun {
    pub scenario: Scenario,
    pub intervals: Vec<IntervalMetrics>,
}

/// Shared inputs of a simulation.
pub struct Workload<'a> {
    pub traces: &'a [TaskSeries],
    pub servers: &'a [ServerSpec],
    pub catalog: &'a VmCatalog,
}

struct Prepared {
    ids: Vec<String>,
    /// `actual[t][task]`.
    actual: Vec<Vec<Resources>>,
    /// `peak[t][task]`: largest demand observed before `t`.
    peak: Vec<Vec<Resources>>,
}

fn prepare(traces: &[TaskSeries], end: usize, reference: Resources) -> Result<Prepared> {
    let mut actual = vec![Vec::with_capacity(traces.len()); end];
    let mut peak = actual.clone();
    for s in traces {
        let cols = resource_columns(s)?;
        if s.len() < end {
            return Err(Error::InsufficientData(format!("vm `{}` has {} samples, need {end}", s.vm_id, s.len())));
        }
        let mut hi = Resources::ZERO;
        for t in 0..end {
            peak[t].push(hi);
            let d = absolute_demand(s, cols, t, reference);
            hi = hi.max(&d);
            actual[t].push(d);
        }
    }
    Ok(Prepared { ids: traces.iter().map(|s| s.vm_id.clone()).collect(), actual, peak })
}

fn trace_len(traces: &[TaskSeries]) -> usize {
    traces.iter().map(TaskSeries::len).min().unwrap_or(0)
}

/// Runs every scenario over the same traces, fleet and seeds.
///
/// Forecasts are computed once and shared by PA and PWA. Clustering and placement
/// seeds depend only on the master seed and the interval, so scenarios are paired.
pub fn run_scenarios(scenarios: &[Scenario], workload: &Workload, config: &SimConfig, seed: u64) -> Result<Vec<ScenarioRun>> {
    config.validate()?;
    workload.catalog.validate()?;
    for s in workload.servers {
        s.validate()?;
    }
    if workload.traces.is_empty() {
        return Err(Error::InsufficientData("no tasks in trace".into()));
    }
    let (start, end) = config.span(trace_len(workload.traces))?;
    let prepared = prepare(workload.traces, end, config.reference)?;
    let forecasts = if scenarios.iter().any(|s| s.kind.uses_prediction()) {
        Some(forecast_tasks(workload.traces, start, end, config.reference, &config.forecast, seed)?)
    } else {
        None
    };
    scenarios
        .iter()
        .map(|&scenario| {
            let intervals = (start..end)
                .scan(HashMap::new(), |previous, t| {
                    Some(run_interval(scenario, t, &prepared, forecasts.as_ref(), workload, config, seed, previous))
                })
                .collect();
            Ok(ScenarioRun { scenario, intervals })
        })
        .collect()
}

pub fn run_scenario(scenario: Scenario, workload: &Workload, config: &SimConfig, seed: u64) -> Result<ScenarioRun> {
    Ok(run_scenarios(&[scenario], workload, config, seed)?.remove(0))
}

#[allow(clippy::too_many_arguments)]
fn run_interval(
    scenario: Scenario,
    t: usize,
    data: &Prepared,
    forecasts: Option<&Forecasts>,
    workload: &Workload,
    config: &SimConfig,
    seed: u64,
    previous: &mut HashMap<usize, usize>,
) -> IntervalMetrics {
    let mut m = IntervalMetrics { interval: t, vm_counts: vec![0; workload.catalog.len()], ..Default::default() };
    let interval_seed = seed::derive(seed, &[seed::tag_str("interval"), t as u64]);
    let sizing: Vec<Resources> = match scenario.kind {
        ScenarioKind::Oa => data.actual[t].clone(),
        ScenarioKind::Pa | ScenarioKind::Pwa => {
            let f = forecasts.expect("forecasts exist for prediction scenarios");
            m.xi = f.mean_xi(t);
            f.at(t).expect("forecast covers the managed span").to_vec()
        }
        ScenarioKind::Wpwa => data.peak[t].clone(),
    };
    match execute(scenario, t, &sizing, data, workload, config, interval_seed, previous, &mut m) {
        Ok(()) => {}
        Err(e) => {
            previous.clear();
            m.error = Some(e.to_string());
        }
    }
    m
}

#[allow(clippy::too_many_arguments)]
fn execute(
    scenario: Scenario,
    t: usize,
    sizing: &[Resources],
    data: &Prepared,
    workload: &Workload,
    config: &SimConfig,
    interval_seed: u64,
    previous: &mut HashMap<usize, usize>,
    m: &mut IntervalMetrics,
) -> Result<()> {
    let catalog = workload.catalog;
    let provisioned: Vec<usize> = (0..sizing.len()).filter(|&i| !sizing[i].is_zero()).collect();
    m.unprovisioned = sizing.len() - provisioned.len();
    let task_types: Vec<usize> = if provisioned.is_empty() {
        Vec::new()
    } else if scenario.kind.autoscaling() {
        let tasks = provisioned.iter().map(|&i| TaskDemand::new(data.ids[i].clone(), sizing[i])).collect::<Result<Vec<_>>>()?;
        let demand = autoscale(&tasks, catalog, &config.autoscale, interval_seed)?;
        m.sizing_ok = sizing_holds(&tasks, &demand.assignment, &demand.cluster_types, &demand.counts, catalog)?;
        demand.task_types
    } else {
        let peak = provisioned.iter().fold(Resources::ZERO, |a, &i| a.max(&sizing[i]));
        let ty = catalog.smallest_covering(&peak)?;
        m.sizing_ok = true;
        vec![ty; provisioned.len()]
    };
    if provisioned.is_empty() {
        m.sizing_ok = true;
    }
    for &ty in &task_types {
        m.vm_counts[ty] += 1;
    }
    m.vms = task_types.len();

    let vms: Vec<VmInstance> = provisioned
        .iter()
        .zip(&task_types)
        .map(|(&i, &ty)| VmInstance::new(data.ids[i].clone(), catalog.types[ty].name.clone(), catalog.types[ty].capacity()))
        .collect();
    let ga = GaConfig { seed: interval_seed, ..config.ga.clone() };
    let allocation = place(scenario.engine, &vms, workload.servers, &ga)?;

    let actual = &data.actual[t];
    let mut load = vec![Resources::ZERO; workload.servers.len()];
    let mut current = HashMap::with_capacity(provisioned.len());
    for ((&i, vm), &server) in provisioned.iter().zip(&vms).zip(&allocation.genes) {
        if !actual[i].fits_in(&vm.demand) {
            m.violations += 1;
        }
        load[server] += actual[i].min(&vm.demand);
        current.insert(i, server);
    }
    m.violations += (0..actual.len()).filter(|i| !current.contains_key(i) && !actual[*i].is_zero()).count();
    let active = allocation.active_flags(workload.servers.len());
    m.active_pms = allocation.active;
    m.ru = utilization_from_loads(&load, workload.servers, &active);
    m.pw = power_from_loads(&load, workload.servers, &active);
    m.churn = current.iter().filter(|(i, s)| previous.get(i).is_some_and(|p| p != *s)).count();
    *previous = current;
    Ok(())
}

/// Re-derives each cluster's type and checks it covers the cluster's largest demand.
fn sizing_holds(
    tasks: &[TaskDemand],
    assignment: &[usize],
    cluster_types: &[usize],
    counts: &[usize],
    catalog: &VmCatalog,
) -> Result<bool> {
    if counts.iter().sum::<usize>() != tasks.len() {
        return Ok(false);
    }
    for (c, &ty) in cluster_types.iter().enumerate() {
        let members: Vec<Resources> = tasks.iter().zip(assignment).filter(|(_, &a)| a == c).map(|(t, _)| t.demand).collect();
        if members.is_empty() {
            return Ok(false);
        }
        let peak = members.iter().fold(Resources::ZERO, |a, d| a.max(d));
        if !peak.fits_in(&catalog.types[ty].capacity()) || map_cluster_to_vm(&members, catalog)? != ty {
            return Ok(false);
        }
    }
    Ok(true)
}

//! VM placement: cost models, Pareto sorting, a genetic optimizer and
//! greedy baselines.

mod ga;
mod heuristics;
mod model;
mod pareto;

pub use ga::{place_ga, GaConfig, GaOutcome};
pub use heuristics::{place_best_fit, place_random_fit, repair};
pub use model::{
    check_aggregate, cost, cost_with_active, feasible, fleet, loads, power, power_from_loads, resource_utilization, utilization_from_loads,
    Allocation, Cost, Feasibility, ServerSpec, VmInstance,
};
pub use pareto::{dominates, pareto_fronts, ParetoFronts};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Placement engine.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Ga,
    BestFit,
    RandomFit,
}

/// Dispatches to the chosen engine.
pub fn place(engine: Engine, vms: &[VmInstance], servers: &[ServerSpec], ga: &GaConfig) -> Result<Allocation> {
    match engine {
        Engine::Ga => place_ga(vms, servers, ga).map(|o| o.best),
        Engine::BestFit => place_best_fit(vms, servers),
        Engine::RandomFit => place_random_fit(vms, servers, ga.seed),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacementSummary {
    pub ru: f64,
    pub pw: f64,
    pub active_servers: usize,
    pub vms: usize,
}

impl PlacementSummary {
    pub fn of(a: &Allocation) -> Self {
        PlacementSummary { ru: a.cost.ru, pw: a.cost.pw, active_servers: a.active, vms: a.genes.len() }
    }
}

/// `vm_id,server_id` rows.
pub fn write_allocation<W: Write>(writer: W, allocation: &Allocation, servers: &[ServerSpec], vms: &[VmInstance]) -> Result<()> {
    if allocation.genes.len() != vms.len() {
        return Err(Error::Dimension { expected: vms.len(), got: allocation.genes.len() });
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["vm_id", "server_id"])?;
    for (&g, vm) in allocation.genes.iter().zip(vms) {
        let server = servers.get(g).ok_or_else(|| Error::invalid(format!("gene {g} out of range")))?;
        w.write_record([vm.id.as_str(), server.id.as_str()])?;
    }
    w.flush()?;
    Ok(())
}

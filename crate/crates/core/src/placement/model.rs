//! Servers, VM instances and the datacenter cost models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::resources::Resources;

/// A physical machine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServerSpec {
    pub id: String,
    /// Hardware profile name.
    pub kind: String,
    pub pe: u32,
    /// MIPS of a single processing element.
    pub mips_per_pe: f64,
    pub ram_gb: f64,
    pub storage_gb: f64,
    /// Draw at full CPU load, watts.
    pub pw_max: f64,
    /// Draw at zero CPU load, watts.
    pub pw_min: f64,
    /// Draw when powered on and idle, watts.
    pub pw_idle: f64,
}

impl ServerSpec {
    pub fn capacity(&self) -> Resources {
        Resources::new(self.pe as f64 * self.mips_per_pe, self.ram_gb)
    }

    /// Watts per MIPS of dynamic range.
    pub fn power_density(&self) -> f64 {
        (self.pw_max - self.pw_min) / self.capacity().cpu
    }

    pub fn validate(&self) -> Result<()> {
        let cap = self.capacity();
        if !(cap.cpu > 0.0 && cap.mem > 0.0 && cap.is_valid() && self.storage_gb > 0.0) {
            return Err(Error::config("servers", format!("server {} needs positive capacities", self.id)));
        }
        if !(self.pw_max >= self.pw_min && self.pw_min >= 0.0 && self.pw_idle >= 0.0 && self.pw_max.is_finite()) {
            return Err(Error::config("servers", format!("server {} needs pw_max >= pw_min >= 0", self.id)));
        }
        Ok(())
    }

    fn profile(kind: &str, pe: u32, mips_per_pe: f64, ram_gb: f64, storage_gb: f64, pw_max: f64, pw_min: f64) -> Self {
        ServerSpec { id: kind.to_string(), kind: kind.to_string(), pe, mips_per_pe, ram_gb, storage_gb, pw_max, pw_min, pw_idle: pw_min }
    }

    pub fn s1() -> Self {
        Self::profile("S1", 2, 2660.0, 4.0, 160.0, 135.0, 93.7)
    }

    pub fn s2() -> Self {
        Self::profile("S2", 4, 3067.0, 8.0, 250.0, 113.0, 42.3)
    }

    pub fn s3() -> Self {
        Self::profile("S3", 12, 3067.0, 16.0, 500.0, 222.0, 58.4)
    }

    pub fn profiles() -> Vec<ServerSpec> {
        vec![Self::s1(), Self::s2(), Self::s3()]
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }
}

/// Builds a fleet from `(profile, count)` pairs; ids are `kind-index`.
pub fn fleet(groups: &[(ServerSpec, usize)]) -> Vec<ServerSpec> {
    let mut out = Vec::new();
    for (spec, count) in groups {
        for _ in 0..*count {
            let id = format!("{}-{:03}", spec.kind, out.len());
            out.push(spec.clone().with_id(id));
        }
    }
    out
}

/// A VM to be hosted, sized by the capacity it reserves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VmInstance {
    pub id: String,
    pub type_name: String,
    pub demand: Resources,
}

impl VmInstance {
    pub fn new(id: impl Into<String>, type_name: impl Into<String>, demand: Resources) -> Self {
        VmInstance { id: id.into(), type_name: type_name.into(), demand }
    }
}

/// Resource utilization (maximized) and power in watts (minimized).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Cost {
    pub ru: f64,
    pub pw: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    /// `genes[j]` is the server hosting VM `j`.
    pub genes: Vec<usize>,
    pub cost: Cost,
    pub active: usize,
}

impl Allocation {
    pub fn evaluate(genes: Vec<usize>, servers: &[ServerSpec], vms: &[VmInstance]) -> Result<Self> {
        let cost = cost(&genes, servers, vms)?;
        let active = active_flags(&genes, servers.len()).iter().filter(|&&a| a).count();
        Ok(Allocation { genes, cost, active })
    }

    /// Active flag per server.
    pub fn active_flags(&self, servers: usize) -> Vec<bool> {
        active_flags(&self.genes, servers)
    }
}

pub(crate) fn active_flags(genes: &[usize], servers: usize) -> Vec<bool> {
    let mut a = vec![false; servers];
    for &g in genes {
        a[g] = true;
    }
    a
}

/// Summed VM demand per server.
pub fn loads(genes: &[usize], servers: &[ServerSpec], vms: &[VmInstance]) -> Result<Vec<Resources>> {
    if genes.len() != vms.len() {
        return Err(Error::Dimension { expected: vms.len(), got: genes.len() });
    }
    let mut l = vec![Resources::ZERO; servers.len()];
    for (&g, vm) in genes.iter().zip(vms) {
        let slot = l.get_mut(g).ok_or_else(|| Error::invalid(format!("gene {g} out of range for {} servers", servers.len())))?;
        *slot += vm.demand;
    }
    Ok(l)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    /// Capacity minus load per server; negative where overloaded.
    pub slack: Vec<Resources>,
}

/// Checks that no server is loaded beyond its capacity on any resource.
pub fn feasible(genes: &[usize], servers: &[ServerSpec], vms: &[VmInstance]) -> Result<Feasibility> {
    let l = loads(genes, servers, vms)?;
    let slack: Vec<Resources> = servers.iter().zip(&l).map(|(s, l)| s.capacity() - *l).collect();
    let feasible = slack.iter().all(|s| s.cpu >= 0.0 && s.mem >= 0.0);
    Ok(Feasibility { feasible, slack })
}

/// Mean of per-resource utilization over active servers; 0 when none is active.
pub fn utilization_from_loads(loads: &[Resources], servers: &[ServerSpec], active: &[bool]) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for ((l, s), &a) in loads.iter().zip(servers).zip(active) {
        if a {
            let cap = s.capacity();
            sum += l.cpu / cap.cpu + l.mem / cap.mem;
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / (2.0 * count as f64)
    }
}

/// Total draw of active servers: dynamic range scaled by CPU utilization plus idle.
pub fn power_from_loads(loads: &[Resources], servers: &[ServerSpec], active: &[bool]) -> f64 {
    loads
        .iter()
        .zip(servers)
        .zip(active)
        .filter(|(_, &a)| a)
        .map(|((l, s), _)| (s.pw_max - s.pw_min) * (l.cpu / s.capacity().cpu) + s.pw_idle)
        .sum()
}

pub fn cost_with_active(loads: &[Resources], servers: &[ServerSpec], active: &[bool]) -> Cost {
    Cost { ru: utilization_from_loads(loads, servers, active), pw: power_from_loads(loads, servers, active) }
}

/// Cost of an allocation; a server hosting any VM counts as active.
pub fn cost(genes: &[usize], servers: &[ServerSpec], vms: &[VmInstance]) -> Result<Cost> {
    let l = loads(genes, servers, vms)?;
    Ok(cost_with_active(&l, servers, &active_flags(genes, servers.len())))
}

pub fn resource_utilization(genes: &[usize], servers: &[ServerSpec], vms: &[VmInstance]) -> Result<f64> {
    cost(genes, servers, vms).map(|c| c.ru)
}

pub fn power(genes: &[usize], servers: &[ServerSpec], vms: &[VmInstance]) -> Result<f64> {
    cost(genes, servers, vms).map(|c| c.pw)
}

/// Errors when the fleet cannot hold the aggregate demand.
pub fn check_aggregate(servers: &[ServerSpec], vms: &[VmInstance]) -> Result<()> {
    let total = vms.iter().fold(Resources::ZERO, |a, v| a + v.demand);
    let cap = servers.iter().fold(Resources::ZERO, |a, s| a + s.capacity());
    if !total.fits_in(&cap) {
        return Err(Error::Infeasible(format!(
            "demand ({:.1} MIPS, {:.2} GB) exceeds datacenter capacity ({:.1} MIPS, {:.2} GB)",
            total.cpu, total.mem, cap.cpu, cap.mem
        )));
    }
    if let Some(vm) = vms.iter().find(|v| !servers.iter().any(|s| v.demand.fits_in(&s.capacity()))) {
        return Err(Error::Infeasible(format!("VM {} fits on no server", vm.id)));
    }
    Ok(())
}

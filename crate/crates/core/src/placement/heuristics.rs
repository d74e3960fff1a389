//! Constructive placements and the feasibility repair operator.

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::model::{check_aggregate, loads, Allocation, ServerSpec, VmInstance};
use crate::error::{Error, Result};
use crate::resources::Resources;
use crate::seed;

fn by_density(servers: &[ServerSpec], a: usize, b: usize) -> std::cmp::Ordering {
    servers[a].power_density().total_cmp(&servers[b].power_density()).then(a.cmp(&b))
}

/// Makes `genes` satisfy every server's capacity.
///
/// Each overloaded server sheds its highest-indexed VMs until it fits. Shed VMs go
/// to the feasible active server with the lowest watts-per-MIPS, and to an idle
/// server only when no active one has room.
pub fn repair(genes: &[usize], servers: &[ServerSpec], vms: &[VmInstance]) -> Result<Vec<usize>> {
    check_aggregate(servers, vms)?;
    let mut load = loads(genes, servers, vms)?;
    let mut hosted: Vec<Vec<usize>> = vec![Vec::new(); servers.len()];
    for (j, &g) in genes.iter().enumerate() {
        hosted[g].push(j);
    }
    let mut out = genes.to_vec();
    let mut evicted = Vec::new();
    for (s, server) in servers.iter().enumerate() {
        let cap = server.capacity();
        while !load[s].fits_in(&cap) {
            let j = hosted[s].pop().expect("overloaded server hosts a VM");
            load[s] = load[s] - vms[j].demand;
            evicted.push(j);
        }
    }
    if evicted.is_empty() {
        return Ok(out);
    }
    let mut order: Vec<usize> = (0..servers.len()).collect();
    order.sort_by(|&a, &b| by_density(servers, a, b));
    for j in evicted {
        let fits = |s: usize| (load[s] + vms[j].demand).fits_in(&servers[s].capacity());
        let target = order
            .iter()
            .copied()
            .find(|&s| !hosted[s].is_empty() && fits(s))
            .or_else(|| order.iter().copied().find(|&s| hosted[s].is_empty() && fits(s)))
            .ok_or_else(|| Error::Infeasible(format!("no server can take VM {} after repair", vms[j].id)))?;
        load[target] += vms[j].demand;
        hosted[target].push(j);
        out[j] = target;
    }
    Ok(out)
}

/// Places VMs in order on the feasible server left with the least CPU slack,
/// then the least memory slack, then the lowest index.
pub fn place_best_fit(vms: &[VmInstance], servers: &[ServerSpec]) -> Result<Allocation> {
    let mut load = vec![Resources::ZERO; servers.len()];
    let mut genes = Vec::with_capacity(vms.len());
    for vm in vms {
        let mut best: Option<(usize, Resources)> = None;
        for (s, server) in servers.iter().enumerate() {
            let after = server.capacity() - (load[s] + vm.demand);
            if after.cpu < 0.0 || after.mem < 0.0 {
                continue;
            }
            let better = match best {
                None => true,
                Some((_, b)) => after.cpu < b.cpu || (after.cpu == b.cpu && after.mem < b.mem),
            };
            if better {
                best = Some((s, after));
            }
        }
        let (s, _) = best.ok_or_else(|| Error::Infeasible(format!("no server can host VM {}", vm.id)))?;
        load[s] += vm.demand;
        genes.push(s);
    }
    Allocation::evaluate(genes, servers, vms)
}

/// Places each VM on a server drawn uniformly from those with room.
pub fn place_random_fit(vms: &[VmInstance], servers: &[ServerSpec], seed: u64) -> Result<Allocation> {
    let mut rng = seed::stream(seed, &[seed::tag_str("random-fit")]);
    let mut load = vec![Resources::ZERO; servers.len()];
    let mut genes = Vec::with_capacity(vms.len());
    for vm in vms {
        let options: Vec<usize> = (0..servers.len()).filter(|&s| (load[s] + vm.demand).fits_in(&servers[s].capacity())).collect();
        if options.is_empty() {
            return Err(Error::Infeasible(format!("no server can host VM {}", vm.id)));
        }
        let s = options[rng.gen_range(0..options.len())];
        load[s] += vm.demand;
        genes.push(s);
    }
    Allocation::evaluate(genes, servers, vms)
}

/// First fit with VMs and servers both visited in random order.
pub(crate) fn random_first_fit(vms: &[VmInstance], servers: &[ServerSpec], rng: &mut seed::Rng) -> Option<Vec<usize>> {
    let mut vm_order: Vec<usize> = (0..vms.len()).collect();
    vm_order.shuffle(rng);
    let mut server_order: Vec<usize> = (0..servers.len()).collect();
    server_order.shuffle(rng);
    let mut load = vec![Resources::ZERO; servers.len()];
    let mut genes = vec![0; vms.len()];
    for j in vm_order {
        let s = server_order.iter().copied().find(|&s| (load[s] + vms[j].demand).fits_in(&servers[s].capacity()))?;
        load[s] += vms[j].demand;
        genes[j] = s;
    }
    Some(genes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::placement::model::feasible;

    fn vm(id: &str, cpu: f64, mem: f64) -> VmInstance {
        VmInstance::new(id, "t", Resources::new(cpu, mem))
    }

    fn server(id: &str, cpu: f64, mem: f64) -> ServerSpec {
        ServerSpec {
            id: id.into(),
            kind: "x".into(),
            pe: 1,
            mips_per_pe: cpu,
            ram_gb: mem,
            storage_gb: 1.0,
            pw_max: 100.0,
            pw_min: 50.0,
            pw_idle: 50.0,
        }
    }

    #[test]
    fn repair_keeps_feasible_genes() {
        let s = vec![server("a", 10.0, 10.0), server("b", 10.0, 10.0)];
        let v = vec![vm("x", 4.0, 1.0), vm("y", 4.0, 1.0)];
        assert_eq!(repair(&[0, 1], &s, &v).unwrap(), vec![0, 1]);
    }

    #[test]
    fn repair_moves_excess_to_empty_server() {
        let s = vec![server("a", 10.0, 10.0), server("b", 10.0, 10.0)];
        let v = vec![vm("x", 6.0, 1.0), vm("y", 6.0, 1.0)];
        let g = repair(&[0, 0], &s, &v).unwrap();
        assert_eq!(g, vec![0, 1]);
        assert!(feasible(&g, &s, &v).unwrap().feasible);
    }

    #[test]
    fn repair_rejects_impossible_instance() {
        let s = vec![server("a", 10.0, 10.0)];
        let v = vec![vm("x", 6.0, 1.0), vm("y", 6.0, 1.0)];
        assert!(matches!(repair(&[0, 0], &s, &v), Err(Error::Infeasible(_))));
    }

    #[test]
    fn best_fit_picks_tightest() {
        let s = vec![server("loose", 110.0, 10.0), server("tight", 20.0, 10.0)];
        let a = place_best_fit(&[vm("x", 10.0, 1.0)], &s).unwrap();
        assert_eq!(a.genes, vec![1]);
        assert!(place_best_fit(&[vm("huge", 1000.0, 1.0)], &s).is_err());
    }

    #[test]
    fn best_fit_spills_to_next_tightest() {
        let s = vec![server("a", 30.0, 10.0), server("b", 20.0, 10.0), server("c", 25.0, 10.0)];
        let v = vec![vm("1", 10.0, 1.0), vm("2", 10.0, 1.0), vm("3", 10.0, 1.0)];
        // 1 -> b (slack 10), 2 -> b (slack 0), 3 -> c (slack 15 beats a's 20)
        assert_eq!(place_best_fit(&v, &s).unwrap().genes, vec![1, 1, 2]);
    }

    #[test]
    fn random_fit_forced_and_reproducible() {
        let s = vec![server("a", 5.0, 10.0), server("b", 50.0, 10.0)];
        assert_eq!(place_random_fit(&[vm("x", 10.0, 1.0)], &s, 3).unwrap().genes, vec![1]);
        let v: Vec<VmInstance> = (0..8).map(|i| vm(&i.to_string(), 1.0, 0.1)).collect();
        assert_eq!(place_random_fit(&v, &s, 7).unwrap(), place_random_fit(&v, &s, 7).unwrap());
    }
}

//! Elitist multi-objective genetic algorithm over server-assignment genes.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::heuristics::{place_best_fit, random_first_fit, repair};
use super::model::{check_aggregate, Allocation, ServerSpec, VmInstance};
use super::pareto::pareto_fronts;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    /// Per-gene probability of reassignment to a random server.
    pub mutation_rate: f64,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig { population: 20, generations: 200, crossover_rate: 1.0, mutation_rate: 0.05, seed: 0 }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::config("ga.population", "must be at least 2"));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(Error::config("ga.crossover_rate", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(Error::config("ga.mutation_rate", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaOutcome {
    pub best: Allocation,
    /// Lowest first-front power after initialization and after each generation.
    pub best_power: Vec<f64>,
}

/// Sorts by front rank, then power ascending, then utilization descending, and
/// keeps the first `keep`.
fn survive(mut pool: Vec<Allocation>, keep: usize) -> Vec<Allocation> {
    let costs: Vec<_> = pool.iter().map(|a| a.cost).collect();
    let rank = pareto_fronts(&costs).rank;
    let mut idx: Vec<usize> = (0..pool.len()).collect();
    idx.sort_by(|&a, &b| {
        rank[a].cmp(&rank[b]).then(costs[a].pw.total_cmp(&costs[b].pw)).then(costs[b].ru.total_cmp(&costs[a].ru)).then(a.cmp(&b))
    });
    idx.truncate(keep);
    let mut slots: Vec<Option<Allocation>> = pool.drain(..).map(Some).collect();
    idx.into_iter().map(|i| slots[i].take().expect("indices are distinct")).collect()
}

/// Places `vms` on `servers`, returning the first-front member with the lowest
/// power (ties to higher utilization).
///
/// The initial population holds the best-fit placement plus random first-fit
/// placements. Each generation pairs every member with a random mate, applies
/// one-point crossover and per-gene mutation, repairs the children and keeps the
/// best of parents and children.
pub fn place_ga(vms: &[VmInstance], servers: &[ServerSpec], config: &GaConfig) -> Result<GaOutcome> {
    config.validate()?;
    check_aggregate(servers, vms)?;
    if vms.is_empty() {
        let best = Allocation::evaluate(Vec::new(), servers, vms)?;
        return Ok(GaOutcome { best_power: vec![best.cost.pw; config.generations + 1], best });
    }
    let mut rng = seed::stream(config.seed, &[seed::tag_str("ga")]);
    let q = vms.len();
    let p = servers.len();

    let mut population = Vec::with_capacity(config.population);
    if let Ok(bf) = place_best_fit(vms, servers) {
        population.push(bf);
    }
    let mut attempts = 0;
    while population.len() < config.population {
        attempts += 1;
        let genes = match random_first_fit(vms, servers, &mut rng) {
            Some(g) => g,
            None => {
                let raw: Vec<usize> = (0..q).map(|_| rng.gen_range(0..p)).collect();
                match repair(&raw, servers, vms) {
                    Ok(g) => g,
                    Err(e) if attempts > 10 * config.population && population.is_empty() => return Err(e),
                    Err(_) if attempts > 10 * config.population => population[attempts % population.len()].genes.clone(),
                    Err(_) => continue,
                }
            }
        };
        population.push(Allocation::evaluate(genes, servers, vms)?);
    }
    population = survive(population, config.population);
    let mut best_power = vec![population[0].cost.pw];

    for _ in 0..config.generations {
        let n = population.len();
        let mut children = Vec::with_capacity(2 * n);
        for i in 0..n {
            let mate = loop {
                let m = rng.gen_range(0..n);
                if m != i {
                    break m;
                }
            };
            let (a, b) = (&population[i].genes, &population[mate].genes);
            let (mut c1, mut c2) = if q > 1 && rng.gen::<f64>() < config.crossover_rate {
                let cut = rng.gen_range(1..q);
                let mut c1 = a[..cut].to_vec();
                c1.extend_from_slice(&b[cut..]);
                let mut c2 = b[..cut].to_vec();
                c2.extend_from_slice(&a[cut..]);
                (c1, c2)
            } else {
                (a.clone(), b.clone())
            };
            for child in [&mut c1, &mut c2] {
                for g in child.iter_mut() {
                    if rng.gen::<f64>() < config.mutation_rate {
                        *g = rng.gen_range(0..p);
                    }
                }
            }
            for child in [c1, c2] {
                if let Ok(genes) = repair(&child, servers, vms) {
                    children.push(Allocation::evaluate(genes, servers, vms)?);
                }
            }
        }
        population.extend(children);
        population = survive(population, config.population);
        best_power.push(population[0].cost.pw);
    }
    Ok(GaOutcome { best: population.swap_remove(0), best_power })
}

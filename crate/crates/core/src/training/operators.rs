//! Variation, selection and adaptation operators of the tri-adaptive DE.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::predictor::NetworkGenome;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MutationStrategy {
    /// DE/best/1
    Best,
    /// DE/current-to-best/1
    CurrentToBest,
    /// DE/rand/1
    Rand,
}

impl MutationStrategy {
    pub const ALL: [MutationStrategy; 3] = [MutationStrategy::Best, MutationStrategy::CurrentToBest, MutationStrategy::Rand];

    pub fn index(self) -> usize {
        match self {
            MutationStrategy::Best => 0,
            MutationStrategy::CurrentToBest => 1,
            MutationStrategy::Rand => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CrossoverStrategy {
    Uniform,
    Heuristic,
}

impl CrossoverStrategy {
    pub fn index(self) -> usize {
        match self {
            CrossoverStrategy::Uniform => 0,
            CrossoverStrategy::Heuristic => 1,
        }
    }
}

/// Roulette selection of the mutation strategy from `msp` in `(0, 1]`.
pub fn select_mutation(msp: f64, gamma: [f64; 3]) -> MutationStrategy {
    if msp > 0.0 && msp <= gamma[0] {
        MutationStrategy::Best
    } else if msp > gamma[0] && msp <= gamma[0] + gamma[1] {
        MutationStrategy::CurrentToBest
    } else {
        MutationStrategy::Rand
    }
}

/// Roulette selection of the crossover strategy from `csp` in `(0, 1]`.
pub fn select_crossover(csp: f64, omega: [f64; 2]) -> CrossoverStrategy {
    if csp > 0.0 && csp <= omega[0] {
        CrossoverStrategy::Uniform
    } else {
        CrossoverStrategy::Heuristic
    }
}

/// Three distinct indices in `0..n`, all different from `exclude`.
pub fn distinct_donors<R: rand::Rng + ?Sized>(n: usize, exclude: usize, rng: &mut R) -> Result<[usize; 3]> {
    if n < 4 {
        return Err(Error::invalid(format!("mutation needs a population of at least 4, got {n}")));
    }
    let picks = index::sample(rng, n - 1, 3);
    let shift = |j: usize| if j >= exclude { j + 1 } else { j };
    Ok([shift(picks.index(0)), shift(picks.index(1)), shift(picks.index(2))])
}

/// Mutant vector for member `i` with mutation factor `mr`.
pub fn mutate<T: Scalar, R: rand::Rng + ?Sized>(
    population: &[NetworkGenome<T>],
    best: &NetworkGenome<T>,
    i: usize,
    strategy: MutationStrategy,
    mr: T,
    rng: &mut R,
) -> Result<NetworkGenome<T>> {
    let [r1, r2, r3] = distinct_donors(population.len(), i, rng)?;
    let (a, b) = (&population[r1].weights, &population[r2].weights);
    let len = best.len();
    if population.iter().any(|g| g.len() != len) {
        return Err(Error::invalid("population genomes differ in length"));
    }
    let diff = |g: usize| mr * (a[g] - b[g]);
    let weights = match strategy {
        MutationStrategy::Best => (0..len).map(|g| best.weights[g] + diff(g)).collect(),
        MutationStrategy::CurrentToBest => {
            let cur = &population[i].weights;
            (0..len).map(|g| cur[g] + mr * (best.weights[g] - cur[g]) + diff(g)).collect()
        }
        MutationStrategy::Rand => {
            let base = &population[r3].weights;
            (0..len).map(|g| base[g] + diff(g)).collect()
        }
    };
    Ok(NetworkGenome::new(weights))
}

/// Gene-wise exchange: gene `g` of the first child comes from the mutant when
/// the uniform draw is at most `cr`. The second child is the complement.
pub fn crossover_uniform<T: Scalar, R: rand::Rng + ?Sized>(
    target: &NetworkGenome<T>,
    mutant: &NetworkGenome<T>,
    cr: f64,
    rng: &mut R,
) -> Result<(NetworkGenome<T>, NetworkGenome<T>)> {
    if target.len() != mutant.len() {
        return Err(Error::Dimension { expected: target.len(), got: mutant.len() });
    }
    let mut a = Vec::with_capacity(target.len());
    let mut b = Vec::with_capacity(target.len());
    for (&t, &m) in target.weights.iter().zip(&mutant.weights) {
        if rng.gen::<f64>() <= cr {
            a.push(m);
            b.push(t);
        } else {
            a.push(t);
            b.push(m);
        }
    }
    Ok((NetworkGenome::new(a), NetworkGenome::new(b)))
}

/// `cr * (better - other) + better`.
pub fn crossover_heuristic<T: Scalar>(better: &NetworkGenome<T>, other: &NetworkGenome<T>, cr: T) -> Result<NetworkGenome<T>> {
    if better.len() != other.len() {
        return Err(Error::Dimension { expected: better.len(), got: other.len() });
    }
    Ok(NetworkGenome::new(better.weights.iter().zip(&other.weights).map(|(&b, &o)| cr * (b - o) + b).collect()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Survivor {
    Current,
    Offspring,
}

/// Greedy one-to-one replacement; ties go to the offspring.
pub fn select_survivor<T: Scalar>(current: T, offspring: T) -> Survivor {
    if offspring <= current {
        Survivor::Offspring
    } else {
        Survivor::Current
    }
}

/// Closed interval a control parameter is regenerated in.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateBounds {
    pub lower: f64,
    pub upper: f64,
}

impl RateBounds {
    pub fn at(&self, theta: f64) -> f64 {
        self.lower + theta * (self.upper - self.lower)
    }
}

/// Regenerates `(mr, cr)` when at most `z` members were updated last generation.
pub fn adapt_control<R: rand::Rng + ?Sized>(
    updated: usize,
    z: usize,
    mr: f64,
    cr: f64,
    mr_bounds: RateBounds,
    cr_bounds: RateBounds,
    rng: &mut R,
) -> (f64, f64) {
    if updated <= z {
        let theta_m: f64 = rng.gen();
        let theta_c: f64 = rng.gen();
        (mr_bounds.at(theta_m), cr_bounds.at(theta_c))
    } else {
        (mr, cr)
    }
}

/// Success/failure tallies of each strategy within one learning period.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyCounters {
    pub mutation_success: [usize; 3],
    pub mutation_failure: [usize; 3],
    pub crossover_success: [usize; 2],
    pub crossover_failure: [usize; 2],
}

impl StrategyCounters {
    pub fn record(&mut self, m: MutationStrategy, c: CrossoverStrategy, success: bool) {
        if success {
            self.mutation_success[m.index()] += 1;
            self.crossover_success[c.index()] += 1;
        } else {
            self.mutation_failure[m.index()] += 1;
            self.crossover_failure[c.index()] += 1;
        }
    }

    pub fn mutation_trials(&self) -> usize {
        self.mutation_success.iter().sum::<usize>() + self.mutation_failure.iter().sum::<usize>()
    }

    pub fn crossover_trials(&self) -> usize {
        self.crossover_success.iter().sum::<usize>() + self.crossover_failure.iter().sum::<usize>()
    }
}

/// Normalizer used when turning tallies into selection probabilities.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuccessFormula {
    /// Denominators equal the sum of the numerators, so the probabilities sum to one.
    #[default]
    Symmetric,
    /// Denominators as typeset in the source:
    /// `b = 2(sm2 sm3 + sm1 sm3 + sm2 sm3) + fm1(sm2+sm3) + fm2(sm1+sm3) + fm3(sm1+sm2)`,
    /// `c = 2(cs2 + cs1) + cf1 cs2 + cf2 cs1`.
    Verbatim,
}

/// New mutation-strategy probabilities, or `None` when nothing succeeded.
pub fn mutation_success_probs(c: &StrategyCounters, formula: SuccessFormula) -> Option<[f64; 3]> {
    let [s1, s2, s3] = c.mutation_success.map(|v| v as f64);
    let [f1, f2, f3] = c.mutation_failure.map(|v| v as f64);
    if s1 + s2 + s3 == 0.0 {
        return None;
    }
    let cross = f1 * (s2 + s3) + f2 * (s1 + s3) + f3 * (s1 + s2);
    let b = match formula {
        SuccessFormula::Symmetric => 2.0 * (s1 * s2 + s1 * s3 + s2 * s3) + cross,
        SuccessFormula::Verbatim => 2.0 * (s2 * s3 + s1 * s3 + s2 * s3) + cross,
    };
    if b == 0.0 {
        // only one strategy was ever tried; fall back to success shares
        let total = s1 + s2 + s3;
        return Some([s1 / total, s2 / total, 1.0 - (s1 + s2) / total]);
    }
    let rho1 = s1 * (s2 + f2 + s3 + f3) / b;
    let rho2 = s2 * (s1 + f1 + s3 + f3) / b;
    Some([rho1, rho2, 1.0 - (rho1 + rho2)])
}

/// New crossover-strategy probabilities `[uniform, heuristic]`, or `None`.
pub fn crossover_success_probs(c: &StrategyCounters, formula: SuccessFormula) -> Option<[f64; 2]> {
    let [s1, s2] = c.crossover_success.map(|v| v as f64);
    let [f1, f2] = c.crossover_failure.map(|v| v as f64);
    if s1 + s2 == 0.0 {
        return None;
    }
    let c = match formula {
        SuccessFormula::Symmetric => 2.0 * s1 * s2 + f1 * s2 + f2 * s1,
        SuccessFormula::Verbatim => 2.0 * (s2 + s1) + f1 * s2 + f2 * s1,
    };
    if c == 0.0 {
        let total = s1 + s2;
        return Some([s1 / total, 1.0 - s1 / total]);
    }
    let sigma1 = s1 * (s2 + f2) / c;
    Some([sigma1, 1.0 - sigma1])
}

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::operators::{
    adapt_control, crossover_heuristic, crossover_success_probs, crossover_uniform, mutate, mutation_success_probs, select_crossover,
    select_mutation, select_survivor, CrossoverStrategy, MutationStrategy, RateBounds, StrategyCounters, SuccessFormula, Survivor,
};
use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::predictor::{fitness_unchecked, Fitness, NetworkGenome, Topology};
use crate::seed;
use crate::traces::TrainingWindow;

const TAG_INIT: u64 = 1;
const TAG_TRIAL: u64 = 2;
const TAG_ADAPT: u64 = 3;

/// Which adaptation dimensions are active.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adaptation {
    /// Mutation strategy, crossover strategy and control parameters.
    #[default]
    Tri,
    /// Mutation strategy only: uniform crossover, control parameters frozen at init.
    MutationOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TadeConfig {
    pub population: usize,
    pub max_generations: usize,
    pub gamma: [f64; 3],
    pub omega: [f64; 2],
    pub mutation_bounds: RateBounds,
    pub crossover_bounds: RateBounds,
    /// Regeneration threshold on updated members; `floor(2N/5)` when unset.
    pub stall_threshold: Option<usize>,
    /// Generations between strategy-probability refreshes.
    pub learning_period: usize,
    pub no_improve_patience: usize,
    pub improvement_eps: f64,
    pub train_fraction: f64,
    pub adaptation: Adaptation,
    pub success_formula: SuccessFormula,
    pub seed: u64,
}

impl Default for TadeConfig {
    fn default() -> Self {
        TadeConfig {
            population: 10,
            max_generations: 200,
            gamma: [0.33, 0.33, 0.34],
            omega: [0.5, 0.5],
            mutation_bounds: RateBounds { lower: 0.1, upper: 0.8 },
            crossover_bounds: RateBounds { lower: 0.1, upper: 0.5 },
            stall_threshold: None,
            learning_period: 10,
            no_improve_patience: 30,
            improvement_eps: 1e-9,
            train_fraction: 0.8,
            adaptation: Adaptation::Tri,
            success_formula: SuccessFormula::Symmetric,
            seed: 0,
        }
    }
}

impl TadeConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |f: &str, m: &str| Err(Error::config(f, m));
        if self.population < 4 {
            return err("population", "must be at least 4");
        }
        if (self.gamma.iter().sum::<f64>() - 1.0).abs() > 1e-9 || self.gamma.iter().any(|g| !(0.0..=1.0).contains(g)) {
            return err("gamma", "three probabilities in [0, 1] summing to 1");
        }
        if (self.omega.iter().sum::<f64>() - 1.0).abs() > 1e-9 || self.omega.iter().any(|g| !(0.0..=1.0).contains(g)) {
            return err("omega", "two probabilities in [0, 1] summing to 1");
        }
        for (name, b) in [("mutation_bounds", self.mutation_bounds), ("crossover_bounds", self.crossover_bounds)] {
            if !(0.0 <= b.lower && b.lower < b.upper && b.upper <= 1.0) {
                return err(name, "need 0 <= lower < upper <= 1");
            }
        }
        if self.learning_period == 0 {
            return err("learning_period", "must be at least 1");
        }
        if self.no_improve_patience == 0 {
            return err("no_improve_patience", "must be at least 1");
        }
        if !(self.improvement_eps >= 0.0) {
            return err("improvement_eps", "must be >= 0");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return err("train_fraction", "must lie in (0, 1)");
        }
        Ok(())
    }

    /// Two-fifths of the population.
    pub fn stall_threshold(&self) -> usize {
        self.stall_threshold.unwrap_or(2 * self.population / 5)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Member<T> {
    pub genome: NetworkGenome<T>,
    pub fitness: Fitness<T>,
    pub mutation_rate: f64,
    pub crossover_rate: f64,
}

/// Candidate produced for one member in one generation.
#[derive(Clone, Debug, PartialEq)]
pub struct Trial<T> {
    pub genome: NetworkGenome<T>,
    pub fitness: Fitness<T>,
    pub mutation: MutationStrategy,
    pub crossover: CrossoverStrategy,
}

/// One row of the convergence log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationLog {
    pub generation: usize,
    pub best: Vec<f64>,
    pub best_aggregate: f64,
    pub gamma: [f64; 3],
    pub omega: [f64; 2],
    pub mean_mutation_rate: f64,
    pub mean_crossover_rate: f64,
    /// Members replaced by their offspring.
    pub updated: usize,
}

/// Outcome of applying one generation of trials.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectionReport<T> {
    pub replaced: Vec<bool>,
    /// `(current, offspring)` aggregate fitness per member, kept for audit.
    pub compared: Vec<(T, T)>,
}

/// Population and adaptive parameters of a running optimization.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState<T> {
    pub topology: Topology,
    pub config: TadeConfig,
    pub members: Vec<Member<T>>,
    pub best: Member<T>,
    pub gamma: [f64; 3],
    pub omega: [f64; 2],
    pub counters: StrategyCounters,
    pub generation: usize,
    pub last_updated: usize,
}

impl<T: Scalar> TrainState<T> {
    /// Random population evaluated on `windows`.
    pub fn new(topology: Topology, config: TadeConfig, windows: &[TrainingWindow<T>]) -> Result<Self> {
        config.validate()?;
        check_windows(&topology, windows)?;
        let members = (0..config.population)
            .map(|i| {
                let mut rng = seed::stream(config.seed, &[TAG_INIT, i as u64]);
                let genome = NetworkGenome::random(&topology, &mut rng);
                let fitness = fitness_unchecked(&genome.weights, &topology, windows);
                Member {
                    genome,
                    fitness,
                    mutation_rate: config.mutation_bounds.at(rng.gen()),
                    crossover_rate: config.crossover_bounds.at(rng.gen()),
                }
            })
            .collect();
        Self::from_members(topology, config, members)
    }

    /// State around an explicit population.
    pub fn from_members(topology: Topology, config: TadeConfig, members: Vec<Member<T>>) -> Result<Self> {
        config.validate()?;
        if members.len() != config.population {
            return Err(Error::Dimension { expected: config.population, got: members.len() });
        }
        let len = members[0].genome.len();
        let res = members[0].fitness.per_resource.len();
        if members.iter().any(|m| m.genome.len() != len || m.fitness.per_resource.len() != res) {
            return Err(Error::invalid("members differ in genome length or resource count"));
        }
        let best = members
            .iter()
            .min_by(|a, b| a.fitness.aggregate.partial_cmp(&b.fitness.aggregate).unwrap_or(std::cmp::Ordering::Equal))
            .cloned()
            .expect("population is non-empty");
        Ok(TrainState {
            topology,
            gamma: config.gamma,
            omega: config.omega,
            config,
            members,
            best,
            counters: StrategyCounters::default(),
            generation: 0,
            last_updated: 0,
        })
    }

    pub fn genomes(&self) -> Vec<NetworkGenome<T>> {
        self.members.iter().map(|m| m.genome.clone()).collect()
    }

    /// Re-scores the population and the incumbent best on new data.
    pub fn reevaluate(&mut self, windows: &[TrainingWindow<T>]) -> Result<()> {
        check_windows(&self.topology, windows)?;
        for m in &mut self.members {
            m.fitness = fitness_unchecked(&m.genome.weights, &self.topology, windows);
        }
        self.best.fitness = fitness_unchecked(&self.best.genome.weights, &self.topology, windows);
        self.refresh_best();
        Ok(())
    }

    fn refresh_best(&mut self) {
        for m in &self.members {
            if m.fitness.aggregate < self.best.fitness.aggregate {
                self.best = m.clone();
            }
        }
    }

    /// Mutation and crossover for member `i` given its selection draws, with donors
    /// taken from `population`.
    pub fn propose<R: rand::Rng + ?Sized>(
        &self,
        i: usize,
        msp: f64,
        csp: f64,
        population: &[NetworkGenome<T>],
        windows: &[TrainingWindow<T>],
        rng: &mut R,
    ) -> Result<Trial<T>> {
        let member = &self.members[i];
        let mutation = select_mutation(msp, self.gamma);
        let crossover = match self.config.adaptation {
            Adaptation::Tri => select_crossover(csp, self.omega),
            Adaptation::MutationOnly => CrossoverStrategy::Uniform,
        };
        let mutant = mutate(population, &self.best.genome, i, mutation, T::lit(member.mutation_rate), rng)?;
        let eval = |g: &NetworkGenome<T>| fitness_unchecked(&g.weights, &self.topology, windows);
        let (genome, fitness) = match crossover {
            CrossoverStrategy::Uniform => {
                let (a, b) = crossover_uniform(&member.genome, &mutant, member.crossover_rate, rng)?;
                let (fa, fb) = (eval(&a), eval(&b));
                if fb.aggregate < fa.aggregate {
                    (b, fb)
                } else {
                    (a, fa)
                }
            }
            CrossoverStrategy::Heuristic => {
                let fm = eval(&mutant);
                let child = if member.fitness.aggregate <= fm.aggregate {
                    crossover_heuristic(&member.genome, &mutant, T::lit(member.crossover_rate))?
                } else {
                    crossover_heuristic(&mutant, &member.genome, T::lit(member.crossover_rate))?
                };
                let fc = eval(&child);
                (child, fc)
            }
        };
        Ok(Trial { genome, fitness, mutation, crossover })
    }

    /// Greedy replacement, bookkeeping and parameter adaptation for one generation.
    pub fn select(&mut self, trials: Vec<Trial<T>>) -> Result<SelectionReport<T>> {
        if trials.len() != self.members.len() {
            return Err(Error::Dimension { expected: self.members.len(), got: trials.len() });
        }
        let mut replaced = Vec::with_capacity(trials.len());
        let mut compared = Vec::with_capacity(trials.len());
        for (member, trial) in self.members.iter_mut().zip(trials) {
            let (fc, fo) = (member.fitness.aggregate, trial.fitness.aggregate);
            compared.push((fc, fo));
            let success = select_survivor(fc, fo) == Survivor::Offspring;
            self.counters.record(trial.mutation, trial.crossover, success);
            if success {
                member.genome = trial.genome;
                member.fitness = trial.fitness;
            }
            replaced.push(success);
        }
        self.refresh_best();
        self.generation += 1;
        self.last_updated = replaced.iter().filter(|&&r| r).count();

        if self.config.adaptation == Adaptation::Tri {
            let z = self.config.stall_threshold();
            for (i, m) in self.members.iter_mut().enumerate() {
                let mut rng = seed::stream(self.config.seed, &[TAG_ADAPT, self.generation as u64, i as u64]);
                let (mr, cr) = adapt_control(
                    self.last_updated,
                    z,
                    m.mutation_rate,
                    m.crossover_rate,
                    self.config.mutation_bounds,
                    self.config.crossover_bounds,
                    &mut rng,
                );
                m.mutation_rate = mr;
                m.crossover_rate = cr;
            }
        }

        if self.generation.is_multiple_of(self.config.learning_period) {
            if let Some(rho) = mutation_success_probs(&self.counters, self.config.success_formula) {
                self.gamma = rho;
            }
            if self.config.adaptation == Adaptation::Tri {
                if let Some(sigma) = crossover_success_probs(&self.counters, self.config.success_formula) {
                    self.omega = sigma;
                }
            }
            self.counters = StrategyCounters::default();
        }
        Ok(SelectionReport { replaced, compared })
    }

    /// One full generation on `windows`.
    pub fn step(&mut self, windows: &[TrainingWindow<T>]) -> Result<GenerationLog> {
        let g = self.generation as u64 + 1;
        let population = self.genomes();
        let trials = (0..self.members.len())
            .map(|i| {
                let mut rng = seed::stream(self.config.seed, &[TAG_TRIAL, g, i as u64]);
                // draws in (0, 1]
                let msp = 1.0 - rng.gen::<f64>();
                let csp = 1.0 - rng.gen::<f64>();
                self.propose(i, msp, csp, &population, windows, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        self.select(trials)?;
        Ok(self.log())
    }

    pub fn log(&self) -> GenerationLog {
        let n = self.members.len() as f64;
        GenerationLog {
            generation: self.generation,
            best: self.best.fitness.per_resource.iter().map(|v| v.as_f64()).collect(),
            best_aggregate: self.best.fitness.aggregate.as_f64(),
            gamma: self.gamma,
            omega: self.omega,
            mean_mutation_rate: self.members.iter().map(|m| m.mutation_rate).sum::<f64>() / n,
            mean_crossover_rate: self.members.iter().map(|m| m.crossover_rate).sum::<f64>() / n,
            updated: self.last_updated,
        }
    }

    /// Evolves for up to `generations`, stopping once the best has not improved
    /// by `improvement_eps` for `no_improve_patience` consecutive generations.
    pub fn evolve(&mut self, windows: &[TrainingWindow<T>], generations: usize) -> Result<Evolution> {
        check_windows(&self.topology, windows)?;
        let mut history = Vec::new();
        let mut stall = 0;
        let mut stopped_early = false;
        for _ in 0..generations {
            let before = self.best.fitness.aggregate.as_f64();
            history.push(self.step(windows)?);
            if before - self.best.fitness.aggregate.as_f64() >= self.config.improvement_eps {
                stall = 0;
            } else {
                stall += 1;
                if stall >= self.config.no_improve_patience {
                    stopped_early = true;
                    break;
                }
            }
        }
        Ok(Evolution { history, stopped_early })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evolution {
    pub history: Vec<GenerationLog>,
    pub stopped_early: bool,
}

fn check_windows<T: Scalar>(topology: &Topology, windows: &[TrainingWindow<T>]) -> Result<()> {
    if windows.is_empty() {
        return Err(Error::InsufficientData("no training windows".into()));
    }
    for w in windows {
        if w.inputs.len() != topology.input_len() {
            return Err(Error::Dimension { expected: topology.input_len(), got: w.inputs.len() });
        }
        if w.target.len() != topology.resources {
            return Err(Error::Dimension { expected: topology.resources, got: w.target.len() });
        }
    }
    Ok(())
}

/// Training and validation windows.
pub type WindowSplit<T> = (Vec<TrainingWindow<T>>, Vec<TrainingWindow<T>>);

/// Chronological split into training and validation windows.
pub fn split_windows<T: Clone>(windows: &[TrainingWindow<T>], train_fraction: f64) -> Result<WindowSplit<T>> {
    let m = windows.len();
    if m < 2 {
        return Err(Error::InsufficientData(format!("{m} windows cannot be split into training and validation")));
    }
    let train = ((m as f64 * train_fraction).floor() as usize).clamp(1, m - 1);
    Ok((windows[..train].to_vec(), windows[train..].to_vec()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome<T> {
    pub best: NetworkGenome<T>,
    pub train_fitness: Fitness<T>,
    pub validation_fitness: Fitness<T>,
    pub initial_fitness: Fitness<T>,
    pub history: Vec<GenerationLog>,
    pub stopped_early: bool,
    pub state: TrainState<T>,
}

impl<T> TrainOutcome<T> {
    pub fn generations(&self) -> usize {
        self.history.len()
    }
}

/// Trains a network with the tri-adaptive DE on an 80/20 chronological split.
pub fn train_tade<T: Scalar>(samples: &[TrainingWindow<T>], topology: &Topology, config: &TadeConfig) -> Result<TrainOutcome<T>> {
    config.validate()?;
    let (train, validation) = split_windows(samples, config.train_fraction)?;
    let mut state = TrainState::new(*topology, config.clone(), &train)?;
    let initial_fitness = state.best.fitness.clone();
    let evo = state.evolve(&train, config.max_generations)?;
    let validation_fitness = fitness_unchecked(&state.best.genome.weights, topology, &validation);
    Ok(TrainOutcome {
        best: state.best.genome.clone(),
        train_fitness: state.best.fitness.clone(),
        validation_fitness,
        initial_fitness,
        history: evo.history,
        stopped_early: evo.stopped_early,
        state,
    })
}

/// Mutation-only adaptive DE baseline (uniform crossover, fixed control parameters).
pub fn train_sade_baseline<T: Scalar>(samples: &[TrainingWindow<T>], topology: &Topology, config: &TadeConfig) -> Result<TrainOutcome<T>> {
    let cfg = TadeConfig { adaptation: Adaptation::MutationOnly, ..config.clone() };
    train_tade(samples, topology, &cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traces::{make_windows, normalize, Sample, TaskSeries};

    fn sine_windows(len: usize, n: usize) -> Vec<TrainingWindow<f64>> {
        let s = TaskSeries::new(
            "s",
            5,
            vec!["cpu".into(), "mem".into()],
            (0..len)
                .map(|t| {
                    let a = std::f64::consts::TAU * t as f64 / 12.0;
                    Sample { timestamp: t as i64 * 300, demand: vec![0.5 + 0.3 * a.sin(), 0.4 + 0.2 * a.cos()] }
                })
                .collect(),
        )
        .unwrap();
        make_windows(&normalize(&s).unwrap(), n).unwrap()
    }

    fn topo() -> Topology {
        Topology::new(3, 5, 1, 2).unwrap()
    }

    #[test]
    fn zero_generations_returns_initial_best() {
        let w = sine_windows(40, 3);
        let cfg = TadeConfig { max_generations: 0, seed: 4, ..Default::default() };
        let out = train_tade(&w, &topo(), &cfg).unwrap();
        assert!(out.history.is_empty());
        let (train, _) = split_windows(&w, 0.8).unwrap();
        let init = TrainState::new(topo(), cfg, &train).unwrap();
        let min = init.members.iter().map(|m| m.fitness.aggregate).fold(f64::INFINITY, f64::min);
        assert_eq!(out.train_fitness.aggregate, min);
        assert_eq!(out.best, init.best.genome);
    }

    #[test]
    fn training_improves_sine_fit() {
        let w = sine_windows(80, 3);
        let out = train_tade(&w, &topo(), &TadeConfig { seed: 1, ..Default::default() }).unwrap();
        assert!(out.train_fitness.aggregate < out.initial_fitness.aggregate);
    }

    #[test]
    fn deterministic_trace() {
        let w = sine_windows(40, 3);
        let cfg = TadeConfig { max_generations: 30, seed: 9, ..Default::default() };
        let a = train_tade(&w, &topo(), &cfg).unwrap();
        let b = train_tade(&w, &topo(), &cfg).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.best, b.best);
    }

    #[test]
    fn counters_conserve_population() {
        let w = sine_windows(30, 3);
        let cfg = TadeConfig { learning_period: 1000, max_generations: 7, seed: 2, ..Default::default() };
        let mut state = TrainState::new(topo(), cfg, &w).unwrap();
        for g in 1..=7 {
            state.step(&w).unwrap();
            assert_eq!(state.counters.mutation_trials(), g * 10);
            assert_eq!(state.counters.crossover_trials(), g * 10);
        }
    }

    #[test]
    fn selection_never_worsens_members() {
        let w = sine_windows(30, 3);
        let mut state = TrainState::new(topo(), TadeConfig { seed: 5, ..Default::default() }, &w).unwrap();
        for _ in 0..20 {
            let before: Vec<f64> = state.members.iter().map(|m| m.fitness.aggregate).collect();
            state.step(&w).unwrap();
            for (m, b) in state.members.iter().zip(before) {
                assert!(m.fitness.aggregate <= b);
            }
        }
    }

    #[test]
    fn failed_trial_increments_failure_counter_only() {
        let w = sine_windows(20, 3);
        let mut state = TrainState::new(topo(), TadeConfig { seed: 3, ..Default::default() }, &w).unwrap();
        let trials: Vec<Trial<f64>> = state
            .members
            .iter()
            .map(|m| Trial {
                genome: m.genome.clone(),
                fitness: Fitness::from_per_resource(vec![m.fitness.aggregate + 1.0; 2]),
                mutation: MutationStrategy::CurrentToBest,
                crossover: CrossoverStrategy::Heuristic,
            })
            .collect();
        state.select(trials).unwrap();
        assert_eq!(state.counters.mutation_success, [0, 0, 0]);
        assert_eq!(state.counters.mutation_failure, [0, 10, 0]);
        assert_eq!(state.counters.crossover_failure, [0, 10]);
        assert_eq!(state.last_updated, 0);
    }

    #[test]
    fn sade_diverges_from_tade_and_keeps_omega() {
        let w = sine_windows(40, 3);
        let cfg = TadeConfig { max_generations: 40, no_improve_patience: 1000, seed: 11, ..Default::default() };
        let tade = train_tade(&w, &topo(), &cfg).unwrap();
        let sade = train_sade_baseline(&w, &topo(), &cfg).unwrap();
        assert_ne!(tade.history, sade.history);
        assert!(sade.history.iter().all(|h| h.omega == cfg.omega));
        let (m0, c0) = (sade.history[0].mean_mutation_rate, sade.history[0].mean_crossover_rate);
        assert!(sade.history.iter().all(|h| h.mean_mutation_rate == m0 && h.mean_crossover_rate == c0));
        assert!(sade.history.iter().any(|h| h.gamma != cfg.gamma));
    }

    #[test]
    fn split_needs_two_windows() {
        let w = sine_windows(5, 3);
        assert_eq!(w.len(), 2);
        let (a, b) = split_windows(&w, 0.8).unwrap();
        assert_eq!((a.len(), b.len()), (1, 1));
        assert!(split_windows(&w[..1], 0.8).is_err());
        assert!(train_tade(&w[..1], &topo(), &TadeConfig::default()).is_err());
    }

    #[test]
    fn config_validation() {
        let bad = TadeConfig { gamma: [0.5, 0.5, 0.5], ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = TadeConfig { population: 3, ..Default::default() };
        assert!(bad.validate().is_err());
        assert_eq!(TadeConfig::default().stall_threshold(), 4);
    }
}

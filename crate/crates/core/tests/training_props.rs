use proptest::prelude::*;
use vmscale::predictor::Topology;
use vmscale::traces::{make_windows, normalize, Sample, TaskSeries, TrainingWindow};
use vmscale::training::{
    crossover_success_probs, mutation_success_probs, select_survivor, train_tade, StrategyCounters, SuccessFormula, Survivor, TadeConfig,
    TrainState,
};

fn windows(len: usize) -> Vec<TrainingWindow<f64>> {
    let samples = (0..len)
        .map(|t| {
            let a = t as f64 * 0.4;
            Sample { timestamp: t as i64 * 300, demand: vec![0.5 + 0.3 * a.sin(), 0.4 + 0.2 * (1.3 * a).cos()] }
        })
        .collect();
    let s = TaskSeries::new("w", 5, vec!["cpu".into(), "mem".into()], samples).unwrap();
    make_windows(&normalize(&s).unwrap(), 3).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn counters_and_probabilities_are_conserved(seed in any::<u64>(), population in 4usize..12) {
        let w = windows(40);
        let topology = Topology::new(3, 4, 1, 2).unwrap();
        let config = TadeConfig { seed, population, learning_period: 1000, ..TadeConfig::default() };
        let mut state = TrainState::new(topology, config, &w).unwrap();
        for g in 1..=6 {
            let before = state.best.fitness.aggregate;
            state.step(&w).unwrap();
            let c = state.counters;
            let m: usize = c.mutation_success.iter().chain(&c.mutation_failure).sum();
            let x: usize = c.crossover_success.iter().chain(&c.crossover_failure).sum();
            prop_assert_eq!(m, population * g);
            prop_assert_eq!(x, population * g);
            prop_assert!(state.best.fitness.aggregate <= before);
        }
        if let Some(rho) = mutation_success_probs(&state.counters, SuccessFormula::Symmetric) {
            prop_assert!((rho.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        if let Some(sigma) = crossover_success_probs(&state.counters, SuccessFormula::Symmetric) {
            prop_assert!((sigma.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn survivor_never_worsens(current in 0.0..1.0f64, offspring in 0.0..1.0f64) {
        let kept = match select_survivor(current, offspring) {
            Survivor::Offspring => offspring,
            Survivor::Current => current,
        };
        prop_assert!(kept <= current);
    }

    #[test]
    fn probabilities_sum_to_one_for_any_tallies(s in prop::array::uniform5(0usize..50), f in prop::array::uniform5(0usize..50)) {
        let c = StrategyCounters {
            mutation_success: [s[0], s[1], s[2]],
            mutation_failure: [f[0], f[1], f[2]],
            crossover_success: [s[3], s[4]],
            crossover_failure: [f[3], f[4]],
        };
        if let Some(rho) = mutation_success_probs(&c, SuccessFormula::Symmetric) {
            prop_assert!((rho.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(rho.iter().all(|p| (0.0..=1.0).contains(p)));
        }
        if let Some(sigma) = crossover_success_probs(&c, SuccessFormula::Symmetric) {
            prop_assert!((sigma.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn fixed_seed_gives_identical_trace() {
    let w = windows(60);
    let topology = Topology::new(3, 5, 1, 2).unwrap();
    let config = TadeConfig { seed: 11, max_generations: 40, ..TadeConfig::default() };
    let a = train_tade(&w, &topology, &config).unwrap();
    let b = train_tade(&w, &topology, &config).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.best, b.best);
}

#[test]
fn sine_training_improves_strictly() {
    let w = windows(120);
    let topology = Topology::new(3, 5, 1, 2).unwrap();
    let out = train_tade(&w, &topology, &TadeConfig::default()).unwrap();
    assert!(out.train_fitness.aggregate < out.initial_fitness.aggregate);
}

#[test]
fn single_precision_training_runs() {
    let w: Vec<TrainingWindow<f32>> = windows(40)
        .into_iter()
        .map(|x| TrainingWindow {
            inputs: x.inputs.iter().map(|&v| v as f32).collect(),
            target: x.target.iter().map(|&v| v as f32).collect(),
        })
        .collect();
    let topology = Topology::new(3, 4, 1, 2).unwrap();
    let out = train_tade(&w, &topology, &TadeConfig { max_generations: 20, ..TadeConfig::default() }).unwrap();
    assert!(out.train_fitness.aggregate <= out.initial_fitness.aggregate);
}

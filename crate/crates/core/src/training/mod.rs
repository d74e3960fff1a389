//! Trainers for the forecasting network: the tri-adaptive differential
//! evolution, a mutation-only adaptive DE baseline and gradient descent.

pub mod backprop;
pub mod operators;
pub mod tade;

pub use backprop::{gradient, train_backprop_baseline, train_backprop_from, BackpropOutcome};
pub use operators::{
    adapt_control, crossover_heuristic, crossover_success_probs, crossover_uniform, mutate, mutation_success_probs, select_crossover,
    select_mutation, select_survivor, CrossoverStrategy, MutationStrategy, RateBounds, StrategyCounters, SuccessFormula, Survivor,
};
pub use tade::{
    split_windows, train_sade_baseline, train_tade, Adaptation, Evolution, GenerationLog, Member, SelectionReport, TadeConfig,
    TrainOutcome, TrainState, Trial,
};

use std::io::Write;

use crate::error::Result;

/// Writes the convergence log as delimited text.
pub fn write_generation_log<W: Write>(writer: W, resources: &[String], log: &[GenerationLog]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["generation".to_string()];
    header.extend(resources.iter().map(|r| format!("best_{r}")));
    header.extend(["gamma1", "gamma2", "gamma3", "omega1", "omega2", "mean_mr", "mean_cr", "updated"].map(String::from));
    w.write_record(&header)?;
    for row in log {
        let mut rec = vec![row.generation.to_string()];
        rec.extend(row.best.iter().map(|v| v.to_string()));
        rec.extend(row.gamma.iter().map(|v| v.to_string()));
        rec.extend(row.omega.iter().map(|v| v.to_string()));
        rec.push(row.mean_mutation_rate.to_string());
        rec.push(row.mean_crossover_rate.to_string());
        rec.push(row.updated.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

//! Proactive multi-resource forecasting, VM autoscaling and energy-aware VM placement.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod autoscaler;
pub mod error;
pub mod num;
pub mod orchestrator;
pub mod placement;
pub mod predictor;
pub mod resources;
pub mod seed;
pub mod traces;
pub mod training;

pub use error::{Error, Result};
pub use num::Scalar;
pub use resources::Resources;

pub type Genome = predictor::NetworkGenome<f64>;
pub type Genome32 = predictor::NetworkGenome<f32>;
pub type Predictor = predictor::Predictor<f64>;
pub type Predictor32 = predictor::Predictor<f32>;
pub type Window = traces::TrainingWindow<f64>;
pub type Window32 = traces::TrainingWindow<f32>;

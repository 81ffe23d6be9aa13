//! Decision-focused counterfactual learning on combinatorial action
//! spaces: biased-data generators with known oracles, a small feedforward
//! network engine, the Sinkhorn distance, a regret-minimizing scorer plus
//! baselines, and the decision metrics (nmCG, regret, uniform MSE, top-k
//! error) with a runtime check of the regret bound.

pub mod bench;
pub mod datagen;
pub mod eval;
pub mod io;
pub mod models;
pub mod nn;
pub mod sinkhorn;
pub mod train;

pub use bench::{run_experiment, ExperimentConfig, Method};
pub use datagen::{gen_synthetic, Benchmark, ObservationalDataset, OracleTable, SyntheticSpec};
pub use eval::MetricsReport;
pub use models::{GModel, MultiHeadModel, RMNetModel, RidgeModel, Scorer};
pub use train::{select_alpha, train_rmnet, TrainConfig, TrainReport};

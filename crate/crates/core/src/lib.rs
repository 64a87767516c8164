//! Consensus-ADMM training for linear SVMs with combined sparse and
//! structured penalties.
//!
//! Data is split row-wise across `K` in-process workers. Each iteration the
//! workers solve their local coefficient system and loss prox, the
//! coordinator applies the structure, sparsity and intercept updates, and a
//! back-substitution step relaxes the second and third blocks.

pub mod coordinator;
pub mod data;
pub mod error;
pub mod experiment;
pub mod model_io;
pub mod oracle;
pub mod penalty;
pub mod select;
pub mod worker;

pub use coordinator::{
    accuracy, adapt_mu, check_convergence, fit, fit_traced, objective, predict, propose_beta, train,
    update_beta0, update_theta_e, FitResult, FitTrace, ModelConfig, Phase, Prediction, Residuals,
    Snapshot, ThresholdRecord, TraceOptions,
};
pub use data::{
    generate_synthetic, load_grouped_table, load_table, shard, standardize, DataShard, Dataset,
    GroupMap, LabelSpec, Scaling, SyntheticSpec,
};
pub use error::{CrsvmError, Result};
pub use experiment::{BenchRow, MeanSd, MetricsReport, SyntheticRun};
pub use model_io::ModelFile;
pub use penalty::{
    build_structure_matrix, eta_for, group_soft_threshold, penalty_weight, prox_loss,
    soft_threshold, theta_update, GroupPartition, LossKind, SparsePenaltyKind, StructureOp,
    StructurePenaltyKind,
};
pub use select::{grid_search, select_best, svmic, svmic_value, GridCell, GridOutcome, SvmicParams};
pub use worker::{BetaSolver, SolveStrategy, WorkerState};

/// Linear-algebra types used throughout the public API.
pub use nalgebra;

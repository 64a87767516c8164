use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use crsvm_core::{
    CrsvmError, GroupPartition, LossKind, ModelConfig, Result, SparsePenaltyKind, StructurePenaltyKind,
};

#[derive(Parser, Debug)]
#[command(name = "crsvm", version, about = "Consensus-ADMM training for combined-regularized linear SVMs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a synthetic data set and its manifest.
    Datagen(DatagenArgs),
    /// Fit one model and write it with its metrics.
    Train(TrainArgs),
    /// Score a data file with a saved model.
    Predict(PredictArgs),
    /// Grid search over (lambda1, lambda2, mu0) by SVMIC.
    Tune(TuneArgs),
    /// Repeated synthetic runs over a list of worker counts.
    Bench(BenchArgs),
}

#[derive(Args, Debug, Clone)]
pub struct SyntheticArgs {
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 50)]
    pub p: usize,
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    /// Fraction of rows with a flipped label.
    #[arg(long, default_value_t = 0.2)]
    pub alpha: f64,
}

#[derive(Args, Debug)]
pub struct DatagenArgs {
    #[command(flatten)]
    pub synthetic: SyntheticArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Defaults to `<out>.manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct InputArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// TOML group map; required for `--structure sgl`.
    #[arg(long)]
    pub groups: Option<PathBuf>,
    /// Label column header; the first column when omitted.
    #[arg(long = "label-col")]
    pub label_col: Option<String>,
    #[arg(long = "pos-label", default_value = "1")]
    pub pos_label: String,
    /// Negative label token; inferred when the column has exactly two tokens.
    #[arg(long = "neg-label")]
    pub neg_label: Option<String>,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub standardize: bool,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    #[arg(long, default_value = "hinge", value_parser = ["hinge", "ls", "sqhinge", "hhinge", "pinball", "hpinball"])]
    pub loss: String,
    #[arg(long, default_value = "l1", value_parser = ["l1", "scad", "mcp"])]
    pub sparse: String,
    #[arg(long, default_value = "en", value_parser = ["en", "sfl", "sgl"])]
    pub structure: String,
    #[arg(long, default_value_t = 0.01)]
    pub lambda1: f64,
    #[arg(long, default_value_t = 0.01)]
    pub lambda2: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mu0: f64,
    #[arg(long, default_value_t = 0.9)]
    pub nu: f64,
    /// Number of consensus workers; `bench` accepts a comma-separated list.
    #[arg(long = "K", value_delimiter = ',', default_value = "1")]
    pub workers: Vec<usize>,
    /// SCAD / MCP shape parameter.
    #[arg(long, default_value_t = 3.7)]
    pub a: f64,
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "max-iter", default_value_t = 5000)]
    pub max_iter: usize,
    #[arg(long = "eps-abs", default_value_t = 1e-4)]
    pub eps_abs: f64,
    #[arg(long = "eps-rel", default_value_t = 1e-3)]
    pub eps_rel: f64,
    /// Residual-driven doubling / halving of mu until the freeze iteration.
    #[arg(long = "adaptive-mu")]
    pub adaptive_mu: bool,
    #[arg(long = "mu-freeze", default_value_t = 100)]
    pub mu_freeze: usize,
    /// Physical threads; defaults to min(K, cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

impl ModelArgs {
    /// The single worker count of a non-bench run.
    pub fn single_k(&self) -> Result<usize> {
        match self.workers.as_slice() {
            [k] => Ok(*k),
            _ => Err(CrsvmError::InvalidArgument("--K takes one value outside bench".into())),
        }
    }

    /// Builds a validated config. `partition` is needed for the group structure.
    pub fn config(&self, partition: Option<&GroupPartition>) -> Result<ModelConfig> {
        let structure = match self.structure.as_str() {
            "en" => StructurePenaltyKind::Ridge,
            "sfl" => StructurePenaltyKind::Fusion,
            "sgl" => StructurePenaltyKind::Group {
                partition: partition
                    .cloned()
                    .ok_or_else(|| CrsvmError::Config("--structure sgl needs a group map (--groups)".into()))?,
            },
            other => return Err(CrsvmError::InvalidArgument(format!("unknown structure '{other}'"))),
        };
        let config = ModelConfig {
            loss: LossKind::from_name(&self.loss, self.tau, self.delta)?,
            sparse: SparsePenaltyKind::from_name(&self.sparse, self.a)?,
            structure,
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            mu0: self.mu0,
            nu: self.nu,
            workers: self.single_k()?,
            max_iter: self.max_iter,
            eps_abs: self.eps_abs,
            eps_rel: self.eps_rel,
            adaptive_mu: self.adaptive_mu,
            mu_freeze: self.mu_freeze,
            seed: self.seed,
            threads: self.threads,
            ..ModelConfig::default()
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long = "model-out")]
    pub model_out: PathBuf,
    /// Metrics JSON; printed to stdout when omitted.
    #[arg(long = "metrics-out")]
    pub metrics_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long = "model-in")]
    pub model_in: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Label column header; `label` when omitted. Absent columns mean unlabeled input.
    #[arg(long = "label-col")]
    pub label_col: Option<String>,
    #[arg(long = "pos-label", default_value = "1")]
    pub pos_label: String,
    #[arg(long = "neg-label")]
    pub neg_label: Option<String>,
    /// Predictions CSV (`score,label`); stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Accuracy JSON when the input is labelled; stderr when omitted.
    #[arg(long = "metrics-out")]
    pub metrics_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TuneArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// TOML file with a `[grid]` table (lambda1, lambda2, mu0, gamma).
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the grid file's gamma.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long = "model-out")]
    pub model_out: PathBuf,
    /// Grid report JSON; printed to stdout when omitted.
    #[arg(long = "metrics-out")]
    pub metrics_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[command(flatten)]
    pub synthetic: SyntheticArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    #[arg(long = "test-n", default_value_t = 10_000)]
    pub test_n: usize,
    #[arg(long = "test-alpha", default_value_t = 0.0)]
    pub test_alpha: f64,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub standardize: bool,
    /// Emit CSV rows instead of JSON.
    #[arg(long)]
    pub csv: bool,
    #[arg(long = "metrics-out")]
    pub metrics_out: Option<PathBuf>,
}

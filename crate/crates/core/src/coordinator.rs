//! The central machine: structure, coefficient and intercept updates with
//! back-substitution corrections, LLA reweighting, adaptive `mu` and the
//! stopping rule, plus the training loop that drives the workers.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use rayon::ThreadPool;
use serde::{Deserialize, Serialize};

use crate::data::{shard, DataShard, Dataset};
use crate::error::{CrsvmError, Result};
use crate::penalty::{
    build_structure_matrix, eta_for, penalty_weight, shrink, theta_update, LossKind,
    SparsePenaltyKind, StructureOp, StructurePenaltyKind,
};
use crate::worker::{Downlink, ResidualParts, SolveStrategy, Uplink, WorkerState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub loss: LossKind,
    pub sparse: SparsePenaltyKind,
    pub structure: StructurePenaltyKind,
    pub lambda1: f64,
    pub lambda2: f64,
    pub mu0: f64,
    pub nu: f64,
    pub workers: usize,
    pub max_iter: usize,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub adaptive_mu: bool,
    /// Iteration from which `mu` stays fixed.
    pub mu_freeze: usize,
    pub seed: u64,
    /// Physical threads; `None` uses `min(workers, cores)`.
    #[serde(default)]
    pub threads: Option<usize>,
    /// Forces one linear-solve strategy on every worker.
    #[serde(default)]
    pub strategy: Option<SolveStrategy>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            loss: LossKind::Hinge,
            sparse: SparsePenaltyKind::L1,
            structure: StructurePenaltyKind::Ridge,
            lambda1: 0.01,
            lambda2: 0.01,
            mu0: 1.0,
            nu: 0.9,
            workers: 1,
            max_iter: 5000,
            eps_abs: 1e-4,
            eps_rel: 1e-3,
            adaptive_mu: false,
            mu_freeze: 100,
            seed: 0,
            threads: None,
            strategy: None,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        self.sparse.validate()?;
        let bad = |msg: String| Err(CrsvmError::Config(msg));
        if !(self.lambda1 >= 0.0 && self.lambda1.is_finite()) {
            return bad(format!("lambda1 must be finite and >= 0, got {}", self.lambda1));
        }
        if !(self.lambda2 >= 0.0 && self.lambda2.is_finite()) {
            return bad(format!("lambda2 must be finite and >= 0, got {}", self.lambda2));
        }
        if !(self.mu0 > 0.0 && self.mu0.is_finite()) {
            return bad(format!("mu0 must be positive, got {}", self.mu0));
        }
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return bad(format!("nu must lie strictly inside (0, 1), got {}", self.nu));
        }
        if self.workers == 0 {
            return bad("worker count must be at least 1".into());
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        if !(self.eps_abs > 0.0) || !(self.eps_rel >= 0.0) {
            return bad(format!(
                "tolerances must satisfy eps_abs > 0, eps_rel >= 0 (got {}, {})",
                self.eps_abs, self.eps_rel
            ));
        }
        if self.threads == Some(0) {
            return bad("thread count must be at least 1".into());
        }
        if let Some(s) = &self.strategy {
            s.validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Plain weighted-l1 run (the only phase for convex penalties).
    L1,
    /// LLA run with weights recomputed from the current iterate.
    Reweighted,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitResult {
    pub beta: DVector<f64>,
    pub beta0: f64,
    pub support: Vec<usize>,
    pub group_norms: Option<Vec<f64>>,
    pub iterations: usize,
    pub phase_iterations: Vec<(Phase, usize)>,
    pub converged: bool,
    pub elapsed_secs: f64,
    pub primal_trace: Vec<f64>,
    pub dual_trace: Vec<f64>,
    pub mu_trace: Vec<f64>,
    pub final_mu: f64,
    /// `max_k |beta_k - beta|_inf` at the last iteration.
    pub consensus_gap: f64,
    /// `|theta - G beta|_inf` at the last iteration.
    pub structure_gap: f64,
    pub config: ModelConfig,
}

impl FitResult {
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Prediction> {
        predict(&self.beta, self.beta0, x)
    }

    pub fn sparsity(&self) -> f64 {
        let p = self.beta.len();
        if p == 0 {
            0.0
        } else {
            (p - self.support.len()) as f64 / p as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub scores: Vec<f64>,
    pub labels: Vec<f64>,
}

/// `score = x beta + beta0`, `label = sign(score)` with ties going to `+1`.
pub fn predict(beta: &DVector<f64>, beta0: f64, x: &DMatrix<f64>) -> Result<Prediction> {
    if x.ncols() != beta.len() {
        return Err(CrsvmError::Shape(format!(
            "model has {} coefficients, input has {} columns",
            beta.len(),
            x.ncols()
        )));
    }
    let scores: Vec<f64> = (x * beta).iter().map(|s| s + beta0).collect();
    let labels = scores.iter().map(|&s| if s >= 0.0 { 1.0 } else { -1.0 }).collect();
    Ok(Prediction { scores, labels })
}

/// Fraction of matching labels.
pub fn accuracy(predicted: &[f64], truth: &[f64]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len() as f64
}

/// `(1/n) sum L(1 - y (x beta + beta0)) + sum P_l1(|beta_j|) + P_l2(G beta)`.
pub fn objective(x: &DMatrix<f64>, y: &[f64], beta: &DVector<f64>, beta0: f64, config: &ModelConfig) -> Result<f64> {
    if x.nrows() != y.len() || x.ncols() != beta.len() {
        return Err(CrsvmError::Shape("objective inputs disagree in size".into()));
    }
    let scores = x * beta;
    let n = y.len() as f64;
    let loss: f64 = y
        .iter()
        .zip(scores.iter())
        .map(|(yi, s)| config.loss.value(1.0 - yi * (s + beta0)))
        .sum::<f64>()
        / n;
    let sparse: f64 = beta.iter().map(|b| config.sparse.value(b.abs(), config.lambda1)).sum();
    let g = build_structure_matrix(&config.structure, beta.len())?;
    let structure = config.structure.value(g.apply(beta).as_slice(), config.lambda2);
    Ok(loss + sparse + structure)
}

/// Dual step on `e` with the lagged coefficient proposal, then the structure prox.
pub fn update_theta_e(
    kind: &StructurePenaltyKind,
    g: &StructureOp,
    theta: &mut DVector<f64>,
    e: &mut DVector<f64>,
    beta: &DVector<f64>,
    beta_tilde_prev: &DVector<f64>,
    lambda2: f64,
    mu: f64,
) -> Result<()> {
    e.axpy(-mu, theta, 1.0);
    e.axpy(mu, &g.apply(beta_tilde_prev), 1.0);
    let u = g.apply(beta) + &*e / mu;
    *theta = theta_update(kind, &u, lambda2, mu)?;
    Ok(())
}

/// Unshrunk input and thresholded output of the coefficient step.
#[derive(Clone, Debug)]
pub struct BetaProposal {
    pub input: DVector<f64>,
    pub thresholds: DVector<f64>,
    pub beta_tilde: DVector<f64>,
}

/// The coefficient step: exact soft-thresholding when `G = I`, one
/// linearised proximal step when `G = F`. `weights` are the per-coordinate
/// l1 weights (constant `lambda1` or LLA derivatives).
pub fn propose_beta(
    g: &StructureOp,
    beta: &DVector<f64>,
    beta_bar: &DVector<f64>,
    d_bar: &DVector<f64>,
    theta: &DVector<f64>,
    e: &DVector<f64>,
    weights: &DVector<f64>,
    mu: f64,
    workers: usize,
) -> BetaProposal {
    let k = workers as f64;
    let local = beta_bar - d_bar / mu;
    let (input, thresholds) = match g {
        StructureOp::Identity { .. } => {
            let input = (&local * k + theta - e / mu) / (k + 1.0);
            (input, weights / (mu * (k + 1.0)))
        }
        StructureOp::Difference { .. } => {
            let eta = eta_for(workers) * mu.max(1.0);
            let grad = beta * k + g.gram_apply(beta) - &local * k - g.apply_transpose(&(theta - e / mu));
            (beta - grad * (mu / eta), weights / eta)
        }
    };
    let beta_tilde = input.zip_map(&thresholds, shrink);
    BetaProposal {
        input,
        thresholds,
        beta_tilde,
    }
}

/// `(beta_tilde0, beta0_next)`: the summed worker contributions in worker-id
/// order, then the relaxed intercept.
pub fn update_beta0(contributions: &[(usize, f64)], beta0: f64, nu: f64, workers: usize) -> Result<(f64, f64)> {
    let mut by_id: Vec<Option<f64>> = vec![None; workers];
    for &(id, c) in contributions {
        match by_id.get_mut(id) {
            Some(slot @ None) => *slot = Some(c),
            Some(Some(_)) => return Err(CrsvmError::Protocol(format!("duplicate message from worker {id}"))),
            None => return Err(CrsvmError::Protocol(format!("message from unknown worker {id}"))),
        }
    }
    let mut total = 0.0;
    for (id, c) in by_id.into_iter().enumerate() {
        total += c.ok_or_else(|| CrsvmError::Protocol(format!("no intercept message from worker {id}")))?;
    }
    Ok((total, (1.0 - nu) * beta0 + nu * total))
}

/// Adaptive `mu` stays within `[mu0 / MU_SPAN, mu0 * MU_SPAN]`.
pub const MU_SPAN: f64 = 1024.0;

/// Residual balancing: double `mu` when the dual residual dominates by a
/// factor of ten, halve it in the opposite case, and never change it at or
/// after `freeze`.
pub fn adapt_mu(mu: f64, primal: f64, dual: f64, iteration: usize, freeze: usize, enabled: bool) -> f64 {
    if !enabled || iteration >= freeze {
        mu
    } else if 10.0 * primal < dual {
        mu * 2.0
    } else if primal > 10.0 * dual {
        mu / 2.0
    } else {
        mu
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub eps_primal: f64,
    pub eps_dual: f64,
    pub consensus_gap: f64,
    pub structure_gap: f64,
}

impl Residuals {
    pub fn converged(&self, eps_abs: f64) -> bool {
        self.primal <= self.eps_primal
            && self.dual <= self.eps_dual
            && self.consensus_gap <= 10.0 * eps_abs
            && self.structure_gap <= 10.0 * eps_abs
    }
}

/// Combines per-worker sums with the coordinator's own terms.
#[allow(clippy::too_many_arguments)]
pub fn check_convergence(
    parts: &[ResidualParts],
    g: &StructureOp,
    theta: &DVector<f64>,
    e: &DVector<f64>,
    beta_new: &DVector<f64>,
    beta_old: &DVector<f64>,
    n: usize,
    mu: f64,
    eps_abs: f64,
    eps_rel: f64,
) -> Residuals {
    let k = parts.len() as f64;
    let p = beta_new.len();
    let m = theta.len();
    let g_beta = g.apply(beta_new);
    let theta_gap = theta - &g_beta;
    let sum = |f: fn(&ResidualParts) -> f64| parts.iter().map(f).sum::<f64>();

    let primal = (sum(|r| r.loss_gap_sq) + sum(|r| r.consensus_gap_sq) + theta_gap.norm_squared()).sqrt();
    let a_side = (sum(|r| r.a_side_sq) + theta.norm_squared()).sqrt();
    let bc_side = (sum(|r| r.bc_side_sq) + k * beta_new.norm_squared() + g_beta.norm_squared()).sqrt();
    let dim_primal = (n + parts.len() * p + m) as f64;
    let eps_primal = dim_primal.sqrt() * eps_abs + eps_rel * a_side.max(bc_side).max((n as f64).sqrt());

    let dbeta = beta_new - beta_old;
    let dual = mu * (sum(|r| r.xi_change_sq) + k * dbeta.norm_squared() + g.apply(&dbeta).norm_squared()).sqrt();
    let dim_dual = (parts.len() * p + m) as f64;
    let eps_dual = dim_dual.sqrt() * eps_abs + eps_rel * (sum(|r| r.dual_sq) + e.norm_squared()).sqrt();

    Residuals {
        primal,
        dual,
        eps_primal,
        eps_dual,
        consensus_gap: parts.iter().map(|r| r.consensus_gap_inf).fold(0.0, f64::max),
        structure_gap: theta_gap.amax(),
    }
}

/// What [`fit_traced`] records besides the result.
#[derive(Clone, Copy, Debug, Default)]
pub struct TraceOptions {
    pub thresholds: bool,
    pub snapshots: bool,
}

/// One coordinate of one coefficient step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdRecord {
    pub iteration: usize,
    pub phase: Phase,
    pub coord: usize,
    /// `|beta_j|` of the iterate the weight was computed from.
    pub abs_beta: f64,
    pub weight: f64,
    pub threshold: f64,
    pub input: f64,
    pub output: f64,
}

/// Iterate `(xi, beta, beta0, b, d, e)` taken after the dual steps of an
/// iteration and before its corrections.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub xi: Vec<DVector<f64>>,
    pub beta: DVector<f64>,
    pub beta0: f64,
    pub b: Vec<DVector<f64>>,
    pub d: Vec<DVector<f64>>,
    pub e: DVector<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct FitTrace {
    /// Phase label of every iteration, in order.
    pub phases: Vec<Phase>,
    pub thresholds: Vec<ThresholdRecord>,
    pub snapshots: Vec<Snapshot>,
    pub strategies: Vec<SolveStrategy>,
}

/// Shards the dataset with the configured seed and trains.
pub fn train(data: &Dataset, config: &ModelConfig) -> Result<FitResult> {
    config.validate()?;
    data.check_trainable()?;
    let shards = shard(data, config.workers, config.seed)?;
    fit(&shards, config)
}

pub fn fit(shards: &[DataShard], config: &ModelConfig) -> Result<FitResult> {
    fit_traced(shards, config, TraceOptions::default()).map(|(r, _)| r)
}

pub fn fit_traced(shards: &[DataShard], config: &ModelConfig, opts: TraceOptions) -> Result<(FitResult, FitTrace)> {
    config.validate()?;
    let start = Instant::now();
    let mut engine = Engine::new(shards, config, opts)?;
    let mut phase_iterations = Vec::new();

    let (iters, mut converged) = engine.run_phase(Phase::L1)?;
    phase_iterations.push((Phase::L1, iters));
    if !config.sparse.is_convex() {
        let (iters, ok) = engine.run_phase(Phase::Reweighted)?;
        phase_iterations.push((Phase::Reweighted, iters));
        converged = ok;
    }
    let result = engine.finish(phase_iterations, converged, start.elapsed().as_secs_f64());
    Ok((result, engine.trace))
}

struct Engine<'a> {
    config: &'a ModelConfig,
    workers: Vec<WorkerState<'a>>,
    pool: Option<ThreadPool>,
    g: StructureOp,
    n: usize,
    beta: DVector<f64>,
    beta0: f64,
    theta: DVector<f64>,
    e: DVector<f64>,
    beta_tilde: DVector<f64>,
    beta0_tilde: f64,
    mu: f64,
    t: usize,
    last: Residuals,
    primal_trace: Vec<f64>,
    dual_trace: Vec<f64>,
    mu_trace: Vec<f64>,
    opts: TraceOptions,
    trace: FitTrace,
}

impl<'a> Engine<'a> {
    fn new(shards: &'a [DataShard], config: &'a ModelConfig, opts: TraceOptions) -> Result<Self> {
        if shards.len() != config.workers {
            return Err(CrsvmError::Config(format!(
                "config asks for {} workers but {} shards were given",
                config.workers,
                shards.len()
            )));
        }
        let p = shards[0].p();
        if let Some(s) = shards.iter().find(|s| s.p() != p) {
            return Err(CrsvmError::Shape(format!("shard {} has {} features, expected {p}", s.id(), s.p())));
        }
        for (k, s) in shards.iter().enumerate() {
            if s.id() != k {
                return Err(CrsvmError::Protocol(format!("shard at position {k} carries id {}", s.id())));
            }
        }
        let n: usize = shards.iter().map(DataShard::n_rows).sum();
        let pos: usize = shards.iter().map(|s| s.y().iter().filter(|&&v| v > 0.0).count()).sum();
        if pos == 0 || pos == n {
            return Err(CrsvmError::InvalidArgument(format!(
                "training data needs both classes (got {pos} positive, {} negative)",
                n - pos
            )));
        }
        let g = build_structure_matrix(&config.structure, p)?;
        let workers = shards
            .iter()
            .map(|s| WorkerState::new(s, n, config.strategy))
            .collect::<Result<Vec<_>>>()?;
        let threads = config.threads.unwrap_or_else(|| {
            let cores = std::thread::available_parallelism().map(usize::from).unwrap_or(1);
            config.workers.min(cores)
        });
        let pool = if threads > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build()
                    .map_err(|e| CrsvmError::Config(format!("thread pool: {e}")))?,
            )
        } else {
            None
        };
        let m = g.output_dim();
        let trace = FitTrace {
            strategies: workers.iter().map(WorkerState::strategy).collect(),
            ..FitTrace::default()
        };
        Ok(Engine {
            config,
            workers,
            pool,
            g,
            n,
            beta: DVector::zeros(p),
            beta0: 0.0,
            theta: DVector::zeros(m),
            e: DVector::zeros(m),
            beta_tilde: DVector::zeros(p),
            beta0_tilde: 0.0,
            mu: config.mu0,
            t: 0,
            last: Residuals::default(),
            primal_trace: Vec::new(),
            dual_trace: Vec::new(),
            mu_trace: Vec::new(),
            opts,
            trace,
        })
    }

    fn on_workers<R, F>(&mut self, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(&mut WorkerState<'a>) -> R + Sync + Send,
    {
        match &self.pool {
            Some(pool) => {
                let workers = &mut self.workers;
                pool.install(|| workers.par_iter_mut().map(|w| f(w)).collect())
            }
            None => self.workers.iter_mut().map(f).collect(),
        }
    }

    fn weights(&self, phase: Phase) -> DVector<f64> {
        let l1 = self.config.lambda1;
        match phase {
            Phase::L1 => DVector::from_element(self.beta.len(), l1),
            Phase::Reweighted => self.beta.map(|b| penalty_weight(&self.config.sparse, b.abs(), l1)),
        }
    }

    fn run_phase(&mut self, phase: Phase) -> Result<(usize, bool)> {
        for i in 1..=self.config.max_iter {
            let res = self.iterate(phase)?;
            if res.converged(self.config.eps_abs) {
                return Ok((i, true));
            }
        }
        Ok((self.config.max_iter, false))
    }

    fn iterate(&mut self, phase: Phase) -> Result<Residuals> {
        let cfg = self.config;
        let mu = self.mu;
        let k = self.workers.len();
        let weights = self.weights(phase);

        // Worker proposals.
        let beta = self.beta.clone();
        let beta_tilde_prev = self.beta_tilde.clone();
        let down = Downlink {
            beta: &beta,
            beta0: self.beta0,
            beta_tilde_prev: &beta_tilde_prev,
            beta0_tilde_prev: self.beta0_tilde,
            mu,
        };
        let loss = cfg.loss;
        let ups: Vec<Uplink> = self
            .on_workers(|w| w.propose(&down, &loss))
            .into_iter()
            .collect::<Result<_>>()?;

        // Structure variable and its dual.
        update_theta_e(
            &cfg.structure,
            &self.g,
            &mut self.theta,
            &mut self.e,
            &self.beta,
            &beta_tilde_prev,
            cfg.lambda2,
            mu,
        )?;

        if self.opts.snapshots {
            self.trace.snapshots.push(Snapshot {
                xi: self.workers.iter().map(|w| w.xi.clone()).collect(),
                beta: self.beta.clone(),
                beta0: self.beta0,
                b: self.workers.iter().map(|w| w.b.clone()).collect(),
                d: self.workers.iter().map(|w| w.d.clone()).collect(),
                e: self.e.clone(),
            });
        }

        // Coefficients.
        let p = self.beta.len();
        let mut beta_bar = DVector::zeros(p);
        let mut d_bar = DVector::zeros(p);
        for up in &ups {
            beta_bar += &up.beta_k;
            d_bar += &up.d_k;
        }
        beta_bar /= k as f64;
        d_bar /= k as f64;
        let prop = propose_beta(&self.g, &self.beta, &beta_bar, &d_bar, &self.theta, &self.e, &weights, mu, k);
        if self.opts.thresholds {
            for j in 0..p {
                self.trace.thresholds.push(ThresholdRecord {
                    iteration: self.t,
                    phase,
                    coord: j,
                    abs_beta: self.beta[j].abs(),
                    weight: weights[j],
                    threshold: prop.thresholds[j],
                    input: prop.input[j],
                    output: prop.beta_tilde[j],
                });
            }
        }
        let beta_old = std::mem::replace(&mut self.beta, DVector::zeros(0));
        self.beta = &beta_old * (1.0 - cfg.nu) + &prop.beta_tilde * cfg.nu;
        self.beta_tilde = prop.beta_tilde;

        // Intercept.
        let contributions: Vec<(usize, f64)> = ups.iter().map(|u| (u.worker, u.c_k)).collect();
        let beta0_old = self.beta0;
        let (beta0_tilde, beta0_new) = update_beta0(&contributions, beta0_old, cfg.nu, k)?;
        self.beta0_tilde = beta0_tilde;
        self.beta0 = beta0_new;

        if !self.beta.iter().all(|v| v.is_finite()) || !self.beta0.is_finite() {
            return Err(CrsvmError::Divergence {
                iteration: self.t,
                detail: format!("coefficients became non-finite (mu = {mu})"),
            });
        }

        // Worker corrections.
        let nu = cfg.nu;
        let beta_new = self.beta.clone();
        let parts = self.on_workers(|w| w.correct(nu, beta0_old, beta0_tilde, &beta_new, beta0_new));

        let res = check_convergence(
            &parts,
            &self.g,
            &self.theta,
            &self.e,
            &self.beta,
            &beta_old,
            self.n,
            mu,
            cfg.eps_abs,
            cfg.eps_rel,
        );
        if !(res.primal.is_finite() && res.dual.is_finite()) {
            return Err(CrsvmError::Divergence {
                iteration: self.t,
                detail: "residuals became non-finite".into(),
            });
        }
        self.primal_trace.push(res.primal);
        self.dual_trace.push(res.dual);
        self.mu_trace.push(mu);
        self.trace.phases.push(phase);
        self.last = res;
        self.t += 1;
        self.mu = adapt_mu(mu, res.primal, res.dual, self.t, cfg.mu_freeze, cfg.adaptive_mu)
            .clamp(cfg.mu0 / MU_SPAN, cfg.mu0 * MU_SPAN);
        Ok(res)
    }

    fn finish(&mut self, phase_iterations: Vec<(Phase, usize)>, converged: bool, elapsed_secs: f64) -> FitResult {
        let beta = self.beta_tilde.clone();
        let support = beta.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, _)| j).collect();
        let group_norms = match &self.config.structure {
            StructurePenaltyKind::Group { partition } => Some(partition.group_norms(beta.as_slice())),
            _ => None,
        };
        FitResult {
            beta,
            beta0: self.beta0,
            support,
            group_norms,
            iterations: self.t,
            phase_iterations,
            converged,
            elapsed_secs,
            primal_trace: std::mem::take(&mut self.primal_trace),
            dual_trace: std::mem::take(&mut self.dual_trace),
            mu_trace: std::mem::take(&mut self.mu_trace),
            final_mu: self.mu,
            consensus_gap: self.last.consensus_gap,
            structure_gap: self.last.structure_gap,
            config: self.config.clone(),
        }
    }
}

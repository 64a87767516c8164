//! One local machine: the reordered dual updates, the `beta_k` linear solve,
//! the loss proximal step and the intercept contribution.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::data::DataShard;
use crate::error::{CrsvmError, Result};
use crate::penalty::{prox_loss, LossKind};

/// Largest dimension for which a dense factorisation is cached.
pub const DENSE_LIMIT: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolveStrategy {
    /// Cholesky factor of `X^T X + I` (p x p).
    DirectInverse,
    /// Cholesky factor of `I + X X^T` (n_k x n_k) applied through the Woodbury identity.
    Woodbury,
    ConjugateGradient { tol: f64, max_iter: usize },
}

impl SolveStrategy {
    pub fn auto(n_k: usize, p: usize) -> Self {
        if p <= n_k && p <= DENSE_LIMIT {
            SolveStrategy::DirectInverse
        } else if n_k < p && n_k <= DENSE_LIMIT {
            SolveStrategy::Woodbury
        } else {
            SolveStrategy::cg_default(p)
        }
    }

    pub fn cg_default(p: usize) -> Self {
        SolveStrategy::ConjugateGradient {
            tol: 1e-10,
            max_iter: 10 * p.max(1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SolveStrategy::ConjugateGradient { tol, max_iter } if !(tol > 0.0) || max_iter == 0 => {
                Err(CrsvmError::InvalidArgument(format!(
                    "conjugate gradient needs tol > 0 and max_iter > 0 (tol = {tol}, max_iter = {max_iter})"
                )))
            }
            _ => Ok(()),
        }
    }
}

enum Factor {
    Direct(Cholesky<f64, Dyn>),
    Woodbury(Cholesky<f64, Dyn>),
    Cg { tol: f64, max_iter: usize },
}

/// Solver for `(X^T X + I) x = r` with a factorisation built once per shard.
pub struct BetaSolver {
    strategy: SolveStrategy,
    factor: Factor,
}

impl BetaSolver {
    pub fn new(xbar: &DMatrix<f64>, strategy: SolveStrategy) -> Result<Self> {
        strategy.validate()?;
        let not_pd = || CrsvmError::SolverFailure {
            residual: f64::NAN,
            iterations: 0,
        };
        let factor = match strategy {
            SolveStrategy::DirectInverse => {
                let mut gram = xbar.tr_mul(xbar);
                for i in 0..gram.nrows() {
                    gram[(i, i)] += 1.0;
                }
                Factor::Direct(Cholesky::new(gram).ok_or_else(not_pd)?)
            }
            SolveStrategy::Woodbury => {
                let mut outer = xbar * xbar.transpose();
                for i in 0..outer.nrows() {
                    outer[(i, i)] += 1.0;
                }
                Factor::Woodbury(Cholesky::new(outer).ok_or_else(not_pd)?)
            }
            SolveStrategy::ConjugateGradient { tol, max_iter } => Factor::Cg { tol, max_iter },
        };
        Ok(BetaSolver { strategy, factor })
    }

    pub fn strategy(&self) -> SolveStrategy {
        self.strategy
    }

    /// `warm` seeds the iterative solver and is ignored by the direct ones.
    pub fn solve(&self, xbar: &DMatrix<f64>, rhs: &DVector<f64>, warm: &DVector<f64>) -> Result<DVector<f64>> {
        match &self.factor {
            Factor::Direct(chol) => Ok(chol.solve(rhs)),
            Factor::Woodbury(chol) => {
                let inner = chol.solve(&(xbar * rhs));
                Ok(rhs - xbar.tr_mul(&inner))
            }
            Factor::Cg { tol, max_iter } => conjugate_gradient(xbar, rhs, warm, *tol, *max_iter),
        }
    }
}

fn conjugate_gradient(
    xbar: &DMatrix<f64>,
    rhs: &DVector<f64>,
    warm: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<DVector<f64>> {
    let apply = |v: &DVector<f64>| xbar.tr_mul(&(xbar * v)) + v;
    let target = tol * rhs.norm().max(f64::MIN_POSITIVE);
    let mut x = warm.clone();
    let mut r = rhs - apply(&x);
    let mut rr = r.norm_squared();
    if rr.sqrt() <= target {
        return Ok(x);
    }
    let mut d = r.clone();
    for it in 1..=max_iter {
        let ad = apply(&d);
        let alpha = rr / d.dot(&ad);
        x.axpy(alpha, &d, 1.0);
        r.axpy(-alpha, &ad, 1.0);
        let rr_next = r.norm_squared();
        if rr_next.sqrt() <= target {
            return Ok(x);
        }
        if !rr_next.is_finite() {
            return Err(CrsvmError::SolverFailure {
                residual: rr_next.sqrt(),
                iterations: it,
            });
        }
        d = &r + &d * (rr_next / rr);
        rr = rr_next;
    }
    Err(CrsvmError::SolverFailure {
        residual: rr.sqrt(),
        iterations: max_iter,
    })
}

/// Values the coordinator sends before a worker round.
#[derive(Clone, Debug)]
pub struct Downlink<'a> {
    pub beta: &'a DVector<f64>,
    pub beta0: f64,
    pub beta_tilde_prev: &'a DVector<f64>,
    pub beta0_tilde_prev: f64,
    pub mu: f64,
}

/// What a worker sends back after its proposal round.
#[derive(Clone, Debug)]
pub struct Uplink {
    pub worker: usize,
    pub beta_k: DVector<f64>,
    pub d_k: DVector<f64>,
    pub c_k: f64,
}

/// Per-worker sums needed by the stopping rule after the correction round.
#[derive(Clone, Copy, Debug, Default)]
pub struct ResidualParts {
    /// `|xi_k - 1 + Xbar_k beta_k + y_k beta0|^2`
    pub loss_gap_sq: f64,
    /// `|beta_k - beta|^2`
    pub consensus_gap_sq: f64,
    /// `max_j |beta_k - beta|_j`
    pub consensus_gap_inf: f64,
    /// `|delta xi_k + y_k delta beta0|^2`
    pub xi_change_sq: f64,
    /// `|Xbar_k beta_k|^2 + |beta_k|^2`
    pub a_side_sq: f64,
    /// `|xi_k + y_k beta0|^2`
    pub bc_side_sq: f64,
    /// `|b_k|^2 + |d_k|^2`
    pub dual_sq: f64,
}

pub struct WorkerState<'a> {
    shard: &'a DataShard,
    solver: BetaSolver,
    n_total: usize,
    pub beta_k: DVector<f64>,
    pub xi: DVector<f64>,
    pub b: DVector<f64>,
    pub d: DVector<f64>,
    /// Uncorrected proximal proposal from the latest round; lagged into the next dual update.
    pub xi_tilde: DVector<f64>,
    xbeta: DVector<f64>,
    matvecs: usize,
}

impl<'a> WorkerState<'a> {
    pub fn new(shard: &'a DataShard, n_total: usize, strategy: Option<SolveStrategy>) -> Result<Self> {
        let (nk, p) = (shard.n_rows(), shard.p());
        if nk == 0 {
            return Err(CrsvmError::InvalidArgument(format!(
                "shard {} has no rows",
                shard.id()
            )));
        }
        let strategy = strategy.unwrap_or_else(|| SolveStrategy::auto(nk, p));
        Ok(WorkerState {
            shard,
            solver: BetaSolver::new(shard.xbar(), strategy)?,
            n_total,
            beta_k: DVector::zeros(p),
            xi: DVector::zeros(nk),
            b: DVector::zeros(nk),
            d: DVector::zeros(p),
            xi_tilde: DVector::zeros(nk),
            xbeta: DVector::zeros(nk),
            matvecs: 0,
        })
    }

    pub fn id(&self) -> usize {
        self.shard.id()
    }

    pub fn shard(&self) -> &DataShard {
        self.shard
    }

    pub fn strategy(&self) -> SolveStrategy {
        self.solver.strategy()
    }

    /// Number of `Xbar_k v` products formed so far.
    pub fn matvec_count(&self) -> usize {
        self.matvecs
    }

    /// `Xbar_k beta_k` for the current `beta_k`.
    pub fn xbeta(&self) -> &DVector<f64> {
        &self.xbeta
    }

    /// Dual steps using the lagged proposals from the previous round.
    pub fn update_duals(&mut self, beta_tilde_prev: &DVector<f64>, beta0_tilde_prev: f64, mu: f64) {
        let y = self.shard.y();
        for i in 0..self.b.len() {
            let r = self.xi_tilde[i] - 1.0 + self.xbeta[i] + y[i] * beta0_tilde_prev;
            self.b[i] -= mu * r;
        }
        self.d.axpy(-mu, &self.beta_k, 1.0);
        self.d.axpy(mu, beta_tilde_prev, 1.0);
    }

    pub fn solve_beta_k(&mut self, beta: &DVector<f64>, beta0: f64, mu: f64) -> Result<()> {
        let y = self.shard.y();
        let xbar = self.shard.xbar();
        let local = DVector::from_fn(self.xi.len(), |i, _| {
            -self.xi[i] + 1.0 - y[i] * beta0 + self.b[i] / mu
        });
        let mut rhs = xbar.tr_mul(&local);
        rhs += beta;
        rhs.axpy(1.0 / mu, &self.d, 1.0);
        self.beta_k = self.solver.solve(xbar, &rhs, &self.beta_k)?;
        self.xbeta = xbar * &self.beta_k;
        self.matvecs += 1;
        Ok(())
    }

    /// Proximal proposal for `xi_k`, stored in `xi_tilde`.
    pub fn propose_xi(&mut self, beta0: f64, mu: f64, loss: &LossKind) {
        let y = self.shard.y();
        let n_mu = self.n_total as f64 * mu;
        for i in 0..self.xi_tilde.len() {
            let zeta = 1.0 - self.xbeta[i] - y[i] * beta0 + self.b[i] / mu;
            self.xi_tilde[i] = prox_loss(loss, zeta, n_mu);
        }
    }

    /// This shard's share of the intercept proposal.
    pub fn compute_ck(&self, mu: f64) -> f64 {
        let y = self.shard.y();
        let s: f64 = (0..y.len())
            .map(|i| y[i] * (-self.xi_tilde[i] + 1.0 - self.xbeta[i] + self.b[i] / mu))
            .sum();
        s / self.n_total as f64
    }

    /// Full proposal round.
    pub fn propose(&mut self, down: &Downlink<'_>, loss: &LossKind) -> Result<Uplink> {
        self.update_duals(down.beta_tilde_prev, down.beta0_tilde_prev, down.mu);
        self.solve_beta_k(down.beta, down.beta0, down.mu)?;
        self.propose_xi(down.beta0, down.mu, loss);
        Ok(Uplink {
            worker: self.id(),
            beta_k: self.beta_k.clone(),
            d_k: self.d.clone(),
            c_k: self.compute_ck(down.mu),
        })
    }

    /// Back-substitution correction of `xi_k` once the intercept proposal is known.
    pub fn correct_xi(&mut self, nu: f64, beta0_old: f64, beta0_tilde: f64) {
        let y = self.shard.y();
        let shift = nu * (beta0_old - beta0_tilde);
        for i in 0..self.xi.len() {
            self.xi[i] = (1.0 - nu) * self.xi[i] + nu * self.xi_tilde[i] + shift * y[i];
        }
    }

    /// Correction round followed by the residual sums against the new global iterate.
    pub fn correct(
        &mut self,
        nu: f64,
        beta0_old: f64,
        beta0_tilde: f64,
        beta_new: &DVector<f64>,
        beta0_new: f64,
    ) -> ResidualParts {
        let xi_old = self.xi.clone();
        self.correct_xi(nu, beta0_old, beta0_tilde);
        let y = self.shard.y();
        let dbeta0 = beta0_new - beta0_old;
        let mut parts = ResidualParts::default();
        for i in 0..self.xi.len() {
            let gap = self.xi[i] - 1.0 + self.xbeta[i] + y[i] * beta0_new;
            parts.loss_gap_sq += gap * gap;
            let change = self.xi[i] - xi_old[i] + y[i] * dbeta0;
            parts.xi_change_sq += change * change;
            parts.a_side_sq += self.xbeta[i] * self.xbeta[i];
            let other = self.xi[i] + y[i] * beta0_new;
            parts.bc_side_sq += other * other;
        }
        for j in 0..self.beta_k.len() {
            let g = self.beta_k[j] - beta_new[j];
            parts.consensus_gap_sq += g * g;
            parts.consensus_gap_inf = parts.consensus_gap_inf.max(g.abs());
            parts.a_side_sq += self.beta_k[j] * self.beta_k[j];
        }
        parts.dual_sq = self.b.norm_squared() + self.d.norm_squared();
        parts
    }
}

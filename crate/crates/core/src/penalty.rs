//! Proximal operators, penalty derivatives and the implicit structure matrix.
//!
//! Loss scalings are chosen so every closed form below is the exact proximal
//! map of `(1/n) L(xi) + (mu/2) (xi - zeta)^2`:
//!
//! | loss               | `L(r)`                                                         |
//! |--------------------|----------------------------------------------------------------|
//! | hinge              | `max(r, 0)`                                                    |
//! | least squares      | `r^2`                                                          |
//! | squared hinge      | `max(r, 0)^2 / 2`                                              |
//! | huberized hinge    | `0`, `r^2/(2d)` on `(0, d]`, `r - d/2` above                  |
//! | pinball            | `r` for `r >= 0`, `-tau r` below                               |
//! | huberized pinball  | huberized hinge on the right, `tau`-scaled mirror on the left |

use std::ops::Range;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{CrsvmError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    Hinge,
    LeastSquares,
    SquareHinge,
    HuberizedHinge { delta: f64 },
    Pinball { tau: f64 },
    HuberizedPinball { tau: f64, delta: f64 },
}

impl LossKind {
    pub fn validate(&self) -> Result<()> {
        let bad_tau = |tau: f64| !(tau > 0.0 && tau <= 1.0);
        let bad_delta = |delta: f64| !(delta > 0.0 && delta.is_finite());
        match *self {
            LossKind::Pinball { tau } if bad_tau(tau) => Err(CrsvmError::InvalidArgument(format!(
                "pinball tau must lie in (0, 1], got {tau}"
            ))),
            LossKind::HuberizedHinge { delta } if bad_delta(delta) => Err(
                CrsvmError::InvalidArgument(format!("huberized delta must be > 0, got {delta}")),
            ),
            LossKind::HuberizedPinball { tau, delta } => {
                if bad_tau(tau) {
                    Err(CrsvmError::InvalidArgument(format!(
                        "pinball tau must lie in (0, 1], got {tau}"
                    )))
                } else if bad_delta(delta) {
                    Err(CrsvmError::InvalidArgument(format!(
                        "huberized delta must be > 0, got {delta}"
                    )))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Short name used on the command line and in reports.
    pub fn short_name(&self) -> &'static str {
        match self {
            LossKind::Hinge => "hinge",
            LossKind::LeastSquares => "ls",
            LossKind::SquareHinge => "sqhinge",
            LossKind::HuberizedHinge { .. } => "hhinge",
            LossKind::Pinball { .. } => "pinball",
            LossKind::HuberizedPinball { .. } => "hpinball",
        }
    }

    /// Builds a loss from its short name; `tau` and `delta` are only read by
    /// the kinds that carry them.
    pub fn from_name(name: &str, tau: f64, delta: f64) -> Result<Self> {
        let kind = match name {
            "hinge" => LossKind::Hinge,
            "ls" | "least-squares" => LossKind::LeastSquares,
            "sqhinge" => LossKind::SquareHinge,
            "hhinge" => LossKind::HuberizedHinge { delta },
            "pinball" => LossKind::Pinball { tau },
            "hpinball" => LossKind::HuberizedPinball { tau, delta },
            other => {
                return Err(CrsvmError::InvalidArgument(format!("unknown loss '{other}'")));
            }
        };
        kind.validate()?;
        Ok(kind)
    }

    /// Loss value `L(r)` on the margin residual `r = 1 - y (x^T beta + beta0)`.
    pub fn value(&self, r: f64) -> f64 {
        match *self {
            LossKind::Hinge => r.max(0.0),
            LossKind::LeastSquares => r * r,
            LossKind::SquareHinge => 0.5 * r.max(0.0).powi(2),
            LossKind::HuberizedHinge { delta } => huber_right(r, delta),
            LossKind::Pinball { tau } => {
                if r >= 0.0 {
                    r
                } else {
                    -tau * r
                }
            }
            LossKind::HuberizedPinball { tau, delta } => {
                if r >= 0.0 {
                    huber_right(r, delta)
                } else {
                    tau * huber_right(-r, delta)
                }
            }
        }
    }
}

fn huber_right(r: f64, delta: f64) -> f64 {
    if r <= 0.0 {
        0.0
    } else if r <= delta {
        r * r / (2.0 * delta)
    } else {
        r - 0.5 * delta
    }
}

/// Closed-form minimiser of `(1/n) L(xi) + (mu/2) (xi - zeta)^2`, written in
/// terms of `n_mu = n * mu`.
pub fn prox_loss(kind: &LossKind, zeta: f64, n_mu: f64) -> f64 {
    let c = 1.0 / n_mu;
    match *kind {
        LossKind::Hinge => (zeta - c).max(zeta.min(0.0)),
        LossKind::LeastSquares => n_mu * zeta / (n_mu + 2.0),
        LossKind::SquareHinge => {
            if zeta >= 0.0 {
                n_mu * zeta / (n_mu + 1.0)
            } else {
                zeta
            }
        }
        LossKind::HuberizedHinge { delta } => {
            let damped = n_mu * delta * zeta / (1.0 + n_mu * delta);
            (zeta - c).max(zeta.min(damped))
        }
        LossKind::Pinball { tau } => (zeta - c).max((zeta + tau * c).min(0.0)),
        LossKind::HuberizedPinball { tau, delta } => {
            if zeta > delta + c {
                zeta - c
            } else if zeta >= 0.0 {
                n_mu * delta * zeta / (n_mu * delta + 1.0)
            } else if zeta >= -delta - tau * c {
                n_mu * delta * zeta / (n_mu * delta + tau)
            } else {
                zeta + tau * c
            }
        }
    }
}

/// `sign(v) * max(|v| - kappa, 0)` without argument checks.
#[inline]
pub fn shrink(v: f64, kappa: f64) -> f64 {
    if v > kappa {
        v - kappa
    } else if v < -kappa {
        v + kappa
    } else {
        0.0
    }
}

pub fn soft_threshold(v: f64, kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    Ok(shrink(v, kappa))
}

pub fn soft_threshold_vec(v: &DVector<f64>, kappa: f64) -> Result<DVector<f64>> {
    check_kappa(kappa)?;
    Ok(v.map(|x| shrink(x, kappa)))
}

/// Block shrinkage `(x / |x|) * max(|x| - kappa, 0)`; the zero vector maps to zero.
pub fn group_soft_threshold(x: &[f64], kappa: f64) -> Result<Vec<f64>> {
    check_kappa(kappa)?;
    let mut out = x.to_vec();
    block_shrink_in_place(&mut out, kappa);
    Ok(out)
}

fn block_shrink_in_place(x: &mut [f64], kappa: f64) {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= kappa || norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
    } else {
        let scale = 1.0 - kappa / norm;
        x.iter_mut().for_each(|v| *v *= scale);
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa >= 0.0 {
        Ok(())
    } else {
        Err(CrsvmError::InvalidArgument(format!(
            "threshold must be non-negative, got {kappa}"
        )))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SparsePenaltyKind {
    L1,
    Scad { a: f64 },
    Mcp { a: f64 },
}

impl SparsePenaltyKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SparsePenaltyKind::Scad { a } if !(a > 2.0) => Err(CrsvmError::InvalidArgument(
                format!("SCAD requires a > 2, got {a}"),
            )),
            SparsePenaltyKind::Mcp { a } if !(a > 0.0) => Err(CrsvmError::InvalidArgument(
                format!("MCP requires a > 0, got {a}"),
            )),
            _ => Ok(()),
        }
    }

    pub fn from_name(name: &str, a: f64) -> Result<Self> {
        let kind = match name {
            "l1" => SparsePenaltyKind::L1,
            "scad" => SparsePenaltyKind::Scad { a },
            "mcp" => SparsePenaltyKind::Mcp { a },
            other => {
                return Err(CrsvmError::InvalidArgument(format!(
                    "unknown sparse penalty '{other}'"
                )))
            }
        };
        kind.validate()?;
        Ok(kind)
    }

    pub fn is_convex(&self) -> bool {
        matches!(self, SparsePenaltyKind::L1)
    }

    /// Penalty value `P(|beta_j|)` for one coordinate.
    pub fn value(&self, abs_beta: f64, lambda1: f64) -> f64 {
        match *self {
            SparsePenaltyKind::L1 => lambda1 * abs_beta,
            SparsePenaltyKind::Scad { a } => {
                if abs_beta <= lambda1 {
                    lambda1 * abs_beta
                } else if abs_beta <= a * lambda1 {
                    (-abs_beta * abs_beta + 2.0 * a * lambda1 * abs_beta - lambda1 * lambda1)
                        / (2.0 * (a - 1.0))
                } else {
                    (a + 1.0) * lambda1 * lambda1 / 2.0
                }
            }
            SparsePenaltyKind::Mcp { a } => {
                if abs_beta <= a * lambda1 {
                    lambda1 * abs_beta - abs_beta * abs_beta / (2.0 * a)
                } else {
                    a * lambda1 * lambda1 / 2.0
                }
            }
        }
    }
}

/// Derivative `P'(|beta_j|)` used as the local linear approximation weight.
pub fn penalty_weight(kind: &SparsePenaltyKind, abs_beta: f64, lambda1: f64) -> f64 {
    match *kind {
        SparsePenaltyKind::L1 => lambda1,
        SparsePenaltyKind::Scad { a } => {
            if abs_beta <= lambda1 {
                lambda1
            } else if abs_beta < a * lambda1 {
                (a * lambda1 - abs_beta) / (a - 1.0)
            } else {
                0.0
            }
        }
        SparsePenaltyKind::Mcp { a } => {
            if abs_beta <= a * lambda1 {
                lambda1 - abs_beta / a
            } else {
                0.0
            }
        }
    }
}

/// Ordered, contiguous tiling of `0..p` into feature groups.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupPartition {
    blocks: Vec<Range<usize>>,
}

impl GroupPartition {
    pub fn new(blocks: Vec<Range<usize>>, p: usize) -> Result<Self> {
        if blocks.is_empty() {
            return Err(CrsvmError::InvalidArgument("partition has no groups".into()));
        }
        let mut next = 0;
        for (m, block) in blocks.iter().enumerate() {
            if block.start != next {
                return Err(CrsvmError::InvalidArgument(format!(
                    "group {m} starts at {} but the previous group ends at {next}",
                    block.start
                )));
            }
            if block.end <= block.start {
                return Err(CrsvmError::InvalidArgument(format!("group {m} is empty")));
            }
            next = block.end;
        }
        if next != p {
            return Err(CrsvmError::InvalidArgument(format!(
                "groups cover 0..{next} but there are {p} features"
            )));
        }
        Ok(GroupPartition { blocks })
    }

    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        let mut blocks = Vec::with_capacity(sizes.len());
        let mut start = 0;
        for &s in sizes {
            blocks.push(start..start + s);
            start += s;
        }
        GroupPartition::new(blocks, start)
    }

    pub fn single(p: usize) -> Result<Self> {
        GroupPartition::new(vec![0..p], p)
    }

    pub fn blocks(&self) -> &[Range<usize>] {
        &self.blocks
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.len()).collect()
    }

    pub fn num_features(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.end)
    }

    pub fn group_norms(&self, beta: &[f64]) -> Vec<f64> {
        self.blocks
            .iter()
            .map(|b| beta[b.clone()].iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StructurePenaltyKind {
    /// Elastic-net ridge term `lambda2 |theta|_2^2`, `G = I`.
    Ridge,
    /// Fused term `lambda2 |theta|_1` on adjacent differences, `G = F`.
    Fusion,
    /// Group term `lambda2 sum_m |theta_(m)|_2`, `G = I`.
    Group { partition: GroupPartition },
}

impl StructurePenaltyKind {
    pub fn short_name(&self) -> &'static str {
        match self {
            StructurePenaltyKind::Ridge => "en",
            StructurePenaltyKind::Fusion => "sfl",
            StructurePenaltyKind::Group { .. } => "sgl",
        }
    }

    /// `P_{lambda2}(theta)` evaluated on `theta = G beta`.
    pub fn value(&self, theta: &[f64], lambda2: f64) -> f64 {
        match self {
            StructurePenaltyKind::Ridge => lambda2 * theta.iter().map(|v| v * v).sum::<f64>(),
            StructurePenaltyKind::Fusion => lambda2 * theta.iter().map(|v| v.abs()).sum::<f64>(),
            StructurePenaltyKind::Group { partition } => {
                lambda2 * partition.group_norms(theta).iter().sum::<f64>()
            }
        }
    }
}

/// The structure matrix `G`, never materialised: identity or the
/// `(p-1) x p` first-difference operator `(F x)_i = x_i - x_{i+1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StructureOp {
    Identity { p: usize },
    Difference { p: usize },
}

pub fn build_structure_matrix(kind: &StructurePenaltyKind, p: usize) -> Result<StructureOp> {
    if p == 0 {
        return Err(CrsvmError::InvalidArgument("p must be positive".into()));
    }
    match kind {
        StructurePenaltyKind::Fusion => {
            if p < 2 {
                Err(CrsvmError::InvalidArgument(
                    "fusion penalty needs at least 2 features".into(),
                ))
            } else {
                Ok(StructureOp::Difference { p })
            }
        }
        StructurePenaltyKind::Group { partition } => {
            if partition.num_features() != p {
                return Err(CrsvmError::Shape(format!(
                    "partition covers {} features, data has {p}",
                    partition.num_features()
                )));
            }
            Ok(StructureOp::Identity { p })
        }
        StructurePenaltyKind::Ridge => Ok(StructureOp::Identity { p }),
    }
}

impl StructureOp {
    pub fn input_dim(&self) -> usize {
        match *self {
            StructureOp::Identity { p } | StructureOp::Difference { p } => p,
        }
    }

    pub fn output_dim(&self) -> usize {
        match *self {
            StructureOp::Identity { p } => p,
            StructureOp::Difference { p } => p - 1,
        }
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        match *self {
            StructureOp::Identity { .. } => x.clone(),
            StructureOp::Difference { p } => DVector::from_fn(p - 1, |i, _| x[i] - x[i + 1]),
        }
    }

    pub fn apply_transpose(&self, y: &DVector<f64>) -> DVector<f64> {
        match *self {
            StructureOp::Identity { .. } => y.clone(),
            StructureOp::Difference { p } => DVector::from_fn(p, |j, _| {
                let own = if j < p - 1 { y[j] } else { 0.0 };
                let prev = if j > 0 { y[j - 1] } else { 0.0 };
                own - prev
            }),
        }
    }

    /// `G^T G x`.
    pub fn gram_apply(&self, x: &DVector<f64>) -> DVector<f64> {
        self.apply_transpose(&self.apply(x))
    }
}

/// Linearisation constant for the fused beta step.
pub fn eta_for(workers: usize) -> f64 {
    workers as f64 + 4.01
}

/// Closed-form theta update: the prox of the structure penalty at `u = G beta + e / mu`.
pub fn theta_update(
    kind: &StructurePenaltyKind,
    u: &DVector<f64>,
    lambda2: f64,
    mu: f64,
) -> Result<DVector<f64>> {
    if !(mu > 0.0) || !(lambda2 >= 0.0) {
        return Err(CrsvmError::InvalidArgument(format!(
            "theta update needs mu > 0 and lambda2 >= 0 (mu = {mu}, lambda2 = {lambda2})"
        )));
    }
    match kind {
        StructurePenaltyKind::Ridge => Ok(u * (mu / (2.0 * lambda2 + mu))),
        StructurePenaltyKind::Fusion => soft_threshold_vec(u, lambda2 / mu),
        StructurePenaltyKind::Group { partition } => {
            if partition.num_features() != u.len() {
                return Err(CrsvmError::Shape(format!(
                    "theta input has length {} but the partition covers {}",
                    u.len(),
                    partition.num_features()
                )));
            }
            let mut out = u.clone();
            let kappa = lambda2 / mu;
            for block in partition.blocks() {
                block_shrink_in_place(&mut out.as_mut_slice()[block.clone()], kappa);
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(3.0, 1.0).unwrap(), 2.0);
        assert_eq!(soft_threshold(0.5, 1.0).unwrap(), 0.0);
        assert_eq!(soft_threshold(-2.5, 1.0).unwrap(), -1.5);
        assert!(matches!(
            soft_threshold(1.0, -0.1),
            Err(CrsvmError::InvalidArgument(_))
        ));
    }

    #[test]
    fn group_soft_threshold_examples() {
        let out = group_soft_threshold(&[3.0, 4.0], 1.0).unwrap();
        assert!(close(out[0], 2.4, 1e-15) && close(out[1], 3.2, 1e-15));
        assert_eq!(group_soft_threshold(&[3.0, 4.0], 6.0).unwrap(), vec![0.0, 0.0]);
        assert_eq!(group_soft_threshold(&[0.0, 0.0], 1.0).unwrap(), vec![0.0, 0.0]);
        assert!(group_soft_threshold(&[1.0], -1.0).is_err());
    }

    #[test]
    fn theta_update_examples() {
        let ridge = theta_update(
            &StructurePenaltyKind::Ridge,
            &DVector::from_vec(vec![3.0]),
            1.0,
            1.0,
        )
        .unwrap();
        assert!(close(ridge[0], 1.0, 1e-15));

        let fused = theta_update(
            &StructurePenaltyKind::Fusion,
            &DVector::from_vec(vec![2.0, -0.3]),
            1.0,
            2.0,
        )
        .unwrap();
        assert_eq!(fused.as_slice(), &[1.5, 0.0]);

        let group = StructurePenaltyKind::Group {
            partition: GroupPartition::single(2).unwrap(),
        };
        let g = theta_update(&group, &DVector::from_vec(vec![3.0, 4.0]), 5.0, 1.0).unwrap();
        assert_eq!(g.as_slice(), &[0.0, 0.0]);

        let bad = theta_update(&group, &DVector::from_vec(vec![1.0, 2.0, 3.0]), 1.0, 1.0);
        assert!(matches!(bad, Err(CrsvmError::Shape(_))));
    }

    #[test]
    fn ridge_theta_matches_scalar_minimisation() {
        // lambda2 th^2 + (mu/2)(th - 3)^2 on a fine grid
        let objective = |th: f64| th * th + 0.5 * (th - 3.0).powi(2);
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=400_000 {
            let th = -1.0 + i as f64 * 1e-5;
            let v = objective(th);
            if v < best.0 {
                best = (v, th);
            }
        }
        assert!(close(best.1, 1.0, 1e-5));
    }

    #[test]
    fn prox_loss_examples() {
        assert!(close(prox_loss(&LossKind::Hinge, 2.0, 1.0), 1.0, 1e-15));
        assert!(close(prox_loss(&LossKind::Hinge, -0.5, 1.0), -0.5, 1e-15));
        assert!(close(prox_loss(&LossKind::Pinball { tau: 0.5 }, -0.2, 1.0), 0.0, 1e-15));
        assert!(close(prox_loss(&LossKind::SquareHinge, 1.0, 3.0), 0.75, 1e-15));
        assert!(close(prox_loss(&LossKind::LeastSquares, 2.0, 2.0), 1.0, 1e-15));
    }

    #[test]
    fn huberized_pinball_matches_table_at_unit_delta() {
        // Table 4 row, transcribed, is exact when delta = 1.
        let table = |zeta: f64, n_mu: f64, tau: f64| {
            let d = 1.0;
            if zeta > 0.0 {
                let s = n_mu * d * zeta / (n_mu * d + 1.0);
                let ind = if zeta > 1.0 / n_mu + d { 1.0 } else { 0.0 };
                s + (s - 1.0) * ind / n_mu
            } else {
                let s = n_mu * d * zeta / (n_mu * d + tau);
                let ind = if zeta <= -tau / n_mu - d { 1.0 } else { 0.0 };
                s + tau / n_mu * (s + 1.0) * ind
            }
        };
        for &zeta in &[-4.0, -1.3, -0.2, 0.0, 0.4, 1.7, 3.5] {
            for &n_mu in &[0.5, 1.0, 7.0] {
                let kind = LossKind::HuberizedPinball { tau: 0.5, delta: 1.0 };
                assert!(close(prox_loss(&kind, zeta, n_mu), table(zeta, n_mu, 0.5), 1e-12));
            }
        }
    }

    #[test]
    fn penalty_weight_examples() {
        let scad = SparsePenaltyKind::Scad { a: 3.7 };
        assert_eq!(penalty_weight(&scad, 0.5, 1.0), 1.0);
        assert!(close(penalty_weight(&scad, 2.0, 1.0), 1.7 / 2.7, 1e-15));
        assert_eq!(penalty_weight(&SparsePenaltyKind::Mcp { a: 2.0 }, 3.0, 1.0), 0.0);
        assert_eq!(penalty_weight(&SparsePenaltyKind::L1, 9.0, 0.3), 0.3);
    }

    #[test]
    fn scad_weight_is_derivative_of_value() {
        let scad = SparsePenaltyKind::Scad { a: 3.7 };
        let h = 1e-6;
        let fd = (scad.value(2.0 + h, 1.0) - scad.value(2.0 - h, 1.0)) / (2.0 * h);
        assert!(close(fd, 0.6296296296, 1e-8));
        assert!(close(fd, penalty_weight(&scad, 2.0, 1.0), 1e-8));
    }

    #[test]
    fn penalty_kind_validation() {
        assert!(SparsePenaltyKind::Scad { a: 2.0 }.validate().is_err());
        assert!(SparsePenaltyKind::Mcp { a: 0.0 }.validate().is_err());
        assert!(LossKind::Pinball { tau: 0.0 }.validate().is_err());
        assert!(LossKind::HuberizedHinge { delta: -1.0 }.validate().is_err());
        assert!(LossKind::from_name("nope", 0.5, 1.0).is_err());
    }

    #[test]
    fn structure_matrix_examples() {
        let f = build_structure_matrix(&StructurePenaltyKind::Fusion, 3).unwrap();
        let x = DVector::from_vec(vec![1.0, 2.0, 4.0]);
        assert_eq!(f.apply(&x).as_slice(), &[-1.0, -2.0]);
        let y = DVector::from_vec(vec![1.0, 1.0]);
        assert_eq!(f.apply_transpose(&y).as_slice(), &[1.0, 0.0, -1.0]);

        let id = build_structure_matrix(&StructurePenaltyKind::Ridge, 5).unwrap();
        let x5 = DVector::from_vec(vec![1.0, -2.0, 3.0, 0.5, 9.0]);
        assert_eq!(id.apply(&x5), x5);

        assert!(build_structure_matrix(&StructurePenaltyKind::Fusion, 1).is_err());
    }

    #[test]
    fn eta_examples() {
        assert_eq!(eta_for(5), 9.01);
        assert_eq!(eta_for(1), 5.01);
    }

    #[test]
    fn partition_invariants() {
        assert!(GroupPartition::new(vec![0..2, 3..5], 5).is_err());
        assert!(GroupPartition::new(vec![0..2, 2..2, 2..5], 5).is_err());
        assert!(GroupPartition::new(vec![0..2, 2..4], 5).is_err());
        let g = GroupPartition::from_sizes(&[2, 3]).unwrap();
        assert_eq!(g.sizes(), vec![2, 3]);
        assert_eq!(g.group_norms(&[3.0, 4.0, 0.0, 0.0, 2.0]), vec![5.0, 2.0]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn any_loss() -> impl Strategy<Value = LossKind> {
            (0usize..6, 0.05f64..=1.0, 0.05f64..2.0).prop_map(|(i, tau, delta)| match i {
                0 => LossKind::Hinge,
                1 => LossKind::LeastSquares,
                2 => LossKind::SquareHinge,
                3 => LossKind::HuberizedHinge { delta },
                4 => LossKind::Pinball { tau },
                _ => LossKind::HuberizedPinball { tau, delta },
            })
        }

        proptest! {
            #[test]
            fn soft_threshold_shrinks_toward_zero(v in -1e3f64..1e3, kappa in 0.0f64..10.0) {
                let s = soft_threshold(v, kappa).unwrap();
                prop_assert!(s.abs() <= v.abs());
                prop_assert!(s == 0.0 || s.signum() == v.signum());
                prop_assert!((v - s).abs() <= kappa + 1e-12);
            }

            #[test]
            fn group_threshold_norm(x in prop::collection::vec(-10.0f64..10.0, 1..8), kappa in 0.0f64..5.0) {
                let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
                let out = group_soft_threshold(&x, kappa).unwrap();
                prop_assert!((norm(&out) - (norm(&x) - kappa).max(0.0)).abs() <= 1e-9);
            }

            #[test]
            fn loss_prox_is_monotone_and_nonexpansive(
                kind in any_loss(), a in -5.0f64..5.0, b in -5.0f64..5.0, n_mu in 0.1f64..100.0,
            ) {
                let (pa, pb) = (prox_loss(&kind, a, n_mu), prox_loss(&kind, b, n_mu));
                prop_assert!((pa - pb).abs() <= (a - b).abs() + 1e-12);
                prop_assert!((pa - pb) * (a - b) >= -1e-12);
            }

            #[test]
            fn difference_adjoint(x in prop::collection::vec(-5.0f64..5.0, 2..20), seed in 0u64..1000) {
                let p = x.len();
                let op = StructureOp::Difference { p };
                let y = DVector::from_fn(p - 1, |i, _| ((i as u64 * 7919 + seed) % 13) as f64 - 6.0);
                let x = DVector::from_vec(x);
                prop_assert!((op.apply(&x).dot(&y) - x.dot(&op.apply_transpose(&y))).abs() <= 1e-9);
            }

            #[test]
            fn scad_and_mcp_weights_in_range(t in 0.0f64..10.0, lambda in 0.0f64..2.0, a in 2.1f64..6.0) {
                for kind in [SparsePenaltyKind::Scad { a }, SparsePenaltyKind::Mcp { a }] {
                    let w = penalty_weight(&kind, t, lambda);
                    prop_assert!((0.0..=lambda + 1e-15).contains(&w));
                    // non-increasing in |beta|
                    prop_assert!(penalty_weight(&kind, t + 0.1, lambda) <= w + 1e-15);
                }
            }
        }
    }
}

//! SVM information criterion and grid search over `(lambda1, lambda2, mu0)`.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::coordinator::{train, FitResult, ModelConfig};
use crate::data::Dataset;
use crate::error::{CrsvmError, Result};

/// `ln C(p, s)` via log-gamma.
pub fn ln_binomial(p: usize, s: usize) -> f64 {
    assert!(s <= p, "support {s} exceeds dimension {p}");
    ln_gamma(p as f64 + 1.0) - ln_gamma(s as f64 + 1.0) - ln_gamma((p - s) as f64 + 1.0)
}

/// `slack + s ln n + 2 gamma C(p, s)`, saturating at `f64::MAX`.
pub fn svmic_value(slack: f64, support: usize, n: usize, p: usize, gamma: f64) -> f64 {
    let combinatorial = if gamma == 0.0 {
        0.0
    } else {
        let c = ln_binomial(p, support).exp();
        if c.is_finite() {
            2.0 * gamma * c
        } else {
            f64::MAX
        }
    };
    let total = slack + support as f64 * (n as f64).ln() + combinatorial;
    if total.is_finite() {
        total
    } else {
        f64::MAX
    }
}

/// Sum of hinge slacks `[1 - y (x beta + beta0)]_+` of a fitted model.
pub fn hinge_slack(data: &Dataset, beta: &DVector<f64>, beta0: f64) -> Result<f64> {
    if beta.len() != data.p() {
        return Err(CrsvmError::Shape(format!(
            "model has {} coefficients, data has {} features",
            beta.len(),
            data.p()
        )));
    }
    let scores = data.x() * beta;
    Ok(data
        .y()
        .iter()
        .zip(scores.iter())
        .map(|(y, s)| (1.0 - y * (s + beta0)).max(0.0))
        .sum())
}

pub fn svmic(fit: &FitResult, data: &Dataset, gamma: f64) -> Result<f64> {
    let slack = hinge_slack(data, &fit.beta, fit.beta0)?;
    Ok(svmic_value(slack, fit.support.len(), data.n(), data.p(), gamma))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmicParams {
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    #[serde(default = "default_mu_grid")]
    pub mu0: Vec<f64>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn default_mu_grid() -> Vec<f64> {
    vec![0.01, 0.1, 1.0]
}

fn default_gamma() -> f64 {
    0.5
}

impl SvmicParams {
    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, grid: &[f64], strict: bool| -> Result<()> {
            if grid.is_empty() {
                return Err(CrsvmError::Config(format!("{name} grid is empty")));
            }
            if let Some(v) = grid.iter().find(|v| !v.is_finite() || **v < 0.0 || (strict && **v == 0.0)) {
                return Err(CrsvmError::Config(format!("{name} grid has invalid value {v}")));
            }
            Ok(())
        };
        check("lambda1", &self.lambda1, false)?;
        check("lambda2", &self.lambda2, false)?;
        check("mu0", &self.mu0, true)?;
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(CrsvmError::Config(format!("gamma must lie in [0, 1], got {}", self.gamma)));
        }
        Ok(())
    }
}

fn sorted_grid(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// One evaluated grid point. Indices refer to the ascending, de-duplicated grids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub lambda1: f64,
    pub lambda2: f64,
    pub mu0: f64,
    pub index: (usize, usize, usize),
    pub svmic: Option<f64>,
    pub support: Option<usize>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub error: Option<String>,
}

/// Position of the best successful cell: smallest criterion, then smaller
/// support, then smaller `lambda1`, `lambda2` and `mu0` indices.
pub fn select_best(cells: &[GridCell]) -> Option<usize> {
    let key = |c: &GridCell| (c.svmic.unwrap(), c.support.unwrap(), c.index);
    cells
        .iter()
        .enumerate()
        .filter(|(_, c)| c.svmic.is_some() && c.support.is_some())
        .min_by(|(_, a), (_, b)| {
            let (sa, na, ia) = key(a);
            let (sb, nb, ib) = key(b);
            sa.total_cmp(&sb).then(na.cmp(&nb)).then(ia.cmp(&ib))
        })
        .map(|(i, _)| i)
}

#[derive(Clone, Debug)]
pub struct GridOutcome {
    pub best: GridCell,
    pub config: ModelConfig,
    pub fit: FitResult,
    /// Every cell, ordered by index.
    pub cells: Vec<GridCell>,
}

/// Fits every grid combination (concurrently, one thread per fit) and keeps
/// the SVMIC minimiser.
pub fn grid_search(data: &Dataset, base: &ModelConfig, params: &SvmicParams) -> Result<GridOutcome> {
    params.validate()?;
    let l1 = sorted_grid(&params.lambda1);
    let l2 = sorted_grid(&params.lambda2);
    let mu = sorted_grid(&params.mu0);
    let mut jobs = Vec::with_capacity(l1.len() * l2.len() * mu.len());
    for (i1, &a) in l1.iter().enumerate() {
        for (i2, &b) in l2.iter().enumerate() {
            for (i3, &m) in mu.iter().enumerate() {
                let config = ModelConfig {
                    lambda1: a,
                    lambda2: b,
                    mu0: m,
                    threads: Some(1),
                    ..base.clone()
                };
                jobs.push(((i1, i2, i3), config));
            }
        }
    }
    let results: Vec<(GridCell, Option<FitResult>)> = jobs
        .into_par_iter()
        .map(|(index, config)| {
            let mut cell = GridCell {
                lambda1: config.lambda1,
                lambda2: config.lambda2,
                mu0: config.mu0,
                index,
                svmic: None,
                support: None,
                iterations: None,
                converged: None,
                error: None,
            };
            let outcome = train(data, &config).and_then(|fit| svmic(&fit, data, params.gamma).map(|s| (fit, s)));
            match outcome {
                Ok((fit, s)) => {
                    cell.svmic = Some(s);
                    cell.support = Some(fit.support.len());
                    cell.iterations = Some(fit.iterations);
                    cell.converged = Some(fit.converged);
                    (cell, Some(fit))
                }
                Err(e) => {
                    cell.error = Some(format!("{}: {e}", e.class()));
                    (cell, None)
                }
            }
        })
        .collect();
    let cells: Vec<GridCell> = results.iter().map(|(c, _)| c.clone()).collect();
    let best = select_best(&cells).ok_or_else(|| {
        CrsvmError::GridFailed(
            cells
                .iter()
                .map(|c| {
                    format!(
                        "(lambda1={}, lambda2={}, mu0={}) {}",
                        c.lambda1,
                        c.lambda2,
                        c.mu0,
                        c.error.as_deref().unwrap_or("no result")
                    )
                })
                .collect(),
        )
    })?;
    let (cell, fit) = results.into_iter().nth(best).expect("index from select_best");
    let fit = fit.expect("selected cell has a fit");
    let config = fit.config.clone();
    Ok(GridOutcome {
        best: cell,
        config: ModelConfig {
            threads: base.threads,
            ..config
        },
        fit,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(svmic: f64, support: usize, index: (usize, usize, usize)) -> GridCell {
        GridCell {
            lambda1: index.0 as f64,
            lambda2: index.1 as f64,
            mu0: 1.0,
            index,
            svmic: Some(svmic),
            support: Some(support),
            iterations: Some(1),
            converged: Some(true),
            error: None,
        }
    }

    #[test]
    fn formula_cases() {
        let v = svmic_value(10.0, 3, 100, 5, 0.5);
        // C(5, 3) = 10 exactly; 3 ln 100 evaluated independently
        let expected = 10.0 + 3.0 * 100f64.ln() + 10.0;
        assert!((v - expected).abs() < 1e-9);
        assert!((v - 33.8155).abs() < 1e-3);
        assert_eq!(svmic_value(4.0, 2, 10, 5, 0.0), 4.0 + 2.0 * 10f64.ln());
        assert!((svmic_value(4.0, 0, 10, 5, 0.5) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn binomial_is_log_safe() {
        assert!((ln_binomial(5, 3).exp() - 10.0).abs() < 1e-9);
        let v = svmic_value(1.0, 500_000, 1000, 1_000_000, 0.5);
        assert_eq!(v, f64::MAX);
        assert!(ln_binomial(1_000_000, 500_000).is_finite());
    }

    #[test]
    fn tie_rule() {
        let cells = vec![cell(5.0, 5, (0, 0, 0)), cell(5.0, 3, (1, 0, 0)), cell(6.0, 1, (2, 0, 0))];
        assert_eq!(select_best(&cells), Some(1));
        let ties = vec![cell(5.0, 3, (1, 1, 0)), cell(5.0, 3, (1, 0, 2)), cell(5.0, 3, (2, 0, 0))];
        assert_eq!(select_best(&ties), Some(1));
        let mut failed = cell(0.0, 0, (0, 0, 0));
        failed.svmic = None;
        assert_eq!(select_best(&[failed]), None);
    }

    #[test]
    fn grid_validation() {
        let ok = SvmicParams { lambda1: vec![0.1], lambda2: vec![0.0], mu0: vec![1.0], gamma: 0.5 };
        assert!(ok.validate().is_ok());
        assert!(SvmicParams { lambda1: vec![], ..ok.clone() }.validate().is_err());
        assert!(SvmicParams { mu0: vec![0.0], ..ok.clone() }.validate().is_err());
        assert!(SvmicParams { gamma: 1.5, ..ok }.validate().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn increasing_in_slack(
                a in 0.0f64..1e4, extra in 1e-6f64..1e3, p in 1usize..2000, n in 2usize..10_000, gamma in 0.0f64..=1.0,
                frac in 0.0f64..=1.0,
            ) {
                let s = (frac * p as f64) as usize;
                prop_assert!(svmic_value(a + extra, s, n, p, gamma) >= svmic_value(a, s, n, p, gamma));
            }

            #[test]
            fn log_binomial_is_symmetric_and_finite(p in 0usize..1_000_000, frac in 0.0f64..=1.0) {
                let s = (frac * p as f64) as usize;
                let (x, y) = (ln_binomial(p, s), ln_binomial(p, p - s));
                prop_assert!(x.is_finite());
                prop_assert!((x - y).abs() <= 1e-6 * x.abs().max(1.0));
            }
        }
    }
}

//! Metrics and the synthetic benchmark harness.

use serde::{Deserialize, Serialize};

use crate::coordinator::{accuracy, train, FitResult, ModelConfig};
use crate::data::{generate_synthetic, standardize, SyntheticSpec, SIGNAL_FEATURES};
use crate::error::{CrsvmError, Result};

pub const METRICS_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub final_primal: f64,
    pub final_dual: f64,
    pub min_primal: f64,
    pub converged: bool,
    pub final_mu: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    /// Classification accuracy rate, when labels were available.
    pub car: Option<f64>,
    /// Wall-clock seconds spent in the solver.
    pub ct: f64,
    /// Iterations.
    pub ni: usize,
    /// Selected signal features, synthetic runs only.
    pub ntsf: Option<usize>,
    /// Fraction of zero coefficients.
    pub sparsity: f64,
    pub support_size: usize,
    pub group_norms: Option<Vec<f64>>,
    pub residuals: ResidualSummary,
}

/// Signal coordinates in the support.
pub fn ntsf(support: &[usize]) -> usize {
    support.iter().filter(|&&j| j < SIGNAL_FEATURES).count()
}

impl MetricsReport {
    pub fn from_fit(fit: &FitResult, car: Option<f64>, ntsf: Option<usize>) -> Self {
        let last = |v: &[f64]| v.last().copied().unwrap_or(f64::NAN);
        MetricsReport {
            schema_version: METRICS_SCHEMA_VERSION,
            car,
            ct: fit.elapsed_secs,
            ni: fit.iterations,
            ntsf,
            sparsity: fit.sparsity(),
            support_size: fit.support.len(),
            group_norms: fit.group_norms.clone(),
            residuals: ResidualSummary {
                final_primal: last(&fit.primal_trace),
                final_dual: last(&fit.dual_trace),
                min_primal: fit.primal_trace.iter().copied().fold(f64::INFINITY, f64::min),
                converged: fit.converged,
                final_mu: fit.final_mu,
            },
        }
    }
}

/// A train/test pair drawn from the synthetic design.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRun {
    pub train: SyntheticSpec,
    pub test_n: usize,
    /// Noise fraction of the test draw.
    pub test_alpha: f64,
    pub standardize: bool,
}

impl SyntheticRun {
    /// Test draw uses a seed derived from the training seed.
    pub fn test_spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            n: self.test_n,
            alpha: self.test_alpha,
            seed: self.train.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1),
            ..self.train
        }
    }
}

/// Generates, trains and scores one synthetic run.
pub fn run_synthetic(run: &SyntheticRun, config: &ModelConfig) -> Result<(MetricsReport, FitResult)> {
    let train_data = generate_synthetic(&run.train)?;
    let test = generate_synthetic(&run.test_spec())?;
    let (train_data, test_x) = if run.standardize {
        let (z, scaling) = standardize(&train_data)?;
        let tx = scaling.apply(test.x())?;
        (z, tx)
    } else {
        (train_data, test.x().clone())
    };
    let fit = train(&train_data, config)?;
    let pred = fit.predict(&test_x)?;
    let car = accuracy(&pred.labels, test.y());
    let report = MetricsReport::from_fit(&fit, Some(car), Some(ntsf(&fit.support)));
    Ok((report, fit))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    /// Sample standard deviation; zero for a single value.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return MeanSd { mean: f64::NAN, sd: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        MeanSd { mean, sd }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub workers: usize,
    pub repeats: usize,
    pub ct: MeanSd,
    pub car: MeanSd,
    pub ni: MeanSd,
    pub ntsf: MeanSd,
    pub sparsity: MeanSd,
}

impl BenchRow {
    pub const CSV_HEADER: &'static str = "K,repeats,CT,CT_sd,CAR,CAR_sd,NI,NI_sd,NTSF,NTSF_sd";

    pub fn csv(&self) -> String {
        format!(
            "{},{},{:.4},{:.4},{:.4},{:.4},{:.1},{:.1},{:.2},{:.2}",
            self.workers,
            self.repeats,
            self.ct.mean,
            self.ct.sd,
            self.car.mean,
            self.car.sd,
            self.ni.mean,
            self.ni.sd,
            self.ntsf.mean,
            self.ntsf.sd
        )
    }
}

/// Runs `repeats` seeds for every worker count. Repeat `r` uses training
/// seed `run.train.seed + r` for data, sharding and the config.
pub fn bench(run: &SyntheticRun, base: &ModelConfig, workers: &[usize], repeats: usize) -> Result<Vec<BenchRow>> {
    if repeats == 0 || workers.is_empty() {
        return Err(CrsvmError::InvalidArgument("bench needs at least one repeat and one worker count".into()));
    }
    workers
        .iter()
        .map(|&k| {
            let mut reports = Vec::with_capacity(repeats);
            for r in 0..repeats {
                let seed = run.train.seed + r as u64;
                let this = SyntheticRun {
                    train: SyntheticSpec { seed, ..run.train },
                    ..*run
                };
                let config = ModelConfig { workers: k, seed, ..base.clone() };
                reports.push(run_synthetic(&this, &config)?.0);
            }
            let col = |f: fn(&MetricsReport) -> f64| MeanSd::of(&reports.iter().map(f).collect::<Vec<_>>());
            Ok(BenchRow {
                workers: k,
                repeats,
                ct: col(|m| m.ct),
                car: col(|m| m.car.unwrap_or(f64::NAN)),
                ni: col(|m| m.ni as f64),
                ntsf: col(|m| m.ntsf.map_or(f64::NAN, |v| v as f64)),
                sparsity: col(|m| m.sparsity),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_sd() {
        let m = MeanSd::of(&[1.0, 2.0, 3.0]);
        assert_eq!(m.mean, 2.0);
        assert!((m.sd - 1.0).abs() < 1e-15);
        assert_eq!(MeanSd::of(&[4.0]).sd, 0.0);
    }

    #[test]
    fn ntsf_counts_signal_block() {
        assert_eq!(ntsf(&[0, 3, 9, 10, 55]), 3);
    }

    #[test]
    fn single_bench_row() {
        let run = SyntheticRun {
            train: SyntheticSpec { n: 200, p: 12, rho: 0.0, alpha: 0.0, seed: 4 },
            test_n: 500,
            test_alpha: 0.0,
            standardize: true,
        };
        let cfg = ModelConfig { lambda1: 0.02, max_iter: 500, ..ModelConfig::default() };
        let rows = bench(&run, &cfg, &[1], 1).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].car.mean > 0.9);
        assert_eq!(rows[0].csv().split(',').count(), BenchRow::CSV_HEADER.split(',').count());
    }
}

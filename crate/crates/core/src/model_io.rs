//! Saved-model document: configuration echo, standardisation record,
//! sparse coefficients and training metadata, stored as JSON. Timing is
//! left out so that repeated training writes identical files.
//!
//! Floats are written in shortest round-trip form, so reading a model back
//! reproduces every coefficient bit for bit.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::coordinator::{predict, FitResult, ModelConfig, Prediction};
use crate::data::Scaling;
use crate::error::{CrsvmError, Result};
use crate::penalty::GroupPartition;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub n_train: usize,
    pub iterations: usize,
    pub converged: bool,
    pub final_mu: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub config: ModelConfig,
    pub standardization: Option<Scaling>,
    pub p: usize,
    /// Non-zero coefficients as `(index, value)`.
    pub coefficients: Vec<(usize, f64)>,
    pub intercept: f64,
    pub partition: Option<GroupPartition>,
    pub feature_names: Option<Vec<String>>,
    pub metadata: TrainingMetadata,
}

impl ModelFile {
    pub fn from_fit(
        fit: &FitResult,
        n_train: usize,
        standardization: Option<Scaling>,
        partition: Option<GroupPartition>,
        feature_names: Option<Vec<String>>,
    ) -> Self {
        ModelFile {
            format_version: FORMAT_VERSION,
            config: fit.config.clone(),
            standardization,
            p: fit.beta.len(),
            coefficients: fit.support.iter().map(|&j| (j, fit.beta[j])).collect(),
            intercept: fit.beta0,
            partition,
            feature_names,
            metadata: TrainingMetadata {
                n_train,
                iterations: fit.iterations,
                converged: fit.converged,
                final_mu: fit.final_mu,
            },
        }
    }

    pub fn beta(&self) -> DVector<f64> {
        let mut beta = DVector::zeros(self.p);
        for &(j, v) in &self.coefficients {
            beta[j] = v;
        }
        beta
    }

    fn check(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(CrsvmError::Parse(format!(
                "unsupported model format version {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        if let Some(&(j, _)) = self.coefficients.iter().find(|(j, _)| *j >= self.p) {
            return Err(CrsvmError::Parse(format!("coefficient index {j} out of range for p = {}", self.p)));
        }
        if let Some(names) = &self.feature_names {
            if names.len() != self.p {
                return Err(CrsvmError::Parse(format!("{} feature names for p = {}", names.len(), self.p)));
            }
        }
        if let Some(s) = &self.standardization {
            if s.means.len() != self.p || s.scales.len() != self.p {
                return Err(CrsvmError::Parse("standardisation record does not match p".into()));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| CrsvmError::Parse(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: ModelFile = serde_json::from_str(text).map_err(|e| CrsvmError::Parse(e.to_string()))?;
        model.check()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = self.to_json()?;
        text.push('\n');
        fs::write(path, text).map_err(|e| CrsvmError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| CrsvmError::io(path, e))?;
        Self::from_json(&text)
    }

    /// Selects and orders the model's columns from a table with the given
    /// header names. Without stored names the table must match `p` in order.
    pub fn align(&self, x: &DMatrix<f64>, names: &[String]) -> Result<DMatrix<f64>> {
        match &self.feature_names {
            Some(wanted) => {
                let cols = wanted
                    .iter()
                    .map(|w| {
                        names
                            .iter()
                            .position(|n| n == w)
                            .ok_or_else(|| CrsvmError::Data(format!("input has no column '{w}'")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(x.select_columns(cols.iter()))
            }
            None if x.ncols() == self.p => Ok(x.clone()),
            None => Err(CrsvmError::Shape(format!("model expects {} columns, input has {}", self.p, x.ncols()))),
        }
    }

    /// Scores raw (unstandardised) features laid out in model order.
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Prediction> {
        let z = match &self.standardization {
            Some(s) => s.apply(x)?,
            None => x.clone(),
        };
        predict(&self.beta(), self.intercept, &z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ModelFile {
        ModelFile {
            format_version: FORMAT_VERSION,
            config: ModelConfig::default(),
            standardization: Some(Scaling {
                means: vec![0.1, -0.2, 1.0 / 3.0],
                scales: vec![1.0, 2.5, 0.7],
            }),
            p: 3,
            coefficients: vec![(0, 0.1 + 0.2), (2, -1e-17)],
            intercept: std::f64::consts::PI,
            partition: None,
            feature_names: Some(vec!["a".into(), "b".into(), "c".into()]),
            metadata: TrainingMetadata {
                n_train: 10,
                iterations: 7,
                converged: true,
                final_mu: 0.5,
            },
        }
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let m = sample();
        let back = ModelFile::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.intercept.to_bits(), m.intercept.to_bits());
    }

    #[test]
    fn align_reorders_by_name() {
        let m = sample();
        let x = DMatrix::from_row_slice(1, 4, &[3.0, 9.0, 1.0, 2.0]);
        let names: Vec<String> = ["c", "z", "a", "b"].iter().map(|s| s.to_string()).collect();
        let aligned = m.align(&x, &names).unwrap();
        assert_eq!(aligned, DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 3.0]));
        assert!(m.align(&x, &names[..2]).is_err());
    }

    #[test]
    fn rejects_bad_documents() {
        let mut m = sample();
        m.coefficients.push((5, 1.0));
        assert!(ModelFile::from_json(&m.to_json().unwrap()).is_err());
        let mut v = sample();
        v.format_version = 99;
        assert!(ModelFile::from_json(&v.to_json().unwrap()).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn coefficients_round_trip(values in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 1..30), b0 in -1e300f64..1e300) {
                let mut m = sample();
                m.p = values.len();
                m.coefficients = values.iter().copied().enumerate().collect();
                m.intercept = b0;
                m.standardization = None;
                m.feature_names = None;
                let back = ModelFile::from_json(&m.to_json().unwrap()).unwrap();
                prop_assert!(back.coefficients.iter().zip(&m.coefficients).all(|(a, b)| a.0 == b.0 && a.1.to_bits() == b.1.to_bits()));
                prop_assert_eq!(back.intercept.to_bits(), b0.to_bits());
            }
        }
    }
}

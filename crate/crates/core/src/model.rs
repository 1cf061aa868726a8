use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dependence measure together with its hyperparameters.
///
/// The variant carries exactly the parameters its measure uses, so a NOCCO
/// model always has an `epsilon` and an LSMI model always has a `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "measure", rename_all = "snake_case")]
pub enum DependenceModel {
    Hsic {
        sigma_x: f64,
        sigma_y: f64,
    },
    Nocco {
        sigma_x: f64,
        sigma_y: f64,
        epsilon: f64,
    },
    Lsmi {
        sigma_x: f64,
        sigma_y: f64,
        lambda: f64,
    },
    /// Gaussian log-determinant objective; scoring only, never optimized.
    KsmiScore {
        sigma_x: f64,
        sigma_y: f64,
    },
}

impl DependenceModel {
    pub fn widths(&self) -> (f64, f64) {
        match *self {
            DependenceModel::Hsic { sigma_x, sigma_y }
            | DependenceModel::Nocco {
                sigma_x, sigma_y, ..
            }
            | DependenceModel::Lsmi {
                sigma_x, sigma_y, ..
            }
            | DependenceModel::KsmiScore { sigma_x, sigma_y } => (sigma_x, sigma_y),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DependenceModel::Hsic { .. } => "hsic",
            DependenceModel::Nocco { .. } => "nocco",
            DependenceModel::Lsmi { .. } => "lsmi",
            DependenceModel::KsmiScore { .. } => "ksmi",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (sx, sy) = self.widths();
        for (name, v) in [("sigma_x", sx), ("sigma_y", sy)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be > 0, got {v}")));
            }
        }
        match *self {
            DependenceModel::Nocco { epsilon, .. } if !(epsilon.is_finite() && epsilon > 0.0) => {
                Err(Error::invalid(format!("epsilon must be > 0, got {epsilon}")))
            }
            DependenceModel::Lsmi { lambda, .. } if !(lambda.is_finite() && lambda >= 0.0) => {
                Err(Error::invalid(format!("lambda must be >= 0, got {lambda}")))
            }
            _ => Ok(()),
        }
    }
}

/// Where the LSMI ridge term enters `H`.
///
/// `Inside` uses `H = (KKᵀ ∘ LLᵀ + λI) / n²`; `Outside` uses
/// `H = (KKᵀ ∘ LLᵀ) / n² + λI`, the placement found in most of the LSMI
/// literature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaPlacement {
    #[default]
    Inside,
    Outside,
}

impl LambdaPlacement {
    /// Diagonal term added to `KKᵀ ∘ LLᵀ / n²` for a basis of size `n`.
    pub(crate) fn ridge(self, lambda: f64, n: usize) -> f64 {
        match self {
            LambdaPlacement::Inside => lambda / (n * n) as f64,
            LambdaPlacement::Outside => lambda,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_validation() {
        assert!(DependenceModel::Hsic {
            sigma_x: 1.0,
            sigma_y: 0.0
        }
        .validate()
        .is_err());
        assert!(DependenceModel::Nocco {
            sigma_x: 1.0,
            sigma_y: 1.0,
            epsilon: 0.0
        }
        .validate()
        .is_err());
        assert!(DependenceModel::Lsmi {
            sigma_x: 1.0,
            sigma_y: 1.0,
            lambda: 0.0
        }
        .validate()
        .is_ok());
    }

    #[test]
    fn json_is_tagged_by_measure() {
        let m = DependenceModel::Nocco {
            sigma_x: 1.0,
            sigma_y: 2.0,
            epsilon: 0.05,
        };
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(
            s,
            r#"{"measure":"nocco","sigma_x":1.0,"sigma_y":2.0,"epsilon":0.05}"#
        );
        // a NOCCO model without epsilon does not parse
        assert!(serde_json::from_str::<DependenceModel>(
            r#"{"measure":"nocco","sigma_x":1.0,"sigma_y":2.0}"#
        )
        .is_err());
    }
}

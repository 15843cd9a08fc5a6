//! Smooth feedback laws evaluable over floats or Taylor polynomials.

mod siren;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::da::{DaError, Scalar};

pub use siren::{normalize, AffineScaler, LinearLayer, SirenLayer, SirenNetwork, DEFAULT_OMEGA, MIN_DIRECTION_NORM};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControllerError {
    #[error("missing field '{0}'")]
    MissingField(String),
    #[error("dimension mismatch in layer {layer}: {detail}")]
    Dimension { layer: usize, detail: String },
    #[error("non-finite value {value} in layer {layer}")]
    NonFinite { layer: usize, value: f64 },
    #[error("malformed weights: {0}")]
    Parse(String),
    #[error("controller expects {expected} inputs, got {got}")]
    Input { expected: usize, got: usize },
    #[error("output direction norm {0:e} too small to normalize")]
    DegenerateDirection(f64),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Da(#[from] DaError),
}

/// `u = s·tanh(K x + b)`, component-wise. Each component is bounded by `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticController {
    pub gains: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub saturation: f64,
}

impl AnalyticController {
    pub fn validate(&self) -> Result<(), ControllerError> {
        let n = self.gains.first().map_or(0, |r| r.len());
        if self.gains.is_empty() || n == 0 || self.gains.iter().any(|r| r.len() != n) || self.bias.len() != self.gains.len() {
            return Err(ControllerError::Dimension { layer: 0, detail: "gain matrix and bias do not match".into() });
        }
        if let Some(v) = self.gains.iter().flatten().chain(&self.bias).chain([&self.saturation]).find(|v| !v.is_finite()) {
            return Err(ControllerError::NonFinite { layer: 0, value: *v });
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.gains.first().map_or(0, |r| r.len())
    }

    pub fn output_dim(&self) -> usize {
        self.gains.len()
    }

    pub fn control<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>, ControllerError> {
        if x.len() != self.input_dim() {
            return Err(ControllerError::Input { expected: self.input_dim(), got: x.len() });
        }
        Ok(self
            .gains
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| {
                let mut z = x[0].lift(*b);
                for (k, xi) in row.iter().zip(x) {
                    if *k != 0.0 {
                        z = z + xi.clone() * *k;
                    }
                }
                z.tanh() * self.saturation
            })
            .collect())
    }
}

/// Any controller the scenarios can embed.
#[derive(Debug, Clone, PartialEq)]
pub enum Controller {
    Siren(SirenNetwork),
    Analytic(AnalyticController),
}

impl Controller {
    pub fn control<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>, ControllerError> {
        match self {
            Controller::Siren(n) => n.forward(x),
            Controller::Analytic(a) => a.control(x),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Controller::Siren(n) => n.input_dim(),
            Controller::Analytic(a) => a.input_dim(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Controller::Siren(n) => n.output_dim(),
            Controller::Analytic(a) => a.output_dim(),
        }
    }
}

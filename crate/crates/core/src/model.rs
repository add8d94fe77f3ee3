use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Model {
    AllenCahn,
    CahnHilliard,
}

impl Model {
    pub fn short_name(self) -> &'static str {
        match self {
            Model::AllenCahn => "ac",
            Model::CahnHilliard => "ch",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ac" | "allen-cahn" | "allencahn" => Ok(Model::AllenCahn),
            "ch" | "cahn-hilliard" | "cahnhilliard" => Ok(Model::CahnHilliard),
            other => Err(Error::InvalidArgument(format!("unknown model {other:?} (expected ac or ch)"))),
        }
    }
}

/// Physical and scheme parameters.
///
/// Evolution law: `D^alpha phi = -M mu` (Allen-Cahn) or
/// `D^alpha phi = M lap mu` (Cahn-Hilliard), with
/// `mu = -eps^2 lap phi + (r + S) phi` and `r ~ phi^2 - 1 - S`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub model: Model,
    pub alpha: f64,
    pub eps: f64,
    pub mobility: f64,
    pub stabilization: f64,
}

impl ModelParams {
    pub const DEFAULT_EPS: f64 = 0.2;
    pub const DEFAULT_MOBILITY: f64 = 0.1;
    pub const DEFAULT_STABILIZATION: f64 = 2.0;

    /// Parameters with `S = 2`, `eps = 0.2`, `M = 0.1`.
    pub fn new(model: Model, alpha: f64) -> Result<Self> {
        Self {
            model,
            alpha,
            eps: Self::DEFAULT_EPS,
            mobility: Self::DEFAULT_MOBILITY,
            stabilization: Self::DEFAULT_STABILIZATION,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidArgument(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.mobility > 0.0 && self.mobility.is_finite()) {
            return Err(Error::InvalidArgument(format!("mobility must be positive, got {}", self.mobility)));
        }
        if !(self.stabilization >= 0.0 && self.stabilization.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "stabilization must be non-negative, got {}",
                self.stabilization
            )));
        }
        Ok(self)
    }

    /// Consistent auxiliary value `phi^2 - 1 - S`.
    pub fn relaxed(&self, phi: f64) -> f64 {
        phi * phi - 1.0 - self.stabilization
    }
}

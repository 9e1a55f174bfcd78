//! Pointwise activation functions applied by every hidden neuron.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Activation of a hidden unit.
///
/// ReLU is the leaky rectifier with slope zero and is kept as its own variant
/// only because it is by far the most common case. ELU and tanh have no
/// closed-form equivalent kernel and are handled by simulation only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Relu,
    LeakyRelu { slope: f64 },
    /// `z` for positive `z`, `exp(z) - 1` otherwise.
    Elu,
    /// Bounded, continuous reference activation.
    Tanh,
}

impl Activation {
    /// Leaky rectifier with negative-side slope `a` in `[0, 1)`.
    pub fn leaky_relu(slope: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&slope) {
            return Err(Error::Domain {
                name: "slope",
                value: slope,
                domain: "[0, 1)",
            });
        }
        Ok(Activation::LeakyRelu { slope })
    }

    /// Slope of the rectifier on the negative half-line; `None` for ELU and tanh.
    pub fn rectifier_slope(&self) -> Option<f64> {
        match *self {
            Activation::Relu => Some(0.0),
            Activation::LeakyRelu { slope } => Some(slope),
            Activation::Elu | Activation::Tanh => None,
        }
    }

    pub fn has_closed_form(&self) -> bool {
        self.rectifier_slope().is_some()
    }

    /// Positively homogeneous activations satisfy `σ(cz) = cσ(z)` for `c > 0`.
    pub fn is_positively_homogeneous(&self) -> bool {
        self.has_closed_form()
    }

    #[inline]
    pub fn apply(&self, z: f64) -> f64 {
        match *self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu { slope } => {
                if z > 0.0 {
                    z
                } else {
                    slope * z
                }
            }
            Activation::Elu => {
                if z > 0.0 {
                    z
                } else {
                    z.exp_m1()
                }
            }
            Activation::Tanh => z.tanh(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::LeakyRelu { .. } => "lrelu",
            Activation::Elu => "elu",
            Activation::Tanh => "tanh",
        }
    }

    /// Builds an activation from its name and the slope flag used by the CLI.
    /// `relu` ignores `slope`; `lrelu` with slope 0 is accepted and equals ReLU.
    pub fn from_name(name: &str, slope: f64) -> Result<Self> {
        match name {
            "relu" => Ok(Activation::Relu),
            "lrelu" | "leaky_relu" => Activation::leaky_relu(slope),
            "elu" => Ok(Activation::Elu),
            "tanh" | "tanh_reference" => Ok(Activation::Tanh),
            other => Err(invalid(format!("unknown activation `{other}`"))),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::LeakyRelu { slope } => write!(f, "lrelu(a={slope})"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    /// Accepts `relu`, `elu`, `tanh`, `lrelu` and `lrelu:0.2`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some((name, slope)) => {
                let slope = slope
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("slope `{slope}`: {e}")))?;
                Activation::from_name(name.trim(), slope)
            }
            None => Activation::from_name(s.trim(), 0.0),
        }
    }
}

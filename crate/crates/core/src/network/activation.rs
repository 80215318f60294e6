use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::RepairError;

/// Nonlinearity applied after every affine transform except the last.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    LeakyRelu { alpha: f64 },
    Elu { alpha: f64 },
}

impl Activation {
    pub fn validate(&self) -> Result<(), RepairError> {
        match *self {
            Activation::LeakyRelu { alpha } | Activation::Elu { alpha }
                if !(alpha > 0.0 && alpha.is_finite()) =>
            {
                Err(RepairError::InvalidNetwork(format!(
                    "activation coefficient must be positive, got {alpha}"
                )))
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn apply(&self, z: f64) -> f64 {
        activate(*self, z)
    }

    /// Derivative with respect to the pre-activation. The rectifier kink at
    /// zero takes the left slope.
    #[inline]
    pub fn derivative(&self, z: f64) -> f64 {
        match *self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::LeakyRelu { alpha } => {
                if z > 0.0 {
                    1.0
                } else {
                    alpha
                }
            }
            Activation::Elu { alpha } => {
                if z > 0.0 {
                    1.0
                } else {
                    alpha * z.exp()
                }
            }
        }
    }

    /// Name used in NNet header comments and on the command line.
    pub fn label(&self) -> String {
        self.to_string()
    }
}

/// Pointwise activation value.
#[inline]
pub fn activate(kind: Activation, z: f64) -> f64 {
    match kind {
        Activation::Relu => z.max(0.0),
        Activation::Tanh => z.tanh(),
        Activation::LeakyRelu { alpha } => {
            if z > 0.0 {
                z
            } else {
                alpha * z
            }
        }
        Activation::Elu { alpha } => {
            if z > 0.0 {
                z
            } else {
                alpha * z.exp_m1()
            }
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Relu => write!(f, "relu"),
            Activation::Tanh => write!(f, "tanh"),
            Activation::LeakyRelu { alpha } => write!(f, "leaky_relu:{alpha}"),
            Activation::Elu { alpha } => write!(f, "elu:{alpha}"),
        }
    }
}

impl FromStr for Activation {
    type Err = RepairError;

    /// Accepts `relu`, `tanh`, `leaky_relu[:alpha]`, `elu[:alpha]`; the
    /// coefficient defaults to 0.5.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        let (name, coeff) = match s.split_once(':') {
            Some((n, c)) => (n.to_string(), Some(c.to_string())),
            None => (s.clone(), None),
        };
        let alpha = match coeff {
            Some(c) => c.trim().parse::<f64>().map_err(|_| {
                RepairError::InvalidConfig(format!("bad activation coefficient `{c}`"))
            })?,
            None => 0.5,
        };
        let act = match name.as_str() {
            "relu" => Activation::Relu,
            "tanh" => Activation::Tanh,
            "leaky_relu" | "leakyrelu" | "lrelu" => Activation::LeakyRelu { alpha },
            "elu" => Activation::Elu { alpha },
            other => {
                return Err(RepairError::InvalidConfig(format!(
                    "unknown activation `{other}`"
                )))
            }
        };
        act.validate()?;
        Ok(act)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_values() {
        assert_eq!(activate(Activation::Relu, -3.0), 0.0);
        assert_eq!(activate(Activation::Relu, 2.0), 2.0);
    }

    #[test]
    fn leaky_relu_half() {
        assert_eq!(activate(Activation::LeakyRelu { alpha: 0.5 }, -4.0), -2.0);
    }

    #[test]
    fn elu_half_at_minus_one() {
        let v = activate(Activation::Elu { alpha: 0.5 }, -1.0);
        assert!((v - 0.5 * ((-1.0f64).exp() - 1.0)).abs() < 1e-15);
        assert!((v - (-0.31606)).abs() < 1e-5);
    }

    #[test]
    fn tanh_matches_exponential_definition() {
        for &z in &[-3.0, -0.5, 0.0, 0.7, 2.5] {
            let e = (f64::exp(z) - f64::exp(-z)) / (f64::exp(z) + f64::exp(-z));
            assert!((activate(Activation::Tanh, z) - e).abs() < 1e-14);
        }
    }

    #[test]
    fn leaky_relu_limit_is_relu() {
        let tiny = Activation::LeakyRelu { alpha: 1e-9 };
        for &z in &[-5.0, -1.0, -1e-3] {
            assert!((activate(tiny, z) - activate(Activation::Relu, z)).abs() <= 1e-9 * z.abs().max(1.0));
        }
    }

    #[test]
    fn positive_branch_is_identity() {
        for act in [
            Activation::LeakyRelu { alpha: 0.5 },
            Activation::Elu { alpha: 0.5 },
            Activation::Relu,
        ] {
            for &z in &[1e-6, 0.3, 4.0] {
                assert_eq!(activate(act, z), z);
            }
        }
    }

    #[test]
    fn parse_round_trip() {
        for act in [
            Activation::Relu,
            Activation::Tanh,
            Activation::LeakyRelu { alpha: 0.5 },
            Activation::Elu { alpha: 0.25 },
        ] {
            assert_eq!(act.to_string().parse::<Activation>().unwrap(), act);
        }
        assert!("elu:-1".parse::<Activation>().is_err());
        assert!("sigmoid".parse::<Activation>().is_err());
    }
}

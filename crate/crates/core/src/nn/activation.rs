use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

const GELU_K: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_C: f64 = 0.044_715;

/// `0.5 (1 + tanh(u))` written as the logistic function of `2u`, which avoids
/// a (much slower) `tanh` call.
#[inline]
fn gelu_gate(z: f64) -> f64 {
    let u = GELU_K * (z + GELU_C * z * z * z);
    1.0 / (1.0 + (-2.0 * u).exp())
}

/// Hidden-layer nonlinearity. Output layers are always linear.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Activation {
    /// `alpha = 1`.
    Elu,
    LeakyRelu { slope: f64 },
    /// Tanh approximation, differentiated exactly.
    Gelu,
    Identity,
}

impl Activation {
    pub const DEFAULT_LEAK: f64 = 0.2;

    pub fn leaky_relu() -> Self {
        Activation::LeakyRelu {
            slope: Self::DEFAULT_LEAK,
        }
    }

    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Elu => {
                if z > 0.0 {
                    z
                } else {
                    z.exp_m1()
                }
            }
            Activation::LeakyRelu { slope } => {
                if z > 0.0 {
                    z
                } else {
                    slope * z
                }
            }
            Activation::Gelu => z * gelu_gate(z),
            Activation::Identity => z,
        }
    }

    /// `(apply(z), derivative(z))` sharing the transcendental evaluation.
    #[inline]
    pub fn apply_with_derivative(self, z: f64) -> (f64, f64) {
        match self {
            Activation::Elu => {
                if z > 0.0 {
                    (z, 1.0)
                } else {
                    let a = z.exp_m1();
                    (a, a + 1.0)
                }
            }
            Activation::Gelu => {
                let g = gelu_gate(z);
                let du = GELU_K * (1.0 + 3.0 * GELU_C * z * z);
                (z * g, g + 2.0 * z * g * (1.0 - g) * du)
            }
            _ => (self.apply(z), self.derivative(z)),
        }
    }

    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Elu => {
                if z > 0.0 {
                    1.0
                } else {
                    z.exp()
                }
            }
            Activation::LeakyRelu { slope } => {
                if z > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Gelu => {
                let g = gelu_gate(z);
                let du = GELU_K * (1.0 + 3.0 * GELU_C * z * z);
                g + 2.0 * z * g * (1.0 - g) * du
            }
            Activation::Identity => 1.0,
        }
    }

    #[inline]
    pub fn second_derivative(self, z: f64) -> f64 {
        match self {
            Activation::Elu => {
                if z > 0.0 {
                    0.0
                } else {
                    z.exp()
                }
            }
            Activation::LeakyRelu { .. } | Activation::Identity => 0.0,
            Activation::Gelu => {
                let g = gelu_gate(z);
                let t = 2.0 * g - 1.0;
                let sech2 = 4.0 * g * (1.0 - g);
                let du = GELU_K * (1.0 + 3.0 * GELU_C * z * z);
                let ddu = GELU_K * 6.0 * GELU_C * z;
                sech2 * du + 0.5 * z * sech2 * (ddu - 2.0 * t * du * du)
            }
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Elu => f.write_str("elu"),
            Activation::LeakyRelu { slope } => write!(f, "leaky_relu:{slope}"),
            Activation::Gelu => f.write_str("gelu"),
            Activation::Identity => f.write_str("identity"),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    /// Accepts `elu`, `gelu`, `identity`, `leaky_relu` and `leaky_relu:<slope>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s {
            "elu" => Ok(Activation::Elu),
            "gelu" => Ok(Activation::Gelu),
            "identity" | "linear" => Ok(Activation::Identity),
            "leaky_relu" => Ok(Activation::leaky_relu()),
            _ => {
                if let Some(slope) = s.strip_prefix("leaky_relu:") {
                    let slope: f64 = slope
                        .parse()
                        .map_err(|_| Error::Config(format!("bad leaky_relu slope in {s:?}")))?;
                    if !slope.is_finite() {
                        return Err(Error::Config(format!("non-finite leaky_relu slope in {s:?}")));
                    }
                    Ok(Activation::LeakyRelu { slope })
                } else {
                    Err(Error::Config(format!("unknown activation {s:?}")))
                }
            }
        }
    }
}

impl TryFrom<String> for Activation {
    type Error = Error;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<Activation> for String {
    fn from(value: Activation) -> Self {
        value.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALL: [Activation; 4] = [
        Activation::Elu,
        Activation::LeakyRelu { slope: 0.2 },
        Activation::Gelu,
        Activation::Identity,
    ];

    #[test]
    fn leaky_relu_negative_branch() {
        assert_eq!(Activation::leaky_relu().apply(-1.0), -0.2);
        assert_eq!(Activation::leaky_relu().apply(3.0), 3.0);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-5;
        for act in ALL {
            for &z in &[-2.3, -0.7, -0.1, 0.2, 0.9, 2.5] {
                let fd = (act.apply(z + h) - act.apply(z - h)) / (2.0 * h);
                assert!((fd - act.derivative(z)).abs() < 1e-8, "{act} d1 at {z}");
                let fd2 = (act.derivative(z + h) - act.derivative(z - h)) / (2.0 * h);
                assert!((fd2 - act.second_derivative(z)).abs() < 1e-7, "{act} d2 at {z}");
            }
        }
    }

    #[test]
    fn parse_and_display() {
        for act in ALL {
            assert_eq!(act.to_string().parse::<Activation>().unwrap(), act);
        }
        assert_eq!(
            "leaky_relu:0.1".parse::<Activation>().unwrap(),
            Activation::LeakyRelu { slope: 0.1 }
        );
        assert!("relu6".parse::<Activation>().is_err());
    }
}

//! Activation functions for the supervised single-layer model.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A scalar activation f: R → R with its a.e. derivative.
///
/// Kink conventions: ReLU′(0) = 0 and sign(0) = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Activation {
    Linear,
    Relu,
    Sigmoid,
    Square,
    Abs,
    /// (z³ − 3z)/√6, the third orthonormal Hermite polynomial.
    Hermite3,
    /// (z⁴ − 6z² + 3)/√24.
    Hermite4,
    Cubic,
    /// z³ − 3z (unnormalized).
    CubicMinus3x,
    /// Σ c_i z^i with coefficients in increasing degree.
    Polynomial(Vec<f64>),
}

const SQRT6: f64 = 2.449_489_742_783_178;
const SQRT24: f64 = 4.898_979_485_566_356;

/// Names accepted by [`Activation::from_str`].
pub const REGISTRY: [&str; 9] = [
    "linear",
    "relu",
    "sigmoid",
    "square",
    "abs",
    "hermite3",
    "hermite4",
    "cubic",
    "cubic_minus_3x",
];

impl Activation {
    pub fn polynomial(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() || coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(
                "polynomial activation needs at least one finite coefficient".into(),
            ));
        }
        Ok(Activation::Polynomial(coefficients))
    }

    pub fn name(&self) -> String {
        match self {
            Activation::Linear => "linear".into(),
            Activation::Relu => "relu".into(),
            Activation::Sigmoid => "sigmoid".into(),
            Activation::Square => "square".into(),
            Activation::Abs => "abs".into(),
            Activation::Hermite3 => "hermite3".into(),
            Activation::Hermite4 => "hermite4".into(),
            Activation::Cubic => "cubic".into(),
            Activation::CubicMinus3x => "cubic_minus_3x".into(),
            Activation::Polynomial(c) => {
                let parts: Vec<String> = c.iter().map(|v| format!("{v}")).collect();
                format!("poly[{}]", parts.join(","))
            }
        }
    }

    pub fn eval<T: Real>(&self, z: T) -> T {
        match self {
            Activation::Linear => z,
            Activation::Relu => z.max(T::zero()),
            Activation::Sigmoid => sigmoid(z),
            Activation::Square => z * z,
            Activation::Abs => z.abs(),
            Activation::Hermite3 => (z * z * z - T::lit(3.0) * z) / T::lit(SQRT6),
            Activation::Hermite4 => {
                let z2 = z * z;
                (z2 * z2 - T::lit(6.0) * z2 + T::lit(3.0)) / T::lit(SQRT24)
            }
            Activation::Cubic => z * z * z,
            Activation::CubicMinus3x => z * z * z - T::lit(3.0) * z,
            Activation::Polynomial(c) => c.iter().rev().fold(T::zero(), |acc, &ci| acc * z + T::lit(ci)),
        }
    }

    pub fn derivative<T: Real>(&self, z: T) -> T {
        match self {
            Activation::Linear => T::one(),
            Activation::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (T::one() - s)
            }
            Activation::Square => T::lit(2.0) * z,
            Activation::Abs => {
                if z > T::zero() {
                    T::one()
                } else if z < T::zero() {
                    -T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Hermite3 => (T::lit(3.0) * z * z - T::lit(3.0)) / T::lit(SQRT6),
            Activation::Hermite4 => (T::lit(4.0) * z * z * z - T::lit(12.0) * z) / T::lit(SQRT24),
            Activation::Cubic => T::lit(3.0) * z * z,
            Activation::CubicMinus3x => T::lit(3.0) * z * z - T::lit(3.0),
            Activation::Polynomial(c) => c
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(T::zero(), |acc, (i, &ci)| acc * z + T::lit(ci * i as f64)),
        }
    }

    /// Points where f is not differentiable.
    pub fn kinks(&self) -> &'static [f64] {
        match self {
            Activation::Relu | Activation::Abs => &[0.0],
            _ => &[],
        }
    }

    /// Degree when f is a polynomial.
    pub fn polynomial_degree(&self) -> Option<usize> {
        match self {
            Activation::Linear => Some(1),
            Activation::Square => Some(2),
            Activation::Hermite3 | Activation::Cubic | Activation::CubicMinus3x => Some(3),
            Activation::Hermite4 => Some(4),
            Activation::Polynomial(c) => Some(c.iter().rposition(|&v| v != 0.0).unwrap_or(0)),
            Activation::Relu | Activation::Sigmoid | Activation::Abs => None,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "linear" => Activation::Linear,
            "relu" => Activation::Relu,
            "sigmoid" => Activation::Sigmoid,
            "square" => Activation::Square,
            "abs" => Activation::Abs,
            "hermite3" => Activation::Hermite3,
            "hermite4" => Activation::Hermite4,
            "cubic" => Activation::Cubic,
            "cubic_minus_3x" => Activation::CubicMinus3x,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown activation {other:?}; expected one of {}",
                    REGISTRY.join(", ")
                )))
            }
        })
    }
}

/// Logistic function, evaluated without overflow for either sign.
pub fn sigmoid<T: Real>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn registry_round_trips() {
        for name in REGISTRY {
            let a: Activation = name.parse().unwrap();
            assert_eq!(a.name(), name);
        }
        assert!("tanhh".parse::<Activation>().is_err());
    }

    #[test]
    fn hermite_activations_match_closed_forms() {
        assert_abs_diff_eq!(Activation::Hermite3.eval(2.0), 2.0 / 6f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(Activation::Hermite4.eval(1.0), -2.0 / 24f64.sqrt(), epsilon = 1e-15);
        assert_eq!(Activation::CubicMinus3x.eval(2.0), 2.0);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let all = [
            Activation::Linear,
            Activation::Relu,
            Activation::Sigmoid,
            Activation::Square,
            Activation::Abs,
            Activation::Hermite3,
            Activation::Hermite4,
            Activation::Cubic,
            Activation::CubicMinus3x,
            Activation::Polynomial(vec![1.0, -2.0, 0.5, 0.25]),
        ];
        let h = 1e-6;
        for a in &all {
            for &z in &[-1.7f64, -0.3, 0.4, 2.1] {
                let fd = (a.eval(z + h) - a.eval(z - h)) / (2.0 * h);
                assert!((fd - a.derivative(z)).abs() < 1e-6 * (1.0 + fd.abs()), "{a} at {z}");
            }
        }
    }

    #[test]
    fn kink_conventions() {
        assert_eq!(Activation::Relu.derivative(0.0), 0.0);
        assert_eq!(Activation::Abs.derivative(0.0), 0.0);
    }

    #[test]
    fn sigmoid_is_stable_in_the_tails() {
        assert_eq!(sigmoid(-800.0_f64), 0.0);
        assert_eq!(sigmoid(800.0_f64), 1.0);
        assert_abs_diff_eq!(sigmoid(0.0_f32), 0.5);
    }

    #[test]
    fn polynomial_degree_ignores_trailing_zeros() {
        assert_eq!(Activation::Polynomial(vec![1.0, 2.0, 0.0]).polynomial_degree(), Some(1));
    }
}

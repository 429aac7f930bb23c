use serde::{Deserialize, Serialize};

/// Negative-side slope of [`Activation::LeakyRelu`].
pub const LEAKY_RELU_SLOPE: f64 = 0.01;

/// `sqrt(2 / pi)`, the constant of the tanh GELU approximation.
const GELU_SCALE: f64 = 0.797_884_560_802_865_4;
const GELU_CUBIC: f64 = 0.044_715;

/// Element-wise activation applied after a dense layer's affine map.
///
/// GELU uses the tanh approximation
/// `gelu(z) = 0.5 z (1 + tanh(sqrt(2/pi) (z + 0.044715 z^3)))`.
/// The kinked activations use the negative-side slope at exactly zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Activation {
    #[serde(rename = "LeakyReLU")]
    LeakyRelu,
    #[serde(rename = "ReLU")]
    Relu,
    #[serde(rename = "GELU")]
    Gelu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::LeakyRelu => {
                if z > 0.0 {
                    z
                } else {
                    LEAKY_RELU_SLOPE * z
                }
            }
            Activation::Relu => z.max(0.0),
            Activation::Gelu => {
                let inner = GELU_SCALE * (z + GELU_CUBIC * z * z * z);
                0.5 * z * (1.0 + inner.tanh())
            }
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative with respect to the pre-activation `z`.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::LeakyRelu => {
                if z > 0.0 {
                    1.0
                } else {
                    LEAKY_RELU_SLOPE
                }
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Gelu => {
                let inner = GELU_SCALE * (z + GELU_CUBIC * z * z * z);
                let t = inner.tanh();
                let dinner = GELU_SCALE * (1.0 + 3.0 * GELU_CUBIC * z * z);
                0.5 * (1.0 + t) + 0.5 * z * (1.0 - t * t) * dinner
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Identity => 1.0,
        }
    }

    /// Whether the activation has a kink at zero.
    pub fn is_piecewise_linear(self) -> bool {
        matches!(self, Activation::LeakyRelu | Activation::Relu)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALL: [Activation; 5] = [
        Activation::LeakyRelu,
        Activation::Relu,
        Activation::Gelu,
        Activation::Tanh,
        Activation::Identity,
    ];

    #[test]
    fn derivatives_match_central_differences_away_from_kinks() {
        let h = 1e-6;
        for act in ALL {
            for &z in &[-2.3, -0.7, -0.01, 0.02, 0.5, 1.9] {
                let fd = (act.apply(z + h) - act.apply(z - h)) / (2.0 * h);
                assert!((fd - act.derivative(z)).abs() < 1e-8, "{act:?} at {z}");
            }
        }
    }

    #[test]
    fn kink_takes_negative_side_slope() {
        assert_eq!(Activation::Relu.derivative(0.0), 0.0);
        assert_eq!(Activation::LeakyRelu.derivative(0.0), LEAKY_RELU_SLOPE);
    }

    #[test]
    fn gelu_reference_values() {
        // 0.5 * 1 * (1 + tanh(sqrt(2/pi) * 1.044715))
        let expected = 0.5 * (1.0 + (GELU_SCALE * 1.044715f64).tanh());
        assert_eq!(Activation::Gelu.apply(1.0), expected);
        assert_eq!(Activation::Gelu.apply(0.0), 0.0);
    }

    #[test]
    fn serde_names() {
        let s = serde_json::to_string(&ALL).unwrap();
        assert_eq!(s, r#"["LeakyReLU","ReLU","GELU","Tanh","Identity"]"#);
    }
}

use serde::{Deserialize, Serialize};

use crate::tensor::Matrix;

/// 8-bit floating-point formats without infinities in the finite range used
/// here: E4M3 (bias 7, max 448) and E5M2 (bias 15, max 57344).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fp8Format {
    E4M3,
    E5M2,
}

impl Fp8Format {
    pub fn max_finite(self) -> f32 {
        match self {
            Self::E4M3 => 448.0,
            Self::E5M2 => 57344.0,
        }
    }

    fn mantissa_bits(self) -> i32 {
        match self {
            Self::E4M3 => 3,
            Self::E5M2 => 2,
        }
    }

    /// Exponent of the smallest normal number.
    fn min_exponent(self) -> i32 {
        match self {
            Self::E4M3 => -6,
            Self::E5M2 => -14,
        }
    }

    /// Nearest representable value, ties to even, saturating at the format maximum.
    pub fn snap(self, v: f32) -> f32 {
        let a = v.abs() as f64;
        let max = self.max_finite() as f64;
        if a == 0.0 {
            return v;
        }
        let snapped = if a >= max {
            max
        } else {
            let exp = ((a.to_bits() >> 52) & 0x7ff) as i32 - 1023;
            let step = 2f64.powi(exp.max(self.min_exponent()) - self.mantissa_bits());
            ((a / step).round_ties_even() * step).min(max)
        };
        (snapped as f32).copysign(v)
    }
}

/// Snaps every entry to E4M3 when `max|x| ≤ 448`, otherwise to E5M2. No
/// pre-scaling is applied.
pub fn fp8_fake_quantize(x: &Matrix) -> (Matrix, Fp8Format) {
    let format = if x.max_abs() <= Fp8Format::E4M3.max_finite() {
        Fp8Format::E4M3
    } else {
        Fp8Format::E5M2
    };
    (x.map(|v| format.snap(v)), format)
}

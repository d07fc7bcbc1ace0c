//! Special functions: the complex Gamma function and Gauss-measure error
//! function helpers.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::{Error, Result};

// Lanczos coefficients for g = 671/128, 14 terms.
const LANCZOS_G: f64 = 5.242_187_5;
const LANCZOS_C0: f64 = 0.999_999_999_999_997_092;
const LANCZOS: [f64; 14] = [
    57.156_235_665_862_923_5,
    -59.597_960_355_475_491_2,
    14.136_097_974_741_747_1,
    -0.491_913_816_097_620_199,
    0.339_946_499_848_118_887e-4,
    0.465_236_289_270_485_756e-4,
    -0.983_744_753_048_795_646e-4,
    0.158_088_703_224_912_494e-3,
    -0.210_264_441_724_104_883e-3,
    0.217_439_618_115_212_643e-3,
    -0.164_318_106_536_763_890e-3,
    0.844_182_239_838_527_433e-4,
    -0.261_908_384_015_814_087e-4,
    0.368_991_826_595_316_234e-5,
];
const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

fn ln_gamma_right(z: Complex64) -> Complex64 {
    let tmp = z + LANCZOS_G;
    let lead = (z + 0.5) * tmp.ln() - tmp;
    let mut ser = Complex64::new(LANCZOS_C0, 0.0);
    for (j, c) in LANCZOS.iter().enumerate() {
        ser += c / (z + (j + 1) as f64);
    }
    lead + (ser * SQRT_2PI / z).ln()
}

/// Euler's Gamma function on the complex plane.
///
/// Lanczos approximation on `Re z >= 1/2`, reflection formula elsewhere.
/// Nonpositive integers are poles and return a domain error.
pub fn gamma_complex(z: Complex64) -> Result<Complex64> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::Domain(format!("gamma of non-finite argument {z}")));
    }
    if z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round() {
        return Err(Error::Domain(format!("gamma has a pole at {}", z.re)));
    }
    if z.re >= 0.5 {
        Ok(ln_gamma_right(z).exp())
    } else {
        let s = (z * PI).sin();
        let right = ln_gamma_right(Complex64::new(1.0, 0.0) - z).exp();
        Ok(Complex64::new(PI, 0.0) / (s * right))
    }
}

/// `gamma(I)` for the half line `[lo, hi]` of the real axis, with infinite
/// endpoints allowed.
pub fn gauss_interval_measure(lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let v = if lo >= 0.0 {
        0.5 * (erfc(lo) - erfc(hi))
    } else if hi <= 0.0 {
        0.5 * (erfc(-hi) - erfc(-lo))
    } else {
        0.5 * (libm::erf(hi) + libm::erf(-lo))
    };
    v.max(0.0)
}

fn erfc(x: f64) -> f64 {
    if x == f64::INFINITY {
        0.0
    } else if x == f64::NEG_INFINITY {
        2.0
    } else {
        libm::erfc(x)
    }
}

/// Density of the Gauss measure in one dimension.
pub fn gauss_density(x: f64) -> f64 {
    (-x * x).exp() / PI.sqrt()
}

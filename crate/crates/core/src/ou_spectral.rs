//! Hermite spectral calculus for the Ornstein-Uhlenbeck operator
//! `L = -(1/2) d^2/dx^2 + x d/dx` on `L^2(gamma)` in dimension one.
//!
//! Hermite polynomials use the physicists' normalization
//! `H_{j+1} = 2x H_j - 2j H_{j-1}`, so `L H_j = j H_j` and
//! `||H_j||^2 = 2^j j!`. A [`SpectralFunction`] stores coefficients with
//! respect to the orthonormal family `phi_j = H_j / sqrt(2^j j!)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::quadrature::QuadratureGrid;
use crate::{Error, Result};

/// Cramér's constant: `|H_j(x)| <= K sqrt(2^j j!) e^{x^2/2}`.
pub const CRAMER_BOUND: f64 = 1.086_435;
/// Hard cap on the number of Mehler series terms.
pub const MEHLER_SERIES_CAP: usize = 200;

pub fn hermite_eval(j: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..j {
        let next = 2.0 * x * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `(H_j, H_j', H_j'')` at `x`, using `H_j' = 2j H_{j-1}`.
pub fn hermite_with_derivatives(j: usize, x: f64) -> (f64, f64, f64) {
    let h = hermite_eval(j, x);
    let d1 = if j >= 1 {
        2.0 * j as f64 * hermite_eval(j - 1, x)
    } else {
        0.0
    };
    let d2 = if j >= 2 {
        4.0 * (j * (j - 1)) as f64 * hermite_eval(j - 2, x)
    } else {
        0.0
    };
    (h, d1, d2)
}

/// `2^j j!`, the squared `L^2(gamma)` norm of `H_j`.
pub fn hermite_norm_sq(j: usize) -> Result<f64> {
    let mut acc = 1.0f64;
    for k in 1..=j {
        acc *= 2.0 * k as f64;
        if !acc.is_finite() {
            return Err(Error::Range(format!("2^j j! overflows f64 for j = {j}")));
        }
    }
    Ok(acc)
}

/// Orthonormal Hermite functions `phi_0(x), ..., phi_jmax(x)`.
pub fn orthonormal_hermite_table(jmax: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(jmax + 1);
    let (mut prev, mut cur) = (0.0, 1.0);
    out.push(cur);
    for k in 0..jmax {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * x * cur - (kf / (kf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        out.push(cur);
    }
    out
}

/// Largest scale-relative residual of `L H_j = j H_j` over `points`.
///
/// The residual `|(-H'' / 2 + x H') - j H|` is divided by
/// `max(1, |H''|/2 + |x H'| + j |H|)` so that the check is meaningful for
/// large `|H_j(x)|`.
pub fn eigen_residual(j: usize, points: &[f64]) -> f64 {
    points
        .iter()
        .map(|&x| {
            let (h, d1, d2) = hermite_with_derivatives(j, x);
            let lhs = -0.5 * d2 + x * d1;
            let rhs = j as f64 * h;
            let scale = (0.5 * d2.abs() + (x * d1).abs() + rhs.abs()).max(1.0);
            (lhs - rhs).abs() / scale
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralFunction {
    coeffs: Vec<Complex64>,
}

impl SpectralFunction {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        Self { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    /// Projects point values of `f` onto `phi_0..phi_degree` with a
    /// Gauss-Hermite rule of order `2 * degree + 1`.
    pub fn from_fn<F: Fn(f64) -> f64>(f: F, degree: usize) -> Self {
        let grid = QuadratureGrid::gauss_hermite(2 * degree + 1);
        let mut coeffs = vec![Complex64::new(0.0, 0.0); degree + 1];
        for (&x, &w) in grid.nodes.iter().zip(&grid.weights) {
            let fx = f(x);
            for (c, phi) in coeffs.iter_mut().zip(orthonormal_hermite_table(degree, x)) {
                c.re += w * fx * phi;
            }
        }
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// `||f||_2`, by Parseval.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        orthonormal_hermite_table(self.degree(), x)
            .into_iter()
            .zip(&self.coeffs)
            .map(|(p, c)| c * p)
            .sum()
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let zero = Complex64::new(0.0, 0.0);
        Self::new(
            (0..n)
                .map(|j| {
                    self.coeffs.get(j).copied().unwrap_or(zero)
                        + other.coeffs.get(j).copied().unwrap_or(zero)
                })
                .collect(),
        )
    }
}

/// Orthogonal projection onto the `j`-th eigenspace.
pub fn project(f: &SpectralFunction, j: usize) -> SpectralFunction {
    let coeffs = f
        .coeffs
        .iter()
        .enumerate()
        .map(|(k, &c)| if k == j { c } else { Complex64::new(0.0, 0.0) })
        .collect();
    SpectralFunction { coeffs }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Multiplier {
    /// `M_u(0) = 0`, `M_u(j) = j^{iu}`.
    ImaginaryPower { u: f64 },
    /// `(j + r)^{iu}`, the spectral multiplier of `(rI + L)^{iu}`.
    ShiftedImaginaryPower { u: f64, r: f64 },
    /// Arbitrary finite table; missing entries are zero.
    Table { values: Vec<Complex64> },
}

impl Multiplier {
    pub fn shifted(u: f64, r: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::InvalidInput(format!(
                "shift r must be positive, got {r}"
            )));
        }
        Ok(Self::ShiftedImaginaryPower { u, r })
    }

    pub fn eval(&self, j: usize) -> Complex64 {
        match *self {
            Multiplier::ImaginaryPower { u } => {
                if j == 0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::from_polar(1.0, u * (j as f64).ln())
                }
            }
            Multiplier::ShiftedImaginaryPower { u, r } => {
                Complex64::from_polar(1.0, u * (j as f64 + r).ln())
            }
            Multiplier::Table { ref values } => {
                values.get(j).copied().unwrap_or(Complex64::new(0.0, 0.0))
            }
        }
    }

    /// Declared bound on `|m(j)|`.
    pub fn sup_bound(&self) -> f64 {
        match self {
            Multiplier::ImaginaryPower { .. } | Multiplier::ShiftedImaginaryPower { .. } => 1.0,
            Multiplier::Table { values } => values.iter().map(|v| v.norm()).fold(0.0, f64::max),
        }
    }
}

pub fn apply_multiplier(m: &Multiplier, f: &SpectralFunction) -> SpectralFunction {
    SpectralFunction {
        coeffs: f
            .coeffs
            .iter()
            .enumerate()
            .map(|(j, &c)| m.eval(j) * c)
            .collect(),
    }
}

fn check_t(t: f64) -> Result<()> {
    if !(t > 0.0) || t.is_nan() {
        return Err(Error::Domain(format!(
            "semigroup time must be positive, got {t}"
        )));
    }
    Ok(())
}

/// `h_t(x, y)` in the asymmetric closed form
/// `(1 - e^{-2t})^{-1/2} exp(y^2 - |e^{-t} x - y|^2 / (1 - e^{-2t}))`.
pub fn mehler_eval_asymmetric(t: f64, x: f64, y: f64) -> Result<f64> {
    check_t(t)?;
    let rho = (-t).exp();
    let one_minus = -(-2.0 * t).exp_m1();
    let d = rho * x - y;
    Ok((y * y - d * d / one_minus).exp() / one_minus.sqrt())
}

/// Mehler kernel `h_t(x, y)` of `e^{-tL}` with respect to the Gauss measure.
///
/// Evaluated through `s = tanh(t/2)` and the symmetric exponent
/// `(x^2 + y^2)/2 - ((x - y)^2 / s + s (x + y)^2) / 4`.
pub fn mehler_eval(t: f64, x: f64, y: f64) -> Result<f64> {
    check_t(t)?;
    mehler_substituted_unchecked((0.5 * t).tanh(), x, y)
}

fn mehler_substituted_unchecked(s: f64, x: f64, y: f64) -> Result<f64> {
    if s <= 0.0 {
        // t below the resolution of tanh
        return if x == y {
            Err(Error::Domain(
                "Mehler kernel is singular on the diagonal as t -> 0".into(),
            ))
        } else {
            Ok(0.0)
        };
    }
    let diff = x - y;
    let sum = x + y;
    let expo = 0.5 * (x * x + y * y) - 0.25 * (diff * diff / s + s * sum * sum);
    Ok((1.0 + s) / (4.0 * s).sqrt() * expo.exp())
}

/// `h~_s(x, y)`: the Mehler kernel at `t = log((1 + s)/(1 - s))`.
pub fn mehler_substituted_eval(s: f64, x: f64, y: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Domain(format!("s must lie in (0, 1), got {s}")));
    }
    mehler_substituted_unchecked(s, x, y)
}

/// `t(s) = log((1 + s)/(1 - s))`.
pub fn time_of_s(s: f64) -> f64 {
    ((1.0 + s) / (1.0 - s)).ln()
}

/// How many terms of the Mehler series to sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    /// Exactly `terms` terms (indices `0..terms`); the tail bound must not
    /// exceed `tol`.
    Fixed { terms: usize, tol: f64 },
    /// Fewest terms whose tail bound is below `tol` (at most
    /// [`MEHLER_SERIES_CAP`]).
    Adaptive { tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    pub value: f64,
    pub tail_bound: f64,
    pub terms: usize,
}

fn series_tail_bound(rho: f64, x: f64, y: f64, terms: usize) -> f64 {
    CRAMER_BOUND * CRAMER_BOUND * (0.5 * (x * x + y * y)).exp() * rho.powi(terms as i32)
        / (1.0 - rho)
}

/// Partial sum of `sum_j e^{-tj} H_j(x) H_j(y) / (2^j j!)` with a rigorous
/// geometric tail bound from Cramér's inequality.
pub fn mehler_series_eval(t: f64, x: f64, y: f64, truncation: Truncation) -> Result<SeriesValue> {
    check_t(t)?;
    let rho = (-t).exp();
    let (terms, tol) = match truncation {
        Truncation::Fixed { terms, tol } => (terms, tol),
        Truncation::Adaptive { tol } => {
            let n = (1..=MEHLER_SERIES_CAP)
                .find(|&n| series_tail_bound(rho, x, y, n) <= tol)
                .unwrap_or(MEHLER_SERIES_CAP);
            (n, tol)
        }
    };
    let terms = terms.max(1);
    let px = orthonormal_hermite_table(terms - 1, x);
    let py = orthonormal_hermite_table(terms - 1, y);
    let mut value = 0.0;
    let mut w = 1.0;
    for (a, b) in px.iter().zip(&py) {
        value += w * a * b;
        w *= rho;
    }
    let tail_bound = series_tail_bound(rho, x, y, terms);
    if tail_bound > tol {
        return Err(Error::convergence(
            format!("Mehler series tail bound {tail_bound:e} above tolerance {tol:e} with {terms} terms"),
            Complex64::new(value, 0.0),
            tail_bound,
        ));
    }
    Ok(SeriesValue {
        value,
        tail_bound,
        terms,
    })
}

/// Term cap of [`mehler_series_eval_precise`].
pub const PRECISE_SERIES_CAP: usize = 5000;

/// Binary fixed point with `FRAC_BITS` fractional bits.
mod fixed {
    use num_bigint::BigInt;
    use num_traits::{ToPrimitive, Zero};

    pub const FRAC_BITS: u32 = 512;

    pub fn from_f64(v: f64) -> BigInt {
        if v == 0.0 {
            return BigInt::zero();
        }
        let bits = v.to_bits();
        let exp = ((bits >> 52) & 0x7ff) as i64;
        let mut mant = (bits & ((1u64 << 52) - 1)) as i64;
        let e = if exp == 0 {
            -1074
        } else {
            mant |= 1 << 52;
            exp - 1075
        };
        let m = BigInt::from(if v < 0.0 { -mant } else { mant });
        let shift = e + FRAC_BITS as i64;
        if shift >= 0 {
            m << shift as usize
        } else {
            m >> (-shift) as usize
        }
    }

    pub fn to_f64(v: &BigInt) -> f64 {
        // keep 64 significant bits before the conversion
        let extra = (v.bits() as i64 - 64).max(0);
        let top = (v >> extra as usize).to_f64().unwrap_or(f64::NAN);
        top * 2f64.powi((extra - FRAC_BITS as i64) as i32)
    }

    pub fn one() -> BigInt {
        BigInt::from(1) << FRAC_BITS as usize
    }

    pub fn mul(a: &BigInt, b: &BigInt) -> BigInt {
        (a * b) >> FRAC_BITS as usize
    }

    /// `sqrt(num / den)` for positive integers.
    pub fn sqrt_ratio(num: u64, den: u64) -> BigInt {
        ((BigInt::from(num) << (2 * FRAC_BITS) as usize) / BigInt::from(den)).sqrt()
    }

    /// `e^{-t}` for `t >= 0` by argument halving and Taylor series.
    pub fn exp_neg(t: f64) -> BigInt {
        let mut halvings = 0;
        let mut arg = t;
        while arg > 1.0 / 1024.0 {
            arg *= 0.5;
            halvings += 1;
        }
        let x = -from_f64(arg);
        let mut term = one();
        let mut sum = one();
        let mut k = 1u64;
        while !term.is_zero() {
            term = mul(&term, &x) / BigInt::from(k);
            sum += &term;
            k += 1;
        }
        for _ in 0..halvings {
            sum = mul(&sum, &sum);
        }
        sum
    }
}

/// The Mehler series summed in 512-bit fixed point until the Cramér tail
/// bound drops below `rel_tol` times the partial sum.
///
/// Unlike [`mehler_series_eval`] this resolves the cancellation between
/// terms of size `e^{(x^2+y^2)/2}` when `h_t(x, y)` itself is tiny, e.g. at
/// `x = -y` and small `t`.
pub fn mehler_series_eval_precise(t: f64, x: f64, y: f64, rel_tol: f64) -> Result<SeriesValue> {
    check_t(t)?;
    if !(rel_tol > 0.0) {
        return Err(Error::InvalidInput(format!(
            "tolerance must be positive, got {rel_tol}"
        )));
    }
    if x.abs().max(y.abs()) > 20.0 {
        return Err(Error::Domain(format!(
            "precise series limited to |x|, |y| <= 20, got ({x}, {y})"
        )));
    }
    let rho = (-t).exp();
    let rho_fixed = fixed::exp_neg(t);
    let (xf, yf) = (fixed::from_f64(x), fixed::from_f64(y));
    let root2 = fixed::sqrt_ratio(2, 1);
    let (mut px_prev, mut py_prev) = (fixed::one(), fixed::one());
    let (mut px, mut py) = (fixed::mul(&root2, &xf), fixed::mul(&root2, &yf));
    let mut weight = rho_fixed.clone();
    let mut sum = fixed::one() + fixed::mul(&weight, &fixed::mul(&px, &py));
    for terms in 2..=PRECISE_SERIES_CAP {
        let value = fixed::to_f64(&sum);
        let tail_bound = series_tail_bound(rho, x, y, terms);
        if tail_bound <= rel_tol * value.abs() {
            return Ok(SeriesValue {
                value,
                tail_bound,
                terms,
            });
        }
        // phi_{k+1} from phi_k, phi_{k-1} with k = terms - 1
        let k = (terms - 1) as u64;
        let a = fixed::sqrt_ratio(2, k + 1);
        let b = fixed::sqrt_ratio(k, k + 1);
        let nx = fixed::mul(&a, &fixed::mul(&xf, &px)) - fixed::mul(&b, &px_prev);
        let ny = fixed::mul(&a, &fixed::mul(&yf, &py)) - fixed::mul(&b, &py_prev);
        px_prev = std::mem::replace(&mut px, nx);
        py_prev = std::mem::replace(&mut py, ny);
        weight = fixed::mul(&weight, &rho_fixed);
        sum += fixed::mul(&weight, &fixed::mul(&px, &py));
    }
    Err(Error::convergence(
        format!("precise Mehler series not converged after {PRECISE_SERIES_CAP} terms"),
        Complex64::new(fixed::to_f64(&sum), 0.0),
        series_tail_bound(rho, x, y, PRECISE_SERIES_CAP),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComposeValue {
    pub value: f64,
    /// Difference to the same sum on a rule with three quarters of the nodes.
    pub error_estimate: f64,
}

fn compose_sum(t1: f64, t2: f64, grid: &QuadratureGrid, x: f64, y: f64) -> Result<f64> {
    let mut acc = 0.0;
    for (&v, &w) in grid.nodes.iter().zip(&grid.weights) {
        acc += w * mehler_eval(t1, x, v)? * mehler_eval(t2, v, y)?;
    }
    Ok(acc)
}

/// `sum_k w_k h_{t1}(x, x_k) h_{t2}(x_k, y)`, which approximates
/// `h_{t1 + t2}(x, y)`.
pub fn semigroup_compose(
    t1: f64,
    t2: f64,
    grid: &QuadratureGrid,
    x: f64,
    y: f64,
    tol: f64,
) -> Result<ComposeValue> {
    check_t(t1)?;
    check_t(t2)?;
    let value = compose_sum(t1, t2, grid, x, y)?;
    let coarse = QuadratureGrid::gauss_hermite((3 * grid.len() / 4).max(1));
    let error_estimate = (value - compose_sum(t1, t2, &coarse, x, y)?).abs();
    if error_estimate > tol * value.abs().max(1.0) {
        return Err(Error::convergence(
            format!(
                "composition on {} nodes has error estimate {error_estimate:e}",
                grid.len()
            ),
            Complex64::new(value, 0.0),
            error_estimate,
        ));
    }
    Ok(ComposeValue {
        value,
        error_estimate,
    })
}

/// Shipped degree-20 test functions used by the isometry checks.
pub fn shipped_test_functions() -> Vec<(String, SpectralFunction)> {
    #[derive(Deserialize)]
    struct Entry {
        name: String,
        coefficients: Vec<[f64; 2]>,
    }
    #[derive(Deserialize)]
    struct File {
        functions: Vec<Entry>,
    }
    let file: File = serde_json::from_str(include_str!("../data/test_functions.json"))
        .expect("shipped test functions are valid JSON");
    file.functions
        .into_iter()
        .map(|e| {
            let coeffs = e
                .coefficients
                .iter()
                .map(|[re, im]| Complex64::new(*re, *im))
                .collect();
            (e.name, SpectralFunction::new(coeffs))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hermite_examples() {
        for x in [-1.3, 0.0, 0.7, 2.0] {
            assert!((hermite_eval(2, x) - (4.0 * x * x - 2.0)).abs() < 1e-12);
            assert_eq!(hermite_eval(0, x), 1.0);
        }
        assert_eq!(hermite_eval(3, 1.0), -4.0);
    }

    #[test]
    fn norm_examples() {
        assert_eq!(hermite_norm_sq(0).unwrap(), 1.0);
        assert_eq!(hermite_norm_sq(2).unwrap(), 8.0);
        assert_eq!(hermite_norm_sq(10).unwrap(), 1024.0 * 3_628_800.0);
        assert!(matches!(hermite_norm_sq(400), Err(Error::Range(_))));
    }

    #[test]
    fn norms_match_quadrature() {
        let g = QuadratureGrid::gauss_hermite(30);
        for j in 0..12 {
            let q = g.integrate(|x| hermite_eval(j, x).powi(2));
            let n = hermite_norm_sq(j).unwrap();
            assert!((q - n).abs() < 1e-11 * n, "j={j}");
        }
    }

    #[test]
    fn eigen_residual_examples() {
        let pts: Vec<f64> = (0..=100).map(|k| -5.0 + 0.1 * k as f64).collect();
        assert!(eigen_residual(1, &pts) < 1e-12);
        assert!(eigen_residual(2, &pts) < 1e-10);
        for j in 1..=12 {
            assert!(eigen_residual(j, &pts) <= 1e-8, "j={j}");
        }
    }

    #[test]
    fn projection_properties() {
        let f = SpectralFunction::from_real(&[0.0, 1.0, -2.0, 0.5]);
        let p = project(&f, 2);
        assert_eq!(project(&p, 2), p);
        assert_eq!(project(&f, 0).norm(), 0.0);
        let sum = (0..4).fold(SpectralFunction::new(vec![]), |acc, j| {
            acc.add(&project(&f, j))
        });
        assert_eq!(sum, f);
    }

    #[test]
    fn from_fn_recovers_polynomials() {
        // x^2 = (H_2 + 2)/4 = (sqrt(8) phi_2 + 2)/4
        let f = SpectralFunction::from_fn(|x| x * x, 4);
        let c = f.coeffs();
        assert!((c[0].re - 0.5).abs() < 1e-14);
        assert!((c[2].re - 8f64.sqrt() / 4.0).abs() < 1e-14);
        assert!(c[1].norm() < 1e-14 && c[3].norm() < 1e-14 && c[4].norm() < 1e-14);
        assert!((f.eval(1.7).re - 1.7 * 1.7).abs() < 1e-12);
    }

    #[test]
    fn multiplier_examples() {
        let one = SpectralFunction::from_real(&[1.0]);
        let m = Multiplier::ImaginaryPower { u: 1.0 };
        assert_eq!(apply_multiplier(&m, &one).norm(), 0.0);
        let shifted = Multiplier::shifted(1.0, 1.0).unwrap();
        let out = apply_multiplier(&shifted, &one);
        assert!((out.coeffs()[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let r = Multiplier::shifted(2.0, 3.0).unwrap();
        let expected = Complex64::from_polar(1.0, 2.0 * 3f64.ln());
        assert!((apply_multiplier(&r, &one).coeffs()[0] - expected).norm() < 1e-15);
        assert!(Multiplier::shifted(1.0, 0.0).is_err());
    }

    #[test]
    fn shipped_functions_are_isometric() {
        let fs = shipped_test_functions();
        assert!(fs.len() >= 3);
        for (_, f) in &fs {
            assert_eq!(f.degree(), 20);
            let shifted = apply_multiplier(&Multiplier::shifted(1.0, 1.0).unwrap(), f);
            assert!((shifted.norm() - f.norm()).abs() <= 1e-12);
            let mu = apply_multiplier(&Multiplier::ImaginaryPower { u: 1.0 }, f);
            let centered = f.add(&SpectralFunction::new(vec![-f.coeffs()[0]]));
            assert!((mu.norm() - centered.norm()).abs() <= 1e-12);
        }
    }

    #[test]
    fn mehler_examples() {
        assert!((mehler_eval(50.0, 1.0, 2.0).unwrap() - 1.0).abs() <= 1e-15);
        let a = mehler_eval(0.7, 0.3, -1.1).unwrap();
        let b = mehler_eval(0.7, -1.1, 0.3).unwrap();
        assert!((a - b).abs() <= 1e-15 * a);
        let expected = 1.0 / (1.0 - (-2f64).exp()).sqrt();
        assert!((mehler_eval(1.0, 0.0, 0.0).unwrap() - expected).abs() < 1e-15);
        assert!(matches!(mehler_eval(0.0, 1.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(mehler_eval(-1.0, 1.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn symmetric_and_asymmetric_forms_agree() {
        for &t in &[0.05, 0.2, 1.0, 3.0, 10.0] {
            for &x in &[-3.0, -0.4, 0.0, 1.5, 3.0] {
                for &y in &[-2.5, 0.0, 0.9, 3.0] {
                    let a = mehler_eval(t, x, y).unwrap();
                    let b = mehler_eval_asymmetric(t, x, y).unwrap();
                    assert!(
                        (a - b).abs() <= 1e-12 * a.max(b),
                        "t={t} x={x} y={y} {a} {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn substituted_kernel_examples() {
        let s = 0.5f64.tanh();
        assert!((time_of_s(s) - 1.0).abs() < 1e-15);
        let a = mehler_substituted_eval(s, 0.0, 0.0).unwrap();
        let b = mehler_eval(1.0, 0.0, 0.0).unwrap();
        assert!((a - b).abs() <= 1e-12 * b);
        assert!(mehler_substituted_eval(1e-6, 1.0, 0.0).unwrap() < 1e-100);
        assert!(mehler_substituted_eval(0.0, 1.0, 0.0).is_err());
        assert!(mehler_substituted_eval(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn series_examples() {
        let closed = mehler_eval(1.0, 0.0, 0.0).unwrap();
        let s = mehler_series_eval(
            1.0,
            0.0,
            0.0,
            Truncation::Fixed {
                terms: 41,
                tol: 1e-10,
            },
        )
        .unwrap();
        assert!((s.value - closed).abs() < 1e-10);
        let closed = mehler_eval(0.2, 2.0, -1.0).unwrap();
        let s = mehler_series_eval(0.2, 2.0, -1.0, Truncation::Adaptive { tol: 1e-9 }).unwrap();
        assert!((s.value - closed).abs() < 1e-8 && (s.value - closed).abs() <= s.tail_bound);
        let first = mehler_series_eval(
            1.0,
            0.3,
            0.4,
            Truncation::Fixed {
                terms: 1,
                tol: f64::INFINITY,
            },
        )
        .unwrap();
        assert_eq!(first.value, 1.0);
        assert!(matches!(
            mehler_series_eval(
                0.2,
                3.0,
                3.0,
                Truncation::Fixed {
                    terms: 5,
                    tol: 1e-8
                }
            ),
            Err(Error::Convergence { .. })
        ));
    }

    #[test]
    fn precise_series_resolves_cancellation() {
        let closed = mehler_eval(0.2, -3.0, 3.0).unwrap();
        assert!(closed < 1e-30);
        let s = mehler_series_eval_precise(0.2, -3.0, 3.0, 1e-12).unwrap();
        assert!((s.value - closed).abs() <= 1e-10 * closed);
        assert!(s.terms > MEHLER_SERIES_CAP);
        let first = mehler_series_eval_precise(1.0, 0.0, 0.0, 1e-14).unwrap();
        assert!((first.value - mehler_eval(1.0, 0.0, 0.0).unwrap()).abs() < 1e-14);
        assert!(mehler_series_eval_precise(1.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn compose_examples() {
        let grid = QuadratureGrid::gauss_hermite(160);
        let c = semigroup_compose(0.5, 0.5, &grid, 1.0, -1.0, 1e-8).unwrap();
        assert!((c.value - mehler_eval(1.0, 1.0, -1.0).unwrap()).abs() < 1e-6);
        let c = semigroup_compose(0.3, 0.7, &grid, 0.0, 0.0, 1e-8).unwrap();
        assert!((c.value - mehler_eval(1.0, 0.0, 0.0).unwrap()).abs() < 1e-6);
        let c = semigroup_compose(0.5, 40.0, &grid, 0.7, -0.2, 1e-8).unwrap();
        assert!((c.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn stochasticity() {
        let grid = QuadratureGrid::gauss_hermite(200);
        for &t in &[0.2, 1.0, 5.0] {
            for k in 0..=12 {
                let x = -3.0 + 0.5 * k as f64;
                let total = grid.integrate(|v| mehler_eval(t, x, v).unwrap());
                assert!((total - 1.0).abs() < 1e-8, "t={t} x={x} total={total}");
            }
        }
    }

    proptest! {
        #[test]
        fn mehler_symmetric_positive(t in 0.05f64..8.0, x in -4.0f64..4.0, y in -4.0f64..4.0) {
            let a = mehler_eval(t, x, y).unwrap();
            let b = mehler_eval(t, y, x).unwrap();
            prop_assert!(a > 0.0);
            prop_assert!((a - b).abs() <= 1e-14 * a);
        }

        #[test]
        fn unimodular_multipliers_preserve_norm(
            coeffs in proptest::collection::vec(-1.0f64..1.0, 1..30),
            phases in proptest::collection::vec(-10.0f64..10.0, 30),
        ) {
            let f = SpectralFunction::from_real(&coeffs);
            let m = Multiplier::Table { values: phases.iter().map(|&p| Complex64::from_polar(1.0, p)).collect() };
            let out = apply_multiplier(&m, &f);
            prop_assert!((out.norm() - f.norm()).abs() <= 1e-12 * (1.0 + f.norm()));
        }
    }
}

//! Kernels of the imaginary powers `(rI + L)^{iu}` in dimension one.
//!
//! After the substitution `t = log((1 + s)/(1 - s))` the kernel reads
//!
//! ```text
//! k(x, y) = N(u) * int_0^1 g_u(s) ((1-s)/(1+s))^{r-1} / (1+s) * e^{-Q_s(x,y)} ds / sqrt(s)
//! g_u(s)  = [log((1+s)/(1-s))]^{-iu-1}
//! Q_s     = ((x-y)^2 / s + s (x+y)^2) / 4 - (x^2 + y^2) / 2
//! ```
//!
//! where `N(u)` is the normalization factor (see [`Normalization`]). For
//! `r = 1` the same integral is `e^{y^2} I(a, sigma)` with the signed
//! parameters `a = x^2 - y^2`, `sigma = (x - y)/(x + y)`.
//!
//! All integrals share one change of variables: `tau = log s` on `(0, 1/2]`
//! and `tau = log(1/2) + log(1 / (2(1 - s)))` on `[1/2, 1)`. The Jacobian is
//! continuous at the junction and the oscillating factor `g_u` becomes a
//! slowly varying phase in `tau`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ou_spectral::orthonormal_hermite_table;
use crate::quadrature::{integrate, integrate_breaks, QuadOptions, QuadResult};
use crate::special::gamma_complex;
use crate::{Error, Result};

/// Smallest `a` accepted by [`i_integral`].
pub const A_MIN: f64 = 1e-6;
/// Integrand mass below `e^{-TAIL_MARGIN}` of the peak is dropped.
const TAIL_MARGIN: f64 = 90.0;
const S_MID: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpowParams {
    pub u: f64,
    pub r: f64,
    pub dim: usize,
}

impl ImpowParams {
    pub fn new(u: f64, r: f64) -> Result<Self> {
        if !u.is_finite() || u == 0.0 {
            return Err(Error::InvalidInput(format!(
                "u must be finite and nonzero, got {u}"
            )));
        }
        if !r.is_finite() || r <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "r must be finite and positive, got {r}"
            )));
        }
        Ok(Self { u, r, dim: 1 })
    }

    pub fn conjugate(&self) -> Self {
        Self {
            u: -self.u,
            ..*self
        }
    }
}

/// Prefactor in front of the `s`-integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    /// No prefactor.
    Raw,
    /// `1 / Gamma(iu)`.
    GammaIu,
    /// `1 / Gamma(-iu)`, from `lambda^{iu} = Gamma(-iu)^{-1} int t^{-iu-1} e^{-lambda t} dt`.
    GammaMinusIu,
}

/// Normalization that reproduces the spectral multiplier `(r + j)^{iu}`;
/// confirmed by [`spectral_action_check`].
pub const CANONICAL_NORMALIZATION: Normalization = Normalization::GammaMinusIu;

impl Normalization {
    pub fn factor(self, u: f64) -> Result<Complex64> {
        Ok(match self {
            Normalization::Raw => Complex64::new(1.0, 0.0),
            Normalization::GammaIu => gamma_complex(Complex64::new(0.0, u))?.inv(),
            Normalization::GammaMinusIu => gamma_complex(Complex64::new(0.0, -u))?.inv(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    Quadrature,
    ClosedForm,
    SpectralAction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelValue {
    pub value: Complex64,
    pub error: f64,
    pub route: Route,
}

/// Integrand ingredients at a single `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrandFrame {
    pub s: f64,
    pub g_u: Complex64,
    pub q_s: f64,
    /// `F_a(s / sigma)` with the signed parameters of `(x, y)`.
    pub f_a: f64,
}

impl IntegrandFrame {
    pub fn at(u: f64, x: f64, y: f64, s: f64) -> Result<Self> {
        let g_u = g_u_eval(u, s)?;
        let a = x * x - y * y;
        let sigma = (x - y) / (x + y);
        Ok(Self {
            s,
            g_u,
            q_s: q_s(s, x, y),
            f_a: f_a_signed(a, s / sigma),
        })
    }
}

/// `log((1 + s)/(1 - s))` given `s` and `1 - s`.
fn log_ratio(s: f64, oms: f64) -> f64 {
    if s <= S_MID {
        2.0 * s.atanh()
    } else {
        ((1.0 + s) / oms).ln()
    }
}

fn g_u_inner(u: f64, s: f64, oms: f64) -> Complex64 {
    let l = log_ratio(s, oms);
    Complex64::from_polar(1.0 / l, -u * l.ln())
}

pub fn g_u_eval(u: f64, s: f64) -> Result<Complex64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Domain(format!("g_u needs s in (0, 1), got {s}")));
    }
    Ok(g_u_inner(u, s, 1.0 - s))
}

fn f_a_signed(a: f64, s: f64) -> f64 {
    let d = s - 1.0;
    -a * d * d / (4.0 * s)
}

/// `F_a(s) = -a (s - 1)^2 / (4 s)`.
pub fn f_a_eval(a: f64, s: f64) -> Result<f64> {
    if !(a > 0.0) || !(s > 0.0) {
        return Err(Error::InvalidInput(format!(
            "F_a needs a > 0 and s > 0, got a={a}, s={s}"
        )));
    }
    Ok(f_a_signed(a, s))
}

/// `Q_s(x, y) = ((x - y)^2 / s + s (x + y)^2)/4 - (x^2 + y^2)/2`.
pub fn q_s(s: f64, x: f64, y: f64) -> f64 {
    let d = x - y;
    let p = x + y;
    0.25 * (d * d / s + s * p * p) - 0.5 * (x * x + y * y)
}

/// Shape `c0 - b s - d / s` of every exponent in this module, used only to
/// place breakpoints, cut the left tail and pick the scaling.
#[derive(Debug, Clone, Copy)]
struct Shape {
    c0: f64,
    b: f64,
    d: f64,
}

impl Shape {
    fn of_points(x: f64, y: f64) -> Self {
        Self {
            c0: 0.5 * (x * x + y * y),
            b: 0.25 * (x + y).powi(2),
            d: 0.25 * (x - y).powi(2),
        }
    }

    fn of_params(a: f64, sigma: f64) -> Self {
        Self {
            c0: 0.5 * a,
            b: 0.25 * a / sigma,
            d: 0.25 * a * sigma,
        }
    }

    fn eval(&self, s: f64) -> f64 {
        self.c0 - self.b * s - self.d / s
    }

    fn peak(&self) -> f64 {
        if self.b > 0.0 {
            (self.d / self.b).sqrt()
        } else {
            f64::INFINITY
        }
    }

    /// Maximum over `(0, 1]`.
    fn max_unit(&self) -> f64 {
        self.eval(self.peak().min(1.0))
    }
}

fn tau_of_s(s: f64, oms: f64) -> f64 {
    if s <= S_MID {
        s.ln()
    } else {
        S_MID.ln() + (0.5 / oms).ln()
    }
}

/// `(s, 1 - s, ds/dtau)`.
fn s_of_tau(tau: f64) -> (f64, f64, f64) {
    let t0 = S_MID.ln();
    if tau <= t0 {
        let s = tau.exp();
        (s, -tau.exp_m1(), s)
    } else {
        let oms = 0.5 * (t0 - tau).exp();
        (1.0 - oms, oms, oms)
    }
}

/// `int_lo^hi f(s, 1 - s) ds` where `f` already carries `e^{E(s) - scale}`.
/// `decay` is the power `(1 - s)^{decay - 1}` of the amplitude at `s = 1`.
fn s_quad<F>(
    f: F,
    shape: Shape,
    lo: f64,
    hi: f64,
    decay: f64,
    scale: f64,
    opts: &QuadOptions,
) -> QuadResult<Complex64>
where
    F: Fn(f64, f64) -> Complex64,
{
    let zero = QuadResult {
        value: Complex64::new(0.0, 0.0),
        error: 0.0,
        evals: 0,
        converged: true,
    };
    let cut = if shape.d > 0.0 {
        shape.d / (shape.c0 - scale + TAIL_MARGIN)
    } else {
        0.0
    };
    let lo = lo.max(cut);
    if lo >= hi {
        return zero;
    }
    let t0 = S_MID.ln();
    let t_lo = tau_of_s(lo, 1.0 - lo);
    let t_hi = if hi >= 1.0 {
        t0 + (TAIL_MARGIN + decay.ln().abs()) / decay
    } else {
        tau_of_s(hi, 1.0 - hi)
    };
    if t_hi <= t_lo {
        return zero;
    }

    let mut breaks = vec![t_lo, t_hi];
    let mut k = t_lo.ceil();
    while k < t0.min(t_hi) {
        breaks.push(k);
        k += 1.0;
    }
    breaks.push(t0);
    let mut z = 1.0;
    while t0 + z < t_hi {
        breaks.push(t0 + z);
        z *= 2.0;
    }
    let p = shape.peak();
    if p < 1.0 {
        let jac = if p <= S_MID { p } else { 1.0 - p };
        let curv = 2.0 * shape.d / (p * p * p);
        let width = 1.0 / (curv.sqrt() * jac);
        let tp = tau_of_s(p, 1.0 - p);
        for m in [0.0, -1.0, 1.0, -3.0, 3.0, -8.0, 8.0] {
            breaks.push(tp + m * width);
        }
    }
    breaks.retain(|&b| b >= t_lo && b <= t_hi && b.is_finite());
    breaks.sort_by(|a, b| a.partial_cmp(b).expect("finite breaks"));
    breaks.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));

    integrate_breaks(
        |tau| {
            let (s, oms, jac) = s_of_tau(tau);
            if s <= 0.0 || oms <= 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            f(s, oms) * jac
        },
        &breaks,
        opts,
    )
}

fn check_result(res: QuadResult<Complex64>, scale: f64, what: &str) -> Result<(Complex64, f64)> {
    let factor = scale.exp();
    if !res.converged {
        return Err(Error::convergence(
            format!(
                "{what}: tolerance not reached within {} evaluations",
                res.evals
            ),
            res.value * factor,
            res.error * factor,
        ));
    }
    Ok((res.value * factor, res.error * factor))
}

fn signed_params(x: f64, y: f64) -> (f64, f64) {
    (x * x - y * y, (x - y) / (x + y))
}

/// `I(a, sigma)` for signed parameters; returns the mantissa relative to
/// `e^{scale}` together with the scale.
fn i_signed(u: f64, a: f64, sigma: f64, opts: &QuadOptions) -> (QuadResult<Complex64>, f64) {
    let shape = Shape::of_params(a, sigma);
    let scale = shape.max_unit();
    let res = s_quad(
        |s, oms| {
            let e = f_a_signed(a, s / sigma) - scale;
            g_u_inner(u, s, oms) * (e.exp() / ((1.0 + s) * s.sqrt()))
        },
        shape,
        0.0,
        1.0,
        1.0,
        scale,
        opts,
    );
    (res, scale)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralValue {
    pub value: Complex64,
    pub error: f64,
}

/// `I(a, sigma) = int_0^1 g_u(s) e^{F_a(s / sigma)} / (1 + s) ds / sqrt(s)`.
pub fn i_integral(u: f64, a: f64, sigma: f64, opts: &QuadOptions) -> Result<IntegralValue> {
    if !(a >= A_MIN) || !a.is_finite() {
        return Err(Error::InvalidInput(format!(
            "a must be at least {A_MIN:e}, got {a}"
        )));
    }
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::InvalidInput(format!(
            "sigma must lie in (0, 1), got {sigma}"
        )));
    }
    let (res, scale) = i_signed(u, a, sigma, opts);
    let (value, error) = check_result(res, scale, "I(a, sigma)")?;
    Ok(IntegralValue { value, error })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaComponents {
    pub i: IntegralValue,
    pub j: IntegralValue,
    pub h: IntegralValue,
    pub h1: IntegralValue,
    pub h2: IntegralValue,
    pub h3: IntegralValue,
}

/// Splits `I(a, sigma)` into the main term
/// `J = g_u(sigma) int_{sigma/2}^{2/3} e^{F_a(s/sigma)}/(1+s) ds/sqrt(s)` and
/// the remainders `H1` on `(0, sigma/2)`, `H2` on `(2/3, 1)` and
/// `H3 = int_{sigma/2}^{2/3} (g_u(s) - g_u(sigma)) ...`.
pub fn lemma_components(u: f64, a: f64, sigma: f64, opts: &QuadOptions) -> Result<LemmaComponents> {
    if !(a >= 1.0) || !a.is_finite() {
        return Err(Error::InvalidInput(format!(
            "lemma split needs a >= 1, got {a}"
        )));
    }
    if !(sigma > 0.0 && sigma <= 0.5) {
        return Err(Error::InvalidInput(format!(
            "lemma split needs sigma in (0, 1/2], got {sigma}"
        )));
    }
    let i = i_integral(u, a, sigma, opts)?;
    let shape = Shape::of_params(a, sigma);
    let scale = shape.max_unit();
    let g_sigma = g_u_eval(u, sigma)?;
    let envelope = |s: f64| (f_a_signed(a, s / sigma) - scale).exp() / ((1.0 + s) * s.sqrt());
    let piece = |lo: f64, hi: f64, which: u8, name: &str| -> Result<IntegralValue> {
        let res = s_quad(
            |s, oms| match which {
                0 => Complex64::new(envelope(s), 0.0),
                1 => g_u_inner(u, s, oms) * envelope(s),
                _ => (g_u_inner(u, s, oms) - g_sigma) * envelope(s),
            },
            shape,
            lo,
            hi,
            1.0,
            scale,
            opts,
        );
        let (value, error) = check_result(res, scale, name)?;
        Ok(IntegralValue { value, error })
    };
    let base = piece(0.5 * sigma, 2.0 / 3.0, 0, "J")?;
    let j = IntegralValue {
        value: g_sigma * base.value,
        error: g_sigma.norm() * base.error,
    };
    let h1 = piece(0.0, 0.5 * sigma, 1, "H1")?;
    let h2 = piece(2.0 / 3.0, 1.0, 1, "H2")?;
    let h3 = piece(0.5 * sigma, 2.0 / 3.0, 2, "H3")?;
    let h = IntegralValue {
        value: h1.value + h2.value + h3.value,
        error: h1.error + h2.error + h3.error,
    };
    Ok(LemmaComponents {
        i,
        j,
        h,
        h1,
        h2,
        h3,
    })
}

/// Unnormalized `s`-integral for `k(x, y)` as `(mantissa, scale)`, with the
/// extra factor `e^{shift}` folded into the scale.
fn raw_kernel(
    p: &ImpowParams,
    x: f64,
    y: f64,
    shift: f64,
    opts: &QuadOptions,
) -> Result<(Complex64, f64)> {
    if !x.is_finite() || !y.is_finite() {
        return Err(Error::InvalidInput("kernel points must be finite".into()));
    }
    if x == y {
        return Err(Error::Domain(format!(
            "kernel is singular on the diagonal x = y = {x}"
        )));
    }
    let shape = Shape::of_points(x, y);
    let scale = shape.max_unit();
    let (u, r) = (p.u, p.r);
    let res = s_quad(
        |s, oms| {
            let mut e = -q_s(s, x, y) - scale;
            if r != 1.0 {
                e += (r - 1.0) * (oms.ln() - s.ln_1p());
            }
            g_u_inner(u, s, oms) * (e.exp() / ((1.0 + s) * s.sqrt()))
        },
        shape,
        0.0,
        1.0,
        r,
        scale,
        opts,
    );
    check_result(res, scale + shift, "kernel quadrature")
}

fn normalized(
    p: &ImpowParams,
    raw: (Complex64, f64),
    norm: Normalization,
    route: Route,
) -> Result<KernelValue> {
    let c = norm.factor(p.u)?;
    Ok(KernelValue {
        value: raw.0 * c,
        error: raw.1 * c.norm(),
        route,
    })
}

/// `k(x, y)` by direct quadrature of the `s`-integral, with the canonical
/// normalization.
pub fn kernel_quadrature(p: &ImpowParams, x: f64, y: f64) -> Result<KernelValue> {
    kernel_quadrature_with(p, x, y, CANONICAL_NORMALIZATION, &QuadOptions::default())
}

pub fn kernel_quadrature_with(
    p: &ImpowParams,
    x: f64,
    y: f64,
    norm: Normalization,
    opts: &QuadOptions,
) -> Result<KernelValue> {
    let raw = raw_kernel(p, x, y, 0.0, opts)?;
    normalized(p, raw, norm, Route::Quadrature)
}

/// `k(x, y) e^{-x^2}`, evaluated without forming the possibly huge `k`.
pub fn kernel_gamma_weighted(
    p: &ImpowParams,
    x: f64,
    y: f64,
    opts: &QuadOptions,
) -> Result<KernelValue> {
    let raw = raw_kernel(p, x, y, -x * x, opts)?;
    normalized(p, raw, CANONICAL_NORMALIZATION, Route::Quadrature)
}

/// `k(x, y) = e^{y^2} I(a, sigma)` with `a = x^2 - y^2` and
/// `sigma = (x - y)/(x + y)`, valid for `r = 1`.
pub fn kernel_closed_form_1d(p: &ImpowParams, x: f64, y: f64) -> Result<KernelValue> {
    kernel_closed_form_with(p, x, y, CANONICAL_NORMALIZATION, &QuadOptions::default())
}

pub fn kernel_closed_form_with(
    p: &ImpowParams,
    x: f64,
    y: f64,
    norm: Normalization,
    opts: &QuadOptions,
) -> Result<KernelValue> {
    if p.r != 1.0 {
        return Err(Error::InvalidInput(format!(
            "closed form needs r = 1, got {}",
            p.r
        )));
    }
    if x == y || x == -y {
        return Err(Error::Domain(format!(
            "closed form undefined at x = +-y ({x}, {y})"
        )));
    }
    let (a, sigma) = signed_params(x, y);
    let (res, scale) = i_signed(p.u, a, sigma, opts);
    let raw = check_result(res, scale + y * y, "closed form")?;
    normalized(p, raw, norm, Route::ClosedForm)
}

/// Hermite coefficients of `exp(-beta (v - c)^2)` in the orthonormal basis:
/// `c_j = (1 + beta)^{-1/2} e^{-alpha c^2} alpha^{j/2} phi_j(c sqrt(alpha))`,
/// `alpha = beta / (1 + beta)`.
pub fn gaussian_bump_coefficients(center: f64, beta: f64, jmax: usize) -> Vec<f64> {
    let alpha = beta / (1.0 + beta);
    let pre = (-alpha * center * center).exp() / (1.0 + beta).sqrt();
    let sa = alpha.sqrt();
    let mut w = pre;
    orthonormal_hermite_table(jmax, center * sa)
        .into_iter()
        .map(|phi| {
            let c = w * phi;
            w *= sa;
            c
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralActionReport {
    pub x0: f64,
    pub bump_center: f64,
    pub beta: f64,
    /// `int k_raw(x0, v) f(v) dgamma(v)` with no prefactor.
    pub raw_action: Complex64,
    /// `sum_j (r + j)^{iu} c_j phi_j(x0)`.
    pub spectral_action: Complex64,
    /// Prefactor that maps the raw action onto the spectral one.
    pub fitted_factor: Complex64,
    /// Relative discrepancy of each candidate normalization.
    pub candidates: Vec<(Normalization, f64)>,
    pub resolved: Option<Normalization>,
}

/// Tolerance for accepting a normalization in [`spectral_action_check`].
pub const SPECTRAL_ACTION_TOL: f64 = 1e-4;

/// Compares the kernel action on a Gaussian bump centred away from `x0`
/// with the spectral definition `sum_j (r + j)^{iu} P_j f (x0)`.
pub fn spectral_action_check(
    p: &ImpowParams,
    x0: f64,
    bump_center: f64,
    beta: f64,
) -> Result<SpectralActionReport> {
    if !(beta > 0.0) {
        return Err(Error::InvalidInput(format!(
            "bump width beta must be positive, got {beta}"
        )));
    }
    // f < e^{-45} outside the window, and f(x0 +- 1/2) < e^{-40}
    let reach = (45.0 / beta).sqrt();
    if beta * ((bump_center - x0).abs() - 0.5).max(0.0).powi(2) < 40.0 {
        return Err(Error::Precondition(format!(
            "bump at {bump_center} is not separated from x0 = {x0}"
        )));
    }
    let (lo, hi) = if bump_center > x0 {
        ((x0 + 0.5).max(bump_center - reach), bump_center + reach)
    } else {
        (bump_center - reach, (x0 - 0.5).min(bump_center + reach))
    };
    let inner = QuadOptions::default();
    let mut failure = None;
    let res = integrate(
        |v: f64| {
            let f = (-beta * (v - bump_center).powi(2)).exp();
            match raw_kernel(p, v, x0, -v * v, &inner) {
                Ok((k, _)) => k * (f / PI.sqrt()),
                Err(e) => {
                    failure.get_or_insert(e);
                    Complex64::new(0.0, 0.0)
                }
            }
        },
        lo,
        hi,
        16,
        &QuadOptions {
            abs_tol: 0.0,
            rel_tol: 1e-9,
            max_evals: 20_000,
        },
    );
    if let Some(e) = failure {
        return Err(e);
    }
    if !res.converged {
        return Err(Error::convergence(
            "spectral action: outer integral",
            res.value,
            res.error,
        ));
    }
    let raw_action = res.value;

    let alpha = beta / (1.0 + beta);
    // terms decay like alpha^{j/2}
    let jmax = ((40.0 + bump_center.powi(2).max(x0 * x0)) / (-0.5 * alpha.ln())).ceil() as usize;
    let coeffs = gaussian_bump_coefficients(bump_center, beta, jmax);
    let phis = orthonormal_hermite_table(jmax, x0);
    let spectral_action: Complex64 = coeffs
        .iter()
        .zip(&phis)
        .enumerate()
        .map(|(j, (c, phi))| Complex64::from_polar(c * phi, p.u * (p.r + j as f64).ln()))
        .sum();

    let fitted_factor = spectral_action / raw_action;
    let mut candidates = Vec::new();
    let mut resolved = None;
    for norm in [
        Normalization::Raw,
        Normalization::GammaIu,
        Normalization::GammaMinusIu,
    ] {
        let c = norm.factor(p.u)?;
        let rel = (raw_action * c - spectral_action).norm() / spectral_action.norm();
        if rel <= SPECTRAL_ACTION_TOL && resolved.is_none() {
            resolved = Some(norm);
        }
        candidates.push((norm, rel));
    }
    Ok(SpectralActionReport {
        x0,
        bump_center,
        beta,
        raw_action,
        spectral_action,
        fitted_factor,
        candidates,
        resolved,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::QuadratureGrid;
    use proptest::prelude::*;

    #[test]
    fn g_u_examples() {
        let g = g_u_eval(1.0, 0.5).unwrap();
        assert!((g.norm() - 1.0 / 3f64.ln()).abs() < 1e-15);
        let g0 = g_u_eval(0.0, 0.3).unwrap();
        assert!(g0.im == 0.0 && (g0.re - 1.0 / (1.3f64 / 0.7).ln()).abs() < 1e-15);
        let gm = g_u_eval(-1.7, 0.8).unwrap();
        assert!((gm - g_u_eval(1.7, 0.8).unwrap().conj()).norm() < 1e-16);
        assert!(g_u_eval(1.0, 0.0).is_err() && g_u_eval(1.0, 1.0).is_err());
    }

    #[test]
    fn f_a_examples() {
        assert_eq!(f_a_eval(3.0, 1.0).unwrap(), 0.0);
        assert!((f_a_eval(4.0, 2.0).unwrap() + 0.5).abs() < 1e-15);
        let (a, b) = (
            f_a_eval(2.5, 3.0).unwrap(),
            f_a_eval(2.5, 1.0 / 3.0).unwrap(),
        );
        assert!((a - b).abs() < 1e-15);
        assert!(f_a_eval(-1.0, 1.0).is_err());
    }

    #[test]
    fn exponent_identity() {
        // -Q_s = F_a(s / sigma) + y^2 with signed parameters
        for &(x, y) in &[
            (2.0, 1.0),
            (1.0, 2.0),
            (-0.7, 1.9),
            (3.0, -0.2),
            (0.3, -4.0),
        ] {
            let (a, sigma) = signed_params(x, y);
            assert!((a * sigma - (x - y) * (x - y)).abs() < 1e-12);
            assert!((a / sigma - (x + y) * (x + y)).abs() < 1e-12);
            for &s in &[1e-3, 0.1, 0.5, 0.9] {
                let fr = IntegrandFrame::at(1.0, x, y, s).unwrap();
                assert!((-fr.q_s - fr.f_a - y * y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn q_s_matches_substituted_mehler() {
        use crate::ou_spectral::mehler_substituted_eval;
        for &(x, y, s) in &[(1.0, 2.0, 0.3), (-0.5, 0.8, 0.7)] {
            let h = mehler_substituted_eval(s, x, y).unwrap();
            let via_q = (1.0 + s) / (4.0 * s).sqrt() * (-q_s(s, x, y)).exp();
            assert!((h - via_q).abs() < 1e-14 * h);
        }
    }

    #[test]
    fn bump_coefficients_match_projection() {
        let (c, beta) = (0.7, 1.5);
        let coeffs = gaussian_bump_coefficients(c, beta, 12);
        let grid = QuadratureGrid::gauss_hermite(80);
        for (j, cj) in coeffs.iter().enumerate() {
            let q = grid.integrate(|v| {
                (-beta * (v - c).powi(2)).exp() * orthonormal_hermite_table(j, v)[j]
            });
            assert!((q - cj).abs() < 1e-12, "j={j}");
        }
    }

    #[test]
    fn i_integral_refinement() {
        let coarse = i_integral(1.0, 10.0, 0.1, &QuadOptions::with_abs(1e-8)).unwrap();
        let fine = i_integral(1.0, 10.0, 0.1, &QuadOptions::with_abs(5e-9)).unwrap();
        assert!((coarse.value - fine.value).norm() <= coarse.error.max(1e-8));
        assert!(i_integral(1.0, 1e-7, 0.1, &QuadOptions::default()).is_err());
        assert!(i_integral(1.0, 1.0, 1.0, &QuadOptions::default()).is_err());
    }

    #[test]
    fn lemma_split_sums() {
        let c = lemma_components(1.0, 10.0, 0.1, &QuadOptions::default()).unwrap();
        let sum = c.j.value + c.h.value;
        assert!((sum - c.i.value).norm() <= 2.0 * (c.i.error + c.j.error + c.h.error) + 1e-12);
    }

    #[test]
    fn kernel_conjugation() {
        let p = ImpowParams::new(1.0, 1.0).unwrap();
        let k = kernel_quadrature(&p, 1.0, 2.0).unwrap();
        let km = kernel_quadrature(&p.conjugate(), 1.0, 2.0).unwrap();
        assert!((k.value - km.value.conj()).norm() <= 1e-12 * k.value.norm());
        assert!(kernel_quadrature(&p, 1.0, 1.0).is_err());
    }

    #[test]
    fn closed_form_agrees_on_both_sides_of_diagonal() {
        let p = ImpowParams::new(1.0, 1.0).unwrap();
        for &(x, y) in &[(2.0, 1.0), (1.0, 2.0), (-1.5, 0.4), (0.2, -3.0)] {
            let q = kernel_quadrature(&p, x, y).unwrap();
            let c = kernel_closed_form_1d(&p, x, y).unwrap();
            assert!(
                (q.value - c.value).norm() <= 1e-6 * q.value.norm(),
                "({x},{y})"
            );
        }
        assert!(kernel_closed_form_1d(&p, 2.0, -2.0).is_err());
    }

    #[test]
    fn weighted_kernel_consistent() {
        let p = ImpowParams::new(1.0, 1.0).unwrap();
        let k = kernel_quadrature(&p, 1.3, -0.4).unwrap();
        let w = kernel_gamma_weighted(&p, 1.3, -0.4, &QuadOptions::default()).unwrap();
        assert!((k.value * (-1.69f64).exp() - w.value).norm() < 1e-12 * w.value.norm());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn g_u_modulus(u in -10.0f64..10.0, s in 0.001f64..0.999) {
            let g = g_u_eval(u, s).unwrap();
            prop_assert!((g.norm() * ((1.0 + s) / (1.0 - s)).ln() - 1.0).abs() < 1e-13);
        }

        #[test]
        fn f_a_nonpositive(a in 0.001f64..100.0, s in 0.001f64..100.0) {
            prop_assert!(f_a_eval(a, s).unwrap() <= 0.0);
        }
    }
}

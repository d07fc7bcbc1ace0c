//! Estimators for the boundedness criteria of singular integral kernels on
//! `(R, gamma)`:
//!
//! * the local Hörmander constant
//!   `H_k = sup_B sup_{y, y' in B} int_{(2B)^c} |k(x,y) - k(x,y')| dgamma(x)`,
//! * the mass at infinity `Phi(y) = int_{(2B_y)^c} |k(x,y)| dgamma(x)` and
//!   `I_inf = sup_y Phi(y)`,
//! * `L^1(gamma)` norms of atom images.
//!
//! Every `x`-integral runs over `[-X, X]` with
//! `X = max(|c|, |y|) + margin`, extended by `step` until the last slab adds
//! less than `rel_increment` of the running value.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::gauss_geometry::{admissible_radius, ball_measure, maximal_ball_1d, GaussBall};
use crate::hardy_atoms::{validate_atom, Atom, AtomKind};
use crate::impow_kernel::{
    kernel_gamma_weighted, kernel_quadrature_with, ImpowParams, CANONICAL_NORMALIZATION,
};
use crate::parallel::ordered_map;
use crate::quadrature::{integrate, integrate_breaks, GaussLegendre, QuadOptions};
use crate::{Error, Result};

/// Refinement increase below which a Hörmander scan has reached a plateau.
pub const PLATEAU_TOL: f64 = 0.02;
/// Refinement increase above which a Hörmander scan is growing.
pub const GROWTH_TOL: f64 = 0.10;
/// Largest relative change over the last step of a `y`-scan for a bounded
/// verdict.
pub const SCAN_PLATEAU_TOL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailHint {
    Gaussian,
    LogarithmicGrowth,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSample {
    pub value: Complex64,
    pub error: f64,
}

/// A kernel with respect to the Gauss measure,
/// `Tf(x) = int k(x, y) f(y) dgamma(y)`.
pub trait KernelHandle: Sync {
    fn label(&self) -> String;
    fn tail_hint(&self) -> TailHint;
    /// Whether the kernel blows up on the diagonal.
    fn diagonal_singular(&self) -> bool;
    /// Bound on the operator norm of `T` on `L^2(gamma)`, when known.
    fn l2_norm_bound(&self) -> Option<f64>;
    fn eval(&self, x: f64, y: f64) -> Result<KernelSample>;
    /// `k(x, y) e^{-x^2}`.
    fn eval_gamma_weighted(&self, x: f64, y: f64) -> Result<KernelSample> {
        let s = self.eval(x, y)?;
        let w = (-x * x).exp();
        Ok(KernelSample {
            value: s.value * w,
            error: s.error * w,
        })
    }
}

fn exact(v: f64) -> KernelSample {
    KernelSample {
        value: Complex64::new(v, 0.0),
        error: 0.0,
    }
}

/// Mehler kernel `h_t` of `e^{-tL}`.
#[derive(Debug, Clone, Copy)]
pub struct MehlerKernel {
    pub t: f64,
}

impl MehlerKernel {
    fn log_value(&self, x: f64, y: f64) -> (f64, f64) {
        let s = (0.5 * self.t).tanh();
        let pre = (1.0 + s) / (4.0 * s).sqrt();
        let expo = 0.5 * (x * x + y * y) - 0.25 * ((x - y).powi(2) / s + s * (x + y).powi(2));
        (pre, expo)
    }
}

impl KernelHandle for MehlerKernel {
    fn label(&self) -> String {
        format!("mehler(t={})", self.t)
    }
    fn tail_hint(&self) -> TailHint {
        TailHint::Gaussian
    }
    fn diagonal_singular(&self) -> bool {
        false
    }
    fn l2_norm_bound(&self) -> Option<f64> {
        Some(1.0)
    }
    fn eval(&self, x: f64, y: f64) -> Result<KernelSample> {
        Ok(exact(crate::ou_spectral::mehler_eval(self.t, x, y)?))
    }
    fn eval_gamma_weighted(&self, x: f64, y: f64) -> Result<KernelSample> {
        if !(self.t > 0.0) {
            return Err(Error::Domain(format!(
                "semigroup time must be positive, got {}",
                self.t
            )));
        }
        let (pre, expo) = self.log_value(x, y);
        Ok(exact(pre * (expo - x * x).exp()))
    }
}

/// Kernel of `(rI + L)^{iu}`.
#[derive(Debug, Clone, Copy)]
pub struct ImpowKernel {
    pub params: ImpowParams,
    pub opts: QuadOptions,
}

impl ImpowKernel {
    pub fn new(params: ImpowParams) -> Self {
        Self {
            params,
            opts: QuadOptions::default(),
        }
    }
}

impl KernelHandle for ImpowKernel {
    fn label(&self) -> String {
        format!("impow(u={}, r={})", self.params.u, self.params.r)
    }
    fn tail_hint(&self) -> TailHint {
        TailHint::LogarithmicGrowth
    }
    fn diagonal_singular(&self) -> bool {
        true
    }
    fn l2_norm_bound(&self) -> Option<f64> {
        // unimodular multiplier
        Some(1.0)
    }
    fn eval(&self, x: f64, y: f64) -> Result<KernelSample> {
        let k = kernel_quadrature_with(&self.params, x, y, CANONICAL_NORMALIZATION, &self.opts)?;
        Ok(KernelSample {
            value: k.value,
            error: k.error,
        })
    }
    fn eval_gamma_weighted(&self, x: f64, y: f64) -> Result<KernelSample> {
        let k = kernel_gamma_weighted(&self.params, x, y, &self.opts)?;
        Ok(KernelSample {
            value: k.value,
            error: k.error,
        })
    }
}

/// `k(x, y) = 1/(x - y)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReciprocalKernel;

impl KernelHandle for ReciprocalKernel {
    fn label(&self) -> String {
        "1/(x-y)".into()
    }
    fn tail_hint(&self) -> TailHint {
        TailHint::Unknown
    }
    fn diagonal_singular(&self) -> bool {
        true
    }
    fn l2_norm_bound(&self) -> Option<f64> {
        None
    }
    fn eval(&self, x: f64, y: f64) -> Result<KernelSample> {
        if x == y {
            return Err(Error::Domain(format!("1/(x-y) at x = y = {x}")));
        }
        Ok(exact(1.0 / (x - y)))
    }
}

/// `k(x, y) dgamma(x) = dx / (x - y)^2`, i.e. `k = sqrt(pi) e^{x^2} / (x - y)^2`.
/// Its differences are not uniformly integrable off `2B` as `r_B -> 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct HypersingularKernel;

impl KernelHandle for HypersingularKernel {
    fn label(&self) -> String {
        "sqrt(pi) e^{x^2}/(x-y)^2".into()
    }
    fn tail_hint(&self) -> TailHint {
        TailHint::Unknown
    }
    fn diagonal_singular(&self) -> bool {
        true
    }
    fn l2_norm_bound(&self) -> Option<f64> {
        None
    }
    fn eval(&self, x: f64, y: f64) -> Result<KernelSample> {
        let w = self.eval_gamma_weighted(x, y)?;
        Ok(KernelSample {
            value: w.value * (x * x).exp(),
            error: 0.0,
        })
    }
    fn eval_gamma_weighted(&self, x: f64, y: f64) -> Result<KernelSample> {
        if x == y {
            return Err(Error::Domain(format!(
                "hypersingular kernel at x = y = {x}"
            )));
        }
        Ok(exact(PI.sqrt() / (x - y).powi(2)))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantKernel {
    pub value: f64,
}

impl KernelHandle for ConstantKernel {
    fn label(&self) -> String {
        format!("constant({})", self.value)
    }
    fn tail_hint(&self) -> TailHint {
        TailHint::Gaussian
    }
    fn diagonal_singular(&self) -> bool {
        false
    }
    fn l2_norm_bound(&self) -> Option<f64> {
        Some(self.value.abs())
    }
    fn eval(&self, _x: f64, _y: f64) -> Result<KernelSample> {
        Ok(exact(self.value))
    }
}

/// `1` when `|x - y| <= min(1, 1/|y|)`, zero otherwise.
#[derive(Debug, Clone, Copy, Default)]
pub struct TruncatedIdentityKernel;

impl KernelHandle for TruncatedIdentityKernel {
    fn label(&self) -> String {
        "1_{|x-y|<=r(y)}".into()
    }
    fn tail_hint(&self) -> TailHint {
        TailHint::Gaussian
    }
    fn diagonal_singular(&self) -> bool {
        false
    }
    fn l2_norm_bound(&self) -> Option<f64> {
        None
    }
    fn eval(&self, x: f64, y: f64) -> Result<KernelSample> {
        Ok(exact(if (x - y).abs() <= admissible_radius(y.abs()) {
            1.0
        } else {
            0.0
        }))
    }
}

/// Truncation rule for integrals over unbounded sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailWindow {
    pub margin: f64,
    pub step: f64,
    pub rel_increment: f64,
    pub max_extent: f64,
}

impl Default for TailWindow {
    fn default() -> Self {
        Self {
            margin: 10.0,
            step: 5.0,
            rel_increment: 0.005,
            max_extent: 200.0,
        }
    }
}

fn x_opts() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-14,
        rel_tol: 1e-7,
        max_evals: 6_000,
    }
}

/// Panels of width at most `1/2`, refined geometrically towards the
/// `singular` points.
fn panel_breaks(a: f64, b: f64, singular: &[f64]) -> Vec<f64> {
    let mut pts = vec![a, b];
    let n = ((b - a) / 0.5).ceil() as usize;
    for k in 1..n {
        pts.push(a + (b - a) * k as f64 / n as f64);
    }
    for &s in singular {
        let mut d = 0.5;
        for _ in 0..12 {
            pts.push(s - d);
            pts.push(s + d);
            d *= 0.5;
        }
    }
    pts.retain(|&p| p >= a && p <= b);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|p, q| (*p - *q).abs() <= 1e-13 * (1.0 + q.abs()));
    pts
}

/// `int_{[-X, X] \ (lo, hi)} f(x) dx` for a vector integrand, with the tail
/// extension rule. Returns the value and the final `X`.
fn integrate_outside<F>(
    f: F,
    width: usize,
    excluded: (f64, f64),
    anchor: f64,
    singular: &[f64],
    tail: &TailWindow,
) -> Result<(Vec<f64>, f64)>
where
    F: Fn(f64) -> Result<Vec<f64>>,
{
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let run = |a: f64, b: f64| -> Vec<f64> {
        if b <= a {
            return vec![0.0; width];
        }
        let res = integrate_breaks(
            |x| match f(x) {
                Ok(v) => v,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    vec![0.0; width]
                }
            },
            &panel_breaks(a, b, singular),
            &x_opts(),
        );
        res.value
    };
    let mut x_max = anchor + tail.margin;
    let mut total = run(-x_max, excluded.0.min(x_max));
    let right = run(excluded.1.max(-x_max), x_max);
    for (t, r) in total.iter_mut().zip(&right) {
        *t += r;
    }
    loop {
        let lo = run((-x_max - tail.step).max(f64::MIN), (-x_max).min(excluded.0));
        let hi = run(x_max.max(excluded.1), x_max + tail.step);
        x_max += tail.step;
        let mut small = true;
        for ((t, l), h) in total.iter_mut().zip(&lo).zip(&hi) {
            let inc = l + h;
            *t += inc;
            if inc.abs() > tail.rel_increment * t.abs() {
                small = false;
            }
        }
        if let Some(e) = failure.borrow_mut().take() {
            return Err(e);
        }
        if small {
            return Ok((total, x_max));
        }
        if x_max > tail.max_extent {
            return Err(Error::convergence(
                format!("tail integral still growing at |x| = {x_max}"),
                Complex64::new(total.iter().copied().fold(0.0, f64::max), 0.0),
                f64::INFINITY,
            ));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Plateau,
    Growing,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub center: f64,
    pub radius: f64,
    pub y: f64,
    pub y_prime: Option<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinementStep {
    pub level: usize,
    pub samples: usize,
    pub supremum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub kernel: String,
    pub quantity: String,
    pub rows: Vec<EstimateRow>,
    pub supremum: f64,
    pub refinement: Vec<RefinementStep>,
    pub verdict: Verdict,
}

/// Sampling of admissible balls and point pairs for the Hörmander scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallGrid {
    pub centers: Vec<f64>,
    /// Radii are `k / radius_divisions` times the maximal radius,
    /// `k = 1..=radius_divisions`.
    pub radius_divisions: usize,
    /// Points `c + r j / pair_divisions`, `|j| <= pair_divisions`.
    pub pair_divisions: usize,
}

impl BallGrid {
    /// Centres `0, +-1, +-2, +-4, +-8, +-12`, radii maximal and half
    /// maximal, points at the centre and the two endpoints.
    pub fn design() -> Self {
        let mut centers = vec![0.0];
        for c in [1.0, 2.0, 4.0, 8.0, 12.0] {
            centers.push(c);
            centers.push(-c);
        }
        centers.sort_by(f64::total_cmp);
        Self {
            centers,
            radius_divisions: 2,
            pair_divisions: 1,
        }
    }

    /// Twice as many samples along every axis; contains `self`.
    pub fn doubled(&self) -> Self {
        let mut centers = Vec::with_capacity(2 * self.centers.len());
        for w in self.centers.windows(2) {
            centers.push(w[0]);
            centers.push(0.5 * (w[0] + w[1]));
        }
        centers.extend(self.centers.last().copied());
        Self {
            centers,
            radius_divisions: 2 * self.radius_divisions,
            pair_divisions: 2 * self.pair_divisions,
        }
    }

    pub fn balls(&self) -> Vec<GaussBall> {
        let mut out = Vec::new();
        for &c in &self.centers {
            let rmax = admissible_radius(c.abs());
            for k in 1..=self.radius_divisions {
                let r = rmax * k as f64 / self.radius_divisions as f64;
                out.push(GaussBall::new_1d(c, r).expect("positive radius"));
            }
        }
        out
    }

    fn points(&self, ball: &GaussBall) -> Vec<f64> {
        let n = self.pair_divisions as i64;
        (-n..=n)
            .map(|j| ball.center_1d() + ball.radius() * j as f64 / n as f64)
            .collect()
    }
}

fn hormander_level(
    k: &dyn KernelHandle,
    grid: &BallGrid,
    tail: &TailWindow,
) -> Result<Vec<EstimateRow>> {
    let balls = grid.balls();
    let per_ball = ordered_map(&balls, |ball| -> Result<Vec<EstimateRow>> {
        if !ball.is_admissible() {
            return Err(Error::Precondition(format!(
                "ball at {} is not admissible",
                ball.center_1d()
            )));
        }
        let pts = grid.points(ball);
        let mut pairs = Vec::new();
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                pairs.push((i, j));
            }
        }
        let (c, r) = (ball.center_1d(), ball.radius());
        let anchor = c.abs() + r;
        let (vals, _) = integrate_outside(
            |x| {
                let w = pts
                    .iter()
                    .map(|&p| k.eval_gamma_weighted(x, p).map(|s| s.value))
                    .collect::<Result<Vec<_>>>()?;
                Ok(pairs
                    .iter()
                    .map(|&(i, j)| (w[i] - w[j]).norm() / PI.sqrt())
                    .collect())
            },
            pairs.len(),
            (c - 2.0 * r, c + 2.0 * r),
            anchor,
            &[c - 2.0 * r, c + 2.0 * r],
            tail,
        )?;
        Ok(pairs
            .iter()
            .zip(vals)
            .map(|(&(i, j), value)| EstimateRow {
                center: c,
                radius: r,
                y: pts[i],
                y_prime: Some(pts[j]),
                value,
            })
            .collect())
    });
    let mut rows = Vec::new();
    for r in per_ball {
        rows.extend(r?);
    }
    Ok(rows)
}

fn supremum(rows: &[EstimateRow]) -> f64 {
    rows.iter().map(|r| r.value).fold(0.0, f64::max)
}

/// Empirical Hörmander constant with up to `refinements` grid doublings.
/// Stops early once a doubling raises the supremum by less than
/// [`PLATEAU_TOL`].
pub fn hormander_estimate(
    k: &dyn KernelHandle,
    grid: &BallGrid,
    tail: &TailWindow,
    refinements: usize,
) -> Result<EstimateReport> {
    let mut grid = grid.clone();
    let mut rows = hormander_level(k, &grid, tail)?;
    let mut history = vec![RefinementStep {
        level: 0,
        samples: rows.len(),
        supremum: supremum(&rows),
    }];
    let mut verdict = Verdict::Inconclusive;
    for level in 1..=refinements {
        grid = grid.doubled();
        rows = hormander_level(k, &grid, tail)?;
        let sup = supremum(&rows);
        let prev = history.last().expect("nonempty").supremum;
        history.push(RefinementStep {
            level,
            samples: rows.len(),
            supremum: sup,
        });
        let rise = if prev > 0.0 {
            (sup - prev) / prev
        } else if sup > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        if rise < PLATEAU_TOL {
            verdict = Verdict::Plateau;
            break;
        }
        verdict = if rise >= GROWTH_TOL {
            Verdict::Growing
        } else {
            Verdict::Inconclusive
        };
    }
    Ok(EstimateReport {
        kernel: k.label(),
        quantity: "hormander".into(),
        supremum: supremum(&rows),
        rows,
        refinement: history,
        verdict,
    })
}

/// Verdict for a scan ordered by increasing `|y|`, read off its last step:
/// growing when every step increases and the last one by at least
/// [`GROWTH_TOL`], plateau when the last one moves by at most
/// [`SCAN_PLATEAU_TOL`].
pub fn trend_verdict(values: &[f64]) -> Verdict {
    let [.., prev, last] = values else {
        return Verdict::Inconclusive;
    };
    let increasing = values.windows(2).all(|w| w[1] > w[0]);
    if increasing && *last >= (1.0 + GROWTH_TOL) * prev {
        Verdict::Growing
    } else if (last - prev).abs() <= SCAN_PLATEAU_TOL * last.abs().max(prev.abs()) {
        Verdict::Plateau
    } else {
        Verdict::Inconclusive
    }
}

fn phi(k: &dyn KernelHandle, y: f64, tail: &TailWindow) -> Result<f64> {
    let b = maximal_ball_1d(y);
    let r = b.radius();
    let (v, _) = integrate_outside(
        |x| Ok(vec![k.eval_gamma_weighted(x, y)?.value.norm() / PI.sqrt()]),
        1,
        (y - 2.0 * r, y + 2.0 * r),
        y.abs(),
        &[y - 2.0 * r, y + 2.0 * r],
        tail,
    )?;
    Ok(v[0])
}

/// `Phi(y) = int_{(2B_y)^c} |k(x, y)| dgamma(x)` over `y_grid`.
pub fn i_infinity_estimate(
    k: &dyn KernelHandle,
    y_grid: &[f64],
    tail: &TailWindow,
) -> Result<EstimateReport> {
    let values = ordered_map(y_grid, |&y| phi(k, y, tail));
    let mut rows = Vec::with_capacity(y_grid.len());
    for (&y, v) in y_grid.iter().zip(values) {
        rows.push(EstimateRow {
            center: y,
            radius: admissible_radius(y.abs()),
            y,
            y_prime: None,
            value: v?,
        });
    }
    let mut by_size: Vec<&EstimateRow> = rows.iter().collect();
    by_size.sort_by(|a, b| a.y.abs().total_cmp(&b.y.abs()));
    let verdict = trend_verdict(&by_size.iter().map(|r| r.value).collect::<Vec<_>>());
    Ok(EstimateReport {
        kernel: k.label(),
        quantity: "i_infinity".into(),
        supremum: supremum(&rows),
        refinement: vec![RefinementStep {
            level: 0,
            samples: rows.len(),
            supremum: supremum(&rows),
        }],
        rows,
        verdict,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceRow {
    pub y: f64,
    pub phi: f64,
    /// `int_{y-1}^{y-2/y} |k(x, y)| dgamma(x)`.
    pub window_phi: f64,
    pub ln_y: f64,
    /// `ln(y/2) = int_{y-1}^{y-2/y} dx / (y - x)`.
    pub comparator: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceTable {
    pub rows: Vec<DivergenceRow>,
    pub strictly_increasing: bool,
    /// Least-squares fit `Phi = slope ln y + intercept`.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares line through `(x, y)`: `(slope, intercept, r^2)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 {
        sxy * sxy / (sxx * syy)
    } else {
        1.0
    };
    (slope, my - slope * mx, r2)
}

/// `Phi(y)` for the kernel of `(rI + L)^{iu}` on `y >= 3`, with the window
/// `(y - 1, y - 2/y)` and the comparator `ln(y/2)`.
pub fn divergence_scan(
    p: &ImpowParams,
    y_values: &[f64],
    tail: &TailWindow,
) -> Result<DivergenceTable> {
    if p.u == 0.0 {
        return Err(Error::Precondition(
            "u = 0 gives the identity, which has no kernel".into(),
        ));
    }
    if let Some(&y) = y_values.iter().find(|&&y| !(y >= 3.0)) {
        return Err(Error::Precondition(format!(
            "divergence scan needs y >= 3, got {y}"
        )));
    }
    if y_values.len() < 2 {
        return Err(Error::InvalidInput(
            "divergence scan needs at least two values of y".into(),
        ));
    }
    let k = ImpowKernel::new(*p);
    let rows = ordered_map(y_values, |&y| -> Result<DivergenceRow> {
        let full = phi(&k, y, tail)?;
        let res = integrate(
            |x: f64| match k.eval_gamma_weighted(x, y) {
                Ok(s) => s.value.norm() / PI.sqrt(),
                Err(_) => f64::NAN,
            },
            y - 1.0,
            y - 2.0 / y,
            8,
            &x_opts(),
        );
        if !res.value.is_finite() {
            return Err(Error::Domain(format!(
                "kernel evaluation failed in the window at y = {y}"
            )));
        }
        Ok(DivergenceRow {
            y,
            phi: full,
            window_phi: res.value,
            ln_y: y.ln(),
            comparator: (0.5 * y).ln(),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let (slope, intercept, r_squared) = linear_fit(
        &rows.iter().map(|r| r.ln_y).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.phi).collect::<Vec<_>>(),
    );
    Ok(DivergenceTable {
        strictly_increasing: rows.windows(2).all(|w| w[1].phi > w[0].phi),
        rows,
        slope,
        intercept,
        r_squared,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomImage {
    pub kind: AtomKind,
    pub center: f64,
    pub radius: f64,
    /// `||1_{2B} T a||_1`, or an upper bound when `near_is_bound`.
    pub near: f64,
    pub near_is_bound: bool,
    pub far: f64,
    pub total: f64,
}

/// `T a(x) e^{-x^2}` by Gauss-Legendre in `v` on each cell of the atom.
fn image_weighted(
    k: &dyn KernelHandle,
    atom: &Atom,
    x: f64,
    rule: &GaussLegendre,
) -> Result<Complex64> {
    let mut acc = Complex64::new(0.0, 0.0);
    for c in &atom.function.cells {
        if c.value == 0.0 {
            continue;
        }
        for (v, w) in rule.mapped(c.lo, c.hi) {
            acc += k.eval_gamma_weighted(x, v)?.value * (c.value * w * (-v * v).exp() / PI.sqrt());
        }
    }
    Ok(acc)
}

/// `||T a||_{L^1(gamma)}` split into the parts on `2B` and off `2B`.
///
/// For kernels singular on the diagonal the part on `2B` is replaced by
/// `gamma(2B)^{1/2} ||T||_{2->2} ||a||_2`.
pub fn atom_image_norm(k: &dyn KernelHandle, atom: &Atom, tail: &TailWindow) -> Result<AtomImage> {
    let check = validate_atom(atom);
    if !check.valid {
        return Err(Error::Precondition(format!("invalid atom: {check:?}")));
    }
    let Some(ball) = atom.ball.as_ref() else {
        return Err(Error::Precondition(
            "the exceptional atom has no kernel image".into(),
        ));
    };
    let (c, r) = (ball.center_1d(), ball.radius());
    let rule = GaussLegendre::new(16);
    let mut edges: Vec<f64> = atom
        .function
        .cells
        .iter()
        .flat_map(|c| [c.lo, c.hi])
        .collect();
    edges.extend([c - 2.0 * r, c + 2.0 * r]);
    let (far, _) = integrate_outside(
        |x| Ok(vec![image_weighted(k, atom, x, &rule)?.norm() / PI.sqrt()]),
        1,
        (c - 2.0 * r, c + 2.0 * r),
        c.abs() + r,
        &[c - 2.0 * r, c + 2.0 * r],
        tail,
    )?;
    let far = far[0];
    let (near, near_is_bound) = if k.diagonal_singular() {
        let Some(op) = k.l2_norm_bound() else {
            return Err(Error::Precondition(format!(
                "{} is singular and has no L^2 bound for the part on 2B",
                k.label()
            )));
        };
        let double = ball.scaled(2.0);
        (
            ball_measure(&double).sqrt() * op * atom.function.l2_norm(),
            true,
        )
    } else {
        let mut failure = None;
        let mut breaks = panel_breaks(c - 2.0 * r, c + 2.0 * r, &[]);
        breaks.extend(
            edges
                .iter()
                .copied()
                .filter(|&e| e > c - 2.0 * r && e < c + 2.0 * r),
        );
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let res = integrate_breaks(
            |x| match image_weighted(k, atom, x, &rule) {
                Ok(v) => v.norm() / PI.sqrt(),
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            },
            &breaks,
            &x_opts(),
        );
        if let Some(e) = failure {
            return Err(e);
        }
        (res.value, false)
    };
    Ok(AtomImage {
        kind: atom.kind,
        center: c,
        radius: r,
        near,
        near_is_bound,
        far,
        total: near + far,
    })
}

/// Largest relative gap, over `x_samples`, between
/// `T a_y(x) = gamma(B_y)^{-1} int_{B_y} k(x, v) dgamma(v)` and
/// `gamma(B_y)^{-1} int_{B_y} [k(x, v) - k(x, y)] dgamma(v) + k(x, y)`,
/// the gap being divided by `max(1, |T a_y(x)|)`.
pub fn tay_identity_residual(k: &dyn KernelHandle, y: f64, x_samples: &[f64]) -> Result<f64> {
    let ball = maximal_ball_1d(y);
    let (lo, hi) = (y - ball.radius(), y + ball.radius());
    if let Some(&x) = x_samples.iter().find(|&&x| x >= lo && x <= hi) {
        return Err(Error::Precondition(format!("sample {x} lies in B_y")));
    }
    let shift = if lo <= 0.0 && hi >= 0.0 {
        0.0
    } else {
        lo.abs().min(hi.abs()).powi(2)
    };
    let opts = QuadOptions {
        abs_tol: 0.0,
        rel_tol: 1e-12,
        max_evals: 20_000,
    };
    let mut worst: f64 = 0.0;
    for &x in x_samples {
        let kxy = k.eval(x, y)?.value;
        let mut failure = None;
        let mut sample = |v: f64| match k.eval(x, v) {
            Ok(s) => s.value,
            Err(e) => {
                failure.get_or_insert(e);
                Complex64::new(0.0, 0.0)
            }
        };
        let direct = integrate(
            |v: f64| {
                let w = (shift - v * v).exp();
                let kv = sample(v);
                vec![kv.re * w, kv.im * w, w]
            },
            lo,
            hi,
            4,
            &opts,
        );
        let diff = integrate(
            |v: f64| {
                let w = (shift - v * v).exp();
                let d = sample(v) - kxy;
                vec![d.re * w, d.im * w, w]
            },
            lo,
            hi,
            4,
            &opts,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        let ta = Complex64::new(direct.value[0], direct.value[1]) / direct.value[2];
        let identity = Complex64::new(diff.value[0], diff.value[1]) / diff.value[2] + kxy;
        worst = worst.max((ta - identity).norm() / ta.norm().max(1.0));
    }
    Ok(worst)
}

/// Consistency of the scans with the two directions of the
/// kernel criterion for `h^1 -> L^1` boundedness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImplicationCheck {
    pub kernel: String,
    pub hormander: Verdict,
    pub i_infinity: Verdict,
    pub global_images: Verdict,
    pub standard_images: Verdict,
    /// Hörmander plateau and bounded global images imply a plateau of `I_inf`.
    pub direction_i: bool,
    /// Hörmander plateau, growing global images and growing `I_inf`.
    pub contrapositive_exhibited: bool,
    /// Pointwise `||T a_y||_1 <= gamma(2B)^{1/2} gamma(B)^{-1/2} ||T|| + H_k + Phi(y)`;
    /// `None` when the premise (plateau `I_inf`, bounded standard images) fails.
    pub direction_ii: Option<bool>,
}

pub fn check_implications(
    hormander: &EstimateReport,
    i_infinity: &EstimateReport,
    global_images: &[AtomImage],
    standard_images: &[AtomImage],
    l2_bound: Option<f64>,
) -> ImplicationCheck {
    let totals = |imgs: &[AtomImage]| {
        let mut v: Vec<&AtomImage> = imgs.iter().collect();
        v.sort_by(|a, b| a.center.abs().total_cmp(&b.center.abs()));
        trend_verdict(&v.iter().map(|i| i.total).collect::<Vec<_>>())
    };
    let g = totals(global_images);
    let s = totals(standard_images);
    let h = hormander.verdict;
    let i = i_infinity.verdict;
    let direction_i = !(h == Verdict::Plateau && g == Verdict::Plateau) || i == Verdict::Plateau;
    let contrapositive_exhibited =
        h == Verdict::Plateau && g == Verdict::Growing && i == Verdict::Growing;
    let direction_ii = (i == Verdict::Plateau && s == Verdict::Plateau).then(|| {
        global_images.iter().all(|img| {
            let Some(row) = i_infinity.rows.iter().find(|r| r.y == img.center) else {
                return false;
            };
            let b = GaussBall::new_1d(img.center, img.radius).expect("atom ball");
            let near = (ball_measure(&b.scaled(2.0)) / ball_measure(&b)).sqrt()
                * l2_bound.unwrap_or(f64::INFINITY);
            img.total <= (1.0 + 1e-6) * (near + hormander.supremum + row.value)
        })
    });
    ImplicationCheck {
        kernel: hormander.kernel.clone(),
        hormander: h,
        i_infinity: i,
        global_images: g,
        standard_images: s,
        direction_i,
        contrapositive_exhibited,
        direction_ii,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comparator_at_four() {
        let p = ImpowParams::new(1.0, 1.0).unwrap();
        let t = divergence_scan(&p, &[4.0, 5.0], &TailWindow::default()).unwrap();
        assert!((t.rows[0].comparator - 2f64.ln()).abs() < 1e-15);
        assert!(divergence_scan(&p, &[2.0, 4.0], &TailWindow::default()).is_err());
        let zero = ImpowParams {
            u: 0.0,
            r: 1.0,
            dim: 1,
        };
        assert!(matches!(
            divergence_scan(&zero, &[4.0, 5.0], &TailWindow::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn truncated_identity_has_no_mass_at_infinity() {
        let r = i_infinity_estimate(
            &TruncatedIdentityKernel,
            &[2.0, 5.0, 9.0],
            &TailWindow::default(),
        )
        .unwrap();
        assert!(r.rows.iter().all(|row| row.value == 0.0));
    }

    #[test]
    fn mehler_mass_at_infinity_is_flat() {
        let r = i_infinity_estimate(
            &MehlerKernel { t: 1.0 },
            &[4.0, 8.0, 16.0],
            &TailWindow::default(),
        )
        .unwrap();
        for row in &r.rows {
            assert!((row.value - 1.0).abs() < 0.05, "{row:?}");
        }
        assert_eq!(r.verdict, Verdict::Plateau);
    }

    #[test]
    fn mehler_weighted_matches_plain() {
        let k = MehlerKernel { t: 0.7 };
        let a = k.eval(1.2, -0.3).unwrap().value.re * (-1.44f64).exp();
        let b = k.eval_gamma_weighted(1.2, -0.3).unwrap().value.re;
        assert!((a - b).abs() < 1e-14 * a);
    }

    #[test]
    fn tay_identity_for_constant_kernel() {
        let r =
            tay_identity_residual(&ConstantKernel { value: 2.5 }, 3.0, &[0.0, 1.0, -4.0]).unwrap();
        assert!(r <= 1e-15);
        assert!(tay_identity_residual(&ConstantKernel { value: 1.0 }, 3.0, &[3.1]).is_err());
    }

    #[test]
    fn tay_identity_for_mehler() {
        let r =
            tay_identity_residual(&MehlerKernel { t: 1.0 }, 3.0, &[-2.0, 0.0, 1.5, 5.0]).unwrap();
        assert!(r <= 1e-8);
    }

    #[test]
    fn global_atom_under_mehler_has_unit_image() {
        for y in [2.0, 5.0] {
            let img = atom_image_norm(
                &MehlerKernel { t: 1.0 },
                &Atom::global_indicator(y),
                &TailWindow::default(),
            )
            .unwrap();
            assert!((img.total - 1.0).abs() < 1e-5, "{img:?}");
            assert!(!img.near_is_bound);
        }
    }

    #[test]
    fn exceptional_atom_rejected() {
        assert!(atom_image_norm(
            &MehlerKernel { t: 1.0 },
            &Atom::exceptional(),
            &TailWindow::default()
        )
        .is_err());
    }

    #[test]
    fn grid_doubling_contains_design() {
        let g = BallGrid::design();
        let d = g.doubled();
        assert_eq!(g.balls().len(), 22);
        assert_eq!(d.centers.len(), 21);
        for b in g.balls() {
            assert!(d.balls().iter().any(|e| e == &b));
        }
    }

    #[test]
    fn trend_verdicts() {
        assert_eq!(trend_verdict(&[1.0, 1.3, 1.6, 1.9]), Verdict::Growing);
        assert_eq!(trend_verdict(&[1.0, 1.01, 0.99, 1.0]), Verdict::Plateau);
        assert_eq!(trend_verdict(&[1.0, 0.5, 2.0, 1.0]), Verdict::Inconclusive);
        let (s, i, r2) = linear_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]);
        assert!((s - 2.0).abs() < 1e-15 && (i - 1.0).abs() < 1e-15 && (r2 - 1.0).abs() < 1e-15);
    }
}

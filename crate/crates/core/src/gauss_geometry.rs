//! Geometry of the Gauss measure on `R^n` (mostly `n = 1`).
//!
//! Balls are Euclidean. A ball `B(c, r)` is *admissible* when
//! `r <= min(1, 1/|c|)` and *maximal* when equality holds. One-dimensional
//! measures are exact error-function differences.

use serde::{Deserialize, Serialize};

use crate::parallel::ordered_map;
use crate::quadrature::{integrate, QuadOptions};
use crate::special::{gauss_density, gauss_interval_measure};
use crate::{Error, Result};

/// Radius of the ball centred at the origin outside of which boundary shells
/// are examined.
pub const SHELL_BASE_RADIUS: f64 = 2.0;
/// Largest admissible shell width parameter.
pub const KAPPA_MAX: f64 = 0.1;
/// Tolerance used for ball measures in dimension two and higher.
pub const BALL_MEASURE_TOL: f64 = 1e-10;

/// `min(1, 1/|c|)` with `1/0 = +inf`.
pub fn admissible_radius(center_norm: f64) -> f64 {
    if center_norm <= 1.0 {
        1.0
    } else {
        1.0 / center_norm
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussBall {
    center: Vec<f64>,
    radius: f64,
}

impl GaussBall {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::InvalidInput("ball centre has no coordinates".into()));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("ball centre must be finite".into()));
        }
        Ok(Self { center, radius })
    }

    pub fn new_1d(center: f64, radius: f64) -> Result<Self> {
        Self::new(vec![center], radius)
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    /// First coordinate of the centre; the only one in dimension one.
    pub fn center_1d(&self) -> f64 {
        self.center[0]
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center_norm(&self) -> f64 {
        self.center.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn admissible_bound(&self) -> f64 {
        admissible_radius(self.center_norm())
    }

    pub fn is_admissible(&self) -> bool {
        self.radius <= self.admissible_bound()
    }

    pub fn is_maximal(&self) -> bool {
        self.radius == self.admissible_bound()
    }

    /// Same centre, radius scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            center: self.center.clone(),
            radius: self.radius * factor,
        }
    }

    /// The ball as an interval; only meaningful in dimension one.
    pub fn interval(&self) -> Interval {
        Interval {
            lo: self.center[0] - self.radius,
            hi: self.center[0] + self.radius,
        }
    }

    pub fn contains_1d(&self, x: f64) -> bool {
        (x - self.center[0]).abs() <= self.radius
    }
}

/// Returns `B_y`, the ball centred at `y` with radius `min(1, 1/|y|)`.
pub fn maximal_ball(y: &[f64]) -> Result<GaussBall> {
    let norm = y.iter().map(|c| c * c).sum::<f64>().sqrt();
    GaussBall::new(y.to_vec(), admissible_radius(norm))
}

pub fn maximal_ball_1d(y: f64) -> GaussBall {
    GaussBall {
        center: vec![y],
        radius: admissible_radius(y.abs()),
    }
}

pub fn is_admissible(ball: &GaussBall) -> bool {
    ball.is_admissible()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::InvalidInput(format!("bad interval ({lo}, {hi})")));
        }
        Ok(Self { lo, hi })
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }
}

/// A measurable set handled by [`gauss_measure`].
#[derive(Debug, Clone, PartialEq)]
pub enum GaussSet {
    /// Pairwise disjoint intervals (endpoints may be infinite).
    Intervals(Vec<Interval>),
    Ball(GaussBall),
}

fn check_disjoint(pieces: &[Interval]) -> Result<Vec<Interval>> {
    let mut sorted = pieces.to_vec();
    for p in &sorted {
        if p.lo.is_nan() || p.hi.is_nan() || p.lo > p.hi {
            return Err(Error::InvalidInput(format!(
                "bad interval ({}, {})",
                p.lo, p.hi
            )));
        }
    }
    sorted.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    for w in sorted.windows(2) {
        if w[1].lo < w[0].hi {
            return Err(Error::InvalidInput(format!(
                "intervals ({}, {}) and ({}, {}) overlap",
                w[0].lo, w[0].hi, w[1].lo, w[1].hi
            )));
        }
    }
    Ok(sorted)
}

/// Gauss measure of a disjoint union of intervals or of a ball.
pub fn gauss_measure(set: &GaussSet) -> Result<f64> {
    match set {
        GaussSet::Intervals(pieces) => {
            let sorted = check_disjoint(pieces)?;
            Ok(sorted
                .iter()
                .map(|p| gauss_interval_measure(p.lo, p.hi))
                .sum::<f64>()
                .min(1.0))
        }
        GaussSet::Ball(ball) => Ok(ball_measure(ball)),
    }
}

/// Gauss measure of a Euclidean ball in any dimension.
///
/// Dimension one is closed form. Higher dimensions integrate the first
/// coordinate (with `x = c + r sin(theta)`) over the measure of the
/// remaining lower-dimensional slice.
pub fn ball_measure(ball: &GaussBall) -> f64 {
    slice_measure(ball.center(), ball.radius())
}

fn slice_measure(center: &[f64], radius: f64) -> f64 {
    if radius <= 0.0 {
        return 0.0;
    }
    if center.len() == 1 {
        return gauss_interval_measure(center[0] - radius, center[0] + radius);
    }
    let c0 = center[0];
    let rest = &center[1..];
    let opts = QuadOptions {
        abs_tol: BALL_MEASURE_TOL * 0.1,
        rel_tol: 0.0,
        max_evals: 400_000,
    };
    let half_pi = std::f64::consts::FRAC_PI_2;
    integrate(
        |theta: f64| {
            let (s, c) = theta.sin_cos();
            let x = c0 + radius * s;
            gauss_density(x) * radius * c * slice_measure(rest, radius * c)
        },
        -half_pi,
        half_pi,
        8,
        &opts,
    )
    .value
}

/// Radius specification for [`doubling_ratio_scan`].
#[derive(Debug, Clone, PartialEq)]
pub enum RadiusGrid {
    Absolute(Vec<f64>),
    /// Fractions of the maximal admissible radius at each centre.
    FractionOfMaximal(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingRow {
    pub center: f64,
    pub radius: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingScan {
    pub rows: Vec<DoublingRow>,
    pub max_ratio: f64,
}

/// `gamma(2B)/gamma(B)` over a grid of one-dimensional admissible balls.
pub fn doubling_ratio_scan(centers: &[f64], radii: &RadiusGrid) -> Result<DoublingScan> {
    let mut balls = Vec::new();
    for &c in centers {
        let list: Vec<f64> = match radii {
            RadiusGrid::Absolute(r) => r.clone(),
            RadiusGrid::FractionOfMaximal(f) => {
                f.iter().map(|t| t * admissible_radius(c.abs())).collect()
            }
        };
        for r in list {
            let ball = GaussBall::new_1d(c, r)?;
            if !ball.is_admissible() {
                return Err(Error::InvalidInput(format!(
                    "ball (c={c}, r={r}) is not admissible"
                )));
            }
            balls.push(ball);
        }
    }
    if balls.is_empty() {
        return Err(Error::InvalidInput("empty doubling grid".into()));
    }
    let rows = ordered_map(&balls, |b| DoublingRow {
        center: b.center_1d(),
        radius: b.radius(),
        ratio: ball_measure(&b.scaled(2.0)) / ball_measure(b),
    });
    let max_ratio = rows
        .iter()
        .map(|r| r.ratio)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(DoublingScan { rows, max_ratio })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellSpec {
    pub base: Vec<Interval>,
    pub kappa: f64,
}

impl ShellSpec {
    pub fn new(base: Vec<Interval>, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa <= KAPPA_MAX) {
            return Err(Error::InvalidInput(format!(
                "kappa must lie in (0, {KAPPA_MAX}], got {kappa}"
            )));
        }
        Ok(Self { base, kappa })
    }
}

// Points x of (lo, hi), 0 < lo, with min(x - lo, hi - x) <= kappa / x.
fn positive_shell(lo: f64, hi: f64, kappa: f64) -> Vec<Interval> {
    let mut out = Vec::new();
    // x - lo <= kappa/x  <=>  x <= (lo + sqrt(lo^2 + 4 kappa)) / 2
    let left_end = 0.5 * (lo + (lo * lo + 4.0 * kappa).sqrt());
    out.push(Interval {
        lo,
        hi: left_end.min(hi),
    });
    // hi - x <= kappa/x  <=>  x^2 - hi x + kappa >= 0
    let disc = hi * hi - 4.0 * kappa;
    if disc < 0.0 {
        out.push(Interval { lo, hi });
    } else {
        let root = disc.sqrt();
        let r1 = 0.5 * (hi - root);
        let r2 = 0.5 * (hi + root);
        if r1 > lo {
            out.push(Interval { lo, hi: r1.min(hi) });
        }
        if r2 < hi {
            out.push(Interval { lo: r2.max(lo), hi });
        }
    }
    merge(out)
}

fn merge(mut pieces: Vec<Interval>) -> Vec<Interval> {
    pieces.retain(|p| p.hi > p.lo);
    pieces.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let mut out: Vec<Interval> = Vec::new();
    for p in pieces {
        match out.last_mut() {
            Some(last) if p.lo <= last.hi => last.hi = last.hi.max(p.hi),
            _ => out.push(p),
        }
    }
    out
}

/// The set `{x in A : d(x, A^c) <= kappa / |x|}` as disjoint intervals.
pub fn shell_set(shell: &ShellSpec) -> Result<Vec<Interval>> {
    let base = check_disjoint(&shell.base)?;
    if base.is_empty() {
        return Err(Error::InvalidInput("empty base set".into()));
    }
    let mut pieces = Vec::new();
    for p in &base {
        if !p.lo.is_finite() || !p.hi.is_finite() {
            return Err(Error::Precondition("base set must be bounded".into()));
        }
        if p.lo >= SHELL_BASE_RADIUS {
            pieces.extend(positive_shell(p.lo, p.hi, shell.kappa));
        } else if p.hi <= -SHELL_BASE_RADIUS {
            pieces.extend(
                positive_shell(-p.hi, -p.lo, shell.kappa)
                    .into_iter()
                    .map(|q| Interval {
                        lo: -q.hi,
                        hi: -q.lo,
                    }),
            );
        } else {
            return Err(Error::Precondition(format!(
                "interval ({}, {}) meets the ball |x| < {SHELL_BASE_RADIUS}",
                p.lo, p.hi
            )));
        }
    }
    Ok(merge(pieces))
}

/// `gamma(A_kappa) / (kappa gamma(A))` for the boundary shell `A_kappa`.
pub fn boundary_shell_ratio(shell: &ShellSpec) -> Result<f64> {
    let pieces = shell_set(shell)?;
    let shell_mass: f64 = pieces
        .iter()
        .map(|p| gauss_interval_measure(p.lo, p.hi))
        .sum();
    let base_mass = gauss_measure(&GaussSet::Intervals(shell.base.clone()))?;
    if base_mass <= 0.0 {
        return Err(Error::Precondition(
            "base set has zero Gauss measure".into(),
        ));
    }
    Ok(shell_mass / (shell.kappa * base_mass))
}

/// The scanned family of shells: `A = (y - delta, y + delta)` for
/// `y in {2.25, 4, 8, 16}`, `delta in {0.25, 0.1}`, the set `(4, 4.5)`, a
/// two-piece union, and the mirror images of all of these, each with
/// `kappa in {0.1, 0.05, 0.01}`.
pub fn shell_family() -> Vec<ShellSpec> {
    let mut bases: Vec<Vec<Interval>> = Vec::new();
    for y in [2.25, 4.0, 8.0, 16.0] {
        for delta in [0.25, 0.1] {
            bases.push(vec![Interval {
                lo: y - delta,
                hi: y + delta,
            }]);
        }
    }
    bases.push(vec![Interval { lo: 4.0, hi: 4.5 }]);
    bases.push(vec![
        Interval { lo: 2.0, hi: 2.5 },
        Interval { lo: 7.9, hi: 8.1 },
    ]);
    let mirrored: Vec<Vec<Interval>> = bases
        .iter()
        .map(|b| {
            b.iter()
                .rev()
                .map(|p| Interval {
                    lo: -p.hi,
                    hi: -p.lo,
                })
                .collect()
        })
        .collect();
    bases.extend(mirrored);
    let mut out = Vec::new();
    for base in bases {
        for kappa in [0.1, 0.05, 0.01] {
            out.push(ShellSpec {
                base: base.clone(),
                kappa,
            });
        }
    }
    out
}

fn rho_prime_primitive(t: f64) -> f64 {
    0.5 * (t * (1.0 + t * t).sqrt() + t.asinh())
}

/// Distance for the metric `ds^2 = (1 + x^2) dx^2` on the line.
pub fn rho_prime_distance_1d(x: f64, y: f64) -> f64 {
    (rho_prime_primitive(y) - rho_prime_primitive(x)).abs()
}

//! Atoms of `H^1(gamma)` and `h^1(gamma)`, BMO oscillation and two-sided
//! estimates of atomic norms for piecewise-constant functions on the line.
//!
//! Functions are step functions on finitely many cells, so every integral
//! against the Gauss measure is an exact error-function difference.
//!
//! The upper bounds come from explicit decompositions:
//!
//! * the window `[-L, L]` is tiled by blocks short enough that any two
//!   neighbours fit in one admissible ball;
//! * inside each block the function minus its block mean is one standard
//!   atom;
//! * the block means are moved along the chain of blocks by the mean-zero
//!   differences `1_{B_i}/gamma(B_i) - 1_{B_{i+1}}/gamma(B_{i+1})`, leaving
//!   the total mean for the exceptional atom.
//!
//! In `h^1` mode global atoms on maximal balls are also allowed, and the
//! cheaper of the two decompositions is returned.

use serde::{Deserialize, Serialize};

use crate::gauss_geometry::{admissible_radius, ball_measure, GaussBall};
use crate::quadrature::{integrate, GaussLegendre, QuadOptions};
use crate::special::gauss_interval_measure;
use crate::{Error, Result};

/// Relative tolerance of the size and cancellation checks.
pub const ATOM_TOL: f64 = 1e-10;
/// Relative L^1 reconstruction tolerance of the greedy decompositions.
pub const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AtomKind {
    Standard,
    Global,
    Exceptional,
}

/// `value` on the interval `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub lo: f64,
    pub hi: f64,
    pub value: f64,
}

impl Cell {
    pub fn measure(&self) -> f64 {
        gauss_interval_measure(self.lo, self.hi)
    }
}

/// Step function with disjoint, sorted cells; zero elsewhere.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SampledFunction {
    pub cells: Vec<Cell>,
}

impl SampledFunction {
    pub fn new(mut cells: Vec<Cell>) -> Result<Self> {
        cells.retain(|c| c.hi > c.lo);
        cells.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        for c in &cells {
            if !(c.lo.is_finite() && c.hi.is_finite() && c.value.is_finite()) {
                return Err(Error::InvalidInput("cells must be finite".into()));
            }
        }
        for w in cells.windows(2) {
            if w[1].lo < w[0].hi {
                return Err(Error::InvalidInput(format!(
                    "cells at {} and {} overlap",
                    w[0].lo, w[1].lo
                )));
            }
        }
        Ok(Self { cells })
    }

    /// `1_B / gamma(B)` for a one-dimensional ball.
    pub fn normalized_indicator(ball: &GaussBall) -> Self {
        let iv = ball.interval();
        Self {
            cells: vec![Cell {
                lo: iv.lo,
                hi: iv.hi,
                value: 1.0 / ball_measure(ball),
            }],
        }
    }

    pub fn integral(&self) -> f64 {
        self.cells.iter().map(|c| c.value * c.measure()).sum()
    }

    pub fn l1_norm(&self) -> f64 {
        self.cells.iter().map(|c| c.value.abs() * c.measure()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.cells
            .iter()
            .map(|c| (c.value * c.measure().sqrt()).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Smallest interval containing the cells with nonzero value.
    pub fn support_hull(&self) -> Option<(f64, f64)> {
        let mut it = self.cells.iter().filter(|c| c.value != 0.0);
        let first = it.next()?;
        let (lo, mut hi) = (first.lo, first.hi);
        for c in it {
            hi = hi.max(c.hi);
        }
        Some((lo, hi))
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.cells
            .iter()
            .find(|c| x >= c.lo && x < c.hi)
            .map_or(0.0, |c| c.value)
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.cells.iter().flat_map(|c| [c.lo, c.hi]).collect();
        b.dedup();
        b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub kind: AtomKind,
    /// Absent for the exceptional atom.
    pub ball: Option<GaussBall>,
    /// Values inside the ball; ignored for the exceptional atom, which is
    /// the constant 1.
    pub function: SampledFunction,
}

impl Atom {
    pub fn exceptional() -> Self {
        Self {
            kind: AtomKind::Exceptional,
            ball: None,
            function: SampledFunction::default(),
        }
    }

    /// `1_{B_y} / gamma(B_y)`.
    pub fn global_indicator(y: f64) -> Self {
        let ball = crate::gauss_geometry::maximal_ball_1d(y);
        Self {
            kind: AtomKind::Global,
            function: SampledFunction::normalized_indicator(&ball),
            ball: Some(ball),
        }
    }

    /// Two-valued mean-zero atom with `||a||_2 = gamma(B)^{-1/2}`, negative
    /// on the left half of `B` and positive on the right half.
    pub fn standard_haar(ball: &GaussBall) -> Result<Self> {
        if !ball.is_admissible() {
            return Err(Error::Precondition(format!(
                "ball ({}, {}) is not admissible",
                ball.center_1d(),
                ball.radius()
            )));
        }
        let iv = ball.interval();
        let c = ball.center_1d();
        let (ml, mr) = (
            gauss_interval_measure(iv.lo, c),
            gauss_interval_measure(c, iv.hi),
        );
        // alpha ml + beta mr = 0, alpha^2 ml + beta^2 mr = 1/gamma(B)
        let m = ml + mr;
        let alpha = -(mr / ml).sqrt() / m;
        let beta = (ml / mr).sqrt() / m;
        Ok(Self {
            kind: AtomKind::Standard,
            ball: Some(ball.clone()),
            function: SampledFunction {
                cells: vec![
                    Cell {
                        lo: iv.lo,
                        hi: c,
                        value: alpha,
                    },
                    Cell {
                        lo: c,
                        hi: iv.hi,
                        value: beta,
                    },
                ],
            },
        })
    }

    pub fn center(&self) -> Option<f64> {
        self.ball.as_ref().map(GaussBall::center_1d)
    }

    pub fn radius(&self) -> Option<f64> {
        self.ball.as_ref().map(GaussBall::radius)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomValidation {
    pub kind: AtomKind,
    pub admissible: bool,
    pub maximal: bool,
    pub supported_in_ball: bool,
    /// `||a||_2 gamma(B)^{1/2}`, at most 1 for a valid atom.
    pub size_ratio: f64,
    pub size_ok: bool,
    /// `int a dgamma`.
    pub mean: f64,
    pub cancellation_ok: bool,
    pub valid: bool,
}

pub fn validate_atom(atom: &Atom) -> AtomValidation {
    let Some(ball) = atom.ball.as_ref() else {
        let ok = atom.kind == AtomKind::Exceptional;
        return AtomValidation {
            kind: atom.kind,
            admissible: ok,
            maximal: false,
            supported_in_ball: ok,
            size_ratio: 1.0,
            size_ok: ok,
            mean: 1.0,
            cancellation_ok: ok,
            valid: ok,
        };
    };
    let iv = ball.interval();
    let f = &atom.function;
    let slack = 1e-12 * (1.0 + iv.lo.abs().max(iv.hi.abs()));
    let supported_in_ball = f
        .cells
        .iter()
        .filter(|c| c.value != 0.0)
        .all(|c| c.lo >= iv.lo - slack && c.hi <= iv.hi + slack);
    let size_ratio = f.l2_norm() * ball_measure(ball).sqrt();
    let size_ok = size_ratio <= 1.0 + ATOM_TOL;
    let mean = f.integral();
    let admissible = ball.dim() == 1 && ball.is_admissible();
    let maximal = ball.dim() == 1 && ball.is_maximal();
    let (cancellation_ok, shape_ok) = match atom.kind {
        AtomKind::Standard => (
            mean.abs() <= ATOM_TOL * f.l1_norm().max(f64::MIN_POSITIVE),
            admissible,
        ),
        AtomKind::Global => (true, maximal),
        AtomKind::Exceptional => (false, false),
    };
    AtomValidation {
        kind: atom.kind,
        admissible,
        maximal,
        supported_in_ball,
        size_ratio,
        size_ok,
        mean,
        cancellation_ok,
        valid: shape_ok && supported_in_ball && size_ok && cancellation_ok,
    }
}

/// Mean of `g` over `[lo, hi]` with respect to the Gauss measure, split at
/// the given discontinuities of `g`.
fn gauss_mean_on(g: &dyn Fn(f64) -> f64, lo: f64, hi: f64, jumps: &[f64]) -> f64 {
    let rule = GaussLegendre::new(20);
    let shift = if lo <= 0.0 && hi >= 0.0 {
        0.0
    } else {
        lo.abs().min(hi.abs()).powi(2)
    };
    let mut pts = vec![lo];
    pts.extend(jumps.iter().copied().filter(|&j| j > lo && j < hi));
    pts.push(hi);
    let (mut num, mut den) = (0.0, 0.0);
    for w in pts.windows(2) {
        for (x, wt) in rule.mapped(w[0], w[1]) {
            let d = wt * (shift - x * x).exp();
            num += d * g(x);
            den += d;
        }
    }
    num / den
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BmoRow {
    pub center: f64,
    pub radius: f64,
    pub mean: f64,
    pub oscillation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BmoReport {
    pub rows: Vec<BmoRow>,
    pub sup_oscillation: f64,
    pub l1_norm: f64,
    /// `||f||_1 + sup_B osc`.
    pub norm: f64,
}

/// Admissible intervals with centres `-max_center, ..., max_center` (spacing
/// `step`) and radii `fraction * min(1, 1/|c|)`.
pub fn admissible_ball_grid(max_center: f64, step: f64, fractions: &[f64]) -> Vec<GaussBall> {
    let n = (max_center / step).round() as i64;
    let mut out = Vec::new();
    for k in -n..=n {
        let c = k as f64 * step;
        for &f in fractions {
            if let Ok(b) = GaussBall::new_1d(c, f * admissible_radius(c.abs())) {
                out.push(b);
            }
        }
    }
    out
}

/// `(1/gamma(B)) int_B |f - f_B| dgamma` over each ball, plus `||f||_1`.
pub fn bmo_mean_oscillation(f: &(dyn Fn(f64) -> f64 + Sync), balls: &[GaussBall]) -> BmoReport {
    let opts = QuadOptions {
        abs_tol: 1e-13,
        rel_tol: 1e-10,
        max_evals: 20_000,
    };
    let rows: Vec<BmoRow> = crate::parallel::ordered_map(balls, |b| {
        let iv = b.interval();
        let shift = if iv.lo <= 0.0 && iv.hi >= 0.0 {
            0.0
        } else {
            iv.lo.abs().min(iv.hi.abs()).powi(2)
        };
        let w = |x: f64| (shift - x * x).exp();
        let den = integrate(|x: f64| w(x), iv.lo, iv.hi, 4, &opts).value;
        let mean = integrate(|x: f64| f(x) * w(x), iv.lo, iv.hi, 4, &opts).value / den;
        let osc =
            integrate(|x: f64| (f(x) - mean).abs() * w(x), iv.lo, iv.hi, 8, &opts).value / den;
        BmoRow {
            center: b.center_1d(),
            radius: b.radius(),
            mean,
            oscillation: osc,
        }
    });
    let sup_oscillation = rows.iter().map(|r| r.oscillation).fold(0.0, f64::max);
    let l1_norm = integrate(
        |x: f64| f(x).abs() * (-x * x).exp() / std::f64::consts::PI.sqrt(),
        -12.0,
        12.0,
        96,
        &opts,
    )
    .value;
    BmoReport {
        rows,
        sup_oscillation,
        l1_norm,
        norm: l1_norm + sup_oscillation,
    }
}

/// One test function of the BMO dictionary.
pub struct BmoEntry {
    pub name: String,
    pub g: Box<dyn Fn(f64) -> f64 + Sync + Send>,
    pub jumps: Vec<f64>,
    /// Analytic upper bound on `||g||_BMO`, when available.
    pub certified_norm: Option<f64>,
}

pub struct BmoDictionary {
    pub entries: Vec<BmoEntry>,
    /// Balls on which the BMO norms are scanned.
    pub balls: Vec<GaussBall>,
}

impl BmoDictionary {
    /// `{1, x, x^2, sign(x - c) 1_{|x - c| <= rho}}` with the localisation
    /// placed on the ball `B(c, rho)`.
    pub fn standard(c: f64, rho: f64) -> Self {
        let entries = vec![
            BmoEntry {
                name: "one".into(),
                g: Box::new(|_| 1.0),
                jumps: vec![],
                // ||1||_1 = 1, no oscillation
                certified_norm: Some(1.0),
            },
            BmoEntry {
                name: "x".into(),
                g: Box::new(|x| x),
                jumps: vec![],
                // ||x||_1 = pi^{-1/2}; oscillation <= 2r <= 2
                certified_norm: Some(1.0 / std::f64::consts::PI.sqrt() + 2.0),
            },
            BmoEntry {
                name: "x^2".into(),
                g: Box::new(|x| x * x),
                jumps: vec![],
                // ||x^2||_1 = 1/2; oscillation <= 6
                certified_norm: Some(6.5),
            },
            BmoEntry {
                name: format!("sign(x-{c})_loc"),
                g: Box::new(move |x| {
                    if (x - c).abs() > rho {
                        0.0
                    } else if x < c {
                        -1.0
                    } else {
                        1.0
                    }
                }),
                jumps: vec![c - rho, c, c + rho],
                // ||g||_1 <= 1, oscillation <= 2
                certified_norm: Some(3.0),
            },
        ];
        Self {
            entries,
            balls: admissible_ball_grid(50.0, 0.5, &[1.0, 0.5, 0.25, 0.125]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingRow {
    pub name: String,
    pub pairing: f64,
    pub bmo_norm: f64,
    pub ratio: f64,
}

/// Lower bound for `||f||_{H^1}` up to the unknown duality constant `K`:
/// `max_g |<f, g>| / ||g||_BMO`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityBound {
    pub rows: Vec<PairingRow>,
    /// Valid modulo the duality normalization constant.
    pub bound: f64,
}

pub fn h1_lower_bound_duality(f: &SampledFunction, dict: &BmoDictionary) -> DualityBound {
    let rows = dict
        .entries
        .iter()
        .map(|e| {
            let pairing: f64 = f
                .cells
                .iter()
                .map(|c| c.value * c.measure() * gauss_mean_on(&*e.g, c.lo, c.hi, &e.jumps))
                .sum();
            let scanned = bmo_mean_oscillation(&*e.g, &dict.balls).norm;
            let bmo_norm = scanned.max(e.certified_norm.unwrap_or(0.0));
            PairingRow {
                name: e.name.clone(),
                pairing,
                bmo_norm,
                ratio: pairing.abs() / bmo_norm,
            }
        })
        .collect::<Vec<_>>();
    let bound = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    DualityBound { rows, bound }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AtomicSpace {
    /// Standard and exceptional atoms.
    H1,
    /// Standard, exceptional and global atoms.
    H1Local,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub space: AtomicSpace,
    pub terms: Vec<(f64, Atom)>,
    /// `sum |lambda_j|`.
    pub total: f64,
    /// `||f - sum lambda_j a_j||_1 / ||f||_1`.
    pub residual: f64,
}

#[derive(Serialize)]
struct ExportRow {
    kind: AtomKind,
    center: Option<f64>,
    radius: Option<f64>,
    coefficient: f64,
}

impl Decomposition {
    /// `[{kind, center, radius, coefficient}, ...]`.
    pub fn to_json(&self) -> String {
        let rows: Vec<ExportRow> = self
            .terms
            .iter()
            .map(|(l, a)| ExportRow {
                kind: a.kind,
                center: a.center(),
                radius: a.radius(),
                coefficient: *l,
            })
            .collect();
        serde_json::to_string_pretty(&rows).expect("rows serialize")
    }
}

/// Tiling of `[-l, l]` by intervals of length at most
/// `min(1, 1/max|endpoint|)/2`.
fn blocks(l: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut a = -l;
    while a < l {
        let len = if a < 0.0 {
            0.5 * admissible_radius(a.abs())
        } else if a + 0.5 <= 1.0 {
            0.5
        } else {
            // len (a + len) = 1/2
            0.5 * (-a + (a * a + 2.0).sqrt())
        };
        let b = (a + len).min(l);
        out.push((a, if l - b < 1e-9 * len { l } else { b }));
        a = out.last().expect("pushed").1;
    }
    out
}

/// Ball `B(c, r)` covering `[lo, hi]` with the smallest measure among
/// balls centred at the midpoint, if admissible.
fn admissible_cover(lo: f64, hi: f64) -> Option<GaussBall> {
    let c = 0.5 * (lo + hi);
    let r = 0.5 * (hi - lo);
    if r <= admissible_radius(c.abs()) {
        GaussBall::new_1d(c, r).ok()
    } else {
        None
    }
}

/// Maximal ball containing `[lo, hi]`, searched among centres in the
/// interval.
fn maximal_cover(lo: f64, hi: f64) -> Option<GaussBall> {
    let mid = 0.5 * (lo + hi);
    let candidates = [mid, lo, hi, 0.5 * (lo + mid), 0.5 * (mid + hi)];
    candidates.iter().find_map(|&c| {
        let r = admissible_radius(c.abs());
        (c - r <= lo && hi <= c + r)
            .then(|| GaussBall::new_1d(c, r).ok())
            .flatten()
    })
}

fn restrict(f: &SampledFunction, lo: f64, hi: f64) -> Vec<Cell> {
    f.cells
        .iter()
        .filter(|c| c.hi > lo && c.lo < hi)
        .map(|c| Cell {
            lo: c.lo.max(lo),
            hi: c.hi.min(hi),
            value: c.value,
        })
        .filter(|c| c.hi > c.lo)
        .collect()
}

fn scaled_atom(kind: AtomKind, ball: GaussBall, cells: Vec<Cell>) -> (f64, Atom) {
    let f = SampledFunction { cells };
    let lambda = f.l2_norm() * ball_measure(&ball).sqrt();
    let cells = f
        .cells
        .iter()
        .map(|c| Cell {
            value: c.value / lambda,
            ..*c
        })
        .collect();
    (
        lambda,
        Atom {
            kind,
            ball: Some(ball),
            function: SampledFunction { cells },
        },
    )
}

/// Evaluates `sum lambda_j a_j` against `f` on the common refinement.
fn relative_residual(f: &SampledFunction, terms: &[(f64, Atom)], window: (f64, f64)) -> f64 {
    let mut pts: Vec<f64> = f.breakpoints();
    pts.push(window.0);
    pts.push(window.1);
    for (_, a) in terms {
        pts.extend(a.function.breakpoints());
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let exceptional: f64 = terms
        .iter()
        .filter(|(_, a)| a.kind == AtomKind::Exceptional)
        .map(|(l, _)| *l)
        .sum();
    let mut err = 0.0;
    for w in pts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let mut recon = if mid >= window.0 && mid < window.1 {
            exceptional
        } else {
            0.0
        };
        for (l, a) in terms {
            if a.kind != AtomKind::Exceptional {
                recon += l * a.function.eval(mid);
            }
        }
        err += (f.eval(mid) - recon).abs() * gauss_interval_measure(w[0], w[1]);
    }
    err / f.l1_norm().max(f64::MIN_POSITIVE)
}

fn check_budget(terms: &[(f64, Atom)], budget: usize) -> Result<()> {
    if terms.len() > budget {
        let total: f64 = terms.iter().map(|(l, _)| l.abs()).sum();
        return Err(Error::convergence(
            format!("atom budget {budget} exhausted"),
            num_complex::Complex64::new(total, 0.0),
            f64::NAN,
        ));
    }
    Ok(())
}

/// Standard/exceptional decomposition via block atoms and the mean chain.
fn chain_decomposition(f: &SampledFunction, l: f64, budget: usize) -> Result<Vec<(f64, Atom)>> {
    let blocks = blocks(l);
    let masses: Vec<f64> = blocks
        .iter()
        .map(|&(a, b)| gauss_interval_measure(a, b))
        .collect();
    let window_mass: f64 = masses.iter().sum();
    let total = f.integral();
    let mut terms = Vec::new();
    if total != 0.0 {
        terms.push((total, Atom::exceptional()));
    }
    let mut block_mass = Vec::with_capacity(blocks.len());
    for (&(a, b), &g) in blocks.iter().zip(&masses) {
        let cells = restrict(f, a, b);
        let m: f64 = cells.iter().map(|c| c.value * c.measure()).sum();
        block_mass.push(m);
        let level = m / g;
        let centred: Vec<Cell> = cells
            .iter()
            .map(|c| Cell {
                value: c.value - level,
                ..*c
            })
            .collect();
        // fill the gaps of the block with -level
        let mut full = Vec::new();
        let mut x = a;
        for c in &centred {
            if c.lo > x {
                full.push(Cell {
                    lo: x,
                    hi: c.lo,
                    value: -level,
                });
            }
            full.push(*c);
            x = c.hi;
        }
        if x < b {
            full.push(Cell {
                lo: x,
                hi: b,
                value: -level,
            });
        }
        let scale = cells.iter().map(|c| c.value.abs()).fold(0.0, f64::max);
        full.retain(|c| c.value.abs() > 1e-14 * scale);
        if !full.is_empty() {
            let ball = admissible_cover(a, b).expect("blocks are admissible");
            let (lambda, atom) = scaled_atom(AtomKind::Standard, ball, full);
            if lambda > 0.0 {
                terms.push((lambda, atom));
            }
        }
        check_budget(&terms, budget)?;
    }
    // block means minus the share of the exceptional atom, carried along the chain
    let mut carry = 0.0;
    for i in 0..blocks.len().saturating_sub(1) {
        carry += block_mass[i] - total * masses[i] / window_mass;
        if carry == 0.0 {
            continue;
        }
        let (a, _) = blocks[i];
        let (mid, b) = blocks[i + 1];
        let ball = admissible_cover(a, b).expect("adjacent blocks are admissible");
        let cells = vec![
            Cell {
                lo: a,
                hi: mid,
                value: carry / masses[i],
            },
            Cell {
                lo: mid,
                hi: b,
                value: -carry / masses[i + 1],
            },
        ];
        let (lambda, atom) = scaled_atom(AtomKind::Standard, ball, cells);
        terms.push((lambda, atom));
        check_budget(&terms, budget)?;
    }
    Ok(terms)
}

/// Global atoms on maximal balls around each block carrying mass of `f`.
fn global_cover(f: &SampledFunction, l: f64, budget: usize) -> Result<Vec<(f64, Atom)>> {
    let mut terms = Vec::new();
    for (a, b) in blocks(l) {
        let cells = restrict(f, a, b);
        if cells.iter().all(|c| c.value == 0.0) {
            continue;
        }
        let mid = 0.5 * (a + b);
        let ball = GaussBall::new_1d(mid, admissible_radius(mid.abs()))?;
        terms.push(scaled_atom(AtomKind::Global, ball, cells));
        check_budget(&terms, budget)?;
    }
    Ok(terms)
}

fn finish(
    space: AtomicSpace,
    f: &SampledFunction,
    terms: Vec<(f64, Atom)>,
    window: (f64, f64),
) -> Result<Decomposition> {
    let residual = relative_residual(f, &terms, window);
    let total = terms.iter().map(|(l, _)| l.abs()).sum();
    if residual > RESIDUAL_TOL {
        return Err(Error::convergence(
            format!("reconstruction residual {residual:e} above {RESIDUAL_TOL:e}"),
            num_complex::Complex64::new(total, 0.0),
            residual,
        ));
    }
    Ok(Decomposition {
        space,
        terms,
        total,
        residual,
    })
}

/// Upper bound for the atomic norm of `f` through an explicit decomposition
/// with at most `budget` atoms.
pub fn h1_upper_bound_greedy(
    f: &SampledFunction,
    space: AtomicSpace,
    budget: usize,
) -> Result<Decomposition> {
    let Some((lo, hi)) = f.support_hull() else {
        return Ok(Decomposition {
            space,
            terms: vec![],
            total: 0.0,
            residual: 0.0,
        });
    };
    let l = 10f64.max(lo.abs().max(hi.abs()) + 2.0);
    let window = (-l, l);
    let norm1 = f.l1_norm();

    // a single atom when the support allows it
    if let Some(ball) = admissible_cover(lo, hi) {
        if f.integral().abs() <= ATOM_TOL * norm1 {
            let single = vec![scaled_atom(AtomKind::Standard, ball, f.cells.clone())];
            return finish(space, f, single, window);
        }
    }
    if space == AtomicSpace::H1Local {
        if let Some(ball) = maximal_cover(lo, hi) {
            let single = vec![scaled_atom(AtomKind::Global, ball, f.cells.clone())];
            return finish(space, f, single, window);
        }
    }

    let chain = chain_decomposition(f, l, budget)?;
    let chain_total: f64 = chain.iter().map(|(x, _)| x.abs()).sum();
    if space == AtomicSpace::H1Local {
        let cover = global_cover(f, l, budget)?;
        let cover_total: f64 = cover.iter().map(|(x, _)| x.abs()).sum();
        if cover_total < chain_total {
            return finish(space, f, cover, window);
        }
    }
    finish(space, f, chain, window)
}

/// Upper bound for the `h^1(gamma)` norm.
pub fn h1glob_norm_bound(f: &SampledFunction, budget: usize) -> Result<f64> {
    Ok(h1_upper_bound_greedy(f, AtomicSpace::H1Local, budget)?.total)
}

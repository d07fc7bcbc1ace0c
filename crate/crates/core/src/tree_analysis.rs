//! Radial kernels on the homogeneous tree of degree `q + 1`.
//!
//! A radial kernel is `k(x, y) = eta(d(x, y))` with `d` the natural graph
//! distance, so adjacent vertices are at distance 1. Every sum over vertices
//! is reorganized over spheres `S_j` around the root, with
//! `|S_0| = 1` and `|S_j| = (q + 1) q^{j-1}`.
//!
//! The Hörmander window `rho(x, o) >= 2` of the half-distance convention is
//! natural distance `>= 4` here ([`HORMANDER_MIN_DISTANCE`]).

use std::collections::VecDeque;

use num_bigint::BigUint;
use num_complex::Complex64;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_DEPTH: usize = 64;
pub const HORMANDER_MIN_DISTANCE: usize = 4;
/// Depth limit for the explicit vertex enumeration.
pub const DIRECT_MAX_DEPTH: usize = 10;
/// Shell terms whose second half stays within this factor of its maximum
/// are read as non-summable.
pub const DIVERGENCE_FLATNESS: f64 = 0.5;

/// `|S_j|`, exact.
pub fn sphere_size(q: u32, j: usize) -> BigUint {
    match j {
        0 => BigUint::one(),
        _ => BigUint::from(q + 1) * BigUint::from(q).pow(j as u32 - 1),
    }
}

fn sphere_size_f64(q: u32, j: usize) -> f64 {
    sphere_size(q, j).to_f64().unwrap_or(f64::INFINITY)
}

/// What is known about `eta` beyond the stored values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum TreeTail {
    /// `eta(j) = 0` past the stored values.
    FiniteSupport,
    /// `|eta(j)| <= amplitude ratio^j` for every `j`.
    Geometric {
        amplitude: f64,
        ratio: f64,
    },
    /// `|S_j| |eta(j)| <= amplitude j^{-exponent}` for every `j >= 1`.
    ShellPowerLaw {
        amplitude: f64,
        exponent: f64,
    },
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialTreeKernel {
    pub name: String,
    pub q: u32,
    /// `eta(0), eta(1), ...`
    pub eta: Vec<Complex64>,
    pub tail: TreeTail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TreeVerdict {
    FiniteWithBound,
    Diverging,
    TruncatedUnknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeSumReport {
    pub quantity: String,
    pub shell_terms: Vec<f64>,
    /// `partial_sums[j]` sums the shell terms up to `j`.
    pub partial_sums: Vec<f64>,
    pub value: f64,
    pub tail_bound: Option<f64>,
    pub bound: Option<f64>,
    pub verdict: TreeVerdict,
}

impl RadialTreeKernel {
    pub fn new(
        name: impl Into<String>,
        q: u32,
        eta: Vec<Complex64>,
        tail: TreeTail,
    ) -> Result<Self> {
        if q < 2 {
            return Err(Error::InvalidInput(format!(
                "branching q = {q} must be at least 2"
            )));
        }
        if eta.is_empty() {
            return Err(Error::InvalidInput("eta needs at least one value".into()));
        }
        if eta.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("eta has non-finite values".into()));
        }
        let ok = match tail {
            TreeTail::Geometric { amplitude, ratio } => amplitude >= 0.0 && ratio >= 0.0,
            TreeTail::ShellPowerLaw {
                amplitude,
                exponent,
            } => amplitude >= 0.0 && exponent > 0.0,
            _ => true,
        };
        if !ok {
            return Err(Error::InvalidInput(format!(
                "bad tail description {tail:?}"
            )));
        }
        Ok(Self {
            name: name.into(),
            q,
            eta,
            tail,
        })
    }

    fn from_fn(
        name: String,
        q: u32,
        depth: usize,
        tail: TreeTail,
        f: impl Fn(usize) -> Complex64,
    ) -> Result<Self> {
        Self::new(name, q, (0..=depth).map(f).collect(), tail)
    }

    /// `eta = 1` on distances `<= radius`.
    pub fn indicator(q: u32, radius: usize) -> Result<Self> {
        Self::new(
            format!("indicator:{radius}"),
            q,
            vec![Complex64::new(1.0, 0.0); radius + 1],
            TreeTail::FiniteSupport,
        )
    }

    pub fn delta(q: u32) -> Result<Self> {
        Self::new(
            "delta",
            q,
            vec![Complex64::new(1.0, 0.0)],
            TreeTail::FiniteSupport,
        )
    }

    /// `eta(j) = z^j`.
    pub fn geometric(q: u32, z: Complex64, depth: usize) -> Result<Self> {
        let name = if z.im == 0.0 {
            format!("geometric:{}", z.re)
        } else {
            format!("geometric:{}{:+}i", z.re, z.im)
        };
        Self::from_fn(
            name,
            q,
            depth,
            TreeTail::Geometric {
                amplitude: 1.0,
                ratio: z.norm(),
            },
            |j| z.powu(j as u32),
        )
    }

    /// `eta(j) = (q+1)^{-1} q^{-j} j^{-p}` for `j >= 1`, `eta(0) = 0`.
    pub fn power_law(q: u32, p: f64, depth: usize) -> Result<Self> {
        let qf = q as f64;
        Self::from_fn(
            format!("power:{p}"),
            q,
            depth,
            TreeTail::ShellPowerLaw {
                amplitude: 1.0 / qf,
                exponent: p,
            },
            |j| match j {
                0 => Complex64::new(0.0, 0.0),
                _ => Complex64::new(
                    1.0 / ((qf + 1.0) * qf.powi(j as i32) * (j as f64).powf(p)),
                    0.0,
                ),
            },
        )
    }

    /// `eta(j) = q^{-j} (j+1)^{-2}`.
    pub fn shifted_power_law(q: u32, depth: usize) -> Result<Self> {
        let qf = q as f64;
        Self::from_fn(
            "shifted-power".into(),
            q,
            depth,
            TreeTail::ShellPowerLaw {
                amplitude: (qf + 1.0) / qf,
                exponent: 2.0,
            },
            |j| Complex64::new(qf.powi(-(j as i32)) / ((j + 1) as f64).powi(2), 0.0),
        )
    }

    /// `eta(j) = |S_j|^{-1}`: every sphere carries unit mass.
    pub fn inverse_sphere(q: u32, depth: usize) -> Result<Self> {
        Self::from_fn("inverse-sphere".into(), q, depth, TreeTail::Unknown, |j| {
            Complex64::new(1.0 / sphere_size_f64(q, j), 0.0)
        })
    }

    /// Parses `delta`, `indicator:R`, `geometric:RHO`, `power:P`,
    /// `shifted-power` or `inverse-sphere`.
    pub fn parse(q: u32, spec: &str, depth: usize) -> Result<Self> {
        let (head, arg) = spec
            .split_once(':')
            .map_or((spec, None), |(h, a)| (h, Some(a)));
        let num = |what: &str| -> Result<f64> {
            arg.ok_or_else(|| Error::InvalidInput(format!("{head} needs {what}")))?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidInput(format!("bad {what} in '{spec}': {e}")))
        };
        match head.trim() {
            "delta" => Self::delta(q),
            "indicator" => {
                let r = num("a radius")?;
                if !(r >= 0.0 && r.fract() == 0.0 && r <= 1e4) {
                    return Err(Error::InvalidInput(format!(
                        "radius must be a small nonnegative integer, got {r}"
                    )));
                }
                Self::indicator(q, r as usize)
            }
            "geometric" => Self::geometric(q, Complex64::new(num("a ratio")?, 0.0), depth),
            "power" => Self::power_law(q, num("an exponent")?, depth),
            "shifted-power" => Self::shifted_power_law(q, depth),
            "inverse-sphere" => Self::inverse_sphere(q, depth),
            other => Err(Error::InvalidInput(format!(
                "unknown tree kernel '{other}'"
            ))),
        }
    }

    pub fn eta_at(&self, j: usize) -> Complex64 {
        self.eta.get(j).copied().unwrap_or_default()
    }

    /// Last shell whose terms only involve known values of `eta`.
    fn last_shell(&self) -> usize {
        match self.tail {
            TreeTail::FiniteSupport => self.eta.len(),
            _ => self.eta.len().saturating_sub(2),
        }
    }

    /// Bound on `sum_{i > j} |S_i| |eta(i)|`, when the tail allows one.
    fn l1_tail_after(&self, j: usize) -> Option<f64> {
        let qf = self.q as f64;
        match self.tail {
            TreeTail::FiniteSupport => Some(0.0),
            TreeTail::Geometric { amplitude, ratio } => {
                let x = ratio * qf;
                (x < 1.0).then(|| amplitude * (qf + 1.0) / qf * x.powi(j as i32 + 1) / (1.0 - x))
            }
            TreeTail::ShellPowerLaw {
                amplitude,
                exponent,
            } => (exponent > 1.0 && j >= 1)
                .then(|| amplitude * (j as f64).powf(1.0 - exponent) / (exponent - 1.0)),
            TreeTail::Unknown => None,
        }
    }

    fn shell_mass(&self, j: usize) -> f64 {
        sphere_size_f64(self.q, j) * self.eta_at(j).norm()
    }
}

/// Gradient data of a vertex on the sphere `S_j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShellGradient {
    /// `(sum_{x' ~ x} |eta(x') - eta(x)|^2)^{1/2}`.
    pub l2: f64,
    /// `sum_{x' ~ x} |eta(x') - eta(x)|`.
    pub l1: f64,
}

pub fn shell_gradient(k: &RadialTreeKernel, j: usize) -> ShellGradient {
    let qf = k.q as f64;
    let here = k.eta_at(j);
    let up = (k.eta_at(j + 1) - here).norm();
    if j == 0 {
        return ShellGradient {
            l2: (qf + 1.0).sqrt() * up,
            l1: (qf + 1.0) * up,
        };
    }
    let down = (k.eta_at(j - 1) - here).norm();
    ShellGradient {
        l2: (down * down + qf * up * up).sqrt(),
        l1: down + qf * up,
    }
}

fn finish(
    k: &RadialTreeKernel,
    quantity: &str,
    shell_terms: Vec<f64>,
    tail_bound: Option<f64>,
) -> TreeSumReport {
    let mut partial_sums = Vec::with_capacity(shell_terms.len());
    let mut acc = 0.0;
    for t in &shell_terms {
        acc += t;
        partial_sums.push(acc);
    }
    let flat = {
        let half = &shell_terms[shell_terms.len() / 2..];
        let lo = half.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = half.iter().copied().fold(0.0, f64::max);
        half.len() >= 4 && lo > 0.0 && lo >= DIVERGENCE_FLATNESS * hi
    };
    let verdict = match tail_bound {
        Some(_) => TreeVerdict::FiniteWithBound,
        None if flat && k.tail != TreeTail::FiniteSupport => TreeVerdict::Diverging,
        None => TreeVerdict::TruncatedUnknown,
    };
    TreeSumReport {
        quantity: quantity.into(),
        shell_terms,
        partial_sums,
        value: acc,
        tail_bound,
        bound: tail_bound.map(|t| acc + t),
        verdict,
    }
}

/// `sum_x |k(x, o)| = sum_j |S_j| |eta(j)|`.
pub fn tree_l1_norm(k: &RadialTreeKernel) -> TreeSumReport {
    let last = k.last_shell();
    let terms = (0..=last).map(|j| k.shell_mass(j)).collect();
    finish(k, "l1", terms, k.l1_tail_after(last))
}

/// Tail of a sum whose shell term at `j` is at most
/// `q t_{j-1} + (q+1) t_j + t_{j+1}` with `t_i = |S_i||eta(i)|`.
fn neighbour_tail(k: &RadialTreeKernel, last: usize) -> Option<f64> {
    let qf = k.q as f64;
    k.l1_tail_after(last)
        .map(|t| qf * k.shell_mass(last) + (2.0 * qf + 2.0) * t)
}

/// `sum_x |grad eta(x)|` with the Euclidean length of the gradient.
pub fn tree_gradient_l1(k: &RadialTreeKernel) -> TreeSumReport {
    let last = k.last_shell();
    let terms = (0..=last)
        .map(|j| sphere_size_f64(k.q, j) * shell_gradient(k, j).l2)
        .collect();
    finish(k, "gradient", terms, neighbour_tail(k, last))
}

/// Reorganized Hörmander sum at shell `j`: `|S_j| (q |eta(j+1) - eta(j)| + |eta(j-1) - eta(j)|)`.
fn hormander_shell(k: &RadialTreeKernel, j: usize) -> f64 {
    let here = k.eta_at(j);
    sphere_size_f64(k.q, j)
        * (k.q as f64 * (k.eta_at(j + 1) - here).norm() + (k.eta_at(j - 1) - here).norm())
}

/// Agreement of the explicit vertex sum with the shell sum at one depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectCheck {
    pub depth: usize,
    pub direct: f64,
    pub reorganized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeHormanderReport {
    /// Shell terms are zero below [`HORMANDER_MIN_DISTANCE`].
    pub sum: TreeSumReport,
    pub direct: Vec<DirectCheck>,
}

/// `sum_{y ~ o} sum_{d(x, o) >= 4} |k(x, y) - k(x, o)|`, i.e. `q + 1`
/// times the Hörmander sum of one neighbour.
pub fn tree_hormander_sum(k: &RadialTreeKernel) -> TreeHormanderReport {
    let last = k.last_shell();
    let terms: Vec<f64> = (0..=last)
        .map(|j| {
            if j < HORMANDER_MIN_DISTANCE {
                0.0
            } else {
                hormander_shell(k, j)
            }
        })
        .collect();
    let sum = finish(k, "hormander", terms, neighbour_tail(k, last));
    // past a finite support every shell term vanishes
    let top = if k.tail == TreeTail::FiniteSupport {
        DIRECT_MAX_DEPTH
    } else {
        last.min(DIRECT_MAX_DEPTH)
    };
    let direct = (HORMANDER_MIN_DISTANCE..=top)
        .map(|d| DirectCheck {
            depth: d,
            direct: hormander_direct(k, d),
            reorganized: sum.partial_sums[d.min(last)],
        })
        .collect();
    TreeHormanderReport { sum, direct }
}

/// Explicit ball of radius `depth` around the root: adjacency lists, with
/// the root's neighbours first.
fn build_ball(q: u32, depth: usize) -> Vec<Vec<usize>> {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new()];
    let mut frontier = vec![0usize];
    for level in 0..depth {
        let mut next = Vec::new();
        for &v in &frontier {
            let children = if level == 0 { q + 1 } else { q };
            for _ in 0..children {
                let id = adj.len();
                adj.push(vec![v]);
                adj[v].push(id);
                next.push(id);
            }
        }
        frontier = next;
    }
    adj
}

fn bfs(adj: &[Vec<usize>], start: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; adj.len()];
    dist[start] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Double sum over the root's neighbours `y` and the vertices `x` with
/// `4 <= d(x, o) <= depth`, by enumeration of the ball of radius `depth`.
pub fn hormander_direct(k: &RadialTreeKernel, depth: usize) -> f64 {
    let adj = build_ball(k.q, depth);
    let from_root = bfs(&adj, 0);
    // Neumaier summation: a few hundred thousand terms at depth 10
    let (mut total, mut carry) = (0.0f64, 0.0f64);
    for y in 1..=(k.q as usize + 1) {
        let from_y = bfs(&adj, y);
        for x in 0..adj.len() {
            if from_root[x] >= HORMANDER_MIN_DISTANCE {
                let term = (k.eta_at(from_y[x]) - k.eta_at(from_root[x])).norm();
                let t = total + term;
                carry += if total.abs() >= term {
                    (total - t) + term
                } else {
                    (term - t) + total
                };
                total = t;
            }
        }
    }
    total + carry
}

/// `||k(., y) - k(., y0)||_1` for adjacent `y, y0`:
/// `2 sum_m q^m |eta(m+1) - eta(m)|`.
pub fn adjacent_atom_image_norm(k: &RadialTreeKernel) -> TreeSumReport {
    let last = k.last_shell();
    let qf = k.q as f64;
    let terms = (0..=last)
        .map(|m| 2.0 * qf.powi(m as i32) * (k.eta_at(m + 1) - k.eta_at(m)).norm())
        .collect();
    // q^m <= |S_m| and q^m <= |S_{m+1}|
    finish(
        k,
        "adjacent-atom-image",
        terms,
        k.l1_tail_after(last).map(|t| 4.0 * t),
    )
}

/// `||grad eta||_1 / ||eta||_1`.
pub fn cheeger_ratio(k: &RadialTreeKernel) -> Result<f64> {
    let l1 = tree_l1_norm(k);
    if l1.verdict != TreeVerdict::FiniteWithBound {
        return Err(Error::Precondition(format!(
            "{}: the l1 norm is not certified finite",
            k.name
        )));
    }
    if l1.value == 0.0 {
        return Err(Error::Precondition(format!("{}: eta vanishes", k.name)));
    }
    Ok(tree_gradient_l1(k).value / l1.value)
}

/// `||eta||_1 <= (head + H) / floor`, where `head` is the gradient mass on
/// distances below the Hörmander window and `floor` a Cheeger floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheegerChain {
    pub l1_bound: f64,
    pub hormander_bound: f64,
    pub head: f64,
    pub floor: f64,
    pub holds: bool,
}

pub fn cheeger_chain(k: &RadialTreeKernel, floor: f64) -> Result<CheegerChain> {
    let l1 = tree_l1_norm(k);
    let h = tree_hormander_sum(k).sum;
    let (Some(l1_bound), Some(hormander_bound)) = (l1.bound, h.bound) else {
        return Err(Error::Precondition(format!(
            "{}: sums are not certified finite",
            k.name
        )));
    };
    let head = (0..HORMANDER_MIN_DISTANCE)
        .map(|j| sphere_size_f64(k.q, j) * shell_gradient(k, j).l1)
        .sum::<f64>();
    Ok(CheegerChain {
        l1_bound,
        hormander_bound,
        head,
        floor,
        holds: l1.value <= (head + hormander_bound) / floor * (1.0 + 1e-12),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub kernel: String,
    pub q: u32,
    pub atom_image: TreeVerdict,
    pub hormander: TreeVerdict,
    pub l1: TreeVerdict,
    pub atom_image_bounded: bool,
    pub hormander_finite: bool,
    pub l1_finite: bool,
    /// No certified-finite premise of the chain
    /// atom images bounded => Hörmander finite => l1 finite => all bounded
    /// meets a diverging conclusion.
    pub consistent: bool,
}

pub fn equivalence_report(k: &RadialTreeKernel) -> EquivalenceReport {
    let a = adjacent_atom_image_norm(k).verdict;
    let h = tree_hormander_sum(k).sum.verdict;
    let l = tree_l1_norm(k).verdict;
    let fin = |v: TreeVerdict| v == TreeVerdict::FiniteWithBound;
    let div = |v: TreeVerdict| v == TreeVerdict::Diverging;
    let broken = (fin(a) && div(h)) || (fin(h) && div(l)) || (fin(l) && (div(a) || div(h)));
    EquivalenceReport {
        kernel: k.name.clone(),
        q: k.q,
        atom_image: a,
        hormander: h,
        l1: l,
        atom_image_bounded: fin(a),
        hormander_finite: fin(h),
        l1_finite: fin(l),
        consistent: !broken,
    }
}

/// The ten kernels used by the tree experiments.
pub fn shipped_kernels() -> Vec<RadialTreeKernel> {
    let d = DEFAULT_DEPTH;
    vec![
        RadialTreeKernel::delta(2),
        RadialTreeKernel::indicator(2, 1),
        RadialTreeKernel::indicator(3, 3),
        RadialTreeKernel::geometric(2, Complex64::new(0.25, 0.0), d),
        RadialTreeKernel::geometric(2, Complex64::from_polar(0.3, 0.7), d),
        RadialTreeKernel::geometric(2, Complex64::new(0.45, 0.0), d),
        RadialTreeKernel::geometric(3, Complex64::new(1.0 / 6.0, 0.0), d),
        RadialTreeKernel::power_law(2, 2.0, d),
        RadialTreeKernel::shifted_power_law(2, d),
        RadialTreeKernel::inverse_sphere(2, d),
    ]
    .into_iter()
    .map(|k| k.expect("shipped kernel"))
    .collect()
}

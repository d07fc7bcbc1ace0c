//! Quadrature primitives shared by every estimator in the crate.
//!
//! * [`integrate`]: globally adaptive Gauss-Kronrod (10/21 point) bisection
//!   for scalar, complex and vector valued integrands.
//! * [`GaussLegendre`]: fixed rules on `[-1, 1]`.
//! * [`QuadratureGrid`]: Gauss-Hermite rules rescaled to the Gauss measure.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

/// Values an adaptive rule can accumulate.
pub trait QuadValue: Clone {
    fn zero_like(&self) -> Self;
    fn add_scaled(&mut self, other: &Self, w: f64);
    fn norm(&self) -> f64;
    fn dist(&self, other: &Self) -> f64;
}

impl QuadValue for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn add_scaled(&mut self, other: &Self, w: f64) {
        *self += w * other;
    }
    fn norm(&self) -> f64 {
        self.abs()
    }
    fn dist(&self, other: &Self) -> f64 {
        (self - other).abs()
    }
}

impl QuadValue for Complex64 {
    fn zero_like(&self) -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn add_scaled(&mut self, other: &Self, w: f64) {
        *self += other * w;
    }
    fn norm(&self) -> f64 {
        Complex64::norm(*self)
    }
    fn dist(&self, other: &Self) -> f64 {
        (self - other).norm()
    }
}

/// Component-wise vector integrand; the error norm is the max over components.
impl QuadValue for Vec<f64> {
    fn zero_like(&self) -> Self {
        vec![0.0; self.len()]
    }
    fn add_scaled(&mut self, other: &Self, w: f64) {
        for (a, b) in self.iter_mut().zip(other) {
            *a += w * b;
        }
    }
    fn norm(&self) -> f64 {
        self.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
    fn dist(&self, other: &Self) -> f64 {
        self.iter()
            .zip(other)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Maximum number of integrand evaluations.
    pub max_evals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_evals: 200_000,
        }
    }
}

impl QuadOptions {
    pub fn with_abs(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol: 0.0,
            ..Self::default()
        }
    }

    pub fn with_rel(rel_tol: f64) -> Self {
        Self {
            abs_tol: 0.0,
            rel_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadResult<V> {
    pub value: V,
    pub error: f64,
    pub evals: usize,
    pub converged: bool,
}

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_525_478_836,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// 10-point Gauss weights for XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

struct Segment<V> {
    a: f64,
    b: f64,
    value: V,
    error: f64,
}

impl<V> PartialEq for Segment<V> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<V> Eq for Segment<V> {}
impl<V> PartialOrd for Segment<V> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<V> Ord for Segment<V> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .partial_cmp(&other.error)
            .unwrap_or(Ordering::Equal)
            // deterministic tie-break on position
            .then_with(|| other.a.partial_cmp(&self.a).unwrap_or(Ordering::Equal))
    }
}

fn gk21<V: QuadValue, F: FnMut(f64) -> V>(f: &mut F, a: f64, b: f64) -> (V, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = fc.zero_like();
    kron.add_scaled(&fc, WGK[10]);
    let mut gauss = fc.zero_like();
    let mut samples = Vec::with_capacity(21);
    samples.push((fc.clone(), WGK[10]));
    for (k, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(10).enumerate() {
        let dx = half * x;
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        kron.add_scaled(&f1, w);
        kron.add_scaled(&f2, w);
        if k % 2 == 1 {
            gauss.add_scaled(&f1, WG[k / 2]);
            gauss.add_scaled(&f2, WG[k / 2]);
        }
        samples.push((f1, w));
        samples.push((f2, w));
    }
    // QUADPACK-style error scaling
    let mut mean = kron.zero_like();
    mean.add_scaled(&kron, 0.5);
    let mut resasc = 0.0;
    let mut resabs = 0.0;
    for (v, w) in &samples {
        resasc += w * v.dist(&mean);
        resabs += w * v.norm();
    }
    let resasc = resasc * half.abs();
    let resabs = resabs * half.abs();
    let mut err = kron.dist(&gauss) * half.abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    let roundoff = 50.0 * f64::EPSILON * resabs;
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(roundoff);
    }
    let mut value = kron.zero_like();
    value.add_scaled(&kron, half);
    (value, err)
}

/// Globally adaptive integration of `f` over the union of panels defined by
/// the sorted `breaks` (at least two points).
pub fn integrate_breaks<V, F>(mut f: F, breaks: &[f64], opts: &QuadOptions) -> QuadResult<V>
where
    V: QuadValue,
    F: FnMut(f64) -> V,
{
    assert!(breaks.len() >= 2, "need at least one panel");
    let mut heap = BinaryHeap::new();
    let mut evals = 0usize;
    let mut total_err = 0.0;
    let mut total: Option<V> = None;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let (value, error) = gk21(&mut f, a, b);
        evals += 21;
        total_err += error;
        match &mut total {
            Some(t) => t.add_scaled(&value, 1.0),
            None => total = Some(value.clone()),
        }
        heap.push(Segment { a, b, value, error });
    }
    let mut total = match total {
        Some(t) => t,
        None => {
            let probe = f(breaks[0]);
            return QuadResult {
                value: probe.zero_like(),
                error: 0.0,
                evals: 1,
                converged: true,
            };
        }
    };
    let mut frozen: Vec<Segment<V>> = Vec::new();
    let converged;
    loop {
        let target = opts.abs_tol.max(opts.rel_tol * total.norm());
        if total_err <= target {
            converged = true;
            break;
        }
        if evals + 42 > opts.max_evals {
            converged = false;
            break;
        }
        let Some(seg) = heap.pop() else {
            converged = total_err <= target;
            break;
        };
        let mid = 0.5 * (seg.a + seg.b);
        if !(mid > seg.a && mid < seg.b) || (seg.b - seg.a) < 1e-14 * seg.a.abs().max(seg.b.abs()) {
            // cannot refine further; keep it out of the queue
            frozen.push(seg);
            if heap.is_empty() {
                converged = false;
                break;
            }
            continue;
        }
        let (lv, le) = gk21(&mut f, seg.a, mid);
        let (rv, re) = gk21(&mut f, mid, seg.b);
        evals += 42;
        total.add_scaled(&seg.value, -1.0);
        total.add_scaled(&lv, 1.0);
        total.add_scaled(&rv, 1.0);
        total_err += le + re - seg.error;
        heap.push(Segment {
            a: seg.a,
            b: mid,
            value: lv,
            error: le,
        });
        heap.push(Segment {
            a: mid,
            b: seg.b,
            value: rv,
            error: re,
        });
    }
    // re-sum in position order for a deterministic final value
    let mut segs: Vec<Segment<V>> = heap.into_vec();
    segs.extend(frozen);
    segs.sort_by(|x, y| x.a.partial_cmp(&y.a).unwrap_or(Ordering::Equal));
    let mut value = total.zero_like();
    let mut error = 0.0;
    for s in &segs {
        value.add_scaled(&s.value, 1.0);
        error += s.error;
    }
    QuadResult {
        value,
        error,
        evals,
        converged,
    }
}

/// Adaptive integration over `[a, b]` split into `panels` equal pieces.
pub fn integrate<V, F>(f: F, a: f64, b: f64, panels: usize, opts: &QuadOptions) -> QuadResult<V>
where
    V: QuadValue,
    F: FnMut(f64) -> V,
{
    let n = panels.max(1);
    let breaks: Vec<f64> = (0..=n)
        .map(|k| {
            if k == n {
                b
            } else {
                a + (b - a) * k as f64 / n as f64
            }
        })
        .collect();
    integrate_breaks(f, &breaks, opts)
}

/// Fixed Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut pp = 0.0;
            for _ in 0..100 {
                let (mut p1, mut p2) = (1.0, 0.0);
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
                }
                pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() < 1e-15 {
                    break;
                }
            }
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            let w = 2.0 / ((1.0 - z * z) * pp * pp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (c + h * x, h * w))
    }
}

/// Gauss-Hermite nodes and weights normalized so that
/// `sum_k w_k g(x_k)` approximates `\int g d\gamma` for the Gauss measure
/// with density `pi^{-1/2} e^{-x^2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureGrid {
    /// Nodes are the eigenvalues of the Jacobi matrix of the orthonormal
    /// Hermite family (Sturm bisection); weights follow from the Christoffel
    /// function `1 / sum_j phi_j(x)^2`, evaluated with the factor `e^{-x^2/2}`
    /// carried through the recurrence to avoid overflow.
    pub fn gauss_hermite(m: usize) -> Self {
        assert!(m >= 1);
        let off: Vec<f64> = (1..m).map(|j| (0.5 * j as f64).sqrt()).collect();
        // number of eigenvalues strictly below lambda
        let count_below = |lambda: f64| -> usize {
            let mut count = 0;
            let mut q = -lambda;
            if q < 0.0 {
                count += 1;
            }
            for e in &off {
                let prev = if q == 0.0 { f64::MIN_POSITIVE } else { q };
                q = -lambda - e * e / prev;
                if q < 0.0 {
                    count += 1;
                }
            }
            count
        };
        let bound = (2.0 * m as f64).sqrt() + 1.0;
        let mut nodes = Vec::with_capacity(m);
        for k in 0..m {
            let (mut lo, mut hi) = (-bound, bound);
            loop {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if count_below(mid) > k {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            nodes.push(0.5 * (lo + hi));
        }
        // exact symmetry
        for k in 0..m / 2 {
            let v = 0.5 * (nodes[m - 1 - k] - nodes[k]);
            nodes[k] = -v;
            nodes[m - 1 - k] = v;
        }
        if m % 2 == 1 {
            nodes[m / 2] = 0.0;
        }
        let weights = nodes
            .iter()
            .map(|&x| {
                let damp = (-0.5 * x * x).exp();
                let (mut prev, mut cur) = (0.0, damp);
                let mut sum = cur * cur;
                for j in 0..m - 1 {
                    let jf = j as f64;
                    let next =
                        (2.0 / (jf + 1.0)).sqrt() * x * cur - (jf / (jf + 1.0)).sqrt() * prev;
                    prev = cur;
                    cur = next;
                    sum += cur * cur;
                }
                damp * damp / sum
            })
            .collect();
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adaptive_integrates_smooth_and_endpoint_singular() {
        let r = integrate(|x: f64| x.exp(), 0.0, 1.0, 1, &QuadOptions::default());
        assert!((r.value - (std::f64::consts::E - 1.0)).abs() < 1e-13);
        assert!(r.converged);
        let r = integrate(|x: f64| x.ln(), 0.0, 1.0, 1, &QuadOptions::with_abs(1e-10));
        assert!((r.value + 1.0).abs() < 1e-9, "{}", r.value);
    }

    #[test]
    fn complex_and_vector_values() {
        let r: QuadResult<Complex64> = integrate(
            |x: f64| Complex64::new(0.0, x).exp(),
            0.0,
            std::f64::consts::PI,
            4,
            &QuadOptions::default(),
        );
        assert!((r.value - Complex64::new(0.0, 2.0)).norm() < 1e-12);
        let r: QuadResult<Vec<f64>> = integrate(
            |x: f64| vec![x, x * x],
            0.0,
            3.0,
            2,
            &QuadOptions::default(),
        );
        assert!((r.value[0] - 4.5).abs() < 1e-12 && (r.value[1] - 9.0).abs() < 1e-12);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let opts = QuadOptions {
            abs_tol: 1e-300,
            rel_tol: 0.0,
            max_evals: 200,
        };
        let r = integrate(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, 1, &opts);
        assert!(!r.converged);
        assert!(r.evals <= 200);
    }

    #[test]
    fn legendre_exactness() {
        let gl = GaussLegendre::new(12);
        let s: f64 = gl.mapped(0.0, 2.0).map(|(x, w)| w * x.powi(23)).sum();
        assert!((s - 2f64.powi(24) / 24.0).abs() < 1e-9 * 2f64.powi(24) / 24.0);
    }

    #[test]
    fn hermite_grid_is_probability_rule() {
        for m in [1, 2, 7, 40, 200] {
            let g = QuadratureGrid::gauss_hermite(m);
            let total: f64 = g.weights.iter().sum();
            assert!((total - 1.0).abs() < 1e-14, "m={m} sum={total}");
        }
        // moments of the Gauss measure: E[x^{2k}] = (2k-1)!!/2^k
        let g = QuadratureGrid::gauss_hermite(20);
        let mut expected = 1.0;
        for k in 1..20 {
            expected *= (2 * k - 1) as f64 / 2.0;
            let got = g.integrate(|x| x.powi(2 * k));
            assert!((got - expected).abs() <= 1e-12 * expected, "k={k}");
            let odd = g.integrate(|x| x.powi(2 * k - 1));
            assert!(odd.abs() < 1e-12 * expected);
        }
    }
}

//! Numerical integration used throughout the crate.
//!
//! Two tools live here: fixed-order Gauss–Legendre rules (used for the
//! per-entry stiffness integrals, where the integrand is smooth on each
//! piece) and a globally adaptive 7/15-point Gauss–Kronrod integrator for
//! complex-valued integrands with user-supplied break points.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the `order`-point rule by Newton iteration on `P_order`.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Legendre order must be positive");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    let (_, d) = legendre_with_derivative(n, x);
                    dp = d;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate<F>(&self, a: f64, b: f64, mut f: F) -> Complex64
    where
        F: FnMut(f64) -> Complex64,
    {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        let mut acc = Complex64::new(0.0, 0.0);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += f(c + r * x) * *w;
        }
        acc * r
    }

    pub fn integrate_real<F>(&self, a: f64, b: f64, mut f: F) -> f64
    where
        F: FnMut(f64) -> f64,
    {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += f(c + r * x) * w;
        }
        acc * r
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

// 15-point Kronrod abscissae (positive half, descending) and weights, with
// the embedded 7-point Gauss weights for the odd-indexed abscissae.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerance pair for [`integrate_adaptive`]: the integrator stops once the
/// summed error estimate is below `max(abs, rel * |I|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Self {
            abs,
            rel,
            max_intervals: 4000,
        }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::new(1e-13, 1e-12)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: Complex64,
    pub error: f64,
    pub evaluations: usize,
}

struct Segment {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15<F>(f: &mut F, a: f64, b: f64) -> (Complex64, f64)
where
    F: FnMut(f64) -> Complex64,
{
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = r * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += s * WGK[j];
        if j % 2 == 1 {
            gauss += s * WG[j / 2];
        }
    }
    let value = kron * r;
    let error = ((kron - gauss) * r).norm();
    (value, error)
}

/// Globally adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
///
/// `breaks` are points inside `(a, b)` where `f` or a derivative jumps; the
/// interval is split there before any adaptive refinement starts.
pub fn integrate_adaptive<F>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<Integral>
where
    F: FnMut(f64) -> Complex64,
{
    if a == b {
        return Ok(Integral {
            value: Complex64::new(0.0, 0.0),
            error: 0.0,
            evaluations: 0,
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut cuts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|p| p.is_finite() && *p > lo && *p < hi)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut heap = BinaryHeap::new();
    let mut total = Complex64::new(0.0, 0.0);
    let mut err_total = 0.0;
    let mut evaluations = 0;
    let mut left = lo;
    for right in cuts.into_iter().chain(std::iter::once(hi)) {
        if right > left {
            let (value, error) = kronrod15(&mut f, left, right);
            evaluations += 15;
            total += value;
            err_total += error;
            heap.push(Segment {
                a: left,
                b: right,
                value,
                error,
            });
        }
        left = right;
    }

    loop {
        if !total.re.is_finite() || !total.im.is_finite() {
            return Err(Error::QuadratureNonConvergence {
                estimate: f64::INFINITY,
            });
        }
        if err_total <= tol.abs.max(tol.rel * total.norm()) {
            break;
        }
        if heap.len() >= tol.max_intervals {
            return Err(Error::QuadratureNonConvergence {
                estimate: err_total,
            });
        }
        let worst = heap.pop().expect("at least one segment");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval cannot be split further in floating point
            return Err(Error::QuadratureNonConvergence {
                estimate: err_total,
            });
        }
        let (v1, e1) = kronrod15(&mut f, worst.a, mid);
        let (v2, e2) = kronrod15(&mut f, mid, worst.b);
        evaluations += 30;
        total += v1 + v2 - worst.value;
        err_total += e1 + e2 - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }
    // re-sum to shed drift from the incremental updates
    let value: Complex64 = heap.iter().map(|s| s.value).sum();
    let error: f64 = heap.iter().map(|s| s.error).sum();
    Ok(Integral {
        value: value * sign,
        error,
        evaluations,
    })
}

/// Real-valued convenience wrapper around [`integrate_adaptive`].
pub fn integrate_adaptive_real<F>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    integrate_adaptive(|x| Complex64::new(f(x), 0.0), a, b, breaks, tol).map(|i| i.value.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        for order in [1, 2, 5, 16, 32] {
            let gl = GaussLegendre::new(order);
            let degree = 2 * order - 1;
            let exact = if degree % 2 == 0 {
                2.0 / (degree as f64 + 1.0)
            } else {
                0.0
            };
            let got = gl.integrate_real(-1.0, 1.0, |x| x.powi(degree as i32));
            assert!((got - exact).abs() < 1e-13, "order {order}: {got}");
            let even = gl.integrate_real(-1.0, 1.0, |x| x.powi(2 * (order as i32 - 1)));
            assert_relative_eq!(even, 2.0 / (2.0 * order as f64 - 1.0), epsilon = 1e-13);
        }
    }

    #[test]
    fn gauss_legendre_weights_sum_to_two() {
        for order in [3, 8, 16, 40] {
            let gl = GaussLegendre::new(order);
            let s: f64 = gl.weights().iter().sum();
            assert_relative_eq!(s, 2.0, epsilon = 1e-14);
            assert!(gl.nodes().windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn kronrod_constants_integrate_degree_22() {
        // the 15-point Kronrod rule is exact through degree 22
        let mut f = |x: f64| Complex64::new(x.powi(22) + x.powi(7), 0.0);
        let (v, _) = kronrod15(&mut f, -1.0, 1.0);
        assert_relative_eq!(v.re, 2.0 / 23.0, epsilon = 1e-14);
    }

    #[test]
    fn adaptive_handles_kinks_with_breaks() {
        let tol = Tolerance::new(1e-14, 1e-13);
        let v = integrate_adaptive_real(|x: f64| (-x.abs()).exp(), -30.0, 30.0, &[0.0], tol)
            .unwrap();
        assert_relative_eq!(v, 2.0 * (1.0 - (-30.0f64).exp()), epsilon = 1e-12);
    }

    #[test]
    fn adaptive_complex_oscillatory() {
        let tol = Tolerance::new(1e-14, 1e-13);
        let k = 7.3;
        let got = integrate_adaptive(
            |x| Complex64::new(0.0, k * x).exp(),
            0.0,
            3.0,
            &[],
            tol,
        )
        .unwrap();
        let exact = (Complex64::new(0.0, 3.0 * k).exp() - 1.0) / Complex64::new(0.0, k);
        assert!((got.value - exact).norm() < 1e-12);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let tol = Tolerance::default();
        let fwd = integrate_adaptive_real(|x| x * x, 0.0, 2.0, &[], tol).unwrap();
        let back = integrate_adaptive_real(|x| x * x, 2.0, 0.0, &[], tol).unwrap();
        assert_relative_eq!(fwd, -back, epsilon = 1e-15);
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let r = integrate_adaptive_real(|x| 1.0 / x, 0.0, 1.0, &[], Tolerance::default());
        assert!(matches!(r, Err(Error::QuadratureNonConvergence { .. })));
    }
}

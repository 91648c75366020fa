//! Dispersion relation `μ(k̃) = k²` and its admissible root.
//!
//! `μ(k̃) = δ⁻² ∫ (1 − e^{ik̃δs}) γ₁(s) ds`. Because `γ₁` is even the sine part
//! integrates to zero, so the quadrature works with the equivalent
//! cancellation-free integrand `2 sin²(k̃δs/2) γ₁(s)`.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::quadrature::{integrate_adaptive, integrate_adaptive_real, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `k < k₀`, `k̃` real and positive.
    Propagating,
    /// `k > k₀`, `Im k̃ > 0`.
    Evanescent,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regime::Propagating => f.write_str("propagating"),
            Regime::Evanescent => f.write_str("evanescent"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionResult {
    pub k: f64,
    pub ktilde: Complex64,
    pub k0: f64,
    pub regime: Regime,
    /// `|μ(k̃) − k²|` at the returned root.
    pub residual: f64,
}

const ROOT_TOLERANCE: f64 = 1e-12;
const NEWTON_MAX_ITERATIONS: usize = 60;
const DEGENERATE_BAND: f64 = 1e-12;

fn quadrature_tolerance(kernel: &KernelSpec) -> Tolerance {
    let d2 = kernel.delta() * kernel.delta();
    Tolerance::new(1e-14 * d2.min(1.0), 1e-13)
}

fn check_convergent(kernel: &KernelSpec, ktilde: Complex64) -> Result<()> {
    if let Some(rate) = kernel.family().exponential_tail_rate() {
        let growth = ktilde.im.abs() * kernel.delta();
        if growth >= rate {
            return Err(Error::DivergentIntegral {
                reason: format!(
                    "|Im k̃|·δ = {growth:.6} reaches the kernel tail rate {rate}; \
                     use the analytic continuation instead"
                ),
            });
        }
    }
    Ok(())
}

/// Radius where `γ₁(s)e^{|Im θ|s}` falls to the support tolerance. Equals
/// `l̂_γ` for real `θ`; complex `θ` shifts the integrand's mass outward.
fn quadrature_radius(kernel: &KernelSpec, theta: Complex64) -> f64 {
    let r = kernel.effective_radius();
    let b = theta.im.abs();
    match kernel.family() {
        KernelFamily::Exponential => r / (1.0 - b),
        KernelFamily::Gaussian => 0.5 * b + (0.25 * b * b + r * r).sqrt(),
    }
}

/// Dispersion function `μ(k̃)` by quadrature over the kernel support.
pub fn mu(kernel: &KernelSpec, ktilde: Complex64) -> Result<Complex64> {
    check_convergent(kernel, ktilde)?;
    let delta = kernel.delta();
    let theta = ktilde * delta;
    let r = quadrature_radius(kernel, theta);
    let integrand = |s: f64| {
        let half = (theta * (0.5 * s)).sin();
        half * half * (2.0 * kernel.eval_parent(s))
    };
    // even integrand: fold onto [0, r]
    let one_side = integrate_adaptive(integrand, 0.0, r, &[], quadrature_tolerance(kernel))?;
    Ok(one_side.value * (2.0 / (delta * delta)))
}

/// Derivative `μ'(k̃) = (2/δ) ∫₀^∞ s sin(k̃δs) γ₁(s) ds`.
pub fn mu_derivative(kernel: &KernelSpec, ktilde: Complex64) -> Result<Complex64> {
    check_convergent(kernel, ktilde)?;
    let delta = kernel.delta();
    let theta = ktilde * delta;
    let r = quadrature_radius(kernel, theta);
    let integrand = |s: f64| (theta * s).sin() * (s * kernel.eval_parent(s));
    let v = integrate_adaptive(integrand, 0.0, r, &[], quadrature_tolerance(kernel))?;
    Ok(v.value * (2.0 / delta))
}

/// Closed-form `μ(k̃)`; for complex `k̃` this is the analytic continuation,
/// which stays meaningful where the defining integral diverges.
pub fn mu_closed_form(kernel: &KernelSpec, ktilde: Complex64) -> Complex64 {
    let delta = kernel.delta();
    match kernel.family() {
        KernelFamily::Exponential => {
            let t2 = ktilde * ktilde;
            t2 / (t2 * (delta * delta) + 1.0)
        }
        KernelFamily::Gaussian => {
            let x = ktilde * delta;
            -expm1(-(x * x) / 4.0) * (4.0 / (delta * delta))
        }
    }
}

fn expm1(w: Complex64) -> Complex64 {
    if w.norm() < 1e-3 {
        w * (1.0 + w * (0.5 + w * (1.0 / 6.0 + w * (1.0 / 24.0 + w / 120.0))))
    } else {
        w.exp() - 1.0
    }
}

/// Cutoff `k₀ = sup_{k̃ > 0} √μ(k̃)` from the closed forms.
pub fn cutoff_k0(kernel: &KernelSpec) -> f64 {
    match kernel.family() {
        KernelFamily::Exponential => 1.0 / kernel.delta(),
        KernelFamily::Gaussian => 2.0 / kernel.delta(),
    }
}

/// Upper end of the real `k̃δ` scan used by [`cutoff_k0_numeric`].
pub const CUTOFF_SCAN_MAX: f64 = 50.0;

/// Numerical `k₀`: geometric scan of `√μ` over `k̃δ ∈ [10⁻³, 50]`, a
/// golden-section refinement around an interior maximum, and the
/// `k̃ → ∞` limit `√(∫γ₁)/δ`.
pub fn cutoff_k0_numeric(kernel: &KernelSpec) -> Result<f64> {
    let delta = kernel.delta();
    let samples = 241;
    let (lo, hi) = (1e-3f64, CUTOFF_SCAN_MAX);
    let ratio = (hi / lo).powf(1.0 / (samples - 1) as f64);
    let sqrt_mu = |theta: f64| -> Result<f64> {
        Ok(mu(kernel, Complex64::new(theta / delta, 0.0))?.re.max(0.0).sqrt())
    };
    let mut thetas = Vec::with_capacity(samples);
    let mut values = Vec::with_capacity(samples);
    let mut theta = lo;
    for _ in 0..samples {
        thetas.push(theta);
        values.push(sqrt_mu(theta)?);
        theta *= ratio;
    }
    let (imax, &vmax) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty scan");
    let mut best = vmax;
    if imax > 0 && imax + 1 < samples {
        let (mut a, mut b) = (thetas[imax - 1], thetas[imax + 1]);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (sqrt_mu(c)?, sqrt_mu(d)?);
        for _ in 0..80 {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = sqrt_mu(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = sqrt_mu(d)?;
            }
        }
        best = best.max(fc).max(fd);
    }
    let r = kernel.effective_radius();
    let mass = 2.0
        * integrate_adaptive_real(|s| kernel.eval_parent(s), 0.0, r, &[], Tolerance::new(1e-15, 1e-14))?;
    let limit = mass.sqrt() / delta;
    Ok(best.max(limit))
}

fn validate_k(kernel: &KernelSpec, k: f64) -> Result<f64> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::invalid("k", format!("must be positive, got {k}")));
    }
    let k0 = cutoff_k0(kernel);
    if (k - k0).abs() < DEGENERATE_BAND * k0 {
        return Err(Error::DegenerateK { k, k0 });
    }
    Ok(k0)
}

fn admissible(z: Complex64) -> Complex64 {
    if z.im < 0.0 {
        -z
    } else {
        z
    }
}

/// Admissible root of `μ(k̃) = k²` from the closed forms.
pub fn solve_ktilde(kernel: &KernelSpec, k: f64) -> Result<DispersionResult> {
    let k0 = validate_k(kernel, k)?;
    let delta = kernel.delta();
    let dk = delta * k;
    let (ktilde, regime) = match kernel.family() {
        KernelFamily::Exponential => {
            let q = 1.0 - dk * dk;
            if q > 0.0 {
                (Complex64::new(k / q.sqrt(), 0.0), Regime::Propagating)
            } else {
                (Complex64::new(0.0, k / (-q).sqrt()), Regime::Evanescent)
            }
        }
        KernelFamily::Gaussian => {
            let x = dk * dk / 4.0;
            if x < 1.0 {
                let w = -(-x).ln_1p();
                (Complex64::new(2.0 / delta * w.sqrt(), 0.0), Regime::Propagating)
            } else {
                let w = -Complex64::new(1.0 - x, 0.0).ln();
                (admissible(w.sqrt() * (2.0 / delta)), Regime::Evanescent)
            }
        }
    };
    let residual = (mu_closed_form(kernel, ktilde) - k * k).norm();
    Ok(DispersionResult {
        k,
        ktilde,
        k0,
        regime,
        residual,
    })
}

/// Root finding without closed forms: bisection on the real axis when
/// `k < k₀`, damped complex Newton otherwise. Residuals are measured with
/// the quadrature `μ`.
pub fn solve_ktilde_numeric(kernel: &KernelSpec, k: f64) -> Result<DispersionResult> {
    validate_k(kernel, k)?;
    let k0 = cutoff_k0_numeric(kernel)?;
    let target = k * k;
    if k < k0 {
        let f = |t: f64| -> Result<f64> { Ok(mu(kernel, Complex64::new(t, 0.0))?.re - target) };
        let mut lo = 0.0;
        let mut hi = k;
        let mut doublings = 0;
        while f(hi)? <= 0.0 {
            lo = hi;
            hi *= 2.0;
            doublings += 1;
            if doublings > 200 || hi * kernel.delta() > CUTOFF_SCAN_MAX {
                return Err(Error::NoRootFound {
                    iterations: doublings,
                    residual: f(hi)?.abs(),
                });
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || (hi - lo) <= 1e-15 * hi {
                break;
            }
            if f(mid)? > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let t = 0.5 * (lo + hi);
        let ktilde = Complex64::new(t, 0.0);
        let residual = (mu(kernel, ktilde)? - target).norm();
        return Ok(DispersionResult {
            k,
            ktilde,
            k0,
            regime: Regime::Propagating,
            residual,
        });
    }

    // seed from the Gaussian-shaped relation scaled to this kernel's cutoff
    let delta = kernel.delta();
    let c = k0 * delta;
    let ratio = k * delta / c;
    let w = -Complex64::new(1.0 - ratio * ratio, 0.0).ln();
    let mut z = admissible(w.sqrt() * (c / delta));
    let mut res = mu(kernel, z)? - target;
    for _ in 0..NEWTON_MAX_ITERATIONS {
        if res.norm() <= ROOT_TOLERANCE * target {
            let ktilde = admissible(z);
            return Ok(DispersionResult {
                k,
                ktilde,
                k0,
                regime: Regime::Evanescent,
                residual: res.norm(),
            });
        }
        let step = res / mu_derivative(kernel, z)?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial = z - step * lambda;
            if let Ok(m) = mu(kernel, trial) {
                let r = m - target;
                if r.norm() < res.norm() {
                    z = trial;
                    res = r;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Err(Error::NoRootFound {
        iterations: NEWTON_MAX_ITERATIONS,
        residual: res.norm(),
    })
}

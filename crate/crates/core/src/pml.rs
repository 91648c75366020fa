//! PML geometry: linear absorption ramp, stretching factor and complex coordinate.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Truncated domain `(−l, l)` surrounded by absorbing layers of width `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmlProfile {
    l: f64,
    d: f64,
    sigma0: f64,
}

impl PmlProfile {
    pub fn new(l: f64, d: f64, sigma0: f64) -> Result<Self> {
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::invalid("l", format!("must be positive, got {l}")));
        }
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::invalid("d", format!("must be positive, got {d}")));
        }
        if !(sigma0.is_finite() && sigma0 >= 0.0) {
            return Err(Error::invalid("sigma0", format!("must be nonnegative, got {sigma0}")));
        }
        Ok(Self { l, d, sigma0 })
    }

    /// Layers of width `d` with no absorption.
    pub fn inactive(l: f64, d: f64) -> Result<Self> {
        Self::new(l, d, 0.0)
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    pub fn with_sigma0(&self, sigma0: f64) -> Result<Self> {
        Self::new(self.l, self.d, sigma0)
    }

    fn slope(&self) -> f64 {
        self.sigma0 / self.d
    }

    /// Distance past the interface, zero inside `Ω`.
    fn excess(&self, t: f64) -> f64 {
        (t.abs() - self.l).max(0.0)
    }

    /// `σ(t)`; the ramp keeps rising beyond `|t| = l + d`.
    pub fn sigma(&self, t: f64) -> f64 {
        self.slope() * self.excess(t)
    }

    /// `ω(x) = 1 + iσ(x)`.
    pub fn omega(&self, x: f64) -> Complex64 {
        Complex64::new(1.0, self.sigma(x))
    }

    /// Imaginary part of `x̃(x)`.
    fn stretch_im(&self, x: f64) -> f64 {
        let e = self.excess(x);
        (0.5 * self.slope() * e * e).copysign(x)
    }

    /// `x̃(x) = ∫₀ˣ ω(t) dt`.
    pub fn stretch(&self, x: f64) -> Complex64 {
        Complex64::new(x, self.stretch_im(x))
    }

    /// `x̃(b) − x̃(a)` with the real part taken as `b − a` exactly.
    pub(crate) fn stretch_difference(&self, a: f64, b: f64, real_part: f64) -> Complex64 {
        Complex64::new(real_part, self.stretch_im(b) - self.stretch_im(a))
    }

    /// `|∫₀ˣ σ(t) dt|`.
    pub fn sigma_integral(&self, x: f64) -> f64 {
        let e = self.excess(x);
        0.5 * self.slope() * e * e
    }

    /// True when `[a, b]` lies in the closed region where the stretch is the identity.
    pub fn is_identity_on(&self, a: f64, b: f64) -> bool {
        self.sigma0 == 0.0 || (a >= -self.l && b <= self.l)
    }
}

/// Smallest `σ₀` with `amplitude·exp(−k̃·σ₀d/2) ≤ target`.
pub fn choose_sigma0(ktilde_decay: f64, d: f64, target: f64, amplitude: f64) -> Result<f64> {
    for (name, v) in [
        ("ktilde_decay", ktilde_decay),
        ("d", d),
        ("target", target),
        ("amplitude", amplitude),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::invalid(name, format!("must be positive, got {v}")));
        }
    }
    if amplitude <= target {
        return Ok(0.0);
    }
    Ok(2.0 * (amplitude / target).ln() / (ktilde_decay * d))
}

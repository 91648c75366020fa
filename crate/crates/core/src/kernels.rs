//! Parent kernels, their horizon rescaling and complex continuation.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_adaptive_real, Tolerance};

pub const DEFAULT_SUPPORT_TOLERANCE: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    /// `γ₁(s) = ½ e^{-|s|}`
    Exponential,
    /// `γ₁(s) = (4/√π) e^{-s²}`
    Gaussian,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Exponential => "exp",
            KernelFamily::Gaussian => "gauss",
        }
    }

    fn peak(self) -> f64 {
        match self {
            KernelFamily::Exponential => 0.5,
            KernelFamily::Gaussian => 4.0 / PI.sqrt(),
        }
    }

    /// Total mass `∫ γ₁`.
    pub fn mass(self) -> f64 {
        match self {
            KernelFamily::Exponential => 1.0,
            KernelFamily::Gaussian => 4.0,
        }
    }

    /// Rate `a` in `γ₁(s) ~ e^{-a|s|}` for exponentially decaying tails, or
    /// `None` when the tail decays faster than any exponential.
    pub fn exponential_tail_rate(self) -> Option<f64> {
        match self {
            KernelFamily::Exponential => Some(1.0),
            KernelFamily::Gaussian => None,
        }
    }

    /// True when the kernel has a derivative jump at the origin.
    pub fn has_kink_at_origin(self) -> bool {
        matches!(self, KernelFamily::Exponential)
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exp" | "exponential" => Ok(KernelFamily::Exponential),
            "gauss" | "gaussian" => Ok(KernelFamily::Gaussian),
            other => Err(Error::invalid(
                "kernel",
                format!("unknown kernel family `{other}` (expected exp or gauss)"),
            )),
        }
    }
}

/// A parent kernel together with its horizon `δ` and the tolerance that
/// defines where its infinite tail is cut off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    delta: f64,
    support_tolerance: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, delta: f64) -> Result<Self> {
        Self::with_support_tolerance(family, delta, DEFAULT_SUPPORT_TOLERANCE)
    }

    pub fn with_support_tolerance(
        family: KernelFamily,
        delta: f64,
        support_tolerance: f64,
    ) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::invalid("delta", format!("must be positive, got {delta}")));
        }
        if !(support_tolerance > 0.0 && support_tolerance < 1.0) {
            return Err(Error::invalid(
                "support_tolerance",
                format!("must lie in (0, 1), got {support_tolerance}"),
            ));
        }
        Ok(Self {
            family,
            delta,
            support_tolerance,
        })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn support_tolerance(&self) -> f64 {
        self.support_tolerance
    }

    /// `γ₁(s)`.
    pub fn eval_parent(&self, s: f64) -> f64 {
        match self.family {
            KernelFamily::Exponential => 0.5 * (-s.abs()).exp(),
            KernelFamily::Gaussian => self.family.peak() * (-s * s).exp(),
        }
    }

    /// `γ_δ(s) = δ⁻³ γ₁(s/δ)`.
    pub fn eval_rescaled(&self, s: f64) -> f64 {
        self.eval_parent(s / self.delta) / self.delta.powi(3)
    }

    /// Analytic continuation of `γ₁` to a complex separation `z`.
    ///
    /// The exponential kernel uses `ρ(z) = √(z²)` on the branch with
    /// `Re ρ ≥ 0`; on the imaginary axis `ρ(iy) = |y|`.
    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        match self.family {
            KernelFamily::Exponential => 0.5 * (-exp_branch_rho(z)).exp(),
            KernelFamily::Gaussian => self.family.peak() * (-z * z).exp(),
        }
    }

    /// Continued rescaled kernel `δ⁻³ γ₁(z/δ)`.
    pub fn eval_rescaled_complex(&self, z: Complex64) -> Complex64 {
        self.eval_complex(z / self.delta) / self.delta.powi(3)
    }

    /// Radius `l̂_γ` beyond which `γ₁` stays below the support tolerance.
    pub fn effective_radius(&self) -> f64 {
        let eps = self.support_tolerance;
        match self.family {
            KernelFamily::Exponential => (1.0 / (2.0 * eps)).ln().max(0.0),
            KernelFamily::Gaussian => {
                let arg = (self.family.peak() / eps).ln();
                if arg > 0.0 {
                    arg.sqrt()
                } else {
                    0.0
                }
            }
        }
    }

    /// Physical interaction reach `δ·l̂_γ`.
    pub fn horizon(&self) -> f64 {
        self.delta * self.effective_radius()
    }

    /// `½ ∫ s² γ₁(s) ds` over the truncated support.
    pub fn second_moment(&self) -> f64 {
        let r = self.effective_radius();
        let tol = Tolerance::new(1e-15, 1e-14);
        // γ₁ is even: ½∫_{-r}^{r} equals the one-sided integral
        integrate_adaptive_real(|s| s * s * self.eval_parent(s), 0.0, r, &[], tol)
            .expect("second-moment integrand is smooth on [0, r]")
    }
}

/// `ρ(z)` with `Re ρ ≥ 0`.
pub(crate) fn exp_branch_rho(z: Complex64) -> Complex64 {
    if z.re > 0.0 {
        z
    } else if z.re < 0.0 {
        -z
    } else {
        Complex64::new(z.im.abs(), 0.0)
    }
}

//! Reference solutions: the free-space Green's function, the exact
//! exponential-kernel solution, the weight `κ` of the weighted average and
//! the affine map between nonlocal and local solutions.

use num_complex::Complex64;

use crate::dispersion::solve_ktilde;
use crate::discretization::GridFunction;
use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::quadrature::{integrate_adaptive, GaussLegendre, Tolerance};
use crate::source::SourceFunction;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `G_{x₀}(x) = −e^{ik̃|x−x₀|}/(2ik̃)`, the outgoing Green's function of
/// `−∂ₓ² − k̃²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenFree {
    pub ktilde: Complex64,
    pub x0: f64,
}

impl GreenFree {
    pub fn new(ktilde: Complex64, x0: f64) -> Result<Self> {
        if !(ktilde.im > 0.0 || (ktilde.im == 0.0 && ktilde.re > 0.0)) {
            return Err(Error::invalid(
                "ktilde",
                format!("needs Re > 0 on the real axis or Im > 0, got {ktilde}"),
            ));
        }
        Ok(Self { ktilde, x0 })
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        green_kernel(self.ktilde, (x - self.x0).abs())
    }
}

#[inline]
fn green_kernel(ktilde: Complex64, r: f64) -> Complex64 {
    -(I * ktilde * r).exp() / (2.0 * I * ktilde)
}

/// `G^{L_δ}_{x₀} = A·G_{x₀} + D·δ_{x₀}` for `γ₁ = ½e^{−|s|}`, with
/// `A = 1/(1−(δk)²)²` and `D = δ²/(1−(δk)²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenNonlocalExp {
    pub k: f64,
    pub delta: f64,
    pub ktilde: Complex64,
    pub regular_amplitude: f64,
    pub dirac_weight: f64,
}

/// Smallest admissible `|1 − (δk)²|`.
pub const SINGULAR_GAP: f64 = 1e-10;

fn dispersion_gap(k: f64, delta: f64) -> Result<f64> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::invalid("k", format!("must be positive, got {k}")));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::invalid("delta", format!("must be positive, got {delta}")));
    }
    let dk = delta * k;
    let gap = 1.0 - dk * dk;
    if gap.abs() < SINGULAR_GAP {
        return Err(Error::NearSingularDispersion { gap });
    }
    Ok(gap)
}

impl GreenNonlocalExp {
    pub fn new(k: f64, delta: f64) -> Result<Self> {
        let gap = dispersion_gap(k, delta)?;
        let kernel = KernelSpec::new(KernelFamily::Exponential, delta)?;
        let ktilde = solve_ktilde(&kernel, k)?.ktilde;
        Ok(Self {
            k,
            delta,
            ktilde,
            regular_amplitude: 1.0 / (gap * gap),
            dirac_weight: delta * delta / gap,
        })
    }

    /// The regular part `A·G_{x₀}(x)`; the Dirac part only acts through
    /// [`ExactSolutionExp`].
    pub fn regular(&self, x0: f64, x: f64) -> Complex64 {
        green_kernel(self.ktilde, (x - x0).abs()) * self.regular_amplitude
    }
}

/// `u(x) = A·∫_{−l}^{l} G_x(y) f(y) dy + D·f(x)`, the exact whole-line
/// solution for the exponential kernel and a source supported in `[−l, l]`.
#[derive(Debug, Clone)]
pub struct ExactSolutionExp {
    green: GreenNonlocalExp,
    source: SourceFunction,
    tolerance: Tolerance,
    edge: [Complex64; 2],
}

impl ExactSolutionExp {
    pub fn new(k: f64, delta: f64, source: SourceFunction) -> Result<Self> {
        let green = GreenNonlocalExp::new(k, delta)?;
        let mut out = Self {
            green,
            source,
            tolerance: Tolerance::new(1e-14, 1e-12),
            edge: [Complex64::new(0.0, 0.0); 2],
        };
        let l = out.source.support();
        out.edge = [out.convolution_direct(-l)?, out.convolution_direct(l)?];
        Ok(out)
    }

    pub fn green(&self) -> &GreenNonlocalExp {
        &self.green
    }

    pub fn source(&self) -> &SourceFunction {
        &self.source
    }

    pub fn ktilde(&self) -> Complex64 {
        self.green.ktilde
    }

    fn convolution_direct(&self, x: f64) -> Result<Complex64> {
        let l = self.source.support();
        let kt = self.green.ktilde;
        let f = |y: f64| green_kernel(kt, (x - y).abs()) * self.source.eval(y);
        Ok(integrate_adaptive(f, -l, l, &[x], self.tolerance)?.value)
    }

    /// `∫_{−l}^{l} G_x(y) f(y) dy`; outside `[−l, l]` it is the boundary
    /// value carried by `e^{ik̃(|x|−l)}`.
    pub fn convolution(&self, x: f64) -> Result<Complex64> {
        let l = self.source.support();
        let kt = self.green.ktilde;
        if x >= l {
            Ok(self.edge[1] * (I * kt * (x - l)).exp())
        } else if x <= -l {
            Ok(self.edge[0] * (I * kt * (-l - x)).exp())
        } else {
            self.convolution_direct(x)
        }
    }

    /// `d/dx ∫ G_x(y) f(y) dy = −½ ∫ sign(x−y) e^{ik̃|x−y|} f(y) dy`.
    pub fn convolution_derivative(&self, x: f64) -> Result<Complex64> {
        let l = self.source.support();
        let kt = self.green.ktilde;
        if x.abs() >= l {
            return Ok(I * kt * x.signum() * self.convolution(x)?);
        }
        let f = |y: f64| {
            let s = if y < x { 1.0 } else { -1.0 };
            -0.5 * s * (I * kt * (x - y).abs()).exp() * self.source.eval(y)
        };
        Ok(integrate_adaptive(f, -l, l, &[x], self.tolerance)?.value)
    }

    pub fn value(&self, x: f64) -> Result<Complex64> {
        Ok(self.convolution(x)? * self.green.regular_amplitude
            + self.green.dirac_weight * self.source.eval(x))
    }

    /// `u'(x)` away from `±l`, where `u` jumps with `f`.
    pub fn derivative(&self, x: f64) -> Result<Complex64> {
        let df = self.source.derivative(x).ok_or_else(|| {
            Error::invalid("source", "exact derivative needs a source with a known derivative")
        })?;
        Ok(self.convolution_derivative(x)? * self.green.regular_amplitude
            + self.green.dirac_weight * df)
    }

    pub fn sample(&self, grid: crate::discretization::Grid) -> Result<GridFunction> {
        let values = (0..grid.len())
            .map(|i| self.value(grid.x(i)))
            .collect::<Result<Vec<_>>>()?;
        GridFunction::new(grid, values)
    }
}

/// Convenience wrapper around [`ExactSolutionExp::value`].
pub fn exact_solution_exp(k: f64, delta: f64, source: &SourceFunction, x: f64) -> Result<Complex64> {
    ExactSolutionExp::new(k, delta, source.clone())?.value(x)
}

/// Number of tabulated samples of `κ` on `[0, δ·l̂]`.
pub const WEIGHT_TABLE_SIZE: usize = 2049;

/// The even weight `κ` of the weighted average: `w₁` for `t < 0`, `w₂` for
/// `t > 0`, with the semi-infinite integrals cut at `±l̂_γ`.
#[derive(Debug, Clone)]
pub struct WeightFunction {
    kernel: KernelSpec,
    ktilde: Complex64,
    table: Vec<Complex64>,
}

impl WeightFunction {
    pub fn new(kernel: KernelSpec, ktilde: Complex64) -> Result<Self> {
        if ktilde == Complex64::new(0.0, 0.0) {
            return Err(Error::invalid("ktilde", "must be nonzero"));
        }
        if let Some(rate) = kernel.family().exponential_tail_rate() {
            if ktilde.im.abs() * kernel.delta() >= rate {
                return Err(Error::DivergentIntegral {
                    reason: "weight integrals grow faster than the kernel decays".into(),
                });
            }
        }
        let mut w = Self {
            kernel,
            ktilde,
            table: Vec::new(),
        };
        let reach = w.reach();
        w.table = (0..WEIGHT_TABLE_SIZE)
            .map(|i| w.w2(reach * i as f64 / (WEIGHT_TABLE_SIZE - 1) as f64))
            .collect::<Result<_>>()?;
        Ok(w)
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn ktilde(&self) -> Complex64 {
        self.ktilde
    }

    /// `δ·l̂_γ`, beyond which `κ` vanishes.
    pub fn reach(&self) -> f64 {
        self.kernel.horizon()
    }

    /// `w₂(t) = −(1/(δ²k̃)) ∫_{t/δ}^{l̂} sin(k̃(t − δs)) γ₁(s) ds`.
    pub fn w2(&self, t: f64) -> Result<Complex64> {
        let delta = self.kernel.delta();
        let r = self.kernel.effective_radius();
        let lo = t / delta;
        if lo >= r {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let kt = self.ktilde;
        let breaks: &[f64] = if lo < 0.0 { &[0.0] } else { &[] };
        let v = integrate_adaptive(
            |s| (kt * (t - delta * s)).sin() * self.kernel.eval_parent(s),
            lo,
            r,
            breaks,
            Tolerance::new(1e-15, 1e-13),
        )?;
        Ok(-v.value / (kt * delta * delta))
    }

    /// `w₁(t) = (1/(δ²k̃)) ∫_{−l̂}^{t/δ} sin(k̃(t − δs)) γ₁(s) ds`.
    pub fn w1(&self, t: f64) -> Result<Complex64> {
        let delta = self.kernel.delta();
        let r = self.kernel.effective_radius();
        let hi = t / delta;
        if hi <= -r {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let kt = self.ktilde;
        let breaks: &[f64] = if hi > 0.0 { &[0.0] } else { &[] };
        let v = integrate_adaptive(
            |s| (kt * (t - delta * s)).sin() * self.kernel.eval_parent(s),
            -r,
            hi,
            breaks,
            Tolerance::new(1e-15, 1e-13),
        )?;
        Ok(v.value / (kt * delta * delta))
    }

    /// `κ(t)` by quadrature.
    pub fn kappa(&self, t: f64) -> Result<Complex64> {
        if t < 0.0 {
            self.w1(t)
        } else {
            self.w2(t)
        }
    }

    /// `κ(t)` by linear interpolation of the tabulation.
    pub fn kappa_tabulated(&self, t: f64) -> Complex64 {
        let reach = self.reach();
        let a = t.abs();
        if a >= reach {
            return Complex64::new(0.0, 0.0);
        }
        let pos = a / reach * (WEIGHT_TABLE_SIZE - 1) as f64;
        let i = (pos.floor() as usize).min(WEIGHT_TABLE_SIZE - 2);
        let frac = pos - i as f64;
        self.table[i] * (1.0 - frac) + self.table[i + 1] * frac
    }

    /// Closed form `((1−(δk)²)/(2δ))·e^{−|t|/δ}` for the exponential kernel,
    /// written with `1/(1+(δk̃)²) = 1−(δk)²`.
    pub fn kappa_closed_form(&self, t: f64) -> Option<Complex64> {
        match self.kernel.family() {
            KernelFamily::Exponential => {
                let delta = self.kernel.delta();
                let dk = self.ktilde * delta;
                Some((-t.abs() / delta).exp() / ((dk * dk + 1.0) * (2.0 * delta)))
            }
            KernelFamily::Gaussian => None,
        }
    }
}

/// `u^w(x) = ∫ u(t + x) κ(t) dt` over `[−δl̂, δl̂]` for a callable `u`.
///
/// `breaks` lists absolute coordinates where `u` is not smooth.
pub fn weighted_average<F>(u: F, kappa: &WeightFunction, x: f64, breaks: &[f64]) -> Result<Complex64>
where
    F: Fn(f64) -> Complex64,
{
    let reach = kappa.reach();
    let mut cuts = vec![0.0];
    cuts.extend(breaks.iter().map(|b| b - x).filter(|t| t.abs() < reach));
    let mut failure = None;
    let integrand = |t: f64| match kappa.kappa(t) {
        Ok(k) => u(t + x) * k,
        Err(e) => {
            failure.get_or_insert(e);
            Complex64::new(0.0, 0.0)
        }
    };
    let v = integrate_adaptive(integrand, -reach, reach, &cuts, Tolerance::new(1e-12, 1e-11))?;
    match failure {
        Some(e) => Err(e),
        None => Ok(v.value),
    }
}

/// Weighted average of the piecewise-linear interpolant of a grid function.
pub fn weighted_average_grid(u: &GridFunction, kappa: &WeightFunction, x: f64) -> Result<Complex64> {
    let reach = kappa.reach();
    let grid = u.grid();
    let (lo, hi) = (x - reach, x + reach);
    if lo < grid.lo() || hi > grid.hi() {
        return Err(Error::OutOfDomain {
            lo,
            hi,
            grid_lo: grid.lo(),
            grid_hi: grid.hi(),
        });
    }
    // cell by cell: the interpolant is linear on each cell
    let rule = GaussLegendre::new(8);
    let h = grid.h();
    let first = ((lo - grid.lo()) / h).floor() as usize;
    let last = (((hi - grid.lo()) / h).ceil() as usize).min(grid.len() - 1);
    let mut total = Complex64::new(0.0, 0.0);
    for c in first..last {
        let (a, b) = (grid.x(c).max(lo), grid.x(c + 1).min(hi));
        if b <= a {
            continue;
        }
        let (ua, ub) = (u.values()[c], u.values()[c + 1]);
        let (xa, xb) = (grid.x(c), grid.x(c + 1));
        let mut pieces = vec![(a, b)];
        if a < x && x < b {
            pieces = vec![(a, x), (x, b)];
        }
        for (p, q) in pieces {
            total += rule.integrate(p, q, |y| {
                let w = (y - xa) / (xb - xa);
                (ua * (1.0 - w) + ub * w) * kappa.kappa_tabulated(y - x)
            });
        }
    }
    Ok(total)
}

/// `u_loc = (1−(δk)²)²·u − δ²(1−(δk)²)·f`, pointwise.
pub fn local_from_nonlocal(
    u: &GridFunction,
    f: &GridFunction,
    k: f64,
    delta: f64,
) -> Result<GridFunction> {
    let gap = dispersion_gap(k, delta)?;
    let (a, b) = (gap * gap, delta * delta * gap);
    u.zip_with(f, |uv, fv| uv * a - fv * b)
}

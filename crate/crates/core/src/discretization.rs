//! Uniform grid, nodal grid functions and assembly of the AC-scheme
//! coefficients `a_{n,m}` (plain kernel) and `ã_{n,m}` (PML kernel).

use num_complex::Complex64;
use rayon::prelude::*;

use crate::banded::BandedComplexMatrix;
use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::pml::PmlProfile;
use crate::quadrature::GaussLegendre;

/// Nodes `x_n = n·h` for `−N ≤ n ≤ N`, with `l + d = M·h` and a Dirichlet
/// buffer of `N − M` nodes on each side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    h: f64,
    n: usize,
    m: usize,
}

impl Grid {
    /// Grid with spacing `h` over `[−half_length, half_length]` plus a buffer
    /// covering `reach` (rounded up, plus one cell for the hat support).
    pub fn new(h: f64, half_length: f64, reach: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::invalid("h", format!("must be positive, got {h}")));
        }
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(Error::invalid(
                "l+d",
                format!("must be positive, got {half_length}"),
            ));
        }
        if !(reach.is_finite() && reach >= 0.0) {
            return Err(Error::invalid("reach", format!("must be nonnegative, got {reach}")));
        }
        let ratio = half_length / h;
        let m = ratio.round();
        if m < 1.0 || (ratio - m).abs() > 1e-12 * ratio.max(1.0) {
            return Err(Error::invalid(
                "h",
                format!("h = {h} does not divide l + d = {half_length} into whole cells"),
            ));
        }
        let m = m as usize;
        Ok(Self {
            h,
            n: m + Self::buffer_for(h, reach),
            m,
        })
    }

    /// Grid sized for a kernel's reach `δ·l̂_γ` over `l + d`.
    pub fn for_kernel(kernel: &KernelSpec, h: f64, l: f64, d: f64) -> Result<Self> {
        Self::new(h, l + d, kernel.horizon())
    }

    /// `ceil(reach/h) + 1`.
    pub fn buffer_for(h: f64, reach: f64) -> usize {
        // guard against reach/h landing a hair above an integer
        let cells = reach / h;
        let r = cells.round();
        let c = if (cells - r).abs() <= 1e-12 * cells.max(1.0) { r } else { cells.ceil() };
        c as usize + 1
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// `N`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// `M`.
    pub fn m(&self) -> usize {
        self.m
    }

    /// `N − M`, also the half-bandwidth of assembled operators.
    pub fn buffer(&self) -> usize {
        self.n - self.m
    }

    /// `l + d` as represented by the grid.
    pub fn half_length(&self) -> f64 {
        self.m as f64 * self.h
    }

    /// `2N + 1`.
    pub fn len(&self) -> usize {
        2 * self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `x_n` for a signed node index.
    pub fn node(&self, n: i64) -> f64 {
        n as f64 * self.h
    }

    /// Coordinate of storage slot `i`.
    pub fn x(&self, i: usize) -> f64 {
        self.node(self.node_index(i))
    }

    pub fn node_index(&self, i: usize) -> i64 {
        i as i64 - self.n as i64
    }

    pub fn storage_index(&self, n: i64) -> usize {
        (n + self.n as i64) as usize
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.x(i)).collect()
    }

    /// Storage slots of the unknowns `−M < n < M`.
    pub fn interior(&self) -> std::ops::Range<usize> {
        self.n - self.m + 1..self.n + self.m
    }

    pub fn lo(&self) -> f64 {
        -(self.n as f64) * self.h
    }

    pub fn hi(&self) -> f64 {
        self.n as f64 * self.h
    }
}

/// Complex nodal values on a [`Grid`], read between nodes by linear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::IncompatibleGrids(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn sample<F: Fn(f64) -> Complex64>(grid: Grid, f: F) -> Self {
        Self {
            grid,
            values: (0..grid.len()).map(|i| f(grid.x(i))).collect(),
        }
    }

    pub fn sample_real<F: Fn(f64) -> f64>(grid: Grid, f: F) -> Self {
        Self::sample(grid, |x| Complex64::new(f(x), 0.0))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Value at node `n`.
    pub fn at(&self, n: i64) -> Complex64 {
        self.values[self.grid.storage_index(n)]
    }

    /// Piecewise-linear interpolant at `x`.
    pub fn eval(&self, x: f64) -> Result<Complex64> {
        let (lo, hi) = (self.grid.lo(), self.grid.hi());
        if !(x >= lo && x <= hi) {
            return Err(Error::OutOfDomain {
                lo: x,
                hi: x,
                grid_lo: lo,
                grid_hi: hi,
            });
        }
        let t = (x - lo) / self.grid.h();
        let i = (t.floor() as usize).min(self.values.len() - 2);
        let frac = t - i as f64;
        Ok(self.values[i] * (1.0 - frac) + self.values[i + 1] * frac)
    }

    /// Same grid and values combined entrywise.
    pub fn zip_with<F>(&self, other: &GridFunction, f: F) -> Result<GridFunction>
    where
        F: Fn(Complex64, Complex64) -> Complex64,
    {
        if self.grid != other.grid {
            return Err(Error::IncompatibleGrids(format!(
                "h = {} / N = {} versus h = {} / N = {}",
                self.grid.h(),
                self.grid.n(),
                other.grid.h(),
                other.grid.n()
            )));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect();
        Ok(GridFunction {
            grid: self.grid,
            values,
        })
    }
}

/// Hat function of width `h` centred at `m·h`.
pub fn hat(s: f64, m: i64, h: f64) -> f64 {
    (1.0 - (s - m as f64 * h).abs() / h).max(0.0)
}

/// How the PML kernel treats the complex coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelMode {
    /// `γ_δ(x̃ − ỹ)ω(x)ω(y)` with the analytically continued kernel.
    #[default]
    Continued,
    /// `γ_δ(x − y)ω(x)ω(y)`: real separation, stretching factors only.
    Unmodified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssemblyOptions {
    /// Gauss–Legendre order on each smooth piece of a hat half.
    pub order: usize,
    /// Order of the cross-check applied to the translation-invariant
    /// coefficients; `None` skips the check.
    pub check_order: Option<usize>,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            order: 16,
            check_order: Some(32),
        }
    }
}

const CHECK_TOLERANCE: f64 = 1e-13;

/// Integrates `φ_j(s)·s·k(s)` over the support of `φ_j` and applies the
/// `−1/(jh)` prefactor. Each hat half is split into panels no wider than
/// `panel` and at any `breaks` it contains.
fn offset_integral<K>(
    j: usize,
    h: f64,
    panel: f64,
    breaks: &[f64],
    rule: &GaussLegendre,
    kernel: K,
) -> Complex64
where
    K: Fn(f64) -> Complex64,
{
    let jh = j as f64 * h;
    let mut total = Complex64::new(0.0, 0.0);
    for (a, b, rising) in [(jh - h, jh, true), (jh, jh + h, false)] {
        let mut cuts = vec![a];
        let pieces = ((b - a) / panel).ceil().max(1.0) as usize;
        for p in 1..pieces {
            cuts.push(a + (b - a) * p as f64 / pieces as f64);
        }
        cuts.extend(breaks.iter().copied().filter(|&t| t > a && t < b));
        cuts.push(b);
        cuts.sort_by(f64::total_cmp);
        for w in cuts.windows(2) {
            if w[1] <= w[0] {
                continue;
            }
            total += rule.integrate(w[0], w[1], |s| {
                let phi = if rising { (s - a) / h } else { (b - s) / h };
                kernel(s) * (phi * s)
            });
        }
    }
    -total / jh
}

fn panel_width(kernel: &KernelSpec) -> f64 {
    0.5 * kernel.delta()
}

/// Translation-invariant coefficients `a_j = a_{n,n+j}` for `j = 0..=b`,
/// with `a_0` set so the full row sums to zero.
pub fn nonlocal_offsets(
    kernel: &KernelSpec,
    h: f64,
    half_bandwidth: usize,
    options: AssemblyOptions,
) -> Result<Vec<f64>> {
    let rule = GaussLegendre::new(options.order);
    let check = options.check_order.map(GaussLegendre::new);
    let panel = panel_width(kernel);
    let gamma = |s: f64| Complex64::new(kernel.eval_rescaled(s), 0.0);
    let mut a = vec![0.0; half_bandwidth + 1];
    for j in 1..=half_bandwidth {
        let v = offset_integral(j, h, panel, &[], &rule, gamma).re;
        if let Some(check) = &check {
            let w = offset_integral(j, h, panel, &[], check, gamma).re;
            let discrepancy = (v - w).abs();
            if discrepancy > CHECK_TOLERANCE * v.abs().max(1.0) {
                return Err(Error::QuadratureFailure { offset: j, discrepancy });
            }
        }
        a[j] = v;
    }
    a[0] = -2.0 * a[1..].iter().sum::<f64>();
    Ok(a)
}

fn fill_diagonal_from_row_sums(matrix: &mut BandedComplexMatrix) {
    let b = matrix.half_bandwidth();
    let size = matrix.size();
    matrix.rows_mut().enumerate().for_each(|(i, row)| {
        let lo = i.saturating_sub(b);
        let hi = (i + b + 1).min(size);
        let mut sum = Complex64::new(0.0, 0.0);
        for j in lo..hi {
            if j != i {
                sum += row[j + b - i];
            }
        }
        row[b] = -sum;
    });
}

/// Plain nonlocal operator `a_{n,m}` on all `2N + 1` nodes.
pub fn assemble_nonlocal(kernel: &KernelSpec, grid: &Grid) -> Result<BandedComplexMatrix> {
    assemble_nonlocal_with(kernel, grid, AssemblyOptions::default())
}

pub fn assemble_nonlocal_with(
    kernel: &KernelSpec,
    grid: &Grid,
    options: AssemblyOptions,
) -> Result<BandedComplexMatrix> {
    let b = grid.buffer();
    let offsets = nonlocal_offsets(kernel, grid.h(), b, options)?;
    let size = grid.len();
    let mut matrix = BandedComplexMatrix::zeros(size, b);
    for (i, row) in matrix.rows_mut().enumerate() {
        for j in 1..=b {
            if i + j < size {
                row[b + j] = Complex64::new(offsets[j], 0.0);
            }
            if i >= j {
                row[b - j] = Complex64::new(offsets[j], 0.0);
            }
        }
    }
    fill_diagonal_from_row_sums(&mut matrix);
    Ok(matrix)
}

/// PML-modified operator `ã_{n,m}`.
pub fn assemble_pml(
    kernel: &KernelSpec,
    grid: &Grid,
    pml: &PmlProfile,
) -> Result<BandedComplexMatrix> {
    assemble_pml_with(kernel, grid, pml, KernelMode::Continued, AssemblyOptions::default())
}

/// Largest admissible modulus of the continued kernel relative to its peak.
pub const CONTINUED_GROWTH_LIMIT: f64 = 1e8;

/// `|γ₁^{gau}(z)| = peak·e^{(b² − s²)}` for `z = s + ib`, and inside a layer
/// `|b| ≤ σ_max |s|`, so the kernel grows once `σ_max > 1`.
fn check_continued_growth(kernel: &KernelSpec, grid: &Grid, pml: &PmlProfile) -> Result<()> {
    if kernel.family() != KernelFamily::Gaussian {
        return Ok(());
    }
    let sigma_max = pml.sigma(grid.hi());
    let r = kernel.effective_radius();
    let exponent = (sigma_max * sigma_max - 1.0) * r * r;
    if exponent > CONTINUED_GROWTH_LIMIT.ln() {
        return Err(Error::DivergentIntegral {
            reason: format!(
                "continued Gaussian kernel grows by up to e^{exponent:.1} where sigma reaches {sigma_max:.3}; \
                 keep sigma below about 1.2 by lowering sigma0 or thickening the layer"
            ),
        });
    }
    Ok(())
}

pub fn assemble_pml_with(
    kernel: &KernelSpec,
    grid: &Grid,
    pml: &PmlProfile,
    mode: KernelMode,
    options: AssemblyOptions,
) -> Result<BandedComplexMatrix> {
    if mode == KernelMode::Continued {
        check_continued_growth(kernel, grid, pml)?;
    }
    let b = grid.buffer();
    let h = grid.h();
    let offsets = nonlocal_offsets(kernel, h, b, options)?;
    let size = grid.len();
    let rule = GaussLegendre::new(options.order);
    let panel = panel_width(kernel);
    let l = pml.l();

    // upper triangle row by row; the operator is complex symmetric
    let upper: Vec<Vec<Complex64>> = (0..size)
        .into_par_iter()
        .map(|i| {
            let n = grid.node_index(i);
            let xn = grid.node(n);
            (1..=b)
                .filter(|&j| i + j < size)
                .map(|j| {
                    let m = n + j as i64;
                    let xm = grid.node(m);
                    if pml.is_identity_on(xn - 0.5 * h, xm + 0.5 * h) {
                        return Complex64::new(offsets[j], 0.0);
                    }
                    let c = 0.5 * (n + m) as f64 * h;
                    let breaks = [2.0 * (l - c), 2.0 * (c - l), 2.0 * (-l - c), 2.0 * (c + l)];
                    // the continued kernel oscillates at a rate ~σ/δ in the layer
                    let sigma_max = pml.sigma(xn.abs().max(xm.abs()) + 0.5 * h);
                    let panel = panel / sigma_max.max(1.0);
                    offset_integral(j, h, panel, &breaks, &rule, |s| {
                        let (left, right) = (c - 0.5 * s, c + 0.5 * s);
                        let stretch = pml.omega(left) * pml.omega(right);
                        let k = match mode {
                            KernelMode::Continued => kernel
                                .eval_rescaled_complex(pml.stretch_difference(left, right, s)),
                            KernelMode::Unmodified => {
                                Complex64::new(kernel.eval_rescaled(s), 0.0)
                            }
                        };
                        k * stretch
                    })
                })
                .collect()
        })
        .collect();

    let mut matrix = BandedComplexMatrix::zeros(size, b);
    for (i, row) in upper.iter().enumerate() {
        for (jm1, v) in row.iter().enumerate() {
            let j = jm1 + 1;
            matrix.set(i, i + j, *v);
            matrix.set(i + j, i, *v);
        }
    }
    fill_diagonal_from_row_sums(&mut matrix);
    Ok(matrix)
}

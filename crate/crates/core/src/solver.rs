//! Truncated discrete problems: the nonlocal PML system (Case 1), the
//! Dirichlet-truncated nonlocal system (Case 2), the unmodified-kernel
//! variant, and a second-order finite-difference solver for the local PML
//! problem.

use std::fmt;

use num_complex::Complex64;

use crate::banded::{BandedComplexMatrix, BandedLu};
use crate::dispersion::{solve_ktilde, Regime};
use crate::discretization::{
    assemble_nonlocal, assemble_pml, assemble_pml_with, AssemblyOptions, Grid, GridFunction,
    KernelMode,
};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::pml::PmlProfile;
use crate::source::SourceFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveCase {
    PmlCase1,
    DirichletCase2,
    LocalFd,
}

impl fmt::Display for SolveCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveCase::PmlCase1 => "case1",
            SolveCase::DirichletCase2 => "case2",
            SolveCase::LocalFd => "local-fd",
        })
    }
}

/// Normwise backward-error bound: `‖Au − f‖ ≤ tol·(‖A‖‖u‖ + ‖f‖)` in the
/// max norm.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub grid: Grid,
    /// One value per node `−N ≤ n ≤ N`; exactly zero for `|n| ≥ M`.
    pub values: Vec<Complex64>,
    pub case: SolveCase,
    /// `max |A u − f|` over the unknown rows.
    pub residual_norm: f64,
    /// Non-fatal diagnostics, e.g. a wavenumber in the other case's regime.
    pub warnings: Vec<String>,
}

impl SolveResult {
    pub fn solution(&self) -> GridFunction {
        GridFunction::new(self.grid, self.values.clone()).expect("values match the grid")
    }

    pub fn at(&self, n: i64) -> Complex64 {
        self.values[self.grid.storage_index(n)]
    }
}

/// Solves `(A + diag(shift)) u = f` on the unknowns `−M < n < M` with zero
/// Dirichlet layers, where `A` is an assembled operator on the whole grid.
pub fn solve_with_operator<S>(
    operator: &BandedComplexMatrix,
    grid: &Grid,
    shift: S,
    source: &SourceFunction,
    case: SolveCase,
) -> Result<SolveResult>
where
    S: Fn(f64) -> Complex64,
{
    if operator.size() != grid.len() {
        return Err(Error::IncompatibleGrids(format!(
            "operator of size {} on a grid of {} nodes",
            operator.size(),
            grid.len()
        )));
    }
    let interior = grid.interior();
    let offset = interior.start;
    let count = interior.len();
    let shifts: Vec<Complex64> = interior.clone().map(|i| shift(grid.x(i))).collect();
    let rhs: Vec<Complex64> = interior
        .clone()
        .map(|i| Complex64::new(source.eval(grid.x(i)), 0.0))
        .collect();

    let lu = BandedLu::factor_submatrix(operator, offset, count, &shifts)?;
    let u = lu.solve(&rhs);

    let b = operator.half_bandwidth();
    let mut residual: f64 = 0.0;
    let mut op_norm: f64 = 0.0;
    for r in 0..count {
        let lo = r.saturating_sub(b);
        let hi = (r + b + 1).min(count);
        let mut acc = shifts[r] * u[r] - rhs[r];
        let mut row = shifts[r].norm();
        for c in lo..hi {
            let a = operator.get(offset + r, offset + c);
            acc += a * u[c];
            row += a.norm();
        }
        residual = residual.max(acc.norm());
        op_norm = op_norm.max(row);
    }
    let bound = backward_error_bound(op_norm, &u, &rhs);
    if residual > bound {
        return Err(Error::ResidualTooLarge { residual, bound });
    }

    let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
    values[interior].copy_from_slice(&u);
    Ok(SolveResult {
        grid: *grid,
        values,
        case,
        residual_norm: residual,
        warnings: Vec::new(),
    })
}

fn backward_error_bound(op_norm: f64, u: &[Complex64], rhs: &[Complex64]) -> f64 {
    let max = |v: &[Complex64]| v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    RESIDUAL_TOLERANCE * (op_norm * max(u) + max(rhs))
}

fn check_wavenumber(k: f64) -> Result<()> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::invalid("k", format!("must be positive, got {k}")));
    }
    Ok(())
}

fn check_extent(grid: &Grid, pml: &PmlProfile) -> Result<()> {
    let span = pml.l() + pml.d();
    if (grid.half_length() - span).abs() > 1e-9 * span {
        return Err(Error::invalid(
            "grid",
            format!(
                "grid covers [−{}, {}] but l + d = {span}",
                grid.half_length(),
                grid.half_length()
            ),
        ));
    }
    Ok(())
}

fn regime_warning(kernel: &KernelSpec, k: f64, expected: Regime) -> Option<String> {
    match solve_ktilde(kernel, k) {
        Ok(r) if r.regime != expected => Some(format!(
            "k = {k} is in the {} regime (k0 = {}); this case assumes {expected}",
            r.regime, r.k0
        )),
        Ok(_) => None,
        Err(e) => Some(format!("dispersion check failed: {e}")),
    }
}

/// Case 1: `L̃_δ^h u − k² ω u = f` with the continued PML kernel.
pub fn solve_case1(
    kernel: &KernelSpec,
    grid: &Grid,
    pml: &PmlProfile,
    k: f64,
    f: &SourceFunction,
) -> Result<SolveResult> {
    check_wavenumber(k)?;
    check_extent(grid, pml)?;
    let warning = regime_warning(kernel, k, Regime::Propagating);
    let a = assemble_pml(kernel, grid, pml)?;
    let mut result = solve_with_operator(&a, grid, |x| -k * k * pml.omega(x), f, SolveCase::PmlCase1)?;
    result.warnings.extend(warning);
    Ok(result)
}

/// Case 1 system built with the real kernel `γ_δ(x − y)` and the stretching
/// factors `ω(x)ω(y)` only.
pub fn solve_case1_unmodified_kernel(
    kernel: &KernelSpec,
    grid: &Grid,
    pml: &PmlProfile,
    k: f64,
    f: &SourceFunction,
) -> Result<SolveResult> {
    check_wavenumber(k)?;
    check_extent(grid, pml)?;
    let a = assemble_pml_with(kernel, grid, pml, KernelMode::Unmodified, AssemblyOptions::default())?;
    solve_with_operator(&a, grid, |x| -k * k * pml.omega(x), f, SolveCase::PmlCase1)
}

/// Case 2: `L_δ^h u − k² u = f`, truncated by Dirichlet layers after a decay
/// buffer of width `d`.
pub fn solve_case2(
    kernel: &KernelSpec,
    grid: &Grid,
    k: f64,
    f: &SourceFunction,
    d: f64,
) -> Result<SolveResult> {
    check_wavenumber(k)?;
    let layout = PmlProfile::inactive(f.support(), d)?;
    check_extent(grid, &layout)?;
    let warning = regime_warning(kernel, k, Regime::Evanescent);
    let a = assemble_nonlocal(kernel, grid)?;
    let shift = Complex64::new(-k * k, 0.0);
    let mut result = solve_with_operator(&a, grid, |_| shift, f, SolveCase::DirichletCase2)?;
    result.warnings.extend(warning);
    Ok(result)
}

/// Conservative second-order differences for `−∂ₓ((1/ω)∂ₓu) − k̃²ωu = f`
/// with `u = 0` at `±(l + d)`.
pub fn solve_local_pml_fd(
    grid: &Grid,
    pml: &PmlProfile,
    ktilde: f64,
    f: &SourceFunction,
) -> Result<SolveResult> {
    check_wavenumber(ktilde)?;
    check_extent(grid, pml)?;
    let h = grid.h();
    let m = grid.m() as i64;
    let unknowns: Vec<i64> = (-m + 1..m).collect();
    let inv_h2 = 1.0 / (h * h);
    let half = |n: i64| pml.omega((n as f64 + 0.5) * h).inv() * inv_h2;
    let count = unknowns.len();
    let mut lower = Vec::with_capacity(count.saturating_sub(1));
    let mut upper = Vec::with_capacity(count.saturating_sub(1));
    let mut diag = Vec::with_capacity(count);
    for (r, &n) in unknowns.iter().enumerate() {
        let (wm, wp) = (half(n - 1), half(n));
        diag.push(wm + wp - ktilde * ktilde * pml.omega(grid.node(n)));
        if r + 1 < count {
            upper.push(-wp);
            lower.push(-wp);
        }
    }
    let rhs: Vec<Complex64> = unknowns
        .iter()
        .map(|&n| Complex64::new(f.eval(grid.node(n)), 0.0))
        .collect();
    let lu = BandedLu::factor_tridiagonal(&lower, &diag, &upper)?;
    let u = lu.solve(&rhs);

    let mut residual: f64 = 0.0;
    let mut op_norm: f64 = 0.0;
    for r in 0..count {
        let mut acc = diag[r] * u[r] - rhs[r];
        let mut row = diag[r].norm();
        if r > 0 {
            acc += lower[r - 1] * u[r - 1];
            row += lower[r - 1].norm();
        }
        if r + 1 < count {
            acc += upper[r] * u[r + 1];
            row += upper[r].norm();
        }
        residual = residual.max(acc.norm());
        op_norm = op_norm.max(row);
    }
    let bound = backward_error_bound(op_norm, &u, &rhs);
    if residual > bound {
        return Err(Error::ResidualTooLarge { residual, bound });
    }
    let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (&n, v) in unknowns.iter().zip(u) {
        values[grid.storage_index(n)] = v;
    }
    Ok(SolveResult {
        grid: *grid,
        values,
        case: SolveCase::LocalFd,
        residual_norm: residual,
        warnings: Vec::new(),
    })
}

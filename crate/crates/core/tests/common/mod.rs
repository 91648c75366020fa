//! Independent oracles shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use nlhelm_core::greens::{ExactSolutionExp, GreenFree};
use nlhelm_core::kernels::KernelSpec;
use nlhelm_core::quadrature::{integrate_adaptive, Tolerance};
use nlhelm_core::{Complex64, Result, SourceFunction};

/// `L_δ u(x) − k² u(x) − f(x)` for the exact solution, with `L_δ` applied by
/// adaptive quadrature over the kernel's truncated support.
pub fn nonlocal_residual(exact: &ExactSolutionExp, kernel: &KernelSpec, k: f64, x: f64) -> Result<Complex64> {
    let reach = kernel.horizon();
    let l = exact.source().support();
    let ux = exact.value(x)?;
    let mut breaks = vec![x];
    breaks.extend([-l, l].into_iter().filter(|b| (b - x).abs() < reach));
    let mut failure = None;
    let integrand = |y: f64| match exact.value(y) {
        Ok(uy) => (ux - uy) * kernel.eval_rescaled(x - y),
        Err(e) => {
            failure.get_or_insert(e);
            Complex64::new(0.0, 0.0)
        }
    };
    let lu = integrate_adaptive(integrand, x - reach, x + reach, &breaks, Tolerance::new(1e-11, 1e-12))?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(lu.value - k * k * ux - exact.source().eval(x))
}

/// `∫ G_x(y) f(y) dy` with the free-space Green's function at `k̃`.
pub fn free_green_convolution(ktilde: Complex64, f: &SourceFunction, x: f64) -> Result<Complex64> {
    let l = f.support();
    let g = GreenFree::new(ktilde, x)?;
    let breaks: Vec<f64> = [x].into_iter().filter(|b| b.abs() < l).collect();
    let v = integrate_adaptive(|y| g.eval(y) * f.eval(y), -l, l, &breaks, Tolerance::new(1e-14, 1e-13))?;
    Ok(v.value)
}

/// `n` evenly spaced points in `[a, b]`.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// `n` points spread over `[a, b]` by the golden-ratio sequence.
pub fn scattered(a: f64, b: f64, n: usize, seed: f64) -> Vec<f64> {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    (0..n).map(|i| a + (b - a) * ((seed + i as f64 * phi).fract())).collect()
}

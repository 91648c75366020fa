//! Python bindings: `import nlhelm`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use nlhelm_core::analysis::{
    convergence_study, delta_convergence_study, truncation_sweep, ErrorReport, RateFit, SweepVariable,
};
use nlhelm_core::greens::ExactSolutionExp;
use nlhelm_core::{
    dispersion, CaseSelection, Complex64, Error, ExperimentConfig, KernelFamily, KernelSpec, PmlProfile,
    Sigma0Setting, SourceFunction,
};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter { .. }
        | Error::DegenerateK { .. }
        | Error::EmptyFit { .. }
        | Error::IncompatibleGrids(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn family(name: &str) -> PyResult<KernelFamily> {
    name.parse().map_err(to_py)
}

#[pyclass(name = "Kernel", frozen)]
struct PyKernel {
    inner: KernelSpec,
}

#[pymethods]
impl PyKernel {
    #[new]
    fn new(family_name: &str, delta: f64) -> PyResult<Self> {
        Ok(Self { inner: KernelSpec::new(family(family_name)?, delta).map_err(to_py)? })
    }

    #[getter]
    fn family(&self) -> String {
        self.inner.family().to_string()
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta()
    }

    /// `γ_δ(s)`.
    fn __call__(&self, s: f64) -> f64 {
        self.inner.eval_rescaled(s)
    }

    /// Interaction reach `δ·l̂`.
    fn horizon(&self) -> f64 {
        self.inner.horizon()
    }

    fn effective_radius(&self) -> f64 {
        self.inner.effective_radius()
    }

    fn cutoff(&self) -> f64 {
        dispersion::cutoff_k0(&self.inner)
    }

    /// Quadrature `μ(k̃)`.
    fn mu(&self, ktilde: Complex64) -> PyResult<Complex64> {
        dispersion::mu(&self.inner, ktilde).map_err(to_py)
    }

    fn mu_closed_form(&self, ktilde: Complex64) -> Complex64 {
        dispersion::mu_closed_form(&self.inner, ktilde)
    }

    fn __repr__(&self) -> String {
        format!("Kernel('{}', {})", self.inner.family(), self.inner.delta())
    }
}

#[pyclass(name = "Dispersion", frozen, get_all)]
struct PyDispersion {
    k: f64,
    ktilde: Complex64,
    k0: f64,
    regime: String,
    residual: f64,
}

#[pymethods]
impl PyDispersion {
    fn __repr__(&self) -> String {
        format!("Dispersion(k={}, ktilde={}, k0={}, regime='{}')", self.k, self.ktilde, self.k0, self.regime)
    }
}

/// Modified wavenumber for `kernel` ("exp" or "gauss") at horizon `delta`.
#[pyfunction]
fn solve_ktilde(kernel: &str, delta: f64, k: f64) -> PyResult<PyDispersion> {
    let spec = KernelSpec::new(family(kernel)?, delta).map_err(to_py)?;
    let r = dispersion::solve_ktilde(&spec, k).map_err(to_py)?;
    Ok(PyDispersion {
        k: r.k,
        ktilde: r.ktilde,
        k0: r.k0,
        regime: r.regime.to_string(),
        residual: r.residual,
    })
}

/// Smallest `σ₀` with `amplitude·e^{−decay·σ₀·d/2} ≤ target`.
#[pyfunction]
#[pyo3(signature = (decay, d, target = 1e-10, amplitude = 1.0))]
fn choose_sigma0(decay: f64, d: f64, target: f64, amplitude: f64) -> PyResult<f64> {
    nlhelm_core::choose_sigma0(decay, d, target, amplitude).map_err(to_py)
}

#[pyclass(name = "Pml", frozen)]
struct PyPml {
    inner: PmlProfile,
}

#[pymethods]
impl PyPml {
    #[new]
    fn new(l: f64, d: f64, sigma0: f64) -> PyResult<Self> {
        Ok(Self { inner: PmlProfile::new(l, d, sigma0).map_err(to_py)? })
    }

    fn sigma(&self, x: f64) -> f64 {
        self.inner.sigma(x)
    }

    /// `1 + iσ(x)`.
    fn omega(&self, x: f64) -> Complex64 {
        self.inner.omega(x)
    }

    /// Stretched coordinate `x̃`.
    fn stretch(&self, x: f64) -> Complex64 {
        self.inner.stretch(x)
    }

    fn sigma_integral(&self, x: f64) -> f64 {
        self.inner.sigma_integral(x)
    }
}

/// Closed-form solution for the exponential kernel and the narrow Gaussian source on `[−l, l]`.
#[pyclass(name = "ExactSolution", frozen)]
struct PyExactSolution {
    inner: ExactSolutionExp,
}

#[pymethods]
impl PyExactSolution {
    #[new]
    #[pyo3(signature = (k, delta, l = 10.0))]
    fn new(k: f64, delta: f64, l: f64) -> PyResult<Self> {
        let source = SourceFunction::gaussian_narrow(k, l).map_err(to_py)?;
        Ok(Self { inner: ExactSolutionExp::new(k, delta, source).map_err(to_py)? })
    }

    fn __call__(&self, x: f64) -> PyResult<Complex64> {
        self.inner.value(x).map_err(to_py)
    }

    fn derivative(&self, x: f64) -> PyResult<Complex64> {
        self.inner.derivative(x).map_err(to_py)
    }

    fn sample(&self, xs: Vec<f64>) -> PyResult<Vec<Complex64>> {
        xs.into_iter().map(|x| self.inner.value(x).map_err(to_py)).collect()
    }
}

#[pyclass(name = "Solution", frozen, get_all)]
struct PySolution {
    x: Vec<f64>,
    u: Vec<Complex64>,
    case: String,
    residual: f64,
    warnings: Vec<String>,
}

#[pyclass(name = "Study", frozen, get_all)]
struct PyStudy {
    /// `(h or δ or swept value, e_l2, e_h1)`.
    rows: Vec<(f64, f64, f64)>,
    rate_l2: Option<f64>,
    rate_h1: Option<f64>,
    /// Exponential rate `c₂` for truncation sweeps.
    decay_l2: Option<f64>,
    decay_h1: Option<f64>,
    floor: Option<(f64, f64)>,
}

fn rows(params: &[f64], reports: &[ErrorReport]) -> Vec<(f64, f64, f64)> {
    params.iter().zip(reports).map(|(&p, r)| (p, r.e_l2, r.e_h1)).collect()
}

fn rate_study(reports: &[ErrorReport], l2: &RateFit, h1: &RateFit) -> PyStudy {
    let hs: Vec<f64> = reports.iter().map(|r| r.h).collect();
    PyStudy {
        rows: rows(&hs, reports),
        rate_l2: Some(l2.slope),
        rate_h1: Some(h1.slope),
        decay_l2: None,
        decay_h1: None,
        floor: None,
    }
}

/// One experiment: kernel, horizon, wavenumber, layer and mesh.
#[pyclass(name = "Experiment")]
struct PyExperiment {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyExperiment {
    #[new]
    #[pyo3(signature = (kernel, delta, k, h, l = 10.0, d = 10.0, sigma0 = "auto", case = "auto", unmodified_kernel = false))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        kernel: &str,
        delta: f64,
        k: f64,
        h: f64,
        l: f64,
        d: f64,
        sigma0: &str,
        case: &str,
        unmodified_kernel: bool,
    ) -> PyResult<Self> {
        let mut inner = ExperimentConfig::new(family(kernel)?, delta, k, h);
        inner.l = l;
        inner.d = d;
        inner.sigma0 = sigma0.parse::<Sigma0Setting>().map_err(to_py)?;
        inner.case = case.parse::<CaseSelection>().map_err(to_py)?;
        inner.unmodified_kernel = unmodified_kernel;
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Solver case that `solve` will use: "case1" or "case2".
    fn case(&self) -> PyResult<String> {
        Ok(self.inner.resolved_case().map_err(to_py)?.to_string())
    }

    /// Layer strength after resolving `auto`.
    fn sigma0(&self) -> PyResult<f64> {
        self.inner.resolved_sigma0().map_err(to_py)
    }

    fn solve(&self, py: Python<'_>) -> PyResult<PySolution> {
        let cfg = self.inner.clone();
        let r = py.detach(move || cfg.solve()).map_err(to_py)?;
        Ok(PySolution {
            x: r.grid.nodes(),
            u: r.values,
            case: r.case.to_string(),
            residual: r.residual_norm,
            warnings: r.warnings,
        })
    }

    /// Errors and fitted rates over a list of mesh sizes.
    fn convergence(&self, py: Python<'_>, hs: Vec<f64>) -> PyResult<PyStudy> {
        let cfg = self.inner.clone();
        let s = py.detach(move || convergence_study(&cfg, &hs)).map_err(to_py)?;
        Ok(rate_study(&s.rows, &s.l2, &s.h1))
    }

    /// Errors against the local limit along `h = δ`.
    fn delta_convergence(&self, py: Python<'_>, deltas: Vec<f64>) -> PyResult<PyStudy> {
        let cfg = self.inner.clone();
        let s = py.detach(move || delta_convergence_study(&cfg, &deltas)).map_err(to_py)?;
        Ok(rate_study(&s.rows, &s.l2, &s.h1))
    }

    /// Truncation errors while varying "sigma0" or "d".
    fn sweep(&self, py: Python<'_>, variable: &str, values: Vec<f64>) -> PyResult<PyStudy> {
        let variable: SweepVariable = variable.parse().map_err(to_py)?;
        let cfg = self.inner.clone();
        let s = py.detach(move || truncation_sweep(&cfg, variable, &values)).map_err(to_py)?;
        Ok(PyStudy {
            rows: rows(&s.values, &s.rows),
            rate_l2: None,
            rate_h1: None,
            decay_l2: s.fit_l2.map(|f| f.c2),
            decay_h1: s.fit_h1.map(|f| f.c2),
            floor: Some((s.floor.e_l2, s.floor.e_h1)),
        })
    }

    fn __repr__(&self) -> String {
        let fields: Vec<String> = self.inner.describe().into_iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("Experiment({})", fields.join(", "))
    }
}

#[pymodule]
fn nlhelm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyKernel>()?;
    m.add_class::<PyDispersion>()?;
    m.add_class::<PyPml>()?;
    m.add_class::<PyExactSolution>()?;
    m.add_class::<PySolution>()?;
    m.add_class::<PyStudy>()?;
    m.add_class::<PyExperiment>()?;
    m.add_function(wrap_pyfunction!(solve_ktilde, m)?)?;
    m.add_function(wrap_pyfunction!(choose_sigma0, m)?)?;
    Ok(())
}

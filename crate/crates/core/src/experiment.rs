//! Experiment-level parameter bundle shared by the drivers and the CLI.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::analysis::{relative_errors_exact, relative_errors_fine, ErrorParams, ErrorReport, Region};
use crate::banded::BandedComplexMatrix;
use crate::discretization::{
    assemble_nonlocal, assemble_pml, assemble_pml_with, AssemblyOptions, Grid, GridFunction, KernelMode,
};
use crate::dispersion::{cutoff_k0, solve_ktilde, DispersionResult};
use crate::error::{Error, Result};
use crate::greens::ExactSolutionExp;
use crate::kernels::{KernelFamily, KernelSpec, DEFAULT_SUPPORT_TOLERANCE};
use crate::pml::{choose_sigma0, PmlProfile};
use crate::solver::{
    solve_case1, solve_case1_unmodified_kernel, solve_case2, solve_with_operator, SolveCase,
    SolveResult,
};
use crate::source::SourceFunction;

/// Default decay target for automatic `σ₀`.
pub const DEFAULT_SIGMA0_TARGET: f64 = 1e-10;

/// Relative half-width of the band around `k₀` where automatic case
/// selection refuses to choose.
pub const CASE_GUARD_BAND: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sigma0Setting {
    Fixed(f64),
    /// Smallest `σ₀` bringing `exp(−k̃·∫σ)` at `l + d` below `target`.
    Auto { target: f64 },
}

impl Default for Sigma0Setting {
    fn default() -> Self {
        Sigma0Setting::Auto {
            target: DEFAULT_SIGMA0_TARGET,
        }
    }
}

impl FromStr for Sigma0Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = |reason: String| Error::invalid("sigma0", reason);
        if s == "auto" {
            return Ok(Sigma0Setting::default());
        }
        if let Some(rest) = s.strip_prefix("auto:") {
            let target: f64 = rest
                .parse()
                .map_err(|_| bad(format!("cannot read target `{rest}`")))?;
            if !(target > 0.0 && target < 1.0) {
                return Err(bad(format!("target must lie in (0, 1), got {target}")));
            }
            return Ok(Sigma0Setting::Auto { target });
        }
        let v: f64 = s
            .parse()
            .map_err(|_| bad(format!("expected a number, `auto` or `auto:<target>`, got `{s}`")))?;
        if !(v.is_finite() && v >= 0.0) {
            return Err(bad(format!("must be nonnegative, got {v}")));
        }
        Ok(Sigma0Setting::Fixed(v))
    }
}

impl fmt::Display for Sigma0Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sigma0Setting::Fixed(v) => write!(f, "{v}"),
            Sigma0Setting::Auto { target } => write!(f, "auto:{target}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CaseSelection {
    /// Case 1 when `k < k₀`, Case 2 when `k > k₀`.
    #[default]
    Auto,
    Case1,
    Case2,
}

impl FromStr for CaseSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "auto" => Ok(CaseSelection::Auto),
            "1" | "case1" | "pml" => Ok(CaseSelection::Case1),
            "2" | "case2" | "dirichlet" => Ok(CaseSelection::Case2),
            other => Err(Error::invalid(
                "case",
                format!("expected auto, 1 or 2, got `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kernel: KernelFamily,
    pub delta: f64,
    pub k: f64,
    pub l: f64,
    pub d: f64,
    pub sigma0: Sigma0Setting,
    pub h: f64,
    pub case: CaseSelection,
    pub unmodified_kernel: bool,
    pub support_tolerance: f64,
    /// Replaces the default narrow Gaussian source.
    pub source: Option<SourceFunction>,
}

impl ExperimentConfig {
    pub fn new(kernel: KernelFamily, delta: f64, k: f64, h: f64) -> Self {
        Self {
            kernel,
            delta,
            k,
            l: 10.0,
            d: 10.0,
            sigma0: Sigma0Setting::default(),
            h,
            case: CaseSelection::Auto,
            unmodified_kernel: false,
            support_tolerance: DEFAULT_SUPPORT_TOLERANCE,
            source: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("delta", self.delta), ("k", self.k), ("l", self.l), ("d", self.d), ("h", self.h)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        self.kernel_spec()?;
        Grid::new(self.h, self.l + self.d, 0.0)?;
        if let Sigma0Setting::Fixed(v) = self.sigma0 {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid("sigma0", format!("must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec> {
        KernelSpec::with_support_tolerance(self.kernel, self.delta, self.support_tolerance)
    }

    pub fn dispersion(&self) -> Result<DispersionResult> {
        solve_ktilde(&self.kernel_spec()?, self.k)
    }

    pub fn resolved_case(&self) -> Result<SolveCase> {
        match self.case {
            CaseSelection::Case1 => Ok(SolveCase::PmlCase1),
            CaseSelection::Case2 => Ok(SolveCase::DirichletCase2),
            CaseSelection::Auto => {
                let k0 = cutoff_k0(&self.kernel_spec()?);
                if (self.k - k0).abs() <= CASE_GUARD_BAND * k0 {
                    return Err(Error::invalid(
                        "case",
                        format!("k = {} is too close to k0 = {k0} to choose; pass an explicit case", self.k),
                    ));
                }
                Ok(if self.k < k0 {
                    SolveCase::PmlCase1
                } else {
                    SolveCase::DirichletCase2
                })
            }
        }
    }

    /// `σ₀` actually used. Case 2 runs without absorption unless a fixed
    /// value is given.
    pub fn resolved_sigma0(&self) -> Result<f64> {
        match (self.sigma0, self.resolved_case()?) {
            (Sigma0Setting::Fixed(v), _) => Ok(v),
            (Sigma0Setting::Auto { .. }, SolveCase::DirichletCase2) => Ok(0.0),
            (Sigma0Setting::Auto { target }, _) => {
                let kt = self.dispersion()?.ktilde;
                if kt.re <= 0.0 {
                    return Err(Error::invalid(
                        "sigma0",
                        "automatic sigma0 needs a propagating wavenumber; give a value",
                    ));
                }
                choose_sigma0(kt.re, self.d, target, 1.0)
            }
        }
    }

    pub fn pml(&self) -> Result<PmlProfile> {
        PmlProfile::new(self.l, self.d, self.resolved_sigma0()?)
    }

    pub fn source(&self) -> Result<SourceFunction> {
        match &self.source {
            Some(s) => Ok(s.clone()),
            None => SourceFunction::gaussian_narrow(self.k, self.l),
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::for_kernel(&self.kernel_spec()?, self.h, self.l, self.d)
    }

    pub fn region(&self) -> Region {
        Region {
            lo: -self.l,
            hi: self.l,
        }
    }

    pub fn with_h(&self, h: f64) -> Self {
        Self { h, ..self.clone() }
    }

    pub fn error_params(&self) -> ErrorParams {
        let case = self.resolved_case().map(|c| c.to_string()).unwrap_or_default();
        ErrorParams {
            k: self.k,
            delta: self.delta,
            sigma0: self.resolved_sigma0().unwrap_or(f64::NAN),
            d: self.d,
            kernel: self.kernel.to_string(),
            case,
        }
    }

    /// Runs the configured solve at the configured `h`.
    pub fn solve(&self) -> Result<SolveResult> {
        self.validate()?;
        let kernel = self.kernel_spec()?;
        let grid = self.grid()?;
        let source = self.source()?;
        let pml = self.pml()?;
        match self.resolved_case()? {
            SolveCase::PmlCase1 | SolveCase::LocalFd => {
                if self.unmodified_kernel {
                    solve_case1_unmodified_kernel(&kernel, &grid, &pml, self.k, &source)
                } else {
                    solve_case1(&kernel, &grid, &pml, self.k, &source)
                }
            }
            SolveCase::DirichletCase2 => {
                if pml.sigma0() > 0.0 {
                    let a = assemble_pml(&kernel, &grid, &pml)?;
                    let k2 = self.k * self.k;
                    solve_with_operator(&a, &grid, |x| -k2 * pml.omega(x), &source, SolveCase::DirichletCase2)
                } else {
                    solve_case2(&kernel, &grid, self.k, &source, self.d)
                }
            }
        }
    }

    /// Assembled operator of the configured solve, without the `−k²ω` shift.
    pub fn operator(&self) -> Result<BandedComplexMatrix> {
        self.validate()?;
        let kernel = self.kernel_spec()?;
        let grid = self.grid()?;
        let pml = self.pml()?;
        if pml.sigma0() == 0.0 {
            return assemble_nonlocal(&kernel, &grid);
        }
        let mode = if self.unmodified_kernel {
            KernelMode::Unmodified
        } else {
            KernelMode::Continued
        };
        assemble_pml_with(&kernel, &grid, &pml, mode, AssemblyOptions::default())
    }

    /// Reference solution on `Ω`: exact for the exponential kernel, a fine
    /// discrete solve otherwise.
    pub fn reference(&self, h_min: f64) -> Result<Reference> {
        match self.kernel {
            KernelFamily::Exponential => Ok(Reference::Exact(Box::new(ExactSolutionExp::new(
                self.k,
                self.delta,
                self.source()?,
            )?))),
            KernelFamily::Gaussian => fine_reference(self, h_min / REFERENCE_REFINEMENT),
        }
    }

    /// Key–value listing of the resolved configuration.
    pub fn describe(&self) -> Vec<(&'static str, String)> {
        vec![
            ("kernel", self.kernel.to_string()),
            ("delta", format!("{}", self.delta)),
            ("k", format!("{}", self.k)),
            ("l", format!("{}", self.l)),
            ("d", format!("{}", self.d)),
            ("h", format!("{}", self.h)),
            ("sigma0", format!("{}", self.sigma0)),
        ]
    }
}

/// Coarsest-to-reference spacing ratio for discrete references.
pub const REFERENCE_REFINEMENT: f64 = 4.0;
/// Relative change on `Ω` below which enlarging the layers stops.
pub const REFERENCE_DOMAIN_TOLERANCE: f64 = 1e-8;
const REFERENCE_MAX_DOUBLINGS: usize = 4;

fn fine_reference(config: &ExperimentConfig, h_ref: f64) -> Result<Reference> {
    let mut cfg = config.with_h(h_ref);
    cfg.unmodified_kernel = false;
    let region = config.region();
    let mut current = cfg.solve()?.solution();
    for _ in 0..REFERENCE_MAX_DOUBLINGS {
        cfg.d *= 2.0;
        let next = cfg.solve()?.solution();
        let change = max_relative_change(&current, &next, region)?;
        current = next;
        if change < REFERENCE_DOMAIN_TOLERANCE {
            break;
        }
    }
    Ok(Reference::Discrete(current))
}

fn max_relative_change(a: &GridFunction, b: &GridFunction, region: Region) -> Result<f64> {
    let (ga, gb) = (a.grid(), b.grid());
    let n = (region.hi / ga.h()).floor() as i64;
    let mut diff: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in -n..=n {
        let (x, y) = (a.at(i), b.at(i));
        debug_assert_eq!(ga.node(i), gb.node(i));
        diff = diff.max((x - y).norm());
        scale = scale.max(y.norm());
    }
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok(diff / scale)
}

/// A solution to measure errors against.
#[derive(Debug, Clone)]
pub enum Reference {
    Exact(Box<ExactSolutionExp>),
    Discrete(GridFunction),
}

impl Reference {
    /// Errors of the interpolant of `u` on the cells strictly inside `region`.
    pub fn errors(&self, u: &GridFunction, region: Region) -> Result<ErrorReport> {
        match self {
            Reference::Exact(e) => relative_errors_exact(u, |x| Ok((e.value(x)?, e.derivative(x)?)), region),
            Reference::Discrete(r) => relative_errors_fine(u, r, region),
        }
    }

    /// Accuracy below which measured errors say nothing about `u`.
    pub fn floor(&self) -> f64 {
        match self {
            Reference::Exact(_) => 1e-10,
            Reference::Discrete(_) => 0.0,
        }
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::invalid("config", format!("line {}: expected `key = value`", no + 1))
        })?;
        let key = key.trim().to_ascii_lowercase().replace('_', "-");
        if key.is_empty() {
            return Err(Error::invalid("config", format!("line {}: empty key", no + 1)));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

//! Error norms, rate fits and the experiment drivers built on them.

use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::discretization::{Grid, GridFunction};
use crate::error::{Error, Result};
use crate::experiment::{ExperimentConfig, Sigma0Setting};
use crate::pml::{choose_sigma0, PmlProfile};
use crate::quadrature::GaussLegendre;
use crate::solver::solve_local_pml_fd;

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub lo: f64,
    pub hi: f64,
}

impl Region {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid("region", format!("[{lo}, {hi}] is not an interval")));
        }
        Ok(Self { lo, hi })
    }

    /// `(−l, l)`.
    pub fn symmetric(l: f64) -> Result<Self> {
        Self::new(-l, l)
    }
}

/// Storage slots of the nodes lying in `region`.
fn nodes_in(u: &GridFunction, region: Region) -> Result<std::ops::Range<usize>> {
    let g = u.grid();
    let h = g.h();
    let slack = 1e-9 * h;
    let first = ((region.lo - g.lo() - slack) / h).ceil().max(0.0) as usize;
    let last = ((region.hi - g.lo() + slack) / h).floor();
    if last < 0.0 {
        return Err(Error::EmptyRegion { lo: region.lo, hi: region.hi });
    }
    let last = (last as usize).min(g.len() - 1);
    if first >= last {
        return Err(Error::EmptyRegion { lo: region.lo, hi: region.hi });
    }
    Ok(first..last + 1)
}

/// Storage slots of the nodes strictly inside `region`.
fn nodes_inside(u: &GridFunction, region: Region) -> Result<std::ops::Range<usize>> {
    let slack = 1e-9 * u.grid().h();
    nodes_in(u, Region { lo: region.lo + slack, hi: region.hi - slack }).and_then(|r| {
        let g = u.grid();
        let start = if g.x(r.start) <= region.lo + slack { r.start + 1 } else { r.start };
        let end = if g.x(r.end - 1) >= region.hi - slack { r.end - 1 } else { r.end };
        if end < start + 2 {
            Err(Error::EmptyRegion { lo: region.lo, hi: region.hi })
        } else {
            Ok(start..end)
        }
    })
}

/// Trapezoidal `(∫ |v|²)^{1/2}` over the nodes in `region`.
pub fn discrete_l2(u: &GridFunction, region: Region) -> Result<f64> {
    let nodes = nodes_in(u, region)?;
    let h = u.grid().h();
    let v = u.values();
    let (a, b) = (nodes.start, nodes.end - 1);
    let mut sum = 0.5 * (v[a].norm_sqr() + v[b].norm_sqr());
    sum += v[a + 1..b].iter().map(|z| z.norm_sqr()).sum::<f64>();
    Ok((h * sum).sqrt())
}

/// Forward-difference `(∫ |v'|²)^{1/2}` over the cells in `region`.
pub fn discrete_h1_semi(u: &GridFunction, region: Region) -> Result<f64> {
    let nodes = nodes_in(u, region)?;
    let h = u.grid().h();
    let v = u.values();
    let sum: f64 = v[nodes].windows(2).map(|w| (w[1] - w[0]).norm_sqr()).sum();
    Ok((sum / h).sqrt())
}

/// Parameters recorded alongside an error measurement.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorParams {
    pub k: f64,
    pub delta: f64,
    pub sigma0: f64,
    pub d: f64,
    pub kernel: String,
    pub case: String,
}

/// `e_{L²} = ‖v₁ − v₂‖_{L²}/‖v₂‖_{H¹}` and `e_{H¹} = |v₁ − v₂|_{H¹}/‖v₂‖_{H¹}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub e_l2: f64,
    pub e_h1: f64,
    pub h: f64,
    pub params: ErrorParams,
}

fn report(diff_l2: f64, diff_h1: f64, ref_l2: f64, ref_h1: f64, h: f64) -> Result<ErrorReport> {
    let norm = (ref_l2 * ref_l2 + ref_h1 * ref_h1).sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok(ErrorReport {
        e_l2: diff_l2 / norm,
        e_h1: diff_h1 / norm,
        h,
        params: ErrorParams::default(),
    })
}

/// Relative errors of `v1` against `v2` on the same grid, both measured with
/// the nodal rules above.
pub fn relative_errors(v1: &GridFunction, v2: &GridFunction, region: Region) -> Result<ErrorReport> {
    let diff = v1.zip_with(v2, |a, b| a - b)?;
    report(
        discrete_l2(&diff, region)?,
        discrete_h1_semi(&diff, region)?,
        discrete_l2(v2, region)?,
        discrete_h1_semi(v2, region)?,
        v1.grid().h(),
    )
}

const CELL_POINTS: usize = 4;

/// Relative errors of the piecewise-linear interpolant of `v1` against a
/// function known with its derivative, integrated with Gauss points over the
/// cells strictly inside `region`. `exact` returns `(u(x), u'(x))`.
///
/// Only interior cells are used because the exact solution may jump where
/// the source is cut off, at the region's ends.
pub fn relative_errors_exact<F>(v1: &GridFunction, exact: F, region: Region) -> Result<ErrorReport>
where
    F: Fn(f64) -> Result<(Complex64, Complex64)>,
{
    let nodes = nodes_inside(v1, region)?;
    let g = v1.grid();
    let h = g.h();
    let rule = GaussLegendre::new(CELL_POINTS);
    let v = v1.values();
    let (mut e0, mut e1, mut r0, mut r1) = (0.0, 0.0, 0.0, 0.0);
    for c in nodes.start..nodes.end - 1 {
        let (xa, ua, ub) = (g.x(c), v[c], v[c + 1]);
        let slope = (ub - ua) / h;
        for (t, w) in rule.nodes().iter().zip(rule.weights()) {
            let x = xa + 0.5 * h * (1.0 + t);
            let (u, du) = exact(x)?;
            let theta = (x - xa) / h;
            let interp = ua * (1.0 - theta) + ub * theta;
            let wt = 0.5 * h * w;
            e0 += wt * (interp - u).norm_sqr();
            e1 += wt * (slope - du).norm_sqr();
            r0 += wt * u.norm_sqr();
            r1 += wt * du.norm_sqr();
        }
    }
    report(e0.sqrt(), e1.sqrt(), r0.sqrt(), r1.sqrt(), h)
}

/// Relative errors of the interpolant of a coarse solution against the
/// interpolant of a reference on a grid refining it by an integer factor,
/// over the coarse cells strictly inside `region`.
pub fn relative_errors_fine(v1: &GridFunction, reference: &GridFunction, region: Region) -> Result<ErrorReport> {
    let (gc, gf) = (v1.grid(), reference.grid());
    let ratio = gc.h() / gf.h();
    let factor = ratio.round();
    if factor < 1.0 || (ratio - factor).abs() > 1e-9 * ratio {
        return Err(Error::IncompatibleGrids(format!(
            "reference spacing {} does not refine {}",
            gf.h(),
            gc.h()
        )));
    }
    let factor = factor as usize;
    let nodes = nodes_inside(v1, region)?;
    let h = gf.h();
    let (vc, vf) = (v1.values(), reference.values());
    // each fine cell sees a linear coarse interpolant, so the difference is
    // linear there and its L² integral is exact
    let (mut e0, mut e1, mut r0, mut r1) = (0.0, 0.0, 0.0, 0.0);
    let first_x = gc.x(nodes.start);
    let fine_start = ((first_x - gf.lo()) / h).round() as usize;
    for c in nodes.start..nodes.end - 1 {
        let (ua, ub) = (vc[c], vc[c + 1]);
        let slope = (ub - ua) / gc.h();
        for s in 0..factor {
            let i = fine_start + (c - nodes.start) * factor + s;
            let t0 = s as f64 / factor as f64;
            let t1 = (s + 1) as f64 / factor as f64;
            let (p0, p1) = (ua + (ub - ua) * t0, ua + (ub - ua) * t1);
            let (q0, q1) = (vf[i], vf[i + 1]);
            let (d0, d1) = (p0 - q0, p1 - q1);
            e0 += h * (d0.norm_sqr() + d1.norm_sqr() + (d0.conj() * d1).re) / 3.0;
            r0 += h * (q0.norm_sqr() + q1.norm_sqr() + (q0.conj() * q1).re) / 3.0;
            let qs = (q1 - q0) / h;
            e1 += h * (slope - qs).norm_sqr();
            r1 += h * qs.norm_sqr();
        }
    }
    report(e0.sqrt(), e1.sqrt(), r0.sqrt(), r1.sqrt(), gc.h())
}

/// Least-squares line `y = slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Fits a line through `points`; needs at least two distinct abscissae.
pub fn fit_line(points: &[(f64, f64)]) -> Result<LineFit> {
    let n = points.len();
    if n < 2 {
        return Err(Error::EmptyFit { needed: 2, got: n });
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::EmptyFit { needed: 2, got: 1 });
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(LineFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
        points: n,
    })
}

/// Convergence rate from `log e = slope·log h + intercept`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    /// `(h, e)` pairs that entered the fit, coarsest first.
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub const MIN_RATE_POINTS: usize = 3;
/// Leading points whose local rate stays below this are pre-asymptotic.
pub const PLATEAU_RATE: f64 = 0.5;
/// Errors within this factor of the reference floor are dropped.
pub const FLOOR_FACTOR: f64 = 3.0;

/// Log–log rate fit that skips a leading plateau and errors near `floor`.
pub fn fit_rate(samples: &[(f64, f64)], floor: f64) -> Result<RateFit> {
    let mut pts: Vec<(f64, f64)> = samples
        .iter()
        .copied()
        .filter(|&(h, e)| h > 0.0 && e.is_finite() && e > 0.0 && e > FLOOR_FACTOR * floor)
        .collect();
    pts.sort_by(|a, b| b.0.total_cmp(&a.0));
    while pts.len() >= 2 && local_rate(pts[0], pts[1]) < PLATEAU_RATE {
        pts.remove(0);
    }
    if pts.len() < MIN_RATE_POINTS {
        return Err(Error::EmptyFit {
            needed: MIN_RATE_POINTS,
            got: pts.len(),
        });
    }
    let logs: Vec<(f64, f64)> = pts.iter().map(|&(h, e)| (h.ln(), e.ln())).collect();
    let line = fit_line(&logs)?;
    Ok(RateFit {
        points: pts,
        slope: line.slope,
        intercept: line.intercept,
        r_squared: line.r_squared,
    })
}

/// `log(e₁/e₂)/log(h₁/h₂)`.
pub fn local_rate(coarse: (f64, f64), fine: (f64, f64)) -> f64 {
    (coarse.1 / fine.1).ln() / (coarse.0 / fine.0).ln()
}

/// Abscissa used when fitting `log |u|`.
#[derive(Debug, Clone, Copy)]
pub enum DecayAxis {
    Coordinate,
    /// `∫₀^{|x|} σ`, the natural variable inside an absorbing layer.
    SigmaIntegral(PmlProfile),
}

/// Magnitude below which `log |u|` is not trusted.
pub const UNDERFLOW_THRESHOLD: f64 = 1e-300;

/// Line fit of `log |u|` over the nodes in `window`.
pub fn decay_fit(u: &GridFunction, window: Region, axis: DecayAxis) -> Result<LineFit> {
    let nodes = nodes_in(u, window)?;
    let g = u.grid();
    let mut pts = Vec::with_capacity(nodes.len());
    for i in nodes {
        let a = u.values()[i].norm();
        if a <= UNDERFLOW_THRESHOLD {
            return Err(Error::UnderflowWindow);
        }
        let x = g.x(i);
        let t = match axis {
            DecayAxis::Coordinate => x,
            DecayAxis::SigmaIntegral(p) => p.sigma_integral(x),
        };
        pts.push((t, a.ln()));
    }
    fit_line(&pts)
}

/// Slope of `log |u|` against `x` over `window`.
pub fn decay_slope(u: &GridFunction, window: Region) -> Result<f64> {
    Ok(decay_fit(u, window, DecayAxis::Coordinate)?.slope)
}

/// Errors at a ladder of mesh sizes with fitted rates.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub rows: Vec<ErrorReport>,
    pub l2: RateFit,
    pub h1: RateFit,
}

impl ConvergenceStudy {
    /// Writes `h,e_l2,e_h1,rate_l2,rate_h1`; the first row has no rates.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        write_rate_table(out, "h", &self.rows)
    }
}

fn write_rate_table<W: Write>(out: &mut W, label: &str, rows: &[ErrorReport]) -> io::Result<()> {
    writeln!(out, "{label},e_l2,e_h1,rate_l2,rate_h1")?;
    for (i, r) in rows.iter().enumerate() {
        write!(out, "{:.16e},{:.16e},{:.16e}", r.h, r.e_l2, r.e_h1)?;
        if i == 0 {
            writeln!(out, ",,")?;
        } else {
            let p = &rows[i - 1];
            writeln!(
                out,
                ",{:.16e},{:.16e}",
                local_rate((p.h, p.e_l2), (r.h, r.e_l2)),
                local_rate((p.h, p.e_h1), (r.h, r.e_h1))
            )?;
        }
    }
    Ok(())
}

fn check_ladder(hs: &[f64]) -> Result<()> {
    if hs.len() < MIN_RATE_POINTS {
        return Err(Error::EmptyFit {
            needed: MIN_RATE_POINTS,
            got: hs.len(),
        });
    }
    if hs.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::invalid("h", "mesh sizes must be strictly decreasing"));
    }
    Ok(())
}

/// Errors on `Ω = (−l, l)` for each `h` against the configuration's reference
/// solution. Solves run one at a time to bound memory.
pub fn convergence_study(config: &ExperimentConfig, hs: &[f64]) -> Result<ConvergenceStudy> {
    check_ladder(hs)?;
    let h_min = hs[hs.len() - 1];
    for &h in hs {
        config.with_h(h).validate()?;
    }
    let reference = config.reference(h_min)?;
    let region = config.region();
    let mut rows = Vec::with_capacity(hs.len());
    for &h in hs {
        let cfg = config.with_h(h);
        let u = cfg.solve()?.solution();
        let mut r = reference.errors(&u, region)?;
        r.params = cfg.error_params();
        rows.push(r);
    }
    let floor = reference.floor();
    let l2 = fit_rate(&rows.iter().map(|r| (r.h, r.e_l2)).collect::<Vec<_>>(), floor)?;
    let h1 = fit_rate(&rows.iter().map(|r| (r.h, r.e_h1)).collect::<Vec<_>>(), floor)?;
    Ok(ConvergenceStudy { rows, l2, h1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    Sigma0,
    Thickness,
}

impl std::str::FromStr for SweepVariable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sigma0" | "sigma" => Ok(SweepVariable::Sigma0),
            "d" | "thickness" => Ok(SweepVariable::Thickness),
            other => Err(Error::invalid("vary", format!("expected sigma0 or d, got `{other}`"))),
        }
    }
}

/// `e ≈ c₁ exp(−c₂ v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpFit {
    pub c1: f64,
    pub c2: f64,
    pub r_squared: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncationSweep {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub rows: Vec<ErrorReport>,
    /// Errors of a run whose layer leaves less than `1e-12` of the wave.
    pub floor: ErrorReport,
    pub fit_l2: Option<ExpFit>,
    pub fit_h1: Option<ExpFit>,
}

impl TruncationSweep {
    /// Writes `param,e_l2,e_h1`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "param,e_l2,e_h1")?;
        for (v, r) in self.values.iter().zip(&self.rows) {
            writeln!(out, "{:.16e},{:.16e},{:.16e}", v, r.e_l2, r.e_h1)?;
        }
        Ok(())
    }
}

fn exp_fit(values: &[f64], errors: &[f64], floor: f64) -> Option<ExpFit> {
    let pts: Vec<(f64, f64)> = values
        .iter()
        .zip(errors)
        .filter(|&(_, &e)| e > FLOOR_FACTOR * floor)
        .map(|(&v, &e)| (v, e.ln()))
        .collect();
    if pts.len() < MIN_RATE_POINTS {
        return None;
    }
    let line = fit_line(&pts).ok()?;
    Some(ExpFit {
        c1: line.intercept.exp(),
        c2: -line.slope,
        r_squared: line.r_squared,
        points: line.points,
    })
}

/// Errors on `Ω` while varying `σ₀` (fixed `d`) or `d` (fixed `σ₀`).
pub fn truncation_sweep(config: &ExperimentConfig, variable: SweepVariable, values: &[f64]) -> Result<TruncationSweep> {
    if values.is_empty() {
        return Err(Error::EmptyFit { needed: 1, got: 0 });
    }
    let vary = |v: f64| {
        let mut c = config.clone();
        match variable {
            SweepVariable::Sigma0 => c.sigma0 = Sigma0Setting::Fixed(v),
            SweepVariable::Thickness => c.d = v,
        }
        c
    };
    let configs: Vec<ExperimentConfig> = values.iter().map(|&v| vary(v)).collect();
    for c in &configs {
        c.validate()?;
    }
    let mut floor_cfg = config.clone();
    if variable == SweepVariable::Thickness {
        floor_cfg.d = values.iter().copied().fold(config.d, f64::max);
    }
    floor_cfg.sigma0 = Sigma0Setting::Auto { target: 1e-12 };
    let reference = config.reference(config.h)?;
    let region = config.region();
    let measure = |c: &ExperimentConfig| -> Result<ErrorReport> {
        let u = c.solve()?.solution();
        let mut r = reference.errors(&u, region)?;
        r.params = c.error_params();
        Ok(r)
    };
    let rows = configs.par_iter().map(measure).collect::<Result<Vec<_>>>()?;
    let floor = measure(&floor_cfg)?;
    let e_l2: Vec<f64> = rows.iter().map(|r| r.e_l2).collect();
    let e_h1: Vec<f64> = rows.iter().map(|r| r.e_h1).collect();
    Ok(TruncationSweep {
        variable,
        values: values.to_vec(),
        fit_l2: exp_fit(values, &e_l2, floor.e_l2),
        fit_h1: exp_fit(values, &e_h1, floor.e_h1),
        rows,
        floor,
    })
}

/// Errors of nonlocal solutions with `h = δ` against a fine local solve.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaStudy {
    /// One row per `δ`; `h` holds `δ`.
    pub rows: Vec<ErrorReport>,
    pub l2: RateFit,
    pub h1: RateFit,
    pub oracle_h: f64,
    pub sigma0: f64,
}

impl DeltaStudy {
    /// Writes `delta,e_l2,e_h1,rate_l2,rate_h1`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        write_rate_table(out, "delta", &self.rows)
    }
}

/// Refinement of the local oracle relative to the smallest `δ`.
pub const ORACLE_REFINEMENT: f64 = 8.0;

/// Drives `δ = h → 0` and compares with second-order differences for the
/// local PML problem at `h_min/8`. The layer strength is fixed across levels,
/// chosen from `k` when automatic.
pub fn delta_convergence_study(config: &ExperimentConfig, deltas: &[f64]) -> Result<DeltaStudy> {
    check_ladder(deltas)?;
    let sigma0 = match config.sigma0 {
        Sigma0Setting::Fixed(v) => v,
        Sigma0Setting::Auto { target } => choose_sigma0(config.k, config.d, target, 1.0)?,
    };
    let pml = PmlProfile::new(config.l, config.d, sigma0)?;
    let oracle_h = deltas[deltas.len() - 1] / ORACLE_REFINEMENT;
    let oracle_grid = Grid::new(oracle_h, config.l + config.d, 0.0)?;
    let base = ExperimentConfig {
        sigma0: Sigma0Setting::Fixed(sigma0),
        case: crate::experiment::CaseSelection::Case1,
        ..config.clone()
    };
    let source = base.source()?;
    let oracle = solve_local_pml_fd(&oracle_grid, &pml, config.k, &source)?.solution();
    let region = config.region();
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let cfg = ExperimentConfig { delta, h: delta, ..base.clone() };
        let u = cfg.solve()?.solution();
        let mut r = relative_errors_fine(&u, &oracle, region)?;
        r.params = cfg.error_params();
        rows.push(r);
    }
    let l2 = fit_rate(&rows.iter().map(|r| (r.h, r.e_l2)).collect::<Vec<_>>(), 0.0)?;
    let h1 = fit_rate(&rows.iter().map(|r| (r.h, r.e_h1)).collect::<Vec<_>>(), 0.0)?;
    Ok(DeltaStudy { rows, l2, h1, oracle_h, sigma0 })
}

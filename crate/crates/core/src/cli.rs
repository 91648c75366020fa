//! Command-line front end: argument parsing, config files and CSV output.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::analysis::{
    convergence_study, delta_convergence_study, truncation_sweep, RateFit, SweepVariable,
};
use crate::error::Error;
use crate::experiment::{parse_config_text, CaseSelection, ExperimentConfig, Sigma0Setting};
use crate::kernels::{KernelFamily, DEFAULT_SUPPORT_TOLERANCE};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Environment variable capping the worker pool used by sweeps.
pub const THREADS_ENV: &str = "NLHELM_THREADS";

#[derive(Debug, Parser)]
#[command(name = "nlhelm", version, about = "Nonlocal Helmholtz solver with perfectly matched layers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the modified wavenumber, cutoff and regime.
    Dispersion(ProblemArgs),
    /// Solve once and write the solution as CSV.
    Solve(SolveArgs),
    /// Truncation errors while varying sigma0 or the layer thickness.
    Sweep(SweepArgs),
    /// Errors and rates over a ladder of mesh sizes.
    Convergence(ConvergenceArgs),
    /// Errors against the local limit with delta = h.
    DeltaConvergence(DeltaArgs),
}

/// Problem parameters. Flags override values read from `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct ProblemArgs {
    /// File of `key = value` lines; `#` starts a comment.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Kernel family: exp or gauss.
    #[arg(long)]
    pub kernel: Option<KernelFamily>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub k: Option<f64>,
    /// Half-width of the physical domain (default 10).
    #[arg(long)]
    pub l: Option<f64>,
    /// Layer thickness (default 10).
    #[arg(long)]
    pub d: Option<f64>,
    /// A number, `auto` or `auto:<target>` (default auto:1e-10).
    #[arg(long)]
    pub sigma0: Option<Sigma0Setting>,
    /// Mesh size; must divide l + d.
    #[arg(long, conflicts_with = "m")]
    pub h: Option<f64>,
    /// Number of cells in [0, l + d]; sets h = (l + d)/m.
    #[arg(long)]
    pub m: Option<u64>,
    /// auto, 1 or 2.
    #[arg(long)]
    pub case: Option<CaseSelection>,
    /// Use the real kernel inside the layers instead of its continuation.
    #[arg(long)]
    pub unmodified_kernel: bool,
    /// Tail value below which an infinite kernel is cut off.
    #[arg(long)]
    pub support_tolerance: Option<f64>,
    /// CSV destination; standard output when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Append the exact solution (exponential kernel only).
    #[arg(long)]
    pub with_exact: bool,
    /// Write the assembled operator as `n,m,re,im` triplets.
    #[arg(long)]
    pub dump_matrix: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Parameter to vary: sigma0 or d.
    #[arg(long)]
    pub vary: SweepVariable,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub values: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct ConvergenceArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Comma-separated, strictly decreasing mesh sizes.
    #[arg(long, value_delimiter = ',', num_args = 1.., conflicts_with = "m_list")]
    pub h_list: Vec<f64>,
    /// Comma-separated cell counts on [0, l + d].
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub m_list: Vec<u64>,
}

#[derive(Debug, Args)]
pub struct DeltaArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Comma-separated, strictly decreasing horizons; each level uses h = delta.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub deltas: Vec<f64>,
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParameter { .. }
            | Error::DegenerateK { .. }
            | Error::EmptyFit { .. }
            | Error::IncompatibleGrids(_) => EXIT_VALIDATION,
            _ => EXIT_NUMERICAL,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError {
            code: EXIT_IO,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_VALIDATION,
        message: message.into(),
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn config_value<T: FromStr>(map: &BTreeMap<String, String>, key: &str) -> CliResult<Option<T>> {
    match map.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|_| usage(format!("config: cannot read `{key} = {v}`"))),
    }
}

const CONFIG_KEYS: &[&str] = &[
    "kernel",
    "delta",
    "k",
    "l",
    "d",
    "sigma0",
    "h",
    "m",
    "case",
    "unmodified-kernel",
    "support-tolerance",
    "output",
];

impl ProblemArgs {
    fn config_map(&self) -> CliResult<BTreeMap<String, String>> {
        let Some(path) = &self.config else {
            return Ok(BTreeMap::new());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError {
                code: EXIT_IO,
                message: format!("cannot read config {}: {e}", path.display()),
            })?;
        let map = parse_config_text(&text)?;
        if let Some(bad) = map.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
            return Err(usage(format!("config: unknown key `{bad}`")));
        }
        Ok(map)
    }

    /// Merges flags over the config file. `h` may stay unset when the caller
    /// supplies mesh sizes another way.
    pub fn resolve(&self, need_h: bool) -> CliResult<(ExperimentConfig, Option<PathBuf>)> {
        let map = self.config_map()?;
        let kernel = match self.kernel {
            Some(v) => v,
            None => config_value(&map, "kernel")?.ok_or_else(|| usage("missing --kernel"))?,
        };
        let delta = self
            .delta
            .or(config_value(&map, "delta")?)
            .ok_or_else(|| usage("missing --delta"))?;
        let k = self.k.or(config_value(&map, "k")?).ok_or_else(|| usage("missing --k"))?;
        let mut cfg = ExperimentConfig::new(kernel, delta, k, 1.0);
        cfg.l = self.l.or(config_value(&map, "l")?).unwrap_or(cfg.l);
        cfg.d = self.d.or(config_value(&map, "d")?).unwrap_or(cfg.d);
        cfg.sigma0 = self.sigma0.or(config_value(&map, "sigma0")?).unwrap_or_default();
        cfg.case = self.case.or(config_value(&map, "case")?).unwrap_or_default();
        cfg.unmodified_kernel = self.unmodified_kernel || config_value(&map, "unmodified-kernel")?.unwrap_or(false);
        cfg.support_tolerance = self
            .support_tolerance
            .or(config_value(&map, "support-tolerance")?)
            .unwrap_or(DEFAULT_SUPPORT_TOLERANCE);

        // a flag for either mesh parameter hides both config entries
        let (h, m) = if self.h.is_some() || self.m.is_some() {
            (self.h, self.m)
        } else {
            (config_value(&map, "h")?, config_value::<u64>(&map, "m")?)
        };
        let h = match (h, m) {
            (Some(_), Some(_)) => return Err(usage("give either h or m, not both")),
            (Some(h), None) => Some(h),
            (None, Some(0)) => return Err(usage("m must be positive")),
            (None, Some(m)) => Some((cfg.l + cfg.d) / m as f64),
            (None, None) => None,
        };
        match h {
            Some(h) => cfg.h = h,
            None if need_h => return Err(usage("missing --h or --m")),
            None => cfg.h = (cfg.l + cfg.d) / 100.0,
        }
        let output = self.output.clone().or(config_value(&map, "output")?);
        cfg.validate()?;
        Ok((cfg, output))
    }
}

/// Output sinks: CSV to the file or stdout, notes to whichever stream the
/// CSV does not use.
struct Sinks {
    csv: Box<dyn Write>,
    notes: Box<dyn Write>,
}

impl Sinks {
    fn open(path: Option<&PathBuf>) -> CliResult<Self> {
        Ok(match path {
            Some(p) => Sinks {
                csv: Box::new(BufWriter::new(File::create(p)?)),
                notes: Box::new(io::stdout()),
            },
            None => Sinks {
                csv: Box::new(BufWriter::new(io::stdout())),
                notes: Box::new(io::stderr()),
            },
        })
    }

    fn finish(mut self) -> CliResult<()> {
        self.csv.flush()?;
        self.notes.flush()?;
        Ok(())
    }
}

fn write_fit_summary(out: &mut dyn Write, fits: &[(&str, f64, f64, f64)]) -> io::Result<()> {
    writeln!(out, "norm,slope,intercept,r2")?;
    for (name, slope, intercept, r2) in fits {
        writeln!(out, "{name},{slope:.16e},{intercept:.16e},{r2:.16e}")?;
    }
    Ok(())
}

fn rate_summary(l2: &RateFit, h1: &RateFit) -> [(&'static str, f64, f64, f64); 2] {
    [
        ("l2", l2.slope, l2.intercept, l2.r_squared),
        ("h1", h1.slope, h1.intercept, h1.r_squared),
    ]
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            // a second initialisation in the same process is harmless
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn cmd_dispersion(args: &ProblemArgs) -> CliResult<()> {
    let (cfg, output) = args.resolve(false)?;
    let r = cfg.dispersion()?;
    let mut sinks = Sinks::open(output.as_ref())?;
    writeln!(sinks.csv, "k,re_ktilde,im_ktilde,k0,regime,residual")?;
    writeln!(
        sinks.csv,
        "{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e}",
        r.k, r.ktilde.re, r.ktilde.im, r.k0, r.regime, r.residual
    )?;
    sinks.finish()
}

fn cmd_solve(args: &SolveArgs) -> CliResult<()> {
    let (cfg, output) = args.problem.resolve(true)?;
    if args.with_exact && cfg.kernel != KernelFamily::Exponential {
        return Err(usage("--with-exact needs --kernel exp"));
    }
    let exact = match cfg.kernel {
        KernelFamily::Exponential => Some(crate::greens::ExactSolutionExp::new(cfg.k, cfg.delta, cfg.source()?)?),
        KernelFamily::Gaussian => None,
    };
    if let Some(path) = &args.dump_matrix {
        let a = cfg.operator()?;
        let mut out = BufWriter::new(File::create(path)?);
        a.write_csv(&mut out, cfg.grid()?.n() as i64)?;
        out.flush()?;
    }
    let result = cfg.solve()?;
    let mut sinks = Sinks::open(output.as_ref())?;
    let grid = result.grid;
    if args.with_exact {
        writeln!(sinks.csv, "x,re_u,im_u,abs_u,re_exact,im_exact,abs_exact")?;
    } else {
        writeln!(sinks.csv, "x,re_u,im_u,abs_u")?;
    }
    for (i, u) in result.values.iter().enumerate() {
        let x = grid.x(i);
        write!(sinks.csv, "{:.16e},{:.16e},{:.16e},{:.16e}", x, u.re, u.im, u.norm())?;
        if let (true, Some(e)) = (args.with_exact, &exact) {
            let v = e.value(x)?;
            write!(sinks.csv, ",{:.16e},{:.16e},{:.16e}", v.re, v.im, v.norm())?;
        }
        writeln!(sinks.csv)?;
    }
    writeln!(
        sinks.notes,
        "case {} sigma0 {:.16e} residual {:.3e}",
        result.case,
        cfg.resolved_sigma0()?,
        result.residual_norm
    )?;
    for w in &result.warnings {
        writeln!(sinks.notes, "warning: {w}")?;
    }
    if let Some(e) = exact {
        let reference = crate::experiment::Reference::Exact(Box::new(e));
        let r = reference.errors(&result.solution(), cfg.region())?;
        writeln!(sinks.notes, "e_l2,e_h1")?;
        writeln!(sinks.notes, "{:.16e},{:.16e}", r.e_l2, r.e_h1)?;
    }
    sinks.finish()
}

fn cmd_sweep(args: &SweepArgs) -> CliResult<()> {
    if args.values.is_empty() {
        return Err(usage("--values needs at least one value"));
    }
    let (cfg, output) = args.problem.resolve(true)?;
    let sweep = truncation_sweep(&cfg, args.vary, &args.values)?;
    let mut sinks = Sinks::open(output.as_ref())?;
    sweep.write_csv(&mut sinks.csv)?;
    let mut fits = Vec::new();
    for (name, fit) in [("l2", sweep.fit_l2), ("h1", sweep.fit_h1)] {
        match fit {
            Some(f) => fits.push((name, -f.c2, f.c1.ln(), f.r_squared)),
            None => writeln!(sinks.notes, "{name}: too few points above the floor for a fit")?,
        }
    }
    write_fit_summary(&mut sinks.notes, &fits)?;
    writeln!(sinks.notes, "floor_l2,floor_h1")?;
    writeln!(sinks.notes, "{:.16e},{:.16e}", sweep.floor.e_l2, sweep.floor.e_h1)?;
    sinks.finish()
}

fn cmd_convergence(args: &ConvergenceArgs) -> CliResult<()> {
    let (cfg, output) = args.problem.resolve(false)?;
    let hs: Vec<f64> = if !args.m_list.is_empty() {
        if args.m_list.contains(&0) {
            return Err(usage("--m-list entries must be positive"));
        }
        args.m_list.iter().map(|&m| (cfg.l + cfg.d) / m as f64).collect()
    } else {
        args.h_list.clone()
    };
    if hs.is_empty() {
        return Err(usage("give --h-list or --m-list"));
    }
    let study = convergence_study(&cfg, &hs)?;
    let mut sinks = Sinks::open(output.as_ref())?;
    study.write_csv(&mut sinks.csv)?;
    write_fit_summary(&mut sinks.notes, &rate_summary(&study.l2, &study.h1))?;
    sinks.finish()
}

fn cmd_delta_convergence(args: &DeltaArgs) -> CliResult<()> {
    if args.deltas.is_empty() {
        return Err(usage("--deltas needs at least three values"));
    }
    let mut problem = args.problem.clone();
    problem.delta = problem.delta.or(args.deltas.first().copied());
    problem.h = problem.h.or(args.deltas.first().copied());
    problem.m = None;
    let (cfg, output) = problem.resolve(false)?;
    let study = delta_convergence_study(&cfg, &args.deltas)?;
    let mut sinks = Sinks::open(output.as_ref())?;
    study.write_csv(&mut sinks.csv)?;
    write_fit_summary(&mut sinks.notes, &rate_summary(&study.l2, &study.h1))?;
    writeln!(sinks.notes, "oracle_h,sigma0")?;
    writeln!(sinks.notes, "{:.16e},{:.16e}", study.oracle_h, study.sigma0)?;
    sinks.finish()
}

/// Runs a parsed command.
pub fn execute(cli: &Cli) -> CliResult<()> {
    configure_threads();
    match &cli.command {
        Command::Dispersion(a) => cmd_dispersion(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Convergence(a) => cmd_convergence(a),
        Command::DeltaConvergence(a) => cmd_delta_convergence(a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(args: &[&str]) -> ProblemArgs {
        let mut full = vec!["nlhelm", "dispersion"];
        full.extend_from_slice(args);
        match Cli::try_parse_from(full).unwrap().command {
            Command::Dispersion(p) => p,
            _ => unreachable!(),
        }
    }

    #[test]
    fn flags_override_config_file() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "# test\nkernel = gauss\ndelta = 0.5\nk = 1\nd = 20\nm = 300").unwrap();
        let path = file.path().to_str().unwrap().to_string();
        let (cfg, out) = problem(&["--config", &path, "--k", "2", "--kernel", "exp"]).resolve(true).unwrap();
        assert_eq!(cfg.kernel, KernelFamily::Exponential);
        assert_eq!((cfg.delta, cfg.k, cfg.d), (0.5, 2.0, 20.0));
        assert_eq!(cfg.h, 0.1);
        assert!(out.is_none());

        let (cfg, _) = problem(&["--config", &path, "--h", "0.25"]).resolve(true).unwrap();
        assert_eq!(cfg.h, 0.25);
    }

    #[test]
    fn config_file_errors() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "kernel = exp\ncolour = blue").unwrap();
        let path = file.path().to_str().unwrap().to_string();
        let e = problem(&["--config", &path]).resolve(false).unwrap_err();
        assert_eq!(e.code, EXIT_VALIDATION);
        assert!(e.message.contains("colour"));
    }

    #[test]
    fn missing_and_invalid_parameters() {
        assert_eq!(problem(&["--kernel", "exp", "--delta", "0.1"]).resolve(false).unwrap_err().code, EXIT_VALIDATION);
        let e = problem(&["--kernel", "exp", "--delta", "0.1", "--k", "0"]).resolve(false).unwrap_err();
        assert_eq!(e.code, EXIT_VALIDATION);
        assert!(e.message.contains("`k`"));
        let e = problem(&["--kernel", "exp", "--delta", "0.1", "--k", "1", "--h", "0.3"]).resolve(true).unwrap_err();
        assert_eq!(e.code, EXIT_VALIDATION);
        assert!(Cli::try_parse_from(["nlhelm", "dispersion", "--kernel", "cubic"]).is_err());
        assert!(Cli::try_parse_from(["nlhelm", "dispersion", "--h", "0.1", "--m", "10"]).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run(["nlhelm", "dispersion", "--kernel", "exp", "--delta", "0.0625", "--k", "0"]), EXIT_VALIDATION);
        assert_eq!(run(["nlhelm", "frobnicate"]), EXIT_VALIDATION);
        assert_eq!(
            run(["nlhelm", "sweep", "--kernel", "exp", "--delta", "0.0625", "--k", "1.6", "--h", "0.25", "--vary", "d"]),
            EXIT_VALIDATION
        );
        let e: CliError = Error::SingularSystem { row: 1, pivot: 0.0 }.into();
        assert_eq!(e.code, EXIT_NUMERICAL);
    }
}

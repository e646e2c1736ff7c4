//! Flag definitions and the validation pass that runs before any computation.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use radial_blowup::figures::{Figure, DEFAULT_DIMENSIONS};
use radial_blowup::radial::Domain;
use radial_blowup::{Nonlinearity, Params, StepControls};

/// A flag value that cannot be used; reported with exit code 2.
#[derive(Debug)]
pub struct Usage(pub String);

pub fn usage<T, E: From<Usage>>(msg: impl Into<String>) -> Result<T, E> {
    Err(Usage(msg.into()).into())
}

#[derive(Parser, Debug)]
#[command(
    name = "radial-blowup",
    version,
    about = "Radial blow-up laboratory for Δu = v^p, Δv = f(|∇u|)"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Classify a grid of exponents into regions A/B/C (or global/finite on ℝᴺ).
    #[command(allow_negative_numbers = true)]
    Classify(ClassifyArgs),
    /// Integrate one radial solution.
    #[command(allow_negative_numbers = true)]
    Solve(SolveArgs),
    /// Compare empirical blow-up rates at the boundary with the theoretical ones.
    #[command(allow_negative_numbers = true)]
    Rates(SolveArgs),
    /// Compare large-r growth on ℝᴺ with the explicit solution.
    #[command(allow_negative_numbers = true)]
    WholeSpace(WholeSpaceArgs),
    /// Equilibria, stability and divergence of the reduced vector fields.
    #[command(allow_negative_numbers = true)]
    Dynsys(DynsysArgs),
    /// Normalised u and v profiles for several dimensions.
    #[command(allow_negative_numbers = true)]
    Figures(FiguresArgs),
    /// Consolidated JSON report for one parameter set (always JSON).
    #[command(allow_negative_numbers = true)]
    Report(SolveArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FKind {
    Power,
    Exp,
    Custom(PathBuf),
}

impl FromStr for FKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "power" => Ok(Self::Power),
            "exp" => Ok(Self::Exp),
            _ => match s.strip_prefix("custom:") {
                Some(path) if !path.is_empty() => Ok(Self::Custom(path.into())),
                _ => Err(format!("expected power, exp or custom:FILE, got {s:?}")),
            },
        }
    }
}

/// `lo:hi:n` (n points, endpoints included) or a single value.
#[derive(Debug, Clone, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Range {
    pub fn points(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
        (0..self.n)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (self.n - 1) as f64)
            .collect()
    }
}

impl FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("not a number: {t:?}"));
        let parts: Vec<&str> = s.split(':').collect();
        let range = match parts.as_slice() {
            [x] => {
                let x = num(x)?;
                Self { lo: x, hi: x, n: 1 }
            }
            [lo, hi, n] => {
                let n: usize = n.trim().parse().map_err(|_| format!("not a point count: {n:?}"))?;
                Self {
                    lo: num(lo)?,
                    hi: num(hi)?,
                    n,
                }
            }
            _ => return Err(format!("expected VALUE or LO:HI:N, got {s:?}")),
        };
        if !(range.lo.is_finite() && range.hi.is_finite() && range.lo > 0.0 && range.hi >= range.lo) {
            return Err(format!("range must satisfy 0 < lo <= hi, got {s:?}"));
        }
        if range.n == 0 || (range.n == 1 && range.hi != range.lo) {
            return Err(format!("a range needs N >= 2 points, got {s:?}"));
        }
        Ok(range)
    }
}

#[derive(Args, Debug)]
pub struct OutputArgs {
    /// Output path prefix; standard output when absent.
    #[arg(long, value_name = "PREFIX")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Round numeric output to this many significant digits.
    #[arg(long, value_name = "DIGITS", value_parser = clap::value_parser!(u32).range(1..=17))]
    pub round: Option<u32>,
}

#[derive(Args, Debug)]
pub struct ProblemArgs {
    #[arg(long)]
    pub p: f64,
    /// Exponent of f(t) = t^q (power nonlinearity only).
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long = "f", value_name = "power|exp|custom:FILE", default_value = "power")]
    pub f: FKind,
    #[arg(long = "N", default_value_t = 2)]
    pub n: usize,
    /// Shooting value v(0).
    #[arg(long, default_value_t = 1.0)]
    pub m: f64,
    /// Ball radius; the solve stops there instead of at blow-up.
    #[arg(long = "R", conflicts_with = "whole_space")]
    pub r: Option<f64>,
    /// Integrate on ℝᴺ until blow-up or the horizon (the default).
    #[arg(long)]
    pub whole_space: bool,
    #[arg(long, default_value_t = StepControls::default().rtol)]
    pub rtol: f64,
    #[arg(long, default_value_t = StepControls::default().v_ceiling)]
    pub v_ceiling: f64,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    /// VALUE or LO:HI:N
    #[arg(long)]
    pub p: Range,
    /// VALUE or LO:HI:N (power nonlinearity only)
    #[arg(long)]
    pub q: Option<Range>,
    #[arg(long = "f", value_name = "power|exp|custom:FILE", default_value = "power")]
    pub f: FKind,
    /// Classify existence on ℝᴺ instead of the ball regions.
    #[arg(long)]
    pub whole_space: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct WholeSpaceArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Radius at which the limits are read.
    #[arg(long, default_value_t = 1e5)]
    pub r_eval: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct DynsysArgs {
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub q: f64,
    #[arg(long = "N", default_value_t = 2)]
    pub n: usize,
    /// Analyse the whole-space field instead of the ball field.
    #[arg(long)]
    pub whole_space: bool,
    /// Shooting value v(0) for the transformed trajectory written with --out.
    #[arg(long)]
    pub m: Option<f64>,
    /// End of the transformed ball trajectory in t = ln(1/(1−r)).
    #[arg(long, default_value_t = 40.0)]
    pub t_end: f64,
    /// Also locate the critical shooting value by bisection (ball field).
    #[arg(long)]
    pub critical: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct FiguresArgs {
    /// fig2 (p = 4, q = 3) or fig3 (p = 2, q = 3)
    pub which: String,
    /// Comma-separated dimensions.
    #[arg(long = "N", value_delimiter = ',', default_values_t = DEFAULT_DIMENSIONS)]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub m: f64,
    #[arg(long, default_value_t = StepControls::default().rtol)]
    pub rtol: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

pub fn check_prefix(out: &Option<PathBuf>) -> Result<(), Usage> {
    let Some(prefix) = out else { return Ok(()) };
    if prefix.as_os_str().is_empty() || prefix.file_name().is_none() {
        return usage(format!(
            "--out needs a file prefix, got {:?}",
            prefix.display().to_string()
        ));
    }
    let dir = match prefix.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    if !dir.is_dir() {
        return usage(format!("output directory {} does not exist", dir.display()));
    }
    Ok(())
}

pub fn nonlinearity(f: &FKind, q: Option<f64>) -> Result<Nonlinearity, Usage> {
    match (f, q) {
        (FKind::Power, Some(q)) => Nonlinearity::power(q).map_err(|e| Usage(e.to_string())),
        (FKind::Power, None) => usage("--f power needs --q"),
        (_, Some(_)) => usage("--q only applies to --f power"),
        (FKind::Exp, None) => Ok(Nonlinearity::exp()),
        (FKind::Custom(path), None) => {
            Nonlinearity::from_csv_path(path).map_err(|e| Usage(format!("cannot load {}: {e}", path.display())))
        }
    }
}

pub fn controls(rtol: f64, v_ceiling: f64) -> Result<StepControls, Usage> {
    let c = StepControls {
        rtol,
        v_ceiling,
        ..StepControls::default()
    };
    c.validate().map_err(|e| Usage(e.to_string()))?;
    Ok(c)
}

impl ProblemArgs {
    pub fn params(&self) -> Result<Params, Usage> {
        let nl = nonlinearity(&self.f, self.q)?;
        let domain = match self.r {
            Some(radius) => Domain::Ball { radius },
            None => Domain::WholeSpace,
        };
        Params::new(self.p, nl, self.n, self.m, domain).map_err(|e| Usage(e.to_string()))
    }

    pub fn controls(&self) -> Result<StepControls, Usage> {
        controls(self.rtol, self.v_ceiling)
    }

    /// `(p, q)` for commands that only make sense for `f(t) = t^q`.
    pub fn power_exponents(&self) -> Result<(f64, f64), Usage> {
        match (&self.f, self.q) {
            (FKind::Power, Some(q)) => Ok((self.p, q)),
            _ => usage("this command needs --f power with --q"),
        }
    }
}

impl FiguresArgs {
    pub fn figure(&self) -> Result<Figure, Usage> {
        Figure::parse(&self.which).ok_or_else(|| Usage(format!("unknown figure {:?}; use fig2 or fig3", self.which)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!("2".parse::<Range>().unwrap().points(), vec![2.0]);
        assert_eq!("1:2:3".parse::<Range>().unwrap().points(), vec![1.0, 1.5, 2.0]);
        for bad in ["0:1:3", "2:1:3", "1:2:0", "1:2:1", "a", "1:2", "-1", "1:inf:3"] {
            assert!(bad.parse::<Range>().is_err(), "{bad}");
        }
    }

    #[test]
    fn f_kinds() {
        assert_eq!("exp".parse::<FKind>().unwrap(), FKind::Exp);
        assert_eq!("custom:a.csv".parse::<FKind>().unwrap(), FKind::Custom("a.csv".into()));
        assert!("custom:".parse::<FKind>().is_err());
        assert!("cubic".parse::<FKind>().is_err());
    }
}

//! The gradient nonlinearity `f` together with its antiderivative
//! `F(s) = ∫₀ˢ f` and the iterated integral `∫₀ˢ F`.
//!
//! Power and exponential families are evaluated in closed form. Sampled
//! (custom) nonlinearities are interpolated with a monotone piecewise cubic
//! (Fritsch–Carlson slopes); the cumulative integrals of the interpolant are
//! tabulated at the knots at construction, so evaluation never mutates state.
//! Beyond the last knot a custom `f` is continued with the log-log slope of
//! its final segment.

use std::io::Read;
use std::path::Path;

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::quadrature::{adaptive_simpson, gauss_legendre5};

/// Which family an `f` belongs to.
#[derive(Debug, Clone, PartialEq)]
pub enum Kind {
    /// `f(t) = t^q`.
    Power { q: f64 },
    /// `f(t) = e^t`.
    Exp,
    /// Monotone sample table.
    Custom(Box<SampledF>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Nonlinearity {
    kind: Kind,
}

/// A nondecreasing sample table `t ↦ f(t)` with cached integrals.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledF {
    t: Vec<f64>,
    f: Vec<f64>,
    slope: Vec<f64>,
    cum_f: Vec<f64>,
    cum_ff: Vec<f64>,
    tail_exponent: Option<f64>,
}

/// Values of the two comparison functions used to relate `∫₀ˢ F` and
/// `(∫₀ˢ √f)²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapValues {
    /// `2∫₀ˢ F − (∫₀ˢ √f)²`; expected to be ≤ 0.
    pub upper_gap: f64,
    /// `∫₀^{2s} F − (∫₀ˢ √f)²`; expected to be ≥ 0.
    pub lower_gap: f64,
    /// `upper_gap` divided by the larger of its two terms.
    pub upper_gap_rel: f64,
    /// `lower_gap` divided by the larger of its two terms.
    pub lower_gap_rel: f64,
}

impl Nonlinearity {
    pub fn power(q: f64) -> Result<Self> {
        if !(q.is_finite() && q > 0.0) {
            return Err(Error::Parameter(format!("power exponent q must be positive, got {q}")));
        }
        Ok(Self {
            kind: Kind::Power { q },
        })
    }

    pub fn exp() -> Self {
        Self { kind: Kind::Exp }
    }

    /// Builds a custom nonlinearity from knots `t` (strictly increasing,
    /// starting at 0) and nondecreasing values `f` with `f(t) > 0` for `t > 0`.
    pub fn from_samples(t: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        Ok(Self {
            kind: Kind::Custom(Box::new(SampledF::new(t, f)?)),
        })
    }

    /// Reads a two-column `t,f` CSV with a header row.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "t" || &headers[1] != "f" {
            return Err(Error::Table(format!(
                "expected header `t,f`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut ts = Vec::new();
        let mut fs = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != 2 {
                return Err(Error::Table(format!("row {} has {} columns", line + 2, rec.len())));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Table(format!("row {}: cannot parse `{s}`", line + 2)))
            };
            ts.push(parse(&rec[0])?);
            fs.push(parse(&rec[1])?);
        }
        Self::from_samples(ts, fs)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file)
    }

    pub fn kind(&self) -> &Kind {
        &self.kind
    }

    /// `Some(q)` for `f(t) = t^q`.
    pub fn power_exponent(&self) -> Option<f64> {
        match self.kind {
            Kind::Power { q } => Some(q),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            Kind::Power { q } => format!("power(q={q})"),
            Kind::Exp => "exp".to_string(),
            Kind::Custom(s) => format!("custom({} samples)", s.t.len()),
        }
    }

    /// `f(t)` for `t ≥ 0`.
    pub fn eval_f(&self, t: f64) -> Result<f64> {
        check_arg(t, "f")?;
        Ok(self.f_unchecked(t))
    }

    /// `F(s) = ∫₀ˢ f(t) dt`.
    pub fn eval_antiderivative(&self, s: f64) -> Result<f64> {
        check_arg(s, "F")?;
        Ok(self.antiderivative_unchecked(s))
    }

    /// `∫₀ˢ F(t) dt`.
    pub fn eval_double_integral(&self, s: f64) -> Result<f64> {
        check_arg(s, "∫F")?;
        Ok(self.double_integral_unchecked(s))
    }

    /// `ln ∫₀ˢ F`, finite far beyond the overflow point of the integral itself
    /// for the built-in families.
    pub fn ln_double_integral(&self, s: f64) -> Result<f64> {
        check_arg(s, "ln ∫F")?;
        Ok(match &self.kind {
            Kind::Power { q } => (q + 2.0) * s.ln() - ((q + 1.0) * (q + 2.0)).ln(),
            Kind::Exp => {
                if s < 0.5 {
                    exp_remainder_series(s).ln()
                } else {
                    s + (-(1.0 + s) * (-s).exp()).ln_1p()
                }
            }
            Kind::Custom(c) => c.double_integral(s).ln(),
        })
    }

    /// `∫₀ˢ √f` by adaptive Simpson.
    pub fn sqrt_integral(&self, s: f64) -> Result<f64> {
        check_arg(s, "∫√f")?;
        Ok(adaptive_simpson(|t| self.sqrt_f_unchecked(t), 0.0, s, 1e-12, 1e-13))
    }

    /// `ln ∫₀ˢ √f` in closed form for the built-in families, by quadrature for
    /// custom tables.
    pub fn ln_sqrt_integral(&self, s: f64) -> Result<f64> {
        check_arg(s, "ln ∫√f")?;
        Ok(match &self.kind {
            Kind::Power { q } => {
                let e = 0.5 * q + 1.0;
                e * s.ln() - e.ln()
            }
            Kind::Exp => std::f64::consts::LN_2 + 0.5 * s + (-(-0.5 * s).exp()).ln_1p(),
            Kind::Custom(_) => self.sqrt_integral(s)?.ln(),
        })
    }

    /// Evaluates the comparison functions
    /// `H(s) = 2∫₀ˢF − (∫₀ˢ√f)²` and `h(s) = ∫₀^{2s}F − (∫₀ˢ√f)²`.
    ///
    /// The `√f` integral is computed by quadrature; both differences are formed
    /// in log space so that the sign survives when the terms overflow.
    pub fn gap_functions(&self, s: f64) -> Result<GapValues> {
        check_arg(s, "gap functions")?;
        if s == 0.0 {
            return Ok(GapValues {
                upper_gap: 0.0,
                lower_gap: 0.0,
                upper_gap_rel: 0.0,
                lower_gap_rel: 0.0,
            });
        }
        let ln_sq = 2.0 * self.sqrt_integral(s)?.ln();
        let ln_two_ff = std::f64::consts::LN_2 + self.ln_double_integral(s)?;
        let ln_ff_2s = self.ln_double_integral(2.0 * s)?;
        let (upper_gap, upper_gap_rel) = log_difference(ln_two_ff, ln_sq);
        let (lower_gap, lower_gap_rel) = log_difference(ln_ff_2s, ln_sq);
        Ok(GapValues {
            upper_gap,
            lower_gap,
            upper_gap_rel,
            lower_gap_rel,
        })
    }

    pub(crate) fn f_unchecked(&self, t: f64) -> f64 {
        match &self.kind {
            Kind::Power { q } => t.powf(*q),
            Kind::Exp => t.exp(),
            Kind::Custom(c) => c.f(t),
        }
    }

    /// `√f(t)`, evaluated without forming `f(t)` so it stays finite longer.
    fn sqrt_f_unchecked(&self, t: f64) -> f64 {
        match &self.kind {
            Kind::Power { q } => t.powf(0.5 * q),
            Kind::Exp => (0.5 * t).exp(),
            Kind::Custom(c) => c.f(t).sqrt(),
        }
    }

    pub(crate) fn antiderivative_unchecked(&self, s: f64) -> f64 {
        match &self.kind {
            Kind::Power { q } => s.powf(q + 1.0) / (q + 1.0),
            Kind::Exp => s.exp_m1(),
            Kind::Custom(c) => c.antiderivative(s),
        }
    }

    pub(crate) fn double_integral_unchecked(&self, s: f64) -> f64 {
        match &self.kind {
            Kind::Power { q } => s.powf(q + 2.0) / ((q + 1.0) * (q + 2.0)),
            Kind::Exp => {
                if s < 0.5 {
                    exp_remainder_series(s)
                } else {
                    s.exp_m1() - s
                }
            }
            Kind::Custom(c) => c.double_integral(s),
        }
    }

    /// Log-log slope used to continue a custom table; `None` when the final
    /// segment does not define one (e.g. `f` vanishes at the previous knot).
    pub fn tail_exponent(&self) -> Option<f64> {
        match &self.kind {
            Kind::Power { q } => Some(*q),
            Kind::Exp => None,
            Kind::Custom(c) => c.tail_exponent,
        }
    }
}

fn check_arg(x: f64, what: &str) -> Result<()> {
    if x.is_nan() || x < 0.0 {
        return domain(format!("{what} evaluated at negative argument {x}"));
    }
    Ok(())
}

/// `e^s − 1 − s` without cancellation for small `s`.
fn exp_remainder_series(s: f64) -> f64 {
    let mut term = s * s / 2.0;
    let mut sum = term;
    for k in 3..40 {
        term *= s / k as f64;
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    sum
}

/// `e^a − e^b` and its value relative to `max(e^a, e^b)`.
fn log_difference(a: f64, b: f64) -> (f64, f64) {
    if a >= b {
        let rel = -(b - a).exp_m1();
        (a.exp() * rel, rel)
    } else {
        let rel = (a - b).exp_m1();
        (b.exp() * rel, rel)
    }
}

impl SampledF {
    fn new(t: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        let n = t.len();
        if n != f.len() {
            return Err(Error::Table("t and f have different lengths".into()));
        }
        if n < 2 {
            return Err(Error::Table("at least two samples are required".into()));
        }
        if t[0] != 0.0 {
            return Err(Error::Table(format!("first abscissa must be 0, got {}", t[0])));
        }
        if t.iter().chain(f.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Table("non-finite sample".into()));
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Table("abscissae must be strictly increasing".into()));
        }
        if f.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Table("f must be nondecreasing".into()));
        }
        if f[0] < 0.0 || f[1..].iter().any(|&v| v <= 0.0) {
            return Err(Error::Table("f must be positive for t > 0".into()));
        }

        let slope = pchip_slopes(&t, &f);
        let mut cum_f = vec![0.0; n];
        let mut cum_ff = vec![0.0; n];
        let mut me = Self {
            t,
            f,
            slope,
            cum_f: Vec::new(),
            cum_ff: Vec::new(),
            tail_exponent: None,
        };
        for i in 0..n - 1 {
            let h = me.t[i + 1] - me.t[i];
            cum_f[i + 1] =
                cum_f[i] + h * (me.f[i] + me.f[i + 1]) / 2.0 + h * h * (me.slope[i] - me.slope[i + 1]) / 12.0;
        }
        me.cum_f = cum_f;
        for i in 0..n - 1 {
            let (a, b) = (me.t[i], me.t[i + 1]);
            cum_ff[i + 1] = cum_ff[i] + gauss_legendre5(|y| me.antiderivative_in_piece(i, y), a, b);
        }
        me.cum_ff = cum_ff;
        let (t0, t1) = (me.t[n - 2], me.t[n - 1]);
        let (f0, f1) = (me.f[n - 2], me.f[n - 1]);
        if t0 > 0.0 && f0 > 0.0 {
            me.tail_exponent = Some((f1 / f0).ln() / (t1 / t0).ln());
        }
        Ok(me)
    }

    fn last(&self) -> usize {
        self.t.len() - 1
    }

    fn piece(&self, x: f64) -> usize {
        match self.t.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(self.last() - 1),
            Err(i) => i.saturating_sub(1).min(self.last() - 1),
        }
    }

    fn hermite(&self, i: usize, x: f64) -> f64 {
        let h = self.t[i + 1] - self.t[i];
        let s = (x - self.t[i]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * self.f[i]
            + (s3 - 2.0 * s2 + s) * h * self.slope[i]
            + (-2.0 * s3 + 3.0 * s2) * self.f[i + 1]
            + (s3 - s2) * h * self.slope[i + 1]
    }

    /// `F(x)` for `x` inside piece `i`; Simpson is exact on the cubic.
    fn antiderivative_in_piece(&self, i: usize, x: f64) -> f64 {
        let a = self.t[i];
        let m = 0.5 * (a + x);
        self.cum_f[i] + (x - a) / 6.0 * (self.f[i] + 4.0 * self.hermite(i, m) + self.hermite(i, x))
    }

    fn tail_k(&self) -> f64 {
        self.tail_exponent.unwrap_or(0.0)
    }

    fn f(&self, x: f64) -> f64 {
        let n = self.last();
        if x >= self.t[n] {
            return self.f[n] * (x / self.t[n]).powf(self.tail_k());
        }
        self.hermite(self.piece(x), x)
    }

    fn antiderivative(&self, x: f64) -> f64 {
        let n = self.last();
        let tn = self.t[n];
        if x >= tn {
            let k = self.tail_k();
            return self.cum_f[n] + self.f[n] * tn / (k + 1.0) * ((x / tn).powf(k + 1.0) - 1.0);
        }
        self.antiderivative_in_piece(self.piece(x), x)
    }

    fn double_integral(&self, x: f64) -> f64 {
        let n = self.last();
        let tn = self.t[n];
        if x >= tn {
            let k = self.tail_k();
            let d = x - tn;
            let tail = self.f[n] * tn / (k + 1.0) * (tn / (k + 2.0) * ((x / tn).powf(k + 2.0) - 1.0) - d);
            return self.cum_ff[n] + self.cum_f[n] * d + tail;
        }
        let i = self.piece(x);
        self.cum_ff[i] + gauss_legendre5(|y| self.antiderivative_in_piece(i, y), self.t[i], x)
    }
}

/// Shape-preserving derivative estimates at the knots.
fn pchip_slopes(t: &[f64], f: &[f64]) -> Vec<f64> {
    let n = t.len();
    let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (f[i + 1] - f[i]) / h[i]).collect();
    if n == 2 {
        return vec![delta[0]; 2];
    }
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let (d0, d1) = (delta[i - 1], delta[i]);
        if d0 * d1 > 0.0 {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / d0 + w2 / d1);
        }
    }
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() || d0 == 0.0 {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn power_values() {
        let nl = Nonlinearity::power(3.0).unwrap();
        assert_eq!(nl.eval_f(2.0).unwrap(), 8.0);
        assert_eq!(nl.eval_f(0.0).unwrap(), 0.0);
        assert_eq!(nl.eval_antiderivative(1.0).unwrap(), 0.25);
        assert!(close(nl.eval_double_integral(1.0).unwrap(), 0.05, 1e-15));
        let lin = Nonlinearity::power(1.0).unwrap();
        assert_eq!(lin.eval_antiderivative(2.0).unwrap(), 2.0);
        assert!(close(lin.eval_double_integral(2.0).unwrap(), 8.0 / 6.0, 1e-15));
    }

    #[test]
    fn exp_values() {
        let nl = Nonlinearity::exp();
        assert_eq!(nl.eval_f(0.0).unwrap(), 1.0);
        assert!(close(
            nl.eval_antiderivative(1.0).unwrap(),
            std::f64::consts::E - 1.0,
            1e-15
        ));
        assert_eq!(nl.eval_double_integral(0.0).unwrap(), 0.0);
        // both branches of the remainder agree at the switch point
        let s = 0.5;
        assert!(close(exp_remainder_series(s), s.exp_m1() - s, 1e-14));
        assert!(close(
            nl.ln_double_integral(3.0).unwrap(),
            (3f64.exp() - 4.0).ln(),
            1e-14
        ));
    }

    #[test]
    fn negative_argument_is_domain_error() {
        let nl = Nonlinearity::exp();
        assert!(matches!(nl.eval_f(-1.0), Err(Error::Domain(_))));
        assert!(matches!(nl.eval_antiderivative(-1e-9), Err(Error::Domain(_))));
        assert!(matches!(nl.eval_double_integral(-2.0), Err(Error::Domain(_))));
        assert!(matches!(nl.gap_functions(-2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn invalid_power() {
        assert!(Nonlinearity::power(0.0).is_err());
        assert!(Nonlinearity::power(f64::NAN).is_err());
    }

    #[test]
    fn gap_functions_linear_f() {
        let nl = Nonlinearity::power(1.0).unwrap();
        let g = nl.gap_functions(1.0).unwrap();
        assert!((g.upper_gap + 1.0 / 9.0).abs() < 1e-10, "{g:?}");
        assert!((g.lower_gap - 8.0 / 9.0).abs() < 1e-10, "{g:?}");
        let z = nl.gap_functions(0.0).unwrap();
        assert_eq!((z.upper_gap, z.lower_gap), (0.0, 0.0));
    }

    #[test]
    fn gap_functions_keep_sign_past_overflow() {
        let g = Nonlinearity::exp().gap_functions(1000.0).unwrap();
        assert!(g.upper_gap < 0.0 && g.lower_gap > 0.0);
        assert!(g.upper_gap_rel < 0.0 && g.lower_gap_rel > 0.0);
    }

    #[test]
    fn custom_table_reproduces_linear_f() {
        let t: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        let nl = Nonlinearity::from_samples(t.clone(), t).unwrap();
        for s in [0.3, 2.5, 9.9, 10.0, 40.0] {
            assert!(close(nl.eval_f(s).unwrap(), s, 1e-12), "f({s})");
            assert!(close(nl.eval_antiderivative(s).unwrap(), s * s / 2.0, 1e-12), "F({s})");
            assert!(
                close(nl.eval_double_integral(s).unwrap(), s.powi(3) / 6.0, 1e-12),
                "FF({s})"
            );
        }
        assert!(close(nl.tail_exponent().unwrap(), 1.0, 1e-12));
    }

    #[test]
    fn custom_table_rejects_bad_input() {
        assert!(Nonlinearity::from_samples(vec![0.0], vec![0.0]).is_err());
        assert!(Nonlinearity::from_samples(vec![0.5, 1.0], vec![1.0, 2.0]).is_err());
        assert!(Nonlinearity::from_samples(vec![0.0, 1.0, 1.0], vec![0.0, 1.0, 2.0]).is_err());
        assert!(Nonlinearity::from_samples(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 1.0]).is_err());
        assert!(Nonlinearity::from_samples(vec![0.0, 1.0], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn csv_reader() {
        let data = "t,f\n0,0\n1,1\n2,4\n3,9\n";
        let nl = Nonlinearity::from_csv_reader(data.as_bytes()).unwrap();
        assert!(nl.eval_f(1.5).unwrap() > 1.0 && nl.eval_f(1.5).unwrap() < 4.0);
        assert!(Nonlinearity::from_csv_reader("x,y\n0,0\n1,1\n".as_bytes()).is_err());
        assert!(Nonlinearity::from_csv_reader("t,f\n0,0\n1,abc\n".as_bytes()).is_err());
    }
}

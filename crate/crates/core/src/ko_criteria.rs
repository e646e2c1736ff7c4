//! Integral tests deciding which boundary behaviours positive radial
//! solutions can have.
//!
//! With `e = p/(2p+1)` the two quantities of interest are
//!
//! ```text
//! plain    = ∫₁^∞ ds   / (∫₀ˢ F)^e
//! weighted = ∫₁^∞ s ds / (∫₀ˢ F)^e
//! ```
//!
//! For `f(t) = t^q` the integrand decays like `s^(−σ)` with
//! `σ = (q+2)p/(2p+1)`; the plain integral converges iff `σ > 1` and the
//! weighted one iff `σ > 2`. Borderline exponents diverge. For `f = e^t` both
//! converge for every `p > 0`. Custom tables are decided by a log-log tail fit.

use std::fmt;

use serde::Serialize;

use crate::error::{param, Result};
use crate::fit::linear_fit;
use crate::nonlinearity::{Kind, Nonlinearity};

/// Tail-fit window for sampled nonlinearities.
pub const TAIL_WINDOW: (f64, f64) = (1e3, 1e6);
/// Dead band around the critical slope of the tail fit.
pub const TAIL_DELTA: f64 = 0.05;
/// Minimum number of decades past the table end over which the extrapolated
/// integrand has to stay finite before a numeric verdict is issued.
pub const MIN_TAIL_DECADES: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConvergenceVerdict {
    Convergent,
    Divergent,
    Indeterminate,
}

impl fmt::Display for ConvergenceVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Convergent => "convergent",
            Self::Divergent => "divergent",
            Self::Indeterminate => "indeterminate",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    TailExponent,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ClosedForm => "closed_form",
            Self::TailExponent => "tail_exponent",
        })
    }
}

/// Evidence behind a classification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KoReport {
    pub plain: ConvergenceVerdict,
    pub weighted: ConvergenceVerdict,
    pub method: Method,
    /// Decay exponent σ of the plain integrand (`+∞` for exponential `f`).
    pub tail_exponent: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Every positive radial solution in a ball is bounded.
    Bounded,
    /// Solutions with bounded `u` and `v → ∞` at the boundary exist.
    VBlowsUp,
    /// Solutions with both `u, v → ∞` at the boundary exist.
    BothBlowUp,
    /// Positive radial solutions exist on all of ℝᴺ.
    GlobalOnRn,
    /// Every positive radial solution blows up at a finite radius.
    FiniteRadius,
    Indeterminate,
}

impl Verdict {
    /// Region letter of the (p, q) diagram: A bounded, B v-only, C both.
    pub fn region(self) -> Option<char> {
        match self {
            Self::Bounded => Some('A'),
            Self::VBlowsUp => Some('B'),
            Self::BothBlowUp => Some('C'),
            _ => None,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Bounded => "bounded",
            Self::VBlowsUp => "v_blows_up",
            Self::BothBlowUp => "both_blow_up",
            Self::GlobalOnRn => "global_on_rn",
            Self::FiniteRadius => "finite_radius",
            Self::Indeterminate => "indeterminate",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub verdict: Verdict,
    pub evidence: KoReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BiharmonicVerdict {
    BlowUpExists,
    NoBlowUp,
    Indeterminate,
}

fn check_p(p: f64) -> Result<()> {
    if !(p.is_finite() && p > 0.0) {
        return param(format!("p must be positive, got {p}"));
    }
    Ok(())
}

fn exponent(p: f64) -> f64 {
    p / (2.0 * p + 1.0)
}

/// Verdict from a tail slope `k` of an integrand `~ s^k`.
fn slope_verdict(k: f64) -> ConvergenceVerdict {
    if !k.is_finite() {
        ConvergenceVerdict::Indeterminate
    } else if k < -(1.0 + TAIL_DELTA) {
        ConvergenceVerdict::Convergent
    } else if k > -(1.0 - TAIL_DELTA) {
        ConvergenceVerdict::Divergent
    } else {
        ConvergenceVerdict::Indeterminate
    }
}

/// Least-squares slope of `ln integrand` against `ln s` over the tail window.
///
/// `ln_denominator(s)` must return `ln` of the quantity raised to `power` in
/// the denominator. Returns `None` when any sample is non-finite.
pub fn tail_slope<G: Fn(f64) -> f64>(ln_denominator: G, power: f64) -> Option<f64> {
    let (lo, hi) = TAIL_WINDOW;
    let n = 31;
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for i in 0..n {
        let ln_s = lo.ln() + (hi / lo).ln() * i as f64 / (n - 1) as f64;
        let y = -power * ln_denominator(ln_s.exp());
        if !y.is_finite() {
            return None;
        }
        xs.push(ln_s);
        ys.push(y);
    }
    linear_fit(&xs, &ys, None).ok().map(|l| l.slope)
}

/// Whether the extrapolated tail of a custom table stays usable for
/// `MIN_TAIL_DECADES` decades past its last knot.
fn tail_usable(nl: &Nonlinearity) -> bool {
    let Kind::Custom(_) = nl.kind() else { return true };
    if nl.tail_exponent().is_none() {
        return false;
    }
    let (_, hi) = TAIL_WINDOW;
    let probe = hi.max(1.0) * 10f64.powf(MIN_TAIL_DECADES);
    nl.ln_double_integral(probe).map(|v| v.is_finite()).unwrap_or(false)
        && nl.ln_double_integral(hi).map(|v| v.is_finite()).unwrap_or(false)
}

fn numeric_report(nl: &Nonlinearity, p: f64) -> KoReport {
    let e = exponent(p);
    let slope = if tail_usable(nl) {
        tail_slope(|s| nl.ln_double_integral(s).unwrap_or(f64::NAN), e)
    } else {
        None
    };
    match slope {
        Some(k) => KoReport {
            plain: slope_verdict(k),
            weighted: slope_verdict(k + 1.0),
            method: Method::TailExponent,
            tail_exponent: -k,
        },
        None => KoReport {
            plain: ConvergenceVerdict::Indeterminate,
            weighted: ConvergenceVerdict::Indeterminate,
            method: Method::TailExponent,
            tail_exponent: f64::NAN,
        },
    }
}

/// Full evidence for `(nl, p)`: closed form for built-ins, tail fit otherwise.
pub fn ko_report(nl: &Nonlinearity, p: f64) -> Result<KoReport> {
    check_p(p)?;
    Ok(match nl.kind() {
        Kind::Power { q } => {
            let sigma = (q + 2.0) * exponent(p);
            let verdict = |critical: f64| {
                if sigma > critical {
                    ConvergenceVerdict::Convergent
                } else {
                    ConvergenceVerdict::Divergent
                }
            };
            KoReport {
                plain: verdict(1.0),
                weighted: verdict(2.0),
                method: Method::ClosedForm,
                tail_exponent: sigma,
            }
        }
        Kind::Exp => KoReport {
            plain: ConvergenceVerdict::Convergent,
            weighted: ConvergenceVerdict::Convergent,
            method: Method::ClosedForm,
            tail_exponent: f64::INFINITY,
        },
        Kind::Custom(_) => numeric_report(nl, p),
    })
}

/// Forces the numeric tail test, regardless of the family of `nl`.
pub fn ko_report_numeric(nl: &Nonlinearity, p: f64) -> Result<KoReport> {
    check_p(p)?;
    Ok(numeric_report(nl, p))
}

/// Convergence of `∫₁^∞ ds / (∫₀ˢ F)^(p/(2p+1))`.
pub fn ko_plain(nl: &Nonlinearity, p: f64) -> Result<ConvergenceVerdict> {
    Ok(ko_report(nl, p)?.plain)
}

/// Convergence of `∫₁^∞ s ds / (∫₀ˢ F)^(p/(2p+1))`.
pub fn ko_weighted(nl: &Nonlinearity, p: f64) -> Result<ConvergenceVerdict> {
    Ok(ko_report(nl, p)?.weighted)
}

/// Plain test with `(∫₀ˢ F)^(p/(2p+1))` replaced by `(∫₀ˢ √f)^(2p/(2p+1))`,
/// decided numerically by the tail fit.
pub fn ko_plain_sqrt_form(nl: &Nonlinearity, p: f64) -> Result<ConvergenceVerdict> {
    check_p(p)?;
    let power = 2.0 * exponent(p);
    Ok(tail_slope(|s| nl.ln_sqrt_integral(s).unwrap_or(f64::NAN), power)
        .map(slope_verdict)
        .unwrap_or(ConvergenceVerdict::Indeterminate))
}

fn verdict_from(report: &KoReport) -> Verdict {
    use ConvergenceVerdict::*;
    match (report.plain, report.weighted) {
        (Divergent, _) => Verdict::Bounded,
        (_, Convergent) => Verdict::VBlowsUp,
        (Convergent, Divergent) => Verdict::BothBlowUp,
        _ => Verdict::Indeterminate,
    }
}

/// Which boundary behaviours radial solutions in a ball admit.
pub fn classify_ball(nl: &Nonlinearity, p: f64) -> Result<Classification> {
    let evidence = ko_report(nl, p)?;
    Ok(Classification {
        verdict: verdict_from(&evidence),
        evidence,
    })
}

/// Whether positive radial solutions exist on all of ℝᴺ.
pub fn classify_whole_space(nl: &Nonlinearity, p: f64) -> Result<Classification> {
    let evidence = ko_report(nl, p)?;
    let verdict = match evidence.plain {
        ConvergenceVerdict::Divergent => Verdict::GlobalOnRn,
        ConvergenceVerdict::Convergent => Verdict::FiniteRadius,
        ConvergenceVerdict::Indeterminate => Verdict::Indeterminate,
    };
    Ok(Classification { verdict, evidence })
}

/// `Δ²u = f(|∇u|)` in a ball has blow-up radial solutions iff the `p = 1`
/// classification is `BothBlowUp`.
pub fn classify_biharmonic(nl: &Nonlinearity) -> Result<BiharmonicVerdict> {
    Ok(match classify_ball(nl, 1.0)?.verdict {
        Verdict::BothBlowUp => BiharmonicVerdict::BlowUpExists,
        Verdict::Indeterminate => BiharmonicVerdict::Indeterminate,
        _ => BiharmonicVerdict::NoBlowUp,
    })
}

/// Closed-form region boundaries of the power family: `q = 1/p` and
/// `q = 2(1 + 1/p)`.
pub fn power_region_boundaries(p: f64) -> (f64, f64) {
    (1.0 / p, 2.0 * (1.0 + 1.0 / p))
}

/// Euclidean distance in the (p, q) plane from a point to the nearest region
/// boundary curve, sampled densely in `p`.
pub fn distance_to_region_boundary(p: f64, q: f64) -> f64 {
    let mut best = f64::INFINITY;
    let n = 20_000;
    for i in 1..=n {
        let pp = 10.0 * i as f64 / n as f64;
        let (b1, b2) = power_region_boundaries(pp);
        for b in [b1, b2] {
            let d = ((pp - p).powi(2) + (b - q).powi(2)).sqrt();
            best = best.min(d);
        }
    }
    best
}

/// JSON-ready row of a classification.
#[derive(Debug, Clone, Serialize)]
pub struct KoJson {
    pub p: f64,
    pub q: Option<f64>,
    pub plain: ConvergenceVerdict,
    pub weighted: ConvergenceVerdict,
    pub verdict: Verdict,
    pub method: Method,
    pub tail_exponent: serde_json_number::Number,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<&'static str>,
}

/// For exponential `f` the verdict says which boundary behaviour is achievable,
/// not how every solution behaves.
pub const EXP_VERDICT_NOTE: &str = "verdict describes the achievable boundary behaviour; \
                                    a solution whose blow-up radius exceeds the ball stays bounded in it";

impl KoJson {
    pub fn new(nl: &Nonlinearity, p: f64, c: &Classification) -> Self {
        Self {
            p,
            q: nl.power_exponent(),
            plain: c.evidence.plain,
            weighted: c.evidence.weighted,
            verdict: c.verdict,
            method: c.evidence.method,
            tail_exponent: serde_json_number::Number(c.evidence.tail_exponent),
            note: matches!(nl.kind(), Kind::Exp).then_some(EXP_VERDICT_NOTE),
        }
    }
}

pub mod serde_json_number {
    //! Serializes non-finite floats as the strings `"inf"`, `"-inf"`, `"nan"`.
    use serde::{Serialize, Serializer};

    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct Number(pub f64);

    impl Serialize for Number {
        fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
            let x = self.0;
            if x.is_finite() {
                s.serialize_f64(x)
            } else if x.is_nan() {
                s.serialize_str("nan")
            } else if x > 0.0 {
                s.serialize_str("inf")
            } else {
                s.serialize_str("-inf")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ConvergenceVerdict::*;

    fn pw(q: f64) -> Nonlinearity {
        Nonlinearity::power(q).unwrap()
    }

    #[test]
    fn plain_examples() {
        assert_eq!(ko_plain(&pw(3.0), 2.0).unwrap(), Convergent);
        assert_eq!(ko_plain(&pw(1.0), 1.0).unwrap(), Divergent);
        assert_eq!(ko_plain(&Nonlinearity::exp(), 5.0).unwrap(), Convergent);
    }

    #[test]
    fn weighted_examples() {
        assert_eq!(ko_weighted(&pw(3.0), 4.0).unwrap(), Convergent);
        assert_eq!(ko_weighted(&pw(3.0), 2.0).unwrap(), Divergent);
        assert_eq!(ko_weighted(&pw(1.0), 0.5).unwrap(), Divergent);
    }

    #[test]
    fn ball_examples() {
        assert_eq!(classify_ball(&pw(3.0), 4.0).unwrap().verdict, Verdict::VBlowsUp);
        assert_eq!(classify_ball(&pw(3.0), 2.0).unwrap().verdict, Verdict::BothBlowUp);
        assert_eq!(classify_ball(&pw(1.0), 1.0).unwrap().verdict, Verdict::Bounded);
    }

    #[test]
    fn whole_space_examples() {
        assert_eq!(
            classify_whole_space(&pw(1.0), 0.5).unwrap().verdict,
            Verdict::GlobalOnRn
        );
        assert_eq!(
            classify_whole_space(&pw(3.0), 2.0).unwrap().verdict,
            Verdict::FiniteRadius
        );
        assert_eq!(
            classify_whole_space(&Nonlinearity::exp(), 1.0).unwrap().verdict,
            Verdict::FiniteRadius
        );
    }

    #[test]
    fn biharmonic_examples() {
        assert_eq!(classify_biharmonic(&pw(3.0)).unwrap(), BiharmonicVerdict::BlowUpExists);
        assert_eq!(classify_biharmonic(&pw(5.0)).unwrap(), BiharmonicVerdict::NoBlowUp);
        assert_eq!(classify_biharmonic(&pw(0.5)).unwrap(), BiharmonicVerdict::NoBlowUp);
    }

    #[test]
    fn closed_form_exponent_is_reported() {
        let r = ko_report(&pw(3.0), 2.0).unwrap();
        assert_eq!(r.method, Method::ClosedForm);
        assert!((r.tail_exponent - 2.0).abs() < 1e-15);
        assert!(ko_report(&Nonlinearity::exp(), 1.0)
            .unwrap()
            .tail_exponent
            .is_infinite());
    }

    #[test]
    fn invalid_p() {
        assert!(ko_plain(&pw(1.0), 0.0).is_err());
        assert!(ko_weighted(&pw(1.0), -1.0).is_err());
    }

    #[test]
    fn numeric_tail_matches_closed_form_off_critical() {
        for (q, p) in [(3.0, 2.0), (1.0, 0.5), (5.0, 4.0), (1.5, 1.0)] {
            let nl = pw(q);
            let closed = ko_report(&nl, p).unwrap();
            let num = ko_report_numeric(&nl, p).unwrap();
            assert!((num.tail_exponent - closed.tail_exponent).abs() < 1e-6);
            assert_eq!(num.plain, closed.plain, "q={q} p={p}");
        }
    }

    #[test]
    fn numeric_tail_is_honest_at_the_critical_exponent() {
        // σ = 1 exactly: inside the dead band
        let num = ko_report_numeric(&pw(1.0), 1.0).unwrap();
        assert_eq!(num.plain, Indeterminate);
    }

    #[test]
    fn custom_table_with_flat_tail_is_indeterminate() {
        // f vanishes at the penultimate knot: no tail slope can be formed
        let nl = Nonlinearity::from_samples(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        let r = ko_report(&nl, 1.0).unwrap();
        assert_eq!(r.plain, Indeterminate);
        assert_eq!(classify_ball(&nl, 1.0).unwrap().verdict, Verdict::Indeterminate);
    }

    #[test]
    fn custom_power_table() {
        let t: Vec<f64> = (0..=200).map(|i| i as f64 * 0.05).collect();
        let f: Vec<f64> = t.iter().map(|x| x.powi(3)).collect();
        let nl = Nonlinearity::from_samples(t, f).unwrap();
        let c = classify_ball(&nl, 4.0).unwrap();
        assert_eq!(c.evidence.method, Method::TailExponent);
        assert_eq!(c.verdict, Verdict::VBlowsUp);
        assert_eq!(classify_ball(&nl, 2.0).unwrap().verdict, Verdict::Indeterminate);
        assert_eq!(classify_ball(&nl, 1.0).unwrap().verdict, Verdict::BothBlowUp);
    }

    #[test]
    fn region_letters() {
        assert_eq!(Verdict::Bounded.region(), Some('A'));
        assert_eq!(Verdict::VBlowsUp.region(), Some('B'));
        assert_eq!(Verdict::BothBlowUp.region(), Some('C'));
        assert_eq!(Verdict::GlobalOnRn.region(), None);
    }

    #[test]
    fn json_schema() {
        let nl = pw(3.0);
        let c = classify_ball(&nl, 4.0).unwrap();
        let v = serde_json::to_value(KoJson::new(&nl, 4.0, &c)).unwrap();
        assert_eq!(v["plain"], "convergent");
        assert_eq!(v["verdict"], "v_blows_up");
        assert_eq!(v["method"], "closed_form");
        let e = Nonlinearity::exp();
        let c = classify_ball(&e, 1.0).unwrap();
        let v = serde_json::to_value(KoJson::new(&e, 1.0, &c)).unwrap();
        assert_eq!(v["tail_exponent"], "inf");
        assert!(v["q"].is_null());
    }
}

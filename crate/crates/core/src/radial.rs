//! Radial shooting for `Δu = v^p`, `Δv = f(|∇u|)`.
//!
//! With `w = u'` and `ψ = v'` a radial solution solves
//!
//! ```text
//! u' = w,  w' = v^p − (N−1)w/r,  v' = ψ,  ψ' = f(w) − (N−1)ψ/r
//! ```
//!
//! with `w(0) = ψ(0) = 0`, `v(0) = m`. The origin is skipped with a short
//! series start; blow-up is detected from the local behaviour of `v/v'`,
//! which tends linearly to zero at a finite blow-up radius and grows linearly
//! under polynomial growth.

use std::fmt;
use std::io::Write;

use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::fit::{golden_section, linear_fit};
use crate::nonlinearity::{Kind, Nonlinearity};
use crate::ode::{Dopri5, StepFailure};
use crate::quadrature::gauss_legendre5_composite;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Ball { radius: f64 },
    WholeSpace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub p: f64,
    pub nl: Nonlinearity,
    pub n: usize,
    /// Shooting value `v(0)`.
    pub m: f64,
    /// `u(0)`; only shifts `u`.
    pub u0: f64,
    pub domain: Domain,
}

impl Params {
    pub fn new(p: f64, nl: Nonlinearity, n: usize, m: f64, domain: Domain) -> Result<Self> {
        let params = Self {
            p,
            nl,
            n,
            m,
            u0: 1.0,
            domain,
        };
        params.validate()?;
        Ok(params)
    }

    /// Power nonlinearity `f(t) = t^q` on the whole space.
    pub fn power(p: f64, q: f64, n: usize, m: f64) -> Result<Self> {
        Self::new(p, Nonlinearity::power(q)?, n, m, Domain::WholeSpace)
    }

    pub fn with_u0(mut self, u0: f64) -> Self {
        self.u0 = u0;
        self
    }

    pub fn with_m(mut self, m: f64) -> Self {
        self.m = m;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p.is_finite() && self.p > 0.0) {
            return param(format!("p must be positive, got {}", self.p));
        }
        if self.n < 2 {
            return param(format!("N must be at least 2, got {}", self.n));
        }
        if !(self.m.is_finite() && self.m > 0.0) {
            return param(format!("m must be positive, got {}", self.m));
        }
        if !self.u0.is_finite() {
            return param("u0 must be finite");
        }
        if let Domain::Ball { radius } = self.domain {
            if !(radius.is_finite() && radius > 0.0) {
                return param(format!("ball radius must be positive, got {radius}"));
            }
        }
        Ok(())
    }

    pub fn q(&self) -> Option<f64> {
        self.nl.power_exponent()
    }

    fn rhs(&self, r: f64, y: &[f64; 4]) -> [f64; 4] {
        let nm1 = (self.n - 1) as f64;
        [
            y[1],
            signed_pow(y[2], self.p) - nm1 * y[1] / r,
            y[3],
            self.nl.f_unchecked(y[1].max(0.0)) - nm1 * y[3] / r,
        ]
    }
}

/// `x|x|^(p−1)`, the odd extension of `x^p`.
pub(crate) fn signed_pow(x: f64, p: f64) -> f64 {
    x.abs().powf(p).copysign(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControls {
    pub rtol: f64,
    pub atol: f64,
    /// `v` level at which blow-up is first tested for.
    pub v_ceiling: f64,
    /// Start radius; defaults to `1e-6` times the length scale.
    pub r0: Option<f64>,
    /// Whole-space horizon.
    pub r_stop: f64,
    pub max_steps: usize,
    /// After blow-up has been recognised, keep integrating until the
    /// estimated relative distance to the blow-up radius drops below this.
    pub gap_target: Option<f64>,
}

impl Default for StepControls {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            v_ceiling: 1e8,
            r0: None,
            r_stop: 1e6,
            max_steps: 2_000_000,
            gap_target: None,
        }
    }
}

impl StepControls {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.rtol < 1.0 && self.atol > 0.0) {
            return param("tolerances must satisfy 0 < rtol < 1 and atol > 0");
        }
        if !(self.v_ceiling.is_finite() && self.v_ceiling > 1.0) {
            return param("v_ceiling must be finite and > 1");
        }
        if !(self.r_stop.is_finite() && self.r_stop > 0.0) {
            return param("r_stop must be positive");
        }
        if let Some(r0) = self.r0 {
            if !(r0 > 0.0) {
                return param("r0 must be positive");
            }
        }
        Ok(())
    }
}

/// One accepted step. `h` is the step that produced the sample (0 for the
/// first one); `dw`, `dpsi` are the right-hand side at the sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub r: f64,
    pub u: f64,
    pub w: f64,
    pub v: f64,
    pub psi: f64,
    pub dw: f64,
    pub dpsi: f64,
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    ReachedRadius,
    BlowUp { r_max: f64 },
    GlobalHorizon { r_stop: f64 },
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ReachedRadius => "reached_radius",
            Self::BlowUp { .. } => "blow_up",
            Self::GlobalHorizon { .. } => "global_horizon",
        })
    }
}

/// Result of fitting `v ≈ B (R_max − r)^(−β)` to the terminal samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlowupFit {
    pub r_max: f64,
    /// `R_max` minus the radius of the last sample.
    pub remaining: f64,
    pub beta: f64,
    pub coefficient: f64,
    pub samples_used: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialSolution {
    pub samples: Vec<Sample>,
    pub termination: Termination,
    pub u0: f64,
    pub fit: Option<BlowupFit>,
}

/// JSON sidecar of a solution.
#[derive(Debug, Clone, Serialize)]
pub struct SolutionMeta {
    pub termination: String,
    #[serde(rename = "R_max")]
    pub r_max: Option<f64>,
    pub fit_beta: Option<f64>,
    pub r_end: f64,
    pub samples: usize,
}

impl RadialSolution {
    /// Builds a solution from externally produced samples; `h` is recomputed
    /// from consecutive radii.
    pub fn from_samples(mut samples: Vec<Sample>, termination: Termination, u0: f64) -> Result<Self> {
        if samples.is_empty() {
            return param("no samples");
        }
        for i in 0..samples.len() {
            if i > 0 && !(samples[i].r > samples[i - 1].r) {
                return param("radii must be strictly increasing");
            }
            samples[i].h = if i == 0 { 0.0 } else { samples[i].r - samples[i - 1].r };
        }
        Ok(Self {
            samples,
            termination,
            u0,
            fit: None,
        })
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("solutions are never empty")
    }

    pub fn r_max(&self) -> Option<f64> {
        match self.termination {
            Termination::BlowUp { r_max } => Some(r_max),
            _ => None,
        }
    }

    /// Distance of every sample to the last one, summed from the step sizes
    /// so that it stays accurate where `r` itself no longer resolves it.
    pub fn gaps(&self) -> Vec<f64> {
        let n = self.samples.len();
        let mut g = vec![0.0; n];
        for i in (0..n.saturating_sub(1)).rev() {
            g[i] = g[i + 1] + self.samples[i + 1].h;
        }
        g
    }

    /// Distance of every sample to the blow-up radius of `fit`.
    pub fn distances_to_blowup(&self, fit: &BlowupFit) -> Vec<f64> {
        self.gaps().into_iter().map(|g| g + fit.remaining).collect()
    }

    /// Index of the first sample of the last `decades` decades of `v`.
    pub fn terminal_window_start(&self, decades: f64) -> usize {
        let v_end = self.last().v;
        let level = v_end / 10f64.powf(decades);
        let mut i = self.samples.len() - 1;
        while i > 0 && self.samples[i - 1].v >= level {
            i -= 1;
        }
        i
    }

    /// Cubic Hermite interpolation of `(u, w, v, ψ)` at `r`.
    pub fn interpolate(&self, r: f64) -> Option<[f64; 4]> {
        let s = &self.samples;
        if s.is_empty() || r < s[0].r || r > s[s.len() - 1].r {
            return None;
        }
        let j = s.partition_point(|x| x.r < r);
        if j == 0 {
            return Some([s[0].u, s[0].w, s[0].v, s[0].psi]);
        }
        let (a, b) = (&s[j - 1], &s[j]);
        let h = b.r - a.r;
        let t = (r - a.r) / h;
        let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
        let h10 = t * (1.0 - t) * (1.0 - t);
        let h01 = t * t * (3.0 - 2.0 * t);
        let h11 = t * t * (t - 1.0);
        let herm = |y0: f64, d0: f64, y1: f64, d1: f64| h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
        Some([
            herm(a.u, a.w, b.u, b.w),
            herm(a.w, a.dw, b.w, b.dw),
            herm(a.v, a.psi, b.v, b.psi),
            herm(a.psi, a.dpsi, b.psi, b.dpsi),
        ])
    }

    pub fn meta(&self) -> SolutionMeta {
        SolutionMeta {
            termination: self.termination.to_string(),
            r_max: self.r_max(),
            fit_beta: self.fit.map(|f| f.beta),
            r_end: self.last().r,
            samples: self.samples.len(),
        }
    }

    /// Writes `r,u,w,v,psi` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["r", "u", "w", "v", "psi"])?;
        for s in &self.samples {
            w.write_record([s.r, s.u, s.w, s.v, s.psi].map(|x| format!("{x:.16e}")))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Checks `v^p/N ≤ w' ≤ v^p` and `f(w)/N ≤ ψ' ≤ f(w)` at every sample,
    /// with `w'` and `ψ'` the right-hand side of the system. `rel_tol` is
    /// measured against `v^p` and `f(w)` respectively.
    pub fn sandwich_check(&self, params: &Params, rel_tol: f64) -> SandwichReport {
        let n = params.n as f64;
        let mut violations = Vec::new();
        for s in &self.samples {
            let vp = signed_pow(s.v, params.p);
            let fw = params.nl.f_unchecked(s.w.max(0.0));
            for (which, d, top) in [("w'", s.dw, vp), ("psi'", s.dpsi, fw)] {
                let slack = rel_tol * top.abs();
                if d < top / n - slack || d > top + slack || !d.is_finite() {
                    violations.push(SandwichViolation {
                        r: s.r,
                        which,
                        value: d,
                        lower: top / n,
                        upper: top,
                    });
                }
            }
        }
        SandwichReport {
            checked: self.samples.len(),
            violations,
        }
    }

    /// Positivity of `w`, `ψ` and monotonicity of `u, w, v, ψ` along samples.
    pub fn monotonicity_violations(&self) -> usize {
        let mut bad = 0;
        for (i, s) in self.samples.iter().enumerate() {
            if !(s.w > 0.0 && s.psi > 0.0 && s.v > 0.0) {
                bad += 1;
            }
            if i > 0 {
                let a = &self.samples[i - 1];
                if s.u < a.u || s.w < a.w || s.v < a.v || s.psi < a.psi {
                    bad += 1;
                }
            }
        }
        bad
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichViolation {
    pub r: f64,
    pub which: &'static str,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport {
    pub checked: usize,
    pub violations: Vec<SandwichViolation>,
}

/// Leading-order values of `(u, w, v, ψ)` at a small radius `r0`.
pub fn series_start(params: &Params, r0: f64) -> Result<[f64; 4]> {
    if !(r0.is_finite() && r0 > 0.0) {
        return param(format!("start radius must be positive, got {r0}"));
    }
    let n = params.n as f64;
    let c = params.m.powf(params.p) / n;
    let w = c * r0;
    let u = params.u0 + c * r0 * r0 / 2.0;
    let (v, psi) = match params.nl.kind() {
        Kind::Power { q } => {
            let psi = c.powf(*q) * r0.powf(q + 1.0) / (n + q);
            (params.m + psi * r0 / (q + 2.0), psi)
        }
        _ => {
            let nl = &params.nl;
            let psi_at = |s: f64| {
                if s <= 0.0 {
                    return 0.0;
                }
                // scale t = sτ to keep the weight t^(N−1) well conditioned
                s * gauss_legendre5_composite(|tau| tau.powf(n - 1.0) * nl.f_unchecked(c * s * tau), 0.0, 1.0, 4)
            };
            let psi = psi_at(r0);
            let dv = gauss_legendre5_composite(psi_at, 0.0, r0, 4);
            (params.m + dv, psi)
        }
    };
    Ok([u, w, v, psi])
}

/// Absolute tolerances `atol·|y0_k|`: components that start many orders of
/// magnitude below 1 (`ψ ~ r^(q+1)` near the origin) stay under relative
/// control instead of being swamped by a fixed floor.
pub(crate) fn scaled_atol<const D: usize>(atol: f64, y0: &[f64; D]) -> [f64; D] {
    std::array::from_fn(|k| {
        let y = y0[k].abs();
        if y > 0.0 {
            atol * y.min(1.0)
        } else {
            atol
        }
    })
}

fn default_r0(params: &Params) -> f64 {
    match params.domain {
        Domain::Ball { radius } => 1e-6 * radius.min(1.0),
        Domain::WholeSpace => 1e-6,
    }
}

/// Local blow-up test on the last decade of `v`: fits `v/ψ` against `r`.
/// Returns the slope and the ratio of `v/ψ` across the decade when enough
/// samples are available.
fn phi_trend(samples: &[Sample], gaps: &[f64]) -> Option<(f64, f64)> {
    let v_end = samples.last()?.v;
    let start = samples.iter().rposition(|s| s.v < v_end / 10.0).map_or(0, |i| i + 1);
    if samples.len() - start < 8 {
        return None;
    }
    let xs: Vec<f64> = gaps[start..].iter().map(|g| -g).collect();
    let ys: Vec<f64> = samples[start..].iter().map(|s| s.v / s.psi).collect();
    let slope = linear_fit(&xs, &ys, None).ok()?.slope;
    Some((slope, ys[ys.len() - 1] / ys[0]))
}

/// Largest ratio of `v/ψ` across a decade of `v` still read as approach to a
/// singularity; exponential growth keeps the ratio near 1.
const MAX_PHI_RATIO: f64 = 0.99;

/// `v` level past which a solution without a blow-up signature is reported
/// as global at the radius reached.
const V_REPRESENTABLE: f64 = 1e250;

/// Whether the trend of `v/ψ` indicates blow-up: the local exponent
/// `β = −1/slope` must exceed 0.1 and `v/ψ` must actually shrink.
fn indicates_blowup(slope: f64, ratio: f64) -> bool {
    slope < 0.0 && -1.0 / slope > 0.1 && ratio <= MAX_PHI_RATIO
}

fn gaps_of(samples: &[Sample]) -> Vec<f64> {
    let n = samples.len();
    let mut g = vec![0.0; n];
    for i in (0..n.saturating_sub(1)).rev() {
        g[i] = g[i + 1] + samples[i + 1].h;
    }
    g
}

/// `y[0]` holds `u − u0`, so the step sequence does not depend on `u0`.
fn make_sample(r: f64, y: &[f64; 4], dy: &[f64; 4], h: f64, u0: f64) -> Sample {
    Sample {
        r,
        u: u0 + y[0],
        w: y[1],
        v: y[2],
        psi: y[3],
        dw: dy[1],
        dpsi: dy[3],
        h,
    }
}

/// Integrates a radial solution from the origin.
pub fn integrate(params: &Params, controls: &StepControls) -> Result<RadialSolution> {
    params.validate()?;
    controls.validate()?;
    let r0 = controls.r0.unwrap_or_else(|| default_r0(params));
    let (r_limit, whole) = match params.domain {
        Domain::Ball { radius } => (radius, false),
        Domain::WholeSpace => (controls.r_stop, true),
    };
    if r0 >= r_limit {
        return param("start radius must be below the integration limit");
    }
    let y0 = series_start(&params.clone().with_u0(0.0), r0)?;
    let mut f = |r: f64, y: &[f64; 4]| params.rhs(r, y);
    let mut st = Dopri5::new(&mut f, r0, y0, controls.rtol, scaled_atol(controls.atol, &y0), None);
    let mut samples = vec![make_sample(r0, &y0, st.dy(), 0.0, params.u0)];

    let partial = |samples: &Vec<Sample>, u0: f64| {
        Box::new(RadialSolution {
            samples: samples.clone(),
            termination: Termination::ReachedRadius,
            u0,
            fit: None,
        })
    };

    let mut next_check = controls.v_ceiling;
    let mut blowup = false;
    let termination = loop {
        if samples.len() > controls.max_steps {
            return Err(Error::MaxSteps(controls.max_steps));
        }
        let y = *st.y();
        let r = st.t();
        let phi = if y[3] > 0.0 { y[2] / y[3] } else { f64::INFINITY };
        let h_max = 0.05 * phi;
        let h_min = 1e-14 * r.min(phi);
        match st.step(&mut f, r_limit, h_max, h_min) {
            Ok(h) => samples.push(make_sample(st.t(), st.y(), st.dy(), h, params.u0)),
            Err(StepFailure::Underflow { h }) => {
                return Err(Error::StepUnderflow {
                    at: st.t(),
                    step: h,
                    partial: partial(&samples, params.u0),
                })
            }
            Err(StepFailure::NonFinite) => {
                return Err(Error::NonFinite {
                    at: st.t(),
                    partial: partial(&samples, params.u0),
                })
            }
        }
        if st.t() >= r_limit {
            break if whole {
                Termination::GlobalHorizon { r_stop: r_limit }
            } else {
                Termination::ReachedRadius
            };
        }
        let v = st.y()[2];
        if !blowup && v >= next_check {
            let gaps = gaps_of(&samples);
            match phi_trend(&samples, &gaps) {
                Some((slope, ratio)) if indicates_blowup(slope, ratio) => blowup = true,
                Some(_) => next_check *= 10.0,
                None => {}
            }
            if !blowup && v > V_REPRESENTABLE {
                break Termination::GlobalHorizon { r_stop: st.t() };
            }
        }
        if blowup {
            let y = st.y();
            let rel_gap = y[2] / y[3] / st.t();
            let done = match controls.gap_target {
                None => true,
                Some(g) => rel_gap < g || v > 1e280,
            };
            if done {
                break Termination::BlowUp { r_max: f64::NAN };
            }
        }
    };

    let mut sol = RadialSolution {
        samples,
        termination,
        u0: params.u0,
        fit: None,
    };
    if let Termination::BlowUp { .. } = sol.termination {
        let r_max = match fit_blowup_radius(&sol, None) {
            Ok(fit) => {
                sol.fit = Some(fit);
                fit.r_max
            }
            Err(_) => {
                let gaps = sol.gaps();
                let slope = phi_trend(&sol.samples, &gaps).map_or(f64::NAN, |t| t.0);
                let last = sol.last();
                last.r - last.v / last.psi / slope
            }
        };
        sol.termination = Termination::BlowUp { r_max };
    }
    Ok(sol)
}

/// Least-squares estimate of the blow-up radius from the last decade of `v`.
///
/// With `beta_hint` the exponent is fixed and `v^(−1/β)` is fitted by a line
/// in `r`; otherwise `(B, β, R_max)` are fitted jointly in log-log form.
pub fn fit_blowup_radius(sol: &RadialSolution, beta_hint: Option<f64>) -> Result<BlowupFit> {
    let start = sol.terminal_window_start(1.0);
    let window = &sol.samples[start..];
    if window.len() < 20 {
        return Err(Error::Fit(format!(
            "{} samples in the terminal decade of v, need at least 20",
            window.len()
        )));
    }
    if window.windows(2).any(|w| !(w[1].v > w[0].v)) || window.iter().any(|s| !(s.v > 0.0)) {
        return Err(Error::Fit("v is not strictly increasing near the end".into()));
    }
    let gaps = &sol.gaps()[start..];
    let r_last = sol.last().r;

    if let Some(beta) = beta_hint {
        if !(beta > 0.0) {
            return param("beta hint must be positive");
        }
        let ys: Vec<f64> = window.iter().map(|s| s.v.powf(-1.0 / beta)).collect();
        let wts: Vec<f64> = ys.iter().map(|y| 1.0 / (y * y)).collect();
        let l = linear_fit(gaps, &ys, Some(&wts))?;
        let remaining = l.intercept / l.slope;
        if !(l.slope > 0.0 && remaining > 0.0) {
            return Err(Error::Fit("fitted blow-up radius lies behind the data".into()));
        }
        return Ok(BlowupFit {
            r_max: r_last + remaining,
            remaining,
            beta,
            coefficient: l.slope.powf(-beta),
            samples_used: window.len(),
        });
    }

    // first guess from v/ψ ≈ (R − r)/β
    let phis: Vec<f64> = window.iter().map(|s| s.v / s.psi).collect();
    let l = linear_fit(gaps, &phis, None)?;
    let mut d0 = l.intercept / l.slope;
    if !(d0 > 0.0 && d0.is_finite()) {
        d0 = (gaps[gaps.len() - 2]).max(f64::MIN_POSITIVE);
    }
    let ln_v: Vec<f64> = window.iter().map(|s| s.v.ln()).collect();
    let loglog = |d: f64| {
        let xs: Vec<f64> = gaps.iter().map(|g| (g + d).ln()).collect();
        linear_fit(&xs, &ln_v, None)
    };
    let ln_d = golden_section(
        |s| loglog(s.exp()).map(|l| l.rms).unwrap_or(f64::INFINITY),
        d0.ln() - 5.0,
        d0.ln() + 5.0,
        1e-10,
    );
    let remaining = ln_d.exp();
    let l = loglog(remaining)?;
    Ok(BlowupFit {
        r_max: r_last + remaining,
        remaining,
        beta: -l.slope,
        coefficient: l.intercept.exp(),
        samples_used: window.len(),
    })
}

/// Outcome of integrating two shooting values side by side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub steps: usize,
    pub r_end: f64,
    /// The two trajectories coincide exactly (equal shooting values).
    pub identical: bool,
    pub first_violation: Option<OrderingViolation>,
}

impl ComparisonReport {
    pub fn holds(&self) -> bool {
        self.first_violation.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingViolation {
    pub r: f64,
    pub component: &'static str,
    pub larger_m: f64,
    pub smaller_m: f64,
}

/// Integrates the solutions for `params1.m ≥ params2.m` on a common grid and
/// checks `w1 > w2`, `v1 > v2`, `ψ1 > ψ2` until either reaches `v_ceiling`.
pub fn check_comparison(params1: &Params, params2: &Params, controls: &StepControls) -> Result<ComparisonReport> {
    params1.validate()?;
    params2.validate()?;
    controls.validate()?;
    if params1.p != params2.p || params1.nl != params2.nl || params1.n != params2.n || params1.domain != params2.domain
    {
        return param("compared problems may differ only in m");
    }
    if params1.m < params2.m {
        return param("the first shooting value must be the larger one");
    }
    let r0 = controls.r0.unwrap_or_else(|| default_r0(params1));
    let r_limit = match params1.domain {
        Domain::Ball { radius } => radius,
        Domain::WholeSpace => controls.r_stop,
    };
    let a = series_start(params1, r0)?;
    let b = series_start(params2, r0)?;
    let y0 = [a[1], a[2], a[3], b[1], b[2], b[3]];
    let mut f = |r: f64, y: &[f64; 6]| {
        let da = params1.rhs(r, &[0.0, y[0], y[1], y[2]]);
        let db = params2.rhs(r, &[0.0, y[3], y[4], y[5]]);
        [da[1], da[2], da[3], db[1], db[2], db[3]]
    };
    let mut st = Dopri5::new(&mut f, r0, y0, controls.rtol, scaled_atol(controls.atol, &y0), None);
    let identical = params1.m == params2.m;
    let mut steps = 0;
    let mut first_violation = None;
    let names = ["w", "v", "psi"];
    loop {
        let y = *st.y();
        for k in 0..3 {
            let (hi, lo) = (y[k], y[k + 3]);
            let ok = if identical { hi == lo } else { hi > lo };
            if !ok && first_violation.is_none() {
                first_violation = Some(OrderingViolation {
                    r: st.t(),
                    component: names[k],
                    larger_m: hi,
                    smaller_m: lo,
                });
            }
        }
        if st.t() >= r_limit || y[1].max(y[4]) >= controls.v_ceiling || steps >= controls.max_steps {
            break;
        }
        let phi = (y[1] / y[2]).min(y[4] / y[5]);
        let h_min = 1e-14 * st.t().min(phi);
        match st.step(&mut f, r_limit, 0.05 * phi, h_min) {
            Ok(_) => steps += 1,
            Err(StepFailure::Underflow { .. }) | Err(StepFailure::NonFinite) => break,
        }
    }
    Ok(ComparisonReport {
        steps,
        r_end: st.t(),
        identical,
        first_violation,
    })
}

/// Exponents `(α, β, γ)` of the scaling symmetry of the power system.
pub(crate) fn scaling_exponents(p: f64, q: f64) -> (f64, f64, f64) {
    let d = p * q - 1.0;
    ((1.0 + 2.0 * p) / d, (q + 2.0) / d, (q + p * q + 1.0) / d)
}

fn rescale_by(sol: &RadialSolution, sigma: f64, p: f64, q: f64) -> RadialSolution {
    let (a, b, g) = scaling_exponents(p, q);
    let (su, sw, sv, sp) = (sigma.powf(a - 1.0), sigma.powf(a), sigma.powf(b), sigma.powf(g));
    let samples = sol
        .samples
        .iter()
        .map(|s| Sample {
            r: s.r / sigma,
            u: su * s.u,
            w: sw * s.w,
            v: sv * s.v,
            psi: sp * s.psi,
            dw: sw * sigma * s.dw,
            dpsi: sp * sigma * s.dpsi,
            h: s.h / sigma,
        })
        .collect();
    let termination = match sol.termination {
        Termination::BlowUp { r_max } => Termination::BlowUp { r_max: r_max / sigma },
        Termination::GlobalHorizon { r_stop } => Termination::GlobalHorizon { r_stop: r_stop / sigma },
        Termination::ReachedRadius => Termination::ReachedRadius,
    };
    RadialSolution {
        samples,
        termination,
        u0: su * sol.u0,
        fit: sol.fit.map(|f| BlowupFit {
            r_max: f.r_max / sigma,
            remaining: f.remaining / sigma,
            ..f
        }),
    }
}

/// A rescaled solution. Its first sample sits at `r0/σ`, so for `σ < 1` the
/// stretch `[r0, r0/σ)` of the new solution is not represented.
#[derive(Debug, Clone, PartialEq)]
pub struct Rescaled {
    pub solution: RadialSolution,
    pub truncated: bool,
}

/// Applies the scaling symmetry of the power system:
/// `w̃(r) = σ^α w(σr)`, `ṽ(r) = σ^β v(σr)`, `ψ̃(r) = σ^γ ψ(σr)` and
/// `ũ(r) = σ^(α−1) u(σr)`, which stretches the blow-up radius by `1/σ`.
pub fn rescale_solution(sol: &RadialSolution, sigma: f64, p: f64, q: f64) -> Result<Rescaled> {
    if !(sigma > 0.0 && sigma <= 1.0) {
        return param(format!("scaling factor must lie in (0, 1], got {sigma}"));
    }
    if !(p * q > 1.0) {
        return param("scaling needs pq > 1");
    }
    Ok(Rescaled {
        solution: rescale_by(sol, sigma, p, q),
        truncated: sigma < 1.0,
    })
}

/// Rescales a blow-up solution of the power system to blow-up radius 1.
pub fn normalize_to_unit_radius(sol: &RadialSolution, p: f64, q: f64) -> Result<RadialSolution> {
    if !(p * q > 1.0) {
        return param("scaling needs pq > 1");
    }
    let r_max = sol
        .r_max()
        .filter(|r| r.is_finite() && *r > 0.0)
        .ok_or_else(|| Error::Parameter("solution has no blow-up radius".into()))?;
    Ok(rescale_by(sol, r_max, p, q))
}

/// Behaviour of a computed radial solution on the whole space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservedBehaviour {
    /// Exists up to the horizon.
    Global,
    /// Blows up with `w` integrable up to the blow-up radius, so `u` stays
    /// bounded.
    VOnly,
    /// Blows up with `w` non-integrable, so `u` diverges too.
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Observation {
    pub behaviour: ObservedBehaviour,
    pub r_max: Option<f64>,
    /// Fitted exponent of `w ~ (R_max − r)^(−α)`.
    pub w_exponent: Option<f64>,
}

/// Integrates on the whole space and reads off how the solution ends.
pub fn observe_behaviour(params: &Params, controls: &StepControls) -> Result<Observation> {
    let params = Params {
        domain: Domain::WholeSpace,
        ..params.clone()
    };
    let sol = integrate(&params, controls)?;
    let Some(fit) = sol.fit else {
        return Ok(Observation {
            behaviour: ObservedBehaviour::Global,
            r_max: None,
            w_exponent: None,
        });
    };
    let start = sol.terminal_window_start(1.0);
    let dist = sol.distances_to_blowup(&fit);
    let xs: Vec<f64> = dist[start..].iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = sol.samples[start..].iter().map(|s| s.w.ln()).collect();
    let alpha = -linear_fit(&xs, &ys, None)?.slope;
    Ok(Observation {
        behaviour: if alpha < 1.0 {
            ObservedBehaviour::VOnly
        } else {
            ObservedBehaviour::Both
        },
        r_max: Some(fit.r_max),
        w_exponent: Some(alpha),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn power(p: f64, q: f64, n: usize, m: f64) -> Params {
        Params::power(p, q, n, m).unwrap()
    }

    #[test]
    fn params_validation() {
        let nl = Nonlinearity::power(1.0).unwrap();
        assert!(Params::new(0.0, nl.clone(), 3, 1.0, Domain::WholeSpace).is_err());
        assert!(Params::new(1.0, nl.clone(), 1, 1.0, Domain::WholeSpace).is_err());
        assert!(Params::new(1.0, nl.clone(), 3, -1.0, Domain::WholeSpace).is_err());
        assert!(Params::new(1.0, nl, 3, 1.0, Domain::Ball { radius: 0.0 }).is_err());
    }

    #[test]
    fn series_start_leading_orders() {
        let pr = power(2.0, 3.0, 3, 1.5);
        let n = 3.0;
        for r0 in [1e-3, 1e-5] {
            let [u, w, _, psi] = series_start(&pr, r0).unwrap();
            let mp = 1.5f64.powi(2);
            assert!((w / r0 - mp / n).abs() < 1e-12);
            let lead = 1.5f64.powf(6.0) / (n.powi(3) * (n + 3.0));
            assert!((psi / r0.powi(4) - lead).abs() < 1e-9 * lead);
            assert!((u - 1.0).abs() < r0);
        }
        assert!(series_start(&pr, 0.0).is_err());
    }

    #[test]
    fn series_start_quadrature_matches_power_closed_form() {
        let t: Vec<f64> = (0..=100).map(|i| i as f64 * 0.01).collect();
        let nl = Nonlinearity::from_samples(t.clone(), t).unwrap();
        let custom = Params::new(1.0, nl, 3, 2.0, Domain::WholeSpace).unwrap();
        let exact = power(1.0, 1.0, 3, 2.0);
        let a = series_start(&custom, 1e-2).unwrap();
        let b = series_start(&exact, 1e-2).unwrap();
        for k in 0..4 {
            assert!((a[k] - b[k]).abs() <= 1e-6 * b[k].abs(), "{k}: {} vs {}", a[k], b[k]);
        }
    }

    #[test]
    fn blow_up_for_region_c() {
        let sol = integrate(&power(2.0, 3.0, 2, 1.0), &StepControls::default()).unwrap();
        let r_max = sol.r_max().unwrap();
        assert!(r_max.is_finite() && r_max > 0.0);
        let beta = sol.fit.unwrap().beta;
        assert!((beta - 1.0).abs() < 0.05, "beta = {beta}");
        assert_eq!(sol.monotonicity_violations(), 0);
    }

    #[test]
    fn global_for_pq_one() {
        let c = StepControls {
            r_stop: 1e4,
            ..Default::default()
        };
        // pq = 1 grows exponentially and leaves the floating-point range first
        let sol = integrate(&power(1.0, 1.0, 3, 1.0), &c).unwrap();
        assert!(matches!(sol.termination, Termination::GlobalHorizon { .. }));
        let sol = integrate(&power(0.5, 1.0, 3, 1.0), &c).unwrap();
        assert_eq!(sol.termination, Termination::GlobalHorizon { r_stop: 1e4 });
        assert!(sol.samples.iter().all(|s| s.w > 0.0 && s.psi > 0.0));
    }

    #[test]
    fn ball_stops_at_radius() {
        let pr = Params {
            domain: Domain::Ball { radius: 0.5 },
            ..power(2.0, 3.0, 2, 1.0)
        };
        let sol = integrate(&pr, &StepControls::default()).unwrap();
        assert_eq!(sol.termination, Termination::ReachedRadius);
        assert_eq!(sol.last().r, 0.5);
    }

    #[test]
    fn synthetic_inverse_power_fit() {
        let n = 400;
        let samples: Vec<Sample> = (0..n)
            .map(|i| {
                let d = 10f64.powf(-8.0 * i as f64 / (n - 1) as f64);
                let r = 1.0 - d;
                Sample {
                    r,
                    u: 0.0,
                    w: 1.0,
                    v: 1.0 / d,
                    psi: 1.0 / (d * d),
                    dw: 0.0,
                    dpsi: 0.0,
                    h: 0.0,
                }
            })
            .collect();
        let sol = RadialSolution::from_samples(samples, Termination::BlowUp { r_max: 1.0 }, 0.0).unwrap();
        let free = fit_blowup_radius(&sol, None).unwrap();
        assert!((free.r_max - 1.0).abs() < 1e-6);
        assert!((free.beta - 1.0).abs() < 1e-6);
        let hinted = fit_blowup_radius(&sol, Some(1.0)).unwrap();
        assert!((hinted.r_max - 1.0).abs() < 1e-6);
        assert!((hinted.coefficient - 1.0).abs() < 1e-6);
    }

    #[test]
    fn fit_needs_enough_monotone_samples() {
        let mk = |vs: &[f64]| {
            let samples = vs
                .iter()
                .enumerate()
                .map(|(i, &v)| Sample {
                    r: i as f64,
                    u: 0.0,
                    w: 1.0,
                    v,
                    psi: 1.0,
                    dw: 0.0,
                    dpsi: 0.0,
                    h: 0.0,
                })
                .collect();
            RadialSolution::from_samples(samples, Termination::BlowUp { r_max: f64::NAN }, 0.0).unwrap()
        };
        assert!(fit_blowup_radius(&mk(&[1.0, 2.0, 5.0, 10.0]), None).is_err());
        let mut vs: Vec<f64> = (1..=40).map(|i| i as f64).collect();
        vs[35] = 100.0;
        assert!(fit_blowup_radius(&mk(&vs), None).is_err());
    }

    #[test]
    fn comparison_orders_and_identity() {
        let c = StepControls::default();
        let a = power(2.0, 3.0, 2, 2.0);
        let b = power(2.0, 3.0, 2, 1.0);
        let rep = check_comparison(&a, &b, &c).unwrap();
        assert!(rep.holds(), "{rep:?}");
        let same = check_comparison(&b, &b, &c).unwrap();
        assert!(same.identical && same.holds());
        assert!(check_comparison(&b, &a, &c).is_err());
        assert!(check_comparison(&a, &power(2.0, 2.0, 2, 1.0), &c).is_err());
    }

    #[test]
    fn rescale_identity_and_errors() {
        let sol = integrate(&power(2.0, 3.0, 2, 1.0), &StepControls::default()).unwrap();
        let same = rescale_solution(&sol, 1.0, 2.0, 3.0).unwrap();
        assert_eq!(same.solution, sol);
        assert!(!same.truncated);
        assert!(rescale_solution(&sol, 1.5, 2.0, 3.0).is_err());
        assert!(rescale_solution(&sol, 0.0, 2.0, 3.0).is_err());
        assert_eq!(scaling_exponents(2.0, 3.0), (1.0, 1.0, 2.0));
    }

    #[test]
    fn interpolation_hits_samples() {
        let sol = integrate(&power(2.0, 3.0, 2, 1.0), &StepControls::default()).unwrap();
        let s = sol.samples[10];
        let y = sol.interpolate(s.r).unwrap();
        assert_eq!(y, [s.u, s.w, s.v, s.psi]);
        assert!(sol.interpolate(-1.0).is_none());
    }

    #[test]
    fn csv_header() {
        let sol = integrate(&power(2.0, 3.0, 2, 1.0), &StepControls::default()).unwrap();
        let mut buf = Vec::new();
        sol.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("r,u,w,v,psi\n"));
        assert_eq!(text.lines().count(), sol.samples.len() + 1);
    }
}

//! Explicit blow-up rates in a ball and growth rates on ℝᴺ for the power
//! system `Δu = v^p`, `Δv = |∇u|^q`, and their comparison with computed
//! solutions.

use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::fit::{linear_fit, median};
use crate::radial::{RadialSolution, Sample, Termination};

/// How `u` behaves at the blow-up radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UCase {
    /// `α < 1`: `u` has a finite limit `L` and `(L − u)/(R−r)^(1−α)` converges.
    FiniteLimit,
    /// `α = 1`: `u/ln(1/(R−r))` converges.
    LogRate,
    /// `α > 1`: `u (R−r)^(α−1)` converges.
    PowerRate,
}

/// Exponents and constants of the boundary blow-up profile
/// `w ~ A(R−r)^(−α)`, `v ~ B(R−r)^(−β)`, `v' ~ C(R−r)^(−γ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BallRates {
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub u_case: UCase,
    /// Limit constant of the `u` profile for `u_case`.
    pub u_rate_constant: f64,
    /// The rates are proved for `p, q ≥ 1`, `(p, q) ≠ (1, 1)`; other inputs
    /// with `pq > 1` are computed but flagged.
    pub within_proven_range: bool,
}

/// Relative band in which `α` counts as exactly 1.
const ALPHA_ONE_BAND: f64 = 1e-12;

pub fn ball_rates(p: f64, q: f64) -> Result<BallRates> {
    if !(p > 0.0 && q > 0.0 && p.is_finite() && q.is_finite()) {
        return param("p and q must be positive");
    }
    let d = p * q - 1.0;
    if !(d > 0.0) {
        return param(format!("blow-up constants need pq > 1, got pq = {}", p * q));
    }
    let alpha = (1.0 + 2.0 * p) / d;
    let beta = (q + 2.0) / d;
    let gamma = (q + p * q + 1.0) / d;
    let k = 1.0 / d;
    let (c1, c2, c3) = (1.0 + 2.0 * p, q + 2.0, q + p * q + 1.0);
    let a = (c1 * c2.powf(p) * c3.powf(p) / d.powf(2.0 * p + 1.0)).powf(k);
    let b = (c1.powf(q) * c2 * c3 / d.powf(2.0 + q)).powf(k);
    let c = (c1.powf(q) * c2.powf(p * q) * c3 / d.powf(q + p * q + 1.0)).powf(k);
    let (u_case, u_rate_constant) = if (alpha - 1.0).abs() <= ALPHA_ONE_BAND {
        (UCase::LogRate, a)
    } else if alpha < 1.0 {
        (UCase::FiniteLimit, a / (1.0 - alpha))
    } else {
        (UCase::PowerRate, d / (2.0 + 2.0 * p - p * q) * a)
    };
    Ok(BallRates {
        p,
        q,
        alpha,
        beta,
        gamma,
        a,
        b,
        c,
        u_case,
        u_rate_constant,
        within_proven_range: p >= 1.0 && q >= 1.0,
    })
}

impl BallRates {
    /// Exponent of `(R−r)` in the `u` limit: `1−α` for the finite-limit case.
    pub fn u_gap_exponent(&self) -> f64 {
        1.0 - self.alpha
    }

    /// The gauge `g` with `u ≈ const + K·g` near the boundary.
    fn u_gauge(&self, dist: f64) -> f64 {
        match self.u_case {
            UCase::FiniteLimit | UCase::PowerRate => dist.powf(1.0 - self.alpha),
            UCase::LogRate => (1.0 / dist).ln(),
        }
    }

    /// Sign of `K` in `u ≈ const + K·g`.
    fn u_gauge_sign(&self) -> f64 {
        match self.u_case {
            UCase::FiniteLimit => -1.0,
            _ => 1.0,
        }
    }
}

/// One empirical limit compared with its theoretical value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateCheck {
    pub quantity: String,
    pub empirical: f64,
    pub theoretical: f64,
    pub rel_err: f64,
    /// `(lo, hi)` of the independent variable over which the limit was read.
    pub window: (f64, f64),
    /// Same estimate over the second half of the window (in log scale).
    pub sensitivity: Option<f64>,
}

impl RateCheck {
    fn new(quantity: &str, empirical: f64, theoretical: f64, window: (f64, f64), sensitivity: Option<f64>) -> Self {
        Self {
            quantity: quantity.into(),
            empirical,
            theoretical,
            rel_err: ((empirical - theoretical) / theoretical).abs(),
            window,
            sensitivity,
        }
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.rel_err <= tol
    }
}

/// Which samples the empirical limits are read from: the last `decades`
/// decades of `v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateWindow {
    pub decades: f64,
}

impl Default for RateWindow {
    fn default() -> Self {
        Self { decades: 1.0 }
    }
}

/// Empirical blow-up limits of a computed solution against `rates`,
/// measured against the fitted blow-up radius.
pub fn verify_ball_rates(sol: &RadialSolution, rates: &BallRates, window: RateWindow) -> Result<Vec<RateCheck>> {
    let Termination::BlowUp { .. } = sol.termination else {
        return param("solution did not blow up");
    };
    let fit = sol
        .fit
        .ok_or_else(|| Error::Fit("solution carries no blow-up fit".into()))?;
    let start = sol.terminal_window_start(window.decades);
    let half = sol.terminal_window_start(window.decades / 2.0);
    if sol.samples.len() - start < 10 {
        return Err(Error::Fit("rate window holds fewer than 10 samples".into()));
    }
    let dist = sol.distances_to_blowup(&fit);
    let span = (dist[sol.samples.len() - 1], dist[start]);

    let limit = |from: usize, value: &dyn Fn(&Sample, f64) -> f64| {
        let vals: Vec<f64> = (from..sol.samples.len())
            .map(|i| value(&sol.samples[i], dist[i]))
            .collect();
        median(&vals).unwrap_or(f64::NAN)
    };
    let mut checks = Vec::new();
    let v_lim = |s: &Sample, d: f64| s.v * d.powf(rates.beta);
    let w_lim = |s: &Sample, d: f64| s.w * d.powf(rates.alpha);
    let p_lim = |s: &Sample, d: f64| s.psi * d.powf(rates.gamma);
    checks.push(RateCheck::new(
        "v",
        limit(start, &v_lim),
        rates.b,
        span,
        Some(limit(half, &v_lim)),
    ));
    checks.push(RateCheck::new(
        "w",
        limit(start, &w_lim),
        rates.a,
        span,
        Some(limit(half, &w_lim)),
    ));
    checks.push(RateCheck::new(
        "psi",
        limit(start, &p_lim),
        rates.c,
        span,
        Some(limit(half, &p_lim)),
    ));

    let u_slope = |from: usize| -> f64 {
        let xs: Vec<f64> = (from..sol.samples.len()).map(|i| rates.u_gauge(dist[i])).collect();
        let ys: Vec<f64> = sol.samples[from..].iter().map(|s| s.u).collect();
        linear_fit(&xs, &ys, None).map_or(f64::NAN, |l| rates.u_gauge_sign() * l.slope)
    };
    let name = match rates.u_case {
        UCase::FiniteLimit => "u_finite_limit",
        UCase::LogRate => "u_log_rate",
        UCase::PowerRate => "u_power_rate",
    };
    checks.push(RateCheck::new(
        name,
        u_slope(start),
        rates.u_rate_constant,
        span,
        Some(u_slope(half)),
    ));
    Ok(checks)
}

/// Growth exponents and constants of positive radial solutions on ℝᴺ for
/// `q ≥ 1 > p`, `pq < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WholeSpaceRates {
    pub p: f64,
    pub q: f64,
    pub n: usize,
    pub u_exponent: f64,
    pub v_exponent: f64,
    pub u_constant: f64,
    pub v_constant: f64,
    /// Interior equilibrium `(Y₂, Z₂, W₂)` of the reduced system.
    pub zeta2: [f64; 3],
    pub x_limit: f64,
}

pub fn whole_space_rates(p: f64, q: f64, n: usize) -> Result<WholeSpaceRates> {
    if !(q >= 1.0) {
        return param(format!("requires q >= 1, got q = {q}"));
    }
    if !(p > 0.0 && p < 1.0) {
        return param(format!("requires 0 < p < 1, got p = {p}"));
    }
    if !(p * q < 1.0) {
        return param(format!("requires pq < 1, got pq = {}", p * q));
    }
    if n < 2 {
        return param("requires N >= 2");
    }
    let nf = n as f64;
    let lhs = p * (q * q - 4.0) / (1.0 - p * q);
    if lhs > 2.0 * (nf - 1.0) {
        return param(format!(
            "requires p(q^2-4)/(1-pq) <= 2(N-1), got {lhs} > {}",
            2.0 * (nf - 1.0)
        ));
    }
    Ok(whole_space_rates_unchecked(p, q, n))
}

fn whole_space_rates_unchecked(p: f64, q: f64, n: usize) -> WholeSpaceRates {
    let nf = n as f64;
    let d = 1.0 - p * q;
    let y2 = (2.0 + q) / d;
    let z2 = nf + p * y2;
    let w2 = nf - 2.0 + y2;
    let x_limit = 2.0 + p * y2;
    let prod = y2 * z2.powf(q) * w2;
    let v_constant = prod.powf(-1.0 / d);
    let u_constant = prod.powf(-p / d) / (x_limit * z2);
    WholeSpaceRates {
        p,
        q,
        n,
        u_exponent: (2.0 + 2.0 * p - p * q) / d,
        v_exponent: y2,
        u_constant,
        v_constant,
        zeta2: [y2, z2, w2],
        x_limit,
    }
}

impl WholeSpaceRates {
    /// The exact solution `(u₀, v₀) = (u_c r^a, v_c r^b)` and its first two
    /// derivatives at `r`.
    pub fn exact(&self, r: f64) -> ([f64; 3], [f64; 3]) {
        let pw = |c: f64, e: f64| {
            [
                c * r.powf(e),
                c * e * r.powf(e - 1.0),
                c * e * (e - 1.0) * r.powf(e - 2.0),
            ]
        };
        (
            pw(self.u_constant, self.u_exponent),
            pw(self.v_constant, self.v_exponent),
        )
    }
}

/// Maximum relative residual of the exact whole-space solution in
/// `Δu = v^p`, `Δv = |u'|^q`, with all derivatives taken by a six-point
/// central finite difference. Non-positive radii are skipped.
pub fn exact_solution_residual(p: f64, q: f64, n: usize, radii: &[f64]) -> Result<f64> {
    if !(p > 0.0 && q > 0.0 && p * q < 1.0) {
        return param("exact solution needs p, q > 0 and pq < 1");
    }
    if n < 2 {
        return param("requires N >= 2");
    }
    let rates = whole_space_rates_unchecked(p, q, n);
    let nm1 = n as f64 - 1.0;
    let u = |r: f64| rates.u_constant * r.powf(rates.u_exponent);
    let v = |r: f64| rates.v_constant * r.powf(rates.v_exponent);
    let mut worst: f64 = 0.0;
    for &r in radii.iter().filter(|r| **r > 0.0) {
        let h = 1e-3 * r;
        let d1 = |g: &dyn Fn(f64) -> f64| {
            (-g(r - 3.0 * h) + g(r - 2.0 * h) * 9.0 - g(r - h) * 45.0 + g(r + h) * 45.0 - g(r + 2.0 * h) * 9.0
                + g(r + 3.0 * h))
                / (60.0 * h)
        };
        let d2 = |g: &dyn Fn(f64) -> f64| {
            (g(r - 3.0 * h) * 2.0 - g(r - 2.0 * h) * 27.0 + g(r - h) * 270.0 - g(r) * 490.0 + g(r + h) * 270.0
                - g(r + 2.0 * h) * 27.0
                + g(r + 3.0 * h) * 2.0)
                / (180.0 * h * h)
        };
        let du = d1(&u);
        let lap_u = d2(&u) + nm1 / r * du;
        let lap_v = d2(&v) + nm1 / r * d1(&v);
        let rhs_u = v(r).powf(p);
        let rhs_v = du.abs().powf(q);
        worst = worst.max(((lap_u - rhs_u) / rhs_u).abs());
        worst = worst.max(((lap_v - rhs_v) / rhs_v).abs());
    }
    Ok(worst)
}

/// `(X, Y, Z, W) = (ru'/u, rv'/v, rv^p/u', r u'^q/v')` at one sample.
pub fn xyzw(s: &Sample, p: f64, q: f64) -> [f64; 4] {
    [
        s.r * s.w / s.u,
        s.r * s.psi / s.v,
        s.r * s.v.powf(p) / s.w,
        s.r * s.w.powf(q) / s.psi,
    ]
}

/// Compares a global solution at radius `r_eval` with the growth rates:
/// `u/r^a`, `v/r^b` and the limits of `(X, Y, Z, W)`.
pub fn verify_whole_space(sol: &RadialSolution, rates: &WholeSpaceRates, r_eval: f64) -> Result<Vec<RateCheck>> {
    let first = sol.samples[0].r;
    let last = sol.last().r;
    if !(r_eval <= last && r_eval >= 1e3 * first.max(1.0)) {
        return Err(Error::Fit(format!(
            "evaluation radius {r_eval} needs three decades of samples beyond r = 1 and at most r = {last}"
        )));
    }
    let y = sol
        .interpolate(r_eval)
        .ok_or_else(|| Error::Fit("evaluation radius outside the solution".into()))?;
    let s = Sample {
        r: r_eval,
        u: y[0],
        w: y[1],
        v: y[2],
        psi: y[3],
        dw: 0.0,
        dpsi: 0.0,
        h: 0.0,
    };
    // a decade earlier, to show how settled the limits are
    let earlier = sol.interpolate(r_eval / 10.0).map(|y| Sample {
        r: r_eval / 10.0,
        u: y[0],
        w: y[1],
        v: y[2],
        psi: y[3],
        dw: 0.0,
        dpsi: 0.0,
        h: 0.0,
    });
    let win = (r_eval, r_eval);
    let (p, q) = (rates.p, rates.q);
    let x = xyzw(&s, p, q);
    let xe = earlier.map(|e| xyzw(&e, p, q));
    let mut out = vec![
        RateCheck::new(
            "u_over_r_pow",
            s.u / r_eval.powf(rates.u_exponent),
            rates.u_constant,
            win,
            earlier.map(|e| e.u / e.r.powf(rates.u_exponent)),
        ),
        RateCheck::new(
            "v_over_r_pow",
            s.v / r_eval.powf(rates.v_exponent),
            rates.v_constant,
            win,
            earlier.map(|e| e.v / e.r.powf(rates.v_exponent)),
        ),
    ];
    let targets = [rates.x_limit, rates.zeta2[0], rates.zeta2[1], rates.zeta2[2]];
    for (k, name) in ["X", "Y", "Z", "W"].iter().enumerate() {
        out.push(RateCheck::new(name, x[k], targets[k], win, xe.map(|e| e[k])));
    }
    Ok(out)
}

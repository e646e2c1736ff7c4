//! The two autonomous cooperative reductions of the radial power system.
//!
//! Near the boundary of a ball (`t = ln(1/(1−r))`) the normalised variables
//! `X = w(1−r)^α/A`, `Y = v(1−r)^β/B`, `Z = v'(1−r)^γ/C` follow
//!
//! ```text
//! X' = α(Y^p − X) − (N−1)X/(e^t−1)
//! Y' = β(Z − Y)
//! Z' = γ(X^q − Z) − (N−1)Z/(e^t−1)
//! ```
//!
//! whose limit field `g = (α(Y|Y|^(p−1) − X), β(Z − Y), γ(X|X|^(q−1) − Z))`
//! is the ball field. On ℝᴺ with `t = ln r`, `Y = rv'/v`, `Z = rv^p/u'`,
//! `W = r u'^q/v'` solve the autonomous whole-space field
//! `(Y(W−(N−2)−Y), Z(N+pY−Z), W(qZ−qN+q+N−W))`.

use num_complex::Complex64;
use serde::Serialize;

use crate::asymptotics::{ball_rates, whole_space_rates, xyzw, BallRates, WholeSpaceRates};
use crate::error::{param, Error, Result};
use crate::ode::Dopri5;
use crate::radial::{integrate, scaled_atol, series_start, signed_pow, Domain, Params, StepControls};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum VectorField3 {
    Ball {
        p: f64,
        q: f64,
        alpha: f64,
        beta: f64,
        gamma: f64,
    },
    WholeSpace {
        p: f64,
        q: f64,
        n: usize,
    },
}

impl VectorField3 {
    pub fn ball(p: f64, q: f64) -> Result<Self> {
        let r = ball_rates(p, q)?;
        Ok(Self::Ball {
            p,
            q,
            alpha: r.alpha,
            beta: r.beta,
            gamma: r.gamma,
        })
    }

    pub fn whole_space(p: f64, q: f64, n: usize) -> Result<Self> {
        if !(p > 0.0 && q > 0.0) || n < 2 {
            return param("whole-space field needs p, q > 0 and N >= 2");
        }
        Ok(Self::WholeSpace { p, q, n })
    }

    pub fn eval(&self, z: &[f64; 3]) -> [f64; 3] {
        match *self {
            Self::Ball {
                p,
                q,
                alpha,
                beta,
                gamma,
            } => [
                alpha * (signed_pow(z[1], p) - z[0]),
                beta * (z[2] - z[1]),
                gamma * (signed_pow(z[0], q) - z[2]),
            ],
            Self::WholeSpace { p, q, n } => {
                let n = n as f64;
                let [y, zz, w] = *z;
                [
                    y * (w - (n - 2.0) - y),
                    zz * (n + p * y - zz),
                    w * (q * zz - q * n + q + n - w),
                ]
            }
        }
    }

    /// Jacobian; entries involving `|x|^(s−1)` with `s < 1` are infinite at 0.
    pub fn jacobian(&self, z: &[f64; 3]) -> [[f64; 3]; 3] {
        match *self {
            Self::Ball {
                p,
                q,
                alpha,
                beta,
                gamma,
            } => [
                [-alpha, alpha * p * z[1].abs().powf(p - 1.0), 0.0],
                [0.0, -beta, beta],
                [gamma * q * z[0].abs().powf(q - 1.0), 0.0, -gamma],
            ],
            Self::WholeSpace { p, q, n } => {
                let n = n as f64;
                let [y, zz, w] = *z;
                [
                    [w - (n - 2.0) - 2.0 * y, 0.0, y],
                    [p * zz, n + p * y - 2.0 * zz, 0.0],
                    [0.0, q * w, q * zz - q * n + q + n - 2.0 * w],
                ]
            }
        }
    }

    pub fn divergence(&self, z: &[f64; 3]) -> f64 {
        let j = self.jacobian(z);
        j[0][0] + j[1][1] + j[2][2]
    }

    /// Smallest off-diagonal Jacobian entry; nonnegative for a cooperative
    /// field.
    pub fn min_off_diagonal(&self, z: &[f64; 3]) -> f64 {
        let j = self.jacobian(z);
        let mut m = f64::INFINITY;
        for (i, row) in j.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                if i != k {
                    m = m.min(*v);
                }
            }
        }
        m
    }

    /// Whether the field is differentiable at `z`.
    fn smooth_at(&self, z: &[f64; 3]) -> bool {
        match *self {
            Self::Ball { p, q, .. } => (p >= 1.0 || z[1] != 0.0) && (q >= 1.0 || z[0] != 0.0),
            Self::WholeSpace { .. } => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityClass {
    AsymptoticallyStable,
    Saddle {
        dim_stable: usize,
    },
    Unstable,
    /// Some eigenvalue has a real part inside the dead band.
    Marginal,
    /// The field is not differentiable at the point.
    NonSmooth,
}

/// Real parts within this band of zero are not trusted for classification.
pub const DEAD_BAND: f64 = 1e-8;

pub fn classify_eigenvalues(eig: &[Complex64]) -> StabilityClass {
    if eig.iter().any(|l| !l.re.is_finite()) {
        return StabilityClass::NonSmooth;
    }
    if eig.iter().any(|l| l.re.abs() <= DEAD_BAND) {
        return StabilityClass::Marginal;
    }
    let stable = eig.iter().filter(|l| l.re < 0.0).count();
    match stable {
        s if s == eig.len() => StabilityClass::AsymptoticallyStable,
        0 => StabilityClass::Unstable,
        s => StabilityClass::Saddle { dim_stable: s },
    }
}

/// Coefficients `(a, b, c)` of `det(λI − M) = λ³ + aλ² + bλ + c`.
pub fn char_poly(m: &[[f64; 3]; 3]) -> [f64; 3] {
    let tr = m[0][0] + m[1][1] + m[2][2];
    let minors = m[0][0] * m[1][1] - m[0][1] * m[1][0] + m[0][0] * m[2][2] - m[0][2] * m[2][0] + m[1][1] * m[2][2]
        - m[1][2] * m[2][1];
    [-tr, minors, -det3(m)]
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

pub fn eval_cubic(coef: &[f64; 3], l: Complex64) -> Complex64 {
    ((l + coef[0]) * l + coef[1]) * l + coef[2]
}

/// Roots of `λ³ + aλ² + bλ + c`, sorted by decreasing real part.
pub fn cubic_roots(coef: &[f64; 3]) -> [Complex64; 3] {
    let [a, b, c] = *coef;
    let p = |x: f64| ((x + a) * x + b) * x + c;
    // a real root always exists inside the Cauchy bound
    let bound = 1.0 + a.abs().max(b.abs()).max(c.abs());
    let (mut lo, mut hi) = (-bound, bound);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if p(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(lo.abs()) {
            break;
        }
    }
    let r = 0.5 * (lo + hi);
    let d1 = a + r;
    let d0 = b + r * d1;
    let disc = d1 * d1 - 4.0 * d0;
    let (q1, q2) = if disc >= 0.0 {
        let s = disc.sqrt();
        let qq = -0.5 * (d1 + if d1 >= 0.0 { s } else { -s });
        if qq == 0.0 {
            (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0))
        } else {
            (Complex64::new(qq, 0.0), Complex64::new(d0 / qq, 0.0))
        }
    } else {
        let im = 0.5 * (-disc).sqrt();
        (Complex64::new(-0.5 * d1, im), Complex64::new(-0.5 * d1, -im))
    };
    let mut roots = [Complex64::new(r, 0.0), q1, q2];
    for z in roots.iter_mut() {
        for _ in 0..3 {
            let f = eval_cubic(coef, *z);
            let df = (3.0 * *z + 2.0 * a) * *z + b;
            if df.norm() == 0.0 {
                break;
            }
            let next = *z - f / df;
            if !(next.re.is_finite() && next.im.is_finite()) || eval_cubic(coef, next).norm() >= f.norm() {
                break;
            }
            *z = next;
        }
    }
    roots.sort_by(|x, y| y.re.partial_cmp(&x.re).unwrap().then(y.im.partial_cmp(&x.im).unwrap()));
    roots
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumReport {
    pub point: [f64; 3],
    pub jacobian: [[f64; 3]; 3],
    /// `(re, im)` pairs, by decreasing real part.
    pub eigenvalues: Vec<(f64, f64)>,
    pub class: StabilityClass,
    /// `(a, b, c)` of `λ³ + aλ² + bλ + c`.
    pub char_poly: [f64; 3],
    pub residual: f64,
    pub newton_converged: bool,
}

impl EquilibriumReport {
    pub fn eigen(&self) -> Vec<Complex64> {
        self.eigenvalues
            .iter()
            .map(|&(re, im)| Complex64::new(re, im))
            .collect()
    }

    fn at(field: &VectorField3, point: [f64; 3], newton_converged: bool) -> Self {
        let g = field.eval(&point);
        let residual = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let jacobian = field.jacobian(&point);
        if !field.smooth_at(&point) {
            return Self {
                point,
                jacobian,
                eigenvalues: vec![(f64::NAN, f64::NAN); 3],
                class: StabilityClass::NonSmooth,
                char_poly: [f64::NAN; 3],
                residual,
                newton_converged,
            };
        }
        let coef = char_poly(&jacobian);
        let eig = cubic_roots(&coef);
        Self {
            point,
            jacobian,
            eigenvalues: eig.iter().map(|l| (l.re, l.im)).collect(),
            class: classify_eigenvalues(&eig),
            char_poly: coef,
            residual,
            newton_converged,
        }
    }
}

fn solve3(m: &[[f64; 3]; 3], rhs: &[f64; 3]) -> Option<[f64; 3]> {
    let mut a = [[0.0; 4]; 3];
    for i in 0..3 {
        a[i][..3].copy_from_slice(&m[i]);
        a[i][3] = rhs[i];
    }
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &k| a[i][col].abs().partial_cmp(&a[k][col].abs()).unwrap())?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            let pivot = a[col];
            for (x, p) in a[row].iter_mut().zip(pivot).skip(col) {
                *x -= f * p;
            }
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let s: f64 = (i + 1..3).map(|k| a[i][k] * x[k]).sum();
        x[i] = (a[i][3] - s) / a[i][i];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Newton iteration for `g(ζ) = 0`.
pub fn newton_equilibrium(field: &VectorField3, seed: [f64; 3]) -> Result<[f64; 3]> {
    let mut z = seed;
    for _ in 0..50 {
        let g = field.eval(&z);
        let scale = 1.0 + z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if g.iter().all(|v| v.abs() <= 1e-13 * scale) {
            return Ok(z);
        }
        let dz = solve3(&field.jacobian(&z), &g).ok_or(Error::Newton { seed })?;
        for i in 0..3 {
            z[i] -= dz[i];
        }
    }
    let g = field.eval(&z);
    let scale = 1.0 + z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if g.iter().all(|v| v.abs() <= 1e-12 * scale) {
        Ok(z)
    } else {
        Err(Error::Newton { seed })
    }
}

/// All equilibria: `0, 1, −1` for the ball field; `ζ₁ = (0, N, N+q)` and
/// `ζ₂` (when `pq < 1`) for the whole-space field.
pub fn equilibria(field: &VectorField3) -> Vec<EquilibriumReport> {
    let seeds: Vec<[f64; 3]> = match *field {
        VectorField3::Ball { .. } => vec![[0.0; 3], [1.0; 3], [-1.0; 3]],
        VectorField3::WholeSpace { p, q, n } => {
            let nf = n as f64;
            let mut s = vec![[0.0, nf, nf + q]];
            if p * q < 1.0 {
                let y2 = (2.0 + q) / (1.0 - p * q);
                s.push([y2, nf + p * y2, nf - 2.0 + y2]);
            }
            s
        }
    };
    seeds
        .into_iter()
        .map(|seed| {
            if !field.smooth_at(&seed) {
                return EquilibriumReport::at(field, seed, true);
            }
            match newton_equilibrium(field, seed) {
                Ok(z) => EquilibriumReport::at(field, z, true),
                Err(_) => EquilibriumReport::at(field, seed, false),
            }
        })
        .collect()
}

/// Numerical evidence that `ζ₂` is asymptotically stable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Zeta2Trace {
    pub zeta2: [f64; 3],
    /// `a = Y₂+Z₂+W₂`, `b = Y₂Z₂+Z₂W₂+Y₂W₂`, `c = Y₂Z₂W₂`.
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// `P(0) = (1−pq)c`.
    pub p_at_zero: f64,
    /// Smallest `P(λ)` on a grid of `λ ∈ [0, 10a]`.
    pub min_p_nonnegative: f64,
    /// `a ≥ 3 c^(1/3)`.
    pub am_gm_holds: bool,
    /// `ab > (1−pq)c`, the remaining Routh–Hurwitz condition.
    pub hurwitz_holds: bool,
    pub eigenvalues: Vec<(f64, f64)>,
    pub all_negative: bool,
}

pub fn check_stability_zeta2(p: f64, q: f64, n: usize) -> Result<Zeta2Trace> {
    if !(p > 0.0 && q > 0.0 && p * q < 1.0) {
        return param(format!("needs pq < 1, got pq = {}", p * q));
    }
    if n < 2 {
        return param("requires N >= 2");
    }
    let nf = n as f64;
    let y = (2.0 + q) / (1.0 - p * q);
    let z = [y, nf + p * y, nf - 2.0 + y];
    let a = z[0] + z[1] + z[2];
    let b = z[0] * z[1] + z[1] * z[2] + z[0] * z[2];
    let c = z[0] * z[1] * z[2];
    let k = 1.0 - p * q;
    let poly = |l: f64| ((l + a) * l + b) * l + k * c;
    let min_p_nonnegative = (0..=2000)
        .map(|i| poly(10.0 * a * i as f64 / 2000.0))
        .fold(f64::INFINITY, f64::min);
    let eig = cubic_roots(&[a, b, k * c]);
    Ok(Zeta2Trace {
        zeta2: z,
        a,
        b,
        c,
        p_at_zero: k * c,
        min_p_nonnegative,
        am_gm_holds: a >= 3.0 * c.cbrt() * (1.0 - 1e-14),
        hurwitz_holds: a * b > k * c,
        eigenvalues: eig.iter().map(|l| (l.re, l.im)).collect(),
        all_negative: eig.iter().all(|l| l.re < 0.0),
    })
}

/// Axis-aligned box `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Box3 {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceReport {
    pub region: Box3,
    pub max: f64,
    pub argmax: [f64; 3],
    pub max_at_corners: f64,
}

impl DivergenceReport {
    pub fn negative(&self) -> bool {
        self.max < 0.0
    }
}

/// Default region: `[−1, 1]³` for the ball field, `[ζ₁, ζ₂]` for the
/// whole-space field.
pub fn default_box(field: &VectorField3) -> Box3 {
    match *field {
        VectorField3::Ball { .. } => Box3 {
            lo: [-1.0; 3],
            hi: [1.0; 3],
        },
        VectorField3::WholeSpace { p, q, n } => {
            let nf = n as f64;
            let y2 = (2.0 + q) / (1.0 - p * q);
            Box3 {
                lo: [0.0, nf, nf + q],
                hi: [y2, nf + p * y2, nf - 2.0 + y2],
            }
        }
    }
}

/// Largest divergence over the corners and an 11³ grid of `region`.
pub fn check_divergence(field: &VectorField3, region: Option<Box3>) -> DivergenceReport {
    let region = region.unwrap_or_else(|| default_box(field));
    let at = |f: [f64; 3]| -> [f64; 3] { std::array::from_fn(|k| region.lo[k] + f[k] * (region.hi[k] - region.lo[k])) };
    let mut max_at_corners = f64::NEG_INFINITY;
    for mask in 0..8 {
        let z = at(std::array::from_fn(|k| ((mask >> k) & 1) as f64));
        max_at_corners = max_at_corners.max(field.divergence(&z));
    }
    let (mut max, mut argmax) = (f64::NEG_INFINITY, region.lo);
    for i in 0..=10 {
        for j in 0..=10 {
            for k in 0..=10 {
                let z = at([i as f64 / 10.0, j as f64 / 10.0, k as f64 / 10.0]);
                let d = field.divergence(&z);
                if d > max {
                    max = d;
                    argmax = z;
                }
            }
        }
    }
    DivergenceReport {
        region,
        max,
        argmax,
        max_at_corners,
    }
}

/// A sampled trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<const D: usize> {
    pub t: Vec<f64>,
    pub states: Vec<[f64; D]>,
}

impl<const D: usize> Trajectory<D> {
    pub fn last(&self) -> &[f64; D] {
        self.states.last().expect("trajectories are never empty")
    }

    /// Whether the trajectory stays within `eps` (max norm) of `point` for
    /// the final `dwell` time units.
    pub fn settles_at(&self, point: &[f64; D], eps: f64, dwell: f64) -> bool {
        let t_end = *self.t.last().expect("non-empty");
        if t_end - self.t[0] < dwell {
            return false;
        }
        self.t
            .iter()
            .zip(&self.states)
            .filter(|(t, _)| **t >= t_end - dwell)
            .all(|(_, s)| (0..D).all(|k| (s[k] - point[k]).abs() <= eps))
    }

    /// Writes `t,X,Y,Z[,W]`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let names = ["X", "Y", "Z", "W"];
        let mut header = vec!["t"];
        header.extend_from_slice(&names[..D.min(4)]);
        w.write_record(&header)?;
        for (t, s) in self.t.iter().zip(&self.states) {
            let mut row = vec![format!("{t:.16e}")];
            row.extend(s.iter().map(|x| format!("{x:.16e}")));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Integrates the autonomous field from `start` up to `t_end`, stopping early
/// if the max norm exceeds `escape`.
pub fn integrate_autonomous(field: &VectorField3, start: [f64; 3], t_end: f64, escape: f64) -> Trajectory<3> {
    let mut f = |_t: f64, z: &[f64; 3]| field.eval(z);
    let mut st = Dopri5::new(&mut f, 0.0, start, 1e-10, [1e-12; 3], None);
    let mut traj = Trajectory {
        t: vec![0.0],
        states: vec![start],
    };
    while st.t() < t_end {
        if st.step(&mut f, t_end, 0.1, 1e-12).is_err() {
            break;
        }
        traj.t.push(st.t());
        traj.states.push(*st.y());
        if st.y().iter().any(|v| v.abs() > escape) {
            break;
        }
    }
    traj
}

/// Start of the transformed ball system at small `t0`, from the radial
/// series start with `v(0) = m`.
fn transformed_start(rates: &BallRates, n: usize, m: f64, t0: f64) -> Result<[f64; 3]> {
    let params = Params::power(rates.p, rates.q, n, m)?;
    let r0 = -(-t0).exp_m1();
    let [_, w, v, psi] = series_start(&params, r0)?;
    let s = 1.0 - r0;
    Ok([
        w * s.powf(rates.alpha) / rates.a,
        v * s.powf(rates.beta) / rates.b,
        psi * s.powf(rates.gamma) / rates.c,
    ])
}

const ESCAPE_LEVEL: f64 = 1e6;
const T0: f64 = 1e-6;

enum Fate {
    Escaped(f64),
    Finished,
}

fn run_transformed(rates: &BallRates, n: usize, m_over_b: f64, t_end: f64) -> Result<(Trajectory<3>, Fate)> {
    let (p, q) = (rates.p, rates.q);
    let (al, be, ga) = (rates.alpha, rates.beta, rates.gamma);
    let nm1 = n as f64 - 1.0;
    let mut f = |t: f64, z: &[f64; 3]| {
        let k = nm1 / t.exp_m1();
        [
            al * (signed_pow(z[1], p) - z[0]) - k * z[0],
            be * (z[2] - z[1]),
            ga * (signed_pow(z[0], q) - z[2]) - k * z[2],
        ]
    };
    let start = transformed_start(rates, n, m_over_b * rates.b, T0)?;
    let mut st = Dopri5::new(&mut f, T0, start, 1e-11, scaled_atol(1e-13, &start), None);
    let mut traj = Trajectory {
        t: vec![T0],
        states: vec![start],
    };
    while st.t() < t_end {
        match st.step(&mut f, t_end, 0.25, 1e-14 * st.t()) {
            Ok(_) => {
                traj.t.push(st.t());
                traj.states.push(*st.y());
                if st.y().iter().any(|v| v.abs() > ESCAPE_LEVEL) {
                    return Ok((traj, Fate::Escaped(st.t())));
                }
            }
            Err(_) => return Ok((traj, Fate::Escaped(st.t()))),
        }
    }
    Ok((traj, Fate::Finished))
}

/// Integrates the non-autonomous ball system from `Y(0) = m/B`,
/// `X(0) = Z(0) = 0` up to `t_end`.
pub fn integrate_transformed_ball(p: f64, q: f64, n: usize, m_over_b: f64, t_end: f64) -> Result<Trajectory<3>> {
    let rates = ball_rates(p, q)?;
    if n < 2 || !(m_over_b > 0.0) || !(t_end.is_finite() && t_end > T0) {
        return param("needs N >= 2, m/B > 0 and a finite t_end");
    }
    match run_transformed(&rates, n, m_over_b, t_end)? {
        (traj, Fate::Finished) => Ok(traj),
        (_, Fate::Escaped(at)) => Err(Error::Escaped {
            at,
            diagnosis: "the radial solution blows up before r = 1; the blow-up radius decreases in m, \
                        so the shooting value is above the critical one"
                .into(),
        }),
    }
}

/// The shooting value `m*` whose radial solution blows up exactly at `r = 1`,
/// located by bisection on whether the transformed trajectory escapes.
pub fn critical_shooting_value(p: f64, q: f64, n: usize) -> Result<f64> {
    let rates = ball_rates(p, q)?;
    let t_probe = 40.0;
    let escapes =
        |mb: f64| -> Result<bool> { Ok(matches!(run_transformed(&rates, n, mb, t_probe)?.1, Fate::Escaped(_))) };
    let (mut lo, mut hi) = (1.0, 1.0);
    if escapes(1.0)? {
        while escapes(lo)? {
            lo *= 0.5;
            if lo < 1e-12 {
                return Err(Error::Fit("no subcritical shooting value found".into()));
            }
        }
    } else {
        while !escapes(hi)? {
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::Fit("no supercritical shooting value found".into()));
            }
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if escapes(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi) * rates.b)
}

/// `(X, Y, Z, W)` along a whole-space radial solve, against `t = ln r`.
pub fn integrate_transformed_whole_space(
    p: f64,
    q: f64,
    n: usize,
    m: f64,
    controls: &StepControls,
) -> Result<Trajectory<4>> {
    let _: WholeSpaceRates = whole_space_rates(p, q, n)?;
    let params = Params {
        domain: Domain::WholeSpace,
        ..Params::power(p, q, n, m)?
    };
    let sol = integrate(&params, controls)?;
    Ok(Trajectory {
        t: sol.samples.iter().map(|s| s.r.ln()).collect(),
        states: sol.samples.iter().map(|s| xyzw(s, p, q)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_equilibria() {
        let f = VectorField3::ball(2.0, 3.0).unwrap();
        let eq = equilibria(&f);
        assert_eq!(eq.len(), 3);
        assert_eq!(eq[0].class, StabilityClass::AsymptoticallyStable);
        for e in &eq[1..] {
            assert_eq!(e.class, StabilityClass::Saddle { dim_stable: 2 });
            let l1 = e.eigenvalues[0];
            assert!((l1.0 - 1.0).abs() < 1e-12 && l1.1.abs() < 1e-12);
            let VectorField3::Ball { alpha, beta, gamma, .. } = f else {
                unreachable!()
            };
            let prod = e.eigen()[1] * e.eigen()[2];
            assert!((prod.re - 5.0 * alpha * beta * gamma).abs() < 1e-10);
            assert!((e.eigen()[1] + e.eigen()[2]).re < 0.0);
        }
    }

    #[test]
    fn ball_origin_not_smooth_for_small_p() {
        let f = VectorField3::ball(0.5, 4.0).unwrap();
        assert_eq!(equilibria(&f)[0].class, StabilityClass::NonSmooth);
    }

    #[test]
    fn whole_space_equilibria() {
        let f = VectorField3::whole_space(0.5, 1.0, 3).unwrap();
        let eq = equilibria(&f);
        assert_eq!(eq.len(), 2);
        assert_eq!(eq[0].point, [0.0, 3.0, 4.0]);
        assert_eq!(eq[0].class, StabilityClass::Saddle { dim_stable: 2 });
        assert_eq!(eq[1].point, [6.0, 6.0, 7.0]);
        assert_eq!(eq[1].class, StabilityClass::AsymptoticallyStable);
        assert!(eq[1].residual <= 1e-12);
    }

    #[test]
    fn newton_from_perturbed_seed() {
        let f = VectorField3::whole_space(0.5, 1.0, 3).unwrap();
        let z = newton_equilibrium(&f, [5.5, 6.3, 6.8]).unwrap();
        for (a, b) in z.iter().zip([6.0, 6.0, 7.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cubic_roots_known() {
        // (λ−1)(λ+2)(λ+3) = λ³ + 4λ² + λ − 6
        let r = cubic_roots(&[4.0, 1.0, -6.0]);
        assert!((r[0].re - 1.0).abs() < 1e-14 && (r[1].re + 2.0).abs() < 1e-14 && (r[2].re + 3.0).abs() < 1e-14);
        // (λ+1)(λ² + 1)
        let r = cubic_roots(&[1.0, 1.0, 1.0]);
        assert!((r[0] - Complex64::new(0.0, 1.0)).norm() < 1e-14);
        assert!((r[2] + 1.0).norm() < 1e-14);
        let r = cubic_roots(&[0.0, 0.0, 0.0]);
        assert!(r.iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn zeta2_trace() {
        let t = check_stability_zeta2(0.5, 1.0, 3).unwrap();
        assert!(t.all_negative && t.am_gm_holds && t.hurwitz_holds);
        assert!(t.p_at_zero > 0.0 && t.min_p_nonnegative > 0.0);
        assert!(check_stability_zeta2(1.0, 1.0, 3).is_err());
    }

    #[test]
    fn divergence_signs() {
        let f = VectorField3::whole_space(0.5, 1.0, 3).unwrap();
        let d = check_divergence(&f, None);
        assert!(d.negative());
        assert!((d.max - d.max_at_corners).abs() < 1e-12);
        let b = VectorField3::ball(2.0, 3.0).unwrap();
        let d = check_divergence(&b, None);
        assert!((d.max + 4.0).abs() < 1e-12);
    }

    #[test]
    fn transformed_ball_start_and_singular_coefficient() {
        let tr = integrate_transformed_ball(2.0, 3.0, 2, 0.5, 1.0).unwrap();
        assert!((tr.states[0][1] - 0.5).abs() < 1e-5);
        assert!(tr.states[0][0] < 1e-5 && tr.states[0][2] < 1e-5);
        let t: f64 = 1e-6;
        assert!(((1.0 / t.exp_m1()) * t - 1.0).abs() < 1e-6);
    }

    #[test]
    fn trajectory_csv_header() {
        let f = VectorField3::ball(2.0, 3.0).unwrap();
        let tr = integrate_autonomous(&f, [0.5, 0.5, 0.5], 1.0, 1e6);
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("t,X,Y,Z\n"));
    }
}

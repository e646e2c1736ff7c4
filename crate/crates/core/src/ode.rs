//! Dormand–Prince 5(4) stepper with PI step-size control.
//!
//! The stepper is driven one accepted step at a time so callers can inspect
//! the state, stop on events, or cap the next step. The independent variable
//! is accumulated with a compensated sum: steps far below `ulp(t)` still move
//! `t` forward in the low word, and each accepted step size is returned so
//! distances between nearby samples can be summed exactly.

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// Why a step could not be completed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepFailure {
    /// The controller asked for a step below the caller's floor.
    Underflow { h: f64 },
    /// The derivative at the current (accepted) state is not finite.
    NonFinite,
}

/// A DOPRI5 integrator for `y' = f(t, y)` with `y ∈ ℝᴰ`.
#[derive(Debug, Clone)]
pub struct Dopri5<const D: usize> {
    t: f64,
    t_lo: f64,
    y: [f64; D],
    dy: [f64; D],
    h: f64,
    rtol: f64,
    atol: [f64; D],
    facold: f64,
    last_rejected: bool,
    pub accepted: usize,
    pub rejected: usize,
}

fn axpy<const D: usize>(y: &[f64; D], terms: &[(f64, &[f64; D])]) -> [f64; D] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..D {
            out[i] += c * k[i];
        }
    }
    out
}

fn is_finite<const D: usize>(y: &[f64; D]) -> bool {
    y.iter().all(|v| v.is_finite())
}

impl<const D: usize> Dopri5<D> {
    /// Creates a stepper at `(t0, y0)` with one absolute tolerance per
    /// component. With `h0 = None` the first step is chosen from the local
    /// scale of the solution.
    pub fn new<F>(f: &mut F, t0: f64, y0: [f64; D], rtol: f64, atol: [f64; D], h0: Option<f64>) -> Self
    where
        F: FnMut(f64, &[f64; D]) -> [f64; D],
    {
        let dy = f(t0, &y0);
        let mut s = Self {
            t: t0,
            t_lo: 0.0,
            y: y0,
            dy,
            h: 0.0,
            rtol,
            atol,
            facold: 1e-4,
            last_rejected: false,
            accepted: 0,
            rejected: 0,
        };
        s.h = h0.unwrap_or_else(|| s.initial_step(f));
        s
    }

    fn norm(&self, v: &[f64; D], y_other: Option<&[f64; D]>) -> f64 {
        let mut sum = 0.0;
        for i in 0..D {
            let scale_y = match y_other {
                Some(o) => self.y[i].abs().max(o[i].abs()),
                None => self.y[i].abs(),
            };
            let sk = self.atol[i] + self.rtol * scale_y;
            sum += (v[i] / sk).powi(2);
        }
        (sum / D as f64).sqrt()
    }

    fn initial_step<F>(&self, f: &mut F) -> f64
    where
        F: FnMut(f64, &[f64; D]) -> [f64; D],
    {
        let d0 = self.norm(&self.y, None);
        let d1 = self.norm(&self.dy, None);
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        if self.t != 0.0 {
            h0 = h0.min(0.1 * self.t.abs());
        }
        let y1 = axpy(&self.y, &[(h0, &self.dy)]);
        let f1 = f(self.t + h0, &y1);
        let mut diff = [0.0; D];
        for i in 0..D {
            diff[i] = f1[i] - self.dy[i];
        }
        let d2 = self.norm(&diff, None) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        let h = (100.0 * h0).min(h1);
        if h.is_finite() && h > 0.0 {
            h
        } else {
            h0
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Low word of the compensated independent variable.
    pub fn t_low(&self) -> f64 {
        self.t_lo
    }

    pub fn y(&self) -> &[f64; D] {
        &self.y
    }

    /// `f(t, y)` at the current state.
    pub fn dy(&self) -> &[f64; D] {
        &self.dy
    }

    /// Step size proposed for the next attempt.
    pub fn next_step(&self) -> f64 {
        self.h
    }

    /// Attempts steps until one is accepted. The trial step is capped at
    /// `h_max` and at `t_limit - t`; `h_min` is the underflow floor.
    ///
    /// Returns the accepted step size.
    pub fn step<F>(&mut self, f: &mut F, t_limit: f64, h_max: f64, h_min: f64) -> Result<f64, StepFailure>
    where
        F: FnMut(f64, &[f64; D]) -> [f64; D],
    {
        if !is_finite(&self.dy) {
            return Err(StepFailure::NonFinite);
        }
        loop {
            let remaining = (t_limit - self.t) - self.t_lo;
            let mut h = self.h.min(h_max);
            let last = h >= remaining;
            if last {
                h = remaining;
            }
            if !(h >= h_min) || h <= 0.0 {
                return Err(StepFailure::Underflow { h });
            }
            let t = self.t + self.t_lo;
            let y = &self.y;
            let k1 = self.dy;
            let k2 = f(t + C2 * h, &axpy(y, &[(h * A21, &k1)]));
            let k3 = f(t + C3 * h, &axpy(y, &[(h * A31, &k1), (h * A32, &k2)]));
            let k4 = f(t + C4 * h, &axpy(y, &[(h * A41, &k1), (h * A42, &k2), (h * A43, &k3)]));
            let k5 = f(
                t + C5 * h,
                &axpy(y, &[(h * A51, &k1), (h * A52, &k2), (h * A53, &k3), (h * A54, &k4)]),
            );
            let ys = axpy(
                y,
                &[
                    (h * A61, &k1),
                    (h * A62, &k2),
                    (h * A63, &k3),
                    (h * A64, &k4),
                    (h * A65, &k5),
                ],
            );
            let k6 = f(t + h, &ys);
            let y_new = axpy(
                y,
                &[
                    (h * A71, &k1),
                    (h * A73, &k3),
                    (h * A74, &k4),
                    (h * A75, &k5),
                    (h * A76, &k6),
                ],
            );
            let k7 = f(t + h, &y_new);

            let mut err_vec = [0.0; D];
            for i in 0..D {
                err_vec[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            }
            let err = self.norm(&err_vec, Some(&y_new));
            if !err.is_finite() || !is_finite(&y_new) || !is_finite(&k7) {
                self.rejected += 1;
                self.last_rejected = true;
                self.h = h * FAC_MIN;
                continue;
            }

            let fac11 = err.powf(EXPO1);
            if err <= 1.0 {
                let fac = (fac11 / self.facold.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                let mut h_new = h / fac;
                if self.last_rejected {
                    h_new = h_new.min(h);
                }
                self.facold = err.max(1e-4);
                self.last_rejected = false;
                self.accepted += 1;
                if last {
                    self.t = t_limit;
                    self.t_lo = 0.0;
                } else {
                    // compensated t += h
                    let s = self.t + h;
                    let bp = s - self.t;
                    let lo = (self.t - (s - bp)) + (h - bp);
                    let s2 = s + (self.t_lo + lo);
                    self.t_lo = (self.t_lo + lo) - (s2 - s);
                    self.t = s2;
                }
                self.y = y_new;
                self.dy = k7;
                // keep the proposal from collapsing when a step was truncated at t_limit
                self.h = if last { h_new.max(self.h) } else { h_new };
                return Ok(h);
            }
            self.rejected += 1;
            self.last_rejected = true;
            self.h = h / (1.0 / FAC_MIN).min(fac11 / SAFETY);
        }
    }
}

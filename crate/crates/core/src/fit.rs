//! Least-squares line and power-law fits, plus a few order statistics.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual (weighted when weights were given).
    pub rms: f64,
}

/// Weighted least squares for `y = slope·x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64], weights: Option<&[f64]>) -> Result<LinearFit> {
    if xs.len() != ys.len() || weights.is_some_and(|w| w.len() != xs.len()) {
        return Err(Error::Fit("length mismatch".into()));
    }
    if xs.len() < 2 {
        return Err(Error::Fit("need at least two points".into()));
    }
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let (mut sw, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for i in 0..xs.len() {
        sw += w(i);
        sx += w(i) * xs[i];
        sy += w(i) * ys[i];
    }
    let (mx, my) = (sx / sw, sy / sw);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for i in 0..xs.len() {
        let dx = xs[i] - mx;
        sxx += w(i) * dx * dx;
        sxy += w(i) * dx * (ys[i] - my);
    }
    if !(sxx > 0.0) {
        return Err(Error::Fit("degenerate abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ss = 0.0;
    for i in 0..xs.len() {
        let e = ys[i] - slope * xs[i] - intercept;
        ss += w(i) * e * e;
    }
    let rms = (ss / sw).sqrt();
    if !(slope.is_finite() && intercept.is_finite()) {
        return Err(Error::Fit("non-finite coefficients".into()));
    }
    Ok(LinearFit { slope, intercept, rms })
}

/// Fits `y ≈ c·x^k` on positive data by a log-log line; returns `(k, c, rms)`.
pub fn power_law_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(Error::Fit("power-law fit needs positive data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let l = linear_fit(&lx, &ly, None)?;
    Ok((l.slope, l.intercept.exp(), l.rms))
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() || values.iter().any(|v| v.is_nan()) {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Golden-section minimisation of a unimodal `f` on `[a, b]`.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

//! Profiles `u(r)`, `v(r)` of boundary blow-up solutions normalised to the
//! unit ball, for a list of dimensions.

use std::io::Write;

use crate::error::{param, Error, Result};
use crate::radial::{integrate, normalize_to_unit_radius, Params, StepControls};

/// Vertical range kept in emitted `v` curves.
pub const V_CLIP: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// `p = 4, q = 3`: `u` bounded, `v` blows up.
    VOnly,
    /// `p = 2, q = 3`: both blow up.
    Both,
}

impl Figure {
    pub fn exponents(self) -> (f64, f64) {
        match self {
            Self::VOnly => (4.0, 3.0),
            Self::Both => (2.0, 3.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::VOnly => "fig2",
            Self::Both => "fig3",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "fig2" => Some(Self::VOnly),
            "fig3" => Some(Self::Both),
            _ => None,
        }
    }
}

pub const DEFAULT_DIMENSIONS: [usize; 3] = [2, 20, 40];

/// One dimension's normalised profile; `r ∈ (0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub n: usize,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl Profile {
    /// Linear interpolation of `(u, v)` at `r`.
    pub fn at(&self, r: f64) -> Option<(f64, f64)> {
        if r < self.r[0] || r > *self.r.last()? {
            return None;
        }
        let j = self.r.partition_point(|x| *x < r).max(1);
        let t = (r - self.r[j - 1]) / (self.r[j] - self.r[j - 1]);
        Some((
            self.u[j - 1] + t * (self.u[j] - self.u[j - 1]),
            self.v[j - 1] + t * (self.v[j] - self.v[j - 1]),
        ))
    }

    /// Writes `r,<quantity>`; `v` is clipped at [`V_CLIP`].
    pub fn write_curve<W: Write>(&self, quantity: &str, out: W) -> Result<()> {
        let values: Vec<f64> = match quantity {
            "u" => self.u.clone(),
            "v" => self.v.iter().map(|v| v.min(V_CLIP)).collect(),
            _ => return param(format!("unknown quantity {quantity}")),
        };
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["r", quantity])?;
        for (r, y) in self.r.iter().zip(values) {
            w.write_record([format!("{r:.16e}"), format!("{y:.16e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Integrates from `v(0) = m` and rescales to blow-up radius 1.
pub fn profile(figure: Figure, n: usize, m: f64, controls: &StepControls) -> Result<Profile> {
    let (p, q) = figure.exponents();
    let sol = integrate(&Params::power(p, q, n, m)?, controls)?;
    if sol.r_max().is_none() {
        return Err(Error::Fit(format!("{} with N = {n} did not blow up", figure.name())));
    }
    let unit = normalize_to_unit_radius(&sol, p, q)?;
    Ok(Profile {
        n,
        r: unit.samples.iter().map(|s| s.r).collect(),
        u: unit.samples.iter().map(|s| s.u).collect(),
        v: unit.samples.iter().map(|s| s.v).collect(),
    })
}

pub fn figure_profiles(figure: Figure, dims: &[usize], m: f64, controls: &StepControls) -> Result<Vec<Profile>> {
    dims.iter().map(|&n| profile(figure, n, m, controls)).collect()
}

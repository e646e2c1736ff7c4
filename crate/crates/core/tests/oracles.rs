//! Cross-checks against independent computations: a general eigensolver,
//! the scaling law linking the critical shooting value to the blow-up
//! radius, mesh refinement and invariance under shifts of `u(0)`.

use nalgebra::Matrix3;
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use radial_blowup::dynsys::{char_poly, critical_shooting_value, cubic_roots, integrate_transformed_ball};
use radial_blowup::{ball_rates, integrate, Params, StepControls};

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn cubic_roots_match_general_eigensolver() {
    let mut rng = StdRng::seed_from_u64(7);
    for _ in 0..500 {
        let m: [[f64; 3]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| rng.random_range(-5.0..5.0)));
        let mut ours = cubic_roots(&char_poly(&m)).to_vec();
        let nm = Matrix3::from_fn(|i, j| m[i][j]);
        let mut theirs: Vec<Complex64> = nm.complex_eigenvalues().iter().copied().collect();
        let key =
            |a: &Complex64, b: &Complex64| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap());
        ours.sort_by(key);
        theirs.sort_by(key);
        let scale = 1.0 + nm.norm();
        for (a, b) in ours.iter().zip(&theirs) {
            assert!((a - b).norm() <= 1e-6 * scale, "{m:?}: {ours:?} vs {theirs:?}");
        }
    }
}

#[test]
fn critical_shooting_value_matches_scaling_law() {
    let (p, q, n) = (2.0, 3.0, 3);
    let rates = ball_rates(p, q).unwrap();
    let m_star = critical_shooting_value(p, q, n).unwrap();
    let r1 = integrate(&Params::power(p, q, n, 1.0).unwrap(), &StepControls::default())
        .unwrap()
        .r_max()
        .unwrap();
    // R_max(m) = R_max(1) m^(−1/β), so R_max(m*) = 1 at m* = R_max(1)^β
    assert!(
        rel(m_star, r1.powf(rates.beta)) < 1e-4,
        "{m_star} vs {}",
        r1.powf(rates.beta)
    );

    let traj = integrate_transformed_ball(p, q, n, m_star / rates.b, 12.0).unwrap();
    let last = traj.last();
    assert!(last.iter().all(|x| (x - 1.0).abs() < 0.05), "{last:?}");
}

#[test]
fn subcritical_trajectories_decay() {
    let (p, q, n) = (4.0, 3.0, 2);
    let rates = ball_rates(p, q).unwrap();
    let m_star = critical_shooting_value(p, q, n).unwrap();
    let traj = integrate_transformed_ball(p, q, n, 0.5 * m_star / rates.b, 40.0).unwrap();
    assert!(traj.last().iter().all(|x| x.abs() < 1e-3));
    assert!(integrate_transformed_ball(p, q, n, 2.0 * m_star / rates.b, 40.0).is_err());
}

#[test]
fn blowup_radius_converges_under_refinement() {
    let params = Params::power(2.0, 3.0, 2, 1.0).unwrap();
    let radii: Vec<f64> = [1e-7, 1e-9, 1e-11]
        .iter()
        .map(|&rtol| {
            let c = StepControls {
                rtol,
                atol: rtol * 1e-3,
                ..StepControls::default()
            };
            integrate(&params, &c).unwrap().r_max().unwrap()
        })
        .collect();
    assert!(rel(radii[1], radii[2]) < 1e-7, "{radii:?}");
    assert!((radii[1] - radii[2]).abs() <= (radii[0] - radii[2]).abs() + 1e-12);
}

#[test]
fn u0_only_shifts_u() {
    let base = Params::power(2.0, 2.0, 5, 1.5).unwrap();
    let c = StepControls::default();
    let a = integrate(&base, &c).unwrap();
    let b = integrate(&base.clone().with_u0(-3.0), &c).unwrap();
    assert_eq!(a.samples.len(), b.samples.len());
    for (x, y) in a.samples.iter().zip(&b.samples) {
        assert_eq!((x.r, x.w, x.v, x.psi), (y.r, y.w, y.v, y.psi));
        assert!((x.u - y.u - 4.0).abs() < 1e-9 * x.u.abs().max(1.0));
    }
    assert_eq!(a.r_max(), b.r_max());
}

#[test]
fn ball_domain_stops_at_radius() {
    let p = Params {
        domain: radial_blowup::Domain::Ball { radius: 1.0 },
        ..Params::power(2.0, 3.0, 3, 0.5).unwrap()
    };
    let sol = integrate(&p, &StepControls::default()).unwrap();
    assert_eq!(sol.last().r, 1.0);
    assert!(sol.r_max().is_none());
}

use std::f64::consts::PI;

use num_complex::Complex64;
use qdyn1d_core::dynamics::{
    abel_amplitudes, bound_scaling_harness, borel_transform, build_operator, dynamics_report, eigen, moment,
    outside_probability, predicted_beta_bound, transport_exponent, BoundKind, LatticeOperator,
};
use qdyn1d_core::{Error, Geometry, PotentialSamples, Window};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_half_line(sites: usize, seed: u64) -> LatticeOperator {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..sites).map(|_| rng.random_range(-1.0..1.0)).collect();
    build_operator(&PotentialSamples::new(1, values).unwrap(), Geometry::HalfLine).unwrap()
}

fn free(sites: usize) -> LatticeOperator {
    build_operator(&PotentialSamples::constant(Window::half_line(sites), 0.0), Geometry::HalfLine).unwrap()
}

fn geometric(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64)).collect()
}

/// Abel average by RK4 time stepping of i ψ' = Hψ and Simpson quadrature,
/// truncated at t = 20T.
fn abel_by_time_stepping(op: &LatticeOperator, t: f64, dt: f64) -> Vec<f64> {
    let n = op.size();
    let h = |psi: &[Complex64]| -> Vec<Complex64> {
        (0..n)
            .map(|i| {
                let mut s = psi[i] * op.diagonal[i];
                if i > 0 {
                    s += psi[i - 1];
                }
                if i + 1 < n {
                    s += psi[i + 1];
                }
                Complex64::new(s.im, -s.re)
            })
            .collect()
    };
    let axpy = |x: &[Complex64], k: &[Complex64], c: f64| -> Vec<Complex64> {
        x.iter().zip(k).map(|(a, b)| a + b * c).collect()
    };
    let steps = (20.0 * t / dt).round() as usize;
    let mut psi = vec![Complex64::new(0.0, 0.0); n];
    psi[op.origin()] = Complex64::new(1.0, 0.0);
    let mut acc = vec![0.0; n];
    for s in 0..=steps {
        let w = if s == 0 || s == steps { 1.0 } else if s % 2 == 1 { 4.0 } else { 2.0 };
        let damp = (-2.0 * s as f64 * dt / t).exp();
        for (a, p) in acc.iter_mut().zip(&psi) {
            *a += w * damp * p.norm_sqr();
        }
        let k1 = h(&psi);
        let k2 = h(&axpy(&psi, &k1, dt / 2.0));
        let k3 = h(&axpy(&psi, &k2, dt / 2.0));
        let k4 = h(&axpy(&psi, &k3, dt));
        for i in 0..n {
            psi[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0);
        }
    }
    acc.iter().map(|a| a * dt / 3.0 / t).collect()
}

/// |⟨δ_n, (H − z)⁻¹ δ_o⟩|² integrated over all E with E = 3 tan φ and the
/// midpoint rule in φ.
fn abel_by_resolvent(op: &LatticeOperator, t: f64, points: usize) -> Vec<f64> {
    let eps = 1.0 / t;
    let h = PI / points as f64;
    let mut acc = vec![0.0; op.size()];
    for s in 0..points {
        let phi = -PI / 2.0 + (s as f64 + 0.5) * h;
        let jacobian = 3.0 / phi.cos().powi(2);
        let column = op.resolvent_column(Complex64::new(3.0 * phi.tan(), eps));
        for (a, g) in acc.iter_mut().zip(&column) {
            *a += jacobian * g.norm_sqr();
        }
    }
    acc.iter().map(|a| a * h * eps / (2.0 * PI)).collect()
}

#[test]
fn small_operators() {
    let op = free(2);
    assert_eq!(op.diagonal, vec![0.0, 0.0]);
    let whole = build_operator(&PotentialSamples::constant(Window::whole_line(1), 0.0), Geometry::WholeLine).unwrap();
    assert_eq!(whole.size(), 3);
    assert_eq!(whole.origin(), 1);
    let err = build_operator(&PotentialSamples::constant(Window::whole_line(1), 0.0), Geometry::HalfLine).unwrap_err();
    assert!(matches!(err, Error::WindowMismatch(_)));
}

#[test]
fn free_eigenvalues_are_cosines() {
    let n = 60;
    let eig = eigen(&free(n)).unwrap();
    let mut exact: Vec<f64> = (1..=n).map(|j| 2.0 * (j as f64 * PI / (n + 1) as f64).cos()).collect();
    exact.sort_by(f64::total_cmp);
    for (a, b) in eig.values.iter().zip(&exact) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!(eig.max_residual < 1e-8);
    assert!((eig.spectral_mass() - 1.0).abs() < 1e-12);
}

#[test]
fn single_site_amplitude_and_transform() {
    let op = build_operator(&PotentialSamples::new(1, vec![0.7]).unwrap(), Geometry::HalfLine).unwrap();
    let eig = eigen(&op).unwrap();
    for t in [0.1, 1.0, 1e3] {
        let a = abel_amplitudes(&eig, t).unwrap();
        assert!((a[0] - 0.5).abs() < 1e-15);
        assert!((moment(&op, &a, 3.0).unwrap() - 0.5).abs() < 1e-15);
    }
    let f = borel_transform(&eig, 0.2, 0.05).unwrap();
    let exact = Complex64::new(1.0, 0.0) / Complex64::new(0.7 - 0.2, -0.05);
    assert!((f - exact).norm() < 1e-14);
    assert!(bound_scaling_harness(&eig, 0.7, 0.0, 2.0, &[1.0, 2.0]).is_err());
}

#[test]
fn amplitudes_sum_to_one_half_and_are_nonnegative() {
    let eig = eigen(&random_half_line(80, 3)).unwrap();
    for t in [0.5, 3.0, 40.0, 1e4] {
        let a = abel_amplitudes(&eig, t).unwrap();
        assert!((a.iter().sum::<f64>() - 0.5).abs() < 1e-8);
        assert!(a.iter().all(|&x| x >= -1e-12));
    }
}

#[test]
fn amplitudes_match_time_stepping() {
    let op = random_half_line(50, 11);
    let t = 4.0;
    let a = abel_amplitudes(&eigen(&op).unwrap(), t).unwrap();
    let oracle = abel_by_time_stepping(&op, t, 0.005);
    let err = a.iter().zip(&oracle).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(err < 1e-6, "max error {err:e}");
}

#[test]
fn amplitudes_match_resolvent_route() {
    let op = random_half_line(30, 12);
    let t = 5.0;
    let a = abel_amplitudes(&eigen(&op).unwrap(), t).unwrap();
    let oracle = abel_by_resolvent(&op, t, 200_000);
    let err = a.iter().zip(&oracle).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(err < 1e-4, "max error {err:e}");
}

#[test]
fn energy_shift_leaves_amplitudes_unchanged() {
    let op = random_half_line(40, 5);
    let mut shifted = op.clone();
    shifted.diagonal.iter_mut().for_each(|x| *x += 0.75);
    let a = abel_amplitudes(&eigen(&op).unwrap(), 6.0).unwrap();
    let b = abel_amplitudes(&eigen(&shifted).unwrap(), 6.0).unwrap();
    assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
}

#[test]
fn moments_increase_with_p_on_the_half_line() {
    let op = random_half_line(60, 9);
    let a = abel_amplitudes(&eigen(&op).unwrap(), 8.0).unwrap();
    let ms: Vec<f64> = [0.5, 1.0, 2.0, 4.0].iter().map(|&p| moment(&op, &a, p).unwrap()).collect();
    assert!(ms.windows(2).all(|w| w[0] <= w[1]));
    assert!((moment(&op, &a, 1e-9).unwrap() - 0.5).abs() < 1e-6);
}

#[test]
fn borel_transform_is_herglotz_with_unit_mass() {
    let eig = eigen(&random_half_line(30, 7)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let f = borel_transform(&eig, rng.random_range(-5.0..5.0), rng.random_range(1e-3..1.0)).unwrap();
        assert!(f.im > 0.0);
    }
    let eps = 0.1;
    let (lo, hi, points) = (-2000.0, 2000.0, 400_000);
    let h = (hi - lo) / points as f64;
    let integral: f64 = (0..=points)
        .map(|s| {
            let w = if s == 0 || s == points { 1.0 } else if s % 2 == 1 { 4.0 } else { 2.0 };
            w * borel_transform(&eig, lo + s as f64 * h, eps).unwrap().im
        })
        .sum::<f64>()
        * h
        / 3.0;
    assert!((integral / PI - 1.0).abs() < 0.01);
}

#[test]
fn free_lattice_is_ballistic() {
    let eig = eigen(&free(1000)).unwrap();
    let ts = geometric(10.0, 100.0, 8);
    let report = dynamics_report(&eig, &ts, &[2.0], 0.0).unwrap();
    let fit = report.fits[0].as_ref().unwrap();
    assert!(fit.beta >= 1.8 && fit.beta <= 2.05, "beta = {}", fit.beta);
    assert!(report.rows.iter().all(|r| (r.total - 0.5).abs() < 1e-8));
}

#[test]
fn guard_excludes_late_times() {
    let eig = eigen(&free(100)).unwrap();
    let ts = geometric(2.0, 400.0, 10);
    let report = dynamics_report(&eig, &ts, &[2.0], 0.0).unwrap();
    assert!(report.rows.last().map(|r| !r.guard_ok).unwrap());
    match &report.fits[0] {
        Ok(fit) => assert!(fit.flagged()),
        Err(e) => assert!(matches!(e, Error::FiniteSizeViolation(_))),
    }
}

#[test]
fn outside_probability_guards_large_radius() {
    let op = free(40);
    let a = abel_amplitudes(&eigen(&op).unwrap(), 1e3).unwrap();
    assert!(matches!(outside_probability(&op, &a, 0.0, 1e3), Err(Error::FiniteSizeViolation(_))));
}

#[test]
fn exact_power_series_fit() {
    let ts = geometric(1.0, 1e3, 9);
    let ms: Vec<f64> = ts.iter().map(|t| 3.0 * t.powf(1.37)).collect();
    let fit = transport_exponent(&ts, &ms, &[true; 9], 2.0).unwrap();
    assert!((fit.beta - 1.37).abs() < 1e-6);
    assert!((fit.beta_running_min - 1.37).abs() < 1e-6);
}

#[test]
fn bound_formulas() {
    assert_eq!(predicted_beta_bound(BoundKind::PeriodDoubling, 7.0, 1.0).unwrap(), 1.0);
    assert_eq!(predicted_beta_bound(BoundKind::PowerLaw, 4.5, 0.0).unwrap(), 4.5);
    assert_eq!(predicted_beta_bound(BoundKind::Perturbed, 9.0, 1.0).unwrap(), 2.0);
    assert_eq!(predicted_beta_bound(BoundKind::Eigenvalue, 5.0, 1.0).unwrap(), 2.0);
    assert_eq!(predicted_beta_bound(BoundKind::Bounded, 5.0, 0.0).unwrap(), 4.0);
    assert!(matches!("gamma".parse::<BoundKind>(), Err(Error::UnknownBound(_))));
}

#[test]
fn free_harness_is_bounded_below() {
    let eig = eigen(&free(1000)).unwrap();
    let report = bound_scaling_harness(&eig, 0.0, 0.0, 2.0, &geometric(10.0, 60.0, 6)).unwrap();
    assert!(report.rows.iter().all(|r| r.guard_ok));
    assert!(report.ratio_min > 0.0);
    let first = report.rows[0].ratio;
    assert!(report.rows.iter().all(|r| r.ratio >= 0.5 * first));
}

use qdyn1d_core::perturb::{make_perturbation, prufer_trace, stability_check, PerturbationSpec, SignPattern};
use qdyn1d_core::potentials::{realize, Family};
use qdyn1d_core::{PotentialSamples, PotentialSpec, Window};

fn period_doubling(n: usize) -> PotentialSamples {
    realize(&PotentialSpec::period_doubling(0.0, 1.0), Window::half_line(n)).unwrap()
}

fn power_law(c2: f64, decay: f64, n: usize) -> PotentialSamples {
    let mut spec = PerturbationSpec::new(c2, decay);
    spec.offset = 0.0;
    make_perturbation(&spec, Window::half_line(n)).unwrap()
}

#[test]
fn envelope_at_first_site() {
    let w = make_perturbation(&PerturbationSpec::new(1.0, 4.0), Window::half_line(3)).unwrap();
    assert_eq!(w.at(1).unwrap(), 1.0 / 16.0);
    let mut alternating = PerturbationSpec::new(1.0, 4.0);
    alternating.pattern = SignPattern::Alternating;
    let w = make_perturbation(&alternating, Window::half_line(3)).unwrap();
    assert_eq!(w.at(1).unwrap(), -1.0 / 16.0);
}

#[test]
fn admissibility() {
    let mut finite = PerturbationSpec::new(2.0, 0.0);
    finite.support = Some(10);
    assert!(finite.admissible(5.0));
    let w = make_perturbation(&finite, Window::half_line(20)).unwrap();
    assert!(w.iter().all(|(n, x)| (n <= 10) == (x != 0.0)));
    let flat = PerturbationSpec::new(1.0, 0.0);
    assert!(make_perturbation(&flat, Window::half_line(4)).is_ok());
    assert!(!flat.admissible(0.0));
    assert!(PerturbationSpec::new(1.0, 3.5).admissible(1.0));
    assert!(!PerturbationSpec::new(1.0, 3.0).admissible(1.0));
}

#[test]
fn unperturbed_amplitudes_are_constant() {
    let v = period_doubling(2048);
    let w = PotentialSamples::constant(v.window(), 0.0);
    let trace = prufer_trace(&v, &w, 0.0, 2048).unwrap();
    assert_eq!(trace.omega, -2.0);
    assert_eq!(trace.max_residual(), 0.0);
    for series in [&trace.dirichlet, &trace.neumann] {
        assert!(series.r.iter().all(|&r| (r - series.r[0]).abs() < 1e-12));
    }
    let report = stability_check(&v, &w, 0.0, 2048).unwrap();
    assert_eq!(report.delta, 0.0);
}

#[test]
fn period_doubling_with_quartic_decay() {
    let n = 1 << 14;
    let v = period_doubling(n);
    let w = power_law(1.0, 4.0, n);
    let trace = prufer_trace(&v, &w, 0.0, n as u64).unwrap();
    assert!(trace.max_residual() < 1e-10, "residual {:e}", trace.max_residual());
    assert!(trace.max_growth() < 10.0, "growth {}", trace.max_growth());
    assert!(trace.dirichlet.reconstruction_error < 1e-10);
    assert!(trace.neumann.reconstruction_error < 1e-10);
    assert!(trace.max_growth() <= trace.growth_bound() * (1.0 + 1e-6));
    assert!(stability_check(&v, &w, 0.0, n as u64).unwrap().delta < 0.2);
}

#[test]
fn hierarchical_band_center_is_stable() {
    let n = 1 << 14;
    let spec = PotentialSpec::half_line(Family::Hierarchical { lambda: 1.0, r: 4.0, v0: 0.0 });
    let v = realize(&spec, Window::half_line(n)).unwrap();
    let w = power_law(1.0, 5.5, n);
    let report = stability_check(&v, &w, 0.0, n as u64).unwrap();
    assert!(report.delta < 0.2, "delta {}", report.delta);
    assert!((report.unperturbed.alpha - 2.0).abs() < 0.15);
}

#[test]
fn identity_holds_under_random_signs() {
    let n = 4096;
    let v = period_doubling(n);
    let mut spec = PerturbationSpec::new(0.5, 3.0);
    spec.pattern = SignPattern::SeededRandom { seed: 17 };
    let w = make_perturbation(&spec, Window::half_line(n)).unwrap();
    let trace = prufer_trace(&v, &w, 0.0, n as u64).unwrap();
    assert!(trace.u.iter().all(|u| u.abs() < 1.0));
    assert!(trace.max_residual() < 1e-10);
}

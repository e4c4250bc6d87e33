use proptest::prelude::*;
use qdyn1d_core::cfrac::Omega;
use qdyn1d_core::dynamics::{abel_amplitudes, borel_transform, build_operator, eigen};
use qdyn1d_core::potentials::{realize, subst_fixed_point, Family, SubstitutionRule, Symbol};
use qdyn1d_core::tracemap::trace_orbit;
use qdyn1d_core::transfer::{solve_difference, transfer_product};
use qdyn1d_core::{Geometry, PotentialSamples, PotentialSpec, Window};

fn samples(values: Vec<f64>) -> PotentialSamples {
    PotentialSamples::new(1, values).unwrap()
}

fn word() -> impl Strategy<Value = Vec<Symbol>> {
    prop::collection::vec(prop_oneof![Just(Symbol::A), Just(Symbol::B)], 0..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unit_determinant(values in prop::collection::vec(-0.1f64..0.1, 1..2000), energy in -1.0f64..1.0) {
        let v = samples(values);
        let n = v.window().end;
        let t = transfer_product(&v, n, 0, energy).unwrap();
        prop_assert!((t.det() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn cocycle_composition(
        values in prop::collection::vec(-0.3f64..0.3, 3..2000),
        energy in -1.5f64..1.5,
        picks in prop::array::uniform3(0.0f64..1.0),
    ) {
        let v = samples(values);
        let len = v.window().end as f64;
        let mut sites = picks.map(|p| (p * len).floor() as i64);
        sites.sort();
        let [m, l, n] = sites;
        let whole = transfer_product(&v, n, m, energy).unwrap();
        let a = transfer_product(&v, n, l, energy).unwrap();
        let b = transfer_product(&v, l, m, energy).unwrap();
        prop_assert!(whole.max_abs_diff(&(a * b)) <= 1e-8 * a.op_norm() * b.op_norm());
        let back = transfer_product(&v, m, n, energy).unwrap();
        prop_assert!((back * whole).max_abs_diff(&qdyn1d_core::Mat2::IDENTITY) <= 1e-8 * whole.op_norm().powi(2));
    }

    #[test]
    fn columns_are_solutions(values in prop::collection::vec(-2.0f64..2.0, 2..40), energy in -3.0f64..3.0) {
        let v = samples(values);
        let n = v.window().end - 1;
        let t = transfer_product(&v, n, 0, energy).unwrap();
        let d = solve_difference(&v, energy, 0, (0.0, 1.0), n + 1).unwrap();
        let u = solve_difference(&v, energy, 0, (1.0, 0.0), n + 1).unwrap();
        let n = n as usize;
        let scale = t.max_abs().max(1.0);
        prop_assert!((t.0[0][0] - d[n + 1]).abs() < 1e-10 * scale);
        prop_assert!((t.0[1][0] - d[n]).abs() < 1e-10 * scale);
        prop_assert!((t.0[0][1] - u[n + 1]).abs() < 1e-10 * scale);
        prop_assert!((t.0[1][1] - u[n]).abs() < 1e-10 * scale);
    }

    #[test]
    fn unimodular_norm_at_least_one(values in prop::collection::vec(-3.0f64..3.0, 1..50), energy in -4.0f64..4.0) {
        let v = samples(values);
        let t = transfer_product(&v, v.window().end, 0, energy).unwrap();
        prop_assert!(t.op_norm() >= 1.0 - 1e-12);
    }

    #[test]
    fn fixed_point_is_invariant(tail_a in word(), image_b in word().prop_filter("nonempty", |w| !w.is_empty())) {
        let mut image_a = vec![Symbol::A];
        image_a.extend(tail_a);
        let rule = SubstitutionRule::new(image_a, image_b).unwrap();
        let u = match subst_fixed_point(&rule, Symbol::A, 200) {
            Ok(u) => u,
            Err(_) => return Ok(()),
        };
        let image: Vec<Symbol> = u.iter().flat_map(|&s| rule.image(s).to_vec()).collect();
        let k = image.len().min(u.len());
        prop_assert_eq!(&image[..k], &u[..k]);
    }

    #[test]
    fn sturmian_frequency(p in 1i64..5, q in 3i64..9, theta in 0.0f64..1.0) {
        let omega = Omega::Surd { p: -p, d: p * p + 1, q: 1 };
        let w = match omega.value() {
            Ok(w) if w > 0.0 && w < 1.0 => w,
            _ => return Ok(()),
        };
        let n = 1000 * q as usize;
        let spec = PotentialSpec::half_line(Family::Sturmian { lambda: 1.0, omega, theta });
        let v = realize(&spec, Window::half_line(n)).unwrap();
        let freq = v.values.iter().sum::<f64>() / n as f64;
        prop_assert!((freq - w).abs() < 2.0 / n as f64);
    }

    #[test]
    fn hierarchical_symmetry(lambda in 0.1f64..3.0, r in 0.2f64..5.0, m in 1u32..8, k in 1i64..128, l in -4i64..4) {
        let period = 1i64 << m;
        let k = k % period;
        prop_assume!(k != 0);
        let spec = PotentialSpec::new(Family::Hierarchical { lambda, r, v0: 0.0 }, Geometry::WholeLine);
        let v = realize(&spec, Window::whole_line(1 << 10)).unwrap();
        prop_assert_eq!(v.at(l * period + k).unwrap(), v.at(k).unwrap());
        prop_assert_eq!(v.at(-k).unwrap(), v.at(k).unwrap());
    }

    #[test]
    fn trace_map_matches_product(energy in -3.0f64..3.0, lambda in 0.5f64..2.0, r in prop::sample::select(vec![0.5, 1.0, 2.0, 3.0])) {
        let spec = PotentialSpec::half_line(Family::Hierarchical { lambda, r, v0: 0.0 });
        let v = realize(&spec, Window::half_line(1 << 7)).unwrap();
        let orbit = trace_orbit(energy, lambda, r, 7).unwrap();
        for (m, x) in orbit.traces.iter().enumerate() {
            let t = transfer_product(&v, 1 << m, 0, energy).unwrap().trace();
            prop_assert!((x - t).abs() <= 1e-6 * t.abs().max(1.0), "m={} {} vs {}", m, x, t);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn abel_normalization(values in prop::collection::vec(-2.0f64..2.0, 1..60), t in 0.1f64..1e3) {
        let eig = eigen(&build_operator(&samples(values), Geometry::HalfLine).unwrap()).unwrap();
        let a = abel_amplitudes(&eig, t).unwrap();
        prop_assert!((a.iter().sum::<f64>() - 0.5).abs() < 1e-8);
        prop_assert!(a.iter().all(|&x| x >= -1e-12));
    }

    #[test]
    fn herglotz(values in prop::collection::vec(-2.0f64..2.0, 1..40), energy in -6.0f64..6.0, eps in 1e-4f64..2.0) {
        let eig = eigen(&build_operator(&samples(values), Geometry::HalfLine).unwrap()).unwrap();
        prop_assert!(borel_transform(&eig, energy, eps).unwrap().im > 0.0);
    }
}

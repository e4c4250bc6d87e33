use std::cmp::Ordering;

use num_bigint::BigInt;
use qdyn1d_core::cfrac::{
    bounded_density, cf_expand, convergents, coupling_constant, sturmian_alpha, CFExpansion, Omega,
};
use qdyn1d_core::dynamics::{predicted_beta_bound, BoundKind};
use qdyn1d_core::Error;

#[test]
fn golden_mean_is_all_ones() {
    let exp = cf_expand(&Omega::GoldenMean, 500).unwrap();
    assert!(exp.exact && !exp.truncated);
    assert_eq!(exp.depth(), 500);
    assert!(exp.quotients.iter().all(|&a| a == 1));
}

#[test]
fn silver_mean_is_all_twos() {
    let exp = cf_expand(&Omega::SilverMean, 300).unwrap();
    assert!(exp.quotients.iter().all(|&a| a == 2));
    let same = cf_expand(&Omega::Surd { p: -1, d: 2, q: 1 }, 300).unwrap();
    assert_eq!(same.quotients, exp.quotients);
}

#[test]
fn rational_inputs_are_rejected() {
    assert_eq!(cf_expand(&Omega::Decimal("0.3333333333333333333333333333333333333".into()), 10).unwrap_err(), Error::RationalInput);
    assert_eq!(cf_expand(&Omega::Surd { p: 1, d: 4, q: 9 }, 10).unwrap_err(), Error::RationalInput);
}

#[test]
fn golden_denominators_are_fibonacci() {
    let exp = cf_expand(&Omega::GoldenMean, 10).unwrap();
    let q: Vec<BigInt> = convergents(&exp).into_iter().map(|(_, q)| q).collect();
    let fib: Vec<BigInt> = [1, 1, 2, 3, 5, 8, 13, 21, 34, 55, 89].into_iter().map(BigInt::from).collect();
    assert_eq!(q, fib);
}

#[test]
fn single_quotient_convergent() {
    let conv = convergents(&CFExpansion::from_quotients(vec![4]).unwrap());
    assert_eq!(conv[1], (BigInt::from(1), BigInt::from(4)));
}

#[test]
fn convergents_are_exact_and_sandwich_omega() {
    for omega in [Omega::GoldenMean, Omega::SilverMean, Omega::Surd { p: -2, d: 7, q: 1 }] {
        let exp = cf_expand(&omega, 120).unwrap();
        let conv = convergents(&exp);
        for k in 1..conv.len() {
            let (p, q) = &conv[k];
            let (pp, qp) = &conv[k - 1];
            let det = q * pp - p * qp;
            assert_eq!(det, BigInt::from(if k % 2 == 0 { 1 } else { -1 }), "k={k}");
            let expected = if k % 2 == 0 { Ordering::Greater } else { Ordering::Less };
            assert_eq!(omega.cmp_rational(p, q).unwrap(), expected, "k={k}");
        }
    }
}

#[test]
fn convergents_approximate_within_inverse_square() {
    let omega = Omega::Surd { p: 2, d: 11, q: 7 };
    let w = omega.value().unwrap();
    let conv = convergents(&cf_expand(&omega, 20).unwrap());
    for (p, q) in conv.iter().skip(1).take(12) {
        let (p, q) = (p.to_string().parse::<f64>().unwrap(), q.to_string().parse::<f64>().unwrap());
        assert!((w - p / q).abs() < 1.0 / (q * q));
    }
}

#[test]
fn density_examples() {
    let golden = cf_expand(&Omega::GoldenMean, 200).unwrap();
    assert_eq!(bounded_density(&golden).unwrap().d_hat, 1.0);
    let twos = CFExpansion::from_quotients(vec![2; 40]).unwrap();
    assert_eq!(bounded_density(&twos).unwrap().d_hat, 2.0);
    let alternating = CFExpansion::from_quotients((0..40).map(|k| 1 + k % 2).collect()).unwrap();
    assert_eq!(bounded_density(&alternating).unwrap().d_hat, 1.5);
}

#[test]
fn golden_density_stays_one_at_any_depth() {
    for depth in [10, 37, 200, 1000] {
        assert_eq!(bounded_density(&cf_expand(&Omega::GoldenMean, depth).unwrap()).unwrap().d_hat, 1.0);
    }
}

#[test]
fn coupling_constant_and_exponent() {
    assert_eq!(coupling_constant(1.0), 5.0);
    let golden = cf_expand(&Omega::GoldenMean, 200).unwrap();
    let s = sturmian_alpha(1.0, &golden, 1.0).unwrap();
    assert_eq!(s.alpha, 5f64.ln());
    assert_eq!(sturmian_alpha(0.0, &golden, 1.0).unwrap_err(), Error::ZeroCoupling);
    let bound = predicted_beta_bound(BoundKind::PowerLaw, 10.0, s.alpha).unwrap();
    assert!((bound - (10.0 - 3.0 * 5f64.ln()) / (1.0 + 5f64.ln())).abs() < 1e-15);
}

#[test]
fn exponent_grows_with_density_and_coupling() {
    let golden = cf_expand(&Omega::GoldenMean, 200).unwrap();
    let silver = cf_expand(&Omega::SilverMean, 200).unwrap();
    let a = sturmian_alpha(1.0, &golden, 1.0).unwrap().alpha;
    assert!(sturmian_alpha(1.0, &silver, 1.0).unwrap().alpha > a);
    assert!(sturmian_alpha(2.0, &golden, 1.0).unwrap().alpha > a);
    assert!(coupling_constant(0.01) >= 2.0 + 8f64.sqrt());
}

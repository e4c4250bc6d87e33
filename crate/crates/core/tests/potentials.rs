use qdyn1d_core::cfrac::Omega;
use qdyn1d_core::potentials::{
    check_structure, parse_word, prime_table, realize, special_energies, subst_fixed_point, symbols, word_to_string,
    Condition, Family, GrowthClass, SubstitutionRule, Symbol,
};
use qdyn1d_core::{Error, Geometry, PotentialSpec, Window};

fn fixed_point(rule: &SubstitutionRule, len: usize) -> String {
    word_to_string(&subst_fixed_point(rule, Symbol::A, len).unwrap())
}

#[test]
fn period_doubling_prefix() {
    assert_eq!(fixed_point(&SubstitutionRule::period_doubling(), 18), "abaaabababaaabaaab");
}

#[test]
fn fibonacci_prefix() {
    assert_eq!(fixed_point(&SubstitutionRule::fibonacci(), 8), "abaababa");
}

#[test]
fn identity_rule_repeats_the_seed() {
    let rule = SubstitutionRule::parse("a", "b").unwrap();
    assert_eq!(fixed_point(&rule, 3), "aaa");
}

#[test]
fn non_prefix_rule_is_rejected() {
    let rule = SubstitutionRule::parse("ba", "a").unwrap();
    assert_eq!(subst_fixed_point(&rule, Symbol::A, 4), Err(Error::NonPrefixRule));
}

#[test]
fn sturmian_golden_mean_on_first_sites() {
    let spec = PotentialSpec::half_line(Family::Sturmian { lambda: 1.0, omega: Omega::GoldenMean, theta: 0.0 });
    let v = realize(&spec, Window::half_line(8)).unwrap();
    assert_eq!(v.values, vec![1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
}

#[test]
fn sturmian_frequency_matches_rotation_number() {
    let spec = PotentialSpec::half_line(Family::Sturmian { lambda: 1.0, omega: Omega::SilverMean, theta: 0.3 });
    let n = 100_000;
    let v = realize(&spec, Window::half_line(n)).unwrap();
    let freq = v.values.iter().sum::<f64>() / n as f64;
    assert!((freq - (2f64.sqrt() - 1.0)).abs() < 2.0 / n as f64);
}

#[test]
fn prime_potential_on_first_sites() {
    let spec = PotentialSpec::half_line(Family::Prime { a: 0.0, b: 1.0 });
    assert_eq!(realize(&spec, Window::half_line(4)).unwrap().values, vec![0.0, 1.0, 1.0, 0.0]);
}

fn is_prime_trial(n: usize) -> bool {
    n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0)
}

#[test]
fn prime_sieve_agrees_with_trial_division() {
    let n = 100_000;
    let table = prime_table(n);
    let mismatches = (0..=n).filter(|&k| table[k] != is_prime_trial(k)).count();
    assert_eq!(mismatches, 0);
}

#[test]
fn sparse_potential_marks_powers() {
    let spec = PotentialSpec::half_line(Family::Sparse { a: 0.0, b: 1.0, gamma: 3 });
    let v = realize(&spec, Window::half_line(100_000)).unwrap();
    let marked: Vec<i64> = v.iter().filter(|&(_, x)| x == 1.0).map(|(n, _)| n).collect();
    let powers: Vec<i64> = std::iter::successors(Some(3i64), |p| Some(p * 3)).take_while(|&p| p <= 100_000).collect();
    assert_eq!(marked, powers);
}

#[test]
fn hierarchical_value_at_four() {
    let spec = PotentialSpec::half_line(Family::Hierarchical { lambda: 1.0, r: 2.0, v0: 0.0 });
    let v = realize(&spec, Window::half_line(4)).unwrap();
    assert_eq!(v.at(4).unwrap(), 3.0);
}

#[test]
fn hierarchical_translation_and_reflection_symmetry() {
    let spec = PotentialSpec::new(Family::Hierarchical { lambda: 0.7, r: 1.5, v0: 0.0 }, Geometry::WholeLine);
    let v = realize(&spec, Window::whole_line(1 << 10)).unwrap();
    for m in 0..8u32 {
        let period = 1i64 << m;
        for k in 1..period {
            for l in [-3i64, -1, 1, 2] {
                assert_eq!(v.at(l * period + k).unwrap(), v.at(k).unwrap(), "m={m} k={k} l={l}");
            }
            assert_eq!(v.at(-k).unwrap(), v.at(k).unwrap());
        }
    }
}

#[test]
fn whole_line_geometry_survives_json() {
    let text = r#"{"family":"prime","a":0,"b":1,"geometry":"whole_line"}"#;
    let spec: PotentialSpec = serde_json::from_str(text).unwrap();
    assert_eq!(spec.geometry, Geometry::WholeLine);
    assert_eq!(spec.family, Family::Prime { a: 0.0, b: 1.0 });
    let back: PotentialSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
    assert_eq!(back, spec);
}

#[test]
fn structure_conditions_on_short_words() {
    let isolated = check_structure(&parse_word("abaaabab").unwrap(), Condition::S1, 0).unwrap();
    assert!(isolated.holds);
    let doubled = check_structure(&parse_word("abba").unwrap(), Condition::S1, 0).unwrap();
    assert!(!doubled.holds);
    assert_eq!(doubled.first_violation, Some(2));
}

#[test]
fn even_block_rule_satisfies_s3() {
    let word = subst_fixed_point(&SubstitutionRule::parse("aab", "aa").unwrap(), Symbol::A, 4096).unwrap();
    assert!(check_structure(&word, Condition::S3, 0).unwrap().holds);
    assert!(!check_structure(&word, Condition::S2, 0).unwrap().holds);
}

#[test]
fn special_energy_of_period_doubling() {
    let found = special_energies(&PotentialSpec::period_doubling(0.0, 1.0)).unwrap();
    assert_eq!(found.len(), 1);
    assert_eq!((found[0].energy, found[0].growth), (0.0, GrowthClass::Linear));
}

#[test]
fn special_energy_of_even_blocks() {
    let spec = PotentialSpec::half_line(Family::Substitution {
        rule: SubstitutionRule::even_a_blocks(1, 1).unwrap(),
        seed: Symbol::A,
        a: 0.0,
        b: 1.0,
    });
    let found = special_energies(&spec).unwrap();
    assert!(found.iter().any(|s| s.energy == 0.0 && s.growth == GrowthClass::Bounded));
}

#[test]
fn b_blocks_of_length_three_give_two_energies() {
    let spec = PotentialSpec::half_line(Family::Substitution {
        rule: SubstitutionRule::parse("abbb", "a").unwrap(),
        seed: Symbol::A,
        a: 1.0,
        b: 0.0,
    });
    let mut energies: Vec<f64> = special_energies(&spec)
        .unwrap()
        .into_iter()
        .filter(|s| s.condition == Condition::S4(3))
        .map(|s| s.energy)
        .collect();
    energies.sort_by(f64::total_cmp);
    assert_eq!(energies.len(), 2);
    assert!((energies[0] + 1.0).abs() < 1e-10 && (energies[1] - 1.0).abs() < 1e-10);
}

#[test]
fn symbols_are_none_for_multi_valued_families() {
    let spec = PotentialSpec::half_line(Family::Hierarchical { lambda: 1.0, r: 1.0, v0: 0.0 });
    assert_eq!(symbols(&spec, Window::half_line(8)).unwrap(), None);
}

#[test]
fn oversized_window_is_rejected() {
    let err = realize(&PotentialSpec::period_doubling(0.0, 1.0), Window::half_line(1 << 27)).unwrap_err();
    assert!(matches!(err, Error::WindowTooLarge { .. }));
}

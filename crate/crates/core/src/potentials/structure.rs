use serde::{Deserialize, Serialize};

use super::{symbols, PotentialSpec, Symbol, Window};
use crate::transfer::monodromy_energies;
use crate::{Error, Result};

/// Block conditions on two-valued words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// Every b is isolated.
    S1,
    /// Every interior a-block has odd length.
    S2,
    /// Every interior a-block has even length.
    S3,
    /// Every interior b-block has length divisible by k (odd k ≥ 3).
    S4(usize),
}

impl std::str::FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "s1" => Ok(Condition::S1),
            "s2" => Ok(Condition::S2),
            "s3" => Ok(Condition::S3),
            _ => lower
                .strip_prefix("s4(")
                .and_then(|r| r.strip_suffix(')'))
                .or_else(|| lower.strip_prefix("s4:"))
                .and_then(|k| k.parse().ok())
                .map(Condition::S4)
                .ok_or_else(|| Error::InvalidParameter(format!("unknown condition `{s}` (S1, S2, S3, S4(k))"))),
        }
    }
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Condition::S1 => f.write_str("S1"),
            Condition::S2 => f.write_str("S2"),
            Condition::S3 => f.write_str("S3"),
            Condition::S4(k) => write!(f, "S4({k})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureCheck {
    pub holds: bool,
    /// 1-based index of the first offending site.
    pub first_violation: Option<usize>,
}

impl StructureCheck {
    fn ok() -> Self {
        Self { holds: true, first_violation: None }
    }

    fn violated(at: usize) -> Self {
        Self { holds: false, first_violation: Some(at) }
    }
}

/// Maximal runs of `sym` strictly between two occurrences of the other
/// letter, as (1-based start, length), within `word[from-1..]`.
fn interior_blocks(word: &[Symbol], from: usize, sym: Symbol) -> Vec<(usize, usize)> {
    let suffix = &word[from - 1..];
    let mut blocks = Vec::new();
    let mut seen_other = false;
    let mut run_start = None;
    for (i, &s) in suffix.iter().enumerate() {
        if s == sym {
            if seen_other && run_start.is_none() {
                run_start = Some(i);
            }
        } else {
            if let Some(start) = run_start.take() {
                blocks.push((from + start, i - start));
            }
            seen_other = true;
        }
    }
    blocks
}

/// Checks `condition` on the suffix of `word` starting at the 1-based
/// `from_index`. Runs cut off by either end of the word are not counted.
pub fn check_structure(word: &[Symbol], condition: Condition, from_index: usize) -> Result<StructureCheck> {
    if let Condition::S4(k) = condition {
        if k < 3 || k % 2 == 0 {
            return Err(Error::InvalidParameter(format!("S4 needs an odd k ≥ 3, got {k}")));
        }
    }
    let from = from_index.max(1);
    if from > word.len() {
        return Ok(StructureCheck::ok());
    }
    let check = match condition {
        Condition::S1 => {
            let suffix = &word[from - 1..];
            suffix
                .windows(2)
                .position(|w| w[0] == Symbol::B && w[1] == Symbol::B)
                .map_or_else(StructureCheck::ok, |i| StructureCheck::violated(from + i))
        }
        Condition::S2 | Condition::S3 => {
            let want_odd = condition == Condition::S2;
            interior_blocks(word, from, Symbol::A)
                .into_iter()
                .find(|&(_, len)| (len % 2 == 1) != want_odd)
                .map_or_else(StructureCheck::ok, |(start, _)| StructureCheck::violated(start))
        }
        Condition::S4(k) => interior_blocks(word, from, Symbol::B)
            .into_iter()
            .find(|&(_, len)| len % k != 0)
            .map_or_else(StructureCheck::ok, |(start, _)| StructureCheck::violated(start)),
    };
    Ok(check)
}

/// How ‖T(n, m; E₀)‖ behaves at a special energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthClass {
    Bounded,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpecialEnergy {
    pub energy: f64,
    pub growth: GrowthClass,
    /// Condition that produced this energy, with the roles of a and b as
    /// they appear in the potential.
    pub condition: Condition,
    /// a and b exchanged relative to the levels of the `PotentialSpec`.
    pub swapped: bool,
}

/// Length of the prefix inspected to classify a potential.
const CLASSIFY_LEN: usize = 1 << 14;
/// Leading sites ignored (conditions only need to hold eventually).
const CLASSIFY_BURN_IN: usize = 16;
const CLASSIFY_MAX_K: usize = 15;

fn has_interior_block(word: &[Symbol], sym: Symbol) -> bool {
    !interior_blocks(word, CLASSIFY_BURN_IN, sym).is_empty()
}

fn holds(word: &[Symbol], c: Condition) -> bool {
    check_structure(word, c, CLASSIFY_BURN_IN).map(|r| r.holds).unwrap_or(false)
}

/// Energies E₀ with explicitly controlled transfer matrices, read off from
/// the block structure of a two-valued potential.
///
/// The structure is classified on a prefix of 2¹⁴ sites after a burn-in of
/// 16 sites, trying both assignments of the letters to the levels.
pub fn special_energies(spec: &PotentialSpec) -> Result<Vec<SpecialEnergy>> {
    let (a, b) = spec.levels().ok_or(Error::NoKnownSpecialEnergy)?;
    let word = symbols(spec, Window::half_line(CLASSIFY_LEN))?.ok_or(Error::NoKnownSpecialEnergy)?;
    if a == b {
        return Err(Error::NoKnownSpecialEnergy);
    }

    for swapped in [false, true] {
        let (word, a, b) = if swapped {
            (word.iter().map(|s| s.other()).collect::<Vec<_>>(), b, a)
        } else {
            (word.clone(), a, b)
        };
        if !has_interior_block(&word, Symbol::A) && !has_interior_block(&word, Symbol::B) {
            continue;
        }

        if holds(&word, Condition::S1) && holds(&word, Condition::S2) && has_interior_block(&word, Symbol::A) {
            return Ok(vec![SpecialEnergy { energy: a, growth: GrowthClass::Linear, condition: Condition::S2, swapped }]);
        }
        if holds(&word, Condition::S3) && has_interior_block(&word, Symbol::A) {
            let gap = (a - b).abs();
            let growth = match gap.partial_cmp(&2.0) {
                Some(std::cmp::Ordering::Less) => GrowthClass::Bounded,
                Some(std::cmp::Ordering::Equal) => GrowthClass::Linear,
                _ => return Ok(Vec::new()),
            };
            return Ok(vec![SpecialEnergy { energy: a, growth, condition: Condition::S3, swapped }]);
        }
        if has_interior_block(&word, Symbol::B) {
            // Smallest odd k with every b-block length divisible by k.
            if let Some(k) = (3..=CLASSIFY_MAX_K).step_by(2).find(|&k| holds(&word, Condition::S4(k))) {
                let energies = monodromy_energies(b, k, 1e-9)?;
                return Ok(energies
                    .into_iter()
                    .filter_map(|e| {
                        let d = (a - e).abs();
                        let growth = if d < 2.0 - 1e-12 {
                            GrowthClass::Bounded
                        } else if (d - 2.0).abs() <= 1e-12 {
                            GrowthClass::Linear
                        } else {
                            return None;
                        };
                        Some(SpecialEnergy { energy: e, growth, condition: Condition::S4(k), swapped })
                    })
                    .collect());
            }
        }
    }
    Err(Error::NoKnownSpecialEnergy)
}

#[cfg(test)]
mod tests {
    use super::super::{parse_word, subst_fixed_point, Family, SubstitutionRule};
    use super::*;

    fn w(s: &str) -> Vec<Symbol> {
        parse_word(s).unwrap()
    }

    #[test]
    fn s1_examples() {
        assert!(check_structure(&w("abaaabab"), Condition::S1, 1).unwrap().holds);
        let r = check_structure(&w("abba"), Condition::S1, 1).unwrap();
        assert_eq!(r, StructureCheck { holds: false, first_violation: Some(2) });
    }

    #[test]
    fn truncated_blocks_are_ignored() {
        // Leading "aa" and trailing "aaaa" are not interior blocks.
        assert!(check_structure(&w("aababaaaa"), Condition::S2, 1).unwrap().holds);
        let r = check_structure(&w("babaab"), Condition::S2, 1).unwrap();
        assert_eq!(r.first_violation, Some(4));
        assert!(check_structure(&w(""), Condition::S3, 1).unwrap().holds);
        assert!(check_structure(&w("ab"), Condition::S3, 5).unwrap().holds);
    }

    #[test]
    fn s4_counts_b_blocks() {
        assert!(check_structure(&w("abbbabbbbbba"), Condition::S4(3), 1).unwrap().holds);
        let r = check_structure(&w("abbbabba"), Condition::S4(3), 1).unwrap();
        assert_eq!(r.first_violation, Some(6));
        assert!(check_structure(&w("ab"), Condition::S4(4), 1).is_err());
    }

    #[test]
    fn even_block_substitution_satisfies_s3() {
        let u = subst_fixed_point(&SubstitutionRule::even_a_blocks(1, 1).unwrap(), Symbol::A, 5000).unwrap();
        assert!(check_structure(&u, Condition::S3, 1).unwrap().holds);
    }

    #[test]
    fn condition_parsing() {
        assert_eq!("S4(5)".parse::<Condition>().unwrap(), Condition::S4(5));
        assert_eq!("s2".parse::<Condition>().unwrap(), Condition::S2);
        assert!("S7".parse::<Condition>().is_err());
        assert_eq!(Condition::S4(3).to_string(), "S4(3)");
    }

    #[test]
    fn special_energy_classes() {
        let pd = PotentialSpec::period_doubling(0.0, 1.0);
        let e = special_energies(&pd).unwrap();
        assert_eq!((e.len(), e[0].energy, e[0].growth), (1, 0.0, GrowthClass::Linear));

        let s3 = |a: f64, b: f64| {
            PotentialSpec::half_line(Family::Substitution {
                rule: SubstitutionRule::even_a_blocks(1, 1).unwrap(),
                seed: Symbol::A,
                a,
                b,
            })
        };
        let e = special_energies(&s3(0.0, 1.0)).unwrap();
        assert_eq!((e[0].energy, e[0].growth), (0.0, GrowthClass::Bounded));
        assert_eq!(special_energies(&s3(0.0, 2.0)).unwrap()[0].growth, GrowthClass::Linear);
        assert!(special_energies(&s3(0.0, 3.0)).unwrap().is_empty());
    }

    #[test]
    fn nickel_mean_energies() {
        // a → ab³, b → a: b-blocks of length 3.
        let spec = PotentialSpec::half_line(Family::Substitution {
            rule: SubstitutionRule::generalized_fibonacci(1, 3).unwrap(),
            seed: Symbol::A,
            a: 1.0,
            b: 0.0,
        });
        let e = special_energies(&spec).unwrap();
        assert_eq!(e.len(), 2);
        assert!((e[0].energy + 1.0).abs() < 1e-9 && e[0].growth == GrowthClass::Linear);
        assert!((e[1].energy - 1.0).abs() < 1e-9 && e[1].growth == GrowthClass::Bounded);
        assert_eq!(e[0].condition, Condition::S4(3));
    }

    #[test]
    fn prime_and_sparse_are_s1_s2() {
        for family in [Family::Prime { a: 0.0, b: 1.0 }, Family::Sparse { a: 0.0, b: 1.0, gamma: 2 }] {
            let e = special_energies(&PotentialSpec::half_line(family)).unwrap();
            assert_eq!(e[0].condition, Condition::S2);
        }
    }

    #[test]
    fn unrecognized_structure() {
        let spec = PotentialSpec::half_line(Family::Hierarchical { lambda: 1.0, r: 2.0, v0: 0.0 });
        assert_eq!(special_energies(&spec), Err(Error::NoKnownSpecialEnergy));
        // Fibonacci: b isolated but a-blocks of length 1 and 2.
        let fib = PotentialSpec::half_line(Family::Substitution {
            rule: SubstitutionRule::fibonacci(),
            seed: Symbol::A,
            a: 0.0,
            b: 1.0,
        });
        assert_eq!(special_energies(&fib), Err(Error::NoKnownSpecialEnergy));
    }
}

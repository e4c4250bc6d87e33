//! Potential families and their realization on finite windows.

mod structure;
mod substitution;

use serde::{Deserialize, Serialize};

pub use structure::{check_structure, special_energies, Condition, GrowthClass, SpecialEnergy, StructureCheck};
pub use substitution::{parse_word, subst_fixed_point, word_to_string, SubstitutionRule, Symbol};

use crate::cfrac::Omega;
use crate::{Error, Result};

/// Largest window `realize` will materialize.
pub const MAX_WINDOW_SITES: u64 = 1 << 26;

/// Half-line ℓ²(ℕ) with a Dirichlet condition at 0, or the whole line ℓ²(ℤ).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    #[default]
    HalfLine,
    WholeLine,
}

/// Inclusive integer interval of sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: i64,
    pub end: i64,
}

impl Window {
    pub fn new(start: i64, end: i64) -> Result<Self> {
        if end < start {
            return Err(Error::InvalidParameter(format!("empty window [{start}, {end}]")));
        }
        Ok(Self { start, end })
    }

    /// `[1, len]`
    pub fn half_line(len: usize) -> Self {
        Self { start: 1, end: len as i64 }
    }

    /// `[−half_width, half_width]`
    pub fn whole_line(half_width: usize) -> Self {
        Self { start: -(half_width as i64), end: half_width as i64 }
    }

    pub fn len(&self) -> u64 {
        (self.end - self.start) as u64 + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, site: i64) -> bool {
        self.start <= site && site <= self.end
    }
}

/// Model families. Serialized with a `"family"` tag, e.g.
/// `{"family": "sparse", "a": 0, "b": 1, "gamma": 2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    /// Symbols of the substitution fixed point mapped to levels a, b.
    Substitution {
        rule: SubstitutionRule,
        #[serde(default = "default_seed")]
        seed: Symbol,
        a: f64,
        b: f64,
    },
    /// λ·χ_[1−ω,1)(nω + θ mod 1)
    Sturmian {
        lambda: f64,
        omega: Omega,
        #[serde(default)]
        theta: f64,
    },
    /// b on primes, a elsewhere.
    Prime { a: f64, b: f64 },
    /// b at n = γ^k (k ≥ 1), a elsewhere.
    Sparse { a: f64, b: f64, gamma: u32 },
    /// λ·f(ord n) with f(m) = Σ_{k<m} R^k; ord 0 is undefined and V(0) = `v0`.
    Hierarchical {
        lambda: f64,
        r: f64,
        #[serde(default)]
        v0: f64,
    },
    /// Values listed from site `start` on; zero outside.
    Explicit { start: i64, values: Vec<f64> },
}

fn default_seed() -> Symbol {
    Symbol::A
}

/// A model family with its parameters and the geometry it is posed on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    #[serde(flatten)]
    pub family: Family,
    #[serde(default)]
    pub geometry: Geometry,
}

impl PotentialSpec {
    pub fn new(family: Family, geometry: Geometry) -> Self {
        Self { family, geometry }
    }

    pub fn half_line(family: Family) -> Self {
        Self::new(family, Geometry::HalfLine)
    }

    pub fn period_doubling(a: f64, b: f64) -> Self {
        Self::half_line(Family::Substitution {
            rule: SubstitutionRule::period_doubling(),
            seed: Symbol::A,
            a,
            b,
        })
    }

    /// Levels (a, b) of a two-valued family.
    pub fn levels(&self) -> Option<(f64, f64)> {
        match &self.family {
            Family::Substitution { a, b, .. } | Family::Prime { a, b } | Family::Sparse { a, b, .. } => {
                Some((*a, *b))
            }
            Family::Sturmian { lambda, .. } => Some((0.0, *lambda)),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        match &self.family {
            Family::Sparse { gamma, .. } if *gamma < 2 => {
                Err(Error::InvalidParameter(format!("sparse model needs γ ≥ 2, got {gamma}")))
            }
            Family::Sturmian { omega, theta, .. } => {
                omega.value()?;
                if !(0.0..1.0).contains(theta) {
                    return Err(Error::InvalidParameter(format!("phase θ = {theta} is not in [0, 1)")));
                }
                Ok(())
            }
            Family::Hierarchical { r, .. } if !(*r > 0.0) => {
                Err(Error::InvalidParameter(format!("hierarchical model needs R > 0, got {r}")))
            }
            _ => Ok(()),
        }
    }
}

/// Potential values on a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSamples {
    pub start: i64,
    pub values: Vec<f64>,
}

impl PotentialSamples {
    pub fn new(start: i64, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("potential samples must be nonempty".into()));
        }
        Ok(Self { start, values })
    }

    /// V ≡ value on `window`.
    pub fn constant(window: Window, value: f64) -> Self {
        Self { start: window.start, values: vec![value; window.len() as usize] }
    }

    pub fn window(&self) -> Window {
        Window { start: self.start, end: self.start + self.values.len() as i64 - 1 }
    }

    pub fn get(&self, site: i64) -> Option<f64> {
        let offset = site.checked_sub(self.start)?;
        usize::try_from(offset).ok().and_then(|i| self.values.get(i).copied())
    }

    pub fn at(&self, site: i64) -> Result<f64> {
        self.get(site).ok_or_else(|| {
            let w = self.window();
            Error::OutOfWindow { site, start: w.start, end: w.end }
        })
    }

    /// Values at sites `from..=to`, which must lie in the window.
    pub fn slice(&self, from: i64, to: i64) -> Result<&[f64]> {
        self.at(from)?;
        self.at(to)?;
        let i = (from - self.start) as usize;
        let j = (to - self.start) as usize;
        Ok(&self.values[i..=j])
    }

    /// Sitewise sum V + W over the common window of `self`.
    pub fn add(&self, other: &PotentialSamples) -> Result<PotentialSamples> {
        let w = self.window();
        let values = (w.start..=w.end)
            .map(|n| Ok(self.at(n)? + other.at(n)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(PotentialSamples { start: self.start, values })
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.values.iter().enumerate().map(|(i, &v)| (self.start + i as i64, v))
    }
}

/// Number of factors 2 in n (n ≠ 0).
pub fn ord2(n: i64) -> u32 {
    debug_assert!(n != 0);
    n.unsigned_abs().trailing_zeros()
}

/// f(m) = Σ_{k=0}^{m−1} R^k.
pub fn hierarchical_level(m: u32, r: f64) -> f64 {
    (0..m).fold((0.0, 1.0), |(sum, pow), _| (sum + pow, pow * r)).0
}

/// Primality table for 0..=n (sieve of Eratosthenes).
pub fn prime_table(n: usize) -> Vec<bool> {
    let mut is_prime = vec![true; n + 1];
    for slot in is_prime.iter_mut().take(2) {
        *slot = false;
    }
    let mut p = 2;
    while p * p <= n {
        if is_prime[p] {
            for multiple in (p * p..=n).step_by(p) {
                is_prime[multiple] = false;
            }
        }
        p += 1;
    }
    is_prime
}

fn is_power_of(n: i64, gamma: u32) -> bool {
    if n < gamma as i64 {
        return false;
    }
    let gamma = gamma as i64;
    let mut x = n;
    while x % gamma == 0 {
        x /= gamma;
    }
    x == 1
}

/// Symbols of a two-valued family on `window`; `None` for other families.
///
/// Substitution half-line windows read the one-sided fixed point with site 1
/// as its first letter. Windows reaching n ≤ 0 read a legal subword of the
/// fixed point placed so that the window starts at its letter index 1.
pub fn symbols(spec: &PotentialSpec, window: Window) -> Result<Option<Vec<Symbol>>> {
    check_window(window)?;
    spec.validate()?;
    let len = window.len() as usize;
    let word = match &spec.family {
        Family::Substitution { rule, seed, .. } => {
            let offset = if window.start >= 1 { window.start - 1 } else { 0 } as usize;
            let u = subst_fixed_point(rule, *seed, offset + len)?;
            u[offset..].to_vec()
        }
        Family::Prime { .. } => {
            let table = prime_table(window.end.max(0) as usize);
            (window.start..=window.end)
                .map(|n| if n >= 2 && table[n as usize] { Symbol::B } else { Symbol::A })
                .collect()
        }
        Family::Sparse { gamma, .. } => (window.start..=window.end)
            .map(|n| if is_power_of(n, *gamma) { Symbol::B } else { Symbol::A })
            .collect(),
        Family::Sturmian { omega, theta, .. } => {
            let w = omega.value()?;
            (window.start..=window.end)
                .map(|n| if sturmian_indicator(n, w, *theta) { Symbol::B } else { Symbol::A })
                .collect()
        }
        _ => return Ok(None),
    };
    Ok(Some(word))
}

/// χ_[1−ω,1)(nω + θ mod 1).
fn sturmian_indicator(n: i64, omega: f64, theta: f64) -> bool {
    // Split n·ω into integer and fractional parts before adding θ so the
    // fractional part keeps full precision for large |n|.
    let x = n as f64 * omega;
    let frac = (x - x.floor() + theta).rem_euclid(1.0);
    frac >= 1.0 - omega
}

fn check_window(window: Window) -> Result<()> {
    if window.end < window.start {
        return Err(Error::InvalidParameter("empty window".into()));
    }
    if window.len() > MAX_WINDOW_SITES {
        return Err(Error::WindowTooLarge { requested: window.len(), max: MAX_WINDOW_SITES });
    }
    Ok(())
}

/// V(n) for every n in `window`.
pub fn realize(spec: &PotentialSpec, window: Window) -> Result<PotentialSamples> {
    check_window(window)?;
    spec.validate()?;
    let values = match &spec.family {
        Family::Hierarchical { lambda, r, v0 } => (window.start..=window.end)
            .map(|n| if n == 0 { *v0 } else { lambda * hierarchical_level(ord2(n), *r) })
            .collect(),
        Family::Explicit { start, values } => (window.start..=window.end)
            .map(|n| {
                usize::try_from(n - start).ok().and_then(|i| values.get(i).copied()).unwrap_or(0.0)
            })
            .collect(),
        Family::Sturmian { lambda, .. } => symbols(spec, window)?
            .expect("two-valued family")
            .into_iter()
            .map(|s| if s == Symbol::B { *lambda } else { 0.0 })
            .collect(),
        _ => {
            let (a, b) = spec.levels().expect("two-valued family");
            symbols(spec, window)?
                .expect("two-valued family")
                .into_iter()
                .map(|s| if s == Symbol::B { b } else { a })
                .collect()
        }
    };
    Ok(PotentialSamples { start: window.start, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sturmian_golden_prefix() {
        let spec = PotentialSpec::half_line(Family::Sturmian { lambda: 1.0, omega: Omega::GoldenMean, theta: 0.0 });
        let v = realize(&spec, Window::half_line(8)).unwrap();
        assert_eq!(v.values, vec![1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn sturmian_matches_formula_on_negative_sites() {
        let w = Omega::GoldenMean.value().unwrap();
        let spec = PotentialSpec::new(
            Family::Sturmian { lambda: 2.0, omega: Omega::GoldenMean, theta: 0.25 },
            Geometry::WholeLine,
        );
        let v = realize(&spec, Window::whole_line(50)).unwrap();
        for (n, val) in v.iter() {
            let x = (n as f64 * w + 0.25).rem_euclid(1.0);
            let expected = if x >= 1.0 - w { 2.0 } else { 0.0 };
            assert_eq!(val, expected, "site {n}");
        }
    }

    #[test]
    fn prime_window() {
        let spec = PotentialSpec::half_line(Family::Prime { a: 0.0, b: 1.0 });
        assert_eq!(realize(&spec, Window::half_line(4)).unwrap().values, vec![0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn sparse_marks_powers() {
        let spec = PotentialSpec::half_line(Family::Sparse { a: 0.0, b: 1.0, gamma: 3 });
        let v = realize(&spec, Window::half_line(30)).unwrap();
        let marked: Vec<i64> = v.iter().filter(|&(_, x)| x == 1.0).map(|(n, _)| n).collect();
        assert_eq!(marked, vec![3, 9, 27]);
        let bad = PotentialSpec::half_line(Family::Sparse { a: 0.0, b: 1.0, gamma: 1 });
        assert!(realize(&bad, Window::half_line(3)).is_err());
    }

    #[test]
    fn hierarchical_levels() {
        let spec = PotentialSpec::new(Family::Hierarchical { lambda: 1.0, r: 2.0, v0: 0.0 }, Geometry::WholeLine);
        let v = realize(&spec, Window::whole_line(8)).unwrap();
        assert_eq!(v.at(4).unwrap(), 3.0);
        assert_eq!(v.at(-4).unwrap(), 3.0);
        assert_eq!(v.at(8).unwrap(), 7.0);
        assert_eq!(v.at(3).unwrap(), 0.0);
        assert_eq!(v.at(0).unwrap(), 0.0);
    }

    #[test]
    fn hierarchical_v0_is_configurable() {
        let spec = PotentialSpec::new(Family::Hierarchical { lambda: 1.0, r: 2.0, v0: -5.0 }, Geometry::WholeLine);
        assert_eq!(realize(&spec, Window::whole_line(2)).unwrap().at(0).unwrap(), -5.0);
    }

    #[test]
    fn window_limits() {
        let spec = PotentialSpec::half_line(Family::Prime { a: 0.0, b: 1.0 });
        let huge = Window::new(1, MAX_WINDOW_SITES as i64 + 1).unwrap();
        assert!(matches!(realize(&spec, huge), Err(Error::WindowTooLarge { .. })));
        let v = realize(&spec, Window::half_line(5)).unwrap();
        assert_eq!(v.at(6), Err(Error::OutOfWindow { site: 6, start: 1, end: 5 }));
    }

    #[test]
    fn explicit_is_zero_outside_its_support() {
        let spec = PotentialSpec::half_line(Family::Explicit { start: 2, values: vec![1.0, 2.0] });
        assert_eq!(realize(&spec, Window::half_line(4)).unwrap().values, vec![0.0, 1.0, 2.0, 0.0]);
    }

    #[test]
    fn spec_json_shape() {
        let json = r#"{"family":"substitution","rule":{"a":"ab","b":"aa"},"a":0.0,"b":1.0}"#;
        let spec: PotentialSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec, PotentialSpec::period_doubling(0.0, 1.0));
        let back = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<PotentialSpec>(&back).unwrap(), spec);
        let sturm: PotentialSpec =
            serde_json::from_str(r#"{"family":"sturmian","lambda":1,"omega":"golden_mean","geometry":"whole_line"}"#)
                .unwrap();
        assert_eq!(sturm.geometry, Geometry::WholeLine);
    }
}

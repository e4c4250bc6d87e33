use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Letter of the two-symbol alphabet `{a, b}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Symbol {
    A,
    B,
}

impl Symbol {
    pub fn other(self) -> Symbol {
        match self {
            Symbol::A => Symbol::B,
            Symbol::B => Symbol::A,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Symbol::A => 'a',
            Symbol::B => 'b',
        }
    }
}

impl TryFrom<char> for Symbol {
    type Error = Error;

    fn try_from(c: char) -> Result<Self> {
        match c {
            'a' => Ok(Symbol::A),
            'b' => Ok(Symbol::B),
            other => Err(Error::InvalidRule(format!(
                "symbol `{other}` is not in the alphabet {{a, b}}"
            ))),
        }
    }
}

/// Parses a word such as `"abaa"`.
pub fn parse_word(s: &str) -> Result<Vec<Symbol>> {
    s.chars().map(Symbol::try_from).collect()
}

pub fn word_to_string(word: &[Symbol]) -> String {
    word.iter().map(|s| s.as_char()).collect()
}

fn repeat(sym: Symbol, count: usize) -> impl Iterator<Item = Symbol> {
    std::iter::repeat_n(sym, count)
}

/// A substitution `S` on `{a, b}`, given by the images of both letters.
///
/// Serialized as `{"a": "ab", "b": "aa"}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubstitutionRule {
    image_a: Vec<Symbol>,
    image_b: Vec<Symbol>,
}

impl SubstitutionRule {
    pub fn new(image_a: Vec<Symbol>, image_b: Vec<Symbol>) -> Result<Self> {
        if image_a.is_empty() || image_b.is_empty() {
            return Err(Error::InvalidRule("erasing substitution (empty image)".into()));
        }
        Ok(Self { image_a, image_b })
    }

    pub fn parse(a: &str, b: &str) -> Result<Self> {
        Self::new(parse_word(a)?, parse_word(b)?)
    }

    pub fn image(&self, sym: Symbol) -> &[Symbol] {
        match sym {
            Symbol::A => &self.image_a,
            Symbol::B => &self.image_b,
        }
    }

    /// `a → ab`, `b → aa`.
    pub fn period_doubling() -> Self {
        Self::odd_a_blocks(1, 1).expect("k = l = 1 is valid")
    }

    /// `a → ab`, `b → a`.
    pub fn fibonacci() -> Self {
        Self::generalized_fibonacci(1, 1).expect("m = n = 1 is valid")
    }

    /// `a → a^(2k−1) b`, `b → a^(2l)`; the fixed points satisfy S1 and S2.
    pub fn odd_a_blocks(k: usize, l: usize) -> Result<Self> {
        if k == 0 || l == 0 {
            return Err(Error::InvalidRule("k and l must be at least 1".into()));
        }
        Self::new(
            repeat(Symbol::A, 2 * k - 1).chain(repeat(Symbol::B, 1)).collect(),
            repeat(Symbol::A, 2 * l).collect(),
        )
    }

    /// `a → a^(2k) b`, `b → a^(2l)`; the fixed points satisfy S3.
    pub fn even_a_blocks(k: usize, l: usize) -> Result<Self> {
        if k == 0 || l == 0 {
            return Err(Error::InvalidRule("k and l must be at least 1".into()));
        }
        Self::new(
            repeat(Symbol::A, 2 * k).chain(repeat(Symbol::B, 1)).collect(),
            repeat(Symbol::A, 2 * l).collect(),
        )
    }

    /// `a → a^m b^n`, `b → a`.
    pub fn generalized_fibonacci(m: usize, n: usize) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidRule("m and n must be at least 1".into()));
        }
        Self::new(
            repeat(Symbol::A, m).chain(repeat(Symbol::B, n)).collect(),
            vec![Symbol::A],
        )
    }

    /// `a → a^m b^n`, `b → b^n a^m`.
    pub fn generalized_thue_morse(m: usize, n: usize) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidRule("m and n must be at least 1".into()));
        }
        Self::new(
            repeat(Symbol::A, m).chain(repeat(Symbol::B, n)).collect(),
            repeat(Symbol::B, n).chain(repeat(Symbol::A, m)).collect(),
        )
    }
}

impl fmt::Display for SubstitutionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "a -> {}, b -> {}",
            word_to_string(&self.image_a),
            word_to_string(&self.image_b)
        )
    }
}

#[derive(Serialize, Deserialize)]
struct RuleRepr {
    a: String,
    b: String,
}

impl Serialize for SubstitutionRule {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        RuleRepr {
            a: word_to_string(&self.image_a),
            b: word_to_string(&self.image_b),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SubstitutionRule {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = RuleRepr::deserialize(deserializer)?;
        SubstitutionRule::parse(&repr.a, &repr.b).map_err(serde::de::Error::custom)
    }
}

impl FromStr for SubstitutionRule {
    type Err = Error;

    /// Accepts `"ab,aa"` (image of a, then image of b).
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(',')
            .ok_or_else(|| Error::InvalidRule(format!("expected `IMAGE_A,IMAGE_B`, got `{s}`")))?;
        Self::parse(a.trim(), b.trim())
    }
}

/// First `length` letters of the one-sided fixed point `lim S^k(seed)`.
///
/// Grown in place: letter `i` of the fixed point expands to the block
/// `S(u_i)`, and the prefix property makes every already-known letter
/// consistent with its expansion.
pub fn subst_fixed_point(rule: &SubstitutionRule, seed: Symbol, length: usize) -> Result<Vec<Symbol>> {
    if rule.image(seed).first() != Some(&seed) {
        return Err(Error::NonPrefixRule);
    }
    if length == 0 {
        return Err(Error::InvalidParameter("fixed point length must be at least 1".into()));
    }

    let mut word = Vec::with_capacity(length);
    word.push(seed);
    let mut produced = 0;
    let mut cursor = 0;
    while word.len() < length {
        if cursor == word.len() {
            // Every image so far had length one, so S(seed) = seed and
            // seed^∞ is the fixed point.
            word.push(seed);
            continue;
        }
        let image = rule.image(word[cursor]);
        for (offset, &sym) in image.iter().enumerate() {
            if produced + offset >= word.len() {
                word.push(sym);
            }
        }
        produced += image.len();
        cursor += 1;
    }
    word.truncate(length);
    Ok(word)
}

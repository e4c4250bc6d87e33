//! Continued fractions of rotation numbers.
//!
//! Quadratic surds are expanded exactly with the classical `(P + √D)/Q`
//! recurrence, so any depth is reliable. Decimal inputs are treated as the
//! interval of width one unit in the last digit; only partial quotients shared
//! by both interval endpoints are reported.

use std::cmp::Ordering;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default expansion depth for surd inputs.
pub const DEFAULT_DEPTH: usize = 200;

/// A rotation number in (0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Omega {
    /// (√5 − 1)/2
    GoldenMean,
    /// √2 − 1
    SilverMean,
    /// (p + √d)/q with d > 0 not a perfect square.
    Surd { p: i64, d: i64, q: i64 },
    /// A decimal string such as `"0.41421356237309504880"`.
    Decimal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Surd {
    p: i128,
    d: i128,
    q: i128,
}

impl Surd {
    fn new(p: i64, d: i64, q: i64) -> Result<Self> {
        if d <= 0 || q == 0 {
            return Err(Error::InvalidParameter(format!("surd ({p} + √{d})/{q} is not well formed")));
        }
        let (p, d, q) = (p as i128, d as i128, q as i128);
        let s = isqrt(d);
        if s * s == d {
            return Err(Error::RationalInput);
        }
        // Normalize so that q | d − p², which keeps the recurrence integral.
        let surd = if (d - p * p) % q == 0 {
            Surd { p, d, q }
        } else {
            Surd { p: p * q.abs(), d: d * q * q, q: q * q.abs() }
        };
        Ok(surd)
    }

    fn value(&self) -> f64 {
        (self.p as f64 + (self.d as f64).sqrt()) / self.q as f64
    }

    /// Sign of (p + √d) − c for integer c.
    fn cmp_numerator(&self, c: i128) -> Ordering {
        let t = c - self.p;
        if t < 0 {
            Ordering::Greater
        } else {
            // √d is irrational, so never equal.
            if self.d > t * t { Ordering::Greater } else { Ordering::Less }
        }
    }

    /// Whether (p + √d)/q ≥ a.
    fn at_least(&self, a: i128) -> bool {
        let ord = self.cmp_numerator(a * self.q);
        if self.q > 0 { ord == Ordering::Greater } else { ord == Ordering::Less }
    }

    fn floor(&self) -> i128 {
        let mut a = self.value().floor() as i128;
        while !self.at_least(a) {
            a -= 1;
        }
        while self.at_least(a + 1) {
            a += 1;
        }
        a
    }

    /// Ordering of the surd relative to the rational num/den (den > 0).
    fn cmp_rational(&self, num: &BigInt, den: &BigInt) -> Ordering {
        // Compare (p + √d)/q with num/den  <=>  den(p + √d) vs q·num (flip if q < 0).
        let lhs_rational = den * BigInt::from(self.p);
        let rhs = BigInt::from(self.q) * num;
        let t = rhs - lhs_rational; // compare den·√d with t
        let ord = if t.is_negative() {
            Ordering::Greater
        } else {
            let left = den * den * BigInt::from(self.d);
            let right = &t * &t;
            left.cmp(&right)
        };
        if self.q > 0 { ord } else { ord.reverse() }
    }
}

fn isqrt(n: i128) -> i128 {
    let mut x = (n as f64).sqrt() as i128;
    while x * x > n {
        x -= 1;
    }
    while (x + 1) * (x + 1) <= n {
        x += 1;
    }
    x
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct DecimalInterval {
    /// Midpoint numerator over 10^digits.
    mid: BigUint,
    digits: u32,
}

impl DecimalInterval {
    fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let frac = s
            .strip_prefix("0.")
            .or_else(|| s.strip_prefix('.'))
            .ok_or_else(|| Error::InvalidParameter(format!("decimal `{s}` is not of the form 0.ddd")))?;
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::InvalidParameter(format!("decimal `{s}` has no fractional digits")));
        }
        let mid: BigUint = frac.parse().expect("validated digits");
        if mid.is_zero() {
            return Err(Error::InvalidParameter("rotation number must lie in (0, 1)".into()));
        }
        Ok(Self { mid, digits: frac.len() as u32 })
    }

    fn scale(&self) -> BigUint {
        BigUint::from(10u32).pow(self.digits)
    }

    fn value(&self) -> f64 {
        // Enough for evaluating rotations at desk scale.
        let keep = self.digits.min(17);
        let drop = self.digits - keep;
        let head = &self.mid / BigUint::from(10u32).pow(drop);
        head.to_f64().unwrap_or(0.0) / 10f64.powi(keep as i32)
    }

    /// Endpoints (mid ∓ 1/2)/10^digits as (num, den) pairs.
    fn endpoints(&self) -> [(BigUint, BigUint); 2] {
        let two = BigUint::from(2u32);
        let den = &two * self.scale();
        let lo = &two * &self.mid - BigUint::one();
        let hi = &two * &self.mid + BigUint::one();
        [(lo, den.clone()), (hi, den)]
    }
}

/// Partial quotients a_1, a_2, … of a rational num/den in (0, 1).
fn rational_quotients(mut num: BigUint, mut den: BigUint) -> Vec<BigUint> {
    let mut out = Vec::new();
    while !num.is_zero() {
        let q = &den / &num;
        let r = &den % &num;
        out.push(q);
        den = num;
        num = r;
    }
    out
}

impl Omega {
    pub fn value(&self) -> Result<f64> {
        Ok(match self {
            Omega::Decimal(s) => DecimalInterval::parse(s)?.value(),
            other => other.surd()?.expect("surd variants").value(),
        })
    }

    fn surd(&self) -> Result<Option<Surd>> {
        let surd = match self {
            Omega::GoldenMean => Surd::new(-1, 5, 2)?,
            Omega::SilverMean => Surd::new(-1, 2, 1)?,
            Omega::Surd { p, d, q } => Surd::new(*p, *d, *q)?,
            Omega::Decimal(_) => return Ok(None),
        };
        let v = surd.value();
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::InvalidParameter(format!("rotation number {v} is not in (0, 1)")));
        }
        Ok(Some(surd))
    }

    /// Exact comparison against num/den for surds; decimals compare their
    /// midpoint.
    pub fn cmp_rational(&self, num: &BigInt, den: &BigInt) -> Result<Ordering> {
        match self.surd()? {
            Some(s) => Ok(s.cmp_rational(num, den)),
            None => {
                let Omega::Decimal(text) = self else { unreachable!() };
                let iv = DecimalInterval::parse(text)?;
                let lhs = BigInt::from(iv.mid.clone()) * den;
                let rhs = num * BigInt::from(iv.scale());
                Ok(lhs.cmp(&rhs))
            }
        }
    }
}

/// Partial quotients of a rotation number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CFExpansion {
    /// a_1, a_2, … (all ≥ 1).
    pub quotients: Vec<u64>,
    /// Computed in exact surd arithmetic.
    pub exact: bool,
    /// Fewer quotients than requested were reliable.
    pub truncated: bool,
}

impl CFExpansion {
    pub fn depth(&self) -> usize {
        self.quotients.len()
    }

    /// Expansion with the given quotients, e.g. for periodic test inputs.
    pub fn from_quotients(quotients: Vec<u64>) -> Result<Self> {
        if quotients.contains(&0) {
            return Err(Error::InvalidParameter("partial quotients must be positive".into()));
        }
        Ok(Self { quotients, exact: true, truncated: false })
    }
}

/// Continued-fraction expansion of `omega` to `depth` quotients.
pub fn cf_expand(omega: &Omega, depth: usize) -> Result<CFExpansion> {
    if depth == 0 {
        return Err(Error::InvalidParameter("depth must be at least 1".into()));
    }
    match omega.surd()? {
        Some(surd) => Ok(expand_surd(surd, depth)),
        None => {
            let Omega::Decimal(text) = omega else { unreachable!() };
            expand_decimal(&DecimalInterval::parse(text)?, depth)
        }
    }
}

fn expand_surd(mut x: Surd, depth: usize) -> CFExpansion {
    let mut quotients = Vec::with_capacity(depth);
    // x_0 = ω has integer part 0; each step takes the reciprocal of the
    // fractional part: (P + √D)/Q − a = (P − aQ + √D)/Q, whose reciprocal is
    // (aQ − P + √D)/((D − (aQ − P)²)/Q).
    let mut a = x.floor();
    for _ in 0..depth {
        let p = a * x.q - x.p;
        let q = (x.d - p * p) / x.q;
        x = Surd { p, d: x.d, q };
        a = x.floor();
        quotients.push(a as u64);
    }
    CFExpansion { quotients, exact: true, truncated: false }
}

fn expand_decimal(iv: &DecimalInterval, depth: usize) -> Result<CFExpansion> {
    if rational_at_working_precision(iv) {
        return Err(Error::RationalInput);
    }
    let [lo, hi] = iv.endpoints();
    let mut ql = rational_quotients(lo.0, lo.1);
    let mut qh = rational_quotients(hi.0, hi.1);
    // The last quotient of a finite expansion is ambiguous ([…, a] = […, a − 1, 1]).
    ql.pop();
    qh.pop();
    let mut quotients = Vec::new();
    for (a, b) in ql.iter().zip(&qh) {
        if a != b || quotients.len() == depth {
            break;
        }
        match a.to_u64() {
            Some(v) => quotients.push(v),
            None => break,
        }
    }
    let truncated = quotients.len() < depth;
    Ok(CFExpansion { quotients, exact: false, truncated })
}

/// The decimal sits much closer to a small-denominator rational than a
/// typical irrational would: the first convergent p/q of the midpoint within
/// one unit in the last digit has q²·width < 10⁻⁶.
fn rational_at_working_precision(iv: &DecimalInterval) -> bool {
    let scale = iv.scale();
    let quotients = rational_quotients(iv.mid.clone(), scale.clone());
    let mid = BigInt::from(iv.mid.clone());
    let scale = BigInt::from(scale);
    for (p, q) in convergent_pairs(quotients.iter().map(|a| BigInt::from(a.clone()))) {
        // |mid/scale − p/q| ≤ 1/scale  <=>  |mid·q − p·scale| ≤ q
        let err = (&mid * &q - &p * &scale).abs();
        if err <= q {
            let q2 = q.to_f64().unwrap_or(f64::INFINITY).powi(2);
            let width = 10f64.powi(-(iv.digits as i32));
            return q2 * width < 1e-6;
        }
    }
    false
}

fn convergent_pairs(quotients: impl Iterator<Item = BigInt>) -> Vec<(BigInt, BigInt)> {
    let mut out = vec![(BigInt::zero(), BigInt::one())];
    let (mut p_prev, mut q_prev) = (BigInt::one(), BigInt::zero());
    let (mut p, mut q) = (BigInt::zero(), BigInt::one());
    for a in quotients {
        let p_next = &a * &p + &p_prev;
        let q_next = &a * &q + &q_prev;
        p_prev = std::mem::replace(&mut p, p_next);
        q_prev = std::mem::replace(&mut q, q_next);
        out.push((p.clone(), q.clone()));
    }
    out
}

/// Convergents (p_k, q_k) for k = 0..=depth, seeded with p₀ = 0, q₀ = 1,
/// p₁ = 1, q₁ = a₁.
pub fn convergents(exp: &CFExpansion) -> Vec<(BigInt, BigInt)> {
    convergent_pairs(exp.quotients.iter().map(|&a| BigInt::from(a)))
}

/// Finite-depth surrogate for d(ω) = limsup (1/n) Σ_{k≤n} a_k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Density {
    /// Max of the running average over n ∈ [depth/2, depth].
    pub d_hat: f64,
    /// Running averages (1/n) Σ_{k≤n} a_k for n = 1..=depth.
    pub running: Vec<f64>,
}

pub fn bounded_density(exp: &CFExpansion) -> Result<Density> {
    let depth = exp.depth();
    if depth < 10 {
        return Err(Error::InvalidParameter(format!(
            "bounded density needs at least 10 quotients, got {depth}"
        )));
    }
    let mut sum = 0u128;
    let running: Vec<f64> = exp
        .quotients
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            sum += a as u128;
            sum as f64 / (i + 1) as f64
        })
        .collect();
    let d_hat = running[depth.div_ceil(2) - 1..]
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(Density { d_hat, running })
}

/// C_λ = 2 + √(8 + λ²).
pub fn coupling_constant(lambda: f64) -> f64 {
    2.0 + (8.0 + lambda * lambda).sqrt()
}

/// Transfer-matrix exponent for Sturmian potentials, α = D·d(ω)·log C_λ.
///
/// `D` is not known in closed form and is carried along in every record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SturmianExponent {
    pub d_hat: f64,
    pub c_lambda: f64,
    pub alpha: f64,
    pub d_constant: f64,
}

pub fn sturmian_alpha(lambda: f64, exp: &CFExpansion, d_constant: f64) -> Result<SturmianExponent> {
    if lambda == 0.0 {
        return Err(Error::ZeroCoupling);
    }
    if !(d_constant > 0.0) {
        return Err(Error::InvalidParameter("D must be positive".into()));
    }
    let d_hat = bounded_density(exp)?.d_hat;
    let c_lambda = coupling_constant(lambda);
    Ok(SturmianExponent { d_hat, c_lambda, alpha: d_constant * d_hat * c_lambda.ln(), d_constant })
}

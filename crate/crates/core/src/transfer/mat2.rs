use std::ops::{Mul, Neg};

use serde::{Deserialize, Serialize};

/// Norm used for reported growth profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    /// Largest singular value.
    #[default]
    Operator,
    HilbertSchmidt,
}

impl NormKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NormKind::Operator => "operator",
            NormKind::HilbertSchmidt => "hilbert_schmidt",
        }
    }
}

/// Real 2×2 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    /// One-step transfer matrix T(x; E) = ((E − x, −1), (1, 0)).
    #[inline]
    pub fn step(x: f64, energy: f64) -> Self {
        Mat2([[energy - x, -1.0], [1.0, 0.0]])
    }

    /// ad − bc with the product bc carried exactly through a fused
    /// multiply-add.
    #[inline]
    pub fn det(&self) -> f64 {
        let [[a, b], [c, d]] = self.0;
        let bc = b * c;
        let err = (-b).mul_add(c, bc);
        a.mul_add(d, -bc) + err
    }

    #[inline]
    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    /// Adjugate; the inverse when det = 1.
    #[inline]
    pub fn adjugate(&self) -> Self {
        let [[a, b], [c, d]] = self.0;
        Mat2([[d, -b], [-c, a]])
    }

    pub fn inverse(&self) -> Self {
        self.adjugate().scale(1.0 / self.det())
    }

    #[inline]
    pub fn scale(&self, s: f64) -> Self {
        let [[a, b], [c, d]] = self.0;
        Mat2([[a * s, b * s], [c * s, d * s]])
    }

    pub fn hs_norm_sq(&self) -> f64 {
        self.0.iter().flatten().map(|x| x * x).sum()
    }

    pub fn hs_norm(&self) -> f64 {
        self.hs_norm_sq().sqrt()
    }

    /// Largest singular value, from σ² = (s ± √(s² − 4 det²))/2 with s the
    /// squared Hilbert–Schmidt norm.
    pub fn op_norm(&self) -> f64 {
        let s = self.hs_norm_sq();
        let det = self.det();
        let disc = (s * s - 4.0 * det * det).max(0.0).sqrt();
        (0.5 * (s + disc)).sqrt()
    }

    pub fn norm(&self, kind: NormKind) -> f64 {
        match kind {
            NormKind::Operator => self.op_norm(),
            NormKind::HilbertSchmidt => self.hs_norm(),
        }
    }

    pub fn pow(&self, mut k: u32) -> Self {
        let mut base = *self;
        let mut acc = Mat2::IDENTITY;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            k >>= 1;
        }
        acc
    }

    /// Largest entrywise difference.
    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        self.0
            .iter()
            .flatten()
            .zip(other.0.iter().flatten())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|x| x.abs()).fold(0.0, f64::max)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;

    #[inline]
    fn mul(self, rhs: Mat2) -> Mat2 {
        let [[a, b], [c, d]] = self.0;
        let [[e, f], [g, h]] = rhs.0;
        Mat2([[a * e + b * g, a * f + b * h], [c * e + d * g, c * f + d * h]])
    }
}

impl Neg for Mat2 {
    type Output = Mat2;

    fn neg(self) -> Mat2 {
        self.scale(-1.0)
    }
}

//! Power-decaying perturbations W and Prüfer variables relative to a complex
//! reference solution of the unperturbed equation.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::potentials::{PotentialSamples, Window};
use crate::transfer::{fit_power_law, growth_profile, solve_difference, NormKind, PowerLawFit, Sampling};
use crate::{Error, Result};

/// Smallest admissible |ω|.
pub const MIN_WRONSKIAN: f64 = 1e-12;

/// Signs s(n) in W(n) = s(n)·C₂(offset + |n|)^{−decay}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignPattern {
    /// s(n) = +1
    #[default]
    Deterministic,
    /// s(n) = (−1)^n
    Alternating,
    /// Independent fair signs, drawn in site order from a seeded ChaCha8 stream.
    SeededRandom { seed: u64 },
}

fn default_offset() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    pub c2: f64,
    pub decay: f64,
    /// 1 gives the (1 + |n|)^{−decay} envelope; 0 gives |n|^{−decay}.
    #[serde(default = "default_offset")]
    pub offset: f64,
    #[serde(default)]
    pub pattern: SignPattern,
    /// W(n) = 0 for |n| > support.
    #[serde(default)]
    pub support: Option<u64>,
}

impl PerturbationSpec {
    pub fn new(c2: f64, decay: f64) -> Self {
        Self { c2, decay, offset: 1.0, pattern: SignPattern::Deterministic, support: None }
    }

    /// W ≡ 0
    pub fn zero() -> Self {
        Self::new(0.0, 1.0)
    }

    /// Whether W decays faster than |n|^{−1−2α}, or is finitely supported.
    pub fn admissible(&self, alpha: f64) -> bool {
        self.c2 == 0.0 || self.support.is_some() || self.decay > 1.0 + 2.0 * alpha
    }

    fn validate(&self) -> Result<()> {
        if !(self.decay >= 0.0) {
            return Err(Error::InvalidParameter(format!("decay must be nonnegative, got {}", self.decay)));
        }
        if !(self.offset >= 0.0) {
            return Err(Error::InvalidParameter(format!("offset must be nonnegative, got {}", self.offset)));
        }
        if !self.c2.is_finite() {
            return Err(Error::InvalidParameter(format!("C₂ must be finite, got {}", self.c2)));
        }
        Ok(())
    }
}

/// W on `window`.
pub fn make_perturbation(spec: &PerturbationSpec, window: Window) -> Result<PotentialSamples> {
    spec.validate()?;
    let mut rng = match spec.pattern {
        SignPattern::SeededRandom { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };
    let values = (window.start..=window.end)
        .map(|n| {
            let sign = match spec.pattern {
                SignPattern::Deterministic => 1.0,
                SignPattern::Alternating => {
                    if n.rem_euclid(2) == 0 {
                        1.0
                    } else {
                        -1.0
                    }
                }
                SignPattern::SeededRandom { .. } => {
                    if rng.as_mut().map(|r| r.random::<bool>()).unwrap_or(true) {
                        1.0
                    } else {
                        -1.0
                    }
                }
            };
            let outside = spec.support.is_some_and(|s| n.unsigned_abs() > s);
            if outside || spec.c2 == 0.0 {
                return Ok(0.0);
            }
            let base = spec.offset + n.unsigned_abs() as f64;
            if base == 0.0 {
                return Err(Error::InvalidParameter(format!("W({n}) is singular with offset 0")));
            }
            Ok(sign * spec.c2 * base.powf(-spec.decay))
        })
        .collect::<Result<Vec<_>>>()?;
    PotentialSamples::new(window.start, values)
}

/// Prüfer data of one perturbed basic solution, indexed by n = 1..=n_max.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruferSeries {
    /// ψ(n), n = 0..=n_max.
    pub psi: Vec<f64>,
    pub r: Vec<f64>,
    pub theta: Vec<f64>,
    /// |R(n+1)² − R(n)²[1 + U sin 2θ + U² sin²θ]| for n = 1..n_max.
    pub residual: Vec<f64>,
    /// Largest |ψ(n) − Im[ρ(n)φ(n)]| / max(1, |ψ(n)|).
    pub reconstruction_error: f64,
}

impl PruferSeries {
    pub fn max_residual(&self) -> f64 {
        self.residual.iter().copied().fold(0.0, f64::max)
    }

    /// max_n R(n)/R(1)
    pub fn max_growth(&self) -> f64 {
        self.r.iter().copied().fold(0.0, f64::max) / self.r[0]
    }
}

/// Prüfer variables of ψ_D and ψ_N for V + W against φ = φ_D + iφ_N of V.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruferTrace {
    pub energy: f64,
    /// 2 Im(φ(n+1) conj φ(n))
    pub omega: f64,
    /// U(n) = −2W(n)|φ(n)|²/ω, n = 1..=n_max.
    pub u: Vec<f64>,
    pub dirichlet: PruferSeries,
    pub neumann: PruferSeries,
}

impl PruferTrace {
    pub fn max_residual(&self) -> f64 {
        self.dirichlet.max_residual().max(self.neumann.max_residual())
    }

    pub fn max_growth(&self) -> f64 {
        self.dirichlet.max_growth().max(self.neumann.max_growth())
    }

    /// R(1)·exp(Σ|U| + ΣU²)
    pub fn growth_bound(&self) -> f64 {
        self.u.iter().map(|u| u.abs() + u * u).sum::<f64>().exp()
    }
}

/// Exact a·b − c·d up to a final rounding.
fn diff_of_products(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let cd = c * d;
    let err = (-c).mul_add(d, cd);
    a.mul_add(b, -cd) + err
}

fn prufer_series(phi: &[(f64, f64)], psi: Vec<f64>, u: &[f64], omega: f64) -> PruferSeries {
    let n_max = psi.len() - 1;
    let det = omega / 2.0;
    let mut r = Vec::with_capacity(n_max);
    let mut theta = Vec::with_capacity(n_max);
    let mut reconstruction_error: f64 = 0.0;
    for n in 1..=n_max {
        let (p, q) = phi[n];
        let (p1, q1) = phi[n - 1];
        // [q p; q1 p1] (x, y)ᵀ = (ψ(n), ψ(n−1))ᵀ
        let x = diff_of_products(p1, psi[n], p, psi[n - 1]) / det;
        let y = diff_of_products(q, psi[n - 1], q1, psi[n]) / det;
        let recon = x * q + y * p;
        reconstruction_error = reconstruction_error.max((psi[n] - recon).abs() / psi[n].abs().max(1.0));
        r.push(x.hypot(y));
        theta.push(y.atan2(x) + q.atan2(p));
    }
    let residual = (0..n_max - 1)
        .map(|k| {
            let s = theta[k].sin();
            let factor = 1.0 + u[k] * (2.0 * theta[k]).sin() + u[k] * u[k] * s * s;
            (r[k + 1] * r[k + 1] - r[k] * r[k] * factor).abs()
        })
        .collect();
    PruferSeries { psi, r, theta, residual, reconstruction_error }
}

/// Half-line Prüfer trace up to n_max; `v` and `w` must cover [1, n_max − 1].
pub fn prufer_trace(v: &PotentialSamples, w: &PotentialSamples, energy: f64, n_max: u64) -> Result<PruferTrace> {
    if n_max < 2 {
        return Err(Error::InvalidParameter(format!("n_max must be at least 2, got {n_max}")));
    }
    let end = n_max as i64;
    let phi_d = solve_difference(v, energy, 0, (0.0, 1.0), end)?;
    let phi_n = solve_difference(v, energy, 0, (1.0, 0.0), end)?;
    let phi: Vec<(f64, f64)> = phi_d.into_iter().zip(phi_n).collect();
    let omega = 2.0 * diff_of_products(phi[1].1, phi[0].0, phi[1].0, phi[0].1);
    if omega.abs() < MIN_WRONSKIAN {
        return Err(Error::DegenerateReference(omega));
    }
    let vw = v.add(w)?;
    let u = (1..=end)
        .map(|n| {
            let (p, q) = phi[n as usize];
            let wn = if n < end { w.at(n)? } else { w.get(n).unwrap_or(0.0) };
            Ok(-2.0 * wn * (p * p + q * q) / omega)
        })
        .collect::<Result<Vec<_>>>()?;
    let psi_d = solve_difference(&vw, energy, 0, (0.0, 1.0), end)?;
    let psi_n = solve_difference(&vw, energy, 0, (1.0, 0.0), end)?;
    Ok(PruferTrace {
        energy,
        omega,
        dirichlet: prufer_series(&phi, psi_d, &u, omega),
        neumann: prufer_series(&phi, psi_n, &u, omega),
        u,
    })
}

/// Growth exponents at E₀ with and without W.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub energy: f64,
    pub unperturbed: PowerLawFit,
    pub perturbed: PowerLawFit,
    /// |α̂_perturbed − α̂_unperturbed|
    pub delta: f64,
}

pub fn stability_check(v: &PotentialSamples, w: &PotentialSamples, energy: f64, n_max: u64) -> Result<StabilityReport> {
    let vw = v.add(w)?;
    let fit = |pot: &PotentialSamples| {
        growth_profile(pot, energy, n_max, Sampling::Dyadic, NormKind::Operator).and_then(|p| fit_power_law(&p))
    };
    let unperturbed = fit(v)?;
    let perturbed = fit(&vw)?;
    let delta = (perturbed.alpha - unperturbed.alpha).abs();
    Ok(StabilityReport { energy, unperturbed, perturbed, delta })
}

//! Wavepacket spreading on truncated lattices.
//!
//! The initial state is δ₁ on the half-line [1, L] and δ₀ on the whole line
//! [−L, L]. Abel averages a(n, T) = (1/T)∫₀^∞ e^{−2t/T} |⟨δ_n, e^{−itH}δ_o⟩|² dt
//! are evaluated exactly in the spectral representation of the truncated
//! operator. The measure μ̂ = Σ_j u_j(o)² δ_{E_j} stands in for the
//! infinite-volume spectral measure of (H, δ_o) and is only an approximation.

use std::str::FromStr;

use faer::{Mat, Side};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::potentials::{Geometry, PotentialSamples};
use crate::transfer::least_squares;
use crate::{Error, Result};

/// Sites next to a truncation boundary that the guard inspects.
pub const GUARD_SITES: usize = 10;
/// Largest admissible Abel mass on the guard sites.
pub const GUARD_MASS: f64 = 1e-8;
/// Largest admissible eigenpair residual.
pub const EIGEN_RESIDUAL: f64 = 1e-8;

/// Symmetric tridiagonal operator with unit hopping and Dirichlet cutoffs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeOperator {
    pub geometry: Geometry,
    /// Site label of the first row.
    pub start: i64,
    pub diagonal: Vec<f64>,
}

impl LatticeOperator {
    pub fn size(&self) -> usize {
        self.diagonal.len()
    }

    pub fn site(&self, index: usize) -> i64 {
        self.start + index as i64
    }

    /// Row of the initial site δ₁ or δ₀.
    pub fn origin(&self) -> usize {
        match self.geometry {
            Geometry::HalfLine => 0,
            Geometry::WholeLine => (-self.start) as usize,
        }
    }

    /// Whether row `index` lies within `GUARD_SITES` of a truncation boundary.
    /// The Dirichlet condition at 0 on the half-line is not a truncation.
    pub fn is_boundary(&self, index: usize) -> bool {
        let n = self.size();
        let near_end = index + GUARD_SITES >= n;
        match self.geometry {
            Geometry::HalfLine => near_end,
            Geometry::WholeLine => near_end || index < GUARD_SITES,
        }
    }

    /// (Hx)(i) with x(i) = 0 outside the lattice.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.size();
        (0..n)
            .map(|i| {
                let mut y = self.diagonal[i] * x[i];
                if i > 0 {
                    y += x[i - 1];
                }
                if i + 1 < n {
                    y += x[i + 1];
                }
                y
            })
            .collect()
    }

    /// Solves (H − z)x = δ_o.
    pub fn resolvent_column(&self, z: Complex64) -> Vec<Complex64> {
        resolvent_solve(&self.diagonal, self.origin(), z)
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let d = &self.diagonal;
        Mat::from_fn(d.len(), d.len(), |i, j| {
            if i == j {
                d[i]
            } else if i.abs_diff(j) == 1 {
                1.0
            } else {
                0.0
            }
        })
    }
}

/// Thomas algorithm for (diag − z + hopping) x = δ_o.
fn resolvent_solve(diagonal: &[f64], origin: usize, z: Complex64) -> Vec<Complex64> {
    let n = diagonal.len();
    let one = Complex64::new(1.0, 0.0);
    let mut c = vec![Complex64::default(); n];
    let mut x = vec![Complex64::default(); n];
    let mut pivot = diagonal[0] - z;
    c[0] = one / pivot;
    x[0] = if origin == 0 { one / pivot } else { Complex64::default() };
    for i in 1..n {
        pivot = diagonal[i] - z - c[i - 1];
        let rhs = if i == origin { one } else { Complex64::default() };
        c[i] = one / pivot;
        x[i] = (rhs - x[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        let next = x[i + 1];
        x[i] -= c[i] * next;
    }
    x
}

/// Half-line samples must start at site 1; whole-line samples must be
/// symmetric about 0.
pub fn build_operator(v: &PotentialSamples, geometry: Geometry) -> Result<LatticeOperator> {
    let w = v.window();
    match geometry {
        Geometry::HalfLine if w.start != 1 => {
            return Err(Error::WindowMismatch(format!("half-line window must start at 1, got [{}, {}]", w.start, w.end)));
        }
        Geometry::WholeLine if w.start != -w.end => {
            return Err(Error::WindowMismatch(format!("whole-line window must be [−L, L], got [{}, {}]", w.start, w.end)));
        }
        _ => {}
    }
    Ok(LatticeOperator { geometry, start: w.start, diagonal: v.values.clone() })
}

/// Orthonormal eigenbasis of a `LatticeOperator`.
#[derive(Debug, Clone)]
pub struct EigenData {
    pub operator: LatticeOperator,
    /// Ascending eigenvalues E_j.
    pub values: Vec<f64>,
    /// u_j(i) at `vectors[j * size + i]`.
    vectors: Vec<f64>,
    /// u_j(o)
    origin_weights: Vec<f64>,
    /// Largest ‖Hu_j − E_j u_j‖∞.
    pub max_residual: f64,
}

impl EigenData {
    pub fn size(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, j: usize) -> &[f64] {
        let n = self.size();
        &self.vectors[j * n..(j + 1) * n]
    }

    /// u_j(o) for all j.
    pub fn origin_weights(&self) -> &[f64] {
        &self.origin_weights
    }

    /// Σ_j u_j(o)²
    pub fn spectral_mass(&self) -> f64 {
        self.origin_weights.iter().map(|w| w * w).sum()
    }
}

/// Dense symmetric eigendecomposition, certified by residual and
/// normalization of the spectral measure.
pub fn eigen(op: &LatticeOperator) -> Result<EigenData> {
    let n = op.size();
    let evd = op
        .to_dense()
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::EigenFailure(format!("{e:?}")))?;
    let s = evd.S();
    let u = evd.U();
    let values: Vec<f64> = (0..n).map(|j| s[j]).collect();
    let mut vectors = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            vectors[j * n + i] = u[(i, j)];
        }
    }
    let origin = op.origin();
    let origin_weights: Vec<f64> = (0..n).map(|j| vectors[j * n + origin]).collect();
    let max_residual = (0..n)
        .into_par_iter()
        .map(|j| {
            let v = &vectors[j * n..(j + 1) * n];
            op.apply(v).iter().zip(v).map(|(hv, x)| (hv - values[j] * x).abs()).fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    let data = EigenData { operator: op.clone(), values, vectors, origin_weights, max_residual };
    if max_residual >= EIGEN_RESIDUAL {
        return Err(Error::EigenFailure(format!("eigenpair residual {max_residual:e}")));
    }
    let mass = data.spectral_mass();
    if (mass - 1.0).abs() > 1e-10 {
        return Err(Error::EigenFailure(format!("spectral measure has mass {mass}")));
    }
    Ok(data)
}

/// a(n, T) for every row of the lattice.
///
/// Equals Σ_{j,k} u_j(n)u_j(o)u_k(n)u_k(o)·2/(4 + T²(E_j − E_k)²), evaluated
/// as −ε Σ_j u_j(n)u_j(o) Im[(H − E_j + 2iε)⁻¹δ_o](n) with ε = 1/T.
pub fn abel_amplitudes(eig: &EigenData, t: f64) -> Result<Vec<f64>> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("T must be positive, got {t}")));
    }
    let n = eig.size();
    let eps = 1.0 / t;
    let diag = &eig.operator.diagonal;
    let origin = eig.operator.origin();
    let chunk = 64;
    let partials: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .chunks(chunk)
        .map(|js| {
            let mut acc = vec![0.0; n];
            for j in js {
                let w = eig.origin_weights[j];
                if w == 0.0 {
                    continue;
                }
                let x = resolvent_solve(diag, origin, Complex64::new(eig.values[j], -2.0 * eps));
                for ((a, u), xi) in acc.iter_mut().zip(eig.vector(j)).zip(&x) {
                    *a += u * w * xi.im;
                }
            }
            acc
        })
        .collect();
    let mut out = vec![0.0; n];
    for p in partials {
        for (o, v) in out.iter_mut().zip(p) {
            *o += v;
        }
    }
    for a in &mut out {
        *a *= -eps;
    }
    Ok(out)
}

/// Σ_n |n|^p a(n, T) with n the site label.
pub fn moment(op: &LatticeOperator, amplitudes: &[f64], p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::InvalidParameter(format!("moment order must be positive, got {p}")));
    }
    Ok(amplitudes
        .iter()
        .enumerate()
        .map(|(i, a)| (op.site(i).unsigned_abs() as f64).powf(p) * a)
        .sum())
}

/// Abel mass on the `GUARD_SITES` rows next to each truncation boundary.
pub fn boundary_mass(op: &LatticeOperator, amplitudes: &[f64]) -> f64 {
    amplitudes.iter().enumerate().filter(|(i, _)| op.is_boundary(*i)).map(|(_, a)| a).sum()
}

pub fn guard(op: &LatticeOperator, amplitudes: &[f64]) -> Result<f64> {
    let mass = boundary_mass(op, amplitudes);
    if mass < GUARD_MASS {
        Ok(mass)
    } else {
        Err(Error::FiniteSizeViolation(format!("boundary mass {mass:e} is not below {GUARD_MASS:e}")))
    }
}

/// Largest |site| on the lattice.
fn extent(op: &LatticeOperator) -> f64 {
    op.site(0).unsigned_abs().max(op.site(op.size() - 1).unsigned_abs()) as f64
}

/// P(T) = Σ_{|n| ≥ N(T)} a(n, T) with N(T) = T^{1/(1+α)}.
pub fn outside_probability(op: &LatticeOperator, amplitudes: &[f64], alpha: f64, t: f64) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(Error::InvalidParameter(format!("α must be nonnegative, got {alpha}")));
    }
    let radius = t.powf(1.0 / (1.0 + alpha));
    let l = extent(op);
    if radius > l / 2.0 {
        return Err(Error::FiniteSizeViolation(format!("N(T) = {radius} exceeds L/2 = {}", l / 2.0)));
    }
    guard(op, amplitudes)?;
    Ok(amplitudes
        .iter()
        .enumerate()
        .filter(|(i, _)| op.site(*i).unsigned_abs() as f64 >= radius)
        .map(|(_, a)| a)
        .sum())
}

/// F(E + iε) = Σ_j u_j(o)² / (E_j − E − iε)
pub fn borel_transform(eig: &EigenData, energy: f64, eps: f64) -> Result<Complex64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("ε must be positive, got {eps}")));
    }
    let z = Complex64::new(energy, eps);
    Ok(eig.values.iter().zip(&eig.origin_weights).map(|(&e, &w)| w * w / (e - z)).sum())
}

/// μ̂([lo, hi]) = Σ_{E_j ∈ [lo, hi]} u_j(o)²
pub fn mu_hat(eig: &EigenData, lo: f64, hi: f64) -> f64 {
    eig.values
        .iter()
        .zip(&eig.origin_weights)
        .filter(|(&e, _)| lo <= e && e <= hi)
        .map(|(_, w)| w * w)
        .sum()
}

/// Log-log slope of a moment series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportFit {
    pub p: f64,
    /// Least-squares slope over the admitted T.
    pub beta: f64,
    /// Minimum of consecutive two-point slopes.
    pub beta_running_min: f64,
    /// Consecutive two-point slopes, indexed by the upper T.
    pub two_point: Vec<(f64, f64)>,
    pub used: usize,
    /// T values dropped by the guard.
    pub excluded: Vec<f64>,
}

impl TransportFit {
    pub fn flagged(&self) -> bool {
        !self.excluded.is_empty()
    }
}

/// Fits log⟨|X|^p⟩ against log T over the entries with `valid` set.
pub fn transport_exponent(ts: &[f64], moments: &[f64], valid: &[bool], p: f64) -> Result<TransportFit> {
    if ts.len() != moments.len() || ts.len() != valid.len() {
        return Err(Error::InvalidParameter("T grid, moments and guard flags differ in length".into()));
    }
    let excluded: Vec<f64> = ts.iter().zip(valid).filter(|(_, ok)| !**ok).map(|(t, _)| *t).collect();
    let pairs: Vec<(f64, f64)> = ts
        .iter()
        .zip(moments)
        .zip(valid)
        .filter(|(_, ok)| **ok)
        .map(|((t, m), _)| (t.ln(), m.ln()))
        .collect();
    if pairs.len() < 5 {
        return Err(Error::FiniteSizeViolation(format!(
            "{} of {} T values pass the guard; at least 5 are needed",
            pairs.len(),
            ts.len()
        )));
    }
    if pairs.iter().any(|v| !v.1.is_finite()) {
        return Err(Error::InvalidParameter("moments must be positive".into()));
    }
    let (beta, _, _) = least_squares(&pairs);
    let two_point: Vec<(f64, f64)> =
        pairs.windows(2).map(|w| (w[1].0.exp(), (w[1].1 - w[0].1) / (w[1].0 - w[0].0))).collect();
    let beta_running_min = two_point.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    Ok(TransportFit { p, beta, beta_running_min, two_point, used: pairs.len(), excluded })
}

/// Closed-form lower bounds on β⁻(p).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    /// (p − 3α)/(1 + α) from power-law bounded transfer matrices.
    PowerLaw,
    /// (p + 1 − 2α)/(1 + α) when E₀ is an eigenvalue.
    Eigenvalue,
    /// (p − 1 − 4α)/(1 + α) for power-decaying perturbations.
    Perturbed,
    /// (p − 5)/2 for period doubling.
    PeriodDoubling,
    /// p − 1 for bounded transfer matrices.
    Bounded,
}

impl BoundKind {
    pub const ALL: [BoundKind; 5] =
        [BoundKind::PowerLaw, BoundKind::Eigenvalue, BoundKind::Perturbed, BoundKind::PeriodDoubling, BoundKind::Bounded];

    pub fn as_str(self) -> &'static str {
        match self {
            BoundKind::PowerLaw => "power-law",
            BoundKind::Eigenvalue => "eigenvalue",
            BoundKind::Perturbed => "perturbed",
            BoundKind::PeriodDoubling => "period-doubling",
            BoundKind::Bounded => "bounded",
        }
    }
}

impl FromStr for BoundKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BoundKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s || k.as_str().replace('-', "_") == s)
            .ok_or_else(|| Error::UnknownBound(s.to_string()))
    }
}

pub fn predicted_beta_bound(kind: BoundKind, p: f64, alpha: f64) -> Result<f64> {
    let needs_alpha = matches!(kind, BoundKind::PowerLaw | BoundKind::Eigenvalue | BoundKind::Perturbed);
    if needs_alpha && !(alpha >= 0.0) {
        return Err(Error::InvalidParameter(format!("α must be nonnegative, got {alpha}")));
    }
    Ok(match kind {
        BoundKind::PowerLaw => (p - 3.0 * alpha) / (1.0 + alpha),
        BoundKind::Eigenvalue => (p + 1.0 - 2.0 * alpha) / (1.0 + alpha),
        BoundKind::Perturbed => (p - 1.0 - 4.0 * alpha) / (1.0 + alpha),
        BoundKind::PeriodDoubling => (p - 5.0) / 2.0,
        BoundKind::Bounded => p - 1.0,
    })
}

/// Per-T diagnostics of a dynamics run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub t: f64,
    /// Σ_n a(n, T)
    pub total: f64,
    pub min_amplitude: f64,
    pub boundary_mass: f64,
    pub guard_ok: bool,
    /// ⟨|X|^p⟩(T) in the order of `DynamicsReport::ps`.
    pub moments: Vec<f64>,
    /// P(T), absent when N(T) exceeds L/2 or the guard fails.
    pub outside_probability: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsReport {
    pub ts: Vec<f64>,
    pub ps: Vec<f64>,
    /// α entering N(T) = T^{1/(1+α)}.
    pub alpha: f64,
    pub sites: Vec<i64>,
    /// a(n, T) per T, indexed like `sites`.
    pub amplitudes: Vec<Vec<f64>>,
    pub rows: Vec<ReportRow>,
    /// One fit per p; errors when too few T pass the guard.
    pub fits: Vec<std::result::Result<TransportFit, Error>>,
}

pub fn dynamics_report(eig: &EigenData, ts: &[f64], ps: &[f64], alpha: f64) -> Result<DynamicsReport> {
    let op = &eig.operator;
    let amplitudes: Vec<Vec<f64>> = ts.par_iter().map(|&t| abel_amplitudes(eig, t)).collect::<Result<_>>()?;
    let rows = ts
        .iter()
        .zip(&amplitudes)
        .map(|(&t, a)| {
            let boundary = boundary_mass(op, a);
            Ok(ReportRow {
                t,
                total: a.iter().sum(),
                min_amplitude: a.iter().copied().fold(f64::INFINITY, f64::min),
                boundary_mass: boundary,
                guard_ok: boundary < GUARD_MASS,
                moments: ps.iter().map(|&p| moment(op, a, p)).collect::<Result<_>>()?,
                outside_probability: outside_probability(op, a, alpha, t).ok(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let valid: Vec<bool> = rows.iter().map(|r| r.guard_ok).collect();
    let fits = ps
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let m: Vec<f64> = rows.iter().map(|r| r.moments[k]).collect();
            transport_exponent(ts, &m, &valid, p)
        })
        .collect();
    let sites = (0..op.size()).map(|i| op.site(i)).collect();
    Ok(DynamicsReport { ts: ts.to_vec(), ps: ps.to_vec(), alpha, sites, amplitudes, rows, fits })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessRow {
    pub t: f64,
    pub moment: f64,
    /// μ̂([E₀ − 1/T, E₀ + 1/T])
    pub mu_hat: f64,
    /// T^{(p−3α)/(1+α)} (1/T + μ̂)
    pub rhs: f64,
    pub ratio: f64,
    pub boundary_mass: f64,
    pub guard_ok: bool,
}

/// Ratio of ⟨|X|^p⟩(T) to T^{(p−3α)/(1+α)}(1/T + μ̂([E₀ ∓ 1/T])) over a T grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessReport {
    pub energy: f64,
    pub alpha: f64,
    pub p: f64,
    pub rows: Vec<HarnessRow>,
    /// Extremes over the rows passing the guard.
    pub ratio_min: f64,
    pub ratio_max: f64,
}

impl HarnessReport {
    /// max/min of the ratio over guarded rows.
    pub fn spread(&self) -> f64 {
        self.ratio_max / self.ratio_min
    }
}

pub fn bound_scaling_harness(eig: &EigenData, energy: f64, alpha: f64, p: f64, ts: &[f64]) -> Result<HarnessReport> {
    let op = &eig.operator;
    if op.size() < 2 * GUARD_SITES {
        return Err(Error::FiniteSizeViolation(format!(
            "lattice of {} sites is too small for the boundary guard",
            op.size()
        )));
    }
    let exponent = predicted_beta_bound(BoundKind::PowerLaw, p, alpha)?;
    let rows = ts
        .par_iter()
        .map(|&t| {
            let a = abel_amplitudes(eig, t)?;
            let boundary = boundary_mass(op, &a);
            let moment = moment(op, &a, p)?;
            let mu = mu_hat(eig, energy - 1.0 / t, energy + 1.0 / t);
            let rhs = t.powf(exponent) * (1.0 / t + mu);
            Ok(HarnessRow { t, moment, mu_hat: mu, rhs, ratio: moment / rhs, boundary_mass: boundary, guard_ok: boundary < GUARD_MASS })
        })
        .collect::<Result<Vec<_>>>()?;
    let guarded: Vec<f64> = rows.iter().filter(|r| r.guard_ok).map(|r| r.ratio).collect();
    if guarded.is_empty() {
        return Err(Error::FiniteSizeViolation("no T value passes the boundary guard".into()));
    }
    let ratio_min = guarded.iter().copied().fold(f64::INFINITY, f64::min);
    let ratio_max = guarded.iter().copied().fold(0.0, f64::max);
    Ok(HarnessReport { energy, alpha, p, rows, ratio_min, ratio_max })
}

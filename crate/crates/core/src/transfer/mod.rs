//! Transfer-matrix cocycles.
//!
//! For a solution φ of φ(n+1) + φ(n−1) + V(n)φ(n) = Eφ(n), the vector
//! Φ(n) = (φ(n+1), φ(n)) satisfies Φ(n) = T(n, m; E) Φ(m) with
//! T(n, m; E) = T(V(n); E) ⋯ T(V(m+1); E) for n > m.

mod mat2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use mat2::{Mat2, NormKind};

use crate::potentials::PotentialSamples;
use crate::{Error, Result};

/// Products are rescaled to unit determinant after this many factors.
pub const RENORMALIZE_EVERY: usize = 1 << 10;

/// T(x; E)
pub fn step_matrix(x: f64, energy: f64) -> Mat2 {
    Mat2::step(x, energy)
}

/// Left-multiplies step matrices, rescaling by 1/√det every
/// [`RENORMALIZE_EVERY`] factors.
#[derive(Debug, Clone, Copy)]
struct Accumulator {
    product: Mat2,
    factors: usize,
    since_renorm: usize,
    max_drift: f64,
}

impl Accumulator {
    fn new() -> Self {
        Self { product: Mat2::IDENTITY, factors: 0, since_renorm: 0, max_drift: 0.0 }
    }

    #[inline]
    fn push(&mut self, x: f64, energy: f64) {
        self.product = Mat2::step(x, energy) * self.product;
        self.factors += 1;
        self.since_renorm += 1;
        if self.since_renorm == RENORMALIZE_EVERY {
            self.renormalize();
        }
    }

    /// Deviations of det below the rounding floor 16εk‖M‖²_F of a k-factor
    /// product carry no information; rescaling by them would only perturb a
    /// large product.
    fn renormalize(&mut self) {
        let det = self.product.det();
        let drift = (det - 1.0).abs();
        self.max_drift = self.max_drift.max(drift);
        let floor = 16.0 * f64::EPSILON * self.factors as f64 * self.product.hs_norm_sq();
        if det > 0.0 && drift > floor {
            self.product = self.product.scale(1.0 / det.sqrt());
        }
        self.since_renorm = 0;
    }
}

/// T(n, m; E). Needs the sites between min(n, m)+1 and max(n, m) in the
/// window; n < m gives the inverse of T(m, n; E).
pub fn transfer_product(v: &PotentialSamples, n: i64, m: i64, energy: f64) -> Result<Mat2> {
    if n == m {
        return Ok(Mat2::IDENTITY);
    }
    let (hi, lo) = if n > m { (n, m) } else { (m, n) };
    let values = v.slice(lo + 1, hi)?;
    let mut acc = Accumulator::new();
    for &x in values {
        acc.push(x, energy);
    }
    let forward = acc.product;
    Ok(if n > m { forward } else { forward.inverse() })
}

/// T(n, m; E) for n > m as (M, s) with T = 2^s M, so products whose entries
/// leave the f64 range stay representable. Scaling is by exact powers of two.
pub fn transfer_product_scaled(v: &PotentialSamples, n: i64, m: i64, energy: f64) -> Result<(Mat2, i64)> {
    const SHIFT: i32 = 256;
    if n < m {
        return Err(Error::InvalidParameter(format!("scaled product needs n ≥ m, got n = {n}, m = {m}")));
    }
    if n == m {
        return Ok((Mat2::IDENTITY, 0));
    }
    let down = 2f64.powi(-SHIFT);
    let mut product = Mat2::IDENTITY;
    let mut exponent = 0i64;
    for &x in v.slice(m + 1, n)? {
        product = Mat2::step(x, energy) * product;
        if product.max_abs() > 2f64.powi(SHIFT) {
            product = product.scale(down);
            exponent += SHIFT as i64;
        }
    }
    Ok((product, exponent))
}

/// Solution of the difference equation on sites `start..=end` with
/// φ(start) and φ(start + 1) given. Uses V on `start+1..end`.
pub fn solve_difference(
    v: &PotentialSamples,
    energy: f64,
    start: i64,
    initial: (f64, f64),
    end: i64,
) -> Result<Vec<f64>> {
    if end < start + 1 {
        return Err(Error::InvalidParameter(format!(
            "solution range [{start}, {end}] must contain both initial sites"
        )));
    }
    let mut phi = Vec::with_capacity((end - start + 1) as usize);
    phi.push(initial.0);
    phi.push(initial.1);
    if end > start + 1 {
        let potential = v.slice(start + 1, end - 1)?;
        for (i, &x) in potential.iter().enumerate() {
            let next = (energy - x) * phi[i + 1] - phi[i];
            phi.push(next);
        }
    }
    Ok(phi)
}

/// How growth profiles choose their anchors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// 1, 2, 4, …, up to n_max.
    #[default]
    Dyadic,
    /// Every n in 1..=n_max. Costs O(n_max²).
    All,
}

/// Norm growth of T(·, ·; E) measured from the site before the window.
///
/// With base = window.start − 1, `sup_values[i]` is the largest
/// ‖T(base + n′, base + m; E)‖ over 0 ≤ m ≤ n′ ≤ `points[i]` among sampled
/// anchors n′, and `anchor_values[i]` is ‖T(base + points[i], base; E)‖.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthProfile {
    pub energy: f64,
    pub base: i64,
    pub norm: NormKind,
    pub points: Vec<u64>,
    pub sup_values: Vec<f64>,
    pub anchor_values: Vec<f64>,
    /// Largest |det − 1| seen before a renormalization.
    pub det_drift: f64,
}

fn anchors(n_max: u64, sampling: Sampling) -> Vec<u64> {
    match sampling {
        Sampling::All => (1..=n_max).collect(),
        Sampling::Dyadic => {
            let mut out: Vec<u64> = std::iter::successors(Some(1u64), |&n| n.checked_mul(2))
                .take_while(|&n| n <= n_max)
                .collect();
            if out.last() != Some(&n_max) {
                out.push(n_max);
            }
            out
        }
    }
}

/// Prefix products P(k) = T(base + k, base; E) for k = 0..=n_max; the
/// stored matrices have determinant 1 up to the recorded drift.
fn prefix_products(v: &PotentialSamples, energy: f64, n_max: u64) -> Result<(Vec<Mat2>, f64)> {
    let base = v.window().start - 1;
    let values = v.slice(base + 1, base + n_max as i64)?;
    let mut acc = Accumulator::new();
    let mut prefix = Vec::with_capacity(values.len() + 1);
    prefix.push(Mat2::IDENTITY);
    for &x in values {
        acc.push(x, energy);
        prefix.push(acc.product);
    }
    acc.renormalize();
    Ok((prefix, acc.max_drift))
}

/// Norm growth profile over `1..=n_max` sites of the window.
///
/// T(n, m) is recovered as P(n)·P(m)⁻¹ from stored prefix products, so each
/// anchor costs O(n) two-by-two products.
pub fn growth_profile(
    v: &PotentialSamples,
    energy: f64,
    n_max: u64,
    sampling: Sampling,
    norm: NormKind,
) -> Result<GrowthProfile> {
    if n_max == 0 {
        return Err(Error::InvalidParameter("n_max must be positive".into()));
    }
    let (prefix, det_drift) = prefix_products(v, energy, n_max)?;
    let inverses: Vec<Mat2> = prefix.iter().map(Mat2::inverse).collect();

    let points = anchors(n_max, sampling);
    let mut sup_values = Vec::with_capacity(points.len());
    let mut anchor_values = Vec::with_capacity(points.len());
    let mut running = 1.0f64;
    for &n in &points {
        let pn = prefix[n as usize];
        let sup = inverses[..=n as usize]
            .iter()
            .map(|inv| (pn * *inv).norm(norm))
            .fold(1.0f64, f64::max);
        running = running.max(sup);
        sup_values.push(running);
        anchor_values.push(pn.norm(norm));
    }
    Ok(GrowthProfile {
        energy,
        base: v.window().start - 1,
        norm,
        points,
        sup_values,
        anchor_values,
        det_drift,
    })
}

/// ‖T‖ ≈ Ĉ·n^α̂ fitted in log-log coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub alpha: f64,
    pub c: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
    /// Number of samples used.
    pub used: usize,
}

/// Least-squares fit of log value against log n over samples with
/// `lo ≤ n ≤ hi`.
pub fn fit_power_law_range(points: &[u64], values: &[f64], lo: u64, hi: u64) -> Result<PowerLawFit> {
    let pairs: Vec<(f64, f64)> = points
        .iter()
        .zip(values)
        .filter(|(&n, _)| n >= lo && n <= hi)
        .map(|(&n, &v)| ((n as f64).ln(), v.ln()))
        .collect();
    if pairs.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "power-law fit needs at least two samples in [{lo}, {hi}], got {}",
            pairs.len()
        )));
    }
    if let Some(k) = pairs.iter().position(|(_, y)| !y.is_finite()) {
        let n = pairs[k].0.exp().round();
        return Err(Error::InvalidParameter(format!(
            "profile value at n = {n} is not a positive finite number (norm overflow from exponential growth?)"
        )));
    }
    if pairs.windows(2).all(|w| w[0].1 == w[1].1) {
        return Ok(PowerLawFit { alpha: 0.0, c: pairs[0].1.exp(), residual: 0.0, used: pairs.len() });
    }
    let (slope, intercept, residual) = least_squares(&pairs);
    Ok(PowerLawFit { alpha: slope, c: intercept.exp(), residual, used: pairs.len() })
}

/// Returns (slope, intercept, rms residual).
pub(crate) fn least_squares(pairs: &[(f64, f64)]) -> (f64, f64, f64) {
    let k = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pairs.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    (slope, intercept, (rss / k).sqrt())
}

/// Power law fitted to the sup series over the upper half (in log scale) of
/// the sampled range, i.e. n ≥ √(n_first·n_last).
pub fn fit_power_law(profile: &GrowthProfile) -> Result<PowerLawFit> {
    let points = &profile.points;
    if points.len() < 4 {
        return Err(Error::InvalidParameter(format!(
            "power-law fit needs at least 4 samples, got {}",
            points.len()
        )));
    }
    if profile.sup_values.iter().any(|&v| !(v >= 1.0)) {
        return Err(Error::InvalidParameter("profile values must be at least 1".into()));
    }
    let first = points[0] as f64;
    let last = *points.last().expect("nonempty");
    let lo = (first * last as f64).sqrt().ceil() as u64;
    fit_power_law_range(points, &profile.sup_values, lo, last)
}

/// One row of an energy scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub energy: f64,
    pub fit: std::result::Result<PowerLawFit, Error>,
}

/// Independent profile and fit per energy; errors stay in their row.
pub fn energy_scan(v: &PotentialSamples, grid: &[f64], n_max: u64, norm: NormKind) -> Vec<ScanRow> {
    grid.par_iter()
        .map(|&energy| ScanRow {
            energy,
            fit: growth_profile(v, energy, n_max, Sampling::Dyadic, norm).and_then(|p| fit_power_law(&p)),
        })
        .collect()
}

/// Grid points per unit of k used to bracket monodromy roots.
const MONODROMY_GRID_PER_K: usize = 1000;

/// The k − 1 energies in (b − 2, b + 2) where T(b, E)^k = ±I (odd k ≥ 3).
///
/// tr T(b, E)^k ∓ 2 only touches zero at these degenerate gaps, so roots are
/// bracketed on the lower-left entry of T(b, E)^k instead, which changes sign
/// there. Brackets come from a grid of 1000·k points and are bisected down to
/// adjacent floats.
pub fn monodromy_energies(b: f64, k: usize, tol: f64) -> Result<Vec<f64>> {
    if k < 3 || k % 2 == 0 {
        return Err(Error::InvalidParameter(format!("monodromy order must be odd and ≥ 3, got {k}")));
    }
    let entry = |e: f64| Mat2::step(b, e).pow(k as u32).0[1][0];
    let points = MONODROMY_GRID_PER_K * k;
    let lo = b - 2.0;
    let h = 4.0 / points as f64;
    let grid: Vec<f64> = (1..points).map(|i| lo + i as f64 * h).collect();

    let mut roots = Vec::with_capacity(k - 1);
    for w in grid.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        let (f0, f1) = (entry(x0), entry(x1));
        if f0 == 0.0 {
            roots.push(x0);
            continue;
        }
        if f1 == 0.0 || f0.signum() == f1.signum() {
            continue;
        }
        let (mut a, mut c, mut fa) = (x0, x1, f0);
        loop {
            let mid = 0.5 * (a + c);
            if mid <= a || mid >= c {
                break;
            }
            let fm = entry(mid);
            if fm == 0.0 {
                a = mid;
                c = mid;
                break;
            }
            if fm.signum() == fa.signum() {
                a = mid;
                fa = fm;
            } else {
                c = mid;
            }
        }
        roots.push(0.5 * (a + c));
    }

    let verified: Vec<f64> = roots
        .into_iter()
        .filter(|&e| {
            let m = Mat2::step(b, e).pow(k as u32);
            m.max_abs_diff(&Mat2::IDENTITY) < tol || m.max_abs_diff(&-Mat2::IDENTITY) < tol
        })
        .collect();
    if verified.len() != k - 1 {
        return Err(Error::RootFindingFailure {
            found: verified.len(),
            expected: k - 1,
            detail: format!("b = {b}, k = {k}, tol = {tol:e}"),
        });
    }
    Ok(verified)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::Window;

    fn samples(values: &[f64]) -> PotentialSamples {
        PotentialSamples::new(1, values.to_vec()).unwrap()
    }

    #[test]
    fn identity_for_equal_sites() {
        let v = samples(&[0.3, 0.1]);
        assert_eq!(transfer_product(&v, 1, 1, 0.2).unwrap(), Mat2::IDENTITY);
    }

    #[test]
    fn constant_a_two_steps_is_minus_identity() {
        let a = 0.7;
        let v = samples(&[a, a]);
        let t = transfer_product(&v, 2, 0, a).unwrap();
        assert!(t.max_abs_diff(&-Mat2::IDENTITY) < 1e-15);
    }

    #[test]
    fn b_then_a_at_e_equals_a() {
        let (a, b) = (0.25, 1.75);
        let v = samples(&[b, a]);
        let t = transfer_product(&v, 2, 0, a).unwrap();
        assert_eq!(t, Mat2::new(-1.0, 0.0, a - b, -1.0));
    }

    #[test]
    fn reverse_order_inverts() {
        let v = samples(&[0.1, -0.4, 0.9, 0.3]);
        let fwd = transfer_product(&v, 4, 1, 0.37).unwrap();
        let back = transfer_product(&v, 1, 4, 0.37).unwrap();
        assert!((fwd * back).max_abs_diff(&Mat2::IDENTITY) < 1e-14);
    }

    #[test]
    fn out_of_window() {
        let v = samples(&[0.0; 4]);
        assert!(matches!(transfer_product(&v, 6, 0, 0.0), Err(Error::OutOfWindow { site: 6, .. })));
    }

    #[test]
    fn free_solution_at_band_center() {
        let v = PotentialSamples::constant(Window::half_line(10), 0.0);
        let phi = solve_difference(&v, 0.0, 0, (0.0, 1.0), 9).unwrap();
        assert_eq!(phi, vec![0.0, 1.0, 0.0, -1.0, 0.0, 1.0, 0.0, -1.0, 0.0, 1.0]);
    }

    #[test]
    fn constant_rotation_profile_is_bounded() {
        let a = 0.4;
        let v = PotentialSamples::constant(Window::half_line(1 << 12), a);
        let p = growth_profile(&v, a, 1 << 12, Sampling::Dyadic, NormKind::Operator).unwrap();
        assert!(p.sup_values.iter().all(|&x| (1.0..=1.0 + 1e-12).contains(&x)));
        let fit = fit_power_law(&p).unwrap();
        assert_eq!(fit.alpha, 0.0);
    }

    #[test]
    fn exact_quadratic_series() {
        let points: Vec<u64> = (0..12).map(|k| 1 << k).collect();
        let values: Vec<f64> = points.iter().map(|&n| (n * n) as f64).collect();
        let profile = GrowthProfile {
            energy: 0.0,
            base: 0,
            norm: NormKind::Operator,
            points,
            sup_values: values.clone(),
            anchor_values: values,
            det_drift: 0.0,
        };
        let fit = fit_power_law(&profile).unwrap();
        assert!((fit.alpha - 2.0).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
        assert!((fit.c - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fit_needs_four_samples() {
        let v = PotentialSamples::constant(Window::half_line(4), 0.0);
        let p = growth_profile(&v, 0.3, 4, Sampling::Dyadic, NormKind::Operator).unwrap();
        assert_eq!(p.points, vec![1, 2, 4]);
        assert!(fit_power_law(&p).is_err());
    }

    #[test]
    fn all_sampling_matches_brute_force() {
        let values: Vec<f64> = (0..40).map(|i| ((i * 37) % 11) as f64 / 5.0 - 1.0).collect();
        let v = samples(&values);
        let e = 0.31;
        let p = growth_profile(&v, e, 40, Sampling::All, NormKind::Operator).unwrap();
        let mut best = 1.0f64;
        for n in 1..=40i64 {
            for m in 0..=n {
                best = best.max(transfer_product(&v, n, m, e).unwrap().op_norm());
            }
            let got = p.sup_values[(n - 1) as usize];
            assert!((got - best).abs() <= 1e-9 * best, "n = {n}: {got} vs {best}");
        }
    }

    #[test]
    fn monodromy_roots() {
        let e = monodromy_energies(0.0, 3, 1e-9).unwrap();
        assert_eq!(e.len(), 2);
        assert!((e[0] + 1.0).abs() < 1e-10 && (e[1] - 1.0).abs() < 1e-10);
        let e = monodromy_energies(5.0, 3, 1e-9).unwrap();
        assert!((e[0] - 4.0).abs() < 1e-10 && (e[1] - 6.0).abs() < 1e-10);
        let e = monodromy_energies(0.0, 5, 1e-9).unwrap();
        assert_eq!(e.len(), 4);
        assert!((e[0] + e[3]).abs() < 1e-10 && (e[1] + e[2]).abs() < 1e-10);
        assert!(monodromy_energies(0.0, 4, 1e-9).is_err());
    }

    #[test]
    fn scan_keeps_errors_in_rows() {
        let v = PotentialSamples::constant(Window::half_line(64), 0.0);
        assert!(energy_scan(&v, &[], 64, NormKind::Operator).is_empty());
        let rows = energy_scan(&v, &[0.5, 1.0], 128, NormKind::Operator);
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| matches!(r.fit, Err(Error::OutOfWindow { .. }))));
    }
}

//! Trace map of the hierarchical potential V(n) = λ f(ord n) with
//! f(m) = Σ_{k<m} R^k.
//!
//! x_m(E) = tr T(2^m, 0; E) obeys
//! x_{m+1} = x_m² − 2 + R x_m (x_m − x_{m−1}² + 2) for m ≥ 1, with x₀ = E.

use dashu_float::{round::mode::HalfEven, FBig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::potentials::{hierarchical_level, realize, Family, PotentialSamples, PotentialSpec, Window};
use crate::transfer::{fit_power_law, fit_power_law_range, growth_profile, GrowthProfile, Mat2, NormKind, PowerLawFit, Sampling};
use crate::{Error, Result};

/// Orbits are cut off once a trace exceeds this magnitude.
pub const SATURATION: f64 = 1e150;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceOrbit {
    pub lambda: f64,
    pub r: f64,
    pub energy: f64,
    /// x₀, x₁, …; shorter than requested when `saturated`.
    pub traces: Vec<f64>,
    pub saturated: bool,
}

impl TraceOrbit {
    /// λ_m = λ R^m x_{m−1} ⋯ x₀
    pub fn lambda_m(&self, m: usize) -> f64 {
        self.lambda * self.r.powi(m as i32) * self.traces[..m].iter().product::<f64>()
    }
}

/// x_{m+1} from (x_{m−1}, x_m).
#[inline]
pub fn trace_map_step(prev: f64, cur: f64, r: f64) -> f64 {
    cur * cur - 2.0 + r * cur * (cur - prev * prev + 2.0)
}

/// Continues the recurrence from (x_{m−1}, x_m) for `steps` more levels,
/// returning x_{m+1}, …, x_{m+steps}.
pub fn continue_orbit(prev: f64, cur: f64, r: f64, steps: usize) -> Vec<f64> {
    let (mut p, mut c) = (prev, cur);
    (0..steps)
        .map(|_| {
            let next = trace_map_step(p, c, r);
            p = c;
            c = next;
            next
        })
        .collect()
}

/// x₁ from the two-site product T(V(2); E) T(V(1); E), V(1) = 0, V(2) = λ.
fn first_trace(energy: f64, lambda: f64) -> f64 {
    (Mat2::step(lambda, energy) * Mat2::step(0.0, energy)).trace()
}

/// x₀, …, x_{m_max} at energy E.
pub fn trace_orbit(energy: f64, lambda: f64, r: f64, m_max: usize) -> Result<TraceOrbit> {
    if m_max < 1 {
        return Err(Error::InvalidParameter("m_max must be at least 1".into()));
    }
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("R must be positive, got {r}")));
    }
    let mut traces = vec![energy, first_trace(energy, lambda)];
    let mut saturated = false;
    while traces.len() <= m_max {
        let m = traces.len() - 1;
        let next = trace_map_step(traces[m - 1], traces[m], r);
        if !next.is_finite() || next.abs() > SATURATION {
            saturated = true;
            break;
        }
        traces.push(next);
    }
    Ok(TraceOrbit { lambda, r, energy, traces, saturated })
}

/// The 2^m zeros E_{mk} of x_m, ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapEdgeSet {
    pub m: usize,
    pub energies: Vec<f64>,
}

/// Highest level accepted by the gap-edge solvers.
pub const MAX_LEVEL: usize = 16;

/// All 2^m real zeros of E ↦ x_m(E), rounded to the nearest f64.
///
/// The zeros are located in multiprecision (see `gap_edges_precise`) with
/// enough bits to resolve `tol`; zeros that cluster closer than one unit in
/// the last place of f64 round to the same value.
pub fn gap_edge_energies(m: usize, lambda: f64, r: f64, tol: f64) -> Result<GapEdgeSet> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let bits = precision_for(tol);
    let energies = gap_edges_precise(m, lambda, r, bits)?.iter().map(|e| e.to_f64().value()).collect();
    Ok(GapEdgeSet { m, energies })
}

/// Working precision for an absolute tolerance, with headroom for the
/// cancellation in x_m near clustered zeros.
pub fn precision_for(tol: f64) -> usize {
    let target = (-tol.log2()).ceil().max(53.0) as usize;
    (target + 192).min(4096)
}

/// Binary floating point of configurable precision.
pub type Mp = FBig<HalfEven, 2>;

/// `x` at `bits` bits of precision.
pub fn mp(x: f64, bits: usize) -> Mp {
    Mp::try_from(x).expect("finite value").with_precision(bits).value()
}

fn mp_sign(x: &Mp) -> i8 {
    if x.repr().is_zero() {
        0
    } else if *x < Mp::ZERO {
        -1
    } else {
        1
    }
}

/// x₀, …, x_{m_max} at energy E in `bits`-bit arithmetic, without saturation.
pub fn trace_orbit_precise(energy: &Mp, lambda: f64, r: f64, m_max: usize, bits: usize) -> Vec<Mp> {
    let e = energy.clone().with_precision(bits).value();
    let two = mp(2.0, bits);
    let r = mp(r, bits);
    let x1 = &(&e * &e) - &(&mp(lambda, bits) * &e) - &two;
    let mut traces = vec![e, x1];
    while traces.len() <= m_max {
        let m = traces.len() - 1;
        let (p, c) = (&traces[m - 1], &traces[m]);
        let sq = c * c;
        let next = &(&sq - &two) + &(&(&r * c) * &(&(c - &(p * p)) + &two));
        traces.push(next);
    }
    traces
}

/// Dirichlet block on sites 1, …, 2^m − 1 with a Sturm count at any energy.
struct DirichletBlock {
    diagonal: Vec<Mp>,
    bits: usize,
}

impl DirichletBlock {
    fn new(m: usize, lambda: f64, r: f64, bits: usize) -> Self {
        let r = mp(r, bits);
        let lambda = mp(lambda, bits);
        // f(k) = Σ_{i<k} R^i, exact up to rounding at `bits`.
        let mut levels = vec![mp(0.0, bits)];
        let mut power = mp(1.0, bits);
        for k in 1..=m {
            let next = &levels[k - 1] + &power;
            levels.push(next);
            power = &power * &r;
        }
        let diagonal =
            (1u64..(1u64 << m)).map(|n| &lambda * &levels[n.trailing_zeros() as usize]).collect();
        Self { diagonal, bits }
    }

    /// Eigenvalues below E, from the signs of the LDLᵀ pivots of H − E.
    fn count_below(&self, energy: &Mp) -> usize {
        let one = mp(1.0, self.bits);
        let tiny = mp(1.0, self.bits) >> (4 * self.bits as isize);
        let mut count = 0;
        let mut d: Option<Mp> = None;
        for v in &self.diagonal {
            let mut pivot = v - energy;
            if let Some(prev) = &d {
                pivot = &pivot - &(&one / prev);
            }
            if pivot.repr().is_zero() {
                pivot = -tiny.clone();
            }
            if pivot < Mp::ZERO {
                count += 1;
            }
            d = Some(pivot);
        }
        count
    }
}

/// All 2^m zeros of x_m at `bits` bits, ascending.
///
/// The j-th zero is the only zero of x_m between the (j−1)-th and j-th
/// Dirichlet eigenvalues of the period block, and x_m changes sign there,
/// so each zero is isolated by Sturm counts and then bisected on the sign of
/// x_m until the bracket is a few units in the last place wide.
pub fn gap_edges_precise(m: usize, lambda: f64, r: f64, bits: usize) -> Result<Vec<Mp>> {
    if m > MAX_LEVEL {
        return Err(Error::InvalidParameter(format!("level m = {m} exceeds the cap of {MAX_LEVEL}")));
    }
    if !(r > 0.0) || !r.is_finite() || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("need finite λ and R > 0, got λ = {lambda}, R = {r}")));
    }
    if bits < 64 {
        return Err(Error::InvalidParameter(format!("precision of {bits} bits is below 64")));
    }
    let block = DirichletBlock::new(m, lambda, r, bits);
    let n = 1usize << m;
    let half_width = 2.0 + lambda.abs() * hierarchical_level(m as u32 + 2, r);
    let x_m = |e: &Mp| mp_sign(&trace_orbit_precise(e, lambda, r, m.max(1), bits)[m]);
    let roots: Vec<Result<Mp>> = (1..=n)
        .into_par_iter()
        .map(|j| {
            // Sign of x_m just left of the j-th zero.
            let left = if (n - j + 1) % 2 == 0 { 1 } else { -1 };
            let mut lo = mp(-half_width, bits);
            let mut hi = mp(half_width, bits);
            let below = |e: &Mp| {
                let c = block.count_below(e);
                c + 1 < j || (c + 1 == j && x_m(e) == left)
            };
            let mut isolated = false;
            for _ in 0..(4 * bits) {
                let mid = (&lo + &hi) >> 1;
                if mid == lo || mid == hi {
                    break;
                }
                let s = x_m(&mid);
                if s == 0 && (isolated || block.count_below(&mid) + 1 == j) {
                    return Ok(mid);
                }
                let go_right = if isolated { s == left } else { below(&mid) };
                if go_right {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if !isolated {
                    let j1 = j - 1;
                    isolated = block.count_below(&lo) == j1
                        && block.count_below(&hi) == j1
                        && x_m(&lo) == left
                        && x_m(&hi) == -left;
                }
            }
            if m > 0 && !(x_m(&lo) == left && x_m(&hi) == -left) {
                return Err(Error::RootFindingFailure {
                    found: j - 1,
                    expected: n,
                    detail: format!("zero {j} of x_{m} (λ = {lambda}, R = {r}) lost its sign change at {bits} bits"),
                });
            }
            Ok((&lo + &hi) >> 1)
        })
        .collect();
    roots.into_iter().collect()
}

/// Gap edges of level m with x_{m+1}, …, x_{m+levels} at each, all
/// evaluated at the working precision implied by `tol`.
pub fn gap_edge_cascade(m: usize, lambda: f64, r: f64, levels: usize, tol: f64) -> Result<Vec<(f64, Vec<f64>)>> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let bits = precision_for(tol);
    let edges = gap_edges_precise(m, lambda, r, bits)?;
    Ok(edges
        .par_iter()
        .map(|e| {
            let x = trace_orbit_precise(e, lambda, r, (m + levels).max(1), bits);
            (e.to_f64().value(), x[m + 1..=m + levels].iter().map(|v| v.to_f64().value()).collect())
        })
        .collect())
}

/// x_m(E) evaluated exactly enough to trust its sign.
pub fn trace_precise_f64(energy: f64, lambda: f64, r: f64, m: usize, bits: usize) -> f64 {
    trace_orbit_precise(&mp(energy, bits), lambda, r, m.max(1), bits)[m].to_f64().value()
}

/// Asymptotic profile of the Neumann solution at gap edges:
/// 2l/(2 − R) for R < 2, l log₂ l for R = 2, and
/// (2/R)^{ε_l} R²/(2(R−1)(R−2)) l^{log₂ R} for R > 2 with ε_l = frac(log₂ l).
pub fn f_r(l: f64, r: f64) -> f64 {
    if r < 2.0 {
        2.0 / (2.0 - r) * l
    } else if r == 2.0 {
        l * l.log2()
    } else {
        let log_l = l.log2();
        let eps = log_l - log_l.floor();
        (2.0 / r).powf(eps) * r * r / (2.0 * (r - 1.0) * (r - 2.0)) * l.powf(r.log2())
    }
}

fn hierarchical_half_line(lambda: f64, r: f64, n_max: u64) -> Result<PotentialSamples> {
    let spec = PotentialSpec::half_line(Family::Hierarchical { lambda, r, v0: 0.0 });
    realize(&spec, Window::half_line(n_max as usize))
}

fn check_gap_edge(m: usize, energy: f64, lambda: f64, r: f64, n_max: u64) -> Result<()> {
    let block = 1u64 << (m + 1);
    if n_max == 0 || n_max % block != 0 {
        return Err(Error::InvalidParameter(format!("n_max = {n_max} is not a multiple of 2^(m+1) = {block}")));
    }
    if !is_gap_edge(m, energy, lambda, r) {
        let x = trace_precise_f64(energy, lambda, r, m, 256);
        return Err(Error::InvalidParameter(format!("E = {energy} is not a zero of x_{m} (x_{m} = {x:e})")));
    }
    Ok(())
}

/// Whether E is within a few units in the last place of a zero of x_m:
/// |x_m(E)| ≤ 1e-6, or x_m changes sign across E ± 4ε·max(1, |E|).
pub fn is_gap_edge(m: usize, energy: f64, lambda: f64, r: f64) -> bool {
    let bits = 1024;
    if trace_precise_f64(energy, lambda, r, m, bits).abs() <= 1e-6 {
        return true;
    }
    let step = 4.0 * f64::EPSILON * energy.abs().max(1.0);
    let (lo, hi) = (energy - step, energy + step);
    let s = |e: f64| trace_precise_f64(e, lambda, r, m, bits).signum();
    s(lo) != s(hi)
}

/// Transfer-matrix growth at a gap edge compared against f_R(2^{−m−1} n).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapEdgeNormCheck {
    pub profile: GrowthProfile,
    pub fit: PowerLawFit,
    /// sup over dyadic n (with f_R(2^{−m−1} n) > 0) of the profile over f_R.
    pub ratio_sup: f64,
    pub ratios: Vec<(u64, f64)>,
}

/// The fit window is the upper half of the dyadic range, except at R = 2
/// where the logarithmic correction is handled by fitting only the top four
/// octaves.
pub fn gap_edge_norm_check(m: usize, energy: f64, lambda: f64, r: f64, n_max: u64) -> Result<GapEdgeNormCheck> {
    check_gap_edge(m, energy, lambda, r, n_max)?;
    let v = hierarchical_half_line(lambda, r, n_max)?;
    let profile = growth_profile(&v, energy, n_max, Sampling::Dyadic, NormKind::Operator)?;
    let fit = if r == 2.0 && n_max >= 64 {
        fit_power_law_range(&profile.points, &profile.sup_values, n_max / 16, n_max)?
    } else {
        fit_power_law(&profile)?
    };
    let scale = (1u64 << (m + 1)) as f64;
    let ratios: Vec<(u64, f64)> = profile
        .points
        .iter()
        .zip(&profile.sup_values)
        .filter_map(|(&n, &value)| {
            let f = f_r(n as f64 / scale, r);
            (n as f64 >= scale && f > 0.0).then(|| (n, value / f))
        })
        .collect();
    let ratio_sup = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(GapEdgeNormCheck { profile, fit, ratio_sup, ratios })
}

/// Dirichlet and Neumann solutions at a gap edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapEdgeSolutions {
    /// ψ_D(n), n = 0..=n_max, with ψ_D(0) = 0, ψ_D(1) = 1.
    pub psi_d: Vec<f64>,
    /// ψ_N(n), n = 0..=n_max, with ψ_N(0) = 1, ψ_N(1) = 0.
    pub psi_n: Vec<f64>,
    /// max |ψ_D(k + 2^{m+1}) + ψ_D(k)|
    pub antiperiodicity_defect: f64,
    pub lambda_m: f64,
    /// (l, [ψ_N((2l+1)2^m) − ψ_N(2^m)] / [(−1)^{l+1} λ_m f_R(l)])
    pub ratios: Vec<(u64, f64)>,
}

pub fn gap_edge_solutions(m: usize, energy: f64, lambda: f64, r: f64, n_max: u64) -> Result<GapEdgeSolutions> {
    check_gap_edge(m, energy, lambda, r, n_max)?;
    let v = hierarchical_half_line(lambda, r, n_max)?;
    let psi_d = crate::transfer::solve_difference(&v, energy, 0, (0.0, 1.0), n_max as i64)?;
    let psi_n = crate::transfer::solve_difference(&v, energy, 0, (1.0, 0.0), n_max as i64)?;

    let period = 1usize << (m + 1);
    let antiperiodicity_defect = (0..psi_d.len().saturating_sub(period))
        .map(|k| (psi_d[k + period] + psi_d[k]).abs())
        .fold(0.0, f64::max);

    let lambda_m = trace_orbit(energy, lambda, r, m.max(1))?.lambda_m(m);
    let block = 1u64 << m;
    let ratios = (1..)
        .take_while(|l| (2 * l + 1) * block <= n_max)
        .filter_map(|l| {
            let f = f_r(l as f64, r);
            if f <= 0.0 {
                return None;
            }
            let sign = if l % 2 == 0 { -1.0 } else { 1.0 };
            let num = psi_n[((2 * l + 1) * block) as usize] - psi_n[block as usize];
            Some((l, num / (sign * lambda_m * f)))
        })
        .collect();
    Ok(GapEdgeSolutions { psi_d, psi_n, antiperiodicity_defect, lambda_m, ratios })
}

/// Largest |u₁(n) − u₀(2^m − n)| over 0 < n < 2^m, where u₀ and u₁ solve the
/// equation with u₀(0) = 0, u₀(2^m) = 1 and u₁(0) = 1, u₁(2^m) = 0.
pub fn boundary_symmetry_defect(m: usize, energy: f64, lambda: f64, r: f64) -> Result<f64> {
    let len = 1i64 << m;
    let v = hierarchical_half_line(lambda, r, len.max(2) as u64)?;
    let psi_d = crate::transfer::solve_difference(&v, energy, 0, (0.0, 1.0), len.max(1))?;
    let psi_n = crate::transfer::solve_difference(&v, energy, 0, (1.0, 0.0), len.max(1))?;
    let top = len as usize;
    let d_top = psi_d[top];
    if d_top.abs() < 1e-300 {
        return Err(Error::InvalidParameter(format!("ψ_D(2^{m}) vanishes at E = {energy}")));
    }
    let u0: Vec<f64> = psi_d.iter().map(|x| x / d_top).collect();
    let coef = psi_n[top] / d_top;
    let u1: Vec<f64> = psi_n.iter().zip(&psi_d).map(|(n, d)| n - coef * d).collect();
    Ok((1..top).map(|n| (u1[n] - u0[top - n]).abs()).fold(0.0, f64::max))
}

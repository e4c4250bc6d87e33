//! Invariant suites behind `qdyn1d verify`.
//!
//! Each measurement function returns raw numbers; the suites attach
//! thresholds and collect [`Check`] rows.

pub mod oracle;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cfrac::{bounded_density, cf_expand, coupling_constant, Omega, DEFAULT_DEPTH};
use crate::dynamics::{abel_amplitudes, build_operator, dynamics_report, eigen, predicted_beta_bound, BoundKind};
use crate::perturb::{make_perturbation, prufer_trace, stability_check, PerturbationSpec};
use crate::potentials::{
    realize, subst_fixed_point, Family, Geometry, PotentialSamples, PotentialSpec, SubstitutionRule, Symbol, Window,
};
use crate::tracemap::{
    boundary_symmetry_defect, gap_edge_energies, gap_edge_norm_check, gap_edge_solutions, gap_edges_precise, mp,
    trace_orbit, trace_orbit_precise, Mp,
};
use crate::transfer::{fit_power_law, growth_profile, monodromy_energies, transfer_product, transfer_product_scaled, Mat2, NormKind, Sampling};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Identities,
    Oracles,
    Bounds,
}

impl Suite {
    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Identities => "identities",
            Suite::Oracles => "oracles",
            Suite::Bounds => "bounds",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identities" => Ok(Suite::Identities),
            "oracles" => Ok(Suite::Oracles),
            "bounds" => Ok(Suite::Bounds),
            _ => Err(Error::InvalidParameter(format!("unknown suite `{s}`"))),
        }
    }
}

/// How a measured value is compared with its threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Below,
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "==")]
    Equal,
}

impl Relation {
    pub fn holds(self, measured: f64, threshold: f64) -> bool {
        match self {
            Relation::Below => measured < threshold,
            Relation::AtMost => measured <= threshold,
            Relation::AtLeast => measured >= threshold,
            Relation::Equal => measured == threshold,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Below => "<",
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
            Relation::Equal => "==",
        }
    }
}

/// One row of a verification table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, measured: f64, relation: Relation, threshold: f64) -> Self {
        let passed = relation.holds(measured, threshold);
        Self { name: name.into(), measured, relation, threshold, passed }
    }

    /// A check whose measurement failed with an error.
    pub fn failed(name: impl Into<String>, relation: Relation, threshold: f64) -> Self {
        Self { name: name.into(), measured: f64::NAN, relation, threshold, passed: false }
    }

    fn from_result(name: &str, measured: Result<f64>, relation: Relation, threshold: f64) -> Self {
        match measured {
            Ok(m) => Check::new(name, m, relation, threshold),
            Err(_) => Check::failed(name, relation, threshold),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {:.6e} {} {:e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.relation.symbol(),
            self.threshold
        )
    }
}

/// Worst errors over random cocycle cases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CocycleErrors {
    pub cases: usize,
    /// max |det T(n, m) − 1|
    pub det: f64,
    /// max ‖T(n, m) − T(n, k)T(k, m)‖ / (‖T(n, k)‖ ‖T(k, m)‖), entrywise max
    pub composition: f64,
    pub max_norm: f64,
}

/// Random cases on a window [−100, 10⁴]: V i.i.d. uniform on [−w, w] with
/// w ≤ 0.1, E uniform on [−1, 1], and sites n, k, m uniform in the window.
/// The weak disorder keeps ‖T‖ moderate so that det is resolvable in f64.
pub fn cocycle_errors(cases: usize, seed: u64) -> Result<CocycleErrors> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let window = Window::new(-100, 10_000)?;
    let mut out = CocycleErrors { cases, det: 0.0, composition: 0.0, max_norm: 0.0 };
    for _ in 0..cases {
        let w = rng.random_range(0.0..0.1);
        let values = (0..window.len()).map(|_| rng.random_range(-w..=w)).collect();
        let v = PotentialSamples::new(window.start, values)?;
        let energy = rng.random_range(-1.0..1.0);
        let mut site = || rng.random_range(window.start..=window.end);
        let (n, k, m) = (site(), site(), site());
        let t = transfer_product(&v, n, m, energy)?;
        let a = transfer_product(&v, n, k, energy)?;
        let b = transfer_product(&v, k, m, energy)?;
        out.det = out.det.max((t.det() - 1.0).abs());
        out.composition = out.composition.max(t.max_abs_diff(&(a * b)) / (a.op_norm() * b.op_norm()));
        out.max_norm = out.max_norm.max(t.op_norm());
    }
    Ok(out)
}

/// Entrywise errors of T(a; a)² = −I, T(b; b+1)³ = −I and
/// T(a; a)T(b; a) = ((−1, 0), (a − b, −1)) over random a, b.
pub fn exact_identity_errors(cases: usize, seed: u64) -> [f64; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let minus_identity = Mat2::IDENTITY.scale(-1.0);
    let mut worst = [0.0f64; 3];
    for _ in 0..cases {
        let a: f64 = rng.random_range(-4.0..4.0);
        let b: f64 = rng.random_range(-4.0..4.0);
        let sq = Mat2::step(a, a).pow(2);
        let cube = Mat2::step(b, b + 1.0).pow(3);
        let shear = Mat2::step(a, a) * Mat2::step(b, a);
        worst[0] = worst[0].max(sq.max_abs_diff(&minus_identity));
        worst[1] = worst[1].max(cube.max_abs_diff(&minus_identity));
        worst[2] = worst[2].max(shear.max_abs_diff(&Mat2::new(-1.0, 0.0, a - b, -1.0)));
    }
    worst
}

/// (number found, max |E_j − (b + 2cos(jπ/k))|)
pub fn monodromy_error(b: f64, k: usize) -> Result<(usize, f64)> {
    let found = monodromy_energies(b, k, 1e-12)?;
    let mut exact: Vec<f64> = (1..k).map(|j| b + 2.0 * (j as f64 * PI / k as f64).cos()).collect();
    exact.sort_by(f64::total_cmp);
    let err = if found.len() == exact.len() {
        found.iter().zip(&exact).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    Ok((found.len(), err))
}

/// Zeros of x_m with the cascade x_{m+1} = −2, x_{m+l} = 2 (l = 2..5).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeErrors {
    pub m: usize,
    pub zeros: usize,
    pub expected: usize,
    /// max |x_{m+1} + 2|
    pub first: f64,
    /// max |x_{m+l} − 2| over l = 2..5
    pub rest: f64,
}

/// Zeros are located and the orbit continued in `bits`-bit arithmetic;
/// near clustered zeros x_{m+l} is too ill-conditioned for f64.
pub fn cascade_errors(m: usize, lambda: f64, r: f64, bits: usize) -> Result<CascadeErrors> {
    let edges = gap_edges_precise(m, lambda, r, bits)?;
    let mut out = CascadeErrors { m, zeros: edges.len(), expected: 1 << m, first: 0.0, rest: 0.0 };
    let two = mp(2.0, bits);
    for e in &edges {
        let x = trace_orbit_precise(e, lambda, r, m + 5, bits);
        out.first = out.first.max((&x[m + 1] + &two).to_f64().value().abs());
        for l in 2..=5 {
            out.rest = out.rest.max((&x[m + l] - &two).to_f64().value().abs());
        }
    }
    Ok(out)
}

/// max over m ≤ m_max of |ψ_D(2^m) − x_{m−1}⋯x₀| / max(1, |ψ_D(2^m)|).
pub fn dirichlet_product_error(energy: f64, lambda: f64, r: f64, m_max: usize) -> Result<f64> {
    let n_max = 1u64 << m_max;
    let spec = PotentialSpec::half_line(Family::Hierarchical { lambda, r, v0: 0.0 });
    let v = realize(&spec, Window::half_line(n_max as usize))?;
    let psi = crate::transfer::solve_difference(&v, energy, 0, (0.0, 1.0), n_max as i64)?;
    let orbit = trace_orbit(energy, lambda, r, m_max.max(1))?;
    let mut worst: f64 = 0.0;
    for m in 1..=m_max.min(orbit.traces.len()) {
        let product: f64 = orbit.traces[..m].iter().product();
        let exact = psi[1 << m];
        worst = worst.max((exact - product).abs() / exact.abs().max(1.0));
    }
    Ok(worst)
}

/// Largest boundary-symmetry defect over all gap edges of level m.
pub fn symmetry_defect(m: usize, lambda: f64, r: f64) -> Result<f64> {
    let edges = gap_edge_energies(m, lambda, r, 1e-15)?;
    edges
        .energies
        .iter()
        .map(|&e| boundary_symmetry_defect(m, e, lambda, r))
        .try_fold(0.0f64, |acc, d| Ok(acc.max(d?)))
}

/// Worst |x_m − tr T(2^m, 0)| / max(1, |tr T(2^m, 0)|) over random
/// E ∈ [−3, 3], λ ∈ [0.5, 2], R ∈ {0.5, 1, 2, 3} and m ≤ m_max, with the
/// recurrence run in 256-bit arithmetic and the product in scaled f64.
pub fn trace_map_error(draws: usize, m_max: usize, seed: u64) -> Result<(f64, usize)> {
    const BITS: usize = 256;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    let one = mp(1.0, BITS);
    for _ in 0..draws {
        let energy = rng.random_range(-3.0..3.0);
        let lambda = rng.random_range(0.5..2.0);
        let r = [0.5, 1.0, 2.0, 3.0][rng.random_range(0..4)];
        let spec = PotentialSpec::half_line(Family::Hierarchical { lambda, r, v0: 0.0 });
        let v = realize(&spec, Window::half_line(1 << m_max))?;
        let orbit = trace_orbit_precise(&mp(energy, BITS), lambda, r, m_max.max(1), BITS);
        for (m, x) in orbit.iter().enumerate().take(m_max + 1) {
            let (product, shift) = transfer_product_scaled(&v, 1 << m, 0, energy)?;
            let t = mp(product.trace(), BITS) << shift as isize;
            let scale = if t.repr().is_zero() || (t < one && t > -one.clone()) { one.clone() } else if t < Mp::ZERO { -t.clone() } else { t.clone() };
            let diff = x - &t;
            let rel = (&diff / &scale).to_f64().value().abs();
            worst = worst.max(rel);
            compared += 1;
        }
    }
    Ok((worst, compared))
}

fn random_lattice(sites: usize, seed: u64) -> Result<crate::dynamics::LatticeOperator> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..sites).map(|_| rng.random_range(-1.0..1.0)).collect();
    build_operator(&PotentialSamples::new(1, values)?, Geometry::HalfLine)
}

/// max_n |a(n, T) − time-quadrature oracle| on a random half-line lattice.
pub fn time_quadrature_error(sites: usize, t: f64, seed: u64) -> Result<f64> {
    let op = random_lattice(sites, seed)?;
    let a = abel_amplitudes(&eigen(&op)?, t)?;
    let oracle = oracle::abel_by_time_quadrature(&op, t, 0.25);
    Ok(a.iter().zip(&oracle).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

/// max_n |a(n, T) − Parseval energy-route oracle| on a random lattice.
pub fn parseval_error(sites: usize, t: f64, seed: u64) -> Result<f64> {
    let op = random_lattice(sites, seed)?;
    let a = abel_amplitudes(&eigen(&op)?, t)?;
    let oracle = oracle::abel_by_parseval(&op, t, 4000);
    Ok(a.iter().zip(&oracle).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

/// max_n |a(n, T) − explicit double sum| on a random lattice.
pub fn double_sum_error(sites: usize, t: f64, seed: u64) -> Result<f64> {
    let eig = eigen(&random_lattice(sites, seed)?)?;
    let a = abel_amplitudes(&eig, t)?;
    let oracle = oracle::abel_double_sum(&eig, t);
    Ok(a.iter().zip(&oracle).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

/// |∫ Im F(E + iε) dE / π − 1| on a random lattice.
pub fn borel_mass_error(sites: usize, eps: f64, seed: u64) -> Result<f64> {
    let eig = eigen(&random_lattice(sites, seed)?)?;
    Ok((oracle::borel_mass(&eig, eps, 4000) / PI - 1.0).abs())
}

/// Sites in [1, len] where the golden-mean Sturmian word (λ = 1, θ = 0)
/// differs from the Fibonacci word with a ↦ 1, b ↦ 0.
pub fn sturmian_fibonacci_mismatches(len: usize) -> Result<usize> {
    let spec = PotentialSpec::half_line(Family::Sturmian { lambda: 1.0, omega: Omega::GoldenMean, theta: 0.0 });
    let v = realize(&spec, Window::half_line(len))?;
    let word = subst_fixed_point(&SubstitutionRule::fibonacci(), Symbol::A, len)?;
    Ok(v.values
        .iter()
        .zip(&word)
        .filter(|(x, s)| **x != if **s == Symbol::A { 1.0 } else { 0.0 })
        .count())
}

/// Fitted growth exponent of max_{m ≤ n}‖T(n, m; E)‖ on [1, n_max].
pub fn growth_exponent(spec: &PotentialSpec, energy: f64, n_max: u64) -> Result<crate::transfer::PowerLawFit> {
    let v = realize(spec, Window::half_line(n_max as usize))?;
    fit_power_law(&growth_profile(&v, energy, n_max, Sampling::Dyadic, NormKind::Operator)?)
}

pub fn geometric_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64)).collect()
}

/// β̂(p) for half-line samples over a T grid.
pub fn transport_slopes(v: &PotentialSamples, ts: &[f64], ps: &[f64]) -> Result<Vec<Result<f64>>> {
    let eig = eigen(&build_operator(v, Geometry::HalfLine)?)?;
    let report = dynamics_report(&eig, ts, ps, 0.0)?;
    Ok(report.fits.into_iter().map(|f| f.map(|f| f.beta)).collect())
}

pub fn run(suite: Suite) -> Result<Vec<Check>> {
    match suite {
        Suite::Identities => identities(),
        Suite::Oracles => oracles(),
        Suite::Bounds => bounds(),
    }
}

fn identities() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let c = cocycle_errors(200, 1)?;
    checks.push(Check::new("|det T - 1|", c.det, Relation::Below, 1e-9));
    checks.push(Check::new("cocycle composition", c.composition, Relation::Below, 1e-8));
    let [sq, cube, shear] = exact_identity_errors(1000, 2);
    checks.push(Check::new("T(a;a)^2 = -I", sq, Relation::Below, 1e-12));
    checks.push(Check::new("T(b;b+1)^3 = -I", cube, Relation::Below, 1e-12));
    checks.push(Check::new("T(a;a)T(b;a) shear", shear, Relation::Equal, 0.0));
    for k in [3, 5, 7] {
        let res = monodromy_error(0.5, k);
        checks.push(Check::from_result(
            &format!("monodromy k={k} count"),
            res.as_ref().map(|r| r.0 as f64).map_err(Clone::clone),
            Relation::Equal,
            (k - 1) as f64,
        ));
        checks.push(Check::from_result(&format!("monodromy k={k} energies"), res.map(|r| r.1), Relation::Below, 1e-8));
    }
    for m in 0..=6 {
        let res = cascade_errors(m, 1.0, 1.0, 1024);
        checks.push(Check::from_result(
            &format!("cascade m={m} |x_(m+1)+2|"),
            res.as_ref().map(|c| if c.zeros == c.expected { c.first } else { f64::INFINITY }).map_err(Clone::clone),
            Relation::Below,
            1e-6,
        ));
        checks.push(Check::from_result(&format!("cascade m={m} |x_(m+l)-2|"), res.map(|c| c.rest), Relation::Below, 1e-6));
    }
    checks.push(Check::from_result(
        "psi_D(2^m) = x_(m-1)...x_0",
        dirichlet_product_error(0.37, 1.0, 1.5, 10),
        Relation::Below,
        1e-8,
    ));
    checks.push(Check::from_result("boundary symmetry m=3", symmetry_defect(3, 1.0, 2.0), Relation::Below, 1e-8));
    Ok(checks)
}

fn oracles() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let (err, _) = trace_map_error(100, 12, 3)?;
    checks.push(Check::new("trace map vs product", err, Relation::Below, 1e-6));
    checks.push(Check::from_result("a(n,T) vs double sum", double_sum_error(40, 7.0, 4), Relation::Below, 1e-12));
    checks.push(Check::from_result("a(n,T) vs time quadrature", time_quadrature_error(50, 5.0, 5), Relation::Below, 1e-6));
    checks.push(Check::from_result("a(n,T) vs Parseval route", parseval_error(30, 5.0, 6), Relation::Below, 1e-4));
    checks.push(Check::from_result("Borel transform mass", borel_mass_error(30, 0.1, 7), Relation::Below, 1e-2));
    let columns = gap_edge_solutions(0, 0.0, 1.0, 3.0, 256).map(|s| {
        (0..128)
            .map(|l| {
                let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
                (s.psi_d[2 * l]).abs() + (s.psi_d[2 * l + 1] - sign).abs() + (s.psi_n[2 * l] - sign).abs()
            })
            .fold(0.0, f64::max)
    });
    checks.push(Check::from_result("band-center solution columns", columns, Relation::Equal, 0.0));
    checks.push(Check::from_result(
        "Sturmian vs Fibonacci word mismatches",
        sturmian_fibonacci_mismatches(10_000).map(|n| n as f64),
        Relation::Equal,
        0.0,
    ));
    let golden = cf_expand(&Omega::GoldenMean, DEFAULT_DEPTH)?;
    let ones = golden.quotients.iter().filter(|&&q| q != 1).count();
    checks.push(Check::new("golden mean quotients != 1", ones as f64, Relation::Equal, 0.0));
    checks.push(Check::new("golden mean density", bounded_density(&golden)?.d_hat, Relation::Equal, 1.0));
    checks.push(Check::new("C_1", coupling_constant(1.0), Relation::Equal, 5.0));
    Ok(checks)
}

fn bounds() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let pd = PotentialSpec::period_doubling(0.0, 1.0);
    let n_max = 1 << 14;
    checks.push(Check::from_result("period doubling alpha", growth_exponent(&pd, 0.0, n_max).map(|f| f.alpha), Relation::AtMost, 1.1));
    let s3 = PotentialSpec::half_line(Family::Substitution {
        rule: SubstitutionRule::even_a_blocks(2, 1)?,
        seed: Symbol::A,
        a: 0.0,
        b: 1.0,
    });
    checks.push(Check::from_result("S3 family alpha", growth_exponent(&s3, 0.0, n_max).map(|f| f.alpha), Relation::Below, 0.05));
    let sparse = PotentialSpec::half_line(Family::Sparse { a: 0.0, b: 1.0, gamma: 2 });
    let nu = 2.0 * 3f64.sqrt().ln() / 2f64.ln();
    checks.push(Check::from_result("sparse alpha", growth_exponent(&sparse, 0.0, n_max).map(|f| f.alpha), Relation::AtMost, nu + 0.1));
    for r in [1.5f64, 4.0] {
        let target = r.log2().max(1.0);
        let fit = gap_edge_norm_check(0, 0.0, 1.0, r, n_max).map(|c| (c.fit.alpha - target).abs());
        checks.push(Check::from_result(&format!("hierarchical R={r} |alpha - alpha_R|"), fit, Relation::AtMost, 0.15));
    }

    let free = PotentialSamples::constant(Window::half_line(1000), 0.0);
    let ts = geometric_grid(10.0, 60.0, 7);
    let slopes = transport_slopes(&free, &ts, &[2.0])?;
    let bound = predicted_beta_bound(BoundKind::PowerLaw, 2.0, 0.0)?;
    checks.push(Check::from_result("free beta(2) vs power-law bound", slopes[0].clone(), Relation::AtLeast, bound - 0.2));

    let ts = geometric_grid(10.0, 40.0, 6);
    let ps = [6.0, 8.0];
    let slopes = transport_slopes(&realize(&pd, Window::half_line(1000))?, &ts, &ps)?;
    for (p, s) in ps.iter().zip(slopes) {
        let bound = predicted_beta_bound(BoundKind::PeriodDoubling, *p, 1.0)?;
        checks.push(Check::from_result(&format!("period doubling beta({p}) vs bound"), s, Relation::AtLeast, bound - 0.3));
    }

    let mut w = PerturbationSpec::new(1.0, 4.0);
    w.offset = 0.0;
    let window = Window::half_line(1 << 12);
    let v = realize(&pd, window)?;
    let wv = make_perturbation(&w, window)?;
    let trace = prufer_trace(&v, &wv, 0.0, 1 << 12)?;
    checks.push(Check::new("Prufer residual", trace.max_residual(), Relation::Below, 1e-10));
    checks.push(Check::new("max R(n)/R(1)", trace.max_growth(), Relation::Below, 10.0));
    checks.push(Check::from_result("perturbed delta alpha", stability_check(&v, &wv, 0.0, 1 << 12).map(|s| s.delta), Relation::Below, 0.2));
    Ok(checks)
}

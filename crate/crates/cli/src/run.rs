//! One function per experiment: typed parameters in, tables and
//! diagnostics out.

use serde_json::{json, Value};

use qdyn1d_core::cfrac::{bounded_density, cf_expand, convergents, sturmian_alpha};
use qdyn1d_core::dynamics::{bound_scaling_harness, build_operator, dynamics_report, eigen, predicted_beta_bound};
use qdyn1d_core::perturb::{make_perturbation, prufer_trace, stability_check};
use qdyn1d_core::potentials::{check_structure, realize, special_energies, symbols, Family};
use qdyn1d_core::tracemap::{gap_edge_cascade, gap_edge_norm_check, trace_orbit};
use qdyn1d_core::transfer::energy_scan;
use qdyn1d_core::{Error, Geometry, PotentialSpec, Window};

use crate::config::{
    ConfigError, DynamicsParams, PerturbParams, StructureParams, SturmianParams, TracemapParams, TransferScanParams,
};
use crate::output::{num, opt, Table};

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Module(Error),
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Module(e)
    }
}

pub struct Outcome {
    pub tables: Vec<Table>,
    pub diagnostics: Value,
}

fn bool_cell(b: bool) -> String {
    b.to_string()
}

pub fn transfer_scan(p: &TransferScanParams) -> Result<Outcome, RunError> {
    let grid = p.energies.points("params.energies")?;
    if p.n_max < 2 {
        return Err(ConfigError::new("params.n_max", "must be at least 2").into());
    }
    let v = realize(&p.potential, Window::half_line(p.n_max as usize))?;
    let rows = energy_scan(&v, &grid, p.n_max, p.norm);
    let mut scan = Table::new("scan.csv", &["E", "alpha_hat", "C_hat", "residual", "n_max", "norm_kind", "used", "error"]);
    let n_max = p.n_max.to_string();
    let norm = p.norm.as_str().to_string();
    let mut failures = 0;
    for row in &rows {
        let mut cells = vec![num(row.energy)];
        match &row.fit {
            Ok(f) => {
                cells.extend([num(f.alpha), num(f.c), num(f.residual), n_max.clone(), norm.clone(), f.used.to_string(), String::new()]);
            }
            Err(e) => {
                failures += 1;
                cells.extend([String::new(), String::new(), String::new(), n_max.clone(), norm.clone(), String::new(), e.to_string()]);
            }
        }
        scan.push(cells);
    }
    let mut tables = vec![scan];
    let mut special_note = Value::Null;
    if p.special {
        let mut t = Table::new("special_energies.csv", &["energy", "growth", "condition", "swapped", "alpha", "c"]);
        match special_energies(&p.potential) {
            Ok(list) => {
                let grid: Vec<f64> = list.iter().map(|s| s.energy).collect();
                let fits = energy_scan(&v, &grid, p.n_max, p.norm);
                for (s, fit) in list.iter().zip(fits) {
                    let (alpha, c) = fit.fit.map(|f| (num(f.alpha), num(f.c))).unwrap_or_default();
                    t.push(vec![
                        num(s.energy),
                        format!("{:?}", s.growth).to_lowercase(),
                        s.condition.to_string(),
                        bool_cell(s.swapped),
                        alpha,
                        c,
                    ]);
                }
            }
            Err(e) => special_note = json!(e.to_string()),
        }
        tables.push(t);
    }
    Ok(Outcome { tables, diagnostics: json!({ "failed_fits": failures, "special_energies": special_note }) })
}

pub fn tracemap(p: &TracemapParams) -> Result<Outcome, RunError> {
    if p.cascade == 0 {
        return Err(ConfigError::new("params.cascade", "must be at least 1").into());
    }
    let edges = gap_edge_cascade(p.m, p.lambda, p.r, p.cascade, p.tol)?;
    let mut header = vec!["m".to_string(), "k".into(), "energy".into()];
    header.extend((1..=p.cascade).map(|l| format!("x_m+{l}")));
    let mut table = Table::with_header("gap_edges.csv", header);
    let mut worst_first: f64 = 0.0;
    let mut worst_rest: f64 = 0.0;
    for (k, (e, xs)) in edges.iter().enumerate() {
        worst_first = worst_first.max((xs[0] + 2.0).abs());
        worst_rest = xs[1..].iter().fold(worst_rest, |acc, x| acc.max((x - 2.0).abs()));
        let mut row = vec![p.m.to_string(), (k + 1).to_string(), num(*e)];
        row.extend(xs.iter().map(|&x| num(x)));
        table.push(row);
    }
    let mut tables = vec![table];
    if let Some(n_max) = p.norm_check_n_max {
        let mut t = Table::new("gap_edge_growth.csv", &["k", "energy", "alpha", "c", "ratio_sup", "error"]);
        for (k, (e, _)) in edges.iter().enumerate() {
            let mut row = vec![(k + 1).to_string(), num(*e)];
            match gap_edge_norm_check(p.m, *e, p.lambda, p.r, n_max) {
                Ok(c) => row.extend([num(c.fit.alpha), num(c.fit.c), num(c.ratio_sup), String::new()]),
                Err(err @ Error::InvalidParameter(_)) if n_max % (1u64 << (p.m + 1)) == 0 => {
                    row.extend([String::new(), String::new(), String::new(), err.to_string()])
                }
                Err(err) => return Err(err.into()),
            }
            t.push(row);
        }
        tables.push(t);
    }
    if let Some(orbit) = &p.orbit {
        let mut t = Table::new("orbits.csv", &["energy", "m", "x", "saturated"]);
        for e in orbit.energies.points("params.orbit.energies")? {
            let o = trace_orbit(e, p.lambda, p.r, orbit.m_max)?;
            for (m, x) in o.traces.iter().enumerate() {
                t.push(vec![num(e), m.to_string(), num(*x), bool_cell(o.saturated)]);
            }
        }
        tables.push(t);
    }
    Ok(Outcome {
        tables,
        diagnostics: json!({
            "zeros": edges.len(),
            "expected": 1usize << p.m,
            "max_abs_x_m1_plus_2": worst_first,
            "max_abs_x_ml_minus_2": worst_rest,
        }),
    })
}

fn lattice_window(spec: &PotentialSpec, sites: usize) -> Window {
    match spec.geometry {
        Geometry::HalfLine => Window::half_line(sites),
        Geometry::WholeLine => Window::whole_line(sites),
    }
}

pub fn dynamics(p: &DynamicsParams) -> Result<Outcome, RunError> {
    let ts = p.times.points("params.times")?;
    if ts.iter().any(|&t| !(t > 0.0)) {
        return Err(ConfigError::new("params.times", "all T must be positive").into());
    }
    if p.ps.is_empty() || p.ps.iter().any(|&x| !(x > 0.0)) {
        return Err(ConfigError::new("params.ps", "need at least one p > 0").into());
    }
    if p.sites < 1 {
        return Err(ConfigError::new("params.sites", "must be at least 1").into());
    }
    let v = realize(&p.potential, lattice_window(&p.potential, p.sites))?;
    let op = build_operator(&v, p.potential.geometry)?;
    let eig = eigen(&op)?;
    let report = dynamics_report(&eig, &ts, &p.ps, p.alpha)?;

    let mut header: Vec<String> = ["t", "total", "min_amplitude", "boundary_mass", "guard_ok"].map(String::from).to_vec();
    header.extend(p.ps.iter().map(|x| format!("moment_p{}", num(*x))));
    header.push("outside_probability".into());
    let mut rows = Table::with_header("dynamics.csv", header);
    for r in &report.rows {
        let mut row = vec![num(r.t), num(r.total), num(r.min_amplitude), num(r.boundary_mass), bool_cell(r.guard_ok)];
        row.extend(r.moments.iter().map(|&m| num(m)));
        row.push(opt(r.outside_probability));
        rows.push(row);
    }

    let mut fits = Table::new(
        "fits.csv",
        &["p", "beta", "beta_running_min", "used", "excluded", "flagged", "predicted_bound", "error"],
    );
    for (&pp, fit) in p.ps.iter().zip(&report.fits) {
        let bound = match p.bound {
            Some(kind) => opt(predicted_beta_bound(kind, pp, p.alpha).ok()),
            None => String::new(),
        };
        match fit {
            Ok(f) => fits.push(vec![
                num(pp),
                num(f.beta),
                num(f.beta_running_min),
                f.used.to_string(),
                f.excluded.len().to_string(),
                bool_cell(f.flagged()),
                bound,
                String::new(),
            ]),
            Err(e) => fits.push(vec![
                num(pp),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                bound,
                e.to_string(),
            ]),
        }
    }
    let mut tables = vec![rows, fits];
    let mut harness_note = Value::Null;
    if let Some(h) = &p.harness {
        let hr = bound_scaling_harness(&eig, h.energy, h.alpha, h.p, &ts)?;
        let mut t = Table::new("harness.csv", &["t", "moment", "mu_hat", "rhs", "ratio", "boundary_mass", "guard_ok"]);
        for r in &hr.rows {
            t.push(vec![num(r.t), num(r.moment), num(r.mu_hat), num(r.rhs), num(r.ratio), num(r.boundary_mass), bool_cell(r.guard_ok)]);
        }
        tables.push(t);
        harness_note = json!({ "ratio_min": hr.ratio_min, "ratio_max": hr.ratio_max, "spread": hr.spread() });
    }
    if p.amplitudes {
        let mut t = Table::new("amplitudes.csv", &["t", "site", "a"]);
        for (&tt, a) in report.ts.iter().zip(&report.amplitudes) {
            for (&site, &x) in report.sites.iter().zip(a) {
                t.push(vec![num(tt), site.to_string(), num(x)]);
            }
        }
        tables.push(t);
    }
    let guard_failures = report.rows.iter().filter(|r| !r.guard_ok).count();
    let max_total_defect = report.rows.iter().map(|r| (r.total - 0.5).abs()).fold(0.0, f64::max);
    Ok(Outcome {
        tables,
        diagnostics: json!({
            "lattice_size": eig.size(),
            "eigen_max_residual": eig.max_residual,
            "spectral_mass": eig.spectral_mass(),
            "guard_failures": guard_failures,
            "max_abs_total_minus_half": max_total_defect,
            "harness": harness_note,
        }),
    })
}

pub fn perturb(p: &PerturbParams) -> Result<Outcome, RunError> {
    if p.n_max < 2 {
        return Err(ConfigError::new("params.n_max", "must be at least 2").into());
    }
    let window = Window::half_line(p.n_max as usize + 1);
    let v = realize(&p.potential, window)?;
    let w = make_perturbation(&p.perturbation, window)?;
    let trace = prufer_trace(&v, &w, p.energy, p.n_max)?;
    let stability = stability_check(&v, &w, p.energy, p.n_max)?;

    let mut summary = Table::new(
        "stability.csv",
        &[
            "energy",
            "alpha_unperturbed",
            "alpha_perturbed",
            "delta_alpha",
            "max_residual",
            "max_growth",
            "growth_bound",
            "omega",
        ],
    );
    summary.push(vec![
        num(p.energy),
        num(stability.unperturbed.alpha),
        num(stability.perturbed.alpha),
        num(stability.delta),
        num(trace.max_residual()),
        num(trace.max_growth()),
        num(trace.growth_bound()),
        num(trace.omega),
    ]);
    let mut tables = vec![summary];
    if p.series {
        let mut t = Table::new(
            "prufer.csv",
            &["n", "u", "r_dirichlet", "theta_dirichlet", "residual_dirichlet", "r_neumann", "theta_neumann", "residual_neumann"],
        );
        let (d, nm) = (&trace.dirichlet, &trace.neumann);
        for i in 0..trace.u.len() {
            let res = |s: &[f64]| s.get(i).map(|&x| num(x)).unwrap_or_default();
            t.push(vec![
                (i + 1).to_string(),
                num(trace.u[i]),
                num(d.r[i]),
                num(d.theta[i]),
                res(&d.residual),
                num(nm.r[i]),
                num(nm.theta[i]),
                res(&nm.residual),
            ]);
        }
        tables.push(t);
    }
    Ok(Outcome {
        tables,
        diagnostics: json!({
            "reconstruction_error": trace.dirichlet.reconstruction_error.max(trace.neumann.reconstruction_error),
        }),
    })
}

pub fn sturmian(p: &SturmianParams) -> Result<Outcome, RunError> {
    let exp = cf_expand(&p.omega, p.depth)?;
    let density = bounded_density(&exp)?;
    let alpha = sturmian_alpha(p.lambda, &exp, p.d_constant)?;
    let mut cf = Table::new("cfrac.csv", &["k", "a_k", "p_k", "q_k", "running_mean"]);
    for (k, ((a, (pk, qk)), mean)) in exp.quotients.iter().zip(convergents(&exp)).zip(&density.running).enumerate() {
        cf.push(vec![(k + 1).to_string(), a.to_string(), pk.to_string(), qk.to_string(), num(*mean)]);
    }
    let mut summary = Table::new("sturmian.csv", &["lambda", "d_hat", "c_lambda", "d_constant", "alpha", "exact", "truncated"]);
    summary.push(vec![
        num(p.lambda),
        num(alpha.d_hat),
        num(alpha.c_lambda),
        num(alpha.d_constant),
        num(alpha.alpha),
        bool_cell(exp.exact),
        bool_cell(exp.truncated),
    ]);
    let mut tables = vec![cf, summary];
    if p.word_length > 0 {
        let spec = PotentialSpec::half_line(Family::Sturmian { lambda: p.lambda, omega: p.omega.clone(), theta: p.theta });
        let v = realize(&spec, Window::half_line(p.word_length))?;
        let mut t = Table::new("potential.csv", &["n", "v"]);
        for (n, x) in v.iter() {
            t.push(vec![n.to_string(), num(x)]);
        }
        tables.push(t);
    }
    Ok(Outcome { tables, diagnostics: json!({ "depth": exp.depth() }) })
}

pub fn structure_check(p: &StructureParams) -> Result<Outcome, RunError> {
    if p.from_index < 1 {
        return Err(ConfigError::new("params.from_index", "sites are 1-based").into());
    }
    let word = symbols(&p.potential, Window::half_line(p.length))?
        .ok_or_else(|| ConfigError::new("params.potential", "structure checks need a two-valued family"))?;
    let mut t = Table::new("structure.csv", &["condition", "holds", "first_violation"]);
    for &c in &p.conditions {
        let r = check_structure(&word, c, p.from_index)?;
        t.push(vec![c.to_string(), bool_cell(r.holds), r.first_violation.map(|i| i.to_string()).unwrap_or_default()]);
    }
    let mut s = Table::new("special_energies.csv", &["energy", "growth", "condition", "swapped"]);
    let note = match special_energies(&p.potential) {
        Ok(list) => {
            for e in &list {
                s.push(vec![num(e.energy), format!("{:?}", e.growth).to_lowercase(), e.condition.to_string(), bool_cell(e.swapped)]);
            }
            Value::Null
        }
        Err(e) => json!(e.to_string()),
    };
    Ok(Outcome { tables: vec![t, s], diagnostics: json!({ "special_energies": note }) })
}

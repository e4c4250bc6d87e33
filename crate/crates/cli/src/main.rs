//! `qdyn1d`: config-driven experiments on discrete Schrödinger operators.
//!
//! Every experiment reads an optional JSON config, applies flag overrides
//! to it, writes deterministic CSV tables plus `manifest.json` into the
//! output directory, and reports failures as one line of JSON on stderr.
//!
//! Exit codes: 0 success, 1 module error or failed check, 2 config error.

mod config;
mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use qdyn1d_core::verify::{self, Suite};
use qdyn1d_core::Error;

use config::{ConfigError, ExperimentKind};
use output::{num, Manifest, Table};
use run::{Outcome, RunError};

/// Environment variable capping the number of worker threads.
const THREADS_ENV: &str = "QDYN1D_THREADS";

#[derive(Parser)]
#[command(name = "qdyn1d", version, about = "Transfer matrices, trace maps and quantum transport on 1D lattices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Growth exponent of ‖T(n, 0; E)‖ over an energy grid.
    TransferScan {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flags: ScanFlags,
    },
    /// Gap edges of the hierarchical trace map and their cascades.
    Tracemap {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flags: TracemapFlags,
    },
    /// Abel-averaged moments and transport exponents on a finite lattice.
    Dynamics {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flags: DynamicsFlags,
    },
    /// Prüfer amplitudes and exponent stability under a decaying perturbation.
    Perturb {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flags: PerturbFlags,
    },
    /// Continued fraction, bounded density and exponent of a Sturmian potential.
    Sturmian {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flags: SturmianFlags,
    },
    /// Block conditions and special energies of a two-valued potential.
    StructureCheck {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flags: StructureFlags,
    },
    /// Runs an invariant suite and prints a pass/fail table.
    Verify {
        /// identities, oracles or bounds
        suite: String,
        /// Also write verify_<suite>.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON config file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output directory (config key output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Override any config key, e.g. --set params.n_max=8192. Values are read
    /// as JSON, or as strings when that fails.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    assignments: Vec<String>,
}

#[derive(Args)]
struct ScanFlags {
    #[arg(long)]
    n_max: Option<u64>,
    /// Comma-separated energies.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    energies: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    e_lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    e_hi: Option<f64>,
    #[arg(long)]
    e_count: Option<usize>,
    /// operator or hilbert_schmidt
    #[arg(long)]
    norm: Option<String>,
    #[arg(long)]
    special: bool,
}

#[derive(Args)]
struct TracemapFlags {
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<f64>,
    #[arg(long = "R", visible_alias = "r")]
    r: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    cascade: Option<usize>,
    #[arg(long)]
    norm_check_n_max: Option<u64>,
    /// Also write orbits up to this level at --orbit-energies.
    #[arg(long)]
    m_max: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    orbit_energies: Option<Vec<f64>>,
}

#[derive(Args)]
struct DynamicsFlags {
    /// L
    #[arg(long, visible_alias = "L")]
    sites: Option<usize>,
    #[arg(long)]
    t_lo: Option<f64>,
    #[arg(long)]
    t_hi: Option<f64>,
    #[arg(long)]
    t_count: Option<usize>,
    /// Comma-separated moment orders.
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<f64>>,
    #[arg(long)]
    alpha: Option<f64>,
    /// power-law, eigenvalue, perturbed, period-doubling or bounded
    #[arg(long)]
    bound: Option<String>,
    #[arg(long)]
    amplitudes: bool,
}

#[derive(Args)]
struct PerturbFlags {
    #[arg(long, allow_hyphen_values = true)]
    energy: Option<f64>,
    #[arg(long)]
    n_max: Option<u64>,
    #[arg(long, allow_hyphen_values = true)]
    c2: Option<f64>,
    #[arg(long)]
    decay: Option<f64>,
    #[arg(long)]
    offset: Option<f64>,
    #[arg(long)]
    no_series: bool,
}

#[derive(Args)]
struct SturmianFlags {
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<f64>,
    /// golden_mean, silver_mean, or a decimal in (0, 1).
    #[arg(long)]
    omega: Option<String>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    d_constant: Option<f64>,
    #[arg(long)]
    word_length: Option<usize>,
}

#[derive(Args)]
struct StructureFlags {
    /// S1, S2, S3 or S4(k); repeatable.
    #[arg(long = "condition")]
    conditions: Vec<String>,
    #[arg(long)]
    length: Option<usize>,
    #[arg(long)]
    from_index: Option<usize>,
}

type Overrides = Vec<(&'static str, Value)>;

fn push<T: Serialize>(out: &mut Overrides, key: &'static str, value: Option<T>) {
    if let Some(v) = value {
        out.push((key, serde_json::to_value(v).expect("plain value")));
    }
}

impl ScanFlags {
    fn overrides(&self) -> Overrides {
        let mut o = Vec::new();
        push(&mut o, "params.n_max", self.n_max);
        push(&mut o, "params.energies", self.energies.clone());
        push(&mut o, "params.energies.lo", self.e_lo);
        push(&mut o, "params.energies.hi", self.e_hi);
        push(&mut o, "params.energies.count", self.e_count);
        push(&mut o, "params.norm", self.norm.clone());
        push(&mut o, "params.special", self.special.then_some(true));
        o
    }
}

impl TracemapFlags {
    fn overrides(&self) -> Overrides {
        let mut o = Vec::new();
        push(&mut o, "params.m", self.m);
        push(&mut o, "params.lambda", self.lambda);
        push(&mut o, "params.r", self.r);
        push(&mut o, "params.tol", self.tol);
        push(&mut o, "params.cascade", self.cascade);
        push(&mut o, "params.norm_check_n_max", self.norm_check_n_max);
        push(&mut o, "params.orbit.m_max", self.m_max);
        push(&mut o, "params.orbit.energies", self.orbit_energies.clone());
        o
    }
}

impl DynamicsFlags {
    fn overrides(&self) -> Overrides {
        let mut o = Vec::new();
        push(&mut o, "params.sites", self.sites);
        push(&mut o, "params.times.lo", self.t_lo);
        push(&mut o, "params.times.hi", self.t_hi);
        push(&mut o, "params.times.count", self.t_count);
        push(&mut o, "params.ps", self.p.clone());
        push(&mut o, "params.alpha", self.alpha);
        push(&mut o, "params.bound", self.bound.clone());
        push(&mut o, "params.amplitudes", self.amplitudes.then_some(true));
        o
    }
}

impl PerturbFlags {
    fn overrides(&self) -> Overrides {
        let mut o = Vec::new();
        push(&mut o, "params.energy", self.energy);
        push(&mut o, "params.n_max", self.n_max);
        push(&mut o, "params.perturbation.c2", self.c2);
        push(&mut o, "params.perturbation.decay", self.decay);
        push(&mut o, "params.perturbation.offset", self.offset);
        push(&mut o, "params.series", self.no_series.then_some(false));
        o
    }
}

fn omega_value(s: &str) -> Value {
    match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
        "golden" | "golden_mean" => json!("golden_mean"),
        "silver" | "silver_mean" => json!("silver_mean"),
        _ => json!({ "decimal": s.trim() }),
    }
}

impl SturmianFlags {
    fn overrides(&self) -> Overrides {
        let mut o = Vec::new();
        push(&mut o, "params.lambda", self.lambda);
        push(&mut o, "params.omega", self.omega.as_deref().map(omega_value));
        push(&mut o, "params.theta", self.theta);
        push(&mut o, "params.depth", self.depth);
        push(&mut o, "params.d_constant", self.d_constant);
        push(&mut o, "params.word_length", self.word_length);
        o
    }
}

impl StructureFlags {
    fn overrides(&self) -> Result<Overrides, ConfigError> {
        let mut o = Vec::new();
        if !self.conditions.is_empty() {
            let parsed = self
                .conditions
                .iter()
                .map(|c| c.parse::<qdyn1d_core::potentials::Condition>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| ConfigError::new("params.conditions", e.to_string()))?;
            push(&mut o, "params.conditions", Some(parsed));
        }
        push(&mut o, "params.length", self.length);
        push(&mut o, "params.from_index", self.from_index);
        Ok(o)
    }
}

/// How a run ended, short of success.
enum Failure {
    Config(ConfigError),
    Module(Error),
    Checks(usize),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Config(c) => Failure::Config(c),
            RunError::Module(m) => Failure::Module(m),
        }
    }
}

/// Errors a user fixes by changing the configuration.
fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidParameter(_)
            | Error::InvalidRule(_)
            | Error::NonPrefixRule
            | Error::UnknownBound(_)
            | Error::WindowTooLarge { .. }
            | Error::WindowMismatch(_)
            | Error::ZeroCoupling
            | Error::RationalInput
    )
}

fn report(failure: Failure) -> ExitCode {
    let (code, body) = match failure {
        Failure::Config(c) => (2, json!({ "kind": "config", "path": c.path, "message": c.message })),
        Failure::Module(e) => {
            let code = if is_config_error(&e) { 2 } else { 1 };
            let mut body = serde_json::to_value(&e).unwrap_or(Value::Null);
            if let Value::Object(map) = &mut body {
                map.insert("message".into(), json!(e.to_string()));
            }
            (code, body)
        }
        Failure::Checks(n) => (1, json!({ "kind": "check_failure", "failed": n })),
    };
    eprintln!("{}", json!({ "error": body }));
    ExitCode::from(code)
}

fn thread_cap() -> Result<Option<usize>, ConfigError> {
    match std::env::var(THREADS_ENV) {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(ConfigError::new(THREADS_ENV, format!("expected a positive integer, got `{s}`"))),
        },
        Err(_) => Ok(None),
    }
}

/// Sizes the global pool: the requested count (default: all cores), capped
/// by the environment.
fn init_threads(requested: Option<usize>) -> Result<usize, ConfigError> {
    let available = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let mut n = requested.unwrap_or(available);
    if let Some(cap) = thread_cap()? {
        n = n.min(cap);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| ConfigError::new("threads", e.to_string()))?;
    Ok(n)
}

fn run_experiment<P>(
    kind: ExperimentKind,
    common: &Common,
    flags: Overrides,
    runner: fn(&P) -> Result<Outcome, RunError>,
) -> Result<(), Failure>
where
    P: DeserializeOwned + Serialize,
{
    let started = Instant::now();
    let mut doc = config::load_document(common.config.as_deref())?;
    let mut overrides: Vec<(String, Value)> = Vec::new();
    if let Some(seed) = common.seed {
        overrides.push(("seed".into(), json!(seed)));
    }
    if let Some(t) = common.threads {
        overrides.push(("threads".into(), json!(t)));
    }
    if let Some(out) = &common.out {
        overrides.push(("output.dir".into(), json!(out)));
    }
    overrides.extend(flags.into_iter().map(|(k, v)| (k.to_string(), v)));
    for a in &common.assignments {
        overrides.push(config::parse_assignment(a)?);
    }
    for (key, value) in overrides {
        config::set_path(&mut doc, &key, value)?;
    }
    config::inherit_seed(&mut doc);
    let cfg = config::parse::<P>(doc, kind)?;
    let threads = init_threads(cfg.threads)?;

    let dir = cfg.output.dir.clone();
    std::fs::create_dir_all(&dir)
        .map_err(|e| ConfigError::new("output.dir", format!("cannot create {}: {e}", dir.display())))?;

    let outcome = runner(&cfg.params)?;
    let mut artifacts = Vec::new();
    for table in &outcome.tables {
        let record = output::write_table(&dir, table)
            .map_err(|e| ConfigError::new("output.dir", format!("cannot write {}: {e}", table.name)))?;
        println!("{}  ({} rows)", dir.join(&record.file).display(), record.rows);
        artifacts.push(record);
    }
    let manifest = Manifest {
        experiment: kind.as_str().into(),
        config: serde_json::to_value(&cfg).expect("config serializes"),
        versions: output::versions(),
        seed: cfg.seed,
        threads,
        artifacts,
        diagnostics: outcome.diagnostics,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    let path = output::write_manifest(&dir, &manifest)
        .map_err(|e| ConfigError::new("output.dir", format!("cannot write manifest: {e}")))?;
    println!("{}", path.display());
    Ok(())
}

fn run_verify(suite: &str, out: Option<&PathBuf>, threads: Option<usize>) -> Result<(), Failure> {
    let suite: Suite = suite.parse().map_err(|e: Error| ConfigError::new("suite", e.to_string()))?;
    init_threads(threads)?;
    let checks = verify::run(suite).map_err(Failure::Module)?;
    for c in &checks {
        println!("{c}");
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("{}: {} passed, {} failed", suite.as_str(), checks.len() - failed, failed);
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)
            .map_err(|e| ConfigError::new("out", format!("cannot create {}: {e}", dir.display())))?;
        let mut t = Table::new(&format!("verify_{}.csv", suite.as_str()), &["check", "measured", "relation", "threshold", "passed"]);
        for c in &checks {
            t.push(vec![c.name.clone(), num(c.measured), c.relation.symbol().into(), num(c.threshold), c.passed.to_string()]);
        }
        output::write_table(dir, &t).map_err(|e| ConfigError::new("out", e.to_string()))?;
    }
    if failed > 0 {
        return Err(Failure::Checks(failed));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::TransferScan { common, flags } => {
            run_experiment(ExperimentKind::TransferScan, common, flags.overrides(), run::transfer_scan)
        }
        Command::Tracemap { common, flags } => {
            run_experiment(ExperimentKind::Tracemap, common, flags.overrides(), run::tracemap)
        }
        Command::Dynamics { common, flags } => {
            run_experiment(ExperimentKind::Dynamics, common, flags.overrides(), run::dynamics)
        }
        Command::Perturb { common, flags } => {
            run_experiment(ExperimentKind::Perturb, common, flags.overrides(), run::perturb)
        }
        Command::Sturmian { common, flags } => {
            run_experiment(ExperimentKind::Sturmian, common, flags.overrides(), run::sturmian)
        }
        Command::StructureCheck { common, flags } => match flags.overrides() {
            Ok(o) => run_experiment(ExperimentKind::StructureCheck, common, o, run::structure_check),
            Err(e) => Err(Failure::Config(e)),
        },
        Command::Verify { suite, out, threads } => run_verify(suite, out.as_ref(), *threads),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report(f),
    }
}

//! Command-line front end: parses a TOML configuration, runs a single
//! evolution or a named experiment, and writes CSV, plot data and a JSON
//! report.
//!
//! Exit codes: 0 success (or experiment PASS), 1 experiment FAIL, 2
//! configuration or usage error, 3 runtime failure. A blow-up during a plain
//! `run` still exits 0; the report records it.

pub mod config;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use nls_sharp_core::experiments::{
    self, conservation_suite, regime, BlowupConfig, ConservationConfig, DataTable, DispersiveConfig, ExperimentError,
    ExperimentReport, RegimeVerdict, RunConfig, SharpWeightConfig, WkbConfig, EXPERIMENTS,
};
use nls_sharp_core::io::write_report;
use nls_sharp_core::propagator::{evolve_recording, EvolveError, SimulationParams, Termination};
use nls_sharp_core::{DiagnosticsRow64, Potential64};
use serde::Serialize;

pub use config::{Config, ConfigError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "nls-sharp", version, about = "NLS simulations with weighted-norm diagnostics")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `[output] dir`; default `out`).
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Validate the configuration and print the regime verdict without simulating.
    #[arg(long, global = true)]
    pub dry_run: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve the configured initial data and write diagnostics.
    Run,
    /// Run a named experiment; exits 0 on PASS and 1 on FAIL.
    Experiment { name: String },
    /// List experiment names.
    List,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Inadmissible(_) | ExperimentError::InvalidSetup(_) | ExperimentError::GridBudget(_) => {
                Failure::Config(e.to_string())
            }
            ExperimentError::Evolve(ref inner) => Failure::from(inner.clone()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<EvolveError> for Failure {
    fn from(e: EvolveError) -> Self {
        match e {
            EvolveError::InvalidParams(_) | EvolveError::GuardRejected(_) | EvolveError::DimensionMismatch { .. } => {
                Failure::Config(e.to_string())
            }
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(format!("writing output: {e}"))
    }
}

/// Parses `argv` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run_cli<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            EXIT_CONFIG
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            EXIT_RUNTIME
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32, Failure> {
    if let Command::List = cli.command {
        for name in EXPERIMENTS {
            println!("{name}");
        }
        return Ok(EXIT_OK);
    }
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let out = cli.output_dir.clone().or_else(|| cfg.output_dir()).unwrap_or_else(|| PathBuf::from("out"));
    match &cli.command {
        Command::Run => {
            if cli.config.is_none() {
                return Err(Failure::Config("`run` needs --config".into()));
            }
            let run = cfg.run_config()?;
            let verdict = regime(run.grid.d, run.sigma, run.lambda, run.potential.class())?;
            if cli.dry_run {
                print_verdicts(&[("run".into(), verdict)]);
                return Ok(EXIT_OK);
            }
            run_single(&run, verdict, &out)
        }
        Command::Experiment { name } => {
            if let Some(n) = cfg.experiment().name.filter(|n| n != name) {
                return Err(cfg.error("experiment", Some("name"), format!("config is for experiment `{n}`, not `{name}`")).into());
            }
            let plan = Plan::resolve(name, &cfg)?;
            if cli.dry_run {
                print_verdicts(&plan.verdicts()?);
                return Ok(EXIT_OK);
            }
            eprintln!("running experiment {name}");
            let mut rep = plan.execute()?;
            write_report(&out, &mut rep)?;
            eprintln!("{}: {} (report in {})", name, if rep.pass { "PASS" } else { "FAIL" }, out.join(&rep.name).display());
            Ok(if rep.pass { EXIT_OK } else { EXIT_FAIL })
        }
        Command::List => unreachable!(),
    }
}

#[derive(Serialize)]
struct VerdictLine<'a> {
    case: &'a str,
    #[serde(flatten)]
    verdict: &'a RegimeVerdict,
}

fn print_verdicts(v: &[(String, RegimeVerdict)]) {
    for (case, verdict) in v {
        let line = VerdictLine { case, verdict };
        println!("{}", serde_json::to_string(&line).expect("verdicts serialize"));
    }
}

fn density_table(u: &nls_sharp_core::WaveField64) -> DataTable {
    let g = u.grid();
    if g.dim() == 1 {
        let mut t = DataTable::new("density", &["x", "density"]);
        t.rows = (0..g.len()).map(|i| vec![g.point(i)[0], u.values()[i].norm_sqr()]).collect();
        t
    } else {
        let mut t = DataTable::new("density", &["x0", "x1", "density"]);
        t.rows = (0..g.len()).map(|i| vec![g.point(i)[0], g.point(i)[1], u.values()[i].norm_sqr()]).collect();
        t
    }
}

fn run_single(run: &RunConfig, verdict: RegimeVerdict, out: &Path) -> Result<i32, Failure> {
    let grid = run.grid.build()?;
    let u0 = run.initial.sample(&grid);
    let prm = SimulationParams::new(run.lambda, run.sigma, run.dt, run.t_final)?
        .with_record_every(run.record_every)
        .with_snapshots(false);
    eprintln!("evolving {} from {} to T = {}", run.potential, run.initial.describe(), run.t_final);
    let traj = evolve_recording(&u0, &run.potential, &prm)?;

    let mut rep = ExperimentReport::new("run");
    rep.param("potential", &run.potential);
    rep.param("initial", run.initial.describe());
    rep.param("lambda", run.lambda);
    rep.param("sigma", run.sigma);
    rep.param("dt", run.dt);
    rep.param("T", run.t_final);
    rep.param("record_every", run.record_every);
    rep.param("grid", format!("d={}, L={}, N={}", run.grid.d, run.grid.half_width, run.grid.n));
    rep.param("regime", format!("{:?} / {:?} / {:?}", verdict.applicable_theorem, verdict.required_space, verdict.global));

    let mut diag = DataTable::new("diagnostics", &DiagnosticsRow64::COLUMNS);
    diag.rows = traj.diagnostics.iter().map(|r| r.to_array().to_vec()).collect();
    let mut energy = DataTable::new("energy", &["t", "total_E"]);
    energy.rows = traj.diagnostics.iter().map(|r| vec![r.t, r.total_energy]).collect();
    let mut mass = DataTable::new("mass", &["t", "mass"]);
    mass.rows = traj.diagnostics.iter().map(|r| vec![r.t, r.mass]).collect();
    rep.tables.extend([diag, energy, mass, density_table(&traj.final_state)]);

    let first = traj.diagnostics[0];
    let last = *traj.diagnostics.last().expect("initial row is always recorded");
    rep.measure("t_end", last.t);
    rep.measure("mass_drift", ((last.mass - first.mass) / first.mass).abs());
    rep.measure("energy_drift", (last.total_energy - first.total_energy).abs() / first.total_energy.abs().max(f64::MIN_POSITIVE));
    rep.measure("max_gradient_norm", traj.max_gradient_norm());
    rep.pass = true;
    if let Termination::Blowup { t } = traj.termination {
        rep.pass = false;
        rep.measure("blowup_time", t);
        rep.notes.push(format!("blow-up detected at t = {t}; the run stopped there"));
        eprintln!("warning: blow-up detected at t = {t}");
    }
    let files = write_report(out, &mut rep)?;
    eprintln!("wrote {} files to {}", files.len(), out.join("run").display());
    Ok(EXIT_OK)
}

/// A fully resolved experiment invocation.
enum Plan {
    ConservationSuite(Vec<ConservationConfig>),
    Conservation(ConservationConfig),
    Dispersive(DispersiveConfig),
    Gronwall(RunConfig),
    Wkb(WkbConfig),
    SharpWeight(SharpWeightConfig),
    Blowup(BlowupConfig),
}

impl Plan {
    fn resolve(name: &str, cfg: &Config) -> Result<Self, Failure> {
        let e = cfg.experiment();
        let keys: &[&str] = match name {
            "conservation" | "gronwall" => &[],
            "dispersive" => &["window"],
            "wkb" => &["times", "dt_ode"],
            "sharp-weight" => &["radii", "tau", "n", "max_points", "control", "growth_threshold", "ratio_tolerance"],
            "blowup-regime" => &["growth_limit"],
            other => {
                return Err(Failure::Config(format!(
                    "unknown experiment `{other}`; available: {}",
                    EXPERIMENTS.join(", ")
                )))
            }
        };
        cfg.check_experiment_keys(name, keys)?;
        let plan = match name {
            "conservation" if !cfg.has_run_sections() => Plan::ConservationSuite(conservation_suite()),
            "conservation" => Plan::Conservation(ConservationConfig::new(cfg.run_config()?)),
            "gronwall" if !cfg.has_run_sections() => {
                let p = Potential64::harmonic(&[1.0]).expect("valid");
                Plan::Gronwall(RunConfig::new(p, experiments::InitialCondition::ground_state(), 1.0, 1.0, 2.0))
            }
            "gronwall" => Plan::Gronwall(cfg.run_config()?),
            "dispersive" => {
                let mut d = DispersiveConfig::default();
                if cfg.has_run_sections() {
                    d.run = cfg.run_config()?;
                    d.window = d.run.t_final;
                }
                if let Some(w) = e.window {
                    d.window = w;
                }
                Plan::Dispersive(d)
            }
            "wkb" => {
                let mut w = WkbConfig::default();
                if cfg.raw.grid.is_some() || cfg.has_potential() {
                    w.grid = cfg.grid()?;
                    if cfg.has_potential() {
                        w.potential = cfg.potential(w.grid.d)?;
                    }
                }
                if cfg.raw.ic.is_some() {
                    w.initial = cfg.initial(w.grid.d)?;
                }
                if let Some(dt) = cfg.raw.params.as_ref().and_then(|p| p.dt) {
                    w.dt_reference = dt;
                }
                if let Some(t) = e.times {
                    w.times = t;
                }
                if let Some(h) = e.dt_ode {
                    w.dt_ode = h;
                }
                Plan::Wkb(w)
            }
            "sharp-weight" => {
                let mut s = SharpWeightConfig::default();
                let d = cfg.raw.grid.as_ref().and_then(|g| g.d).unwrap_or(1);
                if cfg.has_potential() {
                    s.potential = cfg.potential(d)?;
                }
                if cfg.raw.ic.is_some() {
                    s.profile = cfg.initial(d)?;
                }
                if let Some(dt) = cfg.raw.params.as_ref().and_then(|p| p.dt) {
                    s.dt = dt;
                }
                if let Some(n) = cfg.raw.grid.as_ref().and_then(|g| g.n) {
                    s.n = n;
                }
                if let Some(r) = e.radii {
                    s.radii = r;
                }
                if let Some(t) = e.tau {
                    s.tau = t;
                }
                if let Some(n) = e.n {
                    s.n = n;
                }
                if let Some(m) = e.max_points {
                    s.max_points = m;
                }
                if let Some(g) = e.growth_threshold {
                    s.growth_threshold = g;
                }
                if let Some(r) = e.ratio_tolerance {
                    s.ratio_tolerance = r;
                }
                match e.control.as_deref() {
                    None if s.potential.dim() != 1 => s.control = Some(Potential64::soft_linear(s.potential.dim()).expect("valid")),
                    None => {}
                    Some("none") => s.control = None,
                    Some(fam) => match config::potential_by_name(fam, s.potential.dim()) {
                        Some(Ok(p)) => s.control = Some(p),
                        Some(Err(m)) => return Err(cfg.error("experiment", Some("control"), m).into()),
                        None => {
                            return Err(cfg
                                .error("experiment", Some("control"), format!("unknown control family `{fam}`"))
                                .into())
                        }
                    },
                }
                Plan::SharpWeight(s)
            }
            _ => {
                let mut b = BlowupConfig::default();
                if cfg.raw.grid.is_some() {
                    b.grid = cfg.grid()?;
                }
                if cfg.raw.ic.is_some() {
                    b.initial = cfg.initial(b.grid.d)?;
                }
                if let Some(p) = &cfg.raw.params {
                    if p.lambda.is_some() || p.record_every.is_some() {
                        return Err(cfg.error("params", None, "blowup-regime runs both signs of lambda; only sigma, dt and T are read").into());
                    }
                    b.sigma = p.sigma.unwrap_or(b.sigma);
                    b.dt = p.dt.unwrap_or(b.dt);
                    b.t_final = p.t_final.unwrap_or(b.t_final);
                }
                if let Some(g) = e.growth_limit {
                    b.growth_limit = g;
                }
                Plan::Blowup(b)
            }
        };
        Ok(plan)
    }

    /// `(case, verdict)` for every equation the experiment simulates.
    fn verdicts(&self) -> Result<Vec<(String, RegimeVerdict)>, Failure> {
        let of = |case: String, d: usize, sigma: f64, lambda: f64, p: &Potential64| -> Result<_, Failure> {
            Ok((case, regime(d, sigma, lambda, p.class())?))
        };
        let run = |case: String, r: &RunConfig| of(case, r.grid.d, r.sigma, r.lambda, &r.potential);
        match self {
            Plan::ConservationSuite(all) => all
                .iter()
                .enumerate()
                .map(|(i, c)| run(format!("{i:02} {} lambda={}", c.run.potential, c.run.lambda), &c.run))
                .collect(),
            Plan::Conservation(c) => Ok(vec![run("conservation".into(), &c.run)?]),
            Plan::Dispersive(c) => Ok(vec![run("dispersive".into(), &c.run)?]),
            Plan::Gronwall(r) => Ok(vec![run("gronwall".into(), r)?]),
            Plan::Wkb(w) => Ok(vec![of("wkb".into(), w.grid.d, 1.0, 0.0, &w.potential)?]),
            Plan::SharpWeight(s) => {
                let mut v = vec![of("sharp-weight".into(), s.potential.dim(), 1.0, 0.0, &s.potential)?];
                if let Some(c) = &s.control {
                    v.push(of("sharp-weight control".into(), c.dim(), 1.0, 0.0, c)?);
                }
                Ok(v)
            }
            Plan::Blowup(b) => {
                let zero = Potential64::zero(b.grid.d).expect("valid");
                Ok(vec![
                    of("blowup-regime focusing".into(), b.grid.d, b.sigma, -1.0, &zero)?,
                    of("blowup-regime defocusing".into(), b.grid.d, b.sigma, 1.0, &zero)?,
                ])
            }
        }
    }

    fn execute(&self) -> Result<ExperimentReport, Failure> {
        Ok(match self {
            Plan::ConservationSuite(all) => {
                let mut rep = ExperimentReport::new("conservation");
                rep.pass = true;
                let (mut mass, mut energy) = (0.0f64, 0.0f64);
                for (i, c) in all.iter().enumerate() {
                    let r = experiments::exp_conservation(c)?;
                    rep.param(&format!("case_{i:02}"), format!("{} lambda={}", c.run.potential, c.run.lambda));
                    mass = mass.max(r.metric("mass_drift").unwrap_or(f64::INFINITY));
                    energy = energy.max(r.metric("energy_drift").unwrap_or(f64::INFINITY));
                    rep.pass &= r.pass;
                    if !r.pass {
                        rep.notes.push(format!("case_{i:02} failed"));
                    }
                    rep.notes.extend(r.notes.into_iter().map(|n| format!("case_{i:02}: {n}")));
                    for mut t in r.tables {
                        t.name = format!("{}_{i:02}", t.name);
                        rep.tables.push(t);
                    }
                }
                rep.measure("max_mass_drift", mass);
                rep.measure("max_energy_drift", energy);
                rep
            }
            Plan::Conservation(c) => experiments::exp_conservation(c)?,
            Plan::Dispersive(c) => experiments::exp_dispersive(c)?,
            Plan::Gronwall(r) => experiments::exp_gronwall(r)?,
            Plan::Wkb(w) => experiments::exp_wkb(w)?,
            Plan::SharpWeight(s) => experiments::exp_sharp_weight(s)?,
            Plan::Blowup(b) => experiments::exp_blowup_regime(b)?,
        })
    }
}

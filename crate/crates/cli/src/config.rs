//! Configuration files: TOML with one table per component.
//!
//! ```toml
//! [grid]
//! d = 1
//! L = 16.0        # box is [-L, L)^d
//! N = 1024        # points per axis
//!
//! [potential]
//! family = "harmonic"
//! omega = 1.0
//!
//! [params]
//! lambda = 1.0
//! sigma = 1.0
//! dt = 1e-3
//! T = 1.0
//! record_every = 10
//!
//! [ic]
//! kind = "gaussian"
//! width = 1.0
//!
//! [output]
//! dir = "out"
//!
//! [experiment]
//! name = "sharp-weight"
//! radii = [8.0, 16.0, 32.0]
//! ```
//!
//! Unknown keys are rejected. Keys that are valid TOML but meaningless for
//! the chosen family or kind (say `m` for a harmonic potential) are rejected
//! too, with the line they appear on.

use std::fmt;
use std::path::{Path, PathBuf};

use nls_sharp_core::experiments::{GridSpec, InitialCondition, RunConfig};
use nls_sharp_core::Potential64;
use serde::Deserialize;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub source: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{}: {}", self.source, l, self.message),
            None => write!(f, "{}: {}", self.source, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// A scalar broadcast to every axis, or one value per axis.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Scalars {
    One(f64),
    Many(Vec<f64>),
}

impl Scalars {
    fn per_axis(&self, d: usize) -> Vec<f64> {
        match self {
            Self::One(v) => vec![*v; d],
            Self::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub d: Option<usize>,
    #[serde(rename = "L")]
    pub half_width: Option<f64>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSection {
    pub family: String,
    pub omega: Option<Scalars>,
    pub field: Option<Scalars>,
    pub m: Option<f64>,
    /// Row-major `d×d` matrix of `½xᵀAx + b·x + c`.
    pub a: Option<Vec<f64>>,
    pub b: Option<Vec<f64>>,
    pub c: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub lambda: Option<f64>,
    pub sigma: Option<f64>,
    pub dt: Option<f64>,
    #[serde(rename = "T")]
    pub t_final: Option<f64>,
    pub record_every: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IcSection {
    /// `gaussian`, `ground_state`, `soft_decay` or `truncated`.
    pub kind: String,
    pub amplitude: Option<f64>,
    pub width: Option<f64>,
    pub center: Option<Scalars>,
    pub momentum: Option<Scalars>,
    pub p: Option<f64>,
    pub radius: Option<f64>,
    /// Kind of the profile being truncated; its keys sit alongside.
    pub inner: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: Option<String>,
    pub radii: Option<Vec<f64>>,
    pub tau: Option<f64>,
    pub n: Option<usize>,
    pub max_points: Option<usize>,
    /// Comparison potential family for sharp-weight, or `"none"`.
    pub control: Option<String>,
    pub growth_threshold: Option<f64>,
    pub ratio_tolerance: Option<f64>,
    pub times: Option<Vec<f64>>,
    pub dt_ode: Option<f64>,
    pub window: Option<f64>,
    pub growth_limit: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub grid: Option<GridSection>,
    pub potential: Option<PotentialSection>,
    pub params: Option<ParamsSection>,
    pub ic: Option<IcSection>,
    pub output: Option<OutputSection>,
    pub experiment: Option<ExperimentSection>,
}

/// A parsed configuration together with its text, so that semantic errors
/// can point at a line.
#[derive(Debug, Clone, Default)]
pub struct Config {
    pub raw: RawConfig,
    text: String,
    source: String,
}

/// Line (1-based) of `key` inside `[section]`, or of the header itself.
fn locate(text: &str, section: &str, key: Option<&str>) -> Option<usize> {
    let mut current = "";
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if let Some(name) = t.strip_prefix('[').and_then(|s| s.split(']').next()) {
            current = name.trim();
            if current == section && key.is_none() {
                return Some(i + 1);
            }
            continue;
        }
        if current == section {
            if let Some(k) = key {
                let lhs = t.split('=').next().unwrap_or("").trim().trim_matches('"');
                if lhs == k && t.contains('=') {
                    return Some(i + 1);
                }
            }
        }
    }
    key.and_then(|_| locate(text, section, None))
}

impl Config {
    pub fn parse(text: &str, source: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            ConfigError { source: source.to_string(), line, message: e.message().to_string() }
        })?;
        Ok(Self { raw, text: text.to_string(), source: source.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let source = path.display().to_string();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError { source: source.clone(), line: None, message: format!("cannot read: {e}") })?;
        Self::parse(&text, &source)
    }

    pub fn error(&self, section: &str, key: Option<&str>, message: impl Into<String>) -> ConfigError {
        ConfigError { source: self.source.clone(), line: locate(&self.text, section, key), message: message.into() }
    }

    fn reject_unused(&self, section: &str, present: &[(&'static str, bool)], used: &[&str], what: &str) -> Result<(), ConfigError> {
        match present.iter().find(|(k, set)| *set && !used.contains(k)) {
            Some((k, _)) => Err(self.error(section, Some(k), format!("[{section}] `{k}` is not used by {what}"))),
            None => Ok(()),
        }
    }

    pub fn grid(&self) -> Result<GridSpec, ConfigError> {
        let g = self.raw.grid.clone().unwrap_or_default();
        let spec = GridSpec {
            d: g.d.unwrap_or(1),
            half_width: g.half_width.unwrap_or(GridSpec::DEFAULT_1D.half_width),
            n: g.n.unwrap_or(GridSpec::DEFAULT_1D.n),
        };
        if !(1..=2).contains(&spec.d) {
            return Err(self.error("grid", Some("d"), format!("d = {} is not simulable (1 or 2)", spec.d)));
        }
        spec.build().map_err(|e| self.error("grid", None, e.to_string()))?;
        Ok(spec)
    }

    pub fn has_potential(&self) -> bool {
        self.raw.potential.is_some()
    }

    pub fn potential(&self, d: usize) -> Result<Potential64, ConfigError> {
        let s = self.raw.potential.as_ref().ok_or_else(|| self.error("potential", None, "missing [potential] section"))?;
        parse_potential(self, s, d)
    }

    pub fn initial(&self, d: usize) -> Result<InitialCondition, ConfigError> {
        match &self.raw.ic {
            None => Ok(InitialCondition::ground_state()),
            Some(ic) => parse_ic(self, ic, &ic.kind, d, true),
        }
    }

    pub fn has_run_sections(&self) -> bool {
        self.raw.potential.is_some() || self.raw.params.is_some() || self.raw.ic.is_some() || self.raw.grid.is_some()
    }

    /// `[grid]`, `[potential]`, `[params]` and `[ic]` as one evolution.
    /// `lambda`, `sigma` and `T` are required; the rest have defaults.
    pub fn run_config(&self) -> Result<RunConfig, ConfigError> {
        let grid = self.grid()?;
        let potential = self.potential(grid.d)?;
        let initial = self.initial(grid.d)?;
        let p = self.raw.params.as_ref().ok_or_else(|| self.error("params", None, "missing [params] section"))?;
        let need = |v: Option<f64>, k: &str| v.ok_or_else(|| self.error("params", None, format!("[params] needs `{k}`")));
        let mut run = RunConfig::new(potential, initial, need(p.lambda, "lambda")?, need(p.sigma, "sigma")?, need(p.t_final, "T")?)
            .with_grid(grid);
        if let Some(dt) = p.dt {
            run.dt = dt;
        }
        if let Some(r) = p.record_every {
            if r == 0 {
                return Err(self.error("params", Some("record_every"), "record_every must be positive"));
            }
            run.record_every = r;
        }
        nls_sharp_core::SimulationParams::new(run.lambda, run.sigma, run.dt, run.t_final)
            .map_err(|e| self.error("params", None, e.to_string()))?;
        Ok(run)
    }

    pub fn experiment(&self) -> ExperimentSection {
        self.raw.experiment.clone().unwrap_or_default()
    }

    /// Rejects experiment keys that `name` does not read.
    pub fn check_experiment_keys(&self, name: &str, used: &[&str]) -> Result<(), ConfigError> {
        let e = self.experiment();
        let present = [
            ("radii", e.radii.is_some()),
            ("tau", e.tau.is_some()),
            ("n", e.n.is_some()),
            ("max_points", e.max_points.is_some()),
            ("control", e.control.is_some()),
            ("growth_threshold", e.growth_threshold.is_some()),
            ("ratio_tolerance", e.ratio_tolerance.is_some()),
            ("times", e.times.is_some()),
            ("dt_ode", e.dt_ode.is_some()),
            ("window", e.window.is_some()),
            ("growth_limit", e.growth_limit.is_some()),
        ];
        self.reject_unused("experiment", &present, used, &format!("experiment {name}"))
    }

    pub fn output_dir(&self) -> Option<PathBuf> {
        self.raw.output.as_ref().and_then(|o| o.dir.clone())
    }
}

/// Builds a potential family by name with keys from `s`.
pub fn potential_by_name(family: &str, d: usize) -> Option<Result<Potential64, String>> {
    let r = match family {
        "zero" => Potential64::zero(d),
        "harmonic" => Potential64::isotropic_harmonic(d, 1.0),
        "inverted_harmonic" => Potential64::inverted_harmonic(d, 1.0),
        "stark" => Potential64::stark(&vec![1.0; d]),
        "soft_linear" => Potential64::soft_linear(d),
        _ => return None,
    };
    Some(r.map_err(|e| e.to_string()))
}

fn parse_potential(cfg: &Config, s: &PotentialSection, d: usize) -> Result<Potential64, ConfigError> {
    let present = [
        ("omega", s.omega.is_some()),
        ("field", s.field.is_some()),
        ("m", s.m.is_some()),
        ("a", s.a.is_some()),
        ("b", s.b.is_some()),
        ("c", s.c.is_some()),
    ];
    let used: &[&str] = match s.family.as_str() {
        "zero" | "soft_linear" => &[],
        "harmonic" | "inverted_harmonic" => &["omega"],
        "stark" => &["field"],
        "soft_power" | "negated_soft_power" => &["m"],
        "anisotropic_quadratic" => &["a", "b", "c"],
        other => {
            return Err(cfg.error(
                "potential",
                Some("family"),
                format!(
                    "unknown potential family `{other}` (expected zero, harmonic, inverted_harmonic, stark, \
                     soft_linear, anisotropic_quadratic, soft_power or negated_soft_power)"
                ),
            ))
        }
    };
    cfg.reject_unused("potential", &present, used, &format!("family {}", s.family))?;
    let m = || s.m.ok_or_else(|| cfg.error("potential", None, format!("family {} needs `m`", s.family)));
    let r = match s.family.as_str() {
        "zero" => Potential64::zero(d),
        "soft_linear" => Potential64::soft_linear(d),
        "harmonic" => Potential64::harmonic(&s.omega.clone().unwrap_or(Scalars::One(1.0)).per_axis(d)),
        "inverted_harmonic" => match &s.omega {
            None => Potential64::inverted_harmonic(d, 1.0),
            Some(Scalars::One(w)) => Potential64::inverted_harmonic(d, *w),
            Some(Scalars::Many(_)) => {
                return Err(cfg.error("potential", Some("omega"), "inverted_harmonic takes a scalar omega"))
            }
        },
        "stark" => Potential64::stark(&s.field.clone().unwrap_or(Scalars::One(1.0)).per_axis(d)),
        "soft_power" => Potential64::soft_power(d, m()?),
        "negated_soft_power" => Potential64::negated_soft_power(d, m()?),
        _ => {
            let a = s.a.as_ref().ok_or_else(|| cfg.error("potential", None, "anisotropic_quadratic needs `a`"))?;
            Potential64::anisotropic_quadratic(d, a, &s.b.clone().unwrap_or(vec![0.0; d]), s.c.unwrap_or(0.0))
        }
    };
    let p = r.map_err(|e| cfg.error("potential", None, e.to_string()))?;
    if p.dim() != d {
        return Err(cfg.error("potential", None, format!("potential is {}-dimensional, grid has d = {d}", p.dim())));
    }
    if let nls_sharp_core::potentials::GuardVerdict::Reject(why) = p.self_adjointness_guard() {
        return Err(cfg.error("potential", Some("family"), why));
    }
    Ok(p)
}

fn parse_ic(cfg: &Config, ic: &IcSection, kind: &str, d: usize, outer: bool) -> Result<InitialCondition, ConfigError> {
    let present = [
        ("amplitude", ic.amplitude.is_some()),
        ("width", ic.width.is_some()),
        ("center", ic.center.is_some()),
        ("momentum", ic.momentum.is_some()),
        ("p", ic.p.is_some()),
        ("radius", ic.radius.is_some()),
        ("inner", ic.inner.is_some()),
    ];
    let built = match kind {
        "ground_state" => {
            if outer {
                cfg.reject_unused("ic", &present, &[], "kind ground_state")?;
            }
            InitialCondition::ground_state()
        }
        "gaussian" => {
            if outer {
                cfg.reject_unused("ic", &present, &["amplitude", "width", "center", "momentum"], "kind gaussian")?;
            }
            InitialCondition::Gaussian {
                amplitude: ic.amplitude,
                width: ic.width.unwrap_or(1.0),
                center: ic.center.as_ref().map_or(vec![], |c| c.per_axis(d)),
                momentum: ic.momentum.as_ref().map_or(vec![], |c| c.per_axis(d)),
            }
        }
        "soft_decay" => {
            if outer {
                cfg.reject_unused("ic", &present, &["p"], "kind soft_decay")?;
            }
            InitialCondition::SoftDecay { p: ic.p.ok_or_else(|| cfg.error("ic", None, "soft_decay needs `p`"))? }
        }
        "truncated" if outer => {
            let inner_kind = ic.inner.as_deref().ok_or_else(|| cfg.error("ic", None, "truncated needs `inner`"))?;
            let mut used = vec!["radius", "inner"];
            used.extend(match inner_kind {
                "gaussian" => &["amplitude", "width", "center", "momentum"][..],
                "soft_decay" => &["p"][..],
                _ => &[][..],
            });
            cfg.reject_unused("ic", &present, &used, &format!("kind truncated with inner {inner_kind}"))?;
            let inner = parse_ic(cfg, ic, inner_kind, d, false)?;
            InitialCondition::truncated(inner, ic.radius.ok_or_else(|| cfg.error("ic", None, "truncated needs `radius`"))?)
        }
        other => {
            let (key, what) = if outer { ("kind", "kind") } else { ("inner", "inner kind") };
            return Err(cfg.error(
                "ic",
                Some(key),
                format!("unknown initial-condition {what} `{other}` (expected gaussian, ground_state, soft_decay{})",
                    if outer { " or truncated" } else { "" }),
            ));
        }
    };
    built.validate(d).map_err(|e| cfg.error("ic", None, e.to_string()))?;
    Ok(built)
}

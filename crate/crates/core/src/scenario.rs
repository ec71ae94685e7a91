//! Scenario files: line-based `key = value` settings grouped in `[section]`
//! blocks, with `#` comments.
//!
//! ```text
//! command = dynamics
//! seed = 7
//!
//! [dynamics]
//! gamma = 0
//! kappa = 0.2, 1, 5   # one run per value
//! v = 0.2
//! ```
//!
//! Parsing is strict: unknown sections or keys and repeated keys are errors.

use std::collections::HashSet;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use num_complex::Complex64;

use crate::dynamics::{DynamicsConfig, DynamicsModel, PhysicalContext};
use crate::error::{Error, Result};
use crate::lzs::{FitConfig, HysteresisConfig};
use crate::spin::SpinSystemParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Levels,
    Crossings,
    Hysteresis,
    Fit,
    Dynamics,
    Maser,
    T0Scan,
    Peaks,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Levels,
        Command::Crossings,
        Command::Hysteresis,
        Command::Fit,
        Command::Dynamics,
        Command::Maser,
        Command::T0Scan,
        Command::Peaks,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::Levels => "levels",
            Command::Crossings => "crossings",
            Command::Hysteresis => "hysteresis",
            Command::Fit => "fit",
            Command::Dynamics => "dynamics",
            Command::Maser => "maser",
            Command::T0Scan => "t0scan",
            Command::Peaks => "peaks",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::validation(format!("unknown command `{s}`{}", suggest(s, Command::ALL.iter().map(|c| c.name())))))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelsSection {
    pub field_min: f64,
    pub field_max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossingsSection {
    pub field_min: f64,
    pub field_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalSection {
    pub n0_eta: f64,
    pub omega: f64,
    pub s_magnitude: f64,
    pub t2: f64,
    pub tc: f64,
    pub b0_dot: f64,
    pub m: i32,
    pub m_prime: i32,
    pub sample_volume: Option<f64>,
}

impl PhysicalSection {
    pub fn context(&self, g_factor: f64) -> PhysicalContext {
        PhysicalContext {
            n0_eta: self.n0_eta,
            omega: self.omega,
            s_magnitude: self.s_magnitude,
            t2: self.t2,
            tc: self.tc,
            b0_dot: self.b0_dot,
            m: self.m,
            m_prime: self.m_prime,
            sample_volume: self.sample_volume,
            g_factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsSection {
    pub model: DynamicsModel,
    /// Runs cover every combination of the listed γ, κ and v.
    pub gamma: Vec<f64>,
    pub kappa: Vec<f64>,
    pub v: Vec<f64>,
    /// Take γ, κ and v from the [physical] section instead of the lists.
    pub derive: bool,
    pub psi: f64,
    pub local_field: f64,
    pub z0: f64,
    pub r0: Option<Complex64>,
    pub h0: Option<Complex64>,
    pub theta0: f64,
    /// `None` starts at min(-10, -10γ/v), far enough before resonance for
    /// the rate equations.
    pub tau_start: Option<f64>,
    pub tau_end: f64,
    pub dtau: f64,
    pub rtol: f64,
    pub atol: f64,
}

impl DynamicsSection {
    /// One configuration per (γ, κ, v) combination, γ varying slowest.
    pub fn configs(&self) -> Vec<DynamicsConfig> {
        let mut out = Vec::with_capacity(self.gamma.len() * self.kappa.len() * self.v.len());
        for &gamma in &self.gamma {
            for &kappa in &self.kappa {
                for &v in &self.v {
                    out.push(self.config(gamma, kappa, v));
                }
            }
        }
        out
    }

    pub fn config(&self, gamma: f64, kappa: f64, v: f64) -> DynamicsConfig {
        let tau_start = self.tau_start.unwrap_or(if v != 0.0 { (-10.0f64).min(-10.0 * gamma / v.abs()) } else { 0.0 });
        DynamicsConfig {
            gamma,
            kappa,
            v,
            psi: self.psi,
            local_field: self.local_field,
            z0: self.z0,
            r0: self.r0,
            h0: self.h0,
            theta0: self.theta0,
            tau_start,
            tau_end: self.tau_end,
            dtau: self.dtau,
            rtol: self.rtol,
            atol: self.atol,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitSection {
    /// `None` generates targets from the [spin] parameters.
    pub targets: Option<Vec<(f64, f64)>>,
    pub synthetic_min_height: f64,
    pub config: FitConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct T0ScanSection {
    pub field: f64,
    pub temperatures: Vec<f64>,
    pub total_density: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub command: Command,
    pub seed: u64,
    pub spin: SpinSystemParams,
    pub physical: PhysicalSection,
    pub levels: LevelsSection,
    pub crossings: CrossingsSection,
    pub hysteresis: HysteresisConfig,
    pub fit: FitSection,
    pub dynamics: DynamicsSection,
    pub t0scan: T0ScanSection,
}

impl Scenario {
    pub fn with_defaults(command: Command) -> Self {
        let fit = FitConfig::default();
        Self {
            command,
            seed: 0,
            spin: SpinSystemParams::default(),
            physical: PhysicalSection {
                n0_eta: 1e23,
                omega: 1e11,
                s_magnitude: 1.0,
                t2: 1e-6,
                tc: 1e-8,
                b0_dot: 0.03,
                m: -10,
                m_prime: 8,
                sample_volume: None,
            },
            levels: LevelsSection {
                field_min: 0.0,
                field_max: 2.5,
                points: 501,
            },
            crossings: CrossingsSection {
                field_min: 0.05,
                field_max: 1.3,
            },
            hysteresis: HysteresisConfig::default(),
            fit: FitSection {
                targets: None,
                synthetic_min_height: 1e-12,
                config: FitConfig {
                    targets: Vec::new(),
                    match_window: 0.005,
                    ..fit
                },
            },
            dynamics: DynamicsSection {
                model: DynamicsModel::Coherent,
                gamma: vec![0.0],
                kappa: vec![1.0],
                v: vec![0.2],
                derive: false,
                psi: std::f64::consts::FRAC_PI_2,
                local_field: 0.0,
                z0: 1.0,
                r0: None,
                h0: None,
                theta0: 1e-4,
                tau_start: None,
                tau_end: 150.0,
                dtau: 0.05,
                rtol: 1e-9,
                atol: 1e-12,
            },
            t0scan: T0ScanSection {
                field: 1.4,
                temperatures: (1..=30).map(|k| k as f64 * 0.1).collect(),
                total_density: 1e23,
            },
        }
    }

    /// Parses and validates a scenario. `command` comes from the command
    /// line; a `command` key in the file must agree with it.
    pub fn parse(text: &str, command: Option<Command>) -> Result<Self> {
        let mut file_command = None;
        let mut sc = Scenario::with_defaults(Command::Levels);
        let mut section = Section::Top;
        let mut seen = HashSet::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| parse_err(line, format!("malformed section header `{content}`")))?
                    .trim();
                section = Section::from_name(name).ok_or_else(|| {
                    parse_err(
                        line,
                        format!("unknown section [{name}]{}", suggest(name, Section::ALL.iter().map(|s| s.name()))),
                    )
                })?;
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| parse_err(line, format!("expected `key = value`, got `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let keys = section.keys();
            if !keys.contains(&key) {
                return Err(parse_err(
                    line,
                    format!("unknown key `{key}` in [{}]{}", section.name(), suggest(key, keys.iter().copied())),
                ));
            }
            if !seen.insert((section, key.to_string())) {
                return Err(parse_err(line, format!("key `{key}` repeated in [{}]", section.name())));
            }
            if section == Section::Top && key == "command" {
                file_command = Some(value.parse::<Command>().map_err(|e| parse_err(line, e.to_string()))?);
                continue;
            }
            sc.set(section, key, value).map_err(|m| parse_err(line, format!("`{key}`: {m}")))?;
        }
        sc.command = match (command, file_command) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::validation(format!("command line asks for `{a}` but the scenario file says `{b}`")))
            }
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => return Err(Error::validation("no command given")),
        };
        sc.validate()?;
        Ok(sc)
    }

    fn set(&mut self, section: Section, key: &str, v: &str) -> std::result::Result<(), String> {
        match section {
            Section::Top => match key {
                "seed" => self.seed = parse_num(v)?,
                _ => unreachable!(),
            },
            Section::Spin => {
                let p = &mut self.spin;
                match key {
                    "spin" => p.spin = parse_num(v)?,
                    "d_over_kb" => p.d_over_kb = parse_num(v)?,
                    "f_over_kb" => p.f_over_kb = parse_num(v)?,
                    "c_over_kb" => p.c_over_kb = parse_num(v)?,
                    "e_over_kb" => p.e_over_kb = parse_num(v)?,
                    "k_coeff" => p.k_coeff = parse_num(v)?,
                    "g_factor" => p.g_factor = parse_num(v)?,
                    _ => unreachable!(),
                }
            }
            Section::Physical => {
                let p = &mut self.physical;
                match key {
                    "n0_eta" => p.n0_eta = parse_num(v)?,
                    "omega" => p.omega = parse_num(v)?,
                    "s_magnitude" => p.s_magnitude = parse_num(v)?,
                    "t2" => p.t2 = parse_num(v)?,
                    "tc" => p.tc = parse_num(v)?,
                    "b0_dot" => p.b0_dot = parse_num(v)?,
                    "m" => p.m = parse_num(v)?,
                    "m_prime" => p.m_prime = parse_num(v)?,
                    "sample_volume" => p.sample_volume = parse_auto(v, "none")?,
                    _ => unreachable!(),
                }
            }
            Section::Levels => {
                let p = &mut self.levels;
                match key {
                    "field_min" => p.field_min = parse_num(v)?,
                    "field_max" => p.field_max = parse_num(v)?,
                    "points" => p.points = parse_num(v)?,
                    _ => unreachable!(),
                }
            }
            Section::Crossings => {
                let p = &mut self.crossings;
                match key {
                    "field_min" => p.field_min = parse_num(v)?,
                    "field_max" => p.field_max = parse_num(v)?,
                    _ => unreachable!(),
                }
            }
            Section::Hysteresis => {
                let p = &mut self.hysteresis;
                match key {
                    "sweep_rate" => p.sweep_rate = parse_num(v)?,
                    "temperature" => p.temperature = parse_num(v)?,
                    "field_min" => p.field_range.0 = parse_num(v)?,
                    "field_max" => p.field_range.1 = parse_num(v)?,
                    "grid_points" => p.grid_points = parse_num(v)?,
                    "rethermalize" => p.rethermalize = parse_num(v)?,
                    _ => unreachable!(),
                }
            }
            Section::Fit => {
                let f = &mut self.fit;
                let c = &mut f.config;
                match key {
                    "targets" => f.targets = parse_targets(v)?,
                    "synthetic_min_height" => f.synthetic_min_height = parse_num(v)?,
                    "initial_c_over_kb" => c.initial[0] = parse_num(v)?,
                    "initial_e_over_kb" => c.initial[1] = parse_num(v)?,
                    "initial_k_coeff" => c.initial[2] = parse_num(v)?,
                    "xtol" => c.xtol = parse_num(v)?,
                    "ftol" => c.ftol = parse_num(v)?,
                    "max_iterations" => c.max_iterations = parse_num(v)?,
                    "match_window" => c.match_window = parse_num(v)?,
                    "height_floor" => c.height_floor = parse_num(v)?,
                    "restarts" => c.restarts = parse_num(v)?,
                    _ => unreachable!(),
                }
            }
            Section::Dynamics => {
                let d = &mut self.dynamics;
                match key {
                    "model" => {
                        d.model = match v {
                            "coherent" => DynamicsModel::Coherent,
                            "rate" => DynamicsModel::RateEquations,
                            "pendulum" => DynamicsModel::Pendulum,
                            _ => return Err(format!("expected coherent, rate or pendulum, got `{v}`")),
                        }
                    }
                    "gamma" => d.gamma = parse_list(v)?,
                    "kappa" => d.kappa = parse_list(v)?,
                    "v" => d.v = parse_list(v)?,
                    "derive" => d.derive = parse_num(v)?,
                    "psi" => d.psi = parse_num(v)?,
                    "local_field" => d.local_field = parse_num(v)?,
                    "z0" => d.z0 = parse_num(v)?,
                    "r0" => d.r0 = parse_complex(v)?,
                    "h0" => d.h0 = parse_complex(v)?,
                    "theta0" => d.theta0 = parse_num(v)?,
                    "tau_start" => d.tau_start = parse_auto(v, "auto")?,
                    "tau_end" => d.tau_end = parse_num(v)?,
                    "dtau" => d.dtau = parse_num(v)?,
                    "rtol" => d.rtol = parse_num(v)?,
                    "atol" => d.atol = parse_num(v)?,
                    _ => unreachable!(),
                }
            }
            Section::T0Scan => {
                let t = &mut self.t0scan;
                match key {
                    "field" => t.field = parse_num(v)?,
                    "temperatures" => t.temperatures = parse_list(v)?,
                    "total_density" => t.total_density = parse_num(v)?,
                    _ => unreachable!(),
                }
            }
        }
        Ok(())
    }

    /// Checks every section, whether or not the command uses it, so that a
    /// scenario file is either valid as a whole or rejected.
    pub fn validate(&self) -> Result<()> {
        self.spin.validate()?;
        self.spin.integer_spin()?;
        let l = &self.levels;
        if !(l.field_min.is_finite() && l.field_max.is_finite() && l.field_max >= l.field_min) || l.points == 0 {
            return Err(Error::validation("[levels] needs field_min <= field_max and points >= 1"));
        }
        let c = &self.crossings;
        if !(c.field_min.is_finite() && c.field_max.is_finite() && c.field_max > c.field_min) {
            return Err(Error::validation("[crossings] needs field_min < field_max"));
        }
        self.hysteresis.validate()?;
        let f = &self.fit;
        if let Some(t) = &f.targets {
            FitConfig {
                targets: t.clone(),
                ..f.config.clone()
            }
            .validate()?;
        } else if !(f.synthetic_min_height > 0.0) {
            return Err(Error::validation("synthetic_min_height must be > 0"));
        }
        let d = &self.dynamics;
        if d.gamma.is_empty() || d.kappa.is_empty() || d.v.is_empty() {
            return Err(Error::validation("[dynamics] gamma, kappa and v lists must be non-empty"));
        }
        for cfg in d.configs() {
            cfg.validate()?;
        }
        let p = &self.physical;
        let ctx = p.context(self.spin.g_factor);
        ctx.validate()?;
        let t = &self.t0scan;
        if t.temperatures.is_empty() || t.temperatures.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(Error::validation("[t0scan] temperatures must be a non-empty list of values > 0"));
        }
        if !(t.total_density > 0.0) || !t.field.is_finite() {
            return Err(Error::validation("[t0scan] needs total_density > 0 and a finite field"));
        }
        Ok(())
    }

    /// Every setting, defaults included, in a form `parse` reads back to an
    /// identical scenario.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let mut kv = |key: &str, value: String| {
            let _ = writeln!(s, "{key} = {value}");
        };
        kv("command", self.command.to_string());
        kv("seed", self.seed.to_string());

        let sp = &self.spin;
        let mut out = std::mem::take(&mut s);
        let mut section = |name: &str, entries: Vec<(&str, String)>| {
            let _ = writeln!(out, "\n[{name}]");
            for (k, v) in entries {
                let _ = writeln!(out, "{k} = {v}");
            }
        };
        section(
            "spin",
            vec![
                ("spin", num(sp.spin)),
                ("d_over_kb", num(sp.d_over_kb)),
                ("f_over_kb", num(sp.f_over_kb)),
                ("c_over_kb", num(sp.c_over_kb)),
                ("e_over_kb", num(sp.e_over_kb)),
                ("k_coeff", num(sp.k_coeff)),
                ("g_factor", num(sp.g_factor)),
            ],
        );
        let p = &self.physical;
        section(
            "physical",
            vec![
                ("n0_eta", num(p.n0_eta)),
                ("omega", num(p.omega)),
                ("s_magnitude", num(p.s_magnitude)),
                ("t2", num(p.t2)),
                ("tc", num(p.tc)),
                ("b0_dot", num(p.b0_dot)),
                ("m", p.m.to_string()),
                ("m_prime", p.m_prime.to_string()),
                ("sample_volume", p.sample_volume.map_or("none".into(), num)),
            ],
        );
        let l = &self.levels;
        section(
            "levels",
            vec![
                ("field_min", num(l.field_min)),
                ("field_max", num(l.field_max)),
                ("points", l.points.to_string()),
            ],
        );
        let c = &self.crossings;
        section("crossings", vec![("field_min", num(c.field_min)), ("field_max", num(c.field_max))]);
        let h = &self.hysteresis;
        section(
            "hysteresis",
            vec![
                ("sweep_rate", num(h.sweep_rate)),
                ("temperature", num(h.temperature)),
                ("field_min", num(h.field_range.0)),
                ("field_max", num(h.field_range.1)),
                ("grid_points", h.grid_points.to_string()),
                ("rethermalize", h.rethermalize.to_string()),
            ],
        );
        let f = &self.fit;
        let fc = &f.config;
        section(
            "fit",
            vec![
                (
                    "targets",
                    f.targets.as_ref().map_or("synthetic".into(), |t| {
                        t.iter().map(|(b, h)| format!("{}:{}", num(*b), num(*h))).collect::<Vec<_>>().join(", ")
                    }),
                ),
                ("synthetic_min_height", num(f.synthetic_min_height)),
                ("initial_c_over_kb", num(fc.initial[0])),
                ("initial_e_over_kb", num(fc.initial[1])),
                ("initial_k_coeff", num(fc.initial[2])),
                ("xtol", num(fc.xtol)),
                ("ftol", num(fc.ftol)),
                ("max_iterations", fc.max_iterations.to_string()),
                ("match_window", num(fc.match_window)),
                ("height_floor", num(fc.height_floor)),
                ("restarts", fc.restarts.to_string()),
            ],
        );
        let d = &self.dynamics;
        let complex = |z: Option<Complex64>| z.map_or("auto".into(), |z| format!("{}, {}", num(z.re), num(z.im)));
        section(
            "dynamics",
            vec![
                ("model", d.model.name().to_string()),
                ("gamma", list(&d.gamma)),
                ("kappa", list(&d.kappa)),
                ("v", list(&d.v)),
                ("derive", d.derive.to_string()),
                ("psi", num(d.psi)),
                ("local_field", num(d.local_field)),
                ("z0", num(d.z0)),
                ("r0", complex(d.r0)),
                ("h0", complex(d.h0)),
                ("theta0", num(d.theta0)),
                ("tau_start", d.tau_start.map_or("auto".into(), num)),
                ("tau_end", num(d.tau_end)),
                ("dtau", num(d.dtau)),
                ("rtol", num(d.rtol)),
                ("atol", num(d.atol)),
            ],
        );
        let t = &self.t0scan;
        section(
            "t0scan",
            vec![
                ("field", num(t.field)),
                ("temperatures", list(&t.temperatures)),
                ("total_density", num(t.total_density)),
            ],
        );
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Section {
    Top,
    Spin,
    Physical,
    Levels,
    Crossings,
    Hysteresis,
    Fit,
    Dynamics,
    T0Scan,
}

impl Section {
    const ALL: [Section; 8] = [
        Section::Spin,
        Section::Physical,
        Section::Levels,
        Section::Crossings,
        Section::Hysteresis,
        Section::Fit,
        Section::Dynamics,
        Section::T0Scan,
    ];

    fn name(&self) -> &'static str {
        match self {
            Section::Top => "top level",
            Section::Spin => "spin",
            Section::Physical => "physical",
            Section::Levels => "levels",
            Section::Crossings => "crossings",
            Section::Hysteresis => "hysteresis",
            Section::Fit => "fit",
            Section::Dynamics => "dynamics",
            Section::T0Scan => "t0scan",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Section::ALL.into_iter().find(|s| s.name() == name)
    }

    fn keys(&self) -> &'static [&'static str] {
        match self {
            Section::Top => &["command", "seed"],
            Section::Spin => &["spin", "d_over_kb", "f_over_kb", "c_over_kb", "e_over_kb", "k_coeff", "g_factor"],
            Section::Physical => &["n0_eta", "omega", "s_magnitude", "t2", "tc", "b0_dot", "m", "m_prime", "sample_volume"],
            Section::Levels => &["field_min", "field_max", "points"],
            Section::Crossings => &["field_min", "field_max"],
            Section::Hysteresis => &["sweep_rate", "temperature", "field_min", "field_max", "grid_points", "rethermalize"],
            Section::Fit => &[
                "targets",
                "synthetic_min_height",
                "initial_c_over_kb",
                "initial_e_over_kb",
                "initial_k_coeff",
                "xtol",
                "ftol",
                "max_iterations",
                "match_window",
                "height_floor",
                "restarts",
            ],
            Section::Dynamics => &[
                "model",
                "gamma",
                "kappa",
                "v",
                "derive",
                "psi",
                "local_field",
                "z0",
                "r0",
                "h0",
                "theta0",
                "tau_start",
                "tau_end",
                "dtau",
                "rtol",
                "atol",
            ],
            Section::T0Scan => &["field", "temperatures", "total_density"],
        }
    }
}

fn parse_err(line: usize, message: String) -> Error {
    Error::Parse { line, message }
}

/// ", did you mean `x`?" for the closest candidate, or nothing when no
/// candidate is reasonably close.
fn suggest<'a>(word: &str, candidates: impl Iterator<Item = &'a str>) -> String {
    candidates
        .map(|c| (strsim::levenshtein(word, c), c))
        .min()
        .filter(|(d, c)| *d <= 3.max(c.len() / 2))
        .map(|(_, c)| format!("; did you mean `{c}`?"))
        .unwrap_or_default()
}

fn parse_num<T: FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse::<T>()
        .map_err(|_| format!("cannot read `{v}` as {}", std::any::type_name::<T>().rsplit("::").next().unwrap_or("value")))
}

fn parse_auto(v: &str, word: &str) -> std::result::Result<Option<f64>, String> {
    if v == word {
        Ok(None)
    } else {
        parse_num(v).map(Some)
    }
}

fn parse_list(v: &str) -> std::result::Result<Vec<f64>, String> {
    v.split(',').map(|x| parse_num(x.trim())).collect()
}

fn parse_complex(v: &str) -> std::result::Result<Option<Complex64>, String> {
    if v == "auto" {
        return Ok(None);
    }
    match parse_list(v)?.as_slice() {
        [re, im] => Ok(Some(Complex64::new(*re, *im))),
        _ => Err(format!("expected `re, im` or auto, got `{v}`")),
    }
}

fn parse_targets(v: &str) -> std::result::Result<Option<Vec<(f64, f64)>>, String> {
    if v == "synthetic" {
        return Ok(None);
    }
    v.split(',')
        .map(|pair| {
            let (b, h) = pair
                .split_once(':')
                .ok_or_else(|| format!("expected `field:height` pairs, got `{}`", pair.trim()))?;
            Ok((parse_num(b.trim())?, parse_num(h.trim())?))
        })
        .collect::<std::result::Result<Vec<_>, String>>()
        .map(Some)
}

/// 17 significant digits, enough to reproduce any f64 exactly.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn list(xs: &[f64]) -> String {
    xs.iter().map(|&x| num(x)).collect::<Vec<_>>().join(", ")
}

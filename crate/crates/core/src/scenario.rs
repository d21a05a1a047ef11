//! Scenarios: parameters, initial data, grid and solver settings, loaded
//! from and written to a flat `key=value` format.
//!
//! ```text
//! # comments start with '#'
//! name = my-run
//! lambda = 50
//! ...
//! H0 = 15
//! I0 = cos(5, 1, 2)      # 5 + cos(2 pi x / L)
//! V0 = 5
//! dt = auto
//! ```

use std::collections::HashSet;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{presets, ModelParams, PointState, PARAM_KEYS};
use crate::monitors::MonitorKind;
use crate::solver::{FieldState, Grid1D, SolverConfig, TimeStep};
use crate::stability::DEFAULT_L_MAX;

/// Initial profile of one field over `[0, L]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    Constant(f64),
    /// `base + amplitude * cos(mode * pi * x / L)`; zero flux at both ends.
    Cosine {
        base: f64,
        amplitude: f64,
        mode: u32,
    },
}

impl Profile {
    pub fn eval(&self, x: f64, length: f64) -> f64 {
        match *self {
            Profile::Constant(c) => c,
            Profile::Cosine { base, amplitude, mode } => base + amplitude * (mode as f64 * PI * x / length).cos(),
        }
    }

    pub fn min(&self) -> f64 {
        match *self {
            Profile::Constant(c) => c,
            Profile::Cosine { base, amplitude, mode } if mode > 0 => base - amplitude.abs(),
            Profile::Cosine { base, amplitude, .. } => base + amplitude,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Profile::Constant(_) | Profile::Cosine { mode: 0, .. })
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Constant(c) => write!(f, "{c}"),
            Profile::Cosine { base, amplitude, mode } => write!(f, "cos({base}, {amplitude}, {mode})"),
        }
    }
}

impl FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if let Ok(c) = s.parse::<f64>() {
            return Ok(Profile::Constant(c));
        }
        let args = s
            .strip_prefix("cos(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| format!("expected a number or cos(base, amplitude, mode), got `{s}`"))?;
        let parts: Vec<&str> = args.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(format!("cos profile takes 3 arguments, got {}", parts.len()));
        }
        let num = |t: &str| t.parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
        Ok(Profile::Cosine {
            base: num(parts[0])?,
            amplitude: num(parts[1])?,
            mode: parts[2].parse().map_err(|e| format!("`{}`: {e}", parts[2]))?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialCondition {
    pub h: Profile,
    pub i: Profile,
    pub v: Profile,
}

impl InitialCondition {
    pub fn constant(s: PointState) -> Self {
        Self {
            h: Profile::Constant(s.h),
            i: Profile::Constant(s.i),
            v: Profile::Constant(s.v),
        }
    }

    pub fn field(&self, grid: &Grid1D) -> FieldState {
        let l = grid.length;
        FieldState::from_fn(grid, |x| {
            PointState::new(self.h.eval(x, l), self.i.eval(x, l), self.v.eval(x, l))
        })
    }

    pub fn is_homogeneous(&self) -> bool {
        self.h.is_constant() && self.i.is_constant() && self.v.is_constant()
    }

    /// The homogeneous value, if the data is homogeneous.
    pub fn homogeneous_value(&self) -> Option<PointState> {
        self.is_homogeneous()
            .then(|| PointState::new(self.h.eval(0.0, 1.0), self.i.eval(0.0, 1.0), self.v.eval(0.0, 1.0)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub params: ModelParams,
    pub init: InitialCondition,
    pub length: f64,
    pub n_cells: usize,
    pub solver: SolverConfig,
    pub l_max: usize,
    pub monitors: Vec<MonitorKind>,
}

/// Non-parameter config keys.
pub const SCENARIO_KEYS: [&str; 14] = [
    "name",
    "H0",
    "I0",
    "V0",
    "length",
    "n_cells",
    "dt",
    "t_end",
    "snapshot_stride",
    "positivity_clamp",
    "cfl_safety",
    "fail_on_violation",
    "l_max",
    "monitors",
];

pub const SET1: &str = "paper-set-1";
pub const SET2: &str = "paper-set-2";
pub const RESTRICTED: &str = "restricted-set-2";

impl Scenario {
    fn with_defaults(name: &str, params: ModelParams, init: PointState, t_end: f64) -> Self {
        Self {
            name: name.to_string(),
            params,
            init: InitialCondition::constant(init),
            length: 1.0,
            n_cells: 101,
            solver: SolverConfig {
                t_end,
                ..SolverConfig::default()
            },
            l_max: DEFAULT_L_MAX,
            monitors: MonitorKind::ALL.to_vec(),
        }
    }

    pub fn grid(&self) -> Result<Grid1D> {
        Grid1D::new(self.length, self.n_cells)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validated()?;
        self.solver.validate()?;
        self.grid()?;
        if self.l_max == 0 {
            return Err(Error::invalid("l_max", "must be >= 1"));
        }
        for (key, prof) in [("H0", &self.init.h), ("I0", &self.init.i), ("V0", &self.init.v)] {
            let ok = match prof {
                Profile::Constant(c) => c.is_finite() && *c >= 0.0,
                Profile::Cosine { base, amplitude, .. } => {
                    base.is_finite() && amplitude.is_finite() && prof.min() >= 0.0
                }
            };
            if !ok {
                return Err(Error::invalid(
                    key,
                    format!("initial data must be finite and nonnegative ({prof})"),
                ));
            }
        }
        Ok(())
    }

    /// Writes the scenario in config format; [`parse_config`] reads it back
    /// to an identical value.
    pub fn emit(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("name = {}\n", self.name));
        for key in PARAM_KEYS {
            out.push_str(&format!("{key} = {}\n", self.params.get(key).expect("known key")));
        }
        out.push_str(&format!(
            "H0 = {}\nI0 = {}\nV0 = {}\n",
            self.init.h, self.init.i, self.init.v
        ));
        out.push_str(&format!("length = {}\nn_cells = {}\n", self.length, self.n_cells));
        let dt = match self.solver.dt {
            TimeStep::Auto => "auto".to_string(),
            TimeStep::Fixed(dt) => dt.to_string(),
        };
        out.push_str(&format!("dt = {dt}\nt_end = {}\n", self.solver.t_end));
        let stride = self
            .solver
            .snapshot_stride
            .map_or_else(|| "auto".to_string(), |s| s.to_string());
        out.push_str(&format!("snapshot_stride = {stride}\n"));
        out.push_str(&format!("positivity_clamp = {}\n", self.solver.positivity_clamp));
        out.push_str(&format!("cfl_safety = {}\n", self.solver.cfl_safety));
        out.push_str(&format!("fail_on_violation = {}\n", self.solver.fail_on_violation));
        out.push_str(&format!("l_max = {}\n", self.l_max));
        let monitors: Vec<&str> = self.monitors.iter().map(|m| m.as_str()).collect();
        out.push_str(&format!("monitors = {}\n", monitors.join(",")));
        out
    }
}

pub fn builtin_names() -> [&'static str; 3] {
    [SET1, SET2, RESTRICTED]
}

/// Built-in scenarios. The two reference sets use constant initial data
/// (5, 5, 5) and (15, 5, 5) respectively.
pub fn builtin(name: &str) -> Option<Scenario> {
    match name {
        SET1 => Some(Scenario::with_defaults(
            SET1,
            presets::set1(),
            PointState::new(5.0, 5.0, 5.0),
            10.0,
        )),
        SET2 => Some(Scenario::with_defaults(
            SET2,
            presets::set2(),
            PointState::new(15.0, 5.0, 5.0),
            100.0,
        )),
        RESTRICTED => {
            // set 2 without absorption and with a factorized incidence
            let mut p = presets::set2();
            p.absorption = false;
            p.saturation[3] = p.saturation[1] * p.saturation[2];
            Some(Scenario::with_defaults(
                RESTRICTED,
                p,
                PointState::new(15.0, 5.0, 5.0),
                100.0,
            ))
        }
        _ => None,
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::invalid(key, format!("expected a boolean, got `{v}`"))),
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    v.parse::<T>()
        .map_err(|e| Error::invalid(key, format!("cannot parse `{v}`: {e}")))
}

/// Parses config text. Model parameters and `H0`, `I0`, `V0` are required;
/// everything else falls back to the defaults of the built-in scenarios.
pub fn parse_config(text: &str) -> Result<Scenario> {
    let mut seen = HashSet::new();
    let mut params = presets::set1();
    let mut sc = Scenario::with_defaults("custom", params, PointState::default(), 10.0);
    let mut profiles: [Option<Profile>; 3] = [None; 3];

    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
            line: line_no,
            msg: format!("expected key = value, got `{line}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if !seen.insert(key.to_string()) {
            return Err(Error::Config {
                line: line_no,
                msg: format!("duplicate key `{key}`"),
            });
        }
        if PARAM_KEYS.contains(&key) {
            params.set(key, parse_num(key, value)?)?;
            continue;
        }
        match key {
            "name" => sc.name = value.to_string(),
            "H0" | "I0" | "V0" => {
                let prof: Profile = value.parse().map_err(|e| Error::invalid(key, e))?;
                let slot = ["H0", "I0", "V0"].iter().position(|k| *k == key).unwrap();
                profiles[slot] = Some(prof);
            }
            "length" => sc.length = parse_num(key, value)?,
            "n_cells" => sc.n_cells = parse_num(key, value)?,
            "dt" => {
                sc.solver.dt = if value == "auto" {
                    TimeStep::Auto
                } else {
                    TimeStep::Fixed(parse_num(key, value)?)
                }
            }
            "t_end" => sc.solver.t_end = parse_num(key, value)?,
            "snapshot_stride" => {
                sc.solver.snapshot_stride = if value == "auto" {
                    None
                } else {
                    Some(parse_num(key, value)?)
                }
            }
            "positivity_clamp" => sc.solver.positivity_clamp = parse_bool(key, value)?,
            "cfl_safety" => sc.solver.cfl_safety = parse_num(key, value)?,
            "fail_on_violation" => sc.solver.fail_on_violation = parse_bool(key, value)?,
            "l_max" => sc.l_max = parse_num(key, value)?,
            "monitors" => {
                sc.monitors = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(MonitorKind::from_str)
                    .collect::<Result<_>>()?
            }
            _ => return Err(Error::UnknownKey(key.to_string())),
        }
    }

    for key in PARAM_KEYS {
        if !seen.contains(key) {
            return Err(Error::MissingKey(key.to_string()));
        }
    }
    let [h, i, v] = profiles;
    sc.init = InitialCondition {
        h: h.ok_or_else(|| Error::MissingKey("H0".into()))?,
        i: i.ok_or_else(|| Error::MissingKey("I0".into()))?,
        v: v.ok_or_else(|| Error::MissingKey("V0".into()))?,
    };
    sc.params = params;
    sc.validate()?;
    Ok(sc)
}

pub fn load_config(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

//! Experiment configuration: defaults, then a flat `key = value` file with
//! `[section]` headers, then command-line flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use toeplitz_core::projector::FhatKind;
use toeplitz_core::quantum::MAX_LEVEL;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Propagator,
    Projector,
    Lifts,
    Selftest,
}

impl Command {
    /// Commands that work on an energy level set and need a regular value.
    pub fn is_level_set(self) -> bool {
        matches!(self, Command::Projector | Command::Lifts)
    }
}

impl FromStr for Command {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "propagator" => Ok(Command::Propagator),
            "projector" => Ok(Command::Projector),
            "lifts" => Ok(Command::Lifts),
            "selftest" => Ok(Command::Selftest),
            other => Err(ConfigError(format!(
                "unknown command {other:?}; expected propagator, projector, lifts or selftest"
            ))),
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::Propagator => "propagator",
            Command::Projector => "projector",
            Command::Lifts => "lifts",
            Command::Selftest => "selftest",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(ConfigError(format!("unknown format {other:?}; expected csv or json"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SymbolChoice {
    ModelCos,
    /// Formula in `p`, `q` and optionally `t`.
    Expression(String),
}

impl FromStr for SymbolChoice {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "model-cos" => Ok(SymbolChoice::ModelCos),
            _ => match s.strip_prefix("expr:") {
                Some(e) if !e.trim().is_empty() => Ok(SymbolChoice::Expression(e.trim().to_string())),
                _ => Err(ConfigError(format!(
                    "unknown symbol {s:?}; use model-cos or expr:<formula in p, q, t>"
                ))),
            },
        }
    }
}

/// `A:STEP:B` with `STEP > 0` dividing `B − A`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub start: f64,
    pub step: f64,
    pub end: f64,
}

pub const MAX_GRID_POINTS: usize = 1_000_000;

impl TimeGrid {
    pub fn len(&self) -> usize {
        ((self.end - self.start) / self.step).round() as usize + 1
    }

    pub fn values(&self) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| if i + 1 == n { self.end } else { self.start + i as f64 * self.step })
            .collect()
    }
}

impl FromStr for TimeGrid {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let [a, h, b] = parts[..] else {
            return Err(ConfigError(format!("time grid {s:?} must have the form A:STEP:B")));
        };
        let start = parse_f64("tgrid start", a)?;
        let step = parse_f64("tgrid step", h)?;
        let end = parse_f64("tgrid end", b)?;
        if !(step > 0.0) {
            return Err(ConfigError(format!("time grid step must be positive, got {step}")));
        }
        if end < start {
            return Err(ConfigError(format!("time grid end {end} is before its start {start}")));
        }
        let count = (end - start) / step;
        if (count - count.round()).abs() > 1e-9 * count.max(1.0) {
            return Err(ConfigError(format!(
                "time grid step {step} does not divide the span {start}..{end}"
            )));
        }
        let grid = TimeGrid { start, step, end };
        if grid.len() > MAX_GRID_POINTS {
            return Err(ConfigError(format!(
                "time grid has {} points; the limit is {MAX_GRID_POINTS}",
                grid.len()
            )));
        }
        Ok(grid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FhatChoice {
    pub kind: FhatKind,
    pub support_t: f64,
}

impl FromStr for FhatChoice {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        let (kind, t) = s
            .split_once(':')
            .ok_or_else(|| ConfigError(format!("Fourier pair {s:?} must have the form bump:T or gaussian:T")))?;
        let kind: FhatKind = kind
            .trim()
            .parse()
            .map_err(|_| ConfigError(format!("unknown Fourier pair {kind:?}; expected bump or gaussian")))?;
        let support_t = parse_f64("support half-width T", t)?;
        if !(support_t > 0.0) {
            return Err(ConfigError(format!("support half-width T must be positive, got {support_t}")));
        }
        Ok(FhatChoice { kind, support_t })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn parse_f64(what: &str, s: &str) -> Result<f64, ConfigError> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| ConfigError(format!("{what}: {s:?} is not a number")))?;
    if !v.is_finite() {
        return Err(ConfigError(format!("{what} must be finite, got {s}")));
    }
    Ok(v)
}

pub fn parse_point(s: &str) -> Result<[f64; 2], ConfigError> {
    let parts: Vec<&str> = s.split(',').collect();
    let [p, q] = parts[..] else {
        return Err(ConfigError(format!("point {s:?} must have the form P,Q")));
    };
    Ok([parse_f64("p", p)?, parse_f64("q", q)?])
}

pub fn parse_levels(s: &str) -> Result<Vec<u32>, ConfigError> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<u32>()
                .map_err(|_| ConfigError(format!("k value {v:?} is not a positive integer")))
        })
        .collect()
}

/// Values as given, before defaults are applied.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub command: Option<Command>,
    pub levels: Option<Vec<u32>>,
    pub point: Option<[f64; 2]>,
    pub targets: Option<Vec<[f64; 2]>>,
    pub tgrid: Option<TimeGrid>,
    pub energy: Option<f64>,
    pub fhat: Option<FhatChoice>,
    pub symbol: Option<SymbolChoice>,
    pub max_step: Option<f64>,
    pub criteria: Option<Vec<String>>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

impl Overrides {
    /// Fields set in `other` replace those set here.
    pub fn merge(mut self, other: Overrides) -> Overrides {
        macro_rules! take {
            ($($f:ident),*) => {$(if other.$f.is_some() { self.$f = other.$f; })*};
        }
        take!(command, levels, point, targets, tgrid, energy, fhat, symbol, max_step, criteria, out, format);
        self
    }
}

const SECTIONS: &[(&str, &[&str])] = &[
    (
        "experiment",
        &["command", "k", "point", "target", "tgrid", "energy", "fhat", "symbol", "max_step", "criteria"],
    ),
    ("output", &["path", "format"]),
];

/// Parses the configuration text. Keys before the first header belong to
/// `[experiment]`; unknown sections, unknown keys and repeated keys are errors.
pub fn parse_config_text(text: &str, origin: &str) -> Result<Overrides, ConfigError> {
    let mut section = "experiment";
    let mut seen: BTreeMap<(String, String), usize> = BTreeMap::new();
    let mut out = Overrides::default();
    for (number, raw) in text.lines().enumerate() {
        let lineno = number + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = |msg: String| ConfigError(format!("{origin}:{lineno}: {msg}"));
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| at(format!("malformed section header {line:?}")))?
                .trim();
            section = SECTIONS
                .iter()
                .find(|(s, _)| *s == name)
                .map(|(s, _)| *s)
                .ok_or_else(|| at(format!("unknown section [{name}]; expected [experiment] or [output]")))?;
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| at(format!("expected key = value, got {line:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        let allowed = SECTIONS.iter().find(|(s, _)| *s == section).expect("known section").1;
        if !allowed.contains(&key) {
            return Err(at(format!(
                "unknown key {key:?} in [{section}]; allowed keys: {}",
                allowed.join(", ")
            )));
        }
        if let Some(prev) = seen.insert((section.to_string(), key.to_string()), lineno) {
            return Err(at(format!("key {key:?} already set on line {prev}")));
        }
        let wrap = |e: ConfigError| at(e.0);
        match (section, key) {
            ("experiment", "command") => out.command = Some(value.parse().map_err(wrap)?),
            ("experiment", "k") => out.levels = Some(parse_levels(value).map_err(wrap)?),
            ("experiment", "point") => out.point = Some(parse_point(value).map_err(wrap)?),
            ("experiment", "target") => {
                out.targets = Some(
                    value
                        .split(';')
                        .map(parse_point)
                        .collect::<Result<_, _>>()
                        .map_err(wrap)?,
                )
            }
            ("experiment", "tgrid") => out.tgrid = Some(value.parse().map_err(wrap)?),
            ("experiment", "energy") => out.energy = Some(parse_f64("energy", value).map_err(wrap)?),
            ("experiment", "fhat") => out.fhat = Some(value.parse().map_err(wrap)?),
            ("experiment", "symbol") => out.symbol = Some(value.parse().map_err(wrap)?),
            ("experiment", "max_step") => out.max_step = Some(parse_f64("max_step", value).map_err(wrap)?),
            ("experiment", "criteria") => {
                out.criteria = Some(value.split(',').map(|c| c.trim().to_string()).collect())
            }
            ("output", "path") => out.out = Some(PathBuf::from(value)),
            ("output", "format") => out.format = Some(value.parse().map_err(wrap)?),
            _ => unreachable!("key list and match arms agree"),
        }
    }
    Ok(out)
}

pub fn read_config_file(path: &Path) -> Result<Overrides, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read config file {}: {e}", path.display())))?;
    parse_config_text(&text, &path.display().to_string())
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub levels: Vec<u32>,
    pub point: [f64; 2],
    pub targets: Vec<[f64; 2]>,
    pub tgrid: TimeGrid,
    pub energy: Option<f64>,
    pub fhat: FhatChoice,
    pub symbol: SymbolChoice,
    pub max_step: f64,
    pub criteria: Option<Vec<String>>,
    pub out: Option<PathBuf>,
    pub format: Format,
}

pub const DEFAULT_LEVEL: u32 = 100;
pub const DEFAULT_POINT: [f64; 2] = [0.3, 0.1];
pub const DEFAULT_TGRID: TimeGrid = TimeGrid {
    start: 0.0,
    step: 0.01,
    end: 1.0,
};
pub const DEFAULT_FHAT: FhatChoice = FhatChoice {
    kind: FhatKind::Bump,
    support_t: 3.0,
};
pub const DEFAULT_MAX_STEP: f64 = 0.01;

/// Applies defaults to `given` and validates the result for `command`.
pub fn resolve(command: Command, given: Overrides) -> Result<ExperimentConfig, ConfigError> {
    if let Some(c) = given.command {
        if c != command {
            return Err(ConfigError(format!(
                "the configuration is for the {c} command but {command} was requested"
            )));
        }
    }
    let levels = given.levels.unwrap_or_else(|| vec![DEFAULT_LEVEL]);
    if levels.is_empty() {
        return Err(ConfigError("no k values given".into()));
    }
    for &k in &levels {
        if k == 0 || k > MAX_LEVEL {
            return Err(ConfigError(format!(
                "k = {k} is outside 1..={MAX_LEVEL}; larger levels lose double precision in the theta basis"
            )));
        }
    }
    let point = given.point.unwrap_or(DEFAULT_POINT);
    let targets = given.targets.unwrap_or_else(|| vec![point]);
    for (name, z) in std::iter::once(("point", point)).chain(targets.iter().map(|&t| ("target", t))) {
        if !(0.0..1.0).contains(&z[0]) || !(0.0..1.0).contains(&z[1]) {
            return Err(ConfigError(format!(
                "{name} ({}, {}) must lie in the fundamental cell [0,1)x[0,1)",
                z[0], z[1]
            )));
        }
        if command.is_level_set() && (z[1] == 0.0 || (z[1] - 0.5).abs() < 1e-9) {
            return Err(ConfigError(format!(
                "{name} q = {} is a critical level of cos(2 pi q) (q = 0 or 0.5): the {command} command needs 0 < q < 1 with q != 0.5",
                z[1]
            )));
        }
    }
    let max_step = given.max_step.unwrap_or(DEFAULT_MAX_STEP);
    if !(max_step > 0.0) {
        return Err(ConfigError(format!("max_step must be positive, got {max_step}")));
    }
    if let Some(c) = &given.criteria {
        for id in c {
            if !toeplitz_core::acceptance::CRITERIA.contains(&id.as_str()) {
                return Err(ConfigError(format!(
                    "unknown criterion {id:?}; expected one of {}",
                    toeplitz_core::acceptance::CRITERIA.join(", ")
                )));
            }
        }
    }
    Ok(ExperimentConfig {
        command,
        levels,
        point,
        targets,
        tgrid: given.tgrid.unwrap_or(DEFAULT_TGRID),
        energy: given.energy,
        fhat: given.fhat.unwrap_or(DEFAULT_FHAT),
        symbol: given.symbol.unwrap_or(SymbolChoice::ModelCos),
        max_step,
        criteria: given.criteria,
        out: given.out,
        format: given.format.unwrap_or(Format::Csv),
    })
}

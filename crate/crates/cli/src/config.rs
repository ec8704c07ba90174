//! Flat `key = value` experiment configs.
//!
//! One file per experiment, `#` comments, no sections. Values are kept as the
//! text the user wrote, so a config survives write/read unchanged; typed
//! access goes through [`Params`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("unknown key `{key}` for {context}")]
    UnknownKey { key: String, context: String },
    #[error("key `{key}`: cannot parse `{value}` as {expected}")]
    Value { key: String, value: String, expected: &'static str },
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("key `{key}` given twice")]
    Duplicate { key: String },
    #[error("missing `subcommand`")]
    MissingSubcommand,
    #[error("unknown subcommand `{0}`")]
    UnknownSubcommand(String),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

/// Value types accepted by a schema entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Real,
    Int,
    Bool,
    Text,
    /// Comma-separated reals.
    Reals,
    /// Comma-separated non-negative integers.
    Ints,
    /// `start:stop:points`.
    Range,
}

impl Kind {
    fn describe(self) -> &'static str {
        match self {
            Self::Real => "a real number",
            Self::Int => "a non-negative integer",
            Self::Bool => "true or false",
            Self::Text => "text",
            Self::Reals => "a comma-separated list of reals",
            Self::Ints => "a comma-separated list of non-negative integers",
            Self::Range => "start:stop:points",
        }
    }

    fn check(self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = || ConfigError::Value { key: key.into(), value: value.into(), expected: self.describe() };
        let ok = match self {
            Self::Real => parse_real(value).is_some(),
            Self::Int => value.trim().parse::<u64>().is_ok(),
            Self::Bool => matches!(value.trim(), "true" | "false"),
            Self::Text => !value.trim().is_empty(),
            Self::Reals => split_list(value).all(|v| parse_real(v).is_some()),
            Self::Ints => split_list(value).all(|v| v.parse::<u64>().is_ok()),
            Self::Range => parse_range(value).is_some(),
        };
        if ok { Ok(()) } else { Err(bad()) }
    }
}

fn parse_real(s: &str) -> Option<f64> {
    match s.trim() {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        t => t.parse::<f64>().ok().filter(|v| v.is_finite()),
    }
}

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim)
}

fn parse_range(s: &str) -> Option<(f64, f64, usize)> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    if parts.len() != 3 {
        return None;
    }
    let n: usize = parts[2].parse().ok()?;
    Some((parse_real(parts[0])?, parse_real(parts[1])?, n)).filter(|_| n >= 1)
}

/// One allowed key with its type and default.
#[derive(Debug, Clone, Copy)]
pub struct Field {
    pub key: &'static str,
    pub kind: Kind,
    pub default: &'static str,
}

pub const fn field(key: &'static str, kind: Kind, default: &'static str) -> Field {
    Field { key, kind, default }
}

/// Validated key-value map over a fixed schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Params {
    context: String,
    kinds: BTreeMap<String, Kind>,
    values: BTreeMap<String, String>,
}

impl Params {
    pub fn new(context: impl Into<String>, schema: &[Field]) -> Self {
        let kinds = schema.iter().map(|f| (f.key.to_string(), f.kind)).collect();
        let values = schema.iter().map(|f| (f.key.to_string(), f.default.to_string())).collect();
        Self { context: context.into(), kinds, values }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let kind = *self
            .kinds
            .get(key)
            .ok_or_else(|| ConfigError::UnknownKey { key: key.into(), context: self.context.clone() })?;
        kind.check(key, value)?;
        self.values.insert(key.into(), value.trim().to_string());
        Ok(())
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("`{key}` not in the {} schema", self.context))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn real(&self, key: &str) -> f64 {
        parse_real(self.raw(key)).expect("validated on set")
    }

    pub fn int(&self, key: &str) -> u64 {
        self.raw(key).parse().expect("validated on set")
    }

    pub fn usize(&self, key: &str) -> usize {
        self.int(key) as usize
    }

    pub fn flag(&self, key: &str) -> bool {
        self.raw(key) == "true"
    }

    pub fn text(&self, key: &str) -> &str {
        self.raw(key)
    }

    pub fn reals(&self, key: &str) -> Vec<f64> {
        split_list(self.raw(key)).map(|v| parse_real(v).expect("validated on set")).collect()
    }

    pub fn ints(&self, key: &str) -> Vec<u64> {
        split_list(self.raw(key)).map(|v| v.parse().expect("validated on set")).collect()
    }

    /// Raw `(start, stop, points)` of a range key.
    pub fn range(&self, key: &str) -> (f64, f64, usize) {
        parse_range(self.raw(key)).expect("validated on set")
    }

    /// Uniformly spaced values of a range key.
    pub fn linspace(&self, key: &str) -> Vec<f64> {
        let (a, b, n) = self.range(key);
        if n == 1 {
            return vec![a];
        }
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Subcommand {
    Validate,
    Returnmap,
    Loops,
    Rank,
    Morse,
    Modes,
    Quasimode,
    Lattice,
    Scaling,
    Frames,
}

impl Subcommand {
    pub const ALL: [Subcommand; 10] = [
        Self::Validate,
        Self::Returnmap,
        Self::Loops,
        Self::Rank,
        Self::Morse,
        Self::Modes,
        Self::Quasimode,
        Self::Lattice,
        Self::Scaling,
        Self::Frames,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Validate => "validate",
            Self::Returnmap => "returnmap",
            Self::Loops => "loops",
            Self::Rank => "rank",
            Self::Morse => "morse",
            Self::Modes => "modes",
            Self::Quasimode => "quasimode",
            Self::Lattice => "lattice",
            Self::Scaling => "scaling",
            Self::Frames => "frames",
        }
    }

    pub fn schema(self) -> Vec<Field> {
        use Kind::*;
        let system = [
            field("system.name", Text, "sor"),
            field("system.params.profile", Text, "sphere"),
            field("system.params.liouville", Reals, "3,0.5,1,0.3"),
            field("system.params.axes", Reals, "3,2,1"),
            field("system.params.n", Int, "3"),
            field("system.params.momenta", Ints, "2,3"),
            field("point.x", Reals, "0.7,0"),
        ];
        let h_grid = [field("h_grid", Range, "5e-2:2e-3:16"), field("jitter_seed", Text, "2024")];
        let mut fields = vec![field("seed", Int, "2024"), field("output", Text, "qci-out")];
        match self {
            Self::Validate => fields.push(field("profile", Text, "sphere")),
            Self::Returnmap => fields.extend([
                field("profile", Text, "sphere"),
                field("psi", Range, "0.2:1.4:16"),
                field("tol", Real, "1e-10"),
                field("s_max", Real, "100"),
                field("q_max", Int, "50"),
                field("eps", Real, "1e-6"),
            ]),
            Self::Loops => fields.extend([
                field("profile", Text, "sphere"),
                field("t", Real, "0.5"),
                field("phi", Real, "0"),
                field("theta", Range, "0.1:3.0:8"),
                field("delta", Real, "1e-3"),
                field("s_max", Real, "50"),
            ]),
            Self::Rank => {
                fields.extend(system);
                fields.extend([
                    field("scan.samples", Int, "360"),
                    field("scan.tol", Real, "1e-8"),
                    field("scan.mode", Text, "tangential"),
                ]);
            }
            Self::Morse => {
                fields.extend(system);
                fields.extend([
                    field("morse.coeffs", Reals, "0,1"),
                    field("morse.grid", Int, "720"),
                    field("morse.tol", Real, "1e-6"),
                ]);
            }
            Self::Modes => fields.extend([
                field("profile", Text, "sphere"),
                field("m", Ints, "0,1,2,5,10"),
                field("grid_n", Int, "2000"),
                field("count", Int, "4"),
            ]),
            Self::Quasimode => fields.extend([
                field("profile", Text, "sphere"),
                field("lambdas", Reals, "50,75,112,169,253,380"),
            ]),
            Self::Lattice => {
                fields.extend([
                    field("action", Text, "fit"),
                    field("n", Int, "3"),
                    field("frame", Text, "P"),
                    field("energy", Reals, "1,1,0"),
                    field("c1", Real, "1"),
                    field("c2", Real, "1"),
                    field("oracle", Bool, "false"),
                ]);
                fields.extend(h_grid);
            }
            Self::Scaling => fields.extend([
                field("family", Text, "highest-weight"),
                field("profile", Text, "sphere"),
                field("m", Ints, "20,30,45,67,100,150,225"),
                field("lambdas", Reals, "50,75,112,169,253,380"),
            ]),
            Self::Frames => {
                fields.push(field("n", Int, "3"));
                fields.extend(h_grid);
            }
        }
        fields
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Subcommand {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s.trim())
            .ok_or_else(|| ConfigError::UnknownSubcommand(s.trim().to_string()))
    }
}

/// A subcommand together with its validated parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentConfig {
    pub subcommand: Subcommand,
    pub params: Params,
}

impl ExperimentConfig {
    /// Defaults for `subcommand`.
    pub fn new(subcommand: Subcommand) -> Self {
        Self { subcommand, params: Params::new(subcommand.name(), &subcommand.schema()) }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<&mut Self, ConfigError> {
        self.params.set(key, value)?;
        Ok(self)
    }

    pub fn seed(&self) -> u64 {
        self.params.int("seed")
    }

    pub fn output(&self) -> PathBuf {
        PathBuf::from(self.params.text("output"))
    }

    /// Parses the file format; keys absent from the text keep their defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let pairs = parse_pairs(text)?;
        let sub = pairs
            .iter()
            .find(|(k, _)| k == "subcommand")
            .ok_or(ConfigError::MissingSubcommand)?
            .1
            .parse::<Subcommand>()?;
        let mut cfg = Self::new(sub);
        for (k, v) in pairs.iter().filter(|(k, _)| k != "subcommand") {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::parse(&text)
    }

    /// Every key, defaults included, in sorted order after `subcommand`.
    pub fn to_text(&self) -> String {
        let mut s = format!("subcommand = {}\n", self.subcommand);
        for (k, v) in self.params.iter() {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }
}

/// `key = value` lines, skipping blanks and `#` comments.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax { line: i + 1, text: line.to_string() })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(ConfigError::Syntax { line: i + 1, text: line.to_string() });
        }
        if out.iter().any(|(seen, _)| seen == k) {
            return Err(ConfigError::Duplicate { key: k.to_string() });
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

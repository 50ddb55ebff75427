//! Option values shared by flags, environment variables and the config file.
//!
//! Every command field is optional at parse time; a value given on the
//! command line (or through its `SUBGRAPHX_*` variable) wins over the
//! config file, which wins over the built-in default.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::Context;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A count that may also be unbounded (`inf`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Limit {
    Finite(usize),
    Unbounded,
}

impl Limit {
    pub fn finite(self) -> Option<usize> {
        match self {
            Limit::Finite(n) => Some(n),
            Limit::Unbounded => None,
        }
    }
}

impl FromStr for Limit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "inf" | "all" | "unlimited" => Ok(Limit::Unbounded),
            _ => s
                .parse()
                .map(Limit::Finite)
                .map_err(|_| format!("expected a non-negative integer or `inf`, got {s:?}")),
        }
    }
}

impl fmt::Display for Limit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Limit::Finite(n) => write!(f, "{n}"),
            Limit::Unbounded => f.write_str("inf"),
        }
    }
}

impl Serialize for Limit {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Limit::Finite(n) => s.serialize_u64(*n as u64),
            Limit::Unbounded => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Limit {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(n) => Ok(Limit::Finite(n as usize)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Comma-separated list, also accepted as a TOML array.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: fmt::Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(|p| p.parse().map_err(|e| format!("{p:?}: {e}")))
            .collect::<Result<_, _>>()
            .map(List)
    }
}

impl<'de, T> Deserialize<'de> for List<T>
where
    T: FromStr + Deserialize<'de>,
    T::Err: fmt::Display,
{
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw<T> {
            Items(Vec<T>),
            Text(String),
        }
        match Raw::<T>::deserialize(d)? {
            Raw::Items(v) => Ok(List(v)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Config file layout: one optional table per command plus `workers`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub workers: Option<usize>,
    #[serde(default)]
    pub gen: crate::gen::GenArgs,
    #[serde(default)]
    pub train: crate::train::TrainArgs,
    #[serde(default)]
    pub predict: crate::predict::PredictArgs,
    #[serde(default)]
    pub explain: crate::explain::ExplainArgs,
    #[serde(default)]
    pub eval: crate::eval::EvalArgs,
}

impl ConfigFile {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Fills every unset field of `self` from `fallback`.
pub trait Merge {
    fn merge(self, fallback: Self) -> Self;
}

/// Implements [`Merge`] for a struct whose listed fields are all `Option`s.
#[macro_export]
macro_rules! merge_fields {
    ($ty:ty { $($field:ident),* $(,)? }) => {
        impl $crate::settings::Merge for $ty {
            fn merge(self, fallback: Self) -> Self {
                Self { $($field: self.$field.or(fallback.$field)),* }
            }
        }
    };
}

/// Bad invocation rather than a failed run; reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

pub fn require<T>(value: Option<T>, flag: &str) -> anyhow::Result<T> {
    value.ok_or_else(|| usage(format!("missing required option --{flag}")))
}

/// FNV-1a over bytes.
pub fn fnv64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// [`fnv64`] printed as 16 hex digits.
pub fn fingerprint_bytes(bytes: &[u8]) -> String {
    format!("{:016x}", fnv64(bytes))
}

//! Flat `key = value` run configuration.
//!
//! Keys are flag names without the leading dashes. A value given on the
//! command line wins over the file, which wins over the built-in default.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use clap::ValueEnum;

use crate::failure::Failure;

#[derive(Debug, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
    used: RefCell<BTreeSet<String>>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, Failure> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Failure::Usage(format!("config line {}: expected key = value", lineno + 1)))?;
            let key = key.trim().trim_start_matches("--").to_string();
            if values.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(Failure::Usage(format!("config line {}: duplicate key {key}", lineno + 1)));
            }
        }
        Ok(Self {
            values,
            used: RefCell::default(),
        })
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.used.borrow_mut().insert(key.to_string());
        self.values.get(key).map(String::as_str)
    }

    pub fn opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, Failure>
    where
        T::Err: Display,
    {
        let from_file = self.raw(key);
        if flag.is_some() {
            return Ok(flag);
        }
        from_file
            .map(|v| v.parse().map_err(|e| Failure::Usage(format!("config {key} = {v}: {e}"))))
            .transpose()
    }

    pub fn get<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, Failure>
    where
        T::Err: Display,
    {
        Ok(self.opt(flag, key)?.unwrap_or(default))
    }

    pub fn choice<T: ValueEnum>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, Failure> {
        let from_file = self.raw(key);
        if let Some(v) = flag {
            return Ok(v);
        }
        match from_file {
            Some(v) => T::from_str(v, true).map_err(|e| Failure::Usage(format!("config {key} = {v}: {e}"))),
            None => Ok(default),
        }
    }

    /// A switch is on when given on the command line or set to `true` in the file.
    pub fn switch(&self, flag: bool, key: &str) -> Result<bool, Failure> {
        let from_file = self.opt::<bool>(None, key)?;
        Ok(flag || from_file.unwrap_or(false))
    }

    /// Rejects keys that no flag of the command consumed.
    pub fn finish(&self) -> Result<(), Failure> {
        let used = self.used.borrow();
        let unknown: Vec<&String> = self.values.keys().filter(|k| !used.contains(*k)).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Failure::Usage(format!(
                "config keys not accepted by this command: {}",
                unknown.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(", ")
            )))
        }
    }
}

/// Comma list of counts; `a,b,...,c` expands the arithmetic progression.
#[derive(Debug, Clone, PartialEq)]
pub struct CountList(pub Vec<usize>);

impl FromStr for CountList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let mut out: Vec<usize> = Vec::new();
        let mut i = 0;
        while i < parts.len() {
            if parts[i] == "..." {
                let (Some(&a), Some(&b)) = (out.len().checked_sub(2).map(|k| &out[k]), out.last()) else {
                    return Err("'...' needs two values before it".into());
                };
                let end: usize = parts
                    .get(i + 1)
                    .ok_or("'...' needs an end value")?
                    .parse()
                    .map_err(|e| format!("bad end value: {e}"))?;
                if b <= a || end < b || !(end - b).is_multiple_of(b - a) {
                    return Err(format!("'{a},{b},...,{end}' is not an increasing progression"));
                }
                let mut v = b + (b - a);
                while v <= end {
                    out.push(v);
                    v += b - a;
                }
                i += 2;
                continue;
            }
            out.push(parts[i].parse().map_err(|e| format!("bad count '{}': {e}", parts[i]))?);
            i += 1;
        }
        if out.is_empty() {
            return Err("empty list".into());
        }
        Ok(Self(out))
    }
}

/// Comma list of reals.
#[derive(Debug, Clone, PartialEq)]
pub struct RealList(pub Vec<f64>);

impl FromStr for RealList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let v: Result<Vec<f64>, _> = s.split(',').map(|p| p.trim().parse::<f64>()).collect();
        match v {
            Ok(v) if !v.is_empty() && v.iter().all(|x| x.is_finite()) => Ok(Self(v)),
            Ok(_) => Err("need finite values".into()),
            Err(e) => Err(e.to_string()),
        }
    }
}

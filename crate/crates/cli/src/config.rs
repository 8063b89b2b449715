//! Option resolution: flags override `key = value` lines from an optional
//! config file; command defaults fill whatever remains.

use crate::Failure;
use dyadic_density::KernelFamily;
use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Keys a config file may set; anything else is rejected as a typo.
const KNOWN_KEYS: &[&str] = &[
    "input",
    "covariates",
    "domain",
    "grid",
    "kernel",
    "p",
    "p-prime",
    "alpha",
    "b",
    "seed",
    "trade",
    "bandwidth",
    "ridge",
    "out",
    "stat",
    "n",
    "reps",
    "full-scale",
];

/// Parsed config file plus the precedence logic. Values repeat per key in
/// file order; scalar lookups take the last one, `input` keeps them all.
pub struct Resolver {
    map: HashMap<String, Vec<String>>,
}

impl Resolver {
    pub fn new(path: Option<&Path>) -> Result<Self, Failure> {
        let mut map: HashMap<String, Vec<String>> = HashMap::new();
        if let Some(p) = path {
            let text = fs::read_to_string(p)
                .map_err(|e| Failure::Usage(format!("config {}: {e}", p.display())))?;
            for (idx, raw) in text.lines().enumerate() {
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or_else(|| {
                    Failure::Usage(format!(
                        "config {} line {}: expected key = value",
                        p.display(),
                        idx + 1
                    ))
                })?;
                let key = k.trim().to_ascii_lowercase().replace('_', "-");
                let val = v.trim().to_string();
                if !KNOWN_KEYS.contains(&key.as_str()) {
                    return Err(Failure::Usage(format!(
                        "config {} line {}: unknown key {:?}",
                        p.display(),
                        idx + 1,
                        k.trim()
                    )));
                }
                if val.is_empty() {
                    return Err(Failure::Usage(format!(
                        "config {} line {}: empty value for {key}",
                        p.display(),
                        idx + 1
                    )));
                }
                map.entry(key).or_default().push(val);
            }
        }
        Ok(Self { map })
    }

    fn last(&self, key: &str) -> Option<&str> {
        self.map.get(key).and_then(|v| v.last()).map(String::as_str)
    }

    /// CLI value if given, else the config value parsed as `T`.
    pub fn scalar<T: FromStr>(&self, cli: Option<T>, key: &str) -> Result<Option<T>, Failure> {
        if cli.is_some() {
            return Ok(cli);
        }
        match self.last(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| Failure::Usage(format!("config key {key}: cannot parse {raw:?}"))),
        }
    }

    /// Boolean switch: set on the command line, or truthy in the config.
    pub fn flag(&self, cli: bool, key: &str) -> Result<bool, Failure> {
        if cli {
            return Ok(true);
        }
        match self.last(key) {
            None => Ok(false),
            Some(raw) => parse_bool(raw).ok_or_else(|| {
                Failure::Usage(format!("config key {key}: expected a boolean, got {raw:?}"))
            }),
        }
    }

    pub fn path(&self, cli: Option<PathBuf>, key: &str) -> Option<PathBuf> {
        cli.or_else(|| self.last(key).map(PathBuf::from))
    }

    /// All input paths: the repeated flag wins over repeated config lines.
    pub fn inputs(&self, cli: &[PathBuf]) -> Vec<PathBuf> {
        if !cli.is_empty() {
            return cli.to_vec();
        }
        self.map
            .get("input")
            .map(|v| v.iter().map(PathBuf::from).collect())
            .unwrap_or_default()
    }

    pub fn domain(&self, cli: Option<(f64, f64)>) -> Result<Option<(f64, f64)>, Failure> {
        if cli.is_some() {
            return Ok(cli);
        }
        self.last("domain")
            .map(|raw| {
                parse_domain(raw).map_err(|e| Failure::Usage(format!("config key domain: {e}")))
            })
            .transpose()
    }

    pub fn kernel(&self, cli: Option<&str>) -> Result<Option<KernelFamily>, Failure> {
        let name = match cli {
            Some(s) => Some(s),
            None => self.last("kernel"),
        };
        name.map(|s| s.parse().map_err(|e: dyadic_density::Error| Failure::Usage(e.to_string())))
            .transpose()
    }
}

/// "a,b" with finite endpoints and a < b.
pub fn parse_domain(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected two comma-separated endpoints, got {s:?}"));
    }
    let a: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|_| format!("cannot parse endpoint {:?}", parts[0].trim()))?;
    let b: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|_| format!("cannot parse endpoint {:?}", parts[1].trim()))?;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(format!("endpoints must be finite with a < b, got {s:?}"));
    }
    Ok((a, b))
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Some(true),
        "false" | "0" | "no" | "off" => Some(false),
        _ => None,
    }
}

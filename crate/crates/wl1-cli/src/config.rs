//! Settings merged from an optional key=value file and command-line flags.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;
use std::sync::Mutex;

use wl1::{Role, ShapeFunction};

use crate::CliError;

/// Keys accepted in a config file; the same names as the long flags.
pub const KEYS: &[&str] = &[
    "alpha",
    "m",
    "n",
    "r",
    "rho",
    "c",
    "delta",
    "tau",
    "trials",
    "seed",
    "out",
    "workers",
    "mode",
    "prob",
    "weight",
    "criterion",
    "omit-timing",
    "samples",
    "kind",
    "quad-points",
    "records",
    "rho-grid",
    "x-grid",
    "delta-tol",
];

// Where output goes and how many threads compute it never changes the output.
const NOT_ECHOED: &[&str] = &["out", "workers", "records"];

const MAX_LIST: usize = 100_000;

pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Config(format!("cannot read config file {}: {e}", path.display()))
    })?;
    parse_config_text(&text)
}

pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::Config(format!("config line {}: expected key=value", no + 1))
        })?;
        let k = k.trim().trim_start_matches("--");
        if !KEYS.contains(&k) {
            return Err(CliError::Config(format!(
                "config line {}: unknown key `{k}`",
                no + 1
            )));
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub struct Settings {
    raw: BTreeMap<String, String>,
    echo: Mutex<BTreeMap<String, String>>,
}

impl Settings {
    /// Flags override file entries.
    pub fn new(file: BTreeMap<String, String>, flags: BTreeMap<String, String>) -> Self {
        let mut raw = file;
        raw.extend(flags);
        Settings {
            raw,
            echo: Mutex::new(BTreeMap::new()),
        }
    }

    fn record(&self, key: &str, value: &str) {
        if !NOT_ECHOED.contains(&key) {
            self.echo
                .lock()
                .unwrap()
                .insert(key.to_string(), value.to_string());
        }
    }

    pub fn has(&self, key: &str) -> bool {
        self.raw.contains_key(key)
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let v = self.raw.get(key).cloned();
        if let Some(v) = &v {
            self.record(key, v);
        }
        v
    }

    pub fn str_or(&self, key: &str, default: &str) -> String {
        let v = self
            .raw
            .get(key)
            .cloned()
            .unwrap_or_else(|| default.to_string());
        self.record(key, &v);
        v
    }

    pub fn flag(&self, key: &str) -> Result<bool, CliError> {
        let v = self.str_or(key, "false");
        match v.as_str() {
            "true" | "1" | "yes" | "" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            _ => Err(CliError::Config(format!(
                "--{key}: expected a boolean, got `{v}`"
            ))),
        }
    }

    pub fn parse<T: FromStr>(&self, key: &str, default: Option<&str>) -> Result<T, CliError> {
        let v = match (self.raw.get(key), default) {
            (Some(v), _) => v.clone(),
            (None, Some(d)) => d.to_string(),
            (None, None) => return Err(CliError::Config(format!("--{key} is required"))),
        };
        self.record(key, &v);
        v.trim()
            .parse()
            .map_err(|_| CliError::Config(format!("--{key}: cannot parse `{v}`")))
    }

    pub fn f64_list(&self, key: &str, default: Option<&str>) -> Result<Vec<f64>, CliError> {
        let v = self.list_text(key, default)?;
        parse_f64_list(&v).map_err(|e| CliError::Config(format!("--{key}: {e}")))
    }

    pub fn usize_list(&self, key: &str, default: Option<&str>) -> Result<Vec<usize>, CliError> {
        let v = self.list_text(key, default)?;
        parse_usize_list(&v).map_err(|e| CliError::Config(format!("--{key}: {e}")))
    }

    fn list_text(&self, key: &str, default: Option<&str>) -> Result<String, CliError> {
        match (self.raw.get(key), default) {
            (Some(v), _) => {
                self.record(key, v);
                Ok(v.clone())
            }
            (None, Some(d)) => Ok(self.str_or(key, d)),
            (None, None) => Err(CliError::Config(format!("--{key} is required"))),
        }
    }

    pub fn echo(&self) -> Vec<(String, String)> {
        self.echo
            .lock()
            .unwrap()
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }
}

/// A comma-separated list whose items are numbers or inclusive ranges `start:step:stop`.
pub fn parse_f64_list(s: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| format!("`{t}` is not a number"))
        };
        match parts.as_slice() {
            [v] => out.push(num(v)?),
            [a, step, b] => {
                let (a, step, b) = (num(a)?, num(step)?, num(b)?);
                if !(step > 0.0) || !(b >= a) || !a.is_finite() || !b.is_finite() {
                    return Err(format!("bad range `{item}`"));
                }
                let count = ((b - a) / step + 1e-9).floor() as usize + 1;
                if count > MAX_LIST {
                    return Err(format!("range `{item}` has too many points"));
                }
                // keep 0.6 from printing as 0.6000000000000001
                out.extend((0..count).map(|i| ((a + i as f64 * step) * 1e12).round() / 1e12));
            }
            _ => return Err(format!("bad list item `{item}`")),
        }
        if out.len() > MAX_LIST {
            return Err("list is too long".into());
        }
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err("values must be finite".into());
    }
    Ok(out)
}

pub fn parse_usize_list(s: &str) -> Result<Vec<usize>, String> {
    parse_f64_list(s)?
        .into_iter()
        .map(|v| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(format!("`{v}` is not a count"))
            }
        })
        .collect()
}

/// `auto` or a number, for the weight tilt of empirical runs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RhoChoice {
    Value(f64),
    Auto,
}

pub fn parse_rho_choices(s: &str) -> Result<Vec<RhoChoice>, String> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        if item == "auto" {
            out.push(RhoChoice::Auto);
        } else {
            out.extend(parse_f64_list(item)?.into_iter().map(RhoChoice::Value));
        }
    }
    Ok(out)
}

pub fn shape(s: &Settings, key: &str, role: Role) -> Result<Option<ShapeFunction<f64>>, CliError> {
    match s.get(key) {
        Some(spec) => Ok(Some(ShapeFunction::parse(&spec, role)?)),
        None => Ok(None),
    }
}

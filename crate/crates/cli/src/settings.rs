//! Experiment settings: defaults, then the config file, then flags.
//!
//! The config file is flat `key = value` text. `[section]` headers group keys
//! for readability; a key may appear under any section. `#` and `;` start
//! comments.

use std::collections::BTreeMap;
use std::path::Path;

use desynclab::analytic::PcoIndexMode;
use desynclab::params::{DEFAULT_C_CONF, DEFAULT_MISFIRE_PROB};
use desynclab::sim::{DEFAULT_DETECTION_WINDOW, DEFAULT_MAX_CYCLES};
use desynclab::{Protocol, ProtocolParams};

use crate::CliError;

pub const KNOWN_KEYS: &[&str] = &[
    "protocol",
    "w",
    "alpha",
    "b_thres",
    "c_conf",
    "sigma_delta_ms",
    "period_s",
    "misfire",
    "trials",
    "seed",
    "max_cycles",
    "detection_window",
    "pco_index_mode",
];

/// Raw string values, keyed by canonical name (dashes folded to underscores).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawSettings {
    values: BTreeMap<String, String>,
}

impl RawSettings {
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(canonical(key), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Later values win.
    pub fn merge(mut self, over: RawSettings) -> RawSettings {
        self.values.extend(over.values);
        self
    }
}

fn canonical(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

pub fn parse_config(text: &str, origin: &str) -> Result<RawSettings, CliError> {
    let mut out = RawSettings::default();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            if !line.ends_with(']') || line.len() < 3 {
                return Err(CliError::usage(format!(
                    "{origin}:{line_no}: malformed section header '{line}'"
                )));
            }
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::usage(format!(
                "{origin}:{line_no}: expected key = value, found '{line}'"
            )));
        };
        let key = canonical(key);
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(CliError::usage(format!(
                "{origin}:{line_no}: unknown key '{key}'"
            )));
        }
        let value = value.trim();
        if value.is_empty() {
            return Err(CliError::usage(format!(
                "{origin}:{line_no}: empty value for '{key}'"
            )));
        }
        out.set(&key, value);
    }
    Ok(out)
}

pub fn load_config(path: &Path) -> Result<RawSettings, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text, &path.display().to_string())
}

/// Fully resolved settings for a grid of cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub protocols: Vec<Protocol>,
    pub ws: Vec<usize>,
    pub alphas: Vec<f64>,
    pub b_thres: Vec<f64>,
    pub c_conf: f64,
    pub sigma_delta_ms: f64,
    pub period_s: f64,
    pub misfire: f64,
    pub trials: usize,
    pub seed: u64,
    pub max_cycles: usize,
    pub detection_window: usize,
    pub pco_index_mode: PcoIndexMode,
}

impl Settings {
    pub fn resolve(raw: &RawSettings) -> Result<Settings, CliError> {
        let s = Settings {
            protocols: list(raw, "protocol", "desync,pco", |v| v.parse::<Protocol>())?,
            ws: list(raw, "w", "4,8,16", |v| {
                v.parse::<usize>().map_err(|e| e.to_string())
            })?,
            alphas: parse_alpha(raw.get("alpha").unwrap_or("0.05:0.95:0.10"))?,
            b_thres: list(raw, "b_thres", "0.001,0.020", parse_f64)?,
            c_conf: scalar(raw, "c_conf", DEFAULT_C_CONF, parse_f64)?,
            sigma_delta_ms: scalar(raw, "sigma_delta_ms", 0.34, parse_f64)?,
            period_s: scalar(raw, "period_s", 1.0, parse_f64)?,
            misfire: scalar(raw, "misfire", DEFAULT_MISFIRE_PROB, parse_f64)?,
            trials: scalar(raw, "trials", 50, |v| {
                v.parse::<usize>().map_err(|e| e.to_string())
            })?,
            seed: scalar(raw, "seed", 1, |v| {
                v.parse::<u64>().map_err(|e| e.to_string())
            })?,
            max_cycles: scalar(raw, "max_cycles", DEFAULT_MAX_CYCLES, |v| {
                v.parse::<usize>().map_err(|e| e.to_string())
            })?,
            detection_window: scalar(raw, "detection_window", DEFAULT_DETECTION_WINDOW, |v| {
                v.parse::<usize>().map_err(|e| e.to_string())
            })?,
            pco_index_mode: scalar(raw, "pco_index_mode", PcoIndexMode::Cycle, |v| {
                v.parse::<PcoIndexMode>()
            })?,
        };
        for p in s.cell_params() {
            p.validate().map_err(|e| CliError::usage(e.to_string()))?;
        }
        Ok(s)
    }

    pub fn params(&self, w: usize, alpha: f64, b: f64) -> ProtocolParams {
        ProtocolParams::new(w, alpha, b)
            .with_c_conf(self.c_conf)
            .with_period(self.period_s)
            .with_sigma_delta_s(self.sigma_delta_ms / 1000.0)
            .with_misfire_prob(self.misfire)
    }

    /// Every (W, alpha, b) combination, sorted by b, then W, then alpha.
    pub fn cell_params(&self) -> Vec<ProtocolParams> {
        let mut bs = self.b_thres.clone();
        bs.sort_by(f64::total_cmp);
        let mut ws = self.ws.clone();
        ws.sort_unstable();
        let mut alphas = self.alphas.clone();
        alphas.sort_by(f64::total_cmp);
        let mut out = Vec::new();
        for &b in &bs {
            for &w in &ws {
                for &a in &alphas {
                    out.push(self.params(w, a, b));
                }
            }
        }
        out
    }

    /// `(protocol, params)` for every cell, protocols in sorted order.
    pub fn cells(&self) -> Vec<(Protocol, ProtocolParams)> {
        let mut protocols = self.protocols.clone();
        protocols.sort();
        protocols.dedup();
        protocols
            .iter()
            .flat_map(|&p| self.cell_params().into_iter().map(move |c| (p, c)))
            .collect()
    }
}

fn parse_f64(v: &str) -> Result<f64, String> {
    v.trim().parse::<f64>().map_err(|e| format!("'{v}': {e}"))
}

fn scalar<T>(
    raw: &RawSettings,
    key: &str,
    default: T,
    parse: impl Fn(&str) -> Result<T, String>,
) -> Result<T, CliError> {
    match raw.get(key) {
        None => Ok(default),
        Some(v) => parse(v.trim()).map_err(|e| CliError::usage(format!("invalid {key}: {e}"))),
    }
}

fn list<T>(
    raw: &RawSettings,
    key: &str,
    default: &str,
    parse: impl Fn(&str) -> Result<T, String>,
) -> Result<Vec<T>, CliError> {
    let text = raw.get(key).unwrap_or(default);
    let items: Vec<T> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(s).map_err(|e| CliError::usage(format!("invalid {key}: {e}"))))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(CliError::usage(format!("{key} needs at least one value")));
    }
    Ok(items)
}

/// A single value, a comma list, or an inclusive `start:stop:step` range.
pub fn parse_alpha(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = |msg: String| CliError::usage(format!("invalid alpha: {msg}"));
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let fields: Vec<&str> = part.split(':').collect();
        match fields.as_slice() {
            [one] => out.push(parse_f64(one).map_err(bad)?),
            [a, b, step] => {
                let (a, b, step) = (
                    parse_f64(a).map_err(bad)?,
                    parse_f64(b).map_err(bad)?,
                    parse_f64(step).map_err(bad)?,
                );
                if !(step > 0.0) || b < a {
                    return Err(bad(format!(
                        "range '{part}' needs start <= stop and step > 0"
                    )));
                }
                let n = ((b - a) / step + 1e-9).floor() as usize;
                // round away binary noise so 0.05 + 2 * 0.1 prints as 0.25
                out.extend((0..=n).map(|i| ((a + i as f64 * step) * 1e12).round() / 1e12));
            }
            _ => {
                return Err(bad(format!(
                    "'{part}' is neither a value nor start:stop:step"
                )))
            }
        }
    }
    if out.is_empty() {
        return Err(bad("no values".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_forms() {
        assert_eq!(parse_alpha("0.5").unwrap(), vec![0.5]);
        assert_eq!(parse_alpha("0.1, 0.3").unwrap(), vec![0.1, 0.3]);
        let grid = parse_alpha("0.05:0.95:0.10").unwrap();
        assert_eq!(grid.len(), 10);
        assert_eq!(grid[2], 0.25);
        assert_eq!(grid[9], 0.95);
        assert!(parse_alpha("0.9:0.1:0.1").is_err());
        assert!(parse_alpha("a").is_err());
    }

    #[test]
    fn config_sections_comments_and_errors() {
        let text =
            "# experiment\n[grid]\nw = 4, 8\nalpha = 0.25\n\n[noise]\nsigma-delta-ms = 0.5 ; ms\n";
        let raw = parse_config(text, "cfg").unwrap();
        assert_eq!(raw.get("w"), Some("4, 8"));
        assert_eq!(raw.get("sigma_delta_ms"), Some("0.5"));
        let err = parse_config("[grid]\nwidth = 3\n", "cfg").unwrap_err();
        assert_eq!(err.to_string(), "cfg:2: unknown key 'width'");
        assert!(parse_config("w 4\n", "cfg")
            .unwrap_err()
            .to_string()
            .starts_with("cfg:1:"));
        assert!(parse_config("[grid\n", "cfg").is_err());
    }

    #[test]
    fn flags_override_config() {
        let file = parse_config("alpha = 0.25\ntrials = 9\n", "cfg").unwrap();
        let mut flags = RawSettings::default();
        flags.set("alpha", "0.75");
        let s = Settings::resolve(&file.merge(flags)).unwrap();
        assert_eq!(s.alphas, vec![0.75]);
        assert_eq!(s.trials, 9);
    }

    #[test]
    fn defaults_are_the_experiment_grid() {
        let s = Settings::resolve(&RawSettings::default()).unwrap();
        assert_eq!(s.cells().len(), 2 * 2 * 3 * 10);
        assert!((s.params(4, 0.5, 0.02).sigma_delta() - 0.34e-3).abs() < 1e-18);
    }

    #[test]
    fn range_violation_names_interval() {
        let mut raw = RawSettings::default();
        raw.set("alpha", "1.5");
        let err = Settings::resolve(&raw).unwrap_err();
        assert!(err.to_string().contains("(0,1)"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }
}

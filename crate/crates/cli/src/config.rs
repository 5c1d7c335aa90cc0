//! Experiment configuration, presets and the `key=value` file format.

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use cirbench::{CirParams, SchemeKind};

use crate::output::fmt_f64;

/// A named model configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub params: CirParams,
}

const FIG1_K: [(&str, f64); 8] = [
    ("fig1a", 2.0),
    ("fig1b", 4.0),
    ("fig1c", 6.0),
    ("fig1d", 8.0),
    ("fig1e", 16.0),
    ("fig1f", 32.0),
    ("fig1g", 48.0),
    ("fig1h", 64.0),
];

/// The eight convergence-study configurations: `v0 = θ = 0.02`, `ξ = 0.8`,
/// `T = 1` and `k ∈ {2, 4, 6, 8, 16, 32, 48, 64}`.
pub fn presets() -> Vec<Preset> {
    FIG1_K
        .iter()
        .map(|&(name, k)| Preset {
            name,
            params: CirParams {
                v0: 0.02,
                k,
                theta: 0.02,
                xi: 0.8,
                horizon: 1.0,
            },
        })
        .collect()
}

pub fn preset(name: &str) -> Result<Preset> {
    presets()
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| anyhow!("unknown preset `{name}` (expected fig1a..fig1h)"))
}

pub const DEFAULT_PRESET: &str = "fig1h";
pub const DEFAULT_N_LIST: [usize; 6] = [16, 32, 64, 128, 256, 512];
pub const DEFAULT_PATHS: u64 = 100_000;
pub const DEFAULT_SEED: u64 = 42;

/// Everything needed to re-run an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Option<String>,
    pub params: CirParams,
    pub scheme: SchemeKind,
    pub n_list: Vec<usize>,
    pub p_list: Vec<f64>,
    pub paths: u64,
    pub seed: u64,
    /// Step count for single-grid commands.
    pub steps: usize,
    /// Fine-grid reference multiplier; `None` selects the N vs 2N proxy.
    pub reference: Option<usize>,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            preset: Some(DEFAULT_PRESET.to_string()),
            params: preset(DEFAULT_PRESET)
                .expect("default preset exists")
                .params,
            scheme: SchemeKind::FullTruncation,
            n_list: DEFAULT_N_LIST.to_vec(),
            p_list: vec![1.0],
            paths: DEFAULT_PATHS,
            seed: DEFAULT_SEED,
            steps: 4,
            reference: None,
            out: None,
        }
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|e| anyhow!("bad entry `{s}` for `{key}`: {e}"))
        })
        .collect()
}

fn parse_one<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse::<T>()
        .map_err(|e| anyhow!("bad value `{value}` for `{key}`: {e}"))
}

impl ExperimentConfig {
    /// Applies one `key=value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "preset" => self.apply_preset(value)?,
            "v0" => self.params.v0 = parse_one(key, value)?,
            "k" => self.params.k = parse_one(key, value)?,
            "theta" => self.params.theta = parse_one(key, value)?,
            "xi" => self.params.xi = parse_one(key, value)?,
            "horizon" => self.params.horizon = parse_one(key, value)?,
            "scheme" => {
                self.scheme = value.parse::<SchemeKind>().map_err(|e| anyhow!(e))?;
            }
            "n_list" | "n-list" => self.n_list = parse_list(key, value)?,
            "p" => self.p_list = parse_list(key, value)?,
            "paths" => self.paths = parse_one(key, value)?,
            "seed" => self.seed = parse_one(key, value)?,
            "n" => self.steps = parse_one(key, value)?,
            "reference" => {
                self.reference = if value.is_empty() || value == "none" {
                    None
                } else {
                    Some(parse_one(key, value)?)
                }
            }
            "out" => self.out = (!value.is_empty()).then(|| PathBuf::from(value)),
            other => bail!("unknown configuration key `{other}`"),
        }
        Ok(())
    }

    pub fn apply_preset(&mut self, name: &str) -> Result<()> {
        self.params = preset(name)?.params;
        self.preset = Some(name.to_string());
        Ok(())
    }

    /// Parses a `key=value` file on top of `self`. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn merge_str(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key=value", lineno + 1))?;
            self.set(key, value)
                .with_context(|| format!("line {}", lineno + 1))?;
        }
        Ok(())
    }

    pub fn from_str_with_defaults(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        cfg.merge_str(text)?;
        Ok(cfg)
    }

    /// Serialises to `key=value` lines. Parameters follow the preset so a
    /// re-read reproduces any overrides.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        if let Some(p) = &self.preset {
            let _ = writeln!(s, "preset={p}");
        }
        let p = &self.params;
        let _ = writeln!(s, "v0={}", fmt_f64(p.v0));
        let _ = writeln!(s, "k={}", fmt_f64(p.k));
        let _ = writeln!(s, "theta={}", fmt_f64(p.theta));
        let _ = writeln!(s, "xi={}", fmt_f64(p.xi));
        let _ = writeln!(s, "horizon={}", fmt_f64(p.horizon));
        let _ = writeln!(s, "scheme={}", self.scheme);
        let n_list: Vec<String> = self.n_list.iter().map(|n| n.to_string()).collect();
        let _ = writeln!(s, "n_list={}", n_list.join(","));
        let p_list: Vec<String> = self.p_list.iter().map(|&p| fmt_f64(p)).collect();
        let _ = writeln!(s, "p={}", p_list.join(","));
        let _ = writeln!(s, "paths={}", self.paths);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "n={}", self.steps);
        match self.reference {
            Some(m) => {
                let _ = writeln!(s, "reference={m}");
            }
            None => {
                let _ = writeln!(s, "reference=none");
            }
        }
        if let Some(out) = &self.out {
            let _ = writeln!(s, "out={}", out.display());
        }
        s
    }

    pub fn validated_params(&self) -> Result<CirParams> {
        self.params.validate().context("invalid model parameters")
    }
}

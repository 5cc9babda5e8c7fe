//! Experiment configuration: four TOML tables (`model`, `grid`, `numerics`,
//! `scenario`), strict keys, defaults for anything left out.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use quench_core::model::{ModelSpec, Source};
use quench_core::sim::{RelaxOptions, StepParams, SymmetryConstraint};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub message: String,
    /// 1-based line in the config file, when the offending key is there.
    pub line: Option<usize>,
    /// Dotted key or `override <key>` the message refers to.
    pub origin: Option<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.line, &self.origin) {
            (Some(l), Some(o)) => write!(f, "line {l} ({o}): {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            (None, Some(o)) => write!(f, "{o}: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

impl ConfigError {
    fn plain(message: impl Into<String>) -> Self {
        ConfigError {
            message: message.into(),
            line: None,
            origin: None,
        }
    }
}

/// `"zero"` or a sampled profile with one value per `x` node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChiSetting {
    Named(String),
    Sampled(Vec<f64>),
}

impl Default for ChiSetting {
    fn default() -> Self {
        ChiSetting::Named("zero".into())
    }
}

impl ChiSetting {
    pub fn is_zero(&self) -> bool {
        match self {
            ChiSetting::Named(_) => true,
            ChiSetting::Sampled(v) => v.iter().all(|&x| x == 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelBlock {
    pub gamma: f64,
    pub delta_steep: f64,
    #[serde(rename = "K_halfwidth")]
    pub k_halfwidth: f64,
    pub k: f64,
    pub chi: ChiSetting,
}

impl Default for ModelBlock {
    fn default() -> Self {
        let d = ModelSpec::default();
        ModelBlock {
            gamma: d.gamma,
            delta_steep: d.steepness,
            k_halfwidth: d.plateau_half_width,
            k: d.k,
            chi: ChiSetting::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridBlock {
    #[serde(rename = "M")]
    pub m: f64,
    pub n_x: usize,
    pub n_y: usize,
}

impl Default for GridBlock {
    fn default() -> Self {
        GridBlock {
            m: 30.0 * PI,
            n_x: 1024,
            n_y: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymmetryMode {
    /// Parity projection matched to the seed, when the front allows it.
    Auto,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsBlock {
    pub dt: f64,
    pub eta: f64,
    pub stabilization: f64,
    pub symmetry: SymmetryMode,
    pub relax_tol: f64,
    pub hopf_tol: f64,
    /// Averaging window in time units.
    pub window: f64,
    pub t_max: f64,
    pub sample_interval: f64,
    pub trivial_threshold: f64,
    pub eig_count: usize,
}

impl Default for NumericsBlock {
    fn default() -> Self {
        let r = RelaxOptions::default();
        let s = StepParams::default();
        NumericsBlock {
            dt: s.dt,
            eta: 0.2,
            stabilization: s.stabilization,
            symmetry: SymmetryMode::Auto,
            relax_tol: r.tol,
            hopf_tol: 1e-9,
            window: r.window,
            t_max: r.t_max,
            sample_interval: r.sample_interval,
            trivial_threshold: r.trivial_threshold,
            eig_count: 100,
        }
    }
}

/// Scenario knobs. Unset ranges fall back to per-scenario defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<String>>,
    pub rng_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed_amplitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_values: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ells: Option<Vec<i64>>,
    pub plots: bool,
    pub out_dir: String,
}

impl Default for ScenarioBlock {
    fn default() -> Self {
        ScenarioBlock {
            name: None,
            c: None,
            c_min: None,
            c_max: None,
            dc: None,
            seeds: None,
            rng_seed: 20_240_601,
            seed_amplitude: None,
            k_values: None,
            ells: None,
            plots: true,
            out_dir: "out".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelBlock,
    pub grid: GridBlock,
    pub numerics: NumericsBlock,
    pub scenario: ScenarioBlock,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::plain(format!("cannot read {}: {e}", path.display())))?;
        Self::from_str_with(&text, overrides)
    }

    /// Parses `text`, applies `key=value` overrides, then checks ranges.
    pub fn from_str_with(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        // the file alone first, so its errors carry spans
        toml::from_str::<ExperimentConfig>(text).map_err(|e| toml_error(text, &e))?;
        let mut table: toml::Table = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
        let mut touched = Vec::new();
        for ov in overrides {
            touched.push(apply_override(&mut table, ov)?);
        }
        let cfg: ExperimentConfig = table.try_into().map_err(|e: toml::de::Error| ConfigError {
            message: e.message().trim().to_string(),
            line: None,
            origin: Some(format!("override {}", touched.join(", "))),
        })?;
        cfg.validate().map_err(|mut e| {
            if let Some(key) = e.origin.clone() {
                if touched.contains(&key) {
                    e.origin = Some(format!("override {key}"));
                } else {
                    let (section, name) = key.split_once('.').unwrap_or(("", key.as_str()));
                    e.line = find_key_line(text, Some(section), name);
                }
            }
            e
        })?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, msg: String| ConfigError {
            message: msg,
            line: None,
            origin: Some(key.to_string()),
        };
        let positive = |key: &str, v: f64| -> Result<(), ConfigError> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(bad(key, format!("must be a positive finite number, got {v}")))
            }
        };
        let m = &self.model;
        if !m.gamma.is_finite() {
            return Err(bad("model.gamma", "must be finite".into()));
        }
        positive("model.delta_steep", m.delta_steep)?;
        positive("model.K_halfwidth", m.k_halfwidth)?;
        positive("model.k", m.k)?;
        match &m.chi {
            ChiSetting::Named(s) if s != "zero" => {
                return Err(bad(
                    "model.chi",
                    format!("expected \"zero\" or an array of samples, got \"{s}\""),
                ));
            }
            ChiSetting::Sampled(v) if v.len() != self.grid.n_x => {
                return Err(bad(
                    "model.chi",
                    format!("sampled source has {} values but n_x = {}", v.len(), self.grid.n_x),
                ));
            }
            ChiSetting::Sampled(v) if v.iter().any(|x| !x.is_finite()) => {
                return Err(bad("model.chi", "samples must be finite".into()));
            }
            _ => {}
        }
        positive("grid.M", self.grid.m)?;
        for (key, n) in [("grid.n_x", self.grid.n_x), ("grid.n_y", self.grid.n_y)] {
            if n < 8 || !n.is_power_of_two() {
                return Err(bad(key, format!("must be a power of two >= 8, got {n}")));
            }
        }
        if self.model.k_halfwidth >= self.grid.m {
            return Err(bad(
                "model.K_halfwidth",
                format!(
                    "quench plateau half-width {} must be smaller than M = {}",
                    m.k_halfwidth, self.grid.m
                ),
            ));
        }
        let n = &self.numerics;
        positive("numerics.dt", n.dt)?;
        if !(n.eta.is_finite() && n.eta >= 0.0) {
            return Err(bad("numerics.eta", format!("must be >= 0, got {}", n.eta)));
        }
        if !(n.stabilization.is_finite() && n.stabilization >= 0.0) {
            return Err(bad("numerics.stabilization", "must be >= 0".into()));
        }
        positive("numerics.relax_tol", n.relax_tol)?;
        positive("numerics.hopf_tol", n.hopf_tol)?;
        positive("numerics.window", n.window)?;
        positive("numerics.t_max", n.t_max)?;
        positive("numerics.sample_interval", n.sample_interval)?;
        positive("numerics.trivial_threshold", n.trivial_threshold)?;
        if n.eig_count == 0 {
            return Err(bad("numerics.eig_count", "must be at least 1".into()));
        }
        let s = &self.scenario;
        for (key, v) in [
            ("scenario.c", s.c),
            ("scenario.c_min", s.c_min),
            ("scenario.c_max", s.c_max),
        ] {
            if let Some(v) = v {
                if !v.is_finite() {
                    return Err(bad(key, "must be finite".into()));
                }
            }
        }
        if let (Some(lo), Some(hi)) = (s.c_min, s.c_max) {
            if lo >= hi {
                return Err(bad("scenario.c_max", format!("must exceed c_min ({lo}), got {hi}")));
            }
        }
        if let Some(dc) = s.dc {
            positive("scenario.dc", dc)?;
        }
        if let Some(a) = s.seed_amplitude {
            positive("scenario.seed_amplitude", a)?;
        }
        if let Some(seeds) = &s.seeds {
            if seeds.is_empty() {
                return Err(bad("scenario.seeds", "must list at least one seed".into()));
            }
            for name in seeds {
                name.parse::<quench_core::sim::SeedKind>()
                    .map_err(|e| bad("scenario.seeds", e.to_string()))?;
            }
        }
        if let Some(ks) = &s.k_values {
            if ks.is_empty() || ks.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
                return Err(bad(
                    "scenario.k_values",
                    "must be a non-empty list of positive numbers".into(),
                ));
            }
        }
        if let Some(ells) = &s.ells {
            if ells.is_empty() {
                return Err(bad("scenario.ells", "must list at least one mode".into()));
            }
        }
        if s.out_dir.is_empty() {
            return Err(bad("scenario.out_dir", "must not be empty".into()));
        }
        Ok(())
    }

    /// The model at speed `c`.
    pub fn model_spec(&self, c: f64) -> ModelSpec {
        let source = match &self.model.chi {
            ChiSetting::Sampled(v) if !self.model.chi.is_zero() => Source::Sampled(v.clone()),
            _ => Source::Zero,
        };
        ModelSpec {
            gamma: self.model.gamma,
            steepness: self.model.delta_steep,
            plateau_half_width: self.model.k_halfwidth,
            k: self.model.k,
            c,
            source,
            ..ModelSpec::default()
        }
    }

    pub fn step_params(&self, symmetry: SymmetryConstraint) -> StepParams {
        StepParams {
            dt: self.numerics.dt,
            stabilization: self.numerics.stabilization,
            symmetry,
        }
    }

    pub fn relax_options(&self) -> RelaxOptions {
        RelaxOptions {
            tol: self.numerics.relax_tol,
            t_max: self.numerics.t_max,
            window: self.numerics.window,
            sample_interval: self.numerics.sample_interval,
            trivial_threshold: self.numerics.trivial_threshold,
            ..RelaxOptions::default()
        }
    }

    /// The effective configuration as TOML.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}

fn toml_error(text: &str, e: &toml::de::Error) -> ConfigError {
    let line = e
        .span()
        .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
    ConfigError {
        message: e.message().trim().to_string(),
        line,
        origin: None,
    }
}

/// Inserts `section.key = value` into the raw table; returns the dotted key.
fn apply_override(table: &mut toml::Table, ov: &str) -> Result<String, ConfigError> {
    let origin = format!("override {ov}");
    let fail = |msg: String| ConfigError {
        message: msg,
        line: None,
        origin: Some(origin.clone()),
    };
    let (key, raw) = ov.split_once('=').ok_or_else(|| fail("expected key=value".into()))?;
    let key = key.trim();
    let (section, name) = key
        .split_once('.')
        .ok_or_else(|| fail(format!("key `{key}` must be section.name")))?;
    if !["model", "grid", "numerics", "scenario"].contains(&section) {
        return Err(fail(format!("unknown section `{section}`")));
    }
    let raw = raw.trim();
    // bare words are taken as strings
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let entry = table
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    let sub = entry
        .as_table_mut()
        .ok_or_else(|| fail(format!("`{section}` is not a table in the config file")))?;
    sub.insert(name.to_string(), value);
    Ok(key.to_string())
}

/// Line of `name = ...`, inside `[section]` when given.
fn find_key_line(text: &str, section: Option<&str>, name: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if let Some(s) = t.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            current = s.trim().to_string();
            continue;
        }
        let Some((k, _)) = t.split_once('=') else { continue };
        let k = k.trim().trim_matches('"');
        let in_section = section.is_none_or(|s| s == current);
        if k == name && in_section {
            return Some(i + 1);
        }
    }
    None
}

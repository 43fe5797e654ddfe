//! Scenario configuration: built-in presets and a flat `key = value` file
//! format with dotted keys.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Result, TcsError};
use crate::integrator::IntegratorConfig;
use crate::model::{CommunicationKernel, ModelParams};

pub const PRESET_REFERENCE: &str = "paper-sec6";
pub const PRESETS: [&str; 1] = [PRESET_REFERENCE];

/// Closed interval `[lo, hi]`; `lo == hi` pins the value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(TcsError::Config(format!("invalid interval ({lo}, {hi})")));
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(',').map(str::trim).collect();
        if parts.len() != 2 {
            return Err(TcsError::Config(format!(
                "expected an interval `lo,hi`, got `{text}`"
            )));
        }
        Interval::new(parse_f64(parts[0])?, parse_f64(parts[1])?)
    }

    fn render(&self) -> String {
        format!("{},{}", fmt_f64(self.lo), fmt_f64(self.hi))
    }
}

fn parse_box(text: &str) -> Result<Vec<Interval>> {
    text.split(';').map(Interval::parse).collect()
}

fn render_box(b: &[Interval]) -> String {
    b.iter().map(Interval::render).collect::<Vec<_>>().join(";")
}

/// `amplitude * (1 + r^2)^(-exponent / 2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub amplitude: f64,
    pub exponent: f64,
}

impl KernelSpec {
    pub fn build(&self) -> Result<CommunicationKernel> {
        CommunicationKernel::algebraic(self.amplitude, self.exponent)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub n: usize,
    pub dim: usize,
    pub position_box: Vec<Interval>,
    pub velocity_box: Vec<Interval>,
    pub temperature_interval: Interval,
    pub seed: u64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub phi: KernelSpec,
    pub zeta: KernelSpec,
    pub dt: f64,
    pub t_end: f64,
    pub record_stride: usize,
    pub eps: f64,
    pub eps0: f64,
}

/// Every key a config file must define, in output order.
pub const KEYS: [&str; 17] = [
    "sampling.n",
    "sampling.dim",
    "sampling.position_box",
    "sampling.velocity_box",
    "sampling.temperature_interval",
    "sampling.seed",
    "model.kappa1",
    "model.kappa2",
    "model.phi.amplitude",
    "model.phi.exponent",
    "model.zeta.amplitude",
    "model.zeta.exponent",
    "integrator.dt",
    "integrator.t_end",
    "integrator.record_stride",
    "analysis.eps",
    "analysis.eps0",
];

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(s: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| TcsError::Config(format!("`{s}` is not a number")))?;
    if !v.is_finite() {
        return Err(TcsError::Config(format!("`{s}` is not finite")));
    }
    Ok(v)
}

fn parse_int<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| TcsError::Config(format!("`{s}` is not a nonnegative integer")))
}

impl ScenarioConfig {
    /// The 100-particle planar experiment with the published parameters.
    pub fn reference_experiment() -> Self {
        Self {
            n: 100,
            dim: 2,
            position_box: vec![
                Interval { lo: 0.32, hi: 0.35 },
                Interval { lo: 0.2, hi: 0.24 },
            ],
            velocity_box: vec![
                Interval {
                    lo: -0.3,
                    hi: -0.29,
                },
                Interval { lo: 0.05, hi: 0.06 },
            ],
            temperature_interval: Interval { lo: 10.8, hi: 10.9 },
            seed: 0,
            kappa1: 1.0,
            kappa2: 100.0,
            phi: KernelSpec {
                amplitude: 1.0,
                exponent: 1.0,
            },
            zeta: KernelSpec {
                amplitude: 40.0,
                exponent: 1.0,
            },
            dt: 0.01,
            t_end: 50.0,
            record_stride: 1,
            eps: 0.003,
            eps0: 0.76,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            PRESET_REFERENCE => Ok(Self::reference_experiment()),
            _ => Err(TcsError::Config(format!(
                "unknown preset `{name}` (available: {})",
                PRESETS.join(", ")
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(TcsError::Config("sampling.n must be positive".into()));
        }
        if self.dim == 0 {
            return Err(TcsError::Config("sampling.dim must be positive".into()));
        }
        for (key, b) in [
            ("sampling.position_box", &self.position_box),
            ("sampling.velocity_box", &self.velocity_box),
        ] {
            if b.len() != self.dim {
                return Err(TcsError::Config(format!(
                    "{key} has {} intervals, sampling.dim is {}",
                    b.len(),
                    self.dim
                )));
            }
            for iv in b {
                Interval::new(iv.lo, iv.hi)?;
            }
        }
        let ti = self.temperature_interval;
        Interval::new(ti.lo, ti.hi)?;
        if ti.lo <= 0.0 {
            return Err(TcsError::Config(format!(
                "sampling.temperature_interval must lie in (0, inf), got lower bound {}",
                ti.lo
            )));
        }
        self.model_params()?;
        self.integrator_config()?;
        for (key, v) in [("analysis.eps", self.eps), ("analysis.eps0", self.eps0)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(TcsError::Config(format!("{key} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        ModelParams::new(
            self.kappa1,
            self.kappa2,
            self.phi.build()?,
            self.zeta.build()?,
            self.dim,
        )
    }

    pub fn integrator_config(&self) -> Result<IntegratorConfig> {
        IntegratorConfig::new(self.dt, self.t_end, self.record_stride)
    }

    /// Overrides one key. Values use the file syntax.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = unquote(value.trim());
        match key {
            "sampling.n" => self.n = parse_int(value)?,
            "sampling.dim" => self.dim = parse_int(value)?,
            "sampling.position_box" => self.position_box = parse_box(value)?,
            "sampling.velocity_box" => self.velocity_box = parse_box(value)?,
            "sampling.temperature_interval" => self.temperature_interval = Interval::parse(value)?,
            "sampling.seed" => self.seed = parse_int(value)?,
            "model.kappa1" => self.kappa1 = parse_f64(value)?,
            "model.kappa2" => self.kappa2 = parse_f64(value)?,
            "model.phi.amplitude" => self.phi.amplitude = parse_f64(value)?,
            "model.phi.exponent" => self.phi.exponent = parse_f64(value)?,
            "model.zeta.amplitude" => self.zeta.amplitude = parse_f64(value)?,
            "model.zeta.exponent" => self.zeta.exponent = parse_f64(value)?,
            "integrator.dt" => self.dt = parse_f64(value)?,
            "integrator.t_end" => self.t_end = parse_f64(value)?,
            "integrator.record_stride" => self.record_stride = parse_int(value)?,
            "analysis.eps" => self.eps = parse_f64(value)?,
            "analysis.eps0" => self.eps0 = parse_f64(value)?,
            _ => return Err(TcsError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    fn get(&self, key: &str) -> String {
        match key {
            "sampling.n" => self.n.to_string(),
            "sampling.dim" => self.dim.to_string(),
            "sampling.position_box" => format!("\"{}\"", render_box(&self.position_box)),
            "sampling.velocity_box" => format!("\"{}\"", render_box(&self.velocity_box)),
            "sampling.temperature_interval" => {
                format!("\"{}\"", self.temperature_interval.render())
            }
            "sampling.seed" => self.seed.to_string(),
            "model.kappa1" => fmt_f64(self.kappa1),
            "model.kappa2" => fmt_f64(self.kappa2),
            "model.phi.amplitude" => fmt_f64(self.phi.amplitude),
            "model.phi.exponent" => fmt_f64(self.phi.exponent),
            "model.zeta.amplitude" => fmt_f64(self.zeta.amplitude),
            "model.zeta.exponent" => fmt_f64(self.zeta.exponent),
            "integrator.dt" => fmt_f64(self.dt),
            "integrator.t_end" => fmt_f64(self.t_end),
            "integrator.record_stride" => self.record_stride.to_string(),
            "analysis.eps" => fmt_f64(self.eps),
            "analysis.eps0" => fmt_f64(self.eps0),
            _ => unreachable!("key list and accessor out of sync: {key}"),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key));
        }
        out
    }

    /// Parses a config file. Every key in [`KEYS`] must appear exactly once.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::reference_experiment();
        let mut seen = BTreeSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = strip_comment(raw).trim();
            if content.is_empty() {
                continue;
            }
            let err = |message: String| TcsError::ConfigLine { line, message };
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{content}`")))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(err(format!("unknown key `{key}`")));
            }
            if !seen.insert(key.to_string()) {
                return Err(err(format!("duplicate key `{key}`")));
            }
            cfg.set(key, value).map_err(|e| err(e.to_string()))?;
        }
        if seen.is_empty() {
            return Err(TcsError::Config("config file defines no keys".into()));
        }
        let missing: Vec<&str> = KEYS
            .iter()
            .copied()
            .filter(|k| !seen.contains(*k))
            .collect();
        if !missing.is_empty() {
            return Err(TcsError::Config(format!(
                "missing keys: {}",
                missing.join(", ")
            )));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| TcsError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| TcsError::io(path, e))
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn unquote(s: &str) -> &str {
    s.strip_prefix('"')
        .and_then(|t| t.strip_suffix('"'))
        .unwrap_or(s)
}

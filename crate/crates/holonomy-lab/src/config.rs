//! Plain-text `key = value` run configuration.
//!
//! Lines are `key = value`; `#` starts a comment and blank lines are
//! ignored. Keys may use `-` or `_`. Unknown and repeated keys are errors.
//! Every field is optional so that a file and command line flags can be
//! merged, with flags taking precedence.

use serde::{Deserialize, Serialize};

use crate::bryant_salamon::BSSpaceId;
use crate::mcf::{FlowConfig, SectionMode};
use crate::suite::{Family, Grid, Quantity, SuiteOptions};
use crate::{LabError, Result};

/// Accepted keys, in the order [`RunConfig::to_key_values`] writes them.
pub const KEYS: [&str; 19] = [
    "command",
    "family",
    "n",
    "space",
    "kappa",
    "quantity",
    "grid",
    "tol",
    "fd_step",
    "samples",
    "mesh_level",
    "eps",
    "k0",
    "dt",
    "t_end",
    "seed",
    "mode",
    "psi_threshold",
    "out",
];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Option<String>,
    pub family: Option<String>,
    pub n: Option<usize>,
    pub space: Option<String>,
    pub kappa: Option<f64>,
    pub quantity: Option<String>,
    pub grid: Option<String>,
    pub tol: Option<f64>,
    pub fd_step: Option<f64>,
    pub samples: Option<usize>,
    pub mesh_level: Option<usize>,
    pub eps: Option<f64>,
    pub k0: Option<f64>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub seed: Option<u64>,
    pub mode: Option<String>,
    pub psi_threshold: Option<f64>,
    pub out: Option<String>,
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| LabError::Config(format!("{key}: cannot parse {value:?}")))
}

fn finite(key: &str, value: &str) -> Result<f64> {
    let v: f64 = num(key, value)?;
    if !v.is_finite() {
        return Err(LabError::Config(format!("{key}: {value:?} is not finite")));
    }
    Ok(v)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| LabError::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let key = key.trim().replace('-', "_");
            if seen.contains(&key) {
                return Err(LabError::Config(format!("line {}: repeated key {key:?}", lineno + 1)));
            }
            cfg.set(&key, value.trim())?;
            seen.push(key);
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.replace('-', "_");
        let s = || Some(value.to_string());
        match key.as_str() {
            "command" => self.command = s(),
            "family" => self.family = s(),
            "n" => self.n = Some(num(&key, value)?),
            "space" => self.space = s(),
            "kappa" => self.kappa = Some(finite(&key, value)?),
            "quantity" => self.quantity = s(),
            "grid" => self.grid = s(),
            "tol" => self.tol = Some(finite(&key, value)?),
            "fd_step" => self.fd_step = Some(finite(&key, value)?),
            "samples" => self.samples = Some(num(&key, value)?),
            "mesh_level" => self.mesh_level = Some(num(&key, value)?),
            "eps" => self.eps = Some(finite(&key, value)?),
            "k0" => self.k0 = Some(finite(&key, value)?),
            "dt" => self.dt = Some(finite(&key, value)?),
            "t_end" => self.t_end = Some(finite(&key, value)?),
            "seed" => self.seed = Some(num(&key, value)?),
            "mode" => self.mode = s(),
            "psi_threshold" => self.psi_threshold = Some(finite(&key, value)?),
            "out" => self.out = s(),
            _ => return Err(LabError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Fields set in `other` replace those in `self`.
    pub fn merge(&mut self, other: &RunConfig) {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f.clone(); } )* };
        }
        take!(command, family, n, space, kappa, quantity, grid, tol, fd_step, samples, mesh_level, eps, k0, dt, t_end, seed, mode, psi_threshold, out);
    }

    /// The set fields as a config file that parses back to `self`.
    pub fn to_key_values(&self) -> String {
        let json = serde_json::to_value(self).unwrap_or_default();
        let mut out = String::new();
        for key in KEYS {
            match &json[key] {
                serde_json::Value::Null => {}
                serde_json::Value::String(v) => out.push_str(&format!("{key} = {v}\n")),
                v => out.push_str(&format!("{key} = {v}\n")),
            }
        }
        out
    }

    pub fn family(&self) -> Result<Family> {
        let name = self
            .family
            .as_deref()
            .ok_or_else(|| LabError::Config("family is required".into()))?;
        match name {
            "stenzel" => Family::stenzel(self.n.unwrap_or(2)),
            "calabi" => Family::calabi(self.n.unwrap_or(1)),
            "bs" | "bryant_salamon" => {
                let space = self
                    .space
                    .as_deref()
                    .ok_or_else(|| LabError::Config("bs needs a space".into()))?;
                Family::bryant_salamon(BSSpaceId::parse(space)?, self.kappa.unwrap_or(1.0))
            }
            other => Err(LabError::Config(format!("unknown family {other:?}"))),
        }
    }

    pub fn quantity(&self) -> Result<Quantity> {
        Quantity::parse(
            self.quantity
                .as_deref()
                .ok_or_else(|| LabError::Config("quantity is required".into()))?,
        )
    }

    pub fn grid(&self) -> Result<Option<Grid>> {
        self.grid.as_deref().map(Grid::parse).transpose()
    }

    pub fn suite_options(&self) -> Result<SuiteOptions> {
        let mut o = SuiteOptions::default();
        if let Some(g) = self.grid()? {
            o.grid = g.count;
        }
        if let Some(t) = self.tol {
            o.tol = t;
        }
        if let Some(h) = self.fd_step {
            o.fd_step = h;
        }
        if let Some(s) = self.samples {
            o.samples = s;
        }
        if let Some(s) = self.seed {
            o.seed = s;
        }
        o.validate()?;
        Ok(o)
    }

    pub fn flow_config(&self) -> Result<FlowConfig> {
        let mut c = FlowConfig::default();
        if let Some(v) = self.eps {
            c.eps = v;
        }
        if let Some(v) = self.k0 {
            c.k0 = v;
        }
        if let Some(v) = self.mesh_level {
            c.mesh_level = v;
        }
        if self.dt.is_some() {
            c.dt = self.dt;
        }
        if let Some(v) = self.t_end {
            c.t_end = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(m) = &self.mode {
            c.mode = SectionMode::parse(m)?;
        }
        if let Some(v) = self.psi_threshold {
            c.psi_threshold = v;
        }
        if let Some(v) = self.fd_step {
            c.fd_step = v;
        }
        c.validate()?;
        Ok(c)
    }
}

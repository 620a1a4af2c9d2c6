//! `key = value` run configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fd::FdConfig;
use crate::solver::SolverConfig;

/// Keys accepted in configuration files and as overrides.
pub const KEYS: [&str; 10] = [
    "reynolds",
    "spacing",
    "h_factor",
    "dt",
    "t_end",
    "steady_tol",
    "shift_coeff",
    "dump_every",
    "grid_n",
    "out_dir",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub solver: SolverConfig,
    /// Nodes per side of the plotting grid and of the finite-difference oracle.
    pub grid_n: usize,
    pub out_dir: PathBuf,
    /// Line each key was read from, for error messages.
    lines: BTreeMap<&'static str, usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            grid_n: 129,
            out_dir: PathBuf::from("out"),
            lines: BTreeMap::new(),
        }
    }
}

fn key_error(key: &str, line: Option<usize>, message: impl Into<String>) -> Error {
    Error::ConfigKey {
        key: key.to_string(),
        line,
        message: message.into(),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected `key = value`, got `{line}`", n + 1)));
            };
            cfg.set(key.trim(), value.trim(), Some(n + 1))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Sets one key. Call [`RunConfig::validate`] once all keys are set.
    pub fn set(&mut self, key: &str, value: &str, line: Option<usize>) -> Result<()> {
        let Some(&key) = KEYS.iter().find(|&&k| k == key) else {
            return Err(key_error(key, line, "unknown key"));
        };
        let float = || -> Result<f64> {
            value
                .parse::<f64>()
                .map_err(|e| key_error(key, line, format!("`{value}`: {e}")))
        };
        let count = || -> Result<usize> {
            value
                .parse::<usize>()
                .map_err(|e| key_error(key, line, format!("`{value}`: {e}")))
        };
        match key {
            "reynolds" => self.solver.reynolds = float()?,
            "spacing" => self.solver.spacing = float()?,
            "h_factor" => self.solver.h_factor = float()?,
            "dt" => self.solver.dt = float()?,
            "t_end" => self.solver.t_end = float()?,
            "steady_tol" => self.solver.steady_tol = float()?,
            "shift_coeff" => self.solver.shift_coeff = float()?,
            "dump_every" => self.solver.dump_every = count()?,
            "grid_n" => self.grid_n = count()?,
            "out_dir" => {
                if value.is_empty() {
                    return Err(key_error(key, line, "must not be empty"));
                }
                self.out_dir = PathBuf::from(value);
            }
            _ => unreachable!(),
        }
        match line {
            Some(l) => self.lines.insert(key, l),
            None => self.lines.remove(key),
        };
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_n < 2 {
            return Err(key_error("grid_n", self.lines.get("grid_n").copied(), "must be at least 2"));
        }
        self.solver.validate().map_err(|e| match e {
            Error::ConfigKey { key, message, .. } => {
                let line = self.lines.get(key.as_str()).copied();
                Error::ConfigKey { key, line, message }
            }
            other => other,
        })?;
        let cells = self.solver.side / self.solver.spacing;
        if (cells - cells.round()).abs() > 1e-9 * cells || cells.round() < 2.0 {
            return Err(key_error(
                "spacing",
                self.lines.get("spacing").copied(),
                "must divide the cavity side into at least two whole cells",
            ));
        }
        Ok(())
    }

    /// Resolved parameters in a fixed order, including those without a key.
    pub fn resolved(&self) -> Vec<(&'static str, String)> {
        let s = &self.solver;
        vec![
            ("reynolds", format!("{:e}", s.reynolds)),
            ("spacing", format!("{:e}", s.spacing)),
            ("h_factor", format!("{:e}", s.h_factor)),
            ("dt", format!("{:e}", s.dt)),
            ("t_end", format!("{:e}", s.t_end)),
            ("steady_tol", format!("{:e}", s.steady_tol)),
            ("shift_coeff", format!("{:e}", s.shift_coeff)),
            ("dump_every", s.dump_every.to_string()),
            ("grid_n", self.grid_n.to_string()),
            ("out_dir", self.out_dir.display().to_string()),
            ("steady_window", format!("{:e}", s.steady_window)),
            ("shift_cap", format!("{:e}", s.shift_cap)),
            ("side", format!("{:e}", s.side)),
            ("lid_speed", format!("{:e}", s.lid_speed)),
            ("poisson_tol", format!("{:e}", s.poisson_tol)),
            ("corners", s.corners.to_string()),
        ]
    }

    /// SHA-256 over the resolved parameters, hex encoded.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        for (k, v) in self.resolved() {
            hasher.update(k.as_bytes());
            hasher.update(b"=");
            hasher.update(v.as_bytes());
            hasher.update(b"\n");
        }
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Oracle parameters for the same cavity: `grid_n` nodes and the
    /// configured time step, reduced to 90% of the explicit stability limit
    /// when it exceeds that limit.
    pub fn fd_config(&self) -> FdConfig {
        let s = &self.solver;
        let mut fd = FdConfig {
            n: self.grid_n,
            reynolds: s.reynolds,
            dt: s.dt,
            t_end: s.t_end,
            steady_tol: s.steady_tol,
            steady_window: s.steady_window,
            lid_speed: s.lid_speed,
            side: s.side,
            ..FdConfig::default()
        };
        let limit = fd.stable_dt();
        if fd.dt > limit {
            fd.dt = 0.9 * limit;
        }
        fd
    }
}

//! Flat `section.key=value` configuration with layering.
//!
//! Later assignments replace earlier ones, so applying defaults, then a file,
//! then command-line overrides gives the usual precedence. Unknown keys are
//! rejected by name.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::exec::ExecMode;
use crate::experiments::{ExperimentConfig, Grid, Scale};

/// Every accepted key with a short description.
pub const KEYS: &[(&str, &str)] = &[
    ("prox.fn", "builtin function name"),
    ("prox.x", "query point, comma-separated"),
    ("prox.t", "prox time step"),
    ("prox.delta", "smoothing"),
    ("prox.delta2", "second-stage smoothing for noisy oracles"),
    ("prox.alpha", "initial scale in (0, 1]"),
    ("prox.eps", "underflow tolerance"),
    ("prox.samples", "samples per estimate"),
    ("prox.a", "curvature of neg_quadratic"),
    ("noise.sigma", "relative oracle noise"),
    ("run.seed", "base seed"),
    ("run.trials", "independent trials"),
    ("run.iters", "solver iterations"),
    ("run.scale", "desk or paper"),
    ("run.out", "output directory"),
    ("run.timing", "record wall time per iteration (true/false)"),
    ("run.parallel", "use the parallel executor (true/false)"),
    ("problem.m", "rows of A"),
    ("problem.n", "columns of A"),
    ("problem.lambda", "l1 weight of the LASSO objective"),
    ("problem.ista_threshold", "soft-threshold coefficient used by ISTA"),
    ("sweep.grid", "1-D grid lo:hi:count"),
    ("sweep.deltas", "deltas swept at fixed samples, comma-separated"),
    ("sweep.samples", "sample counts swept at fixed delta, comma-separated"),
    ("sweep.functions", "envelope sweep functions, comma-separated"),
];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("unknown configuration key `{key}`{}", at(*.line))]
    UnknownKey { key: String, line: Option<usize> },
    #[error("expected key=value{}: {text:?}", at(Some(*.line)))]
    Malformed { line: usize, text: String },
    #[error("bad value {value:?} for `{key}`: expected {expected}")]
    BadValue {
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("cannot read {path}: {reason}")]
    Io { path: PathBuf, reason: String },
}

fn at(line: Option<usize>) -> String {
    line.map(|l| format!(" on line {l}")).unwrap_or_default()
}

/// Where a value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    File,
    Override,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, (String, Origin)>,
}

fn known(key: &str) -> bool {
    KEYS.iter().any(|(k, _)| *k == key)
}

impl Config {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: &str, origin: Origin) -> Result<(), ConfigError> {
        let key = key.trim();
        if !known(key) {
            return Err(ConfigError::UnknownKey {
                key: key.to_string(),
                line: None,
            });
        }
        self.values
            .insert(key.to_string(), (value.trim().to_string(), origin));
        Ok(())
    }

    /// Parses `key=value` lines; `#` starts a comment.
    pub fn merge_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Malformed {
                line: i + 1,
                text: raw.to_string(),
            })?;
            self.set(k, v, Origin::File).map_err(|e| match e {
                ConfigError::UnknownKey { key, .. } => ConfigError::UnknownKey {
                    key,
                    line: Some(i + 1),
                },
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        self.merge_text(&text)
    }

    /// Parses a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), ConfigError> {
        let (k, v) = pair.split_once('=').ok_or_else(|| ConfigError::Malformed {
            line: 0,
            text: pair.to_string(),
        })?;
        self.set(k, v, Origin::Override)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|(v, _)| v.as_str())
    }

    pub fn origin(&self, key: &str) -> Option<Origin> {
        self.values.get(key).map(|(_, o)| *o)
    }

    pub fn get<T: FromStr>(&self, key: &str, expected: &'static str) -> Result<Option<T>, ConfigError> {
        debug_assert!(known(key), "{key}");
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| ConfigError::BadValue {
                key: key.to_string(),
                value: v.to_string(),
                expected,
            }),
        }
    }

    pub fn get_list<T: FromStr>(
        &self,
        key: &str,
        expected: &'static str,
    ) -> Result<Option<Vec<T>>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some("") => Ok(Some(vec![])),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim().parse().map_err(|_| ConfigError::BadValue {
                        key: key.to_string(),
                        value: v.to_string(),
                        expected,
                    })
                })
                .collect::<Result<Vec<T>, _>>()
                .map(Some),
        }
    }

    pub fn get_bool(&self, key: &str) -> Result<Option<bool>, ConfigError> {
        self.get(key, "true or false")
    }

    pub fn get_grid(&self, key: &str) -> Result<Option<Grid>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => Grid::parse(v).map(Some).ok_or_else(|| ConfigError::BadValue {
                key: key.to_string(),
                value: v.to_string(),
                expected: "lo:hi:count",
            }),
        }
    }

    pub fn scale(&self) -> Result<Scale, ConfigError> {
        match self.raw("run.scale") {
            None => Ok(Scale::Desk),
            Some(v) => Scale::parse(v).ok_or_else(|| ConfigError::BadValue {
                key: "run.scale".into(),
                value: v.to_string(),
                expected: "desk or paper",
            }),
        }
    }

    /// Overwrites the fields of `cfg` that have a value here.
    pub fn apply(&self, cfg: &mut ExperimentConfig) -> Result<(), ConfigError> {
        const REAL: &str = "a real number";
        const COUNT: &str = "a nonnegative integer";
        macro_rules! take {
            ($field:expr, $key:literal, $what:expr) => {
                if let Some(v) = self.get($key, $what)? {
                    $field = v;
                }
            };
        }
        take!(cfg.delta, "prox.delta", REAL);
        take!(cfg.delta2, "prox.delta2", REAL);
        take!(cfg.alpha, "prox.alpha", REAL);
        take!(cfg.eps_underflow, "prox.eps", REAL);
        take!(cfg.samples, "prox.samples", COUNT);
        take!(cfg.sigma, "noise.sigma", REAL);
        take!(cfg.seed, "run.seed", COUNT);
        take!(cfg.trials, "run.trials", COUNT);
        take!(cfg.iters, "run.iters", COUNT);
        take!(cfg.m, "problem.m", COUNT);
        take!(cfg.n, "problem.n", COUNT);
        take!(cfg.lambda_reg, "problem.lambda", REAL);
        if let Some(v) = self.get("problem.ista_threshold", REAL)? {
            cfg.ista_threshold = Some(v);
        }
        if let Some(v) = self.raw("run.out") {
            cfg.out_dir = PathBuf::from(v);
        }
        if let Some(v) = self.get_bool("run.timing")? {
            cfg.timing = v;
        }
        if let Some(v) = self.get_bool("run.parallel")? {
            cfg.exec = if v { ExecMode::Parallel } else { ExecMode::Sequential };
        }
        if let Some(g) = self.get_grid("sweep.grid")? {
            cfg.grid = g;
        }
        if let Some(v) = self.get_list("sweep.deltas", "comma-separated reals")? {
            cfg.sweep_deltas = v;
        }
        if let Some(v) = self.get_list("sweep.samples", "comma-separated integers")? {
            cfg.sweep_samples = v;
        }
        if let Some(v) = self.get_list::<String>("sweep.functions", "comma-separated names")? {
            cfg.functions = v;
        }
        Ok(())
    }
}

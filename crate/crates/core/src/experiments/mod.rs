//! Seeded problem generation and the three experiment families, writing CSV
//! traces and a manifest per output directory.

mod envelope;
mod lasso;
mod lmm;
mod output;

use std::path::PathBuf;

use rand_distr::{Distribution, StandardNormal};

use crate::exec::{mix_seed, rng_from_seed, ExecMode};
use crate::linalg::LinearProblem;
use crate::oracle::OracleError;
use crate::solvers::{SolverError, SolverTrace};
use crate::{HjError, Matrix, Vector};

pub use envelope::{
    run_envelope_cases, run_envelope_sweep, EnvelopeOutcome, EnvelopeRow, SweepCase,
};
pub use lasso::{run_lasso_experiment, LassoOutcome};
pub use lmm::{run_noisy_lmm_experiment, LmmOutcome};
pub use output::{
    format_float, parse_envelope_csv, parse_trace_csv, read_manifest, write_envelope_csv,
    write_summary_csv, write_trace_csv, Manifest, ENVELOPE_HEADER, SUMMARY_HEADER, TRACE_HEADER,
};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed CSV {path}, line {line}: {reason}")]
    Csv {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("invalid experiment configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Hj(#[from] HjError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    EnvelopeSweep,
    Lasso,
    NoisyLmm,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::EnvelopeSweep => "envelope_sweep",
            Family::Lasso => "lasso",
            Family::NoisyLmm => "noisy_lmm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Desk,
    Paper,
}

impl Scale {
    pub fn as_str(self) -> &'static str {
        match self {
            Scale::Desk => "desk",
            Scale::Paper => "paper",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "desk" => Some(Scale::Desk),
            "paper" => Some(Scale::Paper),
            _ => None,
        }
    }
}

/// Evenly spaced 1-D grid `lo:hi:count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        match self.count {
            0 => vec![],
            1 => vec![self.lo],
            n => (0..n)
                .map(|k| self.lo + (self.hi - self.lo) * k as f64 / (n - 1) as f64)
                .collect(),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let mut it = s.split(':');
        let lo = it.next()?.trim().parse().ok()?;
        let hi = it.next()?.trim().parse().ok()?;
        let count = it.next()?.trim().parse().ok()?;
        if it.next().is_some() || !(f64::is_finite(lo) && f64::is_finite(hi)) {
            return None;
        }
        Some(Grid { lo, hi, count })
    }
}

impl std::fmt::Display for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.count)
    }
}

/// Everything an experiment run depends on. Two runs with equal configs
/// produce byte-identical output.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub family: Family,
    pub scale: Scale,
    pub m: usize,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub iters: usize,
    /// Smoothing at which sample counts are swept, and of single runs.
    pub delta: f64,
    /// Sample count at which `delta` is swept, and of single runs.
    pub samples: usize,
    pub delta2: f64,
    pub alpha: f64,
    pub eps_underflow: f64,
    /// Relative oracle noise.
    pub sigma: f64,
    pub lambda_reg: f64,
    /// Soft-threshold coefficient used inside ISTA in place of `lambda_reg`.
    pub ista_threshold: Option<f64>,
    pub sweep_deltas: Vec<f64>,
    pub sweep_samples: Vec<usize>,
    pub grid: Grid,
    /// Envelope-sweep cases to run; empty means all.
    pub functions: Vec<String>,
    pub out_dir: PathBuf,
    pub timing: bool,
    pub exec: ExecMode,
}

impl ExperimentConfig {
    pub fn new(family: Family, scale: Scale) -> Self {
        let (m, n) = match scale {
            Scale::Desk => (50, 100),
            Scale::Paper => (500, 1000),
        };
        let mut cfg = ExperimentConfig {
            family,
            scale,
            m,
            n,
            trials: 30,
            seed: 0,
            iters: 2000,
            delta: 0.1,
            samples: 10_000,
            delta2: 0.01,
            alpha: 1.0,
            eps_underflow: 1e-12,
            sigma: 0.0,
            lambda_reg: 0.1,
            ista_threshold: None,
            sweep_deltas: vec![],
            sweep_samples: vec![],
            grid: Grid {
                lo: -2.0,
                hi: 2.0,
                count: 41,
            },
            functions: vec![],
            out_dir: PathBuf::from("out"),
            timing: false,
            exec: ExecMode::default(),
        };
        match family {
            Family::EnvelopeSweep => {}
            Family::Lasso => {
                cfg.delta = 1.0;
                cfg.samples = 1000;
                cfg.sweep_deltas = vec![0.1, 1.0, 10.0];
                cfg.sweep_samples = vec![100, 1000, 10_000];
            }
            Family::NoisyLmm => {
                cfg.sigma = 0.005;
                cfg.delta = 10.0;
                cfg.samples = 10 * n;
                cfg.sweep_deltas = vec![1.0, 10.0, 100.0];
                cfg.sweep_samples = vec![n / 10, n, 10 * n];
            }
        }
        cfg
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if self.m == 0 || self.n == 0 {
            return bad(format!("dimensions must be positive, got {}x{}", self.m, self.n));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        for (name, v) in [
            ("delta", self.delta),
            ("delta2", self.delta2),
            ("lambda", self.lambda_reg),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be nonnegative, got {}", self.sigma));
        }
        if self.samples == 0 || self.sweep_samples.contains(&0) {
            return bad("sample counts must be positive".into());
        }
        if self.sweep_deltas.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return bad("swept deltas must be positive".into());
        }
        Ok(())
    }

    /// The `(delta, samples)` pairs of the two sweeps, deduplicated, in
    /// order: the delta sweep at fixed samples, then the sample sweep at fixed
    /// delta.
    pub fn sweep_pairs(&self) -> Vec<(f64, usize)> {
        let mut out: Vec<(f64, usize)> = Vec::new();
        let pairs = self
            .sweep_deltas
            .iter()
            .map(|&d| (d, self.samples))
            .chain(self.sweep_samples.iter().map(|&n| (self.delta, n)));
        for p in pairs {
            if !out.contains(&p) {
                out.push(p);
            }
        }
        if out.is_empty() {
            out.push((self.delta, self.samples));
        }
        out
    }

    fn warn_if_paper_scale(&self) {
        if self.scale == Scale::Paper {
            log::warn!(
                "paper scale ({}x{}, {} trials, {} iterations) can take hours",
                self.m,
                self.n,
                self.trials,
                self.iters
            );
        }
    }
}

/// Seed of trial `trial`. Every swept configuration reuses the same trial
/// seeds, so configurations are compared on common random numbers.
pub fn trial_seed(base: u64, trial: usize) -> u64 {
    mix_seed(base, trial as u64 + 1)
}

/// All trials of one `(delta, samples)` configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct HjRun {
    pub delta: f64,
    pub samples: usize,
    /// Successful trials as `(trial, trace)`.
    pub traces: Vec<(usize, SolverTrace)>,
    /// Failed trials as `(trial, error message)`.
    pub failures: Vec<(usize, String)>,
}

impl HjRun {
    pub fn stem(&self, prefix: &str) -> String {
        format!("{prefix}_hj_delta{}_n{}", self.delta, self.samples)
    }

    /// Per-iteration values of `column` across successful trials.
    pub fn per_iter(&self, column: impl Fn(&SolverTrace) -> &[f64]) -> Vec<Vec<f64>> {
        let len = self
            .traces
            .iter()
            .map(|(_, t)| column(t).len())
            .min()
            .unwrap_or(0);
        (0..len)
            .map(|k| self.traces.iter().map(|(_, t)| column(t)[k]).collect())
            .collect()
    }

    pub fn mean_curve(&self, column: impl Fn(&SolverTrace) -> &[f64]) -> Vec<f64> {
        self.per_iter(column)
            .iter()
            .map(|v| v.iter().sum::<f64>() / v.len() as f64)
            .collect()
    }

    pub fn final_values(&self, column: impl Fn(&SolverTrace) -> &[f64]) -> Vec<f64> {
        self.traces
            .iter()
            .filter_map(|(_, t)| column(t).last().copied())
            .collect()
    }

    pub fn total_oracle_calls(&self) -> u64 {
        self.traces
            .iter()
            .filter_map(|(_, t)| t.oracle_calls.last())
            .sum()
    }

    fn write(&self, dir: &std::path::Path, prefix: &str, column: fn(&SolverTrace) -> &[f64]) -> Result<Vec<String>, ExperimentError> {
        let stem = self.stem(prefix);
        let trace_file = format!("{stem}.csv");
        let summary_file = format!("{stem}_summary.csv");
        write_trace_csv(&dir.join(&trace_file), self.traces.iter().map(|(k, t)| (*k, t)))?;
        write_summary_csv(&dir.join(&summary_file), &self.per_iter(column))?;
        Ok(vec![trace_file, summary_file])
    }
}

fn record_runs(m: &mut Manifest, runs: &[HjRun], prefix: &str) {
    for r in runs {
        let stem = r.stem(prefix);
        m.set(&format!("{stem}.trials_ok"), r.traces.len());
        m.set(&format!("{stem}.oracle_calls"), r.total_oracle_calls());
        for (trial, e) in &r.failures {
            m.set(&format!("{stem}.failure.{trial}"), e);
        }
    }
}

fn gaussian_matrix(rng: &mut impl rand::Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Gaussian `A` (m×n) and `b` (m) from one seeded stream, `A` filled column by
/// column.
pub fn gen_problem(seed: u64, m: usize, n: usize) -> LinearProblem {
    assert!(m >= 1 && n >= 1, "problem dimensions must be positive");
    let mut rng = rng_from_seed(seed);
    let a = gaussian_matrix(&mut rng, m, n);
    let b = Vector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
    LinearProblem::new(a, b)
}

/// Median of a nonempty slice (NaN sorted last).
pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Linear-interpolated quantile of a nonempty slice.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    assert!(!xs.is_empty());
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

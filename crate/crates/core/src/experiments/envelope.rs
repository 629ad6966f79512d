//! Envelope and prox estimates of the 1-D builtins on a grid, next to the
//! exact values and the quadrature reference.

use std::sync::Arc;

use super::output::{write_envelope_csv, Manifest};
use super::{ExperimentConfig, ExperimentError};
use crate::analytic::{
    envelope_from_prox, prox_iterative_from, prox_log_barrier, AnalyticProx, IterOptions,
};
use crate::exec::{map_indices, mix_seed};
use crate::hj::{envelope_gradient, noisy_envelope, quadrature_reference_1d, ProxParams};
use crate::oracle::{make_noisy, Builtin, BuiltinParams, NoiseSpec, Objective};
use crate::{version_string, FunctionOracle, Vector};

/// One function and prox time step of the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCase {
    pub function: String,
    pub t: f64,
    /// Curvature of `neg_quadratic`.
    pub a: Option<f64>,
}

impl SweepCase {
    pub fn new(function: &str, t: f64) -> Self {
        SweepCase {
            function: function.to_string(),
            t,
            a: None,
        }
    }

    /// The builtin rows at their reference time steps.
    pub fn defaults() -> Vec<SweepCase> {
        vec![
            SweepCase::new("l1", 0.1),
            SweepCase::new("quadratic_linear", 0.5),
            SweepCase::new("log_barrier", 2.0),
            SweepCase::new("neg_l1", 0.1),
            SweepCase::new("neg_l1", 0.2),
            SweepCase::new("neg_quadratic", 0.1),
            SweepCase::new("neg_quadratic", 0.2),
            SweepCase::new("quad_minus_log", 0.5),
        ]
    }

    fn builtin(&self) -> Result<Builtin, ExperimentError> {
        Ok(Builtin::parse(
            &self.function,
            &BuiltinParams {
                dim: 1,
                a: self.a,
                ..Default::default()
            },
        )?)
    }

    fn analytic(&self, b: &Builtin) -> Option<AnalyticProx> {
        match b {
            Builtin::L1 { .. } => Some(AnalyticProx::L1),
            Builtin::QuadraticLinear { b } => Some(AnalyticProx::QuadraticLinear { b: b.clone() }),
            Builtin::LogBarrier { .. } => Some(AnalyticProx::LogBarrier),
            Builtin::NegL1 { .. } => Some(AnalyticProx::NegL1),
            Builtin::NegQuadratic { a, .. } => Some(AnalyticProx::NegQuadratic { a: *a }),
            _ => None,
        }
    }
}

/// One grid point of the sweep; `None` marks a value that is unavailable or
/// whose computation failed.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeRow {
    pub function: String,
    pub t: f64,
    pub delta: f64,
    pub delta2: Option<f64>,
    pub x: f64,
    pub f: f64,
    pub u_exact: Option<f64>,
    pub u_mc: Option<f64>,
    pub u_quad: Option<f64>,
    pub prox_exact: Option<f64>,
    pub prox_hj: Option<f64>,
    pub abs_err: Option<f64>,
}

/// Result of a sweep: rows in CSV order and the failures met on the way.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeOutcome {
    pub rows: Vec<EnvelopeRow>,
    /// Present when `sigma > 0`.
    pub noisy_rows: Option<Vec<EnvelopeRow>>,
    pub errors: Vec<String>,
    pub manifest_path: std::path::PathBuf,
}

fn exact(
    case: &SweepCase,
    b: &Builtin,
    oracle: &FunctionOracle,
    x: f64,
) -> Result<(f64, f64), String> {
    let xs = Vector::from_element(1, x);
    let t = case.t;
    match case.analytic(b) {
        Some(ap) => {
            let p = ap.prox(&xs, t).map_err(|e| e.to_string())?;
            let u = ap.envelope(&xs, t).map_err(|e| e.to_string())?;
            Ok((u, p[0]))
        }
        None => {
            // start inside the domain of barrier-type functions
            let start = if b.eval(&[x]).is_finite() {
                xs.clone()
            } else {
                prox_log_barrier(&xs, t)
            };
            let p = prox_iterative_from(&xs, &start, t, oracle, None, &IterOptions::default())
                .map_err(|e| e.to_string())?;
            Ok((envelope_from_prox(b.eval(p.as_slice()), &p, &xs, t), p[0]))
        }
    }
}

fn row_seed(cfg: &ExperimentConfig, case_idx: usize, point: usize, noisy: bool) -> u64 {
    let stream = ((case_idx as u64) << 32) | point as u64;
    mix_seed(cfg.seed ^ u64::from(noisy), stream)
}

fn sweep_row(
    cfg: &ExperimentConfig,
    case_idx: usize,
    case: &SweepCase,
    point: usize,
    x: f64,
    noisy: bool,
) -> Result<(EnvelopeRow, Vec<String>), ExperimentError> {
    let b = case.builtin()?;
    let oracle = Arc::new(b.clone().oracle().with_exec(cfg.exec));
    let mut errors = Vec::new();
    let mut note = |what: &str, e: String| {
        errors.push(format!("{} t={} x={x} {what}: {e}", case.function, case.t))
    };
    let xs = Vector::from_element(1, x);
    let (u_exact, prox_exact) = match exact(case, &b, &oracle, x) {
        Ok((u, p)) => (Some(u), Some(p)),
        Err(e) => {
            note("exact", e);
            (None, None)
        }
    };
    let params = ProxParams {
        t: case.t,
        delta: cfg.delta,
        num_samples: cfg.samples,
        alpha: cfg.alpha,
        eps_underflow: cfg.eps_underflow,
        seed: row_seed(cfg, case_idx, point, noisy),
        ..Default::default()
    };
    let estimate = if noisy {
        let noisy_oracle = make_noisy(
            oracle.clone(),
            NoiseSpec {
                sigma: cfg.sigma,
                seed: mix_seed(params.seed, 1),
            },
        )?;
        noisy_envelope(&xs, &noisy_oracle, &params, cfg.delta2)
    } else {
        envelope_gradient(&xs, &oracle, &params)
    };
    let (u_mc, prox_hj) = match estimate {
        Ok(e) => (Some(e.value), Some(x - case.t * e.gradient[0])),
        Err(e) => {
            note("estimate", e.to_string());
            (None, None)
        }
    };
    let u_quad = if noisy {
        None
    } else {
        match quadrature_reference_1d(x, case.t, |y| b.eval(&[y]), cfg.delta) {
            Ok(q) => Some(q.value),
            Err(e) => {
                note("quadrature", e.to_string());
                None
            }
        }
    };
    let abs_err = match (u_mc, u_exact) {
        (Some(a), Some(b)) => Some((a - b).abs()),
        _ => None,
    };
    let row = EnvelopeRow {
        function: case.function.clone(),
        t: case.t,
        delta: cfg.delta,
        delta2: noisy.then_some(cfg.delta2),
        x,
        f: b.eval(&[x]),
        u_exact,
        u_mc,
        u_quad,
        prox_exact,
        prox_hj,
        abs_err,
    };
    Ok((row, errors))
}

fn sweep_rows(
    cfg: &ExperimentConfig,
    cases: &[SweepCase],
    noisy: bool,
) -> Result<(Vec<EnvelopeRow>, Vec<String>), ExperimentError> {
    let grid = cfg.grid.points();
    let jobs: Vec<(usize, usize, f64)> = (0..cases.len())
        .flat_map(|c| grid.iter().enumerate().map(move |(i, &x)| (c, i, x)))
        .collect();
    let results = map_indices(jobs.len(), cfg.exec, |j| {
        let (c, i, x) = jobs[j];
        sweep_row(cfg, c, &cases[c], i, x, noisy)
    });
    let mut rows = Vec::with_capacity(jobs.len());
    let mut errors = Vec::new();
    for r in results {
        let (row, errs) = r?;
        rows.push(row);
        errors.extend(errs);
    }
    Ok((rows, errors))
}

/// Runs the given cases over `cfg.grid` and writes `envelope.csv` (and
/// `envelope_noisy.csv` when `cfg.sigma > 0`) plus the manifest into
/// `cfg.out_dir`. Per-point failures leave empty fields and are listed in
/// the manifest.
pub fn run_envelope_cases(
    cfg: &ExperimentConfig,
    cases: &[SweepCase],
) -> Result<EnvelopeOutcome, ExperimentError> {
    cfg.validate()?;
    for c in cases {
        c.builtin()?;
        if !(c.t > 0.0 && c.t.is_finite()) {
            return Err(ExperimentError::Config(format!("t must be positive, got {}", c.t)));
        }
    }
    let (rows, mut errors) = sweep_rows(cfg, cases, false)?;
    write_envelope_csv(&cfg.out_dir.join("envelope.csv"), &rows)?;
    let noisy_rows = if cfg.sigma > 0.0 {
        let (noisy, errs) = sweep_rows(cfg, cases, true)?;
        errors.extend(errs);
        write_envelope_csv(&cfg.out_dir.join("envelope_noisy.csv"), &noisy)?;
        Some(noisy)
    } else {
        None
    };
    for e in &errors {
        log::warn!("{e}");
    }

    let mut m = Manifest::default();
    m.set("family", cfg.family.as_str());
    m.set("version", version_string());
    m.set("seed", cfg.seed);
    m.set("grid", cfg.grid);
    m.set("delta", cfg.delta);
    m.set("delta2", cfg.delta2);
    m.set("samples", cfg.samples);
    m.set("alpha", cfg.alpha);
    m.set("eps_underflow", cfg.eps_underflow);
    m.set("sigma", cfg.sigma);
    let names: Vec<String> = cases
        .iter()
        .map(|c| format!("{}@t={}", c.function, c.t))
        .collect();
    m.set("cases", names.join(";"));
    let estimates = rows.iter().filter(|r| r.u_mc.is_some()).count() as u64;
    let mut calls = estimates * cfg.samples as u64;
    if let Some(n) = &noisy_rows {
        let s = cfg.samples as u64;
        calls += n.iter().filter(|r| r.u_mc.is_some()).count() as u64 * s * s;
    }
    // lower bound: stabilisation recursions draw extra batches
    m.set("total_oracle_calls_min", calls);
    m.set("files", if noisy_rows.is_some() { "envelope.csv;envelope_noisy.csv" } else { "envelope.csv" });
    m.set("errors", errors.len());
    for (i, e) in errors.iter().enumerate() {
        m.set(&format!("error.{i}"), e);
    }
    let manifest_path = m.write(&cfg.out_dir)?;
    Ok(EnvelopeOutcome {
        rows,
        noisy_rows,
        errors,
        manifest_path,
    })
}

/// [`run_envelope_cases`] over the default cases, filtered by
/// `cfg.functions` when that is nonempty.
pub fn run_envelope_sweep(cfg: &ExperimentConfig) -> Result<EnvelopeOutcome, ExperimentError> {
    let cases: Vec<SweepCase> = SweepCase::defaults()
        .into_iter()
        .filter(|c| cfg.functions.is_empty() || cfg.functions.contains(&c.function))
        .collect();
    if cases.is_empty() {
        return Err(ExperimentError::Config(format!(
            "no sweep case matches {:?}",
            cfg.functions
        )));
    }
    run_envelope_cases(cfg, &cases)
}

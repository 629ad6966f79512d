//! `min E[O(x)] s.t. Ax = b` for a noisy oracle `O = (1 + σε)‖Wx‖₁`, by the
//! linearized method of multipliers with sampled prox.

use std::path::PathBuf;
use std::sync::Arc;

use super::output::{write_trace_csv, Manifest};
use super::{
    format_float, gaussian_matrix, gen_problem, record_runs, trial_seed, ExperimentConfig,
    ExperimentError, HjRun,
};
use crate::exec::{map_indices, mix_seed, rng_from_seed};
use crate::hj::ProxParams;
use crate::oracle::{make_noisy, Builtin, NoiseSpec};
use crate::solvers::{
    gradient_descent, linearized_mm, weighted_l1_reference, HjProvider, MmSteps,
    ReferenceSolution, RunOptions, SolverTrace,
};
use crate::{version_string, Matrix, Vector};

/// ADMM stopping tolerance and budget of the reference solve.
const REFERENCE_TOL: f64 = 1e-10;
const REFERENCE_MAX_ITERS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct LmmOutcome {
    pub w: Matrix,
    pub reference: ReferenceSolution,
    /// Gradient descent on `½‖Ax - b‖²`.
    pub gradient_descent: SolverTrace,
    pub runs: Vec<HjRun>,
    pub manifest_path: PathBuf,
}

/// `W` of the experiment, from its own stream of the base seed.
pub fn lmm_weight_matrix(seed: u64, n: usize) -> Matrix {
    gaussian_matrix(&mut rng_from_seed(mix_seed(seed, 0x57)), n, n)
}

pub fn run_noisy_lmm_experiment(cfg: &ExperimentConfig) -> Result<LmmOutcome, ExperimentError> {
    cfg.validate()?;
    cfg.warn_if_paper_scale();
    let prob = gen_problem(cfg.seed, cfg.m, cfg.n);
    let w = lmm_weight_matrix(cfg.seed, cfg.n);
    let reference = weighted_l1_reference(&prob, &w, REFERENCE_TOL, REFERENCE_MAX_ITERS)?;
    if reference.residual > 1e-8 || reference.dual_residual > 1e-8 {
        log::warn!(
            "reference solve stopped at residual {:e}, dual residual {:e}",
            reference.residual,
            reference.dual_residual
        );
    }
    let x_star = reference.x.clone();
    let x0 = Vector::zeros(cfg.n);
    let u0 = Vector::zeros(cfg.m);
    let opts = RunOptions {
        timing: cfg.timing,
        ..RunOptions::new(cfg.iters).with_reference(x_star.clone())
    };
    let base = Arc::new(Builtin::WeightedL1 { w: w.clone() }.oracle().with_exec(cfg.exec));
    let steps = MmSteps::default_for(&prob);

    let gd = gradient_descent(
        |x| prob.ls_gradient(x),
        |x| ((&w * x).lp_norm(1), prob.residual(x).norm()),
        &x0,
        1.0 / prob.lip,
        &opts,
    )?;

    let mut runs = Vec::new();
    for (delta, samples) in cfg.sweep_pairs() {
        log::info!("noisy lmm: delta={delta} samples={samples}, {} trials", cfg.trials);
        let results = map_indices(cfg.trials, cfg.exec, |trial| {
            let seed = trial_seed(cfg.seed, trial);
            let noisy = Arc::new(make_noisy(
                base.clone(),
                NoiseSpec {
                    sigma: cfg.sigma,
                    seed: mix_seed(seed, 1),
                },
            )?);
            let params = ProxParams {
                delta,
                num_samples: samples,
                alpha: cfg.alpha,
                eps_underflow: cfg.eps_underflow,
                seed,
                ..Default::default()
            };
            let mut provider = HjProvider::new(noisy, params);
            Ok::<_, ExperimentError>(linearized_mm(
                &prob,
                Some(&base),
                &mut provider,
                steps,
                &x0,
                &u0,
                &opts,
            )?)
        });
        let mut run = HjRun {
            delta,
            samples,
            traces: vec![],
            failures: vec![],
        };
        for (trial, r) in results.into_iter().enumerate() {
            match r {
                Ok(t) => run.traces.push((trial, t)),
                Err(e) => {
                    log::warn!("lmm trial {trial} (delta={delta}, N={samples}) failed: {e}");
                    run.failures.push((trial, e.to_string()));
                }
            }
        }
        runs.push(run);
    }

    let dir = &cfg.out_dir;
    let mut files = vec!["lmm_gd.csv".to_string()];
    write_trace_csv(&dir.join(&files[0]), [(0, &gd)])?;
    for r in &runs {
        files.extend(r.write(dir, "lmm", |t| {
            t.rel_error.as_deref().expect("lmm traces carry rel_error")
        })?);
    }

    let mut m = Manifest::default();
    m.set("family", cfg.family.as_str());
    m.set("version", version_string());
    m.set("scale", cfg.scale.as_str());
    m.set("m", cfg.m);
    m.set("n", cfg.n);
    m.set("seed", cfg.seed);
    m.set("trial_seeds", "mix_seed(seed, trial + 1), shared by all configurations");
    m.set("trials", cfg.trials);
    m.set("iters", cfg.iters);
    m.set("sigma", cfg.sigma);
    m.set("t", format_float(steps.t));
    m.set("lambda", steps.lam);
    m.set("alpha", cfg.alpha);
    m.set("eps_underflow", cfg.eps_underflow);
    m.set("sweep_deltas_at_samples", format!("{:?}@{}", cfg.sweep_deltas, cfg.samples));
    m.set("sweep_samples_at_delta", format!("{:?}@{}", cfg.sweep_samples, cfg.delta));
    m.set(
        "delta_note",
        "delta swept at every scale; the best delta depends on n",
    );
    m.set("reference.method", "ADMM on z = Wx");
    m.set("reference.iters", reference.iters);
    m.set("reference.residual", format_float(reference.residual));
    m.set("reference.primal_gap", format_float(reference.primal_gap));
    m.set("reference.dual_residual", format_float(reference.dual_residual));
    record_runs(&mut m, &runs, "lmm");
    let total: u64 = runs.iter().map(HjRun::total_oracle_calls).sum();
    m.set("total_oracle_calls", total);
    m.set("files", files.join(";"));
    let manifest_path = m.write(dir)?;
    Ok(LmmOutcome {
        w,
        reference,
        gradient_descent: gd,
        runs,
        manifest_path,
    })
}

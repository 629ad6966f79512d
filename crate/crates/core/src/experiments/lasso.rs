//! `½‖Ax - b‖² + λ‖x‖₁` by ISTA with exact, sampled and no prox.

use std::path::PathBuf;
use std::sync::Arc;

use super::output::{write_trace_csv, Manifest};
use super::{gen_problem, record_runs, trial_seed, ExperimentConfig, ExperimentError, HjRun};
use crate::analytic::AnalyticProx;
use crate::exec::map_indices;
use crate::hj::ProxParams;
use crate::oracle::{builtin, BuiltinParams};
use crate::solvers::{
    gradient_descent, ista_with_threshold, lasso_objective, AnalyticProvider, HjProvider,
    RunOptions, SolverTrace,
};
use crate::{version_string, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct LassoOutcome {
    /// ISTA with the exact soft-threshold.
    pub analytic: SolverTrace,
    /// Gradient descent on the least-squares term; the objective column
    /// still includes the `λ‖x‖₁` term.
    pub gradient_descent: SolverTrace,
    pub runs: Vec<HjRun>,
    pub manifest_path: PathBuf,
}

/// Runs the exact-prox and no-prox baselines once and sampled-prox ISTA for
/// every configuration of [`ExperimentConfig::sweep_pairs`] over
/// `cfg.trials` seeds, writing one CSV per run into `cfg.out_dir`.
pub fn run_lasso_experiment(cfg: &ExperimentConfig) -> Result<LassoOutcome, ExperimentError> {
    cfg.validate()?;
    cfg.warn_if_paper_scale();
    let prob = gen_problem(cfg.seed, cfg.m, cfg.n);
    let threshold = cfg.ista_threshold.unwrap_or(cfg.lambda_reg);
    let x0 = Vector::zeros(cfg.n);
    let opts = RunOptions {
        timing: cfg.timing,
        ..RunOptions::new(cfg.iters)
    };

    let analytic = ista_with_threshold(
        &prob,
        cfg.lambda_reg,
        threshold,
        &mut AnalyticProvider(AnalyticProx::L1),
        &x0,
        &opts,
    )?;
    let gd = gradient_descent(
        |x| prob.ls_gradient(x),
        |x| (lasso_objective(&prob, cfg.lambda_reg, x), prob.residual(x).norm()),
        &x0,
        1.0 / prob.lip,
        &opts,
    )?;

    let oracle = Arc::new(
        builtin(
            "l1",
            &BuiltinParams {
                dim: cfg.n,
                ..Default::default()
            },
        )?
        .with_exec(cfg.exec),
    );
    let mut runs = Vec::new();
    for (delta, samples) in cfg.sweep_pairs() {
        log::info!("lasso: delta={delta} samples={samples}, {} trials", cfg.trials);
        let results = map_indices(cfg.trials, cfg.exec, |trial| {
            let params = ProxParams {
                delta,
                num_samples: samples,
                alpha: cfg.alpha,
                eps_underflow: cfg.eps_underflow,
                seed: trial_seed(cfg.seed, trial),
                ..Default::default()
            };
            let mut provider = HjProvider::new(oracle.clone(), params);
            ista_with_threshold(&prob, cfg.lambda_reg, threshold, &mut provider, &x0, &opts)
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
                    log::warn!("lasso trial {trial} (delta={delta}, N={samples}) failed: {e}");
                    run.failures.push((trial, e.to_string()));
                }
            }
        }
        runs.push(run);
    }

    let dir = &cfg.out_dir;
    let mut files = vec!["lasso_analytic.csv".to_string(), "lasso_gd.csv".to_string()];
    write_trace_csv(&dir.join(&files[0]), [(0, &analytic)])?;
    write_trace_csv(&dir.join(&files[1]), [(0, &gd)])?;
    for r in &runs {
        files.extend(r.write(dir, "lasso", |t| &t.objective)?);
    }

    let mut m = Manifest::default();
    m.set("family", cfg.family.as_str());
    m.set("version", version_string());
    m.set("scale", cfg.scale.as_str());
    m.set("m", cfg.m);
    m.set("n", cfg.n);
    m.set("seed", cfg.seed);
    m.set("problem_seed", cfg.seed);
    m.set("trial_seeds", "mix_seed(seed, trial + 1), shared by all configurations");
    m.set("trials", cfg.trials);
    m.set("iters", cfg.iters);
    m.set("lambda", cfg.lambda_reg);
    m.set("ista_threshold", threshold);
    m.set("lip", crate::experiments::format_float(prob.lip));
    m.set("alpha", cfg.alpha);
    m.set("eps_underflow", cfg.eps_underflow);
    m.set("sweep_deltas_at_samples", format!("{:?}@{}", cfg.sweep_deltas, cfg.samples));
    m.set("sweep_samples_at_delta", format!("{:?}@{}", cfg.sweep_samples, cfg.delta));
    record_runs(&mut m, &runs, "lasso");
    let total: u64 = runs.iter().map(HjRun::total_oracle_calls).sum();
    m.set("total_oracle_calls", total);
    m.set("files", files.join(";"));
    let manifest_path = m.write(dir)?;
    Ok(LassoOutcome {
        analytic,
        gradient_descent: gd,
        runs,
        manifest_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{parse_trace_csv, read_manifest, Family, Scale};

    fn small(dir: &std::path::Path) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(Family::Lasso, Scale::Desk);
        c.m = 10;
        c.n = 20;
        c.trials = 3;
        c.iters = 25;
        c.sweep_deltas = vec![1.0];
        c.sweep_samples = vec![50];
        c.samples = 100;
        c.out_dir = dir.to_path_buf();
        c
    }

    #[test]
    fn schema_and_initial_objective() {
        let dir = tempfile::tempdir().unwrap();
        let c = small(dir.path());
        let out = run_lasso_experiment(&c).unwrap();
        let prob = gen_problem(c.seed, c.m, c.n);
        assert_eq!(out.analytic.objective[0], 0.5 * prob.b.norm_squared());
        assert_eq!(out.runs.len(), 2);
        for r in &out.runs {
            assert_eq!(r.traces.len(), 3);
            let back = parse_trace_csv(&dir.path().join(format!("{}.csv", r.stem("lasso")))).unwrap();
            assert_eq!(back.len(), 3);
            for ((k, a), (j, b)) in back.iter().zip(r.traces.iter()) {
                assert_eq!(k, j);
                assert_eq!(a.objective.len(), c.iters + 1);
                assert_eq!(a, b);
            }
        }
        let m = read_manifest(&out.manifest_path).unwrap();
        assert!(m.get("total_oracle_calls").unwrap().parse::<u64>().unwrap() > 0);
        assert_eq!(m.get("version"), Some(version_string()));
    }

    #[test]
    fn byte_identical_reruns() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_lasso_experiment(&small(a.path())).unwrap();
        run_lasso_experiment(&small(b.path())).unwrap();
        let mut names: Vec<_> = std::fs::read_dir(a.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        assert!(names.len() >= 6);
        for n in names {
            let x = std::fs::read(a.path().join(&n)).unwrap();
            let y = std::fs::read(b.path().join(&n)).unwrap();
            assert_eq!(x, y, "{n:?}");
        }
    }

    #[test]
    fn threshold_override_changes_the_prox_only() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small(dir.path());
        c.sweep_deltas.clear();
        c.sweep_samples.clear();
        let base = run_lasso_experiment(&c).unwrap();
        c.ista_threshold = Some(0.01);
        let printed = run_lasso_experiment(&c).unwrap();
        assert_eq!(base.analytic.objective[0], printed.analytic.objective[0]);
        assert_ne!(base.analytic.objective[5], printed.analytic.objective[5]);
    }
}

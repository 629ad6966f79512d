//! Proximal-splitting solvers with a pluggable prox.
//!
//! [`ista`] solves `½‖Ax - b‖² + λ‖x‖₁`, [`linearized_mm`] solves
//! `min f(x) s.t. Ax = b`, and [`gradient_descent`] is the prox-free
//! baseline. The prox step comes from a [`ProxProvider`]: a closed form, a
//! numerical solve, or the sampling estimator.

use std::sync::Arc;
use std::time::Instant;

use crate::analytic::{prox_iterative, AnalyticProx, IterOptions, ProxError, WeightedL1Prox};
use crate::hj::{hj_prox, HjError, ProxParams};
use crate::linalg::LinearProblem;
use crate::oracle::FunctionOracle;
use crate::{Matrix, Vector};

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("iterate became non-finite at iteration {iter}")]
    Diverged { iter: usize, trace: Box<SolverTrace> },
    #[error("x0 has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{0}")]
    InvalidParams(String),
    #[error(transparent)]
    Prox(#[from] ProxError),
    #[error(transparent)]
    Hj(#[from] HjError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProviderKind {
    Analytic,
    Iterative,
    Hj,
}

impl ProviderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProviderKind::Analytic => "analytic",
            ProviderKind::Iterative => "iterative",
            ProviderKind::Hj => "hj",
        }
    }
}

/// One prox evaluation with its cost.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxStep {
    pub point: Vector,
    /// Objective oracle evaluations spent on this call.
    pub oracle_calls: u64,
    /// Stabilisation recursions (sampling estimator only).
    pub recursions: u32,
}

/// Source of `prox_{t f}` for the solvers. `iter` is the solver iteration,
/// which stochastic providers use to derive fresh seeds.
pub trait ProxProvider {
    fn kind(&self) -> ProviderKind;
    fn apply(&mut self, x: &Vector, t: f64, iter: usize) -> Result<ProxStep, SolverError>;
}

pub struct AnalyticProvider(pub AnalyticProx);

impl ProxProvider for AnalyticProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Analytic
    }

    fn apply(&mut self, x: &Vector, t: f64, _iter: usize) -> Result<ProxStep, SolverError> {
        Ok(ProxStep {
            point: self.0.prox(x, t)?,
            oracle_calls: 0,
            recursions: 0,
        })
    }
}

/// Numerical prox: gradient descent on the prox subproblem of a black-box
/// objective, or the dual solver for `‖W·‖₁`.
pub enum IterativeProvider {
    Descent {
        oracle: Arc<FunctionOracle>,
        opts: IterOptions,
    },
    WeightedL1(WeightedL1Prox),
}

impl IterativeProvider {
    pub fn descent(oracle: Arc<FunctionOracle>) -> Self {
        IterativeProvider::Descent {
            oracle,
            opts: IterOptions::default(),
        }
    }

    pub fn weighted_l1(w: Matrix) -> Self {
        IterativeProvider::WeightedL1(WeightedL1Prox::new(w))
    }
}

impl ProxProvider for IterativeProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Iterative
    }

    fn apply(&mut self, x: &Vector, t: f64, _iter: usize) -> Result<ProxStep, SolverError> {
        match self {
            IterativeProvider::Descent { oracle, opts } => {
                let before = oracle.calls();
                let point = prox_iterative(x, t, oracle, None, opts)?;
                Ok(ProxStep {
                    point,
                    oracle_calls: oracle.calls() - before,
                    recursions: 0,
                })
            }
            IterativeProvider::WeightedL1(p) => Ok(ProxStep {
                point: p.apply(x, t).0,
                oracle_calls: 0,
                recursions: 0,
            }),
        }
    }
}

/// Sampling-estimator prox. Iteration `k` runs with seed
/// `base_seed ^ (k << 32)`, which keeps it clear of the per-recursion seeds.
pub struct HjProvider {
    pub oracle: Arc<FunctionOracle>,
    pub params: ProxParams,
}

impl HjProvider {
    pub fn new(oracle: Arc<FunctionOracle>, params: ProxParams) -> Self {
        HjProvider { oracle, params }
    }
}

impl ProxProvider for HjProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Hj
    }

    fn apply(&mut self, x: &Vector, t: f64, iter: usize) -> Result<ProxStep, SolverError> {
        let p = self
            .params
            .with_t(t)
            .with_seed(self.params.seed ^ ((iter as u64) << 32));
        let r = hj_prox(x, &self.oracle, &p)?;
        Ok(ProxStep {
            point: r.estimate,
            oracle_calls: p.num_samples as u64 * (r.recursion_count as u64 + 1),
            recursions: r.recursion_count,
        })
    }
}

/// Per-iteration record of a solver run. Every list has one entry per
/// iterate, index 0 being the starting point.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolverTrace {
    pub iterates: Option<Vec<Vector>>,
    pub objective: Vec<f64>,
    /// `‖Ax - b‖`
    pub residual: Vec<f64>,
    /// `‖x - x*‖ / ‖x*‖` when a reference was supplied.
    pub rel_error: Option<Vec<f64>>,
    /// Cumulative oracle evaluations.
    pub oracle_calls: Vec<u64>,
    /// Wall time of each iteration; all zero unless timing was requested.
    pub wall_ns: Vec<u64>,
}

impl SolverTrace {
    /// Number of iterations recorded (excluding the starting point).
    pub fn iters(&self) -> usize {
        self.objective.len().saturating_sub(1)
    }

    pub fn final_objective(&self) -> f64 {
        *self.objective.last().expect("empty trace")
    }

    pub fn final_rel_error(&self) -> Option<f64> {
        self.rel_error.as_ref().and_then(|r| r.last().copied())
    }
}

/// Run-length and recording options shared by the solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub iters: usize,
    /// Reference solution for `rel_error`.
    pub reference: Option<Vector>,
    pub keep_iterates: bool,
    pub timing: bool,
}

impl RunOptions {
    pub fn new(iters: usize) -> Self {
        RunOptions {
            iters,
            reference: None,
            keep_iterates: false,
            timing: false,
        }
    }

    pub fn with_reference(mut self, x_star: Vector) -> Self {
        self.reference = Some(x_star);
        self
    }
}

struct Recorder<'a> {
    trace: SolverTrace,
    opts: &'a RunOptions,
    ref_norm: f64,
    calls: u64,
    clock: Instant,
}

impl<'a> Recorder<'a> {
    fn new(opts: &'a RunOptions) -> Self {
        let ref_norm = opts.reference.as_ref().map_or(1.0, |r| r.norm());
        Recorder {
            trace: SolverTrace {
                iterates: opts.keep_iterates.then(Vec::new),
                rel_error: opts.reference.as_ref().map(|_| Vec::new()),
                ..Default::default()
            },
            opts,
            ref_norm: if ref_norm > 0.0 { ref_norm } else { 1.0 },
            calls: 0,
            clock: Instant::now(),
        }
    }

    fn push(&mut self, x: &Vector, objective: f64, residual: f64, new_calls: u64) {
        self.calls += new_calls;
        let t = &mut self.trace;
        t.objective.push(objective);
        t.residual.push(residual);
        t.oracle_calls.push(self.calls);
        if let (Some(r), Some(xs)) = (t.rel_error.as_mut(), self.opts.reference.as_ref()) {
            r.push((x - xs).norm() / self.ref_norm);
        }
        if let Some(it) = t.iterates.as_mut() {
            it.push(x.clone());
        }
        let ns = if self.opts.timing {
            let ns = self.clock.elapsed().as_nanos() as u64;
            self.clock = Instant::now();
            ns
        } else {
            0
        };
        t.wall_ns.push(ns);
    }

    fn diverged(self, iter: usize) -> SolverError {
        SolverError::Diverged {
            iter,
            trace: Box::new(self.trace),
        }
    }
}

fn check_dim(x0: &Vector, n: usize) -> Result<(), SolverError> {
    if x0.len() != n {
        return Err(SolverError::DimensionMismatch {
            expected: n,
            got: x0.len(),
        });
    }
    Ok(())
}

fn check_prox_dim(step: &ProxStep, n: usize) -> Result<(), SolverError> {
    if step.point.len() != n {
        return Err(SolverError::InvalidParams(format!(
            "prox provider returned dimension {}, expected {n}",
            step.point.len()
        )));
    }
    Ok(())
}

/// `½‖Ax - b‖² + λ‖x‖₁`
pub fn lasso_objective(prob: &LinearProblem, lambda_reg: f64, x: &Vector) -> f64 {
    0.5 * prob.residual(x).norm_squared() + lambda_reg * x.lp_norm(1)
}

/// Proximal gradient on `½‖Ax - b‖² + λ‖x‖₁` with step `β = 1/‖AᵀA‖₂`:
/// `x ← prox_{λβ‖·‖₁}(x - βAᵀ(Ax - b))`.
pub fn ista(
    prob: &LinearProblem,
    lambda_reg: f64,
    prox: &mut dyn ProxProvider,
    x0: &Vector,
    opts: &RunOptions,
) -> Result<SolverTrace, SolverError> {
    ista_with_threshold(prob, lambda_reg, lambda_reg, prox, x0, opts)
}

/// [`ista`] with the prox threshold `threshold·β` decoupled from the
/// objective's `lambda_reg`.
pub fn ista_with_threshold(
    prob: &LinearProblem,
    lambda_reg: f64,
    threshold: f64,
    prox: &mut dyn ProxProvider,
    x0: &Vector,
    opts: &RunOptions,
) -> Result<SolverTrace, SolverError> {
    check_dim(x0, prob.cols())?;
    if !(lambda_reg > 0.0 && threshold > 0.0) {
        return Err(SolverError::InvalidParams(format!(
            "lambda and threshold must be positive, got {lambda_reg}, {threshold}"
        )));
    }
    let beta = 1.0 / prob.lip;
    let t = threshold * beta;
    let mut rec = Recorder::new(opts);
    let mut x = x0.clone();
    rec.push(
        &x,
        lasso_objective(prob, lambda_reg, &x),
        prob.residual(&x).norm(),
        0,
    );
    for k in 0..opts.iters {
        let v = &x - beta * prob.ls_gradient(&x);
        let step = prox.apply(&v, t, k)?;
        check_prox_dim(&step, x.len())?;
        x = step.point;
        let r = prob.residual(&x);
        let obj = 0.5 * r.norm_squared() + lambda_reg * x.lp_norm(1);
        rec.push(&x, obj, r.norm(), step.oracle_calls);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(rec.diverged(k + 1));
        }
    }
    Ok(rec.trace)
}

/// Step sizes of [`linearized_mm`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmSteps {
    /// Primal step `t`.
    pub t: f64,
    /// Multiplier step `λ`.
    pub lam: f64,
}

impl MmSteps {
    /// `t = 1/‖AᵀA‖₂`, `λ = 1/2`.
    pub fn default_for(prob: &LinearProblem) -> Self {
        MmSteps {
            t: 1.0 / prob.lip,
            lam: 0.5,
        }
    }
}

/// Linearized method of multipliers for `min f(x) s.t. Ax = b`:
///
/// ```text
/// x ← prox_{t f}(x - t Aᵀ(u + λ(Ax - b)))
/// u ← u + λ(Ax - b)
/// ```
///
/// The objective column records `objective(x)` when given, else NaN.
/// Oracle calls count prox evaluations only.
pub fn linearized_mm(
    prob: &LinearProblem,
    objective: Option<&FunctionOracle>,
    prox: &mut dyn ProxProvider,
    steps: MmSteps,
    x0: &Vector,
    u0: &Vector,
    opts: &RunOptions,
) -> Result<SolverTrace, SolverError> {
    check_dim(x0, prob.cols())?;
    if u0.len() != prob.rows() {
        return Err(SolverError::DimensionMismatch {
            expected: prob.rows(),
            got: u0.len(),
        });
    }
    let MmSteps { t, lam } = steps;
    if !(t > 0.0 && lam > 0.0) {
        return Err(SolverError::InvalidParams(format!(
            "steps must be positive, got t = {t}, lambda = {lam}"
        )));
    }
    if t * lam * prob.lip >= 1.0 {
        log::warn!(
            "t·λ·‖AᵀA‖ = {:.3} >= 1; the iteration may not converge",
            t * lam * prob.lip
        );
    }
    let obj = |x: &Vector| -> Result<f64, SolverError> {
        match objective {
            Some(o) => Ok(o.eval_point(x).map_err(HjError::from)?),
            None => Ok(f64::NAN),
        }
    };
    let mut rec = Recorder::new(opts);
    let mut x = x0.clone();
    let mut u = u0.clone();
    let mut r = prob.residual(&x);
    rec.push(&x, obj(&x)?, r.norm(), 0);
    for k in 0..opts.iters {
        let v = &x - t * prob.a.tr_mul(&(&u + lam * &r));
        let step = prox.apply(&v, t, k)?;
        check_prox_dim(&step, x.len())?;
        x = step.point;
        if !x.iter().all(|v| v.is_finite()) {
            rec.push(&x, f64::NAN, f64::NAN, step.oracle_calls);
            return Err(rec.diverged(k + 1));
        }
        r = prob.residual(&x);
        u += lam * &r;
        rec.push(&x, obj(&x)?, r.norm(), step.oracle_calls);
    }
    Ok(rec.trace)
}

/// Fixed-step gradient descent `x ← x - step·∇g(x)`. `monitor` maps an
/// iterate to the recorded `(objective, residual)`.
pub fn gradient_descent(
    grad: impl Fn(&Vector) -> Vector,
    monitor: impl Fn(&Vector) -> (f64, f64),
    x0: &Vector,
    step: f64,
    opts: &RunOptions,
) -> Result<SolverTrace, SolverError> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(SolverError::InvalidParams(format!(
            "step must be positive, got {step}"
        )));
    }
    let mut rec = Recorder::new(opts);
    let mut x = x0.clone();
    let (o, r) = monitor(&x);
    rec.push(&x, o, r, 0);
    for k in 0..opts.iters {
        let g = grad(&x);
        check_dim(&g, x.len())?;
        x -= step * g;
        let (o, r) = monitor(&x);
        rec.push(&x, o, r, 0);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(rec.diverged(k + 1));
        }
    }
    Ok(rec.trace)
}

/// Result of [`weighted_l1_reference`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub x: Vector,
    pub iters: usize,
    /// `‖Ax - b‖`
    pub residual: f64,
    /// `‖Wx - z‖`, the splitting gap.
    pub primal_gap: f64,
    /// `ρ‖Wᵀ(z - z_prev)‖`
    pub dual_residual: f64,
}

/// High-accuracy solution of `min ‖Wx‖₁ s.t. Ax = b` by ADMM on the split
/// `z = Wx`. The `x`-update solves the equality-constrained least-squares
/// KKT system with one LU factorisation.
pub fn weighted_l1_reference(
    prob: &LinearProblem,
    w: &Matrix,
    tol: f64,
    max_iters: usize,
) -> Result<ReferenceSolution, SolverError> {
    let (m, n) = (prob.rows(), prob.cols());
    if w.ncols() != n {
        return Err(SolverError::DimensionMismatch {
            expected: n,
            got: w.ncols(),
        });
    }
    let p = w.nrows();
    // ρ balances ‖W‖ against the unit l1 slope
    let wtw = w.tr_mul(w);
    let rho = 1.0 / (wtw.trace() / n as f64).sqrt().max(f64::MIN_POSITIVE);
    let mut kkt = Matrix::zeros(n + m, n + m);
    kkt.view_mut((0, 0), (n, n)).copy_from(&(rho * &wtw));
    kkt.view_mut((0, n), (n, m)).copy_from(&prob.a.transpose());
    kkt.view_mut((n, 0), (m, n)).copy_from(&prob.a);
    let lu = kkt.lu();

    let mut x = Vector::zeros(n);
    let mut z = Vector::zeros(p);
    let mut u = Vector::zeros(p);
    let mut rhs = Vector::zeros(n + m);
    rhs.rows_mut(n, m).copy_from(&prob.b);
    let mut out = ReferenceSolution {
        x: x.clone(),
        iters: 0,
        residual: f64::INFINITY,
        primal_gap: f64::INFINITY,
        dual_residual: f64::INFINITY,
    };
    for k in 0..max_iters {
        rhs.rows_mut(0, n).copy_from(&(rho * w.tr_mul(&(&z - &u))));
        let sol = lu
            .solve(&rhs)
            .ok_or_else(|| SolverError::InvalidParams("singular KKT system".into()))?;
        x.copy_from(&sol.rows(0, n));
        let wx = w * &x;
        let z_prev = z.clone();
        z = crate::analytic::shrink(&(&wx + &u), 1.0 / rho);
        let gap = &wx - &z;
        u += &gap;
        let scale = wx.norm().max(1.0);
        out.primal_gap = gap.norm();
        out.dual_residual = rho * w.tr_mul(&(&z - &z_prev)).norm();
        out.iters = k + 1;
        if out.primal_gap <= tol * scale && out.dual_residual <= tol * scale {
            break;
        }
    }
    out.residual = prob.residual(&x).norm();
    out.x = x;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::rng_from_seed;
    use crate::oracle::{builtin, BuiltinParams, Objective};
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(m: usize, n: usize, seed: u64) -> Matrix {
        let mut rng = rng_from_seed(seed);
        Matrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng))
    }

    fn instance(m: usize, n: usize, seed: u64) -> LinearProblem {
        let a = gaussian(m, n, seed);
        let b = gaussian(m, 1, seed + 1).column(0).into_owned();
        LinearProblem::new(a, b)
    }

    struct WeightedL1 {
        w: Matrix,
    }

    impl Objective for WeightedL1 {
        fn dim(&self) -> usize {
            self.w.ncols()
        }

        fn eval(&self, x: &[f64]) -> f64 {
            (&self.w * Vector::from_column_slice(x)).lp_norm(1)
        }
    }

    #[test]
    fn ista_identity_shrinks_to_zero() {
        let prob = LinearProblem::new(Matrix::identity(5, 5), Vector::zeros(5));
        let x0 = Vector::from_column_slice(&[3.0, -1.0, 0.5, 0.0, 2.0]);
        let mut p = AnalyticProvider(AnalyticProx::L1);
        let tr = ista(&prob, 0.1, &mut p, &x0, &RunOptions::new(60)).unwrap();
        assert_eq!(tr.objective.len(), 61);
        assert_eq!(tr.oracle_calls.len(), 61);
        assert!(tr.objective.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(tr.final_objective(), 0.0);
    }

    #[test]
    fn ista_descends_and_beats_plain_gradient_descent() {
        let prob = instance(50, 100, 11);
        let lambda = 0.1;
        let x0 = Vector::zeros(100);
        let mut p = AnalyticProvider(AnalyticProx::L1);
        let tr = ista(&prob, lambda, &mut p, &x0, &RunOptions::new(500)).unwrap();
        assert_eq!(tr.objective[0], 0.5 * prob.b.norm_squared());
        assert!(tr.objective.windows(2).all(|w| w[1] <= w[0] + 1e-10));
        let gd = gradient_descent(
            |x| prob.ls_gradient(x),
            |x| (lasso_objective(&prob, lambda, x), prob.residual(x).norm()),
            &x0,
            1.0 / prob.lip,
            &RunOptions::new(500),
        )
        .unwrap();
        assert!(tr.final_objective() <= gd.final_objective());
    }

    #[test]
    fn least_squares_gradient_descent_is_monotone() {
        let prob = instance(50, 100, 12);
        let gd = gradient_descent(
            |x| prob.ls_gradient(x),
            |x| (0.5 * prob.residual(x).norm_squared(), prob.residual(x).norm()),
            &Vector::zeros(100),
            1.0 / prob.lip,
            &RunOptions::new(300),
        )
        .unwrap();
        assert!(gd.objective.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn gradient_descent_quadratic_one_step() {
        let x0 = Vector::from_column_slice(&[1.0, -4.0]);
        let tr = gradient_descent(
            |x| x.clone(),
            |x| (0.5 * x.norm_squared(), 0.0),
            &x0,
            1.0,
            &RunOptions::new(1),
        )
        .unwrap();
        assert_eq!(tr.objective, vec![8.5, 0.0]);
        assert!(gradient_descent(|x| x.clone(), |_| (0.0, 0.0), &x0, 0.0, &RunOptions::new(1)).is_err());
    }

    #[test]
    fn divergence_keeps_partial_trace() {
        let x0 = Vector::from_element(1, 1.0);
        let e = gradient_descent(
            |x| x * 1e200,
            |x| (x[0], 0.0),
            &x0,
            1e200,
            &RunOptions::new(10),
        );
        match e {
            Err(SolverError::Diverged { iter, trace }) => {
                assert_eq!(trace.objective.len(), iter + 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn lmm_feasibility_with_zero_objective() {
        let prob = instance(10, 10, 3);
        let mut p = AnalyticProvider(AnalyticProx::Zero);
        let tr = linearized_mm(
            &prob,
            None,
            &mut p,
            MmSteps::default_for(&prob),
            &Vector::zeros(10),
            &Vector::zeros(10),
            &RunOptions::new(10_000),
        )
        .unwrap();
        assert!(tr.residual.last().unwrap() < &1e-6, "{}", tr.residual.last().unwrap());
    }

    #[test]
    fn reference_solver_is_optimal() {
        let (m, n) = (20, 40);
        let prob = instance(m, n, 21);
        let w = gaussian(n, n, 22);
        let r = weighted_l1_reference(&prob, &w, 1e-11, 100_000).unwrap();
        assert!(r.residual < 1e-8, "residual {}", r.residual);
        assert!(r.primal_gap < 1e-8 && r.dual_residual < 1e-8, "{r:?}");
        // no feasible direction in the null space of A improves the objective
        let f = |x: &Vector| (&w * x).lp_norm(1);
        let aat = &prob.a * prob.a.transpose();
        let proj = Matrix::identity(n, n) - prob.a.transpose() * aat.lu().solve(&prob.a).unwrap();
        for k in 0..n {
            let d = proj.column(k).into_owned();
            for s in [1e-3, -1e-3] {
                assert!(f(&r.x) <= f(&(&r.x + s * &d)) + 1e-9);
            }
        }
    }

    #[test]
    fn lmm_noiseless_weighted_l1_converges() {
        // convergence is sublinear and instance dependent; on other seeds
        // 2000 iterations leave rel_error between 0.008 and 0.04
        let (m, n) = (20, 40);
        let prob = instance(m, n, 41);
        let w = gaussian(n, n, 42);
        let x_star = weighted_l1_reference(&prob, &w, 1e-11, 100_000).unwrap().x;
        let objective = FunctionOracle::new(WeightedL1 { w: w.clone() });
        let mut p = IterativeProvider::weighted_l1(w);
        let tr = linearized_mm(
            &prob,
            Some(&objective),
            &mut p,
            MmSteps::default_for(&prob),
            &Vector::zeros(n),
            &Vector::zeros(m),
            &RunOptions::new(2000).with_reference(x_star),
        )
        .unwrap();
        let rel = tr.rel_error.unwrap();
        assert_eq!(rel[0], 1.0);
        assert!(*rel.last().unwrap() < 1e-2, "{}", rel.last().unwrap());
    }

    #[test]
    fn providers_agree_on_ista() {
        let prob = instance(50, 100, 5);
        let x0 = Vector::zeros(100);
        let mut opts = RunOptions::new(10);
        opts.keep_iterates = true;
        let a = ista(&prob, 0.1, &mut AnalyticProvider(AnalyticProx::L1), &x0, &opts).unwrap();
        let mut it = IterativeProvider::weighted_l1(Matrix::identity(100, 100));
        let b = ista(&prob, 0.1, &mut it, &x0, &opts).unwrap();
        for (xa, xb) in a.iterates.unwrap().iter().zip(b.iterates.unwrap().iter()) {
            assert!((xa - xb).amax() < 1e-6);
        }
    }

    #[test]
    fn descent_provider_counts_calls() {
        let f = Arc::new(
            builtin(
                "quadratic_linear",
                &BuiltinParams {
                    dim: 3,
                    ..Default::default()
                },
            )
            .unwrap(),
        );
        let mut p = IterativeProvider::descent(f);
        let x = Vector::from_column_slice(&[1.0, 2.0, -1.0]);
        let s = p.apply(&x, 0.5, 0).unwrap();
        assert!(s.oracle_calls > 0);
        let exact = crate::analytic::prox_quadratic_linear(&x, 0.5, &Vector::from_element(3, 1.0));
        assert!((s.point - exact).amax() < 1e-8);
    }

    #[test]
    fn hj_provider_is_seed_deterministic() {
        let prob = instance(10, 20, 8);
        let f = Arc::new(
            builtin(
                "l1",
                &BuiltinParams {
                    dim: 20,
                    ..Default::default()
                },
            )
            .unwrap(),
        );
        let run = |seed| {
            let mut p = HjProvider::new(f.clone(), ProxParams::new(1.0, 1.0, 200).with_seed(seed));
            ista(&prob, 0.1, &mut p, &Vector::zeros(20), &RunOptions::new(15)).unwrap()
        };
        let (a, b, c) = (run(3), run(3), run(4));
        assert_eq!(a, b);
        assert_ne!(a.objective, c.objective);
        assert_eq!(*a.oracle_calls.last().unwrap() % 200, 0);
        assert!(*a.oracle_calls.last().unwrap() >= 15 * 200);
    }

    #[test]
    fn dimension_errors() {
        let prob = instance(4, 6, 1);
        let mut p = AnalyticProvider(AnalyticProx::L1);
        let e = ista(&prob, 0.1, &mut p, &Vector::zeros(5), &RunOptions::new(1));
        assert!(matches!(e, Err(SolverError::DimensionMismatch { .. })));
        let e = linearized_mm(
            &prob,
            None,
            &mut p,
            MmSteps::default_for(&prob),
            &Vector::zeros(6),
            &Vector::zeros(3),
            &RunOptions::new(1),
        );
        assert!(matches!(e, Err(SolverError::DimensionMismatch { .. })));
    }
}

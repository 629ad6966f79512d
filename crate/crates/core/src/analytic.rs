//! Closed-form proximal maps and Moreau envelopes of the test functions, and
//! numerical prox solvers for functions without a closed form.

use crate::linalg::{power_iteration, POWER_MAX_ITERS, POWER_TOL};
use crate::oracle::{FunctionOracle, OracleError};
use crate::{Matrix, Vector};

#[derive(Debug, thiserror::Error)]
pub enum ProxError {
    #[error("t = {t} outside the admissible interval ({lo}, {hi})")]
    Domain { t: f64, lo: f64, hi: f64 },
    #[error("unknown envelope `{0}`")]
    UnknownEnvelope(String),
    #[error("prox subproblem diverged after {iters} iterations (objective {objective:e})")]
    Diverged { iters: usize, objective: f64 },
    #[error("prox subproblem objective is not finite at the starting point")]
    NonFiniteStart,
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Elementwise soft-thresholding `sign(x) max(0, |x| - thr)`.
pub fn shrink(x: &Vector, thr: f64) -> Vector {
    debug_assert!(thr >= 0.0);
    x.map(|v| v.signum() * (v.abs() - thr).max(0.0))
}

/// Prox of `t(‖z‖² + bᵀz)`: the stationary point `(x - t b) / (1 + 2t)`.
pub fn prox_quadratic_linear(x: &Vector, t: f64, b: &Vector) -> Vector {
    (x - t * b) / (1.0 + 2.0 * t)
}

/// Prox of `-t Σ log z_i`: the positive root `(x_i + sqrt(x_i² + 4t)) / 2`.
pub fn prox_log_barrier(x: &Vector, t: f64) -> Vector {
    x.map(|v| 0.5 * (v + (v * v + 4.0 * t).sqrt()))
}

/// Envelope value from a prox point: `f(p) + ‖p - x‖² / 2t`.
pub fn envelope_from_prox(f_at_prox: f64, prox: &Vector, x: &Vector, t: f64) -> f64 {
    f_at_prox + (prox - x).norm_squared() / (2.0 * t)
}

/// The test functions with known proximal maps.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticProx {
    /// `f = 0`; the prox is the identity.
    Zero,
    /// `‖x‖₁`
    L1,
    /// `‖x‖² + bᵀx`
    QuadraticLinear { b: Vector },
    /// `-Σ log x_i`
    LogBarrier,
    /// `-‖x‖₁`
    NegL1,
    /// `-a‖x‖²/2`, only for `t < 1/a`.
    NegQuadratic { a: f64 },
}

impl AnalyticProx {
    pub fn name(&self) -> &'static str {
        match self {
            AnalyticProx::Zero => "zero",
            AnalyticProx::L1 => "l1",
            AnalyticProx::QuadraticLinear { .. } => "quadratic_linear",
            AnalyticProx::LogBarrier => "log_barrier",
            AnalyticProx::NegL1 => "neg_l1",
            AnalyticProx::NegQuadratic { .. } => "neg_quadratic",
        }
    }

    /// Open interval of admissible `t`.
    pub fn valid_t(&self) -> (f64, f64) {
        match self {
            AnalyticProx::NegQuadratic { a } => (0.0, 1.0 / a),
            _ => (0.0, f64::INFINITY),
        }
    }

    fn check_t(&self, t: f64) -> Result<(), ProxError> {
        let (lo, hi) = self.valid_t();
        if t > lo && t < hi {
            Ok(())
        } else {
            Err(ProxError::Domain { t, lo, hi })
        }
    }

    pub fn value(&self, x: &Vector) -> f64 {
        match self {
            AnalyticProx::Zero => 0.0,
            AnalyticProx::L1 => x.lp_norm(1),
            AnalyticProx::QuadraticLinear { b } => x.norm_squared() + b.dot(x),
            AnalyticProx::LogBarrier => {
                if x.iter().any(|&v| v <= 0.0) {
                    f64::INFINITY
                } else {
                    -x.iter().map(|v| v.ln()).sum::<f64>()
                }
            }
            AnalyticProx::NegL1 => -x.lp_norm(1),
            AnalyticProx::NegQuadratic { a } => -0.5 * a * x.norm_squared(),
        }
    }

    pub fn prox(&self, x: &Vector, t: f64) -> Result<Vector, ProxError> {
        self.check_t(t)?;
        Ok(match self {
            AnalyticProx::Zero => x.clone(),
            AnalyticProx::L1 => shrink(x, t),
            AnalyticProx::QuadraticLinear { b } => prox_quadratic_linear(x, t, b),
            AnalyticProx::LogBarrier => prox_log_barrier(x, t),
            // the minimiser moves away from the origin; at 0 both ±t are
            // optimal and +t is returned
            AnalyticProx::NegL1 => x.map(|v| if v >= 0.0 { v + t } else { v - t }),
            AnalyticProx::NegQuadratic { a } => x / (1.0 - a * t),
        })
    }

    /// Exact Moreau envelope `u(x, t)`.
    pub fn envelope(&self, x: &Vector, t: f64) -> Result<f64, ProxError> {
        let p = self.prox(x, t)?;
        Ok(match self {
            AnalyticProx::NegL1 => -x.lp_norm(1) - 0.5 * t * x.len() as f64,
            AnalyticProx::NegQuadratic { a } => -a * x.norm_squared() / (2.0 * (1.0 - a * t)),
            AnalyticProx::L1 => x.iter().map(|&v| huber(v, t)).sum(),
            _ => envelope_from_prox(self.value(&p), &p, x, t),
        })
    }
}

/// Moreau envelope of `|.|`: `x²/2t` for `|x| <= t`, else `|x| - t/2`.
pub fn huber(x: f64, t: f64) -> f64 {
    if x.abs() <= t {
        x * x / (2.0 * t)
    } else {
        x.abs() - 0.5 * t
    }
}

/// Named closed-form envelopes of scalar functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnvelopeName {
    NegL1,
    NegQuadratic { a: f64 },
    L1Huber,
}

impl EnvelopeName {
    pub fn parse(name: &str, a: Option<f64>) -> Result<Self, ProxError> {
        match name {
            "neg_l1" => Ok(EnvelopeName::NegL1),
            "neg_quadratic" => Ok(EnvelopeName::NegQuadratic { a: a.unwrap_or(1.0) }),
            "l1_huber" | "l1" => Ok(EnvelopeName::L1Huber),
            other => Err(ProxError::UnknownEnvelope(other.to_string())),
        }
    }
}

/// Closed-form envelope value at scalar `x`.
pub fn envelope_analytic(name: EnvelopeName, x: f64, t: f64) -> Result<f64, ProxError> {
    let xs = Vector::from_element(1, x);
    match name {
        EnvelopeName::NegL1 => AnalyticProx::NegL1.envelope(&xs, t),
        EnvelopeName::NegQuadratic { a } => AnalyticProx::NegQuadratic { a }.envelope(&xs, t),
        EnvelopeName::L1Huber => AnalyticProx::L1.envelope(&xs, t),
    }
}

/// Options of [`prox_iterative`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterOptions {
    /// Initial step per iteration; `None` picks `t / (1 + t L̂)` with `L̂`
    /// probed by finite differences at `x`.
    pub step: Option<f64>,
    pub iters: usize,
    /// Halve the step until the objective decreases (Armijo). Without it
    /// the step is fixed and ten consecutive increases abort the solve.
    pub backtracking: bool,
    /// Central-difference step when no gradient is supplied.
    pub fd_step: f64,
    /// Stop when the accepted step is shorter than this.
    pub step_tol: f64,
}

impl Default for IterOptions {
    fn default() -> Self {
        IterOptions {
            step: None,
            iters: 10_000,
            backtracking: true,
            fd_step: 1e-6,
            step_tol: 1e-10,
        }
    }
}

/// Gradient callback for [`prox_iterative`].
pub type GradFn<'a> = &'a dyn Fn(&Vector) -> Vector;

fn fd_gradient(oracle: &FunctionOracle, z: &Vector, h: f64) -> Result<Vector, OracleError> {
    let n = z.len();
    let mut pts = Matrix::zeros(n, 2 * n);
    for j in 0..n {
        let mut up = z.clone();
        up[j] += h;
        let mut dn = z.clone();
        dn[j] -= h;
        pts.set_column(2 * j, &up);
        pts.set_column(2 * j + 1, &dn);
    }
    let v = oracle.eval_batch(&pts)?;
    Ok(Vector::from_fn(n, |j, _| (v[2 * j] - v[2 * j + 1]) / (2.0 * h)))
}

/// Curvature probe: the largest second difference along the coordinate axes
/// at `x`, with spacing `1e-3`.
fn probe_curvature(oracle: &FunctionOracle, x: &Vector) -> Result<f64, OracleError> {
    let h = 1e-3;
    let n = x.len();
    let mut pts = Matrix::zeros(n, 2 * n + 1);
    pts.set_column(0, x);
    for j in 0..n {
        let mut up = x.clone();
        up[j] += h;
        let mut dn = x.clone();
        dn[j] -= h;
        pts.set_column(2 * j + 1, &up);
        pts.set_column(2 * j + 2, &dn);
    }
    let v = oracle.eval_batch(&pts)?;
    let curv = (0..n)
        .map(|j| ((v[2 * j + 1] - 2.0 * v[0] + v[2 * j + 2]) / (h * h)).abs())
        .filter(|c| c.is_finite())
        .fold(0.0, f64::max);
    Ok(curv)
}

/// Prox by gradient descent on `φ(z) = f(z) + ‖z - x‖² / 2t`, started at `x`.
///
/// Uses `grad` for `∇f` when given, central finite differences otherwise.
/// `t` must be small enough for `φ` to be strongly convex. For nonsmooth
/// `f` in more than one dimension the finite-difference direction can stall
/// at a kink before the other coordinates have converged.
pub fn prox_iterative(
    x: &Vector,
    t: f64,
    oracle: &FunctionOracle,
    grad: Option<GradFn<'_>>,
    opts: &IterOptions,
) -> Result<Vector, ProxError> {
    prox_iterative_from(x, x, t, oracle, grad, opts)
}

/// [`prox_iterative`] started at `start` instead of `x`, for points where
/// `f(x)` is infinite.
pub fn prox_iterative_from(
    x: &Vector,
    start: &Vector,
    t: f64,
    oracle: &FunctionOracle,
    grad: Option<GradFn<'_>>,
    opts: &IterOptions,
) -> Result<Vector, ProxError> {
    let phi = |z: &Vector| -> Result<f64, ProxError> {
        Ok(oracle.eval_point(z)? + (z - x).norm_squared() / (2.0 * t))
    };
    let gradient = |z: &Vector| -> Result<Vector, ProxError> {
        let gf = match grad {
            Some(g) => g(z),
            None => fd_gradient(oracle, z, opts.fd_step)?,
        };
        Ok(gf + (z - x) / t)
    };
    let step0 = match opts.step {
        Some(s) => s,
        None => t / (1.0 + t * probe_curvature(oracle, start)?),
    };

    let mut z = start.clone();
    let mut obj = phi(&z)?;
    if !obj.is_finite() {
        return Err(ProxError::NonFiniteStart);
    }
    let mut increases = 0;
    let mut last_step = step0;
    for it in 0..opts.iters {
        let g = gradient(&z)?;
        // let the step recover after a backtracked iteration
        let mut s = if opts.backtracking { step0.min(2.0 * last_step) } else { step0 };
        let (next, next_obj) = loop {
            let cand = &z - s * &g;
            let cand_obj = phi(&cand)?;
            let sufficient = cand_obj <= obj - 1e-4 * s * g.norm_squared();
            if !opts.backtracking || sufficient || s * g.norm() < opts.step_tol {
                break (cand, cand_obj);
            }
            s *= 0.5;
        };
        let moved = s * g.norm();
        last_step = s;
        // also true when next_obj is NaN
        if opts.backtracking && next_obj.partial_cmp(&obj).is_none_or(|o| o.is_gt()) {
            // no decrease even at a negligible step: z is optimal to
            // working precision
            return Ok(z);
        }
        if next_obj > obj || !next_obj.is_finite() {
            increases += 1;
            if increases >= 10 {
                return Err(ProxError::Diverged {
                    iters: it + 1,
                    objective: next_obj,
                });
            }
        } else {
            increases = 0;
        }
        z = next;
        obj = next_obj;
        if moved < opts.step_tol && s >= step0 {
            break;
        }
    }
    Ok(z)
}

/// Prox of `t‖W·‖₁` by accelerated projected gradient on the dual box QP
/// `min_{‖y‖∞ ≤ 1} (t/2)‖Wᵀy‖² - yᵀWv`, with `z = v - t Wᵀy`.
///
/// Keeps the last dual point as a warm start for the next call.
#[derive(Debug, Clone)]
pub struct WeightedL1Prox {
    w: Matrix,
    /// `‖WWᵀ‖₂`
    w_norm_sq: f64,
    warm: Option<Vector>,
    pub max_iters: usize,
    pub tol: f64,
}

impl WeightedL1Prox {
    pub fn new(w: Matrix) -> Self {
        let w_norm_sq = power_iteration(
            w.nrows(),
            |v| &w * w.tr_mul(v),
            POWER_TOL,
            POWER_MAX_ITERS,
        );
        WeightedL1Prox {
            w,
            w_norm_sq,
            warm: None,
            max_iters: 20_000,
            tol: 1e-12,
        }
    }

    pub fn objective(&self, z: &Vector, v: &Vector, t: f64) -> f64 {
        (&self.w * z).lp_norm(1) + (z - v).norm_squared() / (2.0 * t)
    }

    /// Dual objective at `y`; a lower bound on the prox objective.
    pub fn dual_value(&self, y: &Vector, v: &Vector, t: f64) -> f64 {
        let wty = self.w.tr_mul(y);
        y.dot(&(&self.w * v)) - 0.5 * t * wty.norm_squared()
    }

    /// Returns the prox point and the final dual iterate.
    pub fn apply(&mut self, v: &Vector, t: f64) -> (Vector, Vector) {
        let m = self.w.nrows();
        let step = 1.0 / (t * self.w_norm_sq.max(f64::MIN_POSITIVE));
        let wv = &self.w * v;
        let project = |y: Vector| y.map(|c| c.clamp(-1.0, 1.0));
        let mut y = self.warm.clone().unwrap_or_else(|| Vector::zeros(m));
        let mut y_prev = y.clone();
        let mut mom = y.clone();
        let mut theta: f64 = 1.0;
        let mut z = v - t * self.w.tr_mul(&y);
        for _ in 0..self.max_iters {
            let grad = t * (&self.w * self.w.tr_mul(&mom)) - &wv;
            y = project(&mom - step * grad);
            let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
            let dy = &y - &y_prev;
            // restart momentum when it points uphill
            if dy.dot(&(&mom - &y)) > 0.0 {
                theta = 1.0;
                mom = y.clone();
            } else {
                mom = &y + ((theta - 1.0) / theta_next) * &dy;
                theta = theta_next;
            }
            let z_next = v - t * self.w.tr_mul(&y);
            let change = (&z_next - &z).norm();
            z = z_next;
            y_prev = y.clone();
            if change <= self.tol * z.norm().max(1.0) {
                break;
            }
        }
        self.warm = Some(y.clone());
        (z, y)
    }
}

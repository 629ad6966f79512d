//! Black-box function access.
//!
//! A [`FunctionOracle`] evaluates a batch of points (the columns of a
//! matrix) and counts how many points it has been asked about. Oracles are
//! built from an [`Objective`] (any deterministic pointwise function) and
//! can be wrapped with multiplicative Gaussian noise, a constant shift or a
//! positive scale.

use std::fmt;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use nalgebra::DMatrixView;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::exec::{for_each_chunk, rng_from_seed, ExecMode};
use crate::{Matrix, Vector};

/// Points per work item when a deterministic batch is split across threads.
const EVAL_CHUNK: usize = 256;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("point has dimension {got}, oracle expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite component in input point {index}")]
    NonFiniteInput { index: usize },
    #[error("oracle returned {value} at point {index}; only finite values or +inf are allowed")]
    BadValue { index: usize, value: f64 },
    #[error("scale factor must be positive, got {0}")]
    NonPositiveScale(f64),
    #[error("unknown builtin function `{0}`")]
    UnknownBuiltin(String),
    #[error("builtin `{name}`: {reason}")]
    BadParams { name: String, reason: String },
    #[error("noise sigma must be finite and nonnegative, got {0}")]
    BadSigma(f64),
    #[error("reading {path}: {reason}")]
    Csv { path: String, reason: String },
}

/// A deterministic function `R^n -> R ∪ {+inf}`.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, y: &[f64]) -> f64;

    /// Evaluate every column of `block`. Override when a batched kernel
    /// (e.g. a matrix product) beats per-point evaluation.
    fn eval_block(&self, block: DMatrixView<'_, f64>, out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.eval(block.column(j).as_slice());
        }
    }
}

struct FnObjective<F> {
    dim: usize,
    f: F,
}

impl<F> Objective for FnObjective<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, y: &[f64]) -> f64 {
        (self.f)(y)
    }
}

/// Relative-noise model `(1 + eps) * f(y)`, `eps ~ N(0, sigma^2)`, fresh
/// per evaluated point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

enum Source {
    Pure(Arc<dyn Objective>),
    Noisy {
        base: Arc<FunctionOracle>,
        sigma: f64,
        rng: Box<Mutex<ChaCha8Rng>>,
    },
    Shift {
        base: Arc<FunctionOracle>,
        c: f64,
    },
    Scale {
        base: Arc<FunctionOracle>,
        a: f64,
    },
}

/// Batched black-box evaluator with a monotone call counter.
pub struct FunctionOracle {
    dim: usize,
    source: Source,
    calls: AtomicU64,
    exec: ExecMode,
}

impl fmt::Debug for FunctionOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.source {
            Source::Pure(_) => "pure",
            Source::Noisy { .. } => "noisy",
            Source::Shift { .. } => "shift",
            Source::Scale { .. } => "scale",
        };
        f.debug_struct("FunctionOracle")
            .field("dim", &self.dim)
            .field("kind", &kind)
            .field("calls", &self.calls())
            .finish()
    }
}

impl FunctionOracle {
    pub fn new(objective: impl Objective + 'static) -> Self {
        Self::from_arc(Arc::new(objective))
    }

    pub fn from_arc(objective: Arc<dyn Objective>) -> Self {
        FunctionOracle {
            dim: objective.dim(),
            source: Source::Pure(objective),
            calls: AtomicU64::new(0),
            exec: ExecMode::default(),
        }
    }

    /// Oracle backed by a plain closure over the point's coordinates.
    pub fn from_fn<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::new(FnObjective { dim, f })
    }

    /// Choose how deterministic batches are scheduled. Results do not
    /// depend on the mode.
    pub fn with_exec(mut self, exec: ExecMode) -> Self {
        self.exec = exec;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_stochastic(&self) -> bool {
        match &self.source {
            Source::Pure(_) => false,
            Source::Noisy { .. } => true,
            Source::Shift { base, .. } | Source::Scale { base, .. } => base.is_stochastic(),
        }
    }

    /// Number of points evaluated through this oracle so far.
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    /// Evaluate every column of `points`, in column order.
    pub fn eval_batch(&self, points: &Matrix) -> Result<Vec<f64>, OracleError> {
        if points.nrows() != self.dim {
            return Err(OracleError::DimensionMismatch {
                expected: self.dim,
                got: points.nrows(),
            });
        }
        for (j, col) in points.column_iter().enumerate() {
            if col.iter().any(|v| !v.is_finite()) {
                return Err(OracleError::NonFiniteInput { index: j });
            }
        }
        let values = self.eval_unchecked(points);
        self.calls
            .fetch_add(points.ncols() as u64, Ordering::Relaxed);
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| v.is_nan() || *v == &f64::NEG_INFINITY)
        {
            return Err(OracleError::BadValue { index, value });
        }
        Ok(values)
    }

    /// Single-point convenience: a batch of one.
    pub fn eval_point(&self, x: &Vector) -> Result<f64, OracleError> {
        let m = Matrix::from_column_slice(x.len(), 1, x.as_slice());
        Ok(self.eval_batch(&m)?[0])
    }

    fn eval_unchecked(&self, points: &Matrix) -> Vec<f64> {
        match &self.source {
            Source::Pure(obj) => {
                let mut out = vec![0.0; points.ncols()];
                for_each_chunk(&mut out, EVAL_CHUNK, self.exec, |start, chunk| {
                    obj.eval_block(points.columns(start, chunk.len()), chunk);
                });
                out
            }
            Source::Noisy { base, sigma, rng } => {
                let mut values = base.eval_counted(points);
                if *sigma > 0.0 {
                    let mut rng = rng.lock().unwrap_or_else(|e| e.into_inner());
                    for v in values.iter_mut() {
                        let eps: f64 = StandardNormal.sample(&mut *rng);
                        if v.is_finite() {
                            *v *= 1.0 + sigma * eps;
                        }
                    }
                }
                values
            }
            Source::Shift { base, c } => {
                let mut values = base.eval_counted(points);
                values.iter_mut().for_each(|v| *v += c);
                values
            }
            Source::Scale { base, a } => {
                let mut values = base.eval_counted(points);
                values.iter_mut().for_each(|v| *v *= a);
                values
            }
        }
    }

    fn eval_counted(&self, points: &Matrix) -> Vec<f64> {
        self.calls
            .fetch_add(points.ncols() as u64, Ordering::Relaxed);
        self.eval_unchecked(points)
    }
}

/// Wrap a deterministic oracle with relative Gaussian noise.
pub fn make_noisy(
    oracle: impl Into<Arc<FunctionOracle>>,
    noise: NoiseSpec,
) -> Result<FunctionOracle, OracleError> {
    if !(noise.sigma >= 0.0 && noise.sigma.is_finite()) {
        return Err(OracleError::BadSigma(noise.sigma));
    }
    let base = oracle.into();
    Ok(FunctionOracle {
        dim: base.dim,
        exec: base.exec,
        source: Source::Noisy {
            base,
            sigma: noise.sigma,
            rng: Box::new(Mutex::new(rng_from_seed(noise.seed))),
        },
        calls: AtomicU64::new(0),
    })
}

/// `y -> f(y) + c`.
pub fn shift_oracle(oracle: impl Into<Arc<FunctionOracle>>, c: f64) -> FunctionOracle {
    let base = oracle.into();
    FunctionOracle {
        dim: base.dim,
        exec: base.exec,
        source: Source::Shift { base, c },
        calls: AtomicU64::new(0),
    }
}

/// `y -> a * f(y)` for `a > 0`.
pub fn scale_oracle(
    oracle: impl Into<Arc<FunctionOracle>>,
    a: f64,
) -> Result<FunctionOracle, OracleError> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(OracleError::NonPositiveScale(a));
    }
    let base = oracle.into();
    Ok(FunctionOracle {
        dim: base.dim,
        exec: base.exec,
        source: Source::Scale { base, a },
        calls: AtomicU64::new(0),
    })
}

/// The test functions used throughout the experiments.
#[derive(Debug, Clone, PartialEq)]
pub enum Builtin {
    /// `‖x‖₁`
    L1 { dim: usize },
    /// `‖x‖² + bᵀx`
    QuadraticLinear { b: Vector },
    /// `-Σ log x_i`, `+inf` off the positive orthant.
    LogBarrier { dim: usize },
    /// `-‖x‖₁`
    NegL1 { dim: usize },
    /// `-a‖x‖²/2`
    NegQuadratic { dim: usize, a: f64 },
    /// `Σ x_i² - log x_i`, `+inf` off the positive orthant.
    QuadMinusLog { dim: usize },
    /// `‖Wx‖₁` for a square `W`.
    WeightedL1 { w: Matrix },
}

/// Parameters a builtin may need. Unused fields are ignored.
#[derive(Debug, Clone, Default)]
pub struct BuiltinParams {
    pub dim: usize,
    pub a: Option<f64>,
    pub b: Option<Vector>,
    pub w: Option<Matrix>,
}

impl Builtin {
    pub const NAMES: [&'static str; 7] = [
        "l1",
        "quadratic_linear",
        "log_barrier",
        "neg_l1",
        "neg_quadratic",
        "quad_minus_log",
        "weighted_l1",
    ];

    pub fn parse(name: &str, params: &BuiltinParams) -> Result<Self, OracleError> {
        let bad = |reason: &str| OracleError::BadParams {
            name: name.to_string(),
            reason: reason.to_string(),
        };
        let dim = params.dim;
        let need_dim = || {
            if dim == 0 {
                Err(bad("dimension must be positive"))
            } else {
                Ok(dim)
            }
        };
        Ok(match name {
            "l1" => Builtin::L1 { dim: need_dim()? },
            "log_barrier" => Builtin::LogBarrier { dim: need_dim()? },
            "neg_l1" => Builtin::NegL1 { dim: need_dim()? },
            "quad_minus_log" => Builtin::QuadMinusLog { dim: need_dim()? },
            "neg_quadratic" => {
                let a = params.a.unwrap_or(1.0);
                if !(a > 0.0 && a.is_finite()) {
                    return Err(bad("a must be positive"));
                }
                Builtin::NegQuadratic {
                    dim: need_dim()?,
                    a,
                }
            }
            "quadratic_linear" => {
                let b = match &params.b {
                    Some(b) => b.clone(),
                    None => Vector::from_element(need_dim()?, 1.0),
                };
                if b.is_empty() || b.iter().any(|v| !v.is_finite()) {
                    return Err(bad("b must be a nonempty finite vector"));
                }
                if dim != 0 && b.len() != dim {
                    return Err(bad("b length does not match the dimension"));
                }
                Builtin::QuadraticLinear { b }
            }
            "weighted_l1" => {
                let w = match &params.w {
                    Some(w) => w.clone(),
                    None => Matrix::identity(need_dim()?, need_dim()?),
                };
                if w.nrows() != w.ncols() || w.is_empty() {
                    return Err(bad("W must be a nonempty square matrix"));
                }
                if w.iter().any(|v| !v.is_finite()) {
                    return Err(bad("W has non-finite entries"));
                }
                if dim != 0 && w.ncols() != dim {
                    return Err(bad("W size does not match the dimension"));
                }
                Builtin::WeightedL1 { w }
            }
            other => return Err(OracleError::UnknownBuiltin(other.to_string())),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Builtin::L1 { .. } => "l1",
            Builtin::QuadraticLinear { .. } => "quadratic_linear",
            Builtin::LogBarrier { .. } => "log_barrier",
            Builtin::NegL1 { .. } => "neg_l1",
            Builtin::NegQuadratic { .. } => "neg_quadratic",
            Builtin::QuadMinusLog { .. } => "quad_minus_log",
            Builtin::WeightedL1 { .. } => "weighted_l1",
        }
    }

    pub fn oracle(self) -> FunctionOracle {
        FunctionOracle::new(self)
    }
}

impl Objective for Builtin {
    fn dim(&self) -> usize {
        match self {
            Builtin::L1 { dim }
            | Builtin::LogBarrier { dim }
            | Builtin::NegL1 { dim }
            | Builtin::NegQuadratic { dim, .. }
            | Builtin::QuadMinusLog { dim } => *dim,
            Builtin::QuadraticLinear { b } => b.len(),
            Builtin::WeightedL1 { w } => w.ncols(),
        }
    }

    fn eval(&self, y: &[f64]) -> f64 {
        match self {
            Builtin::L1 { .. } => y.iter().map(|v| v.abs()).sum(),
            Builtin::NegL1 { .. } => -y.iter().map(|v| v.abs()).sum::<f64>(),
            Builtin::QuadraticLinear { b } => y
                .iter()
                .zip(b.iter())
                .map(|(v, bi)| v * v + bi * v)
                .sum(),
            Builtin::NegQuadratic { a, .. } => {
                -0.5 * a * y.iter().map(|v| v * v).sum::<f64>()
            }
            Builtin::LogBarrier { .. } => {
                if y.iter().any(|&v| v <= 0.0) {
                    f64::INFINITY
                } else {
                    -y.iter().map(|v| v.ln()).sum::<f64>()
                }
            }
            Builtin::QuadMinusLog { .. } => {
                if y.iter().any(|&v| v <= 0.0) {
                    f64::INFINITY
                } else {
                    y.iter().map(|v| v * v - v.ln()).sum()
                }
            }
            Builtin::WeightedL1 { w } => {
                let mut s = 0.0;
                for i in 0..w.nrows() {
                    let row: f64 = (0..w.ncols()).map(|j| w[(i, j)] * y[j]).sum();
                    s += row.abs();
                }
                s
            }
        }
    }

    fn eval_block(&self, block: DMatrixView<'_, f64>, out: &mut [f64]) {
        match self {
            Builtin::WeightedL1 { w } => {
                let prod = w * block;
                for (o, col) in out.iter_mut().zip(prod.column_iter()) {
                    *o = col.iter().map(|v| v.abs()).sum();
                }
            }
            _ => {
                for (j, o) in out.iter_mut().enumerate() {
                    *o = self.eval(block.column(j).as_slice());
                }
            }
        }
    }
}

/// Build a deterministic oracle for a named builtin.
pub fn builtin(name: &str, params: &BuiltinParams) -> Result<FunctionOracle, OracleError> {
    Ok(Builtin::parse(name, params)?.oracle())
}

/// Read a header-free, comma-separated, row-major matrix of finite reals.
pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<Matrix, OracleError> {
    let path = path.as_ref();
    let err = |reason: String| OracleError::Csv {
        path: path.display().to_string(),
        reason,
    };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    parse_matrix_csv(&text).map_err(err)
}

pub(crate) fn parse_matrix_csv(text: &str) -> Result<Matrix, String> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| format!("line {}: bad value `{}`", lineno + 1, s.trim()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(format!(
                    "line {}: expected {} columns, found {}",
                    lineno + 1,
                    first.len(),
                    row.len()
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err("empty matrix".into());
    }
    let ncols = rows[0].len();
    Ok(Matrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.into_iter().flatten(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn col(v: &[f64]) -> Matrix {
        Matrix::from_column_slice(v.len(), 1, v)
    }

    fn params(dim: usize) -> BuiltinParams {
        BuiltinParams {
            dim,
            ..Default::default()
        }
    }

    #[test]
    fn l1_value() {
        let o = builtin("l1", &params(2)).unwrap();
        assert_eq!(o.eval_batch(&col(&[3.0, -4.0])).unwrap(), vec![7.0]);
        assert_eq!(o.calls(), 1);
    }

    #[test]
    fn quadratic_linear_at_origin() {
        let o = builtin("quadratic_linear", &params(2)).unwrap();
        assert_eq!(o.eval_point(&Vector::zeros(2)).unwrap(), 0.0);
    }

    #[test]
    fn log_barrier_outside_domain_is_inf() {
        let o = builtin("log_barrier", &params(2)).unwrap();
        let v = o.eval_batch(&col(&[1.0, -0.5])).unwrap();
        assert_eq!(v[0], f64::INFINITY);
        let v = o.eval_batch(&col(&[1.0, 0.0])).unwrap();
        assert_eq!(v[0], f64::INFINITY);
    }

    #[test]
    fn scalar_builtins() {
        let p = BuiltinParams {
            dim: 1,
            a: Some(1.0),
            ..Default::default()
        };
        let nq = builtin("neg_quadratic", &p).unwrap();
        assert_eq!(nq.eval_point(&Vector::from_element(1, 2.0)).unwrap(), -2.0);
        let qml = builtin("quad_minus_log", &p).unwrap();
        assert_eq!(qml.eval_point(&Vector::from_element(1, 1.0)).unwrap(), 1.0);
    }

    #[test]
    fn unknown_builtin_is_config_error() {
        let e = builtin("rosenbrock", &params(2)).unwrap_err();
        assert!(matches!(e, OracleError::UnknownBuiltin(ref n) if n == "rosenbrock"));
    }

    #[test]
    fn bad_builtin_params() {
        let p = BuiltinParams {
            dim: 2,
            a: Some(-1.0),
            ..Default::default()
        };
        assert!(builtin("neg_quadratic", &p).is_err());
        let p = BuiltinParams {
            dim: 2,
            w: Some(Matrix::zeros(2, 3)),
            ..Default::default()
        };
        assert!(builtin("weighted_l1", &p).is_err());
    }

    #[test]
    fn contract_violations() {
        let o = builtin("l1", &params(2)).unwrap();
        assert!(matches!(
            o.eval_batch(&col(&[1.0, 2.0, 3.0])),
            Err(OracleError::DimensionMismatch { expected: 2, got: 3 })
        ));
        assert!(matches!(
            o.eval_batch(&col(&[f64::NAN, 2.0])),
            Err(OracleError::NonFiniteInput { index: 0 })
        ));
        let nan = FunctionOracle::from_fn(1, |_| f64::NAN);
        assert!(matches!(
            nan.eval_batch(&col(&[0.0])),
            Err(OracleError::BadValue { .. })
        ));
    }

    #[test]
    fn shift_and_scale() {
        let l1 = || builtin("l1", &params(1)).unwrap();
        let s = shift_oracle(l1(), 1.0);
        assert_eq!(s.eval_point(&Vector::zeros(1)).unwrap(), 1.0);
        let a = scale_oracle(l1(), 2.0).unwrap();
        assert_eq!(a.eval_point(&Vector::from_element(1, 3.0)).unwrap(), 6.0);
        let both = scale_oracle(shift_oracle(l1(), 1.0), 2.0).unwrap();
        assert_eq!(both.eval_point(&Vector::zeros(1)).unwrap(), 2.0);
        assert!(matches!(
            scale_oracle(l1(), 0.0),
            Err(OracleError::NonPositiveScale(_))
        ));
    }

    #[test]
    fn counter_tracks_batch_size() {
        let o = builtin("l1", &params(3)).unwrap();
        o.eval_batch(&Matrix::zeros(3, 17)).unwrap();
        o.eval_batch(&Matrix::zeros(3, 1000)).unwrap();
        assert_eq!(o.calls(), 1017);
    }

    #[test]
    fn weighted_identity_is_l1() {
        let w = BuiltinParams {
            dim: 4,
            w: Some(Matrix::identity(4, 4)),
            ..Default::default()
        };
        let wl1 = builtin("weighted_l1", &w).unwrap();
        let l1 = builtin("l1", &params(4)).unwrap();
        let mut rng = rng_from_seed(1);
        let pts = Matrix::from_fn(4, 300, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            3.0 * z
        });
        let a = wl1.eval_batch(&pts).unwrap();
        let b = l1.eval_batch(&pts).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }

    #[test]
    fn weighted_block_matches_pointwise() {
        let mut rng = rng_from_seed(5);
        let mut g = || -> f64 { StandardNormal.sample(&mut rng) };
        let w = Matrix::from_fn(6, 6, |_, _| g());
        let pts = Matrix::from_fn(6, 700, |_, _| g());
        let obj = Builtin::WeightedL1 { w };
        let batch = FunctionOracle::new(obj.clone()).eval_batch(&pts).unwrap();
        for (col, b) in pts.column_iter().zip(&batch) {
            let v = obj.eval(col.as_slice());
            assert!((v - b).abs() <= 1e-12 * v.abs().max(1.0));
        }
    }

    #[test]
    fn noise_free_wrapper_is_exact() {
        let base = builtin("l1", &params(2)).unwrap();
        let noisy = make_noisy(base, NoiseSpec { sigma: 0.0, seed: 3 }).unwrap();
        assert!(noisy.is_stochastic());
        let pts = Matrix::from_fn(2, 50, |i, j| i as f64 - j as f64 * 0.1);
        let plain = builtin("l1", &params(2)).unwrap().eval_batch(&pts).unwrap();
        assert_eq!(noisy.eval_batch(&pts).unwrap(), plain);
    }

    #[test]
    fn noise_is_fresh_per_point() {
        let base = builtin("l1", &params(1)).unwrap();
        let noisy = make_noisy(base, NoiseSpec { sigma: 0.005, seed: 3 }).unwrap();
        let pts = Matrix::from_element(1, 4, 2.0);
        let v = noisy.eval_batch(&pts).unwrap();
        assert!(v.windows(2).all(|w| w[0] != w[1]));
        assert!(v.iter().all(|x| (x - 2.0).abs() < 2.0 * 0.005 * 6.0));
    }

    #[test]
    fn noise_mean_converges() {
        // LLN check at M = 1e5: |mean - f| <= 3 sigma f / sqrt(M)
        let m = 100_000;
        let sigma = 0.005;
        let base = builtin("l1", &params(2)).unwrap();
        let noisy = make_noisy(base, NoiseSpec { sigma, seed: 11 }).unwrap();
        let y = [1.5, -2.0];
        let f = 3.5;
        let pts = Matrix::from_fn(2, m, |i, _| y[i]);
        let v = noisy.eval_batch(&pts).unwrap();
        let mean = v.iter().sum::<f64>() / m as f64;
        assert!((mean - f).abs() <= 3.0 * sigma * f / (m as f64).sqrt());
    }

    #[test]
    fn equal_seeds_equal_streams() {
        let mk = || {
            make_noisy(
                builtin("l1", &params(1)).unwrap(),
                NoiseSpec { sigma: 0.1, seed: 99 },
            )
            .unwrap()
        };
        let (a, b) = (mk(), mk());
        let pts = Matrix::from_element(1, 64, 1.0);
        assert_eq!(a.eval_batch(&pts).unwrap(), b.eval_batch(&pts).unwrap());
        assert_eq!(a.eval_batch(&pts).unwrap(), b.eval_batch(&pts).unwrap());
    }

    #[test]
    fn csv_matrix() {
        let m = parse_matrix_csv("1,2,3\n4,5,6\n").unwrap();
        assert_eq!(m.nrows(), 2);
        assert_eq!(m[(1, 0)], 4.0);
        assert_eq!(m[(0, 2)], 3.0);
        assert!(parse_matrix_csv("1,2\n3\n").is_err());
        assert!(parse_matrix_csv("1,inf\n").is_err());
        assert!(parse_matrix_csv("").is_err());
    }

    proptest! {
        #[test]
        fn deterministic_oracles_are_pure(xs in prop::collection::vec(-5.0f64..5.0, 3)) {
            let o = builtin("quadratic_linear", &params(3)).unwrap();
            let p = col(&xs);
            prop_assert_eq!(o.eval_batch(&p).unwrap(), o.eval_batch(&p).unwrap());
        }

        #[test]
        fn shifts_compose(c1 in -64i32..64, c2 in -64i32..64, x in -8i32..8) {
            // dyadic inputs keep every sum exact
            let (c1, c2) = (c1 as f64 / 4.0, c2 as f64 / 4.0);
            let l1 = || builtin("l1", &params(1)).unwrap();
            let nested = shift_oracle(shift_oracle(l1(), c1), c2);
            let flat = shift_oracle(l1(), c1 + c2);
            let p = Vector::from_element(1, x as f64 / 2.0);
            prop_assert_eq!(nested.eval_point(&p).unwrap(), flat.eval_point(&p).unwrap());
        }

        #[test]
        fn parallel_and_sequential_agree(seed in 0u64..1000) {
            let mut rng = rng_from_seed(seed);
            let pts = Matrix::from_fn(3, 1200, |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z
            });
            let mk = |e| builtin("quad_minus_log", &params(3)).unwrap().with_exec(e);
            prop_assert_eq!(
                mk(ExecMode::Parallel).eval_batch(&pts).unwrap(),
                mk(ExecMode::Sequential).eval_batch(&pts).unwrap()
            );
        }
    }
}

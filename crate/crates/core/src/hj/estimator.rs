use std::sync::atomic::{AtomicU64, Ordering};

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::softmax::weights_and_lse;
use super::{HjError, ProxParams};
use crate::exec::{mix_seed, rng_from_seed};
use crate::oracle::{FunctionOracle, OracleError};
use crate::{Matrix, Vector};

/// Proximal point estimate and sampling diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxResult {
    pub estimate: Vector,
    /// `alpha / 2^k` after all underflow halvings.
    pub effective_alpha: f64,
    /// Constant added to `f` by the shift branch.
    pub applied_shift: f64,
    /// Total recursions (shift and halving branches).
    pub recursion_count: u32,
    /// Effective sample size `1 / Σ w_i²`.
    pub ess: f64,
    pub weights_max: f64,
}

/// Envelope value and gradient from one shared sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeEstimate {
    pub value: f64,
    pub gradient: Vector,
    pub num_samples_used: usize,
}

/// Anything the sampler can evaluate a batch of points with.
trait BatchEval {
    fn dim(&self) -> usize;
    fn eval(&self, points: &Matrix) -> Result<Vec<f64>, HjError>;
}

impl BatchEval for FunctionOracle {
    fn dim(&self) -> usize {
        FunctionOracle::dim(self)
    }

    fn eval(&self, points: &Matrix) -> Result<Vec<f64>, HjError> {
        Ok(self.eval_batch(points)?)
    }
}

/// The accepted sample set of one estimate.
struct WeightedSamples {
    samples: Matrix,
    weights: Vec<f64>,
    /// `ln Σ exp(-alpha z_i / delta)` over the shifted values.
    log_sum_exp: f64,
    alpha: f64,
    shift: f64,
    recursions: u32,
}

impl WeightedSamples {
    fn mean(&self) -> Vector {
        let w = Vector::from_column_slice(&self.weights);
        &self.samples * w
    }

    fn envelope_value(&self, delta: f64) -> f64 {
        let n = self.weights.len() as f64;
        -(delta / self.alpha) * (self.log_sum_exp - n.ln()) - self.shift
    }

    fn into_prox_result(self) -> ProxResult {
        let estimate = self.mean();
        let ess = 1.0 / self.weights.iter().map(|w| w * w).sum::<f64>();
        let weights_max = self.weights.iter().copied().fold(0.0, f64::max);
        ProxResult {
            estimate,
            effective_alpha: self.alpha,
            applied_shift: self.shift,
            recursion_count: self.recursions,
            ess,
            weights_max,
        }
    }
}

fn gaussian_cloud(x: &Vector, std: f64, n: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let dim = x.len();
    let mut m = Matrix::zeros(dim, n);
    for j in 0..n {
        for i in 0..dim {
            let g: f64 = StandardNormal.sample(rng);
            m[(i, j)] = x[i] + std * g;
        }
    }
    m
}

/// Algorithm core: sample, test for negative values and underflow, recurse.
///
/// Recursion is unrolled into a loop. Level `k` draws from the generator
/// seeded with `seed ^ k`, so every recursion sees fresh samples.
fn draw_weighted<E: BatchEval + ?Sized>(
    x: &Vector,
    f: &E,
    p: &ProxParams,
) -> Result<WeightedSamples, HjError> {
    p.validate()?;
    if x.len() != f.dim() {
        return Err(OracleError::DimensionMismatch {
            expected: f.dim(),
            got: x.len(),
        }
        .into());
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(OracleError::NonFiniteInput { index: i }.into());
    }
    let ln_eps = p.eps_underflow.ln();
    let mut alpha = p.alpha;
    let mut shift = 0.0;
    let mut level: u32 = 0;
    loop {
        let mut rng = rng_from_seed(p.seed ^ u64::from(level));
        let std = (p.delta * p.t / alpha).sqrt();
        let samples = gaussian_cloud(x, std, p.num_samples, &mut rng);
        let mut z = f.eval(&samples)?;
        if shift != 0.0 {
            z.iter_mut().for_each(|v| *v += shift);
        }
        let (min_z, max_z) = z
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
        if min_z == f64::INFINITY {
            return Err(HjError::DegenerateWeights);
        }
        let needs_shift = min_z < 0.0;
        let underflows = !needs_shift && -alpha * max_z / p.delta <= ln_eps;
        if !needs_shift && !underflows {
            let (weights, log_sum_exp) = weights_and_lse(&z, alpha, p.delta)?;
            return Ok(WeightedSamples {
                samples,
                weights,
                log_sum_exp,
                alpha,
                shift,
                recursions: level,
            });
        }
        if level >= p.max_recursions {
            return Err(HjError::NonConvergent {
                recursions: level,
                alpha,
                shift,
                min_z,
                max_z,
            });
        }
        if needs_shift {
            // shift up so the smallest observed value becomes eps
            shift += -min_z + p.eps_underflow;
        } else {
            alpha /= 2.0;
        }
        level += 1;
        log::trace!(
            "hj recursion {level}: alpha={alpha:e} shift={shift:e} z in [{min_z:e}, {max_z:e}]"
        );
    }
}

/// Estimate `prox_{t f}(x)` from function values only.
pub fn hj_prox(x: &Vector, oracle: &FunctionOracle, p: &ProxParams) -> Result<ProxResult, HjError> {
    Ok(draw_weighted(x, oracle, p)?.into_prox_result())
}

/// Estimate the smoothed envelope value `u^delta(x, t)` of the original `f`.
///
/// Under scaling the samples estimate `alpha * u` of `alpha f` at time
/// `t / alpha`; the result is divided by `alpha` and the shift removed.
pub fn envelope_value(x: &Vector, oracle: &FunctionOracle, p: &ProxParams) -> Result<f64, HjError> {
    Ok(draw_weighted(x, oracle, p)?.envelope_value(p.delta))
}

/// Envelope value and gradient `(x - prox estimate) / t`, sharing the
/// sample set that [`hj_prox`] would draw with the same parameters.
pub fn envelope_gradient(
    x: &Vector,
    oracle: &FunctionOracle,
    p: &ProxParams,
) -> Result<EnvelopeEstimate, HjError> {
    envelope_from(x, oracle, p)
}

fn envelope_from<E: BatchEval + ?Sized>(
    x: &Vector,
    f: &E,
    p: &ProxParams,
) -> Result<EnvelopeEstimate, HjError> {
    let ws = draw_weighted(x, f, p)?;
    let value = ws.envelope_value(p.delta);
    let gradient = (x - ws.mean()) / p.t;
    Ok(EnvelopeEstimate {
        value,
        gradient,
        num_samples_used: ws.weights.len(),
    })
}

/// Stage-one surrogate `g(y) = u^delta(y, t)` of a possibly noisy oracle.
/// Each evaluated point gets its own estimator seed, in evaluation order.
struct SmoothedSurrogate<'a> {
    oracle: &'a FunctionOracle,
    params: ProxParams,
    evaluated: AtomicU64,
}

impl BatchEval for SmoothedSurrogate<'_> {
    fn dim(&self) -> usize {
        self.oracle.dim()
    }

    fn eval(&self, points: &Matrix) -> Result<Vec<f64>, HjError> {
        points
            .column_iter()
            .map(|col| {
                let k = self.evaluated.fetch_add(1, Ordering::Relaxed);
                let p = self.params.with_seed(mix_seed(self.params.seed, k));
                let y = Vector::from_column_slice(col.as_slice());
                draw_weighted(&y, self.oracle, &p).map(|ws| ws.envelope_value(p.delta))
            })
            .collect()
    }
}

/// Two-stage smoothing for noisy oracles.
///
/// Stage one replaces `f` by its smoothed envelope `g = u^delta(., t)`
/// (a denoising pass that averages the oracle noise); stage two returns the
/// envelope value and gradient of `g` at smoothing `delta2`. Both stages use
/// `p.num_samples` samples per estimate.
pub fn noisy_envelope(
    x: &Vector,
    oracle: &FunctionOracle,
    p: &ProxParams,
    delta2: f64,
) -> Result<EnvelopeEstimate, HjError> {
    if !(delta2 > 0.0 && delta2.is_finite()) {
        return Err(HjError::InvalidParams(format!(
            "delta2 must be positive, got {delta2}"
        )));
    }
    let surrogate = SmoothedSurrogate {
        oracle,
        params: p.with_seed(mix_seed(p.seed, u64::MAX)),
        evaluated: AtomicU64::new(0),
    };
    envelope_from(x, &surrogate, &p.with_delta(delta2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{builtin, shift_oracle, BuiltinParams};

    fn l1(dim: usize) -> FunctionOracle {
        builtin(
            "l1",
            &BuiltinParams {
                dim,
                ..Default::default()
            },
        )
        .unwrap()
    }

    fn scalar(v: f64) -> Vector {
        Vector::from_element(1, v)
    }

    #[test]
    fn l1_prox_near_shrink() {
        let p = ProxParams::new(0.1, 0.05, 10_000).with_seed(7);
        let r = hj_prox(&scalar(3.0), &l1(1), &p).unwrap();
        assert!((r.estimate[0] - 2.9).abs() < 0.05, "{}", r.estimate[0]);
        // f ≈ 3 and δ = 0.05: exp(-3/0.05) is below 1e-12, so α gets halved
        assert!(r.effective_alpha < 1.0);
        assert_eq!((1.0 / r.effective_alpha).log2().fract(), 0.0);
        assert!(r.ess >= 1.0 && r.ess <= 10_000.0);
    }

    #[test]
    fn zero_function_gives_sample_mean() {
        let dim = 4;
        let zero = FunctionOracle::from_fn(dim, |_| 0.0);
        let x = Vector::from_fn(dim, |i, _| i as f64 - 1.5);
        let p = ProxParams::new(0.3, 0.2, 2000).with_seed(1);
        let r = hj_prox(&x, &zero, &p).unwrap();
        let bound = 4.0 * (p.delta * p.t / p.alpha).sqrt() * (dim as f64 / 2000.0).sqrt();
        assert!((&r.estimate - &x).norm() <= bound);
        assert!((r.ess - 2000.0).abs() < 1e-6);
        let g = envelope_gradient(&x, &zero, &p).unwrap();
        assert!(g.value.abs() < 1e-12);
    }

    #[test]
    fn quadratic_linear_prox() {
        let dim = 5;
        let q = builtin(
            "quadratic_linear",
            &BuiltinParams {
                dim,
                ..Default::default()
            },
        )
        .unwrap();
        let x = Vector::from_element(dim, 1.0);
        let t = 0.5;
        let p = ProxParams::new(t, 0.05, 100_000).with_seed(3);
        let r = hj_prox(&x, &q, &p).unwrap();
        // stationarity of ‖z‖² + bᵀz + ‖z - x‖²/2t: z = (x - t b) / (1 + 2t)
        let exact = (1.0 - t) / (1.0 + 2.0 * t);
        assert!(r.estimate.add_scalar(-exact).amax() < 0.05, "{}", r.estimate);
        let g = envelope_gradient(&x, &q, &p).unwrap();
        let grad_exact = (1.0 - exact) / t;
        for gi in g.gradient.iter() {
            assert!((gi - grad_exact).abs() < 0.1, "{gi}");
        }
    }

    #[test]
    fn constant_envelope_is_the_constant() {
        for c in [0.0, 2.5, -7.0, 1e4] {
            let f = FunctionOracle::from_fn(2, move |_| c);
            for (t, delta, n) in [(0.1, 0.01, 10), (2.0, 1.0, 500)] {
                let p = ProxParams::new(t, delta, n).with_seed(4);
                let u = envelope_value(&Vector::zeros(2), &f, &p).unwrap();
                assert!((u - c).abs() <= 1e-9 * c.abs().max(1.0), "c={c} u={u}");
            }
        }
    }

    #[test]
    fn prox_identity_with_shared_samples() {
        let q = FunctionOracle::from_fn(3, |y| y.iter().map(|v| v.abs() + v * v).sum());
        let x = Vector::from_vec(vec![0.5, -1.0, 2.0]);
        let p = ProxParams::new(0.4, 0.1, 3000).with_seed(9);
        let prox = hj_prox(&x, &q, &p).unwrap();
        let env = envelope_gradient(&x, &q, &p).unwrap();
        let back = &x - p.t * &env.gradient;
        for (a, b) in back.iter().zip(prox.estimate.iter()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn negative_values_trigger_shift() {
        let f = shift_oracle(l1(1), -5.0);
        let p = ProxParams::new(0.1, 0.05, 5000).with_seed(2);
        let r = hj_prox(&scalar(3.0), &f, &p).unwrap();
        assert!(r.applied_shift > 0.0);
        assert!(r.recursion_count >= 1);
        assert!((r.estimate[0] - 2.9).abs() < 0.05);
        let u = envelope_value(&scalar(3.0), &f, &p).unwrap();
        // Huber branch |x| - t/2, shifted by -5
        assert!((u - (2.95 - 5.0)).abs() < 0.05, "{u}");
    }

    #[test]
    fn large_values_trigger_halving() {
        let f = FunctionOracle::from_fn(1, |y| 1e4 * (1.0 + y[0] * y[0]));
        let p = ProxParams::new(1e-4, 1e-2, 5000).with_seed(5);
        let r = hj_prox(&scalar(1.0), &f, &p).unwrap();
        assert!(r.effective_alpha < 1.0);
        let k = (1.0 / r.effective_alpha).log2();
        assert_eq!(k.fract(), 0.0);
        assert!(k as u32 <= r.recursion_count);
        assert!(r.estimate[0].is_finite());
    }

    #[test]
    fn recursion_cap_is_reported() {
        let f = FunctionOracle::from_fn(1, |y| 1e300 * (1.0 + y[0].abs()));
        let mut p = ProxParams::new(0.1, 1e-3, 10).with_seed(5);
        p.max_recursions = 3;
        match hj_prox(&scalar(0.0), &f, &p) {
            Err(HjError::NonConvergent { recursions, .. }) => assert_eq!(recursions, 3),
            other => panic!("expected NonConvergent, got {other:?}"),
        }
    }

    #[test]
    fn everything_infinite_is_degenerate() {
        let f = FunctionOracle::from_fn(1, |_| f64::INFINITY);
        let p = ProxParams::new(0.1, 0.1, 10);
        assert!(matches!(
            hj_prox(&scalar(0.0), &f, &p),
            Err(HjError::DegenerateWeights)
        ));
    }

    #[test]
    fn dimension_checked() {
        let p = ProxParams::default();
        assert!(matches!(
            hj_prox(&Vector::zeros(2), &l1(3), &p),
            Err(HjError::Oracle(OracleError::DimensionMismatch { .. }))
        ));
    }

    #[test]
    fn seeds_reproduce_bitwise() {
        let f = l1(3);
        let x = Vector::from_vec(vec![1.0, -0.2, 0.0]);
        let p = ProxParams::new(0.2, 0.1, 500).with_seed(42);
        assert_eq!(hj_prox(&x, &f, &p).unwrap(), hj_prox(&x, &f, &p).unwrap());
        let other = hj_prox(&x, &f, &p.with_seed(43)).unwrap();
        assert_ne!(other.estimate, hj_prox(&x, &f, &p).unwrap().estimate);
    }

    #[test]
    fn log_barrier_domain_is_respected() {
        let f = builtin(
            "log_barrier",
            &BuiltinParams {
                dim: 1,
                ..Default::default()
            },
        )
        .unwrap();
        let p = ProxParams::new(2.0, 0.1, 20_000).with_seed(8);
        let r = hj_prox(&scalar(0.5), &f, &p).unwrap();
        assert!(r.estimate[0] > 0.0);
        // the sampled estimator targets the smoothed prox at δ / α_eff
        let barrier = |y: f64| if y > 0.0 { -y.ln() } else { f64::INFINITY };
        let reference =
            crate::hj::quadrature_reference_1d(0.5, 2.0, barrier, p.delta / r.effective_alpha)
                .unwrap();
        assert!((r.estimate[0] - reference.prox).abs() < 0.05, "{} vs {}", r.estimate[0], reference.prox);
    }

    #[test]
    fn noisy_envelope_constant() {
        let f = FunctionOracle::from_fn(1, |_| 1.25);
        let p = ProxParams::new(0.1, 0.1, 50).with_seed(3);
        let e = noisy_envelope(&scalar(0.3), &f, &p, 0.01).unwrap();
        assert!((e.value - 1.25).abs() < 1e-9);
        assert!(e.gradient[0].is_finite());
    }

    #[test]
    fn noisy_envelope_rejects_bad_delta2() {
        let f = FunctionOracle::from_fn(1, |_| 0.0);
        assert!(noisy_envelope(&scalar(0.0), &f, &ProxParams::default(), 0.0).is_err());
    }
}

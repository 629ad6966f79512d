//! Sampling estimator of proximal points and Moreau envelopes.
//!
//! For `y ~ N(x, delta * t)` the softmax-weighted sample mean with weights
//! `exp(-f(y)/delta)` estimates the proximal point of `t f` at `x`, and
//! `-delta * ln(mean(exp(-f(y)/delta)))` estimates the envelope value. Both
//! converge to the exact quantities as `delta -> 0` and `N -> inf`.
//!
//! Large `f/delta` is handled by trading `delta` for a scale `alpha <= 1`
//! (sample at variance `delta t / alpha`, weight by `exp(-alpha f / delta)`),
//! halving `alpha` until no weight underflows. Negative values are handled
//! by shifting `f` up, which leaves the proximal point unchanged.

mod estimator;
mod quadrature;
mod softmax;

pub use estimator::{
    envelope_gradient, envelope_value, hj_prox, noisy_envelope, EnvelopeEstimate, ProxResult,
};
pub use quadrature::{quadrature_reference_1d, QuadratureResult};
pub use softmax::{log_sum_exp_scaled, softmax_weights};

use crate::oracle::OracleError;

#[derive(Debug, thiserror::Error)]
pub enum HjError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("invalid estimator parameters: {0}")]
    InvalidParams(String),
    #[error("every sample has f = +inf; no finite weight")]
    DegenerateWeights,
    #[error(
        "stabilisation did not converge after {recursions} recursions \
         (alpha = {alpha:e}, shift = {shift:e}, min z = {min_z:e}, max z = {max_z:e})"
    )]
    NonConvergent {
        recursions: u32,
        alpha: f64,
        shift: f64,
        min_z: f64,
        max_z: f64,
    },
    #[error("quadrature failed: {0}")]
    Quadrature(String),
}

/// Tunables of the estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxParams {
    /// Prox time step `t > 0`.
    pub t: f64,
    /// Viscosity / smoothing `delta > 0`.
    pub delta: f64,
    /// Samples drawn per estimate.
    pub num_samples: usize,
    /// Initial scale, `0 < alpha <= 1`.
    pub alpha: f64,
    /// Underflow tolerance, in `(0, 1)`.
    pub eps_underflow: f64,
    pub max_recursions: u32,
    pub seed: u64,
}

impl Default for ProxParams {
    fn default() -> Self {
        ProxParams {
            t: 0.1,
            delta: 0.1,
            num_samples: 1000,
            alpha: 1.0,
            eps_underflow: 1e-12,
            max_recursions: 64,
            seed: 0,
        }
    }
}

impl ProxParams {
    pub fn new(t: f64, delta: f64, num_samples: usize) -> Self {
        ProxParams {
            t,
            delta,
            num_samples,
            ..Default::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_t(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_samples(mut self, n: usize) -> Self {
        self.num_samples = n;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<(), HjError> {
        let bad = |m: String| Err(HjError::InvalidParams(m));
        if !(self.t > 0.0 && self.t.is_finite()) {
            return bad(format!("t must be positive, got {}", self.t));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return bad(format!("delta must be positive, got {}", self.delta));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        if !(self.eps_underflow > 0.0 && self.eps_underflow < 1.0) {
            return bad(format!(
                "eps_underflow must lie in (0, 1), got {}",
                self.eps_underflow
            ));
        }
        if self.num_samples == 0 {
            return bad("num_samples must be at least 1".into());
        }
        if self.max_recursions == 0 {
            return bad("max_recursions must be at least 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        ProxParams::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_params() {
        let p = ProxParams::default();
        assert!(p.with_t(0.0).validate().is_err());
        assert!(p.with_delta(-1.0).validate().is_err());
        assert!(p.with_alpha(1.5).validate().is_err());
        assert!(p.with_alpha(0.0).validate().is_err());
        assert!(p.with_samples(0).validate().is_err());
        let mut q = p;
        q.eps_underflow = 1.0;
        assert!(q.validate().is_err());
    }
}

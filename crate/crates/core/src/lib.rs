//! Proximal operators and Moreau envelopes of black-box functions, estimated
//! from function values alone.
//!
//! The estimator draws Gaussian samples around the query point and forms a
//! softmax-weighted average of them, with weights `exp(-f(y)/delta)`. As the
//! smoothing parameter `delta` goes to zero the weighted average converges to
//! the proximal point and `-delta * ln(mean weight)` to the Moreau envelope.
//!
//! Crate layout:
//!
//! * [`oracle`]: batched black-box functions, noise wrapping and the builtin
//!   test functions.
//! * [`hj`]: the sampling estimator, its numerical stabilisation and a 1-D
//!   quadrature reference.
//! * [`analytic`]: closed-form proximal maps and envelopes, plus iterative
//!   prox solvers for functions without a closed form.
//! * [`solvers`]: ISTA, linearized method of multipliers and gradient descent
//!   over a pluggable prox provider.
//! * [`experiments`]: problem generation and the experiment families, with
//!   CSV and manifest output.
//! * [`exec`]: rayon-backed data parallelism with a sequential fallback.
//!
//! ```
//! use hjprox::{builtin, hj_prox, oracle::BuiltinParams, ProxParams, Vector};
//!
//! let f = builtin("l1", &BuiltinParams { dim: 1, ..Default::default() })?;
//! let p = ProxParams::new(0.1, 0.05, 10_000).with_seed(7);
//! let r = hj_prox(&Vector::from_element(1, 3.0), &f, &p)?;
//! assert!((r.estimate[0] - 2.9).abs() < 0.05);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod analytic;
pub mod config;
pub mod exec;
pub mod experiments;
pub mod hj;
pub mod linalg;
pub mod oracle;
pub mod solvers;

/// Dense point in `R^n`.
pub type Vector = nalgebra::DVector<f64>;
/// Dense row-major-agnostic matrix.
pub type Matrix = nalgebra::DMatrix<f64>;

pub use hj::{
    envelope_gradient, envelope_value, hj_prox, noisy_envelope, quadrature_reference_1d,
    softmax_weights, EnvelopeEstimate, HjError, ProxParams, ProxResult, QuadratureResult,
};
pub use oracle::{builtin, Builtin, FunctionOracle, NoiseSpec, OracleError};

/// Version string of the form `v0.1.0-3-gabcdef0`, falling back to the crate
/// version when the build was not done from a git checkout.
pub fn version_string() -> &'static str {
    option_env!("HJPROX_GIT_DESCRIBE").unwrap_or(concat!("v", env!("CARGO_PKG_VERSION")))
}

use super::HjError;

/// `ln Σ exp(-alpha z_i / delta)` and the index-aligned stabilised
/// exponents, computed with max subtraction. `+inf` entries contribute
/// nothing.
fn scaled_exponents(z: &[f64], alpha: f64, delta: f64) -> Result<(Vec<f64>, f64), HjError> {
    let s: Vec<f64> = z.iter().map(|&zi| -alpha * zi / delta).collect();
    let max = s
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(HjError::DegenerateWeights);
    }
    Ok((s, max))
}

/// Normalised weights `softmax(-alpha z / delta)`.
///
/// Entries equal to `+inf` get weight exactly zero; if every entry is
/// `+inf` there is nothing to normalise and [`HjError::DegenerateWeights`]
/// is returned.
pub fn softmax_weights(z: &[f64], alpha: f64, delta: f64) -> Result<Vec<f64>, HjError> {
    Ok(weights_and_lse(z, alpha, delta)?.0)
}

/// `ln Σ_i exp(-alpha z_i / delta)`.
pub fn log_sum_exp_scaled(z: &[f64], alpha: f64, delta: f64) -> Result<f64, HjError> {
    Ok(weights_and_lse(z, alpha, delta)?.1)
}

pub(crate) fn weights_and_lse(
    z: &[f64],
    alpha: f64,
    delta: f64,
) -> Result<(Vec<f64>, f64), HjError> {
    if z.is_empty() {
        return Err(HjError::DegenerateWeights);
    }
    let (s, max) = scaled_exponents(z, alpha, delta)?;
    let mut w: Vec<f64> = s
        .iter()
        .map(|&si| if si.is_finite() { (si - max).exp() } else { 0.0 })
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|wi| *wi /= total);
    Ok((w, max + total.ln()))
}

//! Deterministic 1-D reference for the smoothed envelope and prox.
//!
//! Computes `∫ φ(y) exp(-f(y)/δ) dy` and `∫ y φ(y) exp(-f(y)/δ) dy` with
//! `φ` the density of `N(x, δt)`, by adaptive Gauss-Kronrod (7/15) on a
//! finite window. The log-integrand `L(y) = -(y-x)²/(2δt) - f(y)/δ` is
//! evaluated in log space and shifted by its maximum before exponentiation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::HjError;

/// Relative error target of the adaptive rule.
const REL_TOL: f64 = 1e-10;
const MAX_INTERVALS: usize = 20_000;
/// The window is cut where `L` drops this far below its maximum
/// (`e^-60 ≈ 1e-26`).
const LOG_CUTOFF: f64 = 60.0;
const SCAN_POINTS: usize = 401;
const INITIAL_PIECES: usize = 64;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Quadrature values of the smoothed envelope, its gradient and the prox.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub gradient: f64,
    pub prox: f64,
    /// Integration window actually used.
    pub window: (f64, f64),
}

#[derive(Clone, Copy)]
struct Piece {
    a: f64,
    b: f64,
    i0: f64,
    i1: f64,
    e0: f64,
    e1: f64,
}

impl Piece {
    fn priority(&self) -> f64 {
        self.e0 + self.e1
    }
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.priority() == other.priority()
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority().total_cmp(&other.priority())
    }
}

/// GK15 on `[a, b]` of `(g(y), (y - c) g(y))` where `g = exp(L - lmax)`.
fn gk15(a: f64, b: f64, g: &impl Fn(f64) -> f64, c: f64) -> Piece {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let (mut k0, mut k1, mut g0, mut g1) = (0.0, 0.0, 0.0, 0.0);
    for (i, (&xk, &wk)) in XGK.iter().zip(WGK.iter()).enumerate() {
        let nodes: &[f64] = if xk == 0.0 {
            &[mid]
        } else {
            &[mid - half * xk, mid + half * xk]
        };
        for &y in nodes {
            let v = g(y);
            k0 += wk * v;
            k1 += wk * (y - c) * v;
            if i % 2 == 1 {
                let wg = WG[i / 2];
                g0 += wg * v;
                g1 += wg * (y - c) * v;
            }
        }
    }
    Piece {
        a,
        b,
        i0: k0 * half,
        i1: k1 * half,
        e0: ((k0 - g0) * half).abs(),
        e1: ((k1 - g1) * half).abs(),
    }
}

/// Locate the bulk of `exp(L)`: hill-climb a coarse scan towards the
/// maximiser of `L`, then widen both edges until `L` has fallen by
/// [`LOG_CUTOFF`].
fn find_window(l: &impl Fn(f64) -> f64, x: f64, sigma: f64) -> Result<(f64, f64, f64, f64), HjError> {
    let mut center = x;
    let mut half = 10.0 * sigma;
    let mut best = None;
    for _ in 0..400 {
        let lo = center - half;
        let step = 2.0 * half / (SCAN_POINTS - 1) as f64;
        let (mut arg, mut val) = (usize::MAX, f64::NEG_INFINITY);
        for k in 0..SCAN_POINTS {
            let v = l(lo + k as f64 * step);
            if v > val {
                val = v;
                arg = k;
            }
        }
        if arg == usize::MAX {
            // nothing finite yet: look further out
            half *= 2.0;
            if !half.is_finite() {
                break;
            }
            continue;
        }
        let y = lo + arg as f64 * step;
        if arg == 0 || arg == SCAN_POINTS - 1 {
            center = y;
            continue;
        }
        // refine around the coarse maximum
        let (mut ya, mut va) = (y, val);
        let fine = 2.0 * step / 200.0;
        for k in 0..=200 {
            let yy = y - step + k as f64 * fine;
            let v = l(yy);
            if v > va {
                va = v;
                ya = yy;
            }
        }
        best = Some((ya, va));
        break;
    }
    let (ymax, lmax) = best.ok_or_else(|| {
        HjError::Quadrature("integrand is zero or non-finite over the whole window".into())
    })?;
    let floor = lmax - LOG_CUTOFF;
    let widen = |dir: f64| {
        let mut edge = ymax + dir * 10.0 * sigma;
        for _ in 0..10_000 {
            if l(edge).partial_cmp(&floor).is_none_or(|o| o.is_le()) {
                break;
            }
            edge += dir * 5.0 * sigma;
        }
        edge
    };
    Ok((widen(-1.0), widen(1.0), ymax, lmax))
}

/// Reference values of `u^δ(x, t)`, its derivative and the smoothed prox for
/// a scalar function, by adaptive quadrature.
///
/// `f` may return `+inf` (outside its domain); such points contribute zero.
pub fn quadrature_reference_1d(
    x: f64,
    t: f64,
    f: impl Fn(f64) -> f64,
    delta: f64,
) -> Result<QuadratureResult, HjError> {
    if !(t > 0.0 && delta > 0.0 && x.is_finite()) {
        return Err(HjError::InvalidParams(format!(
            "quadrature needs finite x and positive t, delta (x={x}, t={t}, delta={delta})"
        )));
    }
    let var = delta * t;
    let sigma = var.sqrt();
    let l = |y: f64| {
        let fy = f(y);
        if fy.is_nan() || fy == f64::INFINITY {
            f64::NEG_INFINITY
        } else {
            -(y - x) * (y - x) / (2.0 * var) - fy / delta
        }
    };
    let (lo, hi, center, lmax) = find_window(&l, x, sigma)?;
    let g = |y: f64| {
        let v = l(y);
        if v == f64::NEG_INFINITY {
            0.0
        } else {
            (v - lmax).exp()
        }
    };

    let mut heap = BinaryHeap::new();
    let piece = (hi - lo) / INITIAL_PIECES as f64;
    for k in 0..INITIAL_PIECES {
        let a = lo + k as f64 * piece;
        let b = if k + 1 == INITIAL_PIECES { hi } else { a + piece };
        heap.push(gk15(a, b, &g, center));
    }
    let totals = |h: &BinaryHeap<Piece>| {
        h.iter().fold((0.0, 0.0, 0.0, 0.0), |acc, p| {
            (acc.0 + p.i0, acc.1 + p.i1, acc.2 + p.e0, acc.3 + p.e1)
        })
    };
    let scale1 = hi - lo;
    loop {
        let (i0, i1, e0, e1) = totals(&heap);
        let done = e0 <= REL_TOL * i0.abs() && e1 <= REL_TOL * i0.abs() * scale1;
        if done || heap.len() >= MAX_INTERVALS {
            if !done {
                log::warn!(
                    "quadrature stopped at {MAX_INTERVALS} intervals: rel err {:e}",
                    e0 / i0.abs()
                );
            }
            if !(i0 > 0.0 && i0.is_finite()) {
                return Err(HjError::Quadrature(format!(
                    "normalising integral is {i0}"
                )));
            }
            let prox = center + i1 / i0;
            let value = -delta * (i0.ln() + lmax - 0.5 * (2.0 * std::f64::consts::PI * var).ln());
            return Ok(QuadratureResult {
                value,
                gradient: (x - prox) / t,
                prox,
                window: (lo, hi),
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let m = 0.5 * (worst.a + worst.b);
        heap.push(gk15(worst.a, m, &g, center));
        heap.push(gk15(m, worst.b, &g, center));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_function() {
        let r = quadrature_reference_1d(0.7, 0.3, |_| 0.0, 0.2).unwrap();
        assert!(r.value.abs() < 1e-9);
        assert!((r.prox - 0.7).abs() < 1e-9);
        assert!(r.gradient.abs() < 1e-8);
    }

    #[test]
    fn linear_function_is_exact() {
        // tilted Gaussian mean: x - t c for f = c y
        let (x, t, c) = (1.0, 0.5, 2.0);
        for delta in [1.0, 0.1, 0.01] {
            let r = quadrature_reference_1d(x, t, |y| c * y, delta).unwrap();
            assert!((r.prox - (x - t * c)).abs() < 1e-9, "delta={delta}: {}", r.prox);
            // u = c x - t c^2 / 2 exactly
            assert!((r.value - (c * x - t * c * c / 2.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn abs_converges_to_shrink() {
        let errs: Vec<f64> = [0.5, 0.1, 0.02]
            .iter()
            .map(|&d| (quadrature_reference_1d(3.0, 0.1, f64::abs, d).unwrap().prox - 2.9).abs())
            .collect();
        assert!(errs[2] < 1e-6, "{errs:?}");
        assert!(errs[0] >= errs[1] && errs[1] >= errs[2]);
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let f = |y: f64| y.abs() + 0.3 * y * y;
        let (t, delta, h) = (0.2, 0.05, 1e-5);
        for x in [-1.0, -0.05, 0.0, 0.3, 2.0] {
            let r = quadrature_reference_1d(x, t, f, delta).unwrap();
            let up = quadrature_reference_1d(x + h, t, f, delta).unwrap().value;
            let dn = quadrature_reference_1d(x - h, t, f, delta).unwrap().value;
            let fd = (up - dn) / (2.0 * h);
            assert!((fd - r.gradient).abs() < 1e-4, "x={x}: fd={fd} grad={}", r.gradient);
        }
    }

    #[test]
    fn far_prox_is_found() {
        // x^2 - log x at x = 3, t = 0.5: prox ≈ 1.65, far outside ±10σ of x
        let f = |y: f64| if y > 0.0 { y * y - y.ln() } else { f64::INFINITY };
        let (x, t): (f64, f64) = (3.0, 0.5);
        let a = 2.0 + 1.0 / t;
        let exact = ((x / t) + ((x / t).powi(2) + 4.0 * a).sqrt()) / (2.0 * a);
        let r = quadrature_reference_1d(x, t, f, 0.01).unwrap();
        assert!((r.prox - exact).abs() < 1e-3, "{} vs {exact}", r.prox);
    }

    #[test]
    fn domain_outside_window_is_degenerate() {
        let e = quadrature_reference_1d(0.0, 0.1, |_| f64::INFINITY, 0.1);
        assert!(matches!(e, Err(HjError::Quadrature(_))));
    }
}

//! Sorted-ℓ1 (SLOPE) machinery: the weighted sorted norm, threshold rules,
//! the sorted soft-threshold operator and the threshold→penalty construction.
//!
//! A threshold rule Θ(x; λ) is a scalar shrinkage family that is
//! non-decreasing, odd, dominated by the identity on the positive axis and
//! nonexpansive. Each rule induces a penalty through
//!
//! ```text
//! Θ⁻¹(u; λ) = sup { t : Θ(t; λ) ≤ u }
//! s(u; λ)   = Θ⁻¹(u; λ) − u
//! P(θ; λ)   = ∫₀^{|θ|} s(u; λ) du
//! ```
//!
//! For the soft rule this recovers `P(θ; λ) = λ·|θ|`, which is what makes the
//! sorted soft-threshold step of the solver equivalent to penalizing with the
//! sorted-ℓ1 norm.

use std::cell::RefCell;

use crate::error::{Error, Result};
use crate::quad::adaptive_simpson;

/// Non-negative, non-increasing regularization weights `λ₁ ≥ … ≥ λₙ ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSequence {
    values: Vec<f64>,
}

impl LambdaSequence {
    /// Validates non-negativity and the non-increasing order.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(
                    "lambda",
                    format!("entry {i} is {v}; all weights must be finite and >= 0"),
                ));
            }
            if i > 0 && values[i - 1] < v {
                return Err(Error::invalid(
                    "lambda",
                    format!("entries must be non-increasing, but values[{}] = {} < values[{i}] = {v}", i - 1, values[i - 1]),
                ));
            }
        }
        Ok(Self { values })
    }

    /// All weights equal to `value`.
    pub fn constant(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    /// Linear ramp from `lambda_max` down to `lambda_min`.
    pub fn linear(n: usize, lambda_max: f64, lambda_min: f64) -> Result<Self> {
        if lambda_min > lambda_max {
            return Err(Error::invalid(
                "lambda_min",
                format!("{lambda_min} exceeds lambda_max = {lambda_max}"),
            ));
        }
        if n <= 1 {
            return Self::new(vec![lambda_max; n]);
        }
        let step = (lambda_max - lambda_min) / (n - 1) as f64;
        Self::new((0..n).map(|i| lambda_max - step * i as f64).collect())
    }

    /// Linear ramp from `lambda_max` down to `min_ratio·lambda_max`.
    pub fn linear_from_max(n: usize, lambda_max: f64, min_ratio: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&min_ratio) {
            return Err(Error::invalid("min_ratio", format!("{min_ratio} not in [0, 1]")));
        }
        Self::linear(n, lambda_max, lambda_max * min_ratio)
    }

    pub fn zeros(n: usize) -> Self {
        Self { values: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Scalar threshold family Θ(x; λ).
pub trait ThresholdRule {
    /// Applies the rule at `x` with weight `lam`.
    fn apply(&self, x: f64, lam: f64) -> f64;

    /// `Θ⁻¹(u; λ) = sup{t : Θ(t; λ) ≤ u}` for `u ≥ 0`.
    ///
    /// The provided implementation brackets and bisects using the
    /// monotonicity of the rule; concrete rules may override with an
    /// analytic form.
    fn inverse(&self, u: f64, lam: f64) -> Result<f64> {
        bisect_threshold_inverse(self, u, lam)
    }
}

/// The soft rule `Θ(x; λ) = sign(x)·max(|x| − λ, 0)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SoftRule;

impl ThresholdRule for SoftRule {
    fn apply(&self, x: f64, lam: f64) -> f64 {
        soft_threshold(x, lam)
    }

    fn inverse(&self, u: f64, lam: f64) -> Result<f64> {
        if u < 0.0 {
            return Err(Error::invalid("u", format!("inverse requires u >= 0, got {u}")));
        }
        // For u = 0 this is the upper edge of the kill zone.
        Ok(u + lam)
    }
}

/// Generic `Θ⁻¹` by bracketed bisection; errors if no bracket is found.
pub fn bisect_threshold_inverse<R: ThresholdRule + ?Sized>(rule: &R, u: f64, lam: f64) -> Result<f64> {
    if !u.is_finite() || u < 0.0 {
        return Err(Error::invalid("u", format!("inverse requires u >= 0, got {u}")));
    }
    let mut lo = u;
    let mut step = lam.abs().max(1.0);
    let mut hi = u + step;
    let mut tries = 0;
    while rule.apply(hi, lam) <= u {
        lo = hi;
        step *= 2.0;
        hi = u + step;
        tries += 1;
        if tries > 200 {
            return Err(Error::numeric(format!(
                "threshold inverse bracket search failed at u = {u}; rule never exceeds u"
            )));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rule.apply(mid, lam) <= u {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Penalty `P(θ; λ) = ∫₀^{|θ|} (Θ⁻¹(u; λ) − u) du` by adaptive quadrature.
pub fn penalty_from_threshold<R: ThresholdRule + ?Sized>(rule: &R, theta: f64, lam: f64) -> Result<f64> {
    let upper = theta.abs();
    if upper == 0.0 {
        return Ok(0.0);
    }
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let integrand = |u: f64| match rule.inverse(u, lam) {
        Ok(t) => t - u,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            0.0
        }
    };
    let value = adaptive_simpson(integrand, 0.0, upper, 1e-10);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(value)
}

/// `sign(x)·max(|x| − lam, 0)`.
pub fn soft_threshold(x: f64, lam: f64) -> f64 {
    let mag = x.abs() - lam;
    if mag > 0.0 {
        mag * x.signum()
    } else {
        0.0
    }
}

/// Sorted-ℓ1 norm `Σⱼ λⱼ·|x|₍ⱼ₎` with magnitudes sorted in decreasing order.
pub fn sorted_l1_norm(x: &[f64], lambda: &LambdaSequence) -> Result<f64> {
    if x.len() != lambda.len() {
        return Err(Error::dims(format!(
            "sorted_l1_norm: |x| = {} but |lambda| = {}",
            x.len(),
            lambda.len()
        )));
    }
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    mags.sort_unstable_by(|a, b| b.total_cmp(a));
    Ok(mags.iter().zip(lambda.values()).map(|(m, l)| m * l).sum())
}

/// Sorted soft-threshold operator.
///
/// Entries are ranked by decreasing magnitude (ties broken by ascending
/// original index); the entry holding the i-th largest magnitude is shrunk by
/// `λᵢ` and the result is returned in the original positions with original
/// signs.
pub fn sorted_soft_threshold(x: &[f64], lambda: &LambdaSequence) -> Result<Vec<f64>> {
    if x.len() != lambda.len() {
        return Err(Error::dims(format!(
            "sorted_soft_threshold: |x| = {} but |lambda| = {}",
            x.len(),
            lambda.len()
        )));
    }
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_unstable_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()).then(a.cmp(&b)));
    let mut out = vec![0.0; x.len()];
    for (rank, &idx) in order.iter().enumerate() {
        out[idx] = soft_threshold(x[idx], lambda.values()[rank]);
    }
    Ok(out)
}

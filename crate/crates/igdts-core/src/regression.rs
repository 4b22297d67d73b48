//! Robust linear regression by iterative gradient descent with sorted
//! soft-threshold outlier selection, together with the reference OLS and LAD
//! estimators and the four template distances built on them.
//!
//! The solver minimizes
//!
//! ```text
//! L(β, γ) = ½‖y − Xβ − γ‖₂² + Σᵢ λᵢ·|γ|₍ᵢ₎
//! ```
//!
//! by alternating one gradient step on `β` (with the outlier estimate
//! subtracted from the response) and a sorted soft-threshold update of `γ`
//! from the fresh residual. With a step size below the reciprocal of the
//! largest eigenvalue of `XᵀX` the objective is non-increasing, and the loop
//! stops as soon as the thresholded mean squared error stalls or would
//! increase.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::slope::{sorted_l1_norm, sorted_soft_threshold, LambdaSequence};

pub const DEFAULT_EPS: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 500;
pub const DEFAULT_LAD_SMOOTHING: f64 = 1e-6;
pub const DEFAULT_LAD_MAX_ITER: usize = 200;

/// Gradient step size: fixed, or derived from the design matrix spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    /// `1/L` with `L` the largest eigenvalue of `XᵀX` (power iteration).
    Auto,
    Fixed(f64),
}

/// A robust regression instance: design, response, weight sequence and
/// solver controls.
#[derive(Debug, Clone)]
pub struct RegressionProblem {
    x: DMatrix<f64>,
    y: DVector<f64>,
    lambda: LambdaSequence,
    eta: StepSize,
    eps: f64,
    max_iter: usize,
}

impl RegressionProblem {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, lambda: LambdaSequence) -> Result<Self> {
        check_design(&x, &y)?;
        if lambda.len() != y.len() {
            return Err(Error::dims(format!(
                "lambda has {} entries but the problem has {} rows",
                lambda.len(),
                y.len()
            )));
        }
        Ok(Self {
            x,
            y,
            lambda,
            eta: StepSize::Auto,
            eps: DEFAULT_EPS,
            max_iter: DEFAULT_MAX_ITER,
        })
    }

    pub fn with_step_size(mut self, eta: StepSize) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_tolerance(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn lambda(&self) -> &LambdaSequence {
        &self.lambda
    }
}

/// Why the solver loop ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// The thresholded MSE would have increased; the pre-increase iterate is
    /// returned.
    MseIncrease,
    /// `|ΔMSE|` fell below the tolerance.
    MseStall,
    /// Iteration budget exhausted.
    MaxIter,
}

/// Solver output: coefficients, outlier vector and the raw iteration traces.
///
/// `mse_trace[j]` is the thresholded mean squared error after iteration
/// `j + 1`; `objective_trace[0]` is the objective at the initializer and the
/// remaining entries follow the iterations. When the loop stops because the
/// MSE would increase, the traces keep the rejected entry while `beta`/`gamma`
/// hold the better, pre-increase iterate.
#[derive(Debug, Clone)]
pub struct IgdtsSolution {
    pub beta: DVector<f64>,
    pub gamma: DVector<f64>,
    pub mse_trace: Vec<f64>,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
}

impl IgdtsSolution {
    /// The objective entries produced before the stopping test fired (drops
    /// the rejected final iterate when the loop stopped on an MSE increase).
    pub fn monotone_objective_prefix(&self) -> &[f64] {
        if self.stop_reason == StopReason::MseIncrease {
            &self.objective_trace[..self.objective_trace.len() - 1]
        } else {
            &self.objective_trace
        }
    }
}

fn check_design(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::dims(format!("design matrix is {}x{}", x.nrows(), x.ncols())));
    }
    if x.nrows() != y.len() {
        return Err(Error::dims(format!(
            "design has {} rows but response has {} entries",
            x.nrows(),
            y.len()
        )));
    }
    Ok(())
}

fn pseudo_inverse_solve(x: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    let svd = x.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let cutoff = max_sv * x.nrows().max(x.ncols()) as f64 * f64::EPSILON;
    svd.solve(rhs, cutoff)
        .expect("svd solve only fails for negative cutoff")
}

/// Least-squares fit; rank-deficient designs yield the minimum-norm solution.
pub fn ols_fit(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    check_design(x, y)?;
    Ok(pseudo_inverse_solve(x, y))
}

/// Approximate least-absolute-deviations fit.
#[derive(Debug, Clone)]
pub struct LadSolution {
    pub beta: DVector<f64>,
    /// ℓ1 residual norm at `beta`.
    pub objective: f64,
    pub converged: bool,
}

/// LAD by iteratively reweighted least squares with `1/max(|r|, smoothing)`
/// weights; returns the best iterate by ℓ1 objective.
pub fn lad_fit(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    smoothing: f64,
    max_iter: usize,
) -> Result<LadSolution> {
    check_design(x, y)?;
    if !smoothing.is_finite() || smoothing <= 0.0 {
        return Err(Error::invalid("smoothing", format!("must be > 0, got {smoothing}")));
    }
    let l1 = |beta: &DVector<f64>| (y - x * beta).abs().sum();

    let mut beta = pseudo_inverse_solve(x, y);
    let mut best_obj = l1(&beta);
    let mut best_beta = beta.clone();
    let mut converged = false;

    for _ in 0..max_iter {
        let r = y - x * &beta;
        let mut xw = x.clone();
        let mut yw = y.clone();
        for i in 0..y.len() {
            let w = 1.0 / r[i].abs().max(smoothing);
            let s = w.sqrt();
            xw.row_mut(i).scale_mut(s);
            yw[i] *= s;
        }
        let next = pseudo_inverse_solve(&xw, &yw);
        let step = (&next - &beta).amax();
        let obj = l1(&next);
        if obj < best_obj {
            best_obj = obj;
            best_beta = next.clone();
        }
        beta = next;
        if step < smoothing * (1.0 + beta.amax()) {
            converged = true;
            break;
        }
    }
    Ok(LadSolution {
        beta: best_beta,
        objective: best_obj,
        converged,
    })
}

/// `½‖y − Xβ − γ‖₂² + Σλᵢ|γ|₍ᵢ₎`.
pub fn objective_value(
    beta: &DVector<f64>,
    gamma: &DVector<f64>,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: &LambdaSequence,
) -> Result<f64> {
    check_design(x, y)?;
    if beta.len() != x.ncols() || gamma.len() != y.len() {
        return Err(Error::dims(format!(
            "beta has {} entries (need {}), gamma has {} (need {})",
            beta.len(),
            x.ncols(),
            gamma.len(),
            y.len()
        )));
    }
    let r = y - x * beta - gamma;
    Ok(0.5 * r.norm_squared() + sorted_l1_norm(gamma.as_slice(), lambda)?)
}

/// Step size `1/L` with `L` the largest eigenvalue of `XᵀX`, estimated by
/// power iteration. The result is deflated by a hair so that
/// `‖I − ηXᵀX‖₂ ≤ 1` holds despite the iterative estimate.
pub fn default_step_size(x: &DMatrix<f64>) -> Result<f64> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::dims(format!("design matrix is {}x{}", x.nrows(), x.ncols())));
    }
    let gram = x.transpose() * x;
    let p = gram.nrows();
    if gram.amax() == 0.0 {
        return Err(Error::invalid("x", "all-zero design matrix has no usable spectrum"));
    }

    // Deterministic start with a mild tilt so it cannot sit orthogonal to
    // the dominant eigenvector of a structured matrix.
    let mut v = DVector::from_fn(p, |i, _| 1.0 + 1e-3 * (i as f64 + 1.0) / p as f64);
    v /= v.norm();
    let mut eig = 0.0f64;
    for _ in 0..20_000 {
        let w = &gram * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return Err(Error::numeric("power iteration collapsed to the null space"));
        }
        let next = w / norm;
        let rayleigh = next.dot(&(&gram * &next));
        let done = eig > 0.0 && (rayleigh - eig).abs() <= 1e-13 * rayleigh;
        v = next;
        eig = rayleigh;
        if done {
            break;
        }
    }
    // The Rayleigh quotient never overshoots L, so a tiny inflation of the
    // estimate keeps eta * L <= 1.
    Ok(1.0 / (eig * (1.0 + 1e-7)))
}

/// Robust fit by iterative gradient descent and sorted threshold selection.
pub fn igdts_fit(problem: &RegressionProblem) -> Result<IgdtsSolution> {
    let x = &problem.x;
    let y = &problem.y;
    let lambda = &problem.lambda;
    let n = y.len() as f64;

    let eta = match problem.eta {
        StepSize::Fixed(e) => {
            if !e.is_finite() || e <= 0.0 {
                return Err(Error::invalid("eta", format!("must be finite and > 0, got {e}")));
            }
            e
        }
        StepSize::Auto => default_step_size(x)?,
    };

    let mut beta = pseudo_inverse_solve(x, y);
    let mut gamma = DVector::zeros(y.len());
    let mut mse_prev = f64::INFINITY; // the "large number" sentinel
    let mut mse_trace = Vec::new();
    let mut objective_trace = vec![objective_value(&beta, &gamma, x, y, lambda)?];

    for j in 0..problem.max_iter {
        let y_adj = y - &gamma;
        let grad = x.transpose() * (x * &beta - y_adj);
        let beta_next = &beta - eta * grad;
        let r = y - x * &beta_next;
        let gamma_next = DVector::from_vec(sorted_soft_threshold(r.as_slice(), lambda)?);
        let mse = (&r - &gamma_next).norm_squared() / n;
        if !mse.is_finite() {
            return Err(Error::numeric(format!(
                "non-finite mean squared error at iteration {}",
                j + 1
            )));
        }
        mse_trace.push(mse);
        objective_trace.push(objective_value(&beta_next, &gamma_next, x, y, lambda)?);

        if mse > mse_prev {
            // The increase is detected after computing the worse iterate:
            // return the previous (better) pair, keep both in the traces.
            return Ok(IgdtsSolution {
                beta,
                gamma,
                mse_trace,
                objective_trace,
                iterations: j + 1,
                converged: true,
                stop_reason: StopReason::MseIncrease,
            });
        }
        let delta = mse_prev - mse;
        beta = beta_next;
        gamma = gamma_next;
        mse_prev = mse;
        if delta < problem.eps {
            return Ok(IgdtsSolution {
                beta,
                gamma,
                mse_trace,
                objective_trace,
                iterations: j + 1,
                converged: true,
                stop_reason: StopReason::MseStall,
            });
        }
    }

    Ok(IgdtsSolution {
        beta,
        gamma,
        mse_trace,
        objective_trace,
        iterations: problem.max_iter,
        converged: false,
        stop_reason: StopReason::MaxIter,
    })
}

/// `min_β ½‖y − Xβ‖₂²` at the least-squares fit.
pub fn d_ols(y: &DVector<f64>, x: &DMatrix<f64>) -> Result<f64> {
    let beta = ols_fit(x, y)?;
    Ok(0.5 * (y - x * beta).norm_squared())
}

/// `min_β ½‖y − Xβ‖₁` at the (approximate) LAD fit.
pub fn d_lad(y: &DVector<f64>, x: &DMatrix<f64>) -> Result<f64> {
    let fit = lad_fit(x, y, DEFAULT_LAD_SMOOTHING, DEFAULT_LAD_MAX_ITER)?;
    Ok(0.5 * fit.objective)
}

/// Soft-threshold-squares distance: the robust objective with a uniform
/// weight `lam` on the outlier vector.
pub fn d_lss(y: &DVector<f64>, x: &DMatrix<f64>, lam: f64) -> Result<f64> {
    let lambda = LambdaSequence::constant(y.len(), lam)?;
    d_igdts(y, x, &lambda)
}

/// Sorted-threshold distance: the minimized robust objective under `lambda`.
pub fn d_igdts(y: &DVector<f64>, x: &DMatrix<f64>, lambda: &LambdaSequence) -> Result<f64> {
    let problem = RegressionProblem::new(x.clone(), y.clone(), lambda.clone())?;
    let sol = igdts_fit(&problem)?;
    objective_value(&sol.beta, &sol.gamma, x, y, lambda)
}

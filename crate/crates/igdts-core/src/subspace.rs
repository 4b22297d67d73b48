//! PCA appearance model with sparse-outlier-aware distance, likelihood and
//! incremental updating.
//!
//! An observation `y` is modeled as `μ + Uz + ω + γ`: mean template plus a
//! low-dimensional basis response plus dense Gaussian noise plus a sparse
//! outlier component. The distance from `y` to the model is the minimized
//! robust objective over `(z, γ)`; because `U` has orthonormal columns the
//! coefficient step is the closed form `z = Uᵀ(ȳ − γ)` and the alternation
//! needs no step-size tuning.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::slope::{soft_threshold, LambdaSequence};

pub const DEFAULT_BASIS_SIZE: usize = 16;
pub const DEFAULT_FORGETTING: f64 = 0.95;
pub const DEFAULT_SOLVE_EPS: f64 = 1e-8;
pub const DEFAULT_SOLVE_MAX_ITER: usize = 100;

/// Mean template, orthonormal basis and spectrum of the appearance model.
#[derive(Debug, Clone)]
pub struct SubspaceModel {
    mu: DVector<f64>,
    basis: DMatrix<f64>,
    sigma: DVector<f64>,
    n_eff: f64,
    k: usize,
}

impl SubspaceModel {
    /// A model with no samples yet; `k` is the target basis size.
    pub fn empty(dim: usize, k: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "model dimension must be positive".to_string()));
        }
        if k == 0 || k > dim {
            return Err(Error::invalid("k", format!("basis size {k} not in 1..={dim}")));
        }
        Ok(Self {
            mu: DVector::zeros(dim),
            basis: DMatrix::zeros(dim, 0),
            sigma: DVector::zeros(0),
            n_eff: 0.0,
            k,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Target basis size (the kept column count may be smaller early on).
    pub fn basis_size(&self) -> usize {
        self.k
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn singular_values(&self) -> &DVector<f64> {
        &self.sigma
    }

    pub fn n_eff(&self) -> f64 {
        self.n_eff
    }

    pub fn is_empty(&self) -> bool {
        self.n_eff == 0.0
    }

    /// `‖UᵀU − I‖_max`, the orthonormality defect of the basis.
    pub fn orthonormality_defect(&self) -> f64 {
        orthonormality_defect(&self.basis)
    }
}

fn orthonormality_defect(basis: &DMatrix<f64>) -> f64 {
    let k = basis.ncols();
    if k == 0 {
        return 0.0;
    }
    let gram = basis.tr_mul(basis);
    let mut defect = 0.0f64;
    for i in 0..k {
        for j in 0..k {
            let target = if i == j { 1.0 } else { 0.0 };
            defect = defect.max((gram[(i, j)] - target).abs());
        }
    }
    defect
}

/// Per-candidate solve output: basis coefficients, outlier vector and the
/// minimized distance.
#[derive(Debug, Clone)]
pub struct IgdtsSubspaceSolution {
    pub z: DVector<f64>,
    pub gamma: DVector<f64>,
    pub distance: f64,
    pub iterations: usize,
    pub objective_trace: Vec<f64>,
}

/// Minimizes `½‖ȳ − Uz − γ‖² + Σλᵢ|γ|₍ᵢ₎` over `(z, γ)` for an orthonormal
/// basis `U`, alternating the closed-form coefficient step with the sorted
/// soft-threshold step until the objective stalls.
pub fn igdts_subspace_solve(
    y_bar: &DVector<f64>,
    basis: &DMatrix<f64>,
    lambda: &LambdaSequence,
    eps: f64,
    max_iter: usize,
) -> Result<IgdtsSubspaceSolution> {
    let d = y_bar.len();
    if basis.nrows() != d {
        return Err(Error::dims(format!(
            "basis is {}x{} but the observation has {d} entries",
            basis.nrows(),
            basis.ncols()
        )));
    }
    if lambda.len() != d {
        return Err(Error::dims(format!(
            "lambda has {} entries but the observation has {d}",
            lambda.len()
        )));
    }
    let defect = orthonormality_defect(basis);
    if defect > 1e-8 {
        return Err(Error::invalid(
            "basis",
            format!("columns are not orthonormal (defect {defect:.3e})"),
        ));
    }
    solve_with_verified_basis(y_bar, basis, lambda, eps, max_iter)
}

/// The alternation itself, entered once the basis is known orthonormal (the
/// tracker hits this once per particle per frame against a basis whose
/// orthonormality is enforced at update time).
pub(crate) fn solve_with_verified_basis(
    y_bar: &DVector<f64>,
    basis: &DMatrix<f64>,
    lambda: &LambdaSequence,
    eps: f64,
    max_iter: usize,
) -> Result<IgdtsSubspaceSolution> {
    let d = y_bar.len();
    let k = basis.ncols();
    let lam = lambda.values();
    let mut gamma = DVector::zeros(d);
    let mut z = DVector::zeros(k);
    let mut adjusted = DVector::zeros(d);
    let mut projected = DVector::zeros(d);
    let mut residual = DVector::zeros(d);
    // Magnitudes sort as their IEEE bit patterns (all non-negative), so the
    // rank pass works on plain integer keys. The slot order changes little
    // between iterations; keys are refreshed in place so each re-sort sees
    // nearly-sorted input.
    let mut slots: Vec<(u64, u32)> = (0..d).map(|i| (0, i as u32)).collect();
    let mut mag_bits = vec![0u64; d];

    let mut prev = f64::INFINITY;
    let mut trace = Vec::new();
    let mut iterations = 0;
    for _ in 0..max_iter.max(1) {
        iterations += 1;
        // z = Uᵀ(ȳ − γ)
        adjusted.copy_from(y_bar);
        adjusted -= &gamma;
        if k > 0 {
            z.gemv_tr(1.0, basis, &adjusted, 0.0);
            projected.gemv(1.0, basis, &z, 0.0);
            residual.copy_from(y_bar);
            residual -= &projected;
        } else {
            residual.copy_from(y_bar);
        }
        // γ = sorted soft threshold of the residual: rank by decreasing
        // magnitude (ties to the lower original index), shrink slot i by λᵢ.
        // The quadratic term falls out of the same pass.
        let r = residual.as_slice();
        for slot in slots.iter_mut() {
            slot.0 = !r[slot.1 as usize].abs().to_bits();
        }
        slots.sort_unstable();
        let g = gamma.as_mut_slice();
        let mut quad = 0.0;
        for (rank, &(_, idx)) in slots.iter().enumerate() {
            let ri = r[idx as usize];
            let gi = soft_threshold(ri, lam[rank]);
            g[idx as usize] = gi;
            // Stored smallest-rank-last so the upcoming ascending sort sees
            // nearly-sorted input as well.
            mag_bits[d - 1 - rank] = gi.abs().to_bits();
            let e = ri - gi;
            quad += e * e;
        }
        // Sorted-ℓ1 norm of γ (its own magnitude order, not the slot order).
        mag_bits.sort_unstable();
        let mut penalty = 0.0;
        for (l, &bits) in lam.iter().zip(mag_bits.iter().rev()) {
            let m = f64::from_bits(bits);
            if m == 0.0 {
                break;
            }
            penalty += l * m;
        }
        let objective = 0.5 * quad + penalty;
        if !objective.is_finite() {
            return Err(Error::numeric(format!(
                "non-finite subspace objective at iteration {iterations}"
            )));
        }
        trace.push(objective);
        if (prev - objective).abs() < eps {
            prev = objective;
            break;
        }
        prev = objective;
    }
    Ok(IgdtsSubspaceSolution {
        z,
        gamma,
        distance: prev,
        iterations,
        objective_trace: trace,
    })
}

/// Distance from `y` to the model: the minimized robust objective on
/// `ȳ = y − μ`.
pub fn subspace_distance(
    y: &DVector<f64>,
    model: &SubspaceModel,
    lambda: &LambdaSequence,
) -> Result<f64> {
    if y.len() != model.dim() {
        return Err(Error::dims(format!(
            "observation has {} entries but the model dimension is {}",
            y.len(),
            model.dim()
        )));
    }
    let y_bar = y - &model.mu;
    Ok(igdts_subspace_solve(&y_bar, &model.basis, lambda, DEFAULT_SOLVE_EPS, DEFAULT_SOLVE_MAX_ITER)?
        .distance)
}

/// `exp(−κ·distance)`, in `(0, 1]`.
pub fn observation_likelihood(
    y: &DVector<f64>,
    model: &SubspaceModel,
    lambda: &LambdaSequence,
    kappa: f64,
) -> Result<f64> {
    Ok(log_observation_likelihood(y, model, lambda, kappa)?.exp())
}

/// `−κ·distance`; the form used for comparisons to avoid underflow.
pub fn log_observation_likelihood(
    y: &DVector<f64>,
    model: &SubspaceModel,
    lambda: &LambdaSequence,
    kappa: f64,
) -> Result<f64> {
    if !kappa.is_finite() || kappa <= 0.0 {
        return Err(Error::invalid("kappa", format!("must be > 0, got {kappa}")));
    }
    Ok(-kappa * subspace_distance(y, model, lambda)?)
}

/// Replaces pixels flagged by a non-zero outlier component with the model
/// mean; the threshold step produces exact zeros, so the test is exact.
pub fn clean_observation(
    y_o: &DVector<f64>,
    gamma_o: &DVector<f64>,
    mu: &DVector<f64>,
) -> Result<DVector<f64>> {
    if y_o.len() != gamma_o.len() || y_o.len() != mu.len() {
        return Err(Error::dims(format!(
            "clean_observation lengths differ: y {}, gamma {}, mu {}",
            y_o.len(),
            gamma_o.len(),
            mu.len()
        )));
    }
    Ok(DVector::from_fn(y_o.len(), |i, _| {
        if gamma_o[i] != 0.0 {
            mu[i]
        } else {
            y_o[i]
        }
    }))
}

/// Folds a batch of (cleaned) observations into the model.
///
/// The decayed prior factorization, the centered batch and a mean-correction
/// column are stacked and re-decomposed; with `forgetting = 1` and no rank
/// truncation this reproduces batch PCA of the concatenated samples exactly.
/// An empty model comes back as the batch PCA of the batch itself.
pub fn incremental_update(
    model: &SubspaceModel,
    batch: &DMatrix<f64>,
    forgetting: f64,
) -> Result<SubspaceModel> {
    if !(forgetting > 0.0 && forgetting <= 1.0) {
        return Err(Error::invalid("forgetting", format!("must be in (0, 1], got {forgetting}")));
    }
    let m = batch.ncols();
    if m == 0 {
        return Ok(model.clone());
    }
    if batch.nrows() != model.dim() {
        return Err(Error::dims(format!(
            "batch rows {} do not match model dimension {}",
            batch.nrows(),
            model.dim()
        )));
    }
    let d = model.dim();
    let mf = m as f64;
    let batch_mean = batch.column_mean();
    let centered = {
        let mut c = batch.clone();
        for mut col in c.column_iter_mut() {
            col -= &batch_mean;
        }
        c
    };

    let (stacked, mu_new, n_new) = if model.is_empty() {
        (centered, batch_mean, mf)
    } else {
        let n_prior = forgetting * model.n_eff;
        let total = n_prior + mf;
        let mu_new = (&model.mu * n_prior + &batch_mean * mf) / total;
        let correction = (&batch_mean - &model.mu) * (n_prior * mf / total).sqrt();

        let k_cur = model.basis.ncols();
        let mut stacked = DMatrix::zeros(d, k_cur + m + 1);
        for j in 0..k_cur {
            stacked
                .column_mut(j)
                .copy_from(&(model.basis.column(j) * (forgetting * model.sigma[j])));
        }
        stacked.columns_mut(k_cur, m).copy_from(&centered);
        stacked.column_mut(k_cur + m).copy_from(&correction);
        (stacked, mu_new, total)
    };

    let svd = stacked.svd(true, false);
    let u = svd.u.as_ref().expect("svd requested u");
    let sv = &svd.singular_values;
    let max_sv = sv.max();
    let cutoff = if max_sv > 0.0 { max_sv * 1e-12 } else { 0.0 };
    let keep = sv
        .iter()
        .take(model.k)
        .take_while(|&&s| s > cutoff)
        .count();

    let basis = u.columns(0, keep).into_owned();
    let defect = orthonormality_defect(&basis);
    if defect > 1e-8 {
        return Err(Error::numeric(format!(
            "updated basis lost orthonormality (defect {defect:.3e})"
        )));
    }
    Ok(SubspaceModel {
        mu: mu_new,
        basis,
        sigma: DVector::from_fn(keep, |i, _| sv[i]),
        n_eff: n_new,
        k: model.k,
    })
}

//! Bootstrap particle filter over a 6-parameter affine state space, scored
//! by the outlier-aware subspace model.
//!
//! Each frame: propagate the particle set through the random-walk motion
//! model, warp and score every candidate region, pick the maximum-likelihood
//! state, queue its cleaned observation for the periodic model update, and
//! resample for the next frame. All randomness flows through one seeded
//! stream, so a `(sequence, config, seed)` triple reproduces bit-identical
//! results.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::imaging::{warp_patch, Frame};
use crate::metrics::Box2D;
use crate::slope::LambdaSequence;
use crate::subspace::{
    clean_observation, incremental_update, solve_with_verified_basis, SubspaceModel,
    DEFAULT_FORGETTING,
};

/// Smallest value the positive affine parameters may reach; propagation
/// reflects off this floor.
const POSITIVE_FLOOR: f64 = 1e-4;

/// 6-parameter affine warp of the target region.
///
/// The linear part is `scale · R(theta) · [[1, skew], [0, aspect]]`; `scale`
/// is measured in frame pixels per template pixel, so a target of width `w`
/// tracked with a `side`-pixel template has `scale = w / side`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineState {
    pub tx: f64,
    pub ty: f64,
    pub theta: f64,
    pub scale: f64,
    pub aspect: f64,
    pub skew: f64,
}

impl AffineState {
    pub fn identity() -> Self {
        Self {
            tx: 0.0,
            ty: 0.0,
            theta: 0.0,
            scale: 1.0,
            aspect: 1.0,
            skew: 0.0,
        }
    }

    /// State whose warped template reproduces `bbox` with a `side`-pixel
    /// template grid.
    pub fn from_bbox(bbox: &Box2D, side: usize) -> Result<Self> {
        if !(bbox.w > 0.0 && bbox.h > 0.0) {
            return Err(Error::invalid(
                "bbox",
                format!("needs positive extent, got {}x{}", bbox.w, bbox.h),
            ));
        }
        let (cx, cy) = bbox.center();
        Ok(Self {
            tx: cx,
            ty: cy,
            theta: 0.0,
            scale: bbox.w / side as f64,
            aspect: bbox.h / bbox.w,
            skew: 0.0,
        })
    }

    /// Row-major linear part `[m00, m01, m10, m11]`.
    pub fn linear(&self) -> [f64; 4] {
        let (s, c) = self.theta.sin_cos();
        [
            self.scale * c,
            self.scale * (c * self.skew - s * self.aspect),
            self.scale * s,
            self.scale * (s * self.skew + c * self.aspect),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.tx.is_finite()
            && self.ty.is_finite()
            && self.theta.is_finite()
            && self.scale.is_finite()
            && self.aspect.is_finite()
            && self.skew.is_finite()
            && self.scale > 0.0
            && self.aspect > 0.0
    }
}

/// Per-parameter standard deviations of the random-walk transition, in the
/// order `(tx, ty, theta, scale, aspect, skew)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionModel {
    pub sigma: [f64; 6],
}

impl MotionModel {
    pub fn new(sigma: [f64; 6]) -> Result<Self> {
        if sigma.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::invalid("sigma", format!("entries must be >= 0, got {sigma:?}")));
        }
        Ok(Self { sigma })
    }
}

impl Default for MotionModel {
    fn default() -> Self {
        Self {
            sigma: [4.0, 4.0, 0.01, 0.01, 0.002, 0.001],
        }
    }
}

/// Tracker configuration; the defaults are the reference operating point
/// (600 particles, 32-pixel patches, 16 basis vectors, 5-frame updates).
#[derive(Debug, Clone)]
pub struct TrackerConfig {
    pub n_particles: usize,
    pub patch_side: usize,
    pub k_basis: usize,
    pub update_interval: usize,
    pub lambda_max: f64,
    pub lambda_min_ratio: f64,
    pub kappa: f64,
    pub motion: MotionModel,
    pub forgetting: f64,
    pub seed: u64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            n_particles: 600,
            patch_side: 32,
            k_basis: 16,
            update_interval: 5,
            lambda_max: 0.1,
            lambda_min_ratio: 0.1,
            kappa: 10.0,
            motion: MotionModel::default(),
            forgetting: DEFAULT_FORGETTING,
            seed: 0,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(Error::invalid("n_particles", "must be >= 1".to_string()));
        }
        if self.patch_side < 2 {
            return Err(Error::invalid("patch_side", "must be >= 2".to_string()));
        }
        if self.k_basis == 0 || self.k_basis > self.patch_side * self.patch_side {
            return Err(Error::invalid("k_basis", "must be in 1..=patch_side^2".to_string()));
        }
        if self.update_interval == 0 {
            return Err(Error::invalid("update_interval", "must be >= 1".to_string()));
        }
        if !self.lambda_max.is_finite() || self.lambda_max < 0.0 {
            return Err(Error::invalid("lambda_max", "must be finite and >= 0".to_string()));
        }
        if !(0.0..=1.0).contains(&self.lambda_min_ratio) {
            return Err(Error::invalid("lambda_min_ratio", "must be in [0, 1]".to_string()));
        }
        if !self.kappa.is_finite() || self.kappa <= 0.0 {
            return Err(Error::invalid("kappa", "must be > 0".to_string()));
        }
        if !(self.forgetting > 0.0 && self.forgetting <= 1.0) {
            return Err(Error::invalid("forgetting", "must be in (0, 1]".to_string()));
        }
        Ok(())
    }
}

/// Convergence controls for the per-candidate subspace solve.
#[derive(Debug, Clone, Copy)]
pub struct SolverSettings {
    pub eps: f64,
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            eps: 5e-4,
            max_iter: 10,
        }
    }
}

/// Per-frame tracking output.
#[derive(Debug, Clone)]
pub struct TrackResult {
    pub frame_index: usize,
    pub state: AffineState,
    pub bbox: Box2D,
    pub distance: f64,
    pub log_likelihood: f64,
    pub updated_model: bool,
}

/// Axis-aligned bounding box of the warped `template_w × template_h`
/// rectangle (centered on the state's translation).
pub fn affine_to_bbox(state: &AffineState, template_w: f64, template_h: f64) -> Box2D {
    let [m00, m01, m10, m11] = state.linear();
    let hw = 0.5 * template_w;
    let hh = 0.5 * template_h;
    let mut xmin = f64::INFINITY;
    let mut xmax = f64::NEG_INFINITY;
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for (u, v) in [(-hw, -hh), (hw, -hh), (-hw, hh), (hw, hh)] {
        let x = m00 * u + m01 * v + state.tx;
        let y = m10 * u + m11 * v + state.ty;
        xmin = xmin.min(x);
        xmax = xmax.max(x);
        ymin = ymin.min(y);
        ymax = ymax.max(y);
    }
    Box2D::new(xmin, ymin, xmax - xmin, ymax - ymin)
}

fn reflect_floor(v: f64, floor: f64) -> f64 {
    if v < floor {
        2.0 * floor - v
    } else {
        v
    }
}

/// Random-walk transition: each parameter perturbed by independent zero-mean
/// Gaussian noise; `scale` and `aspect` reflect off a small positive floor.
pub fn propagate(
    states: &[AffineState],
    motion: &MotionModel,
    rng: &mut ChaCha8Rng,
) -> Vec<AffineState> {
    let s = &motion.sigma;
    states
        .iter()
        .map(|st| {
            let draw = |rng: &mut ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };
            let tx = st.tx + s[0] * draw(rng);
            let ty = st.ty + s[1] * draw(rng);
            let theta = st.theta + s[2] * draw(rng);
            let scale = reflect_floor(st.scale + s[3] * draw(rng), POSITIVE_FLOOR);
            let aspect = reflect_floor(st.aspect + s[4] * draw(rng), POSITIVE_FLOOR);
            let skew = st.skew + s[5] * draw(rng);
            AffineState {
                tx,
                ty,
                theta,
                scale,
                aspect,
                skew,
            }
        })
        .collect()
}

/// Argmax of the log-likelihoods; ties break to the lowest index. Errors if
/// no particle scored finitely.
pub fn select_map<'a>(
    states: &'a [AffineState],
    log_likelihoods: &[f64],
) -> Result<(usize, &'a AffineState)> {
    if states.is_empty() || states.len() != log_likelihoods.len() {
        return Err(Error::dims(format!(
            "select_map: {} states vs {} scores",
            states.len(),
            log_likelihoods.len()
        )));
    }
    let mut best = 0;
    let mut best_ll = f64::NEG_INFINITY;
    for (i, &ll) in log_likelihoods.iter().enumerate() {
        if ll > best_ll {
            best_ll = ll;
            best = i;
        }
    }
    if best_ll == f64::NEG_INFINITY {
        return Err(Error::numeric("no particle produced a finite likelihood".to_string()));
    }
    Ok((best, &states[best]))
}

/// Systematic resampling over softmax-normalized log-likelihood weights.
pub fn resample(
    states: &[AffineState],
    log_likelihoods: &[f64],
    n_out: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<AffineState>> {
    if states.is_empty() || states.len() != log_likelihoods.len() {
        return Err(Error::dims(format!(
            "resample: {} states vs {} scores",
            states.len(),
            log_likelihoods.len()
        )));
    }
    let max_ll = log_likelihoods.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max_ll == f64::NEG_INFINITY {
        return Err(Error::numeric("resample: all weights are zero".to_string()));
    }
    let weights: Vec<f64> = log_likelihoods.iter().map(|&ll| (ll - max_ll).exp()).collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::numeric("resample: weight normalization failed".to_string()));
    }

    let step = 1.0 / n_out as f64;
    let mut u = rng.random::<f64>() * step;
    let mut out = Vec::with_capacity(n_out);
    let mut j = 0;
    let mut cum = weights[0] / total;
    for _ in 0..n_out {
        while u > cum && j + 1 < states.len() {
            j += 1;
            cum += weights[j] / total;
        }
        out.push(states[j]);
        u += step;
    }
    Ok(out)
}

/// The particle-filter tracker: owns the appearance model, particle set and
/// random stream.
pub struct Tracker {
    config: TrackerConfig,
    solver: SolverSettings,
    lambda: LambdaSequence,
    model: SubspaceModel,
    template: DVector<f64>,
    particles: Vec<AffineState>,
    rng: ChaCha8Rng,
    frame_index: usize,
    buffer: Vec<DVector<f64>>,
    last_state: AffineState,
}

impl Tracker {
    /// Seeds the tracker from the first frame and its target box, and
    /// returns the (perfect-by-construction) frame-1 result.
    pub fn init(
        frame: &Frame,
        initial_box: &Box2D,
        config: TrackerConfig,
    ) -> Result<(Self, TrackResult)> {
        Self::init_with_solver(frame, initial_box, config, SolverSettings::default())
    }

    pub fn init_with_solver(
        frame: &Frame,
        initial_box: &Box2D,
        config: TrackerConfig,
        solver: SolverSettings,
    ) -> Result<(Self, TrackResult)> {
        config.validate()?;
        let side = config.patch_side;
        let state0 = AffineState::from_bbox(initial_box, side)?;
        let template = DVector::from_vec(warp_patch(frame, &state0, side)?);
        let d = side * side;
        let lambda = LambdaSequence::linear_from_max(d, config.lambda_max, config.lambda_min_ratio)?;
        let model = SubspaceModel::empty(d, config.k_basis)?;
        let result = TrackResult {
            frame_index: 1,
            state: state0,
            bbox: affine_to_bbox(&state0, side as f64, side as f64),
            distance: 0.0,
            log_likelihood: 0.0,
            updated_model: false,
        };
        let tracker = Self {
            particles: vec![state0; config.n_particles],
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            buffer: vec![template.clone()],
            frame_index: 1,
            last_state: state0,
            lambda,
            model,
            template,
            solver,
            config,
        };
        Ok((tracker, result))
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn model(&self) -> &SubspaceModel {
        &self.model
    }

    pub fn particles(&self) -> &[AffineState] {
        &self.particles
    }

    pub fn frame_index(&self) -> usize {
        self.frame_index
    }

    pub fn last_state(&self) -> &AffineState {
        &self.last_state
    }

    /// The bounding box of the most recent selected state.
    pub fn last_bbox(&self) -> Box2D {
        let side = self.config.patch_side as f64;
        affine_to_bbox(&self.last_state, side, side)
    }

    fn candidate_solution(&self, patch: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        if self.model.is_empty() {
            // Cold start: plain quadratic distance to the initial template,
            // no outlier component yet.
            let dist = 0.5 * (patch - &self.template).norm_squared();
            Ok((dist, DVector::zeros(patch.len())))
        } else {
            // Basis orthonormality is enforced by every model update.
            let y_bar = patch - self.model.mean();
            let sol = solve_with_verified_basis(
                &y_bar,
                self.model.basis(),
                &self.lambda,
                self.solver.eps,
                self.solver.max_iter,
            )?;
            Ok((sol.distance, sol.gamma))
        }
    }

    /// Scores every candidate state: warped patch distance and
    /// log-likelihood, in input order. States whose region misses the frame
    /// entirely get `(+inf, -inf)`.
    pub fn evaluate_particles(&self, states: &[AffineState], frame: &Frame) -> (Vec<f64>, Vec<f64>) {
        let side = self.config.patch_side;
        let mut distances = Vec::with_capacity(states.len());
        let mut log_liks = Vec::with_capacity(states.len());
        for state in states {
            let bbox = affine_to_bbox(state, side as f64, side as f64);
            let inside = bbox.x < frame.width() as f64
                && bbox.x + bbox.w > 0.0
                && bbox.y < frame.height() as f64
                && bbox.y + bbox.h > 0.0;
            let score = if !inside || !state.is_finite() {
                None
            } else {
                warp_patch(frame, state, side)
                    .ok()
                    .and_then(|p| self.candidate_solution(&DVector::from_vec(p)).ok())
            };
            match score {
                Some((dist, _)) => {
                    distances.push(dist);
                    log_liks.push(-self.config.kappa * dist);
                }
                None => {
                    distances.push(f64::INFINITY);
                    log_liks.push(f64::NEG_INFINITY);
                }
            }
        }
        (distances, log_liks)
    }

    /// Advances the tracker by one frame.
    ///
    /// Propagate, evaluate, select the MAP state, queue its cleaned
    /// observation, update the model on the configured cadence, and resample
    /// for the next frame. On a lost frame (no finite candidate) the state is
    /// left ready to re-propagate from the previous particle set.
    pub fn step(&mut self, frame: &Frame) -> Result<TrackResult> {
        self.frame_index += 1;
        let proposed = propagate(&self.particles, &self.config.motion, &mut self.rng);
        let (distances, log_liks) = self.evaluate_particles(&proposed, frame);
        let (best_idx, _) = select_map(&proposed, &log_liks).map_err(|_| Error::TrackingLost {
            frame: self.frame_index,
        })?;
        let best = proposed[best_idx];
        let side = self.config.patch_side;

        // Cleaned best observation enters the update buffer.
        let patch = DVector::from_vec(warp_patch(frame, &best, side)?);
        let (_, gamma) = self.candidate_solution(&patch)?;
        let mean = if self.model.is_empty() {
            self.template.clone()
        } else {
            self.model.mean().clone()
        };
        self.buffer.push(clean_observation(&patch, &gamma, &mean)?);

        let mut updated = false;
        if self.frame_index.is_multiple_of(self.config.update_interval) && !self.buffer.is_empty() {
            let batch = DMatrix::from_columns(&self.buffer);
            self.model = incremental_update(&self.model, &batch, self.config.forgetting)?;
            self.buffer.clear();
            updated = true;
        }

        self.particles = resample(&proposed, &log_liks, self.config.n_particles, &mut self.rng)?;
        self.last_state = best;
        Ok(TrackResult {
            frame_index: self.frame_index,
            state: best,
            bbox: affine_to_bbox(&best, side as f64, side as f64),
            distance: distances[best_idx],
            log_likelihood: log_liks[best_idx],
            updated_model: updated,
        })
    }
}

//! Reproducible synthetic data: regression instances with planted outliers
//! and textured image sequences with known ground truth.
//!
//! Textures come from deterministic lattice value noise, so a fixed seed
//! pins every byte of the generated frames.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::imaging::Frame;
use crate::metrics::Box2D;

/// How planted outliers are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OutlierKind {
    /// Zero-mean Laplacian draws with scale `sigma_l`.
    Laplacian,
    /// Random-sign entries of this absolute magnitude.
    FixedMagnitude(f64),
}

/// A generated regression instance plus its planted truth.
#[derive(Debug, Clone)]
pub struct SynthRegression {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub beta_true: DVector<f64>,
    pub gamma_true: DVector<f64>,
    /// Sorted indices of the rows that carry an outlier.
    pub outlier_idx: Vec<usize>,
    pub sigma_g: f64,
    pub sigma_l: f64,
}

/// Draws `y = Xβ* + ω + γ` with standard-normal design and coefficients,
/// dense Gaussian noise of scale `sigma_g`, and outliers on a random
/// `outlier_frac` subset of rows.
pub fn gen_regression(
    n: usize,
    p: usize,
    outlier_frac: f64,
    sigma_g: f64,
    sigma_l: f64,
    kind: OutlierKind,
    seed: u64,
) -> Result<SynthRegression> {
    if n == 0 || p == 0 {
        return Err(Error::invalid("n", format!("need n >= 1 and p >= 1, got n={n}, p={p}")));
    }
    if !(0.0..1.0).contains(&outlier_frac) {
        return Err(Error::invalid(
            "outlier_frac",
            format!("must be in [0, 1), got {outlier_frac}"),
        ));
    }
    if !sigma_g.is_finite() || sigma_g <= 0.0 || !sigma_l.is_finite() || sigma_l <= 0.0 {
        return Err(Error::invalid("sigma", "noise scales must be > 0".to_string()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = |rng: &mut ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };

    let x = DMatrix::from_fn(n, p, |_, _| normal(&mut rng));
    let beta_true = DVector::from_fn(p, |_, _| normal(&mut rng));
    let omega = DVector::from_fn(n, |_, _| sigma_g * normal(&mut rng));

    let n_out = (outlier_frac * n as f64).floor() as usize;
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..n_out {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    let mut outlier_idx = pool[..n_out].to_vec();
    outlier_idx.sort_unstable();

    let mut gamma_true = DVector::zeros(n);
    for &i in &outlier_idx {
        gamma_true[i] = match kind {
            OutlierKind::FixedMagnitude(m) => {
                if rng.random::<bool>() {
                    m
                } else {
                    -m
                }
            }
            OutlierKind::Laplacian => {
                let v = loop {
                    let v: f64 = rng.random();
                    if v > 0.0 {
                        break v;
                    }
                };
                let p = v - 0.5;
                -sigma_l * p.signum() * (1.0 - 2.0 * p.abs()).ln()
            }
        };
    }

    let y = &x * &beta_true + &omega + &gamma_true;
    Ok(SynthRegression {
        x,
        y,
        beta_true,
        gamma_true,
        outlier_idx,
        sigma_g,
        sigma_l,
    })
}

/// Target motion for generated sequences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MotionPreset {
    Static,
    /// Per-frame Gaussian steps of this standard deviation (pixels),
    /// reflected at the frame margins.
    RandomWalk { step_std: f64 },
}

/// Controls for [`gen_sequence`].
#[derive(Debug, Clone)]
pub struct SequenceConfig {
    pub n_frames: usize,
    pub frame_w: usize,
    pub frame_h: usize,
    pub target_size: usize,
    pub motion: MotionPreset,
    /// Inclusive 1-based frame window during which the occluder is drawn.
    pub occlusion: Option<(usize, usize)>,
    /// Fraction of the target's height covered by the occluding strip.
    pub occlusion_coverage: f64,
    /// Total relative gain increase reached at the last frame.
    pub illumination_ramp: f64,
    /// Amplitude of the per-frame pixel noise.
    pub pixel_noise: f64,
    pub seed: u64,
}

impl Default for SequenceConfig {
    fn default() -> Self {
        Self {
            n_frames: 120,
            frame_w: 96,
            frame_h: 96,
            target_size: 24,
            motion: MotionPreset::RandomWalk { step_std: 1.0 },
            occlusion: None,
            occlusion_coverage: 0.35,
            illumination_ramp: 0.0,
            pixel_noise: 0.01,
            seed: 0,
        }
    }
}

/// A generated sequence: frames, per-frame truth boxes and, where present,
/// the occluder rectangle.
#[derive(Debug, Clone)]
pub struct SynthSequence {
    pub frames: Vec<Frame>,
    pub truth: Vec<Box2D>,
    pub occluders: Vec<Option<Box2D>>,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn lattice_hash(ix: i64, iy: i64, seed: u64) -> f64 {
    let h = splitmix(
        (ix as u64)
            .wrapping_mul(0x9e37_79b9_7f4a_7c15)
            .wrapping_add((iy as u64).wrapping_mul(0xc2b2_ae3d_27d4_eb4f))
            .wrapping_add(seed),
    );
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Order-0 (blocky) value noise: one hash value per lattice cell.
///
/// The hard cell edges keep the full value range (an interpolated variant
/// would concentrate pixels mid-range and wash the contrast out), which is
/// what makes misaligned candidates expensive for template distances.
fn texture(x: f64, y: f64, cell: f64, seed: u64) -> f64 {
    lattice_hash((x / cell).floor() as i64, (y / cell).floor() as i64, seed)
}

/// Renders a textured target moving over a textured background with optional
/// occlusion window and global illumination ramp.
pub fn gen_sequence(cfg: &SequenceConfig) -> Result<SynthSequence> {
    if cfg.n_frames == 0 {
        return Err(Error::invalid("n_frames", "must be >= 1".to_string()));
    }
    let size = cfg.target_size;
    if size < 4 || size + 8 > cfg.frame_w.min(cfg.frame_h) {
        return Err(Error::invalid(
            "target_size",
            format!(
                "target {size} does not fit a {}x{} frame with margins",
                cfg.frame_w, cfg.frame_h
            ),
        ));
    }
    if let Some((from, to)) = cfg.occlusion {
        if from == 0 || to < from || to > cfg.n_frames {
            return Err(Error::invalid(
                "occlusion",
                format!("window {from}..={to} not inside 1..={}", cfg.n_frames),
            ));
        }
    }
    if !(0.0..=1.0).contains(&cfg.occlusion_coverage) {
        return Err(Error::invalid("occlusion_coverage", "must be in [0, 1]".to_string()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let margin = (size / 2 + 4) as f64;
    let (mut cx, mut cy) = (cfg.frame_w as f64 / 2.0, cfg.frame_h as f64 / 2.0);

    let bg_seed = cfg.seed.wrapping_mul(3).wrapping_add(1);
    let target_seed = cfg.seed.wrapping_mul(7).wrapping_add(2);
    let occ_seed = cfg.seed.wrapping_mul(11).wrapping_add(3);

    let mut frames = Vec::with_capacity(cfg.n_frames);
    let mut truth = Vec::with_capacity(cfg.n_frames);
    let mut occluders = Vec::with_capacity(cfg.n_frames);

    for t in 1..=cfg.n_frames {
        if t > 1 {
            if let MotionPreset::RandomWalk { step_std } = cfg.motion {
                let dx: f64 = rng.sample::<f64, _>(StandardNormal) * step_std;
                let dy: f64 = rng.sample::<f64, _>(StandardNormal) * step_std;
                cx = reflect_into(cx + dx, margin, cfg.frame_w as f64 - margin);
                cy = reflect_into(cy + dy, margin, cfg.frame_h as f64 - margin);
            }
        }
        // Pixel positions are rounded, so the truth box matches the raster
        // exactly.
        let left = (cx - size as f64 / 2.0).round() as i64;
        let top = (cy - size as f64 / 2.0).round() as i64;
        let gt = Box2D::new(left as f64, top as f64, size as f64, size as f64);

        let occluded = cfg
            .occlusion
            .map(|(from, to)| t >= from && t <= to)
            .unwrap_or(false);
        let occ_h = (size as f64 * cfg.occlusion_coverage).ceil() as i64;
        let occ_box = occluded.then(|| {
            Box2D::new(
                left as f64,
                (top + size as i64 - occ_h) as f64,
                size as f64,
                occ_h as f64,
            )
        });

        let gain = if cfg.n_frames > 1 {
            1.0 + cfg.illumination_ramp * (t - 1) as f64 / (cfg.n_frames - 1) as f64
        } else {
            1.0
        };

        let frame = Frame::from_fn(cfg.frame_w, cfg.frame_h, |x, y| {
            let (xf, yf) = (x as f64, y as f64);
            let xi = x as i64;
            let yi = y as i64;
            let in_target = xi >= left && xi < left + size as i64 && yi >= top && yi < top + size as i64;
            let mut v = if in_target {
                // Sample the target texture in target-local coordinates so
                // the pattern travels with the target.
                let lx = (xi - left) as f64;
                let ly = (yi - top) as f64;
                0.15 + 0.8 * texture(lx, ly, 4.0, target_seed)
            } else {
                0.05 + 0.9 * texture(xf, yf, 6.0, bg_seed)
            };
            if let Some(ob) = &occ_box {
                if xf >= ob.x && xf < ob.x + ob.w && yf >= ob.y && yf < ob.y + ob.h {
                    v = 0.05 + 0.25 * texture(xf - ob.x, yf - ob.y, 5.0, occ_seed);
                }
            }
            if cfg.pixel_noise > 0.0 {
                let n = lattice_hash(xi + yi * 10_007, t as i64, cfg.seed ^ 0xabcd) - 0.5;
                v += 2.0 * cfg.pixel_noise * n;
            }
            (v * gain).clamp(0.0, 1.0)
        });

        frames.push(frame);
        truth.push(gt);
        occluders.push(occ_box);
    }

    Ok(SynthSequence {
        frames,
        truth,
        occluders,
    })
}

fn reflect_into(v: f64, lo: f64, hi: f64) -> f64 {
    let mut v = v;
    for _ in 0..8 {
        if v < lo {
            v = 2.0 * lo - v;
        } else if v > hi {
            v = 2.0 * hi - v;
        } else {
            break;
        }
    }
    v.clamp(lo, hi)
}

//! Acceptance suite: nine end-to-end gates covering the threshold axioms,
//! the penalty construction, solver descent, the noise densities, outlier
//! recovery, template-distance ordering, end-to-end tracking, the subspace
//! model and the metrics.
//!
//! Run with `cargo test -p igdts-core --test acceptance -- --nocapture` to
//! see the per-criterion lines; each criterion carries a wall-clock budget
//! that is asserted alongside its quantitative gates.

mod common;

use std::time::{Duration, Instant};

use igdts_core::imaging::warp_patch;
use igdts_core::metrics::{center_location_error, overlap_rate, summarize, Box2D};
use igdts_core::noise::{gl_pdf, lambda_from_noise, NoiseParams};
use igdts_core::regression::{
    d_igdts, d_lss, d_ols, igdts_fit, objective_value, RegressionProblem,
};
use igdts_core::slope::{
    penalty_from_threshold, soft_threshold, sorted_soft_threshold, LambdaSequence, SoftRule,
};
use igdts_core::subspace::{igdts_subspace_solve, incremental_update, SubspaceModel};
use igdts_core::synth::{gen_regression, gen_sequence, MotionPreset, OutlierKind, SequenceConfig};
use igdts_core::tracker::{AffineState, Tracker, TrackerConfig};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type CriterionResult = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> CriterionResult);

fn check(ok: bool, msg: String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg)
    }
}

// --- 1. threshold axioms ----------------------------------------------------

fn criterion_threshold_axioms() -> CriterionResult {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    // Scalar soft rule.
    for case in 0..10_000 {
        let lam = rng.random_range(0.0..5.0);
        let x = rng.random_range(-100.0..100.0);
        let y = rng.random_range(-100.0..100.0);
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        check(
            soft_threshold(lo, lam) <= soft_threshold(hi, lam),
            format!("soft P1 failed at case {case}"),
        )?;
        check(
            soft_threshold(-x, lam) == -soft_threshold(x, lam),
            format!("soft P2 failed at case {case}"),
        )?;
        let pos = x.abs();
        let t = soft_threshold(pos, lam);
        check(
            (0.0..=pos).contains(&t),
            format!("soft P3 failed at case {case}"),
        )?;
        check(
            (soft_threshold(x, lam) - soft_threshold(y, lam)).abs() <= (x - y).abs() + 1e-12,
            format!("soft P4 failed at case {case}"),
        )?;
    }
    // Sorted-soft rule, checked per paired coordinate after the sort.
    for case in 0..10_000 {
        let n = rng.random_range(2..24usize);
        let lam_max = rng.random_range(0.0..3.0);
        let lambda = LambdaSequence::linear(n, lam_max, 0.25 * lam_max).unwrap();
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-50.0..50.0)).collect();
        let out = sorted_soft_threshold(&x, &lambda).unwrap();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let out_neg = sorted_soft_threshold(&neg, &lambda).unwrap();

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()).then(a.cmp(&b)));
        for (rank, &idx) in order.iter().enumerate() {
            let lam = lambda.values()[rank];
            // The vector operator applies the scalar rule at this pair.
            check(
                out[idx] == soft_threshold(x[idx], lam),
                format!("sorted-soft pairing broke at case {case}"),
            )?;
            check(
                out_neg[idx] == -out[idx],
                format!("sorted-soft P2 failed at case {case}"),
            )?;
            check(
                out[idx].abs() <= x[idx].abs() && out[idx].abs() >= 0.0,
                format!("sorted-soft P3 failed at case {case}"),
            )?;
            let probe = rng.random_range(-50.0..50.0f64);
            let (lo, hi) = if x[idx] <= probe { (x[idx], probe) } else { (probe, x[idx]) };
            check(
                soft_threshold(lo, lam) <= soft_threshold(hi, lam),
                format!("sorted-soft P1 failed at case {case}"),
            )?;
            check(
                (soft_threshold(x[idx], lam) - soft_threshold(probe, lam)).abs()
                    <= (x[idx] - probe).abs() + 1e-12,
                format!("sorted-soft P4 failed at case {case}"),
            )?;
        }
    }
    Ok("P1-P4 hold over 10^4 cases for each rule".to_string())
}

// --- 2. penalty construction ------------------------------------------------

fn criterion_penalty() -> CriterionResult {
    let mut worst = 0.0f64;
    for &lam in &[0.1, 0.5, 2.0] {
        for i in 0..=60 {
            let theta = -3.0 + 0.1 * i as f64;
            let p = penalty_from_threshold(&SoftRule, theta, lam)
                .map_err(|e| format!("penalty failed: {e}"))?;
            worst = worst.max((p - lam * theta.abs()).abs());
        }
    }
    check(worst <= 1e-6, format!("penalty deviates from lam*|theta| by {worst:.3e}"))?;
    Ok(format!("max |P - lam*|theta|| = {worst:.2e} over 61-point grid x 3 weights"))
}

// --- 3. solver descent ------------------------------------------------------

fn criterion_descent() -> CriterionResult {
    // Mixed clean/outlier problems, uniform weight from the noise-model map
    // (the regime where the threshold step is the exact prox of its
    // penalty, so the descent theorem applies sharply).
    let params = NoiseParams::new(0.1, 0.05).unwrap();
    let lam = lambda_from_noise(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    for problem_id in 0..100 {
        let n = 100;
        let p = 10;
        let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
        let beta_true = DVector::from_fn(p, |_, _| rng.random_range(-1.0..1.0));
        let mut y = &x * &beta_true;
        for i in 0..n {
            y[i] += 0.1 * rng.random_range(-1.0..1.0f64);
        }
        for _ in 0..10 {
            let i = rng.random_range(0..n);
            y[i] += if rng.random::<bool>() { 1.0 } else { -1.0 };
        }
        let lambda = LambdaSequence::constant(n, lam).unwrap();
        let sol = igdts_fit(&RegressionProblem::new(x, y, lambda).unwrap())
            .map_err(|e| format!("solver failed: {e}"))?;
        for (i, w) in sol.monotone_objective_prefix().windows(2).enumerate() {
            check(
                w[1] <= w[0] + 1e-10,
                format!(
                    "objective rose by {:.3e} at iteration {i} of problem {problem_id}",
                    w[1] - w[0]
                ),
            )?;
        }
    }
    Ok(format!("objective non-increasing (1e-10 slack) on 100 problems, lambda = {lam:.3}"))
}

// --- 4. noise model ---------------------------------------------------------

fn criterion_noise_model() -> CriterionResult {
    let mut worst_mass = 0.0f64;
    let mut worst_conv = 0.0f64;
    for &sg in &[0.5, 1.0, 2.0] {
        for &sl in &[0.5, 1.0, 2.0] {
            let p = NoiseParams::new(sg, sl).unwrap();
            let reach = 12.0 * (sg + sl);
            let f = |x: f64| gl_pdf(x, &p);
            let mass = common::romberg(&f, -reach, 0.0, 1e-11, 22)
                + common::romberg(&f, 0.0, reach, 1e-11, 22);
            worst_mass = worst_mass.max((mass - 1.0).abs());

            for i in 0..=200 {
                let eps = -6.0 + 0.06 * i as f64;
                let diff = (gl_pdf(eps, &p) - common::gl_pdf_convolution(eps, sg, sl)).abs();
                worst_conv = worst_conv.max(diff);
            }
        }
    }
    check(worst_mass <= 1e-6, format!("normalization off by {worst_mass:.3e}"))?;
    check(worst_conv <= 1e-8, format!("convolution mismatch {worst_conv:.3e}"))?;
    Ok(format!(
        "mass within {worst_mass:.2e} of 1, convolution match within {worst_conv:.2e}"
    ))
}

// --- 5. outlier recovery ----------------------------------------------------

fn criterion_outlier_recovery() -> CriterionResult {
    let sigma_g = 0.1;
    let mut f1s = Vec::new();
    let mut beta_errs = Vec::new();
    let mut worst_obj_rel = 0.0f64;
    for seed in 0..50u64 {
        let data = gen_regression(
            200,
            8,
            0.1,
            sigma_g,
            1.0,
            OutlierKind::FixedMagnitude(10.0 * sigma_g),
            seed,
        )
        .map_err(|e| e.to_string())?;
        let lambda = LambdaSequence::linear(200, 6.0 * sigma_g, 3.0 * sigma_g).unwrap();
        let problem = RegressionProblem::new(data.x.clone(), data.y.clone(), lambda.clone())
            .unwrap()
            .with_tolerance(1e-12)
            .with_max_iter(2000);
        let sol = igdts_fit(&problem).map_err(|e| e.to_string())?;
        f1s.push(common::support_f1(&sol.gamma, &data.outlier_idx));
        beta_errs.push((&sol.beta - &data.beta_true).norm() / data.beta_true.norm());

        let obj = objective_value(&sol.beta, &sol.gamma, &data.x, &data.y, &lambda).unwrap();
        let (_, _, oracle) = common::alternating_min_oracle(&data.x, &data.y, &lambda, 1e-12, 50_000);
        worst_obj_rel = worst_obj_rel.max((obj - oracle).abs() / oracle.abs().max(1e-12));
    }
    let med_f1 = common::median(&f1s);
    let med_beta = common::median(&beta_errs);
    check(med_f1 >= 0.9, format!("median support F1 {med_f1:.3} < 0.9"))?;
    check(med_beta <= 0.05, format!("median beta error {med_beta:.4} > 0.05"))?;
    check(
        worst_obj_rel <= 1e-3,
        format!("objective deviates from the oracle by {worst_obj_rel:.2e} (max over seeds)"),
    )?;
    Ok(format!(
        "median F1 {med_f1:.3}, median beta err {med_beta:.4}, max objective gap {worst_obj_rel:.1e}"
    ))
}

// --- 6. distance ordering ---------------------------------------------------

fn criterion_distance_ordering() -> CriterionResult {
    // Template stack: sub-pixel jitters of a textured target; candidates are
    // a clean jitter and an occluded-plus-shifted view of the same target.
    let side = 32usize;
    let seq = gen_sequence(&SequenceConfig {
        n_frames: 1,
        motion: MotionPreset::Static,
        pixel_noise: 0.0,
        seed: 77,
        ..SequenceConfig::default()
    })
    .map_err(|e| e.to_string())?;
    let frame = &seq.frames[0];
    let base = AffineState::from_bbox(&seq.truth[0], side).unwrap();

    let jitter = |dx: f64, dy: f64| {
        let mut s = base;
        s.tx += dx;
        s.ty += dy;
        s
    };
    let patch = |state: &AffineState| {
        DVector::from_vec(warp_patch(frame, state, side).unwrap())
    };

    let templates = [
        patch(&jitter(0.0, 0.0)),
        patch(&jitter(0.35, -0.2)),
        patch(&jitter(-0.3, 0.25)),
        patch(&jitter(0.15, 0.4)),
    ];
    let x = DMatrix::from_columns(&templates);

    let good = patch(&jitter(-0.2, -0.3));
    let mut bad = patch(&jitter(3.0, 2.0));
    // Occlusion: overwrite a block (about 30% of the rows) with a flat
    // occluder intensity.
    let occ_rows = side * 3 / 10;
    for i in 0..occ_rows * side {
        bad[side * side - 1 - i] = 0.08;
    }

    let mut detail = String::new();
    for &lam_max in &[0.01, 0.1] {
        let lambda = LambdaSequence::linear_from_max(side * side, lam_max, 0.1).unwrap();
        let d_good = d_igdts(&good, &x, &lambda).map_err(|e| e.to_string())?;
        let d_bad = d_igdts(&bad, &x, &lambda).map_err(|e| e.to_string())?;
        check(
            d_good < d_bad,
            format!("ordering violated at lam_max {lam_max}: {d_good:.3} vs {d_bad:.3}"),
        )?;
        let l_good = d_lss(&good, &x, lam_max).map_err(|e| e.to_string())?;
        let l_bad = d_lss(&bad, &x, lam_max).map_err(|e| e.to_string())?;
        check(
            l_good < l_bad,
            format!("uniform-weight ordering violated at lam {lam_max}: {l_good:.3} vs {l_bad:.3}"),
        )?;
        detail.push_str(&format!("lam_max {lam_max}: {d_good:.2} < {d_bad:.2}; "));
    }

    // Dominance: the robust distance never exceeds the least-squares one.
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    for case in 0..1000 {
        let xr = DMatrix::from_fn(30, 3, |_, _| rng.random_range(-1.0..1.0));
        let yr = DVector::from_fn(30, |_, _| rng.random_range(-1.0..1.0));
        let lam_max: f64 = rng.random_range(0.01..0.5);
        let lambda = LambdaSequence::linear_from_max(30, lam_max, 0.1).unwrap();
        let di = d_igdts(&yr, &xr, &lambda).map_err(|e| e.to_string())?;
        let dl = d_ols(&yr, &xr).map_err(|e| e.to_string())?;
        check(
            di <= dl + 1e-12,
            format!("d_igdts {di} exceeded d_ols {dl} at case {case}"),
        )?;
    }
    Ok(format!("{detail}dominance held on 1000 instances"))
}

// --- 7. end-to-end tracking -------------------------------------------------

fn run_tracking(
    seq: &igdts_core::synth::SynthSequence,
    config: TrackerConfig,
) -> Result<Vec<igdts_core::tracker::TrackResult>, String> {
    let (mut tracker, first) =
        Tracker::init(&seq.frames[0], &seq.truth[0], config).map_err(|e| e.to_string())?;
    let mut results = vec![first];
    for frame in &seq.frames[1..] {
        results.push(tracker.step(frame).map_err(|e| e.to_string())?);
    }
    Ok(results)
}

fn criterion_end_to_end_tracking() -> CriterionResult {
    let seq = gen_sequence(&SequenceConfig {
        n_frames: 120,
        target_size: 24,
        motion: MotionPreset::RandomWalk { step_std: 1.0 },
        occlusion: Some((40, 59)),
        occlusion_coverage: 0.32,
        illumination_ramp: 0.15,
        seed: 2024,
        ..SequenceConfig::default()
    })
    .map_err(|e| e.to_string())?;

    // Occlusion really covers at least 30% of the target where scheduled.
    for t in 39..59 {
        let ob = seq.occluders[t].as_ref().ok_or("missing occluder")?;
        let gt = &seq.truth[t];
        let ix = (gt.x + gt.w).min(ob.x + ob.w) - gt.x.max(ob.x);
        let iy = (gt.y + gt.h).min(ob.y + ob.h) - gt.y.max(ob.y);
        check(
            ix.max(0.0) * iy.max(0.0) >= 0.3 * gt.area(),
            format!("occlusion coverage below 30% at frame {}", t + 1),
        )?;
    }

    let config = TrackerConfig::default(); // 600 particles, 32x32, 16 basis, 5-frame updates
    let t0 = Instant::now();
    let results = run_tracking(&seq, config.clone())?;
    let track_time = t0.elapsed();

    let boxes: Vec<Box2D> = results.iter().map(|r| r.bbox).collect();
    let report = summarize(&boxes, &seq.truth).map_err(|e| e.to_string())?;
    check(
        report.mean_overlap >= 0.6,
        format!("mean overlap {:.3} < 0.6", report.mean_overlap),
    )?;
    check(
        report.mean_cle <= 4.0,
        format!("mean center error {:.3}px > 4px", report.mean_cle),
    )?;
    check(
        track_time <= Duration::from_secs(60),
        format!("tracking run took {track_time:.1?} (> 60s)"),
    )?;

    // Bit-level determinism of the full result sequence.
    let again = run_tracking(&seq, config)?;
    for (a, b) in results.iter().zip(&again) {
        let same = a.frame_index == b.frame_index
            && a.state == b.state
            && a.bbox == b.bbox
            && a.distance.to_bits() == b.distance.to_bits()
            && a.log_likelihood.to_bits() == b.log_likelihood.to_bits()
            && a.updated_model == b.updated_model;
        check(same, format!("results differ at frame {}", a.frame_index))?;
    }
    Ok(format!(
        "overlap {:.3}, cle {:.2}px, run {track_time:.1?}, deterministic",
        report.mean_overlap, report.mean_cle
    ))
}

// --- 8. subspace correctness ------------------------------------------------

fn criterion_subspace() -> CriterionResult {
    // Planted occlusion support.
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let d = 64;
    let k = 4;
    let raw = DMatrix::from_fn(d, k, |_, _| rng.random_range(-1.0..1.0f64));
    let u = raw.qr().q().columns(0, k).into_owned();
    let z_true = DVector::from_vec(vec![2.0, -1.5, 1.0, 0.75]);
    let mut y_bar = &u * &z_true;
    for i in 0..d {
        y_bar[i] += rng.random_range(-0.02..0.02);
    }
    let occluded: Vec<usize> = (0..8).map(|j| 3 + 7 * j).collect();
    for &i in &occluded {
        y_bar[i] += 5.0;
    }
    let lambda = LambdaSequence::linear(d, 0.1, 0.05).unwrap();
    let sol = igdts_subspace_solve(&y_bar, &u, &lambda, 1e-10, 200).map_err(|e| e.to_string())?;
    let f1 = common::support_f1(&sol.gamma, &occluded);
    check(f1 >= 0.9, format!("support F1 {f1:.3} < 0.9"))?;

    // Incremental update vs batch PCA on the concatenation.
    let factors = {
        let raw = DMatrix::from_fn(40, 3, |_, _| rng.random_range(-1.0..1.0f64));
        raw.qr().q().columns(0, 3).into_owned()
    };
    let mean = DVector::from_fn(40, |i, _| 0.3 + 0.05 * (i as f64).sin());
    let sample = |rng: &mut ChaCha8Rng| {
        let coeff = DVector::from_fn(3, |_, _| rng.random_range(-2.0..2.0));
        &mean + &factors * coeff
    };
    let b1 = DMatrix::from_columns(&(0..10).map(|_| sample(&mut rng)).collect::<Vec<_>>());
    let b2 = DMatrix::from_columns(&(0..8).map(|_| sample(&mut rng)).collect::<Vec<_>>());
    let empty = SubspaceModel::empty(40, 3).unwrap();
    let seq_model = incremental_update(
        &incremental_update(&empty, &b1, 1.0).map_err(|e| e.to_string())?,
        &b2,
        1.0,
    )
    .map_err(|e| e.to_string())?;
    let mut concat = DMatrix::zeros(40, 18);
    concat.columns_mut(0, 10).copy_from(&b1);
    concat.columns_mut(10, 8).copy_from(&b2);
    let batch_model = incremental_update(&empty, &concat, 1.0).map_err(|e| e.to_string())?;
    let angle = common::max_principal_angle(seq_model.basis(), batch_model.basis());
    check(angle <= 1e-6, format!("principal angle {angle:.3e} > 1e-6 rad"))?;
    Ok(format!("support F1 {f1:.3}, principal angle {angle:.1e} rad"))
}

// --- 9. metrics exact values -------------------------------------------------

fn criterion_metrics() -> CriterionResult {
    let a = Box2D::new(3.0, 4.0, 5.0, 6.0);
    check(overlap_rate(&a, &a) == 1.0, "identical boxes must score 1".to_string())?;
    let far = Box2D::new(100.0, 100.0, 2.0, 2.0);
    check(overlap_rate(&a, &far) == 0.0, "disjoint boxes must score 0".to_string())?;
    let u = Box2D::new(0.0, 0.0, 1.0, 1.0);
    let v = Box2D::new(0.5, 0.0, 1.0, 1.0);
    check(
        overlap_rate(&u, &v) == 0.5 / 1.5,
        "offset unit squares must score (0.5/1.5) exactly".to_string(),
    )?;
    check(
        center_location_error(&a, &a) == 0.0,
        "identical boxes must have zero center error".to_string(),
    )?;
    let b = Box2D::new(-1.0, -1.0, 2.0, 2.0);
    let c = Box2D::new(2.0, 3.0, 2.0, 2.0);
    check(
        center_location_error(&b, &c) == 5.0,
        "3-4-5 centers must score exactly 5".to_string(),
    )?;
    Ok("exact-value cases (0, 1, 1/3, 5) bit-accurate".to_string())
}

// --- runner -------------------------------------------------------------------

#[test]
fn acceptance_criteria() {
    let criteria: Vec<Criterion> = vec![
        ("1 threshold axioms", Duration::from_secs(5), criterion_threshold_axioms),
        ("2 penalty construction", Duration::from_secs(5), criterion_penalty),
        ("3 solver descent", Duration::from_secs(30), criterion_descent),
        ("4 noise model", Duration::from_secs(30), criterion_noise_model),
        ("5 outlier recovery", Duration::from_secs(60), criterion_outlier_recovery),
        ("6 distance ordering", Duration::from_secs(30), criterion_distance_ordering),
        ("7 end-to-end tracking", Duration::from_secs(130), criterion_end_to_end_tracking),
        ("8 subspace correctness", Duration::from_secs(10), criterion_subspace),
        ("9 metrics", Duration::from_secs(1), criterion_metrics),
    ];

    let mut failures = Vec::new();
    for (name, budget, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        match outcome {
            Ok(detail) if elapsed <= budget => {
                println!("[PASS] {name}: {detail} ({elapsed:.1?})");
            }
            Ok(detail) => {
                println!("[FAIL] {name}: over budget {budget:?} at {elapsed:.1?} ({detail})");
                failures.push(name);
            }
            Err(msg) => {
                println!("[FAIL] {name}: {msg} ({elapsed:.1?})");
                failures.push(name);
            }
        }
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}

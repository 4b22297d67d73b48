//! Planted-occlusion recovery and batch-equivalence oracles for the
//! subspace appearance model.

mod common;

use igdts_core::slope::LambdaSequence;
use igdts_core::subspace::{igdts_subspace_solve, incremental_update, SubspaceModel};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_orthonormal(rng: &mut ChaCha8Rng, d: usize, k: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, k, |_, _| rng.random_range(-1.0..1.0));
    a.qr().q().columns(0, k).into_owned()
}

#[test]
fn planted_occlusion_support_and_coefficients_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let d = 64;
    let k = 4;
    let u = random_orthonormal(&mut rng, d, k);
    let z_true = DVector::from_vec(vec![2.0, -1.5, 1.0, 0.75]);
    let mut y_bar = &u * &z_true;
    // Mild dense noise plus an 8-pixel occlusion of magnitude 5.
    for i in 0..d {
        y_bar[i] += rng.random_range(-0.02..0.02);
    }
    let occluded: Vec<usize> = (0..8).map(|j| 3 + 7 * j).collect();
    for &i in &occluded {
        y_bar[i] += 5.0;
    }

    // Weights sit well above the noise floor (0.02) and far below the
    // occlusion magnitude, so the support is clean and the shrinkage bias
    // on the coefficients stays small.
    let lambda = LambdaSequence::linear(d, 0.1, 0.05).unwrap();
    let sol = igdts_subspace_solve(&y_bar, &u, &lambda, 1e-8, 100).unwrap();

    let f1 = common::support_f1(&sol.gamma, &occluded);
    assert!(f1 >= 0.9, "support F1 {f1}");
    let rel = (&sol.z - &z_true).norm() / z_true.norm();
    assert!(rel <= 0.05, "coefficient error {rel}");

    // The default budget already sits at the stationary point the same
    // alternation reaches when run to 1e-12.
    let oracle = igdts_subspace_solve(&y_bar, &u, &lambda, 1e-12, 100_000).unwrap();
    assert!((sol.distance - oracle.distance).abs() <= 1e-6 * oracle.distance.max(1.0));
    assert_eq!(
        common::support_f1(&oracle.gamma, &occluded),
        common::support_f1(&sol.gamma, &occluded)
    );
}

#[test]
fn sequential_updates_with_no_forgetting_match_batch_pca() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let d = 50;
    let k = 3;
    // Exactly rank-3 source around a fixed mean, so truncation loses
    // nothing and the sequential update must match the one-shot span.
    let factors = random_orthonormal(&mut rng, d, k);
    let mean = DVector::from_fn(d, |i, _| 0.5 + 0.1 * (i as f64 * 0.7).cos());
    let sample = |rng: &mut ChaCha8Rng| {
        let coeff = DVector::from_fn(k, |_, _| rng.random_range(-2.0..2.0));
        &mean + &factors * coeff
    };
    let b1 = DMatrix::from_columns(&(0..12).map(|_| sample(&mut rng)).collect::<Vec<_>>());
    let b2 = DMatrix::from_columns(&(0..9).map(|_| sample(&mut rng)).collect::<Vec<_>>());

    let empty = SubspaceModel::empty(d, k).unwrap();
    let seq = incremental_update(&incremental_update(&empty, &b1, 1.0).unwrap(), &b2, 1.0).unwrap();

    let mut concat = DMatrix::zeros(d, 21);
    concat.columns_mut(0, 12).copy_from(&b1);
    concat.columns_mut(12, 9).copy_from(&b2);
    let batch = incremental_update(&empty, &concat, 1.0).unwrap();

    assert_eq!(seq.basis().ncols(), k);
    assert_eq!(batch.basis().ncols(), k);
    let angle = common::max_principal_angle(seq.basis(), batch.basis());
    assert!(angle <= 1e-6, "principal angle {angle}");

    // Means agree as well.
    assert!((seq.mean() - batch.mean()).amax() < 1e-10);
    assert!((seq.n_eff() - 21.0).abs() < 1e-12);
}

#[test]
fn forgetting_discounts_the_past() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let d = 30;
    // Two batches around very different means; with strong forgetting the
    // model mean must sit much closer to the recent batch.
    let b1 = DMatrix::from_fn(d, 10, |_, _| rng.random_range(-0.05..0.05));
    let b2 = DMatrix::from_fn(d, 10, |_, _| 1.0 + rng.random_range(-0.05..0.05));
    let empty = SubspaceModel::empty(d, 4).unwrap();

    let heavy = incremental_update(&incremental_update(&empty, &b1, 1.0).unwrap(), &b2, 0.2).unwrap();
    let none = incremental_update(&incremental_update(&empty, &b1, 1.0).unwrap(), &b2, 1.0).unwrap();
    let heavy_mean = heavy.mean().sum() / d as f64;
    let balanced_mean = none.mean().sum() / d as f64;
    assert!(heavy_mean > balanced_mean + 0.2, "{heavy_mean} vs {balanced_mean}");
}

use fpesn::dynamics::{gen_lorenz63, gen_mackey_glass, Lorenz63Params, MackeyGlassParams};
use fpesn::fixed_point::{esn_operator, l2_improvement, reconstruct_with, relax_update};
use fpesn::reservoir::LatentState;
use fpesn::sparsity::{make_mask, MaskSpec};
use fpesn::{reconstruct, FixedPointConfig, ObservationSet, ReadoutMap, Reservoir, ReservoirSpec};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_reservoir(n_target: usize, seed: u64) -> Reservoir {
    Reservoir::build(&ReservoirSpec { n_latent: 200, sparsity: 0.05, n_target, seed, ..ReservoirSpec::default() }).unwrap()
}

#[test]
fn observed_entries_are_preserved_bitwise() {
    let truth = gen_mackey_glass(&MackeyGlassParams::default(), 3000).unwrap();
    let mask = make_mask(truth.len(), 1, &MaskSpec::new(0.9, 2)).unwrap();
    let obs = ObservationSet::new(truth.y.clone(), mask, truth.u.clone(), 1.0).unwrap();
    let res = small_reservoir(1, 1);
    let cfg = FixedPointConfig { max_iter: 20, tol: 1e-300, ridge: 1e-9, ..FixedPointConfig::default() };
    let mut seen = 0;
    let run = reconstruct_with(&res, &obs, &cfg, |rec| {
        seen += 1;
        for (k, &m) in obs.mask().iter().enumerate() {
            if m {
                assert_eq!(rec.y_r.as_slice()[k].to_bits(), obs.y_obs().as_slice()[k].to_bits());
            }
        }
    })
    .unwrap();
    assert_eq!(seen, 20);
    assert_eq!(run.iterations, 20);
    assert_eq!(run.improvements.len(), 20);
    assert!(run.y_r.iter().all(|v| v.is_finite()));
}

#[test]
fn fully_observed_series_is_returned_unchanged() {
    let truth = gen_mackey_glass(&MackeyGlassParams::default(), 800).unwrap();
    let obs = ObservationSet::fully_observed(truth.y.clone(), truth.u.clone(), 1.0).unwrap();
    let run = reconstruct(&small_reservoir(1, 4), &obs, &FixedPointConfig::default()).unwrap();
    assert!(run.converged);
    assert_eq!(run.improvements, vec![0.0]);
    assert_eq!(run.y_r, truth.y);
}

#[test]
fn normalization_is_transparent_at_unit_scale() {
    let truth = gen_lorenz63(&Lorenz63Params::default(), 1500).unwrap();
    let mask = make_mask(truth.len(), 3, &MaskSpec::new(0.5, 8)).unwrap();
    // Standardize on the observed entries so the fitted affine map is the identity.
    let mut y = truth.y.clone();
    for j in 0..3 {
        let vals: Vec<f64> = (0..y.nrows()).filter(|&t| mask[(t, j)]).map(|t| y[(t, j)]).collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        for v in y.column_mut(j).iter_mut() {
            *v = (*v - mean) / sd;
        }
    }
    let obs = ObservationSet::new(y, mask, truth.u.clone(), truth.dt).unwrap();
    let res = small_reservoir(3, 5);
    let base = FixedPointConfig { max_iter: 5, ridge: 1e-6, ..FixedPointConfig::default() };
    let plain = reconstruct(&res, &obs, &base).unwrap();
    let norm = reconstruct(&res, &obs, &FixedPointConfig { normalize_inputs: true, ..base }).unwrap();
    let rel = (&plain.y_r - &norm.y_r).amax() / plain.y_r.amax();
    assert!(rel < 1e-6, "relative difference {rel:e}");
}

#[test]
fn operator_copies_first_row_and_follows_the_readout() {
    let res = small_reservoir(1, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let theta = ReadoutMap { theta: DMatrix::from_fn(201, 1, |_, _| rng.random_range(-1.0..1.0)), ridge: 0.0, retried_targets: vec![] };
    let y = DMatrix::from_fn(30, 1, |t, _| (t as f64 * 0.3).sin());
    let e = esn_operator(&res, &theta, &y, &DMatrix::zeros(30, 0)).unwrap();
    assert_eq!(e[(0, 0)], y[(0, 0)]);
    let mut s = LatentState::zeros(200);
    for t in 1..30 {
        s = res.step(&s, &[y[(t - 1, 0)]], &[]).unwrap();
        let want = theta.predict(s.augmented().as_slice()).unwrap()[0];
        assert!((e[(t, 0)] - want).abs() < 1e-12);
    }
}

#[test]
fn improvement_of_a_constant_shift() {
    let a = DMatrix::from_fn(51, 2, |t, j| (t * (j + 1)) as f64);
    let b = a.add_scalar(-0.25);
    assert!((l2_improvement(&b, &a, 10).unwrap() - 0.25).abs() < 1e-15);
    assert_eq!(l2_improvement(&a, &a, 10).unwrap(), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn near_fixed_points_move_little(seed: u64, alpha in 0.01f64..0.99, tau in 1e-9f64..1.0, omega in 0.0f64..0.95) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = DMatrix::from_fn(60, 2, |_, _| rng.random_range(-3.0..3.0));
        let mask = make_mask(60, 2, &MaskSpec::new(omega, seed)).unwrap();
        let obs = ObservationSet::new(y.clone(), mask, DMatrix::zeros(60, 0), 1.0).unwrap();
        let e = y.map(|v| v + rng.random_range(-tau..=tau));
        let next = relax_update(&y, &e, &obs, alpha).unwrap();
        prop_assert!((&next - &y).amax() <= (1.0 - alpha) * tau * (1.0 + 1e-12));
    }
}

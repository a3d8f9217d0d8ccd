use fpesn::dynamics::{gen_mackey_glass, MackeyGlassParams};
use fpesn::reservoir::{spectral_radius_with, LatentState};
use fpesn::{Reservoir, ReservoirSpec};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spec(n: usize, seed: u64) -> ReservoirSpec {
    ReservoirSpec {
        n_latent: n,
        sparsity: if n <= 50 { 0.1 } else { 0.02 },
        seed,
        ..ReservoirSpec::default()
    }
}

fn dense_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[test]
fn spectral_radius_matches_dense_eigensolver() {
    for n in [50, 200] {
        for seed in 0..5 {
            let res = Reservoir::build(&spec(n, seed)).unwrap();
            let rho = dense_radius(&res.a().to_dense());
            assert!((rho - 0.9).abs() <= 0.9e-6, "n={n} seed={seed} rho={rho}");
        }
    }
}

#[test]
fn spectral_radius_at_full_size() {
    for seed in 0..5 {
        let res = Reservoir::build(&ReservoirSpec { seed, ..ReservoirSpec::default() }).unwrap();
        let rho = spectral_radius_with(res.a(), 1e-12, 50_000).unwrap();
        assert!((rho - 0.9).abs() <= 0.9e-6, "seed={seed} rho={rho}");
        if seed == 0 {
            let dense = dense_radius(&res.a().to_dense());
            assert!((dense - 0.9).abs() <= 0.9e-6, "dense rho={dense}");
        }
    }
}

#[test]
fn fading_memory() {
    let drive = gen_mackey_glass(&MackeyGlassParams::default(), 200).unwrap().y;
    for seed in 0..5 {
        let res = Reservoir::build(&ReservoirSpec { seed, ..ReservoirSpec::default() }).unwrap();
        let n = res.n_latent();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = LatentState { s: DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)) };
        let mut b = LatentState { s: DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)) };
        for t in 0..200 {
            let y = [drive[(t, 0)]];
            a = res.step(&a, &y, &[]).unwrap();
            b = res.step(&b, &y, &[]).unwrap();
        }
        let gap = (&a.s - &b.s).norm();
        assert!(gap < 1e-6, "seed={seed} gap={gap:e}");
    }
}

#[test]
fn teacher_forced_run_matches_manual_steps() {
    let res = Reservoir::build(&ReservoirSpec {
        n_latent: 30,
        sparsity: 0.1,
        n_target: 2,
        n_exo: 1,
        seed: 3,
        ..ReservoirSpec::default()
    })
    .unwrap();
    let y = DMatrix::from_fn(12, 2, |t, j| ((t + 3 * j) as f64 * 0.4).cos());
    let u = DMatrix::from_fn(12, 1, |t, _| 0.1 * t as f64);
    let states = res.run_teacher_forced(&y, &u, &LatentState::zeros(30)).unwrap();
    let mut s = LatentState::zeros(30);
    for t in 0..12 {
        s = res.step(&s, &[y[(t, 0)], y[(t, 1)]], &[u[(t, 0)]]).unwrap();
        assert_eq!(states[t], s.augmented());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn states_stay_in_unit_box(seed in 0u64..1000, leak in 0.0f64..0.95, amp in 0.0f64..100.0) {
        let res = Reservoir::build(&ReservoirSpec { n_latent: 40, sparsity: 0.1, leak, seed, ..ReservoirSpec::default() }).unwrap();
        let y = DMatrix::from_fn(50, 1, |t, _| amp * ((t as f64) * 1.3).sin());
        let states = res.run_teacher_forced(&y, &DMatrix::zeros(50, 0), &LatentState::zeros(40)).unwrap();
        for s in &states {
            prop_assert_eq!(s[0], 1.0);
            prop_assert!(s.rows(1, 40).amax() < 1.0);
        }
    }

    #[test]
    fn build_is_deterministic_with_exact_nnz(seed in 0u64..1000, n in 20usize..60, sparsity in 0.1f64..0.5) {
        let sp = ReservoirSpec { n_latent: n, sparsity, seed, ..ReservoirSpec::default() };
        prop_assume!(sp.nonzero_count() >= 1);
        let a = Reservoir::build(&sp).unwrap();
        let b = Reservoir::build(&sp).unwrap();
        prop_assert_eq!(a.a().to_dense(), b.a().to_dense());
        prop_assert_eq!(a.b_y(), b.b_y());
        prop_assert_eq!(a.a().nnz(), sp.nonzero_count());
        prop_assert!(a.b_y().amax() <= sp.scale_b);
    }
}

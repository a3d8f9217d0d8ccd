use fpesn::readout::{fit_ridge_full, fit_ridge_masked, NormalEquationAccumulator, RidgeScaling};
use fpesn::sparsity::{make_mask, MaskSpec};
use fpesn::ObservationSet;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const T: usize = 100;
const NS: usize = 8;

struct Instance {
    states: Vec<DVector<f64>>,
    obs: ObservationSet,
}

fn instance(seed: u64, n_target: usize, omega: f64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states: Vec<DVector<f64>> = (0..T)
        .map(|_| {
            let mut s = DVector::from_fn(NS + 1, |_, _| rng.random_range(-1.0..1.0));
            s[0] = 1.0;
            s
        })
        .collect();
    let y = DMatrix::from_fn(T + 1, n_target, |_, _| rng.random_range(-2.0..2.0));
    let mask = make_mask(T + 1, n_target, &MaskSpec::new(omega, seed)).unwrap();
    let obs = ObservationSet::new(y, mask, DMatrix::zeros(T + 1, 0), 1.0).unwrap();
    Instance { states, obs }
}

/// Ridge as ordinary least squares on the stacked system `[X; √β I] θ = [y; 0]`, via SVD.
fn svd_oracle(inst: &Instance, beta: f64, washout: usize, j: usize) -> DVector<f64> {
    let rows: Vec<usize> = (washout.max(1)..=T).filter(|&t| inst.obs.is_observed(t, j)).collect();
    let dim = NS + 1;
    let mut x = DMatrix::zeros(rows.len() + dim, dim);
    let mut rhs = DVector::zeros(rows.len() + dim);
    for (r, &t) in rows.iter().enumerate() {
        x.row_mut(r).copy_from(&inst.states[t - 1].transpose());
        rhs[r] = inst.obs.y_obs()[(t, j)];
    }
    for k in 0..dim {
        x[(rows.len() + k, k)] = beta.sqrt();
    }
    x.svd(true, true).solve(&rhs, 1e-14).unwrap()
}

fn objective(inst: &Instance, theta: &DVector<f64>, beta: f64, washout: usize, j: usize) -> f64 {
    let fit: f64 = (washout.max(1)..=T)
        .filter(|&t| inst.obs.is_observed(t, j))
        .map(|t| (inst.obs.y_obs()[(t, j)] - inst.states[t - 1].dot(theta)).powi(2))
        .sum();
    fit + beta * theta.norm_squared()
}

#[test]
fn masked_ridge_matches_dense_least_squares() {
    for seed in 0..5 {
        let inst = instance(seed, 3, 0.5);
        for &beta in &[1e-6, 1e-2, 1.0] {
            let fit = fit_ridge_masked(&inst.states, &inst.obs, beta, 10).unwrap();
            for j in 0..3 {
                let oracle = svd_oracle(&inst, beta, 10, j);
                let got = fit.theta.column(j).into_owned();
                let rel = (&got - &oracle).norm() / oracle.norm();
                assert!(rel < 1e-8, "seed={seed} beta={beta} j={j} rel={rel:e}");
            }
        }
    }
}

#[test]
fn normal_equation_residual_is_small() {
    let inst = instance(11, 2, 0.3);
    let beta = 1e-4;
    let fit = fit_ridge_masked(&inst.states, &inst.obs, beta, 5).unwrap();
    for j in 0..2 {
        let mut g = DMatrix::identity(NS + 1, NS + 1) * beta;
        let mut m = DVector::zeros(NS + 1);
        for t in 5..=T {
            if inst.obs.is_observed(t, j) {
                let s = &inst.states[t - 1];
                g += s * s.transpose();
                m += s * inst.obs.y_obs()[(t, j)];
            }
        }
        let theta = fit.theta.column(j).into_owned();
        let rel = (&g * &theta - &m).norm() / m.norm();
        assert!(rel <= 1e-8, "j={j} residual {rel:e}");
    }
}

#[test]
fn minimizer_beats_random_perturbations() {
    let inst = instance(2, 1, 0.4);
    let beta = 1e-3;
    let fit = fit_ridge_masked(&inst.states, &inst.obs, beta, 1).unwrap();
    let theta = fit.theta.column(0).into_owned();
    let best = objective(&inst, &theta, beta, 1, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..100 {
        let d = DVector::from_fn(NS + 1, |_, _| rng.random_range(-1.0..1.0)) * 1e-3;
        assert!(objective(&inst, &(&theta + d), beta, 1, 0) >= best);
    }
}

#[test]
fn full_fit_equals_masked_fit_on_complete_mask() {
    let inst = instance(4, 2, 0.0);
    let a = fit_ridge_full(&inst.states, inst.obs.y_obs(), 1e-5, 7).unwrap();
    let b = fit_ridge_masked(&inst.states, &inst.obs, 1e-5, 7).unwrap();
    assert!((&a.theta - &b.theta).amax() < 1e-10);
}

#[test]
fn scaled_ridge_is_total_with_scaled_beta() {
    let inst = instance(6, 2, 0.5);
    let mut acc = NormalEquationAccumulator::per_target(NS + 1, 2);
    let mut row = [0.0; 2];
    let mut seen = [false; 2];
    for t in 1..=T {
        for j in 0..2 {
            seen[j] = inst.obs.is_observed(t, j);
            row[j] = inst.obs.y_obs()[(t, j)];
        }
        acc.push(inst.states[t - 1].as_slice(), &row, &seen);
    }
    let beta = 1e-3;
    let scaled = acc.clone().solve_scaled(beta, RidgeScaling::PerSample).unwrap();
    for j in 0..2 {
        let n = acc.counts()[j];
        let total = acc.clone().solve(beta * n as f64).unwrap();
        assert!((scaled.theta.column(j) - total.theta.column(j)).amax() < 1e-12);
    }
    assert_eq!(acc.rows(), T);
    let stepped = acc.clone().solve_scaled(beta, RidgeScaling::PerStep).unwrap();
    let total = acc.clone().solve(beta * T as f64).unwrap();
    assert!((&stepped.theta - &total.theta).amax() < 1e-12);
}

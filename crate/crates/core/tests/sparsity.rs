use fpesn::sparsity::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Natural spline through `(x, y)` from the full (n x n) second-derivative
/// system, solved densely.
fn dense_spline(x: &[f64], y: &[f64], t: f64) -> f64 {
    let n = x.len();
    let mut a = DMatrix::zeros(n, n);
    let mut r = DVector::zeros(n);
    a[(0, 0)] = 1.0;
    a[(n - 1, n - 1)] = 1.0;
    for i in 1..n - 1 {
        let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
        a[(i, i - 1)] = h0 / 6.0;
        a[(i, i)] = (h0 + h1) / 3.0;
        a[(i, i + 1)] = h1 / 6.0;
        r[i] = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
    }
    let m = a.lu().solve(&r).unwrap();
    if t <= x[0] {
        return y[0];
    }
    if t >= x[n - 1] {
        return y[n - 1];
    }
    let i = (0..n - 1).find(|&i| t <= x[i + 1]).unwrap();
    let h = x[i + 1] - x[i];
    let (p, q) = (x[i + 1] - t, t - x[i]);
    m[i] * p.powi(3) / (6.0 * h)
        + m[i + 1] * q.powi(3) / (6.0 * h)
        + (y[i] / h - m[i] * h / 6.0) * p
        + (y[i + 1] / h - m[i + 1] * h / 6.0) * q
}

#[test]
fn spline_matches_dense_reference() {
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = 31;
        let mut mask = DMatrix::from_element(rows, 1, false);
        for t in rand::seq::index::sample(&mut rng, rows, 8) {
            mask[(t, 0)] = true;
        }
        let y = DMatrix::from_fn(rows, 1, |_, _| rng.random_range(-3.0..3.0));
        let (x, v): (Vec<f64>, Vec<f64>) = (0..rows).filter(|&t| mask[(t, 0)]).map(|t| (t as f64, y[(t, 0)])).unzip();
        let got = interp_cubic_spline(&y, &mask).unwrap();
        for t in 0..rows {
            let want = dense_spline(&x, &v, t as f64);
            assert!((got[(t, 0)] - want).abs() < 1e-10, "seed={seed} t={t}");
        }
    }
}

#[test]
fn spline_reproduces_lines() {
    let y = DMatrix::from_fn(40, 1, |t, _| 0.5 - 0.25 * t as f64);
    let mask = make_mask(40, 1, &MaskSpec { protect_t0: true, ..MaskSpec::new(0.7, 3) }).unwrap();
    let mut mask = mask;
    mask[(39, 0)] = true;
    let s = interp_cubic_spline(&y, &mask).unwrap();
    let l = interp_linear(&y, &mask).unwrap();
    assert!((&s - &y).amax() < 1e-12);
    assert!((&l - &y).amax() < 1e-12);
}

#[test]
fn mean_gap_at_high_sparsity() {
    let t_len = 50_000;
    let mask = make_mask(t_len + 1, 1, &MaskSpec::new(0.95, 17)).unwrap();
    let seen: Vec<usize> = (0..=t_len).filter(|&t| mask[(t, 0)]).collect();
    assert_eq!(seen.len(), t_len + 1 - 47_500);
    let mean = seen.windows(2).map(|w| (w[1] - w[0]) as f64).sum::<f64>() / (seen.len() - 1) as f64;
    assert!((mean - 20.0).abs() <= 2.0, "mean gap {mean}");
}

#[test]
fn metric_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let star: DMatrix<f64> = DMatrix::from_fn(50, 2, |_, _| rng.random_range(-1.0..1.0));
    let r: DMatrix<f64> = DMatrix::from_fn(50, 2, |_, _| rng.random_range(-1.0..1.0));
    let base: DMatrix<f64> = DMatrix::from_fn(50, 2, |_, _| rng.random_range(-1.0..1.0));
    let (mut num, mut den, mut bden) = (0.0f64, 0.0f64, 0.0f64);
    for t in 0..50 {
        for j in 0..2 {
            num += (r[(t, j)] - star[(t, j)]).powi(2);
            den += star[(t, j)].powi(2);
            bden += (base[(t, j)] - star[(t, j)]).powi(2);
        }
    }
    assert!((nrmse(&r, &star).unwrap() - (num / den).sqrt()).abs() < 1e-12);
    assert!((sigma_vs_baseline(&r, &base, &star).unwrap() - (num / bden).sqrt()).abs() < 1e-12);
    assert_eq!(nrmse(&star, &star).unwrap(), 0.0);
    assert_eq!(nrmse(&DMatrix::zeros(50, 2), &star).unwrap(), 1.0);
    assert_eq!(sigma_vs_baseline(&base, &base, &star).unwrap(), 1.0);
}

proptest! {
    #[test]
    fn mask_counts_are_exact(omega in 0.0f64..0.99, t_len in 10usize..2000, n_vars in 1usize..4, seed: u64, shared: bool) {
        let spec = MaskSpec { per_variable: !shared, ..MaskSpec::new(omega, seed) };
        let mask = make_mask(t_len + 1, n_vars, &spec).unwrap();
        let hidden = (omega * t_len as f64).round() as usize;
        for j in 0..n_vars {
            prop_assert!(mask[(0, j)]);
            prop_assert_eq!(mask.column(j).iter().filter(|&&m| !m).count(), hidden);
        }
        if shared {
            for j in 1..n_vars {
                prop_assert_eq!(mask.column(j), mask.column(0));
            }
        }
        prop_assert_eq!(mask, make_mask(t_len + 1, n_vars, &spec).unwrap());
    }

    #[test]
    fn interpolators_hit_observations(seed: u64, omega in 0.0f64..0.9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = DMatrix::from_fn(101, 2, |_, _| rng.random_range(-5.0..5.0));
        let mask = make_mask(101, 2, &MaskSpec::new(omega, seed)).unwrap();
        let l = interp_linear(&y, &mask).unwrap();
        let c = interp_cubic_spline(&y, &mask).unwrap();
        for (k, &m) in mask.iter().enumerate() {
            if m {
                prop_assert_eq!(l.as_slice()[k], y.as_slice()[k]);
                prop_assert_eq!(c.as_slice()[k], y.as_slice()[k]);
            }
        }
    }
}

use fpesn::dynamics::*;
use nalgebra::DMatrix;

fn rms(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    ((a - b).norm_squared() / a.len() as f64).sqrt()
}

#[test]
fn step_halving_mackey_glass() {
    let p = MackeyGlassParams { transient: 0, ..Default::default() };
    let fine = MackeyGlassParams { inner_steps_per_sample: 2 * p.inner_steps_per_sample, ..p.clone() };
    let d = rms(&gen_mackey_glass(&p, 1000).unwrap().y, &gen_mackey_glass(&fine, 1000).unwrap().y);
    assert!(d < 1e-5, "rms {d:e}");
}

#[test]
fn step_halving_lorenz63() {
    let p = Lorenz63Params { transient: 0, ..Default::default() };
    let fine = Lorenz63Params { inner_steps: 2 * p.inner_steps, ..p.clone() };
    let d = rms(&gen_lorenz63(&p, 200).unwrap().y, &gen_lorenz63(&fine, 200).unwrap().y);
    assert!(d < 1e-6, "rms {d:e}");
}

#[test]
fn step_halving_lorenz96() {
    let p = Lorenz96Params { transient: 0, ..Default::default() };
    let fine = Lorenz96Params { inner_steps: 2 * p.inner_steps, ..p.clone() };
    let d = rms(&gen_lorenz96(&p, 200).unwrap().y, &gen_lorenz96(&fine, 200).unwrap().y);
    assert!(d < 1e-5, "rms {d:e}");
}

#[test]
fn step_halving_van_der_pol() {
    let p = VdpParams { transient: 0, ..Default::default() };
    let fine = VdpParams { rk4_substeps: 2, ..p.clone() };
    let d = rms(&gen_vdp_state(&p, 1000, 4).unwrap().y, &gen_vdp_state(&fine, 1000, 4).unwrap().y);
    assert!(d < 1e-5, "rms {d:e}");
}

#[test]
fn lorenz96_is_rotation_equivariant() {
    let x0 = vec![8.01, 7.9, 8.3, 7.7, 8.05, 8.2];
    let base = Lorenz96Params { initial: Some(x0.clone()), transient: 0, ..Default::default() };
    let mut shifted = x0.clone();
    shifted.rotate_right(2);
    let rot = Lorenz96Params { initial: Some(shifted), ..base.clone() };
    let a = gen_lorenz96(&base, 100).unwrap().y;
    let b = gen_lorenz96(&rot, 100).unwrap().y;
    for t in 0..=100 {
        for i in 0..6 {
            assert!((a[(t, i)] - b[(t, (i + 2) % 6)]).abs() < 1e-12);
        }
    }
}

#[test]
fn attractors_stay_in_known_boxes() {
    let l63 = gen_lorenz63(&Lorenz63Params::default(), 5000).unwrap().y;
    for t in 0..l63.nrows() {
        assert!(l63[(t, 0)].abs() < 25.0 && l63[(t, 1)].abs() < 35.0);
        assert!(l63[(t, 2)] > 0.0 && l63[(t, 2)] < 55.0);
    }
    let long = gen_lorenz63(&Lorenz63Params::default(), 50_000).unwrap().y;
    let zmax = long.column(2).max();
    assert!((35.0..=55.0).contains(&zmax), "max z {zmax}");
    let mg = gen_mackey_glass(&MackeyGlassParams::default(), 5000).unwrap().y;
    assert!(mg.iter().all(|&v| v > 0.2 && v < 1.5));
    let l96 = gen_lorenz96(&Lorenz96Params::default(), 5000).unwrap().y;
    assert!(l96.iter().all(|&v| v.abs() < 20.0));
}

#[test]
fn ou_stationary_variance() {
    let (theta, sigma) = (0.2, 5.0 * 0.4f64.sqrt());
    let u = gen_ou(theta, sigma, 0.5, 400_000, 9).unwrap();
    let tail = &u[1000..];
    let n = tail.len() as f64;
    let mean = tail.iter().sum::<f64>() / n;
    let var = tail.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let expected = sigma * sigma / (2.0 * theta);
    assert!((var - expected).abs() < 0.1 * expected, "var {var}, expected {expected}");
    assert!(mean.abs() < 0.5);
}

#[test]
fn mackey_glass_autocorrelation_peak() {
    let y = gen_mackey_glass(&MackeyGlassParams::default(), 20_000).unwrap().y;
    let v: Vec<f64> = y.iter().copied().collect();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let c: Vec<f64> = v.iter().map(|x| x - mean).collect();
    let acf = |lag: usize| c.iter().zip(&c[lag..]).map(|(a, b)| a * b).sum::<f64>();
    // First local maximum after the first zero crossing.
    let first_neg = (1..200).find(|&l| acf(l) < 0.0).unwrap();
    let peak = (first_neg..200).find(|&l| acf(l) > acf(l - 1) && acf(l) >= acf(l + 1)).unwrap();
    assert!((40..=60).contains(&peak), "peak at lag {peak}");
}

#[test]
fn generators_are_deterministic() {
    let p = VdpParams::default();
    assert_eq!(gen_vdp(&p, 300, 5).unwrap(), gen_vdp(&p, 300, 5).unwrap());
    assert_ne!(gen_vdp(&p, 300, 5).unwrap().u, gen_vdp(&p, 300, 6).unwrap().u);
    let tr = gen_lorenz63(&Lorenz63Params::default(), 10).unwrap();
    assert_eq!(tr.y.shape(), (11, 3));
    assert_eq!(tr.dt, 0.02);
}

// Building a reservoir, checking its spectral radius, and watching two
// different initial states forget where they started.
//
//   cargo run --release --example reservoir_basics

use fpesn::dynamics::{gen_mackey_glass, MackeyGlassParams};
use fpesn::readout::fit_ridge_full;
use fpesn::reservoir::{spectral_radius, LatentState};
use fpesn::{Reservoir, ReservoirSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> fpesn::Result<()> {
    let spec = ReservoirSpec { n_latent: 400, seed: 7, ..ReservoirSpec::default() };
    let res = Reservoir::build(&spec)?;
    println!(
        "N_s = {}, nonzeros in A = {}, rho(A) = {:.9} (target {})",
        res.n_latent(),
        res.a().nnz(),
        spectral_radius(res.a())?,
        spec.spectral_radius
    );

    // Fading memory: two random starting states, same input.
    let truth = gen_mackey_glass(&MackeyGlassParams::default(), 3000)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut a = LatentState::zeros(res.n_latent());
    let mut b = LatentState::zeros(res.n_latent());
    a.s.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
    b.s.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
    for t in 0..=200 {
        if t % 40 == 0 {
            println!("  t = {t:3}  |s_a - s_b| = {:.3e}", (&a.s - &b.s).norm());
        }
        let y = [truth.y[(t, 0)]];
        a = res.step(&a, &y, &[])?;
        b = res.step(&b, &y, &[])?;
    }

    // Plain one-step-ahead readout on the complete series.
    let t_len = truth.y.nrows() - 1;
    let states = res.run_teacher_forced(&truth.y.rows(0, t_len).into_owned(), &truth.u, &LatentState::zeros(res.n_latent()))?;
    let theta = fit_ridge_full(&states, &truth.y, 1e-8, 200)?;
    let mut sq = 0.0;
    for t in 201..=t_len {
        let p = theta.predict(states[t - 1].as_slice())?[0];
        sq += (p - truth.y[(t, 0)]).powi(2);
    }
    println!("one-step RMSE after washout: {:.2e}", (sq / (t_len - 200) as f64).sqrt());
    Ok(())
}

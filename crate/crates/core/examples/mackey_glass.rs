// Reconstruct a Mackey-Glass series with most samples removed.
//
//   cargo run --release --example mackey_glass -- [omega] [T] [n_latent]

use fpesn::dynamics::{gen_mackey_glass, MackeyGlassParams};
use fpesn::fixed_point::reconstruct_with;
use fpesn::harness::{baselines, summarize};
use fpesn::sparsity::{make_mask, MaskSpec};
use fpesn::{FixedPointConfig, ObservationSet, Reservoir, ReservoirSpec};

fn main() -> fpesn::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let omega: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.9);
    let t_len: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(5000);
    let n_latent: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(500);

    let truth = gen_mackey_glass(&MackeyGlassParams::default(), t_len)?;
    let mask = make_mask(truth.len(), 1, &MaskSpec::new(omega, 11))?;
    let obs = ObservationSet::new(truth.y.clone(), mask, truth.u.clone(), truth.dt)?;
    println!("T = {t_len}, omega = {omega}, {} observations", obs.observed_count(0));

    let res = Reservoir::build(&ReservoirSpec { n_latent, seed: 7, ..ReservoirSpec::default() })?;
    let (relaxation, ridge) = if omega >= 0.95 { (0.4, 1e-8) } else { (0.2, 1e-9) };
    let cfg = FixedPointConfig { relaxation, ridge, max_iter: 300, ..FixedPointConfig::default() };

    let start = std::time::Instant::now();
    let run = reconstruct_with(&res, &obs, &cfg, |rec| {
        if rec.iteration % 10 == 0 || rec.iteration < 5 {
            println!("  k = {:4}  e = {:.3e}", rec.iteration, rec.improvement);
        }
    })?;
    println!(
        "{} after {} iterations ({:.1} s)",
        if run.converged { "converged" } else { "stopped" },
        run.iterations,
        start.elapsed().as_secs_f64()
    );

    let (lin, csp) = baselines(&obs)?;
    let m = summarize(&run.y_r, &lin, &csp, &truth.y, cfg.washout)?.all;
    println!("NRMSE       {:.4}", m.nrmse);
    println!("NRMSE (std) {:.4}", m.nrmse_std);
    println!("sigma_lin   {:.4}", m.sigma_lin);
    println!("sigma_csp   {:.4}", m.sigma_csp);
    Ok(())
}

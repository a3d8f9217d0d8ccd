// Reconstructing your own data: write a CSV with empty cells for missing
// samples, read it back, fill the gaps and save the result.
//
//   cargo run --release --example custom_series -- [input.csv] [output.csv]
//
// Without arguments a damped two-tone signal with 85% of samples removed is
// used as input.

use std::path::PathBuf;

use fpesn::dynamics::Trajectory;
use fpesn::fixed_point::reconstruct;
use fpesn::harness::io::{export_series, export_trajectory, import_series};
use fpesn::sparsity::{interp_linear, make_mask, MaskSpec};
use fpesn::{FixedPointConfig, ObservationSet, Reservoir, ReservoirSpec};
use nalgebra::DMatrix;

fn demo_input(path: &PathBuf) -> fpesn::Result<DMatrix<f64>> {
    let n = 4001;
    let y = DMatrix::from_fn(n, 1, |t, _| {
        let t = t as f64 * 0.1;
        (0.7 * t).sin() + 0.5 * (1.9 * t).cos() * (-0.0005 * t).exp()
    });
    let mask = make_mask(n, 1, &MaskSpec::new(0.85, 5))?;
    let obs = ObservationSet::new(y.clone(), mask, DMatrix::zeros(n, 0), 0.1)?;
    export_series(&obs, path)?;
    Ok(y)
}

fn main() -> fpesn::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let dir = std::env::temp_dir();
    let input = args.get(1).map(PathBuf::from).unwrap_or_else(|| dir.join("fpesn_demo_observed.csv"));
    let output = args.get(2).map(PathBuf::from).unwrap_or_else(|| dir.join("fpesn_demo_reconstructed.csv"));
    let truth = if args.get(1).is_none() { Some(demo_input(&input)?) } else { None };

    let obs = import_series(&input)?;
    println!(
        "{}: {} rows, {} target(s), {} input(s), {:.0}% missing",
        input.display(),
        obs.len(),
        obs.n_target(),
        obs.n_exo(),
        100.0 * obs.missing_fraction()
    );

    let res = Reservoir::build(&ReservoirSpec {
        n_latent: 300,
        n_target: obs.n_target(),
        n_exo: obs.n_exo(),
        seed: 1,
        ..ReservoirSpec::default()
    })?;
    let cfg = FixedPointConfig { relaxation: 0.2, ridge: 1e-8, normalize_inputs: true, max_iter: 200, ..FixedPointConfig::default() };
    let run = reconstruct(&res, &obs, &cfg)?;
    println!("{} after {} iterations", if run.converged { "converged" } else { "stopped" }, run.iterations);

    export_trajectory(&Trajectory { y: run.y_r.clone(), u: obs.u().clone(), dt: obs.dt() }, &output)?;
    println!("wrote {}", output.display());

    if let Some(y) = truth {
        let lin = interp_linear(obs.y_obs(), obs.mask())?;
        let rms = |a: &DMatrix<f64>| ((a - &y).norm_squared() / y.len() as f64).sqrt();
        println!("RMSE reconstruction {:.4}, linear interpolation {:.4}", rms(&run.y_r), rms(&lin));
    }
    Ok(())
}

// Lorenz-63 with z fully known and x sparsely observed.
//
//   cargo run --release --example lorenz63_partial -- [omega] [T]

use fpesn::harness::{run_experiment, ExperimentConfig, System};

fn main() -> fpesn::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let omega: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.9);
    let t_len: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(20_000);

    let mut cfg = ExperimentConfig::new(System::Lorenz63Partial, t_len, omega);
    cfg.fixed_point.max_iter = 300;
    println!(
        "x masked at omega = {omega}, z given; alpha = {}, beta = {:e}, normalized inputs: {}",
        cfg.alpha(),
        cfg.beta(),
        cfg.normalize_inputs()
    );

    let result = run_experiment(&cfg)?;
    let m = result.metrics.expect("single run has metrics").all;
    println!(
        "{} after {} iterations, last e = {:.2e}",
        if result.converged { "converged" } else { "stopped" },
        result.iterations,
        result.improvements.last().copied().unwrap_or(f64::NAN)
    );
    println!("sigma_lin = {:.3}  sigma_csp = {:.3}  NRMSE = {:.4}", m.sigma_lin, m.sigma_csp, m.nrmse);

    // A short stretch of the reconstruction next to the truth.
    if let Some(rec) = &result.reconstruction {
        println!("\n   t      x*        x_R       x_lin   observed");
        for t in (5000..5040).step_by(2) {
            println!(
                "{t:5}  {:8.3}  {:8.3}  {:8.3}  {}",
                rec.y_star[(t, 0)],
                rec.y_r[(t, 0)],
                rec.y_lin[(t, 0)],
                if rec.mask[(t, 0)] { "*" } else { "" }
            );
        }
    }
    Ok(())
}

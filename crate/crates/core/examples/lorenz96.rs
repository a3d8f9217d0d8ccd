// Six-node Lorenz-96 ring, every node masked independently.
//
//   cargo run --release --example lorenz96 -- [omega] [T]

use fpesn::harness::{run_experiment, ExperimentConfig, System};

fn main() -> fpesn::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let omega: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.9);
    let t_len: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(20_000);

    let mut cfg = ExperimentConfig::new(System::Lorenz96, t_len, omega);
    cfg.fixed_point.max_iter = 300;
    let result = run_experiment(&cfg)?;
    let m = result.metrics.expect("single run has metrics");
    println!(
        "{} nodes, F = {}: {} after {} iterations",
        cfg.dynamics.lorenz96.n_nodes,
        cfg.dynamics.lorenz96.forcing,
        if result.converged { "converged" } else { "stopped" },
        result.iterations
    );
    println!("sigma_lin = {:.3}  sigma_csp = {:.3}", m.all.sigma_lin, m.all.sigma_csp);

    if let Some(rec) = &result.reconstruction {
        println!("\nnode  rmse_R   rmse_lin");
        for j in 0..rec.y_star.ncols() {
            let rmse = |y: &nalgebra::DMatrix<f64>| {
                let n = y.nrows() as f64;
                ((0..y.nrows()).map(|t| (y[(t, j)] - rec.y_star[(t, j)]).powi(2)).sum::<f64>() / n).sqrt()
            };
            println!("{j:4}  {:.4}   {:.4}", rmse(&rec.y_r), rmse(&rec.y_lin));
        }
    }
    Ok(())
}

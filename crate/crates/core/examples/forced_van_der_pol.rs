// Van der Pol oscillator driven by an Ornstein-Uhlenbeck force. Only the
// position is (sparsely) observed; the force is known everywhere.
//
//   cargo run --release --example forced_van_der_pol -- [omega] [T]

use fpesn::harness::{run_experiment, ExperimentConfig, System};

fn main() -> fpesn::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let omega: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.98);
    let t_len: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(50_000);

    let mut cfg = ExperimentConfig::new(System::Vdp, t_len, omega);
    cfg.fixed_point.max_iter = 300;
    let result = run_experiment(&cfg)?;
    let m = result.metrics.expect("single run has metrics").all;

    println!("{} observations of y1", ((1.0 - omega) * t_len as f64).round());
    for (k, e) in result.improvements.iter().enumerate().filter(|(k, _)| k % 25 == 0) {
        println!("  k = {:3}  e = {e:.2e}", k + 1);
    }
    println!(
        "{} after {} iterations; sigma_lin = {:.3}, sigma_csp = {:.3}",
        if result.converged { "converged" } else { "stopped" },
        result.iterations,
        m.sigma_lin,
        m.sigma_csp
    );
    Ok(())
}

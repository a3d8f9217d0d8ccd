// Column sums of the fixed-point Jacobian at the true trajectory, and how
// they compare with the local convergence condition.
//
//   cargo run --release --example jacobian_diagnostics -- [system] [window]

use fpesn::harness::{run_jacobian, ExperimentConfig, System};

fn main() -> fpesn::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let system: System = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(System::MackeyGlass);
    let window: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(400);

    let mut cfg = ExperimentConfig::new(system, 2_000, 0.9);
    cfg.jacobian.window = window;
    let diag = run_jacobian(&cfg)?;

    println!(
        "diag(A) in [{:.3}, {:.3}], required ({:.3}, {:.3}): {}",
        diag.diag_bound.min_diag,
        diag.diag_bound.max_diag,
        diag.diag_bound.lower,
        diag.diag_bound.upper,
        if diag.diag_bound.satisfied { "ok" } else { "violated" }
    );
    for r in &diag.targets {
        println!("\ntarget {} over columns {}..={}", r.target, r.first, r.last);
        println!("  ||J||_1                  = {:.4} (column {})", r.l1_norm, r.argmax_column);
        println!(
            "  sufficient condition     = {:.4} < {:.4} ? {}",
            r.sufficient_condition_lhs,
            1.0 / (1.0 - r.lambda),
            r.sufficient_condition_satisfied
        );
        println!("  (1 - lambda^(T-J)) |theta B_y| = {:.4}", r.simplified_bound);
        let n = r.column_sums.len();
        let mean = r.column_sums.iter().sum::<f64>() / n as f64;
        println!("  mean column sum          = {mean:.4}");
    }
    Ok(())
}

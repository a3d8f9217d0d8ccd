// Small sensitivity sweep over the leak rate with a three-member ensemble per
// cell. Cells run in parallel.
//
//   cargo run --release --example parameter_sweep -- [T]

use fpesn::harness::sweep::summary_table;
use fpesn::harness::{sweep, ExperimentConfig, SweepGrid, System};

fn main() -> fpesn::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let t_len: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(3_000);

    let mut base = ExperimentConfig::new(System::MackeyGlass, t_len, 0.8);
    base.reservoir.n_latent = 300;
    base.ensemble = 3;
    base.fixed_point.max_iter = 150;
    let grid = SweepGrid { leak: vec![0.1, 0.4, 0.6, 0.8], ..SweepGrid::default() };

    let cells = sweep(&base, &grid);
    let (header, rows) = summary_table(&cells);
    println!("{}", header.join("\t"));
    for r in rows {
        println!("{}", r.join("\t"));
    }
    Ok(())
}

//! Sweep corruption rates programmatically and print the per-configuration summary.
//!
//!     cargo run --example bench -- [seeds]

use robust_csp::cli::{bench_rows, summarize, BenchArgs, ModeArg};

fn main() -> robust_csp::Result<()> {
    let seeds: u64 = std::env::args().nth(1).map_or(3, |s| s.parse().expect("seeds"));
    let args = BenchArgs {
        language: None,
        vars: 30,
        constraints: vec![300],
        eps: vec![0.0, 0.01, 0.05],
        levels: vec![2],
        seeds,
        seed: 0,
        mode: ModeArg::Randomized,
        delta: None,
        eta: 1e-10,
        pool_size: None,
        timing: false,
        out: None,
    };
    let rows = bench_rows(&args)?;
    println!("{:>6} {:>6} {:>10} {:>10}", "eps", "level", "removed", "value");
    for s in summarize(&rows) {
        println!(
            "{:>6} {:>6} {:>10.4} {:>10.4}",
            s.eps, s.level, s.mean_removed_fraction, s.mean_value
        );
    }
    Ok(())
}

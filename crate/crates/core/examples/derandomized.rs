//! Run the deterministic rounding and print the conditional-expectation trace.
//!
//!     cargo run --example derandomized -- [num_vars] [num_constraints] [epsilon] [level]

use robust_csp::generate::{plant_and_corrupt, two_sat};
use robust_csp::rounding::{derandomized_round_with, RoundingOptions};
use robust_csp::sdp::{build_sdp, solve_sdp};

fn main() -> robust_csp::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let vars: usize = arg(0, "30").parse().expect("num_vars");
    let m: usize = arg(1, "300").parse().expect("num_constraints");
    let eps: f64 = arg(2, "0.01").parse().expect("epsilon");
    let n: usize = arg(3, "2").parse().expect("level");

    let language = two_sat();
    let w = language.witness().cloned().expect("witness");
    let planted = plant_and_corrupt(&language, vars, m, eps, 5)?;
    let v = solve_sdp(&build_sdp(&planted.instance)?, 1.0 / m as f64)?;
    let (_, report) = derandomized_round_with(&planted.instance, &v, n, &[w.f1, w.f2], 0, &RoundingOptions::default())?;

    println!(
        "chosen r = {}, s = {:e}; removed {:?}",
        report.r, report.s, report.removed
    );
    if let Some(trace) = &report.estimator {
        println!(
            "|L7| = {}, |L8| = {}, hyperplanes used = {}",
            trace.list7,
            trace.list8,
            trace.selected.len()
        );
        for (i, e) in trace.total.iter().enumerate().take(8) {
            println!("  E_{i} = {e:.6}");
        }
        println!("non-increasing: {}", trace.is_non_increasing());
    }
    println!(
        "value {:.4} (corrupted {:.4})",
        report.value,
        planted.corrupted_fraction()
    );
    Ok(())
}

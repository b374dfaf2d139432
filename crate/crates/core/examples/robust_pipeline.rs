//! Planted 2-SAT → SDP → randomized and derandomized rounding at levels 2 and 3.
//!
//! `cargo run --release --example robust_pipeline -- [vars] [constraints] [eps] [seed]`

use std::time::Instant;

use robust_csp::generate::{plant_and_corrupt, two_sat};
use robust_csp::rounding::{derandomized_round, robust_round};
use robust_csp::sdp::{build_sdp, solve_sdp};

fn main() -> robust_csp::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let n_vars: usize = arg(0, "40").parse().expect("vars");
    let m: usize = arg(1, "1000").parse().expect("constraints");
    let eps: f64 = arg(2, "0.01").parse().expect("eps");
    let seed: u64 = arg(3, "1").parse().expect("seed");

    let lang = two_sat();
    let planted = plant_and_corrupt(&lang, n_vars, m, eps, seed)?;
    let w = lang.witness().expect("built-in witness");
    let ops = [w.f1.clone(), w.f2.clone()];

    let clock = Instant::now();
    let vectors = solve_sdp(&build_sdp(&planted.instance)?, 1.0 / m as f64)?;
    println!(
        "corrupted {:.4}  sdp {:.6} (bound {:.6})  {:?}",
        planted.corrupted_fraction(),
        vectors.objective.unwrap_or(f64::NAN),
        vectors.upper_bound.unwrap_or(f64::NAN),
        clock.elapsed()
    );
    for level in [2, 3] {
        let clock = Instant::now();
        let (_, rep) = robust_round(&planted.instance, &vectors, level, seed, &ops)?;
        println!(
            "randomized   n={level} r={} removed {:?} value {:.4}  {:?}",
            rep.r,
            rep.removed,
            rep.value,
            clock.elapsed()
        );
        let clock = Instant::now();
        let (_, rep) = derandomized_round(&planted.instance, &vectors, level, &ops, seed)?;
        println!(
            "derandomized n={level} r={} removed {:?} value {:.4}  {:?}",
            rep.r,
            rep.removed,
            rep.value,
            clock.elapsed()
        );
    }
    Ok(())
}

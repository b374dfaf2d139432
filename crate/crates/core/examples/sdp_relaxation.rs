//! Solve the basic SDP relaxation of a planted 2-SAT instance and inspect the vectors.
//!
//!     cargo run --example sdp_relaxation -- [num_vars] [num_constraints] [epsilon] [seed]

use std::time::Instant;

use robust_csp::generate::{plant_and_corrupt, two_sat};
use robust_csp::sdp::{build_sdp, check_sdp_feasibility, lp_from_sdp, solve_sdp};
use robust_csp::value;

fn main() -> robust_csp::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let n: usize = arg(0, "40").parse().expect("num_vars");
    let m: usize = arg(1, "1000").parse().expect("num_constraints");
    let eps: f64 = arg(2, "0.01").parse().expect("epsilon");
    let seed: u64 = arg(3, "1").parse().expect("seed");

    let planted = plant_and_corrupt(&two_sat(), n, m, eps, seed)?;
    let inst = &planted.instance;
    println!(
        "planted assignment satisfies {} ({} corrupted)",
        value(inst, &planted.planted)?,
        planted.corrupted.iter().filter(|&&c| c).count()
    );

    let start = Instant::now();
    let v = solve_sdp(&build_sdp(inst)?, 1.0 / m as f64)?;
    println!(
        "SDP objective {:.8} (upper bound {:.8}), {} iterations, converged: {}, {:.2?}",
        v.objective.unwrap_or(f64::NAN),
        v.upper_bound.unwrap_or(f64::NAN),
        v.iterations,
        v.converged,
        start.elapsed()
    );
    let rep = check_sdp_feasibility(&v, 1e-10);
    println!(
        "residuals: SDP1 {:.1e}, SDP2 {:.1e}, SDP3 {:.1e}",
        rep.sdp1, rep.sdp2, rep.sdp3
    );
    let lp = lp_from_sdp(&v, inst, 1e-8)?;
    println!("LP objective {:.8}; lambda_0 = {:?}", lp.objective, lp.unary[0]);
    Ok(())
}

//! Decide satisfiability with (2,3)-minimality search and cross-check against brute force.
//!
//!     cargo run --example bounded_width_solve -- [num_vars] [num_constraints] [seed]
//!
//! Even seeds draw a uniformly random instance, odd seeds a planted satisfiable one.

use robust_csp::algebra::singleton_expand;
use robust_csp::consistency::{kl_minimize, solve_bounded_width};
use robust_csp::generate::{horn, plant_and_corrupt, random_instance};
use robust_csp::{brute_force_opt, value};

fn main() -> robust_csp::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let n: usize = arg(0, "10").parse().expect("num_vars");
    let m: usize = arg(1, "30").parse().expect("num_constraints");
    let seed: u64 = arg(2, "3").parse().expect("seed");

    let language = singleton_expand(&horn());
    // Uniformly random instances at this density are usually unsatisfiable; a planted
    // one is not.
    let inst = if seed.is_multiple_of(2) {
        random_instance(&language, n, m, seed)?
    } else {
        plant_and_corrupt(&language, n, m, 0.0, seed)?.instance
    };
    let minimal = kl_minimize(&inst, 2, 3)?;
    println!("(2,3)-minimal instance trivial: {}", minimal.is_trivial());
    for x in 0..n.min(4) {
        println!("  P_{x} = {:?}", minimal.unary(x));
    }

    let (_, opt) = brute_force_opt(&inst)?;
    match solve_bounded_width(&inst, &language)? {
        Some(a) => println!(
            "satisfiable: {:?} with value {} (brute force {opt})",
            a.values(),
            value(&inst, &a)?
        ),
        None => println!("unsatisfiable (brute force optimum {opt})"),
    }
    Ok(())
}

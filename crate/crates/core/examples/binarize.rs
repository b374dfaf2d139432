//! Reduce a ternary Horn instance to a binary one, solve it, and lift the answer back.
//!
//!     cargo run --example binarize

use robust_csp::algebra::singleton_expand;
use robust_csp::binarize::{binarize, lift_assignment};
use robust_csp::consistency::search;
use robust_csp::generate::{horn, plant_and_corrupt};
use robust_csp::value;

fn main() -> robust_csp::Result<()> {
    let language = singleton_expand(&horn());
    let planted = plant_and_corrupt(&language, 6, 10, 0.0, 11)?;
    let inst = planted.instance;
    let (bin, bin_language, map) = binarize(&inst, &language)?;
    println!(
        "{} variables / {} constraints over |D| = {} became {} / {} over |D'| = {}",
        inst.num_variables(),
        inst.num_constraints(),
        inst.domain().size(),
        bin.num_variables(),
        bin.num_constraints(),
        bin_language.domain().size()
    );
    match search(&bin)? {
        Some(a) => {
            let lifted = lift_assignment(&a, &map)?;
            println!(
                "lifted assignment {:?} has value {}",
                lifted.values(),
                value(&inst, &lifted)?
            );
        }
        None => println!("unsatisfiable"),
    }
    Ok(())
}

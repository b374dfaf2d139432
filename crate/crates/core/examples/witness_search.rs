//! Look for a bounded-width witness on a Boolean language, reduce a language to its core
//! and check that the witness survives singleton expansion.
//!
//!     cargo run --example witness_search

use robust_csp::algebra::{
    core_reduce, identity_violation, search_bw_witness_boolean, singleton_expand, verify_bw_witness,
};
use robust_csp::generate::{horn, parity3, two_sat};

fn main() -> robust_csp::Result<()> {
    for (name, language) in [("2-SAT", two_sat()), ("Horn", horn()), ("3-parity", parity3())] {
        let bare = language.without_witness();
        match search_bw_witness_boolean(&bare)? {
            Some(w) => {
                let expanded = singleton_expand(&bare.clone().with_witness(w.clone())?);
                println!(
                    "{name}: witness found (f1 = {:?}, f2 = {:?}); identities broken at {:?}; verified after expansion: {}",
                    w.f1.table(),
                    w.f2.table(),
                    identity_violation(&w.f1, &w.f2),
                    verify_bw_witness(&w.f1, &w.f2, &expanded)?
                );
            }
            None => println!("{name}: no witness, so not of bounded width"),
        }
        let core = core_reduce(&bare)?;
        println!(
            "  core domain size {} (from {})",
            core.domain().size(),
            bare.domain().size()
        );
    }
    Ok(())
}

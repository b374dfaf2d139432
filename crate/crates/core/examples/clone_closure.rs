//! Close a Prague instance under the witness operations and re-verify the axioms.
//!
//!     cargo run --example clone_closure

use robust_csp::algebra::clone_closure;
use robust_csp::generate::two_sat;
use robust_csp::io::{parse_prague, read_to_string};
use robust_csp::prague::verify_weak_prague;

fn main() -> robust_csp::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/prague_example.json");
    let p = parse_prague(&read_to_string(path)?)?;
    let w = two_sat().witness().cloned().expect("2-SAT ships a witness");
    let closed = clone_closure(&p, &[w.f1, w.f2])?;
    for (x, y) in p.scopes().filter(|&(x, y)| x < y) {
        println!("P_({x},{y}): {:?} -> {:?}", p.pairs(x, y), closed.pairs(x, y));
    }
    println!("before: {}", verify_weak_prague(&p)?.status);
    println!("after:  {}", verify_weak_prague(&closed)?.status);
    Ok(())
}

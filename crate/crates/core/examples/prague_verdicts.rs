//! Verify the Prague axioms on the bundled example instances and walk patterns by hand.
//!
//!     cargo run --example prague_verdicts

use robust_csp::io::{parse_prague, read_to_string};
use robust_csp::prague::{
    add_pattern, audit_p2star, check_23_extendability, members, pattern_closure, set_of, sub_pattern,
    verify_weak_prague, Pattern,
};

fn main() -> robust_csp::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    for name in ["prague_example", "prague_example_p2", "prague_example_p3"] {
        let p = parse_prague(&read_to_string(format!("{dir}/{name}.json"))?)?;
        let verdict = verify_weak_prague(&p)?;
        println!("{name}: {}", serde_json::to_string(&verdict).expect("serialize"));
        if let Some(v) = audit_p2star(&p, 6)? {
            println!(
                "  P2* violated at step {:?}: {:?} comes back as {:?}",
                v.step, v.set, v.back
            );
        }
        let bad = check_23_extendability(&p);
        println!("  (2,3)-extendability failures: {}", bad.len());
    }

    // A + p, A − p and the closure A + p + p + … on the first example.
    let p = parse_prague(&read_to_string(format!("{dir}/prague_example.json"))?)?;
    let (x, y) = p.scopes().next().expect("at least one scope");
    let walk = Pattern::new(vec![x, y, x])?;
    let a = set_of(&[0]);
    println!(
        "{{0}} + {:?} = {:?}, {{0}} - p = {:?}, closure = {:?}",
        walk.variables(),
        members(add_pattern(&p, a, &walk)?),
        members(sub_pattern(&p, a, &walk)?),
        members(pattern_closure(&p, a, &walk)?)
    );
    Ok(())
}

//! Writes built-in languages and planted instances as JSON files.
//!
//! `cargo run --example generate_data -- [out_dir]` (default `data/`).

use std::fs;
use std::path::PathBuf;

use robust_csp::generate::{horn, parity3, plant_and_corrupt, two_sat};
use robust_csp::io::{instance_to_json, language_to_json};
use robust_csp::{Constraint, Instance};

fn main() -> robust_csp::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data".into()));
    fs::create_dir_all(&dir)?;

    let (sat, hrn) = (two_sat(), horn());
    fs::write(dir.join("two_sat.json"), language_to_json(&sat))?;
    fs::write(dir.join("horn.json"), language_to_json(&hrn))?;
    fs::write(dir.join("parity3.json"), language_to_json(&parity3()))?;

    let files = [
        ("two_sat_sat.json", plant_and_corrupt(&sat, 40, 1000, 0.0, 1)?.instance),
        (
            "two_sat_eps01.json",
            plant_and_corrupt(&sat, 40, 1000, 0.01, 1)?.instance,
        ),
        ("horn_sat.json", plant_and_corrupt(&hrn, 12, 40, 0.0, 2)?.instance),
    ];
    for (name, inst) in &files {
        fs::write(dir.join(name), instance_to_json(inst))?;
    }

    // x ∧ y → z with x, y forced true and z forced false: unsatisfiable
    let h3 = hrn.relation("horn3").expect("horn3").clone();
    let d = hrn.domain();
    let contradiction = Instance::new(
        3,
        d,
        vec![
            Constraint::new(vec![0, 1, 2], h3),
            Constraint::new(vec![0], robust_csp::Relation::singleton(d, 1)),
            Constraint::new(vec![1], robust_csp::Relation::singleton(d, 1)),
            Constraint::new(vec![2], robust_csp::Relation::singleton(d, 0)),
        ],
    )?;
    fs::write(dir.join("horn_unsat.json"), instance_to_json(&contradiction))?;
    println!("wrote {} files to {}", 4 + files.len(), dir.display());
    Ok(())
}

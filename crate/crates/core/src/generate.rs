//! Standard Boolean languages and random / planted instance generators.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::OperationTable;
use crate::error::{Error, Result};
use crate::instance::{Assignment, Constraint, ConstraintLanguage, Domain, Instance, Relation, Witness};

fn boolean() -> Domain {
    Domain::new(2).expect("nonzero")
}

fn rel(arity: usize, pred: impl Fn(&[usize]) -> bool) -> Relation {
    let d = boolean();
    let size = d.power(arity).expect("small");
    let member = (0..size).map(|c| pred(&d.decode(c, arity))).collect();
    Relation::from_membership(d, arity, member)
}

/// The four binary clauses `(x ∨ y)`, `(x ∨ ¬y)`, `(¬x ∨ y)`, `(¬x ∨ ¬y)`, witnessed by
/// majority and `f2(x,y,z,w) = majority(x,y,z)`.
pub fn two_sat() -> ConstraintLanguage {
    let d = boolean();
    let clause = |sx: usize, sy: usize| rel(2, move |t| t[0] != sx || t[1] != sy);
    let relations = vec![
        ("or".to_string(), clause(0, 0)),
        ("or_not".to_string(), clause(0, 1)),
        ("not_or".to_string(), clause(1, 0)),
        ("nand".to_string(), clause(1, 1)),
    ];
    let maj = |a: &[usize]| usize::from(a[0] + a[1] + a[2] >= 2);
    let witness = Witness {
        f1: OperationTable::from_fn(d, 3, maj).expect("table"),
        f2: OperationTable::from_fn(d, 4, |a| maj(&a[..3])).expect("table"),
    };
    ConstraintLanguage::new(d, relations)
        .and_then(|l| l.with_witness(witness))
        .expect("valid language")
}

/// Binary Horn clauses: implication `x → y` and `¬x ∨ ¬y`; witnessed by `min`.
pub fn horn_binary() -> ConstraintLanguage {
    let d = boolean();
    let relations = vec![
        ("imp".to_string(), rel(2, |t| t[0] <= t[1])),
        ("nand".to_string(), rel(2, |t| !(t[0] == 1 && t[1] == 1))),
    ];
    ConstraintLanguage::new(d, relations)
        .and_then(|l| l.with_witness(min_witness()))
        .expect("valid language")
}

/// Horn clauses up to arity three: `x ∧ y → z`, implication, `¬x ∨ ¬y`.
pub fn horn() -> ConstraintLanguage {
    let d = boolean();
    let relations = vec![
        ("horn3".to_string(), rel(3, |t| !(t[0] == 1 && t[1] == 1 && t[2] == 0))),
        ("imp".to_string(), rel(2, |t| t[0] <= t[1])),
        ("nand".to_string(), rel(2, |t| !(t[0] == 1 && t[1] == 1))),
    ];
    ConstraintLanguage::new(d, relations)
        .and_then(|l| l.with_witness(min_witness()))
        .expect("valid language")
}

fn min_witness() -> Witness {
    let d = boolean();
    Witness {
        f1: OperationTable::from_fn(d, 3, |a| *a.iter().min().expect("args")).expect("table"),
        f2: OperationTable::from_fn(d, 4, |a| *a.iter().min().expect("args")).expect("table"),
    }
}

/// `x + y + z = 0 (mod 2)`; has no bounded-width witness.
pub fn parity3() -> ConstraintLanguage {
    ConstraintLanguage::new(
        boolean(),
        vec![("xor3".to_string(), rel(3, |t| (t[0] + t[1] + t[2]) % 2 == 0))],
    )
    .expect("valid language")
}

fn random_scope(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    rand::seq::index::sample(rng, n, k).into_vec()
}

/// `m` constraints with uniformly random relation and distinct-variable scope.
pub fn random_instance(language: &ConstraintLanguage, n: usize, m: usize, seed: u64) -> Result<Instance> {
    let usable: Vec<&Relation> = language
        .relations()
        .iter()
        .map(|(_, r)| r)
        .filter(|r| r.arity() <= n)
        .collect();
    if usable.is_empty() {
        return Err(Error::Config("no relation of usable arity in the language".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let constraints = (0..m)
        .map(|_| {
            let r = *usable.choose(&mut rng).expect("nonempty");
            Constraint::new(random_scope(&mut rng, n, r.arity()), r.clone())
        })
        .collect();
    Instance::new(n, language.domain(), constraints)
}

#[derive(Clone, Debug)]
pub struct Planted {
    pub instance: Instance,
    pub planted: Assignment,
    /// Which constraints were corrupted.
    pub corrupted: Vec<bool>,
}

impl Planted {
    pub fn corrupted_fraction(&self) -> f64 {
        self.corrupted.iter().filter(|&&c| c).count() as f64 / self.corrupted.len().max(1) as f64
    }
}

const TRIES: usize = 100;

/// Samples `F*`, then `m` constraints satisfied by `F*`; each is independently
/// replaced, with probability `epsilon`, by a random constraint that `F*` violates
/// (falling back to an arbitrary random one when none is found in 100 tries).
pub fn plant_and_corrupt(
    language: &ConstraintLanguage,
    num_vars: usize,
    num_constraints: usize,
    epsilon: f64,
    seed: u64,
) -> Result<Planted> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::Config(format!("epsilon must lie in [0, 1], got {epsilon}")));
    }
    let usable: Vec<&Relation> = language
        .relations()
        .iter()
        .map(|(_, r)| r)
        .filter(|r| r.arity() <= num_vars && !r.is_empty())
        .collect();
    if usable.is_empty() {
        return Err(Error::Config(
            "no nonempty relation of usable arity in the language".into(),
        ));
    }
    let d = language.domain();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let planted: Vec<usize> = (0..num_vars).map(|_| rng.random_range(0..d.size())).collect();
    let sample = |rng: &mut ChaCha8Rng, want_satisfied: bool| -> Option<Constraint> {
        for _ in 0..TRIES {
            let r = *usable.choose(rng).expect("nonempty");
            let scope = random_scope(rng, num_vars, r.arity());
            let c = Constraint::new(scope, r.clone());
            if c.is_satisfied_by(&planted) == want_satisfied {
                return Some(c);
            }
        }
        None
    };
    let mut constraints = Vec::with_capacity(num_constraints);
    let mut corrupted = Vec::with_capacity(num_constraints);
    for _ in 0..num_constraints {
        let good = sample(&mut rng, true)
            .ok_or_else(|| Error::Config("no relation is satisfiable by the planted assignment".into()))?;
        let corrupt = epsilon > 0.0 && rng.random::<f64>() < epsilon;
        if corrupt {
            let bad = match sample(&mut rng, false) {
                Some(c) => c,
                None => {
                    let r = *usable.choose(&mut rng).expect("nonempty");
                    Constraint::new(random_scope(&mut rng, num_vars, r.arity()), r.clone())
                }
            };
            constraints.push(bad);
        } else {
            constraints.push(good);
        }
        corrupted.push(corrupt);
    }
    Ok(Planted {
        instance: Instance::new(num_vars, d, constraints)?,
        planted: Assignment::new(planted),
        corrupted,
    })
}

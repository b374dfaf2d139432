//! Reduction of an instance over a language of arity `l` to unary and binary
//! constraints over blocks `D^l`, and lifting assignments back.

use crate::algebra::OperationTable;
use crate::error::{Error, Result};
use crate::instance::{Assignment, Constraint, ConstraintLanguage, Domain, Instance, Relation, Witness};

/// Largest block domain `|D|^l`; the coordinate-wise witness table has `|D'|^4` entries.
pub const BLOCK_DOMAIN_CAP: usize = 64;

/// Records how to read original values off a binarized assignment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LiftMap {
    pub original_variables: usize,
    pub original_domain: Domain,
    pub width: usize,
}

impl LiftMap {
    /// First coordinate of a block code (most significant digit).
    pub fn first_coordinate(&self, code: usize) -> usize {
        code / self
            .original_domain
            .power(self.width - 1)
            .expect("checked at construction")
    }
}

/// `(a_1..a_l) ∈ R'` iff `(a_1..a_k) ∈ R`.
fn block_unary(block: Domain, d: Domain, l: usize, r: &Relation) -> Relation {
    let k = r.arity();
    let member = (0..block.size())
        .map(|code| r.contains(&d.decode(code, l)[..k]))
        .collect();
    Relation::from_membership(block, 1, member)
}

/// `E_k = {(a, b) : a_1 = b_k}`.
fn block_edge(block: Domain, d: Domain, l: usize, k: usize) -> Relation {
    let size = block.size();
    let mut member = vec![false; size * size];
    for a in 0..size {
        let a1 = d.decode(a, l)[0];
        for b in 0..size {
            if d.decode(b, l)[k - 1] == a1 {
                member[a * size + b] = true;
            }
        }
    }
    Relation::from_membership(block, 2, member)
}

fn coordinatewise(block: Domain, d: Domain, l: usize, f: &OperationTable) -> Result<OperationTable> {
    OperationTable::from_fn(block, f.arity(), |args| {
        let decoded: Vec<Vec<usize>> = args.iter().map(|&c| d.decode(c, l)).collect();
        let out: Vec<usize> = (0..l)
            .map(|i| {
                let col: Vec<usize> = decoded.iter().map(|t| t[i]).collect();
                f.apply(&col)
            })
            .collect();
        d.encode(&out)
    })
}

/// Each constraint `((x_1..x_k), R)` becomes `((x_C), R')` and `((x_i, x_C), E_i)`
/// for `i = 1..k` on a fresh variable `x_C = |V| + index`.
pub fn binarize(instance: &Instance, language: &ConstraintLanguage) -> Result<(Instance, ConstraintLanguage, LiftMap)> {
    let d = instance.domain();
    if language.domain() != d {
        return Err(Error::DomainMismatch(language.domain().size(), d.size()));
    }
    let l = language.max_arity().max(instance.max_arity()).max(1);
    let size = d
        .power(l)
        .filter(|&s| s <= BLOCK_DOMAIN_CAP)
        .ok_or(Error::CapExceeded {
            what: "block domain |D|^l",
            size: (d.size() as f64).powi(l as i32),
            cap: BLOCK_DOMAIN_CAP as f64,
        })?;
    let block = Domain::new(size)?;

    let mut relations = Vec::new();
    for (name, r) in language.relations() {
        relations.push((format!("{name}'"), block_unary(block, d, l, r)));
    }
    let edges: Vec<Relation> = (1..=l).map(|k| block_edge(block, d, l, k)).collect();
    for (k, e) in edges.iter().enumerate() {
        relations.push((format!("E{}", k + 1), e.clone()));
    }
    for a in block.values() {
        relations.push((format!("const{a}"), Relation::singleton(block, a)));
    }
    let mut new_language = ConstraintLanguage::new(block, relations)?;
    if let Some(w) = language.witness() {
        new_language = new_language.with_witness(Witness {
            f1: coordinatewise(block, d, l, &w.f1)?,
            f2: coordinatewise(block, d, l, &w.f2)?,
        })?;
    }

    let n = instance.num_variables();
    let mut constraints = Vec::new();
    for (i, c) in instance.constraints().iter().enumerate() {
        let xc = n + i;
        constraints.push(Constraint::new(vec![xc], block_unary(block, d, l, &c.relation)));
        for (k, &x) in c.scope.iter().enumerate() {
            constraints.push(Constraint::new(vec![x, xc], edges[k].clone()));
        }
    }
    let new_instance = Instance::new(n + instance.num_constraints(), block, constraints)?;
    Ok((
        new_instance,
        new_language,
        LiftMap {
            original_variables: n,
            original_domain: d,
            width: l,
        },
    ))
}

/// `G(x)` = first coordinate of `G'(x)` for every original variable.
pub fn lift_assignment(assignment: &Assignment, map: &LiftMap) -> Result<Assignment> {
    if assignment.len() < map.original_variables {
        return Err(Error::InvalidAssignment(format!(
            "binarized assignment has {} values, need at least {}",
            assignment.len(),
            map.original_variables
        )));
    }
    Ok(Assignment::new(
        assignment.values()[..map.original_variables]
            .iter()
            .map(|&c| map.first_coordinate(c))
            .collect(),
    ))
}

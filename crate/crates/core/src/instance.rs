//! Instances, relations, constraint languages and assignments.
//!
//! Values are the integers `0..domain.size()`. Relations keep their tuple list
//! sorted and duplicate-free, plus a dense membership table indexed by the
//! mixed-radix code of a tuple (first coordinate most significant).

use std::cmp::Ordering;
use std::fmt;

use crate::algebra::OperationTable;
use crate::error::{Error, Result};

/// Largest dense membership table a relation may allocate.
pub const MEMBERSHIP_CAP: usize = 1 << 24;

/// Default cap on `|D|^|V|` for exhaustive search.
pub const BRUTE_FORCE_CAP: f64 = 1e7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Domain(usize);

impl Domain {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::Parse("domain size must be at least 1".into()));
        }
        Ok(Domain(size))
    }

    pub fn size(self) -> usize {
        self.0
    }

    pub fn values(self) -> std::ops::Range<usize> {
        0..self.0
    }

    /// `size^arity`, or `None` on overflow.
    pub fn power(self, arity: usize) -> Option<usize> {
        let mut acc: usize = 1;
        for _ in 0..arity {
            acc = acc.checked_mul(self.0)?;
        }
        Some(acc)
    }

    /// Mixed-radix code of a tuple, first coordinate most significant.
    pub fn encode(self, tuple: &[usize]) -> usize {
        tuple.iter().fold(0, |acc, &v| acc * self.0 + v)
    }

    pub fn decode(self, mut code: usize, arity: usize) -> Vec<usize> {
        let mut out = vec![0; arity];
        for slot in out.iter_mut().rev() {
            *slot = code % self.0;
            code /= self.0;
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct Relation {
    arity: usize,
    domain: Domain,
    tuples: Vec<Vec<usize>>,
    member: Vec<bool>,
}

impl PartialEq for Relation {
    fn eq(&self, other: &Self) -> bool {
        self.arity == other.arity && self.domain == other.domain && self.tuples == other.tuples
    }
}

impl Eq for Relation {}

impl Relation {
    pub fn new<I>(domain: Domain, arity: usize, tuples: I) -> Result<Self>
    where
        I: IntoIterator<Item = Vec<usize>>,
    {
        if arity == 0 {
            return Err(Error::InvalidRelation("arity must be positive".into()));
        }
        let size = domain
            .power(arity)
            .filter(|&s| s <= MEMBERSHIP_CAP)
            .ok_or(Error::CapExceeded {
                what: "relation table",
                size: (domain.size() as f64).powi(arity as i32),
                cap: MEMBERSHIP_CAP as f64,
            })?;
        let mut member = vec![false; size];
        for t in tuples {
            if t.len() != arity {
                return Err(Error::InvalidRelation(format!(
                    "tuple {t:?} has length {}, expected {arity}",
                    t.len()
                )));
            }
            if let Some(&v) = t.iter().find(|&&v| v >= domain.size()) {
                return Err(Error::InvalidRelation(format!(
                    "value {v} out of range for domain of size {}",
                    domain.size()
                )));
            }
            member[domain.encode(&t)] = true;
        }
        Ok(Self::from_membership(domain, arity, member))
    }

    /// Builds a relation from a dense membership table of length `|D|^arity`.
    pub fn from_membership(domain: Domain, arity: usize, member: Vec<bool>) -> Self {
        debug_assert_eq!(Some(member.len()), domain.power(arity));
        let tuples = member
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(code, _)| domain.decode(code, arity))
            .collect();
        Relation {
            arity,
            domain,
            tuples,
            member,
        }
    }

    pub fn full(domain: Domain, arity: usize) -> Result<Self> {
        let size = domain.power(arity).ok_or(Error::CapExceeded {
            what: "relation table",
            size: f64::INFINITY,
            cap: MEMBERSHIP_CAP as f64,
        })?;
        if size > MEMBERSHIP_CAP {
            return Err(Error::CapExceeded {
                what: "relation table",
                size: size as f64,
                cap: MEMBERSHIP_CAP as f64,
            });
        }
        Ok(Self::from_membership(domain, arity, vec![true; size]))
    }

    pub fn singleton(domain: Domain, value: usize) -> Self {
        let mut member = vec![false; domain.size()];
        member[value] = true;
        Self::from_membership(domain, 1, member)
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn tuples(&self) -> &[Vec<usize>] {
        &self.tuples
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn contains(&self, tuple: &[usize]) -> bool {
        tuple.len() == self.arity
            && tuple.iter().all(|&v| v < self.domain.size())
            && self.member[self.domain.encode(tuple)]
    }

    pub fn contains_code(&self, code: usize) -> bool {
        self.member[code]
    }

    pub fn membership(&self) -> &[bool] {
        &self.member
    }

    /// The unary relation `{a}` if this relation is exactly that.
    pub fn as_singleton(&self) -> Option<usize> {
        (self.arity == 1 && self.tuples.len() == 1).then(|| self.tuples[0][0])
    }

    /// Image of the relation under a unary map, over a new domain.
    pub fn map_values(&self, target: Domain, map: impl Fn(usize) -> usize) -> Result<Self> {
        Relation::new(
            target,
            self.arity,
            self.tuples.iter().map(|t| t.iter().map(|&v| map(v)).collect()),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint {
    pub scope: Vec<usize>,
    pub relation: Relation,
}

impl Constraint {
    pub fn new(scope: Vec<usize>, relation: Relation) -> Self {
        Constraint { scope, relation }
    }

    pub fn has_repeated_variable(&self) -> bool {
        self.scope.iter().enumerate().any(|(i, v)| self.scope[..i].contains(v))
    }

    pub fn is_satisfied_by(&self, values: &[usize]) -> bool {
        let code = self
            .scope
            .iter()
            .fold(0, |acc, &x| acc * self.relation.domain().size() + values[x]);
        self.relation.contains_code(code)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    num_variables: usize,
    domain: Domain,
    constraints: Vec<Constraint>,
}

impl Instance {
    /// Validates every constraint; errors name the offending constraint index.
    pub fn new(num_variables: usize, domain: Domain, constraints: Vec<Constraint>) -> Result<Self> {
        for (index, c) in constraints.iter().enumerate() {
            if c.relation.domain() != domain {
                return Err(Error::InvalidConstraint {
                    index,
                    reason: format!(
                        "relation domain {} differs from instance domain {}",
                        c.relation.domain().size(),
                        domain.size()
                    ),
                });
            }
            if c.scope.len() != c.relation.arity() {
                return Err(Error::InvalidConstraint {
                    index,
                    reason: format!(
                        "scope length {} does not match relation arity {}",
                        c.scope.len(),
                        c.relation.arity()
                    ),
                });
            }
            if let Some(&x) = c.scope.iter().find(|&&x| x >= num_variables) {
                return Err(Error::InvalidConstraint {
                    index,
                    reason: format!("variable out of range: {x} >= {num_variables}"),
                });
            }
        }
        Ok(Instance {
            num_variables,
            domain,
            constraints,
        })
    }

    pub fn num_variables(&self) -> usize {
        self.num_variables
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// An instance with no constraints has no defined value.
    pub fn is_degenerate(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn max_arity(&self) -> usize {
        self.constraints.iter().map(|c| c.scope.len()).max().unwrap_or(0)
    }

    /// Errors unless every constraint is unary or binary over distinct variables.
    pub fn require_at_most_binary(&self) -> Result<()> {
        for (index, c) in self.constraints.iter().enumerate() {
            if c.scope.len() > 2 {
                return Err(Error::UnsupportedArity {
                    index,
                    arity: c.scope.len(),
                });
            }
            if c.has_repeated_variable() {
                return Err(Error::RepeatedVariable { index });
            }
        }
        Ok(())
    }

    pub fn count_satisfied(&self, assignment: &Assignment) -> usize {
        self.constraints
            .iter()
            .filter(|c| c.is_satisfied_by(assignment.values()))
            .count()
    }

    pub fn with_constraints(&self, constraints: Vec<Constraint>) -> Result<Self> {
        Instance::new(self.num_variables, self.domain, constraints)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment(Vec<usize>);

impl Assignment {
    pub fn new(values: Vec<usize>) -> Self {
        Assignment(values)
    }

    pub fn values(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_values(self) -> Vec<usize> {
        self.0
    }

    pub fn check_against(&self, instance: &Instance) -> Result<()> {
        if self.0.len() != instance.num_variables() {
            return Err(Error::InvalidAssignment(format!(
                "{} values for {} variables",
                self.0.len(),
                instance.num_variables()
            )));
        }
        if let Some(&v) = self.0.iter().find(|&&v| v >= instance.domain().size()) {
            return Err(Error::InvalidAssignment(format!(
                "value {v} outside domain of size {}",
                instance.domain().size()
            )));
        }
        Ok(())
    }
}

/// An exact fraction `satisfied / total`. Compares by value, so `2/4 == 1/2`.
#[derive(Clone, Copy, Debug)]
pub struct Fraction {
    pub numerator: usize,
    pub denominator: usize,
}

impl Fraction {
    pub fn new(numerator: usize, denominator: usize) -> Self {
        assert!(denominator > 0, "fraction with zero denominator");
        Fraction { numerator, denominator }
    }

    pub fn as_f64(self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }

    pub fn is_one(self) -> bool {
        self.numerator == self.denominator
    }
}

impl PartialEq for Fraction {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Fraction {}

impl PartialOrd for Fraction {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Fraction {
    fn cmp(&self, other: &Self) -> Ordering {
        let lhs = self.numerator as u128 * other.denominator as u128;
        let rhs = other.numerator as u128 * self.denominator as u128;
        lhs.cmp(&rhs)
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator)
    }
}

/// Fraction of constraints satisfied by `assignment`.
pub fn value(instance: &Instance, assignment: &Assignment) -> Result<Fraction> {
    if instance.is_degenerate() {
        return Err(Error::DegenerateInstance);
    }
    assignment.check_against(instance)?;
    Ok(Fraction::new(
        instance.count_satisfied(assignment),
        instance.num_constraints(),
    ))
}

/// Exhaustive maximum; ties go to the lexicographically smallest assignment.
pub fn brute_force_opt(instance: &Instance) -> Result<(Assignment, Fraction)> {
    brute_force_opt_with_cap(instance, BRUTE_FORCE_CAP)
}

pub fn brute_force_opt_with_cap(instance: &Instance, cap: f64) -> Result<(Assignment, Fraction)> {
    if instance.is_degenerate() {
        return Err(Error::DegenerateInstance);
    }
    let n = instance.num_variables();
    let d = instance.domain().size();
    let size = (d as f64).powi(n as i32);
    if size > cap {
        return Err(Error::CapExceeded {
            what: "exhaustive search space |D|^|V|",
            size,
            cap,
        });
    }
    let m = instance.num_constraints();
    let mut current = vec![0usize; n];
    let mut best = current.clone();
    let mut best_count = instance.count_satisfied(&Assignment(current.clone()));
    // Odometer in lexicographic order, last variable fastest.
    loop {
        if best_count == m {
            break;
        }
        let mut pos = n;
        loop {
            if pos == 0 {
                return Ok((Assignment(best), Fraction::new(best_count, m)));
            }
            pos -= 1;
            current[pos] += 1;
            if current[pos] < d {
                break;
            }
            current[pos] = 0;
        }
        let count = instance
            .constraints()
            .iter()
            .filter(|c| c.is_satisfied_by(&current))
            .count();
        if count > best_count {
            best_count = count;
            best.clone_from(&current);
        }
    }
    Ok((Assignment(best), Fraction::new(best_count, m)))
}

/// Bounded-width witness: ternary `f1` and 4-ary `f2`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub f1: OperationTable,
    pub f2: OperationTable,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstraintLanguage {
    domain: Domain,
    relations: Vec<(String, Relation)>,
    witness: Option<Witness>,
}

impl ConstraintLanguage {
    pub fn new(domain: Domain, relations: Vec<(String, Relation)>) -> Result<Self> {
        for (name, r) in &relations {
            if r.domain() != domain {
                return Err(Error::InvalidRelation(format!(
                    "relation {name} is over a domain of size {}, language domain is {}",
                    r.domain().size(),
                    domain.size()
                )));
            }
        }
        Ok(ConstraintLanguage {
            domain,
            relations,
            witness: None,
        })
    }

    pub fn with_witness(mut self, witness: Witness) -> Result<Self> {
        if witness.f1.arity() != 3 {
            return Err(Error::ArityMismatch {
                expected: 3,
                found: witness.f1.arity(),
            });
        }
        if witness.f2.arity() != 4 {
            return Err(Error::ArityMismatch {
                expected: 4,
                found: witness.f2.arity(),
            });
        }
        for f in [&witness.f1, &witness.f2] {
            if f.domain() != self.domain {
                return Err(Error::DomainMismatch(f.domain().size(), self.domain.size()));
            }
        }
        self.witness = Some(witness);
        Ok(self)
    }

    pub fn without_witness(mut self) -> Self {
        self.witness = None;
        self
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn relations(&self) -> &[(String, Relation)] {
        &self.relations
    }

    pub fn relation(&self, name: &str) -> Option<&Relation> {
        self.relations.iter().find(|(n, _)| n == name).map(|(_, r)| r)
    }

    pub fn witness(&self) -> Option<&Witness> {
        self.witness.as_ref()
    }

    pub fn max_arity(&self) -> usize {
        self.relations.iter().map(|(_, r)| r.arity()).max().unwrap_or(0)
    }

    /// True when `{a}` is a relation of the language for every domain element.
    pub fn is_singleton_expanded(&self) -> bool {
        self.domain
            .values()
            .all(|a| self.relations.iter().any(|(_, r)| r.as_singleton() == Some(a)))
    }

    pub(crate) fn push_relation(&mut self, name: String, relation: Relation) {
        self.relations.push((name, relation));
    }
}

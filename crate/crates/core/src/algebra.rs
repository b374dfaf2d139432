//! Finite operations, polymorphism checks and the bounded-width witness.

use crate::error::{Error, Result};
use crate::instance::{ConstraintLanguage, Domain, Relation, Witness};
use crate::prague::PragueInstance;

/// Default cap on `|D|^|D|` for the unary-polymorphism scan of [`core_reduce`].
pub const CORE_CAP: f64 = 1e6;

/// Largest table an operation may allocate.
pub const TABLE_CAP: usize = 1 << 24;

/// An operation `D^arity -> D` stored row-major over mixed-radix argument codes
/// (first argument most significant).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct OperationTable {
    arity: usize,
    domain: Domain,
    table: Vec<usize>,
}

impl OperationTable {
    pub fn new(domain: Domain, arity: usize, table: Vec<usize>) -> Result<Self> {
        if arity == 0 {
            return Err(Error::InvalidWitness("operation arity must be positive".into()));
        }
        let expected = domain
            .power(arity)
            .filter(|&s| s <= TABLE_CAP)
            .ok_or(Error::CapExceeded {
                what: "operation table",
                size: (domain.size() as f64).powi(arity as i32),
                cap: TABLE_CAP as f64,
            })?;
        if table.len() != expected {
            return Err(Error::InvalidWitness(format!(
                "table of a {arity}-ary operation on {} values needs {expected} entries, got {}",
                domain.size(),
                table.len()
            )));
        }
        if let Some(&v) = table.iter().find(|&&v| v >= domain.size()) {
            return Err(Error::InvalidWitness(format!("output {v} outside the domain")));
        }
        Ok(OperationTable { arity, domain, table })
    }

    pub fn from_fn(domain: Domain, arity: usize, f: impl Fn(&[usize]) -> usize) -> Result<Self> {
        let size = domain.power(arity).ok_or(Error::CapExceeded {
            what: "operation table",
            size: f64::INFINITY,
            cap: TABLE_CAP as f64,
        })?;
        if size > TABLE_CAP {
            return Err(Error::CapExceeded {
                what: "operation table",
                size: size as f64,
                cap: TABLE_CAP as f64,
            });
        }
        let table = (0..size).map(|code| f(&domain.decode(code, arity))).collect();
        Self::new(domain, arity, table)
    }

    pub fn identity(domain: Domain) -> Self {
        OperationTable {
            arity: 1,
            domain,
            table: domain.values().collect(),
        }
    }

    pub fn projection(domain: Domain, arity: usize, index: usize) -> Result<Self> {
        Self::from_fn(domain, arity, |args| args[index])
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn table(&self) -> &[usize] {
        &self.table
    }

    pub fn apply(&self, args: &[usize]) -> usize {
        debug_assert_eq!(args.len(), self.arity);
        self.table[self.domain.encode(args)]
    }

    pub fn apply_code(&self, code: usize) -> usize {
        self.table[code]
    }
}

/// True iff applying `f` coordinate-wise to any `arity(f)` tuples of `r` lands in `r`.
pub fn is_compatible(f: &OperationTable, r: &Relation) -> Result<bool> {
    if f.domain() != r.domain() {
        return Err(Error::DomainMismatch(f.domain().size(), r.domain().size()));
    }
    let tuples = r.tuples();
    if tuples.is_empty() {
        return Ok(true);
    }
    let k = f.arity();
    let mut idx = vec![0usize; k];
    let mut args = vec![0usize; k];
    loop {
        let mut code = 0;
        for col in 0..r.arity() {
            for (slot, &i) in args.iter_mut().zip(&idx) {
                *slot = tuples[i][col];
            }
            code = code * r.domain().size() + f.apply(&args);
        }
        if !r.contains_code(code) {
            return Ok(false);
        }
        // odometer over tuple indices
        let mut pos = k;
        loop {
            if pos == 0 {
                return Ok(true);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < tuples.len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// First `(a, b)` at which the witness identities fail, if any.
pub fn identity_violation(f1: &OperationTable, f2: &OperationTable) -> Option<(usize, usize)> {
    let d = f1.domain();
    for a in d.values() {
        if f1.apply(&[a, a, a]) != a {
            return Some((a, a));
        }
        for b in d.values() {
            let v = f1.apply(&[a, a, b]);
            let others = [
                f1.apply(&[a, b, a]),
                f1.apply(&[b, a, a]),
                f2.apply(&[a, a, a, b]),
                f2.apply(&[a, a, b, a]),
                f2.apply(&[a, b, a, a]),
                f2.apply(&[b, a, a, a]),
            ];
            if others.iter().any(|&o| o != v) {
                return Some((a, b));
            }
        }
    }
    None
}

/// Checks the bounded-width witness identities and compatibility with every relation.
pub fn verify_bw_witness(f1: &OperationTable, f2: &OperationTable, language: &ConstraintLanguage) -> Result<bool> {
    if f1.arity() != 3 {
        return Err(Error::ArityMismatch {
            expected: 3,
            found: f1.arity(),
        });
    }
    if f2.arity() != 4 {
        return Err(Error::ArityMismatch {
            expected: 4,
            found: f2.arity(),
        });
    }
    for f in [f1, f2] {
        if f.domain() != language.domain() {
            return Err(Error::DomainMismatch(f.domain().size(), language.domain().size()));
        }
    }
    if identity_violation(f1, f2).is_some() {
        return Ok(false);
    }
    for (_, r) in language.relations() {
        if !is_compatible(f1, r)? || !is_compatible(f2, r)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Verifies the witness stored in the language; errors if it is absent or rejected.
pub fn require_witness(language: &ConstraintLanguage) -> Result<&Witness> {
    let w = language.witness().ok_or(Error::MissingWitness)?;
    if let Some((a, b)) = identity_violation(&w.f1, &w.f2) {
        return Err(Error::InvalidWitness(format!("identities fail at a={a}, b={b}")));
    }
    for (name, r) in language.relations() {
        if !is_compatible(&w.f1, r)? {
            return Err(Error::InvalidWitness(format!("f1 is not compatible with {name}")));
        }
        if !is_compatible(&w.f2, r)? {
            return Err(Error::InvalidWitness(format!("f2 is not compatible with {name}")));
        }
    }
    Ok(w)
}

/// Exhaustive witness search over Boolean tables: 2^8 candidates for `f1`, then
/// the 2^6 free entries of `f2` (those with two zeros and two ones).
pub fn search_bw_witness_boolean(language: &ConstraintLanguage) -> Result<Option<Witness>> {
    let d = language.domain();
    if d.size() != 2 {
        return Err(Error::SearchInfeasible(d.size()));
    }
    let compatible_all = |f: &OperationTable| -> Result<bool> {
        for (_, r) in language.relations() {
            if !is_compatible(f, r)? {
                return Ok(false);
            }
        }
        Ok(true)
    };
    for mask in 0u32..256 {
        let table: Vec<usize> = (0..8).map(|i| ((mask >> i) & 1) as usize).collect();
        let f1 = OperationTable::new(d, 3, table)?;
        let shared = |a: usize, b: usize| f1.apply(&[a, a, b]);
        let ok = d.values().all(|a| {
            f1.apply(&[a, a, a]) == a
                && d.values()
                    .all(|b| f1.apply(&[a, b, a]) == shared(a, b) && f1.apply(&[b, a, a]) == shared(a, b))
        });
        if !ok || !compatible_all(&f1)? {
            continue;
        }
        // entries of f2 pinned by the identities; free ones are the balanced inputs
        let mut base = vec![0usize; 16];
        let mut free = Vec::new();
        for (code, slot) in base.iter_mut().enumerate() {
            let args = d.decode(code, 4);
            let ones = args.iter().filter(|&&v| v == 1).count();
            match ones {
                0 => *slot = f1.apply(&[0, 0, 0]),
                4 => *slot = f1.apply(&[1, 1, 1]),
                1 => *slot = shared(0, 1),
                3 => *slot = shared(1, 0),
                _ => free.push(code),
            }
        }
        for choice in 0u32..(1 << free.len()) {
            let mut table = base.clone();
            for (j, &code) in free.iter().enumerate() {
                table[code] = ((choice >> j) & 1) as usize;
            }
            let f2 = OperationTable::new(d, 4, table)?;
            if compatible_all(&f2)? {
                return Ok(Some(Witness { f1, f2 }));
            }
        }
    }
    Ok(None)
}

fn compose(outer: &[usize], inner: &[usize]) -> Vec<usize> {
    inner.iter().map(|&v| outer[v]).collect()
}

/// Shrinks the domain along non-surjective unary polymorphisms until the
/// language is a core. The witness, if any, is carried along as `e∘f` on the image.
pub fn core_reduce(language: &ConstraintLanguage) -> Result<ConstraintLanguage> {
    core_reduce_with_cap(language, CORE_CAP)
}

pub fn core_reduce_with_cap(language: &ConstraintLanguage, cap: f64) -> Result<ConstraintLanguage> {
    let mut current = language.clone();
    loop {
        let d = current.domain().size();
        let size = (d as f64).powi(d as i32);
        if size > cap {
            return Err(Error::CapExceeded {
                what: "unary map enumeration",
                size,
                cap,
            });
        }
        let Some(e) = find_non_surjective_polymorphism(&current)? else {
            return Ok(current);
        };
        // an idempotent power retracts onto its image
        let mut g = e.clone();
        while compose(&g, &g) != g {
            g = compose(&g, &e);
        }
        current = retract(&current, &g)?;
    }
}

fn find_non_surjective_polymorphism(language: &ConstraintLanguage) -> Result<Option<Vec<usize>>> {
    let d = language.domain();
    let n = d.size();
    let total = d.power(n).unwrap_or(usize::MAX);
    for code in 0..total {
        let map = d.decode(code, n);
        let mut hit = vec![false; n];
        for &v in &map {
            hit[v] = true;
        }
        if hit.iter().all(|&h| h) {
            continue;
        }
        let op = OperationTable::new(d, 1, map.clone())?;
        let mut ok = true;
        for (_, r) in language.relations() {
            if !is_compatible(&op, r)? {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(Some(map));
        }
    }
    Ok(None)
}

fn retract(language: &ConstraintLanguage, g: &[usize]) -> Result<ConstraintLanguage> {
    let mut image: Vec<usize> = g.to_vec();
    image.sort_unstable();
    image.dedup();
    let target = Domain::new(image.len())?;
    let relabel = |v: usize| image.binary_search(&g[v]).expect("value in image");
    let relations = language
        .relations()
        .iter()
        .map(|(name, r)| Ok((name.clone(), r.map_values(target, relabel)?)))
        .collect::<Result<Vec<_>>>()?;
    let reduced = ConstraintLanguage::new(target, relations)?;
    let Some(w) = language.witness() else {
        return Ok(reduced);
    };
    let restrict = |f: &OperationTable| {
        OperationTable::from_fn(target, f.arity(), |args| {
            let old: Vec<usize> = args.iter().map(|&a| image[a]).collect();
            relabel(f.apply(&old))
        })
    };
    reduced.with_witness(Witness {
        f1: restrict(&w.f1)?,
        f2: restrict(&w.f2)?,
    })
}

/// Adds `{a}` for every domain element not already present as a singleton relation.
pub fn singleton_expand(language: &ConstraintLanguage) -> ConstraintLanguage {
    let mut out = language.clone();
    for a in language.domain().values() {
        let present = out.relations().iter().any(|(_, r)| r.as_singleton() == Some(a));
        if !present {
            out.push_relation(format!("const{a}"), Relation::singleton(language.domain(), a));
        }
    }
    out
}

/// Closes a set of pairs (dense `d × d` membership) under coordinate-wise application
/// of every op. Semi-naive: each round only combines tuples touching the newest pairs.
pub(crate) fn close_pairs(d: usize, pairs: &mut Vec<(usize, usize)>, ops: &[OperationTable]) {
    let mut member = vec![false; d * d];
    for &(a, b) in pairs.iter() {
        member[a * d + b] = true;
    }
    let mut frontier = 0;
    while frontier < pairs.len() {
        let end = pairs.len();
        for op in ops {
            let k = op.arity();
            let mut args_a = vec![0usize; k];
            let mut args_b = vec![0usize; k];
            // j = position of the first index drawn from the delta range
            for j in 0..k {
                let ranges: Vec<(usize, usize)> = (0..k)
                    .map(|p| match p.cmp(&j) {
                        std::cmp::Ordering::Less => (0, frontier),
                        std::cmp::Ordering::Equal => (frontier, end),
                        std::cmp::Ordering::Greater => (0, end),
                    })
                    .collect();
                if ranges.iter().any(|&(lo, hi)| lo >= hi) {
                    continue;
                }
                let mut idx: Vec<usize> = ranges.iter().map(|r| r.0).collect();
                'odo: loop {
                    for p in 0..k {
                        let (a, b) = pairs[idx[p]];
                        args_a[p] = a;
                        args_b[p] = b;
                    }
                    let a = op.apply(&args_a);
                    let b = op.apply(&args_b);
                    if !member[a * d + b] {
                        member[a * d + b] = true;
                        pairs.push((a, b));
                    }
                    let mut pos = k;
                    loop {
                        if pos == 0 {
                            break 'odo;
                        }
                        pos -= 1;
                        idx[pos] += 1;
                        if idx[pos] < ranges[pos].1 {
                            break;
                        }
                        idx[pos] = ranges[pos].0;
                    }
                }
            }
        }
        frontier = end;
    }
    pairs.sort_unstable();
}

/// Replaces every `P_{x,y}` by its closure under `ops`; reversed scopes stay transposes.
pub fn clone_closure(prague: &PragueInstance, ops: &[OperationTable]) -> Result<PragueInstance> {
    let d = prague.domain().size();
    for op in ops {
        if op.domain() != prague.domain() {
            return Err(Error::DomainMismatch(op.domain().size(), d));
        }
    }
    let mut out = prague.clone();
    for (x, y) in prague.scopes() {
        if x > y {
            continue;
        }
        let mut pairs = prague.pairs(x, y);
        close_pairs(d, &mut pairs, ops);
        out.set_relation(x, y, &pairs)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b() -> Domain {
        Domain::new(2).unwrap()
    }

    fn rel(tuples: &[&[usize]]) -> Relation {
        let arity = tuples.first().map_or(2, |t| t.len());
        Relation::new(b(), arity, tuples.iter().map(|t| t.to_vec())).unwrap()
    }

    fn min2() -> OperationTable {
        OperationTable::from_fn(b(), 2, |a| a[0].min(a[1])).unwrap()
    }

    #[test]
    fn min_preserves_implication_not_disequality() {
        assert!(is_compatible(&min2(), &rel(&[&[0, 0], &[0, 1], &[1, 1]])).unwrap());
        assert!(!is_compatible(&min2(), &rel(&[&[0, 1], &[1, 0]])).unwrap());
        let id = OperationTable::identity(b());
        assert!(is_compatible(&id, &rel(&[&[0, 1], &[1, 0]])).unwrap());
    }

    #[test]
    fn domain_mismatch_is_an_error() {
        let r = Relation::full(Domain::new(3).unwrap(), 1).unwrap();
        assert!(is_compatible(&min2(), &r).is_err());
    }

    #[test]
    fn table_rejects_bad_lengths() {
        assert!(OperationTable::new(b(), 2, vec![0, 1, 1]).is_err());
        assert!(OperationTable::new(b(), 1, vec![0, 2]).is_err());
    }

    #[test]
    fn projection_fails_identities() {
        let p = OperationTable::projection(b(), 3, 0).unwrap();
        let f2 = OperationTable::projection(b(), 4, 0).unwrap();
        let lang = ConstraintLanguage::new(b(), vec![]).unwrap();
        assert!(!verify_bw_witness(&p, &f2, &lang).unwrap());
        let f2_bad = OperationTable::projection(b(), 3, 0).unwrap();
        assert!(verify_bw_witness(&p, &f2_bad, &lang).is_err());
    }

    #[test]
    fn search_on_empty_language_succeeds() {
        let lang = ConstraintLanguage::new(b(), vec![]).unwrap();
        let w = search_bw_witness_boolean(&lang).unwrap().unwrap();
        assert!(verify_bw_witness(&w.f1, &w.f2, &lang).unwrap());
    }

    #[test]
    fn search_refuses_larger_domains() {
        let lang = ConstraintLanguage::new(Domain::new(3).unwrap(), vec![]).unwrap();
        assert!(matches!(
            search_bw_witness_boolean(&lang),
            Err(Error::SearchInfeasible(3))
        ));
    }

    #[test]
    fn closure_adds_min_of_swapped_pair() {
        let mut pairs = vec![(0, 1), (1, 0)];
        close_pairs(2, &mut pairs, &[min2()]);
        assert_eq!(pairs, vec![(0, 0), (0, 1), (1, 0)]);
    }

    #[test]
    fn singleton_expand_is_idempotent() {
        let lang = ConstraintLanguage::new(b(), vec![("imp".into(), rel(&[&[0, 0], &[0, 1], &[1, 1]]))]).unwrap();
        let once = singleton_expand(&lang);
        assert_eq!(once.relations().len(), 3);
        assert!(once.is_singleton_expanded());
        assert_eq!(singleton_expand(&once), once);
        let empty3 = ConstraintLanguage::new(Domain::new(3).unwrap(), vec![]).unwrap();
        assert_eq!(singleton_expand(&empty3).relations().len(), 3);
    }

    #[test]
    fn core_of_equality_is_one_point() {
        let d3 = Domain::new(3).unwrap();
        let eq = Relation::new(d3, 2, (0..3).map(|a| vec![a, a])).unwrap();
        let lang = ConstraintLanguage::new(d3, vec![("eq".into(), eq)]).unwrap();
        let core = core_reduce(&lang).unwrap();
        assert_eq!(core.domain().size(), 1);
        assert_eq!(core.relations()[0].1.len(), 1);
    }
}

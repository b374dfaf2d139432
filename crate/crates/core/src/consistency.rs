//! (k,l)-minimality and solution search for bounded-width instances.

use std::collections::HashMap;

use crate::algebra::require_witness;
use crate::error::{Error, Result};
use crate::instance::{Assignment, ConstraintLanguage, Domain, Instance, Relation};

/// Largest `l` accepted by [`kl_minimize`].
pub const MAX_L: usize = 3;
/// Guard on the number of added `l`-subset constraints.
pub const SUBSET_CAP: usize = 2_000_000;
/// Guard on the total number of stored tuples (allowed or not).
pub const TABLE_CAP: usize = 1 << 26;

/// Fixed shape of one stored constraint.
#[derive(Clone, Debug)]
struct Table {
    scope: Vec<usize>,
    /// Offset of this table in [`State::allowed`].
    offset: usize,
    size: usize,
    /// `(projection id, projected code of every tuple code)` for every subset of
    /// size ≤ k.
    projections: Vec<(usize, Vec<u32>)>,
}

/// Everything that does not change during propagation.
#[derive(Clone, Debug)]
struct Structure {
    tables: Vec<Table>,
    /// Per projection id: the sorted variable set and its offset in [`State::proj`].
    sets: Vec<Vec<usize>>,
    set_offset: Vec<usize>,
    /// `(table, index into its projections)` for each projection id.
    holders: Vec<Vec<(usize, usize)>>,
    /// Tables containing each variable.
    by_variable: Vec<Vec<usize>>,
    /// Projection id of `{x}`.
    unary_id: Vec<Option<usize>>,
}

/// The mutable part; cloning it is two flat copies.
#[derive(Clone, Debug)]
struct State {
    allowed: Vec<bool>,
    proj: Vec<bool>,
    trivial: bool,
}

/// The (k,l)-minimal refinement of an instance.
#[derive(Clone, Debug)]
pub struct MinimalInstance {
    base: Instance,
    k: usize,
    l: usize,
    structure: Structure,
    state: State,
}

fn subsets_of(len: usize, max: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for mask in 1u32..(1 << len) {
        if (mask.count_ones() as usize) <= max {
            out.push((0..len).filter(|&i| mask >> i & 1 == 1).collect());
        }
    }
    out
}

fn combinations(n: usize, r: usize, mut f: impl FnMut(&[usize])) {
    if r > n {
        return;
    }
    let mut idx: Vec<usize> = (0..r).collect();
    loop {
        f(&idx);
        let mut i = r;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - r {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..r {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn binomial(n: usize, r: usize) -> f64 {
    (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl Structure {
    fn set_len(&self, s: usize) -> usize {
        self.set_offset[s + 1] - self.set_offset[s]
    }
}

impl State {
    fn table<'a>(&'a self, st: &Structure, t: usize) -> &'a [bool] {
        let tb = &st.tables[t];
        &self.allowed[tb.offset..tb.offset + tb.size]
    }

    /// Removes tuples until all holders agree on every projection. `queue` holds
    /// tables whose tuples changed; a projection that shrinks re-filters its holders.
    fn propagate(&mut self, st: &Structure, mut queue: Vec<usize>) {
        let mut queued = vec![false; st.tables.len()];
        for &t in &queue {
            queued[t] = true;
        }
        let mut seen = Vec::new();
        while let Some(t) = queue.pop() {
            queued[t] = false;
            if self.trivial {
                return;
            }
            for (s, codes) in &st.tables[t].projections {
                let (off, len) = (st.set_offset[*s], st.set_len(*s));
                seen.clear();
                seen.resize(len, false);
                for (code, &a) in self.table(st, t).iter().enumerate() {
                    if a {
                        seen[codes[code] as usize] = true;
                    }
                }
                let current = &mut self.proj[off..off + len];
                let mut shrunk = false;
                let mut nonempty = false;
                for (c, &v) in current.iter_mut().zip(&seen) {
                    if *c && !v {
                        *c = false;
                        shrunk = true;
                    }
                    nonempty |= *c;
                }
                if !nonempty {
                    self.trivial = true;
                    return;
                }
                if !shrunk {
                    continue;
                }
                for &(h, pi) in &st.holders[*s] {
                    let tb = &st.tables[h];
                    let hcodes = &tb.projections[pi].1;
                    let meet = &self.proj[off..off + len];
                    let mut any = false;
                    let mut changed = false;
                    for (code, a) in self.allowed[tb.offset..tb.offset + tb.size].iter_mut().enumerate() {
                        if *a {
                            if meet[hcodes[code] as usize] {
                                any = true;
                            } else {
                                *a = false;
                                changed = true;
                            }
                        }
                    }
                    if !any {
                        self.trivial = true;
                        return;
                    }
                    if changed && !queued[h] {
                        queued[h] = true;
                        queue.push(h);
                    }
                }
            }
        }
    }

    /// Restricts every table containing `x` to tuples with `x = a`.
    fn fix(&mut self, st: &Structure, d: Domain, x: usize, a: usize) {
        let mut queue = Vec::new();
        for &t in &st.by_variable[x] {
            let tb = &st.tables[t];
            let arity = tb.scope.len();
            let pos = tb.scope.iter().position(|&v| v == x).expect("holder");
            // value at position `pos` of a tuple code (most significant first)
            let stride = d.power(arity - 1 - pos).expect("small");
            let mut any = false;
            for (code, v) in self.allowed[tb.offset..tb.offset + tb.size].iter_mut().enumerate() {
                if *v {
                    if code / stride % d.size() == a {
                        any = true;
                    } else {
                        *v = false;
                    }
                }
            }
            if !any {
                self.trivial = true;
                return;
            }
            queue.push(t);
        }
        self.propagate(st, queue);
    }
}

/// Adds full constraints over uncovered `l`-subsets and removes tuples until all
/// constraints agree on their projections to every set of at most `k` variables.
/// Constraints of arity above `l` are kept as they are.
pub fn kl_minimize(instance: &Instance, k: usize, l: usize) -> Result<MinimalInstance> {
    if k == 0 || k > l || l > MAX_L {
        return Err(Error::Config(format!("need 1 <= k <= l <= {MAX_L}, got k={k}, l={l}")));
    }
    let n = instance.num_variables();
    let d = instance.domain();
    let width = l.min(n);
    let added = binomial(n, width);
    if added > SUBSET_CAP as f64 {
        return Err(Error::CapExceeded {
            what: "l-subset constraints",
            size: added,
            cap: SUBSET_CAP as f64,
        });
    }
    let mut tables: Vec<(Vec<usize>, Vec<bool>)> = Vec::new();
    let mut total = 0usize;
    for c in instance.constraints() {
        // collapse repeated variables into a distinct scope
        let mut scope: Vec<usize> = Vec::new();
        for &v in &c.scope {
            if !scope.contains(&v) {
                scope.push(v);
            }
        }
        let size = d.power(scope.len()).ok_or(Error::CapExceeded {
            what: "consistency table",
            size: f64::INFINITY,
            cap: TABLE_CAP as f64,
        })?;
        total += size;
        if total > TABLE_CAP {
            return Err(Error::CapExceeded {
                what: "consistency tables",
                size: total as f64,
                cap: TABLE_CAP as f64,
            });
        }
        let mut allowed = vec![false; size];
        for t in c.relation.tuples() {
            let mut vals = vec![usize::MAX; scope.len()];
            let mut consistent = true;
            for (&v, &val) in c.scope.iter().zip(t) {
                let p = scope.iter().position(|&s| s == v).expect("in scope");
                if vals[p] != usize::MAX && vals[p] != val {
                    consistent = false;
                }
                vals[p] = val;
            }
            if consistent {
                allowed[d.encode(&vals)] = true;
            }
        }
        tables.push((scope, allowed));
    }
    if width > 0 {
        let mut covered: std::collections::HashSet<Vec<usize>> = std::collections::HashSet::new();
        for (scope, _) in &tables {
            let mut s = scope.clone();
            s.sort_unstable();
            for sub in subsets_of(s.len(), width) {
                if sub.len() == width {
                    covered.insert(sub.iter().map(|&i| s[i]).collect());
                }
            }
        }
        let size = d.power(width).expect("small width");
        let mut err = None;
        combinations(n, width, |idx| {
            if !covered.contains(idx) {
                total += size;
                if total > TABLE_CAP {
                    err = Some(total);
                    return;
                }
                tables.push((idx.to_vec(), vec![true; size]));
            }
        });
        if let Some(t) = err {
            return Err(Error::CapExceeded {
                what: "consistency tables",
                size: t as f64,
                cap: TABLE_CAP as f64,
            });
        }
    }

    let mut ids: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut sets: Vec<Vec<usize>> = Vec::new();
    let mut holders: Vec<Vec<(usize, usize)>> = Vec::new();
    let mut by_variable = vec![Vec::new(); n];
    let mut built = Vec::with_capacity(tables.len());
    let mut flat = Vec::with_capacity(total);
    for (t, (scope, allowed)) in tables.into_iter().enumerate() {
        let arity = scope.len();
        let size = allowed.len();
        let decoded: Vec<Vec<usize>> = (0..size).map(|c| d.decode(c, arity)).collect();
        let mut projections = Vec::new();
        for positions in subsets_of(arity, k) {
            let mut pairs: Vec<(usize, usize)> = positions.iter().map(|&p| (scope[p], p)).collect();
            pairs.sort_unstable();
            let vars: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let positions: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let id = *ids.entry(vars.clone()).or_insert_with(|| {
                sets.push(vars);
                holders.push(Vec::new());
                sets.len() - 1
            });
            holders[id].push((t, projections.len()));
            let codes = decoded
                .iter()
                .map(|tuple| positions.iter().fold(0, |acc, &q| acc * d.size() + tuple[q]) as u32)
                .collect();
            projections.push((id, codes));
        }
        for &v in &scope {
            by_variable[v].push(t);
        }
        built.push(Table {
            scope,
            offset: flat.len(),
            size,
            projections,
        });
        flat.extend(allowed);
    }
    let mut set_offset = Vec::with_capacity(sets.len() + 1);
    let mut acc = 0;
    for set in &sets {
        set_offset.push(acc);
        acc += d.power(set.len()).expect("small");
    }
    set_offset.push(acc);
    let mut unary_id = vec![None; n];
    for (id, set) in sets.iter().enumerate() {
        if let [x] = set[..] {
            unary_id[x] = Some(id);
        }
    }
    let structure = Structure {
        tables: built,
        sets,
        set_offset,
        holders,
        by_variable,
        unary_id,
    };
    let trivial = structure
        .tables
        .iter()
        .any(|t| !flat[t.offset..t.offset + t.size].iter().any(|&a| a));
    let mut state = State {
        allowed: flat,
        proj: vec![true; acc],
        trivial,
    };
    let all: Vec<usize> = (0..structure.tables.len()).rev().collect();
    state.propagate(&structure, all);
    Ok(MinimalInstance {
        base: instance.clone(),
        k,
        l,
        structure,
        state,
    })
}

impl MinimalInstance {
    pub fn base(&self) -> &Instance {
        &self.base
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn l(&self) -> usize {
        self.l
    }

    /// True iff some constraint relation is empty.
    pub fn is_trivial(&self) -> bool {
        self.state.trivial
    }

    /// An instance without variables is never trivial; this flags that case.
    pub fn has_no_variables(&self) -> bool {
        self.base.num_variables() == 0
    }

    /// `P_S` for a set of at most `k` distinct variables (given in any order; the
    /// relation is over the variables sorted ascending).
    pub fn projection(&self, vars: &[usize]) -> Option<Relation> {
        let mut key = vars.to_vec();
        key.sort_unstable();
        let st = &self.structure;
        let id = st.sets.iter().position(|s| *s == key)?;
        let d = self.base.domain();
        let range = st.set_offset[id]..st.set_offset[id + 1];
        let member = if self.state.trivial {
            vec![false; range.len()]
        } else {
            self.state.proj[range].to_vec()
        };
        Some(Relation::from_membership(d, key.len(), member))
    }

    /// `P_x` as a sorted value list.
    pub fn unary(&self, x: usize) -> Vec<usize> {
        self.projection(&[x])
            .map(|r| r.tuples().iter().map(|t| t[0]).collect())
            .unwrap_or_default()
    }

    /// Every stored constraint, including added full ones, after propagation.
    pub fn constraints(&self) -> Vec<(Vec<usize>, Relation)> {
        let d = self.base.domain();
        self.structure
            .tables
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let allowed = if self.state.trivial {
                    vec![false; t.size]
                } else {
                    self.state.table(&self.structure, i).to_vec()
                };
                (t.scope.clone(), Relation::from_membership(d, t.scope.len(), allowed))
            })
            .collect()
    }
}

pub fn is_trivial(minimal: &MinimalInstance) -> bool {
    minimal.is_trivial()
}

/// Search with (2,3)-minimality: fix variables in index order to the smallest value
/// that keeps the instance nontrivial. The language must carry a verified witness
/// and contain every singleton relation.
pub fn solve_bounded_width(instance: &Instance, language: &ConstraintLanguage) -> Result<Option<Assignment>> {
    require_witness(language)?;
    if !language.is_singleton_expanded() {
        return Err(Error::NotSingletonExpanded);
    }
    if language.domain() != instance.domain() {
        return Err(Error::DomainMismatch(
            language.domain().size(),
            instance.domain().size(),
        ));
    }
    search(instance)
}

/// The search of [`solve_bounded_width`] without the language preconditions; only
/// sound when the instance relations admit a bounded-width witness.
pub fn search(instance: &Instance) -> Result<Option<Assignment>> {
    let d = instance.domain();
    let minimal = kl_minimize(instance, 2, 3)?;
    if minimal.is_trivial() {
        return Ok(None);
    }
    let st = &minimal.structure;
    let mut state = minimal.state.clone();
    let n = instance.num_variables();
    let mut values = vec![0; n];
    for x in 0..n {
        let id = st.unary_id[x].expect("every variable is covered");
        let off = st.set_offset[id];
        let candidates: Vec<usize> = d.values().filter(|&a| state.proj[off + a]).collect();
        let mut chosen = None;
        for a in candidates {
            let mut trial = state.clone();
            trial.fix(st, d, x, a);
            if !trial.trivial {
                state = trial;
                chosen = Some(a);
                break;
            }
        }
        values[x] = chosen.ok_or(Error::WidthGuaranteeViolated { variable: x })?;
    }
    Ok(Some(Assignment::new(values)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Constraint;

    fn b() -> Domain {
        Domain::new(2).unwrap()
    }

    #[test]
    fn or_with_unit_propagates() {
        let or = Relation::new(b(), 2, vec![vec![0, 1], vec![1, 0], vec![1, 1]]).unwrap();
        let inst = Instance::new(
            2,
            b(),
            vec![
                Constraint::new(vec![0, 1], or),
                Constraint::new(vec![0], Relation::singleton(b(), 0)),
            ],
        )
        .unwrap();
        let m = kl_minimize(&inst, 1, 1).unwrap();
        assert_eq!(m.unary(1), vec![1]);
        assert!(!m.is_trivial());
    }

    #[test]
    fn contradiction_is_trivial() {
        let inst = Instance::new(
            1,
            b(),
            vec![
                Constraint::new(vec![0], Relation::singleton(b(), 0)),
                Constraint::new(vec![0], Relation::singleton(b(), 1)),
            ],
        )
        .unwrap();
        assert!(kl_minimize(&inst, 1, 1).unwrap().is_trivial());
        assert!(search(&inst).unwrap().is_none());
    }

    #[test]
    fn repeated_variables_are_collapsed() {
        // (x, x) ∈ {(0,1),(1,1)} forces x = 1
        let r = Relation::new(b(), 2, vec![vec![0, 1], vec![1, 1]]).unwrap();
        let inst = Instance::new(1, b(), vec![Constraint::new(vec![0, 0], r)]).unwrap();
        assert_eq!(kl_minimize(&inst, 1, 1).unwrap().unary(0), vec![1]);
    }

    #[test]
    fn empty_variable_set_is_flagged_not_trivial() {
        let inst = Instance::new(0, b(), vec![]).unwrap();
        let m = kl_minimize(&inst, 2, 3).unwrap();
        assert!(!m.is_trivial());
        assert!(m.has_no_variables());
    }

    #[test]
    fn bad_widths_are_rejected() {
        let inst = Instance::new(2, b(), vec![]).unwrap();
        assert!(kl_minimize(&inst, 3, 2).is_err());
        assert!(kl_minimize(&inst, 2, 4).is_err());
    }
}

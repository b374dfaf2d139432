//! Symmetric binary instances, pattern arithmetic and the weak Prague axioms.
//!
//! Value sets are bitmasks (`bit a` ⇔ `a ∈ A`), so the domain is limited to
//! [`MAX_DOMAIN`] values for storage and [`VERIFY_DOMAIN_CAP`] for the subset digraph.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::Domain;
use crate::sdp::SdpVectors;

pub type ValueSet = u32;

pub const MAX_DOMAIN: usize = 32;
/// The digraph has `2^|P_x|` vertices per variable.
pub const VERIFY_DOMAIN_CAP: usize = 12;
/// Default state cap for [`audit_p2star`].
pub const AUDIT_STATE_CAP: usize = 10_000_000;

pub fn set_of(values: &[usize]) -> ValueSet {
    values.iter().fold(0, |acc, &v| acc | (1 << v))
}

pub fn members(set: ValueSet) -> Vec<usize> {
    (0..32).filter(|&a| set >> a & 1 == 1).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PragueInstance {
    num_variables: usize,
    domain: Domain,
    variables: BTreeSet<usize>,
    /// `rows[a]` = set of `b` with `(a, b) ∈ P_{x,y}`.
    relations: BTreeMap<(usize, usize), Vec<ValueSet>>,
}

impl PragueInstance {
    pub fn new(num_variables: usize, domain: Domain) -> Result<Self> {
        if domain.size() > MAX_DOMAIN {
            return Err(Error::CapExceeded {
                what: "Prague domain",
                size: domain.size() as f64,
                cap: MAX_DOMAIN as f64,
            });
        }
        Ok(PragueInstance {
            num_variables,
            domain,
            variables: BTreeSet::new(),
            relations: BTreeMap::new(),
        })
    }

    /// Builds from one orientation per scope; reversals are added.
    pub fn from_pairs(
        num_variables: usize,
        domain: Domain,
        scopes: &[((usize, usize), Vec<(usize, usize)>)],
    ) -> Result<Self> {
        let mut p = Self::new(num_variables, domain)?;
        for ((x, y), pairs) in scopes {
            p.set_relation(*x, *y, pairs)?;
        }
        Ok(p)
    }

    fn check_scope(&self, x: usize, y: usize) -> Result<()> {
        if x == y {
            return Err(Error::MalformedPrague(format!("repeated variable in scope ({x}, {x})")));
        }
        if x >= self.num_variables || y >= self.num_variables {
            return Err(Error::MalformedPrague(format!(
                "scope ({x}, {y}) outside {} variables",
                self.num_variables
            )));
        }
        Ok(())
    }

    fn rows_from(&self, pairs: &[(usize, usize)]) -> Result<(Vec<ValueSet>, Vec<ValueSet>)> {
        let d = self.domain.size();
        let mut fwd = vec![0; d];
        let mut bwd = vec![0; d];
        for &(a, b) in pairs {
            if a >= d || b >= d {
                return Err(Error::MalformedPrague(format!("pair ({a}, {b}) outside the domain")));
            }
            fwd[a] |= 1 << b;
            bwd[b] |= 1 << a;
        }
        Ok((fwd, bwd))
    }

    /// Sets `P_{x,y}` and its transpose `P_{y,x}`.
    pub fn set_relation(&mut self, x: usize, y: usize, pairs: &[(usize, usize)]) -> Result<()> {
        self.check_scope(x, y)?;
        let (fwd, bwd) = self.rows_from(pairs)?;
        self.relations.insert((x, y), fwd);
        self.relations.insert((y, x), bwd);
        self.variables.insert(x);
        self.variables.insert(y);
        Ok(())
    }

    /// Sets one orientation only; used by parsers so asymmetric input can be reported.
    pub(crate) fn set_directed(&mut self, x: usize, y: usize, pairs: &[(usize, usize)]) -> Result<()> {
        self.check_scope(x, y)?;
        let (fwd, _) = self.rows_from(pairs)?;
        self.relations.insert((x, y), fwd);
        self.variables.insert(x);
        self.variables.insert(y);
        Ok(())
    }

    /// Declares a variable as part of the instance even if no scope mentions it.
    pub fn add_variable(&mut self, x: usize) -> Result<()> {
        if x >= self.num_variables {
            return Err(Error::MalformedPrague(format!("variable {x} out of range")));
        }
        self.variables.insert(x);
        Ok(())
    }

    pub fn num_variables(&self) -> usize {
        self.num_variables
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn variables(&self) -> impl Iterator<Item = usize> + '_ {
        self.variables.iter().copied()
    }

    /// All steps `(x, y)` in lexicographic order, both orientations included.
    pub fn scopes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.relations.keys().copied()
    }

    pub fn is_step(&self, x: usize, y: usize) -> bool {
        self.relations.contains_key(&(x, y))
    }

    pub fn rows(&self, x: usize, y: usize) -> Option<&[ValueSet]> {
        self.relations.get(&(x, y)).map(Vec::as_slice)
    }

    pub fn pairs(&self, x: usize, y: usize) -> Vec<(usize, usize)> {
        self.rows(x, y)
            .map(|rows| {
                rows.iter()
                    .enumerate()
                    .flat_map(|(a, &row)| members(row).into_iter().map(move |b| (a, b)))
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn contains(&self, x: usize, y: usize, a: usize, b: usize) -> bool {
        self.rows(x, y).is_some_and(|r| r[a] >> b & 1 == 1)
    }

    /// Steps leaving `x`, in order of target.
    pub fn steps_from(&self, x: usize) -> impl Iterator<Item = usize> + '_ {
        self.relations.range((x, 0)..(x + 1, 0)).map(|(&(_, y), _)| y)
    }

    /// `P_x`: the first-coordinate projection of the first scope from `x`.
    pub fn variable_set(&self, x: usize) -> ValueSet {
        self.relations
            .range((x, 0)..(x + 1, 0))
            .next()
            .map(|(_, rows)| projection(rows))
            .unwrap_or(0)
    }

    /// `A + (x, y)`.
    pub fn image(&self, set: ValueSet, x: usize, y: usize) -> Result<ValueSet> {
        let rows = self.rows(x, y).ok_or(Error::NotAStep(x, y))?;
        Ok(image_rows(rows, set))
    }

    pub fn is_trivial(&self) -> bool {
        self.relations.values().any(|rows| rows.iter().all(|&r| r == 0))
    }

    pub fn is_symmetric(&self) -> bool {
        self.relations.iter().all(|(&(x, y), rows)| {
            self.relations.get(&(y, x)).is_some_and(|back| {
                (0..rows.len()).all(|a| members(rows[a]).iter().all(|&b| back[b] >> a & 1 == 1))
                    && (0..back.len()).all(|b| members(back[b]).iter().all(|&a| rows[a] >> b & 1 == 1))
            })
        })
    }
}

fn projection(rows: &[ValueSet]) -> ValueSet {
    rows.iter()
        .enumerate()
        .filter(|(_, &r)| r != 0)
        .fold(0, |acc, (a, _)| acc | (1 << a))
}

fn image_rows(rows: &[ValueSet], set: ValueSet) -> ValueSet {
    let mut out = 0;
    let mut s = set;
    while s != 0 {
        let a = s.trailing_zeros() as usize;
        s &= s - 1;
        if a < rows.len() {
            out |= rows[a];
        }
    }
    out
}

/// A walk `(x_1, …, x_k)` through steps; validity is checked when it is applied.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct Pattern(Vec<usize>);

impl Pattern {
    pub fn new(variables: Vec<usize>) -> Result<Self> {
        if variables.is_empty() {
            return Err(Error::MalformedPrague("a pattern needs at least one variable".into()));
        }
        Ok(Pattern(variables))
    }

    pub fn variables(&self) -> &[usize] {
        &self.0
    }

    pub fn start(&self) -> usize {
        self.0[0]
    }

    pub fn end(&self) -> usize {
        *self.0.last().expect("nonempty pattern")
    }

    pub fn num_steps(&self) -> usize {
        self.0.len() - 1
    }

    /// `−p`.
    pub fn reversed(&self) -> Pattern {
        Pattern(self.0.iter().rev().copied().collect())
    }

    /// `p + q`; requires `q` to start where `p` ends.
    pub fn concat(&self, other: &Pattern) -> Result<Pattern> {
        if self.end() != other.start() {
            return Err(Error::MalformedPrague(format!(
                "cannot concatenate a pattern ending at {} with one starting at {}",
                self.end(),
                other.start()
            )));
        }
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0[1..]);
        Ok(Pattern(v))
    }

    /// `k·p` for a closed pattern; `0·p` is the single-variable pattern.
    pub fn repeat(&self, k: usize) -> Result<Pattern> {
        if self.start() != self.end() {
            return Err(Error::MalformedPrague("only closed patterns can be repeated".into()));
        }
        let mut v = vec![self.start()];
        for _ in 0..k {
            v.extend_from_slice(&self.0[1..]);
        }
        Ok(Pattern(v))
    }
}

/// `A + p`, stepwise.
pub fn add_pattern(prague: &PragueInstance, set: ValueSet, p: &Pattern) -> Result<ValueSet> {
    p.0.windows(2).try_fold(set, |acc, w| prague.image(acc, w[0], w[1]))
}

/// `A − p = A + (−p)`.
pub fn sub_pattern(prague: &PragueInstance, set: ValueSet, p: &Pattern) -> Result<ValueSet> {
    add_pattern(prague, set, &p.reversed())
}

/// `[A]_p`: the stable member of the sequence `A + kp` that contains `A`.
pub fn pattern_closure(prague: &PragueInstance, set: ValueSet, p: &Pattern) -> Result<ValueSet> {
    if p.start() != p.end() {
        return Err(Error::MalformedPrague(
            "pattern closure needs a pattern from x to x".into(),
        ));
    }
    let mut seen: Vec<ValueSet> = vec![set];
    loop {
        let next = add_pattern(prague, *seen.last().expect("nonempty"), p)?;
        if let Some(first) = seen.iter().position(|&s| s == next) {
            let cycle = &seen[first..];
            let stable = cycle
                .iter()
                .copied()
                .find(|&c| set & !c == 0 && add_pattern(prague, c, p).ok() == Some(c));
            return stable.ok_or_else(|| {
                Error::NotWeakPrague(format!(
                    "A + kp cycles through {:?} with period {}; no member is a fixpoint containing {:?}",
                    cycle.iter().map(|&c| members(c)).collect::<Vec<_>>(),
                    cycle.len(),
                    members(set)
                ))
            });
        }
        seen.push(next);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Axiom {
    P1,
    P2,
    P3,
}

/// Replayable certificate attached to a failing verdict.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PragueWitness {
    /// A declared variable is in no scope.
    UncoveredVariable { variable: usize },
    /// The projection of `P_{x,y}` differs from `P_x`.
    ProjectionMismatch {
        variable: usize,
        scope: (usize, usize),
        projection: Vec<usize>,
        expected: Vec<usize>,
    },
    /// A closed pattern with `A + p = A` but `A − p ≠ A`; `edge` is the one-way
    /// edge `(A', u) → (B', v)` of the digraph inside a strong component.
    OneWayEdge {
        variable: usize,
        set: Vec<usize>,
        pattern: Pattern,
        forward: Vec<usize>,
        backward: Vec<usize>,
        edge: ((Vec<usize>, usize), (Vec<usize>, usize)),
    },
    /// `A + p1 = A'` and `A' + p2 = A` with `A ≠ A'`.
    SplitComponent {
        variable: usize,
        set: Vec<usize>,
        other: Vec<usize>,
        first: Pattern,
        second: Pattern,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub status: &'static str,
    pub axiom: Option<Axiom>,
    pub witness: Option<PragueWitness>,
}

impl Verdict {
    fn pass() -> Self {
        Verdict {
            status: "pass",
            axiom: None,
            witness: None,
        }
    }

    fn fail(axiom: Axiom, witness: PragueWitness) -> Self {
        Verdict {
            status: "fail",
            axiom: Some(axiom),
            witness: Some(witness),
        }
    }

    pub fn passed(&self) -> bool {
        self.axiom.is_none()
    }
}

fn check_well_formed(prague: &PragueInstance) -> Result<()> {
    if !prague.is_symmetric() {
        let (x, y) = prague
            .scopes()
            .find(|&(x, y)| {
                prague.rows(y, x).is_none() || prague.pairs(x, y).iter().any(|&(a, b)| !prague.contains(y, x, b, a))
            })
            .unwrap_or((0, 0));
        return Err(Error::MalformedPrague(format!(
            "P_({y},{x}) is not the transpose of P_({x},{y})"
        )));
    }
    Ok(())
}

fn check_p1(prague: &PragueInstance) -> Option<PragueWitness> {
    for x in prague.variables() {
        let px = prague.variable_set(x);
        if prague.steps_from(x).next().is_none() {
            return Some(PragueWitness::UncoveredVariable { variable: x });
        }
        for y in prague.steps_from(x) {
            let proj = projection(prague.rows(x, y).expect("step"));
            if proj != px {
                return Some(PragueWitness::ProjectionMismatch {
                    variable: x,
                    scope: (x, y),
                    projection: members(proj),
                    expected: members(px),
                });
            }
        }
    }
    None
}

/// Only the P1 check, as a verdict.
pub fn verify_one_minimal(prague: &PragueInstance) -> Result<Verdict> {
    check_well_formed(prague)?;
    Ok(match check_p1(prague) {
        Some(w) => Verdict::fail(Axiom::P1, w),
        None => Verdict::pass(),
    })
}

struct SubsetDigraph {
    graph: DiGraph<(ValueSet, usize), ()>,
    index: HashMap<(ValueSet, usize), NodeIndex>,
    component: Vec<usize>,
}

impl SubsetDigraph {
    fn build(prague: &PragueInstance) -> Self {
        let mut graph = DiGraph::new();
        let mut index = HashMap::new();
        for x in prague.variables() {
            let px = prague.variable_set(x);
            // nonempty submasks in ascending order
            let mut sub: ValueSet = 0;
            loop {
                sub = sub.wrapping_sub(px) & px;
                if sub == 0 {
                    break;
                }
                index.insert((sub, x), graph.add_node((sub, x)));
            }
        }
        for node in graph.node_indices().collect::<Vec<_>>() {
            let (set, x) = graph[node];
            for y in prague.steps_from(x) {
                let b = image_rows(prague.rows(x, y).expect("step"), set);
                if let Some(&target) = index.get(&(b, y)) {
                    graph.add_edge(node, target, ());
                }
            }
        }
        let mut component = vec![0; graph.node_count()];
        for (c, members) in tarjan_scc(&graph).into_iter().enumerate() {
            for n in members {
                component[n.index()] = c;
            }
        }
        SubsetDigraph {
            graph,
            index,
            component,
        }
    }

    /// Shortest path between distinct nodes of one strong component.
    fn path(&self, prague: &PragueInstance, from: NodeIndex, to: NodeIndex) -> Vec<NodeIndex> {
        let comp = self.component[from.index()];
        let mut parent: HashMap<NodeIndex, NodeIndex> = HashMap::new();
        let mut queue = VecDeque::from([from]);
        'bfs: while let Some(u) = queue.pop_front() {
            let (set, x) = self.graph[u];
            for y in prague.steps_from(x) {
                let b = image_rows(prague.rows(x, y).expect("step"), set);
                let Some(&v) = self.index.get(&(b, y)) else { continue };
                if self.component[v.index()] != comp || v == from || parent.contains_key(&v) {
                    continue;
                }
                parent.insert(v, u);
                if v == to {
                    break 'bfs;
                }
                queue.push_back(v);
            }
        }
        let mut out = vec![to];
        let mut cur = to;
        while cur != from {
            cur = parent[&cur];
            out.push(cur);
        }
        out.reverse();
        out
    }
}

/// Checks (P1) and the strong-component characterizations of (P3) and (P2).
pub fn verify_weak_prague(prague: &PragueInstance) -> Result<Verdict> {
    check_well_formed(prague)?;
    if prague.domain().size() > VERIFY_DOMAIN_CAP {
        return Err(Error::CapExceeded {
            what: "subset digraph domain",
            size: prague.domain().size() as f64,
            cap: VERIFY_DOMAIN_CAP as f64,
        });
    }
    if let Some(w) = check_p1(prague) {
        return Ok(Verdict::fail(Axiom::P1, w));
    }
    let g = SubsetDigraph::build(prague);
    if let Some(w) = p2_violation(prague, &g)? {
        return Ok(Verdict::fail(Axiom::P2, w));
    }
    if let Some(w) = p3_violation(prague, &g) {
        return Ok(Verdict::fail(Axiom::P3, w));
    }
    Ok(Verdict::pass())
}

fn p2_violation(prague: &PragueInstance, g: &SubsetDigraph) -> Result<Option<PragueWitness>> {
    for u in g.graph.node_indices() {
        let (a, x) = g.graph[u];
        for y in prague.steps_from(x) {
            let b = prague.image(a, x, y)?;
            let Some(&v) = g.index.get(&(b, y)) else { continue };
            if g.component[u.index()] != g.component[v.index()] {
                continue;
            }
            if prague.image(b, y, x)? == a {
                continue;
            }
            // close the edge into a cycle u → v ⇝ u
            let mut cycle = g.path(prague, v, u);
            cycle.insert(0, u);
            cycle.pop();
            let edge = ((members(a), x), (members(b), y));
            let len = cycle.len();
            let mut order: Vec<usize> = (0..len).collect();
            // prefer the rotation starting at the smallest variable
            order.sort_by_key(|&i| (g.graph[cycle[i]].1, i));
            order.push(0);
            for (k, &start) in order.iter().enumerate() {
                let fallback = k == len;
                let vars: Vec<usize> = (0..=len).map(|k| g.graph[cycle[(start + k) % len]].1).collect();
                let p = Pattern::new(vars)?;
                let set = g.graph[cycle[start]].0;
                let forward = add_pattern(prague, set, &p)?;
                let backward = sub_pattern(prague, set, &p)?;
                if forward == set && (backward != set || fallback) {
                    return Ok(Some(PragueWitness::OneWayEdge {
                        variable: p.start(),
                        set: members(set),
                        pattern: p,
                        forward: members(forward),
                        backward: members(backward),
                        edge,
                    }));
                }
            }
        }
    }
    Ok(None)
}

fn p3_violation(prague: &PragueInstance, g: &SubsetDigraph) -> Option<PragueWitness> {
    let mut best: Option<(usize, ValueSet, ValueSet, NodeIndex, NodeIndex)> = None;
    let mut by_key: HashMap<(usize, usize), Vec<NodeIndex>> = HashMap::new();
    for n in g.graph.node_indices() {
        by_key
            .entry((g.component[n.index()], g.graph[n].1))
            .or_default()
            .push(n);
    }
    for nodes in by_key.values() {
        if nodes.len() < 2 {
            continue;
        }
        let mut sorted = nodes.clone();
        sorted.sort_by_key(|&n| g.graph[n].0);
        let (n1, n2) = (sorted[0], sorted[1]);
        let cand = (g.graph[n1].1, g.graph[n1].0, g.graph[n2].0, n1, n2);
        if best.is_none_or(|b| (cand.0, cand.1, cand.2) < (b.0, b.1, b.2)) {
            best = Some(cand);
        }
    }
    let (x, a, a2, n1, n2) = best?;
    let to_pattern = |path: Vec<NodeIndex>| Pattern(path.iter().map(|&n| g.graph[n].1).collect());
    Some(PragueWitness::SplitComponent {
        variable: x,
        set: members(a),
        other: members(a2),
        first: to_pattern(g.path(prague, n1, n2)),
        second: to_pattern(g.path(prague, n2, n1)),
    })
}

/// A violation of (P2*) found by [`audit_p2star`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct P2StarViolation {
    pub step: (usize, usize),
    pub set: Vec<usize>,
    /// The pattern `p` from `y` to `x` with `A + (x,y) + p = A`.
    pub pattern: Pattern,
    /// `A + (x, y, x)`, which differs from `A`.
    pub back: Vec<usize>,
}

/// Bounded-length search for (P2*) violations: every step `(x, y)`, every
/// nonempty `A ⊆ P_x`, every pattern from `y` to `x` with at most `max_len` steps.
pub fn audit_p2star(prague: &PragueInstance, max_len: usize) -> Result<Option<P2StarViolation>> {
    audit_p2star_with_cap(prague, max_len, AUDIT_STATE_CAP)
}

pub fn audit_p2star_with_cap(prague: &PragueInstance, max_len: usize, cap: usize) -> Result<Option<P2StarViolation>> {
    check_well_formed(prague)?;
    if let Some(w) = check_p1(prague) {
        return Err(Error::NotWeakPrague(format!("(P1) fails: {w:?}")));
    }
    let mut states = 0usize;
    let steps: Vec<(usize, usize)> = prague.scopes().collect();
    for (x, y) in steps {
        let px = prague.variable_set(x);
        let mut a: ValueSet = 0;
        loop {
            a = a.wrapping_sub(px) & px;
            if a == 0 {
                break;
            }
            let b = prague.image(a, x, y)?;
            let back = prague.image(b, y, x)?;
            if back == a {
                continue;
            }
            // BFS over (set, variable) reachable from (B, y) within max_len steps
            let mut parent: HashMap<(ValueSet, usize), (ValueSet, usize)> = HashMap::new();
            let mut depth: HashMap<(ValueSet, usize), usize> = HashMap::from([((b, y), 0)]);
            let mut queue = VecDeque::from([(b, y)]);
            let mut hit = None;
            while let Some(state) = queue.pop_front() {
                let d = depth[&state];
                if d >= max_len {
                    continue;
                }
                for z in prague.steps_from(state.1) {
                    let next = (prague.image(state.0, state.1, z)?, z);
                    if depth.contains_key(&next) {
                        continue;
                    }
                    states += 1;
                    if states > cap {
                        return Err(Error::CapExceeded {
                            what: "P2* audit states",
                            size: states as f64,
                            cap: cap as f64,
                        });
                    }
                    depth.insert(next, d + 1);
                    parent.insert(next, state);
                    if next == (a, x) {
                        hit = Some(next);
                        break;
                    }
                    queue.push_back(next);
                }
                if hit.is_some() {
                    break;
                }
            }
            if let Some(mut cur) = hit {
                let mut vars = vec![cur.1];
                while cur != (b, y) {
                    cur = parent[&cur];
                    vars.push(cur.1);
                }
                vars.reverse();
                return Ok(Some(P2StarViolation {
                    step: (x, y),
                    set: members(a),
                    pattern: Pattern(vars),
                    back: members(back),
                }));
            }
        }
    }
    Ok(None)
}

/// `(a, b) ∈ P_{x,y}` with no `c` such that `(a, c) ∈ P_{x,z}` and `(c, b) ∈ P_{z,y}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExtendFailure {
    pub scope: (usize, usize),
    pub via: usize,
    pub pair: (usize, usize),
}

/// All failures of (2,3)-extendability over triples whose three scopes exist.
/// Each unordered pair is reported once, in its `x < y` orientation.
pub fn check_23_extendability(prague: &PragueInstance) -> Vec<ExtendFailure> {
    let mut out = Vec::new();
    let steps: Vec<(usize, usize)> = prague.scopes().filter(|&(x, y)| x < y).collect();
    for (x, y) in steps {
        for z in prague.steps_from(x).collect::<Vec<_>>() {
            if z == y || !prague.is_step(z, y) {
                continue;
            }
            let xz = prague.rows(x, z).expect("step");
            let zy = prague.rows(z, y).expect("step");
            for (a, b) in prague.pairs(x, y) {
                let mid = xz[a];
                if image_rows(zy, mid) >> b & 1 == 0 {
                    out.push(ExtendFailure {
                        scope: (x, y),
                        via: z,
                        pair: (a, b),
                    });
                }
            }
        }
    }
    out
}

/// `P_{x,y} = {(a,b) : ⟨x_a, y_b⟩ > tau}` over all ordered pairs of distinct variables.
pub fn sdp_to_prague(vectors: &SdpVectors, tau: f64) -> Result<PragueInstance> {
    let n = vectors.num_variables();
    let d = vectors.domain();
    let mut p = PragueInstance::new(n, d)?;
    for x in 0..n {
        p.add_variable(x)?;
        for y in x + 1..n {
            let mut pairs = Vec::new();
            for a in d.values() {
                for b in d.values() {
                    if vectors.dot(x, a, y, b) > tau {
                        pairs.push((a, b));
                    }
                }
            }
            p.set_relation(x, y, &pairs)?;
        }
    }
    Ok(p)
}

//! Threshold / layer / hyperplane rounding of SDP vectors into a weak Prague
//! instance, its closure, and the final local-consistency solve.
//!
//! One trial with fixed `(r, s)` runs [`prune`] (Steps 2, 3, 5), then
//! [`hyperplane_phase`] (Steps 7, 8) and [`build_j`]. [`robust_round`] samples
//! `r`, `s` and the hyperplanes from a seeded generator; [`derandomized_round`]
//! tries every `r` and every `s` on a grid and selects hyperplanes greedily from a
//! seeded candidate pool by conditional expectations.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::algebra::{clone_closure, OperationTable};
use crate::consistency::search;
use crate::error::{Error, Result};
use crate::instance::{value, Assignment, Constraint, Instance, Relation};
use crate::io::prague_to_json;
use crate::prague::{verify_one_minimal, verify_weak_prague, PragueInstance, ValueSet, Verdict, VERIFY_DOMAIN_CAP};
use crate::sdp::{dot, sdp_objective, SdpVectors};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Randomized,
    Derandomized,
}

/// `γ div ψ`: the greatest integer `i` with `γ − iψ > 0` (`ψ > 0`).
pub fn div_strict(gamma: f64, psi: f64) -> i64 {
    let q = gamma / psi;
    let mut i = q.ceil() as i64 - 1;
    // guard against rounding in the quotient
    while gamma - (i + 1) as f64 * psi > 0.0 {
        i += 1;
    }
    while gamma - i as f64 * psi <= 0.0 {
        i -= 1;
    }
    i
}

/// Layer geometry for one choice of `(r, s)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Geometry {
    pub n: usize,
    pub r: usize,
    pub s: f64,
    pub u1: f64,
    pub u2: f64,
    /// `π` for randomized rounding, `4` for the derandomized variant.
    pub c: f64,
}

impl Geometry {
    pub fn block(&self, norm_sq: f64) -> i64 {
        div_strict(norm_sq - self.s, self.u2)
    }

    pub fn t(&self, norm_sq: f64) -> usize {
        let n = self.n as f64;
        let layer = ((self.block(norm_sq) + 2).max(0) as f64 * self.u2).sqrt().min(1.0);
        (self.c * n.log2() * n.powi(2 * self.r as i32) * layer).ceil() as usize
    }

    /// Same block and `‖w1 − w2‖² ≤ u1`.
    pub fn almost_same(&self, w1: &[f64], w2: &[f64]) -> bool {
        let diff: f64 = w1.iter().zip(w2).map(|(a, b)| (a - b) * (a - b)).sum();
        self.block(dot(w1, w1)) == self.block(dot(w2, w2)) && diff <= self.u1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundingParams {
    pub n: usize,
    pub r: usize,
    pub s: f64,
    pub u1: f64,
    pub u2: f64,
    pub seed: u64,
    pub mode: Mode,
    #[serde(skip)]
    pub hyperplanes: Vec<Vec<f64>>,
}

impl RoundingParams {
    pub fn new(n: usize, r: usize, s: f64, domain_size: usize, mode: Mode, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config(format!("level n = {n} must be at least 2")));
        }
        if r == 0 || r >= n {
            return Err(Error::Config(format!("r = {r} must lie in 1..{n}")));
        }
        let (u1, u2) = Self::widths(n, r, domain_size);
        if u2 <= 0.0 {
            return Err(Error::Config(format!(
                "level n = {n} is too small for |D| = {domain_size}: u2 = {u2:e} <= 0"
            )));
        }
        if !(0.0..=u2).contains(&s) {
            return Err(Error::Config(format!("s = {s} outside [0, {u2}]")));
        }
        Ok(RoundingParams {
            n,
            r,
            s,
            u1,
            u2,
            seed,
            mode,
            hyperplanes: Vec::new(),
        })
    }

    /// `(u1, u2)` for level `n`, threshold exponent `r`.
    /// `n ≥ 2` with `u2 > 0` (the sign of `u2` does not depend on `r`); `n ≤ |D|` is
    /// accepted with a report warning.
    pub fn check_level(n: usize, domain_size: usize) -> Result<()> {
        Self::new(n, 1, 0.0, domain_size, Mode::Randomized, 0).map(|_| ())
    }

    pub fn widths(n: usize, r: usize, domain_size: usize) -> (f64, f64) {
        let nf = n as f64;
        let u1 = 2.0 * (domain_size * domain_size) as f64 * nf.powi(-4 * r as i32 - 4);
        (u1, nf.powi(-4 * r as i32) - u1)
    }

    /// `n^(−4r)`.
    pub fn threshold(&self) -> f64 {
        (self.n as f64).powi(-4 * self.r as i32)
    }

    /// `n^(−4r−4)`.
    pub fn gap_low(&self) -> f64 {
        (self.n as f64).powi(-4 * self.r as i32 - 4)
    }

    pub fn geometry(&self) -> Geometry {
        Geometry {
            n: self.n,
            r: self.r,
            s: self.s,
            u1: self.u1,
            u2: self.u2,
            c: match self.mode {
                Mode::Randomized => PI,
                Mode::Derandomized => 4.0,
            },
        }
    }

    /// `⌈c·log₂ n·n^(2n)⌉`.
    pub fn nominal_hyperplanes(&self) -> usize {
        let n = self.n as f64;
        (self.geometry().c * n.log2() * n.powi(2 * self.n as i32)).ceil() as usize
    }
}

/// Level selection from the SDP value `v` and constraint count `m`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelChoice {
    pub n: usize,
    pub omega: f64,
    pub formula: Option<usize>,
    pub clamped: bool,
    /// `v ≥ 1 − n^(−4n)`.
    pub guarantee_met: bool,
    pub warning: Option<String>,
}

/// `ω = min(1/(1−v), m)`, `n = ⌊log₂ω / (4·log₂log₂ω)⌋`, clamped to `n ≥ |D|+1`
/// (and `n ≥ 2`).
pub fn choose_level(v: f64, m: usize, domain_size: usize) -> Result<LevelChoice> {
    if !(0.0..=1.0 + 1e-9).contains(&v) || m == 0 {
        return Err(Error::Config(format!(
            "choose_level needs 0 <= v <= 1 and m >= 1 (v = {v}, m = {m})"
        )));
    }
    let inv = if v >= 1.0 { f64::INFINITY } else { 1.0 / (1.0 - v) };
    let omega = inv.min(m as f64);
    let floor = (domain_size + 1).max(2);
    let formula = (omega > 4.0).then(|| {
        let l = omega.log2();
        (l / (4.0 * l.log2())).floor() as usize
    });
    let (n, clamped, warning) = match formula {
        Some(n) if n >= floor => (n, false, None),
        Some(n) => (
            floor,
            true,
            Some(format!("level formula gives n = {n} < {floor}; clamped to {floor}")),
        ),
        None => (
            floor,
            true,
            Some(format!("omega = {omega:.3} <= 4; clamped to n = {floor}")),
        ),
    };
    Ok(LevelChoice {
        n,
        omega,
        formula,
        clamped,
        guarantee_met: v >= 1.0 - (n as f64).powi(-4 * n as i32),
        warning,
    })
}

/// `n^(−4n−4) / 10`: the largest feasibility tolerance the pipeline accepts at level `n`.
pub fn required_eta(n: usize) -> f64 {
    (n as f64).powi(-4 * n as i32 - 4) / 10.0
}

pub fn check_tolerance_contract(n: usize, eta: f64) -> Result<()> {
    let required = required_eta(n);
    if eta > required {
        return Err(Error::ToleranceContract {
            level: n,
            required,
            configured: eta,
        });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct StepCounts {
    pub step2: usize,
    pub step3: usize,
    pub step5: usize,
    pub step7: usize,
    pub step8: usize,
}

impl StepCounts {
    pub fn total(&self) -> usize {
        self.step2 + self.step3 + self.step5 + self.step7 + self.step8
    }
}

/// Which constraints survive, with per-step removal counts.
#[derive(Clone, Debug, PartialEq)]
pub struct Retained {
    pub keep: Vec<bool>,
    pub removed: StepCounts,
}

impl Retained {
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.keep.iter().enumerate().filter(|(_, &k)| k).map(|(i, _)| i)
    }
}

fn validate(instance: &Instance, vectors: &SdpVectors) -> Result<()> {
    instance.require_at_most_binary()?;
    for (index, c) in instance.constraints().iter().enumerate() {
        if c.has_repeated_variable() {
            return Err(Error::RepeatedVariable { index });
        }
    }
    if vectors.domain() != instance.domain() {
        return Err(Error::DomainMismatch(vectors.domain().size(), instance.domain().size()));
    }
    if vectors.num_variables() != instance.num_variables() {
        return Err(Error::Config(format!(
            "vectors cover {} variables, instance has {}",
            vectors.num_variables(),
            instance.num_variables()
        )));
    }
    let d = instance.domain().size();
    if d > VERIFY_DOMAIN_CAP {
        return Err(Error::CapExceeded {
            what: "rounding domain",
            size: d as f64,
            cap: VERIFY_DOMAIN_CAP as f64,
        });
    }
    Ok(())
}

/// `‖x_A‖²` for every `A ⊆ D`, indexed by the set.
fn subset_norms(vectors: &SdpVectors, x: usize) -> Vec<f64> {
    let d = vectors.domain().size();
    let gram: Vec<Vec<f64>> = (0..d)
        .map(|a| (0..d).map(|b| vectors.dot(x, a, x, b)).collect())
        .collect();
    let mut norms = vec![0.0; 1 << d];
    for set in 1..(1usize << d) {
        let a = set.trailing_zeros() as usize;
        let rest = set & (set - 1);
        let cross: f64 = (0..d).filter(|&b| rest >> b & 1 == 1).map(|b| gram[a][b]).sum();
        norms[set] = norms[rest] + gram[a][a] + 2.0 * cross;
    }
    norms
}

/// Steps 2, 3 and 5.
pub fn prune(instance: &Instance, vectors: &SdpVectors, params: &RoundingParams) -> Result<Retained> {
    validate(instance, vectors)?;
    let d = instance.domain().size();
    let hi = params.threshold();
    let lo = params.gap_low();
    let geo = params.geometry();
    let in_gap = |w: f64| (lo..hi).contains(&w);
    let mut keep = vec![true; instance.num_constraints()];
    let mut removed = StepCounts::default();

    for (i, c) in instance.constraints().iter().enumerate() {
        let weights: Vec<(Vec<usize>, f64)> = match c.scope[..] {
            [x] => (0..d).map(|a| (vec![a], vectors.norm_sq(x, a))).collect(),
            [x, y] => (0..d)
                .flat_map(|a| (0..d).map(move |b| (vec![a, b], vectors.dot(x, a, y, b))))
                .collect(),
            _ => unreachable!("validated"),
        };
        if weights.iter().any(|(_, w)| in_gap(*w)) {
            keep[i] = false;
            removed.step2 += 1;
        } else if weights.iter().any(|(t, w)| *w >= hi && !c.relation.contains(t)) {
            keep[i] = false;
            removed.step3 += 1;
        }
    }

    let mut sorted: HashMap<usize, Vec<f64>> = HashMap::new();
    let mut norms: HashMap<usize, Vec<f64>> = HashMap::new();
    for (i, c) in instance.constraints().iter().enumerate() {
        if !keep[i] || c.scope.len() != 2 {
            continue;
        }
        let (x, y) = (c.scope[0], c.scope[1]);
        for v in [x, y] {
            norms.entry(v).or_insert_with(|| subset_norms(vectors, v));
        }
        let ys = sorted.entry(y).or_insert_with(|| {
            let mut s = norms[&y].clone();
            s.sort_by(f64::total_cmp);
            s
        });
        // blocks are monotone in the norm, so checking the window ends suffices
        let split = norms[&x].iter().any(|&na| {
            let start = ys.partition_point(|&nb| nb < na - geo.u1);
            let end = ys.partition_point(|&nb| nb <= na + geo.u1);
            start < end && {
                let ba = geo.block(na);
                geo.block(ys[start]) != ba || geo.block(ys[end - 1]) != ba
            }
        });
        if split {
            keep[i] = false;
            removed.step5 += 1;
        }
    }
    Ok(Retained { keep, removed })
}

/// Subset vectors `x_A` for `A ⊆ P_x` of one variable.
#[derive(Clone, Debug)]
struct Subsets {
    sets: Vec<ValueSet>,
    vecs: Vec<Vec<f64>>,
    norms: Vec<f64>,
    blocks: Vec<i64>,
    ts: Vec<usize>,
}

fn submasks(p: ValueSet) -> Vec<ValueSet> {
    let mut out = Vec::new();
    let mut sub = p;
    loop {
        out.push(sub);
        if sub == 0 {
            break;
        }
        sub = (sub - 1) & p;
    }
    out.reverse();
    out
}

fn support(vectors: &SdpVectors, x: usize, hi: f64) -> ValueSet {
    vectors
        .domain()
        .values()
        .filter(|&a| vectors.norm_sq(x, a) >= hi)
        .fold(0, |s, a| s | 1 << a)
}

fn subsets_of(vectors: &SdpVectors, x: usize, geo: &Geometry, hi: f64) -> Subsets {
    let sets = submasks(support(vectors, x, hi));
    let vecs: Vec<Vec<f64>> = sets.iter().map(|&s| vectors.subset_vector(x, s)).collect();
    let norms: Vec<f64> = vecs.iter().map(|v| dot(v, v)).collect();
    Subsets {
        blocks: norms.iter().map(|&w| geo.block(w)).collect(),
        ts: norms.iter().map(|&w| geo.t(w)).collect(),
        sets,
        vecs,
        norms,
    }
}

fn retained_variables(instance: &Instance, keep: &[bool]) -> BTreeSet<usize> {
    instance
        .constraints()
        .iter()
        .zip(keep)
        .filter(|(_, &k)| k)
        .flat_map(|(c, _)| c.scope.iter().copied())
        .collect()
}

fn subset_table(
    instance: &Instance,
    vectors: &SdpVectors,
    keep: &[bool],
    params: &RoundingParams,
) -> BTreeMap<usize, Subsets> {
    let geo = params.geometry();
    let hi = params.threshold();
    retained_variables(instance, keep)
        .into_iter()
        .map(|x| (x, subsets_of(vectors, x, &geo, hi)))
        .collect()
}

/// Hyperplanes needed so that every `i ≤ t(x_A)` exists.
fn hyperplanes_needed(table: &BTreeMap<usize, Subsets>) -> usize {
    table.values().flat_map(|s| s.ts.iter().copied()).max().unwrap_or(0)
}

/// `sign⟨w, q_i⟩` for `i < len`, with `sign(0) = +`.
fn signs(w: &[f64], hyperplanes: &[Vec<f64>], len: usize) -> Vec<bool> {
    hyperplanes[..len].iter().map(|q| dot(w, q) >= 0.0).collect()
}

/// Steps 7 and 8 with `params.hyperplanes`.
pub fn hyperplane_phase(
    instance: &Instance,
    vectors: &SdpVectors,
    retained: &Retained,
    params: &RoundingParams,
) -> Result<Retained> {
    let table = subset_table(instance, vectors, &retained.keep, params);
    let need = hyperplanes_needed(&table);
    if params.hyperplanes.len() < need {
        return Err(Error::Pipeline(format!(
            "{} hyperplanes supplied, {need} needed",
            params.hyperplanes.len()
        )));
    }
    let geo = params.geometry();
    let sign_table: BTreeMap<usize, Vec<Vec<bool>>> = table
        .iter()
        .map(|(&x, s)| {
            let sg = s
                .vecs
                .iter()
                .zip(&s.ts)
                .map(|(v, &t)| signs(v, &params.hyperplanes, t))
                .collect();
            (x, sg)
        })
        .collect();

    let uncut: BTreeSet<usize> = table
        .iter()
        .filter(|(x, s)| {
            let sg = &sign_table[x];
            (0..s.sets.len()).any(|i| {
                (i + 1..s.sets.len()).any(|j| s.blocks[i] == s.blocks[j] && sg[i][..s.ts[i]] == sg[j][..s.ts[i]])
            })
        })
        .map(|(&x, _)| x)
        .collect();

    let mut out = retained.clone();
    for (i, c) in instance.constraints().iter().enumerate() {
        if out.keep[i] && c.scope.iter().any(|x| uncut.contains(x)) {
            out.keep[i] = false;
            out.removed.step7 += 1;
        }
    }
    for (i, c) in instance.constraints().iter().enumerate() {
        if !out.keep[i] || c.scope.len() != 2 {
            continue;
        }
        let (x, y) = (c.scope[0], c.scope[1]);
        let (sx, sy) = (&table[&x], &table[&y]);
        let split = (0..sx.sets.len()).any(|a| {
            (0..sy.sets.len()).any(|b| {
                let t = sx.ts[a];
                geo.almost_same(&sx.vecs[a], &sy.vecs[b])
                    && sign_table[&x][a][..t] != sign_table[&y][b][..t.min(sy.ts[b])]
            })
        });
        if split {
            out.keep[i] = false;
            out.removed.step8 += 1;
        }
    }
    Ok(out)
}

/// Step 9: the thresholded Prague instance on the retained binary scopes.
pub fn build_j(
    instance: &Instance,
    vectors: &SdpVectors,
    retained: &Retained,
    params: &RoundingParams,
) -> Result<PragueInstance> {
    validate(instance, vectors)?;
    let d = instance.domain().size();
    let hi = params.threshold();
    let mut j = PragueInstance::new(instance.num_variables(), instance.domain())?;
    for i in retained.indices() {
        let c = &instance.constraints()[i];
        if let [x, y] = c.scope[..] {
            let pairs: Vec<(usize, usize)> = (0..d)
                .flat_map(|a| (0..d).map(move |b| (a, b)))
                .filter(|&(a, b)| vectors.dot(x, a, y, b) >= hi)
                .collect();
            j.set_relation(x, y, &pairs)?;
        }
    }
    for x in j.variables().collect::<Vec<_>>() {
        let p = support(vectors, x, hi);
        if p == 0 {
            return Err(Error::Pipeline(format!(
                "P_{x} is empty: no value has weight >= {hi:e}"
            )));
        }
        if j.variable_set(x) != p {
            return Err(Error::Pipeline(format!(
                "J is not 1-minimal at variable {x}: projection {:?} differs from P_x = {:?}",
                crate::prague::members(j.variable_set(x)),
                crate::prague::members(p)
            )));
        }
    }
    let verdict = verify_one_minimal(&j)?;
    if !verdict.passed() {
        return Err(Error::Pipeline(format!(
            "J is not 1-minimal: {}",
            serde_json::to_string(&verdict).unwrap_or_default()
        )));
    }
    Ok(j)
}

/// A failed instance of the walk dichotomy.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WalkViolation {
    pub step: (usize, usize),
    pub set: Vec<usize>,
}

/// For every step `(x, y)` of `J` and `A ⊆ P_x` with `B = A + (x,y)`: either
/// `B + (y,x) = A` and `x_A`, `y_B` are almost the same, or `block(y_B) > block(x_A)`.
pub fn check_walk_claim(
    j: &PragueInstance,
    vectors: &SdpVectors,
    params: &RoundingParams,
) -> Result<Vec<WalkViolation>> {
    let geo = params.geometry();
    let mut out = Vec::new();
    for (x, y) in j.scopes().collect::<Vec<_>>() {
        for a in submasks(j.variable_set(x)) {
            let b = j.image(a, x, y)?;
            let back = j.image(b, y, x)?;
            let (xa, yb) = (vectors.subset_vector(x, a), vectors.subset_vector(y, b));
            let ok = if back == a {
                geo.almost_same(&xa, &yb)
            } else {
                back & a == a && geo.block(dot(&yb, &yb)) > geo.block(dot(&xa, &xa))
            };
            if !ok {
                out.push(WalkViolation {
                    step: (x, y),
                    set: crate::prague::members(a),
                });
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimatorTrace {
    /// `E⁽⁷⁾ᵢ + E⁽⁸⁾ᵢ` for `i = 0, 1, …`.
    pub total: Vec<f64>,
    pub cut: Vec<f64>,
    pub uncut: Vec<f64>,
    /// Pool indices of the selected hyperplanes.
    pub selected: Vec<usize>,
    pub list7: usize,
    pub list8: usize,
}

impl EstimatorTrace {
    pub fn is_non_increasing(&self) -> bool {
        self.total.windows(2).all(|w| w[1] <= w[0])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundingReport {
    pub mode: Mode,
    pub level: usize,
    pub r: usize,
    pub s: f64,
    pub u1: f64,
    pub u2: f64,
    /// Generator seed (randomized) or pool seed (derandomized).
    pub seed: u64,
    pub num_constraints: usize,
    pub removed: StepCounts,
    pub removed_total: usize,
    pub removed_fraction: f64,
    pub retained_scopes: Vec<(usize, usize)>,
    pub v0: Vec<usize>,
    pub hyperplanes_nominal: usize,
    pub hyperplanes_used: usize,
    pub sdp_objective: f64,
    /// `SDP ≥ 1 − n^(−4n)`; the guarantee is conditional on it.
    pub sdp_guarantee_met: bool,
    pub j_verdict: Verdict,
    pub j_prime_verdict: Verdict,
    pub walk_violations: usize,
    pub satisfies_retained: bool,
    pub assignment: Vec<usize>,
    pub satisfied: usize,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimator: Option<EstimatorTrace>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pool_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_trials: Option<usize>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
#[derive(Default)]
pub struct RoundingOptions {
    /// Derandomized candidate pool size; default `64·n^(2n)`.
    pub pool_size: Option<usize>,
    pub timing: bool,
}


fn gaussian_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dot(&g, &g).sqrt();
        if norm > 0.0 {
            return g.into_iter().map(|v| v / norm).collect();
        }
    }
}

/// Steps 1–9 with `r`, `s` and the hyperplanes drawn from `ChaCha8(seed)` in that order.
pub fn robust_round(
    instance: &Instance,
    vectors: &SdpVectors,
    n: usize,
    seed: u64,
    ops: &[OperationTable],
) -> Result<(Assignment, RoundingReport)> {
    robust_round_with(instance, vectors, n, seed, ops, &RoundingOptions::default())
}

pub fn robust_round_with(
    instance: &Instance,
    vectors: &SdpVectors,
    n: usize,
    seed: u64,
    ops: &[OperationTable],
    options: &RoundingOptions,
) -> Result<(Assignment, RoundingReport)> {
    let start = Instant::now();
    validate(instance, vectors)?;
    let d = instance.domain().size();
    RoundingParams::check_level(n, d)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = rng.random_range(1..n);
    let (_, u2) = RoundingParams::widths(n, r, d);
    let s = rng.random::<f64>() * u2;
    let mut params = RoundingParams::new(n, r, s, d, Mode::Randomized, seed)?;
    let pruned = prune(instance, vectors, &params)?;
    let table = subset_table(instance, vectors, &pruned.keep, &params);
    // hyperplanes are drawn sequentially, so this prefix equals that of the full draw
    let need = hyperplanes_needed(&table).min(params.nominal_hyperplanes());
    params.hyperplanes = (0..need)
        .map(|_| gaussian_unit(&mut rng, vectors.dimension()))
        .collect();
    let retained = hyperplane_phase(instance, vectors, &pruned, &params)?;
    finish(
        instance, vectors, &params, retained, ops, None, None, None, options, start,
    )
}

/// Seeded candidate pool, generated lazily: candidate `j` comes from stream `j`.
struct Pool {
    seed: u64,
    dim: usize,
    size: usize,
    cache: Vec<Vec<f64>>,
}

impl Pool {
    fn get(&mut self, j: usize) -> &[f64] {
        while self.cache.len() <= j {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(self.cache.len() as u64);
            let q = gaussian_unit(&mut rng, self.dim);
            self.cache.push(q);
        }
        &self.cache[j]
    }
}

/// One pair in L⁽⁷⁾ or L⁽⁸⁾, with multiplicity.
#[derive(Clone, Debug)]
struct Entry {
    u: usize,
    v: usize,
    t: usize,
    p: f64,
    weight: f64,
    cut: bool,
}

fn estimate(l7: &[Entry], l8: &[Entry], w7: f64, w8: f64, i: usize) -> (f64, f64) {
    let e7: f64 = l7
        .iter()
        .filter(|e| !e.cut)
        .map(|e| e.weight * e.p.powi(e.t.saturating_sub(i) as i32))
        .sum();
    let c: f64 = l8.iter().filter(|e| e.cut).map(|e| e.weight).sum();
    let rest: f64 = l8.iter().map(|e| e.weight * e.t.saturating_sub(i) as f64 * e.p).sum();
    (
        if w7 > 0.0 { e7 / w7 } else { 0.0 },
        if w8 > 0.0 { (c + rest) / w8 } else { 0.0 },
    )
}

/// Greedy hyperplane selection by conditional expectations. A pair counts as cut
/// only by hyperplanes `q_i` with `i ≤ t`, matching Steps 7 and 8.
fn select_hyperplanes(
    instance: &Instance,
    pruned: &Retained,
    table: &BTreeMap<usize, Subsets>,
    params: &RoundingParams,
    pool: &mut Pool,
) -> Result<(Vec<Vec<f64>>, EstimatorTrace)> {
    let geo = params.geometry();
    let n = params.n as f64;
    let mut ids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut keys: Vec<(usize, usize)> = Vec::new();
    let mut id = |x: usize, k: usize, keys: &mut Vec<(usize, usize)>| -> usize {
        *ids.entry((x, k)).or_insert_with(|| {
            keys.push((x, k));
            keys.len() - 1
        })
    };

    let mut mult: BTreeMap<usize, usize> = BTreeMap::new();
    let mut scopes: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for i in pruned.indices() {
        let c = &instance.constraints()[i];
        for &x in &c.scope {
            *mult.entry(x).or_default() += 1;
        }
        if let [x, y] = c.scope[..] {
            *scopes.entry((x, y)).or_default() += 1;
        }
    }
    let mut l7 = Vec::new();
    for (&x, &count) in &mult {
        let s = &table[&x];
        for a in 0..s.sets.len() {
            for b in a + 1..s.sets.len() {
                if s.blocks[a] == s.blocks[b] {
                    let norm = s.norms[a].max(s.norms[b]).sqrt();
                    l7.push(Entry {
                        u: id(x, a, &mut keys),
                        v: id(x, b, &mut keys),
                        t: s.ts[a],
                        p: 1.0 - n.powi(-2 * params.r as i32) / (4.0 * norm),
                        weight: count as f64,
                        cut: false,
                    });
                }
            }
        }
    }
    let mut l8 = Vec::new();
    for (&(x, y), &count) in &scopes {
        let (sx, sy) = (&table[&x], &table[&y]);
        // zero vectors are never split (sign(0) = +) and would make the bound infinite
        for a in (0..sx.sets.len()).filter(|&a| sx.sets[a] != 0) {
            for b in (0..sy.sets.len()).filter(|&b| sy.sets[b] != 0) {
                if geo.almost_same(&sx.vecs[a], &sy.vecs[b]) {
                    l8.push(Entry {
                        u: id(x, a, &mut keys),
                        v: id(y, b, &mut keys),
                        t: sx.ts[a],
                        p: 4.0 * geo.u1.sqrt() / sx.norms[a].sqrt(),
                        weight: count as f64,
                        cut: false,
                    });
                }
            }
        }
    }
    let vecs: Vec<&[f64]> = keys.iter().map(|&(x, k)| &table[&x].vecs[k][..]).collect();
    let w7: f64 = l7.iter().map(|e| e.weight).sum();
    let w8: f64 = l8.iter().map(|e| e.weight).sum();
    let steps = hyperplanes_needed(table);

    let (e7, e8) = estimate(&l7, &l8, w7, w8, 0);
    let mut trace = EstimatorTrace {
        total: vec![e7 + e8],
        cut: vec![e7],
        uncut: vec![e8],
        selected: Vec::new(),
        list7: l7.len(),
        list8: l8.len(),
    };
    let mut chosen = Vec::with_capacity(steps);
    let mut cursor = 0;
    let mut scratch7 = l7.clone();
    let mut scratch8 = l8.clone();
    for i in 0..steps {
        let current = *trace.total.last().expect("nonempty");
        let mut accepted = None;
        for tried in 0..pool.size {
            let j = (cursor + tried) % pool.size;
            let q = pool.get(j).to_vec();
            let sg: Vec<bool> = vecs.iter().map(|w| dot(w, &q) >= 0.0).collect();
            for (dst, src) in scratch7.iter_mut().zip(&l7).chain(scratch8.iter_mut().zip(&l8)) {
                dst.cut = src.cut || (i < src.t && sg[src.u] != sg[src.v]);
            }
            let (n7, n8) = estimate(&scratch7, &scratch8, w7, w8, i + 1);
            if n7 + n8 <= current {
                accepted = Some((j, q, n7, n8));
                break;
            }
        }
        let Some((j, q, n7, n8)) = accepted else {
            return Err(Error::PoolExhausted {
                step: i,
                pool: pool.size,
            });
        };
        l7.clone_from(&scratch7);
        l8.clone_from(&scratch8);
        cursor = (j + 1) % pool.size;
        trace.total.push(n7 + n8);
        trace.cut.push(n7);
        trace.uncut.push(n8);
        trace.selected.push(j);
        chosen.push(q);
    }
    Ok((chosen, trace))
}

/// Every `r ∈ {1..n−1}` and `s ∈ {j·u2/n⁴}`; hyperplanes chosen greedily from a
/// seeded pool. The grid point removing the fewest constraints is completed.
pub fn derandomized_round(
    instance: &Instance,
    vectors: &SdpVectors,
    n: usize,
    ops: &[OperationTable],
    pool_seed: u64,
) -> Result<(Assignment, RoundingReport)> {
    derandomized_round_with(instance, vectors, n, ops, pool_seed, &RoundingOptions::default())
}

pub fn default_pool_size(n: usize) -> usize {
    64 * n.pow(2 * n as u32)
}

pub fn derandomized_round_with(
    instance: &Instance,
    vectors: &SdpVectors,
    n: usize,
    ops: &[OperationTable],
    pool_seed: u64,
    options: &RoundingOptions,
) -> Result<(Assignment, RoundingReport)> {
    let start = Instant::now();
    validate(instance, vectors)?;
    let d = instance.domain().size();
    RoundingParams::check_level(n, d)?;
    let mut pool = Pool {
        seed: pool_seed,
        dim: vectors.dimension(),
        size: options.pool_size.unwrap_or_else(|| default_pool_size(n)).max(1),
        cache: Vec::new(),
    };
    let grid = n.pow(4);
    let mut best: Option<(usize, RoundingParams, Retained, EstimatorTrace)> = None;
    let mut trials = 0;
    for r in 1..n {
        let (_, u2) = RoundingParams::widths(n, r, d);
        for j in 0..grid {
            let mut params = RoundingParams::new(n, r, j as f64 * u2 / grid as f64, d, Mode::Derandomized, pool_seed)?;
            let pruned = prune(instance, vectors, &params)?;
            let table = subset_table(instance, vectors, &pruned.keep, &params);
            let (hyperplanes, trace) = select_hyperplanes(instance, &pruned, &table, &params, &mut pool)?;
            params.hyperplanes = hyperplanes;
            let retained = hyperplane_phase(instance, vectors, &pruned, &params)?;
            trials += 1;
            let removed = retained.removed.total();
            if best.as_ref().is_none_or(|(b, ..)| removed < *b) {
                best = Some((removed, params, retained, trace));
            }
        }
    }
    let (_, params, retained, trace) = best.expect("n >= 2 gives at least one grid point");
    finish(
        instance,
        vectors,
        &params,
        retained,
        ops,
        Some(trace),
        Some(pool.size),
        Some(trials),
        options,
        start,
    )
}

#[allow(clippy::too_many_arguments)]
fn finish(
    instance: &Instance,
    vectors: &SdpVectors,
    params: &RoundingParams,
    retained: Retained,
    ops: &[OperationTable],
    estimator: Option<EstimatorTrace>,
    pool_size: Option<usize>,
    grid_trials: Option<usize>,
    options: &RoundingOptions,
    start: Instant,
) -> Result<(Assignment, RoundingReport)> {
    let n = params.n;
    let d = instance.domain().size();
    let mut warnings = Vec::new();
    if n <= d {
        warnings.push(format!(
            "level n = {n} does not exceed |D| = {d}; the analysis assumes n > |D|"
        ));
    }
    let objective = vectors.objective.unwrap_or_else(|| sdp_objective(instance, vectors));
    let sdp_guarantee_met = objective >= 1.0 - (n as f64).powi(-4 * n as i32);
    if !sdp_guarantee_met {
        warnings.push(format!(
            "SDP value {objective:.12} is below 1 - n^(-4n) = {:.12}; the removal bound is not guaranteed",
            1.0 - (n as f64).powi(-4 * n as i32)
        ));
    }

    let j = build_j(instance, vectors, &retained, params)?;
    let j_verdict = verify_weak_prague(&j)?;
    if !j_verdict.passed() {
        return Err(Error::NotWeakPrague(format!(
            "J fails: {}",
            serde_json::to_string(&j_verdict).unwrap_or_default()
        )));
    }
    let walk = check_walk_claim(&j, vectors, params)?;
    let jp = clone_closure(&j, ops)?;
    let j_prime_verdict = verify_weak_prague(&jp)?;
    if !j_prime_verdict.passed() {
        return Err(Error::NotWeakPrague(format!(
            "J' fails: {}",
            serde_json::to_string(&j_prime_verdict).unwrap_or_default()
        )));
    }

    // solve J' together with the retained constraints on V0, renumbered
    let v0: Vec<usize> = jp.variables().collect();
    let local: HashMap<usize, usize> = v0.iter().enumerate().map(|(i, &x)| (x, i)).collect();
    let mut constraints = Vec::new();
    for (x, y) in jp.scopes().filter(|&(x, y)| x < y) {
        let tuples = jp.pairs(x, y).into_iter().map(|(a, b)| vec![a, b]);
        constraints.push(Constraint::new(
            vec![local[&x], local[&y]],
            Relation::new(instance.domain(), 2, tuples)?,
        ));
    }
    for i in retained.indices() {
        let c = &instance.constraints()[i];
        if c.scope.iter().all(|x| local.contains_key(x)) {
            constraints.push(Constraint::new(
                c.scope.iter().map(|x| local[x]).collect(),
                c.relation.clone(),
            ));
        }
    }
    let mut values: Vec<usize> = (0..instance.num_variables())
        .map(|x| {
            (0..d)
                .max_by(|&a, &b| vectors.norm_sq(x, a).total_cmp(&vectors.norm_sq(x, b)).then(b.cmp(&a)))
                .expect("nonempty domain")
        })
        .collect();
    if !v0.is_empty() {
        let solver_instance = Instance::new(v0.len(), instance.domain(), constraints)?;
        let solution = search(&solver_instance)?
            .ok_or_else(|| Error::Pipeline(format!("J' has no solution; J' = {}", prague_to_json(&jp))))?;
        for (i, &x) in v0.iter().enumerate() {
            values[x] = solution.values()[i];
        }
    }
    let assignment = Assignment::new(values);
    let satisfies_retained = retained
        .indices()
        .all(|i| instance.constraints()[i].is_satisfied_by(assignment.values()));
    if !satisfies_retained {
        return Err(Error::Pipeline("the assignment violates a retained constraint".into()));
    }
    let val = value(instance, &assignment)?;
    let m = instance.num_constraints();
    let retained_scopes: Vec<(usize, usize)> = retained
        .indices()
        .filter_map(|i| match instance.constraints()[i].scope[..] {
            [x, y] => Some((x, y)),
            _ => None,
        })
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let report = RoundingReport {
        mode: params.mode,
        level: n,
        r: params.r,
        s: params.s,
        u1: params.u1,
        u2: params.u2,
        seed: params.seed,
        num_constraints: m,
        removed: retained.removed,
        removed_total: retained.removed.total(),
        removed_fraction: retained.removed.total() as f64 / m as f64,
        retained_scopes,
        v0,
        hyperplanes_nominal: params.nominal_hyperplanes(),
        hyperplanes_used: params.hyperplanes.len(),
        sdp_objective: objective,
        sdp_guarantee_met,
        j_verdict,
        j_prime_verdict,
        walk_violations: walk.len(),
        satisfies_retained,
        assignment: assignment.values().to_vec(),
        satisfied: val.numerator,
        value: val.as_f64(),
        estimator,
        pool_size,
        grid_trials,
        warnings,
        timing_ms: options.timing.then(|| start.elapsed().as_secs_f64() * 1e3),
    };
    Ok((assignment, report))
}

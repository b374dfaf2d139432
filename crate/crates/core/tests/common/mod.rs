//! Generators shared by the integration tests.
#![allow(dead_code)]

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robust_csp::algebra::OperationTable;
use robust_csp::prague::{verify_one_minimal, verify_weak_prague, PragueInstance};
use robust_csp::Domain;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn data(name: &str) -> String {
    format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

pub fn bits(mask: usize) -> Vec<usize> {
    (0..usize::BITS as usize).filter(|&i| mask >> i & 1 == 1).collect()
}

/// Nonempty subsets of `mask`.
pub fn submasks(mask: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut s = mask;
    while s != 0 {
        out.push(s);
        s = (s - 1) & mask;
    }
    out
}

/// Every relation `R ⊆ A × B` whose projections are exactly `A` and `B`.
pub fn full_projection_relations(a: usize, b: usize) -> Vec<Vec<(usize, usize)>> {
    let cells: Vec<(usize, usize)> = bits(a)
        .into_iter()
        .flat_map(|x| bits(b).into_iter().map(move |y| (x, y)))
        .collect();
    (1..1usize << cells.len())
        .map(|m| bits(m).into_iter().map(|i| cells[i]).collect::<Vec<_>>())
        .filter(|r: &Vec<(usize, usize)>| {
            let pa = r.iter().fold(0, |acc, &(x, _)| acc | 1 << x);
            let pb = r.iter().fold(0, |acc, &(_, y)| acc | 1 << y);
            pa == a && pb == b
        })
        .collect()
}

/// A random 1-minimal Prague instance: random `P_x`, each scope present with
/// probability `density`, relations uniform among those with the right projections.
pub fn random_one_minimal(rng: &mut ChaCha8Rng, nv: usize, d: usize, density: f64) -> PragueInstance {
    let domain = Domain::new(d).expect("domain");
    loop {
        let px: Vec<usize> = (0..nv).map(|_| rng.random_range(1..1usize << d)).collect();
        let mut p = PragueInstance::new(nv, domain).expect("prague");
        for x in 0..nv {
            for y in x + 1..nv {
                if rng.random_bool(density) {
                    let rels = full_projection_relations(px[x], px[y]);
                    p.set_relation(x, y, rels.choose(rng).expect("nonempty"))
                        .expect("scope");
                }
            }
        }
        if p.variables().count() == nv && verify_one_minimal(&p).expect("symmetric").passed() {
            return p;
        }
    }
}

/// Rejection-samples [`random_one_minimal`] until the weak Prague axioms hold.
pub fn random_weak_prague(rng: &mut ChaCha8Rng, nv: usize, d: usize) -> PragueInstance {
    loop {
        let p = random_one_minimal(rng, nv, d, 0.7);
        if verify_weak_prague(&p).expect("well formed").passed() {
            return p;
        }
    }
}

/// Every 1-minimal Boolean Prague instance on `nv` variables in which each
/// variable lies in some scope.
pub fn all_one_minimal_boolean(nv: usize, mut visit: impl FnMut(&PragueInstance)) {
    let domain = Domain::new(2).expect("domain");
    let pairs: Vec<(usize, usize)> = (0..nv).flat_map(|x| (x + 1..nv).map(move |y| (x, y))).collect();
    let mut px = vec![1usize; nv];
    loop {
        let options: Vec<Vec<Option<Vec<(usize, usize)>>>> = pairs
            .iter()
            .map(|&(x, y)| {
                std::iter::once(None)
                    .chain(full_projection_relations(px[x], px[y]).into_iter().map(Some))
                    .collect()
            })
            .collect();
        let mut choice = vec![0usize; pairs.len()];
        loop {
            let mut p = PragueInstance::new(nv, domain).expect("prague");
            for (k, &(x, y)) in pairs.iter().enumerate() {
                if let Some(r) = &options[k][choice[k]] {
                    p.set_relation(x, y, r).expect("scope");
                }
            }
            if p.variables().count() == nv {
                visit(&p);
            }
            // odometer over scope choices
            let mut k = 0;
            while k < choice.len() {
                choice[k] += 1;
                if choice[k] < options[k].len() {
                    break;
                }
                choice[k] = 0;
                k += 1;
            }
            if k == choice.len() {
                break;
            }
        }
        let mut x = 0;
        while x < nv {
            px[x] += 1;
            if px[x] < 4 {
                break;
            }
            px[x] = 1;
            x += 1;
        }
        if x == nv {
            return;
        }
    }
}

/// Common operations on `{0, …, d−1}`: semilattices, majority-like and
/// Maltsev-like ternary operations.
pub fn candidate_ops(d: usize) -> Vec<OperationTable> {
    let dom = Domain::new(d).expect("domain");
    vec![
        OperationTable::from_fn(dom, 2, |a| a[0].min(a[1])).expect("min"),
        OperationTable::from_fn(dom, 2, |a| a[0].max(a[1])).expect("max"),
        OperationTable::from_fn(dom, 3, |a| if a[1] == a[2] { a[1] } else { a[0] }).expect("majority"),
        OperationTable::from_fn(dom, 3, |a| (a[0] + d - a[1] + a[2]) % d).expect("minority"),
        OperationTable::from_fn(dom, 3, |a| a[0].min(a[1]).max(a[1].min(a[2])).max(a[0].min(a[2]))).expect("median"),
    ]
}

/// Closed walks from `x` back to `x` with at most `max_steps` steps.
pub fn closed_patterns(p: &PragueInstance, x: usize, max_steps: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut stack = vec![vec![x]];
    while let Some(walk) = stack.pop() {
        let last = *walk.last().expect("nonempty");
        if walk.len() > 1 && last == x {
            out.push(walk.clone());
        }
        if walk.len() <= max_steps {
            for y in p.steps_from(last) {
                let mut w = walk.clone();
                w.push(y);
                stack.push(w);
            }
        }
    }
    out
}

//! Property tests over randomly generated instances, plus a few fixed oracles that
//! need more than one module.

mod common;

use proptest::prelude::*;
use robust_csp::algebra::{clone_closure, is_compatible, singleton_expand};
use robust_csp::binarize::{binarize, lift_assignment};
use robust_csp::consistency::{kl_minimize, search};
use robust_csp::generate::{horn, horn_binary, plant_and_corrupt, random_instance, two_sat};
use robust_csp::io::{instance_to_json, parse_instance, parse_vectors, read_to_string};
use robust_csp::prague::{
    add_pattern, members, sdp_to_prague, sub_pattern, verify_weak_prague, Pattern, PragueInstance,
};
use robust_csp::rounding::{build_j, choose_level, div_strict, prune, Mode, Retained, RoundingParams, StepCounts};
use robust_csp::sdp::{build_sdp, check_sdp_feasibility, lp_from_sdp, sdp_objective, solve_sdp, SdpVectors};
use robust_csp::{brute_force_opt, value, Assignment, Constraint, ConstraintLanguage, Domain, Instance, Relation};

use common::{candidate_ops, data, random_one_minimal, random_weak_prague, rng, submasks};

fn language(pick: u8) -> ConstraintLanguage {
    match pick % 3 {
        0 => singleton_expand(&two_sat()),
        1 => singleton_expand(&horn()),
        _ => singleton_expand(&horn_binary()),
    }
}

fn small_instance() -> impl Strategy<Value = Instance> {
    (any::<u8>(), 1usize..=7, 1usize..=18, any::<u64>(), any::<bool>()).prop_map(|(pick, nv, m, seed, planted)| {
        let lang = language(pick);
        if planted {
            plant_and_corrupt(&lang, nv, m, 0.0, seed).expect("generate").instance
        } else {
            random_instance(&lang, nv, m, seed).expect("generate")
        }
    })
}

fn all_assignments(nv: usize, d: usize) -> impl Iterator<Item = Assignment> {
    (0..d.pow(nv as u32)).map(move |mut code| {
        let mut v = vec![0; nv];
        for x in v.iter_mut() {
            *x = code % d;
            code /= d;
        }
        Assignment::new(v)
    })
}

/// Vectors of a distribution over assignments: `x_a = Σ_k [F_k(x) = a]·√w_k·e_k`,
/// so `⟨x_a, y_b⟩ = Pr[F(x) = a, F(y) = b]`.
fn mixture(domain: Domain, parts: &[(f64, Vec<usize>)]) -> SdpVectors {
    let nv = parts[0].1.len();
    let d = domain.size();
    let dim = parts.len();
    let mut data = vec![0.0; nv * d * dim];
    for (k, (w, f)) in parts.iter().enumerate() {
        for (x, &a) in f.iter().enumerate() {
            data[(x * d + a) * dim + k] = w.sqrt();
        }
    }
    SdpVectors::new(nv, domain, dim, data).expect("shape")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn value_counts_satisfied_constraints(inst in small_instance(), seed in any::<u64>()) {
        let d = inst.domain().size();
        let mut r = rng(seed);
        let a = Assignment::new((0..inst.num_variables()).map(|_| rand::Rng::random_range(&mut r, 0..d)).collect());
        let v = value(&inst, &a).unwrap();
        prop_assert_eq!(v.numerator, inst.count_satisfied(&a));
        prop_assert_eq!(v.denominator, inst.num_constraints());
        let (_, opt) = brute_force_opt(&inst).unwrap();
        prop_assert!(opt >= v);
    }

    #[test]
    fn search_agrees_with_brute_force(inst in small_instance()) {
        let (_, opt) = brute_force_opt(&inst).unwrap();
        let found = search(&inst).unwrap();
        prop_assert_eq!(found.is_some(), opt.is_one());
        if let Some(a) = found {
            prop_assert!(value(&inst, &a).unwrap().is_one());
        }
    }

    #[test]
    fn unique_solutions_are_found_exactly(inst in small_instance()) {
        let solutions: Vec<Assignment> = all_assignments(inst.num_variables(), inst.domain().size())
            .filter(|a| inst.count_satisfied(a) == inst.num_constraints())
            .collect();
        if solutions.len() == 1 {
            prop_assert_eq!(search(&inst).unwrap(), Some(solutions[0].clone()));
        }
    }

    /// Minimization never removes a value used by a solution.
    #[test]
    fn minimal_projections_keep_every_solution(inst in small_instance()) {
        let minimal = kl_minimize(&inst, 2, 3).unwrap();
        for a in all_assignments(inst.num_variables(), inst.domain().size()) {
            if inst.count_satisfied(&a) == inst.num_constraints() {
                prop_assert!(!minimal.is_trivial());
                for (x, &v) in a.values().iter().enumerate() {
                    prop_assert!(minimal.unary(x).contains(&v));
                }
            }
        }
    }

    #[test]
    fn instance_json_round_trips(inst in small_instance()) {
        prop_assert_eq!(parse_instance(&instance_to_json(&inst)).unwrap(), inst);
    }

    /// Each violated original constraint shows up as a violated constraint of its
    /// own group in the binarized instance.
    #[test]
    fn lifting_never_adds_violations(nv in 3usize..=5, m in 1usize..=6, seed in any::<u64>(), pick in any::<u64>()) {
        let lang = singleton_expand(&horn());
        let inst = random_instance(&lang, nv, m, seed).unwrap();
        let (bin, _, map) = binarize(&inst, &lang).unwrap();
        let d = bin.domain().size();
        let mut r = rng(pick);
        let g = Assignment::new((0..bin.num_variables()).map(|_| rand::Rng::random_range(&mut r, 0..d)).collect());
        let lifted = lift_assignment(&g, &map).unwrap();
        let original_bad = inst.num_constraints() - inst.count_satisfied(&lifted);
        let binarized_bad = bin.num_constraints() - bin.count_satisfied(&g);
        prop_assert!(original_bad <= binarized_bad);
        if let Some(sol) = search(&bin).unwrap() {
            prop_assert!(value(&inst, &lift_assignment(&sol, &map).unwrap()).unwrap().is_one());
        } else {
            prop_assert!(!brute_force_opt(&inst).unwrap().1.is_one());
        }
    }

    #[test]
    fn integral_vectors_are_feasible_with_value_as_objective(inst in small_instance(), seed in any::<u64>()) {
        prop_assume!(inst.max_arity() <= 2);
        let d = inst.domain().size();
        let mut r = rng(seed);
        let a = Assignment::new((0..inst.num_variables()).map(|_| rand::Rng::random_range(&mut r, 0..d)).collect());
        let v = SdpVectors::integral(inst.domain(), &a);
        prop_assert!(check_sdp_feasibility(&v, 1e-12).pass);
        let obj = sdp_objective(&inst, &v);
        prop_assert!((obj - value(&inst, &a).unwrap().as_f64()).abs() < 1e-12);
    }

    #[test]
    fn div_is_strict(gamma in -10.0f64..10.0, psi in 1e-6f64..3.0) {
        let i = div_strict(gamma, psi);
        prop_assert!(gamma - i as f64 * psi > 0.0);
        prop_assert!(gamma - (i + 1) as f64 * psi <= 0.0);
    }

    #[test]
    fn hyperplane_counts_grow_with_length(n in 2usize..=4, w1 in 0.0f64..1.0, w2 in 0.0f64..1.0, s_frac in 0.0f64..1.0) {
        let (_, u2) = RoundingParams::widths(n, 1, 2);
        let p = RoundingParams::new(n, 1, s_frac * u2, 2, Mode::Randomized, 0).unwrap();
        let g = p.geometry();
        let (lo, hi) = if w1 <= w2 { (w1, w2) } else { (w2, w1) };
        prop_assert!(g.t(lo) <= g.t(hi));
        prop_assert!(g.block(lo) <= g.block(hi));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pattern_arithmetic(seed in any::<u64>(), nv in 2usize..=4, d in 2usize..=3, len in 1usize..=5) {
        let mut r = rng(seed);
        let p = random_one_minimal(&mut r, nv, d, 0.8);
        // random walk along steps
        let mut walk = vec![p.variables().next().unwrap()];
        for _ in 0..len {
            let next: Vec<usize> = p.steps_from(*walk.last().unwrap()).collect();
            walk.push(next[rand::Rng::random_range(&mut r, 0..next.len())]);
        }
        let pat = Pattern::new(walk.clone()).unwrap();
        let start = p.variable_set(walk[0]);
        for a in submasks(start as usize) {
            let a = a as u32;
            // A − p = A + reversed(p)
            prop_assert_eq!(sub_pattern(&p, a, &pat).unwrap(), add_pattern(&p, a, &pat.reversed()).unwrap());
            for b in submasks(a as usize) {
                let b = b as u32;
                let (fb, fa) = (add_pattern(&p, b, &pat).unwrap(), add_pattern(&p, a, &pat).unwrap());
                prop_assert_eq!(fb & !fa, 0, "A + p is monotone in A");
            }
            // (A + p) + q = A + pq
            let end = *walk.last().unwrap();
            if let Some(y) = p.steps_from(end).next() {
                let q = Pattern::new(vec![end, y]).unwrap();
                prop_assert_eq!(
                    add_pattern(&p, add_pattern(&p, a, &pat).unwrap(), &q).unwrap(),
                    add_pattern(&p, a, &pat.concat(&q).unwrap()).unwrap()
                );
            }
        }
    }

    /// The closure contains the input, is idempotent and is preserved by every operation.
    #[test]
    fn clone_closure_is_a_closure(seed in any::<u64>(), nv in 2usize..=4, d in 2usize..=3, pick in 1usize..32) {
        let mut r = rng(seed);
        let p = random_one_minimal(&mut r, nv, d, 0.8);
        let ops: Vec<_> = candidate_ops(d).into_iter().enumerate().filter(|(i, _)| pick >> i & 1 == 1).map(|(_, f)| f).collect();
        prop_assume!(!ops.is_empty());
        let c = clone_closure(&p, &ops).unwrap();
        prop_assert_eq!(&clone_closure(&c, &ops).unwrap(), &c);
        for (x, y) in p.scopes() {
            let before = p.pairs(x, y);
            let after = c.pairs(x, y);
            prop_assert!(before.iter().all(|t| after.contains(t)));
            let rel = Relation::new(c.domain(), 2, after.iter().map(|&(a, b)| vec![a, b])).unwrap();
            for f in &ops {
                prop_assert!(is_compatible(f, &rel).unwrap());
            }
        }
    }

    #[test]
    fn weak_prague_sampler_is_sound(seed in any::<u64>(), nv in 2usize..=4) {
        let p = random_weak_prague(&mut rng(seed), nv, 2);
        prop_assert!(verify_weak_prague(&p).unwrap().passed());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Thresholding solver output at a small positive tau gives a weak Prague instance.
    #[test]
    fn solver_vectors_threshold_to_weak_prague(seed in any::<u64>(), nv in 3usize..=8, pick in any::<u8>(), eps in 0.0f64..0.2) {
        let lang = if pick % 2 == 0 { two_sat() } else { horn_binary() };
        let inst = plant_and_corrupt(&lang, nv, 3 * nv, eps, seed).unwrap().instance;
        let v = solve_sdp(&build_sdp(&inst).unwrap(), 1e-6).unwrap();
        let p = sdp_to_prague(&v, 1e-9).unwrap();
        let verdict = verify_weak_prague(&p).unwrap();
        prop_assert!(verdict.passed(), "{:?}", verdict);
    }
}

#[test]
fn corruption_rate_concentrates() {
    let lang = two_sat();
    for seed in 0..100 {
        let planted = plant_and_corrupt(&lang, 40, 1000, 0.01, seed).unwrap();
        let f = planted.corrupted_fraction();
        assert!((0.0..=0.03).contains(&f), "seed {seed}: {f}");
        let v = value(&planted.instance, &planted.planted).unwrap();
        assert_eq!(v.numerator, 1000 - planted.corrupted.iter().filter(|&&c| c).count());
    }
}

#[test]
fn perturbation_shows_up_in_residuals() {
    let v = parse_vectors(&read_to_string(data("counterexample_vectors.json")).unwrap()).unwrap();
    let mut w = v.clone();
    w.vector_mut(0, 0)[0] += 1e-6;
    let rep = check_sdp_feasibility(&w, 1e-10);
    assert!(!rep.pass);
    assert!(rep.max_residual() > 1e-7 && rep.max_residual() < 1e-5, "{rep:?}");
}

#[test]
fn counterexample_vector_marginals() {
    let v = parse_vectors(&read_to_string(data("counterexample_vectors.json")).unwrap()).unwrap();
    let d = Domain::new(2).unwrap();
    let full = Relation::full(d, 2).unwrap();
    let inst = Instance::new(
        3,
        d,
        vec![
            Constraint::new(vec![0, 1], full.clone()),
            Constraint::new(vec![0, 2], full.clone()),
            Constraint::new(vec![1, 2], full),
        ],
    )
    .unwrap();
    let lp = lp_from_sdp(&v, &inst, 1e-12).unwrap();
    assert!((lp.unary[0][0] - 0.5).abs() < 1e-12);
    assert!((lp.unary[1][0] - 0.25).abs() < 1e-12);

    // thresholded at n = 2, r = 1 (1/16) over a fully retained instance
    let params = RoundingParams::new(2, 1, 0.0, 2, Mode::Randomized, 0).unwrap();
    let retained = Retained {
        keep: vec![true; 3],
        removed: StepCounts::default(),
    };
    let j = build_j(&inst, &v, &retained, &params).unwrap();
    assert_eq!(j.pairs(0, 1), vec![(0, 1), (1, 0), (1, 1)]);
}

#[test]
fn gap_values_are_pruned_at_step_two() {
    // ⟨x_0, y_1⟩ = 1/64 = n^(−4r−2) for n = 2, r = 1
    let d = Domain::new(2).unwrap();
    let v = mixture(d, &[(1.0 / 64.0, vec![0, 1]), (63.0 / 64.0, vec![1, 1])]);
    assert!(check_sdp_feasibility(&v, 1e-12).pass);
    let rel = Relation::new(d, 2, vec![vec![0, 1], vec![1, 1]]).unwrap();
    let inst = Instance::new(2, d, vec![Constraint::new(vec![0, 1], rel)]).unwrap();
    let params = RoundingParams::new(2, 1, 0.0, 2, Mode::Randomized, 0).unwrap();
    let pruned = prune(&inst, &v, &params).unwrap();
    assert_eq!(pruned.removed.step2, 1);
    assert!(!pruned.keep[0]);
}

#[test]
fn heavy_violations_are_pruned_at_step_three() {
    let lang = two_sat();
    let planted = plant_and_corrupt(&lang, 10, 30, 0.0, 4).unwrap();
    let mut constraints = planted.instance.constraints().to_vec();
    // a constraint the planted assignment violates: its violated pair carries weight 1
    let f = planted.planted.values();
    let (x, y) = (0, 1);
    let rel = Relation::new(
        Domain::new(2).unwrap(),
        2,
        (0..4).map(|c| vec![c / 2, c % 2]).filter(|t| t != &vec![f[x], f[y]]),
    )
    .unwrap();
    constraints.push(Constraint::new(vec![x, y], rel));
    let inst = planted.instance.with_constraints(constraints).unwrap();
    let v = SdpVectors::integral(inst.domain(), &planted.planted);
    let params = RoundingParams::new(3, 1, 0.0, 2, Mode::Randomized, 0).unwrap();
    let pruned = prune(&inst, &v, &params).unwrap();
    assert_eq!(pruned.removed.step3, 1);
    assert!(!pruned.keep[inst.num_constraints() - 1]);
    assert_eq!(pruned.removed.total(), 1);
}

#[test]
fn level_guarantee_matches_the_inequality() {
    for k in 1..=60 {
        let v = 1.0 - 2f64.powi(-k);
        let choice = choose_level(v, usize::MAX / 4, 1).unwrap();
        let n = choice.n as f64;
        assert_eq!(
            choice.guarantee_met,
            v >= 1.0 - n.powi(-4 * choice.n as i32),
            "v = 1 - 2^-{k}"
        );
        // the formula level never asks for more than the value gives
        if !choice.clamped {
            assert!(choice.guarantee_met, "v = 1 - 2^-{k}, n = {}", choice.n);
        }
    }
}

#[test]
fn example_walks_by_hand() {
    let p: PragueInstance =
        robust_csp::io::parse_prague(&read_to_string(data("prague_example.json")).unwrap()).unwrap();
    let zero = robust_csp::prague::set_of(&[0]);
    let xy = Pattern::new(vec![0, 1]).unwrap();
    assert_eq!(members(add_pattern(&p, zero, &xy).unwrap()), vec![0]);
    let xyz = Pattern::new(vec![0, 1, 2]).unwrap();
    assert_eq!(members(add_pattern(&p, zero, &xyz).unwrap()), vec![0, 1]);
}

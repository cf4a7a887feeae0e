//! Property tests. Each case draws a seed and builds its instance with the
//! library's seeded generators, checked against oracles written here.

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use relcert::certify::{all_subsets, opt_indices, Analysis};
use relcert::classifier::{occurs, rooted_neighborhood, syntax_graph, LocalPattern, PatternBounds, PatternEdge};
use relcert::obstruction::{FiniteUniverse, Separation};
use relcert::pairwise::table_second_difference;
use relcert::random::{random_problem, random_slice, random_trace, random_universe, small_rational};
use relcert::stability::{global_stability_certificate, uniform_distance, Verdict};
use relcert::taxonomy::{constant_optimizer, strict_global_dominance};
use relcert::*;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_domains<R: Rng>(r: &mut R) -> Vec<u32> {
    let d = r.gen_range(1..=4);
    (0..d).map(|_| r.gen_range(2..=3)).collect()
}

/// Sufficiency from the definition: every pair of states agreeing on `set`
/// has the same optimizer set.
fn sufficient_by_pairs(p: &DecisionProblem, set: &CoordSet) -> bool {
    let n = p.state_count();
    let coords: Vec<Vec<u32>> = match p.space() {
        StateSpace::Product(s) => (0..n).map(|r| s.decode(r)).collect(),
        StateSpace::Explicit(e) => e.states().to_vec(),
    };
    (0..n).all(|s| {
        (s + 1..n).all(|t| !set.iter().all(|&i| coords[s][i] == coords[t][i]) || opt_indices(p, s) == opt_indices(p, t))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn class_count_bounded_and_sufficient_sets_form_a_filter(seed in any::<u64>()) {
        let mut r = rng(seed);
        let domains = random_domains(&mut r);
        let k = r.gen_range(1..=4);
        let p = random_problem(&mut r, &domains, k, 2);
        let prof = certification_profile(&p, &Limits::checked()).unwrap();
        prop_assert!(prof.quotient_count as u128 <= prof.class_bound);
        if domains.iter().all(|&m| m == 2) {
            prop_assert!(prof.quotient_count <= 1 << prof.srank);
        }
        for set in all_subsets(p.dim()) {
            let want = sufficient_by_pairs(&p, &set);
            prop_assert_eq!(is_sufficient(&p, &set, &Limits::default()).unwrap(), want);
            prop_assert_eq!(want, prof.relevant.is_subset(&set));
        }
    }

    #[test]
    fn mixed_difference_is_the_pair_table_second_difference(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = r.gen_range(2..=5);
        let s = random_slice(&mut r, d, 2);
        for a in 0..2 {
            for i in 0..d {
                for j in i + 1..d {
                    let want = table_second_difference(&s.coeffs()[a].pair(i, j));
                    prop_assert_eq!(s.mixed_difference(i, j, a).unwrap(), want);
                }
            }
        }
    }

    #[test]
    fn closure_traces_preserve_certification(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = r.gen_range(1..=4);
        let k = r.gen_range(1..=3);
        let base = random_slice(&mut r, d, k);
        let len = r.gen_range(0..=4);
        let steps = random_trace(&mut r, &base, len, 5);
        let limits = Limits::default();
        let (result, trace) = apply_trace(&base, &steps, &limits).unwrap();
        verify_invariance(&base, &result, &trace, &limits).unwrap();
        prop_assert_eq!(replay(&base, &trace, Some(&result), &limits).unwrap(), result);
    }

    #[test]
    fn hull_is_a_closure_operator(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (slices, edges) = random_universe(&mut r, 12, 10);
        let u = FiniteUniverse::new(slices, edges, &Limits::default()).unwrap();
        let n = u.len();
        let q: BTreeSet<usize> = (0..n).filter(|_| r.gen_bool(0.4)).collect();
        let q2: BTreeSet<usize> = q.iter().copied().chain((0..n).filter(|_| r.gen_bool(0.3))).collect();
        let h = u.hull(&q).unwrap();
        prop_assert!(q.is_subset(&h));
        prop_assert!(h.is_subset(&u.hull(&q2).unwrap()));
        prop_assert_eq!(u.hull(&h).unwrap(), h.clone());
        let mixed = u.classes().iter().any(|c| !c.is_disjoint(&q) && !c.is_subset(&q));
        match u.hull_separation(&q).unwrap() {
            Separation::Classifiable { classifier } => {
                prop_assert!(!mixed);
                prop_assert_eq!(classifier, q);
            }
            Separation::OrbitGap { positive, negative } => {
                prop_assert!(mixed);
                prop_assert!(q.contains(&positive) && !q.contains(&negative));
                prop_assert!(u.reachable(positive, negative));
            }
        }
    }

    #[test]
    fn uniform_distance_is_a_metric(seed in any::<u64>()) {
        let mut r = rng(seed);
        let domains = random_domains(&mut r);
        let k = r.gen_range(1..=3);
        let ps: Vec<DecisionProblem> = (0..3).map(|_| random_problem(&mut r, &domains, k, 3)).collect();
        let dist = |a: usize, b: usize| uniform_distance(&ps[a], &ps[b]).unwrap();
        prop_assert!(dist(0, 0).is_zero());
        prop_assert_eq!(dist(0, 1), dist(1, 0));
        prop_assert!(dist(0, 2) <= &dist(0, 1) + &dist(1, 2));
        prop_assert_eq!(dist(0, 1).is_zero(), ps[0] == ps[1]);
    }

    #[test]
    fn certified_perturbations_keep_the_profile(seed in any::<u64>()) {
        let mut r = rng(seed);
        let domains = random_domains(&mut r);
        let k = r.gen_range(2..=3);
        let d = random_problem(&mut r, &domains, k, 6);
        let scale = Rational::new(1, r.gen_range(4..=40));
        let cols: Vec<Vec<Rational>> = d
            .columns()
            .iter()
            .map(|c| c.iter().map(|v| v + &(&small_rational(&mut r, 1) * &scale)).collect())
            .collect();
        let e = DecisionProblem::new(d.space().clone(), d.actions().to_vec(), cols).unwrap();
        let limits = Limits::default();
        let cert = global_stability_certificate(&d, &e, false, &limits).unwrap();
        if cert.verdict == Verdict::Certified {
            let (qd, qe) = (Analysis::new(&d, &limits).unwrap(), Analysis::new(&e, &limits).unwrap());
            prop_assert_eq!(qd.quotient().blocks(), qe.quotient().blocks());
            for set in all_subsets(d.dim()) {
                prop_assert_eq!(sufficient_by_pairs(&d, &set), sufficient_by_pairs(&e, &set));
            }
        }
    }

    #[test]
    fn strict_dominance_implies_constant_optimizer(seed in any::<u64>()) {
        let mut r = rng(seed);
        let domains = random_domains(&mut r);
        let k = r.gen_range(1..=3);
        let mut p = random_problem(&mut r, &domains, k, 2);
        if r.gen_bool(0.5) {
            // Lift one action above everything so dominance actually occurs.
            let lead = r.gen_range(0..k);
            let mut cols = p.columns().to_vec();
            for v in &mut cols[lead] {
                *v = &*v + &Rational::from_int(5);
            }
            p = DecisionProblem::new(p.space().clone(), p.actions().to_vec(), cols).unwrap();
        }
        if let Some(a) = strict_global_dominance(&p) {
            prop_assert!(constant_optimizer(&p));
            prop_assert_eq!(opt_indices(&p, 0), vec![a]);
        }
    }

    #[test]
    fn scheme_documents_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let scheme = relcert::PatternScheme {
            bounds: PatternBounds { r_max: 2, n_max: 4, a_max: 3, c_max: Rational::from_int(3) },
            witness: (0..r.gen_range(0..3)).map(|_| random_pattern(&mut r)).collect(),
            forbidden: (0..r.gen_range(1..3)).map(|_| random_pattern(&mut r)).collect(),
        };
        let text = serde_json::to_string(&scheme).unwrap();
        let back: relcert::PatternScheme = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(serde_json::to_string(&back).unwrap(), text);
        prop_assert_eq!(back, scheme);
    }

    #[test]
    fn occurrence_is_monotone(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = r.gen_range(2..=5);
        let k = r.gen_range(1..=2);
        let s = random_slice(&mut r, d, k);
        let g = syntax_graph(&s);
        let root = r.gen_range(0..d);
        let radius = r.gen_range(0..=2);
        let nb = rooted_neighborhood(&g, root, radius + 1).unwrap();
        let p = pattern_at(&g, &nb, radius);
        prop_assert!(occurs(&p, &g, &nb));
        let wider = LocalPattern { radius: radius + 1, ..p.clone() };
        prop_assert!(occurs(&wider, &g, &nb));
        if p.vertices.len() > 1 {
            let drop = r.gen_range(1..p.vertices.len());
            prop_assert!(occurs(&remove_vertex(&p, drop), &g, &nb));
        }
    }
}

fn random_pattern<R: Rng>(r: &mut R) -> LocalPattern {
    let actions = r.gen_range(1..=3);
    let n = r.gen_range(1..=4);
    let unary = |r: &mut R| [small_rational(r, 3), small_rational(r, 3)];
    let vertices = (0..n).map(|_| (0..actions).map(|_| unary(r)).collect()).collect();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if r.gen_bool(0.4) {
                let tables = (0..actions).map(|_| [unary(r), unary(r)]).collect();
                edges.push(PatternEdge { u, v, tables });
            }
        }
    }
    LocalPattern { radius: r.gen_range(0..=2), root: r.gen_range(0..n), actions, vertices, edges }
}

/// The pattern read off the slice itself: every vertex within `radius` with
/// its labels and the edges among them.
fn pattern_at(g: &relcert::classifier::SyntaxGraph, nb: &relcert::classifier::Neighborhood, radius: usize) -> LocalPattern {
    let hosts: Vec<usize> = nb.within(radius).collect();
    let pos = |v: usize| hosts.iter().position(|&h| h == v);
    let vertices = hosts.iter().map(|&v| g.labels[v].clone()).collect();
    let edges = g
        .edges
        .iter()
        .filter_map(|(&(i, j), tables)| Some(PatternEdge { u: pos(i)?, v: pos(j)?, tables: tables.clone() }))
        .collect();
    LocalPattern { radius, root: 0, actions: g.actions, vertices, edges }
}

fn remove_vertex(p: &LocalPattern, drop: usize) -> LocalPattern {
    let shift = |x: usize| if x > drop { x - 1 } else { x };
    let mut q = p.clone();
    q.vertices.remove(drop);
    q.edges = p
        .edges
        .iter()
        .filter(|e| e.u != drop && e.v != drop)
        .map(|e| PatternEdge { u: shift(e.u), v: shift(e.v), tables: e.tables.clone() })
        .collect();
    q.root = shift(p.root);
    q
}

//! Seeded generators for problems, slices and closure traces. Values are
//! small integers and halves so that ties and cancellations are common.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::closure::{AffineAlpha, AffineBeta, ClosureStep, ClosureTarget};
use crate::pairwise::{Coefficients, CoefficientsDocument, PairTable, PairwiseSlice};
use crate::problem::{ActionId, DecisionProblem};
use crate::rational::Rational;
use crate::space::{CoordinateSpace, StateSpace};

pub fn small_rational<R: Rng>(rng: &mut R, max: i64) -> Rational {
    let den = if rng.gen_bool(0.2) { 2 } else { 1 };
    Rational::new(rng.gen_range(-max..=max), den)
}

pub fn action_ids(k: usize) -> Vec<ActionId> {
    (0..k).map(|a| format!("a{a}")).collect()
}

pub fn random_problem<R: Rng>(rng: &mut R, domains: &[u32], actions: usize, max: i64) -> DecisionProblem {
    let space = CoordinateSpace::new(domains.to_vec()).expect("nonempty domains");
    let n = space.state_count() as usize;
    let utility = (0..actions)
        .map(|_| (0..n).map(|_| small_rational(rng, max)).collect())
        .collect();
    DecisionProblem::new(StateSpace::Product(space), action_ids(actions), utility).expect("well-formed")
}

fn random_pair_table<R: Rng>(rng: &mut R, max: i64) -> PairTable {
    if rng.gen_bool(0.5) {
        crate::pairwise::product_table(small_rational(rng, max))
    } else {
        [
            [small_rational(rng, max), small_rational(rng, max)],
            [small_rational(rng, max), small_rational(rng, max)],
        ]
    }
}

pub fn random_coefficients<R: Rng>(rng: &mut R, d: usize, pair_density: f64, max: i64) -> Coefficients {
    let mut c = Coefficients::zero(d).with_constant(small_rational(rng, max));
    for i in 0..d {
        if rng.gen_bool(0.6) {
            c.unary[i] = [small_rational(rng, max), small_rational(rng, max)];
        }
    }
    for i in 0..d {
        for j in i + 1..d {
            if rng.gen_bool(pair_density) {
                c = c.add_pair(i, j, random_pair_table(rng, max));
            }
        }
    }
    c
}

pub fn random_slice<R: Rng>(rng: &mut R, d: usize, actions: usize) -> PairwiseSlice {
    let coeffs = (0..actions).map(|_| random_coefficients(rng, d, 0.4, 3)).collect();
    PairwiseSlice::new(d, action_ids(actions), coeffs).expect("well-formed")
}

/// A slice invariant under every coordinate permutation: each action uses one
/// unary table on all coordinates and one symmetric pair table on all pairs.
pub fn random_symmetric_slice<R: Rng>(rng: &mut R, d: usize, actions: usize) -> PairwiseSlice {
    let coeffs = (0..actions)
        .map(|_| {
            let u = [small_rational(rng, 3), small_rational(rng, 3)];
            let off = small_rational(rng, 2);
            let w: PairTable = if rng.gen_bool(0.4) {
                [[Rational::zero(), off.clone()], [off, Rational::zero()]]
            } else {
                [[small_rational(rng, 2), off.clone()], [off, small_rational(rng, 2)]]
            };
            let mut c = Coefficients::zero(d).with_constant(small_rational(rng, 3));
            for i in 0..d {
                c.unary[i] = u.clone();
                for j in i + 1..d {
                    c = c.add_pair(i, j, w.clone());
                }
            }
            c
        })
        .collect();
    PairwiseSlice::new(d, action_ids(actions), coeffs).expect("well-formed")
}

fn random_perm<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

/// A random step valid for `target`. `max_dim` caps irrelevant extension.
pub fn random_step<R: Rng, T: ClosureTarget>(rng: &mut R, target: &T, max_dim: usize) -> ClosureStep {
    let d = target.dimension();
    loop {
        match rng.gen_range(0..5) {
            0 => {
                return ClosureStep::RelabelActions {
                    perm: random_perm(rng, target.action_ids().len()),
                }
            }
            1 if d > 0 => return ClosureStep::RelabelCoords { perm: random_perm(rng, d) },
            2 => {
                let alpha = CoefficientsDocument::from(&random_coefficients(rng, d, 0.3, 3));
                let beta = Rational::new(rng.gen_range(1..=4), rng.gen_range(1..=3));
                return ClosureStep::Affine {
                    alpha: AffineAlpha::Pairwise(alpha),
                    beta: AffineBeta::Constant(beta),
                };
            }
            3 if target.action_ids().len() < 6 => {
                return ClosureStep::DuplicateAction {
                    source: target.action_ids().choose(rng).expect("nonempty").clone(),
                }
            }
            4 if d < max_dim => return ClosureStep::ExtendIrrelevant,
            _ => {}
        }
    }
}

/// `len` random steps, each valid on the result of the previous ones.
pub fn random_trace<R: Rng, T: ClosureTarget>(rng: &mut R, base: &T, len: usize, max_dim: usize) -> Vec<ClosureStep> {
    let limits = crate::certify::Limits::default();
    let mut current = base.clone();
    let mut steps = Vec::with_capacity(len);
    for _ in 0..len {
        let step = random_step(rng, &current, max_dim);
        current = current.apply_step(&step, &limits).expect("generated steps are valid").0;
        steps.push(step);
    }
    steps
}

/// Random universe of at most `max_slices` slices and `max_edges` recorded
/// single steps. Bases are independent random slices; every edge applies a
/// random step to an existing member, reusing the target when it is already
/// present.
pub fn random_universe<R: Rng>(
    rng: &mut R,
    max_slices: usize,
    max_edges: usize,
) -> (Vec<PairwiseSlice>, Vec<crate::obstruction::UniverseEdge>) {
    let limits = crate::certify::Limits::default();
    let bases = rng.gen_range(1..=3.min(max_slices));
    let mut slices: Vec<PairwiseSlice> = (0..bases)
        .map(|_| {
            let (d, k) = (rng.gen_range(2..=3), rng.gen_range(1..=3));
            random_slice(rng, d, k)
        })
        .collect();
    let mut edges = Vec::new();
    for _ in 0..rng.gen_range(0..=max_edges) {
        let from = rng.gen_range(0..slices.len());
        let step = random_step(rng, &slices[from], 4);
        let (next, _) = slices[from].apply_step(&step, &limits).expect("generated steps are valid");
        let to = match slices.iter().position(|s| *s == next) {
            Some(t) => t,
            None if slices.len() < max_slices => {
                slices.push(next);
                slices.len() - 1
            }
            None => continue,
        };
        edges.push(crate::obstruction::UniverseEdge { from, to, step });
    }
    (slices, edges)
}

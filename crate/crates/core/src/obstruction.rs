//! Orbit-gap witnesses: two slices joined by a recorded closure trace that
//! certify identically yet disagree on a target predicate. Includes the four
//! family constructions, bundle verification, a search for same-orbit
//! disagreements of an arbitrary evaluator, and hull algebra on explicit
//! finite universes of slices.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::certify::{certification_profile, Limits};
use crate::classifier::{evaluate_scheme, PatternScheme};
use crate::closure::{apply_trace, replay, verify_invariance, ClosureStep, ClosureTarget, ClosureTrace};
use crate::error::{Error, Result};
use crate::pairwise::{product_table, Coefficients, PairwiseSlice, TargetKind};
use crate::random::random_slice;
use crate::rational::Rational;

/// A slice predicate: one of the built-in targets or a pattern scheme.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Target {
    Kind(TargetKind),
    Scheme(PatternScheme),
}

impl Target {
    pub fn evaluate(&self, slice: &PairwiseSlice) -> Result<bool> {
        match self {
            Target::Kind(k) => slice.target_predicate(*k),
            Target::Scheme(s) => evaluate_scheme(s, slice),
        }
    }

    fn min_dim(&self) -> usize {
        match self {
            Target::Kind(TargetKind::MarginBounded) => 2,
            Target::Kind(_) => 3,
            Target::Scheme(_) => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleReport {
    pub base_value: bool,
    pub translated_value: bool,
    pub quotient_classes: usize,
    pub relevant: BTreeSet<usize>,
    pub subsets_checked: usize,
    pub optimizer_states_checked: usize,
}

/// `{base, trace, translated, kind, report}`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessBundle {
    pub base: PairwiseSlice,
    pub trace: ClosureTrace,
    pub translated: PairwiseSlice,
    pub kind: Target,
    pub report: BundleReport,
}

fn r(v: i64) -> Rational {
    Rational::from_int(v)
}

fn ids(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn all_pairs(c: Coefficients, n: usize, v: &Rational) -> Coefficients {
    let mut c = c;
    for i in 0..n {
        for j in i + 1..n {
            c = c.add_pair(i, j, product_table(v.clone()));
        }
    }
    c
}

/// Base slice of the family for `kind` on `n >= 3` coordinates.
///
/// `K` below is the number of coordinate pairs `n(n-1)/2`.
/// - dominant_pair: `U(a) = 2 x0 x1`, `U(b) = 0`.
/// - margin_bounded: `U(a) = 4 x0 + (1/K) Σ x_i x_j`, `U(b) = 2`.
/// - ghost_action: `U(a) = x0`, `U(b) = 1/2`, and a never-optimal `g` with
///   unary `[-1, -1]` on coordinate 0, `Σ x_i x_j`, and constant `-K - 1`.
/// - offset_signature: `U(a) = K + 1 + Σ x_i x_j`, `U(b) = 0`.
pub fn family_base(kind: TargetKind, n: usize) -> Result<PairwiseSlice> {
    if n < 3 {
        return Err(Error::Domain(format!("family {kind} needs n >= 3, got {n}")));
    }
    let k = (n * (n - 1) / 2) as i64;
    let zero = || Coefficients::zero(n);
    match kind {
        TargetKind::DominantPair => PairwiseSlice::new(n, ids(&["a", "b"]), vec![zero().add_pair(0, 1, product_table(r(2))), zero()]),
        TargetKind::MarginBounded => PairwiseSlice::new(
            n,
            ids(&["a", "b"]),
            vec![
                all_pairs(zero().with_unary(0, [r(0), r(4)]), n, &Rational::new(1, k)),
                zero().with_constant(r(2)),
            ],
        ),
        TargetKind::GhostAction => PairwiseSlice::new(
            n,
            ids(&["a", "b", "g"]),
            vec![
                zero().with_unary(0, [r(0), r(1)]),
                zero().with_constant(Rational::new(1, 2)),
                all_pairs(zero().with_unary(0, [r(-1), r(-1)]).with_constant(r(-k - 1)), n, &r(1)),
            ],
        ),
        TargetKind::OffsetSignature => PairwiseSlice::new(n, ids(&["a", "b"]), vec![all_pairs(zero().with_constant(r(k + 1)), n, &r(1)), zero()]),
    }
}

/// The affine step of the family: `3 x1 x2` for dominant_pair, `2 x1 x2` for
/// margin_bounded, `x0 x1` for the other two; `beta = 1` throughout.
pub fn family_step(kind: TargetKind) -> ClosureStep {
    match kind {
        TargetKind::DominantPair => ClosureStep::pair_affine(1, 2, r(3)),
        TargetKind::MarginBounded => ClosureStep::pair_affine(1, 2, r(2)),
        TargetKind::GhostAction | TargetKind::OffsetSignature => ClosureStep::pair_affine(0, 1, r(1)),
    }
}

fn build_bundle(base: &PairwiseSlice, steps: &[ClosureStep], target: &Target, limits: &Limits) -> Result<WitnessBundle> {
    let (translated, trace) = apply_trace(base, steps, limits)?;
    let invariance = verify_invariance(base, &translated, &trace, limits)?;
    let profile = certification_profile(&base.expand(limits)?, limits)?;
    let bundle = WitnessBundle {
        report: BundleReport {
            base_value: target.evaluate(base)?,
            translated_value: target.evaluate(&translated)?,
            quotient_classes: profile.quotient_count,
            relevant: profile.relevant,
            subsets_checked: invariance.subsets_checked,
            optimizer_states_checked: invariance.optimizer_states_checked,
        },
        base: base.clone(),
        trace,
        translated,
        kind: target.clone(),
    };
    Ok(bundle)
}

pub fn make_family(kind: TargetKind, n: usize, limits: &Limits) -> Result<WitnessBundle> {
    let base = family_base(kind, n)?;
    let bundle = build_bundle(&base, &[family_step(kind)], &Target::Kind(kind), limits)?;
    let check = verify_bundle(&bundle, limits)?;
    if !check.passed() {
        return Err(Error::TheoryViolation(format!(
            "family {kind} at n={n} failed its own checks: {}",
            check.failures().join("; ")
        )));
    }
    Ok(bundle)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    fn from_result(name: &'static str, r: Result<()>) -> Self {
        match r {
            Ok(()) => Check { name, passed: true, detail: None },
            Err(e) => Check {
                name,
                passed: false,
                detail: Some(e.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BundleVerification {
    pub checks: Vec<Check>,
}

impl BundleVerification {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{}: {}", c.name, c.detail.as_deref().unwrap_or("failed")))
            .collect()
    }
}

/// Re-runs each bundle invariant independently: trace replay, predicate
/// disagreement, identical certification, and consistency of the stored
/// report. Errors only when the bundle cannot be evaluated at all.
pub fn verify_bundle(bundle: &WitnessBundle, limits: &Limits) -> Result<BundleVerification> {
    let replay_check = replay(&bundle.base, &bundle.trace, Some(&bundle.translated), limits).map(|_| ());

    let values = bundle
        .kind
        .evaluate(&bundle.base)
        .and_then(|b| Ok((b, bundle.kind.evaluate(&bundle.translated)?)));
    let flip_check = match &values {
        Ok((b, t)) if b != t => Ok(()),
        Ok((b, _)) => Err(Error::Verification(format!("predicate is {b} on both base and translate"))),
        Err(e) => Err(e.clone()),
    };

    let cert_check = (|| {
        verify_invariance(&bundle.base, &bundle.translated, &bundle.trace, limits)?;
        let pb = certification_profile(&bundle.base.expand(limits)?, limits)?;
        let pt = certification_profile(&bundle.translated.expand(limits)?, limits)?;
        if pt.relevant != bundle.trace.transport_set(&pb.relevant) || pt.quotient_count != pb.quotient_count {
            return Err(Error::Verification(format!(
                "profiles differ: base relevant {:?} with {} classes, translate relevant {:?} with {} classes",
                pb.relevant, pb.quotient_count, pt.relevant, pt.quotient_count
            )));
        }
        Ok(())
    })();

    let report_check = (|| {
        let (b, t) = values.clone()?;
        let pb = certification_profile(&bundle.base.expand(limits)?, limits)?;
        let rep = &bundle.report;
        if rep.base_value != b || rep.translated_value != t || rep.quotient_classes != pb.quotient_count || rep.relevant != pb.relevant {
            return Err(Error::Verification("stored report disagrees with recomputed values".into()));
        }
        Ok(())
    })();

    Ok(BundleVerification {
        checks: vec![
            Check::from_result("trace_replay", replay_check),
            Check::from_result("predicate_disagreement", flip_check),
            Check::from_result("certification_equality", cert_check),
            Check::from_result("report", report_check),
        ],
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub seed: u64,
    /// Random candidate bases tried after the family bases.
    pub random_candidates: usize,
    pub dims: Vec<usize>,
    pub actions: Vec<usize>,
    /// Multipliers `v` of the pair steps `alpha = v x_i x_j`.
    pub scales: Vec<Rational>,
    /// Stop after this many predicate evaluations.
    pub max_evaluations: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            random_candidates: 200,
            dims: vec![3, 4],
            actions: vec![2, 3],
            scales: [1, 2, 3, -1, -2, -3].into_iter().map(r).collect(),
            max_evaluations: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SearchOutcome {
    pub bundle: Option<WitnessBundle>,
    pub candidates_tried: usize,
    pub steps_tried: usize,
    pub evaluations: usize,
    /// True when the evaluation budget ran out before the search space did.
    pub exhausted_budget: bool,
}

/// Looks for a base slice and a single pair step on which `target` changes
/// value. Family bases come first (each with its own step tried first), then
/// seeded random slices.
pub fn falsify_classifier(target: &Target, config: &SearchConfig, limits: &Limits) -> Result<SearchOutcome> {
    let mut out = SearchOutcome {
        bundle: None,
        candidates_tried: 0,
        steps_tried: 0,
        evaluations: 0,
        exhausted_budget: false,
    };
    let mut candidates: Vec<(PairwiseSlice, Option<ClosureStep>)> = Vec::new();
    for &n in &config.dims {
        if n >= 3 {
            for kind in TargetKind::ALL {
                candidates.push((family_base(kind, n)?, Some(family_step(kind))));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let dims: Vec<usize> = config.dims.iter().copied().filter(|&d| d >= target.min_dim().max(2)).collect();
    if !dims.is_empty() && !config.actions.is_empty() {
        for _ in 0..config.random_candidates {
            let d = dims[rng.gen_range(0..dims.len())];
            let k = config.actions[rng.gen_range(0..config.actions.len())];
            candidates.push((random_slice(&mut rng, d, k), None));
        }
    }
    for (base, first) in candidates {
        if base.dim() < target.min_dim() {
            continue;
        }
        out.candidates_tried += 1;
        let before = target.evaluate(&base)?;
        out.evaluations += 1;
        let d = base.dim();
        let steps = first.into_iter().chain((0..d).flat_map(|i| {
            (i + 1..d).flat_map(move |j| config.scales.iter().map(move |v| ClosureStep::pair_affine(i, j, v.clone())))
        }));
        for step in steps {
            if out.evaluations >= config.max_evaluations {
                out.exhausted_budget = true;
                return Ok(out);
            }
            out.steps_tried += 1;
            let (after, _) = base.apply_step(&step, limits)?;
            out.evaluations += 1;
            if target.evaluate(&after)? != before {
                let bundle = build_bundle(&base, &[step], target, limits)?;
                let check = verify_bundle(&bundle, limits)?;
                if !check.passed() {
                    return Err(Error::TheoryViolation(format!(
                        "search produced an unverifiable bundle: {}",
                        check.failures().join("; ")
                    )));
                }
                out.bundle = Some(bundle);
                return Ok(out);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniverseEdge {
    pub from: usize,
    pub to: usize,
    pub step: ClosureStep,
}

/// Explicit slices with recorded single-step edges. Reachability is the
/// equivalence relation generated by the edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FiniteUniverse {
    slices: Vec<PairwiseSlice>,
    edges: Vec<UniverseEdge>,
    class_of: Vec<usize>,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

impl FiniteUniverse {
    /// Replays every edge; an edge whose step does not produce its target
    /// exactly is rejected.
    pub fn new(slices: Vec<PairwiseSlice>, edges: Vec<UniverseEdge>, limits: &Limits) -> Result<Self> {
        let n = slices.len();
        let mut parent: Vec<usize> = (0..n).collect();
        for (k, e) in edges.iter().enumerate() {
            if e.from >= n || e.to >= n {
                return Err(Error::Validation(format!("edge {k} ({} -> {}) leaves the universe of {n}", e.from, e.to)));
            }
            let (got, _) = slices[e.from].apply_step(&e.step, limits)?;
            if got != slices[e.to] {
                return Err(Error::Verification(format!("edge {k}: step does not map slice {} to slice {}", e.from, e.to)));
            }
            let (a, b) = (find(&mut parent, e.from), find(&mut parent, e.to));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let roots: Vec<usize> = (0..n).map(|x| find(&mut parent, x)).collect();
        let class_of = crate::certify::canonical_labels(roots);
        Ok(Self { slices, edges, class_of })
    }

    pub fn slices(&self) -> &[PairwiseSlice] {
        &self.slices
    }

    pub fn edges(&self) -> &[UniverseEdge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn reachable(&self, a: usize, b: usize) -> bool {
        self.class_of[a] == self.class_of[b]
    }

    pub fn classes(&self) -> Vec<BTreeSet<usize>> {
        let count = self.class_of.iter().max().map_or(0, |m| m + 1);
        let mut out = vec![BTreeSet::new(); count];
        for (x, &c) in self.class_of.iter().enumerate() {
            out[c].insert(x);
        }
        out
    }

    /// Members satisfying `target`.
    pub fn predicate_set(&self, target: &Target) -> Result<BTreeSet<usize>> {
        let mut out = BTreeSet::new();
        for (k, s) in self.slices.iter().enumerate() {
            if target.evaluate(s)? {
                out.insert(k);
            }
        }
        Ok(out)
    }

    fn check_subset(&self, q: &BTreeSet<usize>) -> Result<()> {
        match q.iter().find(|&&x| x >= self.len()) {
            Some(x) => Err(Error::Domain(format!("index {x} is not in a universe of {}", self.len()))),
            None => Ok(()),
        }
    }

    /// Members reachable from some member of `q`.
    pub fn hull(&self, q: &BTreeSet<usize>) -> Result<BTreeSet<usize>> {
        self.check_subset(q)?;
        let hit: BTreeSet<usize> = q.iter().map(|&x| self.class_of[x]).collect();
        Ok((0..self.len()).filter(|x| hit.contains(&self.class_of[*x])).collect())
    }

    pub fn hull_separation(&self, q: &BTreeSet<usize>) -> Result<Separation> {
        self.check_subset(q)?;
        for &p in q {
            if let Some(m) = (0..self.len()).find(|m| !q.contains(m) && self.reachable(p, *m)) {
                return Ok(Separation::OrbitGap { positive: p, negative: m });
            }
        }
        Ok(Separation::Classifiable { classifier: self.hull(q)? })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Separation {
    /// `Hull(Q)` misses the complement's hull; it is the least
    /// orbit-constant predicate containing `Q`.
    Classifiable { classifier: BTreeSet<usize> },
    /// Reachability-equivalent members with different status.
    OrbitGap { positive: usize, negative: usize },
}

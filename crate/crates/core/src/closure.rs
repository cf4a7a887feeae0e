//! Closure steps with materialized state, action and coordinate transports,
//! trace application and replay, and brute-force invariance checks.
//!
//! Two tiers: general decision problems accept every step (state
//! duplication only on explicit state lists); pairwise slices accept steps
//! that keep the pairwise representation, so affine moves there need a
//! pairwise `alpha` and a constant `beta`.

use std::collections::BTreeSet;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::certify::{opt_indices, subset_family, Analysis, CoordSet, Limits};
use crate::error::{Error, Result};
use crate::pairwise::{product_table, CoefficientsDocument, PairwiseSlice};
use crate::problem::{ActionId, DecisionProblem};
use crate::rational::Rational;
use crate::space::{CoordinateSpace, ExplicitSpace, StateSpace};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AffineAlpha {
    /// Action-independent pairwise term; `unary` may be omitted.
    Pairwise(CoefficientsDocument),
    /// One value per state.
    Table(Vec<Rational>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AffineBeta {
    Constant(Rational),
    Table(Vec<Rational>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClosureStep {
    /// Position `i` keeps its column and takes the old identifier at `perm[i]`.
    RelabelActions { perm: Vec<usize> },
    /// Old coordinate `i` becomes coordinate `perm[i]`.
    RelabelCoords { perm: Vec<usize> },
    /// `U'(a, s) = alpha(s) + beta(s) * U(a, s)`.
    Affine { alpha: AffineAlpha, beta: AffineBeta },
    DuplicateAction { source: ActionId },
    DuplicateState { source: usize },
    /// Appends a binary coordinate that no utility reads.
    ExtendIrrelevant,
}

impl ClosureStep {
    /// `alpha = v * x_i * x_j`, `beta = 1`.
    pub fn pair_affine(i: usize, j: usize, v: Rational) -> Self {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        let mut pairs = IndexMap::new();
        pairs.insert(format!("{i},{j}"), product_table(v));
        ClosureStep::Affine {
            alpha: AffineAlpha::Pairwise(CoefficientsDocument {
                c: Rational::zero(),
                unary: Vec::new(),
                pairs,
            }),
            beta: AffineBeta::Constant(Rational::one()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ClosureStep::RelabelActions { .. } => "relabel_actions",
            ClosureStep::RelabelCoords { .. } => "relabel_coords",
            ClosureStep::Affine { .. } => "affine",
            ClosureStep::DuplicateAction { .. } => "duplicate_action",
            ClosureStep::DuplicateState { .. } => "duplicate_state",
            ClosureStep::ExtendIrrelevant => "extend_irrelevant",
        }
    }
}

/// Transport of a single step, all by index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepTransport {
    /// Old state -> its representative in the new object.
    pub state_map: Vec<usize>,
    /// New state -> the old state it copies.
    pub state_origin: Vec<usize>,
    /// Old action -> new actions carrying its column.
    pub action_map: Vec<Vec<usize>>,
    /// Old coordinate -> new coordinate.
    pub coord_map: Vec<usize>,
}

impl StepTransport {
    fn identity(states: usize, actions: usize, dim: usize) -> Self {
        Self {
            state_map: (0..states).collect(),
            state_origin: (0..states).collect(),
            action_map: (0..actions).map(|a| vec![a]).collect(),
            coord_map: (0..dim).collect(),
        }
    }

    fn then(&self, next: &StepTransport) -> StepTransport {
        StepTransport {
            state_map: self.state_map.iter().map(|&s| next.state_map[s]).collect(),
            state_origin: next.state_origin.iter().map(|&t| self.state_origin[t]).collect(),
            action_map: self
                .action_map
                .iter()
                .map(|targets| {
                    let mut out: Vec<usize> = targets.iter().flat_map(|&a| next.action_map[a].iter().copied()).collect();
                    out.sort_unstable();
                    out
                })
                .collect(),
            coord_map: self.coord_map.iter().map(|&i| next.coord_map[i]).collect(),
        }
    }
}

/// Steps plus their composed transports, with actions named by identifier
/// (base identifiers as keys, result identifiers as values).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosureTrace {
    pub steps: Vec<ClosureStep>,
    pub state_map: Vec<usize>,
    pub state_origin: Vec<usize>,
    pub action_map: IndexMap<ActionId, Vec<ActionId>>,
    pub coord_map: Vec<usize>,
}

impl ClosureTrace {
    /// The forward image of a base coordinate set.
    pub fn transport_set(&self, set: &CoordSet) -> CoordSet {
        set.iter().map(|&i| self.coord_map[i]).collect()
    }
}

/// Objects closure steps act on.
pub trait ClosureTarget: Sized + Clone + PartialEq {
    const TIER: &'static str;
    fn action_ids(&self) -> &[ActionId];
    fn dimension(&self) -> usize;
    fn states(&self) -> u128;
    fn apply_step(&self, step: &ClosureStep, limits: &Limits) -> Result<(Self, StepTransport)>;
    /// The decision problem whose certification the step must preserve.
    fn certification_problem(&self, limits: &Limits) -> Result<DecisionProblem>;
}

pub fn apply_trace<T: ClosureTarget>(base: &T, steps: &[ClosureStep], limits: &Limits) -> Result<(T, ClosureTrace)> {
    limits.check_states(base.states())?;
    let base_states = base.states() as usize;
    let mut cum = StepTransport::identity(base_states, base.action_ids().len(), base.dimension());
    let mut current = base.clone();
    for (index, step) in steps.iter().enumerate() {
        let (next, t) = current
            .apply_step(step, limits)
            .map_err(|e| Error::Step { index, source: Box::new(e) })?;
        cum = cum.then(&t);
        current = next;
    }
    let ids = current.action_ids();
    let action_map = base
        .action_ids()
        .iter()
        .cloned()
        .zip(cum.action_map.iter().map(|t| t.iter().map(|&a| ids[a].clone()).collect()))
        .collect();
    let trace = ClosureTrace {
        steps: steps.to_vec(),
        state_map: cum.state_map,
        state_origin: cum.state_origin,
        action_map,
        coord_map: cum.coord_map,
    };
    Ok((current, trace))
}

/// Re-applies `trace.steps` to `base` and checks the recorded transports
/// and, when given, the recorded result.
pub fn replay<T: ClosureTarget>(base: &T, trace: &ClosureTrace, expected: Option<&T>, limits: &Limits) -> Result<T> {
    let (result, fresh) = apply_trace(base, &trace.steps, limits)?;
    let mut bad = Vec::new();
    if fresh.state_map != trace.state_map {
        bad.push("state_map");
    }
    if fresh.state_origin != trace.state_origin {
        bad.push("state_origin");
    }
    if fresh.action_map != trace.action_map {
        bad.push("action_map");
    }
    if fresh.coord_map != trace.coord_map {
        bad.push("coord_map");
    }
    if expected.is_some_and(|e| *e != result) {
        bad.push("result");
    }
    if !bad.is_empty() {
        return Err(Error::Verification(format!("trace replay mismatch in {}", bad.join(", "))));
    }
    Ok(result)
}

fn check_perm(perm: &[usize], n: usize, what: &str) -> Result<()> {
    let distinct: BTreeSet<usize> = perm.iter().copied().collect();
    if perm.len() != n || distinct.len() != n || perm.iter().any(|&p| p >= n) {
        return Err(Error::Validation(format!("{what} {perm:?} is not a permutation of 0..{n}")));
    }
    Ok(())
}

fn relabeled_ids(ids: &[ActionId], perm: &[usize]) -> Result<Vec<ActionId>> {
    check_perm(perm, ids.len(), "action permutation")?;
    Ok(perm.iter().map(|&p| ids[p].clone()).collect())
}

fn fresh_id(ids: &[ActionId], source: &str) -> ActionId {
    let mut k = 1;
    loop {
        let id = if k == 1 { format!("{source}_dup") } else { format!("{source}_dup{k}") };
        if !ids.contains(&id) {
            return id;
        }
        k += 1;
    }
}

fn source_index(ids: &[ActionId], source: &str) -> Result<usize> {
    ids.iter()
        .position(|a| a == source)
        .ok_or_else(|| Error::Validation(format!("duplicate source action {source:?} does not exist")))
}

fn positive(beta: &Rational) -> Result<()> {
    if !beta.is_positive() {
        return Err(Error::Validation(format!("affine beta must be positive, got {beta}")));
    }
    Ok(())
}

/// State relabeling induced by a coordinate permutation on a product space.
fn permuted_space(space: &CoordinateSpace, perm: &[usize]) -> (CoordinateSpace, Vec<usize>) {
    let mut domains = vec![0; space.dim()];
    for (i, &c) in space.domains().iter().enumerate() {
        domains[perm[i]] = c;
    }
    let target = CoordinateSpace::new(domains).expect("permuted domains are nonempty");
    let n = space.state_count() as usize;
    let map = (0..n)
        .map(|s| {
            let x = space.decode(s);
            let mut y = vec![0; x.len()];
            for (i, &v) in x.iter().enumerate() {
                y[perm[i]] = v;
            }
            target.encode(&y).expect("in range")
        })
        .collect();
    (target, map)
}

fn invert(map: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; map.len()];
    for (s, &t) in map.iter().enumerate() {
        inv[t] = s;
    }
    inv
}

impl ClosureTarget for DecisionProblem {
    const TIER: &'static str = "problem";

    fn action_ids(&self) -> &[ActionId] {
        self.actions()
    }

    fn dimension(&self) -> usize {
        self.dim()
    }

    fn states(&self) -> u128 {
        self.state_count() as u128
    }

    fn certification_problem(&self, _limits: &Limits) -> Result<DecisionProblem> {
        Ok(self.clone())
    }

    fn apply_step(&self, step: &ClosureStep, limits: &Limits) -> Result<(Self, StepTransport)> {
        let n = self.state_count();
        let k = self.actions().len();
        let d = self.dim();
        let identity = StepTransport::identity(n, k, d);
        match step {
            ClosureStep::RelabelActions { perm } => {
                let ids = relabeled_ids(self.actions(), perm)?;
                Ok((DecisionProblem::new(self.space().clone(), ids, self.columns().to_vec())?, identity))
            }
            ClosureStep::RelabelCoords { perm } => {
                check_perm(perm, d, "coordinate permutation")?;
                let coord_map = perm.clone();
                match self.space() {
                    StateSpace::Product(space) => {
                        let (target, map) = permuted_space(space, perm);
                        let origin = invert(&map);
                        let utility = self
                            .columns()
                            .iter()
                            .map(|col| origin.iter().map(|&s| col[s].clone()).collect())
                            .collect();
                        let p = DecisionProblem::new(StateSpace::Product(target), self.actions().to_vec(), utility)?;
                        Ok((
                            p,
                            StepTransport {
                                state_map: map,
                                state_origin: origin,
                                coord_map,
                                ..identity
                            },
                        ))
                    }
                    StateSpace::Explicit(e) => {
                        let mut domains = vec![0; d];
                        for (i, &c) in e.domains().iter().enumerate() {
                            domains[perm[i]] = c;
                        }
                        let states = e
                            .states()
                            .iter()
                            .map(|x| {
                                let mut y = vec![0; d];
                                for (i, &v) in x.iter().enumerate() {
                                    y[perm[i]] = v;
                                }
                                y
                            })
                            .collect();
                        let space = StateSpace::Explicit(ExplicitSpace::new(domains, states)?);
                        let p = DecisionProblem::new(space, self.actions().to_vec(), self.columns().to_vec())?;
                        Ok((p, StepTransport { coord_map, ..identity }))
                    }
                }
            }
            ClosureStep::Affine { alpha, beta } => {
                let alpha: Vec<Rational> = match alpha {
                    AffineAlpha::Table(t) => {
                        if t.len() != n {
                            return Err(Error::Validation(format!("affine alpha has {} values for {n} states", t.len())));
                        }
                        t.clone()
                    }
                    AffineAlpha::Pairwise(doc) => {
                        if !self.space().is_binary() {
                            return Err(Error::Validation("a pairwise alpha needs a binary state space".into()));
                        }
                        let c = doc.to_coefficients(d, "alpha")?;
                        (0..n).map(|s| c.eval(&self.space().coords(s))).collect()
                    }
                };
                let beta: Vec<Rational> = match beta {
                    AffineBeta::Constant(b) => {
                        positive(b)?;
                        vec![b.clone(); n]
                    }
                    AffineBeta::Table(t) => {
                        if t.len() != n {
                            return Err(Error::Validation(format!("affine beta has {} values for {n} states", t.len())));
                        }
                        t.iter().try_for_each(positive)?;
                        t.clone()
                    }
                };
                let utility = self
                    .columns()
                    .iter()
                    .map(|col| (0..n).map(|s| &alpha[s] + &(&beta[s] * &col[s])).collect())
                    .collect();
                Ok((DecisionProblem::new(self.space().clone(), self.actions().to_vec(), utility)?, identity))
            }
            ClosureStep::DuplicateAction { source } => {
                let src = source_index(self.actions(), source)?;
                let mut ids = self.actions().to_vec();
                ids.push(fresh_id(&ids, source));
                let mut utility = self.columns().to_vec();
                utility.push(utility[src].clone());
                let mut t = identity;
                t.action_map[src].push(k);
                Ok((DecisionProblem::new(self.space().clone(), ids, utility)?, t))
            }
            ClosureStep::DuplicateState { source } => {
                let StateSpace::Explicit(e) = self.space() else {
                    return Err(Error::UnsupportedStep {
                        step: step.name().into(),
                        tier: "product-space",
                    });
                };
                if *source >= n {
                    return Err(Error::Validation(format!("duplicate source state {source} out of range ({n} states)")));
                }
                limits.check_states(n as u128 + 1)?;
                let mut states = e.states().to_vec();
                states.push(states[*source].clone());
                let utility = self
                    .columns()
                    .iter()
                    .map(|col| {
                        let mut col = col.clone();
                        col.push(col[*source].clone());
                        col
                    })
                    .collect();
                let space = StateSpace::Explicit(ExplicitSpace::new(e.domains().to_vec(), states)?);
                let mut t = identity;
                t.state_origin.push(*source);
                Ok((DecisionProblem::new(space, self.actions().to_vec(), utility)?, t))
            }
            ClosureStep::ExtendIrrelevant => {
                limits.check_states(2 * n as u128)?;
                let mut domains = self.space().domains().to_vec();
                domains.push(2);
                let space = match self.space() {
                    StateSpace::Product(_) => StateSpace::Product(CoordinateSpace::new(domains)?),
                    StateSpace::Explicit(e) => {
                        let states = e
                            .states()
                            .iter()
                            .flat_map(|x| {
                                (0..2).map(move |b| {
                                    let mut y = x.clone();
                                    y.push(b);
                                    y
                                })
                            })
                            .collect();
                        StateSpace::Explicit(ExplicitSpace::new(domains, states)?)
                    }
                };
                let utility = self
                    .columns()
                    .iter()
                    .map(|col| col.iter().flat_map(|v| [v.clone(), v.clone()]).collect())
                    .collect();
                let t = StepTransport {
                    state_map: (0..n).map(|s| 2 * s).collect(),
                    state_origin: (0..2 * n).map(|t| t / 2).collect(),
                    ..identity
                };
                Ok((DecisionProblem::new(space, self.actions().to_vec(), utility)?, t))
            }
        }
    }
}

impl ClosureTarget for PairwiseSlice {
    const TIER: &'static str = "slice";

    fn action_ids(&self) -> &[ActionId] {
        self.actions()
    }

    fn dimension(&self) -> usize {
        self.dim()
    }

    fn states(&self) -> u128 {
        CoordinateSpace::binary(self.dim()).state_count()
    }

    fn certification_problem(&self, limits: &Limits) -> Result<DecisionProblem> {
        self.expand(limits)
    }

    fn apply_step(&self, step: &ClosureStep, limits: &Limits) -> Result<(Self, StepTransport)> {
        let d = self.dim();
        let space = CoordinateSpace::binary(d);
        limits.check_states(space.state_count())?;
        let n = space.state_count() as usize;
        let k = self.actions().len();
        let identity = StepTransport::identity(n, k, d);
        let unsupported = || Error::UnsupportedStep {
            step: step.name().into(),
            tier: Self::TIER,
        };
        match step {
            ClosureStep::RelabelActions { perm } => {
                let ids = relabeled_ids(self.actions(), perm)?;
                Ok((PairwiseSlice::new(d, ids, self.coeffs().to_vec())?, identity))
            }
            ClosureStep::RelabelCoords { perm } => {
                check_perm(perm, d, "coordinate permutation")?;
                let (_, map) = permuted_space(&space, perm);
                let coeffs = self.coeffs().iter().map(|c| c.permute(perm)).collect();
                let t = StepTransport {
                    state_origin: invert(&map),
                    state_map: map,
                    coord_map: perm.clone(),
                    ..identity
                };
                Ok((PairwiseSlice::new(d, self.actions().to_vec(), coeffs)?, t))
            }
            ClosureStep::Affine { alpha, beta } => {
                let (AffineAlpha::Pairwise(doc), AffineBeta::Constant(beta)) = (alpha, beta) else {
                    return Err(unsupported());
                };
                positive(beta)?;
                let alpha = doc.to_coefficients(d, "alpha")?;
                let coeffs = self.coeffs().iter().map(|c| c.affine(&alpha, beta)).collect();
                Ok((PairwiseSlice::new(d, self.actions().to_vec(), coeffs)?, identity))
            }
            ClosureStep::DuplicateAction { source } => {
                let src = source_index(self.actions(), source)?;
                let mut ids = self.actions().to_vec();
                ids.push(fresh_id(&ids, source));
                let mut coeffs = self.coeffs().to_vec();
                coeffs.push(coeffs[src].clone());
                let mut t = identity;
                t.action_map[src].push(k);
                Ok((PairwiseSlice::new(d, ids, coeffs)?, t))
            }
            ClosureStep::DuplicateState { .. } => Err(unsupported()),
            ClosureStep::ExtendIrrelevant => {
                limits.check_states(2 * n as u128)?;
                let coeffs = self.coeffs().iter().map(|c| c.extend()).collect();
                let t = StepTransport {
                    state_map: (0..n).map(|s| 2 * s).collect(),
                    state_origin: (0..2 * n).map(|t| t / 2).collect(),
                    ..identity
                };
                Ok((PairwiseSlice::new(d + 1, self.actions().to_vec(), coeffs)?, t))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub subsets_checked: usize,
    /// True when the subset family was sampled rather than enumerated.
    pub sampled: bool,
    pub relevance_checked: usize,
    pub new_coordinates: Vec<usize>,
    pub optimizer_states_checked: usize,
}

/// Checks by brute force that `result` certifies exactly like `base` under
/// the transports of `trace`.
pub fn verify_invariance<T: ClosureTarget>(base: &T, result: &T, trace: &ClosureTrace, limits: &Limits) -> Result<InvarianceReport> {
    let bp = base.certification_problem(limits)?;
    let rp = result.certification_problem(limits)?;
    let ba = Analysis::new(&bp, limits)?;
    let ra = Analysis::new(&rp, limits)?;
    let violation = |msg: String| Err(Error::TheoryViolation(msg));

    let (subsets, sampled) = subset_family(bp.dim(), limits);
    for set in &subsets {
        let lifted = trace.transport_set(set);
        let (b, r) = (ba.is_sufficient(set)?, ra.is_sufficient(&lifted)?);
        if b != r {
            return violation(format!(
                "sufficiency of {set:?} is {b} on the base but transported set {lifted:?} gives {r}"
            ));
        }
    }
    for i in 0..bp.dim() {
        let (b, r) = (ba.is_relevant(i)?, ra.is_relevant(trace.coord_map[i])?);
        if b != r {
            return violation(format!(
                "coordinate {i} relevance {b} but transported coordinate {} gives {r}",
                trace.coord_map[i]
            ));
        }
    }
    let image: BTreeSet<usize> = trace.coord_map.iter().copied().collect();
    let new_coordinates: Vec<usize> = (0..rp.dim()).filter(|i| !image.contains(i)).collect();
    for &i in &new_coordinates {
        if ra.is_relevant(i)? {
            return violation(format!("new coordinate {i} is relevant"));
        }
    }
    if trace.state_origin.len() != rp.state_count() {
        return Err(Error::Verification(format!(
            "trace has {} state origins for {} result states",
            trace.state_origin.len(),
            rp.state_count()
        )));
    }
    let base_ids = bp.actions();
    for (t, &s) in trace.state_origin.iter().enumerate() {
        let expected: BTreeSet<&str> = opt_indices(&bp, s)
            .into_iter()
            .flat_map(|a| trace.action_map[&base_ids[a]].iter().map(String::as_str))
            .collect();
        let got: BTreeSet<&str> = opt_indices(&rp, t).into_iter().map(|a| rp.actions()[a].as_str()).collect();
        if expected != got {
            return violation(format!(
                "result state {} has optimizer set {got:?}, transport of base state {} gives {expected:?}",
                rp.space().label(t),
                bp.space().label(s)
            ));
        }
    }
    Ok(InvarianceReport {
        subsets_checked: subsets.len(),
        sampled,
        relevance_checked: bp.dim(),
        new_coordinates,
        optimizer_states_checked: rp.state_count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::certification_profile;
    use crate::pairwise::Coefficients;

    fn r(v: i64) -> Rational {
        Rational::from_int(v)
    }

    fn standing() -> DecisionProblem {
        DecisionProblem::from_fn(CoordinateSpace::binary(2), &["a", "b"], |a, x| {
            if a == 0 {
                r(x[0] as i64)
            } else {
                r(0)
            }
        })
        .unwrap()
    }

    fn dominant_base() -> PairwiseSlice {
        PairwiseSlice::new(
            3,
            vec!["a".into(), "b".into()],
            vec![Coefficients::zero(3).add_pair(0, 1, product_table(r(2))), Coefficients::zero(3)],
        )
        .unwrap()
    }

    fn set(v: &[usize]) -> CoordSet {
        v.iter().copied().collect()
    }

    #[test]
    fn orbit_translate() {
        let l = Limits::default();
        let (v, trace) = apply_trace(&dominant_base(), &[ClosureStep::pair_affine(1, 2, r(3))], &l).unwrap();
        assert_eq!(v.mixed_difference(1, 2, 0).unwrap(), r(3));
        assert_eq!(v.mixed_difference(0, 1, 0).unwrap(), r(2));
        let report = verify_invariance(&dominant_base(), &v, &trace, &l).unwrap();
        assert_eq!(report.optimizer_states_checked, 8);
        let (bp, vp) = (dominant_base().expand(&l).unwrap(), v.expand(&l).unwrap());
        for s in 0..8 {
            assert_eq!(opt_indices(&bp, s), opt_indices(&vp, s));
        }
    }

    #[test]
    fn identity_relabeling() {
        let l = Limits::default();
        let (p, t) = standing().apply_step(&ClosureStep::RelabelActions { perm: vec![0, 1] }, &l).unwrap();
        assert_eq!(p, standing());
        assert_eq!(t, StepTransport::identity(4, 2, 2));
    }

    #[test]
    fn empty_trace() {
        let (p, t) = apply_trace(&standing(), &[], &Limits::default()).unwrap();
        assert_eq!(p, standing());
        assert_eq!(t.coord_map, vec![0, 1]);
        assert_eq!(t.state_map, vec![0, 1, 2, 3]);
        assert_eq!(t.action_map["a"], vec!["a".to_string()]);
    }

    #[test]
    fn extension_of_standing_example() {
        let l = Limits::checked();
        let (p, t) = apply_trace(&standing(), &[ClosureStep::ExtendIrrelevant], &l).unwrap();
        assert_eq!(p.dim(), 3);
        assert_eq!(p.state_count(), 8);
        let a = Analysis::new(&p, &l).unwrap();
        assert!(!a.is_relevant(2).unwrap());
        assert!(a.is_sufficient(&t.transport_set(&set(&[0]))).unwrap());
        let report = verify_invariance(&standing(), &p, &t, &l).unwrap();
        assert_eq!(report.new_coordinates, vec![2]);
        assert_eq!(certification_profile(&p, &l).unwrap().srank, 1);
    }

    #[test]
    fn extend_then_swap() {
        let l = Limits::checked();
        let steps = [ClosureStep::ExtendIrrelevant, ClosureStep::RelabelCoords { perm: vec![0, 2, 1] }];
        let (p, t) = apply_trace(&standing(), &steps, &l).unwrap();
        assert_eq!(t.transport_set(&set(&[0])), set(&[0]));
        assert_eq!(t.coord_map, vec![0, 2]);
        let report = verify_invariance(&standing(), &p, &t, &l).unwrap();
        assert_eq!(report.new_coordinates, vec![1]);
        assert!(Analysis::new(&p, &l).unwrap().is_sufficient(&set(&[0])).unwrap());
    }

    #[test]
    fn duplicate_action() {
        let l = Limits::default();
        let steps = [
            ClosureStep::DuplicateAction { source: "a".into() },
            ClosureStep::DuplicateAction { source: "a".into() },
        ];
        let (p, t) = apply_trace(&standing(), &steps, &l).unwrap();
        assert_eq!(p.actions(), ["a", "b", "a_dup", "a_dup2"]);
        assert_eq!(t.action_map["a"], ["a", "a_dup", "a_dup2"]);
        for s in 0..4 {
            let opt = opt_indices(&p, s);
            assert_eq!(opt.contains(&0), opt.contains(&2));
        }
        verify_invariance(&standing(), &p, &t, &l).unwrap();
    }

    #[test]
    fn relabel_actions_moves_ids() {
        let l = Limits::default();
        let (p, t) = apply_trace(&standing(), &[ClosureStep::RelabelActions { perm: vec![1, 0] }], &l).unwrap();
        assert_eq!(p.actions(), ["b", "a"]);
        assert_eq!(t.action_map["a"], ["b"]);
        verify_invariance(&standing(), &p, &t, &l).unwrap();
    }

    #[test]
    fn state_duplication_tiers() {
        let l = Limits::default();
        let step = ClosureStep::DuplicateState { source: 2 };
        let err = standing().apply_step(&step, &l).unwrap_err();
        assert!(matches!(err, Error::UnsupportedStep { tier: "product-space", .. }));
        let err = dominant_base().apply_step(&step, &l).unwrap_err();
        assert_eq!(err.to_string(), "unsupported step duplicate_state on slice tier");
        let explicit = standing().to_explicit();
        let (p, t) = apply_trace(&explicit, &[step], &l).unwrap();
        assert_eq!(p.state_count(), 5);
        assert_eq!(t.state_origin, vec![0, 1, 2, 3, 2]);
        let report = verify_invariance(&explicit, &p, &t, &l).unwrap();
        assert_eq!(report.optimizer_states_checked, 5);
    }

    #[test]
    fn affine_errors() {
        let l = Limits::default();
        let zero_beta = ClosureStep::Affine {
            alpha: AffineAlpha::Table(vec![r(0); 4]),
            beta: AffineBeta::Constant(r(0)),
        };
        assert!(matches!(standing().apply_step(&zero_beta, &l), Err(Error::Validation(_))));
        let table_beta = ClosureStep::Affine {
            alpha: AffineAlpha::Pairwise(CoefficientsDocument {
                c: r(0),
                unary: vec![],
                pairs: IndexMap::new(),
            }),
            beta: AffineBeta::Table(vec![r(1); 8]),
        };
        assert!(matches!(
            dominant_base().apply_step(&table_beta, &l),
            Err(Error::UnsupportedStep { tier: "slice", .. })
        ));
        let mixed = ClosureStep::Affine {
            alpha: AffineAlpha::Table(vec![r(3), r(-1), r(0), r(7)]),
            beta: AffineBeta::Table(vec![r(1), r(2), r(5), r(1)]),
        };
        let (p, t) = apply_trace(&standing(), &[mixed], &l).unwrap();
        verify_invariance(&standing(), &p, &t, &l).unwrap();
    }

    #[test]
    fn trace_errors_carry_the_step_index() {
        let steps = [ClosureStep::ExtendIrrelevant, ClosureStep::RelabelCoords { perm: vec![0, 0, 1] }];
        let err = apply_trace(&standing(), &steps, &Limits::default()).unwrap_err();
        assert!(matches!(err, Error::Step { index: 1, .. }));
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn slice_and_problem_tiers_agree() {
        let l = Limits::default();
        let steps = [
            ClosureStep::pair_affine(0, 2, r(-1)),
            ClosureStep::RelabelCoords { perm: vec![2, 0, 1] },
            ClosureStep::ExtendIrrelevant,
            ClosureStep::DuplicateAction { source: "b".into() },
            ClosureStep::RelabelActions { perm: vec![2, 0, 1] },
        ];
        let (s, ts) = apply_trace(&dominant_base(), &steps, &l).unwrap();
        let (p, tp) = apply_trace(&dominant_base().expand(&l).unwrap(), &steps, &l).unwrap();
        assert_eq!(s.expand(&l).unwrap(), p);
        assert_eq!(ts, tp);
        verify_invariance(&dominant_base(), &s, &ts, &l).unwrap();
    }

    #[test]
    fn trace_serde_replays() {
        let l = Limits::default();
        let steps = [
            ClosureStep::pair_affine(1, 2, r(3)),
            ClosureStep::DuplicateAction { source: "a".into() },
            ClosureStep::ExtendIrrelevant,
        ];
        let (v, trace) = apply_trace(&dominant_base(), &steps, &l).unwrap();
        let text = serde_json::to_string(&trace).unwrap();
        assert!(text.contains(r#"{"op":"affine","alpha":{"pairwise":{"c":"0/1","unary":[],"pairs":{"1,2":[["0/1","0/1"],["0/1","3/1"]]}}},"beta":{"constant":"1/1"}}"#), "{text}");
        let back: ClosureTrace = serde_json::from_str(&text).unwrap();
        assert_eq!(replay(&dominant_base(), &back, Some(&v), &l).unwrap(), v);
        let mut tampered = back.clone();
        tampered.coord_map[0] = 2;
        let err = replay(&dominant_base(), &tampered, Some(&v), &l).unwrap_err();
        assert_eq!(err.to_string(), "verification failed: trace replay mismatch in coord_map");
    }

    #[test]
    fn sampled_subsets_above_cap() {
        let l = Limits {
            subset_cap: 2,
            ..Limits::default()
        };
        let (p, t) = apply_trace(&dominant_base(), &[ClosureStep::ExtendIrrelevant], &l).unwrap();
        let report = verify_invariance(&dominant_base(), &p, &t, &l).unwrap();
        assert!(report.sampled);
    }
}

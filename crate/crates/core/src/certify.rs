//! Optimizer sets, the decision quotient, and the exact-certification
//! profile (sufficient sets, relevant coordinates, structural rank).
//!
//! Sufficiency of a coordinate set `I` is decided in one pass: states are
//! grouped by their restriction to `I` and each group must sit inside a
//! single quotient class.

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::problem::{ActionId, DecisionProblem};

pub type CoordSet = BTreeSet<usize>;

/// Enumeration limits shared by every brute-force scan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Limits {
    /// Largest state count any scan may enumerate.
    pub max_states: usize,
    /// Largest dimension for which all `2^d` coordinate subsets are scanned.
    pub subset_cap: usize,
    /// Run the expensive internal cross-checks (principal filter, bounds).
    pub self_check: bool,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_states: 1 << 20,
            subset_cap: 10,
            self_check: false,
        }
    }
}

impl Limits {
    pub fn checked() -> Self {
        Self {
            self_check: true,
            ..Self::default()
        }
    }

    pub fn check_states(&self, requested: u128) -> Result<()> {
        if requested > self.max_states as u128 {
            return Err(Error::Resource {
                what: "states",
                requested,
                limit: self.max_states as u128,
            });
        }
        Ok(())
    }

    pub fn check_subsets(&self, d: usize) -> Result<()> {
        if d > self.subset_cap {
            return Err(Error::Resource {
                what: "subset-enumeration dimension",
                requested: d as u128,
                limit: self.subset_cap as u128,
            });
        }
        Ok(())
    }
}

/// All subsets of `{0..d-1}` in bitmask order.
pub fn all_subsets(d: usize) -> impl Iterator<Item = CoordSet> {
    assert!(d < 64, "subset enumeration over {d} coordinates");
    (0u64..(1u64 << d)).map(move |mask| (0..d).filter(|i| mask >> i & 1 == 1).collect())
}

/// Indices of the maximizing actions at `state`, in declaration order.
const SAMPLED_SUBSETS: usize = 256;

/// Every subset of `0..d` when `d` is within the subset cap; otherwise the
/// empty and full sets, singletons, co-singletons, and seeded random subsets.
/// The flag reports sampling.
pub fn subset_family(d: usize, limits: &Limits) -> (Vec<CoordSet>, bool) {
    if d <= limits.subset_cap {
        return (all_subsets(d).collect(), false);
    }
    let full: CoordSet = (0..d).collect();
    let mut out = vec![CoordSet::new(), full.clone()];
    for i in 0..d {
        out.push([i].into_iter().collect());
        let mut without = full.clone();
        without.remove(&i);
        out.push(without);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..SAMPLED_SUBSETS {
        out.push((0..d).filter(|_| rng.gen_bool(0.5)).collect());
    }
    (out, true)
}

/// Indices of the maximizing actions at `state`, ascending.
pub fn opt_indices(problem: &DecisionProblem, state: usize) -> Vec<usize> {
    let cols = problem.columns();
    let best = cols
        .iter()
        .map(|c| &c[state])
        .max()
        .expect("nonempty action list");
    cols.iter()
        .enumerate()
        .filter(|(_, c)| &c[state] == best)
        .map(|(a, _)| a)
        .collect()
}

fn check_state(problem: &DecisionProblem, state: usize) -> Result<()> {
    if state >= problem.state_count() {
        return Err(Error::Domain(format!(
            "state {state} out of range (space has {} states)",
            problem.state_count()
        )));
    }
    Ok(())
}

/// Every action achieving the maximum utility at `state`.
pub fn optimizer_set(problem: &DecisionProblem, state: usize) -> Result<Vec<ActionId>> {
    check_state(problem, state)?;
    Ok(opt_indices(problem, state)
        .into_iter()
        .map(|a| problem.actions()[a].clone())
        .collect())
}

/// Partition of the states by equality of optimizer sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QuotientPartition {
    /// Class index of every state; contiguous from 0 in order of first appearance.
    pub class_of: Vec<usize>,
    /// Optimizer set of each class.
    pub classes: Vec<Vec<ActionId>>,
}

impl QuotientPartition {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// States of each class, in state order.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut blocks = vec![Vec::new(); self.classes.len()];
        for (s, &c) in self.class_of.iter().enumerate() {
            blocks[c].push(s);
        }
        blocks
    }
}

/// Canonical integer labels of a partition given by arbitrary keys: first
/// appearance order. Two key vectors describe the same set partition iff
/// their canonical labels are equal.
pub fn canonical_labels<K: std::hash::Hash + Eq>(keys: impl IntoIterator<Item = K>) -> Vec<usize> {
    let mut seen = HashMap::new();
    keys.into_iter()
        .map(|k| {
            let next = seen.len();
            *seen.entry(k).or_insert(next)
        })
        .collect()
}

pub fn quotient(problem: &DecisionProblem, limits: &Limits) -> Result<QuotientPartition> {
    Ok(Analysis::new(problem, limits)?.quotient)
}

pub fn is_sufficient(problem: &DecisionProblem, set: &CoordSet, limits: &Limits) -> Result<bool> {
    Analysis::new(problem, limits)?.is_sufficient(set)
}

pub fn is_relevant(problem: &DecisionProblem, i: usize, limits: &Limits) -> Result<bool> {
    Analysis::new(problem, limits)?.is_relevant(i)
}

pub fn certification_profile(problem: &DecisionProblem, limits: &Limits) -> Result<CertificationProfile> {
    Analysis::new(problem, limits)?.profile()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CertificationProfile {
    pub relevant: CoordSet,
    pub minimal_sufficient: CoordSet,
    pub srank: usize,
    pub quotient_count: usize,
    /// Generator of the principal filter of sufficient sets.
    pub sufficient_family_generator: CoordSet,
    /// Product of the domain sizes of the relevant coordinates (`2^srank`
    /// on binary spaces); the class count never exceeds it.
    pub class_bound: u128,
}

/// A problem with its quotient computed once, answering repeated
/// sufficiency and relevance queries.
#[derive(Debug, Clone)]
pub struct Analysis<'a> {
    problem: &'a DecisionProblem,
    limits: Limits,
    quotient: QuotientPartition,
}

impl<'a> Analysis<'a> {
    pub fn new(problem: &'a DecisionProblem, limits: &Limits) -> Result<Self> {
        limits.check_states(problem.state_count() as u128)?;
        let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut classes = Vec::new();
        let mut class_of = Vec::with_capacity(problem.state_count());
        for s in 0..problem.state_count() {
            let opt = opt_indices(problem, s);
            let next = index.len();
            let c = *index.entry(opt).or_insert_with_key(|opt| {
                classes.push(opt.iter().map(|&a| problem.actions()[a].clone()).collect());
                next
            });
            class_of.push(c);
        }
        Ok(Self {
            problem,
            limits: limits.clone(),
            quotient: QuotientPartition { class_of, classes },
        })
    }

    pub fn problem(&self) -> &'a DecisionProblem {
        self.problem
    }

    pub fn quotient(&self) -> &QuotientPartition {
        &self.quotient
    }

    pub fn class_of(&self, state: usize) -> usize {
        self.quotient.class_of[state]
    }

    fn check_set(&self, set: &CoordSet) -> Result<()> {
        if let Some(&i) = set.iter().find(|&&i| i >= self.problem.dim()) {
            return Err(Error::Domain(format!(
                "coordinate {i} out of range (dimension {})",
                self.problem.dim()
            )));
        }
        Ok(())
    }

    /// A pair of states agreeing on `set` with different optimizer sets.
    pub fn nonsufficiency_witness(&self, set: &CoordSet) -> Result<Option<(usize, usize)>> {
        self.check_set(set)?;
        let space = self.problem.space();
        let mut first: HashMap<Vec<u32>, usize> = HashMap::new();
        for s in 0..self.problem.state_count() {
            let key: Vec<u32> = set.iter().map(|&i| space.coord(s, i)).collect();
            let rep = *first.entry(key).or_insert(s);
            if self.class_of(rep) != self.class_of(s) {
                return Ok(Some((rep, s)));
            }
        }
        Ok(None)
    }

    pub fn is_sufficient(&self, set: &CoordSet) -> Result<bool> {
        Ok(self.nonsufficiency_witness(set)?.is_none())
    }

    fn complement_of(&self, i: usize) -> Result<CoordSet> {
        if i >= self.problem.dim() {
            return Err(Error::Domain(format!(
                "coordinate {i} out of range (dimension {})",
                self.problem.dim()
            )));
        }
        Ok((0..self.problem.dim()).filter(|&j| j != i).collect())
    }

    /// States agreeing off coordinate `i` with different optimizer sets.
    pub fn relevance_witness(&self, i: usize) -> Result<Option<(usize, usize)>> {
        let rest = self.complement_of(i)?;
        self.nonsufficiency_witness(&rest)
    }

    pub fn is_relevant(&self, i: usize) -> Result<bool> {
        Ok(self.relevance_witness(i)?.is_some())
    }

    pub fn relevant_set(&self) -> Result<CoordSet> {
        let mut out = CoordSet::new();
        for i in 0..self.problem.dim() {
            if self.is_relevant(i)? {
                out.insert(i);
            }
        }
        Ok(out)
    }

    /// A minimal sufficient set found by dropping coordinates in index order.
    /// On product spaces it is the unique one and equals the relevant set.
    pub fn greedy_minimal_sufficient(&self) -> Result<CoordSet> {
        let mut set: CoordSet = (0..self.problem.dim()).collect();
        if !self.is_sufficient(&set)? {
            return Err(Error::Domain(
                "no coordinate set is sufficient: duplicated coordinate vectors carry different optimizer sets".into(),
            ));
        }
        for i in 0..self.problem.dim() {
            set.remove(&i);
            if !self.is_sufficient(&set)? {
                set.insert(i);
            }
        }
        Ok(set)
    }

    pub fn profile(&self) -> Result<CertificationProfile> {
        let relevant = self.relevant_set()?;
        let product = self.problem.space().is_product();
        let minimal_sufficient = if product {
            if !self.is_sufficient(&relevant)? {
                return Err(Error::TheoryViolation(format!(
                    "relevant set {relevant:?} is not sufficient on a product space"
                )));
            }
            relevant.clone()
        } else {
            self.greedy_minimal_sufficient()?
        };
        let domains = self.problem.space().domains();
        let class_bound = relevant
            .iter()
            .try_fold(1u128, |acc, &i| acc.checked_mul(domains[i] as u128))
            .unwrap_or(u128::MAX);
        let profile = CertificationProfile {
            srank: relevant.len(),
            quotient_count: self.quotient.len(),
            sufficient_family_generator: relevant.clone(),
            minimal_sufficient,
            relevant,
            class_bound,
        };
        if product && profile.quotient_count as u128 > profile.class_bound {
            return Err(Error::TheoryViolation(format!(
                "{} quotient classes exceed the bound {} from the relevant coordinates",
                profile.quotient_count, profile.class_bound
            )));
        }
        if self.limits.self_check && product && self.problem.dim() <= self.limits.subset_cap {
            self.check_principal_filter(&profile.relevant)?;
        }
        Ok(profile)
    }

    /// On product spaces: `I` is sufficient iff it contains the relevant set.
    pub fn check_principal_filter(&self, relevant: &CoordSet) -> Result<()> {
        self.limits.check_subsets(self.problem.dim())?;
        for set in all_subsets(self.problem.dim()) {
            let sufficient = self.is_sufficient(&set)?;
            if sufficient != relevant.is_subset(&set) {
                return Err(Error::TheoryViolation(format!(
                    "subset {set:?}: sufficient={sufficient} but contains relevant set {relevant:?} is {}",
                    !sufficient
                )));
            }
        }
        Ok(())
    }

    pub fn summary_check<S: std::hash::Hash + Eq>(&self, summary: &[S]) -> Result<SummaryCheck> {
        if summary.len() != self.problem.state_count() {
            return Err(Error::Validation(format!(
                "summary has {} entries, space has {} states",
                summary.len(),
                self.problem.state_count()
            )));
        }
        let mut first: HashMap<&S, usize> = HashMap::new();
        let mut witness = None;
        for (s, sym) in summary.iter().enumerate() {
            let rep = *first.entry(sym).or_insert(s);
            if witness.is_none() && self.class_of(rep) != self.class_of(s) {
                witness = Some((rep, s));
            }
        }
        let distinct_symbols = first.len();
        Ok(SummaryCheck {
            refines: witness.is_none(),
            witness,
            distinct_symbols,
            quotient_count: self.quotient.len(),
            enough_symbols: distinct_symbols >= self.quotient.len(),
        })
    }
}

/// Result of checking a state summary against the optimizer quotient.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SummaryCheck {
    /// Every summary fiber lies inside one quotient class.
    pub refines: bool,
    /// Two states with one symbol but different optimizer sets.
    pub witness: Option<(usize, usize)>,
    pub distinct_symbols: usize,
    pub quotient_count: usize,
    /// `distinct_symbols >= quotient_count`; implied by `refines`.
    pub enough_symbols: bool,
}

pub fn summary_refines_quotient<S: std::hash::Hash + Eq>(
    problem: &DecisionProblem,
    summary: &[S],
    limits: &Limits,
) -> Result<SummaryCheck> {
    Analysis::new(problem, limits)?.summary_check(summary)
}

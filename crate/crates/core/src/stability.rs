//! Uniform perturbations: distances, strict gaps, stability certificates,
//! witness preservation, and pairs of arbitrarily close problems whose
//! certification differs.

use serde::{Deserialize, Serialize};

use crate::certify::{certification_profile, opt_indices, Analysis, CoordSet, Limits};
use crate::error::{Error, Result};
use crate::problem::DecisionProblem;
use crate::rational::Rational;
use crate::space::{CoordinateSpace, StateSpace};

fn same_shape(d: &DecisionProblem, e: &DecisionProblem) -> Result<()> {
    if d.space() != e.space() {
        return Err(Error::Validation("problems live on different state spaces".into()));
    }
    if d.actions() != e.actions() {
        return Err(Error::Validation(format!(
            "action lists differ: {:?} vs {:?}",
            d.actions(),
            e.actions()
        )));
    }
    Ok(())
}

/// `max_{a,s} |U(a,s) - U'(a,s)|`
pub fn uniform_distance(d: &DecisionProblem, e: &DecisionProblem) -> Result<Rational> {
    same_shape(d, e)?;
    let mut best = Rational::zero();
    for (cd, ce) in d.columns().iter().zip(e.columns()) {
        for (x, y) in cd.iter().zip(ce) {
            let v = (x - y).abs();
            if v > best {
                best = v;
            }
        }
    }
    Ok(best)
}

/// Per-state margin of the best action over the best strictly worse one;
/// 0 at ties; `None` (unbounded) where every action attains the same value
/// because there is only one action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GapProfile {
    pub gaps: Vec<Option<Rational>>,
    pub min_gap: Option<Rational>,
}

pub fn gap_profile(problem: &DecisionProblem) -> GapProfile {
    let gaps: Vec<Option<Rational>> = (0..problem.state_count())
        .map(|s| {
            if problem.actions().len() == 1 {
                return None;
            }
            let opt = opt_indices(problem, s);
            if opt.len() > 1 {
                return Some(Rational::zero());
            }
            let top = problem.utility(opt[0], s);
            let second = (0..problem.actions().len())
                .filter(|&a| a != opt[0])
                .map(|a| problem.utility(a, s))
                .max()
                .expect("at least two actions");
            Some(top - second)
        })
        .collect();
    let min_gap = gaps.iter().flatten().min().cloned();
    GapProfile { gaps, min_gap }
}

fn exceeds_twice(gap: &Option<Rational>, delta: &Rational) -> bool {
    match gap {
        None => true,
        Some(g) => *g > &Rational::from_int(2) * delta,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Certified,
    Refused,
}

/// `{delta, min_gap, verdict, checked_profiles}`
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StabilityCertificate {
    pub delta: Rational,
    pub min_gap: Option<Rational>,
    pub verdict: Verdict,
    pub checked_profiles: bool,
}

/// Certifies that `e` has the same quotient and sufficient family as `d`
/// when every strict gap of `d` exceeds twice their distance. With `verify`,
/// a certified verdict is cross-checked by brute force.
pub fn global_stability_certificate(
    d: &DecisionProblem,
    e: &DecisionProblem,
    verify: bool,
    limits: &Limits,
) -> Result<StabilityCertificate> {
    let delta = uniform_distance(d, e)?;
    let gp = gap_profile(d);
    let ok = gp.gaps.iter().all(|g| exceeds_twice(g, &delta));
    let mut cert = StabilityCertificate {
        delta,
        min_gap: gp.min_gap,
        verdict: if ok { Verdict::Certified } else { Verdict::Refused },
        checked_profiles: false,
    };
    if ok && verify {
        let (qd, qe) = (Analysis::new(d, limits)?, Analysis::new(e, limits)?);
        if qd.quotient().blocks() != qe.quotient().blocks() {
            return Err(Error::TheoryViolation("certified perturbation changed the quotient".into()));
        }
        let (pd, pe) = (certification_profile(d, limits)?, certification_profile(e, limits)?);
        if pd.relevant != pe.relevant || pd.minimal_sufficient != pe.minimal_sufficient {
            return Err(Error::TheoryViolation(format!(
                "certified perturbation changed relevance: {:?} -> {:?}",
                pd.relevant, pe.relevant
            )));
        }
        cert.checked_profiles = true;
    }
    Ok(cert)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// States differing only on coordinate `i` with different optimizers.
    Relevance { i: usize, s: usize, t: usize },
    /// States agreeing on `set` with different optimizers.
    Nonsufficiency { set: CoordSet, s: usize, t: usize },
}

impl Witness {
    fn states(&self) -> (usize, usize) {
        match self {
            Witness::Relevance { s, t, .. } | Witness::Nonsufficiency { s, t, .. } => (*s, *t),
        }
    }

    /// Checks the witness in `problem`; `strict` also demands singleton
    /// optimizer sets.
    pub fn validate(&self, problem: &DecisionProblem, strict: bool) -> Result<()> {
        let (s, t) = self.states();
        let n = problem.state_count();
        if s >= n || t >= n {
            return Err(Error::Validation(format!("witness states ({s},{t}) out of range ({n} states)")));
        }
        let (os, ot) = (opt_indices(problem, s), opt_indices(problem, t));
        if strict && (os.len() != 1 || ot.len() != 1) {
            return Err(Error::Validation("witness optimizer sets are not singletons".into()));
        }
        if os == ot {
            return Err(Error::Validation("witness states have the same optimizer set".into()));
        }
        let space = problem.space();
        let (xs, xt) = (space.coords(s), space.coords(t));
        match self {
            Witness::Relevance { i, .. } => {
                if *i >= problem.dim() {
                    return Err(Error::Validation(format!("coordinate {i} out of range")));
                }
                if let Some(j) = (0..problem.dim()).find(|&j| j != *i && xs[j] != xt[j]) {
                    return Err(Error::Validation(format!("witness states also differ on coordinate {j}")));
                }
            }
            Witness::Nonsufficiency { set, .. } => {
                if let Some(j) = set.iter().find(|&&j| j >= problem.dim() || xs[j] != xt[j]) {
                    return Err(Error::Validation(format!("witness states disagree on coordinate {j} of the set")));
                }
            }
        }
        Ok(())
    }
}

/// True when both witness states keep a strict gap above `2δ`, in which case
/// the witness still works in `e` (re-checked when `verify` is set).
pub fn witness_preservation(d: &DecisionProblem, e: &DecisionProblem, witness: &Witness, verify: bool) -> Result<bool> {
    witness.validate(d, true)?;
    let delta = uniform_distance(d, e)?;
    let gp = gap_profile(d);
    let (s, t) = witness.states();
    let preserved = exceeds_twice(&gp.gaps[s], &delta) && exceeds_twice(&gp.gaps[t], &delta);
    if preserved && verify {
        witness
            .validate(e, true)
            .map_err(|err| Error::TheoryViolation(format!("preserved witness fails in the perturbed problem: {err}")))?;
    }
    Ok(preserved)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipKind {
    Relevance,
    Sufficiency,
}

/// One-coordinate Boolean problems: in `d` the optimizer tracks the bit with
/// utilities of size `ε/2`; in `e` every action ties everywhere. The same
/// pair flips both relevance and sufficiency of the empty set.
pub fn make_flip_pair(epsilon: &Rational, _kind: FlipKind) -> Result<(DecisionProblem, DecisionProblem)> {
    if !epsilon.is_positive() {
        return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
    }
    let half = epsilon * &Rational::new(1, 2);
    let space = CoordinateSpace::binary(1);
    let d = DecisionProblem::from_fn(space.clone(), &["a", "b"], |a, x| {
        let on = (x[0] == 1) == (a == 0);
        if on {
            half.clone()
        } else {
            Rational::zero()
        }
    })?;
    let e = DecisionProblem::new(
        StateSpace::Product(space),
        d.actions().to_vec(),
        vec![vec![Rational::zero(); 2]; 2],
    )?;
    Ok((d, e))
}

/// Brute-force confirmation that a flip pair flips what its kind says.
pub fn check_flip(d: &DecisionProblem, e: &DecisionProblem, kind: FlipKind, epsilon: &Rational, limits: &Limits) -> Result<()> {
    if uniform_distance(d, e)? > *epsilon {
        return Err(Error::Verification("flip pair is farther apart than epsilon".into()));
    }
    let (ad, ae) = (Analysis::new(d, limits)?, Analysis::new(e, limits)?);
    let flipped = match kind {
        FlipKind::Relevance => ad.is_relevant(0)? && !ae.is_relevant(0)?,
        FlipKind::Sufficiency => !ad.is_sufficient(&CoordSet::new())? && ae.is_sufficient(&CoordSet::new())?,
    };
    if !flipped {
        return Err(Error::Verification(format!("{kind:?} did not flip")));
    }
    Ok(())
}

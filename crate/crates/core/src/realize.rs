//! Indicator realizations: any labeling kernel, and any equivalence relation,
//! as the optimizer quotient of a decision problem.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::DecisionProblem;
use crate::rational::Rational;
use crate::space::StateSpace;

/// A label per state, in state order. `{"labels": [...]}`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labeling {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<Vec<u32>>,
    pub labels: Vec<String>,
}

impl Labeling {
    pub fn new(labels: Vec<String>) -> Self {
        Self { space: None, labels }
    }

    /// Distinct labels in first-appearance order.
    pub fn range(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for l in &self.labels {
            if !out.contains(l) {
                out.push(l.clone());
            }
        }
        out
    }
}

/// `U(a, s) = 1` if `a = phi(s)`, else `0`; actions are the labels themselves.
pub fn realize_labeling(space: &StateSpace, phi: &Labeling) -> Result<DecisionProblem> {
    let n = space.state_count();
    if n == 0 {
        return Err(Error::Domain("cannot realize a labeling on an empty state space".into()));
    }
    if phi.labels.len() as u128 != n {
        return Err(Error::Validation(format!(
            "labeling has {} entries, space has {n} states",
            phi.labels.len()
        )));
    }
    let range = phi.range();
    let utility = range
        .iter()
        .map(|a| {
            phi.labels
                .iter()
                .map(|l| if l == a { Rational::one() } else { Rational::zero() })
                .collect()
        })
        .collect();
    DecisionProblem::new(space.clone(), range, utility)
}

/// Realizes a set partition of the states given as blocks of state indices.
/// Block `k` becomes action `c{k}`.
pub fn realize_equivalence(space: &StateSpace, blocks: &[Vec<usize>]) -> Result<DecisionProblem> {
    let n = usize::try_from(space.state_count()).map_err(|_| Error::Resource {
        what: "states",
        requested: space.state_count(),
        limit: usize::MAX as u128,
    })?;
    let mut owner: Vec<Option<usize>> = vec![None; n];
    let mut overlapping = Vec::new();
    let mut out_of_range = Vec::new();
    for (k, block) in blocks.iter().enumerate() {
        for &s in block {
            match owner.get_mut(s) {
                None => out_of_range.push(s),
                Some(slot @ None) => *slot = Some(k),
                Some(Some(_)) => overlapping.push(s),
            }
        }
    }
    let missing: Vec<usize> = (0..n).filter(|&s| owner[s].is_none()).collect();
    if !(overlapping.is_empty() && missing.is_empty() && out_of_range.is_empty()) {
        return Err(Error::Validation(format!(
            "blocks do not partition the {n} states: overlapping {overlapping:?}, missing {missing:?}, out of range {out_of_range:?}"
        )));
    }
    let labels = owner
        .into_iter()
        .map(|k| format!("c{}", k.expect("checked above")))
        .collect();
    realize_labeling(space, &Labeling::new(labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::{certification_profile, quotient, Limits};
    use crate::space::CoordinateSpace;

    fn cube(d: usize) -> StateSpace {
        StateSpace::Product(CoordinateSpace::binary(d))
    }

    #[test]
    fn identity_labeling_has_m_classes() {
        for m in 1..=7u32 {
            let space = StateSpace::Product(CoordinateSpace::new(vec![m]).unwrap());
            let phi = Labeling::new((0..m).map(|s| format!("s{s}")).collect());
            let p = realize_labeling(&space, &phi).unwrap();
            let q = quotient(&p, &Limits::default()).unwrap();
            assert_eq!(q.len(), m as usize);
            assert!(q.classes.iter().all(|c| c.len() == 1));
        }
    }

    #[test]
    fn constant_labeling() {
        let phi = Labeling::new(vec!["x".into(); 8]);
        let p = realize_labeling(&cube(3), &phi).unwrap();
        let prof = certification_profile(&p, &Limits::checked()).unwrap();
        assert_eq!(prof.quotient_count, 1);
        assert!(prof.relevant.is_empty());
    }

    #[test]
    fn parity_needs_every_coordinate() {
        let space = CoordinateSpace::binary(3);
        let phi = Labeling::new(
            (0..8)
                .map(|s| if space.decode(s).iter().sum::<u32>() % 2 == 0 { "even" } else { "odd" }.to_string())
                .collect(),
        );
        let p = realize_labeling(&StateSpace::Product(space), &phi).unwrap();
        let prof = certification_profile(&p, &Limits::checked()).unwrap();
        assert_eq!(prof.quotient_count, 2);
        assert_eq!(prof.srank, 3);
    }

    #[test]
    fn equivalence_partitions() {
        let limits = Limits::checked();
        let singletons: Vec<Vec<usize>> = (0..4).map(|s| vec![s]).collect();
        let q = quotient(&realize_equivalence(&cube(2), &singletons).unwrap(), &limits).unwrap();
        assert_eq!(q.blocks(), singletons);

        let q = quotient(&realize_equivalence(&cube(2), &[vec![0, 1, 2, 3]]).unwrap(), &limits).unwrap();
        assert_eq!(q.len(), 1);

        // {00,11} and {01,10}
        let xor = vec![vec![0, 3], vec![1, 2]];
        let p = realize_equivalence(&cube(2), &xor).unwrap();
        assert_eq!(quotient(&p, &limits).unwrap().blocks(), xor);
        assert_eq!(certification_profile(&p, &limits).unwrap().srank, 2);
    }

    #[test]
    fn equivalence_offenders_are_listed() {
        let err = realize_equivalence(&cube(2), &[vec![0, 1], vec![1, 5]]).unwrap_err();
        assert_eq!(
            err.to_string(),
            "validation error: blocks do not partition the 4 states: overlapping [1], missing [2, 3], out of range [5]"
        );
    }

    #[test]
    fn realized_ids_are_labels() {
        let phi = Labeling::new(vec!["q".into(), "p".into()]);
        let p = realize_labeling(&cube(1), &phi).unwrap();
        assert_eq!(p.actions(), ["q", "p"]);
    }
}

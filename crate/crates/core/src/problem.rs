//! Finite decision problems with exact rational utilities.

use std::collections::HashSet;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::Rational;
use crate::space::{CoordinateSpace, ExplicitSpace, StateSpace};

pub type ActionId = String;

/// A finite state space, an ordered action list, and a utility for every
/// (action, state) pair. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "ProblemDocument", into = "ProblemDocument")]
pub struct DecisionProblem {
    space: StateSpace,
    actions: Vec<ActionId>,
    /// `utility[a][s]`
    utility: Vec<Vec<Rational>>,
}

impl DecisionProblem {
    pub fn new(space: StateSpace, actions: Vec<ActionId>, utility: Vec<Vec<Rational>>) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::Validation("action list is empty".into()));
        }
        let mut seen = HashSet::new();
        for a in &actions {
            if !seen.insert(a.as_str()) {
                return Err(Error::Validation(format!("duplicate action identifier {a:?}")));
            }
        }
        if utility.len() != actions.len() {
            return Err(Error::Validation(format!(
                "{} utility columns for {} actions",
                utility.len(),
                actions.len()
            )));
        }
        let n = space.state_count();
        for (a, col) in actions.iter().zip(&utility) {
            if col.len() as u128 != n {
                return Err(Error::Validation(format!(
                    "action {a:?} has {} utility values, space has {n} states",
                    col.len()
                )));
            }
        }
        Ok(Self {
            space,
            actions,
            utility,
        })
    }

    /// Builds a problem on a product space by evaluating `f(action_index, coords)`
    /// at every state in lexicographic order.
    pub fn from_fn<F>(space: CoordinateSpace, actions: &[&str], mut f: F) -> Result<Self>
    where
        F: FnMut(usize, &[u32]) -> Rational,
    {
        let n = usize::try_from(space.state_count())
            .map_err(|_| Error::Resource {
                what: "states",
                requested: space.state_count(),
                limit: usize::MAX as u128,
            })?;
        let utility = (0..actions.len())
            .map(|a| (0..n).map(|s| f(a, &space.decode(s))).collect())
            .collect();
        Self::new(
            StateSpace::Product(space),
            actions.iter().map(|s| s.to_string()).collect(),
            utility,
        )
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn state_count(&self) -> usize {
        self.utility[0].len()
    }

    pub fn actions(&self) -> &[ActionId] {
        &self.actions
    }

    pub fn action_index(&self, id: &str) -> Option<usize> {
        self.actions.iter().position(|a| a == id)
    }

    pub fn utility(&self, action: usize, state: usize) -> &Rational {
        &self.utility[action][state]
    }

    pub fn column(&self, action: usize) -> &[Rational] {
        &self.utility[action]
    }

    pub fn columns(&self) -> &[Vec<Rational>] {
        &self.utility
    }

    /// Same problem over an explicit state list.
    pub fn to_explicit(&self) -> DecisionProblem {
        let states = (0..self.state_count()).map(|s| self.space.coords(s)).collect();
        let space = ExplicitSpace::new(self.space.domains().to_vec(), states)
            .expect("coordinates of a valid space");
        DecisionProblem {
            space: StateSpace::Explicit(space),
            actions: self.actions.clone(),
            utility: self.utility.clone(),
        }
    }

    pub fn to_document(&self) -> ProblemDocument {
        let states = match &self.space {
            StateSpace::Product(_) => None,
            StateSpace::Explicit(e) => Some(e.states().to_vec()),
        };
        ProblemDocument {
            version: None,
            space: self.space.domains().to_vec(),
            states,
            actions: self.actions.clone(),
            utility: self
                .actions
                .iter()
                .cloned()
                .zip(self.utility.iter().cloned())
                .collect(),
        }
    }

    pub fn from_document(doc: &ProblemDocument) -> Result<Self> {
        let space = match &doc.states {
            None => StateSpace::Product(CoordinateSpace::new(doc.space.clone())?),
            Some(states) => StateSpace::Explicit(ExplicitSpace::new(doc.space.clone(), states.clone())?),
        };
        if doc.utility.len() != doc.actions.len() {
            return Err(Error::Validation(format!(
                "utility table lists {} actions, action list has {}",
                doc.utility.len(),
                doc.actions.len()
            )));
        }
        let utility = doc
            .actions
            .iter()
            .map(|a| {
                doc.utility
                    .get(a)
                    .cloned()
                    .ok_or_else(|| Error::Validation(format!("utility.{a}: missing column")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(space, doc.actions.clone(), utility)
    }
}

impl TryFrom<ProblemDocument> for DecisionProblem {
    type Error = Error;
    fn try_from(doc: ProblemDocument) -> Result<Self> {
        Self::from_document(&doc)
    }
}

impl From<DecisionProblem> for ProblemDocument {
    fn from(p: DecisionProblem) -> Self {
        p.to_document()
    }
}

/// `{"space": [cardinalities], "states"?: [[coords]], "actions": [ids],
///   "utility": {action: ["p/q", ...]}}`
///
/// `states` is present only for explicit (non-product) state lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
    pub space: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<Vec<u32>>>,
    pub actions: Vec<ActionId>,
    pub utility: IndexMap<ActionId, Vec<Rational>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicate_actions() {
        let err = DecisionProblem::from_fn(CoordinateSpace::binary(1), &["a", "a"], |_, _| {
            Rational::zero()
        })
        .unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn rejects_short_columns() {
        let space = StateSpace::Product(CoordinateSpace::binary(2));
        let err = DecisionProblem::new(space, vec!["a".into()], vec![vec![Rational::zero(); 3]])
            .unwrap_err();
        assert!(err.to_string().contains("3 utility values"));
    }

    #[test]
    fn document_round_trip() {
        let p = DecisionProblem::from_fn(CoordinateSpace::binary(2), &["a", "b"], |a, x| {
            if a == 0 {
                Rational::from_int(x[0] as i64)
            } else {
                Rational::zero()
            }
        })
        .unwrap();
        let text = serde_json::to_string(&p.to_document()).unwrap();
        assert_eq!(
            text,
            r#"{"space":[2,2],"actions":["a","b"],"utility":{"a":["0/1","0/1","1/1","1/1"],"b":["0/1","0/1","0/1","0/1"]}}"#
        );
        let back: ProblemDocument = serde_json::from_str(&text).unwrap();
        assert_eq!(DecisionProblem::from_document(&back).unwrap(), p);
    }

    #[test]
    fn missing_column_is_named() {
        let doc: ProblemDocument = serde_json::from_str(
            r#"{"space":[2],"actions":["a","b"],"utility":{"a":[0,1],"c":[0,0]}}"#,
        )
        .unwrap();
        let err = DecisionProblem::from_document(&doc).unwrap_err();
        assert_eq!(err.to_string(), "validation error: utility.b: missing column");
    }
}

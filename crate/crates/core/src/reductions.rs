//! Semantic transfers into decision problems: admissible-output
//! specifications, distinct-profile compression, and Boolean presentations
//! of arbitrary finite state spaces.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::certify::{canonical_labels, subset_family, Analysis, CoordSet, Limits};
use crate::error::{Error, Result};
use crate::pairwise::PairwiseSlice;
use crate::problem::{ActionId, DecisionProblem};
use crate::rational::Rational;
use crate::space::{CoordinateSpace, ExplicitSpace, StateSpace};

/// Reserved output adjoined when some state admits no output.
pub const FAILURE_TOKEN: &str = "_bottom";
/// How the failure token is shown in human reports.
pub const FAILURE_DISPLAY: &str = "⊥";

fn default_allowed() -> Rational {
    Rational::one()
}

/// `{"variant": ..., "outputs": [...], ...payload}`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum AdmissibilitySpec {
    /// One output per state.
    Deterministic { outputs: Vec<ActionId>, map: Vec<ActionId> },
    /// An admissible output set per state, realized with a two-level utility.
    SetValued {
        outputs: Vec<ActionId>,
        sets: Vec<Vec<ActionId>>,
        #[serde(default = "default_allowed")]
        u_allowed: Rational,
        #[serde(default)]
        u_blocked: Rational,
    },
    /// Admissible `(state, output)` pairs.
    Relational { outputs: Vec<ActionId>, pairs: Vec<(usize, ActionId)> },
}

impl AdmissibilitySpec {
    pub fn outputs(&self) -> &[ActionId] {
        match self {
            AdmissibilitySpec::Deterministic { outputs, .. }
            | AdmissibilitySpec::SetValued { outputs, .. }
            | AdmissibilitySpec::Relational { outputs, .. } => outputs,
        }
    }

    fn gap(&self) -> (Rational, Rational) {
        match self {
            AdmissibilitySpec::SetValued { u_allowed, u_blocked, .. } => (u_allowed.clone(), u_blocked.clone()),
            _ => (Rational::one(), Rational::zero()),
        }
    }

    /// Admissible output indices per state, in output order.
    pub fn fibers(&self, states: usize) -> Result<Vec<BTreeSet<usize>>> {
        let outputs = self.outputs();
        let mut seen = BTreeSet::new();
        for o in outputs {
            if !seen.insert(o.as_str()) {
                return Err(Error::Validation(format!("output {o:?} listed twice")));
            }
            if o == FAILURE_TOKEN {
                return Err(Error::Validation(format!("output id {FAILURE_TOKEN:?} is reserved for the failure token")));
            }
        }
        let index = |o: &str, what: &str| {
            outputs
                .iter()
                .position(|x| x == o)
                .ok_or_else(|| Error::Validation(format!("{what}: unknown output {o:?}")))
        };
        let check_len = |n: usize, what: &str| {
            if n != states {
                return Err(Error::Validation(format!("{what} has {n} entries, space has {states} states")));
            }
            Ok(())
        };
        match self {
            AdmissibilitySpec::Deterministic { map, .. } => {
                check_len(map.len(), "map")?;
                map.iter()
                    .enumerate()
                    .map(|(s, o)| Ok([index(o, &format!("map[{s}]"))?].into_iter().collect()))
                    .collect()
            }
            AdmissibilitySpec::SetValued { sets, u_allowed, u_blocked, .. } => {
                if u_blocked >= u_allowed {
                    return Err(Error::Validation(format!(
                        "gap must be strict: u_blocked {u_blocked} is not below u_allowed {u_allowed}"
                    )));
                }
                check_len(sets.len(), "sets")?;
                sets.iter()
                    .enumerate()
                    .map(|(s, set)| set.iter().map(|o| index(o, &format!("sets[{s}]"))).collect())
                    .collect()
            }
            AdmissibilitySpec::Relational { pairs, .. } => {
                let mut out = vec![BTreeSet::new(); states];
                for (k, (s, o)) in pairs.iter().enumerate() {
                    let slot = out
                        .get_mut(*s)
                        .ok_or_else(|| Error::Validation(format!("pairs[{k}]: state {s} out of range ({states} states)")))?;
                    slot.insert(index(o, &format!("pairs[{k}]"))?);
                }
                Ok(out)
            }
        }
    }
}

fn state_count(space: &StateSpace, limits: &Limits) -> Result<usize> {
    limits.check_states(space.state_count())?;
    Ok(space.state_count() as usize)
}

/// `{"space": [...], "states"?: [[...]], "spec": {...}}`: a specification
/// together with the state space it is read on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecDocument {
    pub space: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<Vec<u32>>>,
    pub spec: AdmissibilitySpec,
}

impl SpecDocument {
    pub fn state_space(&self) -> Result<StateSpace> {
        Ok(match &self.states {
            None => StateSpace::Product(CoordinateSpace::new(self.space.clone())?),
            Some(states) => StateSpace::Explicit(ExplicitSpace::new(self.space.clone(), states.clone())?),
        })
    }
}

/// The decision problem whose optimizer set at each state is its admissible
/// output set, or the failure token alone where that set is empty.
pub fn induce_problem(spec: &AdmissibilitySpec, space: &StateSpace, limits: &Limits) -> Result<DecisionProblem> {
    let n = state_count(space, limits)?;
    let fibers = spec.fibers(n)?;
    let (hi, lo) = spec.gap();
    let totalize = fibers.iter().any(BTreeSet::is_empty);
    if spec.outputs().is_empty() && !totalize {
        return Err(Error::Domain("output universe is empty".into()));
    }
    let mut actions = spec.outputs().to_vec();
    let mut utility: Vec<Vec<Rational>> = (0..actions.len())
        .map(|o| fibers.iter().map(|f| if f.contains(&o) { hi.clone() } else { lo.clone() }).collect())
        .collect();
    if totalize {
        actions.push(FAILURE_TOKEN.into());
        utility.push(fibers.iter().map(|f| if f.is_empty() { hi.clone() } else { lo.clone() }).collect());
    }
    DecisionProblem::new(space.clone(), actions, utility)
}

/// `s ~ s'` iff the admissible output sets agree, as a partition of states.
pub fn output_equivalence(spec: &AdmissibilitySpec, space: &StateSpace, limits: &Limits) -> Result<Vec<Vec<usize>>> {
    let fibers = spec.fibers(state_count(space, limits)?)?;
    Ok(blocks_of(&canonical_labels(fibers)))
}

fn blocks_of(labels: &[usize]) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for (s, &c) in labels.iter().enumerate() {
        if c == out.len() {
            out.push(Vec::new());
        }
        out[c].push(s);
    }
    out
}

/// Sufficiency at the level of the relation: every pair of states agreeing
/// on `set` has the same admissible set.
fn relation_sufficient(space: &StateSpace, fibers: &[BTreeSet<usize>], set: &CoordSet) -> bool {
    let n = fibers.len();
    let coords: Vec<Vec<u32>> = (0..n).map(|s| space.coords(s)).collect();
    (0..n).all(|s| {
        (s + 1..n).all(|t| fibers[s] == fibers[t] || set.iter().any(|&i| coords[s][i] != coords[t][i]))
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TransferReport {
    pub classes: Vec<Vec<usize>>,
    pub totalized: bool,
    pub subsets_checked: usize,
    pub sampled: bool,
    pub relevant: CoordSet,
}

/// Checks that the induced problem realizes the relation exactly: same
/// partition, same sufficient sets, same relevant coordinates.
pub fn transfer_check(spec: &AdmissibilitySpec, space: &StateSpace, limits: &Limits) -> Result<TransferReport> {
    let n = state_count(space, limits)?;
    let fibers = spec.fibers(n)?;
    let problem = induce_problem(spec, space, limits)?;
    let analysis = Analysis::new(&problem, limits)?;
    let classes = output_equivalence(spec, space, limits)?;
    if analysis.quotient().blocks() != classes {
        return Err(Error::TheoryViolation(format!(
            "output equivalence {classes:?} differs from induced quotient {:?}",
            analysis.quotient().blocks()
        )));
    }
    let d = space.dim();
    let (subsets, sampled) = subset_family(d, limits);
    for set in &subsets {
        let (rel, prob) = (relation_sufficient(space, &fibers, set), analysis.is_sufficient(set)?);
        if rel != prob {
            return Err(Error::TheoryViolation(format!(
                "{set:?} is {rel} for the relation but {prob} for the induced problem"
            )));
        }
    }
    let mut relevant = CoordSet::new();
    for i in 0..d {
        let rest: CoordSet = (0..d).filter(|&j| j != i).collect();
        let rel = !relation_sufficient(space, &fibers, &rest);
        if rel != analysis.is_relevant(i)? {
            return Err(Error::TheoryViolation(format!("relevance of coordinate {i} differs between relation and problem")));
        }
        if rel {
            relevant.insert(i);
        }
    }
    Ok(TransferReport {
        classes,
        totalized: problem.actions().last().is_some_and(|a| a == FAILURE_TOKEN),
        subsets_checked: subsets.len(),
        sampled,
        relevant,
    })
}

/// Merge classes of actions with identical utility profiles; the first
/// action of each class names it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProfileMap {
    pub classes: Vec<Vec<ActionId>>,
}

fn profile_classes(columns: &[Vec<Rational>]) -> Vec<Vec<usize>> {
    let mut index: HashMap<&[Rational], usize> = HashMap::new();
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for (a, col) in columns.iter().enumerate() {
        let next = classes.len();
        let c = *index.entry(col.as_slice()).or_insert(next);
        if c == next {
            classes.push(Vec::new());
        }
        classes[c].push(a);
    }
    classes
}

pub fn compress_profiles(problem: &DecisionProblem) -> Result<(DecisionProblem, ProfileMap)> {
    let classes = profile_classes(problem.columns());
    let ids = problem.actions();
    let compressed = DecisionProblem::new(
        problem.space().clone(),
        classes.iter().map(|c| ids[c[0]].clone()).collect(),
        classes.iter().map(|c| problem.column(c[0]).to_vec()).collect(),
    )?;
    let map = ProfileMap {
        classes: classes.iter().map(|c| c.iter().map(|&a| ids[a].clone()).collect()).collect(),
    };
    Ok((compressed, map))
}

/// Compression of a slice by expanded utility profiles, keeping the
/// coefficients of each class representative.
pub fn compress_slice(slice: &PairwiseSlice, limits: &Limits) -> Result<(PairwiseSlice, ProfileMap)> {
    let expanded = slice.expand(limits)?;
    let classes = profile_classes(expanded.columns());
    let ids = slice.actions();
    let compressed = PairwiseSlice::new(
        slice.dim(),
        classes.iter().map(|c| ids[c[0]].clone()).collect(),
        classes.iter().map(|c| slice.coeffs()[c[0]].clone()).collect(),
    )?;
    let map = ProfileMap {
        classes: classes.iter().map(|c| c.iter().map(|&a| ids[a].clone()).collect()).collect(),
    };
    Ok((compressed, map))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BitMode {
    /// One bit per state; states become one-hot vectors.
    Indicator,
    /// `ceil(log2 |S|)` bits holding the state index, most significant bit
    /// first. Surplus patterns alias the last state.
    BinaryIndex,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BitPresentation {
    pub mode: BitMode,
    pub problem: DecisionProblem,
    /// Original state -> encoded state.
    pub encode: Vec<usize>,
    /// Encoded state -> original state (padding included).
    pub decode: Vec<usize>,
}

impl BitPresentation {
    /// The quotient of the original problem read through the encoding.
    pub fn pulled_back_quotient(&self, limits: &Limits) -> Result<Vec<Vec<usize>>> {
        let a = Analysis::new(&self.problem, limits)?;
        Ok(blocks_of(&canonical_labels(self.encode.iter().map(|&t| a.class_of(t)))))
    }

    pub fn padding_states(&self) -> Vec<usize> {
        (0..self.decode.len()).filter(|&t| self.encode[self.decode[t]] != t).collect()
    }
}

pub fn bits_needed(states: usize) -> usize {
    (usize::BITS - states.saturating_sub(1).leading_zeros()) as usize
}

pub fn present_as_bits(problem: &DecisionProblem, mode: BitMode, limits: &Limits) -> Result<BitPresentation> {
    let n = problem.state_count();
    match mode {
        BitMode::Indicator => {
            let states = (0..n).map(|s| (0..n).map(|t| u32::from(s == t)).collect()).collect();
            let space = StateSpace::Explicit(ExplicitSpace::new(vec![2; n], states)?);
            Ok(BitPresentation {
                mode,
                problem: DecisionProblem::new(space, problem.actions().to_vec(), problem.columns().to_vec())?,
                encode: (0..n).collect(),
                decode: (0..n).collect(),
            })
        }
        BitMode::BinaryIndex => {
            let bits = bits_needed(n);
            let space = CoordinateSpace::binary(bits);
            limits.check_states(space.state_count())?;
            let decode: Vec<usize> = (0..space.state_count() as usize).map(|t| t.min(n - 1)).collect();
            let utility = problem
                .columns()
                .iter()
                .map(|col| decode.iter().map(|&s| col[s].clone()).collect())
                .collect();
            Ok(BitPresentation {
                mode,
                problem: DecisionProblem::new(StateSpace::Product(space), problem.actions().to_vec(), utility)?,
                encode: (0..n).collect(),
                decode,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::{certification_profile, quotient};
    use crate::realize::{realize_labeling, Labeling};

    fn cube(d: usize) -> StateSpace {
        StateSpace::Product(CoordinateSpace::binary(d))
    }

    fn set(v: &[usize]) -> CoordSet {
        v.iter().copied().collect()
    }

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    fn pac() -> (AdmissibilitySpec, StateSpace) {
        let space = StateSpace::Explicit(
            ExplicitSpace::new(vec![2, 2, 2], vec![vec![1, 1, 0], vec![1, 1, 0], vec![1, 0, 0]]).unwrap(),
        );
        let spec = AdmissibilitySpec::Relational {
            outputs: s(&["h0", "h1"]),
            pairs: vec![(0, "h0".into()), (0, "h1".into()), (1, "h0".into()), (1, "h1".into()), (2, "h0".into())],
        };
        (spec, space)
    }

    #[test]
    fn parity_payload() {
        let space = CoordinateSpace::binary(3);
        let map: Vec<String> = (0..8)
            .map(|x| if space.decode(x).iter().sum::<u32>() % 2 == 0 { "even" } else { "odd" }.to_string())
            .collect();
        let spec = AdmissibilitySpec::Deterministic {
            outputs: s(&["even", "odd"]),
            map: map.clone(),
        };
        let l = Limits::checked();
        let p = induce_problem(&spec, &cube(3), &l).unwrap();
        let direct = realize_labeling(&cube(3), &Labeling::new(map)).unwrap();
        assert_eq!(certification_profile(&p, &l).unwrap(), certification_profile(&direct, &l).unwrap());
        assert_eq!(transfer_check(&spec, &cube(3), &l).unwrap().relevant, set(&[0, 1, 2]));
    }

    #[test]
    fn full_sets_collapse() {
        let spec = AdmissibilitySpec::SetValued {
            outputs: s(&["x", "y"]),
            sets: vec![s(&["x", "y"]); 4],
            u_allowed: Rational::one(),
            u_blocked: Rational::zero(),
        };
        let rep = transfer_check(&spec, &cube(2), &Limits::default()).unwrap();
        assert_eq!(rep.classes.len(), 1);
        assert!(rep.relevant.is_empty());
    }

    #[test]
    fn pac_worked_example() {
        let (spec, space) = pac();
        let l = Limits::default();
        let fibers = spec.fibers(3).unwrap();
        assert_eq!(fibers, vec![set(&[0, 1]), set(&[0, 1]), set(&[0])]);
        let p = induce_problem(&spec, &space, &l).unwrap();
        assert_eq!(quotient(&p, &l).unwrap().blocks(), vec![vec![0, 1], vec![2]]);
        let rep = transfer_check(&spec, &space, &l).unwrap();
        assert_eq!(rep.relevant, set(&[1]));
        assert!(Analysis::new(&p, &l).unwrap().is_sufficient(&set(&[1])).unwrap());
    }

    #[test]
    fn totalization() {
        let spec = AdmissibilitySpec::Relational {
            outputs: s(&["o"]),
            pairs: vec![(0, "o".into()), (3, "o".into())],
        };
        let l = Limits::default();
        let p = induce_problem(&spec, &cube(2), &l).unwrap();
        assert_eq!(p.actions(), ["o", FAILURE_TOKEN]);
        let q = quotient(&p, &l).unwrap();
        assert_eq!(q.classes, vec![s(&["o"]), s(&[FAILURE_TOKEN])]);
        assert!(transfer_check(&spec, &cube(2), &l).unwrap().totalized);
        let empty = AdmissibilitySpec::Relational { outputs: vec![], pairs: vec![] };
        assert_eq!(induce_problem(&empty, &cube(1), &l).unwrap().actions(), [FAILURE_TOKEN]);
    }

    #[test]
    fn spec_errors() {
        let l = Limits::default();
        let flat = AdmissibilitySpec::SetValued {
            outputs: s(&["x"]),
            sets: vec![s(&["x"]); 2],
            u_allowed: Rational::one(),
            u_blocked: Rational::one(),
        };
        assert!(matches!(induce_problem(&flat, &cube(1), &l), Err(Error::Validation(_))));
        let reserved = AdmissibilitySpec::Deterministic {
            outputs: s(&[FAILURE_TOKEN]),
            map: s(&[FAILURE_TOKEN; 2]),
        };
        assert!(induce_problem(&reserved, &cube(1), &l).unwrap_err().to_string().contains("reserved"));
        let unknown = AdmissibilitySpec::Deterministic {
            outputs: s(&["x"]),
            map: s(&["x", "z"]),
        };
        assert_eq!(induce_problem(&unknown, &cube(1), &l).unwrap_err().to_string(), "validation error: map[1]: unknown output \"z\"");
    }

    #[test]
    fn spec_document_format() {
        let spec: AdmissibilitySpec =
            serde_json::from_str(r#"{"variant":"set_valued","outputs":["x","y"],"sets":[["x"],["x","y"]]}"#).unwrap();
        assert_eq!(spec.gap(), (Rational::one(), Rational::zero()));
    }

    #[test]
    fn compression() {
        let p = DecisionProblem::from_fn(CoordinateSpace::binary(2), &["a", "b", "c"], |a, x| {
            Rational::from_int(if a == 1 { 0 } else { x[0] as i64 })
        })
        .unwrap();
        let (c, map) = compress_profiles(&p).unwrap();
        assert_eq!(c.actions(), ["a", "b"]);
        assert_eq!(map.classes, vec![s(&["a", "c"]), s(&["b"])]);
        let l = Limits::default();
        assert_eq!(certification_profile(&p, &l).unwrap().relevant, certification_profile(&c, &l).unwrap().relevant);
        let (same, _) = compress_profiles(&c).unwrap();
        assert_eq!(same, c);
    }

    #[test]
    fn binary_index_presentation() {
        assert_eq!(bits_needed(1), 0);
        assert_eq!(bits_needed(3), 2);
        assert_eq!(bits_needed(4), 2);
        assert_eq!(bits_needed(5), 3);
        let l = Limits::default();
        let four = DecisionProblem::from_fn(CoordinateSpace::new(vec![4]).unwrap(), &["a", "b"], |a, x| {
            Rational::from_int(if a == 0 { x[0] as i64 % 2 } else { 0 })
        })
        .unwrap();
        assert_eq!(present_as_bits(&four, BitMode::BinaryIndex, &l).unwrap().problem.dim(), 2);
        let three = DecisionProblem::from_fn(CoordinateSpace::new(vec![3]).unwrap(), &["a", "b"], |a, x| {
            Rational::from_int(if a == 0 { x[0] as i64 } else { 1 })
        })
        .unwrap();
        let bp = present_as_bits(&three, BitMode::BinaryIndex, &l).unwrap();
        assert_eq!(bp.problem.dim(), 2);
        assert_eq!(bp.decode, vec![0, 1, 2, 2]);
        assert_eq!(bp.padding_states(), vec![3]);
        assert_eq!(bp.pulled_back_quotient(&l).unwrap(), quotient(&three, &l).unwrap().blocks());
    }

    #[test]
    fn indicator_presentation() {
        let l = Limits::default();
        let three = DecisionProblem::from_fn(CoordinateSpace::new(vec![3]).unwrap(), &["a", "b"], |a, x| {
            Rational::from_int(if a == 0 { x[0] as i64 } else { 1 })
        })
        .unwrap();
        let bp = present_as_bits(&three, BitMode::Indicator, &l).unwrap();
        assert_eq!(bp.problem.dim(), 3);
        let a = Analysis::new(&bp.problem, &l).unwrap();
        assert!(a.is_sufficient(&set(&[0, 1, 2])).unwrap());
        assert_eq!(bp.pulled_back_quotient(&l).unwrap(), quotient(&three, &l).unwrap().blocks());
    }
}

//! The tractability landscape: a fixed table of structural families with the
//! mechanism each one reduces to, plus detectors that test an instance for
//! the mechanisms that can be read off directly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::certify::{opt_indices, Limits};
use crate::error::{Error, Result};
use crate::pairwise::{GraphMode, PairwiseSlice};
use crate::problem::DecisionProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Core,
    Lifted,
    Degenerate,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Core => "core",
            Role::Lifted => "lifted",
            Role::Degenerate => "degenerate",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FamilyRecord {
    pub family: &'static str,
    pub role: Role,
    pub mechanism: &'static str,
}

const fn row(family: &'static str, role: Role, mechanism: &'static str) -> FamilyRecord {
    FamilyRecord { family, role, mechanism }
}

const COLLAPSE: &str = "constant-optimizer collapse";

static LANDSCAPE: [FamilyRecord; 15] = [
    row("bounded actions", Role::Core, "bounded actions"),
    row("separable utility", Role::Core, "separable utility"),
    row("low tensor rank", Role::Core, "low tensor rank"),
    row("tree structure", Role::Core, "tree structure"),
    row("bounded treewidth", Role::Core, "bounded treewidth"),
    row("coordinate symmetry", Role::Core, "coordinate symmetry"),
    row("product distribution", Role::Lifted, "separable utility"),
    row("bounded support", Role::Lifted, "bounded actions"),
    row("bounded horizon", Role::Lifted, "bounded treewidth"),
    row("full observability", Role::Lifted, "tree structure"),
    row("single action", Role::Degenerate, COLLAPSE),
    row("strict global dominance", Role::Degenerate, COLLAPSE),
    row("constant optimal set", Role::Degenerate, COLLAPSE),
    row("multiplicative-separable constant-sign", Role::Degenerate, COLLAPSE),
    row("bounded state space", Role::Degenerate, "finite explicit enumeration"),
];

pub fn landscape_table() -> &'static [FamilyRecord] {
    &LANDSCAPE
}

pub fn family(name: &str) -> Option<&'static FamilyRecord> {
    LANDSCAPE.iter().find(|r| r.family == name)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TableIntegrity {
    pub rows: usize,
    pub roles: BTreeMap<Role, usize>,
    pub mechanisms: BTreeSet<&'static str>,
}

/// Recount the table and check every lifted family lands on a core mechanism.
pub fn table_integrity() -> Result<TableIntegrity> {
    let table = landscape_table();
    let mut roles = BTreeMap::new();
    for r in table {
        *roles.entry(r.role).or_insert(0) += 1;
    }
    let mechanisms: BTreeSet<_> = table.iter().map(|r| r.mechanism).collect();
    let families: BTreeSet<_> = table.iter().map(|r| r.family).collect();
    if families.len() != table.len() {
        return Err(Error::TheoryViolation("landscape table repeats a family".into()));
    }
    let core: BTreeSet<_> = table.iter().filter(|r| r.role == Role::Core).map(|r| r.mechanism).collect();
    if let Some(r) = table.iter().find(|r| r.role == Role::Lifted && !core.contains(r.mechanism)) {
        return Err(Error::TheoryViolation(format!(
            "lifted family {} reduces to non-core mechanism {}",
            r.family, r.mechanism
        )));
    }
    Ok(TableIntegrity {
        rows: table.len(),
        roles,
        mechanisms,
    })
}

/// Mechanisms with a direct detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "mechanism", rename_all = "snake_case")]
pub enum Detector {
    SingleAction,
    ConstantOptimizer,
    StrictGlobalDominance,
    BoundedActions { k: usize },
    BoundedStateSpace { k: usize },
    Separable,
    CoordinateSymmetric,
    ParentTree,
}

impl Detector {
    pub fn name(&self) -> &'static str {
        match self {
            Detector::SingleAction => "single_action",
            Detector::ConstantOptimizer => "constant_optimizer",
            Detector::StrictGlobalDominance => "strict_global_dominance",
            Detector::BoundedActions { .. } => "bounded_actions",
            Detector::BoundedStateSpace { .. } => "bounded_state_space",
            Detector::Separable => "separable",
            Detector::CoordinateSymmetric => "coordinate_symmetric",
            Detector::ParentTree => "parent_tree",
        }
    }

    pub fn family(&self) -> &'static FamilyRecord {
        let name = match self {
            Detector::SingleAction => "single action",
            Detector::ConstantOptimizer => "constant optimal set",
            Detector::StrictGlobalDominance => "strict global dominance",
            Detector::BoundedActions { .. } => "bounded actions",
            Detector::BoundedStateSpace { .. } => "bounded state space",
            Detector::Separable => "separable utility",
            Detector::CoordinateSymmetric => "coordinate symmetry",
            Detector::ParentTree => "tree structure",
        };
        family(name).expect("detector family is in the table")
    }

    pub fn needs_slice(&self) -> bool {
        matches!(
            self,
            Detector::Separable | Detector::CoordinateSymmetric | Detector::ParentTree
        )
    }

    /// Every detector, with `k` for the bounded ones.
    pub fn all(k: usize) -> Vec<Detector> {
        vec![
            Detector::SingleAction,
            Detector::ConstantOptimizer,
            Detector::StrictGlobalDominance,
            Detector::BoundedActions { k },
            Detector::BoundedStateSpace { k },
            Detector::Separable,
            Detector::CoordinateSymmetric,
            Detector::ParentTree,
        ]
    }
}

impl fmt::Display for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Detector::BoundedActions { k } | Detector::BoundedStateSpace { k } => write!(f, "{}:{k}", self.name()),
            _ => f.write_str(self.name()),
        }
    }
}

impl FromStr for Detector {
    type Err = Error;

    /// `name` or `name:k` for the bounded detectors.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let k = || -> Result<usize> {
            let a = arg.ok_or_else(|| Error::Parse(format!("detector {name} needs a bound, e.g. {name}:2")))?;
            a.parse().map_err(|_| Error::Parse(format!("bad bound {a:?} for detector {name}")))
        };
        let no_arg = |d: Detector| match arg {
            None => Ok(d),
            Some(_) => Err(Error::Parse(format!("detector {name} takes no bound"))),
        };
        match name {
            "single_action" => no_arg(Detector::SingleAction),
            "constant_optimizer" => no_arg(Detector::ConstantOptimizer),
            "strict_global_dominance" => no_arg(Detector::StrictGlobalDominance),
            "bounded_actions" => Ok(Detector::BoundedActions { k: k()? }),
            "bounded_state_space" => Ok(Detector::BoundedStateSpace { k: k()? }),
            "separable" => no_arg(Detector::Separable),
            "coordinate_symmetric" => no_arg(Detector::CoordinateSymmetric),
            "parent_tree" => no_arg(Detector::ParentTree),
            _ => Err(Error::Parse(format!("unknown detector {name:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Instance<'a> {
    Problem(&'a DecisionProblem),
    Slice(&'a PairwiseSlice),
}

impl Instance<'_> {
    fn tier(&self) -> &'static str {
        match self {
            Instance::Problem(_) => "problem",
            Instance::Slice(_) => "slice",
        }
    }

    fn problem(&self, limits: &Limits) -> Result<DecisionProblem> {
        match self {
            Instance::Problem(p) => Ok((*p).clone()),
            Instance::Slice(s) => s.expand(limits),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Detection {
    pub detector: String,
    pub family: &'static str,
    pub role: Role,
    pub hit: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decomposition: Option<TreeDecomposition>,
}

pub fn detect(detector: Detector, instance: Instance<'_>, limits: &Limits) -> Result<Detection> {
    let mut decomposition = None;
    let hit = match (detector, instance) {
        (d, Instance::Problem(_)) if d.needs_slice() => {
            return Err(Error::UnsupportedDetector {
                mechanism: d.name().into(),
                tier: instance.tier(),
            })
        }
        (Detector::Separable, Instance::Slice(s)) => is_separable(s)?,
        (Detector::CoordinateSymmetric, Instance::Slice(s)) => s.symmetry_check(),
        (Detector::ParentTree, Instance::Slice(s)) => {
            decomposition = parent_tree(s, limits)?;
            decomposition.is_some()
        }
        (Detector::BoundedStateSpace { k }, inst) => {
            let n = match inst {
                Instance::Problem(p) => p.state_count() as u128,
                Instance::Slice(s) => 1u128 << s.dim().min(127),
            };
            n <= k as u128
        }
        (Detector::SingleAction, inst) => action_count(inst) == 1,
        (Detector::BoundedActions { k }, inst) => action_count(inst) <= k,
        (Detector::ConstantOptimizer, inst) => constant_optimizer(&inst.problem(limits)?),
        (Detector::StrictGlobalDominance, inst) => strict_global_dominance(&inst.problem(limits)?).is_some(),
        _ => unreachable!("slice-only detectors handled above"),
    };
    let record = detector.family();
    Ok(Detection {
        detector: detector.to_string(),
        family: record.family,
        role: record.role,
        hit,
        decomposition,
    })
}

fn action_count(inst: Instance<'_>) -> usize {
    match inst {
        Instance::Problem(p) => p.actions().len(),
        Instance::Slice(s) => s.actions().len(),
    }
}

pub fn constant_optimizer(problem: &DecisionProblem) -> bool {
    let first = opt_indices(problem, 0);
    (1..problem.state_count()).all(|s| opt_indices(problem, s) == first)
}

/// Index of an action strictly better than every other action at every state.
pub fn strict_global_dominance(problem: &DecisionProblem) -> Option<usize> {
    let k = problem.actions().len();
    (0..k).find(|&a| {
        (0..k)
            .filter(|&b| b != a)
            .all(|b| (0..problem.state_count()).all(|s| problem.utility(a, s) > problem.utility(b, s)))
    })
}

/// Every utility and every pairwise gap has zero mixed differences.
pub fn is_separable(slice: &PairwiseSlice) -> Result<bool> {
    let k = slice.actions().len();
    for i in 0..slice.dim() {
        for j in i + 1..slice.dim() {
            for a in 0..k {
                if !slice.mixed_difference(i, j, a)?.is_zero() {
                    return Ok(false);
                }
                for b in a + 1..k {
                    if !slice.gap_mixed_difference(i, j, a, b)?.is_zero() {
                        return Ok(false);
                    }
                }
            }
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TreeDecomposition {
    pub bags: Vec<BTreeSet<usize>>,
    /// Edges between bag indices.
    pub tree: Vec<(usize, usize)>,
    pub width: usize,
}

/// Parent of each coordinate when every decision-relevant dependency points
/// from a larger coordinate to a smaller one and no coordinate has two. A
/// coordinate with two parents yields `None`.
pub fn parent_map(slice: &PairwiseSlice, limits: &Limits) -> Result<Option<Vec<Option<usize>>>> {
    let g = slice.interaction_graph(GraphMode::Decision, limits)?;
    let mut parent = vec![None; slice.dim()];
    for (i, j) in g.edge_pairs() {
        if parent[j].replace(i).is_some() {
            return Ok(None);
        }
    }
    Ok(Some(parent))
}

/// Width-one decomposition from the parent map, or `None` when the slice is
/// not parent-tree structured. The result is checked against the dependency
/// graph before it is returned.
pub fn parent_tree(slice: &PairwiseSlice, limits: &Limits) -> Result<Option<TreeDecomposition>> {
    let Some(parent) = parent_map(slice, limits)? else {
        return Ok(None);
    };
    let d = parent.len();
    let mut bags: Vec<BTreeSet<usize>> = Vec::new();
    let mut edge_bag = vec![None; d];
    for c in 0..d {
        if let Some(p) = parent[c] {
            edge_bag[c] = Some(bags.len());
            bags.push([p, c].into_iter().collect());
        }
    }
    let mut home = vec![0usize; d];
    for v in 0..d {
        home[v] = match edge_bag[v] {
            Some(b) => b,
            None => match (0..d).find(|&c| parent[c] == Some(v)) {
                Some(c) => edge_bag[c].expect("child has an edge bag"),
                None => {
                    bags.push([v].into_iter().collect());
                    bags.len() - 1
                }
            },
        };
    }
    let mut tree = Vec::new();
    for c in 0..d {
        if let (Some(p), Some(b)) = (parent[c], edge_bag[c]) {
            if home[p] != b {
                tree.push((home[p].min(b), home[p].max(b)));
            }
        }
    }
    // Join the per-component trees through their roots.
    let roots: Vec<usize> = (0..d).filter(|&v| parent[v].is_none()).map(|v| home[v]).collect();
    for w in roots.windows(2) {
        tree.push((w[0].min(w[1]), w[0].max(w[1])));
    }
    tree.sort_unstable();
    let width = bags.iter().map(|b| b.len()).max().unwrap_or(1).saturating_sub(1);
    let dec = TreeDecomposition { bags, tree, width };
    let edges: Vec<(usize, usize)> = (0..d).filter_map(|c| parent[c].map(|p| (p, c))).collect();
    verify_tree_decomposition(d, &edges, &dec).map_err(Error::TheoryViolation)?;
    Ok(Some(dec))
}

/// The three tree-decomposition axioms plus the bag graph being a tree.
pub fn verify_tree_decomposition(
    vertices: usize,
    edges: &[(usize, usize)],
    dec: &TreeDecomposition,
) -> std::result::Result<(), String> {
    let m = dec.bags.len();
    if vertices > 0 && m == 0 {
        return Err("no bags".into());
    }
    if dec.tree.len() + 1 != m.max(1) {
        return Err(format!("{} bags joined by {} tree edges", m, dec.tree.len()));
    }
    let mut adj = vec![Vec::new(); m];
    for &(a, b) in &dec.tree {
        if a >= m || b >= m || a == b {
            return Err(format!("bad tree edge ({a}, {b})"));
        }
        adj[a].push(b);
        adj[b].push(a);
    }
    if m > 0 && component(&adj, 0, |_| true).len() != m {
        return Err("bag graph is disconnected".into());
    }
    for v in 0..vertices {
        let holding: Vec<usize> = (0..m).filter(|&b| dec.bags[b].contains(&v)).collect();
        let Some(&start) = holding.first() else {
            return Err(format!("vertex {v} is in no bag"));
        };
        if component(&adj, start, |b| dec.bags[b].contains(&v)).len() != holding.len() {
            return Err(format!("bags holding vertex {v} are not connected"));
        }
    }
    for &(a, b) in edges {
        if !dec.bags.iter().any(|bag| bag.contains(&a) && bag.contains(&b)) {
            return Err(format!("edge ({a}, {b}) is in no bag"));
        }
    }
    let width = dec.bags.iter().map(|b| b.len()).max().unwrap_or(1).saturating_sub(1);
    if width != dec.width {
        return Err(format!("declared width {} but bags give {width}", dec.width));
    }
    Ok(())
}

fn component(adj: &[Vec<usize>], start: usize, keep: impl Fn(usize) -> bool) -> BTreeSet<usize> {
    let mut seen = BTreeSet::from([start]);
    let mut stack = vec![start];
    while let Some(u) = stack.pop() {
        for &w in &adj[u] {
            if keep(w) && seen.insert(w) {
                stack.push(w);
            }
        }
    }
    seen
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoleReport {
    pub hits: Vec<&'static str>,
    /// Distinct roles of the hit families, or `["unclassified"]`.
    pub roles: Vec<String>,
}

pub fn classify_role(detections: &[Detection]) -> RoleReport {
    let hits: Vec<&'static str> = detections.iter().filter(|d| d.hit).map(|d| d.family).collect();
    let roles: BTreeSet<Role> = detections.iter().filter(|d| d.hit).map(|d| d.role).collect();
    let roles = if roles.is_empty() {
        vec!["unclassified".to_string()]
    } else {
        roles.iter().map(Role::to_string).collect()
    };
    RoleReport { hits, roles }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pairwise::{product_table, Coefficients};
    use crate::rational::Rational;
    use crate::space::{CoordinateSpace, StateSpace};

    fn r(n: i64) -> Rational {
        Rational::from_int(n)
    }

    fn slice(d: usize, pairs: &[(usize, usize)]) -> PairwiseSlice {
        let mut a = Coefficients::zero(d);
        for &(i, j) in pairs {
            a = a.add_pair(i, j, product_table(r(1)));
        }
        PairwiseSlice::new(d, vec!["a".into(), "b".into()], vec![a, Coefficients::zero(d)]).unwrap()
    }

    #[test]
    fn table_counts() {
        let t = table_integrity().unwrap();
        assert_eq!(t.rows, 15);
        assert_eq!(t.roles[&Role::Core], 6);
        assert_eq!(t.roles[&Role::Lifted], 4);
        assert_eq!(t.roles[&Role::Degenerate], 5);
        assert_eq!(t.mechanisms.len(), 8);
    }

    #[test]
    fn path_gives_two_bags() {
        let s = slice(3, &[(0, 1), (1, 2)]);
        let dec = parent_tree(&s, &Limits::default()).unwrap().unwrap();
        let want: Vec<BTreeSet<usize>> = vec![[0, 1].into(), [1, 2].into()];
        assert_eq!(dec.bags, want);
        assert_eq!(dec.tree, vec![(0, 1)]);
        assert_eq!(dec.width, 1);
    }

    #[test]
    fn two_parents_rejected() {
        let l = Limits::default();
        assert!(parent_tree(&slice(3, &[(0, 2), (1, 2)]), &l).unwrap().is_none());
        assert!(parent_tree(&slice(3, &[(0, 1), (0, 2), (1, 2)]), &l).unwrap().is_none());
        let star = parent_tree(&slice(4, &[(0, 1), (0, 2), (0, 3)]), &l).unwrap().unwrap();
        assert_eq!(star.bags.len(), 3);
    }

    #[test]
    fn isolated_coordinates_get_singletons() {
        let dec = parent_tree(&slice(4, &[(1, 2)]), &Limits::default()).unwrap().unwrap();
        assert_eq!(dec.bags.len(), 3);
        assert_eq!(dec.tree.len(), 2);
        assert_eq!(parent_tree(&slice(1, &[]), &Limits::default()).unwrap().unwrap().width, 0);
    }

    #[test]
    fn slice_detectors_reject_problems() {
        let p = DecisionProblem::new(
            StateSpace::Product(CoordinateSpace::binary(1)),
            vec!["a".into()],
            vec![vec![r(0), r(1)]],
        )
        .unwrap();
        let e = detect(Detector::ParentTree, Instance::Problem(&p), &Limits::default()).unwrap_err();
        assert!(matches!(e, Error::UnsupportedDetector { .. }));
        assert_eq!(e.exit_code(), 1);
        let hit = detect(Detector::SingleAction, Instance::Problem(&p), &Limits::default()).unwrap();
        assert!(hit.hit);
        assert_eq!(hit.role, Role::Degenerate);
    }

    #[test]
    fn detectors_on_a_slice() {
        let l = Limits::default();
        let s = slice(3, &[(0, 1)]);
        let hits: Vec<Detection> = Detector::all(2)
            .into_iter()
            .map(|d| detect(d, Instance::Slice(&s), &l).unwrap())
            .collect();
        let names: Vec<&str> = hits.iter().filter(|d| d.hit).map(|d| d.family).collect();
        assert_eq!(names, vec!["bounded actions", "tree structure"]);
        assert_eq!(classify_role(&hits).roles, vec!["core"]);
        assert!(is_separable(&slice(3, &[])).unwrap());
        assert_eq!(classify_role(&[]).roles, vec!["unclassified"]);
    }

    #[test]
    fn detector_names_round_trip() {
        for d in Detector::all(3) {
            assert_eq!(d.to_string().parse::<Detector>().unwrap(), d);
        }
        assert!("bounded_actions".parse::<Detector>().is_err());
        assert!("separable:2".parse::<Detector>().is_err());
    }

    #[test]
    fn dominance_collapses_the_optimizer() {
        let p = DecisionProblem::new(
            StateSpace::Product(CoordinateSpace::binary(2)),
            vec!["a".into(), "b".into()],
            vec![vec![r(2), r(3), r(2), r(5)], vec![r(1), r(0), r(1), r(4)]],
        )
        .unwrap();
        assert_eq!(strict_global_dominance(&p), Some(0));
        assert!(constant_optimizer(&p));
    }
}

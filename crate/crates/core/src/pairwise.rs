//! Binary pairwise slices: per-action constant, unary and pair tables over
//! `{0,1}^d`, with mixed differences, interaction graphs, the symmetric
//! graph dichotomy and the four obstruction-family target predicates.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::certify::{opt_indices, Limits};
use crate::error::{Error, Result};
use crate::problem::{ActionId, DecisionProblem};
use crate::rational::Rational;
use crate::space::{CoordinateSpace, StateSpace};

/// Two-point table `[f(0), f(1)]`.
pub type UnaryTable = [Rational; 2];
/// `table[x_i][x_j]` for a pair `i < j`.
pub type PairTable = [[Rational; 2]; 2];

pub fn zero_unary() -> UnaryTable {
    [Rational::zero(), Rational::zero()]
}

pub fn zero_pair() -> PairTable {
    [zero_unary(), zero_unary()]
}

fn is_zero_pair(t: &PairTable) -> bool {
    t.iter().flatten().all(Rational::is_zero)
}

fn transpose(t: &PairTable) -> PairTable {
    [
        [t[0][0].clone(), t[1][0].clone()],
        [t[0][1].clone(), t[1][1].clone()],
    ]
}

/// `w(0,0) - w(1,0) - w(0,1) + w(1,1)`
pub fn table_second_difference(t: &PairTable) -> Rational {
    &(&t[0][0] - &t[1][0]) - &(&t[0][1] - &t[1][1])
}

/// The table `v * x_i * x_j`.
pub fn product_table(v: Rational) -> PairTable {
    [
        [Rational::zero(), Rational::zero()],
        [Rational::zero(), v],
    ]
}

/// Constant + unary + pairwise coefficients of one utility function on
/// `{0,1}^d`. Also used for action-independent affine terms.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Coefficients {
    pub constant: Rational,
    pub unary: Vec<UnaryTable>,
    /// Keys are `(i, j)` with `i < j`; identically zero tables are not stored.
    pub pairs: BTreeMap<(usize, usize), PairTable>,
}

impl Coefficients {
    pub fn zero(d: usize) -> Self {
        Self {
            constant: Rational::zero(),
            unary: vec![zero_unary(); d],
            pairs: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.unary.len()
    }

    pub fn with_constant(mut self, c: Rational) -> Self {
        self.constant = c;
        self
    }

    pub fn with_unary(mut self, i: usize, table: UnaryTable) -> Self {
        self.unary[i] = table;
        self
    }

    /// Adds `table` (indexed `[x_i][x_j]`) to the pair term on `{i, j}`.
    pub fn add_pair(mut self, i: usize, j: usize, table: PairTable) -> Self {
        assert!(i != j && i < self.dim() && j < self.dim(), "bad pair ({i},{j})");
        let (key, table) = if i < j { ((i, j), table) } else { ((j, i), transpose(&table)) };
        let entry = self.pairs.entry(key).or_insert_with(zero_pair);
        for (row, add) in entry.iter_mut().zip(table.iter()) {
            for (v, a) in row.iter_mut().zip(add.iter()) {
                *v += a;
            }
        }
        if is_zero_pair(entry) {
            self.pairs.remove(&key);
        }
        self
    }

    /// Pair table on `{i, j}` indexed `[x_i][x_j]`, zero when absent.
    pub fn pair(&self, i: usize, j: usize) -> PairTable {
        if i < j {
            self.pairs.get(&(i, j)).cloned().unwrap_or_else(zero_pair)
        } else {
            self.pairs.get(&(j, i)).map(transpose).unwrap_or_else(zero_pair)
        }
    }

    pub fn eval(&self, x: &[u32]) -> Rational {
        let mut v = self.constant.clone();
        for (t, &xi) in self.unary.iter().zip(x) {
            v += &t[xi as usize];
        }
        for (&(i, j), t) in &self.pairs {
            v += &t[x[i] as usize][x[j] as usize];
        }
        v
    }

    /// `beta * self + alpha`, termwise.
    pub fn affine(&self, alpha: &Coefficients, beta: &Rational) -> Coefficients {
        let mut out = Coefficients::zero(self.dim()).with_constant(&(beta * &self.constant) + &alpha.constant);
        for i in 0..self.dim() {
            out.unary[i] = [
                &(beta * &self.unary[i][0]) + &alpha.unary[i][0],
                &(beta * &self.unary[i][1]) + &alpha.unary[i][1],
            ];
        }
        for (&(i, j), t) in &self.pairs {
            let scaled = [
                [beta * &t[0][0], beta * &t[0][1]],
                [beta * &t[1][0], beta * &t[1][1]],
            ];
            out = out.add_pair(i, j, scaled);
        }
        for (&(i, j), t) in &alpha.pairs {
            out = out.add_pair(i, j, t.clone());
        }
        out
    }

    /// Coordinates renamed by `perm`: old coordinate `i` becomes `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Coefficients {
        let mut out = Coefficients::zero(self.dim()).with_constant(self.constant.clone());
        for (i, t) in self.unary.iter().enumerate() {
            out.unary[perm[i]] = t.clone();
        }
        for (&(i, j), t) in &self.pairs {
            out = out.add_pair(perm[i], perm[j], t.clone());
        }
        out
    }

    /// Appends one coordinate with zero unary table and no pair terms.
    pub fn extend(&self) -> Coefficients {
        let mut out = self.clone();
        out.unary.push(zero_unary());
        out
    }

    fn validate(&self, d: usize, what: &str) -> Result<()> {
        if self.unary.len() != d {
            return Err(Error::Validation(format!(
                "{what}: {} unary tables for dimension {d}",
                self.unary.len()
            )));
        }
        for &(i, j) in self.pairs.keys() {
            if !(i < j && j < d) {
                return Err(Error::Validation(format!("{what}: bad pair key ({i},{j}) for dimension {d}")));
            }
        }
        Ok(())
    }

    fn normalized(mut self) -> Self {
        self.pairs.retain(|_, t| !is_zero_pair(t));
        self
    }
}

/// A binary pairwise decision problem:
/// `U(a, x) = c_a + Σ_i u_{a,i}(x_i) + Σ_{i<j} w_{a,ij}(x_i, x_j)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "SliceDocument", into = "SliceDocument")]
pub struct PairwiseSlice {
    d: usize,
    actions: Vec<ActionId>,
    coeffs: Vec<Coefficients>,
}

impl PairwiseSlice {
    pub fn new(d: usize, actions: Vec<ActionId>, coeffs: Vec<Coefficients>) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::Validation("slice has no actions".into()));
        }
        if actions.len() != coeffs.len() {
            return Err(Error::Validation(format!(
                "{} coefficient bundles for {} actions",
                coeffs.len(),
                actions.len()
            )));
        }
        for (k, a) in actions.iter().enumerate() {
            if actions[..k].contains(a) {
                return Err(Error::Validation(format!("duplicate action identifier {a:?}")));
            }
        }
        for (a, c) in actions.iter().zip(&coeffs) {
            c.validate(d, &format!("coeffs.{a}"))?;
        }
        Ok(Self {
            d,
            actions,
            coeffs: coeffs.into_iter().map(Coefficients::normalized).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn actions(&self) -> &[ActionId] {
        &self.actions
    }

    pub fn coeffs(&self) -> &[Coefficients] {
        &self.coeffs
    }

    pub fn action_index(&self, id: &str) -> Option<usize> {
        self.actions.iter().position(|a| a == id)
    }

    pub fn utility(&self, action: usize, x: &[u32]) -> Rational {
        self.coeffs[action].eval(x)
    }

    /// The full utility table as a decision problem on `{0,1}^d`.
    pub fn expand(&self, limits: &Limits) -> Result<DecisionProblem> {
        let space = CoordinateSpace::binary(self.d);
        limits.check_states(space.state_count())?;
        let n = space.state_count() as usize;
        let utility = self
            .coeffs
            .iter()
            .map(|c| (0..n).map(|s| c.eval(&space.decode(s))).collect())
            .collect();
        DecisionProblem::new(StateSpace::Product(space), self.actions.clone(), utility)
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        if i == j {
            return Err(Error::Domain(format!("mixed difference needs two distinct coordinates, got {i} twice")));
        }
        if i >= self.d || j >= self.d {
            return Err(Error::Domain(format!("pair ({i},{j}) out of range for dimension {}", self.d)));
        }
        Ok(())
    }

    fn corner(&self, i: usize, j: usize, xi: u32, xj: u32) -> Vec<u32> {
        let mut x = vec![0; self.d];
        x[i] = xi;
        x[j] = xj;
        x
    }

    fn second_difference_of<F: Fn(&[u32]) -> Rational>(&self, i: usize, j: usize, f: F) -> Rational {
        let v00 = f(&self.corner(i, j, 0, 0));
        let v10 = f(&self.corner(i, j, 1, 0));
        let v01 = f(&self.corner(i, j, 0, 1));
        let v11 = f(&self.corner(i, j, 1, 1));
        &(&v00 - &v10) - &(&v01 - &v11)
    }

    /// `Δ_ij(a)`: second difference of `U(a, ·)` on the `(i, j)` square with
    /// every other coordinate at 0.
    pub fn mixed_difference(&self, i: usize, j: usize, action: usize) -> Result<Rational> {
        self.check_pair(i, j)?;
        Ok(self.second_difference_of(i, j, |x| self.utility(action, x)))
    }

    /// Mixed difference of the gap `U(a, ·) - U(b, ·)`.
    pub fn gap_mixed_difference(&self, i: usize, j: usize, a: usize, b: usize) -> Result<Rational> {
        self.check_pair(i, j)?;
        if a == b {
            return Err(Error::Domain("gap mixed difference needs two distinct actions".into()));
        }
        Ok(self.second_difference_of(i, j, |x| &self.utility(a, x) - &self.utility(b, x)))
    }

    /// Actions optimal at some state of the expansion.
    pub fn supported_actions(&self, limits: &Limits) -> Result<Vec<usize>> {
        let p = self.expand(limits)?;
        let mut supported = vec![false; self.actions.len()];
        for s in 0..p.state_count() {
            for a in opt_indices(&p, s) {
                supported[a] = true;
            }
        }
        Ok((0..self.actions.len()).filter(|&a| supported[a]).collect())
    }

    pub fn interaction_graph(&self, mode: GraphMode, limits: &Limits) -> Result<InteractionGraph> {
        let considered: Vec<usize> = match mode {
            GraphMode::Raw | GraphMode::Decision => (0..self.actions.len()).collect(),
            GraphMode::Supported => self.supported_actions(limits)?,
        };
        let mut edges = Vec::new();
        for i in 0..self.d {
            for j in i + 1..self.d {
                let witness = match mode {
                    GraphMode::Raw => considered.iter().find_map(|&a| {
                        let v = self.mixed_difference(i, j, a).expect("valid pair");
                        (!v.is_zero()).then(|| EdgeWitness {
                            action: self.actions[a].clone(),
                            other: None,
                            value: v,
                        })
                    }),
                    GraphMode::Decision | GraphMode::Supported => considered.iter().enumerate().find_map(|(k, &a)| {
                        considered[k + 1..].iter().find_map(|&b| {
                            let v = self.gap_mixed_difference(i, j, a, b).expect("valid pair");
                            (!v.is_zero()).then(|| EdgeWitness {
                                action: self.actions[a].clone(),
                                other: Some(self.actions[b].clone()),
                                value: v,
                            })
                        })
                    }),
                };
                if let Some(witness) = witness {
                    edges.push(Edge { i, j, witness });
                }
            }
        }
        Ok(InteractionGraph {
            d: self.d,
            mode,
            edges,
        })
    }

    /// First adjacent transposition `(k, k+1)` and lexicographically first
    /// state at which some action's utility changes under it.
    pub fn symmetry_counterexample(&self) -> Option<(usize, Vec<u32>)> {
        let space = CoordinateSpace::binary(self.d);
        let n = space.state_count() as usize;
        for k in 0..self.d.saturating_sub(1) {
            for s in 0..n {
                let x = space.decode(s);
                let mut y = x.clone();
                y.swap(k, k + 1);
                if (0..self.actions.len()).any(|a| self.utility(a, &x) != self.utility(a, &y)) {
                    return Some((k, x));
                }
            }
        }
        None
    }

    /// Invariance of the expanded utility under all coordinate permutations,
    /// checked on the adjacent-transposition generators.
    pub fn symmetry_check(&self) -> bool {
        self.symmetry_counterexample().is_none()
    }

    pub fn dichotomy_report(&self, limits: &Limits) -> Result<Dichotomy> {
        limits.check_states(1u128 << self.d.min(127))?;
        if let Some((k, state)) = self.symmetry_counterexample() {
            return Ok(Dichotomy::NotApplicable {
                transposition: (k, k + 1),
                state,
            });
        }
        let g = self.interaction_graph(GraphMode::Decision, limits)?;
        let full = self.d * self.d.saturating_sub(1) / 2;
        match g.edges.len() {
            0 => Ok(Dichotomy::UnaryCollapse),
            n if n == full => Ok(Dichotomy::CompleteInteraction),
            n => Err(Error::TheoryViolation(format!(
                "symmetric slice has {n} of {full} decision-relevant edges"
            ))),
        }
    }

    fn all_mixed_differences(&self) -> Vec<((usize, usize), usize, Rational)> {
        let mut out = Vec::new();
        for i in 0..self.d {
            for j in i + 1..self.d {
                for a in 0..self.actions.len() {
                    out.push(((i, j), a, self.mixed_difference(i, j, a).expect("valid pair").abs()));
                }
            }
        }
        out
    }

    fn max_mixed_magnitude(&self) -> Rational {
        self.all_mixed_differences()
            .into_iter()
            .map(|(_, _, v)| v)
            .max()
            .unwrap_or_else(Rational::zero)
    }

    pub fn target_predicate(&self, kind: TargetKind) -> Result<bool> {
        let need = if kind == TargetKind::MarginBounded { 2 } else { 3 };
        if self.d < need {
            return Err(Error::Domain(format!("{kind} needs at least {need} coordinates, slice has {}", self.d)));
        }
        let one = Rational::one();
        let anchor = |a: usize| self.mixed_difference(0, 1, a).expect("anchor pair").abs();
        Ok(match kind {
            TargetKind::DominantPair => {
                let all = self.all_mixed_differences();
                let max = all.iter().map(|(_, _, v)| v).max().expect("at least one pair");
                let mut maximizers = all.iter().filter(|(_, _, v)| v == max);
                matches!((maximizers.next(), maximizers.next()), (Some((pair, _, _)), None) if *pair == (0, 1))
            }
            TargetKind::MarginBounded => {
                let bound = &Rational::from_int(2) * &self.max_mixed_magnitude();
                self.coeffs
                    .iter()
                    .flat_map(|c| c.unary.iter().flatten())
                    .all(|u| u.abs() <= bound)
            }
            TargetKind::GhostAction => {
                let minus_one = -Rational::one();
                (0..self.actions.len()).any(|a| {
                    self.coeffs[a].unary[0].iter().all(|v| *v == minus_one) && anchor(a) == one
                })
            }
            TargetKind::OffsetSignature => {
                let mags: Vec<Rational> = (0..self.actions.len()).map(anchor).collect();
                mags.iter().enumerate().any(|(a, ma)| {
                    *ma == one && mags.iter().enumerate().any(|(b, mb)| b != a && mb.is_zero())
                })
            }
        })
    }

    pub fn to_document(&self) -> SliceDocument {
        SliceDocument {
            version: None,
            d: self.d,
            actions: self.actions.clone(),
            coeffs: self
                .actions
                .iter()
                .cloned()
                .zip(self.coeffs.iter().map(CoefficientsDocument::from))
                .collect(),
        }
    }

    pub fn from_document(doc: &SliceDocument) -> Result<Self> {
        if doc.coeffs.len() != doc.actions.len() {
            return Err(Error::Validation(format!(
                "coeffs lists {} actions, action list has {}",
                doc.coeffs.len(),
                doc.actions.len()
            )));
        }
        let coeffs = doc
            .actions
            .iter()
            .map(|a| {
                doc.coeffs
                    .get(a)
                    .ok_or_else(|| Error::Validation(format!("coeffs.{a}: missing")))
                    .and_then(|c| c.to_coefficients(doc.d, &format!("coeffs.{a}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(doc.d, doc.actions.clone(), coeffs)
    }
}

impl TryFrom<SliceDocument> for PairwiseSlice {
    type Error = Error;
    fn try_from(doc: SliceDocument) -> Result<Self> {
        Self::from_document(&doc)
    }
}

impl From<PairwiseSlice> for SliceDocument {
    fn from(s: PairwiseSlice) -> Self {
        s.to_document()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphMode {
    /// `{i, j}` with `Δ_ij(a) ≠ 0` for some action.
    Raw,
    /// `{i, j}` with a nonzero gap mixed difference for some `a ≠ b`.
    Decision,
    /// Decision mode restricted to optimizer-supported actions.
    Supported,
}

impl FromStr for GraphMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(GraphMode::Raw),
            "decision" => Ok(GraphMode::Decision),
            "supported" => Ok(GraphMode::Supported),
            _ => Err(Error::Parse(format!("unknown graph mode {s:?} (raw|decision|supported)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EdgeWitness {
    pub action: ActionId,
    /// Second action of the gap, absent in raw mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub other: Option<ActionId>,
    pub value: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub witness: EdgeWitness,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InteractionGraph {
    pub d: usize,
    pub mode: GraphMode,
    pub edges: Vec<Edge>,
}

impl InteractionGraph {
    pub fn edge_pairs(&self) -> Vec<(usize, usize)> {
        self.edges.iter().map(|e| (e.i, e.j)).collect()
    }

    /// Re-evaluates every edge witness on `slice`.
    pub fn verify(&self, slice: &PairwiseSlice) -> Result<()> {
        for e in &self.edges {
            let idx = |id: &str| {
                slice
                    .action_index(id)
                    .ok_or_else(|| Error::Verification(format!("edge witness names unknown action {id:?}")))
            };
            let a = idx(&e.witness.action)?;
            let v = match &e.witness.other {
                None => slice.mixed_difference(e.i, e.j, a)?,
                Some(b) => slice.gap_mixed_difference(e.i, e.j, a, idx(b)?)?,
            };
            if v.is_zero() || v != e.witness.value {
                return Err(Error::Verification(format!(
                    "edge ({},{}) witness value {} re-evaluates to {v}",
                    e.i, e.j, e.witness.value
                )));
            }
        }
        Ok(())
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph interaction {\n");
        for v in 0..self.d {
            let _ = writeln!(out, "  {v};");
        }
        for e in &self.edges {
            let _ = writeln!(out, "  {} -- {} [label=\"{}\"];", e.i, e.j, e.witness.value);
        }
        out.push_str("}\n");
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Dichotomy {
    /// Symmetric slice with an edgeless decision-relevant graph.
    UnaryCollapse,
    /// Symmetric slice whose decision-relevant graph is complete.
    CompleteInteraction,
    /// Not coordinate-symmetric; carries a counterexample.
    NotApplicable {
        transposition: (usize, usize),
        state: Vec<u32>,
    },
}

/// The four representation-level target predicates of the obstruction
/// families. The anchor pair is always `{0, 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    /// `({0,1}, a)` is the unique maximizer of `|Δ|` over pairs and actions.
    DominantPair,
    /// Every stored unary value has magnitude at most twice the largest `|Δ|`.
    MarginBounded,
    /// Some action has unary table `[-1, -1]` on coordinate 0 and `|Δ_01| = 1`.
    GhostAction,
    /// Two distinct actions with `|Δ_01|` equal to 1 and 0.
    OffsetSignature,
}

impl TargetKind {
    pub const ALL: [TargetKind; 4] = [
        TargetKind::DominantPair,
        TargetKind::MarginBounded,
        TargetKind::GhostAction,
        TargetKind::OffsetSignature,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TargetKind::DominantPair => "dominant_pair",
            TargetKind::MarginBounded => "margin_bounded",
            TargetKind::GhostAction => "ghost_action",
            TargetKind::OffsetSignature => "offset_signature",
        }
    }
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TargetKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        TargetKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown target kind {s:?}")))
    }
}

/// `{"c": "p/q", "unary": [[v0, v1], ...], "pairs": {"i,j": [[v00, v01], [v10, v11]]}}`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsDocument {
    #[serde(default)]
    pub c: Rational,
    /// Empty means all-zero tables.
    #[serde(default)]
    pub unary: Vec<UnaryTable>,
    #[serde(default)]
    pub pairs: IndexMap<String, PairTable>,
}

impl From<&Coefficients> for CoefficientsDocument {
    fn from(c: &Coefficients) -> Self {
        Self {
            c: c.constant.clone(),
            unary: c.unary.clone(),
            pairs: c
                .pairs
                .iter()
                .map(|(&(i, j), t)| (format!("{i},{j}"), t.clone()))
                .collect(),
        }
    }
}

impl CoefficientsDocument {
    pub fn to_coefficients(&self, d: usize, what: &str) -> Result<Coefficients> {
        let unary = if self.unary.is_empty() {
            vec![zero_unary(); d]
        } else {
            self.unary.clone()
        };
        let mut out = Coefficients {
            constant: self.c.clone(),
            unary,
            pairs: BTreeMap::new(),
        };
        out.validate(d, what)?;
        for (key, t) in &self.pairs {
            let bad = || Error::Validation(format!("{what}.pairs: bad key {key:?} (expected \"i,j\" with i<j<{d})"));
            let (i, j) = key.split_once(',').ok_or_else(bad)?;
            let i: usize = i.trim().parse().map_err(|_| bad())?;
            let j: usize = j.trim().parse().map_err(|_| bad())?;
            if !(i < j && j < d) {
                return Err(bad());
            }
            if out.pairs.contains_key(&(i, j)) {
                return Err(Error::Validation(format!("{what}.pairs: key {key:?} repeated")));
            }
            out.pairs.insert((i, j), t.clone());
        }
        Ok(out.normalized())
    }
}

/// `{"d": n, "actions": [...], "coeffs": {action: {...}}}`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
    pub d: usize,
    pub actions: Vec<ActionId>,
    pub coeffs: IndexMap<ActionId, CoefficientsDocument>,
}

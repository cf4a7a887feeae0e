//! Bounded-pattern predicates on pairwise slices.
//!
//! The syntax graph of a slice has one vertex per coordinate, labeled by the
//! unary tables of every action, and an edge wherever some action has a
//! nonzero pair table. A rooted pattern occurs at a vertex when it embeds
//! root-to-root, injectively, with exactly equal labels under one bijection
//! between the pattern's action labels and the slice's actions.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pairwise::{zero_pair, PairTable, PairwiseSlice, UnaryTable};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SyntaxGraph {
    pub actions: usize,
    /// `labels[v][a]`
    pub labels: Vec<Vec<UnaryTable>>,
    /// `edges[(i, j)][a]` for `i < j`, tables indexed `[x_i][x_j]`.
    pub edges: BTreeMap<(usize, usize), Vec<PairTable>>,
}

impl SyntaxGraph {
    pub fn vertex_count(&self) -> usize {
        self.labels.len()
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .keys()
            .filter_map(move |&(i, j)| if i == v { Some(j) } else if j == v { Some(i) } else { None })
    }

    fn table(&self, i: usize, j: usize, a: usize) -> PairTable {
        let key = (i.min(j), i.max(j));
        match self.edges.get(&key) {
            None => zero_pair(),
            Some(ts) if i < j => ts[a].clone(),
            Some(ts) => transpose(&ts[a]),
        }
    }
}

fn transpose(t: &PairTable) -> PairTable {
    [
        [t[0][0].clone(), t[1][0].clone()],
        [t[0][1].clone(), t[1][1].clone()],
    ]
}

pub fn syntax_graph(slice: &PairwiseSlice) -> SyntaxGraph {
    let labels = (0..slice.dim())
        .map(|i| slice.coeffs().iter().map(|c| c.unary[i].clone()).collect())
        .collect();
    let mut edges = BTreeMap::new();
    for c in slice.coeffs() {
        for &key in c.pairs.keys() {
            edges.entry(key).or_insert_with(|| {
                slice.coeffs().iter().map(|c| c.pair(key.0, key.1)).collect::<Vec<_>>()
            });
        }
    }
    SyntaxGraph {
        actions: slice.actions().len(),
        labels,
        edges,
    }
}

/// Vertices within edge distance `radius` of `root`, in breadth-first order
/// (root first), with their distances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighborhood {
    pub root: usize,
    pub vertices: Vec<usize>,
    pub distance: Vec<usize>,
}

impl Neighborhood {
    pub fn within(&self, r: usize) -> impl Iterator<Item = usize> + '_ {
        self.vertices.iter().zip(&self.distance).filter(move |(_, &d)| d <= r).map(|(&v, _)| v)
    }
}

pub fn rooted_neighborhood(graph: &SyntaxGraph, root: usize, radius: usize) -> Result<Neighborhood> {
    if root >= graph.vertex_count() {
        return Err(Error::Domain(format!("vertex {root} not in a graph with {} vertices", graph.vertex_count())));
    }
    let mut dist = vec![usize::MAX; graph.vertex_count()];
    dist[root] = 0;
    let mut queue = VecDeque::from([root]);
    let mut out = Neighborhood {
        root,
        vertices: Vec::new(),
        distance: Vec::new(),
    };
    while let Some(v) = queue.pop_front() {
        out.vertices.push(v);
        out.distance.push(dist[v]);
        if dist[v] == radius {
            continue;
        }
        let mut next: Vec<usize> = graph.neighbors(v).filter(|&u| dist[u] == usize::MAX).collect();
        next.sort_unstable();
        for u in next {
            dist[u] = dist[v] + 1;
            queue.push_back(u);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternEdge {
    pub u: usize,
    pub v: usize,
    /// One table per pattern action, indexed `[x_u][x_v]`.
    pub tables: Vec<PairTable>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalPattern {
    pub radius: usize,
    #[serde(default)]
    pub root: usize,
    /// Number of action labels; every label vector has this length.
    pub actions: usize,
    /// `vertices[p][t]`: unary table of pattern action `t` at vertex `p`.
    pub vertices: Vec<Vec<UnaryTable>>,
    #[serde(default)]
    pub edges: Vec<PatternEdge>,
}

impl LocalPattern {
    /// Two vertices at radius zero: never embeds anywhere.
    pub fn impossible() -> Self {
        let zero = vec![[Rational::zero(), Rational::zero()]];
        LocalPattern {
            radius: 0,
            root: 0,
            actions: 1,
            vertices: vec![zero.clone(), zero],
            edges: Vec::new(),
        }
    }

    fn validate(&self, bounds: &PatternBounds, what: &str) -> Result<()> {
        let err = |m: String| Err(Error::Validation(format!("{what}: {m}")));
        if self.radius > bounds.r_max {
            return err(format!("radius {} exceeds r_max {}", self.radius, bounds.r_max));
        }
        if self.vertices.is_empty() || self.vertices.len() > bounds.n_max {
            return err(format!("{} vertices, allowed 1..={}", self.vertices.len(), bounds.n_max));
        }
        if self.actions == 0 || self.actions > bounds.a_max {
            return err(format!("{} action labels, allowed 1..={}", self.actions, bounds.a_max));
        }
        if self.root >= self.vertices.len() {
            return err(format!("root {} is not a vertex", self.root));
        }
        if let Some(p) = self.vertices.iter().position(|l| l.len() != self.actions) {
            return err(format!("vertex {p} has {} labels for {} actions", self.vertices[p].len(), self.actions));
        }
        let mut seen = std::collections::BTreeSet::new();
        for e in &self.edges {
            if e.u == e.v || e.u >= self.vertices.len() || e.v >= self.vertices.len() {
                return err(format!("bad edge ({},{})", e.u, e.v));
            }
            if !seen.insert((e.u.min(e.v), e.u.max(e.v))) {
                return err(format!("edge ({},{}) repeated", e.u, e.v));
            }
            if e.tables.len() != self.actions {
                return err(format!("edge ({},{}) has {} tables for {} actions", e.u, e.v, e.tables.len(), self.actions));
            }
        }
        let values = self
            .vertices
            .iter()
            .flatten()
            .flatten()
            .chain(self.edges.iter().flat_map(|e| e.tables.iter().flatten().flatten()));
        for v in values {
            if v.abs() > bounds.c_max {
                return err(format!("coefficient {v} exceeds c_max {}", bounds.c_max));
            }
        }
        Ok(())
    }
}

/// Whether `pattern` occurs at the root of `nb` in `graph`.
pub fn occurs(pattern: &LocalPattern, graph: &SyntaxGraph, nb: &Neighborhood) -> bool {
    if pattern.actions != graph.actions {
        return false;
    }
    let hosts: Vec<usize> = nb.within(pattern.radius).collect();
    if pattern.vertices.len() > hosts.len() {
        return false;
    }
    let mut sigma = Vec::with_capacity(pattern.actions);
    let mut used = vec![false; graph.actions];
    for_each_bijection(&mut sigma, &mut used, &mut |sigma| embeds(pattern, graph, nb.root, &hosts, sigma))
}

fn for_each_bijection(sigma: &mut Vec<usize>, used: &mut [bool], f: &mut dyn FnMut(&[usize]) -> bool) -> bool {
    if sigma.len() == used.len() {
        return f(sigma);
    }
    for a in 0..used.len() {
        if !used[a] {
            used[a] = true;
            sigma.push(a);
            let found = for_each_bijection(sigma, used, f);
            sigma.pop();
            used[a] = false;
            if found {
                return true;
            }
        }
    }
    false
}

fn embeds(pattern: &LocalPattern, graph: &SyntaxGraph, root: usize, hosts: &[usize], sigma: &[usize]) -> bool {
    let vertex_ok = |p: usize, h: usize| (0..pattern.actions).all(|t| pattern.vertices[p][t] == graph.labels[h][sigma[t]]);
    if !vertex_ok(pattern.root, root) {
        return false;
    }
    let order: Vec<usize> = std::iter::once(pattern.root)
        .chain((0..pattern.vertices.len()).filter(|&p| p != pattern.root))
        .collect();
    let mut image = vec![usize::MAX; pattern.vertices.len()];
    image[pattern.root] = root;
    extend(pattern, graph, hosts, sigma, &order, 1, &mut image, &vertex_ok)
}

#[allow(clippy::too_many_arguments)]
fn extend(
    pattern: &LocalPattern,
    graph: &SyntaxGraph,
    hosts: &[usize],
    sigma: &[usize],
    order: &[usize],
    k: usize,
    image: &mut Vec<usize>,
    vertex_ok: &dyn Fn(usize, usize) -> bool,
) -> bool {
    let edges_ok = |image: &[usize]| {
        pattern.edges.iter().all(|e| {
            let (hu, hv) = (image[e.u], image[e.v]);
            hu == usize::MAX
                || hv == usize::MAX
                || (0..pattern.actions).all(|t| e.tables[t] == graph.table(hu, hv, sigma[t]))
        })
    };
    if !edges_ok(image) {
        return false;
    }
    if k == order.len() {
        return true;
    }
    let p = order[k];
    for &h in hosts {
        if image.contains(&h) || !vertex_ok(p, h) {
            continue;
        }
        image[p] = h;
        if extend(pattern, graph, hosts, sigma, order, k + 1, image, vertex_ok) {
            return true;
        }
        image[p] = usize::MAX;
    }
    false
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternBounds {
    pub r_max: usize,
    pub n_max: usize,
    pub a_max: usize,
    pub c_max: Rational,
}

/// `{"bounds": {...}, "witness": [patterns], "forbidden": [patterns]}`
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternScheme {
    pub bounds: PatternBounds,
    #[serde(default)]
    pub witness: Vec<LocalPattern>,
    #[serde(default)]
    pub forbidden: Vec<LocalPattern>,
}

impl PatternScheme {
    pub fn validate(&self) -> Result<()> {
        if self.witness.is_empty() && self.forbidden.is_empty() {
            return Err(Error::Validation(
                "scheme has no patterns; use a forbidden impossible pattern for constant true or a witness one for constant false".into(),
            ));
        }
        for (k, p) in self.witness.iter().enumerate() {
            p.validate(&self.bounds, &format!("witness[{k}]"))?;
        }
        for (k, p) in self.forbidden.iter().enumerate() {
            p.validate(&self.bounds, &format!("forbidden[{k}]"))?;
        }
        Ok(())
    }

    pub fn constant(value: bool) -> Self {
        let bounds = PatternBounds {
            r_max: 0,
            n_max: 2,
            a_max: 1,
            c_max: Rational::zero(),
        };
        let p = vec![LocalPattern::impossible()];
        if value {
            PatternScheme { bounds, witness: Vec::new(), forbidden: p }
        } else {
            PatternScheme { bounds, witness: p, forbidden: Vec::new() }
        }
    }
}

pub fn evaluate_scheme(scheme: &PatternScheme, slice: &PairwiseSlice) -> Result<bool> {
    scheme.validate()?;
    let g = syntax_graph(slice);
    let hoods = (0..g.vertex_count())
        .map(|v| rooted_neighborhood(&g, v, scheme.bounds.r_max))
        .collect::<Result<Vec<_>>>()?;
    let any_occurs = |ps: &[LocalPattern]| hoods.iter().any(|nb| ps.iter().any(|p| occurs(p, &g, nb)));
    let w = !scheme.witness.is_empty() && any_occurs(&scheme.witness);
    let f = !scheme.forbidden.is_empty() && !any_occurs(&scheme.forbidden);
    Ok(w || f)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StabilizationReport {
    pub slices: usize,
    /// The common verdict, if the verdicts agree.
    pub constant: Option<bool>,
    /// Verdict forced above the action bound: the forbidden branch default.
    pub expected: bool,
    pub holds: bool,
}

pub fn action_stabilization_check(scheme: &PatternScheme, sample: &[PairwiseSlice]) -> Result<StabilizationReport> {
    if let Some(s) = sample.iter().find(|s| s.actions().len() <= scheme.bounds.a_max) {
        return Err(Error::Domain(format!(
            "sample slice has {} actions, need more than a_max = {}",
            s.actions().len(),
            scheme.bounds.a_max
        )));
    }
    let verdicts = sample.iter().map(|s| evaluate_scheme(scheme, s)).collect::<Result<Vec<_>>>()?;
    let constant = match verdicts.split_first() {
        Some((&first, rest)) if rest.iter().all(|&v| v == first) => Some(first),
        Some(_) => None,
        None => None,
    };
    let expected = !scheme.forbidden.is_empty();
    Ok(StabilizationReport {
        slices: sample.len(),
        constant,
        expected,
        holds: sample.is_empty() || constant == Some(expected),
    })
}

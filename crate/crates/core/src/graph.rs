//! Rooted feature-graphs: validation, isomorphism and path evaluation.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::formula::{Attribute, Constant, Equation, Path, Term, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

/// Where an edge ends: an inner node or an atomic constant leaf.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Node(NodeId),
    Constant(Constant),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub from: NodeId,
    pub label: Attribute,
    pub to: Target,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootedGraph {
    pub root: NodeId,
    pub nodes: BTreeSet<NodeId>,
    pub constants: BTreeSet<Constant>,
    /// Edges in a stable presentation order.
    pub edges: Vec<Edge>,
}

/// Either an atomic value or a rooted graph.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureGraph {
    Atomic { value: Constant },
    Rooted(RootedGraph),
}

impl FeatureGraph {
    pub fn atomic(c: Constant) -> Self {
        FeatureGraph::Atomic { value: c }
    }

    /// A graph with a single node and no edges.
    pub fn empty() -> Self {
        FeatureGraph::Rooted(RootedGraph {
            root: NodeId(0),
            nodes: [NodeId(0)].into(),
            constants: BTreeSet::new(),
            edges: Vec::new(),
        })
    }

    pub fn root_target(&self) -> Target {
        match self {
            FeatureGraph::Atomic { value } => Target::Constant(value.clone()),
            FeatureGraph::Rooted(g) => Target::Node(g.root),
        }
    }

    /// Follows one attribute from `from`.
    pub fn step(&self, from: &Target, label: &Attribute) -> Option<Target> {
        match (self, from) {
            (FeatureGraph::Rooted(g), Target::Node(n)) => g
                .edges
                .iter()
                .find(|e| e.from == *n && &e.label == label)
                .map(|e| e.to.clone()),
            _ => None,
        }
    }

    /// Follows a path written outermost attribute first.
    pub fn follow(&self, from: &Target, path: &Path) -> Option<Target> {
        path.application_order()
            .try_fold(from.clone(), |at, attr| self.step(&at, attr))
    }

    pub fn node_count(&self) -> usize {
        match self {
            FeatureGraph::Atomic { .. } => 1,
            FeatureGraph::Rooted(g) => g.nodes.len() + g.constants.len(),
        }
    }

    /// The graph as a JSON value with fields `kind`, and for rooted graphs
    /// `root`, `nodes`, `constants`, `edges` (`from`, `label`, `to`).
    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("feature graphs always serialize")
    }
}

/// Determinism, reachability from the root and acyclicity.
pub fn validate_graph(g: &FeatureGraph) -> bool {
    let g = match g {
        FeatureGraph::Atomic { .. } => return true,
        FeatureGraph::Rooted(g) => g,
    };
    if !g.nodes.contains(&g.root) {
        return false;
    }
    let mut out: HashMap<NodeId, Vec<&Edge>> = HashMap::new();
    let mut seen_labels = BTreeSet::new();
    for e in &g.edges {
        if !g.nodes.contains(&e.from) {
            return false;
        }
        match &e.to {
            Target::Node(n) if !g.nodes.contains(n) => return false,
            Target::Constant(c) if !g.constants.contains(c) => return false,
            _ => {}
        }
        if !seen_labels.insert((e.from, e.label.clone())) {
            return false;
        }
        out.entry(e.from).or_default().push(e);
    }

    // Reachability, and cycle detection via an iterative three-colour search.
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Open,
        Done,
    }
    let mut mark: HashMap<NodeId, Mark> = HashMap::new();
    let mut reached_consts = BTreeSet::new();
    let mut stack: Vec<(NodeId, usize)> = vec![(g.root, 0)];
    mark.insert(g.root, Mark::Open);
    while let Some((n, i)) = stack.pop() {
        let succ = out.get(&n).map_or(&[][..], |v| v.as_slice());
        if i == succ.len() {
            mark.insert(n, Mark::Done);
            continue;
        }
        stack.push((n, i + 1));
        match &succ[i].to {
            Target::Constant(c) => {
                reached_consts.insert(c.clone());
            }
            Target::Node(m) => match mark.get(m) {
                Some(Mark::Open) => return false,
                Some(Mark::Done) => {}
                None => {
                    mark.insert(*m, Mark::Open);
                    stack.push((*m, 0));
                }
            },
        }
    }
    mark.len() == g.nodes.len() && reached_consts.len() == g.constants.len()
}

/// Root- and label-preserving isomorphism.
///
/// Attribute-determinism makes this a lockstep walk from both roots: every
/// node is reached by some path, and the path fixes its image.
pub fn graph_isomorphic(g1: &FeatureGraph, g2: &FeatureGraph) -> bool {
    let (a, b) = match (g1, g2) {
        (FeatureGraph::Atomic { value: x }, FeatureGraph::Atomic { value: y }) => return x == y,
        (FeatureGraph::Rooted(a), FeatureGraph::Rooted(b)) => (a, b),
        _ => return false,
    };
    if a.nodes.len() != b.nodes.len()
        || a.edges.len() != b.edges.len()
        || a.constants != b.constants
    {
        return false;
    }
    let index = |g: &RootedGraph| -> HashMap<NodeId, BTreeMap<Attribute, Target>> {
        let mut m: HashMap<NodeId, BTreeMap<Attribute, Target>> = HashMap::new();
        for e in &g.edges {
            m.entry(e.from).or_default().insert(e.label.clone(), e.to.clone());
        }
        m
    };
    let (ia, ib) = (index(a), index(b));
    let empty = BTreeMap::new();
    let mut fwd: HashMap<NodeId, NodeId> = HashMap::new();
    let mut bwd: HashMap<NodeId, NodeId> = HashMap::new();
    let mut work = vec![(a.root, b.root)];
    fwd.insert(a.root, b.root);
    bwd.insert(b.root, a.root);
    while let Some((x, y)) = work.pop() {
        let ex = ia.get(&x).unwrap_or(&empty);
        let ey = ib.get(&y).unwrap_or(&empty);
        if ex.len() != ey.len() {
            return false;
        }
        for (label, tx) in ex {
            let Some(ty) = ey.get(label) else {
                return false;
            };
            match (tx, ty) {
                (Target::Constant(c), Target::Constant(d)) if c == d => {}
                (Target::Node(nx), Target::Node(ny)) => match (fwd.get(nx), bwd.get(ny)) {
                    (None, None) => {
                        fwd.insert(*nx, *ny);
                        bwd.insert(*ny, *nx);
                        work.push((*nx, *ny));
                    }
                    (Some(m), Some(n)) if m == ny && n == nx => {}
                    _ => return false,
                },
                _ => return false,
            }
        }
    }
    fwd.len() == a.nodes.len()
}

/// Binds variables to graph positions and checks whether an equation holds:
/// both sides must lead to the same node or to the same constant.
pub fn equation_holds(
    g: &FeatureGraph,
    valuation: &BTreeMap<Var, Target>,
    eq: &Equation,
) -> Option<bool> {
    let eval = |t: &Term| -> Option<Target> {
        match t {
            Term::Const(c) => Some(Target::Constant(c.clone())),
            Term::Var(v) => valuation.get(v).cloned(),
        }
    };
    let l = eval(&eq.left_term)?;
    let r = eval(&eq.right_term)?;
    let lhs = g.follow(&l, &eq.left_path);
    let rhs = g.follow(&r, &eq.right_path);
    Some(matches!((lhs, rhs), (Some(x), Some(y)) if x == y))
}

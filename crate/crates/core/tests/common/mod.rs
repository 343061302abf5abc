//! Generators and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use featsat::formula::{Attribute, Constant, Equation, Formula, Path, PrimitiveFormula, PrimitiveSet, Term};
use featsat::graph::{Edge, FeatureGraph, NodeId, RootedGraph, Target};
use featsat::sat::{Clause, CnfFormula, Literal};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn random_term(rng: &mut impl Rng, vars: usize, consts: usize) -> Term {
    if consts > 0 && rng.gen_bool(0.25) {
        Term::constant(&format!("c{}", rng.gen_range(0..consts)))
    } else {
        Term::var(&format!("v{}", rng.gen_range(0..vars)))
    }
}

pub fn random_path(rng: &mut impl Rng, attrs: usize, max_len: usize) -> Path {
    let len = rng.gen_range(0..=max_len);
    Path((0..len).map(|_| Attribute::new(&format!("a{}", rng.gen_range(0..attrs)))).collect())
}

pub fn random_formula(rng: &mut impl Rng, eqs: usize, vars: usize, attrs: usize, consts: usize, max_path: usize) -> Formula {
    let conj = (0..eqs.max(1))
        .map(|_| {
            Equation::new(
                random_path(rng, attrs, max_path),
                random_term(rng, vars, consts),
                random_path(rng, attrs, max_path),
                random_term(rng, vars, consts),
            )
        })
        .collect();
    Formula::new(conj).unwrap()
}

pub fn random_primitive_set(rng: &mut impl Rng, size: usize, vars: usize, attrs: usize, consts: usize) -> PrimitiveSet {
    (0..size)
        .map(|_| {
            let t = random_term(rng, vars, consts);
            if rng.gen_bool(0.5) {
                // Mostly variable subjects, so that not every set clashes.
                let s = if rng.gen_bool(0.9) { random_term(rng, vars, 0) } else { random_term(rng, vars, consts) };
                PrimitiveFormula::feature_eq(&format!("a{}", rng.gen_range(0..attrs)), s, t)
            } else {
                PrimitiveFormula::term_eq(random_term(rng, vars, consts), t)
            }
        })
        .collect()
}

/// A random acyclic, attribute-deterministic graph on `nodes` inner nodes,
/// all reachable from node 0. Node ids are shuffled so that they carry no
/// structural information.
pub fn random_graph(rng: &mut impl Rng, nodes: usize, attrs: usize, consts: usize, extra_edges: usize) -> FeatureGraph {
    let mut ids: Vec<u32> = (0..nodes as u32).collect();
    ids[1..].shuffle(rng);
    let mut used: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut edges = Vec::new();
    let mut add = |from: usize, to: Target, rng: &mut dyn rand::RngCore| -> bool {
        let free: Vec<usize> = (0..attrs).filter(|a| !used.contains(&(from, *a))).collect();
        let Some(&a) = free.choose(rng) else {
            return false;
        };
        used.insert((from, a));
        edges.push(Edge {
            from: NodeId(ids[from]),
            label: Attribute::new(&format!("a{a}")),
            to,
        });
        true
    };
    // A spanning tree from lower to higher positions keeps it acyclic.
    for (j, &id) in ids.iter().enumerate().skip(1) {
        loop {
            let i = rng.gen_range(0..j);
            if add(i, Target::Node(NodeId(id)), rng) {
                break;
            }
        }
    }
    for _ in 0..extra_edges {
        let i = rng.gen_range(0..nodes);
        let to = if consts > 0 && (i + 1 == nodes || rng.gen_bool(0.5)) {
            Target::Constant(Constant::new(&format!("c{}", rng.gen_range(0..consts))))
        } else if i + 1 < nodes {
            Target::Node(NodeId(ids[rng.gen_range(i + 1..nodes)]))
        } else {
            continue;
        };
        add(i, to, rng);
    }
    let constants = edges
        .iter()
        .filter_map(|e| match &e.to {
            Target::Constant(c) => Some(c.clone()),
            Target::Node(_) => None,
        })
        .collect();
    FeatureGraph::Rooted(RootedGraph {
        root: NodeId(ids[0]),
        nodes: ids.iter().map(|&i| NodeId(i)).collect(),
        constants,
        edges,
    })
}

/// Isomorphism by trying every bijection between inner nodes that fixes the
/// root.
pub fn brute_force_isomorphic(g1: &FeatureGraph, g2: &FeatureGraph) -> bool {
    let (a, b) = match (g1, g2) {
        (FeatureGraph::Atomic { value: x }, FeatureGraph::Atomic { value: y }) => return x == y,
        (FeatureGraph::Rooted(a), FeatureGraph::Rooted(b)) => (a, b),
        _ => return false,
    };
    if a.nodes.len() != b.nodes.len() || a.edges.len() != b.edges.len() || a.constants != b.constants {
        return false;
    }
    let an: Vec<NodeId> = a.nodes.iter().copied().collect();
    let bn: Vec<NodeId> = b.nodes.iter().copied().collect();
    let b_edges: BTreeSet<(NodeId, String, Target)> = b
        .edges
        .iter()
        .map(|e| (e.from, e.label.as_str().to_string(), e.to.clone()))
        .collect();
    let mut perm: Vec<usize> = (0..bn.len()).collect();
    permutations(&mut perm, 0, &mut |p| {
        let map: HashMap<NodeId, NodeId> = an.iter().zip(p).map(|(x, &i)| (*x, bn[i])).collect();
        if map[&a.root] != b.root {
            return false;
        }
        let image = |t: &Target| match t {
            Target::Node(n) => Target::Node(map[n]),
            c => c.clone(),
        };
        a.edges
            .iter()
            .all(|e| b_edges.contains(&(map[&e.from], e.label.as_str().to_string(), image(&e.to))))
    })
}

fn permutations(p: &mut [usize], k: usize, found: &mut dyn FnMut(&[usize]) -> bool) -> bool {
    if k == p.len() {
        return found(p);
    }
    for i in k..p.len() {
        p.swap(k, i);
        if permutations(p, k + 1, found) {
            p.swap(k, i);
            return true;
        }
        p.swap(k, i);
    }
    false
}

/// Relabels the inner nodes of a graph with a random permutation.
pub fn shuffle_ids(rng: &mut impl Rng, g: &FeatureGraph) -> FeatureGraph {
    let FeatureGraph::Rooted(r) = g else {
        return g.clone();
    };
    let old: Vec<NodeId> = r.nodes.iter().copied().collect();
    let mut new = old.clone();
    new.shuffle(rng);
    let map: HashMap<NodeId, NodeId> = old.into_iter().zip(new).collect();
    let t = |t: &Target| match t {
        Target::Node(n) => Target::Node(map[n]),
        c => c.clone(),
    };
    let mut edges: Vec<Edge> = r
        .edges
        .iter()
        .map(|e| Edge {
            from: map[&e.from],
            label: e.label.clone(),
            to: t(&e.to),
        })
        .collect();
    edges.shuffle(rng);
    FeatureGraph::Rooted(RootedGraph {
        root: map[&r.root],
        nodes: r.nodes.iter().map(|n| map[n]).collect(),
        constants: r.constants.clone(),
        edges,
    })
}

/// An independent unifier on explicit graphs: union-find over the disjoint
/// union of both graphs' nodes and constants, merging successors until
/// stable. Returns `None` on a constant clash or a cycle.
pub fn graph_unify_oracle(g1: &FeatureGraph, g2: &FeatureGraph) -> Option<FeatureGraph> {
    #[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
    enum Key {
        Node(u8, NodeId),
        Const(Constant),
    }
    let mut keys: Vec<Key> = Vec::new();
    let mut index: HashMap<Key, usize> = HashMap::new();
    let mut intern = |k: Key, keys: &mut Vec<Key>| -> usize {
        *index.entry(k.clone()).or_insert_with(|| {
            keys.push(k);
            keys.len() - 1
        })
    };
    let mut arcs: Vec<(usize, String, usize)> = Vec::new();
    let mut roots = Vec::new();
    for (side, g) in [(0u8, g1), (1u8, g2)] {
        match g {
            FeatureGraph::Atomic { value } => roots.push(intern(Key::Const(value.clone()), &mut keys)),
            FeatureGraph::Rooted(r) => {
                roots.push(intern(Key::Node(side, r.root), &mut keys));
                for n in &r.nodes {
                    intern(Key::Node(side, *n), &mut keys);
                }
                for e in &r.edges {
                    let from = intern(Key::Node(side, e.from), &mut keys);
                    let to = match &e.to {
                        Target::Node(n) => Key::Node(side, *n),
                        Target::Constant(c) => Key::Const(c.clone()),
                    };
                    let to = intern(to, &mut keys);
                    arcs.push((from, e.label.as_str().to_string(), to));
                }
            }
        }
    }
    let n = keys.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut pending = vec![(roots[0], roots[1])];
    loop {
        while let Some((x, y)) = pending.pop() {
            let (rx, ry) = (find(&mut parent, x), find(&mut parent, y));
            if rx != ry {
                parent[rx] = ry;
            }
        }
        // Determinism: two arcs with the same label out of one class force
        // their targets together.
        let mut seen: HashMap<(usize, String), usize> = HashMap::new();
        for (from, label, to) in &arcs {
            let key = (find(&mut parent, *from), label.clone());
            let t = find(&mut parent, *to);
            match seen.get(&key) {
                Some(&u) if u != t => pending.push((u, t)),
                Some(_) => {}
                None => {
                    seen.insert(key, t);
                }
            }
        }
        if pending.is_empty() {
            break;
        }
    }
    let class_of: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    let mut const_in: HashMap<usize, Constant> = HashMap::new();
    for (i, k) in keys.iter().enumerate() {
        if let Key::Const(c) = k {
            if let Some(d) = const_in.insert(class_of[i], c.clone()) {
                if &d != c {
                    return None;
                }
            }
        }
    }
    let mut succ: BTreeMap<usize, BTreeMap<String, usize>> = BTreeMap::new();
    for (from, label, to) in &arcs {
        if const_in.contains_key(&class_of[*from]) {
            return None;
        }
        succ.entry(class_of[*from]).or_default().insert(label.clone(), class_of[*to]);
    }
    let root = class_of[roots[0]];
    if let Some(c) = const_in.get(&root) {
        return Some(FeatureGraph::atomic(c.clone()));
    }
    // Rebuild the part reachable from the root, checking for cycles.
    let mut ids: BTreeMap<usize, NodeId> = BTreeMap::new();
    let mut edges = Vec::new();
    let mut constants = BTreeSet::new();
    let mut on_path = BTreeSet::new();
    fn visit(
        c: usize,
        succ: &BTreeMap<usize, BTreeMap<String, usize>>,
        const_in: &HashMap<usize, Constant>,
        ids: &mut BTreeMap<usize, NodeId>,
        on_path: &mut BTreeSet<usize>,
        edges: &mut Vec<Edge>,
        constants: &mut BTreeSet<Constant>,
    ) -> bool {
        if !on_path.insert(c) {
            return false;
        }
        let next = ids.len() as u32;
        ids.insert(c, NodeId(next));
        for (label, &t) in succ.get(&c).into_iter().flatten() {
            let to = if let Some(k) = const_in.get(&t) {
                constants.insert(k.clone());
                Target::Constant(k.clone())
            } else {
                if on_path.contains(&t) {
                    return false;
                }
                if !ids.contains_key(&t) && !visit(t, succ, const_in, ids, on_path, edges, constants) {
                    return false;
                }
                Target::Node(ids[&t])
            };
            edges.push(Edge {
                from: ids[&c],
                label: Attribute::new(label),
                to,
            });
        }
        on_path.remove(&c);
        true
    }
    if !visit(root, &succ, &const_in, &mut ids, &mut on_path, &mut edges, &mut constants) {
        return None;
    }
    // Cycles among classes unreachable from the root still make the
    // conjunction unsatisfiable.
    let all: Vec<usize> = succ.keys().copied().collect();
    let mut done = BTreeSet::new();
    for start in all {
        if ids.contains_key(&start) || done.contains(&start) {
            continue;
        }
        let mut scratch_ids = BTreeMap::new();
        let mut scratch_edges = Vec::new();
        let mut scratch_consts = BTreeSet::new();
        if !visit(start, &succ, &const_in, &mut scratch_ids, &mut BTreeSet::new(), &mut scratch_edges, &mut scratch_consts) {
            return None;
        }
        done.extend(scratch_ids.keys().copied());
    }
    Some(FeatureGraph::Rooted(RootedGraph {
        root: NodeId(0),
        nodes: ids.values().copied().collect(),
        constants,
        edges,
    }))
}

/// Every clause over variables `1..=vars` built from distinct literals,
/// at most `max_len` of them, each literal set listed once.
pub fn all_clauses(vars: u32, max_len: usize) -> Vec<Clause> {
    let lits: Vec<Literal> = (1..=vars).flat_map(|v| [Literal::pos(v), Literal::neg(v)]).collect();
    let mut out = Vec::new();
    for mask in 1u32..(1 << lits.len()) {
        if mask.count_ones() as usize <= max_len {
            let chosen = (0..lits.len()).filter(|i| mask >> i & 1 == 1).map(|i| lits[i]).collect();
            out.push(Clause::new(chosen).unwrap());
        }
    }
    out
}

/// Every formula that is a set of at most `max_clauses` distinct clauses
/// from `clauses`, including the empty formula.
pub fn all_formulas(clauses: &[Clause], max_clauses: usize) -> Vec<CnfFormula> {
    fn go(clauses: &[Clause], start: usize, left: usize, cur: &mut Vec<Clause>, out: &mut Vec<CnfFormula>) {
        out.push(CnfFormula::new(cur.clone()));
        if left == 0 {
            return;
        }
        for i in start..clauses.len() {
            cur.push(clauses[i].clone());
            go(clauses, i + 1, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(clauses, 0, max_clauses, &mut Vec::new(), &mut out);
    out
}

pub fn random_cnf(rng: &mut impl Rng, max_vars: u32, max_clauses: usize, max_len: usize) -> CnfFormula {
    let vars = rng.gen_range(1..=max_vars);
    let n = rng.gen_range(1..=max_clauses);
    CnfFormula::new(
        (0..n)
            .map(|_| {
                let len = rng.gen_range(1..=max_len);
                Clause::new(
                    (0..len)
                        .map(|_| Literal {
                            var: rng.gen_range(1..=vars),
                            negated: rng.gen_bool(0.5),
                        })
                        .collect(),
                )
                .unwrap()
            })
            .collect(),
    )
}

/// Two attribute chains of length `k` hanging off variables that are
/// identified at the start, so solving cascades merges along both. Chains
/// end in the same constant so the set stays satisfiable.
pub fn chain_family(k: usize) -> PrimitiveSet {
    let x = |i: usize| Term::var(&format!("x{i}"));
    let y = |i: usize| Term::var(&format!("y{i}"));
    let mut p = PrimitiveSet::new();
    p.insert(PrimitiveFormula::term_eq(x(0), y(0)));
    for i in 0..k {
        p.insert(PrimitiveFormula::feature_eq("f", x(i), x(i + 1)));
        p.insert(PrimitiveFormula::feature_eq("f", y(i), y(i + 1)));
    }
    p.insert(PrimitiveFormula::term_eq(x(k), Term::constant("end")));
    p.insert(PrimitiveFormula::term_eq(Term::constant("end"), y(k)));
    p
}

/// `x0 = x1, ..., x(k-1) = xk` with `f xi = yi` on every link, so every
/// substitution exposes another merge of two `f` values.
pub fn star_family(k: usize) -> PrimitiveSet {
    let x = |i: usize| Term::var(&format!("x{i}"));
    let y = |i: usize| Term::var(&format!("y{i}"));
    let mut p = PrimitiveSet::new();
    for i in 0..k {
        p.insert(PrimitiveFormula::term_eq(x(i), x(i + 1)));
        p.insert(PrimitiveFormula::feature_eq("f", x(i), y(i)));
    }
    p.insert(PrimitiveFormula::feature_eq("f", x(k), y(k)));
    p
}

/// Exactly `clauses` clauses of exactly `len` literals over `1..=vars`.
pub fn random_cnf_sized(rng: &mut impl Rng, clauses: usize, vars: u32, len: usize) -> CnfFormula {
    CnfFormula::new(
        (0..clauses)
            .map(|_| {
                Clause::new(
                    (0..len)
                        .map(|_| Literal {
                            var: rng.gen_range(1..=vars),
                            negated: rng.gen_bool(0.5),
                        })
                        .collect(),
                )
                .unwrap()
            })
            .collect(),
    )
}

/// A near copy of `g`: one edge gets a different label or, if it points at
/// a constant, a different constant. May or may not stay isomorphic.
pub fn perturb(rng: &mut impl Rng, g: &FeatureGraph) -> FeatureGraph {
    let FeatureGraph::Rooted(r) = g else {
        return g.clone();
    };
    if r.edges.is_empty() {
        return g.clone();
    }
    let mut r = r.clone();
    let k = rng.gen_range(0..r.edges.len());
    let e = r.edges[k].clone();
    let taken: BTreeSet<Attribute> = r.edges.iter().filter(|x| x.from == e.from).map(|x| x.label.clone()).collect();
    let relabel = ["a0", "a1", "a2", "a3"].iter().map(|l| Attribute::new(l)).find(|l| !taken.contains(l));
    match (&e.to, relabel) {
        (Target::Constant(c), _) if rng.gen_bool(0.5) => {
            let other = Constant::new(if c.as_str() == "c0" { "c1" } else { "c0" });
            r.edges[k].to = Target::Constant(other);
        }
        (_, Some(l)) => r.edges[k].label = l,
        _ => {}
    }
    r.constants = r
        .edges
        .iter()
        .filter_map(|e| match &e.to {
            Target::Constant(c) => Some(c.clone()),
            Target::Node(_) => None,
        })
        .collect();
    FeatureGraph::Rooted(r)
}

//! An incremental solved-form store with undo, used during derivation search.
//!
//! Primitive formulas are added one at a time. Term equations merge classes
//! (a constant, when present, represents its class); feature equations hang
//! an attribute off a class, and two values for the same attribute are
//! merged in turn. A clash is reported as soon as it arises. Every mutation
//! is trailed so the search can roll back to any checkpoint.

use std::collections::HashMap;

use crate::formula::{Attribute, PrimitiveFormula, Term};
use crate::solver::acyclic_from;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Clash;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Checkpoint(usize);

#[derive(Debug)]
enum Undo {
    Intern,
    Link { child: u32, root: u32 },
    Feature { node: u32 },
}

#[derive(Debug, Default)]
pub struct ConstraintStore {
    ids: HashMap<Term, u32>,
    terms: Vec<Term>,
    parent: Vec<u32>,
    size: Vec<u32>,
    features: Vec<Vec<(Attribute, u32)>>,
    trail: Vec<Undo>,
}

impl ConstraintStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint(self.trail.len())
    }

    pub fn rollback(&mut self, to: Checkpoint) {
        while self.trail.len() > to.0 {
            match self.trail.pop().unwrap() {
                Undo::Intern => {
                    let t = self.terms.pop().unwrap();
                    self.ids.remove(&t);
                    self.parent.pop();
                    self.size.pop();
                    self.features.pop();
                }
                Undo::Link { child, root } => {
                    self.parent[child as usize] = child;
                    self.size[root as usize] -= self.size[child as usize];
                }
                Undo::Feature { node } => {
                    self.features[node as usize].pop();
                }
            }
        }
    }

    fn intern(&mut self, t: &Term) -> u32 {
        if let Some(&id) = self.ids.get(t) {
            return id;
        }
        let id = self.terms.len() as u32;
        self.ids.insert(t.clone(), id);
        self.terms.push(t.clone());
        self.parent.push(id);
        self.size.push(1);
        self.features.push(Vec::new());
        self.trail.push(Undo::Intern);
        id
    }

    // No path compression: links must stay undoable.
    fn find(&self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            x = self.parent[x as usize];
        }
        x
    }

    fn is_const(&self, x: u32) -> bool {
        self.terms[x as usize].is_const()
    }

    fn feature_of(&self, node: u32, f: &Attribute) -> Option<u32> {
        self.features[node as usize]
            .iter()
            .find(|(g, _)| g == f)
            .map(|(_, t)| *t)
    }

    fn add_feature(&mut self, node: u32, f: Attribute, to: u32, pending: &mut Vec<(u32, u32)>) -> Result<(), Clash> {
        if self.is_const(node) {
            return Err(Clash);
        }
        match self.feature_of(node, &f) {
            Some(existing) => pending.push((existing, to)),
            None => {
                self.features[node as usize].push((f, to));
                self.trail.push(Undo::Feature { node });
            }
        }
        Ok(())
    }

    fn merge(&mut self, pending: &mut Vec<(u32, u32)>) -> Result<(), Clash> {
        while let Some((a, b)) = pending.pop() {
            let (ra, rb) = (self.find(a), self.find(b));
            if ra == rb {
                continue;
            }
            let (ca, cb) = (self.is_const(ra), self.is_const(rb));
            if ca && cb {
                return Err(Clash);
            }
            // The constant, or else the larger class, stays representative.
            let (child, root) = if ca || (!cb && self.size[ra as usize] >= self.size[rb as usize]) {
                (rb, ra)
            } else {
                (ra, rb)
            };
            self.parent[child as usize] = root;
            self.size[root as usize] += self.size[child as usize];
            self.trail.push(Undo::Link { child, root });
            let moved = self.features[child as usize].clone();
            for (f, t) in moved {
                self.add_feature(root, f, t, pending)?;
            }
        }
        Ok(())
    }

    /// Adds one primitive formula. On `Err` the store is inconsistent until
    /// rolled back to a checkpoint taken before the call.
    pub fn add(&mut self, p: &PrimitiveFormula) -> Result<(), Clash> {
        let mut pending = Vec::new();
        match p {
            PrimitiveFormula::TermEq(s, t) => {
                let (s, t) = (self.intern(s), self.intern(t));
                pending.push((s, t));
            }
            PrimitiveFormula::FeatureEq(f, s, t) => {
                let (s, t) = (self.intern(s), self.intern(t));
                let rs = self.find(s);
                self.add_feature(rs, f.clone(), t, &mut pending)?;
            }
        }
        self.merge(&mut pending)
    }

    pub fn add_all<'a>(&mut self, ps: impl IntoIterator<Item = &'a PrimitiveFormula>) -> Result<(), Clash> {
        ps.into_iter().try_for_each(|p| self.add(p))
    }

    /// Whether the attribute edges between classes form no cycle.
    pub fn is_acyclic(&self) -> bool {
        let mut succ: HashMap<u32, Vec<u32>> = HashMap::new();
        for node in 0..self.terms.len() as u32 {
            if self.find(node) != node {
                continue;
            }
            let targets = self.features[node as usize]
                .iter()
                .map(|(_, t)| self.find(*t))
                .collect();
            succ.insert(node, targets);
        }
        acyclic_from(&succ)
    }

    /// The representative term of `t`'s class, if `t` has been seen.
    pub fn representative(&self, t: &Term) -> Option<&Term> {
        self.ids
            .get(t)
            .map(|&id| &self.terms[self.find(id) as usize])
    }
}

use std::collections::{BTreeMap, HashMap, HashSet};

use super::Backend;
use crate::term::{Nat, VertexTerm};

/// A finite vertex set indexed for neighbourhood queries.
///
/// Every adjacency of the supported backends is either "x is a member/bit
/// of y" or a seed edge between base vertices, so storing the reverse
/// membership lets `neighbors` run in time proportional to the answer.
#[derive(Clone, Default)]
pub struct VertexPool {
    set: HashSet<VertexTerm>,
    items: Vec<VertexTerm>,
    nat_parents: BTreeMap<Nat, Vec<Nat>>,
    set_parents: HashMap<VertexTerm, Vec<VertexTerm>>,
    bases: Vec<VertexTerm>,
    max_stage: u32,
}

impl VertexPool {
    pub fn new() -> VertexPool {
        VertexPool::default()
    }

    pub fn insert(&mut self, x: VertexTerm) -> bool {
        if !self.set.insert(x.clone()) {
            return false;
        }
        match &x {
            VertexTerm::Nat(n) => {
                for b in n.bits() {
                    self.nat_parents.entry(b).or_default().push(n.clone());
                }
            }
            VertexTerm::Base(_) => self.bases.push(x.clone()),
            VertexTerm::Set(s) => {
                for m in s.members() {
                    self.set_parents.entry(m.clone()).or_default().push(x.clone());
                }
            }
        }
        self.max_stage = self.max_stage.max(x.stage());
        self.items.push(x);
        true
    }

    pub fn contains(&self, x: &VertexTerm) -> bool {
        self.set.contains(x)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Insertion order.
    pub fn items(&self) -> &[VertexTerm] {
        &self.items
    }

    pub fn max_stage(&self) -> u32 {
        self.max_stage
    }

    /// Union of the digit positions of the pooled naturals, ascending.
    pub(crate) fn nat_bit_values(&self) -> impl Iterator<Item = &Nat> {
        self.nat_parents.keys()
    }

    pub(crate) fn nat_parents_of(&self, x: &Nat) -> &[Nat] {
        self.nat_parents.get(x).map(|v| v.as_slice()).unwrap_or(&[])
    }

    /// Pool members adjacent to `x` (never `x` itself).
    pub fn neighbors(&self, backend: &Backend, x: &VertexTerm) -> Vec<VertexTerm> {
        let mut out = Vec::new();
        match x {
            VertexTerm::Nat(n) => {
                for b in n.bits() {
                    let v = VertexTerm::Nat(b);
                    if self.set.contains(&v) {
                        out.push(v);
                    }
                }
                out.extend(self.nat_parents_of(n).iter().cloned().map(VertexTerm::Nat));
            }
            VertexTerm::Base(b) => {
                if backend.seed_has_edges() {
                    for y in &self.bases {
                        if let VertexTerm::Base(c) = y {
                            if c != b && backend.seed_adjacent(b, c) {
                                out.push(y.clone());
                            }
                        }
                    }
                }
                if let Some(p) = self.set_parents.get(x) {
                    out.extend(p.iter().cloned());
                }
            }
            VertexTerm::Set(s) => {
                for m in s.members() {
                    if self.set.contains(m) {
                        out.push(m.clone());
                    }
                }
                if let Some(p) = self.set_parents.get(x) {
                    out.extend(p.iter().cloned());
                }
            }
        }
        out
    }

    pub fn has_neighbor(&self, backend: &Backend, x: &VertexTerm) -> bool {
        !self.neighbors(backend, x).is_empty()
    }
}

impl FromIterator<VertexTerm> for VertexPool {
    fn from_iter<I: IntoIterator<Item = VertexTerm>>(iter: I) -> Self {
        let mut p = VertexPool::new();
        for x in iter {
            p.insert(x);
        }
        p
    }
}

impl<'a> FromIterator<&'a VertexTerm> for VertexPool {
    fn from_iter<I: IntoIterator<Item = &'a VertexTerm>>(iter: I) -> Self {
        iter.into_iter().cloned().collect()
    }
}

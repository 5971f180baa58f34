//! The inductive limit of parametrized random extensions.
//!
//! Vertices are terms: base vertices of the seed, and set terms
//! `Set(s, U)` standing for the vertex added at stage `s` whose neighbours
//! below it are exactly `U`.  Stages are virtual; nothing is materialized
//! beyond the enumeration prefix that was actually requested.
//!
//! Enumeration runs in blocks.  The level of a base vertex is 0 for a
//! finite seed and its breadth-first rank for a group seed; the level of a
//! set term is the max of its stage and its members' levels.  Block N lists
//! the terms of level N by stage, then in bitmask order over the first
//! terms of level ≤ N one stage below.  For finite seeds this is simply
//! stage order with colex inside each stage.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::group::Group;
use crate::term::{BaseId, SetTerm, VertexTerm};

pub fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Stage-0 graph of a limit backend.
#[derive(Clone, Debug)]
pub enum Seed {
    /// Vertices `b0..b{n-1}` with the listed edges.
    Graph { n: u32, edges: HashSet<(u32, u32)> },
    /// The elements of a group, no edges.
    Group(Group),
}

impl Seed {
    pub fn edgeless(n: u32) -> Seed {
        Seed::Graph { n, edges: HashSet::new() }
    }

    pub fn graph(n: u32, edges: &[(u32, u32)]) -> Result<Seed> {
        let mut set = HashSet::new();
        for &(a, b) in edges {
            if a == b || a >= n || b >= n {
                return Err(Error::InvalidInput(format!("bad seed edge ({a},{b})")));
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(Seed::Graph { n, edges: set })
    }

    pub fn has_edges(&self) -> bool {
        matches!(self, Seed::Graph { edges, .. } if !edges.is_empty())
    }

    pub fn adjacent(&self, a: &BaseId, b: &BaseId) -> bool {
        match (self, a, b) {
            (Seed::Graph { edges, .. }, BaseId::Index(x), BaseId::Index(y)) => {
                edges.contains(&((*x).min(*y), (*x).max(*y)))
            }
            _ => false,
        }
    }

    pub fn contains(&self, b: &BaseId) -> bool {
        match (self, b) {
            (Seed::Graph { n, .. }, BaseId::Index(i)) => i < n,
            (Seed::Group(g), BaseId::Elem(e)) => g.contains(e),
            _ => false,
        }
    }

    /// Base vertex at position `i`, if any.
    pub fn base(&self, i: usize) -> Option<VertexTerm> {
        match self {
            Seed::Graph { n, .. } => (i < *n as usize).then(|| VertexTerm::base(i as u32)),
            Seed::Group(g) => g.element(i).map(VertexTerm::elem),
        }
    }

    fn is_finite_graph(&self) -> bool {
        matches!(self, Seed::Graph { .. })
    }
}

pub(crate) struct LimitState {
    terms: Vec<VertexTerm>,
    block: u32,
    stage: u32,
    base_i: usize,
    pool: Vec<VertexTerm>,
    pool_complete: bool,
    mask: u64,
    mask_done: bool,
    prefix_memo: HashMap<(u32, u32), (Vec<VertexTerm>, bool)>,
    level_memo: HashMap<u64, u32>,
    validated: HashSet<u64>,
}

impl LimitState {
    pub(crate) fn new() -> LimitState {
        LimitState {
            terms: Vec::new(),
            block: 0,
            stage: 0,
            base_i: 0,
            pool: Vec::new(),
            pool_complete: true,
            mask: 1,
            mask_done: false,
            prefix_memo: HashMap::new(),
            level_memo: HashMap::new(),
            validated: HashSet::new(),
        }
    }
}

pub struct LimitSpec {
    pub seed: Seed,
    pub l: u64,
}

impl LimitSpec {
    pub fn admissible(&self, size: usize) -> bool {
        size > 0 && gcd(self.l, size as u64) == 1
    }

    fn level(&self, st: &mut LimitState, x: &VertexTerm) -> u32 {
        match x {
            VertexTerm::Base(BaseId::Elem(e)) => match &self.seed {
                Seed::Group(g) => g.rank(e, usize::MAX).expect("valid element") as u32,
                _ => 0,
            },
            VertexTerm::Set(s) => {
                if let Some(l) = st.level_memo.get(&s.id()) {
                    return *l;
                }
                let mut l = s.stage();
                for m in s.members() {
                    l = l.max(self.level(st, m));
                }
                st.level_memo.insert(s.id(), l);
                l
            }
            _ => 0,
        }
    }

    /// Bases of level ≤ n.
    fn bases_upto(&self, n: u32) -> Vec<VertexTerm> {
        match &self.seed {
            Seed::Graph { n: k, .. } => (0..*k).map(VertexTerm::base).collect(),
            Seed::Group(_) => (0..=n as usize).map_while(|i| self.seed.base(i)).collect(),
        }
    }

    /// First `cap` terms of level ≤ n and stage ≤ t, and whether that is
    /// all of them.
    fn prefix(&self, st: &mut LimitState, n: u32, t: u32, cap: usize) -> (Vec<VertexTerm>, bool) {
        if let Some((v, c)) = st.prefix_memo.get(&(n, t)) {
            if *c || v.len() >= cap {
                return (v.iter().take(cap).cloned().collect(), *c && v.len() <= cap);
            }
        }
        let mut out = self.bases_upto(n);
        let mut complete = true;
        if out.len() > cap {
            out.truncate(cap);
            complete = false;
        }
        'stages: for u in 1..=t {
            if !complete {
                break;
            }
            let (pool, pc) = self.prefix(st, n, u - 1, 64);
            let mut mask: u64 = 1;
            loop {
                if pc && pool.len() < 64 && mask >= 1u64 << pool.len() {
                    break;
                }
                if self.admissible(mask.count_ones() as usize) {
                    let members = (0..64).filter(|k| mask >> k & 1 == 1).map(|k| pool[k].clone()).collect();
                    out.push(set_term(u, members));
                    if out.len() >= cap {
                        complete = false;
                        break 'stages;
                    }
                }
                if mask == u64::MAX {
                    break;
                }
                mask += 1;
            }
            if !pc {
                complete = false;
            }
        }
        st.prefix_memo.insert((n, t), (out.clone(), complete));
        (out, complete)
    }

    fn start_stage(&self, st: &mut LimitState) {
        st.mask = 1;
        st.mask_done = false;
        if st.stage >= 1 {
            let (pool, complete) = self.prefix(st, st.block, st.stage - 1, 65);
            st.pool_complete = complete;
            st.pool = pool;
            if st.pool.len() > 64 {
                st.pool.truncate(64);
                st.pool_complete = false;
            }
        }
    }

    fn first_stage(&self, block: u32) -> u32 {
        if self.seed.is_finite_graph() {
            block.max(1)
        } else {
            1
        }
    }

    fn next_term(&self, st: &mut LimitState) -> Option<VertexTerm> {
        if matches!(self.seed, Seed::Graph { n: 0, .. }) {
            return None;
        }
        loop {
            if st.stage == 0 {
                let base = match &self.seed {
                    Seed::Graph { n, .. } => {
                        (st.block == 0 && st.base_i < *n as usize).then(|| VertexTerm::base(st.base_i as u32))
                    }
                    Seed::Group(_) if st.base_i == st.block as usize => self.seed.base(st.block as usize),
                    Seed::Group(_) => None,
                };
                if base.is_some() || st.base_i == st.block as usize {
                    st.base_i += 1;
                }
                if base.is_some() {
                    return base;
                }
                st.stage = self.first_stage(st.block);
                self.start_stage(st);
                continue;
            }
            if st.stage > st.block {
                st.block += 1;
                st.stage = 0;
                continue;
            }
            if st.mask_done {
                st.stage += 1;
                if st.stage <= st.block {
                    self.start_stage(st);
                }
                continue;
            }
            let mask = st.mask;
            if st.pool_complete && st.pool.len() < 64 && mask >= 1u64 << st.pool.len() {
                st.mask_done = true;
                continue;
            }
            if mask == u64::MAX {
                st.mask_done = true;
            } else {
                st.mask += 1;
            }
            if !self.admissible(mask.count_ones() as usize) {
                continue;
            }
            let members: Vec<VertexTerm> =
                (0..64).filter(|k| mask >> k & 1 == 1).map(|k| st.pool[k].clone()).collect();
            let term = set_term(st.stage, members);
            if st.stage < st.block && self.level(st, &term) != st.block {
                continue;
            }
            return Some(term);
        }
    }

    pub(crate) fn enumerate(&self, st: &mut LimitState, n: usize) -> Result<Vec<VertexTerm>> {
        while st.terms.len() < n {
            match self.next_term(st) {
                Some(t) => st.terms.push(t),
                None => return Err(Error::ExhaustedBackend(st.terms.len())),
            }
        }
        Ok(st.terms[..n].to_vec())
    }

    pub(crate) fn nth(&self, st: &mut LimitState, i: usize) -> Option<VertexTerm> {
        while st.terms.len() <= i {
            let t = self.next_term(st)?;
            st.terms.push(t);
        }
        Some(st.terms[i].clone())
    }

    pub(crate) fn validate(&self, st: &mut LimitState, x: &VertexTerm) -> Result<()> {
        match x {
            VertexTerm::Nat(_) => Err(Error::InvalidVertex(format!("{x} is not a term of a limit backend"))),
            VertexTerm::Base(b) => {
                if self.seed.contains(b) {
                    Ok(())
                } else {
                    Err(Error::InvalidVertex(format!("{x} is not a seed vertex")))
                }
            }
            VertexTerm::Set(s) => {
                if st.validated.contains(&s.id()) {
                    return Ok(());
                }
                if !self.admissible(s.members().len()) {
                    return Err(Error::InvalidVertex(format!(
                        "{x}: size {} is not coprime to l={}",
                        s.members().len(),
                        self.l
                    )));
                }
                for m in s.members() {
                    self.validate(st, m)?;
                }
                st.validated.insert(s.id());
                Ok(())
            }
        }
    }

    pub(crate) fn adjacent(&self, x: &VertexTerm, y: &VertexTerm) -> bool {
        match (x, y) {
            (VertexTerm::Base(a), VertexTerm::Base(b)) => self.seed.adjacent(a, b),
            (VertexTerm::Set(s), other) | (other, VertexTerm::Set(s)) if s.contains(other) => true,
            (VertexTerm::Set(a), VertexTerm::Set(b)) => b.contains(x) || a.contains(y),
            _ => false,
        }
    }
}

fn set_term(stage: u32, mut members: Vec<VertexTerm>) -> VertexTerm {
    members.sort();
    VertexTerm::Set(SetTerm::from_sorted(stage, members))
}

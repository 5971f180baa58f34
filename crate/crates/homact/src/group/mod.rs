//! Enumerable groups with canonical normal forms.

mod amalgam;
mod finite;
mod hnn;
mod word;

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

pub use amalgam::Amalgam;
pub use finite::FiniteTable;
pub use hnn::Hnn;
pub use word::Letter;

use crate::error::{Error, Result};

/// A group element in normal form.  The variant is fixed by the group kind.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Elem {
    /// Index into a finite table (0 is the identity).
    Fin(u32),
    /// Integer, reduced modulo n for finite cyclic groups.
    Int(i64),
    /// Freely reduced word; letter `j` or `-j` is a_j^{±1}, starting at 1.
    Word(Vec<i32>),
    /// Alternating syllables t₁…tₙ followed by σ ∈ Σ.  Each syllable is a
    /// nontrivial left transversal element of its factor.
    Amal(Vec<(u8, Elem)>, u32),
    /// Britton form h₀ t^{ε₁} r₁ … t^{εₙ} rₙ; rᵢ is a right coset
    /// representative of the subgroup that passes through t^{εᵢ}.
    Hnn(Box<Elem>, Vec<(i8, Elem)>),
}

impl Elem {
    /// Identity test that needs no group context.
    pub fn is_identity(&self) -> bool {
        match self {
            Elem::Fin(i) => *i == 0,
            Elem::Int(k) => *k == 0,
            Elem::Word(w) => w.is_empty(),
            Elem::Amal(s, sigma) => s.is_empty() && *sigma == 0,
            Elem::Hnn(h, tail) => tail.is_empty() && h.is_identity(),
        }
    }
}

#[derive(Clone)]
pub enum GroupKind {
    Finite(FiniteTable),
    /// `None` is ℤ.
    Cyclic(Option<u64>),
    Free(u32),
    Amalgam(Amalgam),
    Hnn(Hnn),
}

struct BfsCache {
    list: Vec<Elem>,
    depth: Vec<u32>,
    rank: HashMap<Elem, usize>,
    next: usize,
    done: bool,
}

pub struct GroupData {
    name: String,
    kind: GroupKind,
    cache: Mutex<BfsCache>,
}

/// Shared handle to a group descriptor.
#[derive(Clone)]
pub struct Group(Arc<GroupData>);

impl PartialEq for Group {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

impl fmt::Debug for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Group({})", self.0.name)
    }
}

impl Group {
    pub fn new(name: impl Into<String>, kind: GroupKind) -> Group {
        let id = identity_of(&kind);
        let cache = BfsCache {
            list: vec![id.clone()],
            depth: vec![0],
            rank: HashMap::from([(id, 0)]),
            next: 0,
            done: false,
        };
        Group(Arc::new(GroupData { name: name.into(), kind, cache: Mutex::new(cache) }))
    }

    pub fn finite(name: impl Into<String>, table: FiniteTable) -> Group {
        Group::new(name, GroupKind::Finite(table))
    }

    pub fn integers() -> Group {
        Group::new("Z", GroupKind::Cyclic(None))
    }

    pub fn cyclic(n: u64) -> Group {
        if n == 0 {
            return Group::integers();
        }
        Group::new(format!("Z/{n}"), GroupKind::Cyclic(Some(n)))
    }

    pub fn free(rank: u32) -> Group {
        Group::new(format!("F{rank}"), GroupKind::Free(rank))
    }

    pub fn name(&self) -> &str {
        &self.0.name
    }

    pub fn kind(&self) -> &GroupKind {
        &self.0.kind
    }

    pub fn as_amalgam(&self) -> Option<&Amalgam> {
        match &self.0.kind {
            GroupKind::Amalgam(a) => Some(a),
            _ => None,
        }
    }

    pub fn as_hnn(&self) -> Option<&Hnn> {
        match &self.0.kind {
            GroupKind::Hnn(h) => Some(h),
            _ => None,
        }
    }

    pub fn identity(&self) -> Elem {
        identity_of(&self.0.kind)
    }

    pub fn is_identity(&self, e: &Elem) -> bool {
        e.is_identity()
    }

    /// `None` for infinite groups.
    pub fn order(&self) -> Option<u64> {
        match &self.0.kind {
            GroupKind::Finite(t) => Some(t.order() as u64),
            GroupKind::Cyclic(n) => *n,
            GroupKind::Free(0) => Some(1),
            GroupKind::Free(_) => None,
            GroupKind::Amalgam(a) => a.order(),
            GroupKind::Hnn(_) => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.order().is_some()
    }

    pub fn mul(&self, a: &Elem, b: &Elem) -> Elem {
        match &self.0.kind {
            GroupKind::Finite(t) => match (a, b) {
                (Elem::Fin(x), Elem::Fin(y)) => Elem::Fin(t.mul(*x, *y)),
                _ => panic!("finite group expects table indices"),
            },
            GroupKind::Cyclic(n) => match (a, b) {
                (Elem::Int(x), Elem::Int(y)) => Elem::Int(reduce_int(x + y, *n)),
                _ => panic!("cyclic group expects integers"),
            },
            GroupKind::Free(_) => match (a, b) {
                (Elem::Word(x), Elem::Word(y)) => Elem::Word(free_mul(x, y)),
                _ => panic!("free group expects words"),
            },
            GroupKind::Amalgam(am) => am.mul(a, b),
            GroupKind::Hnn(h) => h.mul(a, b),
        }
    }

    pub fn inv(&self, a: &Elem) -> Elem {
        match &self.0.kind {
            GroupKind::Finite(t) => match a {
                Elem::Fin(x) => Elem::Fin(t.inv(*x)),
                _ => panic!("finite group expects table indices"),
            },
            GroupKind::Cyclic(n) => match a {
                Elem::Int(x) => Elem::Int(reduce_int(-x, *n)),
                _ => panic!("cyclic group expects integers"),
            },
            GroupKind::Free(_) => match a {
                Elem::Word(w) => Elem::Word(w.iter().rev().map(|l| -l).collect()),
                _ => panic!("free group expects words"),
            },
            GroupKind::Amalgam(am) => am.inv(a),
            GroupKind::Hnn(h) => h.inv(a),
        }
    }

    pub fn pow(&self, a: &Elem, k: i64) -> Elem {
        let base = if k < 0 { self.inv(a) } else { a.clone() };
        let mut out = self.identity();
        for _ in 0..k.unsigned_abs() {
            out = self.mul(&out, &base);
        }
        out
    }

    pub fn conj(&self, g: &Elem, x: &Elem) -> Elem {
        self.mul(&self.mul(g, x), &self.inv(g))
    }

    /// Checks that `e` is a well-formed normal form of this group.
    pub fn contains(&self, e: &Elem) -> bool {
        match (&self.0.kind, e) {
            (GroupKind::Finite(t), Elem::Fin(i)) => *i < t.order(),
            (GroupKind::Cyclic(None), Elem::Int(_)) => true,
            (GroupKind::Cyclic(Some(n)), Elem::Int(k)) => *k >= 0 && (*k as u64) < *n,
            (GroupKind::Free(r), Elem::Word(w)) => {
                w.iter().all(|l| *l != 0 && l.unsigned_abs() <= *r)
                    && w.windows(2).all(|p| p[0] != -p[1])
            }
            (GroupKind::Amalgam(am), Elem::Amal(..)) => am.is_normal(e),
            (GroupKind::Hnn(h), Elem::Hnn(..)) => h.is_normal(e),
            _ => false,
        }
    }

    /// Size used to pick transversal representatives.
    pub fn norm(&self, e: &Elem) -> u64 {
        match (&self.0.kind, e) {
            (GroupKind::Finite(_), Elem::Fin(i)) => (*i != 0) as u64,
            (GroupKind::Cyclic(None), Elem::Int(k)) => k.unsigned_abs(),
            (GroupKind::Cyclic(Some(n)), Elem::Int(k)) => (*k as u64).min(n - *k as u64),
            (GroupKind::Free(_), Elem::Word(w)) => w.len() as u64,
            (GroupKind::Amalgam(am), _) => am.norm(e),
            (GroupKind::Hnn(h), _) => h.norm(e),
            _ => u64::MAX,
        }
    }

    /// Generators used for breadth-first enumeration, inverses included.
    pub fn gens(&self) -> Vec<Elem> {
        let mut out: Vec<Elem> = match &self.0.kind {
            GroupKind::Finite(t) => t.gens().iter().map(|g| Elem::Fin(*g)).collect(),
            GroupKind::Cyclic(None) => vec![Elem::Int(1), Elem::Int(-1)],
            GroupKind::Cyclic(Some(1)) => vec![],
            GroupKind::Cyclic(Some(n)) => vec![Elem::Int(1), Elem::Int(*n as i64 - 1)],
            GroupKind::Free(r) => (1..=*r as i32).flat_map(|j| [Elem::Word(vec![j]), Elem::Word(vec![-j])]).collect(),
            GroupKind::Amalgam(am) => am.gens(),
            GroupKind::Hnn(h) => h.gens(),
        };
        let mut seen = std::collections::HashSet::new();
        out.retain(|g| !g.is_identity() && seen.insert(g.clone()));
        out
    }

    fn grow(&self, cache: &mut BfsCache, want: usize) {
        if cache.done || cache.list.len() >= want {
            return;
        }
        let gens = self.gens();
        while cache.list.len() < want {
            if cache.next >= cache.list.len() {
                cache.done = true;
                return;
            }
            let cur = cache.list[cache.next].clone();
            let d = cache.depth[cache.next];
            for g in &gens {
                let e = self.mul(&cur, g);
                if !cache.rank.contains_key(&e) {
                    cache.rank.insert(e.clone(), cache.list.len());
                    cache.list.push(e);
                    cache.depth.push(d + 1);
                }
            }
            cache.next += 1;
        }
    }

    /// First `n` elements by word length, then generator order.
    pub fn elements(&self, n: usize) -> Vec<Elem> {
        let mut c = self.0.cache.lock().unwrap();
        self.grow(&mut c, n);
        c.list[..n.min(c.list.len())].to_vec()
    }

    pub fn element(&self, i: usize) -> Option<Elem> {
        let mut c = self.0.cache.lock().unwrap();
        self.grow(&mut c, i + 1);
        c.list.get(i).cloned()
    }

    /// Position in the enumeration, searching at most `cap` elements.
    pub fn rank(&self, e: &Elem, cap: usize) -> Option<usize> {
        let mut c = self.0.cache.lock().unwrap();
        let mut want = c.list.len();
        loop {
            if let Some(r) = c.rank.get(e) {
                return Some(*r);
            }
            if c.done || want >= cap {
                return None;
            }
            want = (want * 2).min(cap).max(want + 1);
            self.grow(&mut c, want);
        }
    }

    /// All elements of word length at most `r` (capped at `cap`).
    pub fn ball(&self, r: u32, cap: usize) -> Vec<Elem> {
        let mut c = self.0.cache.lock().unwrap();
        loop {
            let last = c.depth.last().copied().unwrap_or(0);
            if c.done || last > r || c.list.len() >= cap {
                break;
            }
            let want = (c.list.len() * 2).min(cap).max(c.list.len() + 1);
            self.grow(&mut c, want);
        }
        c.list.iter().zip(&c.depth).take(cap).filter(|(_, d)| **d <= r).map(|(e, _)| e.clone()).collect()
    }

    pub fn parse(&self, s: &str) -> Result<Elem> {
        word::parse(self, s)
    }

    pub fn word(&self, letters: &[Letter]) -> Result<Elem> {
        word::from_letters(self, letters)
    }

    pub fn show(&self, e: &Elem) -> String {
        e.to_string()
    }
}

fn identity_of(kind: &GroupKind) -> Elem {
    match kind {
        GroupKind::Finite(_) => Elem::Fin(0),
        GroupKind::Cyclic(_) => Elem::Int(0),
        GroupKind::Free(_) => Elem::Word(vec![]),
        GroupKind::Amalgam(_) => Elem::Amal(vec![], 0),
        GroupKind::Hnn(h) => Elem::Hnn(Box::new(h.base().identity()), vec![]),
    }
}

fn reduce_int(x: i64, n: Option<u64>) -> i64 {
    match n {
        None => x,
        Some(n) => x.rem_euclid(n as i64),
    }
}

fn free_mul(a: &[i32], b: &[i32]) -> Vec<i32> {
    let mut out = a.to_vec();
    for &l in b {
        if out.last() == Some(&-l) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    out
}

pub fn check_hom(
    field: &str,
    sigma: &FiniteTable,
    target: &Group,
    images: &[Elem],
) -> Result<HashMap<Elem, u32>> {
    let bad = |msg: String| Error::ValidationError { field: field.to_string(), msg };
    if images.len() != sigma.order() as usize {
        return Err(bad(format!("expected {} images, got {}", sigma.order(), images.len())));
    }
    for (i, e) in images.iter().enumerate() {
        if !target.contains(e) {
            return Err(bad(format!("image of element {i} is not in {}", target.name())));
        }
    }
    let mut lookup = HashMap::new();
    for (i, e) in images.iter().enumerate() {
        if lookup.insert(e.clone(), i as u32).is_some() {
            return Err(bad("embedding is not injective".into()));
        }
    }
    for a in sigma.elements() {
        for b in sigma.elements() {
            let lhs = &images[sigma.mul(a, b) as usize];
            let rhs = target.mul(&images[a as usize], &images[b as usize]);
            if *lhs != rhs {
                return Err(bad(format!("not a homomorphism at ({a},{b})")));
            }
        }
    }
    Ok(lookup)
}

impl fmt::Display for Elem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        word::display(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_group_reduces() {
        let f = Group::free(2);
        let a = f.parse("a1").unwrap();
        let ai = f.parse("a1^-1").unwrap();
        assert!(f.mul(&a, &ai).is_identity());
        assert_eq!(f.parse("a1.a2.a2^-1.a1").unwrap(), Elem::Word(vec![1, 1]));
        assert_eq!(f.parse("a1^2").unwrap().to_string(), "a1^2");
    }

    #[test]
    fn enumeration_is_by_length() {
        let z = Group::integers();
        let shown: Vec<String> = z.elements(5).iter().map(|e| e.to_string()).collect();
        assert_eq!(shown, ["0", "1", "-1", "2", "-2"]);
        let f = Group::free(2);
        assert_eq!(f.ball(1, 100).len(), 5);
        assert_eq!(f.ball(2, 100).len(), 17);
        assert_eq!(Group::cyclic(3).elements(10).len(), 3);
        assert_eq!(z.rank(&Elem::Int(-3), 100), Some(6));
    }
}

//! Vertex terms shared by every backend.
//!
//! Naturals are stored as hereditarily finite sets: a natural is the set of
//! positions of its binary 1-digits.  Small values live inline, everything
//! else is hash-consed so that equality and hashing are O(1).  Set terms of
//! the limit backend are hash-consed the same way.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, Mutex, OnceLock, Weak};

use num_bigint::BigUint;

use crate::error::{Error, Result};
use crate::group::Elem;

struct Interner<K, N> {
    map: HashMap<K, Weak<N>>,
    next_id: u64,
    purge_at: usize,
}

impl<K: Hash + Eq, N> Interner<K, N> {
    fn new() -> Self {
        Interner { map: HashMap::new(), next_id: 0, purge_at: 1 << 16 }
    }

    fn get_or_insert(&mut self, key: K, make: impl FnOnce(u64) -> N) -> Arc<N> {
        if let Some(node) = self.map.get(&key).and_then(Weak::upgrade) {
            return node;
        }
        let id = self.next_id;
        self.next_id += 1;
        let node = Arc::new(make(id));
        self.map.insert(key, Arc::downgrade(&node));
        if self.map.len() > self.purge_at {
            self.map.retain(|_, w| w.strong_count() > 0);
            self.purge_at = (self.map.len() * 2).max(1 << 16);
        }
        node
    }
}

// ---------------------------------------------------------------- naturals

#[derive(Clone)]
pub enum Nat {
    Small(u64),
    Big(Arc<BigNat>),
}

pub struct BigNat {
    id: u64,
    bits: Box<[Nat]>,
}

fn nat_interner() -> &'static Mutex<Interner<Box<[Nat]>, BigNat>> {
    static I: OnceLock<Mutex<Interner<Box<[Nat]>, BigNat>>> = OnceLock::new();
    I.get_or_init(|| Mutex::new(Interner::new()))
}

impl Nat {
    pub fn zero() -> Nat {
        Nat::Small(0)
    }

    /// Builds the natural whose 1-digits sit exactly at `bits`.
    pub fn from_bits(mut bits: Vec<Nat>) -> Nat {
        bits.sort();
        bits.dedup();
        if bits.iter().all(|b| matches!(b, Nat::Small(v) if *v < 64)) {
            let v = bits.iter().fold(0u64, |acc, b| match b {
                Nat::Small(k) => acc | (1u64 << k),
                Nat::Big(_) => acc,
            });
            return Nat::Small(v);
        }
        let key: Box<[Nat]> = bits.into_boxed_slice();
        let mut g = nat_interner().lock().unwrap();
        let node = g.get_or_insert(key.clone(), |id| BigNat { id, bits: key });
        Nat::Big(node)
    }

    pub fn pow2(k: Nat) -> Nat {
        Nat::from_bits(vec![k])
    }

    /// Positions of the 1-digits, ascending.
    pub fn bits(&self) -> Vec<Nat> {
        match self {
            Nat::Small(v) => (0..64).filter(|k| v >> k & 1 == 1).map(Nat::Small).collect(),
            Nat::Big(b) => b.bits.to_vec(),
        }
    }

    pub fn popcount(&self) -> usize {
        match self {
            Nat::Small(v) => v.count_ones() as usize,
            Nat::Big(b) => b.bits.len(),
        }
    }

    pub fn has_bit(&self, k: &Nat) -> bool {
        match (self, k) {
            (Nat::Small(v), Nat::Small(b)) => *b < 64 && (v >> b) & 1 == 1,
            (Nat::Small(_), Nat::Big(_)) => false,
            (Nat::Big(n), _) => n.bits.binary_search(k).is_ok(),
        }
    }

    pub fn as_u64(&self) -> Option<u64> {
        match self {
            Nat::Small(v) => Some(*v),
            Nat::Big(_) => None,
        }
    }

    /// Exact value when every digit position is below `limit`.
    pub fn to_biguint(&self, limit: u64) -> Option<BigUint> {
        match self {
            Nat::Small(v) => Some(BigUint::from(*v)),
            Nat::Big(b) => {
                let mut out = BigUint::from(0u32);
                for bit in b.bits.iter() {
                    let k = bit.as_u64().filter(|k| *k < limit)?;
                    out.set_bit(k, true);
                }
                Some(out)
            }
        }
    }

    pub fn from_biguint(v: &BigUint) -> Nat {
        if let Ok(x) = u64::try_from(v) {
            return Nat::Small(x);
        }
        let bits = (0..v.bits()).filter(|k| v.bit(*k)).map(Nat::Small).collect();
        Nat::from_bits(bits)
    }

    pub fn parse(s: &str) -> Result<Nat> {
        let s = s.trim();
        if let Some(inner) = s.strip_prefix("#[").and_then(|r| r.strip_suffix(']')) {
            let mut bits = Vec::new();
            for part in split_top(inner)? {
                bits.push(Nat::parse(&part)?);
            }
            return Ok(Nat::from_bits(bits));
        }
        if s.is_empty() || !s.bytes().all(|c| c.is_ascii_digit()) {
            return Err(Error::InvalidVertex(format!("not a natural: {s:?}")));
        }
        let v: BigUint = s.parse().map_err(|_| Error::InvalidVertex(s.to_string()))?;
        Ok(Nat::from_biguint(&v))
    }
}

impl PartialEq for Nat {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Nat::Small(a), Nat::Small(b)) => a == b,
            (Nat::Big(a), Nat::Big(b)) => a.id == b.id,
            _ => false,
        }
    }
}
impl Eq for Nat {}

impl Hash for Nat {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            Nat::Small(v) => {
                0u8.hash(state);
                v.hash(state)
            }
            Nat::Big(b) => {
                1u8.hash(state);
                b.id.hash(state)
            }
        }
    }
}

impl Ord for Nat {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Nat::Small(a), Nat::Small(b)) => a.cmp(b),
            (Nat::Small(_), Nat::Big(_)) => Ordering::Less,
            (Nat::Big(_), Nat::Small(_)) => Ordering::Greater,
            (Nat::Big(a), Nat::Big(b)) => {
                if a.id == b.id {
                    return Ordering::Equal;
                }
                colex(&a.bits, &b.bits)
            }
        }
    }
}
impl PartialOrd for Nat {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Order of finite sets by their characteristic numbers: the larger top
/// element wins.
fn colex<T: Ord>(a: &[T], b: &[T]) -> Ordering {
    let mut i = a.len();
    let mut j = b.len();
    while i > 0 && j > 0 {
        i -= 1;
        j -= 1;
        match a[i].cmp(&b[j]) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    (i > 0).cmp(&(j > 0)).then(a.len().cmp(&b.len()))
}

impl fmt::Display for Nat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Nat::Small(v) => write!(f, "{v}"),
            Nat::Big(b) => match self.to_biguint(1024) {
                Some(v) => write!(f, "{v}"),
                None => {
                    write!(f, "#[")?;
                    for (i, bit) in b.bits.iter().enumerate() {
                        if i > 0 {
                            write!(f, ",")?;
                        }
                        write!(f, "{bit}")?;
                    }
                    write!(f, "]")
                }
            },
        }
    }
}

impl fmt::Debug for Nat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl From<u64> for Nat {
    fn from(v: u64) -> Self {
        Nat::Small(v)
    }
}

// ---------------------------------------------------------------- terms

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum BaseId {
    Index(u32),
    Elem(Arc<Elem>),
}

#[derive(Clone)]
pub struct SetTerm(Arc<SetNode>);

pub struct SetNode {
    id: u64,
    stage: u32,
    members: Box<[VertexTerm]>,
}

type SetKey = (u32, Box<[VertexTerm]>);

fn set_interner() -> &'static Mutex<Interner<SetKey, SetNode>> {
    static I: OnceLock<Mutex<Interner<SetKey, SetNode>>> = OnceLock::new();
    I.get_or_init(|| Mutex::new(Interner::new()))
}

impl SetTerm {
    /// Members are sorted and deduplicated; they must be nonempty and of
    /// strictly lower stage.
    pub fn new(stage: u32, mut members: Vec<VertexTerm>) -> Result<SetTerm> {
        members.sort();
        members.dedup();
        if members.is_empty() {
            return Err(Error::InvalidVertex("empty set term".into()));
        }
        if let Some(m) = members.iter().find(|m| m.stage() >= stage) {
            return Err(Error::InvalidVertex(format!("member {m} has stage >= {stage}")));
        }
        Ok(SetTerm::from_sorted(stage, members))
    }

    pub(crate) fn from_sorted(stage: u32, members: Vec<VertexTerm>) -> SetTerm {
        let key: SetKey = (stage, members.into_boxed_slice());
        let mut g = set_interner().lock().unwrap();
        let members = key.1.clone();
        SetTerm(g.get_or_insert(key, |id| SetNode { id, stage, members }))
    }

    pub fn stage(&self) -> u32 {
        self.0.stage
    }

    pub fn members(&self) -> &[VertexTerm] {
        &self.0.members
    }

    pub fn id(&self) -> u64 {
        self.0.id
    }

    pub fn contains(&self, x: &VertexTerm) -> bool {
        if x.stage() >= self.stage() {
            return false;
        }
        self.0.members.binary_search(x).is_ok()
    }
}

impl PartialEq for SetTerm {
    fn eq(&self, other: &Self) -> bool {
        self.0.id == other.0.id
    }
}
impl Eq for SetTerm {}
impl Hash for SetTerm {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.id.hash(state)
    }
}
impl Ord for SetTerm {
    fn cmp(&self, other: &Self) -> Ordering {
        if self.0.id == other.0.id {
            return Ordering::Equal;
        }
        self.stage().cmp(&other.stage()).then_with(|| colex(self.members(), other.members()))
    }
}
impl PartialOrd for SetTerm {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A vertex of some backend.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VertexTerm {
    Nat(Nat),
    Base(BaseId),
    Set(SetTerm),
}

impl VertexTerm {
    pub fn nat(v: u64) -> VertexTerm {
        VertexTerm::Nat(Nat::Small(v))
    }

    pub fn base(i: u32) -> VertexTerm {
        VertexTerm::Base(BaseId::Index(i))
    }

    pub fn elem(e: Elem) -> VertexTerm {
        VertexTerm::Base(BaseId::Elem(Arc::new(e)))
    }

    pub fn set(stage: u32, members: Vec<VertexTerm>) -> Result<VertexTerm> {
        SetTerm::new(stage, members).map(VertexTerm::Set)
    }

    /// Set term at the least stage that can hold `members`.
    pub fn set_auto(members: Vec<VertexTerm>) -> Result<VertexTerm> {
        let stage = members.iter().map(|m| m.stage()).max().unwrap_or(0) + 1;
        VertexTerm::set(stage, members)
    }

    pub fn stage(&self) -> u32 {
        match self {
            VertexTerm::Set(s) => s.stage(),
            _ => 0,
        }
    }

    pub fn as_nat(&self) -> Option<&Nat> {
        match self {
            VertexTerm::Nat(n) => Some(n),
            _ => None,
        }
    }

    pub fn as_set(&self) -> Option<&SetTerm> {
        match self {
            VertexTerm::Set(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_u64(&self) -> Option<u64> {
        self.as_nat().and_then(Nat::as_u64)
    }

    /// Parses the vertex-string grammar.  `base` resolves the text after a
    /// leading `b` (an integer or a parenthesised group element).
    pub fn parse_with(s: &str, base: &dyn Fn(&str) -> Result<BaseId>) -> Result<VertexTerm> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix('{') {
            let (body, stage) = match rest.rfind('}') {
                Some(i) => (&rest[..i], rest[i + 1..].trim()),
                None => return Err(Error::InvalidVertex(format!("unbalanced set term {s:?}"))),
            };
            let mut members = Vec::new();
            for part in split_top(body)? {
                members.push(VertexTerm::parse_with(&part, base)?);
            }
            return match stage.strip_prefix('@') {
                Some(st) => {
                    let st: u32 = st.parse().map_err(|_| Error::InvalidVertex(s.to_string()))?;
                    VertexTerm::set(st, members)
                }
                None if stage.is_empty() => VertexTerm::set_auto(members),
                None => Err(Error::InvalidVertex(s.to_string())),
            };
        }
        if let Some(rest) = s.strip_prefix('b') {
            return base(rest).map(VertexTerm::Base);
        }
        Nat::parse(s).map(VertexTerm::Nat)
    }
}

/// Splits on commas that are not nested in brackets.
pub(crate) fn split_top(s: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for c in s.chars() {
        match c {
            '{' | '[' | '(' => depth += 1,
            '}' | ']' | ')' => depth -= 1,
            _ => {}
        }
        if depth < 0 {
            return Err(Error::InvalidVertex(format!("unbalanced brackets in {s:?}")));
        }
        if c == ',' && depth == 0 {
            out.push(std::mem::take(&mut cur));
        } else {
            cur.push(c);
        }
    }
    if depth != 0 {
        return Err(Error::InvalidVertex(format!("unbalanced brackets in {s:?}")));
    }
    if !cur.trim().is_empty() || !out.is_empty() {
        out.push(cur);
    }
    Ok(out.into_iter().map(|p| p.trim().to_string()).collect())
}

impl fmt::Display for BaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseId::Index(i) => write!(f, "b{i}"),
            BaseId::Elem(e) => match e.as_ref() {
                Elem::Int(k) => write!(f, "b{k}"),
                other => write!(f, "b({other})"),
            },
        }
    }
}

impl fmt::Display for VertexTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VertexTerm::Nat(n) => write!(f, "{n}"),
            VertexTerm::Base(b) => write!(f, "{b}"),
            VertexTerm::Set(s) => {
                write!(f, "{{")?;
                for (i, m) in s.members().iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{m}")?;
                }
                write!(f, "}}")?;
                let natural = s.members().iter().map(|m| m.stage()).max().unwrap_or(0) + 1;
                if s.stage() != natural {
                    write!(f, "@{}", s.stage())?;
                }
                Ok(())
            }
        }
    }
}

impl serde::Serialize for VertexTerm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl fmt::Debug for VertexTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl From<u64> for VertexTerm {
    fn from(v: u64) -> Self {
        VertexTerm::nat(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx(s: &str) -> Result<BaseId> {
        s.parse::<u32>().map(BaseId::Index).map_err(|_| Error::InvalidVertex(s.into()))
    }

    #[test]
    fn small_and_big_naturals_agree_on_order() {
        let big = Nat::pow2(Nat::Small(64));
        let bigger = Nat::from_bits(vec![Nat::Small(64), Nat::Small(0)]);
        assert!(Nat::Small(u64::MAX) < big);
        assert!(big < bigger);
        assert_eq!(big.to_string(), "18446744073709551616");
        assert_eq!(Nat::parse("18446744073709551617").unwrap(), bigger);
        let tower = Nat::pow2(Nat::pow2(Nat::Small(20)));
        let s = tower.to_string();
        assert_eq!(s, "#[1048576]");
        assert_eq!(Nat::parse(&s).unwrap(), tower);
        assert!(tower.has_bit(&Nat::Small(1 << 20)));
    }

    #[test]
    fn set_terms_are_interned() {
        let a = VertexTerm::set(1, vec![VertexTerm::base(1), VertexTerm::base(0)]).unwrap();
        let b = VertexTerm::set(1, vec![VertexTerm::base(0), VertexTerm::base(1)]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_string(), "{b0,b1}");
        let c = VertexTerm::set(2, vec![VertexTerm::base(0)]).unwrap();
        assert_eq!(c.to_string(), "{b0}@2");
        assert_eq!(VertexTerm::parse_with("{b0}@2", &idx).unwrap(), c);
        assert_eq!(VertexTerm::parse_with("{b1,b0}", &idx).unwrap(), a);
        assert!(VertexTerm::set(1, vec![]).is_err());
        assert!(VertexTerm::set(1, vec![a.clone()]).is_err());
    }

    #[test]
    fn set_order_is_stage_then_colex() {
        let b = |i| VertexTerm::base(i);
        let s = |v: Vec<VertexTerm>| VertexTerm::set(1, v).unwrap();
        let mut v = vec![s(vec![b(0), b(1)]), s(vec![b(1)]), s(vec![b(0)]), b(1), b(0)];
        v.sort();
        let shown: Vec<String> = v.iter().map(|t| t.to_string()).collect();
        assert_eq!(shown, ["b0", "b1", "{b0}", "{b1}", "{b0,b1}"]);
    }
}

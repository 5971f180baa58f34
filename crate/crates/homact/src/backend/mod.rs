//! Adjacency oracles realizing the Random Graph.

mod bit;
mod limit;
mod pool;

use std::collections::HashSet;
use std::sync::{Arc, Mutex};

pub use limit::{gcd, LimitSpec, Seed};
pub use pool::VertexPool;

use crate::error::{Error, Result};
use crate::group::Group;
use crate::term::{BaseId, Nat, VertexTerm};
use limit::LimitState;

/// How many parent vertices a derived backend scans per requested vertex
/// before giving up.
const DERIVED_SCAN_LIMIT: usize = 2_000_000;

/// For group seeds, the share of the enumeration searched before padding
/// falls back to base vertices.
const PAD_SCAN: usize = 512;

pub enum BackendKind {
    Bit,
    Limit(LimitSpec),
    Restriction { parent: Backend, deleted: HashSet<VertexTerm> },
    Slice { parent: Backend, u: Vec<VertexTerm>, v: Vec<VertexTerm> },
}

struct DerivedCache {
    terms: Vec<VertexTerm>,
    scanned: usize,
}

struct Inner {
    kind: BackendKind,
    limit_state: Mutex<LimitState>,
    derived: Mutex<DerivedCache>,
}

/// Shared, immutable backend handle.
#[derive(Clone)]
pub struct Backend(Arc<Inner>);

impl PartialEq for Backend {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

impl std::fmt::Debug for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Backend({})", self.describe())
    }
}

impl Backend {
    fn from_kind(kind: BackendKind) -> Backend {
        Backend(Arc::new(Inner {
            kind,
            limit_state: Mutex::new(LimitState::new()),
            derived: Mutex::new(DerivedCache { terms: Vec::new(), scanned: 0 }),
        }))
    }

    pub fn bit() -> Backend {
        Backend::from_kind(BackendKind::Bit)
    }

    pub fn limit(seed: Seed, l: u64) -> Result<Backend> {
        if l == 0 {
            return Err(Error::InvalidInput("parameter l must be at least 1".into()));
        }
        if matches!(seed, Seed::Graph { n: 0, .. }) {
            return Err(Error::EmptyGraph);
        }
        Ok(Backend::from_kind(BackendKind::Limit(LimitSpec { seed, l })))
    }

    pub fn limit_group(g: Group, l: u64) -> Result<Backend> {
        Backend::limit(Seed::Group(g), l)
    }

    pub fn kind(&self) -> &BackendKind {
        &self.0.kind
    }

    pub fn describe(&self) -> String {
        match &self.0.kind {
            BackendKind::Bit => "bit".into(),
            BackendKind::Limit(s) => match &s.seed {
                Seed::Graph { n, edges } => format!("limit(seed={n} vertices/{} edges, l={})", edges.len(), s.l),
                Seed::Group(g) => format!("limit(seed={}, l={})", g.name(), s.l),
            },
            BackendKind::Restriction { parent, deleted } => {
                format!("{} minus {} vertices", parent.describe(), deleted.len())
            }
            BackendKind::Slice { parent, u, v } => {
                format!("slice of {} (|U|={}, |V|={})", parent.describe(), u.len(), v.len())
            }
        }
    }

    /// The BIT or limit backend underneath any derivations.
    pub fn root(&self) -> &Backend {
        match &self.0.kind {
            BackendKind::Restriction { parent, .. } | BackendKind::Slice { parent, .. } => parent.root(),
            _ => self,
        }
    }

    pub fn limit_spec(&self) -> Option<&LimitSpec> {
        match &self.root().0.kind {
            BackendKind::Limit(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_bit(&self) -> bool {
        matches!(self.root().0.kind, BackendKind::Bit)
    }

    pub fn seed_has_edges(&self) -> bool {
        self.limit_spec().map(|s| s.seed.has_edges()).unwrap_or(false)
    }

    pub fn seed_adjacent(&self, a: &BaseId, b: &BaseId) -> bool {
        self.limit_spec().map(|s| s.seed.adjacent(a, b)).unwrap_or(false)
    }

    pub fn validate(&self, x: &VertexTerm) -> Result<()> {
        match &self.0.kind {
            BackendKind::Bit => match x {
                VertexTerm::Nat(_) => Ok(()),
                _ => Err(Error::InvalidVertex(format!("{x} is not a natural"))),
            },
            BackendKind::Limit(spec) => spec.validate(&mut self.0.limit_state.lock().unwrap(), x),
            BackendKind::Restriction { parent, deleted } => {
                parent.validate(x)?;
                if deleted.contains(x) {
                    return Err(Error::InvalidVertex(format!("{x} was deleted")));
                }
                Ok(())
            }
            BackendKind::Slice { parent, u, v } => {
                parent.validate(x)?;
                if !self.in_slice(parent, u, v, x) {
                    return Err(Error::InvalidVertex(format!("{x} is outside the slice")));
                }
                Ok(())
            }
        }
    }

    fn in_slice(&self, parent: &Backend, u: &[VertexTerm], v: &[VertexTerm], x: &VertexTerm) -> bool {
        !u.contains(x)
            && !v.contains(x)
            && u.iter().all(|a| parent.adj(a, x))
            && v.iter().all(|b| !parent.adj(b, x))
    }

    /// Adjacency for vertices already known to be valid and distinct.
    pub fn adj(&self, x: &VertexTerm, y: &VertexTerm) -> bool {
        match &self.root().0.kind {
            BackendKind::Bit => match (x, y) {
                (VertexTerm::Nat(a), VertexTerm::Nat(b)) => bit::adjacent(a, b),
                _ => false,
            },
            BackendKind::Limit(spec) => spec.adjacent(x, y),
            _ => unreachable!("root is never derived"),
        }
    }

    pub fn adjacent(&self, x: &VertexTerm, y: &VertexTerm) -> Result<bool> {
        self.validate(x)?;
        self.validate(y)?;
        if x == y {
            return Err(Error::LoopQuery(x.to_string()));
        }
        Ok(self.adj(x, y))
    }

    pub fn enumerate(&self, n: usize) -> Result<Vec<VertexTerm>> {
        match &self.0.kind {
            BackendKind::Bit => Ok((0..n as u64).map(VertexTerm::nat).collect()),
            BackendKind::Limit(spec) => spec.enumerate(&mut self.0.limit_state.lock().unwrap(), n),
            _ => {
                self.fill_derived(n)?;
                Ok(self.0.derived.lock().unwrap().terms[..n].to_vec())
            }
        }
    }

    pub fn nth(&self, i: usize) -> Result<VertexTerm> {
        match &self.0.kind {
            BackendKind::Bit => Ok(VertexTerm::nat(i as u64)),
            BackendKind::Limit(spec) => spec
                .nth(&mut self.0.limit_state.lock().unwrap(), i)
                .ok_or(Error::ExhaustedBackend(i)),
            _ => {
                self.fill_derived(i + 1)?;
                Ok(self.0.derived.lock().unwrap().terms[i].clone())
            }
        }
    }

    fn fill_derived(&self, n: usize) -> Result<()> {
        let (parent, keep): (&Backend, Box<dyn Fn(&VertexTerm) -> bool + '_>) = match &self.0.kind {
            BackendKind::Restriction { parent, deleted } => (parent, Box::new(move |x| !deleted.contains(x))),
            BackendKind::Slice { parent, u, v } => (parent, Box::new(move |x| self.in_slice(parent, u, v, x))),
            _ => unreachable!(),
        };
        let mut c = self.0.derived.lock().unwrap();
        let mut budget = DERIVED_SCAN_LIMIT.saturating_mul(n.max(1));
        while c.terms.len() < n {
            if budget == 0 {
                return Err(Error::ExhaustedBackend(c.terms.len()));
            }
            budget -= 1;
            let x = parent.nth(c.scanned)?;
            c.scanned += 1;
            if keep(&x) {
                c.terms.push(x);
            }
        }
        Ok(())
    }

    /// Delete(A) derivation.
    pub fn delete(&self, a: impl IntoIterator<Item = VertexTerm>) -> Result<Backend> {
        let deleted: HashSet<VertexTerm> = a.into_iter().collect();
        for x in &deleted {
            self.validate(x)?;
        }
        Ok(Backend::from_kind(BackendKind::Restriction { parent: self.clone(), deleted }))
    }

    /// Slice(U,V) derivation: vertices off U∪V adjacent to all of U and none of V.
    pub fn slice(&self, u: Vec<VertexTerm>, v: Vec<VertexTerm>) -> Result<Backend> {
        check_disjoint(&u, &v)?;
        for x in u.iter().chain(&v) {
            self.validate(x)?;
        }
        Ok(Backend::from_kind(BackendKind::Slice { parent: self.clone(), u, v }))
    }

    /// Least (BIT) or structural (limit) vertex adjacent to all of U and
    /// none of V.
    pub fn property_r_witness(&self, u: &[VertexTerm], v: &[VertexTerm]) -> Result<VertexTerm> {
        check_disjoint(u, v)?;
        for x in u.iter().chain(v) {
            self.validate(x)?;
        }
        let pool: VertexPool = u.iter().chain(v).collect();
        self.witness_in_pool(u, &pool, &[])
    }

    /// A vertex off `pool ∪ extra` whose neighbourhood inside `pool` is
    /// exactly `u` (which must lie in `pool`).
    pub fn witness_in_pool(&self, u: &[VertexTerm], pool: &VertexPool, extra: &[VertexTerm]) -> Result<VertexTerm> {
        match &self.0.kind {
            BackendKind::Bit => Ok(VertexTerm::Nat(bit::least_witness(u, pool, extra))),
            BackendKind::Limit(spec) => self.limit_witness(spec, u, pool, extra),
            BackendKind::Restriction { parent, deleted } => {
                let mut ex = extra.to_vec();
                ex.extend(deleted.iter().cloned());
                parent.witness_in_pool(u, pool, &ex)
            }
            BackendKind::Slice { parent, u: u0, v: v0 } => {
                let mut p = pool.clone();
                for x in u0.iter().chain(v0) {
                    p.insert(x.clone());
                }
                let mut uu = u.to_vec();
                uu.extend(u0.iter().cloned());
                parent.witness_in_pool(&uu, &p, extra)
            }
        }
    }

    /// z = U padded to a size coprime to l, placed one stage above
    /// everything involved.
    fn limit_witness(&self, spec: &LimitSpec, u: &[VertexTerm], pool: &VertexPool, extra: &[VertexTerm]) -> Result<VertexTerm> {
        let extra_set: HashSet<&VertexTerm> = extra.iter().collect();
        let mut n = pool.max_stage();
        n = n.max(extra.iter().map(|x| x.stage()).max().unwrap_or(0));
        n = n.max(u.iter().map(|x| x.stage()).max().unwrap_or(0));
        let mut k = 0usize;
        while !spec.admissible(u.len() + k) {
            k += 1;
        }
        if k == 0 {
            return Ok(VertexTerm::set(n + 1, u.to_vec())?);
        }
        let blocked = |y: &VertexTerm| pool.contains(y) || extra_set.contains(y) || u.contains(y);
        loop {
            let pad = self.limit_candidates(spec, n, k, &blocked)?;
            if pad.len() == k {
                let mut members = u.to_vec();
                members.extend(pad);
                return Ok(VertexTerm::set(n + 1, members)?);
            }
            n += 1;
        }
    }

    /// Up to `k` least vertices of stage ≤ n passing `ok`: enumeration
    /// order, and for group seeds base vertices once the first part of the
    /// enumeration is used up.
    pub(crate) fn limit_candidates(
        &self,
        spec: &LimitSpec,
        n: u32,
        k: usize,
        blocked: &dyn Fn(&VertexTerm) -> bool,
    ) -> Result<Vec<VertexTerm>> {
        let mut out = Vec::new();
        self.limit_candidate_scan(spec, n, &mut |y| {
            if !blocked(y) {
                out.push(y.clone());
            }
            out.len() < k
        })?;
        Ok(out)
    }

    /// Feeds stage-≤n vertices in candidate order to `visit` until it
    /// returns false or (finite seeds) the stage runs out.
    pub(crate) fn limit_candidate_scan(
        &self,
        spec: &LimitSpec,
        n: u32,
        visit: &mut dyn FnMut(&VertexTerm) -> bool,
    ) -> Result<()> {
        match &spec.seed {
            Seed::Graph { .. } => {
                for i in 0.. {
                    let y = self.root().nth(i)?;
                    if y.stage() > n || !visit(&y) {
                        return Ok(());
                    }
                }
            }
            Seed::Group(_) => {
                let mut seen = HashSet::new();
                for i in 0..PAD_SCAN {
                    let y = self.root().nth(i)?;
                    if y.stage() <= n {
                        seen.insert(y.clone());
                        if !visit(&y) {
                            return Ok(());
                        }
                    }
                }
                for i in 0.. {
                    let Some(y) = spec.seed.base(i) else { return Ok(()) };
                    if !seen.contains(&y) && !visit(&y) {
                        return Ok(());
                    }
                }
            }
        }
        Ok(())
    }

    pub fn parse_vertex(&self, s: &str) -> Result<VertexTerm> {
        let spec = self.limit_spec();
        let resolve = |rest: &str| -> Result<BaseId> {
            match spec.map(|s| &s.seed) {
                Some(Seed::Graph { .. }) => rest
                    .parse::<u32>()
                    .map(BaseId::Index)
                    .map_err(|_| Error::InvalidVertex(format!("b{rest}"))),
                Some(Seed::Group(g)) => {
                    let inner = rest.strip_prefix('(').and_then(|r| r.strip_suffix(')')).unwrap_or(rest);
                    Ok(BaseId::Elem(Arc::new(g.parse(inner).map_err(|e| Error::InvalidVertex(e.to_string()))?)))
                }
                None => Err(Error::InvalidVertex(format!("b{rest}: the BIT backend has no base vertices"))),
            }
        };
        let x = VertexTerm::parse_with(s, &resolve)?;
        self.validate(&x)?;
        Ok(x)
    }

    pub fn nat(&self, v: u64) -> VertexTerm {
        VertexTerm::Nat(Nat::Small(v))
    }
}

pub(crate) fn check_disjoint(u: &[VertexTerm], v: &[VertexTerm]) -> Result<()> {
    let us: HashSet<&VertexTerm> = u.iter().collect();
    if let Some(x) = v.iter().find(|x| us.contains(x)) {
        return Err(Error::DisjointnessViolated(format!("{x} lies in both U and V")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[VertexTerm]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn bit_basics() {
        let b = Backend::bit();
        assert!(b.adjacent(&0.into(), &1.into()).unwrap());
        assert!(!b.adjacent(&0.into(), &2.into()).unwrap());
        assert!(matches!(b.adjacent(&3.into(), &3.into()), Err(Error::LoopQuery(_))));
        assert_eq!(names(&b.enumerate(3).unwrap()), ["0", "1", "2"]);
        assert_eq!(b.property_r_witness(&[0.into()], &[1.into()]).unwrap(), 5.into());
        assert!(matches!(
            b.property_r_witness(&[0.into()], &[0.into()]),
            Err(Error::DisjointnessViolated(_))
        ));
    }

    #[test]
    fn limit_enumeration_order() {
        let b = Backend::limit(Seed::edgeless(2), 1).unwrap();
        assert_eq!(names(&b.enumerate(5).unwrap()), ["b0", "b1", "{b0}", "{b1}", "{b0,b1}"]);
        let b = Backend::limit(Seed::edgeless(3), 2).unwrap();
        let v = b.enumerate(7).unwrap();
        assert_eq!(v.iter().filter(|x| x.stage() == 1).count(), 4);
        assert_eq!(b.nth(7).unwrap().stage(), 2);
        // stage-2 window of a 3-vertex seed with l=1 has 3 + 7 + 1023 vertices
        let b = Backend::limit(Seed::edgeless(3), 1).unwrap();
        let w = b.enumerate(3 + 7 + 1023 + 1).unwrap();
        assert_eq!(w.iter().filter(|x| x.stage() == 2).count(), 1023);
        assert_eq!(w.last().unwrap().stage(), 3);
        let mut sorted = w.clone();
        sorted.sort();
        assert_eq!(sorted, w);
    }

    #[test]
    fn limit_group_seed_enumeration_is_injective() {
        let b = Backend::limit_group(Group::integers(), 1).unwrap();
        let v = b.enumerate(400).unwrap();
        let set: HashSet<_> = v.iter().collect();
        assert_eq!(set.len(), 400);
        assert_eq!(names(&v[..5]), ["b0", "b1", "{b0}", "{b1}", "{b0,b1}"]);
        for x in &v {
            b.validate(x).unwrap();
        }
    }

    #[test]
    fn limit_adjacency_and_witness() {
        let b = Backend::limit(Seed::edgeless(2), 1).unwrap();
        let a = VertexTerm::base(0);
        let s = VertexTerm::set(1, vec![a.clone()]).unwrap();
        let t = VertexTerm::set(1, vec![VertexTerm::base(1)]).unwrap();
        assert!(b.adjacent(&a, &s).unwrap());
        assert!(!b.adjacent(&s, &t).unwrap());
        let z = b.property_r_witness(&[a.clone()], &[s.clone()]).unwrap();
        assert_eq!(z, VertexTerm::set(2, vec![a.clone()]).unwrap());
        let z = b.property_r_witness(&[], &[a.clone()]).unwrap();
        assert_eq!(z, VertexTerm::set(1, vec![VertexTerm::base(1)]).unwrap());
    }

    #[test]
    fn parametrized_witness_pads_to_coprime_size() {
        let b = Backend::limit(Seed::edgeless(3), 2).unwrap();
        let u = vec![VertexTerm::base(0), VertexTerm::base(1)];
        let z = b.property_r_witness(&u, &[]).unwrap();
        assert_eq!(z.to_string(), "{b0,b1,b2}");
        b.validate(&z).unwrap();
        let z = b.property_r_witness(&u, &[VertexTerm::base(2)]).unwrap();
        assert_eq!(z.stage(), 2);
        b.validate(&z).unwrap();
    }

    #[test]
    fn derived_backends() {
        let b = Backend::bit();
        let s = b.slice(vec![0.into()], vec![1.into()]).unwrap();
        assert_eq!(s.nth(0).unwrap(), 5.into());
        let d = b.delete(vec![]).unwrap();
        assert_eq!(d.enumerate(10).unwrap(), b.enumerate(10).unwrap());
        let w = s.enumerate(4).unwrap();
        let z = s.property_r_witness(&w[..2], &w[2..]).unwrap();
        s.validate(&z).unwrap();
        let r = b.delete(vec![5.into()]).unwrap();
        assert_eq!(r.property_r_witness(&[0.into()], &[1.into()]).unwrap(), 9.into());
    }
}

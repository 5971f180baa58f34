//! Lazy automorphisms built by back-and-forth.
//!
//! A `LazyAutomorphism` holds a committed finite partial isomorphism and
//! extends it on demand.  Forth steps send a new x to the least vertex
//! outside the range with the right neighbourhood in the range; back steps
//! are symmetric.  With an equivariance context every commit is a whole
//! orbit: x ↦ y brings π₁(σ)x ↦ π₂(σ)y for all σ ∈ Σ.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::action::Action;
use crate::backend::{Backend, VertexPool};
use crate::error::{Error, Result};
use crate::graph::PartialIso;
use crate::group::Elem;
use crate::term::VertexTerm;

/// Σ as pairs (π₁(σ), π₂(σ)) of elements acting through two actions on the
/// same backend.  The identity pair comes first.
#[derive(Clone, Debug)]
pub struct EquivCtx {
    pub act1: Action,
    pub act2: Action,
    pub pairs: Vec<(Elem, Elem)>,
}

impl EquivCtx {
    /// π₁ = π₂ given by one action restricted to Σ.
    pub fn symmetric(action: &Action, sigma: &[Elem]) -> EquivCtx {
        let mut pairs: Vec<(Elem, Elem)> = vec![(action.group().identity(), action.group().identity())];
        for s in sigma {
            if !s.is_identity() {
                pairs.push((s.clone(), s.clone()));
            }
        }
        EquivCtx { act1: action.clone(), act2: action.clone(), pairs }
    }

    pub fn twisted(action: &Action, pairs: Vec<(Elem, Elem)>) -> EquivCtx {
        let mut p = vec![(action.group().identity(), action.group().identity())];
        p.extend(pairs.into_iter().filter(|(a, _)| !a.is_identity()));
        EquivCtx { act1: action.clone(), act2: action.clone(), pairs: p }
    }

    fn orbit1(&self, x: &VertexTerm) -> Vec<VertexTerm> {
        self.pairs.iter().map(|(s, _)| self.act1.act_valid(s, x)).collect()
    }

    fn orbit2(&self, y: &VertexTerm) -> Vec<VertexTerm> {
        self.pairs.iter().map(|(_, s)| self.act2.act_valid(s, y)).collect()
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct WindowReport {
    pub checked: usize,
    pub violations: Vec<String>,
}

impl WindowReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Clone)]
pub struct LazyAutomorphism {
    backend: Backend,
    map: PartialIso,
    dom: VertexPool,
    ran: VertexPool,
    ctx: Option<EquivCtx>,
    fair_steps: usize,
}

impl std::fmt::Debug for LazyAutomorphism {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "LazyAutomorphism({} pairs on {})", self.map.len(), self.backend.describe())
    }
}

/// Orbit shape checks: π(σ)x ≠ x and π(σ)x ≁ x for σ ≠ 1.
fn check_orbit(b: &Backend, orbit: &[VertexTerm], side: &str) -> Result<()> {
    let x = &orbit[0];
    for y in &orbit[1..] {
        if y == x {
            return Err(Error::FreenessViolated(format!("{side}: a nontrivial element of Σ fixes {x}")));
        }
        if b.adj(x, y) {
            return Err(Error::SingularActionDetected(format!("{side}: {x} ∼ {y} in one Σ-orbit")));
        }
    }
    let distinct: BTreeSet<&VertexTerm> = orbit.iter().collect();
    if distinct.len() < orbit.len() {
        return Err(Error::FreenessViolated(format!("{side}: Σ-orbit of {x} is too short")));
    }
    Ok(())
}

pub fn extend_to_automorphism(phi: &PartialIso, backend: &Backend, ctx: Option<EquivCtx>) -> Result<LazyAutomorphism> {
    let (ok, bad) = phi.validate(backend);
    if !ok {
        return Err(Error::InvalidPartialIso(bad.map(|v| v.to_string()).unwrap_or_else(|| "invalid vertex".into())));
    }
    if let Some(c) = &ctx {
        if c.act1.backend() != backend && c.act1.backend().root() != backend.root() {
            return Err(Error::InvalidInput("context acts on another backend".into()));
        }
        for (x, y) in phi.pairs() {
            let ox = c.orbit1(x);
            let oy = c.orbit2(y);
            check_orbit(backend, &ox, "π₁")?;
            check_orbit(backend, &oy, "π₂")?;
            for (a, b) in ox.iter().zip(&oy) {
                match phi.get(a) {
                    Some(v) if v == b => {}
                    Some(v) => {
                        return Err(Error::EquivarianceViolated(format!("φ({a}) = {v} but equivariance needs {b}")));
                    }
                    None => return Err(Error::EquivarianceViolated(format!("{a} ∈ Σ·d(φ) is not in d(φ)"))),
                }
            }
        }
    }
    let mut a = LazyAutomorphism {
        backend: backend.clone(),
        map: PartialIso::new(),
        dom: VertexPool::new(),
        ran: VertexPool::new(),
        ctx,
        fair_steps: 0,
    };
    for (x, y) in phi.pairs() {
        a.raw_insert(x.clone(), y.clone());
    }
    Ok(a)
}

impl LazyAutomorphism {
    pub fn identity_on(backend: &Backend, ctx: Option<EquivCtx>) -> LazyAutomorphism {
        extend_to_automorphism(&PartialIso::new(), backend, ctx).expect("empty map is valid")
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn committed(&self) -> &PartialIso {
        &self.map
    }

    pub fn ctx(&self) -> Option<&EquivCtx> {
        self.ctx.as_ref()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn domain_pool(&self) -> &VertexPool {
        &self.dom
    }

    pub fn range_pool(&self) -> &VertexPool {
        &self.ran
    }

    pub fn get(&self, x: &VertexTerm) -> Option<&VertexTerm> {
        self.map.get(x)
    }

    pub fn get_inv(&self, y: &VertexTerm) -> Option<&VertexTerm> {
        self.map.get_inv(y)
    }

    fn raw_insert(&mut self, x: VertexTerm, y: VertexTerm) {
        self.dom.insert(x.clone());
        self.ran.insert(y.clone());
        self.map.insert(x, y);
    }

    fn orbits(&self, x: &VertexTerm, y: &VertexTerm) -> (Vec<VertexTerm>, Vec<VertexTerm>) {
        match &self.ctx {
            Some(c) => (c.orbit1(x), c.orbit2(y)),
            None => (vec![x.clone()], vec![y.clone()]),
        }
    }

    pub fn query(&mut self, x: &VertexTerm) -> Result<VertexTerm> {
        if let Some(y) = self.map.get(x) {
            return Ok(y.clone());
        }
        self.backend.validate(x)?;
        if let Some(c) = &self.ctx {
            check_orbit(&self.backend, &c.orbit1(x), "π₁")?;
        }
        let u: Vec<VertexTerm> =
            self.dom.neighbors(&self.backend, x).iter().map(|v| self.map.get(v).unwrap().clone()).collect();
        let y = self.backend.witness_in_pool(&u, &self.ran, &[])?;
        self.commit(x.clone(), y.clone())?;
        Ok(y)
    }

    pub fn query_inv(&mut self, y: &VertexTerm) -> Result<VertexTerm> {
        if let Some(x) = self.map.get_inv(y) {
            return Ok(x.clone());
        }
        self.backend.validate(y)?;
        if let Some(c) = &self.ctx {
            check_orbit(&self.backend, &c.orbit2(y), "π₂")?;
        }
        let u: Vec<VertexTerm> =
            self.ran.neighbors(&self.backend, y).iter().map(|v| self.map.get_inv(v).unwrap().clone()).collect();
        let x = self.backend.witness_in_pool(&u, &self.dom, &[])?;
        self.commit(x.clone(), y.clone())?;
        Ok(x)
    }

    /// Adds x ↦ y (and its Σ-orbit) after checking that the result is
    /// still a partial isomorphism.  Pairs already present are accepted.
    pub fn commit(&mut self, x: VertexTerm, y: VertexTerm) -> Result<()> {
        let (ox, oy) = self.orbits(&x, &y);
        if self.ctx.is_some() {
            check_orbit(&self.backend, &ox, "π₁")?;
            check_orbit(&self.backend, &oy, "π₂")?;
        }
        let mut fresh = Vec::new();
        for (a, b) in ox.into_iter().zip(oy) {
            match (self.map.get(&a), self.map.get_inv(&b)) {
                (Some(v), _) if *v == b => continue,
                (Some(v), _) => return Err(Error::CommitConflict(format!("{a} is already mapped to {v}, not {b}"))),
                (None, Some(w)) => return Err(Error::CommitConflict(format!("{b} is already the image of {w}"))),
                (None, None) => fresh.push((a, b)),
            }
        }
        for (a, b) in &fresh {
            self.backend.validate(a)?;
            self.backend.validate(b)?;
        }
        // adjacency against the committed part and inside the new pairs
        for (a, b) in &fresh {
            let na: BTreeSet<VertexTerm> =
                self.dom.neighbors(&self.backend, a).into_iter().map(|v| self.map.get(&v).unwrap().clone()).collect();
            let nb: BTreeSet<VertexTerm> = self.ran.neighbors(&self.backend, b).into_iter().collect();
            if na != nb {
                return Err(Error::CommitConflict(format!("{a} ↦ {b} breaks adjacency with the committed map")));
            }
        }
        for (i, (a, b)) in fresh.iter().enumerate() {
            for (c, d) in &fresh[..i] {
                if a == c || b == d || self.backend.adj(a, c) != self.backend.adj(b, d) {
                    return Err(Error::CommitConflict(format!("{a} ↦ {b} clashes with {c} ↦ {d}")));
                }
            }
        }
        for (a, b) in fresh {
            self.raw_insert(a, b);
        }
        Ok(())
    }

    /// Commits every pair of `gamma` (with orbits).
    pub fn commit_all(&mut self, gamma: &PartialIso) -> Result<()> {
        for (x, y) in gamma.pairs() {
            self.commit(x.clone(), y.clone())?;
        }
        Ok(())
    }

    /// Overwrites a pair with no checks at all (fault injection for tests).
    pub fn inject_fault(&mut self, x: VertexTerm, y: VertexTerm) {
        let mut pairs: Vec<(VertexTerm, VertexTerm)> =
            self.map.pairs().filter(|(a, b)| **a != x && **b != y).map(|(a, b)| (a.clone(), b.clone())).collect();
        pairs.push((x, y));
        self.map = PartialIso::from_pairs_unchecked(pairs);
        self.dom = self.map.domain().collect();
        self.ran = self.map.range().collect();
    }

    /// Alternating fairness steps over the enumeration: step 2j+1 puts the
    /// j-th vertex into the domain, step 2j+2 puts it into the range.
    pub fn advance(&mut self, steps: usize) -> Result<()> {
        for _ in 0..steps {
            let j = self.fair_steps / 2;
            let z = self.backend.nth(j)?;
            if self.fair_steps % 2 == 0 {
                self.query(&z)?;
            } else {
                self.query_inv(&z)?;
            }
            self.fair_steps += 1;
        }
        Ok(())
    }

    pub fn fairness_steps(&self) -> usize {
        self.fair_steps
    }

    /// Forces queries on the window and checks bijectivity, adjacency in
    /// both directions against everything committed, and equivariance.
    pub fn verify_window(&mut self, window: &[VertexTerm]) -> WindowReport {
        let mut report = WindowReport::default();
        for x in window {
            if let Err(e) = self.query(x) {
                report.violations.push(format!("query({x}) failed: {e}"));
            }
        }
        let pairs = self.map.to_pairs();
        let mut seen_range = BTreeSet::new();
        for (x, y) in &pairs {
            if !seen_range.insert(y.clone()) || self.map.get_inv(y) != Some(x) {
                report.violations.push(format!("not injective at {x} ↦ {y}"));
            }
        }
        for x in window {
            let Some(y) = self.map.get(x).cloned() else { continue };
            for (u, v) in &pairs {
                if u == x {
                    continue;
                }
                report.checked += 1;
                if v == &y {
                    report.violations.push(format!("{x} and {u} both map to {y}"));
                    continue;
                }
                let a = self.backend.adj(x, u);
                let b = self.backend.adj(&y, v);
                if a != b {
                    report.violations.push(format!("({x},{u}) ↦ ({y},{v}): adjacency {a} vs {b}"));
                }
            }
            if let Some(c) = &self.ctx {
                for (s1, s2) in &c.pairs[1..] {
                    let sx = c.act1.act_valid(s1, x);
                    let sy = c.act2.act_valid(s2, &y);
                    report.checked += 1;
                    if self.map.get(&sx) != Some(&sy) {
                        report.violations.push(format!("equivariance fails at {x}: σx = {sx} but σφ(x) = {sy}"));
                    }
                }
            }
        }
        report
    }

    /// Committed pairs as JSON lines.
    pub fn to_jsonl(&self) -> String {
        self.map.pairs().map(|(x, y)| serde_json::json!({"x": x.to_string(), "y": y.to_string()}).to_string() + "\n").collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extension::canonical_base_action;
    use crate::group::{Amalgam, Group, GroupKind};

    fn v(n: u64) -> VertexTerm {
        VertexTerm::nat(n)
    }

    #[test]
    fn forth_step_uses_least_witness() {
        let b = Backend::bit();
        let mut a = LazyAutomorphism::identity_on(&b, None);
        assert_eq!(a.query(&v(0)).unwrap(), v(0));
        let phi = PartialIso::from_pairs(vec![(v(0), v(2))], &b).unwrap();
        let mut a = extend_to_automorphism(&phi, &b, None).unwrap();
        assert_eq!(a.query(&v(0)).unwrap(), v(2));
        // brute force: least y ≠ 2 adjacent to 2
        let oracle = (0u64..).find(|&y| y != 2 && b.adj(&v(y), &v(2))).unwrap();
        assert_eq!(a.query(&v(1)).unwrap(), v(oracle));
        assert_eq!(oracle, 1);
        assert_eq!(a.query_inv(&v(1)).unwrap(), v(1));
    }

    #[test]
    fn windows_verify_and_faults_are_caught() {
        let b = Backend::bit();
        let phi = PartialIso::from_pairs(vec![(v(0), v(1)), (v(2), v(5))], &b).unwrap();
        let mut a = extend_to_automorphism(&phi, &b, None).unwrap();
        let w = b.enumerate(20).unwrap();
        let r = a.verify_window(&w);
        assert!(r.passed(), "{:?}", r.violations);
        assert!(a.verify_window(&[]).passed());
        a.inject_fault(v(1), v(7));
        let r = a.verify_window(&w);
        assert!(!r.passed());
        assert!(r.violations.iter().any(|s| s.contains("1")));
    }

    #[test]
    fn fairness_covers_prefix() {
        let b = Backend::bit();
        let phi = PartialIso::from_pairs(vec![(v(3), v(0))], &b).unwrap();
        let mut a = extend_to_automorphism(&phi, &b, None).unwrap();
        a.advance(10).unwrap();
        for x in b.enumerate(5).unwrap() {
            assert!(a.get(&x).is_some() && a.get_inv(&x).is_some());
        }
    }

    #[test]
    fn equivariant_orbits_are_committed_together() {
        let g = Group::new(
            "Z/2*Z/3",
            GroupKind::Amalgam(Amalgam::free_product(Group::cyclic(2), Group::cyclic(3))),
        );
        let s = g.as_amalgam().unwrap().lift(1, &Elem::Int(1));
        let la = canonical_base_action(&g, &[s.clone()]).unwrap();
        let ctx = EquivCtx::symmetric(la.action(), &[s.clone()]);
        let b = la.backend().clone();
        let mut a = LazyAutomorphism::identity_on(&b, Some(ctx));
        let w = b.enumerate(40).unwrap();
        for x in &w {
            let y = a.query(x).unwrap();
            let sx = la.action().act_valid(&s, x);
            assert_eq!(a.query(&sx).unwrap(), la.action().act_valid(&s, &y));
        }
        assert!(a.verify_window(&w).passed());
    }

    #[test]
    fn equivariance_violations_are_rejected() {
        let g = Group::new(
            "Z/2*Z/3",
            GroupKind::Amalgam(Amalgam::free_product(Group::cyclic(2), Group::cyclic(3))),
        );
        let s = g.as_amalgam().unwrap().lift(1, &Elem::Int(1));
        let la = canonical_base_action(&g, &[s.clone()]).unwrap();
        let b = la.backend().clone();
        let w = b.enumerate(3).unwrap();
        let phi = PartialIso::from_pairs(vec![(w[0].clone(), w[2].clone())], &b).unwrap();
        let ctx = EquivCtx::symmetric(la.action(), &[s]);
        assert!(matches!(extend_to_automorphism(&phi, &b, Some(ctx)), Err(Error::EquivarianceViolated(_))));
    }
}

//! Random extensions, lifted actions and the canonical base actions.

use std::collections::BTreeSet;

use crate::action::Action;
use crate::backend::{gcd, Backend, Seed};
use crate::error::{Error, Result};
use crate::graph::FiniteGraph;
use crate::group::{Elem, FiniteTable, Group};
use crate::term::VertexTerm;

/// Largest graph whose random extension is materialized explicitly.
pub const MAX_EXPLICIT: usize = 20;

/// G̃_l: one new vertex per nonempty U ⊆ V(G) with gcd(l,|U|) = 1, adjacent
/// exactly to the members of U.  New vertices sit one stage above G.
pub fn random_extension(g: &FiniteGraph, l: u64) -> Result<FiniteGraph> {
    let vs = g.vertices();
    if vs.is_empty() {
        return Err(Error::EmptyGraph);
    }
    if l == 0 {
        return Err(Error::InvalidInput("parameter l must be at least 1".into()));
    }
    if vs.len() > MAX_EXPLICIT {
        return Err(Error::InvalidInput(format!("{} vertices is too many to extend explicitly", vs.len())));
    }
    let stage = vs.iter().map(|x| x.stage()).max().unwrap_or(0) + 1;
    let mut vertices = vs.to_vec();
    let mut edges: Vec<(VertexTerm, VertexTerm)> = g.edges().cloned().collect();
    for mask in 1u32..(1 << vs.len()) {
        if gcd(l, mask.count_ones() as u64) != 1 {
            continue;
        }
        let members: Vec<VertexTerm> = (0..vs.len()).filter(|i| mask >> i & 1 == 1).map(|i| vs[i].clone()).collect();
        let u = VertexTerm::set(stage, members.clone())?;
        for m in members {
            edges.push((m, u.clone()));
        }
        vertices.push(u);
    }
    FiniteGraph::new(vertices, edges)
}

/// The action generated by one permutation of a finite seed, as ℤ/ord(p).
pub fn permutation_action(seed: Seed, l: u64, p: &[u32]) -> Result<Action> {
    let n = p.len();
    let id: Vec<u32> = (0..n as u32).collect();
    let mut powers = vec![id.clone()];
    let mut cur = p.to_vec();
    while cur != id {
        powers.push(cur.clone());
        cur = cur.iter().map(|&i| p[i as usize]).collect();
        if powers.len() > 1 << 16 {
            return Err(Error::InvalidInput("not a permutation".into()));
        }
    }
    let group = Group::finite(format!("<{p:?}>"), FiniteTable::cyclic(powers.len() as u32));
    Action::seed_perm(group, Backend::limit(seed, l)?, powers)
}

/// The same action on the limit with parameter `l`.  Restricted to the
/// old vertices it is the original action; set terms move memberwise.
pub fn lift_action(a: &Action, l: u64) -> Result<Action> {
    let seed = a
        .backend()
        .limit_spec()
        .map(|s| s.seed.clone())
        .ok_or_else(|| Error::InvalidInput("lifting needs an action on a limit backend".into()))?;
    Ok(a.with_backend(Backend::limit(seed, l)?))
}

/// Whether `g` fixes `x`, by the orbit decomposition: a set term is fixed
/// iff its members form a union of finite ⟨g⟩-orbits.
pub fn is_fixed(a: &Action, g: &Elem, x: &VertexTerm) -> bool {
    match x {
        VertexTerm::Set(s) => {
            let members: BTreeSet<&VertexTerm> = s.members().iter().collect();
            let k = members.len();
            for u in s.members() {
                let mut y = a.act_valid(g, u);
                let mut steps = 1;
                while y != *u {
                    if steps >= k || !members.contains(&y) {
                        return false;
                    }
                    y = a.act_valid(g, &y);
                    steps += 1;
                }
            }
            true
        }
        _ => a.act_valid(g, x) == *x,
    }
}

pub fn fixed_vertices(g: &Elem, a: &Action, window: &[VertexTerm]) -> Result<Vec<VertexTerm>> {
    for x in window {
        a.backend().validate(x)?;
    }
    Ok(window.iter().filter(|x| is_fixed(a, g, x)).cloned().collect())
}

/// Γ acting on the limit over Γ by left multiplication, with parameter
/// l = |Σ| so that Σ acts freely.
#[derive(Clone, Debug)]
pub struct LimitAction {
    action: Action,
    sigma: Vec<Elem>,
}

impl LimitAction {
    pub fn action(&self) -> &Action {
        &self.action
    }

    pub fn group(&self) -> &Group {
        self.action.group()
    }

    pub fn backend(&self) -> &Backend {
        self.action.backend()
    }

    /// Σ with the identity first.
    pub fn sigma(&self) -> &[Elem] {
        &self.sigma
    }

    pub fn l(&self) -> u64 {
        self.sigma.len() as u64
    }

    /// First nontrivial σ fixing a window vertex, if any.
    pub fn sigma_fixed_point(&self, window: &[VertexTerm]) -> Option<(Elem, VertexTerm)> {
        for s in &self.sigma[1..] {
            for x in window {
                if is_fixed(&self.action, s, x) {
                    return Some((s.clone(), x.clone()));
                }
            }
        }
        None
    }
}

pub fn canonical_base_action(group: &Group, sigma: &[Elem]) -> Result<LimitAction> {
    if group.is_finite() {
        return Err(Error::FiniteGroupRejected(format!("{} is finite", group.name())));
    }
    let mut list = vec![group.identity()];
    for s in sigma {
        if !group.contains(s) {
            return Err(Error::InvalidLetter(format!("{s} is not an element of {}", group.name())));
        }
        if !list.contains(s) {
            list.push(s.clone());
        }
    }
    for a in &list {
        for b in &list {
            if !list.contains(&group.mul(a, b)) {
                return Err(Error::InvalidInput("Σ is not closed under multiplication".into()));
            }
        }
    }
    let backend = Backend::limit_group(group.clone(), list.len() as u64)?;
    Ok(LimitAction { action: Action::left_mult(group.clone(), backend)?, sigma: list })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::Amalgam;
    use crate::group::GroupKind;
    use itertools::Itertools;

    fn brute_fixed(a: &Action, g: &Elem, window: &[VertexTerm]) -> usize {
        window.iter().filter(|x| a.act_valid(g, x) == **x).count()
    }

    #[test]
    fn extension_sizes() {
        let b = Backend::limit(Seed::edgeless(2), 1).unwrap();
        let g = FiniteGraph::induced(&b.enumerate(2).unwrap(), &b).unwrap();
        assert_eq!(random_extension(&g, 1).unwrap().vertices().len(), 5);
        let b3 = Backend::limit(Seed::edgeless(3), 2).unwrap();
        let g3 = FiniteGraph::induced(&b3.enumerate(3).unwrap(), &b3).unwrap();
        let e = random_extension(&g3, 2).unwrap();
        assert_eq!(e.vertices().len(), 7);
        let u = VertexTerm::base(0);
        let uv = VertexTerm::set(1, vec![u.clone()]).unwrap();
        assert!(e.adjacent(&u, &uv));
        assert!(matches!(random_extension(&FiniteGraph::empty(), 1), Err(Error::EmptyGraph)));
    }

    #[test]
    fn swap_fixes_the_pair_only_without_parameter() {
        let a = permutation_action(Seed::edgeless(2), 1, &[1, 0]).unwrap();
        let w = a.backend().enumerate(5).unwrap();
        let fixed = fixed_vertices(&Elem::Fin(1), &a, &w[2..]).unwrap();
        assert_eq!(fixed.iter().map(|x| x.to_string()).collect::<Vec<_>>(), ["{b0,b1}"]);
        let a2 = lift_action(&a, 2).unwrap();
        let w2 = a2.backend().enumerate(4).unwrap();
        assert!(fixed_vertices(&Elem::Fin(1), &a2, &w2[2..]).unwrap().is_empty());
    }

    #[test]
    fn double_transposition_fixes_three_sets() {
        let a = permutation_action(Seed::edgeless(4), 1, &[1, 0, 3, 2]).unwrap();
        let w = a.backend().enumerate(4 + 15).unwrap();
        let fixed = fixed_vertices(&Elem::Fin(1), &a, &w[4..]).unwrap();
        assert_eq!(fixed.len(), brute_fixed(&a, &Elem::Fin(1), &w[4..]));
        assert_eq!(fixed.len(), 3);
    }

    #[test]
    fn formula_matches_images_for_all_small_permutations() {
        for n in 1..=4u32 {
            for p in (0..n).permutations(n as usize) {
                let a = permutation_action(Seed::edgeless(n), 1, &p).unwrap();
                let size = n as usize + (1 << n) - 1;
                let w = a.backend().enumerate(size).unwrap();
                for g in a.group().elements(64) {
                    assert_eq!(
                        fixed_vertices(&g, &a, &w).unwrap().len(),
                        brute_fixed(&a, &g, &w),
                        "{p:?} power {g}"
                    );
                }
            }
        }
    }

    #[test]
    fn integer_translations_fix_nothing() {
        let la = canonical_base_action(&Group::integers(), &[]).unwrap();
        assert_eq!(la.l(), 1);
        let w = la.backend().enumerate(200).unwrap();
        assert!(fixed_vertices(&Elem::Int(3), la.action(), &w).unwrap().is_empty());
        assert!(matches!(
            canonical_base_action(&Group::cyclic(5), &[]),
            Err(Error::FiniteGroupRejected(_))
        ));
    }

    #[test]
    fn sigma_acts_freely_for_the_modular_group() {
        let g = Group::new(
            "Z/2*Z/3",
            GroupKind::Amalgam(Amalgam::free_product(Group::cyclic(2), Group::cyclic(3))),
        );
        let s = g.as_amalgam().unwrap().lift(1, &Elem::Int(1));
        let la = canonical_base_action(&g, &[s]).unwrap();
        assert_eq!(la.l(), 2);
        let w: Vec<VertexTerm> = la.backend().enumerate(600).unwrap().into_iter().filter(|x| x.stage() <= 2).collect();
        assert!(la.sigma_fixed_point(&w).is_none());
    }
}

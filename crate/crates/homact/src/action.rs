//! Group actions on backends.

use std::collections::HashMap;
use std::sync::Arc;

use crate::backend::{Backend, Seed};
use crate::error::{Error, Result};
use crate::group::{Elem, Group};
use crate::term::{BaseId, SetTerm, VertexTerm};

#[derive(Clone)]
pub enum Rule {
    /// Left multiplication on a limit backend seeded by the group itself,
    /// extended memberwise to set terms.
    LeftMult,
    /// A finite group permuting the base vertices of a finite seed;
    /// `perms[g][i]` is the image of `b{i}` under element `g`.
    SeedPerm(Arc<Vec<Vec<u32>>>),
    /// Every element acts as the identity.
    Trivial,
}

/// A group together with its action on a backend.
#[derive(Clone)]
pub struct Action {
    group: Group,
    backend: Backend,
    rule: Rule,
}

impl std::fmt::Debug for Action {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Action({} on {})", self.group.name(), self.backend.describe())
    }
}

impl Action {
    /// Γ acting on the limit over Γ (viewed as an edgeless seed).
    pub fn left_mult(group: Group, backend: Backend) -> Result<Action> {
        match backend.limit_spec().map(|s| &s.seed) {
            Some(Seed::Group(g)) if *g == group => Ok(Action { group, backend, rule: Rule::LeftMult }),
            _ => Err(Error::InvalidInput("left multiplication needs a limit backend seeded by the group".into())),
        }
    }

    pub fn seed_perm(group: Group, backend: Backend, perms: Vec<Vec<u32>>) -> Result<Action> {
        let Some(order) = group.order() else {
            return Err(Error::InvalidInput("permutation actions need a finite group".into()));
        };
        let n = match backend.limit_spec().map(|s| &s.seed) {
            Some(Seed::Graph { n, .. }) => *n,
            _ => return Err(Error::InvalidInput("permutation actions need a finite seed".into())),
        };
        if perms.len() as u64 != order {
            return Err(Error::InvalidInput(format!("need {order} permutations, got {}", perms.len())));
        }
        let elems = group.elements(order as usize);
        let idx = |e: &Elem| match e {
            Elem::Fin(i) => *i as usize,
            _ => unreachable!("finite permutation groups use tables"),
        };
        for p in &perms {
            let mut seen = vec![false; n as usize];
            if p.len() != n as usize || p.iter().any(|x| *x >= n || std::mem::replace(&mut seen[*x as usize], true)) {
                return Err(Error::InvalidInput(format!("{p:?} is not a permutation of the seed")));
            }
        }
        for a in &elems {
            for b in &elems {
                let ab = &perms[idx(&group.mul(a, b))];
                let comp: Vec<u32> = (0..n as usize).map(|i| perms[idx(a)][perms[idx(b)][i] as usize]).collect();
                if *ab != comp {
                    return Err(Error::InvalidInput("permutations do not form an action".into()));
                }
            }
        }
        // seed edges must be preserved
        if let Some(Seed::Graph { edges, .. }) = backend.limit_spec().map(|s| &s.seed) {
            for p in &perms {
                for (u, v) in edges {
                    let (a, b) = (p[*u as usize], p[*v as usize]);
                    if !edges.contains(&(a.min(b), a.max(b))) {
                        return Err(Error::InvalidInput("permutation does not preserve seed edges".into()));
                    }
                }
            }
        }
        Ok(Action { group, backend, rule: Rule::SeedPerm(Arc::new(perms)) })
    }

    pub fn trivial(group: Group, backend: Backend) -> Action {
        Action { group, backend, rule: Rule::Trivial }
    }

    /// Same group and rule on another backend (used to lift through
    /// parametrized extensions).
    pub fn with_backend(&self, backend: Backend) -> Action {
        Action { group: self.group.clone(), backend, rule: self.rule.clone() }
    }

    pub fn group(&self) -> &Group {
        &self.group
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn rule(&self) -> &Rule {
        &self.rule
    }

    pub fn act(&self, g: &Elem, x: &VertexTerm) -> Result<VertexTerm> {
        self.backend.validate(x)?;
        if !self.group.contains(g) {
            return Err(Error::InvalidLetter(format!("{g} is not an element of {}", self.group.name())));
        }
        Ok(self.act_valid(g, x))
    }

    /// `act` for arguments already known to be valid.
    pub fn act_valid(&self, g: &Elem, x: &VertexTerm) -> VertexTerm {
        if g.is_identity() || matches!(self.rule, Rule::Trivial) {
            return x.clone();
        }
        let mut memo = HashMap::new();
        self.act_rec(g, x, &mut memo)
    }

    fn act_rec(&self, g: &Elem, x: &VertexTerm, memo: &mut HashMap<u64, VertexTerm>) -> VertexTerm {
        match x {
            VertexTerm::Nat(_) => x.clone(),
            VertexTerm::Base(b) => match (&self.rule, b) {
                (Rule::LeftMult, BaseId::Elem(e)) => VertexTerm::elem(self.group.mul(g, e)),
                (Rule::SeedPerm(p), BaseId::Index(i)) => {
                    let Elem::Fin(gi) = g else { unreachable!() };
                    VertexTerm::base(p[*gi as usize][*i as usize])
                }
                _ => x.clone(),
            },
            VertexTerm::Set(s) => {
                if let Some(y) = memo.get(&s.id()) {
                    return y.clone();
                }
                let mut members: Vec<VertexTerm> = s.members().iter().map(|m| self.act_rec(g, m, memo)).collect();
                members.sort();
                let y = VertexTerm::Set(SetTerm::from_sorted(s.stage(), members));
                memo.insert(s.id(), y.clone());
                y
            }
        }
    }

    /// Images of many vertices under one element, sharing the memo.
    pub fn act_all(&self, g: &Elem, xs: &[VertexTerm]) -> Vec<VertexTerm> {
        if g.is_identity() || matches!(self.rule, Rule::Trivial) {
            return xs.to_vec();
        }
        let mut memo = HashMap::new();
        xs.iter().map(|x| self.act_rec(g, x, &mut memo)).collect()
    }

    /// Orbit of x under a list of elements, in list order.
    pub fn orbit(&self, elems: &[Elem], x: &VertexTerm) -> Vec<VertexTerm> {
        elems.iter().map(|g| self.act_valid(g, x)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{FiniteTable, GroupKind};

    #[test]
    fn integers_translate_bases() {
        let z = Group::integers();
        let b = Backend::limit_group(z.clone(), 1).unwrap();
        let a = Action::left_mult(z.clone(), b.clone()).unwrap();
        let x = b.parse_vertex("b3").unwrap();
        assert_eq!(a.act(&Elem::Int(1), &x).unwrap().to_string(), "b4");
        let s = b.parse_vertex("{b0,b1}").unwrap();
        assert_eq!(a.act(&Elem::Int(-2), &s).unwrap().to_string(), "{b-2,b-1}");
        assert_eq!(a.act(&Elem::Int(0), &s).unwrap(), s);
    }

    #[test]
    fn permutation_actions_are_checked() {
        let g = Group::new("Z/2", GroupKind::Finite(FiniteTable::cyclic(2)));
        let b = Backend::limit(Seed::edgeless(2), 1).unwrap();
        let a = Action::seed_perm(g.clone(), b.clone(), vec![vec![0, 1], vec![1, 0]]).unwrap();
        let s = b.parse_vertex("{b0}").unwrap();
        assert_eq!(a.act(&Elem::Fin(1), &s).unwrap().to_string(), "{b1}");
        assert!(Action::seed_perm(g, b, vec![vec![1, 0], vec![1, 0]]).is_err());
    }
}

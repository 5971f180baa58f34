use std::collections::HashMap;

use super::{check_hom, Elem, FiniteTable, Group};
use crate::error::{Error, Result};

/// Γ₁ ∗_Σ Γ₂ over a finite Σ.  Sides are numbered 1 and 2.
#[derive(Clone)]
pub struct Amalgam {
    factors: [Group; 2],
    sigma: FiniteTable,
    emb: [Vec<Elem>; 2],
    lookup: [HashMap<Elem, u32>; 2],
    transversal: [Option<Vec<Elem>>; 2],
}

impl Amalgam {
    pub fn new(
        g1: Group,
        g2: Group,
        sigma: FiniteTable,
        emb1: Vec<Elem>,
        emb2: Vec<Elem>,
        transversals: [Option<Vec<Elem>>; 2],
    ) -> Result<Amalgam> {
        let l1 = check_hom("sigma.embedding1", &sigma, &g1, &emb1)?;
        let l2 = check_hom("sigma.embedding2", &sigma, &g2, &emb2)?;
        let am = Amalgam {
            factors: [g1, g2],
            sigma,
            emb: [emb1, emb2],
            lookup: [l1, l2],
            transversal: transversals,
        };
        for j in 1..=2u8 {
            am.check_transversal(j)?;
        }
        Ok(am)
    }

    pub fn free_product(g1: Group, g2: Group) -> Amalgam {
        let e1 = vec![g1.identity()];
        let e2 = vec![g2.identity()];
        Amalgam::new(g1, g2, FiniteTable::trivial(), e1, e2, [None, None]).expect("free product")
    }

    fn check_transversal(&self, j: u8) -> Result<()> {
        let Some(t) = &self.transversal[j as usize - 1] else { return Ok(()) };
        let field = format!("transversal{j}");
        let bad = |msg: String| Error::ValidationError { field: field.clone(), msg };
        let g = self.factor(j);
        let Some(order) = g.order() else {
            return Err(bad("explicit transversals are only accepted for finite factors".into()));
        };
        if !t.iter().any(|r| r.is_identity()) {
            return Err(bad("transversal must contain the identity".into()));
        }
        if t.len() as u64 * self.sigma.order() as u64 != order {
            return Err(bad(format!("expected {} representatives", order / self.sigma.order() as u64)));
        }
        for x in g.elements(order as usize) {
            let hits = t
                .iter()
                .filter(|r| self.lookup[j as usize - 1].contains_key(&g.mul(&g.inv(r), &x)))
                .count();
            if hits != 1 {
                return Err(bad(format!("element {x} meets {hits} representatives")));
            }
        }
        Ok(())
    }

    pub fn factor(&self, j: u8) -> &Group {
        &self.factors[j as usize - 1]
    }

    pub fn sigma(&self) -> &FiniteTable {
        &self.sigma
    }

    pub fn embed(&self, j: u8, s: u32) -> &Elem {
        &self.emb[j as usize - 1][s as usize]
    }

    /// Σ-index of a factor element lying in the image of Σ.
    pub fn sigma_index(&self, j: u8, x: &Elem) -> Option<u32> {
        self.lookup[j as usize - 1].get(x).copied()
    }

    /// Index [Γⱼ : Σ] when Γⱼ is finite.
    pub fn index(&self, j: u8) -> Option<u64> {
        self.factor(j).order().map(|o| o / self.sigma.order() as u64)
    }

    pub fn order(&self) -> Option<u64> {
        match (self.index(1), self.index(2)) {
            (Some(1), _) => self.factor(2).order(),
            (_, Some(1)) => self.factor(1).order(),
            _ => None,
        }
    }

    /// x = rep · emb(σ) with rep the chosen left transversal element.
    fn split_left(&self, j: u8, x: &Elem) -> (Elem, u32) {
        let g = self.factor(j);
        if let Some(s) = self.sigma_index(j, x) {
            return (g.identity(), s);
        }
        if let Some(t) = &self.transversal[j as usize - 1] {
            for r in t {
                if let Some(s) = self.sigma_index(j, &g.mul(&g.inv(r), x)) {
                    return (r.clone(), s);
                }
            }
            unreachable!("validated transversal covers the factor");
        }
        let (rep, s) = self
            .sigma
            .elements()
            .map(|s| (g.mul(x, self.embed(j, s)), s))
            .min_by(|(a, _), (b, _)| (g.norm(a), a).cmp(&(g.norm(b), b)))
            .expect("sigma is nonempty");
        (rep, self.sigma.inv(s))
    }

    /// Right multiplication of a normal form by a factor element.
    fn push_factor(&self, syl: &mut Vec<(u8, Elem)>, sigma: &mut u32, j: u8, h: &Elem) {
        let g = self.factor(j);
        let sh = g.mul(self.embed(j, *sigma), h);
        let x = match syl.last() {
            Some((side, t)) if *side == j => {
                let x = g.mul(t, &sh);
                syl.pop();
                x
            }
            _ => sh,
        };
        let (rep, s) = self.split_left(j, &x);
        if !rep.is_identity() {
            syl.push((j, rep));
        }
        *sigma = s;
    }

    pub fn lift(&self, j: u8, h: &Elem) -> Elem {
        let mut syl = Vec::new();
        let mut s = 0;
        self.push_factor(&mut syl, &mut s, j, h);
        Elem::Amal(syl, s)
    }

    pub fn lift_sigma(&self, s: u32) -> Elem {
        Elem::Amal(vec![], s)
    }

    pub fn mul(&self, a: &Elem, b: &Elem) -> Elem {
        let (Elem::Amal(sa, ga), Elem::Amal(sb, gb)) = (a, b) else {
            panic!("amalgam expects amalgam normal forms")
        };
        let mut syl = sa.clone();
        let mut s = *ga;
        for (j, t) in sb {
            self.push_factor(&mut syl, &mut s, *j, t);
        }
        Elem::Amal(syl, self.sigma.mul(s, *gb))
    }

    pub fn inv(&self, a: &Elem) -> Elem {
        let Elem::Amal(sa, ga) = a else { panic!("amalgam expects amalgam normal forms") };
        let mut syl = Vec::new();
        let mut s = self.sigma.inv(*ga);
        for (j, t) in sa.iter().rev() {
            self.push_factor(&mut syl, &mut s, *j, &self.factor(*j).inv(t));
        }
        Elem::Amal(syl, s)
    }

    pub fn norm(&self, e: &Elem) -> u64 {
        match e {
            Elem::Amal(syl, s) => {
                syl.iter().map(|(j, t)| 1 + self.factor(*j).norm(t)).sum::<u64>() + (*s != 0) as u64
            }
            _ => u64::MAX,
        }
    }

    pub fn gens(&self) -> Vec<Elem> {
        let mut out = Vec::new();
        for j in 1..=2u8 {
            for g in self.factor(j).gens() {
                out.push(self.lift(j, &g));
            }
        }
        out
    }

    pub fn is_normal(&self, e: &Elem) -> bool {
        let Elem::Amal(syl, s) = e else { return false };
        if *s >= self.sigma.order() {
            return false;
        }
        let alternating = syl.windows(2).all(|w| w[0].0 != w[1].0);
        alternating
            && syl.iter().all(|(j, t)| {
                (*j == 1 || *j == 2)
                    && self.factor(*j).contains(t)
                    && !t.is_identity()
                    && self.split_left(*j, t) == (t.clone(), 0)
            })
    }

    /// Reduced expression g_{i_n} ⋯ g_{i_1} read left to right, with the
    /// trailing Σ-part absorbed into the last syllable.
    pub fn reduced_syllables(&self, e: &Elem) -> Vec<(u8, Elem)> {
        let Elem::Amal(syl, s) = e else { return vec![] };
        let mut out = syl.clone();
        match out.last_mut() {
            Some((j, t)) => *t = self.factor(*j).mul(t, self.embed(*j, *s)),
            None if *s != 0 => out.push((1, self.embed(1, *s).clone())),
            None => {}
        }
        out
    }

    /// Syllable length of the reduced expression.
    pub fn length(&self, e: &Elem) -> usize {
        self.reduced_syllables(e).len()
    }
}

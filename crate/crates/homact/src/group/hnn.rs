use std::collections::HashMap;

use super::{check_hom, Elem, FiniteTable, Group};
use crate::error::Result;

/// HNN(H, Σ, θ) with relations t·σ·t⁻¹ = θ(σ) for σ in Σ ≤ H.
#[derive(Clone)]
pub struct Hnn {
    base: Group,
    sigma: FiniteTable,
    emb: Vec<Elem>,
    theta: Vec<Elem>,
    lookup_emb: HashMap<Elem, u32>,
    lookup_theta: HashMap<Elem, u32>,
}

impl Hnn {
    /// `emb` places Σ inside H, `theta` is the second embedding θ.
    pub fn new(base: Group, sigma: FiniteTable, emb: Vec<Elem>, theta: Vec<Elem>) -> Result<Hnn> {
        let lookup_emb = check_hom("sigma.embedding", &sigma, &base, &emb)?;
        let lookup_theta = check_hom("theta", &sigma, &base, &theta)?;
        Ok(Hnn { base, sigma, emb, theta, lookup_emb, lookup_theta })
    }

    pub fn base(&self) -> &Group {
        &self.base
    }

    pub fn sigma(&self) -> &FiniteTable {
        &self.sigma
    }

    pub fn embed(&self, s: u32) -> &Elem {
        &self.emb[s as usize]
    }

    pub fn theta(&self, s: u32) -> &Elem {
        &self.theta[s as usize]
    }

    /// Subgroup S₊ = Σ passes through t, S₋ = θ(Σ) passes through t⁻¹.
    fn sub(&self, eps: i8) -> (&[Elem], &HashMap<Elem, u32>) {
        if eps > 0 {
            (&self.emb, &self.lookup_emb)
        } else {
            (&self.theta, &self.lookup_theta)
        }
    }

    /// x = S_ε(s) · rep.
    fn split_right(&self, eps: i8, x: &Elem) -> (u32, Elem) {
        let (imgs, lookup) = self.sub(eps);
        let h = &self.base;
        if let Some(s) = lookup.get(x) {
            return (*s, h.identity());
        }
        let (rep, s) = self
            .sigma
            .elements()
            .map(|s| (h.mul(&imgs[s as usize], x), s))
            .min_by(|(a, _), (b, _)| (h.norm(a), a).cmp(&(h.norm(b), b)))
            .expect("sigma is nonempty");
        (self.sigma.inv(s), rep)
    }

    fn push_h(&self, head: &mut Elem, tail: &mut [(i8, Elem)], x: &Elem) {
        let h = &self.base;
        let Some(last) = tail.len().checked_sub(1) else {
            *head = h.mul(head, x);
            return;
        };
        tail[last].1 = h.mul(&tail[last].1, x);
        let mut i = last;
        loop {
            let (eps, r) = (tail[i].0, tail[i].1.clone());
            let (s, rep) = self.split_right(eps, &r);
            tail[i].1 = rep;
            let pushed = if eps > 0 { self.theta(s) } else { self.embed(s) };
            if pushed.is_identity() {
                return;
            }
            if i == 0 {
                *head = h.mul(head, pushed);
                return;
            }
            i -= 1;
            tail[i].1 = h.mul(&tail[i].1, pushed);
        }
    }

    fn push_t(&self, tail: &mut Vec<(i8, Elem)>, d: i8) {
        match tail.last() {
            Some((eps, r)) if *eps == -d && r.is_identity() => {
                tail.pop();
            }
            _ => tail.push((d, self.base.identity())),
        }
    }

    pub fn lift(&self, x: &Elem) -> Elem {
        Elem::Hnn(Box::new(x.clone()), vec![])
    }

    pub fn lift_sigma(&self, s: u32) -> Elem {
        self.lift(self.embed(s))
    }

    pub fn lift_theta(&self, s: u32) -> Elem {
        self.lift(self.theta(s))
    }

    pub fn stable(&self, k: i64) -> Elem {
        let mut tail = Vec::new();
        let d = if k < 0 { -1 } else { 1 };
        for _ in 0..k.unsigned_abs() {
            self.push_t(&mut tail, d);
        }
        Elem::Hnn(Box::new(self.base.identity()), tail)
    }

    pub fn mul(&self, a: &Elem, b: &Elem) -> Elem {
        let (Elem::Hnn(ha, ta), Elem::Hnn(hb, tb)) = (a, b) else {
            panic!("HNN expects Britton normal forms")
        };
        let mut head = (**ha).clone();
        let mut tail = ta.clone();
        self.push_h(&mut head, &mut tail, hb);
        for (eps, r) in tb {
            self.push_t(&mut tail, *eps);
            self.push_h(&mut head, &mut tail, r);
        }
        Elem::Hnn(Box::new(head), tail)
    }

    pub fn inv(&self, a: &Elem) -> Elem {
        let Elem::Hnn(ha, ta) = a else { panic!("HNN expects Britton normal forms") };
        let h = &self.base;
        let mut head = h.identity();
        let mut tail = Vec::new();
        for (eps, r) in ta.iter().rev() {
            self.push_h(&mut head, &mut tail, &h.inv(r));
            self.push_t(&mut tail, -eps);
        }
        self.push_h(&mut head, &mut tail, &h.inv(ha));
        Elem::Hnn(Box::new(head), tail)
    }

    pub fn norm(&self, e: &Elem) -> u64 {
        match e {
            Elem::Hnn(h, tail) => {
                self.base.norm(h) + tail.iter().map(|(_, r)| 1 + self.base.norm(r)).sum::<u64>()
            }
            _ => u64::MAX,
        }
    }

    pub fn gens(&self) -> Vec<Elem> {
        let mut out: Vec<Elem> = self.base.gens().iter().map(|g| self.lift(g)).collect();
        out.push(self.stable(1));
        out.push(self.stable(-1));
        out
    }

    pub fn is_normal(&self, e: &Elem) -> bool {
        let Elem::Hnn(h, tail) = e else { return false };
        if !self.base.contains(h) {
            return false;
        }
        for (i, (eps, r)) in tail.iter().enumerate() {
            if (*eps != 1 && *eps != -1) || !self.base.contains(r) {
                return false;
            }
            if self.split_right(*eps, r).1 != *r {
                return false;
            }
            if i + 1 < tail.len() && r.is_identity() && tail[i + 1].0 == -eps {
                return false;
            }
        }
        true
    }

    /// Number of stable letters.
    pub fn t_length(&self, e: &Elem) -> usize {
        match e {
            Elem::Hnn(_, tail) => tail.len(),
            _ => 0,
        }
    }
}

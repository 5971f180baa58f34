//! Density steps: one homogeneity or faithfulness requirement at a time.
//!
//! Every step first forces α on the supplied F, so the committed domain
//! of α is the support that must be preserved.  New pairs are committed
//! with their Σ-orbits and never overwrite old ones, and every step ends
//! with an exact re-evaluation of π_α on committed pairs only.

use std::collections::HashSet;

use super::setup::{Eval, Setup, SetupKind};
use crate::backend::VertexPool;
use crate::error::{Error, Result};
use crate::graph::PartialIso;
use crate::group::{Elem, Group};
use crate::term::VertexTerm;
use crate::witness::{hcf_clauses, property_f, sigma_saturate};

fn exhausted(g: &Group, tried: usize, what: &str) -> Error {
    match g.order() {
        Some(n) if tried as u64 >= n => Error::NotFound(format!("no {what} in the whole factor")),
        _ => Error::BudgetExhausted(format!("no {what} among the first {tried} elements")),
    }
}

impl Setup {
    /// First lifted element of `factor` (BFS order) passing `ok`.
    fn search_factor(
        &self,
        factor: &Group,
        lift: &dyn Fn(&Elem) -> Elem,
        what: &str,
        ok: &mut dyn FnMut(&Elem) -> bool,
    ) -> Result<Elem> {
        let elems = factor.elements(self.budget);
        for h in &elems {
            let g = lift(h);
            if ok(&g) {
                return Ok(g);
            }
        }
        Err(exhausted(factor, elems.len(), what))
    }

    fn force(&mut self, f: &[VertexTerm]) -> Result<()> {
        for x in f {
            self.alpha_mut().query(x)?;
        }
        Ok(())
    }

    fn committed_domain(&self) -> (HashSet<VertexTerm>, VertexPool) {
        let d: Vec<VertexTerm> = self.alpha().committed().domain().cloned().collect();
        (d.iter().cloned().collect(), d.iter().collect())
    }

    fn committed_range(&self) -> Vec<VertexTerm> {
        self.alpha().committed().range().cloned().collect()
    }

    fn check_phi(&self, phi: &PartialIso) -> Result<()> {
        let (ok, bad) = phi.validate(self.backend());
        if !ok {
            return Err(Error::InvalidPartialIso(bad.map(|v| v.to_string()).unwrap_or_default()));
        }
        Ok(())
    }

    fn verify_homogeneity(&mut self, phi: &PartialIso, g: &Elem) -> Result<()> {
        for (x, y) in phi.to_pairs() {
            let got = self.pi_alpha_apply(g, &x, Eval::Committed)?;
            if got != y {
                return Err(Error::VerificationFailed(format!("π_α(g){x} = {got}, expected {y}")));
            }
        }
        Ok(())
    }

    fn verify_faithful(&mut self, g: &Elem, x: &VertexTerm) -> Result<()> {
        let gx = self.pi_alpha_apply(g, x, Eval::Committed)?;
        if gx == *x {
            return Err(Error::VerificationFailed(format!("π_α(g) fixes {x}")));
        }
        Ok(())
    }

    /// Returns g with π_α(g)|d(φ) = φ for the updated α; α keeps its
    /// values on F and everything committed before.
    pub fn density_step_homogeneous(&mut self, phi: &PartialIso, f: &[VertexTerm]) -> Result<Elem> {
        self.check_phi(phi)?;
        self.force(f)?;
        let g = if phi.pairs().all(|(x, y)| x == y) {
            self.group().identity()
        } else {
            match self.kind() {
                SetupKind::Amalgam => self.amalgam_homogeneous(phi)?,
                SetupKind::AmalgamFiniteFactor => self.finite_factor_homogeneous(phi)?,
                SetupKind::Hnn => self.hnn_homogeneous(phi)?,
            }
        };
        self.verify_homogeneity(phi, &g)?;
        Ok(g)
    }

    /// The finite-factor construction, callable directly.
    pub fn density_step_homogeneous_finite_factor(&mut self, phi: &PartialIso, f: &[VertexTerm]) -> Result<Elem> {
        if self.kind() != SetupKind::AmalgamFiniteFactor {
            return Err(Error::InvalidInput("the second factor is not finite".into()));
        }
        self.density_step_homogeneous(phi, f)
    }

    /// g₁ ∈ Γ₁ with g₁d(φ) highly core-free against the committed domain.
    fn pick_g1(&self, xs: &[VertexTerm], factor: u8) -> Result<Elem> {
        let (dom, pool) = self.committed_domain();
        let group = self.group().clone();
        let a = self.base().action().clone();
        let sigma = self.sigma().to_vec();
        let lift = |h: &Elem| match factor {
            0 => group.as_hnn().unwrap().lift(h),
            j => group.as_amalgam().unwrap().lift(j, h),
        };
        let fac = self.factor(factor);
        self.search_factor(&fac, &lift, "g₁", &mut |g| hcf_clauses(&a, &sigma, g, xs, &dom, &pool))
    }

    fn factor(&self, j: u8) -> Group {
        match j {
            0 => self.hnn().unwrap().base().clone(),
            j => self.amalgam().unwrap().factor(j).clone(),
        }
    }

    fn amalgam_homogeneous(&mut self, phi: &PartialIso) -> Result<Elem> {
        let group = self.group().clone();
        let am = group.as_amalgam().unwrap().clone();
        let (xs, ys): (Vec<VertexTerm>, Vec<VertexTerm>) = phi.to_pairs().into_iter().unzip();
        let g1 = self.pick_g1(&xs, 1)?;
        let g1x: Vec<VertexTerm> = xs.iter().map(|x| self.act(&g1, x)).collect();
        let mut ag1x = Vec::new();
        for p in &g1x {
            ag1x.push(self.alpha_mut().query(p)?);
        }
        // g₂⁻¹ r(φ) against ΣF ⊔ Σg₁d(φ), which is now the committed domain
        let (dom, pool) = self.committed_domain();
        let a = self.base().action().clone();
        let sigma = self.sigma().to_vec();
        let e = self.search_factor(am.factor(1), &|h| am.lift(1, h), "g₂", &mut |g| {
            hcf_clauses(&a, &sigma, g, &ys, &dom, &pool)
        })?;
        // h against F′ = α(ΣF) ⊔ Σα(g₁d(φ)), the committed range
        let fp = self.committed_range();
        let fset: HashSet<VertexTerm> = fp.iter().cloned().collect();
        let fpool: VertexPool = fp.iter().collect();
        let h = self.search_factor(am.factor(2), &|h| am.lift(2, h), "h", &mut |g| {
            hcf_clauses(&a, &sigma, g, &fp, &fset, &fpool)
        })?;
        for (y, ay) in ys.iter().zip(&ag1x) {
            let src = self.act(&e, y);
            let dst = self.act(&h, ay);
            self.alpha_mut().commit(src, dst)?;
        }
        let g2 = group.inv(&e);
        Ok(group.mul(&group.mul(&g2, &h), &g1))
    }

    fn finite_factor_homogeneous(&mut self, phi: &PartialIso) -> Result<Elem> {
        let group = self.group().clone();
        let am = group.as_amalgam().unwrap().clone();
        let b = self.backend().clone();
        let (xs, ys): (Vec<VertexTerm>, Vec<VertexTerm>) = phi.to_pairs().into_iter().unzip();
        let g1 = self.pick_g1(&xs, 1)?;
        let g1x: Vec<VertexTerm> = xs.iter().map(|x| self.act(&g1, x)).collect();
        let sigma = self.sigma().to_vec();
        let a = self.base().action().clone();
        let (mut dom, _) = self.committed_domain();
        dom.extend(sigma_saturate(&a, &sigma, &g1x));
        let dpool: VertexPool = dom.iter().collect();
        let e = self.search_factor(am.factor(1), &|h| am.lift(1, h), "g₂", &mut |g| {
            hcf_clauses(&a, &sigma, g, &ys, &dom, &dpool)
        })?;
        // the Claim: z₁,…,zₙ off Γ₂α(F) with the five clauses
        let gamma2 = self.base().sigma().to_vec();
        let range = self.committed_range();
        let g2_range = sigma_saturate(&a, &gamma2, &range);
        let mut pool: VertexPool = g2_range.iter().collect();
        let mut zs: Vec<VertexTerm> = Vec::new();
        for (l, xl) in xs.iter().enumerate() {
            let u: Vec<VertexTerm> = (0..l).filter(|&i| b.adj(&xs[i], xl)).map(|i| zs[i].clone()).collect();
            let z = b.witness_in_pool(&u, &pool, &[])?;
            for hz in a.orbit(&gamma2, &z) {
                pool.insert(hz);
            }
            zs.push(z);
        }
        self.check_claim(&xs, &zs, &g2_range)?;
        let h = gamma2
            .iter()
            .find(|h| !sigma.contains(h))
            .cloned()
            .ok_or_else(|| Error::IndexTooSmall("Γ₂ = Σ".into()))?;
        for i in 0..xs.len() {
            self.alpha_mut().commit(g1x[i].clone(), zs[i].clone())?;
            let src = self.act(&e, &ys[i]);
            let dst = self.act(&h, &zs[i]);
            self.alpha_mut().commit(src, dst)?;
        }
        let g2 = group.inv(&e);
        Ok(group.mul(&group.mul(&g2, &h), &g1))
    }

    /// Exhaustive re-check of the Claim's clauses.
    fn check_claim(&self, xs: &[VertexTerm], zs: &[VertexTerm], g2_range: &[VertexTerm]) -> Result<()> {
        let b = self.backend();
        let a = self.base().action();
        let gamma2 = self.base().sigma();
        let sigma = self.sigma();
        let bad = |m: String| Err(Error::VerificationFailed(format!("claim: {m}")));
        let orbit = |z: &VertexTerm| -> Vec<VertexTerm> { a.orbit(gamma2, z) };
        for (i, zi) in zs.iter().enumerate() {
            if g2_range.contains(zi) {
                return bad(format!("{zi} lies in Γ₂α(F)"));
            }
            if g2_range.iter().any(|u| b.adj(u, zi)) {
                return bad(format!("{zi} touches Γ₂α(F)"));
            }
            let oi = orbit(zi);
            for h in gamma2.iter().filter(|h| !sigma.contains(h)) {
                let hz = a.act_valid(h, zi);
                if sigma.iter().any(|s| sigma.iter().any(|t| a.act_valid(s, &hz) == a.act_valid(t, zi))) {
                    return bad(format!("Σh{zi} meets Σ{zi}"));
                }
            }
            for (j, zj) in zs.iter().enumerate() {
                if i != j && orbit(zj).iter().any(|w| oi.contains(w)) {
                    return bad(format!("Γ₂-orbits of {zi} and {zj} meet"));
                }
                if oi[1..].iter().any(|hz| b.adj(hz, zj)) {
                    return bad(format!("hz ∼ z for {zi}, {zj}"));
                }
                if i != j && b.adj(&xs[i], &xs[j]) != b.adj(zi, zj) {
                    return bad(format!("adjacency of {zi}, {zj}"));
                }
            }
        }
        Ok(())
    }

    fn hnn_homogeneous(&mut self, phi: &PartialIso) -> Result<Elem> {
        let group = self.group().clone();
        let hnn = group.as_hnn().unwrap().clone();
        let (xs, ys): (Vec<VertexTerm>, Vec<VertexTerm>) = phi.to_pairs().into_iter().unzip();
        let g1 = self.pick_g1(&xs, 0)?;
        let range = self.committed_range();
        let rset: HashSet<VertexTerm> = range.iter().cloned().collect();
        let rpool: VertexPool = range.iter().collect();
        let a = self.base().action().clone();
        let theta = self.sigma_theta().to_vec();
        let e = self.search_factor(hnn.base(), &|h| hnn.lift(h), "g₂", &mut |g| {
            hcf_clauses(&a, &theta, g, &ys, &rset, &rpool)
        })?;
        for (x, y) in xs.iter().zip(&ys) {
            let src = self.act(&g1, x);
            let dst = self.act(&e, y);
            self.alpha_mut().commit(src, dst)?;
        }
        let g2 = group.inv(&e);
        Ok(group.mul(&group.mul(&g2, &hnn.stable(1)), &g1))
    }

    /// Returns x with π_α(g)x ≠ x for the updated α.
    pub fn density_step_faithful(&mut self, g: &Elem, f: &[VertexTerm]) -> Result<VertexTerm> {
        if !self.group().contains(g) {
            return Err(Error::NotReduced(format!("{g} is not a normal form")));
        }
        if g.is_identity() {
            return Err(Error::InvalidInput("the identity moves nothing".into()));
        }
        self.force(f)?;
        let x = match self.kind() {
            SetupKind::Hnn => self.hnn_faithful(g)?,
            _ => self.amalgam_faithful(g)?,
        };
        self.verify_faithful(g, &x)?;
        Ok(x)
    }

    fn touched(&self) -> Vec<VertexTerm> {
        let mut t: Vec<VertexTerm> = self.alpha().committed().domain().cloned().collect();
        let d: HashSet<VertexTerm> = t.iter().cloned().collect();
        t.extend(self.committed_range().into_iter().filter(|y| !d.contains(y)));
        t
    }

    /// Vertex moved by g in the base action, away from everything touched.
    fn moved_by(&self, g: &Elem) -> Result<VertexTerm> {
        property_f(self.base().action(), std::slice::from_ref(g), &self.touched(), self.budget)
    }

    fn amalgam_faithful(&mut self, g: &Elem) -> Result<VertexTerm> {
        let group = self.group().clone();
        let am = group.as_amalgam().unwrap().clone();
        let syl = am.reduced_syllables(g);
        if syl.len() == 1 {
            let (j, t) = &syl[0];
            let lifted = am.lift(*j, t);
            let y = self.moved_by(&lifted)?;
            if *j == 1 {
                return Ok(y);
            }
            // π_α(g) = α⁻¹gα moves α⁻¹(y)
            let x = self.alpha_mut().query_inv(&y)?;
            let gy = self.act(&lifted, &y);
            self.alpha_mut().query_inv(&gy)?;
            return Ok(x);
        }
        // prefixes g_{i_l}⋯g_{i_1}, l = 1..n
        let mut prefixes = Vec::new();
        let mut p = group.identity();
        for (j, t) in syl.iter().rev() {
            p = group.mul(&am.lift(*j, t), &p);
            prefixes.push(p.clone());
        }
        let sigma = self.sigma().to_vec();
        let (dom, _) = self.committed_domain();
        let mut base: Vec<VertexTerm> = dom.iter().cloned().collect();
        base.extend(self.committed_range().into_iter().filter(|y| !dom.contains(y)));
        let mut ftilde: Vec<VertexTerm> = base.clone();
        for p in &prefixes {
            ftilde.extend(self.base().action().act_all(&group.inv(p), &base));
        }
        ftilde.sort();
        ftilde.dedup();
        let mut s: Vec<Elem> = Vec::new();
        for p in &prefixes {
            for sg in &sigma {
                s.push(group.mul(sg, p));
            }
        }
        for (l, pl) in prefixes.iter().enumerate() {
            for pk in &prefixes[l + 1..] {
                for sg in &sigma {
                    s.push(group.mul(&group.mul(&group.inv(pl), sg), pk));
                }
            }
        }
        s.retain(|e| !e.is_identity());
        s.sort();
        s.dedup();
        let x = property_f(self.base().action(), &s, &ftilde, self.budget)?;
        // γ₀ is the identity on Σx and on every Σ-trajectory point
        self.alpha_mut().commit(x.clone(), x.clone())?;
        for p in &prefixes {
            let px = self.act(p, &x);
            self.alpha_mut().commit(px.clone(), px)?;
        }
        Ok(x)
    }

    fn hnn_faithful(&mut self, g: &Elem) -> Result<VertexTerm> {
        let group = self.group().clone();
        let hnn = group.as_hnn().unwrap().clone();
        let Elem::Hnn(h0, tail) = g else { unreachable!() };
        if tail.is_empty() {
            return self.moved_by(g);
        }
        // rewrite h0 t^{ε₁} r₁ ⋯ t^{εₙ} rₙ as h_n t^{e_n} ⋯ t^{e_1} h_0
        let n = tail.len();
        let eps: Vec<i8> = tail.iter().rev().map(|(e, _)| *e).collect();
        let mut hs: Vec<Elem> = tail.iter().rev().map(|(_, r)| hnn.lift(r)).collect();
        hs.push(hnn.lift(h0));
        let t = hnn.stable(1);
        let tinv = hnn.stable(-1);
        let sigma = self.sigma().to_vec();
        let theta = self.sigma_theta().to_vec();
        let mut prefix = hs[0].clone(); // P₀ = h₀
        let mut big_g: Vec<Elem> = Vec::new();
        let mut big_gt: Vec<Elem> = Vec::new();
        let mut reps: Vec<Elem> = Vec::new();
        for l in 0..n {
            let (hl, htl) = if eps[l] > 0 {
                (prefix.clone(), group.mul(&t, &prefix))
            } else {
                (group.mul(&tinv, &prefix), prefix.clone())
            };
            for s in &sigma {
                big_g.push(group.mul(s, &hl));
            }
            for s in &theta {
                big_gt.push(group.mul(s, &htl));
            }
            reps.push(hl);
            let te = if eps[l] > 0 { t.clone() } else { tinv.clone() };
            prefix = group.mul(&hs[l + 1], &group.mul(&te, &prefix));
        }
        let mut s: Vec<Elem> = Vec::new();
        for set in [&big_g, &big_gt] {
            for a in set.iter() {
                let ai = group.inv(a);
                for b in set.iter() {
                    s.push(group.mul(&ai, b));
                }
            }
        }
        s.push(g.clone());
        s.retain(|e| !e.is_identity());
        s.sort();
        s.dedup();
        let touched = self.touched();
        let mut ftilde: Vec<VertexTerm> = Vec::new();
        for a in big_g.iter().chain(&big_gt) {
            ftilde.extend(self.base().action().act_all(&group.inv(a), &touched));
        }
        ftilde.sort();
        ftilde.dedup();
        let x = property_f(self.base().action(), &s, &ftilde, self.budget)?;
        // γ₀ = t on each Y_l
        for rep in &reps {
            let y = self.act(rep, &x);
            let ty = self.act(&t, &y);
            self.alpha_mut().commit(y, ty)?;
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{Amalgam, FiniteTable, GroupKind, Hnn};

    fn zz() -> Group {
        Group::new("Z*Z", GroupKind::Amalgam(Amalgam::free_product(Group::integers(), Group::integers())))
    }

    fn phi(st: &Setup, pairs: &[(usize, usize)]) -> PartialIso {
        let b = st.backend();
        PartialIso::from_pairs(pairs.iter().map(|(i, j)| (b.nth(*i).unwrap(), b.nth(*j).unwrap())).collect(), b)
            .unwrap()
    }

    #[test]
    fn identity_requirement_is_free() {
        let mut st = Setup::new(&zz(), 200).unwrap();
        let x = st.backend().nth(4).unwrap();
        let p = PartialIso::identity([x.clone()]);
        let g = st.density_step_homogeneous(&p, &[x]).unwrap();
        assert!(g.is_identity());
    }

    #[test]
    fn free_product_homogeneity_has_three_syllables() {
        let g = zz();
        let mut st = Setup::new(&g, 200).unwrap();
        let p = phi(&st, &[(0, 3), (1, 5)]);
        let f: Vec<VertexTerm> = p.domain().chain(p.range()).cloned().collect();
        let w = st.density_step_homogeneous(&p, &f).unwrap();
        assert_eq!(g.as_amalgam().unwrap().length(&w), 3);
        let mut again = st.clone();
        for (x, y) in p.pairs() {
            assert_eq!(again.pi_alpha_apply(&w, x, Eval::Committed).unwrap(), *y);
        }
        // a second requirement keeps the first one certified
        let q = phi(&st, &[(2, 0)]);
        st.density_step_homogeneous(&q, &[]).unwrap();
        for (x, y) in p.pairs() {
            assert_eq!(st.pi_alpha_apply(&w, x, Eval::Committed).unwrap(), *y);
        }
    }

    #[test]
    fn free_product_faithfulness() {
        let g = zz();
        let am = g.as_amalgam().unwrap();
        let mut st = Setup::new(&g, 200).unwrap();
        let w = g.mul(&am.lift(1, &Elem::Int(1)), &am.lift(2, &Elem::Int(1)));
        let x = st.density_step_faithful(&w, &[]).unwrap();
        assert_ne!(st.pi_alpha_apply(&w, &x, Eval::Committed).unwrap(), x);
        assert_eq!(st.pi_alpha_apply(&w, &x, Eval::Committed).unwrap(), st.act(&w, &x));
        let before = st.alpha().len();
        let a = am.lift(1, &Elem::Int(3));
        st.density_step_faithful(&a, &[]).unwrap();
        assert_eq!(st.alpha().len(), before);
        let b = am.lift(2, &Elem::Int(-2));
        st.density_step_faithful(&b, &[]).unwrap();
    }

    #[test]
    fn infinite_dihedral_finite_factor() {
        let g = Group::new("Z*Z/2", GroupKind::Amalgam(Amalgam::free_product(Group::integers(), Group::cyclic(2))));
        let mut st = Setup::new(&g, 200).unwrap();
        assert_eq!(st.kind(), SetupKind::AmalgamFiniteFactor);
        for pairs in [vec![(0, 1)], vec![(0, 2), (3, 1)], vec![(1, 1), (2, 4)]] {
            let p = phi(&st, &pairs);
            st.density_step_homogeneous_finite_factor(&p, &[]).unwrap();
        }
        let am = g.as_amalgam().unwrap();
        let w = g.mul(&am.lift(2, &Elem::Int(1)), &am.lift(1, &Elem::Int(2)));
        st.density_step_faithful(&w, &[]).unwrap();
    }

    #[test]
    fn finite_factor_needs_index_two() {
        let g = Group::new("Z*1", GroupKind::Amalgam(Amalgam::free_product(Group::integers(), Group::cyclic(1))));
        assert!(matches!(Setup::new(&g, 10), Err(Error::IndexTooSmall(_))));
    }

    fn modular_hnn() -> Group {
        let base = Group::new("Z/2*Z/3", GroupKind::Amalgam(Amalgam::free_product(Group::cyclic(2), Group::cyclic(3))));
        let s = base.as_amalgam().unwrap().lift(1, &Elem::Int(1));
        let h = Hnn::new(base.clone(), FiniteTable::cyclic(2), vec![base.identity(), s.clone()], vec![base.identity(), s])
            .unwrap();
        Group::new("HNN(Z/2*Z/3,Z/2,id)", GroupKind::Hnn(h))
    }

    #[test]
    fn hnn_steps_keep_alpha_equivariant() {
        let g = modular_hnn();
        let mut st = Setup::new(&g, 300).unwrap();
        let mut phis = crate::generic::PhiEnumerator::new(st.backend(), 2);
        let p = (0..40).map(|_| phis.next_phi().unwrap()).find(|p| p.len() == 2 && p.pairs().all(|(x, y)| x != y)).unwrap();
        let w = st.density_step_homogeneous(&p, &[]).unwrap();
        assert_eq!(g.as_hnn().unwrap().t_length(&w), 1);
        let t = g.as_hnn().unwrap().stable(1);
        let x = st.density_step_faithful(&t, &[]).unwrap();
        assert_ne!(st.pi_alpha_apply(&t, &x, Eval::Committed).unwrap(), x);
        let u = g.mul(&t, &g.mul(&g.element(2).unwrap(), &g.as_hnn().unwrap().stable(-1)));
        if !u.is_identity() {
            st.density_step_faithful(&u, &[]).unwrap();
        }
        let window = st.alpha().committed().domain().cloned().collect::<Vec<_>>();
        assert!(st.alpha_mut().verify_window(&window).passed());
    }
}

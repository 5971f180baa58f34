//! Setups for amalgams and HNN extensions, and the actions π_α.

use crate::automorphism::{EquivCtx, LazyAutomorphism};
use crate::backend::Backend;
use crate::error::{Error, Result};
use crate::extension::{canonical_base_action, LimitAction};
use crate::group::{Amalgam, Elem, Group, Hnn};
use crate::term::VertexTerm;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SetupKind {
    Amalgam,
    /// Amalgam whose second factor is finite.
    AmalgamFiniteFactor,
    Hnn,
}

/// A group Γ (amalgam or HNN), its canonical base action and a lazy α ∈ Z.
///
/// For amalgams Z is the commutant of Σ; for HNN extensions α must satisfy
/// α∘σ = θ(σ)∘α.  Both are enforced by the equivariance context of α, so
/// every commitment arrives together with its Σ-orbit.
#[derive(Clone, Debug)]
pub struct Setup {
    kind: SetupKind,
    base: LimitAction,
    sigma: Vec<Elem>,
    sigma_theta: Vec<Elem>,
    alpha: LazyAutomorphism,
    pub budget: usize,
}

/// How α is consulted while evaluating π_α.
pub enum Eval {
    /// Forth/back steps may commit new pairs.
    Query,
    /// Only committed pairs; a missing value is an error.
    Committed,
}

impl Setup {
    pub fn new(group: &Group, budget: usize) -> Result<Setup> {
        if let Some(am) = group.as_amalgam() {
            let order = am.sigma().order();
            let sigma: Vec<Elem> = (0..order).map(|s| am.lift_sigma(s)).collect();
            if am.factor(1).is_finite() && !am.factor(2).is_finite() {
                return Err(Error::InvalidInput("put the finite factor second".into()));
            }
            let (kind, base) = if am.factor(2).is_finite() {
                if am.index(2).unwrap_or(0) < 2 {
                    return Err(Error::IndexTooSmall(format!("[Γ₂:Σ] = {}", am.index(2).unwrap_or(0))));
                }
                let g2 = am.factor(2);
                let lifted: Vec<Elem> =
                    g2.elements(g2.order().unwrap() as usize).iter().map(|h| am.lift(2, h)).collect();
                (SetupKind::AmalgamFiniteFactor, canonical_base_action(group, &lifted)?)
            } else {
                (SetupKind::Amalgam, canonical_base_action(group, &sigma)?)
            };
            let ctx = EquivCtx::symmetric(base.action(), &sigma);
            let alpha = LazyAutomorphism::identity_on(base.backend(), Some(ctx));
            return Ok(Setup { kind, base, sigma: sigma.clone(), sigma_theta: sigma, alpha, budget });
        }
        if let Some(h) = group.as_hnn() {
            let order = h.sigma().order();
            let sigma: Vec<Elem> = (0..order).map(|s| h.lift_sigma(s)).collect();
            let sigma_theta: Vec<Elem> = (0..order).map(|s| h.lift_theta(s)).collect();
            let base = canonical_base_action(group, &sigma)?;
            let pairs = sigma.iter().cloned().zip(sigma_theta.iter().cloned()).collect();
            let ctx = EquivCtx::twisted(base.action(), pairs);
            let alpha = LazyAutomorphism::identity_on(base.backend(), Some(ctx));
            return Ok(Setup { kind: SetupKind::Hnn, base, sigma, sigma_theta, alpha, budget });
        }
        Err(Error::InvalidInput(format!("{} is neither an amalgam nor an HNN extension", group.name())))
    }

    pub fn kind(&self) -> SetupKind {
        self.kind
    }

    pub fn group(&self) -> &Group {
        self.base.group()
    }

    pub fn base(&self) -> &LimitAction {
        &self.base
    }

    pub fn backend(&self) -> &Backend {
        self.base.backend()
    }

    /// Σ as elements of Γ, identity first.
    pub fn sigma(&self) -> &[Elem] {
        &self.sigma
    }

    /// θ(Σ) for HNN extensions, Σ again for amalgams.
    pub fn sigma_theta(&self) -> &[Elem] {
        &self.sigma_theta
    }

    pub fn alpha(&self) -> &LazyAutomorphism {
        &self.alpha
    }

    pub fn alpha_mut(&mut self) -> &mut LazyAutomorphism {
        &mut self.alpha
    }

    pub(crate) fn amalgam(&self) -> Option<&Amalgam> {
        self.group().as_amalgam()
    }

    pub(crate) fn hnn(&self) -> Option<&Hnn> {
        self.group().as_hnn()
    }

    pub(crate) fn act(&self, g: &Elem, x: &VertexTerm) -> VertexTerm {
        self.base.action().act_valid(g, x)
    }

    fn alpha_fwd(&mut self, mode: &Eval, x: &VertexTerm) -> Result<VertexTerm> {
        match mode {
            Eval::Query => self.alpha.query(x),
            Eval::Committed => {
                self.alpha.get(x).cloned().ok_or_else(|| Error::VerificationFailed(format!("α is not committed at {x}")))
            }
        }
    }

    fn alpha_inv(&mut self, mode: &Eval, y: &VertexTerm) -> Result<VertexTerm> {
        match mode {
            Eval::Query => self.alpha.query_inv(y),
            Eval::Committed => self
                .alpha
                .get_inv(y)
                .cloned()
                .ok_or_else(|| Error::VerificationFailed(format!("α⁻¹ is not committed at {y}"))),
        }
    }

    /// π_α(g)x, evaluating the normal form of g from the right.
    pub fn pi_alpha_apply(&mut self, g: &Elem, x: &VertexTerm, mode: Eval) -> Result<VertexTerm> {
        if !self.group().contains(g) {
            return Err(Error::NotReduced(format!("{g} is not a normal form of {}", self.group().name())));
        }
        self.backend().validate(x)?;
        let group = self.group().clone();
        let mut y = x.clone();
        match g {
            Elem::Amal(syl, s) => {
                let am = group.as_amalgam().unwrap();
                y = self.act(&am.lift_sigma(*s), &y);
                for (j, t) in syl.iter().rev() {
                    let lifted = am.lift(*j, t);
                    y = if *j == 1 {
                        self.act(&lifted, &y)
                    } else {
                        let ay = self.alpha_fwd(&mode, &y)?;
                        let moved = self.act(&lifted, &ay);
                        self.alpha_inv(&mode, &moved)?
                    };
                }
            }
            Elem::Hnn(h0, tail) => {
                let hnn = group.as_hnn().unwrap();
                for (eps, r) in tail.iter().rev() {
                    y = self.act(&hnn.lift(r), &y);
                    y = if *eps > 0 { self.alpha_fwd(&mode, &y)? } else { self.alpha_inv(&mode, &y)? };
                }
                y = self.act(&hnn.lift(h0), &y);
            }
            _ => unreachable!("setups only hold amalgams and HNN extensions"),
        }
        Ok(y)
    }

    /// Committed domain, which is Σ-invariant.
    pub fn support(&self) -> usize {
        self.alpha.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{FiniteTable, GroupKind};
    use proptest::prelude::*;

    pub(crate) fn zz() -> Group {
        Group::new("Z*Z", GroupKind::Amalgam(Amalgam::free_product(Group::integers(), Group::integers())))
    }

    #[test]
    fn first_factor_acts_through_the_base_action() {
        let g = zz();
        let mut st = Setup::new(&g, 200).unwrap();
        let a = st.amalgam().unwrap().lift(1, &Elem::Int(2));
        let x = st.backend().nth(3).unwrap();
        let want = st.act(&a, &x);
        assert_eq!(st.pi_alpha_apply(&a, &x, Eval::Query).unwrap(), want);
        assert!(st.alpha().is_empty());
    }

    #[test]
    fn stable_letter_is_alpha() {
        let h = Hnn::new(Group::integers(), FiniteTable::trivial(), vec![Elem::Int(0)], vec![Elem::Int(0)]).unwrap();
        let g = Group::new("HNN(Z,1)", GroupKind::Hnn(h.clone()));
        let mut st = Setup::new(&g, 200).unwrap();
        let x = st.backend().nth(5).unwrap();
        let y = st.pi_alpha_apply(&h.stable(1), &x, Eval::Query).unwrap();
        assert_eq!(st.alpha_mut().query(&x).unwrap(), y);
        assert_eq!(st.pi_alpha_apply(&h.stable(-1), &y, Eval::Committed).unwrap(), x);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn pi_alpha_is_a_homomorphism(i in 0usize..60, j in 0usize..60, v in 0usize..12) {
            let g = zz();
            let mut st = Setup::new(&g, 200).unwrap();
            let a = g.element(i).unwrap();
            let b = g.element(j).unwrap();
            let x = st.backend().nth(v).unwrap();
            let bx = st.pi_alpha_apply(&b, &x, Eval::Query).unwrap();
            let abx = st.pi_alpha_apply(&a, &bx, Eval::Query).unwrap();
            let ab = g.mul(&a, &b);
            prop_assert_eq!(st.pi_alpha_apply(&ab, &x, Eval::Query).unwrap(), abx);
            let binv = g.inv(&b);
            prop_assert_eq!(st.pi_alpha_apply(&binv, &bx, Eval::Query).unwrap(), x);
        }
    }
}

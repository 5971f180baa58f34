//! Requirement enumeration, certificates and the scheduler.

use std::collections::VecDeque;

use itertools::Itertools;
use serde_json::{json, Value};

use super::setup::{Eval, Setup};
use crate::backend::Backend;
use crate::error::{Error, Result};
use crate::graph::PartialIso;
use crate::group::Elem;
use crate::term::VertexTerm;

#[derive(Clone, Debug, PartialEq)]
pub enum Requirement {
    Homogeneity(PartialIso),
    Faithfulness(Elem),
}

#[derive(Clone, Debug, PartialEq)]
pub enum CertWitness {
    Element(Elem),
    Vertex(VertexTerm),
}

/// One discharged requirement with the equalities that were checked.
#[derive(Clone, Debug)]
pub struct Certificate {
    pub step: usize,
    pub requirement: Requirement,
    pub witness: CertWitness,
    pub checked: Vec<String>,
    pub support: usize,
}

impl Certificate {
    pub fn to_json(&self) -> Value {
        let (kind, req) = match &self.requirement {
            Requirement::Homogeneity(phi) => (
                "homogeneity",
                Value::Array(phi.pairs().map(|(x, y)| json!([x.to_string(), y.to_string()])).collect()),
            ),
            Requirement::Faithfulness(g) => ("faithfulness", Value::String(g.to_string())),
        };
        let witness = match &self.witness {
            CertWitness::Element(g) => json!({"element": g.to_string()}),
            CertWitness::Vertex(x) => json!({"vertex": x.to_string()}),
        };
        json!({
            "step": self.step,
            "requirement": {"kind": kind, "value": req},
            "witness": witness,
            "checked": self.checked,
            "support": self.support,
        })
    }
}

/// Re-evaluates a certificate against the committed part of α only.
pub fn verify_certificate(setup: &mut Setup, cert: &Certificate) -> Result<()> {
    match (&cert.requirement, &cert.witness) {
        (Requirement::Homogeneity(phi), CertWitness::Element(g)) => {
            for (x, y) in phi.to_pairs() {
                let got = setup.pi_alpha_apply(g, &x, Eval::Committed)?;
                if got != y {
                    return Err(Error::VerificationFailed(format!("step {}: π_α(g){x} = {got} ≠ {y}", cert.step)));
                }
            }
            Ok(())
        }
        (Requirement::Faithfulness(g), CertWitness::Vertex(x)) => {
            if setup.pi_alpha_apply(g, x, Eval::Committed)? == *x {
                return Err(Error::VerificationFailed(format!("step {}: π_α(g) fixes {x}", cert.step)));
            }
            Ok(())
        }
        _ => Err(Error::VerificationFailed(format!("step {}: witness does not match requirement", cert.step))),
    }
}

/// Partial isomorphisms between enumerated vertices, ordered by largest
/// index used, then size, then the index tuples.
pub struct PhiEnumerator {
    backend: Backend,
    max_size: usize,
    top: usize,
    queue: VecDeque<PartialIso>,
}

impl PhiEnumerator {
    pub fn new(backend: &Backend, max_size: usize) -> PhiEnumerator {
        PhiEnumerator { backend: backend.clone(), max_size: max_size.max(1), top: 0, queue: VecDeque::new() }
    }

    fn fill(&mut self) -> Result<()> {
        while self.queue.is_empty() {
            let k = self.top;
            self.top += 1;
            let vs = self.backend.enumerate(k + 1)?;
            for size in 1..=self.max_size.min(k + 1) {
                for dom in (0..=k).combinations(size) {
                    for ran in (0..=k).permutations(size) {
                        if !dom.contains(&k) && !ran.contains(&k) {
                            continue;
                        }
                        let pairs: Vec<(VertexTerm, VertexTerm)> =
                            dom.iter().zip(&ran).map(|(i, j)| (vs[*i].clone(), vs[*j].clone())).collect();
                        let ok = pairs.iter().tuple_combinations().all(|((a, b), (c, d))| {
                            self.backend.adj(a, c) == self.backend.adj(b, d)
                        });
                        if ok {
                            self.queue.push_back(PartialIso::from_pairs_unchecked(pairs));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn next_phi(&mut self) -> Result<PartialIso> {
        self.fill()?;
        Ok(self.queue.pop_front().unwrap())
    }
}

#[derive(Clone, Debug)]
pub struct SchedulerOptions {
    pub max_phi_size: usize,
    /// Skip this many homogeneity requirements before the first step.
    pub phi_offset: usize,
}

impl Default for SchedulerOptions {
    fn default() -> Self {
        SchedulerOptions { max_phi_size: 3, phi_offset: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct SchedulerRun {
    pub certificates: Vec<Certificate>,
    /// Why the run stopped early, if it did.
    pub aborted: Option<Error>,
}

/// Alternates homogeneity (even steps) and faithfulness (odd steps)
/// requirements, each discharged against the current committed support.
pub fn run_scheduler(setup: &mut Setup, n_steps: usize, opts: &SchedulerOptions) -> SchedulerRun {
    let mut phis = PhiEnumerator::new(setup.backend(), opts.max_phi_size);
    let mut certificates = Vec::new();
    let group = setup.group().clone();
    let mut next_elem = 1usize;
    let mut skipped = 0;
    for step in 0..n_steps {
        let res = if step % 2 == 0 {
            (|| {
                let mut phi = phis.next_phi()?;
                while skipped < opts.phi_offset {
                    phi = phis.next_phi()?;
                    skipped += 1;
                }
                let g = setup.density_step_homogeneous(&phi, &[])?;
                let checked = phi.pairs().map(|(x, y)| format!("π_α({g}){x} = {y}")).collect();
                Ok((Requirement::Homogeneity(phi), CertWitness::Element(g), checked))
            })()
        } else {
            (|| {
                let g = group
                    .element(next_elem)
                    .ok_or_else(|| Error::NotFound("no more nontrivial elements".into()))?;
                next_elem += 1;
                let x = setup.density_step_faithful(&g, &[])?;
                let gx = setup.pi_alpha_apply(&g, &x, Eval::Committed)?;
                Ok((Requirement::Faithfulness(g.clone()), CertWitness::Vertex(x.clone()), vec![format!("π_α({g}){x} = {gx} ≠ {x}")]))
            })()
        };
        match res {
            Ok((requirement, witness, checked)) => certificates.push(Certificate {
                step,
                requirement,
                witness,
                checked,
                support: setup.support(),
            }),
            Err(e) => return SchedulerRun { certificates, aborted: Some(e) },
        }
    }
    SchedulerRun { certificates, aborted: None }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{Amalgam, Group, GroupKind};

    #[test]
    fn zero_steps_no_certificates() {
        let g = Group::new("Z*Z", GroupKind::Amalgam(Amalgam::free_product(Group::integers(), Group::integers())));
        let mut st = Setup::new(&g, 200).unwrap();
        let run = run_scheduler(&mut st, 0, &SchedulerOptions::default());
        assert!(run.certificates.is_empty() && run.aborted.is_none());
    }

    #[test]
    fn bit_enumeration_starts_small() {
        let mut e = PhiEnumerator::new(&Backend::bit(), 2);
        let first = e.next_phi().unwrap();
        assert_eq!(first.to_pairs(), vec![(VertexTerm::nat(0), VertexTerm::nat(0))]);
        // k = 1: {0↦1}, {1↦0}, {1↦1}, then size two
        let next: Vec<String> = (0..3).map(|_| format!("{:?}", e.next_phi().unwrap().to_pairs())).collect();
        assert_eq!(next.len(), 3);
    }

    #[test]
    fn certificates_survive_later_steps() {
        let g = Group::new("Z*Z", GroupKind::Amalgam(Amalgam::free_product(Group::integers(), Group::integers())));
        let mut st = Setup::new(&g, 200).unwrap();
        let run = run_scheduler(&mut st, 6, &SchedulerOptions::default());
        assert!(run.aborted.is_none(), "{:?}", run.aborted);
        assert_eq!(run.certificates.len(), 6);
        for c in &run.certificates {
            verify_certificate(&mut st, c).unwrap();
        }
    }
}

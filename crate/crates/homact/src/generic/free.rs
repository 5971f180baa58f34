//! Elementary extensions, treezations, Schreier windows and the
//! homogeneity step for k-tuples of automorphisms.
//!
//! Words are `Vec<i32>` with letter `±j` for a_j^{±1} (j ≥ 1) and act from
//! the right, so `β(w)x` applies the last letter first.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use serde::Serialize;
use serde_json::{json, Value};

use super::scheduler::{CertWitness, Certificate, PhiEnumerator, Requirement};
use crate::action::Action;
use crate::automorphism::{extend_to_automorphism, LazyAutomorphism};
use crate::backend::{Backend, VertexPool};
use crate::error::{Error, Result};
use crate::extension::canonical_base_action;
use crate::graph::PartialIso;
use crate::group::{Elem, Group};
use crate::term::VertexTerm;

pub fn reduce_word(w: &[i32]) -> Vec<i32> {
    let mut out: Vec<i32> = Vec::with_capacity(w.len());
    for &l in w {
        if out.last() == Some(&-l) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    out
}

pub fn inverse_word(w: &[i32]) -> Vec<i32> {
    w.iter().rev().map(|l| -l).collect()
}

pub fn is_reduced(w: &[i32]) -> bool {
    w.iter().all(|l| *l != 0) && w.windows(2).all(|p| p[0] != -p[1])
}

pub fn is_cyclically_reduced(w: &[i32]) -> bool {
    is_reduced(w) && (w.len() < 2 || w[0] != -w[w.len() - 1])
}

pub fn show_word(w: &[i32]) -> String {
    if w.is_empty() {
        return "1".into();
    }
    w.chunk_by(|a, b| a == b)
        .map(|run| {
            let (l, n) = (run[0], run.len() as i64);
            let p = if l > 0 { n } else { -n };
            if p == 1 {
                format!("a{}", l.abs())
            } else {
                format!("a{}^{p}", l.abs())
            }
        })
        .collect::<Vec<_>>()
        .join(".")
}

/// Reduced words of length n over a_1…a_k in length-lex order with
/// a_1 < a_1⁻¹ < a_2 < ….
pub fn reduced_words(k: usize, n: usize) -> Vec<Vec<i32>> {
    let letters: Vec<i32> = (1..=k as i32).flat_map(|j| [j, -j]).collect();
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        let mut next = Vec::new();
        for w in &out {
            for &l in &letters {
                if w.last() != Some(&-l) {
                    let mut v: Vec<i32> = w.clone();
                    v.push(l);
                    next.push(v);
                }
            }
        }
        out = next;
    }
    out
}

/// A partial isomorphism with indexed domain and range.
#[derive(Clone, Default)]
struct Pim {
    map: PartialIso,
    dom: VertexPool,
    ran: VertexPool,
}

impl Pim {
    fn from_iso(p: &PartialIso) -> Pim {
        let mut out = Pim::default();
        for (x, y) in p.pairs() {
            out.insert(x.clone(), y.clone());
        }
        out
    }

    fn insert(&mut self, x: VertexTerm, y: VertexTerm) {
        self.dom.insert(x.clone());
        self.ran.insert(y.clone());
        self.map.insert(x, y);
    }
}

struct ExtPieces {
    xs: Vec<VertexTerm>,
    ys: Vec<VertexTerm>,
    us: Vec<VertexTerm>,
    vs: Vec<VertexTerm>,
}

/// The u's then the y's of an elementary extension of γ, where `k` is the
/// pool K (it must contain d(γ) and r(γ)).
fn extend_core(g: &Pim, k: &VertexPool, backend: &Backend) -> Result<ExtPieces> {
    let mut xs: Vec<VertexTerm> = k.items().iter().filter(|x| !g.dom.contains(x)).cloned().collect();
    let mut vs: Vec<VertexTerm> = k.items().iter().filter(|x| !g.ran.contains(x)).cloned().collect();
    xs.sort();
    vs.sort();
    let mut pool = k.clone();

    let vpool: VertexPool = vs.iter().cloned().collect();
    let vidx: HashMap<&VertexTerm, usize> = vs.iter().enumerate().map(|(i, v)| (v, i)).collect();
    let mut us: Vec<VertexTerm> = Vec::with_capacity(vs.len());
    for (j, v) in vs.iter().enumerate() {
        let mut want: Vec<VertexTerm> =
            g.ran.neighbors(backend, v).iter().map(|y| g.map.get_inv(y).unwrap().clone()).collect();
        for w in vpool.neighbors(backend, v) {
            let jp = vidx[&w];
            if jp < j {
                want.push(us[jp].clone());
            }
        }
        let u = backend.witness_in_pool(&want, &pool, &[])?;
        pool.insert(u.clone());
        us.push(u);
    }

    let xpool: VertexPool = xs.iter().cloned().collect();
    let xidx: HashMap<&VertexTerm, usize> = xs.iter().enumerate().map(|(i, x)| (x, i)).collect();
    let mut ys: Vec<VertexTerm> = Vec::with_capacity(xs.len());
    for (i, x) in xs.iter().enumerate() {
        let mut want: Vec<VertexTerm> =
            g.dom.neighbors(backend, x).iter().map(|u| g.map.get(u).unwrap().clone()).collect();
        for w in xpool.neighbors(backend, x) {
            let ip = xidx[&w];
            if ip < i {
                want.push(ys[ip].clone());
            }
        }
        let y = backend.witness_in_pool(&want, &pool, &[])?;
        pool.insert(y.clone());
        ys.push(y);
    }
    Ok(ExtPieces { xs, ys, us, vs })
}

/// The elementary extension of (γ, Φ, F) with least witnesses.
pub fn elementary_extension(
    gamma: &PartialIso,
    phis: &[PartialIso],
    f: &[VertexTerm],
    backend: &Backend,
) -> Result<PartialIso> {
    if !phis.contains(gamma) {
        return Err(Error::InvalidInput("γ is not a member of Φ".into()));
    }
    for p in phis {
        if let (false, v) = p.validate(backend) {
            return Err(Error::InvalidPartialIso(v.map(|v| v.to_string()).unwrap_or_default()));
        }
    }
    for x in f {
        backend.validate(x)?;
    }
    let k: VertexPool =
        f.iter().cloned().chain(phis.iter().flat_map(|p| p.domain().chain(p.range()).cloned())).collect();
    let e = extend_core(&Pim::from_iso(gamma), &k, backend)?;
    let mut out = gamma.clone();
    for (x, y) in e.xs.into_iter().zip(e.ys) {
        out.insert(x, y);
    }
    for (u, v) in e.us.into_iter().zip(e.vs) {
        out.insert(u, v);
    }
    Ok(out)
}

/// Checks properties (1)-(4) of the elementary extension of (γ, Φ, F) and
/// describes every failure.  (4) is checked on the orbit of `a`.
pub fn elementary_extension_violations(
    gamma: &PartialIso,
    phis: &[PartialIso],
    f: &[VertexTerm],
    a: &[VertexTerm],
    backend: &Backend,
) -> Result<Vec<String>> {
    let gt = elementary_extension(gamma, phis, f, backend)?;
    let mut bad = Vec::new();
    if let (false, v) = gt.validate(backend) {
        bad.push(format!("(1) γ̃ is not a partial isomorphism: {}", v.map(|v| v.to_string()).unwrap_or_default()));
    }
    for (x, y) in gamma.pairs() {
        if gt.get(x) != Some(y) {
            bad.push(format!("(1) γ̃ does not extend γ at {x}"));
        }
    }
    let kset: BTreeSet<VertexTerm> =
        f.iter().cloned().chain(phis.iter().flat_map(|p| p.domain().chain(p.range()).cloned())).collect();
    for x in &kset {
        if gt.get(x).is_none() || gt.get_inv(x).is_none() {
            bad.push(format!("(2) {x} ∈ K is missing from d(γ̃) or r(γ̃)"));
        }
    }
    let gd: BTreeSet<&VertexTerm> = gamma.domain().collect();
    let gr: BTreeSet<&VertexTerm> = gamma.range().collect();
    let us: Vec<&VertexTerm> = kset.iter().filter(|v| !gr.contains(v)).filter_map(|v| gt.get_inv(v)).collect();
    let ys: Vec<&VertexTerm> = kset.iter().filter(|x| !gd.contains(x)).filter_map(|x| gt.get(x)).collect();
    for u in &us {
        if kset.contains(*u) || ys.contains(u) {
            bad.push(format!("(3) new preimage {u} is not fresh"));
        }
        for y in &ys {
            if backend.adj(u, y) {
                bad.push(format!("(3) new preimage {u} is adjacent to new image {y}"));
            }
        }
    }
    for y in &ys {
        if kset.contains(*y) {
            bad.push(format!("(3) new image {y} lies in K"));
        }
    }
    let phis_t: Vec<PartialIso> = phis.iter().map(|p| if p == gamma { gt.clone() } else { p.clone() }).collect();
    for (x, y) in orbit_edge_violations(&gt, phis, &phis_t, a, backend) {
        bad.push(format!("(4) edge ({x},{y}) of the new orbit is not carried from the old one"));
    }
    Ok(bad)
}

/// Orbit of `a` under the groupoid generated by `phis` (identities on `a`
/// included).
pub fn groupoid_orbit(phis: &[PartialIso], a: &[VertexTerm]) -> BTreeSet<VertexTerm> {
    let mut seen: BTreeSet<VertexTerm> = a.iter().cloned().collect();
    let mut queue: VecDeque<VertexTerm> = a.iter().cloned().collect();
    while let Some(x) = queue.pop_front() {
        for p in phis {
            for y in [p.get(&x), p.get_inv(&x)].into_iter().flatten() {
                if seen.insert(y.clone()) {
                    queue.push_back(y.clone());
                }
            }
        }
    }
    seen
}

/// Edges of Ω̃ not inside Ω that are not γ̃^{±1}-images of edges of Ω.
pub fn orbit_edge_violations(
    gamma_t: &PartialIso,
    phis: &[PartialIso],
    phis_t: &[PartialIso],
    a: &[VertexTerm],
    backend: &Backend,
) -> Vec<(VertexTerm, VertexTerm)> {
    let om = groupoid_orbit(phis, a);
    let omt = groupoid_orbit(phis_t, a);
    let items: Vec<&VertexTerm> = omt.iter().collect();
    let mut bad = Vec::new();
    for (i, x) in items.iter().enumerate() {
        for y in &items[i + 1..] {
            if (om.contains(*x) && om.contains(*y)) || !backend.adj(x, y) {
                continue;
            }
            let back = |p: Option<&VertexTerm>, q: Option<&VertexTerm>| match (p, q) {
                (Some(p), Some(q)) => om.contains(p) && om.contains(q),
                _ => false,
            };
            let ok = back(gamma_t.get_inv(x), gamma_t.get_inv(y)) || back(gamma_t.get(x), gamma_t.get(y));
            if !ok {
                bad.push(((*x).clone(), (*y).clone()));
            }
        }
    }
    bad
}

#[derive(Clone)]
enum Gens {
    Action { action: Action, elems: Vec<Elem>, inverses: Vec<Elem> },
    Lazy(Vec<LazyAutomorphism>),
    Stepped(Box<Omega>),
}

/// A k-tuple ᾱ of automorphisms over one backend.
#[derive(Clone)]
pub struct FreeTupleSetup {
    backend: Backend,
    k: usize,
    gens: Gens,
}

impl std::fmt::Debug for FreeTupleSetup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FreeTupleSetup(k={} on {})", self.k, self.backend.describe())
    }
}

const ORBIT_DEPTH: usize = 4;
const ORBIT_CAP: usize = 64;

impl FreeTupleSetup {
    /// a_j acting by left multiplication on the limit over F_k with l = 1.
    /// Nontrivial elements have no fixed points there, so every orbit is
    /// infinite.
    pub fn canonical(k: usize) -> Result<FreeTupleSetup> {
        let g = Group::free(k as u32);
        let la = canonical_base_action(&g, &[])?;
        let elems = (1..=k as i32).map(|j| Elem::Word(vec![j])).collect();
        FreeTupleSetup::from_action(la.action().clone(), elems)
    }

    pub fn from_action(action: Action, elems: Vec<Elem>) -> Result<FreeTupleSetup> {
        if elems.len() < 2 {
            return Err(Error::InvalidInput("need k ≥ 2".into()));
        }
        for e in &elems {
            if !action.group().contains(e) {
                return Err(Error::InvalidLetter(format!("{e} is not an element of {}", action.group().name())));
            }
        }
        let inverses = elems.iter().map(|e| action.group().inv(e)).collect();
        Ok(FreeTupleSetup {
            backend: action.backend().clone(),
            k: elems.len(),
            gens: Gens::Action { action, elems, inverses },
        })
    }

    pub fn from_automorphisms(alphas: Vec<LazyAutomorphism>) -> Result<FreeTupleSetup> {
        if alphas.len() < 2 {
            return Err(Error::InvalidInput("need k ≥ 2".into()));
        }
        let backend = alphas[0].backend().clone();
        if alphas.iter().any(|a| a.backend() != &backend) {
            return Err(Error::InvalidInput("the automorphisms live on different backends".into()));
        }
        Ok(FreeTupleSetup { backend, k: alphas.len(), gens: Gens::Lazy(alphas) })
    }

    /// The tuple ω̄ produced by a step.
    pub fn from_step(omega: Omega) -> FreeTupleSetup {
        FreeTupleSetup { backend: omega.tz.backend.clone(), k: omega.tz.k(), gens: Gens::Stepped(Box::new(omega)) }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    /// α_{j+1}^{eps}(x) with zero-based `j`.
    pub fn apply(&mut self, j: usize, eps: i8, x: &VertexTerm) -> Result<VertexTerm> {
        if j >= self.k {
            return Err(Error::InvalidLetter(format!("a{} with k = {}", j + 1, self.k)));
        }
        match &mut self.gens {
            Gens::Action { action, elems, inverses } => action.act(if eps > 0 { &elems[j] } else { &inverses[j] }, x),
            Gens::Lazy(a) => {
                if eps > 0 {
                    a[j].query(x)
                } else {
                    a[j].query_inv(x)
                }
            }
            Gens::Stepped(o) => o.apply(j, eps, x),
        }
    }

    pub fn apply_word(&mut self, w: &[i32], x: &VertexTerm) -> Result<VertexTerm> {
        let mut y = x.clone();
        for &l in w.iter().rev() {
            y = self.apply(l.unsigned_abs() as usize - 1, l.signum() as i8, &y)?;
        }
        Ok(y)
    }

    /// Window surrogate for "every orbit is infinite": breadth-first levels
    /// of each orbit keep adding vertices until `depth` or a size cap.
    pub fn check_orbits(&mut self, window: &[VertexTerm], depth: usize) -> Result<()> {
        for x in window {
            let mut seen: HashSet<VertexTerm> = HashSet::from([x.clone()]);
            let mut level = vec![x.clone()];
            for _ in 0..depth {
                if seen.len() >= ORBIT_CAP {
                    break;
                }
                let mut next = Vec::new();
                for y in &level {
                    for j in 0..self.k {
                        for eps in [1, -1] {
                            let z = self.apply(j, eps, y)?;
                            if seen.insert(z.clone()) {
                                next.push(z);
                            }
                        }
                    }
                }
                if next.is_empty() {
                    return Err(Error::InvalidInput(format!("the orbit of {x} is finite ({} vertices)", seen.len())));
                }
                level = next;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TreeMode {
    /// Round-robin elementary extensions against the enumeration z₀, z₁, ….
    RoundRobin,
    /// One-point extensions on demand: an undefined β_j^{±1}(x) becomes a
    /// fresh vertex adjacent, inside everything seen so far, exactly to the
    /// images forced by β_j.
    Lazy,
}

#[derive(Clone, Debug, Serialize)]
pub struct RoundLog {
    pub round: usize,
    /// One-based index j(l).
    pub generator: usize,
    pub z: String,
    pub added: usize,
    pub universe: usize,
}

/// A treezation β̄ of ᾱ relative to F, grown as queries need it.
#[derive(Clone)]
pub struct Treezation {
    backend: Backend,
    mode: TreeMode,
    f: Vec<VertexTerm>,
    f_tilde: BTreeSet<VertexTerm>,
    betas: Vec<Pim>,
    universe: VertexPool,
    rounds: usize,
    log: Vec<RoundLog>,
    /// Largest number of vertices the β's may touch.
    pub budget: usize,
}

impl std::fmt::Debug for Treezation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Treezation({:?}, |F̃|={}, {} vertices, {} rounds)", self.mode, self.f_tilde.len(), self.universe.len(), self.rounds)
    }
}

impl Treezation {
    pub fn new(setup: &mut FreeTupleSetup, f: &[VertexTerm], mode: TreeMode, budget: usize) -> Result<Treezation> {
        for x in f {
            setup.backend.validate(x)?;
        }
        setup.check_orbits(f, ORBIT_DEPTH)?;
        let mut betas = vec![Pim::default(); setup.k];
        let mut f_tilde = BTreeSet::new();
        for (j, b) in betas.iter_mut().enumerate() {
            for x in f {
                let pre = setup.apply(j, -1, x)?;
                let img = setup.apply(j, 1, x)?;
                if b.map.get(&pre).is_none() {
                    b.insert(pre.clone(), x.clone());
                }
                if b.map.get(x).is_none() {
                    b.insert(x.clone(), img.clone());
                }
                f_tilde.extend([pre, x.clone(), img]);
            }
        }
        let universe = f_tilde.iter().cloned().collect();
        Ok(Treezation {
            backend: setup.backend.clone(),
            mode,
            f: f.to_vec(),
            f_tilde,
            betas,
            universe,
            rounds: 0,
            log: Vec::new(),
            budget,
        })
    }

    pub fn k(&self) -> usize {
        self.betas.len()
    }

    pub fn mode(&self) -> TreeMode {
        self.mode
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn f(&self) -> &[VertexTerm] {
        &self.f
    }

    pub fn f_tilde(&self) -> &BTreeSet<VertexTerm> {
        &self.f_tilde
    }

    /// β_{l,j} for the current l (zero-based j).
    pub fn beta(&self, j: usize) -> &PartialIso {
        &self.betas[j].map
    }

    pub fn universe_len(&self) -> usize {
        self.universe.len()
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn log(&self) -> &[RoundLog] {
        &self.log
    }

    fn check_budget(&self) -> Result<()> {
        if self.universe.len() > self.budget {
            return Err(Error::BudgetExhausted(format!(
                "treezation touched {} vertices after {} rounds (budget {})",
                self.universe.len(),
                self.rounds,
                self.budget
            )));
        }
        Ok(())
    }

    /// One round: β_{l+1,j(l)} is the elementary extension of
    /// (β_{l,j(l)}, {β_{l,1},…,β_{l,k}}, {z_l}).
    pub fn round(&mut self) -> Result<()> {
        self.check_budget()?;
        let l = self.rounds;
        let j = l % self.k();
        let z = self.backend.nth(l)?;
        let mut kp = self.universe.clone();
        kp.insert(z.clone());
        let e = extend_core(&self.betas[j], &kp, &self.backend)?;
        let added = e.us.len() + e.ys.len();
        self.universe.insert(z.clone());
        for (x, y) in e.xs.into_iter().zip(e.ys) {
            self.universe.insert(y.clone());
            self.betas[j].insert(x, y);
        }
        for (u, v) in e.us.into_iter().zip(e.vs) {
            self.universe.insert(u.clone());
            self.betas[j].insert(u, v);
        }
        self.rounds += 1;
        self.log.push(RoundLog { round: l, generator: j + 1, z: z.to_string(), added, universe: self.universe.len() });
        Ok(())
    }

    pub fn run_rounds(&mut self, n: usize) -> Result<()> {
        for _ in 0..n {
            self.round()?;
        }
        Ok(())
    }

    fn lazy_point(&mut self, j: usize, eps: i8, x: &VertexTerm) -> Result<()> {
        self.check_budget()?;
        if !self.universe.contains(x) {
            self.backend.validate(x)?;
            self.universe.insert(x.clone());
        }
        let b = &self.betas[j];
        if eps > 0 {
            let want: Vec<VertexTerm> =
                b.dom.neighbors(&self.backend, x).iter().map(|u| b.map.get(u).unwrap().clone()).collect();
            let y = self.backend.witness_in_pool(&want, &self.universe, &[])?;
            self.universe.insert(y.clone());
            self.betas[j].insert(x.clone(), y);
        } else {
            let want: Vec<VertexTerm> =
                b.ran.neighbors(&self.backend, x).iter().map(|v| b.map.get_inv(v).unwrap().clone()).collect();
            let w = self.backend.witness_in_pool(&want, &self.universe, &[])?;
            self.universe.insert(w.clone());
            self.betas[j].insert(w, x.clone());
        }
        Ok(())
    }

    /// β_{j+1}^{eps}(x), zero-based `j`.
    pub fn apply(&mut self, j: usize, eps: i8, x: &VertexTerm) -> Result<VertexTerm> {
        if j >= self.k() {
            return Err(Error::InvalidLetter(format!("a{} with k = {}", j + 1, self.k())));
        }
        loop {
            let b = &self.betas[j].map;
            if let Some(y) = if eps > 0 { b.get(x) } else { b.get_inv(x) } {
                return Ok(y.clone());
            }
            match self.mode {
                TreeMode::Lazy => self.lazy_point(j, eps, x)?,
                TreeMode::RoundRobin => self.round()?,
            }
        }
    }

    pub fn apply_word(&mut self, w: &[i32], x: &VertexTerm) -> Result<VertexTerm> {
        Ok(self.trajectory(w, x)?.pop().unwrap())
    }

    /// x, then the images under the suffixes of w, shortest first.
    pub fn trajectory(&mut self, w: &[i32], x: &VertexTerm) -> Result<Vec<VertexTerm>> {
        let mut out = vec![x.clone()];
        for &l in w.iter().rev() {
            let y = self.apply(l.unsigned_abs() as usize - 1, l.signum() as i8, out.last().unwrap())?;
            out.push(y);
        }
        Ok(out)
    }

    /// Schreier edges known so far, as an undirected adjacency list.
    fn known_graph(&self) -> HashMap<VertexTerm, Vec<VertexTerm>> {
        let mut adj: HashMap<VertexTerm, Vec<VertexTerm>> = HashMap::new();
        for b in &self.betas {
            for (x, y) in b.map.pairs() {
                if x != y {
                    adj.entry(x.clone()).or_default().push(y.clone());
                    adj.entry(y.clone()).or_default().push(x.clone());
                }
            }
        }
        adj
    }

    /// Largest finite distance between points of `set` using the Schreier
    /// edges known so far, and whether some pair was unreachable.  Known
    /// edges are a subgraph, so this bounds the true diameter from above.
    pub fn known_diameter(&self, set: &BTreeSet<VertexTerm>) -> (usize, bool) {
        let adj = self.known_graph();
        let mut diam = 0;
        let mut unreachable = false;
        for s in set {
            let mut dist: HashMap<&VertexTerm, usize> = HashMap::from([(s, 0)]);
            let mut queue = VecDeque::from([s]);
            let mut found = 1;
            while let Some(x) = queue.pop_front() {
                if found == set.len() {
                    break;
                }
                let d = dist[x];
                for y in adj.get(x).map(|v| v.as_slice()).unwrap_or(&[]) {
                    if !dist.contains_key(y) {
                        dist.insert(y, d + 1);
                        if set.contains(y) {
                            found += 1;
                            diam = diam.max(d + 1);
                        }
                        queue.push_back(y);
                    }
                }
            }
            if found < set.len() {
                unreachable = true;
            }
        }
        (diam, unreachable)
    }

    /// Exact distances to F̃ for every vertex within `radius` of it.
    pub fn f_tilde_distances(&mut self, radius: usize) -> Result<HashMap<VertexTerm, usize>> {
        let mut dist: HashMap<VertexTerm, usize> = self.f_tilde.iter().map(|x| (x.clone(), 0)).collect();
        let mut level: Vec<VertexTerm> = self.f_tilde.iter().cloned().collect();
        for d in 1..=radius {
            let mut next = Vec::new();
            for x in &level {
                for j in 0..self.k() {
                    for eps in [1, -1] {
                        let y = self.apply(j, eps, x)?;
                        if !dist.contains_key(&y) {
                            dist.insert(y.clone(), d);
                            next.push(y);
                        }
                    }
                }
            }
            level = next;
        }
        Ok(dist)
    }

    /// Checks d(p_t, F̃) = 1 + d(p_{t-1}, F̃) once the trajectory of x ∈ F̃
    /// under the reduced word w has left F̃.  `dist` must cover radius |w|.
    pub fn geodesic_violation(
        &mut self,
        x: &VertexTerm,
        w: &[i32],
        dist: &HashMap<VertexTerm, usize>,
    ) -> Result<Option<String>> {
        if !is_reduced(w) {
            return Err(Error::NotReduced(show_word(w)));
        }
        let path = self.trajectory(w, x)?;
        let Some(s) = path.iter().position(|p| !self.f_tilde.contains(p)) else {
            return Ok(None);
        };
        for t in s + 1..path.len() {
            let (a, b) = (dist.get(&path[t - 1]), dist.get(&path[t]));
            match (a, b) {
                (Some(a), Some(b)) if *b == a + 1 => {}
                _ => {
                    return Ok(Some(format!(
                        "{} from {x}: step {t} goes from distance {a:?} to {b:?}",
                        show_word(w)
                    )))
                }
            }
        }
        Ok(None)
    }

    /// Some word of length ≤ `max_len` carrying an edge of F̃ onto {x, y}.
    pub fn pullback_edge(&mut self, x: &VertexTerm, y: &VertexTerm, max_len: usize) -> Result<Option<Vec<i32>>> {
        for n in 0..=max_len {
            for w in reduced_words(self.k(), n) {
                let inv = inverse_word(&w);
                let x0 = self.apply_word(&inv, x)?;
                let y0 = self.apply_word(&inv, y)?;
                if self.f_tilde.contains(&x0) && self.f_tilde.contains(&y0) && self.backend.adj(&x0, &y0) {
                    return Ok(Some(w));
                }
            }
        }
        Ok(None)
    }

    /// A vertex moved by β(w) for a reduced w ≠ 1.  Far from F̃ the
    /// Schreier graph is a forest, so a non-backtracking walk never closes
    /// up; the answer is still checked by evaluation.
    pub fn moved_vertex(&mut self, w: &[i32], budget: usize) -> Result<VertexTerm> {
        if w.is_empty() {
            return Err(Error::InvalidInput("the identity moves nothing".into()));
        }
        if !is_reduced(w) {
            return Err(Error::NotReduced(show_word(w)));
        }
        let start = match self.f_tilde.iter().next() {
            Some(x) => x.clone(),
            None => self.backend.nth(0)?,
        };
        // walk away from F̃ along a letter that neither starts nor ends w
        let step = (1..=self.k() as i32)
            .find(|j| w[0].abs() != *j && w[w.len() - 1].abs() != *j)
            .unwrap_or(if w[0].abs() == 1 { 2 } else { 1 });
        for n in (w.len() + 1..).step_by(w.len() + 1).take(budget.max(1)) {
            let x = self.apply_word(&vec![step; n], &start)?;
            if self.apply_word(w, &x)? != x {
                return Ok(x);
            }
        }
        Err(Error::BudgetExhausted(format!("no vertex moved by {} found", show_word(w))))
    }
}

/// A window of the Schreier graph 𝒢_β and its cycle analysis.
#[derive(Clone, Debug)]
pub struct SchreierWindow {
    pub center: VertexTerm,
    pub radius: usize,
    /// Breadth-first order.
    pub vertices: Vec<VertexTerm>,
    pub depth: Vec<usize>,
    /// (x, β_j(x), j) with one-based j: decorated j⁺ from x, j⁻ backwards.
    pub edges: Vec<(usize, usize, usize)>,
    /// Fundamental cycles of the breadth-first tree; every minimal cycle of
    /// the window is a sum of these.
    pub cycles: Vec<Vec<VertexTerm>>,
    /// Vertices lying on some cycle but outside F̃.
    pub off_f_tilde: Vec<VertexTerm>,
}

impl SchreierWindow {
    pub fn cycles_in_f_tilde(&self) -> bool {
        self.off_f_tilde.is_empty()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "center": self.center.to_string(),
            "radius": self.radius,
            "vertices": self.vertices.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
            "edges": self.edges.iter().map(|(a, b, j)| json!([a, b, format!("{j}+")])).collect::<Vec<_>>(),
            "cycles": self.cycles.iter().map(|c| c.iter().map(|v| v.to_string()).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "cycles_in_f_tilde": self.cycles_in_f_tilde(),
        })
    }
}

pub fn schreier_window(tz: &mut Treezation, center: &VertexTerm, radius: usize) -> Result<SchreierWindow> {
    let mut index: HashMap<VertexTerm, usize> = HashMap::from([(center.clone(), 0)]);
    let mut vertices = vec![center.clone()];
    let mut depth = vec![0];
    let mut parent: Vec<Option<usize>> = vec![None];
    let mut raw: Vec<(VertexTerm, VertexTerm, usize)> = Vec::new();
    let mut head = 0;
    while head < vertices.len() {
        let x = vertices[head].clone();
        let d = depth[head];
        for j in 0..tz.k() {
            let fwd = tz.apply(j, 1, &x)?;
            let bwd = tz.apply(j, -1, &x)?;
            raw.push((x.clone(), fwd.clone(), j + 1));
            raw.push((bwd.clone(), x.clone(), j + 1));
            if d < radius {
                for y in [fwd, bwd] {
                    if !index.contains_key(&y) {
                        index.insert(y.clone(), vertices.len());
                        vertices.push(y);
                        depth.push(d + 1);
                        parent.push(Some(head));
                    }
                }
            }
        }
        head += 1;
    }
    let mut edges: BTreeSet<(usize, usize, usize)> = BTreeSet::new();
    for (a, b, j) in raw {
        if let (Some(&ia), Some(&ib)) = (index.get(&a), index.get(&b)) {
            edges.insert((ia, ib, j));
        }
    }
    let mut simple: BTreeSet<(usize, usize)> = BTreeSet::new();
    for &(a, b, _) in &edges {
        if a != b {
            simple.insert((a.min(b), a.max(b)));
        }
    }
    let tree: HashSet<(usize, usize)> =
        parent.iter().enumerate().filter_map(|(c, p)| p.map(|p| (p.min(c), p.max(c)))).collect();
    let to_root = |mut v: usize| {
        let mut path = vec![v];
        while let Some(p) = parent[v] {
            path.push(p);
            v = p;
        }
        path
    };
    let mut cycles = Vec::new();
    let mut on_cycle: BTreeSet<usize> = BTreeSet::new();
    for &(a, b) in &simple {
        if tree.contains(&(a, b)) {
            continue;
        }
        let pa = to_root(a);
        let pb = to_root(b);
        let sa: HashSet<usize> = pa.iter().copied().collect();
        let lca = *pb.iter().find(|v| sa.contains(v)).unwrap();
        let mut cyc: Vec<usize> = pa.iter().copied().take_while(|v| *v != lca).collect();
        cyc.push(lca);
        let back: Vec<usize> = pb.iter().copied().take_while(|v| *v != lca).collect();
        cyc.extend(back.into_iter().rev());
        on_cycle.extend(cyc.iter().copied());
        cycles.push(cyc.into_iter().map(|i| vertices[i].clone()).collect());
    }
    let off_f_tilde = on_cycle.into_iter().map(|i| vertices[i].clone()).filter(|v| !tz.f_tilde.contains(v)).collect();
    Ok(SchreierWindow { center: center.clone(), radius, vertices, depth, edges: edges.into_iter().collect(), cycles, off_f_tilde })
}

/// The least cyclically reduced u (length-lex) with β(u)F̃ ∩ F̃ = ∅ and
/// β(u²)F̃ ∩ F̃ = ∅.
pub fn neumann_witness(tz: &mut Treezation, budget: usize) -> Result<Vec<i32>> {
    let ft: Vec<VertexTerm> = tz.f_tilde.iter().cloned().collect();
    let mut tried = 0usize;
    for n in 1.. {
        for u in reduced_words(tz.k(), n) {
            if !is_cyclically_reduced(&u) {
                continue;
            }
            tried += 1;
            if tried > budget {
                return Err(Error::BudgetExhausted(format!("no Neumann witness among {budget} words")));
            }
            let u2 = [u.as_slice(), u.as_slice()].concat();
            let mut ok = true;
            for x in &ft {
                let (a, b) = (tz.apply_word(&u, x)?, tz.apply_word(&u2, x)?);
                if tz.f_tilde.contains(&a) || tz.f_tilde.contains(&b) {
                    ok = false;
                    break;
                }
            }
            if ok {
                return Ok(u);
            }
        }
    }
    unreachable!()
}

/// ω̄: ω_{i'} extends τ, ω_j = β_j otherwise.
#[derive(Clone)]
pub struct Omega {
    tz: Treezation,
    tau: Option<(usize, LazyAutomorphism)>,
}

impl Omega {
    pub fn treezation(&self) -> &Treezation {
        &self.tz
    }

    /// Zero-based i' and ω_{i'}.
    pub fn replaced(&self) -> Option<(usize, &LazyAutomorphism)> {
        self.tau.as_ref().map(|(i, a)| (*i, a))
    }

    pub fn k(&self) -> usize {
        self.tz.k()
    }

    pub fn apply(&mut self, j: usize, eps: i8, x: &VertexTerm) -> Result<VertexTerm> {
        match &mut self.tau {
            Some((ip, om)) if *ip == j => {
                if eps > 0 {
                    om.query(x)
                } else {
                    om.query_inv(x)
                }
            }
            _ => self.tz.apply(j, eps, x),
        }
    }

    pub fn apply_word(&mut self, w: &[i32], x: &VertexTerm) -> Result<VertexTerm> {
        let mut y = x.clone();
        for &l in w.iter().rev() {
            y = self.apply(l.unsigned_abs() as usize - 1, l.signum() as i8, &y)?;
        }
        Ok(y)
    }
}

#[derive(Clone, Debug)]
pub struct FreeStepOptions {
    pub mode: TreeMode,
    /// Vertex budget of the treezation.
    pub budget: usize,
    /// Words tried by the Neumann search.
    pub neumann_budget: usize,
}

impl Default for FreeStepOptions {
    fn default() -> Self {
        FreeStepOptions { mode: TreeMode::Lazy, budget: 200_000, neumann_budget: 5_000 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FreeStepReport {
    pub w: String,
    pub w_len: usize,
    pub u: String,
    /// One-based indices.
    pub i: usize,
    pub i_prime: usize,
    pub s: usize,
    pub diam: usize,
    /// Some pair of K̃ was not connected by known Schreier edges.
    pub unreachable_pairs: bool,
    pub f_tilde: usize,
    pub k_tilde: usize,
    pub tau: usize,
    pub rounds: usize,
    pub universe: usize,
    pub checked: Vec<String>,
}

pub struct FreeStep {
    pub omega: Omega,
    pub w: Vec<i32>,
    pub report: FreeStepReport,
}

fn check_agreement(setup: &mut FreeTupleSetup, omega: &mut Omega, f: &[VertexTerm], checked: &mut Vec<String>) -> Result<()> {
    for x in f {
        for j in 0..setup.k() {
            for eps in [1i8, -1] {
                let a = setup.apply(j, eps, x)?;
                let o = omega.apply(j, eps, x)?;
                if a != o {
                    return Err(Error::VerificationFailed(format!("ω{}^{eps}({x}) = {o} but α gives {a}", j + 1)));
                }
            }
        }
    }
    checked.push(format!("ω_j^±1 = α_j^±1 on {} vertices of F", f.len()));
    Ok(())
}

/// Finds w and ω̄ with ω(w)|d(φ) = φ and ω_j^{±1} = α_j^{±1} on F.
pub fn free_homogeneity_step(
    setup: &mut FreeTupleSetup,
    phi: &PartialIso,
    f: &[VertexTerm],
    opts: &FreeStepOptions,
) -> Result<FreeStep> {
    let backend = setup.backend().clone();
    if let (false, v) = phi.validate(&backend) {
        return Err(Error::InvalidPartialIso(v.map(|v| v.to_string()).unwrap_or_default()));
    }
    let k = setup.k();
    let fset: BTreeSet<VertexTerm> = f.iter().chain(phi.domain()).chain(phi.range()).cloned().collect();
    let fv: Vec<VertexTerm> = fset.into_iter().collect();
    let mut tz = Treezation::new(setup, &fv, opts.mode, opts.budget)?;
    let mut checked = Vec::new();

    if phi.pairs().all(|(x, y)| x == y) {
        let mut omega = Omega { tz, tau: None };
        check_agreement(setup, &mut omega, &fv, &mut checked)?;
        checked.push("φ is an identity: w = 1".into());
        let report = FreeStepReport {
            w: "1".into(),
            w_len: 0,
            u: "1".into(),
            i: 1,
            i_prime: 2,
            s: 0,
            diam: 0,
            unreachable_pairs: false,
            f_tilde: omega.tz.f_tilde.len(),
            k_tilde: 0,
            tau: 0,
            rounds: omega.tz.rounds,
            universe: omega.tz.universe_len(),
            checked,
        };
        return Ok(FreeStep { omega, w: Vec::new(), report });
    }

    let u = neumann_witness(&mut tz, opts.neumann_budget)?;
    let u2 = [u.as_slice(), u.as_slice()].concat();
    let mut kset = BTreeSet::new();
    for x in tz.f_tilde.clone() {
        kset.extend(tz.trajectory(&u2, &x)?);
    }
    let mut ktilde = kset.clone();
    for x in &kset {
        for j in 0..k {
            ktilde.insert(tz.apply(j, 1, x)?);
            ktilde.insert(tz.apply(j, -1, x)?);
        }
    }
    let (diam, unreachable_pairs) = tz.known_diameter(&ktilde);
    let first = u[0].unsigned_abs() as usize;
    let i = (1..=k).find(|&i| i != first).unwrap();
    let ip = (1..=k).find(|&j| j != i).unwrap();
    let s = 10 * diam + 1;
    let ais = vec![i as i32; s];
    let plus = [ais.as_slice(), &u2].concat();
    let minus = [vec![-(i as i32); s].as_slice(), &u2].concat();

    let mut pairs: BTreeSet<(VertexTerm, VertexTerm)> = BTreeSet::new();
    let mut dom_part = BTreeSet::new();
    let mut ran_part = BTreeSet::new();
    for x in &kset {
        let pre = tz.apply(ip - 1, -1, x)?;
        let img = tz.apply(ip - 1, 1, x)?;
        pairs.insert((pre.clone(), x.clone()));
        pairs.insert((x.clone(), img.clone()));
        dom_part.extend([pre, x.clone()]);
        ran_part.extend([x.clone(), img]);
    }
    let mut a_plus = Vec::new();
    let mut a_minus = Vec::new();
    for (x, y) in phi.pairs() {
        let xp = tz.apply_word(&plus, x)?;
        let ym = tz.apply_word(&minus, y)?;
        pairs.insert((xp.clone(), ym.clone()));
        a_plus.push(xp);
        a_minus.push(ym);
    }
    for (part, piece, side) in [(&dom_part, &a_plus, "d(τ)"), (&ran_part, &a_minus, "r(τ)")] {
        for a in piece {
            if part.contains(a) {
                return Err(Error::DisconnectionFailure(format!("{a} lies in both pieces of {side}")));
            }
            if let Some(b) = part.iter().find(|b| backend.adj(a, b)) {
                return Err(Error::DisconnectionFailure(format!("{a} ∼ {b} across the pieces of {side}")));
            }
        }
    }
    let tau = PartialIso::from_pairs(pairs.into_iter().collect(), &backend)?;
    let tau_len = tau.len();
    let om = extend_to_automorphism(&tau, &backend, None)?;
    let mut omega = Omega { tz, tau: Some((ip - 1, om)) };

    let u2inv = inverse_word(&u2);
    let w = reduce_word(&[u2inv.as_slice(), &ais, &[ip as i32], &ais, &u2].concat());
    for (x, y) in phi.pairs() {
        let got = omega.apply_word(&w, x)?;
        if &got != y {
            return Err(Error::VerificationFailed(format!("ω(w){x} = {got} ≠ φ({x}) = {y}")));
        }
        checked.push(format!("ω(w){x} = {y}"));
    }
    check_agreement(setup, &mut omega, &fv, &mut checked)?;
    let report = FreeStepReport {
        w: show_word(&w),
        w_len: w.len(),
        u: show_word(&u),
        i,
        i_prime: ip,
        s,
        diam,
        unreachable_pairs,
        f_tilde: omega.tz.f_tilde.len(),
        k_tilde: ktilde.len(),
        tau: tau_len,
        rounds: omega.tz.rounds,
        universe: omega.tz.universe_len(),
        checked,
    };
    Ok(FreeStep { omega, w, report })
}

/// Result of chaining tuple steps.
pub struct FreeRun {
    pub certificates: Vec<Certificate>,
    pub aborted: Option<Error>,
    pub setup: FreeTupleSetup,
}

/// Re-evaluates a tuple certificate against the current tuple.
pub fn verify_free_certificate(setup: &mut FreeTupleSetup, cert: &Certificate) -> Result<()> {
    match (&cert.requirement, &cert.witness) {
        (Requirement::Homogeneity(phi), CertWitness::Element(Elem::Word(w))) => {
            for (x, y) in phi.pairs() {
                let got = setup.apply_word(w, x)?;
                if &got != y {
                    return Err(Error::VerificationFailed(format!("step {}: ω(w){x} = {got} ≠ {y}", cert.step)));
                }
            }
            Ok(())
        }
        (Requirement::Faithfulness(Elem::Word(w)), CertWitness::Vertex(x)) => {
            if &setup.apply_word(w, x)? == x {
                return Err(Error::VerificationFailed(format!("step {}: ω(w) fixes {x}", cert.step)));
            }
            Ok(())
        }
        _ => Err(Error::VerificationFailed(format!("step {}: not a tuple certificate", cert.step))),
    }
}

/// Alternates homogeneity and faithfulness requirements for a tuple.  Each
/// step keeps every earlier trajectory inside F, so earlier certificates
/// stay valid; the trajectories grow quickly, so long runs stop on budget.
pub fn run_free_scheduler(mut setup: FreeTupleSetup, n_steps: usize, max_phi_size: usize, opts: &FreeStepOptions) -> FreeRun {
    let mut phis = PhiEnumerator::new(setup.backend(), max_phi_size);
    let group = Group::free(setup.k() as u32);
    let mut support: BTreeSet<VertexTerm> = BTreeSet::new();
    let mut certificates = Vec::new();
    let mut next_elem = 1usize;
    for step in 0..n_steps {
        let f: Vec<VertexTerm> = support.iter().cloned().collect();
        let res: Result<(Requirement, CertWitness, Vec<String>, Vec<VertexTerm>, Omega)> = if step % 2 == 0 {
            (|| {
                let phi = phis.next_phi()?;
                let st = free_homogeneity_step(&mut setup, &phi, &f, opts)?;
                let mut omega = st.omega;
                let mut traj = Vec::new();
                for x in phi.domain() {
                    let mut y = x.clone();
                    traj.push(y.clone());
                    for &l in st.w.iter().rev() {
                        y = omega.apply(l.unsigned_abs() as usize - 1, l.signum() as i8, &y)?;
                        traj.push(y.clone());
                    }
                }
                traj.extend(phi.range().cloned());
                Ok((Requirement::Homogeneity(phi), CertWitness::Element(Elem::Word(st.w)), st.report.checked, traj, omega))
            })()
        } else {
            (|| {
                let g = group.element(next_elem).ok_or_else(|| Error::NotFound("no more words".into()))?;
                next_elem += 1;
                let Elem::Word(w) = g.clone() else { unreachable!() };
                let mut tz = Treezation::new(&mut setup, &f, opts.mode, opts.budget)?;
                let x = tz.moved_vertex(&w, 64)?;
                let mut omega = Omega { tz, tau: None };
                let mut checked = Vec::new();
                check_agreement(&mut setup, &mut omega, &f, &mut checked)?;
                let traj = omega.tz.trajectory(&w, &x)?;
                checked.push(format!("ω({}){x} = {} ≠ {x}", show_word(&w), traj.last().unwrap()));
                Ok((Requirement::Faithfulness(g), CertWitness::Vertex(x), checked, traj, omega))
            })()
        };
        match res {
            Ok((requirement, witness, checked, traj, omega)) => {
                support.extend(traj);
                setup = FreeTupleSetup::from_step(omega);
                certificates.push(Certificate { step, requirement, witness, checked, support: support.len() });
            }
            Err(e) => return FreeRun { certificates, aborted: Some(e), setup },
        }
    }
    FreeRun { certificates, aborted: None, setup }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn nat(v: u64) -> VertexTerm {
        VertexTerm::nat(v)
    }

    #[test]
    fn bit_elementary_extension_oracle() {
        let b = Backend::bit();
        let g = PartialIso::from_pairs(vec![(nat(0), nat(2))], &b).unwrap();
        let out = elementary_extension(&g, &[g.clone()], &[nat(0), nat(2)], &b).unwrap();
        assert_eq!(out.to_pairs(), vec![(nat(0), nat(2)), (nat(2), nat(10)), (nat(8), nat(0))]);
        assert!(matches!(elementary_extension(&g, &[], &[], &b), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn total_gamma_is_unchanged() {
        let b = Backend::bit();
        let g = PartialIso::from_pairs(vec![(nat(0), nat(1)), (nat(1), nat(0))], &b).unwrap();
        assert_eq!(elementary_extension(&g, &[g.clone()], &[nat(0)], &b).unwrap(), g);
    }

    fn brute_least(b: &Backend, want: &[VertexTerm], pool: &[VertexTerm]) -> VertexTerm {
        (0u64..)
            .map(nat)
            .find(|z| !pool.contains(z) && pool.iter().all(|p| b.adj(z, p) == want.contains(p)))
            .unwrap()
    }

    #[test]
    fn least_witnesses_match_a_scan() {
        // u₁ and y₁ by direct scan rather than the pooled search
        let b = Backend::bit();
        let k = vec![nat(0), nat(2)];
        let u1 = brute_least(&b, &[], &k);
        let y1 = brute_least(&b, &[], &[nat(0), nat(2), u1.clone()]);
        assert_eq!((u1, y1), (nat(8), nat(10)));
    }

    fn small_iso(b: &Backend, pairs: &[(u64, u64)]) -> Option<PartialIso> {
        PartialIso::from_pairs(pairs.iter().map(|(x, y)| (nat(*x), nat(*y))).collect(), b).ok()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn elementary_extension_properties(
            p1 in proptest::collection::btree_map(0u64..12, 0u64..12, 0..4),
            p2 in proptest::collection::btree_map(0u64..12, 0u64..12, 0..3),
            f in proptest::collection::vec(0u64..12, 0..3),
        ) {
            let b = Backend::bit();
            let pairs1: Vec<(u64, u64)> = p1.into_iter().collect();
            let pairs2: Vec<(u64, u64)> = p2.into_iter().collect();
            let (Some(g), Some(h)) = (small_iso(&b, &pairs1), small_iso(&b, &pairs2)) else { return Ok(()) };
            let fv: Vec<VertexTerm> = f.into_iter().map(nat).collect();
            let phis = vec![g.clone(), h.clone()];
            let kset: BTreeSet<VertexTerm> = fv.iter().cloned().chain(phis.iter().flat_map(|p| p.domain().chain(p.range()).cloned())).collect();
            let a: Vec<VertexTerm> = kset.iter().take(3).cloned().collect();
            let bad = elementary_extension_violations(&g, &phis, &fv, &a, &b).unwrap();
            prop_assert!(bad.is_empty(), "{:?}", bad);
        }
    }

    fn setup2() -> FreeTupleSetup {
        FreeTupleSetup::canonical(2).unwrap()
    }

    #[test]
    fn empty_f_gives_empty_restrictions() {
        let mut st = setup2();
        let mut tz = Treezation::new(&mut st, &[], TreeMode::RoundRobin, 10_000).unwrap();
        assert!(tz.beta(0).is_empty() && tz.beta(1).is_empty() && tz.f_tilde().is_empty());
        tz.run_rounds(2).unwrap();
        assert!(!tz.beta(0).is_empty());
    }

    #[test]
    fn restriction_agrees_with_alpha_and_covers_enumeration() {
        let mut st = setup2();
        let f = st.backend().enumerate(2).unwrap();
        let mut tz = Treezation::new(&mut st, &f, TreeMode::RoundRobin, 100_000).unwrap();
        for j in 0..2 {
            for x in &f {
                assert_eq!(tz.beta(j).get(x), Some(&st.apply(j, 1, x).unwrap()));
                assert_eq!(tz.beta(j).get_inv(x), Some(&st.apply(j, -1, x).unwrap()));
            }
        }
        let s = 3 * tz.k();
        tz.run_rounds(s).unwrap();
        for l in 0..s / tz.k() {
            let z = st.backend().nth(l).unwrap();
            for j in 0..2 {
                assert!(tz.beta(j).get(&z).is_some() && tz.beta(j).get_inv(&z).is_some());
            }
        }
        for j in 0..2 {
            assert!(tz.beta(j).validate(st.backend()).0);
        }
    }

    #[test]
    fn windows_have_cycles_only_in_f_tilde() {
        for mode in [TreeMode::RoundRobin, TreeMode::Lazy] {
            let mut st = setup2();
            let f = st.backend().enumerate(3).unwrap();
            let mut tz = Treezation::new(&mut st, &f, mode, 200_000).unwrap();
            let centers: Vec<VertexTerm> = tz.f_tilde().iter().take(3).cloned().collect();
            for c in centers {
                let w = schreier_window(&mut tz, &c, 3).unwrap();
                assert!(w.cycles_in_f_tilde(), "{mode:?}: {:?}", w.off_f_tilde);
            }
            let r0 = schreier_window(&mut tz, &f[0], 0).unwrap();
            assert_eq!(r0.vertices.len(), 1);
        }
    }

    #[test]
    fn geodesic_law_on_short_words() {
        let mut st = setup2();
        let f = st.backend().enumerate(2).unwrap();
        let mut tz = Treezation::new(&mut st, &f, TreeMode::Lazy, 200_000).unwrap();
        let dist = tz.f_tilde_distances(4).unwrap();
        let x = f[0].clone();
        for n in 1..=4 {
            for w in reduced_words(2, n) {
                assert_eq!(tz.geodesic_violation(&x, &w, &dist).unwrap(), None);
            }
        }
    }

    #[test]
    fn neumann_word_for_empty_f_tilde() {
        let mut st = setup2();
        let mut tz = Treezation::new(&mut st, &[], TreeMode::Lazy, 1000).unwrap();
        assert_eq!(neumann_witness(&mut tz, 10).unwrap(), vec![1]);
    }

    #[test]
    fn neumann_word_moves_f_tilde_off_itself() {
        let mut st = setup2();
        let f = st.backend().enumerate(2).unwrap();
        let mut tz = Treezation::new(&mut st, &f, TreeMode::Lazy, 100_000).unwrap();
        let u = neumann_witness(&mut tz, 1000).unwrap();
        assert!(is_cyclically_reduced(&u));
        let u2 = [u.as_slice(), &u].concat();
        assert!(is_reduced(&u2));
        for x in tz.f_tilde().clone() {
            let (a, b) = (tz.apply_word(&u, &x).unwrap(), tz.apply_word(&u2, &x).unwrap());
            assert!(!tz.f_tilde().contains(&a) && !tz.f_tilde().contains(&b));
        }
        // nothing shorter in length-lex order works
        for n in 1..u.len() {
            for v in reduced_words(2, n).into_iter().filter(|v| is_cyclically_reduced(v)) {
                let ft = tz.f_tilde().clone();
                let hits = ft.iter().any(|x| ft.contains(&tz.apply_word(&v, x).unwrap()));
                let v2 = [v.as_slice(), &v].concat();
                let hits2 = ft.iter().any(|x| ft.contains(&tz.apply_word(&v2, x).unwrap()));
                assert!(hits || hits2);
            }
        }
    }

    #[test]
    fn identity_requirement_is_immediate() {
        let mut st = setup2();
        let x = st.backend().nth(1).unwrap();
        let phi = PartialIso::identity([x.clone()]);
        let out = free_homogeneity_step(&mut st, &phi, &[x], &FreeStepOptions::default()).unwrap();
        assert!(out.w.is_empty());
    }

    #[test]
    fn homogeneity_step_on_two_points() {
        let mut st = setup2();
        let vs = st.backend().enumerate(4).unwrap();
        let mut phis = PhiEnumerator::new(st.backend(), 2);
        let phi = loop {
            let p = phis.next_phi().unwrap();
            if p.len() == 2 && p.pairs().any(|(x, y)| x != y) {
                break p;
            }
        };
        let mut out = free_homogeneity_step(&mut st, &phi, &vs[..1], &FreeStepOptions::default()).unwrap();
        assert!(is_reduced(&out.w));
        for (x, y) in phi.pairs() {
            assert_eq!(&out.omega.apply_word(&out.w, x).unwrap(), y);
        }
        let mut next = FreeTupleSetup::from_step(out.omega);
        for (x, y) in phi.pairs() {
            assert_eq!(&next.apply_word(&out.w, x).unwrap(), y);
        }
    }

    #[test]
    fn moved_vertex_for_short_words() {
        let mut st = setup2();
        let f = st.backend().enumerate(2).unwrap();
        let mut tz = Treezation::new(&mut st, &f, TreeMode::Lazy, 100_000).unwrap();
        for w in [vec![1], vec![1, 2, -1], vec![2, 2]] {
            let x = tz.moved_vertex(&w, 8).unwrap();
            assert_ne!(tz.apply_word(&w, &x).unwrap(), x);
        }
    }

    #[test]
    fn scheduler_keeps_certificates() {
        let run = run_free_scheduler(setup2(), 2, 2, &FreeStepOptions::default());
        assert!(run.aborted.is_none(), "{:?}", run.aborted);
        let mut st = run.setup;
        for c in &run.certificates {
            verify_free_certificate(&mut st, c).unwrap();
        }
    }
}

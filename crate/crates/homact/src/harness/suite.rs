//! Named verification suites over the module invariants.
//!
//! Every check draws its samples from its own generator, seeded by the
//! configured seed and the check name, so a report does not depend on which
//! other checks ran.  Reports carry no timings and are byte-identical for
//! identical configurations.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Display;

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::RunConfig;
use crate::action::Action;
use crate::automorphism::{extend_to_automorphism, EquivCtx};
use crate::backend::{gcd, Backend, Seed};
use crate::error::{Error, Result};
use crate::extension::{canonical_base_action, fixed_vertices, permutation_action};
use crate::generic::free::{
    elementary_extension_violations, free_homogeneity_step, is_reduced, reduced_words, schreier_window, show_word,
    FreeStepOptions, FreeTupleSetup, TreeMode, Treezation,
};
use crate::generic::{run_scheduler, verify_certificate, CertWitness, Certificate, Eval, Requirement, SchedulerOptions, Setup};
use crate::graph::{validate_partial_iso, PartialIso};
use crate::group::{Elem, Group};
use crate::term::VertexTerm;
use crate::witness::{verify_witness, witness_search, SearchKind};

pub const SUITES: [&str; 7] = ["backends", "extension", "limits", "amalgam", "hnn", "free", "all"];

/// Failing instances listed per invariant.
const MAX_WITNESSES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// A budget ran out before the instance was decided.
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct InvariantReport {
    pub suite: String,
    pub name: String,
    pub instances: usize,
    pub failures: usize,
    pub inconclusive: usize,
    pub status: Status,
    pub witnesses: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl InvariantReport {
    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub status: Status,
    pub invariants: Vec<InvariantReport>,
}

impl SuiteReport {
    /// 0 when everything passed, 1 on any failure, 2 when only budgets ran out.
    pub fn exit_code(&self) -> i32 {
        match self.status {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::Inconclusive => 2,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

fn combine(items: impl IntoIterator<Item = Status>) -> Status {
    let mut out = Status::Pass;
    for s in items {
        match s {
            Status::Fail => return Status::Fail,
            Status::Inconclusive => out = Status::Inconclusive,
            Status::Pass => {}
        }
    }
    out
}

struct Tally {
    suite: &'static str,
    name: String,
    instances: usize,
    failures: usize,
    inconclusive: usize,
    witnesses: Vec<String>,
    note: Option<String>,
}

impl Tally {
    fn new(suite: &'static str, name: impl Into<String>) -> Tally {
        Tally { suite, name: name.into(), instances: 0, failures: 0, inconclusive: 0, witnesses: Vec::new(), note: None }
    }

    fn pass(&mut self) {
        self.instances += 1;
    }

    fn fail(&mut self, w: String) {
        self.instances += 1;
        self.failures += 1;
        if self.witnesses.len() < MAX_WITNESSES {
            self.witnesses.push(w);
        }
    }

    fn check(&mut self, ok: bool, w: impl FnOnce() -> String) {
        if ok {
            self.pass()
        } else {
            self.fail(w())
        }
    }

    /// Budget errors are inconclusive, anything else fails.
    fn error(&mut self, e: &Error, at: impl Display) {
        if e.is_budget() {
            self.instances += 1;
            self.inconclusive += 1;
            if self.witnesses.len() < MAX_WITNESSES {
                self.witnesses.push(format!("inconclusive at {at}: {e}"));
            }
        } else {
            self.fail(format!("{at}: {e}"));
        }
    }

    fn violations(&mut self, r: Result<Vec<String>>, at: impl Display) {
        match r {
            Ok(v) if v.is_empty() => self.pass(),
            Ok(v) => self.fail(format!("{at}: {}", v.join("; "))),
            Err(e) => self.error(&e, at),
        }
    }

    fn note(mut self, n: impl Into<String>) -> Tally {
        self.note = Some(n.into());
        self
    }

    fn done(self) -> InvariantReport {
        let status = if self.failures > 0 {
            Status::Fail
        } else if self.inconclusive > 0 {
            Status::Inconclusive
        } else {
            Status::Pass
        };
        InvariantReport {
            suite: self.suite.into(),
            name: self.name,
            instances: self.instances,
            failures: self.failures,
            inconclusive: self.inconclusive,
            status,
            witnesses: self.witnesses,
            note: self.note,
        }
    }
}

fn rng_for(cfg: &RunConfig, name: &str) -> ChaCha8Rng {
    // FNV-1a of the check name keeps the streams apart
    let salt = name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
    ChaCha8Rng::seed_from_u64(cfg.seed ^ salt)
}

/// Backend adjacency with the configured faults flipped.
struct Oracle {
    backend: Backend,
    flips: HashSet<(VertexTerm, VertexTerm)>,
}

impl Oracle {
    fn new(cfg: &RunConfig, backend: Backend) -> Oracle {
        let flips = cfg.faults.iter().flat_map(|(x, y)| [(x.clone(), y.clone()), (y.clone(), x.clone())]).collect();
        Oracle { backend, flips }
    }

    fn adj(&self, x: &VertexTerm, y: &VertexTerm) -> bool {
        let a = x != y && self.backend.adj(x, y);
        a ^ self.flips.contains(&(x.clone(), y.clone()))
    }
}

/// Adjacency from the definitions: bit i of j for naturals, membership
/// for set terms, the seed for base vertices.
fn reference_adj(b: &Backend, x: &VertexTerm, y: &VertexTerm) -> Option<bool> {
    if x == y {
        return Some(false);
    }
    match (x, y) {
        (VertexTerm::Nat(_), VertexTerm::Nat(_)) => {
            let (i, j) = (x.as_u64()?, y.as_u64()?);
            let (i, j) = (i.min(j), i.max(j));
            Some(i < 64 && j >> i & 1 == 1)
        }
        (VertexTerm::Base(a), VertexTerm::Base(c)) => Some(b.seed_adjacent(a, c)),
        _ if x.stage() > y.stage() => Some(x.as_set()?.members().contains(y)),
        _ if y.stage() > x.stage() => Some(y.as_set()?.members().contains(x)),
        _ => Some(false),
    }
}

fn show(xs: &[VertexTerm]) -> String {
    format!("{{{}}}", xs.iter().join(","))
}

fn show_phi(p: &PartialIso) -> String {
    format!("{{{}}}", p.pairs().map(|(x, y)| format!("{x}↦{y}")).join(", "))
}

/// A random partial isomorphism of the given size inside `pool`.
fn random_phi(rng: &mut ChaCha8Rng, b: &Backend, pool: &[VertexTerm], size: usize) -> Option<PartialIso> {
    'attempt: for _ in 0..64 {
        let dom: Vec<VertexTerm> = pool.choose_multiple(rng, size).cloned().collect();
        let mut pairs: Vec<(VertexTerm, VertexTerm)> = Vec::new();
        for x in &dom {
            let mut cands: Vec<&VertexTerm> = pool.iter().filter(|y| pairs.iter().all(|(_, v)| v != *y)).collect();
            cands.shuffle(rng);
            let Some(y) = cands.into_iter().find(|y| pairs.iter().all(|(u, v)| b.adj(x, u) == b.adj(y, v))) else {
                continue 'attempt;
            };
            pairs.push((x.clone(), y.clone()));
        }
        return Some(PartialIso::from_pairs_unchecked(pairs));
    }
    None
}

/// Every (U, V) with U, V disjoint inside `universe`, or a sample of
/// `cap` of them when there are more.
fn disjoint_pairs(rng: &mut ChaCha8Rng, universe: &[VertexTerm], cap: usize) -> (Vec<Vec<u8>>, bool) {
    let n = universe.len() as u32;
    let total = 3u64.checked_pow(n).unwrap_or(u64::MAX);
    let decode = |mut c: u64| {
        (0..n)
            .map(|_| {
                let d = (c % 3) as u8;
                c /= 3;
                d
            })
            .collect::<Vec<u8>>()
    };
    if total <= cap as u64 {
        ((0..total).map(decode).collect(), true)
    } else {
        ((0..cap).map(|_| (0..n).map(|_| rng.gen_range(0..3u8)).collect()).collect(), false)
    }
}

fn split(universe: &[VertexTerm], code: &[u8]) -> (Vec<VertexTerm>, Vec<VertexTerm>) {
    let pick = |d: u8| universe.iter().zip(code).filter(|(_, c)| **c == d).map(|(x, _)| x.clone()).collect();
    (pick(1), pick(2))
}

fn verify_r(o: &Oracle, u: &[VertexTerm], v: &[VertexTerm], z: &VertexTerm) -> bool {
    !u.contains(z) && !v.contains(z) && u.iter().all(|x| o.adj(z, x)) && v.iter().all(|x| !o.adj(z, x))
}

// ------------------------------------------------------------- backends

pub fn check_adjacency(cfg: &RunConfig) -> InvariantReport {
    let mut t = Tally::new("backends", "adjacency-oracle");
    let b = match cfg.backend.build() {
        Ok(b) => b,
        Err(e) => {
            t.error(&e, "backend");
            return t.done();
        }
    };
    let o = Oracle::new(cfg, b.clone());
    let window = match b.enumerate(cfg.budgets.window) {
        Ok(w) => w,
        Err(e) => {
            t.error(&e, "enumeration");
            return t.done();
        }
    };
    for (x, y) in window.iter().tuple_combinations() {
        let got = o.adj(x, y);
        let back = o.adj(y, x);
        match reference_adj(&b, x, y) {
            Some(want) => t.check(got == want && back == want, || {
                format!("({x},{y}): backend says {got}/{back}, definition says {want}")
            }),
            None => t.fail(format!("({x},{y}): no reference adjacency")),
        }
    }
    t.note(format!("all pairs in the first {} vertices of {}", window.len(), b.describe())).done()
}

pub fn check_property_r(cfg: &RunConfig) -> InvariantReport {
    let mut t = Tally::new("backends", "property-r");
    let b = match cfg.backend.build().and_then(|b| b.enumerate(cfg.budgets.r_universe).map(|w| (b, w))) {
        Ok(x) => x,
        Err(e) => {
            t.error(&e, "backend");
            return t.done();
        }
    };
    let (b, universe) = b;
    let o = Oracle::new(cfg, b.clone());
    let mut rng = rng_for(cfg, "property-r");
    let (codes, exhaustive) = disjoint_pairs(&mut rng, &universe, cfg.budgets.r_pairs);
    for code in &codes {
        let (u, v) = split(&universe, code);
        match b.property_r_witness(&u, &v) {
            Ok(z) => t.check(verify_r(&o, &u, &v, &z), || format!("U={} V={}: witness {z} fails", show(&u), show(&v))),
            Err(e) => t.error(&e, format!("U={} V={}", show(&u), show(&v))),
        }
    }
    let how = if exhaustive { "all" } else { "a uniform sample of" };
    t.note(format!("{how} {} disjoint pairs inside the first {} vertices", codes.len(), universe.len())).done()
}

// ------------------------------------------------------------ extension

pub fn check_extend(cfg: &RunConfig) -> InvariantReport {
    let mut t = Tally::new("extension", "back-and-forth");
    let Ok(b) = cfg.backend.build() else {
        t.fail("backend does not build".into());
        return t.done();
    };
    let mut rng = rng_for(cfg, "back-and-forth");
    let (pool, window) = match (b.enumerate(32), b.enumerate(cfg.budgets.window)) {
        (Ok(p), Ok(w)) => (p, w),
        (Err(e), _) | (_, Err(e)) => {
            t.error(&e, "enumeration");
            return t.done();
        }
    };
    for i in 0..cfg.budgets.extend_samples {
        let size = rng.gen_range(1..=5);
        let Some(phi) = random_phi(&mut rng, &b, &pool, size) else {
            t.fail(format!("sample {i}: no partial isomorphism of size {size} found"));
            continue;
        };
        match extend_to_automorphism(&phi, &b, None) {
            Ok(mut a) => {
                let rep = a.verify_window(&window);
                let keeps = phi.pairs().all(|(x, y)| a.get(x) == Some(y));
                t.check(rep.passed() && keeps, || {
                    format!("φ={}: {}", show_phi(&phi), rep.violations.first().cloned().unwrap_or("φ not kept".into()))
                });
            }
            Err(e) => t.error(&e, format!("φ={}", show_phi(&phi))),
        }
    }
    t.note(format!("|d(φ)| ≤ 5 inside the first 32 vertices, verified on {} vertices", window.len())).done()
}

fn sigma_action(cfg: &RunConfig) -> Result<(Group, crate::extension::LimitAction)> {
    let name = cfg.action.sigma_group.as_deref().ok_or_else(|| Error::InvalidInput("no action.sigma_group".into()))?;
    let g = cfg.group(name).ok_or_else(|| Error::InvalidInput(format!("no group {name}")))?.clone();
    let la = canonical_base_action(&g, &cfg.action.sigma)?;
    Ok((g, la))
}

fn equivariant_phi(rng: &mut ChaCha8Rng, a: &Action, sigma: &[Elem], pool: &[VertexTerm], orbits: usize) -> Option<PartialIso> {
    let b = a.backend();
    let orbit = |x: &VertexTerm| sigma.iter().map(|s| a.act_valid(s, x)).collect::<Vec<_>>();
    'attempt: for _ in 0..64 {
        let mut pairs: Vec<(VertexTerm, VertexTerm)> = Vec::new();
        for _ in 0..orbits {
            let used_d: HashSet<&VertexTerm> = pairs.iter().map(|(x, _)| x).collect();
            let xs: Vec<&VertexTerm> = pool.iter().filter(|x| orbit(x).iter().all(|y| !used_d.contains(y))).collect();
            let Some(x) = xs.choose(rng) else { continue 'attempt };
            let ox = orbit(x);
            let used_r: HashSet<&VertexTerm> = pairs.iter().map(|(_, y)| y).collect();
            let mut ys: Vec<&VertexTerm> = pool.iter().filter(|y| orbit(y).iter().all(|z| !used_r.contains(z))).collect();
            ys.shuffle(rng);
            let found = ys.into_iter().find_map(|y| {
                let mut p = pairs.clone();
                p.extend(ox.iter().cloned().zip(orbit(y)));
                validate_partial_iso(&p, b).0.then_some(p)
            });
            match found {
                Some(p) => pairs = p,
                None => continue 'attempt,
            }
        }
        return Some(PartialIso::from_pairs_unchecked(pairs));
    }
    None
}

pub fn check_equivariant_extend(cfg: &RunConfig) -> InvariantReport {
    let mut t = Tally::new("extension", "equivariant-back-and-forth");
    let (_, la) = match sigma_action(cfg) {
        Ok(x) => x,
        Err(Error::InvalidInput(m)) if m.starts_with("no action") => return t.note("no Σ configured").done(),
        Err(e) => {
            t.error(&e, "setup");
            return t.done();
        }
    };
    let b = la.backend().clone();
    let a = la.action().clone();
    let sigma = la.sigma().to_vec();
    let mut rng = rng_for(cfg, "equivariant-back-and-forth");
    let (pool, window) = match (b.enumerate(24), b.enumerate(cfg.budgets.equivariant_window)) {
        (Ok(p), Ok(w)) => (p, w),
        (Err(e), _) | (_, Err(e)) => {
            t.error(&e, "enumeration");
            return t.done();
        }
    };
    for i in 0..cfg.budgets.equivariant_samples {
        let k = rng.gen_range(1..=2);
        let Some(phi) = equivariant_phi(&mut rng, &a, &sigma, &pool, k) else {
            t.fail(format!("sample {i}: no equivariant φ with {k} orbits"));
            continue;
        };
        let ctx = EquivCtx::symmetric(&a, &sigma);
        let mut ext = match extend_to_automorphism(&phi, &b, Some(ctx)) {
            Ok(x) => x,
            Err(e) => {
                t.error(&e, format!("φ={}", show_phi(&phi)));
                continue;
            }
        };
        let rep = ext.verify_window(&window);
        let mut bad = rep.violations.first().cloned();
        'outer: for x in &window {
            for s in &sigma[1..] {
                let lhs = ext.query(&a.act_valid(s, x));
                let rhs = ext.query(x).map(|y| a.act_valid(s, &y));
                if lhs.is_err() || lhs != rhs {
                    bad = Some(format!("query(σ{x}) = {lhs:?} but σ·query({x}) = {rhs:?}"));
                    break 'outer;
                }
            }
        }
        if phi.pairs().any(|(x, y)| ext.get(x) != Some(y)) {
            bad = Some("φ not kept".into());
        }
        t.check(bad.is_none(), || format!("φ={}: {}", show_phi(&phi), bad.unwrap_or_default()));
    }
    t.note(format!("Σ of order {} on {}, {} queried vertices", sigma.len(), b.describe(), window.len())).done()
}

// --------------------------------------------------------------- limits

/// Vertices of stage ≤ 1 of a finite-seed limit, in enumeration order.
fn stage_one(b: &Backend, n: u32, l: u64) -> Result<Vec<VertexTerm>> {
    let mut count = n as usize;
    for mask in 1u64..(1u64 << n) {
        if gcd(l, mask.count_ones() as u64) == 1 {
            count += 1;
        }
    }
    let w = b.enumerate(count)?;
    if let Some(x) = w.iter().find(|x| x.stage() > 1) {
        return Err(Error::VerificationFailed(format!("{x} is enumerated before stage 1 is complete")));
    }
    Ok(w)
}

pub fn check_limit_property_r(cfg: &RunConfig) -> InvariantReport {
    let mut t = Tally::new("limits", "limit-property-r");
    let (seed, l) = cfg.limit.clone();
    let n = match &seed {
        Seed::Graph { n, .. } => *n,
        Seed::Group(_) => {
            t.fail("the limits suite needs a finite seed".into());
            return t.done();
        }
    };
    let built = Backend::limit(seed, l).and_then(|b| stage_one(&b, n, l).map(|w| (b, w)));
    let (b, universe) = match built {
        Ok(x) => x,
        Err(e) => {
            t.error(&e, "stage-1 window");
            return t.done();
        }
    };
    let o = Oracle::new(cfg, b.clone());
    let mut rng = rng_for(cfg, "limit-property-r");
    let (codes, exhaustive) = disjoint_pairs(&mut rng, &universe, cfg.budgets.r_pairs);
    for code in &codes {
        let (u, v) = split(&universe, code);
        let at = || format!("U={} V={}", show(&u), show(&v));
        match b.property_r_witness(&u, &v) {
            Ok(z) => {
                let shape = match z.as_set() {
                    Some(s) => {
                        let m = s.members();
                        let sized = gcd(l, m.len() as u64) == 1;
                        let covers = u.iter().all(|x| m.contains(x));
                        let exact = if l == 1 && !u.is_empty() { m.len() == u.len() } else { true };
                        let single = if l == 1 && u.is_empty() { m.len() == 1 } else { true };
                        // {x} needs an x off U∪V, which sits at stage 2 once V fills the window
                        let top = if u.is_empty() && v.len() == universe.len() { 3 } else { 2 };
                        z.stage() <= top && sized && covers && exact && single
                    }
                    None => false,
                };
                t.check(shape && verify_r(&o, &u, &v, &z), || format!("{}: witness {z}", at()));
            }
            Err(e) => t.error(&e, at()),
        }
    }
    let how = if exhaustive { "all" } else { "a uniform sample of" };
    t.note(format!(
        "{how} {} disjoint pairs of the {} stage-≤1 vertices; witnesses must be z = U at stage 2, or z = {{x}} for empty U",
        codes.len(),
        universe.len()
    ))
    .done()
}

/// gA = A for a set term by comparing member images; other vertices by
/// their image.
fn brute_fixed(a: &Action, g: &Elem, x: &VertexTerm) -> bool {
    match x.as_set() {
        Some(s) => {
            let m: BTreeSet<&VertexTerm> = s.members().iter().collect();
            let img: BTreeSet<VertexTerm> = s.members().iter().map(|u| a.act_valid(g, u)).collect();
            img.len() == m.len() && img.iter().all(|y| m.contains(y))
        }
        None => a.act_valid(g, x) == *x,
    }
}

pub fn check_fixed_points(_cfg: &RunConfig) -> InvariantReport {
    let mut t = Tally::new("limits", "fixed-point-formula");
    for n in 1..=4u32 {
        for p in (0..n).permutations(n as usize) {
            let at = format!("seed {n}, permutation {p:?}");
            let a = match permutation_action(Seed::edgeless(n), 1, &p) {
                Ok(a) => a,
                Err(e) => {
                    t.error(&e, &at);
                    continue;
                }
            };
            let window = match stage_one(a.backend(), n, 1) {
                Ok(w) => w,
                Err(e) => {
                    t.error(&e, &at);
                    continue;
                }
            };
            for g in a.group().elements(64) {
                let want: Vec<VertexTerm> = window.iter().filter(|x| brute_fixed(&a, &g, x)).cloned().collect();
                match fixed_vertices(&g, &a, &window) {
                    Ok(got) => t.check(got == want, || format!("{at}, power {g}: formula {} vs scan {}", show(&got), show(&want))),
                    Err(e) => t.error(&e, &at),
                }
            }
        }
    }
    t.note("every power of every permutation of every edgeless seed with at most 4 vertices").done()
}

struct Sample {
    f: Vec<VertexTerm>,
    /// The old part F₁.
    old: Vec<VertexTerm>,
    /// F̃ = F₁ ∪ ⋃ U over the new part.
    reduced: Vec<VertexTerm>,
}

fn preservation_samples(cfg: &RunConfig, b: &Backend) -> Result<Vec<Sample>> {
    let mut rng = rng_for(cfg, "preservation");
    let window = b.enumerate(400)?;
    let old: Vec<VertexTerm> = window.iter().filter(|x| x.stage() <= 1).take(40).cloned().collect();
    let new: Vec<VertexTerm> = window.iter().filter(|x| x.stage() == 2).take(40).cloned().collect();
    if old.is_empty() || new.is_empty() {
        return Err(Error::NotFound("the window has no stage-2 vertices".into()));
    }
    let mut out = Vec::new();
    for i in 0..cfg.budgets.preservation_sets {
        let n = rng.gen_range(1..=3);
        let f1: Vec<VertexTerm> = old.choose_multiple(&mut rng, n).cloned().collect();
        let k2 = if i % 2 == 0 { rng.gen_range(1..=2) } else { rng.gen_range(0..=2) };
        let f2: Vec<VertexTerm> = new.choose_multiple(&mut rng, k2).filter(|x| !f1.contains(x)).cloned().collect();
        let mut reduced: BTreeSet<VertexTerm> = f1.iter().cloned().collect();
        for u in &f2 {
            reduced.extend(u.as_set().map(|s| s.members().to_vec()).unwrap_or_default());
        }
        let f: Vec<VertexTerm> = f1.iter().chain(&f2).cloned().collect();
        out.push(Sample { f, old: f1, reduced: reduced.into_iter().collect() });
    }
    Ok(out)
}

/// Orbit, disconnection and highly-core-free witnesses moving between a
/// stage and the next.
pub fn check_preservation(cfg: &RunConfig) -> Vec<InvariantReport> {
    let mut orbit = Tally::new("limits", "orbit-transfer");
    let mut disc = Tally::new("limits", "disconnect-transfer");
    let mut hcf = Tally::new("limits", "hcf-transfer");
    let setup = sigma_action(cfg).and_then(|(g, la)| preservation_samples(cfg, la.backend()).map(|s| (g, la, s)));
    let (g, la, samples) = match setup {
        Ok(x) => x,
        Err(Error::InvalidInput(m)) if m.starts_with("no action") => {
            return [orbit, disc, hcf].into_iter().map(|t| t.note("no Σ configured").done()).collect();
        }
        Err(e) => {
            for t in [&mut orbit, &mut disc, &mut hcf] {
                t.error(&e, "setup");
            }
            return [orbit, disc, hcf].into_iter().map(Tally::done).collect();
        }
    };
    let a = la.action();
    let sigma = la.sigma().to_vec();
    let elems = g.elements(cfg.budgets.search);
    for s in &samples {
        let at = format!("F={}", show(&s.f));
        // |{gU}|·|U| ≥ |{gu}| because gu ∈ gU
        let mut ok = true;
        for x in s.f.iter().filter(|x| x.as_set().is_some()) {
            let m = x.as_set().unwrap().members();
            let sets: HashSet<VertexTerm> = elems.iter().map(|h| a.act_valid(h, x)).collect();
            for u in m {
                let pts: HashSet<VertexTerm> = elems.iter().map(|h| a.act_valid(h, u)).collect();
                ok &= sets.len() * m.len() >= pts.len();
            }
        }
        orbit.check(ok, || format!("{at}: a set has a shorter orbit than its members allow"));

        let up = SearchKind::Disconnect(s.reduced.clone());
        match witness_search(a, &up, cfg.budgets.search) {
            Ok(w) => {
                let lifted = verify_witness(a, &SearchKind::Disconnect(s.f.clone()), &w);
                let down = verify_witness(a, &SearchKind::Disconnect(s.old.clone()), &w);
                disc.check(lifted && down, || format!("{at}: {w:?} disconnects F̃={} but not F", show(&s.reduced)));
            }
            Err(e) => disc.error(&e, &at),
        }

        let kind = SearchKind::HighlyCoreFree { sigma: sigma.clone(), f: s.reduced.clone() };
        match witness_search(a, &kind, cfg.budgets.search) {
            Ok(w) => {
                let lifted = SearchKind::HighlyCoreFree { sigma: sigma.clone(), f: s.f.clone() };
                hcf.check(verify_witness(a, &lifted, &w), || format!("{at}: {w:?} is hcf for F̃ but not for F"));
            }
            Err(e) => hcf.error(&e, &at),
        }
    }
    let note = format!("{} sampled sets at stages 1 and 2 for {} with Σ of order {}", samples.len(), g.name(), sigma.len());
    [orbit, disc, hcf].into_iter().map(|t| t.note(note.clone()).done()).collect()
}

// -------------------------------------------------------------- density

fn density_reports(cfg: &RunConfig, suite: &'static str, name: &str, requirements: usize) -> Vec<InvariantReport> {
    let mut hom = Tally::new(suite, format!("homogeneity[{name}]"));
    let mut faith = Tally::new(suite, format!("faithfulness[{name}]"));
    let mut keep = Tally::new(suite, format!("certificates-persist[{name}]"));
    let Some(g) = cfg.group(name).cloned() else {
        hom.fail(format!("no group {name}"));
        return vec![hom.done()];
    };
    let mut st = match Setup::new(&g, cfg.budgets.search) {
        Ok(s) => s,
        Err(e) => {
            hom.error(&e, "setup");
            return vec![hom.done()];
        }
    };
    let mut rng = rng_for(cfg, &format!("density-{name}"));
    let pool = match st.backend().enumerate(12) {
        Ok(p) => p,
        Err(e) => {
            hom.error(&e, "enumeration");
            return vec![hom.done()];
        }
    };
    let elems: Vec<Elem> = g.ball(4, 4096).into_iter().filter(|e| !e.is_identity()).collect();
    let mut certs: Vec<Certificate> = Vec::new();
    let b = st.backend().clone();
    for step in 0..requirements {
        let size = rng.gen_range(1..=3);
        match random_phi(&mut rng, &b, &pool, size) {
            None => hom.fail(format!("requirement {step}: no φ of size {size}")),
            Some(phi) => match st.density_step_homogeneous(&phi, &[]) {
                Ok(w) => {
                    let bad = phi.pairs().find_map(|(x, y)| match st.pi_alpha_apply(&w, x, Eval::Committed) {
                        Ok(z) if z == *y => None,
                        Ok(z) => Some(format!("π_α({w}){x} = {z} ≠ {y}")),
                        Err(e) => Some(e.to_string()),
                    });
                    hom.check(bad.is_none(), || format!("φ={}: {}", show_phi(&phi), bad.unwrap_or_default()));
                    certs.push(Certificate {
                        step: 2 * step,
                        requirement: Requirement::Homogeneity(phi),
                        witness: CertWitness::Element(w),
                        checked: vec![],
                        support: st.support(),
                    });
                }
                Err(e) => hom.error(&e, format!("φ={}", show_phi(&phi))),
            },
        }
        let Some(h) = elems.choose(&mut rng).cloned() else {
            faith.fail("the ball of radius 4 is trivial".into());
            continue;
        };
        match st.density_step_faithful(&h, &[]) {
            Ok(x) => {
                let moved = st.pi_alpha_apply(&h, &x, Eval::Committed).map(|y| y != x).unwrap_or(false);
                faith.check(moved, || format!("g={h}: π_α(g) fixes {x}"));
                certs.push(Certificate {
                    step: 2 * step + 1,
                    requirement: Requirement::Faithfulness(h),
                    witness: CertWitness::Vertex(x),
                    checked: vec![],
                    support: st.support(),
                });
            }
            Err(e) => faith.error(&e, format!("g={h}")),
        }
    }
    for c in &certs {
        match verify_certificate(&mut st, c) {
            Ok(()) => keep.pass(),
            Err(e) => keep.fail(format!("step {}: {e}", c.step)),
        }
    }
    let note = format!("|d(φ)| ≤ 3 inside the first 12 vertices; g in the ball of radius 4; final support {}", st.support());
    vec![hom.note(note.clone()).done(), faith.note(note.clone()).done(), keep.note(note).done()]
}

pub fn check_scheduler(cfg: &RunConfig) -> Option<InvariantReport> {
    let name = cfg.action.scheduler.as_deref()?;
    let suite = if cfg.group(name)?.as_hnn().is_some() { "hnn" } else { "amalgam" };
    let mut t = Tally::new(suite, format!("scheduler[{name}]"));
    let mut st = match Setup::new(cfg.group(name)?, cfg.budgets.search) {
        Ok(s) => s,
        Err(e) => {
            t.error(&e, "setup");
            return Some(t.done());
        }
    };
    let run = run_scheduler(&mut st, cfg.budgets.steps, &SchedulerOptions::default());
    if let Some(e) = &run.aborted {
        t.error(e, format!("step {}", run.certificates.len()));
    }
    for c in &run.certificates {
        match verify_certificate(&mut st, c) {
            Ok(()) => t.pass(),
            Err(e) => t.fail(format!("step {}: {e}", c.step)),
        }
    }
    Some(t.note(format!("{} steps, every certificate re-verified against the final α", cfg.budgets.steps)).done())
}

pub fn check_amalgams(cfg: &RunConfig) -> Vec<InvariantReport> {
    let mut out = Vec::new();
    for name in &cfg.action.amalgams {
        out.extend(density_reports(cfg, "amalgam", name, cfg.budgets.density_requirements));
    }
    out
}

pub fn check_hnns(cfg: &RunConfig) -> Vec<InvariantReport> {
    let mut out = Vec::new();
    for name in &cfg.action.hnns {
        out.extend(density_reports(cfg, "hnn", name, cfg.budgets.hnn_requirements));
    }
    out
}

// ----------------------------------------------------------------- free

fn random_word(rng: &mut ChaCha8Rng, k: usize, len: usize) -> Vec<i32> {
    let mut w: Vec<i32> = Vec::with_capacity(len);
    while w.len() < len {
        let j = rng.gen_range(1..=k as i32) * if rng.gen_bool(0.5) { 1 } else { -1 };
        if w.last() != Some(&-j) {
            w.push(j);
        }
    }
    w
}

pub fn check_elementary_extension(cfg: &RunConfig) -> InvariantReport {
    let mut t = Tally::new("free", "elementary-extension");
    let b = Backend::bit();
    let mut rng = rng_for(cfg, "elementary-extension");
    let pool = b.enumerate(12).expect("bit enumerates");
    for _ in 0..cfg.budgets.elementary_samples {
        let n = rng.gen_range(0..=3);
        let g = random_phi(&mut rng, &b, &pool, n).unwrap_or_default();
        let n = rng.gen_range(0..=2);
        let h = random_phi(&mut rng, &b, &pool, n).unwrap_or_default();
        let n = rng.gen_range(0..=2);
        let f: Vec<VertexTerm> = pool.choose_multiple(&mut rng, n).cloned().collect();
        let k: BTreeSet<VertexTerm> = f.iter().cloned().chain(g.domain().chain(g.range()).chain(h.domain()).chain(h.range()).cloned()).collect();
        let a: Vec<VertexTerm> = k.iter().take(3).cloned().collect();
        let phis = vec![g.clone(), h.clone()];
        let at = format!("γ={} ψ={} F={}", show_phi(&g), show_phi(&h), show(&f));
        t.violations(elementary_extension_violations(&g, &phis, &f, &a, &b), at);
    }
    t.note("random triples on the bit backend inside {0,…,11}; properties (1)-(4)").done()
}

fn opts(cfg: &RunConfig, mode: TreeMode) -> FreeStepOptions {
    FreeStepOptions { mode, budget: cfg.budgets.free_vertices, ..Default::default() }
}

pub fn check_treezation_cycles(cfg: &RunConfig) -> InvariantReport {
    let mut t = Tally::new("free", "treezation-cycles");
    let mut rng = rng_for(cfg, "treezation-cycles");
    let k = cfg.action.free_rank;
    for _ in 0..cfg.budgets.treezation_sets {
        let mut st = match FreeTupleSetup::canonical(k) {
            Ok(s) => s,
            Err(e) => {
                t.error(&e, "setup");
                return t.done();
            }
        };
        let pool = st.backend().enumerate(8).expect("limit enumerates");
        let n = rng.gen_range(1..=3);
        let f: Vec<VertexTerm> = pool.choose_multiple(&mut rng, n).cloned().collect();
        let at = format!("F={}", show(&f));
        let mut tz = match Treezation::new(&mut st, &f, TreeMode::RoundRobin, cfg.budgets.free_vertices) {
            Ok(tz) => tz,
            Err(e) => {
                t.error(&e, &at);
                continue;
            }
        };
        let centers: Vec<VertexTerm> = tz.f_tilde().iter().take(3).cloned().collect();
        for c in centers {
            match schreier_window(&mut tz, &c, 3) {
                Ok(w) => t.check(w.cycles_in_f_tilde(), || format!("{at}, centre {c}: cycle through {}", show(&w.off_f_tilde))),
                Err(e) => t.error(&e, format!("{at}, centre {c}")),
            }
        }
    }
    t.note(format!("round-robin treezations for k = {k}, Schreier balls of radius 3 around F̃")).done()
}

pub fn check_geodesic_law(cfg: &RunConfig) -> InvariantReport {
    let mut t = Tally::new("free", "geodesic-law");
    let mut rng = rng_for(cfg, "geodesic-law");
    let k = cfg.action.free_rank;
    let built = FreeTupleSetup::canonical(k).and_then(|mut st| {
        let f = st.backend().enumerate(2)?;
        let mut tz = Treezation::new(&mut st, &f, TreeMode::RoundRobin, cfg.budgets.free_vertices)?;
        let dist = tz.f_tilde_distances(5)?;
        Ok((tz, dist))
    });
    let (mut tz, dist) = match built {
        Ok(x) => x,
        Err(e) => {
            t.error(&e, "treezation");
            return t.done();
        }
    };
    let ft: Vec<VertexTerm> = tz.f_tilde().iter().cloned().collect();
    for _ in 0..cfg.budgets.geodesic_words {
        let n = rng.gen_range(1..=5);
        let w = random_word(&mut rng, k, n);
        let x = ft.choose(&mut rng).expect("F̃ is nonempty").clone();
        match tz.geodesic_violation(&x, &w, &dist) {
            Ok(None) => t.pass(),
            Ok(Some(v)) => t.fail(v),
            Err(e) => t.error(&e, format!("{} from {x}", show_word(&w))),
        }
    }
    t.note(format!("reduced words of length ≤ 5 from F̃ ({} vertices), round-robin, k = {k}", ft.len())).done()
}

pub fn check_free_homogeneity(cfg: &RunConfig) -> InvariantReport {
    let mut t = Tally::new("free", "free-homogeneity");
    let mut rng = rng_for(cfg, "free-homogeneity");
    let k = cfg.action.free_rank;
    for i in 0..cfg.budgets.free_requirements {
        let mut st = match FreeTupleSetup::canonical(k) {
            Ok(s) => s,
            Err(e) => {
                t.error(&e, "setup");
                return t.done();
            }
        };
        let b = st.backend().clone();
        let pool = b.enumerate(6).expect("limit enumerates");
        let f = pool[..2].to_vec();
        let phi = (0..32)
            .filter_map(|_| {
                let n = rng.gen_range(1..=2);
                random_phi(&mut rng, &b, &pool, n)
            })
            .find(|p| p.pairs().any(|(x, y)| x != y));
        let Some(phi) = phi else {
            t.fail(format!("requirement {i}: no non-identity φ"));
            continue;
        };
        let at = format!("φ={}", show_phi(&phi));
        match free_homogeneity_step(&mut st, &phi, &f, &opts(cfg, TreeMode::Lazy)) {
            Ok(mut step) => {
                let mut bad: Vec<String> = Vec::new();
                for (x, y) in phi.pairs() {
                    match step.omega.apply_word(&step.w, x) {
                        Ok(z) if z == *y => {}
                        Ok(z) => bad.push(format!("ω(w){x} = {z} ≠ {y}")),
                        Err(e) => bad.push(e.to_string()),
                    }
                }
                let support: BTreeSet<VertexTerm> = f.iter().chain(phi.domain()).chain(phi.range()).cloned().collect();
                for x in &support {
                    for j in 0..k {
                        for eps in [1i8, -1] {
                            let (a, o) = (st.apply(j, eps, x), step.omega.apply(j, eps, x));
                            if a.is_err() || a != o {
                                bad.push(format!("ω{}^{eps}({x}) differs from α", j + 1));
                            }
                        }
                    }
                }
                if !is_reduced(&step.w) {
                    bad.push("w is not reduced".into());
                }
                t.check(bad.is_empty(), || format!("{at}, w={}: {}", show_word(&step.w), bad.join("; ")));
            }
            Err(e) => t.error(&e, &at),
        }
    }
    t.note(format!("k = {k}, |d(φ)| ≤ 2, F = the first two vertices, one-point treezation")).done()
}

pub fn check_free_faithfulness(cfg: &RunConfig) -> InvariantReport {
    let mut t = Tally::new("free", "free-faithfulness");
    let mut rng = rng_for(cfg, "free-faithfulness");
    let k = cfg.action.free_rank;
    let built = FreeTupleSetup::canonical(k).and_then(|mut st| {
        let f = st.backend().enumerate(2)?;
        Treezation::new(&mut st, &f, TreeMode::Lazy, cfg.budgets.free_vertices)
    });
    let mut tz = match built {
        Ok(tz) => tz,
        Err(e) => {
            t.error(&e, "treezation");
            return t.done();
        }
    };
    for _ in 0..4 * cfg.budgets.free_requirements {
        let n = rng.gen_range(1..=4);
        let w = random_word(&mut rng, k, n);
        match tz.moved_vertex(&w, 16) {
            Ok(x) => {
                let moved = tz.apply_word(&w, &x).map(|y| y != x).unwrap_or(false);
                t.check(moved, || format!("{} fixes {x}", show_word(&w)));
            }
            Err(e) => t.error(&e, show_word(&w)),
        }
    }
    t.note("reduced words of length ≤ 4 each move some vertex").done()
}

/// Reduced words of length `n` in `k` letters, counted.
pub fn reduced_word_count(k: usize, n: usize) -> usize {
    reduced_words(k, n).len()
}

// ---------------------------------------------------------------- suites

fn suite_checks(name: &str, cfg: &RunConfig) -> Vec<InvariantReport> {
    match name {
        "backends" => vec![check_adjacency(cfg), check_property_r(cfg)],
        "extension" => vec![check_extend(cfg), check_equivariant_extend(cfg)],
        "limits" => {
            let mut v = vec![check_limit_property_r(cfg), check_fixed_points(cfg)];
            v.extend(check_preservation(cfg));
            v
        }
        "amalgam" => {
            let mut v = check_amalgams(cfg);
            v.extend(check_scheduler(cfg).filter(|r| r.suite == "amalgam"));
            v
        }
        "hnn" => {
            let mut v = check_hnns(cfg);
            v.extend(check_scheduler(cfg).filter(|r| r.suite == "hnn"));
            v
        }
        "free" => vec![
            check_elementary_extension(cfg),
            check_treezation_cycles(cfg),
            check_geodesic_law(cfg),
            check_free_homogeneity(cfg),
            check_free_faithfulness(cfg),
        ],
        _ => unreachable!(),
    }
}

pub fn run_suite(name: &str, cfg: &RunConfig) -> Result<SuiteReport> {
    if !SUITES.contains(&name) {
        return Err(Error::UnknownSuite(name.to_string()));
    }
    let invariants: Vec<InvariantReport> = if name == "all" {
        SUITES[..6].iter().flat_map(|s| suite_checks(s, cfg)).collect()
    } else {
        suite_checks(name, cfg)
    };
    Ok(SuiteReport {
        suite: name.to_string(),
        seed: cfg.seed,
        status: combine(invariants.iter().map(|r| r.status)),
        invariants,
    })
}

#[cfg(test)]
mod tests {
    use super::super::config::parse_config;
    use super::*;

    fn small() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.budgets.r_universe = 6;
        cfg.budgets.window = 16;
        cfg.budgets.extend_samples = 5;
        cfg
    }

    #[test]
    fn backends_pass_on_the_default_backend() {
        let r = run_suite("backends", &small()).unwrap();
        assert_eq!(r.status, Status::Pass, "{}", r.to_json());
        assert_eq!(r.invariants[1].instances, 729);
        assert_eq!(r.exit_code(), 0);
    }

    #[test]
    fn flipped_adjacency_is_reported_with_its_pair() {
        let mut cfg = parse_config("[budgets]\nwindow = 8\nr_universe = 4\n[faults]\nflip = [[\"1\", \"3\"]]\n").unwrap();
        cfg.budgets.r_pairs = 100;
        let r = run_suite("backends", &cfg).unwrap();
        assert_eq!(r.status, Status::Fail);
        assert_eq!(r.exit_code(), 1);
        assert!(r.invariants[0].witnesses.iter().any(|w| w.starts_with("(1,3)")), "{:?}", r.invariants[0].witnesses);
    }

    #[test]
    fn unknown_suite() {
        assert_eq!(run_suite("bogus", &small()).unwrap_err(), Error::UnknownSuite("bogus".into()));
    }

    #[test]
    fn budget_exhaustion_is_inconclusive() {
        let mut t = Tally::new("x", "y");
        t.pass();
        t.error(&Error::BudgetExhausted("tiny".into()), "here");
        let r = t.done();
        assert_eq!(r.status, Status::Inconclusive);
        assert_eq!(combine([Status::Pass, r.status]), Status::Inconclusive);
        assert_eq!(combine([Status::Inconclusive, Status::Fail]), Status::Fail);
    }

    #[test]
    fn reports_repeat_exactly() {
        let cfg = small();
        let a = run_suite("extension", &cfg).unwrap().to_json();
        let b = run_suite("extension", &cfg).unwrap().to_json();
        assert_eq!(a, b);
    }

    #[test]
    fn minimal_config_runs_group_suites_vacuously() {
        let cfg = parse_config("[backend]\nkind = \"bit\"\n").unwrap();
        let r = run_suite("amalgam", &cfg).unwrap();
        assert!(r.invariants.is_empty() && r.status == Status::Pass);
    }
}

//! Budgeted witness searches for action properties.
//!
//! Element searches walk the group enumeration (word length, then
//! generator order).  Running out of budget on an infinite group is
//! reported as `BudgetExhausted`; exhausting a finite group is a verified
//! `NotFound`.

use std::collections::HashSet;

use serde::Serialize;

use crate::action::{Action, Rule};
use crate::backend::{check_disjoint, VertexPool};
use crate::error::{Error, Result};
use crate::graph::PartialIso;
use crate::group::Elem;
use crate::term::VertexTerm;

#[derive(Clone, Debug)]
pub enum SearchKind {
    Disconnect(Vec<VertexTerm>),
    HighlyCoreFree { sigma: Vec<Elem>, f: Vec<VertexTerm> },
    PropertyF { s: Vec<Elem>, f: Vec<VertexTerm> },
    Homogeneity(PartialIso),
    Singularity(Vec<VertexTerm>),
}

impl SearchKind {
    pub fn name(&self) -> &'static str {
        match self {
            SearchKind::Disconnect(_) => "disconnect",
            SearchKind::HighlyCoreFree { .. } => "hcf",
            SearchKind::PropertyF { .. } => "property-f",
            SearchKind::Homogeneity(_) => "homogeneity",
            SearchKind::Singularity(_) => "singularity",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Witness {
    Element(Elem),
    Vertex(VertexTerm),
    Singular { u: VertexTerm, g: Elem },
}

/// Subgroup listing with the identity first and duplicates removed.
pub fn normalize_sigma(a: &Action, sigma: &[Elem]) -> Vec<Elem> {
    let mut out = vec![a.group().identity()];
    for s in sigma {
        if !out.contains(s) {
            out.push(s.clone());
        }
    }
    out
}

/// Σ·X as a deduplicated list (orbit by orbit).
pub fn sigma_saturate(a: &Action, sigma: &[Elem], xs: &[VertexTerm]) -> Vec<VertexTerm> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for x in xs {
        for s in sigma {
            let y = a.act_valid(s, x);
            if seen.insert(y.clone()) {
                out.push(y);
            }
        }
    }
    out
}

/// The four highly-core-free clauses for `g` moving `xs`, relative to a
/// Σ-invariant set `avoid` that gX must miss and a set `no_adj` that gX
/// must not touch.  `sigma` lists Σ with the identity first.
pub fn hcf_clauses(
    a: &Action,
    sigma: &[Elem],
    g: &Elem,
    xs: &[VertexTerm],
    avoid: &HashSet<VertexTerm>,
    no_adj: &VertexPool,
) -> bool {
    let b = a.backend();
    let gx = a.act_all(g, xs);
    if gx.iter().any(|y| avoid.contains(y) || no_adj.has_neighbor(b, y)) {
        return false;
    }
    let gpool: VertexPool = gx.iter().collect();
    if gpool.len() < gx.len() {
        return false;
    }
    // Σ-orbits of the gx are pairwise disjoint and σgx ≁ gx'
    let mut seen: HashSet<VertexTerm> = HashSet::new();
    for y in &gx {
        let mut orbit = HashSet::new();
        for s in &sigma[1..] {
            let sy = a.act_valid(s, y);
            if gpool.has_neighbor(b, &sy) || (sy != *y && gpool.contains(&sy)) {
                return false;
            }
            orbit.insert(sy);
        }
        orbit.insert(y.clone());
        if orbit.iter().any(|z| seen.contains(z)) {
            return false;
        }
        seen.extend(orbit);
    }
    true
}

pub fn disconnects(a: &Action, g: &Elem, f: &[VertexTerm]) -> bool {
    let avoid: HashSet<VertexTerm> = f.iter().cloned().collect();
    let pool: VertexPool = f.iter().collect();
    let gf = a.act_all(g, f);
    gf.iter().all(|y| !avoid.contains(y) && !pool.has_neighbor(a.backend(), y))
}

fn exhausted(a: &Action, tried: usize, what: &str) -> Error {
    match a.group().order() {
        Some(n) if tried as u64 >= n => Error::NotFound(format!("no {what} witness in the whole group")),
        _ => Error::BudgetExhausted(format!("no {what} witness among the first {tried} elements")),
    }
}

/// First element among the first `budget` passing `ok`.
pub fn search_elements(a: &Action, budget: usize, what: &str, ok: &mut dyn FnMut(&Elem) -> bool) -> Result<Elem> {
    let elems = a.group().elements(budget);
    for g in &elems {
        if ok(g) {
            return Ok(g.clone());
        }
    }
    Err(exhausted(a, elems.len(), what))
}

pub fn witness_search(a: &Action, kind: &SearchKind, budget: usize) -> Result<Witness> {
    let b = a.backend();
    match kind {
        SearchKind::Disconnect(f) => {
            validate_all(a, f)?;
            search_elements(a, budget, "disconnect", &mut |g| disconnects(a, g, f)).map(Witness::Element)
        }
        SearchKind::HighlyCoreFree { sigma, f } => {
            validate_all(a, f)?;
            check_elems(a, sigma)?;
            let sigma = normalize_sigma(a, sigma);
            let avoid: HashSet<VertexTerm> = sigma_saturate(a, &sigma, f).into_iter().collect();
            let no_adj: VertexPool = f.iter().collect();
            search_elements(a, budget, "highly core-free", &mut |g| hcf_clauses(a, &sigma, g, f, &avoid, &no_adj))
                .map(Witness::Element)
        }
        SearchKind::PropertyF { s, f } => {
            validate_all(a, f)?;
            check_elems(a, s)?;
            property_f(a, s, f, budget).map(Witness::Vertex)
        }
        SearchKind::Homogeneity(phi) => {
            let (ok, bad) = phi.validate(b);
            if !ok {
                return Err(Error::InvalidPartialIso(bad.map(|v| v.to_string()).unwrap_or_default()));
            }
            let dom: Vec<VertexTerm> = phi.domain().cloned().collect();
            validate_all(a, &dom)?;
            let img: Vec<VertexTerm> = phi.range().cloned().collect();
            validate_all(a, &img)?;
            search_elements(a, budget, "homogeneity", &mut |g| {
                dom.iter().all(|x| a.act_valid(g, x) == *phi.get(x).unwrap())
            })
            .map(Witness::Element)
        }
        SearchKind::Singularity(window) => {
            validate_all(a, window)?;
            let elems = a.group().elements(budget);
            for g in elems.iter().filter(|g| !g.is_identity()) {
                for u in window {
                    let gu = a.act_valid(g, u);
                    if gu != *u && b.adj(&gu, u) {
                        return Ok(Witness::Singular { u: u.clone(), g: g.clone() });
                    }
                }
            }
            Err(match a.group().order() {
                Some(n) if elems.len() as u64 >= n => Error::NotFound("no singular pair in the window".into()),
                _ => Error::NotFound(format!(
                    "no singular pair in the window for the first {} elements",
                    elems.len()
                )),
            })
        }
    }
}

fn validate_all(a: &Action, xs: &[VertexTerm]) -> Result<()> {
    for x in xs {
        a.backend().validate(x)?;
    }
    Ok(())
}

fn check_elems(a: &Action, es: &[Elem]) -> Result<()> {
    for e in es {
        if !a.group().contains(e) {
            return Err(Error::InvalidLetter(format!("{e} is not an element of {}", a.group().name())));
        }
    }
    Ok(())
}

/// A vertex off F, non-adjacent to F, moved by every element of S.
///
/// On limit backends this builds x = {y₁,…,yₙ} one stage above F from
/// vertices with g_i y_i ∉ x, padded to a size coprime to l.  Elsewhere it
/// scans the enumeration.
pub fn property_f(a: &Action, s: &[Elem], f: &[VertexTerm], budget: usize) -> Result<VertexTerm> {
    let b = a.backend();
    if s.iter().any(|g| g.is_identity()) {
        return Err(Error::InvalidInput("S must not contain the identity".into()));
    }
    if s.is_empty() {
        return b.property_r_witness(&[], f);
    }
    if matches!(a.rule(), Rule::Trivial) {
        return Err(Error::NotFound("a trivial action moves no vertex".into()));
    }
    let Some(spec) = b.limit_spec() else {
        return Err(Error::InvalidInput("property (F) search needs a limit backend".into()));
    };
    if b.root() != b {
        let pool: VertexPool = f.iter().collect();
        for i in 0..budget {
            let x = b.nth(i)?;
            if !pool.contains(&x) && !pool.has_neighbor(b, &x) && s.iter().all(|g| a.act_valid(g, &x) != x) {
                return Ok(x);
            }
        }
        return Err(Error::BudgetExhausted(format!("no property (F) vertex among {budget} scanned")));
    }
    let fset: HashSet<&VertexTerm> = f.iter().collect();
    let n0 = f.iter().map(|x| x.stage()).max().unwrap_or(0);
    let mut scanned = 0usize;
    for n in n0..n0 + 4 {
        let mut ys: Vec<VertexTerm> = Vec::new();
        let mut moved: Vec<VertexTerm> = Vec::new();
        let mut pad_done = false;
        let mut over = false;
        b.limit_candidate_scan(spec, n, &mut |y| {
            scanned += 1;
            if scanned > budget {
                over = true;
                return false;
            }
            if fset.contains(y) || ys.contains(y) || moved.contains(y) {
                return true;
            }
            let i = ys.len();
            if i < s.len() {
                let gy = a.act_valid(&s[i], y);
                if gy == *y || ys.contains(&gy) {
                    return true;
                }
                ys.push(y.clone());
                moved.push(gy);
                if ys.len() == s.len() && spec.admissible(ys.len()) {
                    pad_done = true;
                    return false;
                }
                return true;
            }
            ys.push(y.clone());
            if spec.admissible(ys.len()) {
                pad_done = true;
                return false;
            }
            true
        })?;
        if over {
            break;
        }
        if pad_done {
            return VertexTerm::set(n + 1, ys);
        }
    }
    Err(Error::BudgetExhausted("no property (F) vertex found".into()))
}

/// Independent re-check of a witness against its defining clauses, using
/// only backend adjacency and the action.
pub fn verify_witness(a: &Action, kind: &SearchKind, w: &Witness) -> bool {
    let b = a.backend();
    let adj = |x: &VertexTerm, y: &VertexTerm| x != y && b.adj(x, y);
    match (kind, w) {
        (SearchKind::Disconnect(f), Witness::Element(g)) => {
            let gf: Vec<VertexTerm> = f.iter().map(|u| a.act_valid(g, u)).collect();
            gf.iter().all(|y| !f.contains(y)) && gf.iter().all(|y| f.iter().all(|v| !adj(y, v)))
        }
        (SearchKind::HighlyCoreFree { sigma, f }, Witness::Element(g)) => {
            let sigma = normalize_sigma(a, sigma);
            let sf: Vec<VertexTerm> = f.iter().flat_map(|u| sigma.iter().map(|s| a.act_valid(s, u))).collect();
            let gf: Vec<VertexTerm> = f.iter().map(|u| a.act_valid(g, u)).collect();
            if gf.iter().any(|y| sf.contains(y)) {
                return false;
            }
            if gf.iter().any(|y| f.iter().any(|v| adj(y, v))) {
                return false;
            }
            for (i, y) in gf.iter().enumerate() {
                let oy: Vec<VertexTerm> = sigma.iter().map(|s| a.act_valid(s, y)).collect();
                for (j, z) in gf.iter().enumerate() {
                    if i != j && sigma.iter().any(|s| oy.contains(&a.act_valid(s, z))) {
                        return false;
                    }
                    if sigma[1..].iter().any(|s| adj(&a.act_valid(s, y), z)) {
                        return false;
                    }
                }
            }
            true
        }
        (SearchKind::PropertyF { s, f }, Witness::Vertex(x)) => {
            b.validate(x).is_ok()
                && !f.contains(x)
                && f.iter().all(|u| !adj(x, u))
                && s.iter().all(|g| a.act_valid(g, x) != *x)
        }
        (SearchKind::Homogeneity(phi), Witness::Element(g)) => phi.pairs().all(|(x, y)| a.act_valid(g, x) == *y),
        (SearchKind::Singularity(window), Witness::Singular { u, g }) => {
            window.contains(u) && adj(&a.act_valid(g, u), u)
        }
        _ => false,
    }
}

/// The disjointness helper re-exported for callers building slices.
pub fn disjoint(u: &[VertexTerm], v: &[VertexTerm]) -> Result<()> {
    check_disjoint(u, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::Backend;
    use crate::group::Group;

    fn z_action() -> Action {
        let z = Group::integers();
        Action::left_mult(z.clone(), Backend::limit_group(z, 1).unwrap()).unwrap()
    }

    #[test]
    fn integers_disconnect_two_points() {
        let a = z_action();
        let f = vec![VertexTerm::elem(Elem::Int(0)), VertexTerm::elem(Elem::Int(1))];
        let kind = SearchKind::Disconnect(f.clone());
        let w = witness_search(&a, &kind, 100).unwrap();
        assert_eq!(w, Witness::Element(Elem::Int(2)));
        assert!(verify_witness(&a, &kind, &w));
        // the trivial subgroup is highly core-free iff the action disconnects
        let hk = SearchKind::HighlyCoreFree { sigma: vec![], f };
        assert_eq!(witness_search(&a, &hk, 100).unwrap(), w);
    }

    #[test]
    fn property_f_with_empty_s_is_property_r() {
        let a = z_action();
        let f = vec![VertexTerm::elem(Elem::Int(0))];
        let w = witness_search(&a, &SearchKind::PropertyF { s: vec![], f: f.clone() }, 100).unwrap();
        assert_eq!(w, Witness::Vertex(a.backend().property_r_witness(&[], &f).unwrap()));
    }

    #[test]
    fn property_f_moves_every_listed_element() {
        let a = z_action();
        let f = vec![a.backend().parse_vertex("{b0,b1}").unwrap()];
        let s = vec![Elem::Int(1), Elem::Int(-1), Elem::Int(5)];
        let kind = SearchKind::PropertyF { s, f };
        let w = witness_search(&a, &kind, 1000).unwrap();
        assert!(verify_witness(&a, &kind, &w));
    }

    #[test]
    fn left_multiplication_is_not_singular() {
        let a = z_action();
        let window = a.backend().enumerate(30).unwrap();
        assert!(matches!(
            witness_search(&a, &SearchKind::Singularity(window), 20),
            Err(Error::NotFound(_))
        ));
    }
}

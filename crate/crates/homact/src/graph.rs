//! Finite graphs, open morphisms and the groupoid of partial isomorphisms.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::backend::Backend;
use crate::error::{Error, Result};
use crate::term::VertexTerm;

/// Undirected simple graph on listed vertices.  Edges are stored once, as
/// (smaller, larger) in the canonical term order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteGraph {
    vertices: Vec<VertexTerm>,
    edges: BTreeSet<(VertexTerm, VertexTerm)>,
}

fn edge(u: &VertexTerm, v: &VertexTerm) -> (VertexTerm, VertexTerm) {
    if u < v {
        (u.clone(), v.clone())
    } else {
        (v.clone(), u.clone())
    }
}

impl FiniteGraph {
    pub fn new(vertices: Vec<VertexTerm>, edges: impl IntoIterator<Item = (VertexTerm, VertexTerm)>) -> Result<FiniteGraph> {
        let vs: HashSet<&VertexTerm> = vertices.iter().collect();
        if vs.len() != vertices.len() {
            return Err(Error::InvalidInput("repeated vertex".into()));
        }
        let mut es = BTreeSet::new();
        for (u, v) in edges {
            if u == v {
                return Err(Error::InvalidInput(format!("loop at {u}")));
            }
            for x in [&u, &v] {
                if !vs.contains(x) {
                    return Err(Error::InvalidVertex(format!("edge endpoint {x} is not listed")));
                }
            }
            es.insert(edge(&u, &v));
        }
        Ok(FiniteGraph { vertices, edges: es })
    }

    pub fn empty() -> FiniteGraph {
        FiniteGraph { vertices: vec![], edges: BTreeSet::new() }
    }

    /// Induced subgraph of a backend on the given window.
    pub fn induced(window: &[VertexTerm], backend: &Backend) -> Result<FiniteGraph> {
        let mut seen = HashSet::new();
        for x in window {
            backend.validate(x)?;
            if !seen.insert(x) {
                return Err(Error::InvalidInput(format!("vertex {x} repeated")));
            }
        }
        let mut edges = BTreeSet::new();
        for (i, u) in window.iter().enumerate() {
            for v in &window[i + 1..] {
                if backend.adj(u, v) {
                    edges.insert(edge(u, v));
                }
            }
        }
        Ok(FiniteGraph { vertices: window.to_vec(), edges })
    }

    pub fn vertices(&self) -> &[VertexTerm] {
        &self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = &(VertexTerm, VertexTerm)> {
        self.edges.iter()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_vertex(&self, x: &VertexTerm) -> bool {
        self.vertices.contains(x)
    }

    pub fn adjacent(&self, u: &VertexTerm, v: &VertexTerm) -> bool {
        u != v && self.edges.contains(&edge(u, v))
    }

    /// Same vertex set and edges, ignoring vertex order.
    pub fn same_graph(&self, other: &FiniteGraph) -> bool {
        let a: BTreeSet<_> = self.vertices.iter().collect();
        let b: BTreeSet<_> = other.vertices.iter().collect();
        a == b && self.edges == other.edges
    }

    /// Edges as vertex strings with u < v lexicographically, sorted.
    fn string_edges(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = self
            .edges
            .iter()
            .map(|(u, v)| {
                let (a, b) = (u.to_string(), v.to_string());
                if a < b {
                    (a, b)
                } else {
                    (b, a)
                }
            })
            .collect();
        out.sort();
        out
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("graph G {\n");
        let names: Vec<String> = self.vertices.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "  // vertices: {}", names.join(" "));
        for n in &names {
            let _ = writeln!(s, "  \"{n}\";");
        }
        for (u, v) in self.string_edges() {
            let _ = writeln!(s, "  \"{u}\" -- \"{v}\";");
        }
        s.push_str("}\n");
        s
    }

    /// One `{"u": .., "v": ..}` record per edge.  Isolated vertices are not
    /// represented.
    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for (u, v) in self.string_edges() {
            let rec = EdgeRecord { u, v };
            s.push_str(&serde_json::to_string(&rec).expect("edge record"));
            s.push('\n');
        }
        s
    }

    /// Reads edge records; the vertex list is the sorted set of endpoints.
    pub fn from_jsonl(text: &str, backend: &Backend) -> Result<FiniteGraph> {
        let mut verts = BTreeSet::new();
        let mut edges = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: EdgeRecord = serde_json::from_str(line).map_err(|e| Error::ParseError {
                line: i + 1,
                col: e.column(),
                msg: e.to_string(),
            })?;
            let u = backend.parse_vertex(&rec.u)?;
            let v = backend.parse_vertex(&rec.v)?;
            verts.insert(u.clone());
            verts.insert(v.clone());
            edges.push((u, v));
        }
        FiniteGraph::new(verts.into_iter().collect(), edges)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeRecord {
    u: String,
    v: String,
}

/// Finite injective map between backend vertices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PartialIso {
    fwd: BTreeMap<VertexTerm, VertexTerm>,
    bwd: BTreeMap<VertexTerm, VertexTerm>,
}

/// Why a candidate map is not a partial isomorphism.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Violation {
    InvalidVertex(String),
    RepeatedDomain(String),
    NotInjective { x: String, x2: String, y: String },
    Adjacency { u: String, v: String, domain_adjacent: bool, images: (String, String) },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::InvalidVertex(s) => write!(f, "invalid vertex {s}"),
            Violation::RepeatedDomain(x) => write!(f, "{x} mapped twice"),
            Violation::NotInjective { x, x2, y } => write!(f, "{x} and {x2} both map to {y}"),
            Violation::Adjacency { u, v, domain_adjacent, images } => write!(
                f,
                "({u},{v}) {} but ({},{}) {}",
                if *domain_adjacent { "adjacent" } else { "not adjacent" },
                images.0,
                images.1,
                if *domain_adjacent { "not adjacent" } else { "adjacent" }
            ),
        }
    }
}

/// Checks injectivity and two-sided adjacency preservation, reporting the
/// first violation in input order.
pub fn validate_partial_iso(pairs: &[(VertexTerm, VertexTerm)], backend: &Backend) -> (bool, Option<Violation>) {
    let mut seen_x: BTreeMap<&VertexTerm, &VertexTerm> = BTreeMap::new();
    let mut seen_y: BTreeMap<&VertexTerm, &VertexTerm> = BTreeMap::new();
    for (x, y) in pairs {
        for v in [x, y] {
            if let Err(e) = backend.validate(v) {
                return (false, Some(Violation::InvalidVertex(e.to_string())));
            }
        }
        if seen_x.insert(x, y).is_some() {
            return (false, Some(Violation::RepeatedDomain(x.to_string())));
        }
        if let Some(x0) = seen_y.insert(y, x) {
            return (
                false,
                Some(Violation::NotInjective { x: x0.to_string(), x2: x.to_string(), y: y.to_string() }),
            );
        }
    }
    for (i, (u, fu)) in pairs.iter().enumerate() {
        for (v, fv) in &pairs[i + 1..] {
            let a = backend.adj(u, v);
            if a != backend.adj(fu, fv) {
                return (
                    false,
                    Some(Violation::Adjacency {
                        u: u.to_string(),
                        v: v.to_string(),
                        domain_adjacent: a,
                        images: (fu.to_string(), fv.to_string()),
                    }),
                );
            }
        }
    }
    (true, None)
}

impl PartialIso {
    pub fn new() -> PartialIso {
        PartialIso::default()
    }

    /// Validated construction.
    pub fn from_pairs(pairs: Vec<(VertexTerm, VertexTerm)>, backend: &Backend) -> Result<PartialIso> {
        match validate_partial_iso(&pairs, backend) {
            (true, _) => Ok(PartialIso::from_pairs_unchecked(pairs)),
            (false, v) => Err(Error::InvalidPartialIso(v.map(|v| v.to_string()).unwrap_or_default())),
        }
    }

    pub fn from_pairs_unchecked(pairs: impl IntoIterator<Item = (VertexTerm, VertexTerm)>) -> PartialIso {
        let mut p = PartialIso::new();
        for (x, y) in pairs {
            p.insert(x, y);
        }
        p
    }

    pub fn identity(vs: impl IntoIterator<Item = VertexTerm>) -> PartialIso {
        PartialIso::from_pairs_unchecked(vs.into_iter().map(|x| (x.clone(), x)))
    }

    pub fn insert(&mut self, x: VertexTerm, y: VertexTerm) {
        self.fwd.insert(x.clone(), y.clone());
        self.bwd.insert(y, x);
    }

    pub fn get(&self, x: &VertexTerm) -> Option<&VertexTerm> {
        self.fwd.get(x)
    }

    pub fn get_inv(&self, y: &VertexTerm) -> Option<&VertexTerm> {
        self.bwd.get(y)
    }

    pub fn len(&self) -> usize {
        self.fwd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fwd.is_empty()
    }

    pub fn domain(&self) -> impl Iterator<Item = &VertexTerm> {
        self.fwd.keys()
    }

    pub fn range(&self) -> impl Iterator<Item = &VertexTerm> {
        self.bwd.keys()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&VertexTerm, &VertexTerm)> {
        self.fwd.iter()
    }

    pub fn to_pairs(&self) -> Vec<(VertexTerm, VertexTerm)> {
        self.fwd.iter().map(|(a, b)| (a.clone(), b.clone())).collect()
    }

    pub fn validate(&self, backend: &Backend) -> (bool, Option<Violation>) {
        validate_partial_iso(&self.to_pairs(), backend)
    }

    pub fn invert(&self) -> PartialIso {
        PartialIso { fwd: self.bwd.clone(), bwd: self.fwd.clone() }
    }

    /// self ∘ other, defined on other⁻¹(r(other) ∩ d(self)).
    pub fn compose(&self, other: &PartialIso) -> PartialIso {
        PartialIso::from_pairs_unchecked(
            other.fwd.iter().filter_map(|(x, y)| self.fwd.get(y).map(|z| (x.clone(), z.clone()))),
        )
    }

    pub fn restrict(&self, dom: &BTreeSet<VertexTerm>) -> PartialIso {
        PartialIso::from_pairs_unchecked(
            self.fwd.iter().filter(|(x, _)| dom.contains(*x)).map(|(a, b)| (a.clone(), b.clone())),
        )
    }

    /// Extends self by other; fails on conflicting pairs.
    pub fn union(&self, other: &PartialIso) -> Result<PartialIso> {
        let mut out = self.clone();
        for (x, y) in other.pairs() {
            match (out.fwd.get(x), out.bwd.get(y)) {
                (Some(y0), _) if y0 != y => return Err(Error::CommitConflict(format!("{x} ↦ {y0} and {y}"))),
                (_, Some(x0)) if x0 != x => return Err(Error::CommitConflict(format!("{x0} and {x} ↦ {y}"))),
                _ => out.insert(x.clone(), y.clone()),
            }
        }
        Ok(out)
    }
}

/// u ∼ v ⇔ π(u) ∼ π(v) for all distinct u, v of G1.
pub fn is_open_morphism(g1: &FiniteGraph, g2: &FiniteGraph, map: &BTreeMap<VertexTerm, VertexTerm>) -> Result<bool> {
    for x in g1.vertices() {
        let Some(y) = map.get(x) else {
            return Err(Error::InvalidInput(format!("map is not defined at {x}")));
        };
        if !g2.has_vertex(y) {
            return Err(Error::InvalidVertex(format!("{y} is not a vertex of the target")));
        }
    }
    let vs = g1.vertices();
    for (i, u) in vs.iter().enumerate() {
        for v in &vs[i + 1..] {
            if g1.adjacent(u, v) != g2.adjacent(&map[u], &map[v]) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(v: u64) -> VertexTerm {
        VertexTerm::nat(v)
    }

    #[test]
    fn induced_bit_windows() {
        let b = Backend::bit();
        assert_eq!(FiniteGraph::induced(&[], &b).unwrap().edge_count(), 0);
        assert_eq!(FiniteGraph::induced(&[n(0), n(1)], &b).unwrap().edge_count(), 1);
        assert_eq!(FiniteGraph::induced(&[n(0), n(2)], &b).unwrap().edge_count(), 0);
        let w: Vec<_> = (0..8).map(n).collect();
        let brute = (0..8u64).flat_map(|j| (0..j).map(move |i| (i, j))).filter(|(i, j)| j >> i & 1 == 1).count();
        assert_eq!(brute, 12);
        assert_eq!(FiniteGraph::induced(&w, &b).unwrap().edge_count(), 12);
        let w9: Vec<_> = (0..9).map(n).collect();
        assert_eq!(FiniteGraph::induced(&w9, &b).unwrap().edge_count(), 13);
    }

    #[test]
    fn partial_iso_checks() {
        let b = Backend::bit();
        assert_eq!(validate_partial_iso(&[], &b), (true, None));
        let (ok, v) = validate_partial_iso(&[(n(0), n(2)), (n(1), n(3))], &b);
        assert!(!ok);
        match v.unwrap() {
            Violation::Adjacency { u, v, domain_adjacent, .. } => {
                assert_eq!((u.as_str(), v.as_str(), domain_adjacent), ("0", "1", true))
            }
            other => panic!("{other:?}"),
        }
        let ident: Vec<_> = (0..10).map(|i| (n(i), n(i))).collect();
        assert!(validate_partial_iso(&ident, &b).0);
    }

    #[test]
    fn groupoid_ops() {
        let phi = PartialIso::from_pairs_unchecked([(n(0), n(5))]);
        assert_eq!(phi.invert().to_pairs(), vec![(n(5), n(0))]);
        let a = PartialIso::from_pairs_unchecked([(n(2), n(4))]);
        let b = PartialIso::from_pairs_unchecked([(n(0), n(2))]);
        assert_eq!(a.compose(&b).to_pairs(), vec![(n(0), n(4))]);
        let back = phi.compose(&phi.invert());
        assert_eq!(back.to_pairs(), vec![(n(5), n(5))]);
        assert!(a.compose(&phi).is_empty());
    }

    #[test]
    fn open_morphisms() {
        let b = Backend::bit();
        let w: Vec<_> = (0..6).map(n).collect();
        let g = FiniteGraph::induced(&w, &b).unwrap();
        let id: BTreeMap<_, _> = w.iter().map(|x| (x.clone(), x.clone())).collect();
        assert!(is_open_morphism(&g, &g, &id).unwrap());
        let sub = FiniteGraph::induced(&w[1..4], &b).unwrap();
        let incl: BTreeMap<_, _> = w[1..4].iter().map(|x| (x.clone(), x.clone())).collect();
        assert!(is_open_morphism(&sub, &g, &incl).unwrap());
        let e = FiniteGraph::new(vec![n(0), n(1)], [(n(0), n(1))]).unwrap();
        let none = FiniteGraph::new(vec![n(0), n(1)], []).unwrap();
        assert!(!is_open_morphism(&e, &none, &BTreeMap::from([(n(0), n(0)), (n(1), n(1))])).unwrap());
        assert!(!is_open_morphism(&e, &none, &BTreeMap::from([(n(0), n(1)), (n(1), n(0))])).unwrap());
    }

    #[test]
    fn serialization_round_trip() {
        let b = Backend::bit();
        let w: Vec<_> = (0..8).map(n).collect();
        let g = FiniteGraph::induced(&w, &b).unwrap();
        let text = g.to_jsonl();
        assert_eq!(text.lines().count(), 12);
        assert!(text.starts_with("{\"u\":\"0\",\"v\":\"1\"}\n"));
        assert!(FiniteGraph::from_jsonl(&text, &b).unwrap().same_graph(&g));
        let dot = FiniteGraph::empty().to_dot();
        assert_eq!(dot, "graph G {\n  // vertices: \n}\n");
    }
}

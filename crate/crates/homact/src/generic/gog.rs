//! Graphs of groups, cut along one edge.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::group::{check_hom, Amalgam, Elem, FiniteTable, Group, GroupKind, Hnn};

/// One geometric edge e with its reverse ē implicit: s_ē = r_e.
#[derive(Clone, Debug)]
pub struct GogEdge {
    pub name: String,
    pub source: usize,
    pub target: usize,
    pub sigma: FiniteTable,
    /// s_e : Σ_e → Γ_source.
    pub s: Vec<Elem>,
    /// r_e : Σ_e → Γ_target.
    pub r: Vec<Elem>,
}

#[derive(Clone, Debug)]
pub struct GraphOfGroups {
    pub vertices: Vec<(String, Group)>,
    pub edges: Vec<GogEdge>,
    /// Indices of the edges of the maximal subtree.
    pub tree: Vec<usize>,
}

/// A piece of the graph whose fundamental group is a factor.
#[derive(Clone, Debug, Serialize)]
pub struct Piece {
    pub vertices: Vec<String>,
    pub edges: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EmbeddingData {
    pub vertex: String,
    pub images: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind")]
pub enum Decomposition {
    /// Γ = Γ₁ ∗_{Σ_{e₀}} Γ₂ via s_{e₀} and r_{e₀}.
    Amalgam { edge: String, gamma1: Piece, gamma2: Piece, sigma_order: u32, s: EmbeddingData, r: EmbeddingData },
    /// Γ = HNN(H, Σ, θ) with Σ = r_{e₀}(Σ_{e₀}) and θ = s_{e₀}∘r_{e₀}⁻¹.
    Hnn { edge: String, h: Piece, sigma_order: u32, sigma: EmbeddingData, theta: Vec<(String, String)> },
}

fn connected_components(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut comp: Vec<usize> = (0..n).collect();
    fn find(c: &mut Vec<usize>, x: usize) -> usize {
        let mut r = x;
        while c[r] != r {
            r = c[r];
        }
        c[x] = r;
        r
    }
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut comp, a), find(&mut comp, b));
        comp[ra] = rb;
    }
    (0..n).map(|x| find(&mut comp, x)).collect()
}

impl GraphOfGroups {
    pub fn new(vertices: Vec<(String, Group)>, edges: Vec<GogEdge>, tree: Vec<usize>) -> Result<GraphOfGroups> {
        let n = vertices.len();
        if n == 0 {
            return Err(Error::ValidationError { field: "vertices".into(), msg: "empty graph".into() });
        }
        let mut names = BTreeSet::new();
        for (name, _) in &vertices {
            if !names.insert(name.clone()) {
                return Err(Error::ValidationError { field: "vertices".into(), msg: format!("duplicate {name}") });
            }
        }
        for e in &edges {
            if e.source >= n || e.target >= n {
                return Err(Error::InvalidEdge(format!("{} has an endpoint out of range", e.name)));
            }
            check_hom(&format!("{}.s", e.name), &e.sigma, &vertices[e.source].1, &e.s)?;
            check_hom(&format!("{}.r", e.name), &e.sigma, &vertices[e.target].1, &e.r)?;
        }
        let tree_edges: Vec<(usize, usize)> = tree
            .iter()
            .map(|&i| edges.get(i).map(|e| (e.source, e.target)).ok_or_else(|| Error::InvalidEdge(format!("tree edge {i}"))))
            .collect::<Result<_>>()?;
        let comp = connected_components(n, &tree_edges);
        if tree.len() != n - 1 || comp.iter().collect::<BTreeSet<_>>().len() != 1 {
            return Err(Error::ValidationError { field: "tree".into(), msg: "not a spanning tree".into() });
        }
        Ok(GraphOfGroups { vertices, edges, tree })
    }

    /// Vertex groups infinite and edge groups finite.
    pub fn hypotheses(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, g) in &self.vertices {
            if g.is_finite() {
                out.push(format!("vertex group {name} is finite"));
            }
        }
        out
    }

    fn piece(&self, keep: &dyn Fn(usize) -> bool, skip: usize) -> Piece {
        Piece {
            vertices: (0..self.vertices.len()).filter(|&v| keep(v)).map(|v| self.vertices[v].0.clone()).collect(),
            edges: self
                .edges
                .iter()
                .enumerate()
                .filter(|(i, e)| *i != skip && keep(e.source))
                .map(|(_, e)| e.name.clone())
                .collect(),
        }
    }

    pub fn edge_index(&self, name: &str) -> Result<usize> {
        self.edges.iter().position(|e| e.name == name).ok_or_else(|| Error::InvalidEdge(name.to_string()))
    }

    pub fn decompose(&self, e0: usize) -> Result<Decomposition> {
        let e = self.edges.get(e0).ok_or_else(|| Error::InvalidEdge(format!("no edge {e0}")))?;
        let rest: Vec<(usize, usize)> =
            self.edges.iter().enumerate().filter(|(i, _)| *i != e0).map(|(_, e)| (e.source, e.target)).collect();
        let comp = connected_components(self.vertices.len(), &rest);
        let show = |v: usize, xs: &[Elem]| EmbeddingData {
            vertex: self.vertices[v].0.clone(),
            images: xs.iter().map(|x| x.to_string()).collect(),
        };
        if comp[e.source] == comp[e.target] {
            let theta = e.r.iter().zip(&e.s).map(|(a, b)| (a.to_string(), b.to_string())).collect();
            Ok(Decomposition::Hnn {
                edge: e.name.clone(),
                h: self.piece(&|_| true, e0),
                sigma_order: e.sigma.order(),
                sigma: show(e.target, &e.r),
                theta,
            })
        } else {
            let c1 = comp[e.source];
            let c2 = comp[e.target];
            Ok(Decomposition::Amalgam {
                edge: e.name.clone(),
                gamma1: self.piece(&|v| comp[v] == c1, e0),
                gamma2: self.piece(&|v| comp[v] == c2, e0),
                sigma_order: e.sigma.order(),
                s: show(e.source, &e.s),
                r: show(e.target, &e.r),
            })
        }
    }

    /// The group itself when every piece left after the cut is a single
    /// vertex group.
    pub fn realize(&self, e0: usize) -> Result<Group> {
        let e = self.edges.get(e0).ok_or_else(|| Error::InvalidEdge(format!("no edge {e0}")))?;
        match self.decompose(e0)? {
            Decomposition::Hnn { h, .. } if h.vertices.len() == 1 && h.edges.is_empty() => {
                let g = self.vertices[e.target].1.clone();
                let hnn = Hnn::new(g, e.sigma.clone(), e.r.clone(), e.s.clone())?;
                Ok(Group::new(format!("HNN({},{})", self.vertices[e.target].0, e.name), GroupKind::Hnn(hnn)))
            }
            Decomposition::Amalgam { gamma1, gamma2, .. } if gamma1.edges.is_empty() && gamma2.edges.is_empty() => {
                let g1 = self.vertices[e.source].1.clone();
                let g2 = self.vertices[e.target].1.clone();
                let name = format!("{}*{}", self.vertices[e.source].0, self.vertices[e.target].0);
                let am = Amalgam::new(g1, g2, e.sigma.clone(), e.s.clone(), e.r.clone(), [None, None])?;
                Ok(Group::new(name, GroupKind::Amalgam(am)))
            }
            _ => Err(Error::InvalidInput("only single-vertex pieces can be realized".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge(name: &str, s: usize, t: usize) -> GogEdge {
        GogEdge {
            name: name.into(),
            source: s,
            target: t,
            sigma: FiniteTable::cyclic(2),
            s: vec![Elem::Int(0), Elem::Int(3)],
            r: vec![Elem::Int(0), Elem::Int(1)],
        }
    }

    #[test]
    fn segment_is_an_amalgam() {
        let g = GraphOfGroups::new(
            vec![("p".into(), Group::cyclic(6)), ("q".into(), Group::cyclic(2))],
            vec![edge("e", 0, 1)],
            vec![0],
        )
        .unwrap();
        assert!(matches!(g.decompose(0).unwrap(), Decomposition::Amalgam { .. }));
        let grp = g.realize(0).unwrap();
        assert_eq!(grp.order(), Some(6));
        assert!(matches!(g.decompose(3), Err(Error::InvalidEdge(_))));
    }

    #[test]
    fn loop_is_an_hnn_extension() {
        let mut e = edge("t", 0, 0);
        e.s = vec![Elem::Int(0), Elem::Int(3)];
        e.r = vec![Elem::Int(0), Elem::Int(3)];
        let g = GraphOfGroups::new(vec![("p".into(), Group::cyclic(6))], vec![e], vec![]).unwrap();
        match g.decompose(0).unwrap() {
            Decomposition::Hnn { theta, .. } => assert_eq!(theta, vec![("0".into(), "0".into()), ("3".into(), "3".into())]),
            d => panic!("{d:?}"),
        }
        assert!(g.realize(0).unwrap().as_hnn().is_some());
    }

    #[test]
    fn triangle_cut_stays_connected() {
        let z = || Group::integers();
        let triv = |n: &str, s, t| GogEdge {
            name: n.into(),
            source: s,
            target: t,
            sigma: FiniteTable::trivial(),
            s: vec![Elem::Int(0)],
            r: vec![Elem::Int(0)],
        };
        let g = GraphOfGroups::new(
            vec![("a".into(), z()), ("b".into(), z()), ("c".into(), z())],
            vec![triv("ab", 0, 1), triv("bc", 1, 2), triv("ca", 2, 0)],
            vec![0, 1],
        )
        .unwrap();
        assert!(matches!(g.decompose(2).unwrap(), Decomposition::Hnn { .. }));
        assert!(GraphOfGroups::new(g.vertices.clone(), g.edges.clone(), vec![0]).is_err());
    }
}

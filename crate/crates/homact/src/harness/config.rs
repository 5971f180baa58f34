//! Run configuration: TOML text in, validated `RunConfig` out.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::backend::{Backend, Seed};
use crate::error::{Error, Result};
use crate::generic::gog::{GogEdge, GraphOfGroups};
use crate::group::{Amalgam, Elem, FiniteTable, Group, GroupKind, Hnn};
use crate::term::VertexTerm;

pub const DEFAULT_CONFIG: &str = include_str!("default.toml");

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    seed: u64,
    backend: Option<RawBackend>,
    limit: Option<RawSeed>,
    #[serde(default)]
    groups: Vec<RawGroup>,
    action: Option<RawAction>,
    #[serde(default)]
    budgets: Budgets,
    output: Option<Outputs>,
    faults: Option<RawFaults>,
    gog: Option<RawGog>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBackend {
    kind: String,
    seed_vertices: Option<u32>,
    seed_edges: Option<Vec<(u32, u32)>>,
    l: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSeed {
    seed_vertices: u32,
    #[serde(default)]
    seed_edges: Vec<(u32, u32)>,
    #[serde(default = "one")]
    l: u64,
}

fn one() -> u64 {
    1
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGroup {
    name: String,
    kind: String,
    order: Option<u64>,
    rank: Option<u32>,
    permutations: Option<Vec<Vec<u32>>>,
    left: Option<String>,
    right: Option<String>,
    base: Option<String>,
    sigma_order: Option<u32>,
    s: Option<Vec<String>>,
    r: Option<Vec<String>>,
    embedding: Option<Vec<String>>,
    theta: Option<Vec<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAction {
    sigma_group: Option<String>,
    #[serde(default)]
    sigma: Vec<String>,
    #[serde(default)]
    amalgams: Vec<String>,
    #[serde(default)]
    hnns: Vec<String>,
    scheduler: Option<String>,
    #[serde(default = "two")]
    free_rank: usize,
}

fn two() -> usize {
    2
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFaults {
    #[serde(default)]
    flip: Vec<(String, String)>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGog {
    /// (vertex name, group name) pairs.
    vertices: Vec<(String, String)>,
    #[serde(default)]
    edges: Vec<RawGogEdge>,
    #[serde(default)]
    tree: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGogEdge {
    name: String,
    source: String,
    target: String,
    sigma_order: u32,
    s: Vec<String>,
    r: Vec<String>,
}

/// Search, step and window sizes.  Every budget must be positive.
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(deny_unknown_fields, default)]
pub struct Budgets {
    /// Group elements tried by witness searches and density steps.
    pub search: usize,
    /// Scheduler steps.
    pub steps: usize,
    /// Vertices forced by `verify_window` after plain extension.
    pub window: usize,
    /// Property (R) is checked for all disjoint U, V inside the first
    /// `r_universe` vertices.
    pub r_universe: usize,
    /// Above this many (U, V) pairs a property (R) window is sampled.
    pub r_pairs: usize,
    pub extend_samples: usize,
    pub equivariant_samples: usize,
    pub equivariant_window: usize,
    pub preservation_sets: usize,
    pub density_requirements: usize,
    pub hnn_requirements: usize,
    pub elementary_samples: usize,
    pub treezation_sets: usize,
    pub geodesic_words: usize,
    pub free_requirements: usize,
    /// Universe cap of a treezation.
    pub free_vertices: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            search: 300,
            steps: 12,
            window: 50,
            r_universe: 12,
            r_pairs: 600_000,
            extend_samples: 100,
            equivariant_samples: 25,
            equivariant_window: 40,
            preservation_sets: 20,
            density_requirements: 20,
            hnn_requirements: 10,
            elementary_samples: 50,
            treezation_sets: 10,
            geodesic_words: 100,
            free_requirements: 5,
            free_vertices: 200_000,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    pub report: Option<String>,
    pub certificates: Option<String>,
}

#[derive(Clone, Debug)]
pub enum BackendSpec {
    Bit,
    Limit { seed: Seed, l: u64 },
}

impl BackendSpec {
    pub fn build(&self) -> Result<Backend> {
        match self {
            BackendSpec::Bit => Ok(Backend::bit()),
            BackendSpec::Limit { seed, l } => Backend::limit(seed.clone(), *l),
        }
    }
}

/// Which configured groups the group suites run on.
#[derive(Clone, Debug, Default)]
pub struct ActionWiring {
    /// Group and finite subgroup Σ for the equivariant and preservation
    /// checks.
    pub sigma_group: Option<String>,
    pub sigma: Vec<Elem>,
    pub amalgams: Vec<String>,
    pub hnns: Vec<String>,
    pub scheduler: Option<String>,
    pub free_rank: usize,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    /// Seeds random sampling in the suites only.
    pub seed: u64,
    pub backend: BackendSpec,
    /// Finite seed of the limit checked by the `limits` suite.
    pub limit: (Seed, u64),
    pub groups: Vec<(String, Group)>,
    pub action: ActionWiring,
    pub budgets: Budgets,
    pub output: Outputs,
    /// Adjacencies flipped in the backend checks.  Test hook only.
    pub faults: Vec<(VertexTerm, VertexTerm)>,
    pub gog: Option<GraphOfGroups>,
}

impl Default for RunConfig {
    fn default() -> Self {
        parse_config(DEFAULT_CONFIG).expect("the default configuration is valid")
    }
}

impl RunConfig {
    pub fn group(&self, name: &str) -> Option<&Group> {
        self.groups.iter().find(|(n, _)| n == name).map(|(_, g)| g)
    }
}

fn invalid(field: impl Into<String>, msg: impl Into<String>) -> Error {
    Error::ValidationError { field: field.into(), msg: msg.into() }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let (line, col) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        Error::ParseError { line, col, msg: e.message().to_string() }
    })?;

    let backend = match raw.backend {
        None => BackendSpec::Bit,
        Some(b) => match b.kind.as_str() {
            "bit" => {
                if b.seed_vertices.is_some() || b.seed_edges.is_some() || b.l.is_some() {
                    return Err(invalid("backend", "the bit backend takes no seed or parameter"));
                }
                BackendSpec::Bit
            }
            "limit" => {
                let n = b.seed_vertices.ok_or_else(|| invalid("backend.seed_vertices", "a limit needs a seed"))?;
                let (seed, l) = seed_spec("backend", n, &b.seed_edges.unwrap_or_default(), b.l.unwrap_or(1))?;
                BackendSpec::Limit { seed, l }
            }
            k => return Err(invalid("backend.kind", format!("unknown backend {k:?}; use bit or limit"))),
        },
    };
    let limit = match raw.limit {
        Some(s) => seed_spec("limit", s.seed_vertices, &s.seed_edges, s.l)?,
        None => (Seed::graph(3, &[(0, 1)])?, 1),
    };

    let mut groups: Vec<(String, Group)> = Vec::new();
    for (i, g) in raw.groups.iter().enumerate() {
        let field = format!("groups[{i}]");
        if g.name.trim().is_empty() {
            return Err(invalid(format!("{field}.name"), "empty name"));
        }
        if groups.iter().any(|(n, _)| *n == g.name) {
            return Err(invalid(format!("{field}.name"), format!("duplicate group name {:?}", g.name)));
        }
        let grp = build_group(&field, g, &groups)?;
        groups.push((g.name.clone(), grp));
    }

    let lookup = |field: &str, name: &str| -> Result<Group> {
        groups
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, g)| g.clone())
            .ok_or_else(|| invalid(field, format!("no group named {name:?}")))
    };
    let action = match raw.action {
        None => ActionWiring { free_rank: 2, ..Default::default() },
        Some(a) => {
            let mut sigma = Vec::new();
            if let Some(name) = &a.sigma_group {
                let g = lookup("action.sigma_group", name)?;
                if g.is_finite() {
                    return Err(invalid("action.sigma_group", format!("{name} is finite")));
                }
                for (j, s) in a.sigma.iter().enumerate() {
                    sigma.push(g.parse(s).map_err(|e| invalid(format!("action.sigma[{j}]"), e.to_string()))?);
                }
            } else if !a.sigma.is_empty() {
                return Err(invalid("action.sigma", "Σ is given without action.sigma_group"));
            }
            for (j, name) in a.amalgams.iter().enumerate() {
                if lookup(&format!("action.amalgams[{j}]"), name)?.as_amalgam().is_none() {
                    return Err(invalid(format!("action.amalgams[{j}]"), format!("{name} is not an amalgam")));
                }
            }
            for (j, name) in a.hnns.iter().enumerate() {
                if lookup(&format!("action.hnns[{j}]"), name)?.as_hnn().is_none() {
                    return Err(invalid(format!("action.hnns[{j}]"), format!("{name} is not an HNN extension")));
                }
            }
            if let Some(name) = &a.scheduler {
                let g = lookup("action.scheduler", name)?;
                if g.as_amalgam().is_none() && g.as_hnn().is_none() {
                    return Err(invalid("action.scheduler", format!("{name} is neither an amalgam nor an HNN extension")));
                }
            }
            if a.free_rank < 2 {
                return Err(invalid("action.free_rank", "the free step needs rank at least 2"));
            }
            ActionWiring {
                sigma_group: a.sigma_group,
                sigma,
                amalgams: a.amalgams,
                hnns: a.hnns,
                scheduler: a.scheduler,
                free_rank: a.free_rank,
            }
        }
    };

    if let serde_json::Value::Object(m) = serde_json::to_value(&raw.budgets).expect("budgets serialize") {
        for (k, v) in m {
            if v.as_u64() == Some(0) {
                return Err(invalid(format!("budgets.{k}"), "budgets must be positive"));
            }
        }
    }

    let mut faults = Vec::new();
    if let Some(f) = raw.faults {
        let b = backend.build()?;
        for (j, (x, y)) in f.flip.iter().enumerate() {
            let field = format!("faults.flip[{j}]");
            let x = b.parse_vertex(x).map_err(|e| invalid(&field, e.to_string()))?;
            let y = b.parse_vertex(y).map_err(|e| invalid(&field, e.to_string()))?;
            if x == y {
                return Err(invalid(field, "a loop cannot be flipped"));
            }
            faults.push((x, y));
        }
    }

    let gog = match raw.gog {
        None => None,
        Some(g) => Some(build_gog(&g, &groups)?),
    };

    Ok(RunConfig {
        seed: raw.seed,
        backend,
        limit,
        groups,
        action,
        budgets: raw.budgets,
        output: raw.output.unwrap_or_default(),
        faults,
        gog,
    })
}

fn build_gog(raw: &RawGog, known: &[(String, Group)]) -> Result<GraphOfGroups> {
    let mut vertices = Vec::new();
    for (i, (v, g)) in raw.vertices.iter().enumerate() {
        let grp = known
            .iter()
            .find(|(n, _)| n == g)
            .map(|(_, g)| g.clone())
            .ok_or_else(|| invalid(format!("gog.vertices[{i}]"), format!("no group named {g:?}")))?;
        vertices.push((v.clone(), grp));
    }
    let index = |field: String, name: &str| {
        vertices.iter().position(|(n, _)| n == name).ok_or_else(|| invalid(field, format!("no vertex named {name:?}")))
    };
    let mut edges = Vec::new();
    for (i, e) in raw.edges.iter().enumerate() {
        let field = format!("gog.edges[{i}]");
        let source = index(format!("{field}.source"), &e.source)?;
        let target = index(format!("{field}.target"), &e.target)?;
        let parse = |key: &str, g: &Group, xs: &[String]| -> Result<Vec<Elem>> {
            xs.iter()
                .enumerate()
                .map(|(j, x)| g.parse(x).map_err(|err| invalid(format!("{field}.{key}[{j}]"), err.to_string())))
                .collect()
        };
        let s = parse("s", &vertices[source].1, &e.s)?;
        let r = parse("r", &vertices[target].1, &e.r)?;
        edges.push(GogEdge { name: e.name.clone(), source, target, sigma: FiniteTable::cyclic(e.sigma_order.max(1)), s, r });
    }
    let mut tree = Vec::new();
    for (i, t) in raw.tree.iter().enumerate() {
        let j = edges.iter().position(|e| e.name == *t).ok_or_else(|| invalid(format!("gog.tree[{i}]"), format!("no edge named {t:?}")))?;
        tree.push(j);
    }
    GraphOfGroups::new(vertices, edges, tree).map_err(|e| match e {
        Error::ValidationError { field, msg } => invalid(format!("gog.{field}"), msg),
        other => invalid("gog", other.to_string()),
    })
}

fn seed_spec(section: &str, n: u32, edges: &[(u32, u32)], l: u64) -> Result<(Seed, u64)> {
    if n == 0 {
        return Err(invalid(format!("{section}.seed_vertices"), "the seed must be nonempty"));
    }
    if l == 0 {
        return Err(invalid(format!("{section}.l"), "the parameter l must be positive"));
    }
    let seed = Seed::graph(n, edges).map_err(|e| invalid(format!("{section}.seed_edges"), e.to_string()))?;
    Ok((seed, l))
}

fn build_group(field: &str, g: &RawGroup, known: &[(String, Group)]) -> Result<Group> {
    let used: Vec<(&str, bool)> = vec![
        ("order", g.order.is_some()),
        ("rank", g.rank.is_some()),
        ("permutations", g.permutations.is_some()),
        ("left", g.left.is_some()),
        ("right", g.right.is_some()),
        ("base", g.base.is_some()),
        ("sigma_order", g.sigma_order.is_some()),
        ("s", g.s.is_some()),
        ("r", g.r.is_some()),
        ("embedding", g.embedding.is_some()),
        ("theta", g.theta.is_some()),
    ];
    let allowed: &[&str] = match g.kind.as_str() {
        "integers" => &[],
        "cyclic" => &["order"],
        "free" => &["rank"],
        "finite" => &["permutations"],
        "free_product" => &["left", "right"],
        "amalgam" => &["left", "right", "sigma_order", "s", "r"],
        "hnn" => &["base", "sigma_order", "embedding", "theta"],
        k => return Err(invalid(format!("{field}.kind"), format!("unknown group kind {k:?}"))),
    };
    for (key, present) in used {
        if present && !allowed.contains(&key) {
            return Err(invalid(format!("{field}.{key}"), format!("not used by kind {:?}", g.kind)));
        }
    }
    let need = |key: &str, v: bool, what: &str| -> Result<()> {
        if v {
            Ok(())
        } else {
            Err(invalid(format!("{field}.{key}"), format!("{} needs {what}", g.kind)))
        }
    };
    let by_name = |key: &str, name: &Option<String>| -> Result<Group> {
        let name = name.as_deref().ok_or_else(|| invalid(format!("{field}.{key}"), "missing group reference"))?;
        known
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, g)| g.clone())
            .ok_or_else(|| invalid(format!("{field}.{key}"), format!("no earlier group named {name:?}")))
    };
    let elems = |key: &str, grp: &Group, xs: &[String]| -> Result<Vec<Elem>> {
        xs.iter()
            .enumerate()
            .map(|(j, x)| grp.parse(x).map_err(|e| invalid(format!("{field}.{key}[{j}]"), e.to_string())))
            .collect()
    };
    let as_validation = |e: Error| match e {
        Error::ValidationError { .. } => e,
        other => invalid(field, other.to_string()),
    };
    Ok(match g.kind.as_str() {
        "integers" => Group::new(&g.name, GroupKind::Cyclic(None)),
        "cyclic" => {
            need("order", g.order.is_some(), "an order")?;
            let n = g.order.unwrap();
            if n == 0 {
                return Err(invalid(format!("{field}.order"), "order must be positive"));
            }
            Group::new(&g.name, GroupKind::Cyclic(Some(n)))
        }
        "free" => {
            need("rank", g.rank.is_some(), "a rank")?;
            Group::new(&g.name, GroupKind::Free(g.rank.unwrap()))
        }
        "finite" => {
            need("permutations", g.permutations.is_some(), "generating permutations")?;
            let t = FiniteTable::from_permutations(g.permutations.as_ref().unwrap())
                .map_err(|e| invalid(format!("{field}.permutations"), e.to_string()))?;
            Group::finite(&g.name, t)
        }
        "free_product" => {
            let (a, b) = (by_name("left", &g.left)?, by_name("right", &g.right)?);
            Group::new(&g.name, GroupKind::Amalgam(Amalgam::free_product(a, b)))
        }
        "amalgam" => {
            let (a, b) = (by_name("left", &g.left)?, by_name("right", &g.right)?);
            need("sigma_order", g.sigma_order.is_some(), "the order of the cyclic group Σ")?;
            need("s", g.s.is_some(), "the embedding s of Σ into the left factor")?;
            need("r", g.r.is_some(), "the embedding r of Σ into the right factor")?;
            let sigma = FiniteTable::cyclic(g.sigma_order.unwrap().max(1));
            let s = elems("s", &a, g.s.as_ref().unwrap())?;
            let r = elems("r", &b, g.r.as_ref().unwrap())?;
            let am = Amalgam::new(a, b, sigma, s, r, [None, None]).map_err(as_validation)?;
            Group::new(&g.name, GroupKind::Amalgam(am))
        }
        "hnn" => {
            let h = by_name("base", &g.base)?;
            need("sigma_order", g.sigma_order.is_some(), "the order of the cyclic group Σ")?;
            need("embedding", g.embedding.is_some(), "the embedding of Σ into the base")?;
            need("theta", g.theta.is_some(), "the twisted embedding θ of Σ into the base")?;
            let sigma = FiniteTable::cyclic(g.sigma_order.unwrap().max(1));
            let emb = elems("embedding", &h, g.embedding.as_ref().unwrap())?;
            let theta = elems("theta", &h, g.theta.as_ref().unwrap())?;
            let hnn = Hnn::new(h, sigma, emb, theta).map_err(as_validation)?;
            Group::new(&g.name, GroupKind::Hnn(hnn))
        }
        _ => unreachable!(),
    })
}

/// Names of all configured groups, sorted.
pub fn group_names(cfg: &RunConfig) -> BTreeSet<&str> {
    cfg.groups.iter().map(|(n, _)| n.as_str()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_bit_config() {
        let cfg = parse_config("[backend]\nkind = \"bit\"\n").unwrap();
        assert!(matches!(cfg.backend, BackendSpec::Bit));
        assert!(cfg.groups.is_empty());
        assert_eq!(cfg.budgets, Budgets::default());
    }

    #[test]
    fn default_config_parses() {
        let cfg = RunConfig::default();
        assert_eq!(group_names(&cfg).len(), 7);
        assert_eq!(cfg.action.sigma.len(), 1);
    }

    #[test]
    fn amalgam_without_sigma_embedding() {
        let text = r#"
[[groups]]
name = "z"
kind = "integers"

[[groups]]
name = "a"
kind = "amalgam"
left = "z"
right = "z"
sigma_order = 1
r = ["0"]
"#;
        match parse_config(text) {
            Err(Error::ValidationError { field, .. }) => assert_eq!(field, "groups[1].s"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_group_name() {
        let text = "[[groups]]\nname = \"z\"\nkind = \"integers\"\n[[groups]]\nname = \"z\"\nkind = \"free\"\nrank = 2\n";
        assert!(matches!(parse_config(text), Err(Error::ValidationError { field, .. }) if field == "groups[1].name"));
    }

    #[test]
    fn unknown_key_has_a_position() {
        match parse_config("seed = 1\n[backend]\nkind = \"bit\"\ncolour = 3\n") {
            Err(Error::ParseError { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_config("seed = \n"), Err(Error::ParseError { line: 1, .. })));
    }

    #[test]
    fn budgets_must_be_positive() {
        let err = parse_config("[budgets]\nwindow = 0\n").unwrap_err();
        assert_eq!(err, Error::ValidationError { field: "budgets.window".into(), msg: "budgets must be positive".into() });
    }

    #[test]
    fn bad_element_names_its_field() {
        let text = "[[groups]]\nname = \"m\"\nkind = \"free\"\nrank = 2\n[action]\nsigma_group = \"m\"\nsigma = [\"a7\"]\n";
        assert!(matches!(parse_config(text), Err(Error::ValidationError { field, .. }) if field == "action.sigma[0]"));
    }

    #[test]
    fn default_graph_of_groups_cuts_both_ways() {
        use crate::generic::gog::Decomposition;
        let g = RunConfig::default().gog.unwrap();
        assert!(matches!(g.decompose(g.edge_index("e0").unwrap()).unwrap(), Decomposition::Amalgam { .. }));
        assert!(matches!(g.decompose(g.edge_index("t").unwrap()).unwrap(), Decomposition::Hnn { .. }));
    }

    #[test]
    fn gog_edge_with_unknown_endpoint() {
        let text = "[[groups]]\nname = \"z\"\nkind = \"integers\"\n[gog]\nvertices = [[\"a\", \"z\"]]\n\
                    [[gog.edges]]\nname = \"e\"\nsource = \"a\"\ntarget = \"q\"\nsigma_order = 1\ns = [\"0\"]\nr = [\"0\"]\n";
        match parse_config(text) {
            Err(Error::ValidationError { field, .. }) => assert_eq!(field, "gog.edges[0].target"),
            other => panic!("{other:?}"),
        }
    }
}

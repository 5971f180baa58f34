//! Window export as DOT or JSON lines.

use std::path::Path;

use crate::backend::Backend;
use crate::error::{Error, Result};
use crate::graph::FiniteGraph;
use crate::term::VertexTerm;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    Dot,
    Jsonl,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<ExportFormat> {
        match s {
            "dot" => Ok(ExportFormat::Dot),
            "jsonl" => Ok(ExportFormat::Jsonl),
            _ => Err(Error::InvalidInput(format!("unknown format {s:?}; use dot or jsonl"))),
        }
    }
}

/// A window given by enumeration indices: `a..b` (both ends included),
/// `n` (the first n vertices), or empty.
pub fn parse_window(spec: &str, backend: &Backend) -> Result<Vec<VertexTerm>> {
    let spec = spec.trim();
    if spec.is_empty() {
        return Ok(Vec::new());
    }
    let bad = || Error::InvalidInput(format!("bad window {spec:?}; use a..b or n"));
    let (lo, hi) = match spec.split_once("..") {
        Some((a, b)) => {
            let a: usize = a.trim().parse().map_err(|_| bad())?;
            let b: usize = b.trim().parse().map_err(|_| bad())?;
            if b < a {
                return Ok(Vec::new());
            }
            (a, b + 1)
        }
        None => (0, spec.parse().map_err(|_| bad())?),
    };
    Ok(backend.enumerate(hi)?.split_off(lo.min(hi)))
}

pub fn render(g: &FiniteGraph, format: ExportFormat) -> String {
    match format {
        ExportFormat::Dot => g.to_dot(),
        ExportFormat::Jsonl => g.to_jsonl(),
    }
}

/// Writes the induced graph on `window` and returns it.
pub fn export_graph(backend: &Backend, window: &[VertexTerm], format: ExportFormat, path: &Path) -> Result<FiniteGraph> {
    let g = FiniteGraph::induced(window, backend)?;
    std::fs::write(path, render(&g, format)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        std::env::temp_dir().join(format!("homact-export-{}-{name}", std::process::id()))
    }

    #[test]
    fn bit_window_edge_counts() {
        let b = Backend::bit();
        let brute = |n: u64| (0..=n).flat_map(|j| (0..j).map(move |i| (i, j))).filter(|(i, j)| j >> i & 1 == 1).count();
        for (spec, n) in [("0..7", 7), ("0..8", 8)] {
            let w = parse_window(spec, &b).unwrap();
            let p = tmp(&format!("{n}.jsonl"));
            let g = export_graph(&b, &w, ExportFormat::Jsonl, &p).unwrap();
            assert_eq!(g.edge_count(), brute(n));
            let text = std::fs::read_to_string(&p).unwrap();
            assert_eq!(text.lines().count(), brute(n));
            std::fs::remove_file(p).unwrap();
        }
        assert_eq!(brute(7), 12);
    }

    #[test]
    fn empty_window_files() {
        let b = Backend::bit();
        let w = parse_window("", &b).unwrap();
        let p = tmp("empty.dot");
        export_graph(&b, &w, ExportFormat::Dot, &p).unwrap();
        let dot = std::fs::read_to_string(&p).unwrap();
        assert!(dot.contains("// vertices:") && !dot.contains("--"));
        let pj = tmp("empty.jsonl");
        export_graph(&b, &w, ExportFormat::Jsonl, &pj).unwrap();
        assert_eq!(std::fs::read_to_string(&pj).unwrap(), "");
        std::fs::remove_file(p).unwrap();
        std::fs::remove_file(pj).unwrap();
    }

    #[test]
    fn unwritable_path_is_an_io_error() {
        let b = Backend::bit();
        let w = parse_window("3", &b).unwrap();
        let p = Path::new("/nonexistent-dir/x.dot");
        assert!(matches!(export_graph(&b, &w, ExportFormat::Dot, p), Err(Error::Io(_))));
    }
}

//! Python bindings: backends, extension, suites and export.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use homact::automorphism::extend_to_automorphism;
use homact::backend::{Backend, Seed};
use homact::graph::{FiniteGraph, PartialIso};
use homact::harness::export::render;
use homact::harness::{parse_config, parse_window, run_suite as run, ExportFormat, RunConfig};
use homact::VertexTerm;

fn err(e: homact::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// The BIT backend, or the limit over a finite seed when `seed` is
/// `(n, edges)`.
fn backend(seed: Option<(u32, Vec<(u32, u32)>)>, l: u64) -> PyResult<Backend> {
    match seed {
        None => Ok(Backend::bit()),
        Some((n, edges)) => Seed::graph(n, &edges).and_then(|s| Backend::limit(s, l)).map_err(err),
    }
}

fn parse(b: &Backend, xs: &[String]) -> PyResult<Vec<VertexTerm>> {
    xs.iter().map(|x| b.parse_vertex(x).map_err(err)).collect()
}

#[pyfunction]
#[pyo3(signature = (x, y, seed=None, l=1))]
fn adjacent(x: &str, y: &str, seed: Option<(u32, Vec<(u32, u32)>)>, l: u64) -> PyResult<bool> {
    let b = backend(seed, l)?;
    b.adjacent(&b.parse_vertex(x).map_err(err)?, &b.parse_vertex(y).map_err(err)?).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (n, seed=None, l=1))]
fn enumerate(n: usize, seed: Option<(u32, Vec<(u32, u32)>)>, l: u64) -> PyResult<Vec<String>> {
    let b = backend(seed, l)?;
    Ok(b.enumerate(n).map_err(err)?.iter().map(|x| x.to_string()).collect())
}

/// A vertex adjacent to all of `u` and none of `v`.
#[pyfunction]
#[pyo3(signature = (u, v, seed=None, l=1))]
fn property_r_witness(u: Vec<String>, v: Vec<String>, seed: Option<(u32, Vec<(u32, u32)>)>, l: u64) -> PyResult<String> {
    let b = backend(seed, l)?;
    let z = b.property_r_witness(&parse(&b, &u)?, &parse(&b, &v)?).map_err(err)?;
    Ok(z.to_string())
}

/// Extends φ on the BIT backend and answers the queries.
#[pyfunction]
fn extend(phi: Vec<(String, String)>, query: Vec<String>) -> PyResult<Vec<(String, String)>> {
    let b = Backend::bit();
    let mut pairs = Vec::new();
    for (x, y) in &phi {
        pairs.push((b.parse_vertex(x).map_err(err)?, b.parse_vertex(y).map_err(err)?));
    }
    let phi = PartialIso::from_pairs(pairs, &b).map_err(err)?;
    let mut a = extend_to_automorphism(&phi, &b, None).map_err(err)?;
    let mut out = Vec::new();
    for x in parse(&b, &query)? {
        let y = a.query(&x).map_err(err)?;
        out.push((x.to_string(), y.to_string()));
    }
    Ok(out)
}

/// The JSON report of a suite, on `config` (TOML text) or the default.
#[pyfunction]
#[pyo3(signature = (name, config=None))]
fn run_suite(name: &str, config: Option<&str>) -> PyResult<(String, i32)> {
    let cfg = match config {
        Some(t) => parse_config(t).map_err(err)?,
        None => RunConfig::default(),
    };
    let r = run(name, &cfg).map_err(err)?;
    Ok((r.to_json(), r.exit_code()))
}

/// The induced graph on a BIT window as DOT or JSON lines.
#[pyfunction]
#[pyo3(signature = (window, format="jsonl"))]
fn export(window: &str, format: &str) -> PyResult<String> {
    let b = Backend::bit();
    let w = parse_window(window, &b).map_err(err)?;
    let fmt: ExportFormat = format.parse().map_err(err)?;
    Ok(render(&FiniteGraph::induced(&w, &b).map_err(err)?, fmt))
}

#[pymodule]
fn homact_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(adjacent, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate, m)?)?;
    m.add_function(wrap_pyfunction!(property_r_witness, m)?)?;
    m.add_function(wrap_pyfunction!(extend, m)?)?;
    m.add_function(wrap_pyfunction!(run_suite, m)?)?;
    m.add_function(wrap_pyfunction!(export, m)?)?;
    Ok(())
}

use homact::automorphism::extend_to_automorphism;
use homact::backend::{Backend, Seed};
use homact::generic::free::{free_homogeneity_step, FreeStepOptions, FreeTupleSetup};
use homact::generic::{run_scheduler, verify_certificate, Eval, SchedulerOptions, Setup};
use homact::graph::{FiniteGraph, PartialIso};
use homact::harness::export::render;
use homact::harness::suite::Status;
use homact::harness::{parse_config, parse_window, run_suite, ExportFormat, RunConfig};
use proptest::prelude::*;

fn small_config(seed: u64) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.seed = seed;
    cfg.budgets.r_universe = 5;
    cfg.budgets.window = 12;
    cfg.budgets.extend_samples = 4;
    cfg.budgets.equivariant_samples = 3;
    cfg
}

#[test]
fn jsonl_export_round_trips() {
    for spec in ["1..7", "0..20"] {
        let b = Backend::bit();
        let w = parse_window(spec, &b).unwrap();
        let g = FiniteGraph::induced(&w, &b).unwrap();
        let back = FiniteGraph::from_jsonl(&render(&g, ExportFormat::Jsonl), &b).unwrap();
        assert!(back.same_graph(&g), "{spec}");
    }
}

#[test]
fn limit_window_exports_as_dot() {
    let b = Backend::limit(Seed::graph(3, &[(0, 1)]).unwrap(), 1).unwrap();
    let w = parse_window("0..9", &b).unwrap();
    let dot = render(&FiniteGraph::induced(&w, &b).unwrap(), ExportFormat::Dot);
    assert!(dot.starts_with("graph G {\n  // vertices: b0 b1 b2"));
    assert!(dot.contains("\"b0\" -- \"b1\";"));
}

#[test]
fn extension_agrees_with_a_bit_window() {
    let b = Backend::bit();
    let phi = PartialIso::from_pairs(vec![(b.nat(0), b.nat(2)), (b.nat(5), b.nat(7))], &b).unwrap();
    let mut a = extend_to_automorphism(&phi, &b, None).unwrap();
    let w = b.enumerate(30).unwrap();
    assert!(a.verify_window(&w).passed());
    assert_eq!(a.get(&b.nat(5)), Some(&b.nat(7)));
}

#[test]
fn scheduled_certificates_survive_later_steps() {
    let cfg = RunConfig::default();
    let mut st = Setup::new(cfg.group("zc2").unwrap(), 300).unwrap();
    let run = run_scheduler(&mut st, 6, &SchedulerOptions::default());
    assert!(run.aborted.is_none());
    assert_eq!(run.certificates.len(), 6);
    for c in &run.certificates {
        verify_certificate(&mut st, c).unwrap();
    }
}

#[test]
fn free_step_realizes_a_transposition() {
    let mut st = FreeTupleSetup::canonical(2).unwrap();
    let b = st.backend().clone();
    let v = b.enumerate(6).unwrap();
    let phi = PartialIso::from_pairs(vec![(v[0].clone(), v[1].clone())], &b).unwrap();
    let mut step = free_homogeneity_step(&mut st, &phi, &v[..1], &FreeStepOptions::default()).unwrap();
    assert_eq!(step.omega.apply_word(&step.w, &v[0]).unwrap(), v[1]);
}

#[test]
fn homogeneity_witness_acts_as_phi() {
    let cfg = RunConfig::default();
    let mut st = Setup::new(cfg.group("hnn_modular").unwrap(), 300).unwrap();
    let v = st.backend().enumerate(8).unwrap();
    let b = st.backend().clone();
    let phi = PartialIso::from_pairs(vec![(v[2].clone(), v[3].clone())], &b).unwrap();
    let g = st.density_step_homogeneous(&phi, &[]).unwrap();
    assert_eq!(st.pi_alpha_apply(&g, &v[2], Eval::Committed).unwrap(), v[3]);
}

#[test]
fn gog_in_a_config_file() {
    let text = "[[groups]]\nname = \"c6\"\nkind = \"cyclic\"\norder = 6\n\
                [[groups]]\nname = \"c2\"\nkind = \"cyclic\"\norder = 2\n\
                [gog]\nvertices = [[\"p\", \"c6\"], [\"q\", \"c2\"]]\ntree = [\"e\"]\n\
                [[gog.edges]]\nname = \"e\"\nsource = \"p\"\ntarget = \"q\"\nsigma_order = 2\ns = [\"0\", \"3\"]\nr = [\"0\", \"1\"]\n";
    let g = parse_config(text).unwrap().gog.unwrap();
    assert_eq!(g.realize(0).unwrap().order(), Some(6));
}

#[test]
fn every_suite_passes_at_small_scale() {
    let r = run_suite("all", &small_config(7)).unwrap();
    assert_eq!(r.status, Status::Pass, "{}", r.to_json());
    let suites: std::collections::BTreeSet<&str> = r.invariants.iter().map(|i| i.suite.as_str()).collect();
    assert_eq!(suites.len(), 6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn reports_depend_only_on_the_config(seed in any::<u64>()) {
        let cfg = small_config(seed);
        let a = run_suite("extension", &cfg).unwrap().to_json();
        let b = run_suite("extension", &cfg).unwrap().to_json();
        prop_assert_eq!(a, b);
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use homact::action::Action;
use homact::automorphism::{extend_to_automorphism, EquivCtx};
use homact::backend::{Backend, Seed};
use homact::extension::{canonical_base_action, fixed_vertices, permutation_action};
use homact::generic::free::{free_homogeneity_step, FreeStepOptions, FreeTupleSetup, TreeMode};
use homact::generic::{run_scheduler, verify_certificate, SchedulerOptions, Setup};
use homact::graph::{FiniteGraph, PartialIso};
use homact::harness::export::render;
use homact::harness::{export_graph, parse_config, parse_window, run_suite, ExportFormat, RunConfig};
use homact::witness::{property_f, witness_search, SearchKind, Witness};
use homact::{Elem, Error, Group, Result, VertexTerm};

/// Search budget when neither --budget nor HOMACT_BUDGET is given.
const DEFAULT_BUDGET: usize = 5000;

#[derive(Parser)]
#[command(name = "homact", version, about = "Homogeneous group actions on the Random Graph")]
struct Cli {
    /// Machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Default search budget.
    #[arg(long, global = true, env = "HOMACT_BUDGET")]
    budget: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Rado-graph backends.
    Rado {
        #[command(subcommand)]
        cmd: RadoCmd,
    },
    /// Group normal forms, actions and witness searches.
    Group {
        #[command(subcommand)]
        cmd: GroupCmd,
    },
    /// Limits of iterated random extensions.
    Limit {
        #[command(subcommand)]
        cmd: LimitCmd,
    },
    /// Extend a finite partial isomorphism by back-and-forth.
    Extend(ExtendArgs),
    /// Density steps and their scheduler.
    Generic {
        #[command(subcommand)]
        cmd: GenericCmd,
    },
    /// The free-group homogeneity step.
    Free {
        #[command(subcommand)]
        cmd: FreeCmd,
    },
    /// Graphs of groups.
    Gog {
        #[command(subcommand)]
        cmd: GogCmd,
    },
    /// Run a verification suite; exit 0 on pass, 1 on failure, 2 when a budget ran out.
    Verify(VerifyArgs),
    /// Export a window of a backend as DOT or JSON lines.
    Export(ExportArgs),
}

#[derive(Args)]
struct BackendArg {
    /// `bit` or `limit:<seed.json>:<l>`.
    #[arg(long, default_value = "bit")]
    backend: String,
}

#[derive(Args)]
struct ConfigArg {
    /// Run configuration (TOML); the built-in default when absent.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum RadoCmd {
    /// Whether two vertices are adjacent.
    Adjacent {
        #[command(flatten)]
        b: BackendArg,
        x: String,
        y: String,
    },
    /// A vertex adjacent to all of U and none of V.
    Witness {
        #[command(flatten)]
        b: BackendArg,
        #[arg(short = 'U', default_value = "")]
        u: String,
        #[arg(short = 'V', default_value = "")]
        v: String,
    },
    /// The first N vertices.
    Enum {
        #[command(flatten)]
        b: BackendArg,
        #[arg(short = 'n')]
        n: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum WitnessKind {
    Disconnect,
    Hcf,
    PropertyF,
}

#[derive(Subcommand)]
enum GroupCmd {
    /// Normal form of a word, e.g. `1:1.2:-1`.
    Nf {
        #[command(flatten)]
        c: ConfigArg,
        #[arg(long)]
        group: String,
        word: String,
    },
    /// g·x for the left-multiplication action on the limit over the group.
    Act {
        #[command(flatten)]
        c: ConfigArg,
        #[arg(long)]
        group: String,
        #[arg(long, default_value_t = 1)]
        l: u64,
        g: String,
        x: String,
    },
    /// Search the group for a witness.
    Witness {
        #[command(flatten)]
        c: ConfigArg,
        #[arg(long)]
        group: String,
        #[arg(long, value_enum)]
        kind: WitnessKind,
        #[arg(long, default_value_t = 1)]
        l: u64,
        /// Finite vertex set F.
        #[arg(long = "F", default_value = "")]
        f: String,
        /// Σ for hcf, S for property-f (comma separated elements).
        #[arg(long, default_value = "")]
        elems: String,
    },
}

#[derive(Subcommand)]
enum LimitCmd {
    /// The graph of all vertices up to a stage.
    Stage {
        /// JSON seed: {"vertices": n, "edges": [[i, j], ...]}.
        #[arg(long)]
        seed: PathBuf,
        #[arg(long, default_value_t = 1)]
        l: u64,
        #[arg(long)]
        upto: u32,
        #[arg(long, default_value = "jsonl")]
        export: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Vertices of a window fixed by a power of a seed permutation.
    Fix {
        #[arg(long)]
        seed: PathBuf,
        #[arg(long, default_value_t = 1)]
        l: u64,
        /// The permutation as images of 0..n, e.g. `1,0,2`.
        #[arg(long)]
        perm: String,
        #[arg(long, default_value_t = 1)]
        power: i64,
        #[arg(long, default_value = "20")]
        window: String,
    },
}

#[derive(Args)]
struct ExtendArgs {
    #[command(flatten)]
    b: BackendArg,
    #[command(flatten)]
    c: ConfigArg,
    /// φ as `x:y,...`.
    #[arg(long)]
    map: String,
    /// Vertices to query.
    #[arg(long, default_value = "")]
    query: String,
    /// `<group>=<σ>,...`: extend Σ-equivariantly on the canonical limit over the group.
    #[arg(long)]
    sigma: Option<String>,
}

#[derive(Subcommand)]
enum GenericCmd {
    /// Run the scheduler and write one certificate per line.
    Run {
        #[command(flatten)]
        c: ConfigArg,
        /// Amalgam or HNN group; the configured scheduler group by default.
        #[arg(long)]
        group: Option<String>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Lazy,
    RoundRobin,
}

#[derive(Subcommand)]
enum FreeCmd {
    /// One homogeneity step for the canonical k-tuple.
    Step {
        #[arg(short = 'k', default_value_t = 2)]
        k: usize,
        /// φ as `x:y,...`.
        #[arg(long)]
        phi: String,
        #[arg(long = "F", default_value = "")]
        f: String,
        #[arg(long, value_enum, default_value = "lazy")]
        mode: Mode,
    },
}

#[derive(Subcommand)]
enum GogCmd {
    /// Cut the configured graph of groups along one edge.
    Decompose {
        #[command(flatten)]
        c: ConfigArg,
        #[arg(long)]
        edge: String,
    },
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    c: ConfigArg,
    #[arg(long, default_value = "all")]
    suite: String,
    /// Overrides the scheduler step budget.
    #[arg(long)]
    steps: Option<usize>,
    /// Also write the report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    b: BackendArg,
    /// `a..b` (enumeration indices, both included) or `n`.
    #[arg(long)]
    window: String,
    #[arg(long, default_value = "dot")]
    format: String,
    #[arg(long)]
    out: PathBuf,
}

/// Splits on `sep` outside braces and parentheses.
fn split_top(s: &str, sep: char) -> Vec<&str> {
    let mut out = Vec::new();
    let (mut depth, mut start) = (0i32, 0);
    for (i, c) in s.char_indices() {
        match c {
            '{' | '(' => depth += 1,
            '}' | ')' => depth -= 1,
            c if c == sep && depth == 0 => {
                out.push(&s[start..i]);
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out.into_iter().map(str::trim).filter(|t| !t.is_empty()).collect()
}

fn vertices(b: &Backend, s: &str) -> Result<Vec<VertexTerm>> {
    split_top(s, ',').into_iter().map(|t| b.parse_vertex(t)).collect()
}

fn pairs(b: &Backend, s: &str) -> Result<PartialIso> {
    let mut out = Vec::new();
    for t in split_top(s, ',') {
        match split_top(t, ':')[..] {
            [x, y] => out.push((b.parse_vertex(x)?, b.parse_vertex(y)?)),
            _ => return Err(Error::InvalidInput(format!("{t:?} is not of the form x:y"))),
        }
    }
    PartialIso::from_pairs(out, b)
}

fn elems(g: &Group, s: &str) -> Result<Vec<Elem>> {
    split_top(s, ',').into_iter().map(|t| g.parse(t)).collect()
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn load_seed(path: &Path) -> Result<Seed> {
    let v: Value = serde_json::from_str(&read(path)?).map_err(|e| Error::ParseError {
        line: e.line(),
        col: e.column(),
        msg: e.to_string(),
    })?;
    let bad = |m: &str| Error::ValidationError { field: format!("{}", path.display()), msg: m.into() };
    let n = v.get("vertices").and_then(Value::as_u64).ok_or_else(|| bad("`vertices` must be a natural"))?;
    let mut edges = Vec::new();
    for e in v.get("edges").and_then(Value::as_array).map(Vec::as_slice).unwrap_or(&[]) {
        match e.as_array().map(|p| p.iter().filter_map(Value::as_u64).collect::<Vec<_>>()).as_deref() {
            Some([a, b]) => edges.push((*a as u32, *b as u32)),
            _ => return Err(bad("edges are pairs of indices")),
        }
    }
    Seed::graph(n as u32, &edges)
}

fn backend(spec: &str) -> Result<Backend> {
    if spec == "bit" {
        return Ok(Backend::bit());
    }
    let rest = spec.strip_prefix("limit:").ok_or_else(|| Error::InvalidInput(format!("unknown backend {spec:?}")))?;
    let (file, l) = match rest.rsplit_once(':') {
        Some((f, l)) if l.parse::<u64>().is_ok() => (f, l.parse().unwrap()),
        _ => (rest, 1),
    };
    Backend::limit(load_seed(Path::new(file))?, l)
}

fn config(c: &ConfigArg) -> Result<RunConfig> {
    match &c.config {
        None => Ok(RunConfig::default()),
        Some(p) => parse_config(&read(p)?),
    }
}

fn named_group(cfg: &RunConfig, name: &str) -> Result<Group> {
    cfg.group(name).cloned().ok_or_else(|| Error::InvalidInput(format!("no group named {name:?} in the configuration")))
}

fn strings(xs: &[VertexTerm]) -> Vec<String> {
    xs.iter().map(|x| x.to_string()).collect()
}

struct Out {
    json: bool,
}

impl Out {
    fn emit(&self, v: Value, human: impl FnOnce() -> String) {
        if self.json {
            println!("{v}");
        } else {
            let h = human();
            if !h.is_empty() {
                println!("{}", h.trim_end());
            }
        }
    }
}

fn rado(cmd: RadoCmd, out: &Out) -> Result<()> {
    match cmd {
        RadoCmd::Adjacent { b, x, y } => {
            let b = backend(&b.backend)?;
            let (x, y) = (b.parse_vertex(&x)?, b.parse_vertex(&y)?);
            let a = b.adjacent(&x, &y)?;
            out.emit(json!({"x": x.to_string(), "y": y.to_string(), "adjacent": a}), || a.to_string());
        }
        RadoCmd::Witness { b, u, v } => {
            let b = backend(&b.backend)?;
            let (u, v) = (vertices(&b, &u)?, vertices(&b, &v)?);
            let z = b.property_r_witness(&u, &v)?;
            out.emit(json!({"U": strings(&u), "V": strings(&v), "witness": z.to_string()}), || z.to_string());
        }
        RadoCmd::Enum { b, n } => {
            let w = b.backend.clone();
            let vs = backend(&w)?.enumerate(n)?;
            out.emit(json!({"backend": w, "vertices": strings(&vs)}), || strings(&vs).join("\n"));
        }
    }
    Ok(())
}

fn group(cmd: GroupCmd, budget: usize, out: &Out) -> Result<()> {
    match cmd {
        GroupCmd::Nf { c, group, word } => {
            let g = named_group(&config(&c)?, &group)?;
            let e = g.parse(&word)?;
            let nf = g.show(&e);
            out.emit(json!({"group": group, "word": word, "normal_form": nf, "length": g.norm(&e)}), || nf.clone());
        }
        GroupCmd::Act { c, group, l, g, x } => {
            let grp = named_group(&config(&c)?, &group)?;
            let a = Action::left_mult(grp.clone(), Backend::limit_group(grp.clone(), l)?)?;
            let e = grp.parse(&g)?;
            let x = a.backend().parse_vertex(&x)?;
            let y = a.act(&e, &x)?;
            out.emit(json!({"g": e.to_string(), "x": x.to_string(), "gx": y.to_string()}), || y.to_string());
        }
        GroupCmd::Witness { c, group, kind, l, f, elems: es } => {
            let grp = named_group(&config(&c)?, &group)?;
            let a = Action::left_mult(grp.clone(), Backend::limit_group(grp.clone(), l)?)?;
            let f = vertices(a.backend(), &f)?;
            let es = elems(&grp, &es)?;
            let w = match kind {
                WitnessKind::Disconnect => witness_json(witness_search(&a, &SearchKind::Disconnect(f), budget)?),
                WitnessKind::Hcf => witness_json(witness_search(&a, &SearchKind::HighlyCoreFree { sigma: es, f }, budget)?),
                WitnessKind::PropertyF => json!({"vertex": property_f(&a, &es, &f, budget)?.to_string()}),
            };
            out.emit(json!({"group": group, "witness": w}), || w.to_string());
        }
    }
    Ok(())
}

fn witness_json(w: Witness) -> Value {
    match w {
        Witness::Element(g) => json!({"element": g.to_string()}),
        Witness::Vertex(x) => json!({"vertex": x.to_string()}),
        Witness::Singular { u, g } => json!({"vertex": u.to_string(), "element": g.to_string()}),
    }
}

fn window_upto(b: &Backend, stage: u32, budget: usize) -> Result<Vec<VertexTerm>> {
    let mut out = Vec::new();
    for i in 0.. {
        if i >= budget {
            return Err(Error::BudgetExhausted(format!("more than {budget} vertices up to stage {stage}")));
        }
        let x = b.nth(i)?;
        if x.stage() > stage {
            break;
        }
        out.push(x);
    }
    Ok(out)
}

fn limit(cmd: LimitCmd, budget: usize, out: &Out) -> Result<()> {
    match cmd {
        LimitCmd::Stage { seed, l, upto, export, out: path } => {
            let b = Backend::limit(load_seed(&seed)?, l)?;
            let w = window_upto(&b, upto, budget)?;
            let fmt: ExportFormat = export.parse()?;
            let g = FiniteGraph::induced(&w, &b)?;
            let text = render(&g, fmt);
            match path {
                Some(p) => {
                    write(&p, &text)?;
                    out.emit(
                        json!({"vertices": g.vertices().len(), "edges": g.edge_count(), "out": p.display().to_string()}),
                        || format!("{} vertices, {} edges written to {}", g.vertices().len(), g.edge_count(), p.display()),
                    );
                }
                None => print!("{text}"),
            }
        }
        LimitCmd::Fix { seed, l, perm, power, window } => {
            let p: Vec<u32> = perm
                .split(',')
                .map(|t| t.trim().parse().map_err(|_| Error::InvalidInput(format!("bad permutation {perm:?}"))))
                .collect::<Result<_>>()?;
            let a = permutation_action(load_seed(&seed)?, l, &p)?;
            let g = a.group().pow(&a.group().gens()[0], power);
            let w = parse_window(&window, a.backend())?;
            let fixed = fixed_vertices(&g, &a, &w)?;
            out.emit(json!({"g": g.to_string(), "window": w.len(), "fixed": strings(&fixed)}), || {
                strings(&fixed).join("\n")
            });
        }
    }
    Ok(())
}

fn extend(args: ExtendArgs, out: &Out) -> Result<()> {
    let (b, ctx) = match &args.sigma {
        None => (backend(&args.b.backend)?, None),
        Some(spec) => {
            let (name, es) = spec.split_once('=').ok_or_else(|| Error::InvalidInput("--sigma takes <group>=<σ>,...".into()))?;
            let g = named_group(&config(&args.c)?, name.trim())?;
            let la = canonical_base_action(&g, &elems(&g, es)?)?;
            let ctx = EquivCtx::symmetric(la.action(), la.sigma());
            (la.backend().clone(), Some(ctx))
        }
    };
    let phi = pairs(&b, &args.map)?;
    let mut a = extend_to_automorphism(&phi, &b, ctx)?;
    let mut answers = Vec::new();
    for x in vertices(&b, &args.query)? {
        let y = a.query(&x)?;
        answers.push(json!({"x": x.to_string(), "y": y.to_string()}));
    }
    if out.json {
        println!("{}", json!({"queries": answers, "committed": a.len()}));
    }
    print!("{}", a.to_jsonl());
    Ok(())
}

fn generic(cmd: GenericCmd, budget: Option<usize>, out: &Out) -> Result<()> {
    let GenericCmd::Run { c, group, steps, out: path } = cmd;
    let cfg = config(&c)?;
    let name = group.or(cfg.action.scheduler.clone()).ok_or_else(|| Error::InvalidInput("no --group and no action.scheduler".into()))?;
    let g = named_group(&cfg, &name)?;
    let mut st = Setup::new(&g, budget.unwrap_or(cfg.budgets.search))?;
    let steps = steps.unwrap_or(cfg.budgets.steps);
    let run = run_scheduler(&mut st, steps, &SchedulerOptions::default());
    let mut reverified = 0;
    for c in &run.certificates {
        verify_certificate(&mut st, c)?;
        reverified += 1;
    }
    let lines: String = run.certificates.iter().map(|c| c.to_json().to_string() + "\n").collect();
    let path = path.or(cfg.output.certificates.map(PathBuf::from));
    match &path {
        Some(p) => write(p, &lines)?,
        None if !out.json => print!("{lines}"),
        None => {}
    }
    let summary = json!({
        "group": name,
        "steps": steps,
        "certificates": run.certificates.len(),
        "reverified": reverified,
        "support": st.support(),
        "aborted": run.aborted.as_ref().map(|e| e.to_string()),
        "out": path.as_ref().map(|p| p.display().to_string()),
    });
    out.emit(summary, || {
        path.map(|p| format!("{} certificates written to {}", run.certificates.len(), p.display())).unwrap_or_default()
    });
    match run.aborted {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn free(cmd: FreeCmd, budget: Option<usize>, out: &Out) -> Result<()> {
    let FreeCmd::Step { k, phi, f, mode } = cmd;
    let mut st = FreeTupleSetup::canonical(k)?;
    let b = st.backend().clone();
    let phi = pairs(&b, &phi)?;
    let f = vertices(&b, &f)?;
    let mut opts = FreeStepOptions {
        mode: match mode {
            Mode::Lazy => TreeMode::Lazy,
            Mode::RoundRobin => TreeMode::RoundRobin,
        },
        ..Default::default()
    };
    if let Some(n) = budget {
        opts.budget = n.max(opts.budget);
    }
    let step = free_homogeneity_step(&mut st, &phi, &f, &opts)?;
    let r = serde_json::to_value(&step.report).expect("report serializes");
    out.emit(r, || format!("w = {}", step.report.w));
    Ok(())
}

fn gog(cmd: GogCmd, out: &Out) -> Result<()> {
    let GogCmd::Decompose { c, edge } = cmd;
    let cfg = config(&c)?;
    let g = cfg.gog.as_ref().ok_or_else(|| Error::InvalidInput("the configuration has no [gog] section".into()))?;
    let d = g.decompose(g.edge_index(&edge)?)?;
    let v = serde_json::to_value(&d).expect("decompositions serialize");
    out.emit(v.clone(), || serde_json::to_string_pretty(&v).unwrap());
    Ok(())
}

fn verify(args: VerifyArgs, budget: Option<usize>) -> Result<i32> {
    let mut cfg = config(&args.c)?;
    if let Some(n) = args.steps {
        cfg.budgets.steps = n;
    }
    if let Some(n) = budget {
        cfg.budgets.search = n;
    }
    let report = run_suite(&args.suite, &cfg)?;
    let text = report.to_json();
    for p in args.out.iter().chain(cfg.output.report.as_ref().map(PathBuf::from).iter()) {
        write(p, &text)?;
    }
    print!("{text}");
    Ok(report.exit_code())
}

fn export(args: ExportArgs, out: &Out) -> Result<()> {
    let b = backend(&args.b.backend)?;
    let w = parse_window(&args.window, &b)?;
    let g = export_graph(&b, &w, args.format.parse()?, &args.out)?;
    out.emit(
        json!({"vertices": g.vertices().len(), "edges": g.edge_count(), "out": args.out.display().to_string()}),
        || format!("{} vertices, {} edges written to {}", g.vertices().len(), g.edge_count(), args.out.display()),
    );
    Ok(())
}

fn run(cli: Cli) -> Result<i32> {
    let out = Out { json: cli.json };
    let budget = cli.budget.unwrap_or(DEFAULT_BUDGET);
    match cli.cmd {
        Cmd::Rado { cmd } => rado(cmd, &out)?,
        Cmd::Group { cmd } => group(cmd, budget, &out)?,
        Cmd::Limit { cmd } => limit(cmd, budget, &out)?,
        Cmd::Extend(a) => extend(a, &out)?,
        Cmd::Generic { cmd } => generic(cmd, cli.budget, &out)?,
        Cmd::Free { cmd } => free(cmd, cli.budget, &out)?,
        Cmd::Gog { cmd } => gog(cmd, &out)?,
        Cmd::Verify(a) => return verify(a, cli.budget),
        Cmd::Export(a) => export(a, &out)?,
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json = cli.json;
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            if json {
                println!("{}", json!({"error": e.to_string()}));
            } else {
                eprintln!("error: {e}");
            }
            // budget errors share the inconclusive code
            ExitCode::from(if e.is_budget() { 2 } else { 1 })
        }
    }
}

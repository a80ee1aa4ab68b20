use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use derand_tsp::constants::{Constants, DegreeConstants};
use derand_tsp::cuts::CutStructure;
use derand_tsp::degree::check_degree_cut_case;
use derand_tsp::hierarchy::Hierarchy;
use derand_tsp::instance::{ingest_instance, IngestOptions, LpSolution, MetricInstance};
use derand_tsp::pipeline::{fit, lp_or_held_karp, monte_carlo_check, solve, GeneralTables, SolveConfig, SolveMode};
use derand_tsp::treedist::{ParityQuery, PartialAssignment};

#[derive(Parser)]
#[command(name = "derand-tsp", version, about = "Deterministic max-entropy rounding for metric TSP")]
struct Cli {
    /// Worker threads for determinant evaluations (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the full pipeline and write the tour.
    Solve(SolveArgs),
    /// Evaluate a parity event under the fitted distribution.
    Probe(ProbeArgs),
    /// Dump near-minimum cuts, crossing components and polygons.
    Cuts(DumpArgs),
    /// Dump the cut hierarchy.
    Hierarchy(DumpArgs),
    /// Check the LP, the fit and the constants assumptions.
    Verify(InputArgs),
}

#[derive(Args)]
struct InputArgs {
    /// TSPLIB file or plain cost matrix.
    #[arg(long)]
    instance: PathBuf,
    /// LP solution; solved with Held-Karp when absent.
    #[arg(long)]
    lp: Option<PathBuf>,
    /// Round EUC_2D distances to integers.
    #[arg(long)]
    round_euc2d: bool,
    /// `paper`, `test`, or `test:<eta>`.
    #[arg(long, default_value = "paper")]
    constants: String,
    /// Override the near-min cut constant.
    #[arg(long)]
    eta: Option<f64>,
    /// Degree-case probability threshold.
    #[arg(long)]
    p_deg: Option<f64>,
    /// Degree-case cut slack.
    #[arg(long)]
    eta_deg: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Auto,
    Degree,
    General,
    ChristofidesBaseline,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value = "auto")]
    mode: ModeArg,
    /// Tour JSON; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the derandomization trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Also estimate the initial objective from this many sampled trees.
    #[arg(long)]
    mc_check: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ProbeArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Constraint `e1,e2,...:sigma:modulus`; modulus `n` means an exact count.
    #[arg(long = "query", required = true)]
    queries: Vec<String>,
    /// Fixed edge `e=0` or `e=1`.
    #[arg(long = "fix")]
    fixes: Vec<String>,
}

#[derive(Args)]
struct DumpArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a Graphviz drawing of the polygons.
    #[arg(long)]
    dot: Option<PathBuf>,
}

struct Loaded {
    inst: MetricInstance,
    lp: LpSolution,
    constants: Constants,
    degree: DegreeConstants,
}

fn load(a: &InputArgs) -> Result<Loaded> {
    let ing = ingest_instance(&a.instance, IngestOptions { round_euc2d: a.round_euc2d })
        .with_context(|| format!("reading {}", a.instance.display()))?;
    for w in &ing.warnings {
        eprintln!("warning: {w}");
    }
    let lp = match &a.lp {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let lp = LpSolution::parse(&text)?;
            lp.validate()?;
            Some(lp)
        }
        None => None,
    };
    let lp = lp_or_held_karp(lp, &ing.instance)?;
    let mut constants = Constants::profile(&a.constants)?;
    if let Some(eta) = a.eta {
        constants = constants.with_eta(eta);
        constants.check()?;
    }
    let mut degree = if a.constants == "paper" {
        DegreeConstants::paper()
    } else {
        DegreeConstants { p: 0.05, eta: 0.5 }
    };
    if let Some(p) = a.p_deg {
        degree.p = p;
    }
    if let Some(e) = a.eta_deg {
        degree.eta = e;
    }
    Ok(Loaded { inst: ing.instance, lp, constants, degree })
}

fn emit(path: Option<&Path>, v: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(v)? + "\n";
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_solve(a: &SolveArgs) -> Result<u8> {
    let l = load(&a.input)?;
    let cfg = SolveConfig {
        mode: match a.mode {
            ModeArg::Auto => SolveMode::Auto,
            ModeArg::Degree => SolveMode::Degree,
            ModeArg::General => SolveMode::General,
            ModeArg::ChristofidesBaseline => SolveMode::ChristofidesBaseline,
        },
        constants: l.constants.clone(),
        degree: l.degree.clone(),
    };
    let rep = solve(&l.lp, &l.inst, &cfg)?;
    let mut out = serde_json::to_value(&rep)?;
    if let Some(samples) = a.mc_check {
        let mc = monte_carlo_check(&l.lp, &l.inst, &cfg, samples, a.seed)?;
        out["mcCheck"] = serde_json::to_value(&mc)?;
    }
    if let Some(p) = &a.trace {
        emit(Some(p), &serde_json::to_value(&rep.trace)?)?;
    }
    emit(a.out.as_deref(), &out)?;
    for v in &rep.violations {
        eprintln!("violation: {v}");
    }
    Ok(if rep.violations.is_empty() { 0 } else { 2 })
}

fn parse_query(specs: &[String], n: usize) -> Result<ParityQuery> {
    let mut q = ParityQuery::new();
    for s in specs {
        let parts: Vec<&str> = s.split(':').collect();
        let [set, sigma, modulus] = parts[..] else { bail!("query '{s}' is not set:sigma:modulus") };
        let set = set
            .split(',')
            .filter(|t| !t.is_empty())
            .map(|t| t.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .with_context(|| format!("edge list in '{s}'"))?;
        let modulus = if modulus == "n" { n } else { modulus.parse().with_context(|| format!("modulus in '{s}'"))? };
        q.push(set, sigma.parse().with_context(|| format!("residue in '{s}'"))?, modulus);
    }
    Ok(q)
}

fn parse_fixes(specs: &[String]) -> Result<PartialAssignment> {
    let mut set = PartialAssignment::new();
    for s in specs {
        let Some((e, v)) = s.split_once('=') else { bail!("fix '{s}' is not e=0 or e=1") };
        let v = match v {
            "0" => false,
            "1" => true,
            _ => bail!("fix '{s}' is not e=0 or e=1"),
        };
        set.set(e.parse().with_context(|| format!("edge in '{s}'"))?, v);
    }
    Ok(set)
}

fn cmd_probe(a: &ProbeArgs) -> Result<u8> {
    let l = load(&a.input)?;
    let f = fit(&l.lp, &l.inst)?;
    let n = f.sg.g.n();
    let q = parse_query(&a.queries, n)?;
    let set = parse_fixes(&a.fixes)?;
    let view = f.dist.condition(&set)?;
    let edges: Vec<_> = (0..f.sg.m())
        .map(|e| {
            let ed = f.sg.g.edge(e);
            json!({ "id": e, "u": ed.u, "v": ed.v, "x": f.sg.x[e], "marginal": view.marginal(e) })
        })
        .collect();
    emit(
        None,
        &json!({ "vertices": n, "u0": f.sg.u0, "v0": f.sg.v0, "fitMaxRelErr": f.max_rel_err, "edges": edges, "probability": view.event_prob(&q)? }),
    )?;
    Ok(0)
}

fn polygon_dot(cs: &CutStructure) -> String {
    let mut s = String::from("graph polygons {\n  node [shape=box];\n");
    for (i, poly) in cs.polygons.iter().enumerate() {
        let Some(poly) = poly else { continue };
        let _ = writeln!(s, "  subgraph cluster_{i} {{\n    label=\"component {i}\";");
        let name = |a: u64| {
            let vs: Vec<String> = (0..64).filter(|v| a >> v & 1 == 1).map(|v| v.to_string()).collect();
            format!("\"c{i}:{}\"", vs.join(","))
        };
        for j in 0..poly.m() {
            let _ = writeln!(s, "    {} -- {};", name(poly.outside[j]), name(poly.outside[(j + 1) % poly.m()]));
        }
        for &a in &poly.inside {
            let _ = writeln!(s, "    {} [shape=ellipse];", name(a));
        }
        s.push_str("  }\n");
    }
    s.push_str("}\n");
    s
}

fn cmd_cuts(a: &DumpArgs) -> Result<u8> {
    let l = load(&a.input)?;
    let f = fit(&l.lp, &l.inst)?;
    let cs = CutStructure::build(&f.sg.contracted, &f.sg.x, f.sg.root, l.constants.eta)?;
    if let Some(p) = &a.dot {
        fs::write(p, polygon_dot(&cs)).with_context(|| format!("writing {}", p.display()))?;
    }
    emit(a.out.as_deref(), &serde_json::to_value(&cs)?)?;
    Ok(0)
}

fn cmd_hierarchy(a: &DumpArgs) -> Result<u8> {
    let l = load(&a.input)?;
    let f = fit(&l.lp, &l.inst)?;
    let g = &f.sg.contracted;
    let cs = CutStructure::build(g, &f.sg.x, f.sg.root, l.constants.eta)?;
    let h = Hierarchy::build(g, &f.sg.x, &cs, &l.constants)?;
    if let Some(p) = &a.dot {
        fs::write(p, polygon_dot(&cs)).with_context(|| format!("writing {}", p.display()))?;
    }
    emit(a.out.as_deref(), &serde_json::to_value(&h)?)?;
    Ok(if h.violations.is_empty() { 0 } else { 2 })
}

fn cmd_verify(a: &InputArgs) -> Result<u8> {
    let l = load(a)?;
    let f = fit(&l.lp, &l.inst)?;
    let degree_case = check_degree_cut_case(&f.sg.contracted, &f.sg.x, l.degree.eta)?;
    let tree_polytope = f.sg.check_tree_polytope().err().map(|e| e.to_string());
    let violations = if degree_case {
        derand_tsp::degree::DegreeCase::build(&f.sg, &l.degree, &f.dist)?.violations
    } else {
        GeneralTables::build(&f, &l.constants)?.violations()
    };
    emit(
        None,
        &json!({
            "lpCost": f.sg.lp_cost(),
            "vertices": f.sg.g.n(),
            "edges": f.sg.m(),
            "fitMaxRelErr": f.max_rel_err,
            "treePolytope": tree_polytope,
            "degreeCase": degree_case,
            "constants": l.constants.name,
            "violations": violations,
        }),
    )?;
    Ok(if violations.is_empty() && tree_polytope.is_none() { 0 } else { 2 })
}

fn run(cli: &Cli) -> Result<u8> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global()?;
    }
    match &cli.cmd {
        Cmd::Solve(a) => cmd_solve(a),
        Cmd::Probe(a) => cmd_probe(a),
        Cmd::Cuts(a) => cmd_cuts(a),
        Cmd::Hierarchy(a) => cmd_hierarchy(a),
        Cmd::Verify(a) => cmd_verify(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

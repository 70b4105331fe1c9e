use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dswig_cli::api::{self, DsepParams, GraphSource, Loaded, PipelineParams, SwigParams, VasParams};
use dswig_core::estimate::BatteryOptions;
use dswig_core::{
    build_template, did_gt, event_study, parse_pipeline, pretrend_battery, run_pipeline, simulate_panel, Control,
    EstimateOptions, EstimateResult, Panel, PretrendReport, RestrictionSet, SimConfig, Stage, Strategy, TemplateSpec,
};
use serde_json::Value;

#[derive(Parser)]
#[command(name = "dswig", version, about = "Δ-SWIG causal graphs for difference-in-differences")]
struct Cli {
    /// Seed for every random draw (simulation, bootstrap, critical values).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Suppress diagnostics on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
    /// Graphviz, for render, swig, delta and template.
    Dot,
    /// Graph DSL, `template` only.
    Dsl,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse a graph document; optionally test a d-separation statement.
    Check {
        file: PathBuf,
        /// Statement such as "dY1 _||_ D | X", evaluated on the pipeline result.
        #[arg(long)]
        dsep: Option<String>,
        #[command(flatten)]
        pipe: PipeArg,
    },
    /// Split treatments into random and fixed halves.
    Swig {
        file: PathBuf,
        /// Assignments such as D1=0,D2=0; defaults to the document's `fix` or all zero.
        #[arg(long, value_delimiter = ',')]
        fix: Vec<String>,
        #[arg(long)]
        relabel_pretreatment: bool,
    },
    /// Run the document's fix/delta/prune steps and print the Δ-SWIG.
    Delta {
        file: PathBuf,
        #[command(flatten)]
        pipe: PipeArg,
    },
    /// Valid adjustment sets for ATT(g, t).
    Vas {
        #[arg(long, conflicts_with = "template", required_unless_present = "template")]
        graph: Option<PathBuf>,
        /// Template size, `T=<n>` or `<n>`.
        #[arg(long)]
        template: Option<String>,
        #[arg(long)]
        g: u32,
        #[arg(long)]
        t: u32,
        #[arg(long)]
        control: Option<String>,
        #[arg(long)]
        restrict: Option<String>,
    },
    /// Minimal adjustment sets for every restriction row.
    Table1 {
        #[arg(long = "T")]
        periods: u32,
    },
    /// Maximal template graph under the given restrictions.
    Template {
        #[arg(long = "T")]
        periods: u32,
        #[arg(long)]
        restrict: Option<String>,
    },
    /// Draw a panel from the simulation design and write it as CSV.
    Simulate {
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long = "T", default_value_t = 6)]
        periods: u32,
        #[arg(long, default_value_t = 0.9)]
        rho: f64,
        #[arg(long, default_value_t = 0.0)]
        beta_xd: f64,
        #[arg(long)]
        zero_effect: bool,
        /// Drop the direct covariate term from the outcome equation.
        #[arg(long)]
        no_xy_effect: bool,
        /// Add the latent confounder columns.
        #[arg(long)]
        latents: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Conditional DiD estimate of ATT(g, t).
    Estimate {
        #[command(flatten)]
        est: EstArgs,
        #[arg(long)]
        t: u32,
    },
    /// Estimates for every period relative to base period g - 1.
    EventStudy {
        #[command(flatten)]
        est: EstArgs,
        /// Output format; overrides --format.
        #[arg(long, value_enum)]
        out: Option<Format>,
    },
    /// Joint pre-trend tests under nested covariate sets.
    Pretrend {
        #[arg(long)]
        panel: PathBuf,
        #[arg(long)]
        g: u32,
        #[arg(long, default_value_t = 0.05)]
        level: f64,
        #[arg(long, default_value_t = 20_000)]
        draws: usize,
        #[arg(long, default_value = "nt")]
        control: String,
    },
    /// Print a graph, or the result of its pipeline, as DOT or JSON.
    Render {
        file: PathBuf,
        #[command(flatten)]
        pipe: PipeArg,
        /// Ignore pipeline steps and render the DAG.
        #[arg(long)]
        dag: bool,
    },
    /// Serve the JSON API.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct PipeArg {
    /// Pipeline file replacing the document's own steps.
    #[arg(long)]
    pipeline: Option<PathBuf>,
}

#[derive(Args)]
struct EstArgs {
    #[arg(long)]
    panel: PathBuf,
    #[arg(long)]
    g: u32,
    #[arg(long, default_value = "pre-outcome")]
    strategy: String,
    #[arg(long, default_value = "nt")]
    control: String,
    /// Bootstrap replicates; 0 uses the influence-function SE.
    #[arg(long, default_value_t = 200)]
    bootstrap: usize,
    /// Fail on treated strata without controls instead of dropping them.
    #[arg(long)]
    strict: bool,
}

/// Bad flag combinations detected after parsing; exit code 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Usage(msg.into()).into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<Usage>() => {
            eprintln!("error: {e}");
            eprintln!("run `dswig --help` for usage");
            ExitCode::from(2)
        }
        Err(e) => {
            match e.downcast_ref::<dswig_core::Error>() {
                Some(core) => eprintln!("error[{}]: {e:#}", core.code()),
                None => eprintln!("error: {e:#}"),
            }
            ExitCode::from(1)
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_doc(file: &Path, pipe: &PipeArg) -> Result<(GraphSource, Loaded)> {
    let src = GraphSource::Dsl(read(file)?);
    let mut doc = api::load(&src).map_err(|e| anyhow::Error::new(e).context(file.display().to_string()))?;
    if let Some(p) = &pipe.pipeline {
        doc.pipeline = parse_pipeline(&read(p)?).map_err(|e| anyhow::Error::new(e).context(p.display().to_string()))?;
    }
    Ok((src, doc))
}

fn emit(s: &str) -> Result<()> {
    let mut out = io::stdout().lock();
    out.write_all(s.as_bytes())?;
    if !s.ends_with('\n') {
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn emit_json(v: &Value) -> Result<()> {
    emit(&serde_json::to_string(v)?)
}

fn only(fmt: Format, allowed: &[Format], cmd: &str) -> Result<()> {
    if allowed.contains(&fmt) {
        Ok(())
    } else {
        let names: Vec<_> = allowed.iter().map(|f| f.to_possible_value().unwrap().get_name().to_string()).collect();
        usage(format!("`{cmd}` supports --format {}", names.join("|")))
    }
}

fn run(cli: Cli) -> Result<()> {
    let fmt = cli.format;
    match cli.cmd {
        Cmd::Check { file, dsep, pipe } => {
            only(fmt, &[Format::Text, Format::Json], "check")?;
            let (_, doc) = load_doc(&file, &pipe)?;
            match dsep {
                Some(q) => {
                    let v = api::dsep(&doc, &DsepParams { query: Some(q), ..Default::default() })?;
                    if fmt == Format::Json {
                        return emit_json(&v);
                    }
                    if v["separated"] == Value::Bool(true) {
                        emit("SEPARATED (implies conditional independence)")
                    } else {
                        let mut line = "NOT SEPARATED".to_string();
                        if let Some(a) = v.get("observable_alias_in_z") {
                            write!(line, " (observable variables absent from the graph in Z: {a})")?;
                        }
                        emit(&line)
                    }
                }
                None if fmt == Format::Json => emit_json(&api::parse_result(&doc)),
                None => {
                    let stage = run_pipeline(&doc.graph, &doc.pipeline)?;
                    emit(&format!(
                        "ok: {} nodes, {} edges, {} pipeline step(s) -> {} with {} nodes",
                        doc.graph.len(),
                        doc.graph.edges().len(),
                        doc.pipeline.len(),
                        stage.name(),
                        dswig_core::GraphLike::causal_graph(&stage).len(),
                    ))
                }
            }
        }
        Cmd::Swig { file, fix, relabel_pretreatment } => {
            only(fmt, &[Format::Text, Format::Json, Format::Dot], "swig")?;
            let (_, doc) = load_doc(&file, &PipeArg { pipeline: None })?;
            let fix = if fix.is_empty() {
                None
            } else {
                let mut m = std::collections::BTreeMap::new();
                for a in &fix {
                    let (k, v) = a.split_once('=').ok_or_else(|| Usage(format!("--fix expects D=v, got `{a}`")))?;
                    let v: u8 = v.parse().map_err(|_| Usage(format!("--fix value must be 0 or 1, got `{v}`")))?;
                    m.insert(k.to_string(), v);
                }
                Some(m)
            };
            let stage = api::swig_stage(&doc, &SwigParams { fix, relabel_pretreatment, materialize: Vec::new() })?;
            emit_stage(&stage, fmt)
        }
        Cmd::Delta { file, pipe } => {
            only(fmt, &[Format::Text, Format::Json, Format::Dot], "delta")?;
            let (_, doc) = load_doc(&file, &pipe)?;
            emit_stage(&api::delta_stage(&doc, &PipelineParams::default())?, fmt)
        }
        Cmd::Vas { graph, template, g, t, control, restrict } => {
            only(fmt, &[Format::Text, Format::Json], "vas")?;
            let src = graph.as_deref().map(read).transpose()?.map(GraphSource::Dsl);
            let periods = match template.as_deref() {
                None => None,
                Some(s) => Some(
                    s.strip_prefix("T=")
                        .unwrap_or(s)
                        .parse::<u32>()
                        .map_err(|_| Usage(format!("--template expects T=<n>, got `{s}`")))?,
                ),
            };
            let v = api::vas(src.as_ref(), &VasParams { g, t, control, restrict, template: periods })?;
            match fmt {
                Format::Json => emit_json(&v),
                _ => emit(&vas_text(&v)),
            }
        }
        Cmd::Table1 { periods } => {
            only(fmt, &[Format::Text, Format::Json, Format::Csv], "table1")?;
            let tab = dswig_core::table1(periods)?;
            match fmt {
                Format::Json => emit_json(&serde_json::to_value(&tab)?),
                Format::Csv => emit(&tab.to_csv()),
                _ => emit(&tab.to_text()),
            }
        }
        Cmd::Template { periods, restrict } => {
            only(fmt, &[Format::Text, Format::Json, Format::Dot, Format::Dsl], "template")?;
            let r = restrict.as_deref().map(RestrictionSet::parse_flags).transpose()?.unwrap_or_default();
            let g = build_template(&TemplateSpec { periods, restrictions: r })?;
            if fmt == Format::Dsl {
                return emit(&dswig_core::to_dsl(&g)?);
            }
            emit_stage(&Stage::Dag(g), fmt)
        }
        Cmd::Simulate { n, periods, rho, beta_xd, zero_effect, no_xy_effect, latents, out } => {
            only(fmt, &[Format::Text, Format::Csv], "simulate")?;
            let cfg = SimConfig {
                n,
                periods,
                rho,
                beta_xd,
                seed: cli.seed,
                zero_effect,
                xy_effect: !no_xy_effect,
                keep_latents: latents,
            };
            let panel = simulate_panel(&cfg)?;
            match out {
                Some(path) => {
                    let f = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                    panel.write_csv(io::BufWriter::new(f), latents)?;
                    if !cli.quiet {
                        eprintln!("wrote {} units x {} periods to {}", n, periods, path.display());
                    }
                    Ok(())
                }
                None => Ok(panel.write_csv(io::stdout().lock(), latents)?),
            }
        }
        Cmd::Estimate { est, t } => {
            only(fmt, &[Format::Text, Format::Json, Format::Csv], "estimate")?;
            let (panel, strategy, control, opts) = est_inputs(&est, cli.seed)?;
            let r = did_gt(&panel, est.g, t, &strategy, control, &opts)?;
            emit_estimates(&[r], fmt, false)
        }
        Cmd::EventStudy { est, out } => {
            let fmt = out.unwrap_or(fmt);
            only(fmt, &[Format::Text, Format::Json, Format::Csv], "event-study")?;
            let (panel, strategy, control, opts) = est_inputs(&est, cli.seed)?;
            let rs = event_study(&panel, est.g, &strategy, control, &opts)?;
            emit_estimates(&rs, fmt, true)
        }
        Cmd::Pretrend { panel, g, level, draws, control } => {
            only(fmt, &[Format::Text, Format::Json, Format::Csv], "pretrend")?;
            if !(level > 0.0 && level < 1.0) {
                return usage(format!("--level must lie in (0, 1), got {level}"));
            }
            let panel = read_panel(&panel)?;
            let control: Control = control.parse()?;
            let rep = pretrend_battery(&panel, g, &BatteryOptions { level, draws, seed: cli.seed, control })?;
            match fmt {
                Format::Json => emit_json(&serde_json::to_value(&rep)?),
                Format::Csv => emit(&pretrend_csv(&rep)),
                _ => emit(&pretrend_text(&rep)),
            }
        }
        Cmd::Render { file, pipe, dag } => {
            only(fmt, &[Format::Text, Format::Dot, Format::Json], "render")?;
            let (_, doc) = load_doc(&file, &pipe)?;
            let steps = if dag { Vec::new() } else { doc.pipeline.clone() };
            let stage = run_pipeline(&doc.graph, &steps)?;
            match fmt {
                Format::Json => emit_json(&stage.to_json()),
                _ => emit(&stage.to_dot()),
            }
        }
        Cmd::Serve { host, port, static_dir } => {
            let addr: SocketAddr = format!("{host}:{port}")
                .parse()
                .map_err(|_| Usage(format!("bad listen address {host}:{port}")))?;
            if let Some(d) = &static_dir {
                if !d.is_dir() {
                    bail!("static dir {} does not exist", d.display());
                }
            }
            let rt = tokio::runtime::Runtime::new()?;
            if !cli.quiet {
                eprintln!("listening on http://{addr}");
            }
            rt.block_on(dswig_cli::service::serve(addr, static_dir)).with_context(|| format!("serving on {addr}"))
        }
    }
}

fn emit_stage(stage: &Stage, fmt: Format) -> Result<()> {
    match fmt {
        Format::Json => emit_json(&stage.to_json()),
        Format::Dot => emit(&stage.to_dot()),
        _ => emit(&graph_text(&stage.to_json())),
    }
}

/// Node and edge listing for any of the graph JSON shapes.
fn graph_text(v: &Value) -> String {
    let g = v.get("graph").unwrap_or(v);
    let mut s = String::new();
    let empty = Vec::new();
    let nodes = g["nodes"].as_array().unwrap_or(&empty);
    let edges = g["edges"].as_array().unwrap_or(&empty);
    let _ = writeln!(s, "{} nodes, {} edges", nodes.len(), edges.len());
    for n in nodes {
        let id = n["id"].as_str().unwrap_or("?");
        let _ = write!(s, "  {id}");
        if let Some(l) = n["label"].as_str().filter(|l| *l != id) {
            let _ = write!(s, "  [{l}]");
        }
        let kind = n["kind"].as_str().unwrap_or("");
        let role = n["role"].as_str().unwrap_or("other");
        if kind != "endogenous" || role != "other" {
            let _ = write!(s, "  {kind}");
            if role != "other" {
                let _ = write!(s, " {role}");
            }
        }
        s.push('\n');
    }
    for e in edges {
        let _ = write!(s, "  {} -> {}", e["from"].as_str().unwrap_or("?"), e["to"].as_str().unwrap_or("?"));
        if let Some(tag) = e["tag"].as_str() {
            let _ = write!(s, "  ({}:{tag})", e["label"].as_str().unwrap_or(""));
        }
        s.push('\n');
    }
    s
}

fn set_text(v: &Value) -> String {
    let items: Vec<&str> = v.as_array().map(|a| a.iter().filter_map(Value::as_str).collect()).unwrap_or_default();
    format!("{{{}}}", items.join(", "))
}

fn vas_text(v: &Value) -> String {
    let mut s = String::new();
    let tg = &v["target"];
    let control = match &tg["control"] {
        Value::Object(m) => m.get("not_yet_treated").map_or("?".into(), |s| format!("not yet treated through {s}")),
        c => c.as_str().unwrap_or("?").replace('_', " "),
    };
    let _ = writeln!(s, "target: ATT({},{}), control {control}", tg["g"], tg["t"]);
    let _ = writeln!(s, "method: {}", v["method"].as_str().unwrap_or("?"));
    let _ = writeln!(s, "minimal (potential): {}", set_text(&v["minimal_potential"]));
    if v["feasible"] == Value::Bool(true) {
        let _ = writeln!(s, "feasible: yes, adjust for {}", set_text(&v["minimal_observable"]));
    } else {
        let _ = writeln!(s, "feasible: no, the effect is not identified by covariate adjustment");
    }
    let fam = &v["vas_family"];
    match fam["kind"].as_str() {
        Some("interval") => {
            let _ = writeln!(s, "family: every Z with {} ⊆ Z ⊆ {}", set_text(&fam["lower"]), set_text(&fam["upper"]));
        }
        Some("explicit") => {
            let sets: Vec<String> = fam["sets"].as_array().into_iter().flatten().map(set_text).collect();
            let _ = writeln!(s, "family: {}", if sets.is_empty() { "none".into() } else { sets.join(" ") });
        }
        _ => {
            let _ = writeln!(s, "family: none");
        }
    }
    s
}

fn read_panel(path: &Path) -> Result<Panel> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(Panel::read_csv(io::BufReader::new(f))?)
}

fn est_inputs(a: &EstArgs, seed: u64) -> Result<(Panel, Strategy, Control, EstimateOptions)> {
    let strategy: Strategy = a.strategy.parse()?;
    let control: Control = a.control.parse()?;
    let panel = read_panel(&a.panel)?;
    Ok((panel, strategy, control, EstimateOptions { bootstrap: a.bootstrap, seed, strict: a.strict }))
}

fn emit_estimates(rs: &[EstimateResult], fmt: Format, many: bool) -> Result<()> {
    match fmt {
        Format::Json if many => emit_json(&serde_json::to_value(rs)?),
        Format::Json => emit_json(&serde_json::to_value(&rs[0])?),
        Format::Csv => {
            let oracle = rs.iter().any(|r| r.oracle.is_some());
            let mut s = String::from("g,t,strategy,control,estimate,std_error,se_method,n_treated,n_control,dropped_strata");
            if oracle {
                s.push_str(",oracle");
            }
            s.push('\n');
            for r in rs {
                let _ = write!(
                    s,
                    "{},{},{},{},{},{},{},{},{},{}",
                    r.g,
                    r.t,
                    csv_field(&r.strategy.to_string()),
                    r.control,
                    r.estimate,
                    r.std_error,
                    serde_json::to_value(r.se_method)?.as_str().unwrap_or(""),
                    r.n_treated,
                    r.n_control,
                    r.dropped_strata
                );
                if oracle {
                    let _ = write!(s, ",{}", r.oracle.map(|o| o.to_string()).unwrap_or_default());
                }
                s.push('\n');
            }
            emit(&s)
        }
        _ => {
            let mut s = String::new();
            for r in rs {
                let _ = write!(
                    s,
                    "ATT({},{})  {:>10.5}  se {:.5}  [{} / {}]  treated {}  control {}",
                    r.g, r.t, r.estimate, r.std_error, r.strategy, r.control, r.n_treated, r.n_control
                );
                if r.dropped_strata > 0 {
                    let _ = write!(s, "  dropped strata {}", r.dropped_strata);
                }
                if let Some(o) = r.oracle {
                    let _ = write!(s, "  oracle {o:.5}");
                }
                s.push('\n');
            }
            emit(&s)
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains(',') {
        format!("\"{s}\"")
    } else {
        s.to_string()
    }
}

fn pretrend_csv(rep: &PretrendReport) -> String {
    let mut s = String::from("hypothesis,g,t,estimate,std_error,p_value,critical_value,rejected\n");
    for h in &rep.hypotheses {
        for (e, p) in h.estimates.iter().zip(&h.p_values) {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                h.hypothesis.name(),
                e.g,
                e.t,
                e.estimate,
                e.std_error,
                p,
                h.critical_value,
                h.rejected
            );
        }
    }
    s
}

fn pretrend_text(rep: &PretrendReport) -> String {
    let mut s = format!("pre-trend battery for g={} at level {}\n", rep.g, rep.level);
    for h in &rep.hypotheses {
        let _ = writeln!(
            s,
            "  {:<5} max|t| {:>7.3}  crit {:.3}  {}",
            h.hypothesis.name(),
            h.max_abs_t,
            h.critical_value,
            if h.rejected { "REJECTED" } else { "not rejected" }
        );
    }
    if !rep.likely_violated.is_empty() {
        let _ = writeln!(s, "likely violated: {}", rep.likely_violated.join(", "));
    }
    for c in &rep.conclusions {
        let _ = writeln!(s, "  - {c}");
    }
    s
}

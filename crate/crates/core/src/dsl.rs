//! Line-oriented `.dswig` format.
//!
//! ```text
//! graph fig2a
//! node Y0 role=outcome t=0
//! node U role=confounder          # unobserved by default
//! edge U -> Y0 label=alpha:a
//! fix D=0 relabel_pretreatment=true
//! delta dY1 = Y1 - Y0
//! prune keep=dY1,D,X,U
//! ```

use crate::error::{Error, Result};
use crate::graph::{CausalGraph, EdgeLabel, GraphBuilder, Node, NodeKind, Role};
use crate::transform::{DeltaSpec, Intervention, SwigOptions};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    Fix { intervention: Intervention, options: SwigOptions },
    Delta(DeltaSpec),
    Prune { keep: Vec<String> },
}

pub type Pipeline = Vec<Step>;

#[derive(Debug, Clone)]
pub struct Document {
    pub graph: CausalGraph,
    pub pipeline: Pipeline,
}

struct Tok<'a> {
    text: &'a str,
    col: usize,
}

fn tokenize(line: &str) -> Vec<Tok<'_>> {
    let line = match line.find('#') {
        Some(k) => &line[..k],
        None => line,
    };
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    let col_of = |byte: usize| line[..byte].chars().count() + 1;
    for (b, c) in line.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push(Tok { text: &line[s..b], col: col_of(s) });
                start = None;
            }
            (false, None) => start = Some(b),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(Tok { text: &line[s..], col: col_of(s) });
    }
    out
}

#[derive(Default)]
struct Parsed {
    builder: GraphBuilder,
    has_graph_items: bool,
    steps: Vec<(usize, Step)>,
}

fn parse(text: &str) -> Result<Parsed> {
    let mut p = Parsed::default();
    let mut named = false;
    for (ln, raw) in text.lines().enumerate() {
        let ln = ln + 1;
        let toks = tokenize(raw.trim_end_matches('\r'));
        let Some(head) = toks.first() else { continue };
        let err = |t: &Tok, m: String| Error::syntax(ln, t.col, m);
        match head.text {
            "graph" => {
                if toks.len() != 2 {
                    return Err(err(head, "expected `graph <name>`".into()));
                }
                if named {
                    return Err(err(head, "graph name given twice".into()));
                }
                named = true;
                p.builder.set_name(Some(toks[1].text.to_string()));
            }
            "node" => {
                p.has_graph_items = true;
                let node = parse_node(ln, &toks)?;
                if p.builder.has_node(&node.id) {
                    return Err(Error::DuplicateNode(node.id));
                }
                p.builder.add_node(node)?;
            }
            "edge" => {
                p.has_graph_items = true;
                if toks.len() < 4 || toks[2].text != "->" {
                    return Err(err(head, "expected `edge <from> -> <to> [label=...]`".into()));
                }
                let mut label = EdgeLabel::Plain;
                for t in &toks[4..] {
                    let Some(v) = t.text.strip_prefix("label=") else {
                        return Err(err(t, format!("unknown edge attribute `{}`", t.text)));
                    };
                    let (kind, tag) = match v.split_once(':') {
                        Some((k, tag)) => (k, Some(tag)),
                        None => (v, None),
                    };
                    label = EdgeLabel::from_parts(kind, tag).map_err(|m| err(t, m))?;
                }
                p.builder.add_edge(toks[1].text, toks[3].text, label);
            }
            "fix" => {
                let mut intervention = Intervention::new();
                let mut options = SwigOptions::default();
                for t in &toks[1..] {
                    let Some((k, v)) = t.text.split_once('=') else {
                        return Err(err(t, format!("expected `<treatment>=<0|1>`, got `{}`", t.text)));
                    };
                    match k {
                        "relabel_pretreatment" => options.relabel_pretreatment = parse_bool(v).ok_or_else(|| err(t, format!("expected true|false, got `{v}`")))?,
                        "materialize" => options.materialize.extend(list(v)),
                        _ => {
                            let val = match v {
                                "0" => 0,
                                "1" => 1,
                                _ => return Err(err(t, format!("treatments are fixed to 0 or 1, got `{v}`"))),
                            };
                            if intervention.assignments.insert(k.to_string(), val).is_some() {
                                return Err(err(t, format!("`{k}` fixed twice")));
                            }
                        }
                    }
                }
                if intervention.assignments.is_empty() {
                    return Err(err(head, "`fix` needs at least one assignment".into()));
                }
                p.steps.push((ln, Step::Fix { intervention, options }));
            }
            "delta" => {
                let ok = toks.len() == 6 && toks[2].text == "=" && toks[4].text == "-";
                if !ok {
                    return Err(err(head, "expected `delta <name> = <minuend> - <subtrahend>`".into()));
                }
                let spec = DeltaSpec::new(toks[1].text, toks[3].text, toks[5].text);
                p.steps.push((ln, Step::Delta(spec)));
            }
            "prune" => {
                let keep: Vec<String> = match toks.get(1).and_then(|t| t.text.strip_prefix("keep=")) {
                    Some(v) if toks.len() == 2 => list(v).collect(),
                    _ => return Err(err(head, "expected `prune keep=<id>,<id>,...`".into())),
                };
                p.steps.push((ln, Step::Prune { keep }));
            }
            other => return Err(err(head, format!("unknown directive `{other}`"))),
        }
    }
    Ok(p)
}

fn list(v: &str) -> impl Iterator<Item = String> + '_ {
    v.split(',').filter(|s| !s.is_empty()).map(str::to_string)
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "true" => Some(true),
        "false" => Some(false),
        _ => None,
    }
}

fn parse_node(ln: usize, toks: &[Tok]) -> Result<Node> {
    let Some(id) = toks.get(1) else {
        return Err(Error::syntax(ln, toks[0].col, "expected `node <id> [attr=value ...]`"));
    };
    if id.text.contains('=') {
        return Err(Error::syntax(ln, id.col, "node id may not contain `=`"));
    }
    let mut kind = NodeKind::Endogenous;
    let mut role_name: Option<(&str, usize)> = None;
    let mut period: Option<u32> = None;
    let mut observed: Option<bool> = None;
    for t in &toks[2..] {
        let err = |m: String| Error::syntax(ln, t.col, m);
        let Some((k, v)) = t.text.split_once('=') else {
            return Err(err(format!("expected attr=value, got `{}`", t.text)));
        };
        match k {
            "kind" => {
                kind = match v {
                    "endogenous" => NodeKind::Endogenous,
                    "exogenous" => NodeKind::Exogenous,
                    _ => return Err(err(format!("unknown kind `{v}`"))),
                }
            }
            "role" => role_name = Some((v, t.col)),
            "t" => period = Some(v.parse().map_err(|_| err(format!("bad period `{v}`")))?),
            "observed" => {
                observed = Some(parse_bool(v).ok_or_else(|| err(format!("expected true|false, got `{v}`")))?)
            }
            _ => return Err(err(format!("unknown node attribute `{k}`"))),
        }
    }
    let role = match (role_name, period) {
        (None, None) => Role::Other,
        (None, Some(_)) => return Err(Error::syntax(ln, id.col, "`t=` needs a timed role")),
        (Some((r, col)), p) => {
            let timed = |p: Option<u32>| {
                p.ok_or_else(|| Error::syntax(ln, col, format!("role `{r}` needs `t=<int>`")))
            };
            match r {
                "outcome" => Role::Outcome(timed(p)?),
                "covariate" => Role::Covariate(timed(p)?),
                "treatment" => {
                    let t = timed(p)?;
                    if t < 1 {
                        return Err(Error::syntax(ln, col, "treatment period must be >= 1"));
                    }
                    Role::Treatment(t)
                }
                "confounder" | "other" if p.is_some() => {
                    return Err(Error::syntax(ln, col, format!("role `{r}` takes no period")))
                }
                "confounder" => Role::Confounder,
                "other" => Role::Other,
                _ => return Err(Error::syntax(ln, col, format!("unknown role `{r}`"))),
            }
        }
    };
    let mut node = Node::new(id.text, kind, role);
    if let Some(o) = observed {
        node.observed = o;
    }
    Ok(node)
}

/// Parse graph declarations only; pipeline directives are rejected.
pub fn parse_graph(text: &str) -> Result<CausalGraph> {
    let p = parse(text)?;
    if let Some((ln, _)) = p.steps.first() {
        return Err(Error::syntax(*ln, 1, "pipeline directive in a graph-only source"));
    }
    p.builder.build()
}

/// Parse pipeline directives only.
pub fn parse_pipeline(text: &str) -> Result<Pipeline> {
    let p = parse(text)?;
    if p.has_graph_items {
        let ln = text
            .lines()
            .position(|l| matches!(tokenize(l).first().map(|t| t.text), Some("node" | "edge")))
            .unwrap_or(0);
        return Err(Error::syntax(ln + 1, 1, "graph declaration in a pipeline-only source"));
    }
    Ok(p.steps.into_iter().map(|(_, s)| s).collect())
}

/// Parse a file that may hold both the graph and its pipeline.
pub fn parse_document(text: &str) -> Result<Document> {
    let p = parse(text)?;
    Ok(Document { graph: p.builder.build()?, pipeline: p.steps.into_iter().map(|(_, s)| s).collect() })
}

/// Canonical DSL text; `parse_graph(to_dsl(g)) == g` for every parsed graph.
pub fn to_dsl(g: &CausalGraph) -> Result<String> {
    let mut out = String::new();
    if let Some(name) = g.name() {
        out.push_str(&format!("graph {name}\n"));
    }
    for n in g.nodes() {
        if !matches!(n.kind, NodeKind::Endogenous | NodeKind::Exogenous)
            || n.suffix.is_some()
            || n.base_label.is_some()
        {
            return Err(Error::Config(format!(
                "node `{}` belongs to a transformed graph; export it as JSON or DOT",
                n.id
            )));
        }
        out.push_str("node ");
        out.push_str(&n.id);
        if n.kind == NodeKind::Exogenous {
            out.push_str(" kind=exogenous");
        }
        if n.role != Role::Other {
            out.push_str(&format!(" role={}", n.role.name()));
        }
        if let Some(t) = n.role.period() {
            out.push_str(&format!(" t={t}"));
        }
        if n.observed != Node::default_observed(n.kind, n.role) {
            out.push_str(&format!(" observed={}", n.observed));
        }
        out.push('\n');
    }
    for e in g.edges() {
        out.push_str(&format!("edge {} -> {}", e.from, e.to));
        if let Some(tag) = e.label.tag() {
            out.push_str(&format!(" label={}:{tag}", e.label.kind_str()));
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn pipeline_to_dsl(p: &[Step]) -> String {
    let mut out = String::new();
    for s in p {
        match s {
            Step::Fix { intervention, options } => {
                out.push_str("fix");
                for (k, v) in &intervention.assignments {
                    out.push_str(&format!(" {k}={v}"));
                }
                if options.relabel_pretreatment {
                    out.push_str(" relabel_pretreatment=true");
                }
                if !options.materialize.is_empty() {
                    out.push_str(&format!(" materialize={}", options.materialize.join(",")));
                }
            }
            Step::Delta(d) => {
                out.push_str(&format!("delta {} = {} - {}", d.name, d.minuend, d.subtrahend))
            }
            Step::Prune { keep } => out.push_str(&format!("prune keep={}", keep.join(","))),
        }
        out.push('\n');
    }
    out
}

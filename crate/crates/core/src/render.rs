//! DOT and JSON export of graphs at every stage.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dsep::GraphLike;
use crate::error::{Error, Result};
use crate::graph::{CausalGraph, EdgeLabel, GraphBuilder, Node, NodeKind, Role};
use crate::transform::{DeltaSwig, Swig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeJson {
    pub id: String,
    #[serde(default = "endogenous")]
    pub kind: NodeKind,
    #[serde(default = "other")]
    pub role: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub redundant: Option<Vec<usize>>,
}

fn endogenous() -> NodeKind {
    NodeKind::Endogenous
}
fn other() -> String {
    "other".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeJson {
    pub from: String,
    pub to: String,
    #[serde(default = "plain")]
    pub label: String,
    #[serde(default)]
    pub tag: Option<String>,
}

fn plain() -> String {
    "plain".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphJson {
    #[serde(default)]
    pub name: Option<String>,
    pub nodes: Vec<NodeJson>,
    pub edges: Vec<EdgeJson>,
}

pub fn graph_to_json(g: &CausalGraph) -> GraphJson {
    let nodes = g
        .nodes()
        .iter()
        .map(|n| {
            let redundant = n.suffix.as_ref().and_then(|s| {
                let r: Vec<usize> = (0..s.redundant.len()).filter(|&k| s.redundant[k]).collect();
                (!r.is_empty()).then_some(r)
            });
            NodeJson {
                id: n.id.clone(),
                kind: n.kind,
                role: n.role.name().to_string(),
                t: n.role.period(),
                observed: Some(n.observed),
                label: Some(n.label()),
                redundant,
            }
        })
        .collect();
    let edges = g
        .edges()
        .iter()
        .map(|e| EdgeJson {
            from: e.from.clone(),
            to: e.to.clone(),
            label: e.label.kind_str().to_string(),
            tag: e.label.tag().map(str::to_string),
        })
        .collect();
    GraphJson { name: g.name().map(str::to_string), nodes, edges }
}

/// Build a DAG from its JSON form. Only endogenous and exogenous nodes are
/// accepted; transformed graphs are rebuilt through the pipeline instead.
pub fn graph_from_json(j: &GraphJson) -> Result<CausalGraph> {
    let mut b = GraphBuilder::new();
    b.set_name(j.name.clone());
    for n in &j.nodes {
        if !matches!(n.kind, NodeKind::Endogenous | NodeKind::Exogenous) {
            return Err(Error::InvalidNode {
                id: n.id.clone(),
                msg: "only endogenous and exogenous nodes can be declared".into(),
            });
        }
        let role = match (n.role.as_str(), n.t) {
            ("outcome", Some(t)) => Role::Outcome(t),
            ("covariate", Some(t)) => Role::Covariate(t),
            ("treatment", Some(t)) => Role::Treatment(t),
            ("confounder", None) => Role::Confounder,
            ("other", None) => Role::Other,
            (r, t) => {
                return Err(Error::InvalidNode {
                    id: n.id.clone(),
                    msg: format!("role `{r}` with period {t:?} is not valid"),
                })
            }
        };
        let mut node = Node::new(n.id.clone(), n.kind, role);
        if let Some(o) = n.observed {
            node.observed = o;
        }
        b.add_node(node)?;
    }
    for e in &j.edges {
        let label = EdgeLabel::from_parts(&e.label, e.tag.as_deref())
            .map_err(|m| Error::InvalidQuery(format!("edge {} -> {}: {m}", e.from, e.to)))?;
        b.add_edge(&e.from, &e.to, label);
    }
    b.build()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitJson {
    pub random: String,
    pub fixed: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwigJson {
    pub graph: GraphJson,
    pub split: BTreeMap<String, SplitJson>,
    pub relabel: BTreeMap<String, String>,
    pub redundant_suffix: BTreeMap<String, Vec<usize>>,
}

pub fn swig_to_json(s: &Swig) -> SwigJson {
    SwigJson {
        graph: graph_to_json(s.graph()),
        split: s
            .split_nodes()
            .iter()
            .map(|(k, (r, f))| (k.clone(), SplitJson { random: r.clone(), fixed: f.clone() }))
            .collect(),
        relabel: s.relabel().clone(),
        redundant_suffix: s.redundant_suffix().clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DifferenceJson {
    pub name: String,
    pub minuend: String,
    pub subtrahend: String,
    pub combinator: &'static str,
    pub parents: Vec<String>,
    pub cancelled: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaSwigJson {
    pub graph: GraphJson,
    pub split: BTreeMap<String, SplitJson>,
    pub relabel: BTreeMap<String, String>,
    pub redundant_suffix: BTreeMap<String, Vec<usize>>,
    pub differences: Vec<DifferenceJson>,
    pub pruned: Vec<String>,
    pub suppressed: Vec<String>,
}

pub fn delta_to_json(d: &DeltaSwig) -> DeltaSwigJson {
    let base = swig_to_json(d.base());
    DeltaSwigJson {
        graph: graph_to_json(d.graph()),
        split: base.split,
        relabel: base.relabel,
        redundant_suffix: base.redundant_suffix,
        differences: d
            .difference_nodes()
            .iter()
            .map(|dn| DifferenceJson {
                name: dn.spec.name.clone(),
                minuend: dn.spec.minuend.clone(),
                subtrahend: dn.spec.subtrahend.clone(),
                combinator: "difference",
                parents: dn.parents.clone(),
                cancelled: dn.cancelled.clone(),
            })
            .collect(),
        pruned: d.pruned().iter().cloned().collect(),
        suppressed: d.suppressed().iter().cloned().collect(),
    }
}

/// Graph stages that can be drawn.
pub trait Render: GraphLike {
    fn hidden(&self) -> BTreeSet<String> {
        BTreeSet::new()
    }
}
impl Render for CausalGraph {}
impl Render for Swig {}
impl Render for DeltaSwig {
    fn hidden(&self) -> BTreeSet<String> {
        self.suppressed().clone()
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn html_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn record_escape(s: &str) -> String {
    let mut out = String::new();
    for c in s.chars() {
        if "{}|<>\"\\ ".contains(c) {
            out.push('\\');
        }
        out.push(c);
    }
    out
}

/// Label with redundant suffix positions dimmed, as a DOT attribute value.
fn label_attr(n: &Node) -> String {
    let base = n.base_label.as_deref().unwrap_or(&n.id);
    match &n.suffix {
        Some(s) if s.redundant.iter().any(|&r| r) => {
            let mut out = format!("<{}(", html_escape(base));
            for (k, v) in s.values.iter().enumerate() {
                let part = if k == 0 { v.to_string() } else { format!(",{v}") };
                if s.redundant[k] {
                    out.push_str(&format!("<FONT COLOR=\"gray60\">{part}</FONT>"));
                } else {
                    out.push_str(&part);
                }
            }
            out.push_str(")>");
            out
        }
        _ => quote(&n.label()),
    }
}

/// Deterministic DOT text. Unobserved nodes have no border, alpha edges carry
/// "+α", split treatments become two-part records.
pub fn to_dot<G: Render + ?Sized>(g: &G) -> String {
    let hidden = g.hidden();
    let g = g.causal_graph();
    // random part id -> fixed node index
    let mut split: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, n) in g.nodes().iter().enumerate() {
        if let Some(f) = &n.fixed {
            if g.idx(&f.treatment).is_some() {
                split.insert(f.treatment.as_str(), i);
            }
        }
    }
    let port = |i: usize, outgoing: bool| -> String {
        let n = g.node(i);
        if let Some(f) = &n.fixed {
            if split.contains_key(f.treatment.as_str()) {
                return format!("{}:f", quote(&f.treatment));
            }
        }
        if !outgoing && split.contains_key(n.id.as_str()) {
            return format!("{}:r", quote(&n.id));
        }
        quote(&n.id)
    };

    let mut out = String::new();
    out.push_str(&format!("digraph {} {{\n", quote(g.name().unwrap_or("G"))));
    out.push_str("  node [shape=ellipse];\n");
    for n in g.nodes() {
        if hidden.contains(&n.id) {
            continue;
        }
        if n.fixed.as_ref().is_some_and(|f| split.contains_key(f.treatment.as_str())) {
            continue;
        }
        let mut attrs = Vec::new();
        if let Some(&f) = split.get(n.id.as_str()) {
            attrs.push("shape=record".to_string());
            attrs.push(format!(
                "label=\"<r> {}|<f> {}\"",
                record_escape(&n.label()),
                record_escape(&g.node(f).label())
            ));
        } else {
            attrs.push(format!("label={}", label_attr(n)));
            if n.kind == NodeKind::Fixed {
                attrs.push("shape=box".into());
            }
        }
        if !n.observed && n.kind != NodeKind::Fixed {
            attrs.push("penwidth=0".into());
        }
        out.push_str(&format!("  {} [{}];\n", quote(&n.id), attrs.join(", ")));
    }
    for (e, &(f, t)) in g.edges().iter().zip(g.edge_indices()) {
        if hidden.contains(&e.from) || hidden.contains(&e.to) {
            continue;
        }
        let attr = match e.label {
            EdgeLabel::Alpha(_) => " [label=\"+α\"]",
            _ => "",
        };
        out.push_str(&format!("  {} -> {}{};\n", port(f, true), port(t, false), attr));
    }
    out.push_str("}\n");
    out
}

//! SWIG and Δ-SWIG construction: split fixed treatments, relabel their
//! descendants as potential variables, add difference sinks with alpha-edge
//! cancellation, and prune childless nodes.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::graph::{
    CausalGraph, EdgeLabel, FixedPart, GraphBuilder, Node, NodeKind, Role, Suffix,
};

/// Treatments fixed to a value, keyed by treatment id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Intervention {
    pub assignments: BTreeMap<String, u8>,
}

impl Intervention {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fix(mut self, treatment: impl Into<String>, value: u8) -> Self {
        self.assignments.insert(treatment.into(), value);
        self
    }

    /// Every treatment node of `g` fixed to zero.
    pub fn all_zero(g: &CausalGraph) -> Self {
        let mut i = Intervention::new();
        for t in g.treatments() {
            i.assignments.insert(g.node(t).id.clone(), 0);
        }
        i
    }

    /// Treatments with period `1..=s` fixed to zero.
    pub fn zero_through(g: &CausalGraph, s: u32) -> Self {
        let mut i = Intervention::new();
        for t in g.treatments() {
            if g.node(t).role.period().is_some_and(|p| p <= s) {
                i.assignments.insert(g.node(t).id.clone(), 0);
            }
        }
        i
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SwigOptions {
    /// Also give non-descendant outcome nodes an (all redundant) suffix.
    pub relabel_pretreatment: bool,
    /// Nodes whose exogenous disturbance `U_<id>` should be materialized.
    pub materialize: Vec<String>,
}

pub fn fixed_id(treatment: &str, value: u8) -> String {
    format!("{treatment}={value}")
}

#[derive(Debug, Clone)]
pub struct Swig {
    graph: CausalGraph,
    original: CausalGraph,
    intervention: Intervention,
    split_nodes: BTreeMap<String, (String, String)>,
    relabel: BTreeMap<String, String>,
    redundant_suffix: BTreeMap<String, Vec<usize>>,
}

impl Swig {
    pub fn graph(&self) -> &CausalGraph {
        &self.graph
    }
    /// The DAG this SWIG was built from.
    pub fn original(&self) -> &CausalGraph {
        &self.original
    }
    pub fn intervention(&self) -> &Intervention {
        &self.intervention
    }
    /// Treatment id -> (random part id, fixed part id).
    pub fn split_nodes(&self) -> &BTreeMap<String, (String, String)> {
        &self.split_nodes
    }
    pub fn relabel(&self) -> &BTreeMap<String, String> {
        &self.relabel
    }
    pub fn redundant_suffix(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.redundant_suffix
    }
}

pub fn apply_swig(g: &CausalGraph, i: &Intervention, relabel_pretreatment: bool) -> Result<Swig> {
    apply_swig_with(g, i, &SwigOptions { relabel_pretreatment, materialize: Vec::new() })
}

pub fn apply_swig_with(g: &CausalGraph, i: &Intervention, opts: &SwigOptions) -> Result<Swig> {
    let mut fixed: Vec<(usize, u8)> = Vec::new();
    for (id, &v) in &i.assignments {
        let k = g.idx(id).ok_or_else(|| Error::UnknownNode(id.clone()))?;
        if !g.node(k).role.is_treatment() {
            return Err(Error::NotTreatment(id.clone()));
        }
        if v > 1 {
            return Err(Error::Config(format!("treatment `{id}` can only be fixed to 0 or 1")));
        }
        fixed.push((k, v));
    }
    fixed.sort_by_key(|&(k, _)| (g.node(k).role.period(), k));
    let is_fixed: BTreeMap<usize, u8> = fixed.iter().copied().collect();

    // ancestry[f][v]: fixed treatment f is a proper ancestor of v.
    let ancestry: Vec<Vec<bool>> = fixed
        .iter()
        .map(|&(f, _)| {
            let mut m = g.descendant_mask([f]);
            m[f] = false;
            m
        })
        .collect();

    let mut b = GraphBuilder::new();
    b.set_name(g.name().map(str::to_string));
    let mut relabel = BTreeMap::new();
    let mut redundant_suffix = BTreeMap::new();
    for (v, node) in g.nodes().iter().enumerate() {
        let mut node = node.clone();
        let hits: Vec<bool> = ancestry.iter().map(|m| m[v]).collect();
        let last = hits.iter().rposition(|&h| h);
        let len = match last {
            Some(l) if !node.role.is_outcome() => Some(l + 1),
            Some(_) => Some(hits.len()),
            None if opts.relabel_pretreatment && node.role.is_outcome() && !hits.is_empty() => {
                Some(hits.len())
            }
            None => None,
        };
        if let Some(len) = len {
            let suffix = Suffix {
                values: fixed[..len].iter().map(|&(_, val)| val).collect(),
                redundant: hits[..len].iter().map(|h| !h).collect(),
            };
            let red: Vec<usize> = (0..len).filter(|&k| suffix.redundant[k]).collect();
            if !red.is_empty() {
                redundant_suffix.insert(node.id.clone(), red);
            }
            node.suffix = Some(suffix);
            relabel.insert(node.id.clone(), node.label());
        }
        b.add_node(node)?;
    }

    let mut split_nodes = BTreeMap::new();
    for &(f, val) in &fixed {
        let t = &g.node(f).id;
        let fid = fixed_id(t, val);
        let mut node = Node::new(fid.clone(), NodeKind::Fixed, Role::Other).with_observed(true);
        node.fixed = Some(FixedPart { treatment: t.clone(), value: val });
        b.add_node(node)?;
        split_nodes.insert(t.clone(), (t.clone(), fid));
    }

    // Treatment ancestors of each node, for alpha resolution.
    let treatments = g.treatments();
    for (e, &(f, t)) in g.edges().iter().zip(g.edge_indices()) {
        let from = match is_fixed.get(&f) {
            Some(&val) => fixed_id(&e.from, val),
            None => e.from.clone(),
        };
        let label = match &e.label {
            EdgeLabel::AlphaUnderZero(tag) if never_treated(g, &treatments, &is_fixed, t) => {
                EdgeLabel::Alpha(tag.clone())
            }
            other => other.clone(),
        };
        b.add_edge(&from, &e.to, label);
    }
    for id in &opts.materialize {
        let k = g.resolve(id)?;
        materialize(&mut b, &g.node(k).id);
    }

    Ok(Swig {
        graph: b.build()?,
        original: g.clone(),
        intervention: i.clone(),
        split_nodes,
        relabel,
        redundant_suffix,
    })
}

/// All treatment ancestors of `v` are fixed to zero.
fn never_treated(
    g: &CausalGraph,
    treatments: &[usize],
    fixed: &BTreeMap<usize, u8>,
    v: usize,
) -> bool {
    let anc = g.ancestor_mask([v]);
    treatments.iter().filter(|&&d| d != v && anc[d]).all(|d| fixed.get(d) == Some(&0))
}

/// Id of the auto-materialized disturbance of `id`.
pub fn disturbance_id(id: &str) -> String {
    format!("U_{id}")
}

fn materialize(b: &mut GraphBuilder, id: &str) {
    let u = disturbance_id(id);
    if b.has_node(&u) {
        return;
    }
    b.add_node(Node::new(u.clone(), NodeKind::Exogenous, Role::Other))
        .expect("fresh disturbance id");
    b.add_edge(&u, id, EdgeLabel::Plain);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Combinator {
    #[default]
    Difference,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeltaSpec {
    pub name: String,
    pub minuend: String,
    pub subtrahend: String,
    pub combinator: Combinator,
}

impl DeltaSpec {
    pub fn new(name: impl Into<String>, minuend: impl Into<String>, subtrahend: impl Into<String>) -> Self {
        DeltaSpec {
            name: name.into(),
            minuend: minuend.into(),
            subtrahend: subtrahend.into(),
            combinator: Combinator::Difference,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DifferenceNode {
    pub spec: DeltaSpec,
    pub parents: Vec<String>,
    pub cancelled: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct DeltaSwig {
    base: Swig,
    graph: CausalGraph,
    difference_nodes: Vec<DifferenceNode>,
    pruned: BTreeSet<String>,
    suppressed: BTreeSet<String>,
}

impl DeltaSwig {
    pub fn from_swig(s: &Swig) -> Self {
        DeltaSwig {
            base: s.clone(),
            graph: s.graph.clone(),
            difference_nodes: Vec::new(),
            pruned: BTreeSet::new(),
            suppressed: BTreeSet::new(),
        }
    }

    pub fn base(&self) -> &Swig {
        &self.base
    }
    pub fn graph(&self) -> &CausalGraph {
        &self.graph
    }
    pub fn difference_nodes(&self) -> &[DifferenceNode] {
        &self.difference_nodes
    }
    pub fn pruned(&self) -> &BTreeSet<String> {
        &self.pruned
    }
    /// Exogenous nodes hidden from rendering (still part of the model).
    pub fn suppressed(&self) -> &BTreeSet<String> {
        &self.suppressed
    }

    pub fn with_difference(&self, spec: DeltaSpec) -> Result<DeltaSwig> {
        let g = &self.graph;
        if g.resolve(&spec.name).is_ok() {
            return Err(Error::DuplicateDifference(spec.name.clone()));
        }
        let m = g.resolve(&spec.minuend)?;
        let s = g.resolve(&spec.subtrahend)?;
        if m == s {
            return Err(Error::InvalidDifference("minuend and subtrahend coincide".into()));
        }
        for k in [m, s] {
            let kind = g.node(k).kind;
            if kind == NodeKind::Difference || kind == NodeKind::Fixed {
                return Err(Error::InvalidDifference(format!(
                    "`{}` is not a random level node",
                    g.node(k).id
                )));
            }
        }
        let (mid, sid) = (g.node(m).id.clone(), g.node(s).id.clone());

        let mut b = g.to_builder();
        for id in [&mid, &sid] {
            if !g.nodes()[g.idx(id).unwrap()].kind.eq(&NodeKind::Exogenous) {
                materialize(&mut b, id);
            }
        }
        let h = b.build()?;
        let (m, s) = (h.idx(&mid).unwrap(), h.idx(&sid).unwrap());

        let mut parents: BTreeSet<usize> = h.parents(m).iter().copied().collect();
        parents.extend(h.parents(s).iter().copied());
        let mut cancelled = Vec::new();
        parents.retain(|&p| {
            let cancel = match (h.edge_label(p, m), h.edge_label(p, s)) {
                (Some(EdgeLabel::Alpha(a)), Some(EdgeLabel::Alpha(c))) => a == c,
                _ => false,
            };
            if cancel {
                cancelled.push(h.node(p).id.clone());
            }
            !cancel
        });

        let (mn, sn) = (h.node(m), h.node(s));
        let mut node = Node::new(spec.name.clone(), NodeKind::Difference, Role::Other)
            .with_observed(mn.observed && sn.observed);
        node.base_label = Some(delta_label(&mn.id, &sn.id));
        node.suffix = mn.suffix.clone().or_else(|| sn.suffix.clone());
        let mut b = h.to_builder();
        b.add_node(node)?;
        let parent_ids: Vec<String> = parents.iter().map(|&p| h.node(p).id.clone()).collect();
        for p in &parent_ids {
            b.add_edge(p, &spec.name, EdgeLabel::Plain);
        }
        let mut out = self.clone();
        out.graph = b.build()?;
        out.difference_nodes.push(DifferenceNode { spec, parents: parent_ids, cancelled });
        Ok(out)
    }
}

fn split_digits(id: &str) -> (&str, Option<u32>) {
    let cut = id.trim_end_matches(|c: char| c.is_ascii_digit()).len();
    (&id[..cut], id[cut..].parse().ok())
}

fn delta_label(m: &str, s: &str) -> String {
    match (split_digits(m), split_digits(s)) {
        ((pm, Some(tm)), (ps, Some(ts))) if pm == ps && tm == ts + 1 => format!("Δ{m}"),
        ((pm, Some(tm)), (ps, Some(ts))) if pm == ps => format!("Δ{pm}{ts},{tm}"),
        _ => format!("Δ({m}-{s})"),
    }
}

pub fn add_difference(s: &Swig, spec: DeltaSpec) -> Result<DeltaSwig> {
    DeltaSwig::from_swig(s).with_difference(spec)
}

/// Remove childless nodes outside `keep` until none is left, then hide
/// exogenous nodes that feed a single remaining node.
pub fn prune(d: &DeltaSwig, keep: &BTreeSet<String>) -> Result<DeltaSwig> {
    let g = &d.graph;
    let mut keep_mask = vec![false; g.len()];
    for k in keep {
        keep_mask[g.resolve(k)?] = true;
    }
    let mut removed = vec![false; g.len()];
    let mut live_children: Vec<usize> = (0..g.len()).map(|v| g.children(v).len()).collect();
    for &v in g.topo_order().iter().rev() {
        if keep_mask[v] || g.node(v).kind == NodeKind::Fixed || live_children[v] > 0 {
            continue;
        }
        removed[v] = true;
        for &p in g.parents(v) {
            live_children[p] -= 1;
        }
    }
    let mut b = GraphBuilder::new();
    b.set_name(g.name().map(str::to_string));
    let mut out = d.clone();
    for (v, node) in g.nodes().iter().enumerate() {
        if removed[v] {
            out.pruned.insert(node.id.clone());
        } else {
            b.add_node(node.clone())?;
        }
    }
    for (e, &(f, t)) in g.edges().iter().zip(g.edge_indices()) {
        if !removed[f] && !removed[t] {
            b.add_edge(&e.from, &e.to, e.label.clone());
        }
    }
    out.graph = b.build()?;
    out.suppressed = out
        .graph
        .nodes()
        .iter()
        .enumerate()
        .filter(|&(v, n)| {
            n.kind == NodeKind::Exogenous
                && out.graph.children(v).len() == 1
                && !keep.contains(&n.id)
        })
        .map(|(_, n)| n.id.clone())
        .collect();
    Ok(out)
}

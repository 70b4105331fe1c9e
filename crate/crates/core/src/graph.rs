//! Annotated causal DAGs: nodes with roles and time indices, edges with
//! separability labels, plus the graph primitives everything else builds on.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Endogenous,
    Exogenous,
    /// Fixed half of a split treatment node. Produced by `transform::apply_swig`.
    Fixed,
    /// Sink node holding the difference of two levels.
    Difference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Outcome(u32),
    Covariate(u32),
    Treatment(u32),
    Confounder,
    Other,
}

impl Role {
    pub fn period(&self) -> Option<u32> {
        match *self {
            Role::Outcome(t) | Role::Covariate(t) | Role::Treatment(t) => Some(t),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Role::Outcome(_) => "outcome",
            Role::Covariate(_) => "covariate",
            Role::Treatment(_) => "treatment",
            Role::Confounder => "confounder",
            Role::Other => "other",
        }
    }

    pub fn is_treatment(&self) -> bool {
        matches!(self, Role::Treatment(_))
    }
    pub fn is_covariate(&self) -> bool {
        matches!(self, Role::Covariate(_))
    }
    pub fn is_outcome(&self) -> bool {
        matches!(self, Role::Outcome(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeLabel {
    Plain,
    /// Additively separable term shared by all never-treated potential outcomes.
    Alpha(String),
    /// Becomes `Alpha` once the head is a never-treated potential variable.
    AlphaUnderZero(String),
}

impl EdgeLabel {
    pub fn tag(&self) -> Option<&str> {
        match self {
            EdgeLabel::Plain => None,
            EdgeLabel::Alpha(t) | EdgeLabel::AlphaUnderZero(t) => Some(t),
        }
    }

    pub fn kind_str(&self) -> &'static str {
        match self {
            EdgeLabel::Plain => "plain",
            EdgeLabel::Alpha(_) => "alpha",
            EdgeLabel::AlphaUnderZero(_) => "alpha0",
        }
    }

    pub fn from_parts(kind: &str, tag: Option<&str>) -> std::result::Result<Self, String> {
        let need_tag = |t: Option<&str>| match t {
            Some(t) if !t.is_empty() && !t.chars().any(char::is_whitespace) => Ok(t.to_string()),
            _ => Err(format!("edge label `{kind}` needs a nonempty tag")),
        };
        match kind {
            "plain" => Ok(EdgeLabel::Plain),
            "alpha" => Ok(EdgeLabel::Alpha(need_tag(tag)?)),
            "alpha0" => Ok(EdgeLabel::AlphaUnderZero(need_tag(tag)?)),
            other => Err(format!("unknown edge label `{other}`")),
        }
    }
}

/// Intervention suffix of a potential variable, e.g. `(0,0)` in `Y2(0,0)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Suffix {
    pub values: Vec<u8>,
    /// Positions that do not change the variable (rendered gray).
    pub redundant: Vec<bool>,
}

impl Suffix {
    pub fn render(&self) -> String {
        let vals: Vec<String> = self.values.iter().map(|v| v.to_string()).collect();
        format!("({})", vals.join(","))
    }

    /// Suffix with trailing redundant positions dropped; `None` when nothing is left.
    pub fn trimmed(&self) -> Option<String> {
        let keep = self.redundant.iter().rposition(|r| !r)? + 1;
        let vals: Vec<String> = self.values[..keep].iter().map(|v| v.to_string()).collect();
        Some(format!("({})", vals.join(",")))
    }

    pub fn is_genuine(&self) -> bool {
        self.redundant.iter().any(|r| !r)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FixedPart {
    pub treatment: String,
    pub value: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
    pub role: Role,
    pub observed: bool,
    pub suffix: Option<Suffix>,
    /// Display base overriding the id (difference nodes).
    pub base_label: Option<String>,
    pub fixed: Option<FixedPart>,
}

impl Node {
    /// Node with the default observability for its kind and role.
    pub fn new(id: impl Into<String>, kind: NodeKind, role: Role) -> Self {
        let observed = kind == NodeKind::Endogenous && role != Role::Confounder;
        Node { id: id.into(), kind, role, observed, suffix: None, base_label: None, fixed: None }
    }

    pub fn endogenous(id: impl Into<String>) -> Self {
        Node::new(id, NodeKind::Endogenous, Role::Other)
    }

    pub fn with_observed(mut self, observed: bool) -> Self {
        self.observed = observed;
        self
    }

    pub fn default_observed(kind: NodeKind, role: Role) -> bool {
        kind == NodeKind::Endogenous && role != Role::Confounder
    }

    /// Human-readable label, e.g. `Y1(0,0)` or `ΔY1(0)`.
    pub fn label(&self) -> String {
        if let Some(f) = &self.fixed {
            return f.value.to_string();
        }
        let base = self.base_label.as_deref().unwrap_or(&self.id);
        match &self.suffix {
            Some(s) => format!("{base}{}", s.render()),
            None => base.to_string(),
        }
    }

    /// True for potential variables whose suffix actually matters.
    pub fn is_potential(&self) -> bool {
        self.suffix.as_ref().is_some_and(Suffix::is_genuine)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub label: EdgeLabel,
}

/// Immutable validated DAG. Nodes are kept in lexicographic id order, so node
/// indices double as the canonical ordering.
#[derive(Debug, Clone)]
pub struct CausalGraph {
    name: Option<String>,
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    edge_idx: Vec<(usize, usize)>,
    index: HashMap<String, usize>,
    aliases: HashMap<String, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    topo: Vec<usize>,
}

impl PartialEq for CausalGraph {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.nodes == other.nodes && self.edges == other.edges
    }
}

#[derive(Debug, Clone, Default)]
pub struct GraphBuilder {
    name: Option<String>,
    nodes: Vec<Node>,
    seen: HashMap<String, usize>,
    edges: Vec<Edge>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn set_name(&mut self, name: Option<String>) {
        self.name = name;
    }

    pub fn has_node(&self, id: &str) -> bool {
        self.seen.contains_key(id)
    }

    pub fn node_mut(&mut self, id: &str) -> Option<&mut Node> {
        let i = *self.seen.get(id)?;
        Some(&mut self.nodes[i])
    }

    pub fn add_node(&mut self, node: Node) -> Result<()> {
        validate_id(&node.id)?;
        if self.seen.contains_key(&node.id) {
            return Err(Error::DuplicateNode(node.id));
        }
        self.seen.insert(node.id.clone(), self.nodes.len());
        self.nodes.push(node);
        Ok(())
    }

    pub fn node(mut self, node: Node) -> Result<Self> {
        self.add_node(node)?;
        Ok(self)
    }

    pub fn add_edge(&mut self, from: &str, to: &str, label: EdgeLabel) {
        self.edges.push(Edge { from: from.to_string(), to: to.to_string(), label });
    }

    pub fn edge(mut self, from: &str, to: &str) -> Self {
        self.add_edge(from, to, EdgeLabel::Plain);
        self
    }

    pub fn remove_edges_where(&mut self, mut pred: impl FnMut(&Edge) -> bool) {
        self.edges.retain(|e| !pred(e));
    }

    pub fn build(self) -> Result<CausalGraph> {
        CausalGraph::from_parts(self.name, self.nodes, self.edges)
    }
}

fn validate_id(id: &str) -> Result<()> {
    if id.is_empty() || id.chars().any(char::is_whitespace) {
        return Err(Error::InvalidNode {
            id: id.to_string(),
            msg: "ids must be nonempty and contain no whitespace".into(),
        });
    }
    Ok(())
}

impl CausalGraph {
    fn from_parts(name: Option<String>, mut nodes: Vec<Node>, edges: Vec<Edge>) -> Result<Self> {
        nodes.sort_by(|a, b| a.id.cmp(&b.id));
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            validate_id(&n.id)?;
            if index.insert(n.id.clone(), i).is_some() {
                return Err(Error::DuplicateNode(n.id.clone()));
            }
            if let Role::Treatment(t) = n.role {
                if t < 1 {
                    return Err(Error::InvalidNode {
                        id: n.id.clone(),
                        msg: "treatment nodes need period t >= 1".into(),
                    });
                }
            }
        }
        let n = nodes.len();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        let mut keyed: Vec<((usize, usize), Edge)> = Vec::with_capacity(edges.len());
        for e in edges {
            let f = *index.get(&e.from).ok_or_else(|| Error::UnknownNode(e.from.clone()))?;
            let t = *index.get(&e.to).ok_or_else(|| Error::UnknownNode(e.to.clone()))?;
            if f == t {
                return Err(Error::SelfLoop(e.from));
            }
            keyed.push(((f, t), e));
        }
        keyed.sort_by(|a, b| a.0.cmp(&b.0));
        for w in keyed.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::DuplicateEdge(w[0].1.from.clone(), w[0].1.to.clone()));
            }
        }
        for ((f, t), e) in &keyed {
            match nodes[*t].kind {
                NodeKind::Exogenous | NodeKind::Fixed => {
                    return Err(Error::ExogenousIncoming(nodes[*t].id.clone()))
                }
                _ => {}
            }
            if nodes[*f].kind == NodeKind::Difference {
                return Err(Error::InvalidDifference(format!(
                    "difference node `{}` cannot have children",
                    e.from
                )));
            }
            parents[*t].push(*f);
            children[*f].push(*t);
        }
        let topo = topo_sort(n, &parents, &children).map_err(|cycle| {
            Error::Cycle(cycle.into_iter().map(|i| nodes[i].id.clone()).collect())
        })?;

        let mut aliases = HashMap::new();
        for (i, node) in nodes.iter().enumerate() {
            let base = node.base_label.clone().unwrap_or_else(|| node.id.clone());
            let mut names = vec![node.label()];
            if let Some(s) = &node.suffix {
                names.push(match s.trimmed() {
                    Some(tr) => format!("{base}{tr}"),
                    None => base.clone(),
                });
            }
            if node.base_label.is_some() {
                names.push(base);
            }
            if node.fixed.is_some() {
                names.clear();
            }
            for a in names {
                if a != node.id && !index.contains_key(&a) {
                    aliases.entry(a).or_insert(i);
                }
            }
        }

        let (edge_idx, edges): (Vec<_>, Vec<_>) = keyed.into_iter().unzip();
        Ok(CausalGraph { name, nodes, edges, edge_idx, index, aliases, parents, children, topo })
    }

    pub fn empty() -> Self {
        CausalGraph::from_parts(None, Vec::new(), Vec::new()).expect("empty graph is valid")
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }
    pub fn node(&self, i: usize) -> &Node {
        &self.nodes[i]
    }
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }
    /// Edge endpoints as node indices, parallel to `edges()`.
    pub fn edge_indices(&self) -> &[(usize, usize)] {
        &self.edge_idx
    }
    pub fn parents(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }
    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }
    pub fn topo_order(&self) -> &[usize] {
        &self.topo
    }

    /// Index of the node with exactly this id.
    pub fn idx(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Resolve a canonical id or a potential-variable alias.
    pub fn resolve(&self, name: &str) -> Result<usize> {
        self.idx(name)
            .or_else(|| self.aliases.get(name).copied())
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    pub fn node_by_id(&self, id: &str) -> Result<&Node> {
        Ok(&self.nodes[self.resolve(id)?])
    }

    pub fn edge_label(&self, from: usize, to: usize) -> Option<&EdgeLabel> {
        self.edge_idx.binary_search(&(from, to)).ok().map(|k| &self.edges[k].label)
    }

    /// Mask of all ancestors of `seeds`, the seeds included.
    pub fn ancestor_mask(&self, seeds: impl IntoIterator<Item = usize>) -> Vec<bool> {
        walk(self.len(), seeds, &self.parents)
    }

    /// Mask of all descendants of `seeds`, the seeds included.
    pub fn descendant_mask(&self, seeds: impl IntoIterator<Item = usize>) -> Vec<bool> {
        walk(self.len(), seeds, &self.children)
    }

    pub fn descendants(&self, v: &str) -> Result<BTreeSet<String>> {
        let i = self.resolve(v)?;
        Ok(self.mask_ids(&self.descendant_mask([i]), Some(i)))
    }

    pub fn ancestors(&self, v: &str) -> Result<BTreeSet<String>> {
        let i = self.resolve(v)?;
        Ok(self.mask_ids(&self.ancestor_mask([i]), Some(i)))
    }

    fn mask_ids(&self, mask: &[bool], skip: Option<usize>) -> BTreeSet<String> {
        mask.iter()
            .enumerate()
            .filter(|&(j, &m)| m && Some(j) != skip)
            .map(|(j, _)| self.nodes[j].id.clone())
            .collect()
    }

    /// Builder pre-populated with this graph, for transforms.
    pub fn to_builder(&self) -> GraphBuilder {
        let mut b = GraphBuilder::new();
        b.set_name(self.name.clone());
        for n in &self.nodes {
            b.add_node(n.clone()).expect("existing graph is valid");
        }
        for e in &self.edges {
            b.add_edge(&e.from, &e.to, e.label.clone());
        }
        b
    }

    /// Treatment nodes sorted by period, then id.
    pub fn treatments(&self) -> Vec<usize> {
        let mut v: Vec<usize> =
            (0..self.len()).filter(|&i| self.nodes[i].role.is_treatment()).collect();
        v.sort_by_key(|&i| (self.nodes[i].role.period(), i));
        v
    }

    pub fn fixed_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.nodes[i].kind == NodeKind::Fixed).collect()
    }
}

/// Free-function form of [`CausalGraph::descendants`].
pub fn descendants(g: &CausalGraph, v: &str) -> Result<BTreeSet<String>> {
    g.descendants(v)
}

fn walk(n: usize, seeds: impl IntoIterator<Item = usize>, adj: &[Vec<usize>]) -> Vec<bool> {
    let mut mask = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    for s in seeds {
        if !mask[s] {
            mask[s] = true;
            stack.push(s);
        }
    }
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !mask[w] {
                mask[w] = true;
                stack.push(w);
            }
        }
    }
    mask
}

/// Kahn's algorithm, smallest index first. On failure returns one cycle.
fn topo_sort(
    n: usize,
    parents: &[Vec<usize>],
    children: &[Vec<usize>],
) -> std::result::Result<Vec<usize>, Vec<usize>> {
    let mut indeg: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = ready.pop_first() {
        order.push(v);
        for &w in &children[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                ready.insert(w);
            }
        }
    }
    if order.len() == n {
        return Ok(order);
    }
    // Every leftover node has a leftover parent; walk parents until a repeat.
    let mut on_path = vec![usize::MAX; n];
    let mut path = Vec::new();
    let mut v = (0..n).find(|&i| indeg[i] > 0).expect("cycle exists");
    loop {
        if on_path[v] != usize::MAX {
            let mut cyc: Vec<usize> = path[on_path[v]..].to_vec();
            cyc.reverse();
            cyc.push(cyc[0]);
            return Err(cyc);
        }
        on_path[v] = path.len();
        path.push(v);
        v = *parents[v].iter().find(|&&p| indeg[p] > 0).expect("leftover parent");
    }
}

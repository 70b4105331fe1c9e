//! d-separation on DAGs, SWIGs and Δ-SWIGs: a linear-time reachability
//! algorithm plus a brute-force path enumerator used as its oracle.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::graph::{CausalGraph, NodeKind};
use crate::transform::{DeltaSwig, Swig};

/// Anything that exposes a (possibly transformed) causal graph.
pub trait GraphLike {
    fn causal_graph(&self) -> &CausalGraph;
}

impl GraphLike for CausalGraph {
    fn causal_graph(&self) -> &CausalGraph {
        self
    }
}
impl GraphLike for Swig {
    fn causal_graph(&self) -> &CausalGraph {
        self.graph()
    }
}
impl GraphLike for DeltaSwig {
    fn causal_graph(&self) -> &CausalGraph {
        self.graph()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DsepQuery {
    pub x: Vec<String>,
    pub y: Vec<String>,
    pub z: Vec<String>,
    pub include_fixed: bool,
}

impl DsepQuery {
    pub fn new<S: AsRef<str>>(x: &[S], y: &[S], z: &[S]) -> Self {
        let own = |v: &[S]| v.iter().map(|s| s.as_ref().to_string()).collect();
        DsepQuery { x: own(x), y: own(y), z: own(z), include_fixed: true }
    }

    /// Parse `"dY1 _||_ D | X0, X1"`. Sets may be wrapped in braces; commas
    /// inside parentheses (as in `Y2(0,0)`) do not split.
    pub fn parse(s: &str) -> Result<Self> {
        let sep = ["_||_", "⊥⊥", "⫫", "⊥"]
            .iter()
            .find_map(|p| s.find(p).map(|k| (k, p.len())))
            .ok_or_else(|| Error::InvalidQuery(format!("missing `_||_` in `{s}`")))?;
        let (lhs, rest) = (&s[..sep.0], &s[sep.0 + sep.1..]);
        let (rhs, cond) = match rest.find('|') {
            Some(k) => (&rest[..k], &rest[k + 1..]),
            None => (rest, ""),
        };
        let q = DsepQuery {
            x: split_set(lhs)?,
            y: split_set(rhs)?,
            z: split_set(cond)?,
            include_fixed: true,
        };
        if q.x.is_empty() || q.y.is_empty() {
            return Err(Error::InvalidQuery(format!("both sides of `{s}` must name nodes")));
        }
        Ok(q)
    }

    pub fn to_query_string(&self) -> String {
        let mut s = format!("{} _||_ {}", self.x.join(", "), self.y.join(", "));
        if !self.z.is_empty() {
            s.push_str(" | ");
            s.push_str(&self.z.join(", "));
        }
        s
    }
}

fn split_set(s: &str) -> Result<Vec<String>> {
    let s = s.trim();
    let s = s.strip_prefix('{').and_then(|r| r.strip_suffix('}')).unwrap_or(s);
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for c in s.chars() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            _ => {}
        }
        if c == ',' && depth == 0 {
            out.push(std::mem::take(&mut cur));
        } else {
            cur.push(c);
        }
    }
    out.push(cur);
    let out: Vec<String> = out.into_iter().map(|t| t.trim().to_string()).collect();
    if out.len() == 1 && out[0].is_empty() {
        return Ok(Vec::new());
    }
    if out.iter().any(String::is_empty) {
        return Err(Error::InvalidQuery(format!("empty element in `{s}`")));
    }
    Ok(out)
}

/// A query resolved to node indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resolved {
    pub x: Vec<usize>,
    pub y: Vec<usize>,
    pub z: Vec<usize>,
    /// Conditioning names that denote an observable variable whose SWIG
    /// counterpart is a genuine potential variable.
    pub observable_alias_in_z: Vec<String>,
}

pub fn resolve(g: &CausalGraph, q: &DsepQuery) -> Result<Resolved> {
    let mut seen: BTreeSet<usize> = BTreeSet::new();
    let mut observable_alias_in_z = Vec::new();
    let mut one = |names: &[String], is_z: bool| -> Result<Vec<usize>> {
        let mut set: Vec<usize> = Vec::new();
        for name in names {
            let v = g.resolve(name)?;
            if set.contains(&v) {
                return Err(Error::InvalidQuery(format!(
                    "`{name}` names node `{}` twice in one set",
                    g.node(v).id
                )));
            }
            if seen.contains(&v) {
                return Err(Error::InvalidQuery(format!(
                    "node `{}` appears in more than one set",
                    g.node(v).id
                )));
            }
            let node = g.node(v);
            if is_z && name == &node.id && node.is_potential() {
                observable_alias_in_z.push(name.clone());
            }
            set.push(v);
        }
        seen.extend(set.iter().copied());
        Ok(set)
    };
    let x = one(&q.x, false)?;
    let y = one(&q.y, false)?;
    let mut z = one(&q.z, true)?;
    if q.include_fixed {
        for f in g.fixed_nodes() {
            if !seen.contains(&f) {
                z.push(f);
            }
        }
    }
    Ok(Resolved { x, y, z, observable_alias_in_z })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub separated: bool,
    pub observable_alias_in_z: Vec<String>,
}

/// Full verdict including the observable-alias flag. A conditioning set that
/// names an observable variable absent from the SWIG never separates.
pub fn check<G: GraphLike + ?Sized>(g: &G, q: &DsepQuery) -> Result<Verdict> {
    let g = g.causal_graph();
    let r = resolve(g, q)?;
    let separated = if r.observable_alias_in_z.is_empty() {
        dsep_idx(g, &r.x, &r.y, &r.z)
    } else {
        false
    };
    Ok(Verdict { separated, observable_alias_in_z: r.observable_alias_in_z })
}

pub fn d_separated<G: GraphLike + ?Sized>(g: &G, q: &DsepQuery) -> Result<bool> {
    Ok(check(g, q)?.separated)
}

pub const ORACLE_LIMIT: usize = 20;

pub fn d_separated_oracle<G: GraphLike + ?Sized>(g: &G, q: &DsepQuery) -> Result<bool> {
    let g = g.causal_graph();
    if g.len() > ORACLE_LIMIT {
        return Err(Error::TooLarge { nodes: g.len(), limit: ORACLE_LIMIT });
    }
    let r = resolve(g, q)?;
    if !r.observable_alias_in_z.is_empty() {
        return Ok(false);
    }
    Ok(oracle_idx(g, &r.x, &r.y, &r.z))
}

/// Separation given the fixed nodes, read as conditional independence of
/// the represented variables.
pub fn implied_ci(d: &DeltaSwig, q: &DsepQuery) -> Result<bool> {
    let q = DsepQuery { include_fixed: true, ..q.clone() };
    d_separated(d, &q)
}

/// Nodes d-connected to `x` given `z` (excluding `z`; including `x`).
pub fn reachable(g: &CausalGraph, x: &[usize], z: &[usize]) -> Vec<bool> {
    let n = g.len();
    let mut in_z = vec![false; n];
    for &v in z {
        in_z[v] = true;
    }
    let anc_z = g.ancestor_mask(z.iter().copied());
    // visited[v][0]: arrived from a child (moving up); [1]: from a parent.
    let mut visited = vec![[false; 2]; n];
    let mut reach = vec![false; n];
    let mut stack: Vec<(usize, usize)> = x.iter().map(|&v| (v, 0)).collect();
    while let Some((v, dir)) = stack.pop() {
        if visited[v][dir] {
            continue;
        }
        visited[v][dir] = true;
        if !in_z[v] {
            reach[v] = true;
        }
        if dir == 0 {
            if !in_z[v] {
                stack.extend(g.parents(v).iter().map(|&p| (p, 0)));
                stack.extend(g.children(v).iter().map(|&c| (c, 1)));
            }
        } else {
            if !in_z[v] {
                stack.extend(g.children(v).iter().map(|&c| (c, 1)));
            }
            if anc_z[v] {
                stack.extend(g.parents(v).iter().map(|&p| (p, 0)));
            }
        }
    }
    reach
}

pub fn dsep_idx(g: &CausalGraph, x: &[usize], y: &[usize], z: &[usize]) -> bool {
    let reach = reachable(g, x, z);
    !y.iter().any(|&v| reach[v])
}

/// Literal application of the blocking rules to every simple path in the
/// skeleton. Exponential; for small graphs only.
pub fn oracle_idx(g: &CausalGraph, x: &[usize], y: &[usize], z: &[usize]) -> bool {
    let n = g.len();
    let mut in_z = vec![false; n];
    for &v in z {
        in_z[v] = true;
    }
    // Collider rule needs "v or a descendant of v is in Z".
    let opens: Vec<bool> =
        (0..n).map(|v| g.descendant_mask([v]).iter().zip(&in_z).any(|(d, z)| *d && *z)).collect();
    let mut is_y = vec![false; n];
    for &v in y {
        is_y[v] = true;
    }
    // neighbours with the edge direction: true when the edge points at the neighbour
    let nbrs: Vec<Vec<(usize, bool)>> = (0..n)
        .map(|v| {
            let mut a: Vec<(usize, bool)> = g.children(v).iter().map(|&c| (c, true)).collect();
            a.extend(g.parents(v).iter().map(|&p| (p, false)));
            a
        })
        .collect();

    struct Search<'a> {
        nbrs: &'a [Vec<(usize, bool)>],
        in_z: &'a [bool],
        opens: &'a [bool],
        is_y: &'a [bool],
        on_path: Vec<bool>,
    }
    impl Search<'_> {
        /// `into_v`: the edge we arrived by points at `v`.
        fn open_path_from(&mut self, v: usize, into_v: Option<bool>) -> bool {
            if into_v.is_some() && self.is_y[v] {
                return true;
            }
            self.on_path[v] = true;
            let mut found = false;
            for &(w, towards_w) in &self.nbrs[v] {
                if self.on_path[w] {
                    continue;
                }
                if let Some(arrow_in) = into_v {
                    let collider = arrow_in && !towards_w;
                    let blocked = if collider { !self.opens[v] } else { self.in_z[v] };
                    if blocked {
                        continue;
                    }
                }
                if self.open_path_from(w, Some(towards_w)) {
                    found = true;
                    break;
                }
            }
            self.on_path[v] = false;
            found
        }
    }
    let mut s = Search { nbrs: &nbrs, in_z: &in_z, opens: &opens, is_y: &is_y, on_path: vec![false; n] };
    !x.iter().any(|&v| s.open_path_from(v, None))
}

/// Does the graph treat this node as a fixed (always conditioned) node?
pub fn is_fixed(g: &CausalGraph, v: usize) -> bool {
    g.node(v).kind == NodeKind::Fixed
}

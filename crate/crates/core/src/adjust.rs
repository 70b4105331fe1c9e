//! Valid adjustment sets for group-time DiD targets.
//!
//! Template graphs of the panel model class, the minimal sufficient set read
//! off the all-zero SWIG, its feasibility, the family of all valid sets, and
//! the restriction table. Arbitrary small graphs go through an exhaustive
//! subset search instead.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dsep::dsep_idx;
use crate::error::{Error, Result};
use crate::graph::{CausalGraph, EdgeLabel, GraphBuilder, Node, NodeKind, Role};
use crate::transform::{apply_swig, disturbance_id, DeltaSpec, DeltaSwig, Intervention, Swig};

/// Model restrictions. Every flag removes edges from the maximal template.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct RestrictionSet {
    /// Additive separability of the confounder effect on untreated outcomes.
    pub swas_staggered: bool,
    pub no_outcome_dynamics: bool,
    pub no_within_period_dx: bool,
    pub no_dx_feedback: bool,
    pub no_xy_dynamics: bool,
    pub no_within_period_xy: bool,
}

impl RestrictionSet {
    pub const FLAGS: [&'static str; 6] =
        ["r-alpha", "r-y", "r-dx-t", "r-dx-t1", "r-xy-t1", "r-xy-t"];

    pub fn all() -> Self {
        RestrictionSet {
            swas_staggered: true,
            no_outcome_dynamics: true,
            no_within_period_dx: true,
            no_dx_feedback: true,
            no_xy_dynamics: true,
            no_within_period_xy: true,
        }
    }

    /// Parse a comma separated list of flag names (`r-alpha,r-y,...`).
    pub fn parse_flags(s: &str) -> Result<Self> {
        let mut r = RestrictionSet::default();
        for f in s.split(',').map(str::trim).filter(|f| !f.is_empty()) {
            *r.flag_mut(f)
                .ok_or_else(|| Error::Config(format!("unknown restriction `{f}`")))? = true;
        }
        Ok(r)
    }

    fn flag_mut(&mut self, name: &str) -> Option<&mut bool> {
        Some(match name {
            "r-alpha" => &mut self.swas_staggered,
            "r-y" => &mut self.no_outcome_dynamics,
            "r-dx-t" => &mut self.no_within_period_dx,
            "r-dx-t1" => &mut self.no_dx_feedback,
            "r-xy-t1" => &mut self.no_xy_dynamics,
            "r-xy-t" => &mut self.no_within_period_xy,
            _ => return None,
        })
    }

    fn flags(&self) -> [bool; 6] {
        [
            self.swas_staggered,
            self.no_outcome_dynamics,
            self.no_within_period_dx,
            self.no_dx_feedback,
            self.no_xy_dynamics,
            self.no_within_period_xy,
        ]
    }

    pub fn to_flags(&self) -> String {
        Self::FLAGS
            .iter()
            .zip(self.flags())
            .filter(|(_, on)| *on)
            .map(|(n, _)| *n)
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Both assumptions the minimal-set formula rests on.
    pub fn formula_applies(&self) -> bool {
        self.swas_staggered && self.no_outcome_dynamics
    }

    /// All 64 combinations, in binary order.
    pub fn enumerate() -> impl Iterator<Item = RestrictionSet> {
        (0u8..64).map(|m| {
            let b = |k: u8| m & (1 << k) != 0;
            RestrictionSet {
                swas_staggered: b(0),
                no_outcome_dynamics: b(1),
                no_within_period_dx: b(2),
                no_dx_feedback: b(3),
                no_xy_dynamics: b(4),
                no_within_period_xy: b(5),
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateSpec {
    #[serde(rename = "T")]
    pub periods: u32,
    #[serde(default)]
    pub restrictions: RestrictionSet,
}

pub const ALPHA_TAG: &str = "a";

pub fn x_id(t: u32) -> String {
    format!("X{t}")
}
pub fn d_id(t: u32) -> String {
    format!("D{t}")
}
pub fn y_id(t: u32) -> String {
    format!("Y{t}")
}

/// Maximal panel DAG for `T` periods minus the edges each restriction rules
/// out. Within a period the order is X, D, Y; when the treatment may affect
/// the same-period covariate the X -> D edge is replaced by D -> X.
pub fn build_template(spec: &TemplateSpec) -> Result<CausalGraph> {
    let n = spec.periods;
    if n < 2 {
        return Err(Error::Config(format!("template needs T >= 2, got {n}")));
    }
    let r = &spec.restrictions;
    let mut b = GraphBuilder::new();
    b.set_name(Some(format!("template_T{n}")));
    b.add_node(Node::new("U", NodeKind::Endogenous, Role::Confounder))?;
    for t in 0..n {
        b.add_node(Node::new(x_id(t), NodeKind::Endogenous, Role::Covariate(t)))?;
        b.add_node(Node::new(y_id(t), NodeKind::Endogenous, Role::Outcome(t)))?;
        if t >= 1 {
            b.add_node(Node::new(d_id(t), NodeKind::Endogenous, Role::Treatment(t)))?;
        }
    }
    let plain = EdgeLabel::Plain;
    for t in 0..n {
        b.add_edge("U", &x_id(t), plain.clone());
        if t >= 1 {
            b.add_edge("U", &d_id(t), plain.clone());
        }
        let uy = if r.swas_staggered {
            EdgeLabel::AlphaUnderZero(ALPHA_TAG.into())
        } else {
            plain.clone()
        };
        b.add_edge("U", &y_id(t), uy);
    }
    for t in 1..n {
        b.add_edge(&x_id(t - 1), &x_id(t), plain.clone());
        if t + 1 < n {
            b.add_edge(&d_id(t), &d_id(t + 1), plain.clone());
        }
    }
    for r_ in 0..n {
        for s in 0..=r_ {
            // X_s -> D_r
            if r_ >= 1 && !(s == r_ && !r.no_within_period_dx) {
                b.add_edge(&x_id(s), &d_id(r_), plain.clone());
            }
            // X_s -> Y_r
            let xy = if s == r_ { !r.no_within_period_xy } else { !r.no_xy_dynamics };
            if xy {
                b.add_edge(&x_id(s), &y_id(r_), plain.clone());
            }
            if s >= 1 {
                b.add_edge(&d_id(s), &y_id(r_), plain.clone());
                let dx = if s == r_ { !r.no_within_period_dx } else { !r.no_dx_feedback };
                if dx {
                    b.add_edge(&d_id(s), &x_id(r_), plain.clone());
                }
            }
            if s < r_ && !r.no_outcome_dynamics {
                b.add_edge(&y_id(s), &y_id(r_), plain.clone());
                b.add_edge(&y_id(s), &d_id(r_), plain.clone());
                b.add_edge(&y_id(s), &x_id(r_), plain.clone());
            }
        }
    }
    b.build()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Control {
    NeverTreated,
    /// Units with no treatment through period `s`.
    NotYetTreated(u32),
}

impl FromStr for Control {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nt" | "never" | "never_treated" => Ok(Control::NeverTreated),
            _ => s
                .strip_prefix("nyt:")
                .and_then(|v| v.parse().ok())
                .map(Control::NotYetTreated)
                .ok_or_else(|| Error::Config(format!("control must be `nt` or `nyt:<s>`, got `{s}`"))),
        }
    }
}

impl fmt::Display for Control {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Control::NeverTreated => write!(f, "nt"),
            Control::NotYetTreated(s) => write!(f, "nyt:{s}"),
        }
    }
}

/// Group first treated in `g`, outcome period `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Target {
    pub g: u32,
    pub t: u32,
    #[serde(default = "never")]
    pub control: Control,
}

fn never() -> Control {
    Control::NeverTreated
}

impl Target {
    pub fn new(g: u32, t: u32) -> Self {
        Target { g, t, control: Control::NeverTreated }
    }

    pub fn nyt(g: u32, t: u32, s: u32) -> Self {
        Target { g, t, control: Control::NotYetTreated(s) }
    }

    /// Last treatment period the comparison depends on. Group membership
    /// always involves D_g, even when the control horizon stops at g - 1.
    fn horizon(&self, last: u32) -> u32 {
        match self.control {
            Control::NeverTreated => last,
            Control::NotYetTreated(s) => s.max(self.g).min(last),
        }
    }
}

/// Period-indexed view of a graph's outcome, treatment, and covariate nodes.
#[derive(Debug, Clone)]
struct Panel {
    outcomes: Vec<(u32, usize)>,
    treatments: Vec<(u32, usize)>,
    covariates: Vec<usize>,
}

impl Panel {
    fn of(g: &CausalGraph) -> Self {
        let mut p = Panel { outcomes: Vec::new(), treatments: Vec::new(), covariates: Vec::new() };
        for (i, n) in g.nodes().iter().enumerate() {
            match n.role {
                Role::Outcome(t) => p.outcomes.push((t, i)),
                Role::Treatment(t) => p.treatments.push((t, i)),
                Role::Covariate(_) if n.observed => p.covariates.push(i),
                _ => {}
            }
        }
        p.outcomes.sort();
        p.treatments.sort();
        p
    }

    fn outcome(&self, t: u32) -> Option<usize> {
        self.outcomes.iter().find(|o| o.0 == t).map(|o| o.1)
    }

    fn last_treatment(&self) -> u32 {
        self.treatments.last().map_or(0, |d| d.0)
    }

    fn check(&self, g: &CausalGraph, target: &Target) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidTarget(m));
        let (gg, t) = (target.g, target.t);
        if self.treatments.is_empty() {
            return bad("graph has no treatment nodes".into());
        }
        if gg < 1 || !self.treatments.iter().any(|d| d.0 == gg) {
            return bad(format!("no treatment node for period g={gg}"));
        }
        if t + 1 == gg {
            return bad(format!("t={t} is the reference period g-1"));
        }
        for p in [gg - 1, t] {
            if self.outcome(p).is_none() {
                return bad(format!("no outcome node for period {p}"));
            }
        }
        let _ = g;
        if let Control::NotYetTreated(s) = target.control {
            if s < (gg - 1).max(t) || s > self.last_treatment() {
                return bad(format!(
                    "not-yet-treated horizon s={s} must lie in [{}, {}]",
                    (gg - 1).max(t),
                    self.last_treatment()
                ));
            }
        }
        Ok(())
    }
}

fn swig_all_zero(g: &CausalGraph) -> Result<Swig> {
    apply_swig(g, &Intervention::all_zero(g), false)
}

/// Parents of the two untreated outcome levels in the all-zero SWIG, without
/// the confounder, the outcome disturbances, and the fixed nodes. Returns ids.
pub fn minimal_sufficient_set(
    s: &Swig,
    target: &Target,
    restrictions: &RestrictionSet,
) -> Result<BTreeSet<String>> {
    if !restrictions.formula_applies() {
        return Err(Error::Restrictions(
            "the minimal-set formula needs additive separability and no outcome dynamics".into(),
        ));
    }
    let g = s.graph();
    let panel = Panel::of(g);
    panel.check(g, target)?;
    let mut out = BTreeSet::new();
    for p in [target.g - 1, target.t] {
        let y = panel.outcome(p).expect("checked");
        let skip = disturbance_id(&g.node(y).id);
        for &q in g.parents(y) {
            let n = g.node(q);
            if n.kind == NodeKind::Fixed || n.role == Role::Confounder || n.id == skip {
                continue;
            }
            if n.role.is_outcome() || n.role.is_treatment() {
                return Err(Error::Restrictions(format!(
                    "`{}` is a parent of `{}`; the formula assumes covariate parents only",
                    n.id,
                    g.node(y).id
                )));
            }
            out.insert(n.id.clone());
        }
    }
    Ok(out)
}

/// Treatments that are proper ancestors of `v`.
fn treatment_ancestors(g: &CausalGraph, v: usize) -> Vec<usize> {
    let anc = g.ancestor_mask([v]);
    (0..g.len()).filter(|&a| a != v && anc[a] && g.node(a).role.is_treatment()).collect()
}

/// A covariate can stand in for its untreated potential version when every
/// treatment upstream of it is one the target group has at zero anyway.
fn identifiable(g: &CausalGraph, v: usize, group: u32) -> bool {
    g.node(v).observed
        && treatment_ancestors(g, v)
            .iter()
            .all(|&d| g.node(d).role.period().is_some_and(|p| p < group))
}

/// Replace potential covariates by their observable versions where allowed.
/// Returns whether every member could be replaced, and the observable ids.
pub fn feasibility(
    set: &BTreeSet<String>,
    target: &Target,
    g: &CausalGraph,
) -> Result<(bool, BTreeSet<String>)> {
    let mut ok = true;
    let mut obs = BTreeSet::new();
    for id in set {
        let v = g.resolve(id)?;
        ok &= identifiable(g, v, target.g);
        obs.insert(g.node(v).id.clone());
    }
    Ok((ok, obs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Formula,
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VasFamily {
    None,
    /// Every Z with lower ⊆ Z ⊆ upper.
    Interval { lower: Vec<String>, upper: Vec<String> },
    Explicit { sets: Vec<Vec<String>> },
}

impl VasFamily {
    /// Materialized list, in increasing size then lexicographic order.
    pub fn sets(&self) -> Vec<Vec<String>> {
        match self {
            VasFamily::None => Vec::new(),
            VasFamily::Explicit { sets } => sets.clone(),
            VasFamily::Interval { lower, upper } => {
                let extra: Vec<&String> = upper.iter().filter(|u| !lower.contains(u)).collect();
                let mut out: Vec<Vec<String>> = subsets_by_size(extra.len())
                    .map(|m| {
                        let mut z: Vec<String> = lower.clone();
                        z.extend((0..extra.len()).filter(|k| m & (1 << k) != 0).map(|k| extra[k].clone()));
                        z.sort();
                        z
                    })
                    .collect();
                sort_sets(&mut out);
                out
            }
        }
    }

    pub fn contains(&self, z: &BTreeSet<String>) -> bool {
        match self {
            VasFamily::None => false,
            VasFamily::Explicit { sets } => sets.iter().any(|s| s.iter().cloned().collect::<BTreeSet<_>>() == *z),
            VasFamily::Interval { lower, upper } => {
                lower.iter().all(|l| z.contains(l)) && z.iter().all(|m| upper.contains(m))
            }
        }
    }
}

fn sort_sets(v: &mut [Vec<String>]) {
    v.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
}

/// Bitmasks over `n` items ordered by popcount, then numerically.
fn subsets_by_size(n: usize) -> impl Iterator<Item = u32> {
    let mut all: Vec<u32> = (0..(1u32 << n)).collect();
    all.sort_by_key(|m| (m.count_ones(), *m));
    all.into_iter()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AdjustmentResult {
    pub target: Target,
    pub method: Method,
    /// Labels in the all-zero SWIG, potential covariates included.
    pub minimal_potential: Vec<String>,
    /// Observable ids; empty when no valid set exists.
    pub minimal_observable: Vec<String>,
    pub feasible: bool,
    pub vas_family: VasFamily,
    /// Inclusion-minimal valid sets found by the exhaustive search.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub minimal_witnesses: Vec<Vec<String>>,
}

impl AdjustmentResult {
    pub fn has_vas(&self) -> bool {
        self.vas_family != VasFamily::None
    }
}

/// Upper limit on covariates for the exhaustive subset search.
pub const SEARCH_LIMIT: usize = 16;

/// Valid adjustment sets for `target`. With `restrictions` given, `g` is read
/// as a template built from them and the closed form is used when it applies;
/// otherwise every covariate subset is tested.
pub fn enumerate_vas(
    g: &CausalGraph,
    target: &Target,
    restrictions: Option<&RestrictionSet>,
) -> Result<AdjustmentResult> {
    Panel::of(g).check(g, target)?;
    match restrictions {
        Some(r) if r.formula_applies() => formula(g, target, r),
        _ => exhaustive(g, target),
    }
}

fn formula(g: &CausalGraph, target: &Target, r: &RestrictionSet) -> Result<AdjustmentResult> {
    let s = swig_all_zero(g)?;
    let min = minimal_sufficient_set(&s, target, r)?;
    let (feasible, obs) = feasibility(&min, target, g)?;
    let labels = min.iter().map(|id| s.graph().node_by_id(id).map(Node::label)).collect::<Result<_>>()?;
    let panel = Panel::of(g);
    let upper: Vec<String> = panel.covariates.iter().map(|&c| g.node(c).id.clone()).collect();
    let obs: Vec<String> = obs.into_iter().collect();
    let vas_family = if feasible {
        VasFamily::Interval { lower: obs.clone(), upper }
    } else {
        VasFamily::None
    };
    Ok(AdjustmentResult {
        target: *target,
        method: Method::Formula,
        minimal_potential: labels,
        minimal_observable: if feasible { obs } else { Vec::new() },
        feasible,
        vas_family,
        minimal_witnesses: Vec::new(),
    })
}

/// Query context for the subset search.
struct Search {
    /// Δ-SWIG with every treatment fixed to zero.
    zero: DeltaSwig,
    /// Δ-SWIG fixing only the treatments up to the control horizon.
    horizon: DeltaSwig,
    delta: String,
    /// Random treatment parts before g, and from g to the horizon.
    before: Vec<String>,
    after: Vec<String>,
    through: Vec<String>,
}

impl Search {
    fn new(g: &CausalGraph, target: &Target) -> Result<Self> {
        let panel = Panel::of(g);
        let last = panel.last_treatment();
        let s = target.horizon(last);
        let (a, b) = (target.g - 1, target.t);
        let (lo, hi) = (a.min(b), a.max(b));
        let ylo = g.node(panel.outcome(lo).expect("checked")).id.clone();
        let yhi = g.node(panel.outcome(hi).expect("checked")).id.clone();
        let mut delta = format!("delta_{ylo}_{yhi}");
        while g.idx(&delta).is_some() {
            delta.push('_');
        }
        let spec = DeltaSpec::new(delta.clone(), yhi, ylo);
        let zero = DeltaSwig::from_swig(&swig_all_zero(g)?).with_difference(spec.clone())?;
        let horizon = if s == last {
            zero.clone()
        } else {
            DeltaSwig::from_swig(&apply_swig(g, &Intervention::zero_through(g, s), false)?)
                .with_difference(spec)?
        };
        let ids = |f: &dyn Fn(u32) -> bool| -> Vec<String> {
            panel.treatments.iter().filter(|d| f(d.0)).map(|d| g.node(d.1).id.clone()).collect()
        };
        Ok(Search {
            zero,
            horizon,
            delta,
            before: ids(&|p| p < target.g),
            after: ids(&|p| p >= target.g && p <= s),
            through: ids(&|p| p <= s),
        })
    }

    fn separated(&self, d: &DeltaSwig, y: &[String], z: &[String]) -> bool {
        let g = d.graph();
        let at = |ids: &[String]| -> Vec<usize> {
            ids.iter().map(|i| g.idx(i).expect("node of the source graph")).collect()
        };
        let mut zz = at(z);
        zz.extend(g.fixed_nodes());
        dsep_idx(g, &[g.idx(&self.delta).expect("difference node")], &at(y), &zz)
    }

    /// Δ independent of the treatments from g on, given W and earlier treatments.
    fn unconfounded(&self, w: &[String]) -> bool {
        let mut z = w.to_vec();
        z.extend(self.before.iter().cloned());
        self.separated(&self.zero, &self.after, &z)
    }

    /// The remaining members are neutral given W.
    fn neutral(&self, w: &[String], rest: &[String]) -> bool {
        if rest.is_empty() {
            return true;
        }
        let mut z = w.to_vec();
        z.extend(self.through.iter().cloned());
        self.separated(&self.horizon, rest, &z)
    }
}

fn exhaustive(g: &CausalGraph, target: &Target) -> Result<AdjustmentResult> {
    let panel = Panel::of(g);
    let cov = &panel.covariates;
    if cov.len() > SEARCH_LIMIT {
        return Err(Error::TooLarge { nodes: cov.len(), limit: SEARCH_LIMIT });
    }
    let search = Search::new(g, target)?;
    let ids: Vec<String> = cov.iter().map(|&c| g.node(c).id.clone()).collect();
    let ident: u32 = (0..cov.len())
        .filter(|&k| identifiable(g, cov[k], target.g))
        .fold(0, |m, k| m | (1 << k));
    let pick = |m: u32| -> Vec<String> {
        (0..ids.len()).filter(|k| m & (1 << k) != 0).map(|k| ids[k].clone()).collect()
    };
    // condition (ii) depends on W only; cache it
    let mut unconf: Vec<Option<bool>> = vec![None; 1 << cov.len()];

    let mut valid: Vec<u32> = Vec::new();
    let mut witness_w: Vec<u32> = Vec::new();
    for z in subsets_by_size(cov.len()) {
        let cand = z & ident;
        // sub-masks of cand, smallest first
        let mut subs: Vec<u32> = Vec::new();
        let mut w = cand;
        loop {
            subs.push(w);
            if w == 0 {
                break;
            }
            w = (w - 1) & cand;
        }
        subs.sort_by_key(|m| (m.count_ones(), *m));
        for w in subs {
            let ok = *unconf[w as usize].get_or_insert_with(|| search.unconfounded(&pick(w)));
            if ok && search.neutral(&pick(w), &pick(z & !w)) {
                valid.push(z);
                witness_w.push(w);
                break;
            }
        }
    }

    let mut order: Vec<usize> = (0..valid.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (pick(valid[a]), pick(valid[b]));
        x.len().cmp(&y.len()).then_with(|| x.cmp(&y))
    });
    let valid: Vec<u32> = order.iter().map(|&i| valid[i]).collect();
    let witness_w: Vec<u32> = order.iter().map(|&i| witness_w[i]).collect();
    let sets: Vec<Vec<String>> = valid.iter().map(|&m| pick(m)).collect();
    let minimal: Vec<usize> = (0..valid.len())
        .filter(|&i| !valid.iter().any(|&o| o != valid[i] && o & valid[i] == o))
        .collect();
    let first = minimal.first().copied();
    let zero = search.zero.graph();
    let (minimal_potential, minimal_observable) = match first {
        Some(i) => (
            pick(witness_w[i]).iter().map(|id| zero.node_by_id(id).map(Node::label)).collect::<Result<_>>()?,
            sets[i].clone(),
        ),
        None => (Vec::new(), Vec::new()),
    };
    Ok(AdjustmentResult {
        target: *target,
        method: Method::Exhaustive,
        minimal_potential,
        minimal_observable,
        feasible: first.is_some(),
        minimal_witnesses: minimal.iter().map(|&i| sets[i].clone()).collect(),
        vas_family: if sets.is_empty() { VasFamily::None } else { VasFamily::Explicit { sets } },
    })
}

/// Symbolic set patterns used in the restriction table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    /// X_0..X_{g-1}
    BarGm1,
    BarG,
    BarT,
    /// {X_t, X_{g-1}}
    PairTGm1,
    PairGm1G,
    PairGm1T,
    Empty,
    None,
    /// Not expressible with the patterns above.
    Other,
}

impl Pattern {
    pub fn render(&self) -> &'static str {
        match self {
            Pattern::BarGm1 => "X̄_{g-1}",
            Pattern::BarG => "X̄_g",
            Pattern::BarT => "X̄_t",
            Pattern::PairTGm1 => "{X_t, X_{g-1}}",
            Pattern::PairGm1G => "{X_{g-1}, X_g}",
            Pattern::PairGm1T => "{X_{g-1}, X_t}",
            Pattern::Empty => "∅",
            Pattern::None => "--",
            Pattern::Other => "mixed",
        }
    }

    fn instantiate(&self, g: u32, t: u32) -> Option<BTreeSet<String>> {
        let bar = |k: u32| (0..=k).map(x_id).collect();
        let pair = |a: u32, b: u32| [x_id(a), x_id(b)].into_iter().collect();
        Some(match self {
            Pattern::BarGm1 => bar(g - 1),
            Pattern::BarG => bar(g),
            Pattern::BarT => bar(t),
            Pattern::PairTGm1 => pair(t, g - 1),
            Pattern::PairGm1G => pair(g - 1, g),
            Pattern::PairGm1T => pair(g - 1, t),
            Pattern::Empty => BTreeSet::new(),
            Pattern::None | Pattern::Other => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Question {
    /// t < g - 1
    PreTrends,
    /// t = g
    ShortTerm,
    /// t > g
    Dynamic,
}

impl Question {
    pub const ALL: [Question; 3] = [Question::PreTrends, Question::ShortTerm, Question::Dynamic];

    fn covers(&self, g: u32, t: u32) -> bool {
        match self {
            Question::PreTrends => t + 1 < g,
            Question::ShortTerm => t == g,
            Question::Dynamic => t > g,
        }
    }

    fn candidates(&self) -> [Pattern; 3] {
        match self {
            Question::PreTrends => [Pattern::BarGm1, Pattern::PairTGm1, Pattern::Empty],
            Question::ShortTerm => [Pattern::BarG, Pattern::PairGm1G, Pattern::Empty],
            Question::Dynamic => [Pattern::BarT, Pattern::PairGm1T, Pattern::Empty],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Question::PreTrends => "pre-trends",
            Question::ShortTerm => "short-term",
            Question::Dynamic => "dynamic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CellEntry {
    pub g: u32,
    pub t: u32,
    /// Minimal observable VAS, or None when no valid set exists.
    pub minimal: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Cell {
    pub question: Question,
    /// All candidate patterns that fit every (g, t) of the column.
    pub patterns: Vec<Pattern>,
    pub rendered: String,
    pub entries: Vec<CellEntry>,
}

impl Cell {
    pub fn matches(&self, p: Pattern) -> bool {
        self.patterns.contains(&p)
    }
}

/// Minimal VAS of every (g, t) in a column, and the patterns that fit them.
pub fn table_cell(periods: u32, r: &RestrictionSet, q: Question) -> Result<Cell> {
    let g = build_template(&TemplateSpec { periods, restrictions: *r })?;
    let mut entries = Vec::new();
    for gg in 1..periods {
        for t in 0..periods {
            if !q.covers(gg, t) {
                continue;
            }
            let res = enumerate_vas(&g, &Target::new(gg, t), Some(r))?;
            let minimal = res.has_vas().then_some(res.minimal_observable);
            entries.push(CellEntry { g: gg, t, minimal });
        }
    }
    let patterns: Vec<Pattern> = if entries.iter().all(|e| e.minimal.is_none()) {
        vec![Pattern::None]
    } else if entries.iter().any(|e| e.minimal.is_none()) {
        vec![Pattern::Other]
    } else {
        let fit: Vec<Pattern> = q
            .candidates()
            .into_iter()
            .filter(|p| {
                entries.iter().all(|e| {
                    let m: BTreeSet<String> = e.minimal.iter().flatten().cloned().collect();
                    p.instantiate(e.g, e.t) == Some(m)
                })
            })
            .collect();
        if fit.is_empty() {
            vec![Pattern::Other]
        } else {
            fit
        }
    };
    let rendered = if entries.is_empty() {
        "n/a".to_string()
    } else {
        patterns.iter().map(Pattern::render).collect::<Vec<_>>().join(" ≡ ")
    };
    Ok(Cell { question: q, patterns, rendered, entries })
}

/// Row of the restriction table. `None` marks a flag the row does not depend on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RowSpec {
    /// Additive separability and no outcome dynamics, jointly.
    pub alpha_y: bool,
    pub dx_t: Option<bool>,
    pub dx_t1: Option<bool>,
    pub xy_t1: Option<bool>,
    pub xy_t: Option<bool>,
}

impl RowSpec {
    /// Restrictions with every free flag set to `free`.
    pub fn restrictions(&self, free: bool) -> RestrictionSet {
        let f = |v: Option<bool>| v.unwrap_or(free);
        RestrictionSet {
            swas_staggered: self.alpha_y,
            no_outcome_dynamics: self.alpha_y,
            no_within_period_dx: f(self.dx_t),
            no_dx_feedback: f(self.dx_t1),
            no_xy_dynamics: f(self.xy_t1),
            no_within_period_xy: f(self.xy_t),
        }
    }

    pub fn columns(&self) -> [String; 5] {
        let yn = |b: bool| if b { "yes" } else { "no" }.to_string();
        let o = |v: Option<bool>| v.map_or_else(|| "n/y".to_string(), yn);
        [yn(self.alpha_y), o(self.dx_t), o(self.dx_t1), o(self.xy_t1), o(self.xy_t)]
    }
}

pub const TABLE_ROWS: [RowSpec; 8] = {
    const fn row(a: bool, d0: Option<bool>, d1: Option<bool>, x1: Option<bool>, x0: Option<bool>) -> RowSpec {
        RowSpec { alpha_y: a, dx_t: d0, dx_t1: d1, xy_t1: x1, xy_t: x0 }
    }
    const Y: Option<bool> = Some(true);
    const N: Option<bool> = Some(false);
    const F: Option<bool> = None;
    [
        row(false, F, F, F, F),
        row(true, N, N, N, N),
        row(true, Y, N, N, N),
        row(true, Y, Y, N, N),
        row(true, N, N, Y, N),
        row(true, Y, N, Y, N),
        row(true, Y, Y, Y, N),
        row(true, F, F, Y, Y),
    ]
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TableRow {
    pub spec: RowSpec,
    pub flags: [String; 5],
    pub cells: [Cell; 3],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Table1 {
    #[serde(rename = "T")]
    pub periods: u32,
    pub rows: Vec<TableRow>,
}

/// Minimal valid adjustment sets under each restriction row.
pub fn table1(periods: u32) -> Result<Table1> {
    if periods < 3 {
        return Err(Error::Config(format!("the table needs T >= 3, got {periods}")));
    }
    let mut rows = Vec::new();
    for spec in TABLE_ROWS {
        let r = spec.restrictions(false);
        let cells = [
            table_cell(periods, &r, Question::PreTrends)?,
            table_cell(periods, &r, Question::ShortTerm)?,
            table_cell(periods, &r, Question::Dynamic)?,
        ];
        rows.push(TableRow { spec, flags: spec.columns(), cells });
    }
    Ok(Table1 { periods, rows })
}

impl Table1 {
    pub const HEADER: [&'static str; 8] =
        ["R^α & R^Y", "R^DX_t", "R^DX_t+1", "R^XY_t+1", "R^XY_t", "pre-trends", "short-term", "dynamic"];

    pub fn to_text(&self) -> String {
        let mut grid: Vec<Vec<String>> = vec![Self::HEADER.iter().map(|s| s.to_string()).collect()];
        for r in &self.rows {
            let mut line: Vec<String> = r.flags.to_vec();
            line.extend(r.cells.iter().map(|c| c.rendered.clone()));
            grid.push(line);
        }
        let widths: Vec<usize> = (0..8)
            .map(|k| grid.iter().map(|l| l[k].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for l in &grid {
            let cells: Vec<String> = l
                .iter()
                .zip(&widths)
                .map(|(c, &w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let esc = |s: &str| {
            if s.contains(',') || s.contains('"') {
                format!("\"{}\"", s.replace('"', "\"\""))
            } else {
                s.to_string()
            }
        };
        let mut out = Self::HEADER.iter().map(|h| esc(h)).collect::<Vec<_>>().join(",");
        out.push('\n');
        for r in &self.rows {
            let mut line: Vec<String> = r.flags.iter().map(|f| esc(f)).collect();
            line.extend(r.cells.iter().map(|c| esc(&c.rendered)));
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_graph;

    fn fig8a() -> RestrictionSet {
        RestrictionSet {
            swas_staggered: true,
            no_outcome_dynamics: true,
            no_within_period_dx: true,
            no_dx_feedback: true,
            ..Default::default()
        }
    }

    fn set(v: &[&str]) -> BTreeSet<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn template_edges() {
        let g = build_template(&TemplateSpec { periods: 2, restrictions: fig8a() }).unwrap();
        let mut edges: Vec<String> = g.edges().iter().map(|e| format!("{}>{}", e.from, e.to)).collect();
        edges.sort();
        let want = [
            "D1>Y1", "U>D1", "U>X0", "U>X1", "U>Y0", "U>Y1", "X0>D1", "X0>X1", "X0>Y0", "X0>Y1",
            "X1>D1", "X1>Y1",
        ];
        assert_eq!(edges, want);
        assert!(matches!(g.edge_label(g.idx("U").unwrap(), g.idx("Y1").unwrap()), Some(EdgeLabel::AlphaUnderZero(_))));
    }

    #[test]
    fn template_rejects_short_panels() {
        assert!(build_template(&TemplateSpec { periods: 1, restrictions: fig8a() }).is_err());
    }

    #[test]
    fn within_period_dx_flips_edge() {
        let g = build_template(&TemplateSpec { periods: 3, restrictions: RestrictionSet::default() }).unwrap();
        let (d2, x2) = (g.idx("D2").unwrap(), g.idx("X2").unwrap());
        assert!(g.edge_label(d2, x2).is_some());
        assert!(g.edge_label(x2, d2).is_none());
    }

    #[test]
    fn minimal_set_fig8a() {
        let g = build_template(&TemplateSpec { periods: 3, restrictions: fig8a() }).unwrap();
        let s = swig_all_zero(&g).unwrap();
        let m = minimal_sufficient_set(&s, &Target::new(1, 2), &fig8a()).unwrap();
        assert_eq!(m, set(&["X0", "X1", "X2"]));
        let err = minimal_sufficient_set(&s, &Target::new(1, 2), &RestrictionSet::default());
        assert!(matches!(err, Err(Error::Restrictions(_))));
    }

    #[test]
    fn feedback_makes_short_run_feasible_only() {
        let mut b = build_template(&TemplateSpec { periods: 3, restrictions: fig8a() }).unwrap().to_builder();
        b.add_edge("D1", "X2", EdgeLabel::Plain);
        let g = b.build().unwrap();
        let s = swig_all_zero(&g).unwrap();
        let m = minimal_sufficient_set(&s, &Target::new(1, 2), &fig8a()).unwrap();
        let labels: BTreeSet<String> = m.iter().map(|i| s.graph().node_by_id(i).unwrap().label()).collect();
        assert_eq!(labels, set(&["X0", "X1", "X2(0)"]));
        assert!(!feasibility(&m, &Target::new(1, 2), &g).unwrap().0);
        let (ok, obs) = feasibility(&m, &Target::new(2, 2), &g).unwrap();
        assert!(ok);
        assert_eq!(obs, set(&["X0", "X1", "X2"]));
    }

    #[test]
    fn empty_set_is_trivially_feasible() {
        let g = build_template(&TemplateSpec { periods: 2, restrictions: fig8a() }).unwrap();
        assert_eq!(feasibility(&BTreeSet::new(), &Target::new(1, 1), &g).unwrap(), (true, BTreeSet::new()));
    }

    #[test]
    fn target_validation() {
        let g = build_template(&TemplateSpec { periods: 3, restrictions: fig8a() }).unwrap();
        for t in [Target::new(2, 1), Target::new(0, 1), Target::new(3, 2), Target::nyt(2, 2, 1)] {
            assert!(matches!(enumerate_vas(&g, &t, None), Err(Error::InvalidTarget(_))), "{t:?}");
        }
    }

    #[test]
    fn exhaustive_matches_formula_small() {
        let r = fig8a();
        let g = build_template(&TemplateSpec { periods: 3, restrictions: r }).unwrap();
        let t = Target::new(1, 2);
        let a = enumerate_vas(&g, &t, Some(&r)).unwrap();
        let b = enumerate_vas(&g, &t, None).unwrap();
        assert_eq!(a.method, Method::Formula);
        assert_eq!(b.method, Method::Exhaustive);
        assert_eq!(a.vas_family.sets(), b.vas_family.sets());
        assert_eq!(a.minimal_observable, vec!["X0", "X1", "X2"]);
    }

    #[test]
    fn no_restrictions_no_vas() {
        let r = RestrictionSet::default();
        let g = build_template(&TemplateSpec { periods: 3, restrictions: r }).unwrap();
        let res = enumerate_vas(&g, &Target::new(1, 2), Some(&r)).unwrap();
        assert_eq!(res.vas_family, VasFamily::None);
        assert!(!res.feasible);
    }

    #[test]
    fn mediator_is_a_bad_control() {
        let g = parse_graph(
            "node Y0 role=outcome t=0\nnode Y1 role=outcome t=1\nnode D role=treatment t=1\n\
             node X0 role=covariate t=0\nnode X1 role=covariate t=1\nnode U role=confounder\n\
             edge D -> Y1\nedge U -> Y0 label=alpha:a\nedge U -> Y1 label=alpha0:a\nedge U -> D\n\
             edge X0 -> Y0\nedge X0 -> Y1\nedge X1 -> Y1\nedge X0 -> X1\nedge X0 -> D\nedge D -> X1\nedge U -> X0",
        )
        .unwrap();
        let res = enumerate_vas(&g, &Target::new(1, 1), None).unwrap();
        assert_eq!(res.vas_family.sets(), vec![vec!["X0".to_string()]]);
    }

    #[test]
    fn restriction_flags_round_trip() {
        for r in RestrictionSet::enumerate() {
            assert_eq!(RestrictionSet::parse_flags(&r.to_flags()).unwrap(), r);
        }
        assert!(RestrictionSet::parse_flags("r-bogus").is_err());
    }

    #[test]
    fn control_parse() {
        assert_eq!("nt".parse::<Control>().unwrap(), Control::NeverTreated);
        assert_eq!("nyt:3".parse::<Control>().unwrap(), Control::NotYetTreated(3));
        assert!("nyt:x".parse::<Control>().is_err());
    }

    #[test]
    fn interval_family_listing() {
        let f = VasFamily::Interval { lower: vec!["X1".into()], upper: vec!["X0".into(), "X1".into(), "X2".into()] };
        let s = f.sets();
        assert_eq!(s.len(), 4);
        assert_eq!(s[0], vec!["X1"]);
        assert!(f.contains(&set(&["X1", "X2"])));
        assert!(!f.contains(&set(&["X0"])));
    }
}

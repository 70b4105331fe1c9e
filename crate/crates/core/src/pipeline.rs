//! Run a list of `fix` / `delta` / `prune` steps against a DAG.

use std::collections::BTreeSet;

use crate::dsep::GraphLike;
use crate::dsl::Step;
use crate::error::{Error, Result};
use crate::graph::CausalGraph;
use crate::render::{delta_to_json, graph_to_json, swig_to_json, Render};
use crate::transform::{apply_swig_with, prune, DeltaSwig, Swig};

/// The graph produced by the last executed step.
#[derive(Debug, Clone)]
pub enum Stage {
    Dag(CausalGraph),
    Swig(Swig),
    Delta(DeltaSwig),
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::Dag(_) => "dag",
            Stage::Swig(_) => "swig",
            Stage::Delta(_) => "delta",
        }
    }

    /// JSON export with the stage-specific metadata keys.
    pub fn to_json(&self) -> serde_json::Value {
        let v = match self {
            Stage::Dag(g) => serde_json::to_value(graph_to_json(g)),
            Stage::Swig(s) => serde_json::to_value(swig_to_json(s)),
            Stage::Delta(d) => serde_json::to_value(delta_to_json(d)),
        };
        v.expect("graph JSON is always serializable")
    }

    pub fn to_dot(&self) -> String {
        match self {
            Stage::Dag(g) => crate::render::to_dot(g),
            Stage::Swig(s) => crate::render::to_dot(s),
            Stage::Delta(d) => crate::render::to_dot(d),
        }
    }
}

impl GraphLike for Stage {
    fn causal_graph(&self) -> &CausalGraph {
        match self {
            Stage::Dag(g) => g,
            Stage::Swig(s) => s.graph(),
            Stage::Delta(d) => d.graph(),
        }
    }
}

impl Render for Stage {
    fn hidden(&self) -> BTreeSet<String> {
        match self {
            Stage::Delta(d) => d.suppressed().clone(),
            _ => BTreeSet::new(),
        }
    }
}

/// Execute `steps` in order. A pipeline holds at most one `fix`, which must
/// come first; `delta` needs a SWIG and `prune` needs a Δ-SWIG.
pub fn run_pipeline(g: &CausalGraph, steps: &[Step]) -> Result<Stage> {
    let mut stage = Stage::Dag(g.clone());
    for (k, step) in steps.iter().enumerate() {
        let bad = |m: &str| Err(Error::Config(format!("pipeline step {}: {m}", k + 1)));
        stage = match (step, stage) {
            (Step::Fix { intervention, options }, Stage::Dag(g)) => {
                Stage::Swig(apply_swig_with(&g, intervention, options)?)
            }
            (Step::Fix { .. }, _) => return bad("`fix` must be the first step and appear once"),
            (Step::Delta(spec), Stage::Swig(s)) => Stage::Delta(DeltaSwig::from_swig(&s).with_difference(spec.clone())?),
            (Step::Delta(spec), Stage::Delta(d)) => Stage::Delta(d.with_difference(spec.clone())?),
            (Step::Delta(_), Stage::Dag(_)) => return bad("`delta` needs a preceding `fix`"),
            (Step::Prune { keep }, Stage::Delta(d)) => {
                let keep: BTreeSet<String> = keep.iter().cloned().collect();
                Stage::Delta(prune(&d, &keep)?)
            }
            (Step::Prune { .. }, _) => return bad("`prune` needs a preceding `delta`"),
        };
    }
    Ok(stage)
}

//! Graph actions shared by the CLI and the HTTP service.
//!
//! Every action returns a `serde_json::Value`; the CLI prints it with
//! `--format json` and the service wraps it in `{ok, result}`, so both emit
//! the same bytes for the same input.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use dswig_core::render::{graph_from_json, graph_to_json, GraphJson};
use dswig_core::transform::SwigOptions;
use dswig_core::{
    build_template, check, enumerate_vas, parse_document, parse_pipeline, run_pipeline, table1, CausalGraph,
    Control, DsepQuery, Error, Intervention, Pipeline, RestrictionSet, Result, Stage, Step, Target,
    TemplateSpec,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Parse,
    Swig,
    Delta,
    Dsep,
    Vas,
    Table1,
    Template,
}

impl Action {
    pub const ALL: [Action; 7] =
        [Action::Parse, Action::Swig, Action::Delta, Action::Dsep, Action::Vas, Action::Table1, Action::Template];

    pub fn name(&self) -> &'static str {
        match self {
            Action::Parse => "parse",
            Action::Swig => "swig",
            Action::Delta => "delta",
            Action::Dsep => "dsep",
            Action::Vas => "vas",
            Action::Table1 => "table1",
            Action::Template => "template",
        }
    }

    fn needs_graph(&self) -> bool {
        matches!(self, Action::Parse | Action::Swig | Action::Delta | Action::Dsep)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Action {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Action::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown action `{s}`")))
    }
}

/// DSL text (graph plus optional pipeline) or a JSON graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphSource {
    Dsl(String),
    Json(GraphJson),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApiRequest {
    #[serde(default)]
    pub graph: Option<GraphSource>,
    #[serde(default)]
    pub action: Option<Action>,
    #[serde(default)]
    pub params: Value,
}

/// A graph together with the pipeline written next to it, if any.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub graph: CausalGraph,
    pub pipeline: Pipeline,
}

pub fn load(src: &GraphSource) -> Result<Loaded> {
    match src {
        GraphSource::Dsl(text) => {
            let d = parse_document(text)?;
            Ok(Loaded { graph: d.graph, pipeline: d.pipeline })
        }
        GraphSource::Json(j) => Ok(Loaded { graph: graph_from_json(j)?, pipeline: Vec::new() }),
    }
}

fn params<T: DeserializeOwned + Default>(v: &Value) -> Result<T> {
    if v.is_null() {
        return Ok(T::default());
    }
    serde_json::from_value(v.clone()).map_err(|e| Error::Config(format!("params: {e}")))
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwigParams {
    /// Treatment values; defaults to the document's `fix` step, else all zero.
    #[serde(default)]
    pub fix: Option<BTreeMap<String, u8>>,
    #[serde(default)]
    pub relabel_pretreatment: bool,
    #[serde(default)]
    pub materialize: Vec<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineParams {
    /// Pipeline DSL; replaces the document's own steps when present.
    #[serde(default)]
    pub pipeline: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DsepParams {
    #[serde(default)]
    pub x: Vec<String>,
    #[serde(default)]
    pub y: Vec<String>,
    #[serde(default)]
    pub z: Vec<String>,
    /// Alternative to x/y/z: `"dY1 _||_ D | X"`.
    #[serde(default)]
    pub query: Option<String>,
    #[serde(default)]
    pub pipeline: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VasParams {
    pub g: u32,
    pub t: u32,
    #[serde(default)]
    pub control: Option<String>,
    /// Comma separated restriction flags. With a graph this declares the
    /// graph a template built under them and enables the closed form.
    #[serde(default)]
    pub restrict: Option<String>,
    /// Build the template with this many periods instead of reading a graph.
    #[serde(default, rename = "T")]
    pub template: Option<u32>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateParams {
    #[serde(rename = "T")]
    pub periods: u32,
    #[serde(default)]
    pub restrict: Option<String>,
}

fn pipeline_for(doc: &Loaded, override_src: &Option<String>) -> Result<Pipeline> {
    match override_src {
        Some(p) => parse_pipeline(p),
        None => Ok(doc.pipeline.clone()),
    }
}

fn graph_arg(a: Action, graph: Option<&GraphSource>) -> Result<Loaded> {
    load(graph.ok_or_else(|| Error::Config(format!("action `{a}` needs a graph")))?)
}

pub fn parse_result(doc: &Loaded) -> Value {
    json!({
        "graph": graph_to_json(&doc.graph),
        "pipeline": dswig_core::dsl::pipeline_to_dsl(&doc.pipeline),
    })
}

pub fn swig(doc: &Loaded, p: &SwigParams) -> Result<Value> {
    Ok(swig_stage(doc, p)?.to_json())
}

pub fn swig_stage(doc: &Loaded, p: &SwigParams) -> Result<Stage> {
    let step = match &p.fix {
        Some(fix) => Step::Fix {
            intervention: Intervention { assignments: fix.clone() },
            options: SwigOptions { relabel_pretreatment: p.relabel_pretreatment, materialize: p.materialize.clone() },
        },
        None => match doc.pipeline.first() {
            Some(s @ Step::Fix { .. }) => s.clone(),
            _ => Step::Fix {
                intervention: Intervention::all_zero(&doc.graph),
                options: SwigOptions {
                    relabel_pretreatment: p.relabel_pretreatment,
                    materialize: p.materialize.clone(),
                },
            },
        },
    };
    run_pipeline(&doc.graph, &[step])
}

pub fn delta(doc: &Loaded, p: &PipelineParams) -> Result<Value> {
    Ok(delta_stage(doc, p)?.to_json())
}

pub fn delta_stage(doc: &Loaded, p: &PipelineParams) -> Result<Stage> {
    let steps = pipeline_for(doc, &p.pipeline)?;
    match run_pipeline(&doc.graph, &steps)? {
        s @ Stage::Delta(_) => Ok(s),
        s => Err(Error::Config(format!("the pipeline ends in a {} stage; add a `delta` step", s.name()))),
    }
}

pub fn dsep(doc: &Loaded, p: &DsepParams) -> Result<Value> {
    let q = match &p.query {
        Some(q) if p.x.is_empty() && p.y.is_empty() && p.z.is_empty() => DsepQuery::parse(q)?,
        Some(_) => return Err(Error::Config("give either `query` or x/y/z, not both".into())),
        None => {
            if p.x.is_empty() || p.y.is_empty() {
                return Err(Error::InvalidQuery("x and y must be non-empty".into()));
            }
            DsepQuery::new(&p.x, &p.y, &p.z)
        }
    };
    let stage = run_pipeline(&doc.graph, &pipeline_for(doc, &p.pipeline)?)?;
    let v = check(&stage, &q)?;
    let mut out = json!({ "separated": v.separated });
    if !v.observable_alias_in_z.is_empty() {
        out["observable_alias_in_z"] = json!(v.observable_alias_in_z);
    }
    Ok(out)
}

pub fn vas(graph: Option<&GraphSource>, p: &VasParams) -> Result<Value> {
    let control = match &p.control {
        Some(c) => c.parse::<Control>()?,
        None => Control::NeverTreated,
    };
    let target = Target { g: p.g, t: p.t, control };
    let restrict = p.restrict.as_deref().map(RestrictionSet::parse_flags).transpose()?;
    let res = match (p.template, graph) {
        (Some(_), Some(_)) => return Err(Error::Config("give either a graph or `T`, not both".into())),
        (Some(periods), None) => {
            let r = restrict.unwrap_or_default();
            let g = build_template(&TemplateSpec { periods, restrictions: r })?;
            enumerate_vas(&g, &target, Some(&r))?
        }
        (None, Some(src)) => enumerate_vas(&load(src)?.graph, &target, restrict.as_ref())?,
        (None, None) => return Err(Error::Config("action `vas` needs a graph or `T`".into())),
    };
    Ok(serde_json::to_value(res).expect("adjustment result serializes"))
}

pub fn table(periods: u32) -> Result<Value> {
    Ok(serde_json::to_value(table1(periods)?).expect("table serializes"))
}

pub fn template(p: &TemplateParams) -> Result<Value> {
    let r = p.restrict.as_deref().map(RestrictionSet::parse_flags).transpose()?.unwrap_or_default();
    let g = build_template(&TemplateSpec { periods: p.periods, restrictions: r })?;
    Ok(serde_json::to_value(graph_to_json(&g)).expect("graph serializes"))
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Table1Params {
    #[serde(rename = "T")]
    periods: u32,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoParams {}

/// Dispatch one request.
pub fn run(action: Action, graph: Option<&GraphSource>, raw: &Value) -> Result<Value> {
    if !action.needs_graph() && action != Action::Vas && graph.is_some() {
        return Err(Error::Config(format!("action `{action}` takes no graph")));
    }
    match action {
        Action::Parse => {
            params::<NoParams>(raw)?;
            Ok(parse_result(&graph_arg(action, graph)?))
        }
        Action::Swig => swig(&graph_arg(action, graph)?, &params(raw)?),
        Action::Delta => delta(&graph_arg(action, graph)?, &params(raw)?),
        Action::Dsep => dsep(&graph_arg(action, graph)?, &params(raw)?),
        Action::Vas => {
            if raw.is_null() {
                return Err(Error::Config("action `vas` needs params g and t".into()));
            }
            vas(graph, &params(raw)?)
        }
        Action::Table1 => {
            let p: Table1Params = params(raw)?;
            table(p.periods)
        }
        Action::Template => template(&params(raw)?),
    }
}

/// Error body shared by the CLI's JSON mode and the service.
pub fn error_body(e: &Error) -> Value {
    let mut err = json!({ "code": e.code(), "message": e.to_string() });
    if let Some(loc) = e.location() {
        err["location"] = json!(loc);
    }
    json!({ "ok": false, "error": err })
}

//! Hand-transcribed figure graphs with expected verdicts.
//!
//! A fixture is a directory holding `graph.dswig`, `pipeline.dswig` and
//! `expect.json`. Cases may point at other graph or pipeline files in the same
//! directory; an empty `pipeline` string means "query the DAG itself".

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adjust::{enumerate_vas, Control, RestrictionSet, Target};
use crate::dsep::{check, DsepQuery, GraphLike};
use crate::dsl::{parse_graph, parse_pipeline, to_dsl, Pipeline};
use crate::error::{Error, Result};
use crate::graph::CausalGraph;
use crate::pipeline::run_pipeline;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Check {
    /// `query` in the `X _||_ Y | Z` syntax, evaluated given the fixed nodes.
    Dsep { query: String, expected: bool, cite: String },
    /// Whether no subset of `candidates` separates `x` and `y`.
    NoSeparatingSet { x: Vec<String>, y: Vec<String>, candidates: Vec<String>, expected: bool, cite: String },
    /// Minimal sufficient set on the DAG, as labels in the all-zero SWIG.
    MinimalSet {
        g: u32,
        t: u32,
        #[serde(default)]
        control: Option<String>,
        #[serde(default)]
        restrict: Option<String>,
        expected: Vec<String>,
        #[serde(default)]
        feasible: Option<bool>,
        cite: String,
    },
    /// Every valid adjustment set, found by exhaustive search.
    VasFamily {
        g: u32,
        t: u32,
        #[serde(default)]
        control: Option<String>,
        expected: Vec<Vec<String>>,
        cite: String,
    },
    Descendants { node: String, expected: Vec<String>, cite: String },
    Parents { node: String, expected: Vec<String>, cite: String },
}

impl Check {
    pub fn cite(&self) -> &str {
        match self {
            Check::Dsep { cite, .. }
            | Check::NoSeparatingSet { cite, .. }
            | Check::MinimalSet { cite, .. }
            | Check::VasFamily { cite, .. }
            | Check::Descendants { cite, .. }
            | Check::Parents { cite, .. } => cite,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Check::Dsep { query, expected, .. } => {
                format!("{query} is {}", if *expected { "separated" } else { "connected" })
            }
            Check::NoSeparatingSet { x, y, candidates, expected, .. } => format!(
                "{} separating set for {} vs {} within {{{}}}",
                if *expected { "no" } else { "some" },
                x.join(","),
                y.join(","),
                candidates.join(",")
            ),
            Check::MinimalSet { g, t, expected, .. } => {
                format!("S_{{{g},{t}}} = {{{}}}", expected.join(", "))
            }
            Check::VasFamily { g, t, expected, .. } => format!("VAS({g},{t}) has {} members", expected.len()),
            Check::Descendants { node, .. } => format!("descendants of {node}"),
            Check::Parents { node, .. } => format!("parents of {node}"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseSpec {
    name: String,
    #[serde(default)]
    graph: Option<String>,
    #[serde(default)]
    pipeline: Option<String>,
    checks: Vec<Check>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExpectFile {
    caption: String,
    cases: Vec<CaseSpec>,
}

#[derive(Debug, Clone)]
pub struct FixtureCase {
    pub name: String,
    pub graph_file: String,
    pub graph: CausalGraph,
    pub pipeline: Pipeline,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub dir: PathBuf,
    pub caption: String,
    pub cases: Vec<FixtureCase>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn ctx(path: &Path, e: Error) -> Error {
    Error::Config(format!("{}: {e}", path.display()))
}

pub fn load_fixture(dir: &Path) -> Result<Fixture> {
    let expect_path = dir.join("expect.json");
    let spec: ExpectFile = serde_json::from_str(&read(&expect_path)?)
        .map_err(|e| Error::Config(format!("{}: {e}", expect_path.display())))?;
    let mut cases = Vec::new();
    for c in spec.cases {
        let graph_file = c.graph.unwrap_or_else(|| "graph.dswig".into());
        let gp = dir.join(&graph_file);
        let graph = parse_graph(&read(&gp)?).map_err(|e| ctx(&gp, e))?;
        let pipeline = match c.pipeline.as_deref().unwrap_or("pipeline.dswig") {
            "" => Vec::new(),
            f => {
                let pp = dir.join(f);
                parse_pipeline(&read(&pp)?).map_err(|e| ctx(&pp, e))?
            }
        };
        cases.push(FixtureCase { name: c.name, graph_file, graph, pipeline, checks: c.checks });
    }
    Ok(Fixture { dir: dir.to_path_buf(), caption: spec.caption, cases })
}

/// Fixture directories (those containing `expect.json`) under `root`, sorted.
pub fn fixture_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(root).map_err(|e| Error::Io(format!("{}: {e}", root.display())))?;
    let mut out: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("expect.json").is_file())
        .collect();
    out.sort();
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub case: String,
    pub check: String,
    pub cite: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FixtureReport {
    pub fixture: String,
    pub caption: String,
    pub outcomes: Vec<CheckOutcome>,
}

impl FixtureReport {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }
    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.outcomes.iter().filter(|o| !o.passed)
    }
}

fn set(v: &[String]) -> BTreeSet<String> {
    v.iter().cloned().collect()
}

fn target(g: u32, t: u32, control: &Option<String>) -> Result<Target> {
    let control = match control {
        Some(c) => c.parse::<Control>()?,
        None => Control::NeverTreated,
    };
    Ok(Target { g, t, control })
}

/// Ok(None) when the check holds, Ok(Some(reason)) when it does not.
fn evaluate<G: GraphLike>(stage: &G, dag: &CausalGraph, c: &Check) -> Result<Option<String>> {
    let g = stage.causal_graph();
    let mismatch = |got: String| Some(format!("got {got}"));
    Ok(match c {
        Check::Dsep { query, expected, .. } => {
            let v = check(stage, &DsepQuery::parse(query)?)?;
            (v.separated != *expected).then(|| {
                let mut m = format!("got separated={}", v.separated);
                if !v.observable_alias_in_z.is_empty() {
                    m.push_str(&format!(" (observable alias in Z: {})", v.observable_alias_in_z.join(",")));
                }
                m
            })
        }
        Check::NoSeparatingSet { x, y, candidates, expected, .. } => {
            if candidates.len() > 16 {
                return Err(Error::TooLarge { nodes: candidates.len(), limit: 16 });
            }
            let mut witness = None;
            for m in 0u32..(1 << candidates.len()) {
                let z: Vec<String> =
                    (0..candidates.len()).filter(|k| m & (1 << k) != 0).map(|k| candidates[k].clone()).collect();
                if check(stage, &DsepQuery::new(x, y, &z))?.separated {
                    witness = Some(z);
                    break;
                }
            }
            match (witness, expected) {
                (Some(z), true) => mismatch(format!("separating set {{{}}}", z.join(","))),
                (None, false) => mismatch("no separating set".into()),
                _ => None,
            }
        }
        Check::MinimalSet { g: gg, t, control, restrict, expected, feasible, .. } => {
            let r = RestrictionSet::parse_flags(restrict.as_deref().unwrap_or("r-alpha,r-y"))?;
            let res = enumerate_vas(dag, &target(*gg, *t, control)?, Some(&r))?;
            if set(&res.minimal_potential) != set(expected) {
                mismatch(format!("{{{}}}", res.minimal_potential.join(", ")))
            } else if feasible.is_some_and(|f| f != res.feasible) {
                mismatch(format!("feasible={}", res.feasible))
            } else {
                None
            }
        }
        Check::VasFamily { g: gg, t, control, expected, .. } => {
            let res = enumerate_vas(dag, &target(*gg, *t, control)?, None)?;
            let got: BTreeSet<BTreeSet<String>> = res.vas_family.sets().iter().map(|s| set(s)).collect();
            let want: BTreeSet<BTreeSet<String>> = expected.iter().map(|s| set(s)).collect();
            (got != want).then(|| format!("got {:?}", res.vas_family.sets()))
        }
        Check::Descendants { node, expected, .. } => {
            let got = g.descendants(node)?;
            (got != set(expected)).then(|| format!("got {got:?}"))
        }
        Check::Parents { node, expected, .. } => {
            let v = g.resolve(node)?;
            let got: BTreeSet<String> = g.parents(v).iter().map(|&p| g.node(p).id.clone()).collect();
            (got != set(expected)).then(|| format!("got {got:?}"))
        }
    })
}

/// Run every case: round-trip its graph through the DSL, execute the
/// pipeline, and evaluate each check. Errors count as failures.
pub fn run_fixture(f: &Fixture) -> FixtureReport {
    let mut outcomes = Vec::new();
    for case in &f.cases {
        let round_trip = to_dsl(&case.graph).and_then(|s| parse_graph(&s));
        let ok = matches!(&round_trip, Ok(g) if *g == case.graph);
        outcomes.push(CheckOutcome {
            case: case.name.clone(),
            check: format!("{} round-trips through the DSL", case.graph_file),
            cite: "format invariant".into(),
            passed: ok,
            detail: (!ok).then(|| format!("{:?}", round_trip.err())),
        });
        let stage = run_pipeline(&case.graph, &case.pipeline);
        for c in &case.checks {
            let verdict = match &stage {
                Ok(s) => evaluate(s, &case.graph, c),
                Err(e) => Err(e.clone()),
            };
            let (passed, detail) = match verdict {
                Ok(None) => (true, None),
                Ok(Some(m)) => (false, Some(m)),
                Err(e) => (false, Some(format!("error: {e}"))),
            };
            outcomes.push(CheckOutcome {
                case: case.name.clone(),
                check: c.describe(),
                cite: c.cite().to_string(),
                passed,
                detail,
            });
        }
    }
    let fixture = f.dir.file_name().map_or_else(|| f.dir.display().to_string(), |n| n.to_string_lossy().into_owned());
    FixtureReport { fixture, caption: f.caption.clone(), outcomes }
}

/// Load and run every fixture under `root`.
pub fn run_all(root: &Path) -> Result<Vec<FixtureReport>> {
    fixture_dirs(root)?.iter().map(|d| load_fixture(d).map(|f| run_fixture(&f))).collect()
}

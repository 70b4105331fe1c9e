//! Causal-graph engine for difference-in-differences: SWIG and Δ-SWIG
//! construction, d-separation, valid adjustment sets, and a panel simulator
//! with a conditional DiD estimator to check the graphical claims on data.

pub mod adjust;
pub mod dsep;
pub mod dsl;
pub mod error;
pub mod estimate;
pub mod fixtures;
pub mod graph;
pub mod pipeline;
pub mod render;
pub mod simulate;
pub mod transform;

pub use adjust::{
    build_template, enumerate_vas, feasibility, minimal_sufficient_set, table1, AdjustmentResult, Control,
    RestrictionSet, Target, TemplateSpec, VasFamily,
};
pub use dsep::{check, d_separated, d_separated_oracle, implied_ci, DsepQuery, GraphLike, Verdict};
pub use dsl::{parse_document, parse_graph, parse_pipeline, to_dsl, Document, Pipeline, Step};
pub use error::{Error, Location, Result};
pub use graph::{descendants, CausalGraph, Edge, EdgeLabel, GraphBuilder, Node, NodeKind, Role};
pub use pipeline::{run_pipeline, Stage};
pub use render::to_dot;
pub use transform::{
    add_difference, apply_swig, apply_swig_with, prune, DeltaSpec, DeltaSwig, Intervention, Swig,
    SwigOptions,
};
pub use simulate::{oracle_att, simulate_panel, Panel, SimConfig, NEVER};
pub use estimate::{
    did_gt, event_study, pretrend_battery, EstimateOptions, EstimateResult, PretrendReport, Strategy,
};

//! Library half of the `dswig` tool: the action layer shared by the CLI and
//! the HTTP service.

pub mod api;
pub mod service;

pub use api::{run, Action, ApiRequest, GraphSource};

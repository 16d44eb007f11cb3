//! Command implementations and the HTTP service behind the `ragsearch`
//! binary. CLI and HTTP share the functions in [`commands`], so both
//! surfaces return byte-identical JSON for the same request.

pub mod commands;
pub mod service;

pub use commands::{ContextRequest, SearchHit, SearchRequest, SearchResponse};
pub use service::{router, AppState, ServiceConfig};

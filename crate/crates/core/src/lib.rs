//! All-to-all collective scheduling on arbitrary direct-connect topologies:
//! graph generators, concurrent multi-commodity flow formulations, route
//! extraction and baselines, analytic bounds, schedule compilation,
//! deadlock-free layering and evaluation.

pub mod bounds;
pub mod deadlock;
pub mod error;
pub mod graph;
pub mod mcf;
pub mod routes;
pub mod schedc;
pub mod simkit;

pub use error::{Error, Result};

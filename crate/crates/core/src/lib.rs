//! Dataset characteristics and graph-recommender accuracy.
//!
//! The crate samples size-reduced sub-datasets from a seed interaction
//! graph, characterizes each one (classical statistics plus clustering and
//! assortativity of the bipartite topology), trains small graph
//! collaborative-filtering models on them and fits an explanatory
//! least-squares model from characteristics to accuracy.

pub mod characteristics;
pub mod error;
pub mod explainer;
pub mod graph;
pub mod metrics;
pub mod models;
pub mod numerics;
pub mod par;
pub mod pipeline;
pub mod rng;
pub mod sampler;
pub mod split;
pub mod synthetic;

pub use error::{Error, Result};
pub use graph::{BipartiteGraph, ProjectedGraph, Side};

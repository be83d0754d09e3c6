//! Lane-level road network graphs from dense grid maps.
//!
//! The crate synthesizes road scenes and self-supervised trajectory labels,
//! provides the partial-label training losses, extracts a lane graph from
//! dense affordances with a search-based procedure, and checks every graph
//! against a depth-three DAG lane model.

pub mod augment;
pub mod error;
pub mod graphgen;
pub mod grid;
pub mod learning;
pub mod metrics;
pub mod oracle;
pub mod pipeline;
pub mod scene;
pub mod tensor;

pub use error::{Error, Result};
pub use grid::{angle_diff, Cell, GridMap, GridSpec, Point};

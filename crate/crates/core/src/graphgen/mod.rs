//! Search-based lane-graph extraction and the graph model.

pub mod generate;
pub mod graph;
pub mod search;
pub mod unify;

pub use generate::{generate_graph, GraphParams};
pub use graph::{validate_graph, Edge, EdgeKind, LaneGraph, Vertex, VertexKind, Violation, ViolationKind};
pub use search::{astar, extract_points, preprocess_lane_map, AdjacencyField, SearchPath};
pub use unify::{divergence_angle, lookahead_direction, reverse_unify, unify, UnifyParams, Unified};

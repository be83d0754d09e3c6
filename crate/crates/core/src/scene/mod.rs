//! Road layouts, observation rasters, routes and reference graphs.

pub mod geometry;
pub mod layout;
pub mod raster;
pub mod routes;
pub mod truth;

pub use layout::{
    build_junction, build_layout, load_library, ArmConfig, Connection, Family, LaneSpec, LayoutConfig, Marking,
    Port, PortKind, RoadLayout,
};
pub use raster::{rasterize_scene, Region};
pub use routes::{enumerate_routes, Route};
pub use truth::ground_truth_graph;

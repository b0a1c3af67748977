//! Micro-transit service zone design.
//!
//! The pipeline has two phases. [`cliquegen`] enumerates every candidate zone
//! whose diameter is within the bound `D` and that is closed under convex-hull
//! extension. [`coverage`] then picks the `m` candidates that jointly cover the
//! most origin-destination demand, solved exactly by branch and bound.
//!
//! Supporting modules: [`instance`] (graph, demand, distances, objective),
//! [`geometry`] (planar hulls), [`baseline`] (the greedy seed-and-grow
//! heuristic used for comparison), [`synth`] (seeded Delaunay instances and the
//! sensitivity grid), [`ingest`] (trip filtering and hexagonal binning) and
//! [`geojson`] (map export).

pub mod baseline;
pub mod cliquegen;
pub mod coverage;
pub mod error;
pub mod geojson;
pub mod geometry;
pub mod ingest;
pub mod instance;
pub mod nodeset;
pub mod synth;

pub use error::{Error, Result};
pub use instance::{DemandTable, DistanceMatrix, Edge, Instance, Node, NodeId, Zone};

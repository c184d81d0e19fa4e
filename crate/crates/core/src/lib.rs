//! Plan grounding for embodied task planning.
//!
//! The crate covers the whole pipeline at desk scale: synthetic floorplans,
//! exploration pose sets, simulated open-vocabulary detection with object
//! list aggregation, prompt assembly and plan parsing, grounding checks for
//! hallucinated objects and counterfactual orderings, instruction dataset
//! construction, and the majority-vote evaluation protocol.
//!
//! Geometry and clustering are generic over [`num::Scalar`] (`f32`/`f64`);
//! scenes and the pipeline use the `f64` aliases below.

pub mod data;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod exploration;
pub mod geom;
pub mod grounding;
pub mod num;
pub mod perception;
pub mod plan;
pub mod rng;
pub mod scene;
pub mod scenegen;

pub use error::{Error, Result};

/// A point in scene coordinates (meters).
pub type Point = geom::Point2<f64>;
pub type PointF32 = geom::Point2<f32>;
/// An axis-aligned rectangle in scene coordinates (meters).
pub type Rect = geom::Rect<f64>;
pub type RectF32 = geom::Rect<f32>;
pub type Clustering = exploration::kmeans::Clustering<f64>;
pub type ClusteringF32 = exploration::kmeans::Clustering<f32>;

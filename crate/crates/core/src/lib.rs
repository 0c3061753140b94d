//! Computing with Cantor pseudogroup actions: leveled Cantor spaces and their
//! canonical metrics, prefix-rewrite pseudogroups, separated-set entropy,
//! solenoid classification, fusion, and the free-group subtree space.

pub mod cylinder;
pub mod entropy;
pub mod error;
pub mod fusion;
pub mod geometry;
pub mod metric;
pub mod rational;
pub mod pseudogroup;
pub mod solenoid;
pub mod space;
pub mod spec;
pub mod treespace;

pub use cylinder::CylinderSet;
pub use error::{Error, Result};
pub use metric::{Metric, MetricSpace, WeightedMetric, Weights};
pub use space::{LevelSpace, Point};

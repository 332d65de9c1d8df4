//! Fire arrival time estimation from sparse satellite fire detections.
//!
//! The crate reconstructs a fire arrival time field on a regular grid from
//! satellite fire/non-fire pixels: detections are organized into a fire
//! propagation graph, shortest paths seed an initial estimate, and an
//! iterative interpolation refines it against the detection data
//! likelihood. Companion modules derive rate-of-spread fields with
//! uncertainty, adjust fuel moisture from forecast/estimate disagreement,
//! score estimates against ground truth, and generate synthetic scenarios.

pub mod assess;
pub mod config;
pub mod detection;
pub mod error;
pub mod estimator;
pub mod fmc;
pub mod geo;
pub mod graph;
pub mod ignition;
pub mod grid;
pub mod io;
pub mod likelihood;
pub mod parallel;
pub mod rosuq;
pub mod spline;
pub mod synth;

pub use error::FireError;

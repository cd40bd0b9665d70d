//! Coded slotted ALOHA laboratory.
//!
//! Monte Carlo simulation of coded random access under successive
//! interference cancellation, density-evolution thresholds, degree
//! distribution optimization, and the frameless, coupled and multi-frame
//! protocol variants.

pub mod analysis;
pub mod codes;
pub mod harness;
pub mod model;
pub mod optimize;
pub mod sic;
pub mod traffic;
pub mod variants;

pub use model::{ContentionGraph, DecodeTrace, DegreeDistribution, Metrics, TrafficConfig};
pub use traffic::SimRng;

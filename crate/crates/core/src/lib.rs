//! Design and evaluation toolkit for hybrid microwave/fiber wide-area
//! networks that run close to the speed of light in vacuum.
//!
//! The pipeline has four stages, each backed by a module:
//!
//! 1. [`los`]: which tower-to-tower microwave hops clear terrain, Earth
//!    curvature and the Fresnel zone, assembled into a hop graph.
//! 2. [`design`]: which site-to-site microwave links to build under a
//!    tower budget so that traffic-weighted stretch is minimal.
//! 3. [`capacity`]: how many parallel tower series each built link needs
//!    for a target aggregate rate, and what it costs.
//! 4. [`weather`] and [`sim`]: how the result behaves under rain outages
//!    and under packet-level load.
//!
//! [`fiber`] covers the fiber-only baseline, [`traffic`] the demand models
//! and [`graph`] the shortest-path machinery shared by all of the above.

pub mod capacity;
pub mod design;
pub mod error;
pub mod fiber;
pub mod geo;
pub mod graph;
pub mod los;
pub mod par;
pub mod sim;
pub mod stats;
pub mod synth;
pub mod traffic;
pub mod weather;

pub use error::{Error, Result};
pub use geo::{GeoPoint, LatencyModel, Medium};
pub use stats::{StretchStats, Weighting};

//! First-passage percolation on `Z^d` and on the rooted `d`-ary tree.
//!
//! The crate is organized bottom-up:
//!
//! - [`weights`]: coupling functions `τ: [0,1] → R`, so that an edge weight is `τ(U)`.
//! - [`measures`]: finite atomic measures, Wasserstein / total variation / KL.
//! - [`lattice`]: stateless `Z^d` environments, Dijkstra geodesics, length statistics.
//! - [`tree`]: exact tree minima by branch and bound, Monte Carlo over seeds.
//! - [`variational`]: the tree time constant, its tilted minimizer, and
//!   concavity / derivative probes.
//!
//! All randomness is a pure function of `(seed, key)` (see [`rng`]), so every
//! result is reproducible regardless of thread count.

pub mod lattice;
pub mod measures;
pub mod par;
pub mod rng;
pub mod stats;
pub mod tree;
pub mod variational;
pub mod weights;

pub use lattice::{BoxSpec, GeodesicRecord, LatticeEnvironment, LatticePoint};
pub use measures::{DiscreteMeasure, GriddedDensity};
pub use tree::{TreeEnvironment, TreeGeodesicRecord};
pub use variational::TiltedMinimizer;
pub use weights::{ShiftMode, WeightFunction, WeightLawSummary};
